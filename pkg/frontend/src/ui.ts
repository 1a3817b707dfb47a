// DOM rendering. Pure functions from ConsoleState to elements; all facts
// shown come from server payloads held in the state.

import type { ConsoleState, FeedRow } from "./state.js";
import { pendingRegistrations } from "./state.js";
import type { RecordInfo } from "./types.js";

export interface UiHandlers {
  onOpenSession(course: string, stream: string, trimester: string): void;
  onCloseSession(): void;
  onRegister(fields: {
    name: string;
    course: string;
    stream: string;
    trimester: string;
    tag_id: string;
    photo_ref?: string | null;
  }, errorSink: HTMLElement): void;
  onDownloadReport(): void;
  onReconnect(): void;
}

function el<K extends keyof HTMLElementTagNameMap>(
  doc: Document,
  tag: K,
  attrs: Record<string, string> = {},
  text = "",
): HTMLElementTagNameMap[K] {
  const node = doc.createElement(tag);
  for (const [k, v] of Object.entries(attrs)) node.setAttribute(k, v);
  if (text) node.textContent = text;
  return node;
}

function fmtClock(atS: number): string {
  // wall-clock timestamps render as local time; simulated ones as seconds
  if (atS > 1e9) return new Date(atS * 1000).toLocaleTimeString();
  return `t=${atS.toFixed(1)}s`;
}

export function renderBanner(doc: Document, state: ConsoleState): HTMLElement {
  const banner = el(doc, "div", { id: "banner", class: `banner ${state.connection}` });
  banner.append(el(doc, "span", { class: "conn" }, `stream: ${state.connection}`));
  if (state.readerStatus) {
    banner.append(el(doc, "span", { class: "reader" }, `reader: ${state.readerStatus}`));
  }
  if (state.seqGaps.length > 0) {
    banner.append(
      el(doc, "span", { class: "gap-warning" }, `sequence gaps: ${state.seqGaps.join(",")}`),
    );
  }
  if (state.lastError) {
    banner.append(el(doc, "span", { class: "error" }, state.lastError));
  }
  return banner;
}

export function renderSessionPanel(
  doc: Document,
  state: ConsoleState,
  handlers: UiHandlers,
): HTMLElement {
  const panel = el(doc, "section", { id: "session-panel" });
  if (state.session) {
    const s = state.session;
    panel.append(
      el(doc, "h2", {}, `${s.course} — ${s.id}`),
      el(doc, "p", { class: "session-meta" },
        `${s.stream} ${s.trimester} · ${s.state} · opened ${fmtClock(s.opened_s)}`),
    );
    const controls = el(doc, "div", { class: "controls" });
    const closeBtn = el(doc, "button", { id: "close-session" }, "Close session");
    if (s.state === "closed") closeBtn.setAttribute("disabled", "disabled");
    closeBtn.addEventListener("click", () => handlers.onCloseSession());
    const download = el(doc, "button", { id: "download-report" }, "Download report (CSV)");
    download.addEventListener("click", () => handlers.onDownloadReport());
    const reconnect = el(doc, "button", { id: "force-reconnect" }, "Reconnect stream");
    reconnect.addEventListener("click", () => handlers.onReconnect());
    controls.append(closeBtn, download, reconnect);
    panel.append(controls);
  } else {
    const form = el(doc, "form", { id: "open-session-form" });
    const course = el(doc, "input", { name: "course", placeholder: "Course", required: "required" });
    const stream = el(doc, "input", { name: "stream", placeholder: "Stream" });
    const trimester = el(doc, "input", { name: "trimester", placeholder: "Trimester" });
    const submit = el(doc, "button", { type: "submit" }, "Open session");
    form.append(course, stream, trimester, submit);
    form.addEventListener("submit", (ev) => {
      ev.preventDefault();
      handlers.onOpenSession(course.value, stream.value, trimester.value);
    });
    panel.append(el(doc, "h2", {}, "No session"), form);
  }
  return panel;
}

function feedRowElement(doc: Document, row: FeedRow): HTMLElement {
  const tr = el(doc, "tr", { class: `feed-row ${row.kind}`, "data-seq": String(row.seq) });
  tr.append(
    el(doc, "td", { class: "seq" }, String(row.seq)),
    el(doc, "td", { class: "time" }, fmtClock(row.atS)),
    el(doc, "td", { class: "tag" }, row.tagId ?? ""),
  );
  const labelCell = el(doc, "td", { class: "label" }, row.label);
  if (row.kind === "corrupt") {
    labelCell.prepend(el(doc, "span", { class: "badge badge-error" }, "✗"));
  }
  tr.append(labelCell, el(doc, "td", { class: "detail" }, row.detail));
  return tr;
}

export function renderFeed(doc: Document, state: ConsoleState): HTMLElement {
  const section = el(doc, "section", { id: "feed" });
  section.append(
    el(doc, "h2", {}, `Live feed (${state.corruptFrames} corrupt reads)`),
  );
  const table = el(doc, "table", { class: "feed-table" });
  const head = el(doc, "tr");
  for (const col of ["#", "time", "tag", "event", "detail"]) {
    head.append(el(doc, "th", {}, col));
  }
  table.append(head);
  // newest on top
  for (const row of [...state.feed].reverse()) {
    table.append(feedRowElement(doc, row));
  }
  section.append(table);
  return section;
}

export function renderPendingQueue(
  doc: Document,
  state: ConsoleState,
  handlers: UiHandlers,
): HTMLElement {
  const section = el(doc, "section", { id: "pending" });
  const pending = pendingRegistrations(state);
  section.append(el(doc, "h2", {}, `Pending registrations (${pending.length})`));
  for (const record of pending) {
    section.append(registrationForm(doc, record, state, handlers));
  }
  return section;
}

function registrationForm(
  doc: Document,
  record: RecordInfo,
  state: ConsoleState,
  handlers: UiHandlers,
): HTMLElement {
  const form = el(doc, "form", { class: "register-form", "data-tag": record.tag_id });
  const tag = el(doc, "input", { name: "tag_id", readonly: "readonly", value: record.tag_id });
  tag.value = record.tag_id; // read-only, pre-filled from the scan
  const name = el(doc, "input", { name: "name", placeholder: "Name", required: "required" });
  const course = el(doc, "input", {
    name: "course", placeholder: "Course", value: state.session?.course ?? "",
  });
  const stream = el(doc, "input", {
    name: "stream", placeholder: "Stream", value: state.session?.stream ?? "",
  });
  const trimester = el(doc, "input", {
    name: "trimester", placeholder: "Trimester", value: state.session?.trimester ?? "",
  });
  // photo capture reduced to an opaque attachment reference
  const photo = el(doc, "input", {
    name: "photo_ref", placeholder: "Photo ref (optional)",
  });
  const error = el(doc, "p", { class: "form-error" });
  const submit = el(doc, "button", { type: "submit" }, "Register");
  form.append(tag, name, course, stream, trimester, photo, submit, error);
  form.addEventListener("submit", (ev) => {
    ev.preventDefault();
    if (!name.value.trim()) {
      error.textContent = "name must not be empty";
      return;
    }
    error.textContent = "";
    handlers.onRegister(
      {
        name: name.value,
        course: course.value,
        stream: stream.value,
        trimester: trimester.value,
        tag_id: record.tag_id,
        photo_ref: photo.value.trim() || null,
      },
      error,
    );
  });
  return form;
}

export function renderApp(
  doc: Document,
  root: HTMLElement,
  state: ConsoleState,
  handlers: UiHandlers,
): void {
  root.replaceChildren(
    renderBanner(doc, state),
    renderSessionPanel(doc, state, handlers),
    renderPendingQueue(doc, state, handlers),
    renderFeed(doc, state),
  );
}
