// @vitest-environment happy-dom
import { describe, expect, it, vi } from "vitest";

import { applyEvent, applySnapshot, initialState } from "../src/state.js";
import { renderApp, type UiHandlers } from "../src/ui.js";
import type { ApiEvent, SessionInfo, Snapshot } from "../src/types.js";

const session: SessionInfo = {
  id: "SES0001", course: "EXTC", stream: "B.Tech", trimester: "T5",
  opened_s: 1700000000, closed_s: null, state: "open",
};

function handlers(overrides: Partial<UiHandlers> = {}): UiHandlers {
  return {
    onOpenSession: vi.fn(),
    onCloseSession: vi.fn(),
    onRegister: vi.fn(),
    onDownloadReport: vi.fn(),
    onReconnect: vi.fn(),
    ...overrides,
  };
}

function mount() {
  const root = document.createElement("main");
  document.body.replaceChildren(root);
  return root;
}

function snapshot(records: Snapshot["records"]): Snapshot {
  return { v: 1, kind: "snapshot", session, records, corrupt_frames: 0, last_seq: 0 };
}

describe("console rendering", () => {
  it("resolved event renders a row with the student's name", () => {
    let state = applySnapshot(initialState(), snapshot([]));
    const ev: ApiEvent = {
      v: 1, seq: 1, session: "SES0001", kind: "resolved", at_s: 1700000001,
      tag_id: "00000000AA",
      student: { id: "S000001", name: "Asha Rao", course: "EXTC", stream: "B.Tech",
                 trimester: "T5", tag_id: "00000000AA", photo_ref: null,
                 registered_s: 0, active: true },
      record: { session_ref: "SES0001", tag_id: "00000000AA", student_ref: "S000001",
                student_name: "Asha Rao", first_seen_s: 1, last_seen_s: 1, status: "present" },
    };
    state = applyEvent(state, ev);
    const root = mount();
    renderApp(document, root, state, handlers());
    const row = root.querySelector(".feed-row.resolved");
    expect(row?.textContent).toContain("Asha Rao");
    expect(row?.textContent).toContain("EXTC");
  });

  it("corrupt event shows an error badge and does not block the feed", () => {
    let state = applySnapshot(initialState(), snapshot([]));
    state = applyEvent(state, {
      v: 1, seq: 1, session: "SES0001", kind: "corrupt", at_s: 2, corrupt_count: 1,
    });
    state = applyEvent(state, {
      v: 1, seq: 2, session: "SES0001", kind: "unknown", at_s: 3, tag_id: "00000000AB",
      record: { session_ref: "SES0001", tag_id: "00000000AB", student_ref: null,
                student_name: null, first_seen_s: 3, last_seen_s: 3,
                status: "pending_registration" },
    });
    const root = mount();
    renderApp(document, root, state, handlers());
    expect(root.querySelector(".badge-error")).toBeTruthy();
    expect(root.querySelectorAll(".feed-row")).toHaveLength(2);
    expect(root.querySelector("#feed h2")?.textContent).toContain("1 corrupt");
  });

  it("pending registration form pre-fills a read-only tag id", () => {
    const state = applySnapshot(initialState(), snapshot([
      { session_ref: "SES0001", tag_id: "00000000AB", student_ref: null,
        student_name: null, first_seen_s: 3, last_seen_s: 3,
        status: "pending_registration" },
    ]));
    const root = mount();
    renderApp(document, root, state, handlers());
    const tagInput = root.querySelector<HTMLInputElement>('.register-form input[name="tag_id"]');
    expect(tagInput?.value).toBe("00000000AB");
    expect(tagInput?.hasAttribute("readonly")).toBe(true);
    // course fields default to the session's details
    const course = root.querySelector<HTMLInputElement>('.register-form input[name="course"]');
    expect(course?.value).toBe("EXTC");
    // photo attachment reference is optional
    expect(root.querySelector('.register-form input[name="photo_ref"]')).toBeTruthy();
  });

  it("empty name is blocked client-side with an inline error", () => {
    const onRegister = vi.fn();
    const state = applySnapshot(initialState(), snapshot([
      { session_ref: "SES0001", tag_id: "00000000AB", student_ref: null,
        student_name: null, first_seen_s: 3, last_seen_s: 3,
        status: "pending_registration" },
    ]));
    const root = mount();
    renderApp(document, root, state, handlers({ onRegister }));
    const form = root.querySelector<HTMLFormElement>(".register-form");
    form?.dispatchEvent(new Event("submit", { cancelable: true }));
    expect(onRegister).not.toHaveBeenCalled();
    expect(root.querySelector(".form-error")?.textContent).toContain("name");
  });

  it("sequence gaps surface a visible warning", () => {
    let state = applySnapshot(initialState(), snapshot([]));
    state = { ...state, lastSeq: 1 };
    state = applyEvent(state, {
      v: 1, seq: 5, session: "SES0001", kind: "corrupt", at_s: 9, corrupt_count: 1,
    });
    const root = mount();
    renderApp(document, root, state, handlers());
    expect(root.querySelector(".gap-warning")?.textContent).toContain("5");
  });

  it("close button maps to the close handler and disables when closed", () => {
    const onCloseSession = vi.fn();
    let state = applySnapshot(initialState(), snapshot([]));
    const root = mount();
    renderApp(document, root, state, handlers({ onCloseSession }));
    root.querySelector<HTMLButtonElement>("#close-session")?.click();
    expect(onCloseSession).toHaveBeenCalledOnce();

    state = applyEvent(state, {
      v: 1, seq: 1, session: "SES0001", kind: "session_closed", at_s: 10,
      session_info: { ...session, closed_s: 10, state: "closed" },
    });
    renderApp(document, root, state, handlers());
    expect(
      root.querySelector<HTMLButtonElement>("#close-session")?.hasAttribute("disabled"),
    ).toBe(true);
  });
});
