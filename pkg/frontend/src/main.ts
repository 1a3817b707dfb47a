// Console entry point: wire state, stream, API and DOM together.

import { ApiClient, ApiError } from "./api.js";
import { EventStreamClient } from "./sse.js";
import {
  applyConnection,
  applyEvent,
  applySnapshot,
  initialState,
  type ConsoleState,
} from "./state.js";
import { renderApp, type UiHandlers } from "./ui.js";

const TOKEN_KEY = "tagroll.token"; // the only client-side persistence

function baseUrl(): string {
  // served by the gateway under /ui/, so the API lives at the origin root
  return window.location.origin;
}

let state: ConsoleState = initialState();
let api: ApiClient | null = null;
let stream: EventStreamClient | null = null;

const root = document.getElementById("app") as HTMLElement;

function update(next: ConsoleState): void {
  state = next;
  renderApp(document, root, state, handlers);
}

function connectStream(sessionId: string, token: string): void {
  stream?.stop();
  stream = new EventStreamClient(baseUrl(), sessionId, token, {
    onSnapshot: (snapshot) => update(applySnapshot(state, snapshot)),
    onEvent: (event) => update(applyEvent(state, event)),
    onStatus: (status) => update(applyConnection(state, status)),
  });
  void stream.start();
}

const handlers: UiHandlers = {
  onOpenSession(course, stream_, trimester) {
    if (!api) return;
    api
      .openSession(course, stream_, trimester)
      .then((session) => {
        update({ ...state, session, lastError: "" });
        connectStream(session.id, currentToken());
      })
      .catch((err: unknown) => {
        update({ ...state, lastError: err instanceof Error ? err.message : String(err) });
      });
  },

  onCloseSession() {
    if (!api || !state.session) return;
    api
      .closeSession(state.session.id)
      .then((session) => update({ ...state, session, lastError: "" }))
      .catch((err: unknown) => {
        update({ ...state, lastError: err instanceof Error ? err.message : String(err) });
      });
  },

  onRegister(fields, errorSink) {
    if (!api) return;
    api
      .registerStudent(fields)
      .then(() => {
        errorSink.textContent = "";
        // the `registered` stream event updates the record and the queue
      })
      .catch((err: unknown) => {
        errorSink.textContent =
          err instanceof ApiError ? `${err.code}: ${err.message}` : String(err);
      });
  },

  onDownloadReport() {
    if (!api || !state.session) return;
    const sessionId = state.session.id;
    api
      .downloadReport(sessionId)
      .then((bytes) => {
        const blob = new Blob([bytes.buffer as ArrayBuffer], { type: "text/csv" });
        const a = document.createElement("a");
        a.href = URL.createObjectURL(blob);
        a.download = `${sessionId}.csv`;
        a.click();
        URL.revokeObjectURL(a.href);
      })
      .catch((err: unknown) => {
        update({ ...state, lastError: err instanceof Error ? err.message : String(err) });
      });
  },

  onReconnect() {
    stream?.forceReconnect();
  },
};

function currentToken(): string {
  const input = document.getElementById("token") as HTMLInputElement;
  return input.value.trim();
}

function boot(): void {
  const tokenInput = document.getElementById("token") as HTMLInputElement;
  tokenInput.value = localStorage.getItem(TOKEN_KEY) ?? "";
  tokenInput.addEventListener("change", () => {
    localStorage.setItem(TOKEN_KEY, tokenInput.value.trim());
    api = new ApiClient(baseUrl(), tokenInput.value.trim());
  });
  api = new ApiClient(baseUrl(), tokenInput.value.trim());
  renderApp(document, root, state, handlers);
}

boot();
