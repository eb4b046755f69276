/**
 * Browser bootstrap: bind the store to #app and translate DOM events into
 * store actions. Configuration is a single service base URL taken from the
 * <meta name="api-base"> tag (same origin when absent).
 */

import { ConsoleApi } from "./api.js";
import { renderApp } from "./render.js";
import { Store } from "./state.js";

const POLL_INTERVAL_MS = 5000;

function baseUrl(): string {
  const meta = document.querySelector('meta[name="api-base"]');
  return meta?.getAttribute("content") ?? "";
}

function actionTarget(event: Event): HTMLElement | null {
  const origin = event.target as HTMLElement | null;
  return origin?.closest("[data-action]") ?? null;
}

export function mount(root: HTMLElement): Store {
  const store = new Store(new ConsoleApi({ baseUrl: baseUrl() }));
  store.subscribe((state) => {
    root.innerHTML = renderApp(state);
  });

  root.addEventListener("click", (event) => {
    const target = actionTarget(event);
    if (!target) {
      return;
    }
    const action = target.dataset.action;
    if (action === "new-session") {
      void store.newSession();
    } else if (action === "open-session") {
      const id = target.dataset.sessionId;
      if (id) {
        void store.openSession(id);
      }
    } else if (action === "approve") {
      void store.approve();
    } else if (action === "reject") {
      void store.reject();
    } else if (action === "open-editor") {
      store.openEditor();
    } else if (action === "close-editor") {
      store.closeEditor();
    } else if (action === "dismiss-banner") {
      store.dismissBanner();
    }
  });

  root.addEventListener("submit", (event) => {
    const form = actionTarget(event) as HTMLFormElement | null;
    if (!form) {
      return;
    }
    event.preventDefault();
    const data = new FormData(form);
    if (form.dataset.action === "submit-turn") {
      const comment = String(data.get("client_comment") ?? "").trim();
      const draft = String(data.get("counselor_draft") ?? "").trim();
      if (!comment || !draft) {
        return; // required fields; no network call on empty input
      }
      void store.submit(comment, draft);
    } else if (form.dataset.action === "save-edit") {
      const text = String(data.get("edited_reply") ?? "").trim();
      if (text) {
        void store.saveEdit(text);
      }
    }
  });

  void store.refreshSessions();
  setInterval(() => {
    if (!store.state.busy) {
      void store.refreshSessions();
    }
  }, POLL_INTERVAL_MS);
  return store;
}

const appRoot = typeof document !== "undefined" ? document.getElementById("app") : null;
if (appRoot) {
  mount(appRoot);
}
