/**
 * Console state: one plain object, mutated only through Store actions,
 * every action backed by an API call. Clearing the state and re-fetching
 * rebuilds the identical view because nothing is kept client-side.
 */

import {
  ApiError,
  ConsoleApi,
  PendingReviewView,
  SessionSummary,
  SessionView,
  TrailEntry,
} from "./api.js";

export interface Banner {
  kind: "error" | "blocked" | "info";
  message: string;
  /** Verdict trail for blocked generations; distances only, never matched text. */
  trail: TrailEntry[];
}

export interface AppState {
  connected: boolean;
  sessions: SessionSummary[];
  selectedId: string | null;
  session: SessionView | null;
  banner: Banner | null;
  busy: boolean;
  editorOpen: boolean;
  editorText: string;
}

export function initialState(): AppState {
  return {
    connected: false,
    sessions: [],
    selectedId: null,
    session: null,
    banner: null,
    busy: false,
    editorOpen: false,
    editorText: "",
  };
}

/**
 * The approve control stays disabled unless the gate verdict on the text
 * that would be released is PASS.
 */
export function canApprove(pending: PendingReviewView | null): boolean {
  if (!pending) {
    return false;
  }
  if (pending.state === "edited") {
    return pending.edit_gate !== null && !pending.edit_gate.blocked;
  }
  if (pending.state !== "awaiting_review") {
    return false;
  }
  const last = pending.trail[pending.trail.length - 1];
  return last !== undefined && !last.verdict.blocked;
}

export type Listener = (state: AppState) => void;

export class Store {
  readonly state: AppState;
  private readonly api: ConsoleApi;
  private readonly listeners: Listener[] = [];

  constructor(api: ConsoleApi) {
    this.api = api;
    this.state = initialState();
  }

  subscribe(listener: Listener): void {
    this.listeners.push(listener);
  }

  private emit(): void {
    for (const listener of this.listeners) {
      listener(this.state);
    }
  }

  private fail(error: unknown): void {
    if (error instanceof ApiError) {
      this.state.banner = {
        kind: error.code === "retries_exhausted" || error.code === "edit_blocked" ? "blocked" : "error",
        message: `${error.code}: ${error.message}`,
        trail: error.trail(),
      };
    } else {
      this.state.connected = false;
      this.state.banner = {
        kind: "error",
        message: error instanceof Error ? error.message : String(error),
        trail: [],
      };
    }
  }

  private async run(action: () => Promise<void>): Promise<void> {
    this.state.busy = true;
    this.state.banner = null;
    this.emit();
    try {
      await action();
      this.state.connected = true;
    } catch (error) {
      this.fail(error);
    } finally {
      this.state.busy = false;
      this.emit();
    }
  }

  async refreshSessions(): Promise<void> {
    try {
      this.state.sessions = await this.api.listSessions();
      this.state.connected = true;
    } catch (error) {
      this.fail(error);
    }
    this.emit();
  }

  async openSession(sessionId: string): Promise<void> {
    await this.run(async () => {
      this.state.session = await this.api.getSession(sessionId);
      this.state.selectedId = sessionId;
      this.state.editorOpen = false;
    });
  }

  async newSession(): Promise<void> {
    await this.run(async () => {
      const session = await this.api.createSession();
      this.state.session = session;
      this.state.selectedId = session.id;
      this.state.sessions = await this.api.listSessions();
    });
  }

  async submit(clientComment: string, counselorDraft: string): Promise<void> {
    const sessionId = this.state.selectedId;
    if (!sessionId) {
      return;
    }
    await this.run(async () => {
      try {
        await this.api.submitTurn(sessionId, clientComment, counselorDraft);
      } finally {
        // A blocked generation still appends the client turn; always
        // reconcile the transcript with what the service now holds.
        this.state.session = await this.api.getSession(sessionId);
        this.state.sessions = await this.api.listSessions();
      }
    });
  }

  openEditor(): void {
    const pending = this.state.session?.pending;
    if (!pending) {
      return;
    }
    this.state.editorOpen = true;
    this.state.editorText = pending.edited_reply?.masked ?? pending.report.improved_reply;
    this.emit();
  }

  closeEditor(): void {
    this.state.editorOpen = false;
    this.emit();
  }

  async saveEdit(text: string): Promise<void> {
    const sessionId = this.state.selectedId;
    if (!sessionId) {
      return;
    }
    await this.run(async () => {
      try {
        this.state.session = await this.api.review(sessionId, "edit", text);
        this.state.editorOpen = false;
      } catch (error) {
        this.state.session = await this.api.getSession(sessionId);
        throw error;
      }
    });
  }

  async approve(): Promise<void> {
    const sessionId = this.state.selectedId;
    if (!sessionId || !canApprove(this.state.session?.pending ?? null)) {
      return;
    }
    await this.run(async () => {
      this.state.session = await this.api.review(sessionId, "approve");
      this.state.sessions = await this.api.listSessions();
    });
  }

  async reject(): Promise<void> {
    const sessionId = this.state.selectedId;
    if (!sessionId) {
      return;
    }
    await this.run(async () => {
      this.state.session = await this.api.review(sessionId, "reject");
      this.state.sessions = await this.api.listSessions();
    });
  }

  dismissBanner(): void {
    this.state.banner = null;
    this.emit();
  }
}
