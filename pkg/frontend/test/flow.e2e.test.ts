/**
 * Drives the console's client, store, and renderers against a real service
 * process running the scripted mock provider. Needs the `replyplus` CLI on
 * PATH (pip install -e .. from the repository root).
 */

import { spawn, spawnSync, type ChildProcess } from "node:child_process";
import { mkdtempSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ConsoleApi } from "../src/api.js";
import { renderApp, renderReviewPanel, renderTranscript } from "../src/render.js";
import { canApprove, Store } from "../src/state.js";

const PORT = 18100 + (process.pid % 1800);
const TOKEN = "console-e2e";
const OFFENSIVE = "你这个废物，去死吧";
const HOSTILE = "you brought this on yourself and deserve all of it";
const EDITED = "A softer, kinder way to say the same thing.";
const CLIENT_COMMENT = "我睡不着，随时打13912345678找我。";
const DRAFT = "先试着深呼吸吧。";

const REPORT = `[PROBLEM_ANALYSIS]
The client reports persistent insomnia and a sense that effort is pointless.

[COGNITIVE_DISTORTIONS]
- category: OVERGENERALIZATION
  evidence: I always ruin everything
  explanation: One setback is read as a universal pattern.

[COUNSELOR_CRITIQUE]
The draft jumps to advice before acknowledging the client's exhaustion.

[IMPROVED_REPLY]
That sounds exhausting. I would like to understand what the nights feel like.

[NEXT_STEPS]
Ask about sleep patterns this week and what has helped before.

[RESOURCES]
- 24/7 crisis hotline
`;

let server: ChildProcess | null = null;
let api: ConsoleApi;

async function waitForHealth(timeoutMs: number): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  let lastError: unknown = null;
  while (Date.now() < deadline) {
    try {
      await api.health();
      return;
    } catch (error) {
      lastError = error;
      await new Promise((resolve) => setTimeout(resolve, 250));
    }
  }
  throw new Error(`service did not come up on port ${PORT}: ${String(lastError)}`);
}

beforeAll(async () => {
  const dir = mkdtempSync(join(tmpdir(), "replyplus-console-"));
  writeFileSync(join(dir, "corpus.csv"), `TEXT,label\n${OFFENSIVE},1\n`);
  writeFileSync(
    join(dir, "script.json"),
    JSON.stringify({
      completions: [REPORT, HOSTILE, HOSTILE, HOSTILE],
      table: {
        [OFFENSIVE]: [0, 0, 0, 0, 0, 0, 0, 0],
        [HOSTILE]: [0.05, 0, 0, 0, 0, 0, 0, 0],
      },
      dim: 8,
      embedding_mode: "table",
    }),
  );
  writeFileSync(
    join(dir, "service.toml"),
    `[server]
host = "127.0.0.1"
port = ${PORT}
auth_token = "${TOKEN}"

[provider]
mode = "mock"
script_path = "script.json"
embedding_dim = 8

[detox]
alpha = 0.2

[paths]
index = "corpus.rpvi"
store = "var/sessions"
`,
  );

  const build = spawnSync(
    "replyplus",
    ["index", "build", "--corpus", "corpus.csv", "--out", "corpus.rpvi", "--config", "service.toml"],
    { cwd: dir, encoding: "utf-8" },
  );
  if (build.status !== 0) {
    throw new Error(`index build failed: ${build.stderr || build.stdout}`);
  }

  server = spawn("replyplus", ["serve", "--config", "service.toml"], {
    cwd: dir,
    stdio: "ignore",
  });
  api = new ConsoleApi({ baseUrl: `http://127.0.0.1:${PORT}`, token: TOKEN });
  await waitForHealth(20000);
  store = new Store(api);
}, 40000);

let store: Store;

afterAll(() => {
  server?.kill("SIGTERM");
});

describe("console flow against the live service", () => {
  let firstSessionId = "";

  it("submit renders all five report sections plus the improved reply", async () => {
    await store.newSession();
    expect(store.state.session).not.toBeNull();
    firstSessionId = store.state.session!.id;

    await store.submit(CLIENT_COMMENT, DRAFT);
    const pending = store.state.session?.pending;
    expect(pending?.state).toBe("awaiting_review");
    expect(pending?.attempts).toBe(1);

    const html = renderReviewPanel(store.state);
    for (const section of [
      "problem_analysis",
      "cognitive_distortions",
      "counselor_critique",
      "next_steps",
      "resources",
      "improved_reply",
    ]) {
      expect(html).toContain(`data-section="${section}"`);
    }
    expect(html).toContain("That sounds exhausting.");
    expect(canApprove(pending ?? null)).toBe(true);
    expect(html).not.toContain('data-action="approve" disabled');
  }, 20000);

  it("shows the redaction token from the service, never the raw phone number", () => {
    const html = renderTranscript(store.state.session);
    expect(html).toContain('<mark class="redaction">[PHONE]</mark>');
    expect(html).not.toContain("13912345678");
  });

  it("renders a blocked generation as a trail banner with no approve control", async () => {
    const blockedStore = new Store(api);
    await blockedStore.newSession();
    await blockedStore.submit(CLIENT_COMMENT, DRAFT);

    expect(blockedStore.state.banner?.kind).toBe("blocked");
    expect(blockedStore.state.banner?.message).toContain("retries_exhausted");
    expect(blockedStore.state.banner?.trail).toHaveLength(3);
    expect(blockedStore.state.banner?.trail.every((t) => t.verdict.blocked)).toBe(true);

    // the client turn is kept, nothing is reviewable, and the matched
    // offensive sentence never reaches the UI
    expect(blockedStore.state.session?.turns).toHaveLength(1);
    expect(blockedStore.state.session?.pending).toBeNull();
    const html = renderApp(blockedStore.state);
    expect(html).toContain("BLOCK (min distance 0.05");
    expect(html).not.toContain('data-action="approve"');
    expect(html).not.toContain(OFFENSIVE);
    expect(html).not.toContain(HOSTILE);
  }, 20000);

  it("edit then approve produces REVIEW_EDIT before REVIEW_APPROVE", async () => {
    store.openEditor();
    expect(store.state.editorText).toContain("That sounds exhausting.");

    await store.saveEdit(EDITED);
    expect(store.state.session?.pending?.state).toBe("edited");
    expect(canApprove(store.state.session?.pending ?? null)).toBe(true);

    await store.approve();
    const turns = store.state.session?.turns ?? [];
    expect(turns.map((t) => t.role)).toEqual(["client", "counselor"]);
    expect(turns[1]?.text.masked).toBe(EDITED);

    const events = await api.audit(firstSessionId);
    const kinds = events.map((e) => e.kind);
    expect(kinds).toContain("REVIEW_EDIT");
    expect(kinds).toContain("REVIEW_APPROVE");
    expect(kinds.indexOf("REVIEW_EDIT")).toBeLessThan(kinds.indexOf("REVIEW_APPROVE"));
  }, 20000);

  it("a fresh client rebuilt from the API reproduces the identical view", async () => {
    const fresh = new Store(api);
    await fresh.refreshSessions();
    await fresh.openSession(firstSessionId);
    expect(renderApp(fresh.state)).toBe(renderApp(store.state));
  }, 20000);
});
