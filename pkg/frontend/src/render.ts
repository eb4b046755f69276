/**
 * Pure HTML renderers: state in, markup string out. Event wiring lives in
 * main.ts via data-action attributes, so everything here is testable
 * without a browser.
 */

import { PendingReviewView, SessionView, TrailEntry } from "./api.js";
import { AppState, Banner, canApprove } from "./state.js";

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;")
    .replace(/'/g, "&#39;");
}

/** Wrap redaction tokens such as [PHONE] so the UI can highlight them. */
export function markRedactionTokens(escaped: string): string {
  return escaped.replace(/\[([A-Z][A-Z_]*)\]/g, '<mark class="redaction">[$1]</mark>');
}

export function renderText(raw: string): string {
  return markRedactionTokens(escapeHtml(raw)).replace(/\n/g, "<br>");
}

function verdictLine(entry: TrailEntry): string {
  const verdict = entry.verdict;
  const distance =
    verdict.min_distance === null ? "n/a" : verdict.min_distance.toFixed(6);
  const label = verdict.blocked ? "BLOCK" : "PASS";
  return `<li class="trail-${label.toLowerCase()}">attempt ${entry.attempt}: ${label} (min distance ${distance}, alpha ${verdict.alpha})</li>`;
}

export function renderBanner(banner: Banner | null): string {
  if (!banner) {
    return "";
  }
  const trail =
    banner.trail.length > 0
      ? `<ul class="trail">${banner.trail.map(verdictLine).join("")}</ul>`
      : "";
  const retry =
    banner.kind === "blocked"
      ? '<button type="button" data-action="dismiss-banner">try again</button>'
      : '<button type="button" data-action="dismiss-banner">dismiss</button>';
  return `<div class="banner banner-${banner.kind}" role="alert">
    <span>${escapeHtml(banner.message)}</span>${trail}${retry}
  </div>`;
}

export function renderSessionList(state: AppState): string {
  const items = state.sessions
    .map((summary) => {
      const selected = summary.id === state.selectedId ? " selected" : "";
      const pending = summary.pending_state
        ? `<span class="badge badge-pending">${escapeHtml(summary.pending_state)}</span>`
        : "";
      return `<li class="session-item${selected}" data-action="open-session" data-session-id="${escapeHtml(summary.id)}">
        <code>${escapeHtml(summary.id.slice(0, 12))}</code>
        <span class="badge">${summary.turn_count} turns</span>${pending}
      </li>`;
    })
    .join("");
  const status = state.connected
    ? '<span class="conn conn-ok">connected</span>'
    : '<span class="conn conn-down">offline</span>';
  return `<header>${status}<button type="button" data-action="new-session">new session</button></header>
  <ul class="sessions">${items}</ul>`;
}

export function renderTranscript(session: SessionView | null): string {
  if (!session) {
    return '<p class="hint">Select or create a session.</p>';
  }
  const turns = session.turns
    .map(
      (turn) => `<div class="turn turn-${turn.role}">
      <span class="badge badge-${turn.role}">${turn.role}</span>
      <p>${renderText(turn.text.masked)}</p>
    </div>`,
    )
    .join("");
  return `<h2>Transcript <code>${escapeHtml(session.id.slice(0, 12))}</code></h2>
  <div class="turns">${turns || '<p class="hint">No turns yet.</p>'}</div>`;
}

function renderDistortions(pending: PendingReviewView): string {
  if (pending.report.distortions.length === 0) {
    return '<p class="hint">none identified</p>';
  }
  return `<ul class="distortions">${pending.report.distortions
    .map((d) => {
      const label = d.category === "OTHER" && d.other_label ? `OTHER (${d.other_label})` : d.category;
      const evidence = d.evidence ? `<blockquote>${renderText(d.evidence)}</blockquote>` : "";
      return `<li><strong>${escapeHtml(label)}</strong>${evidence}<p>${renderText(d.explanation)}</p></li>`;
    })
    .join("")}</ul>`;
}

function renderReport(pending: PendingReviewView): string {
  const report = pending.report;
  const resources = report.resources.length
    ? `<ul>${report.resources.map((r) => `<li>${renderText(r)}</li>`).join("")}</ul>`
    : '<p class="hint">none suggested</p>';
  const warnings = report.parse_warnings.length
    ? `<p class="warnings">${report.parse_warnings.map(escapeHtml).join("; ")}</p>`
    : "";
  return `${warnings}
  <section class="report-section" data-section="problem_analysis">
    <h3>Problem analysis</h3><p>${renderText(report.problem_analysis)}</p>
  </section>
  <section class="report-section" data-section="cognitive_distortions">
    <h3>Cognitive distortions</h3>${renderDistortions(pending)}
  </section>
  <section class="report-section" data-section="counselor_critique">
    <h3>Critique of the draft</h3><p>${renderText(report.counselor_critique)}</p>
  </section>
  <section class="report-section" data-section="next_steps">
    <h3>Next steps</h3><p>${renderText(report.next_steps)}</p>
  </section>
  <section class="report-section" data-section="resources">
    <h3>Resources</h3>${resources}
  </section>`;
}

function renderEditor(state: AppState): string {
  if (!state.editorOpen) {
    return "";
  }
  return `<form class="editor" data-action="save-edit">
    <textarea name="edited_reply" rows="5">${escapeHtml(state.editorText)}</textarea>
    <button type="submit" ${state.busy ? "disabled" : ""}>save edit</button>
    <button type="button" data-action="close-editor">cancel</button>
  </form>`;
}

function renderSubmitForm(state: AppState): string {
  return `<form class="submit-form" data-action="submit-turn">
    <label>Client comment
      <textarea name="client_comment" rows="3" required></textarea>
    </label>
    <label>Your draft reply
      <textarea name="counselor_draft" rows="3" required></textarea>
    </label>
    <button type="submit" ${state.busy ? "disabled" : ""}>submit for review</button>
  </form>`;
}

export function renderReviewPanel(state: AppState): string {
  const session = state.session;
  if (!session) {
    return '<p class="hint">Nothing to review.</p>';
  }
  const pending = session.pending;
  if (!pending) {
    return `<h2>New exchange</h2>${renderSubmitForm(state)}`;
  }
  const approveAllowed = canApprove(pending) && !state.busy;
  const releaseText =
    pending.state === "edited" && pending.edited_reply
      ? pending.edited_reply.masked
      : pending.report.improved_reply;
  const gateNote = `<p class="gate-note">gate: ${pending.attempts} attempt${
    pending.attempts === 1 ? "" : "s"
  }, state ${escapeHtml(pending.state)}</p>`;
  return `<h2>Reply+ report</h2>
  ${gateNote}
  ${renderReport(pending)}
  <section class="report-section report-improved" data-section="improved_reply">
    <h3>Improved reply${pending.state === "edited" ? " (edited)" : ""}</h3>
    <p>${renderText(releaseText)}</p>
  </section>
  ${renderEditor(state)}
  <div class="actions">
    <button type="button" data-action="approve" ${approveAllowed ? "" : "disabled"}>approve</button>
    <button type="button" data-action="open-editor" ${state.busy ? "disabled" : ""}>edit</button>
    <button type="button" data-action="reject" ${state.busy ? "disabled" : ""}>reject</button>
  </div>`;
}

export function renderApp(state: AppState): string {
  return `${renderBanner(state.banner)}
  <div class="panes">
    <nav class="pane pane-sessions">${renderSessionList(state)}</nav>
    <main class="pane pane-transcript">${renderTranscript(state.session)}</main>
    <aside class="pane pane-review">${renderReviewPanel(state)}</aside>
  </div>`;
}
