// HTML renderers. Pure string builders so the table, metrics panel, and
// banners can be asserted on without a browser.

import type { Filter } from "./agreement.js";
import { CODES } from "./types.js";
import type {
  LineageEntry,
  MetricsReport,
  RunDetail,
  RunListRow,
  TurnRowView,
} from "./types.js";
import { escapeHtml, metricCell, shortHash } from "./format.js";
import { disabledCodes } from "./picker.js";

function codeBadges(codes: string[] | null, cls: string): string {
  if (codes == null) return `<span class="muted">none</span>`;
  return codes.map((c) => `<span class="badge ${cls}">${escapeHtml(c)}</span>`).join(" ");
}

export function renderRunOptions(runs: RunListRow[], selected: string | null): string {
  const options = runs
    .map(
      (r) =>
        `<option value="${escapeHtml(r.run_id)}"${r.run_id === selected ? " selected" : ""}>` +
        `${escapeHtml(r.run_id)} — ${escapeHtml(r.lesson_id)} (${r.status})</option>`
    )
    .join("");
  return `<option value="">choose a run…</option>${options}`;
}

export function renderProgress(detail: RunDetail): string {
  if (detail.status === "failed") {
    return (
      `<div class="banner error">run failed at batch ${detail.failed_batch}: ` +
      `${escapeHtml(detail.failure ?? "unknown failure")}</div>`
    );
  }
  return (
    `<div class="banner info">run in progress: ${detail.batches_parsed} of ` +
    `${detail.batches_sent} batches parsed, ${detail.turns_coded} turns coded</div>`
  );
}

export function renderFilterBar(filter: Filter, pending: number): string {
  const byCode = filter.kind === "code" ? filter.code : "";
  const codeOptions = CODES.map(
    (c) => `<option value="${c}"${c === byCode ? " selected" : ""}>${c}</option>`
  ).join("");
  return `
    <label><input type="radio" name="filter" value="all"${
      filter.kind === "all" ? " checked" : ""
    }> all</label>
    <label><input type="radio" name="filter" value="disagreements"${
      filter.kind === "disagreements" ? " checked" : ""
    }> disagreements only</label>
    <label><input type="radio" name="filter" value="code"${
      filter.kind === "code" ? " checked" : ""
    }> by code</label>
    <select id="filter-code"${filter.kind === "code" ? "" : " disabled"}>${codeOptions}</select>
    <span class="spacer"></span>
    <button id="feedback-btn"${pending === 0 ? ' disabled title="no pending adjudications"' : ""}>
      compile feedback (${pending} pending)
    </button>`;
}

function agreementBadge(row: TurnRowView): string {
  if (row.agreement_state == null) return `<span class="muted">no gold</span>`;
  return `<span class="state ${row.agreement_state}">${row.agreement_state}</span>`;
}

// Live adjudication editor state. Selection and note are held here, not in
// the row, so re-rendering after a checkbox change cannot lose the note.
export interface EditorState {
  turn_id: number;
  selection: string[];
  note: string;
  problem: string | null;
}

export function renderTable(rows: TurnRowView[], editor: EditorState | null): string {
  if (rows.length === 0) {
    return `<div class="empty">no turns match this filter</div>`;
  }
  const body = rows
    .map((row) => {
      const editorHtml =
        editor !== null && row.turn_id === editor.turn_id ? renderAdjudicationEditor(editor) : "";
      return `
      <tr data-turn="${row.turn_id}" class="turn-row">
        <td class="num">${row.turn_id}</td>
        <td>${escapeHtml(row.speaker)}</td>
        <td class="text">${escapeHtml(row.text)}</td>
        <td>${codeBadges(row.gold_codes, "gold")}</td>
        <td>${codeBadges(row.predicted_codes, "predicted")}</td>
        <td>${
          row.adjudicated_codes
            ? codeBadges(row.adjudicated_codes, "adjudicated")
            : `<span class="muted">—</span>`
        }</td>
        <td>${agreementBadge(row)}</td>
        <td><button class="adjudicate-btn" data-turn="${row.turn_id}">adjudicate</button></td>
      </tr>
      ${editorHtml}`;
    })
    .join("");
  return `
    <table class="review">
      <thead>
        <tr>
          <th>turn</th><th>speaker</th><th>text</th><th>gold</th>
          <th>predicted</th><th>adjudicated</th><th>agreement</th><th></th>
        </tr>
      </thead>
      <tbody>${body}</tbody>
    </table>`;
}

export function renderAdjudicationEditor(editor: EditorState): string {
  const disabled = disabledCodes(editor.selection);
  const boxes = CODES.map((c) => {
    const checked = editor.selection.includes(c) ? " checked" : "";
    const off = disabled.includes(c) ? " disabled" : "";
    return `<label class="pick"><input type="checkbox" class="code-box" value="${c}"${checked}${off}> ${c}</label>`;
  }).join("");
  const problem = editor.problem ? escapeHtml(editor.problem) : "";
  return `
      <tr class="editor-row" data-turn="${editor.turn_id}">
        <td colspan="8">
          <div class="editor">
            <div class="picker">${boxes}</div>
            <input type="text" class="note-input" placeholder="note (why this coding)"
                   value="${escapeHtml(editor.note)}">
            <button class="save-btn" data-turn="${editor.turn_id}">save</button>
            <button class="cancel-btn">cancel</button>
            <span class="editor-problem">${problem}</span>
          </div>
        </td>
      </tr>`;
}

export function renderMetricsPanel(report: MetricsReport | null, mode: string): string {
  const toggle = `
    <label><input type="radio" name="mode" value="exact"${
      mode === "exact" ? " checked" : ""
    }> exact</label>
    <label><input type="radio" name="mode" value="overlap"${
      mode === "overlap" ? " checked" : ""
    }> overlap</label>`;
  if (report == null) {
    return `<div class="metrics-head">${toggle}</div>
      <div class="muted">no gold labels for this lesson, metrics unavailable</div>`;
  }
  const rows = report.per_code
    .map(
      (r) => `
      <tr>
        <td>${escapeHtml(r.code)}</td>
        <td class="num">${metricCell(r.precision)}</td>
        <td class="num">${metricCell(r.recall)}</td>
        <td class="num">${metricCell(r.accuracy)}</td>
        <td class="num">${metricCell(r.f1)}</td>
      </tr>`
    )
    .join("");
  return `
    <div class="metrics-head">${toggle}</div>
    <table class="metrics">
      <thead><tr><th>code</th><th>precision</th><th>recall</th><th>accuracy</th><th>F1</th></tr></thead>
      <tbody>${rows}</tbody>
    </table>
    <div class="turn-precision">turn precision (${escapeHtml(report.match_mode)}): ${metricCell(
      report.turn_precision
    )} over ${report.turn_count} turns</div>`;
}

export function renderLineage(detail: RunDetail): string {
  if (detail.lineage.length === 0) return "";
  const items = detail.lineage
    .map(
      (entry: LineageEntry) =>
        `<li>cycle ${entry.cycle}: ${shortHash(entry.parent_hash)} → ` +
        `<code>${escapeHtml(entry.config_hash)}</code> (turns ${entry.turn_ids.join(", ")})</li>`
    )
    .join("");
  return `<div class="lineage"><h3>feedback lineage</h3><ul>${items}</ul></div>`;
}

export function renderBanner(kind: "error" | "info" | "success", text: string): string {
  return `<div class="banner ${kind}">${escapeHtml(text)}</div>`;
}

export function renderRetryBanner(message: string): string {
  return `<div class="banner error">${escapeHtml(
    message
  )} <button id="retry-btn">retry</button></div>`;
}
