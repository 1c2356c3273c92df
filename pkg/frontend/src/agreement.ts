// Pure derivation of the per-row agreement state and the table filters.
// Nothing here touches the network or the DOM, so it is directly testable.

import type { AgreementState, ResultRow, TurnRowView } from "./types.js";

export function agreementState(
  gold: string[] | null,
  predicted: string[]
): AgreementState | null {
  if (gold == null) return null;
  const g = new Set(gold);
  const p = new Set(predicted);
  if (g.size === p.size && [...g].every((c) => p.has(c))) return "match";
  if ([...g].some((c) => p.has(c))) return "partial";
  return "disagree";
}

export function toView(row: ResultRow): TurnRowView {
  return { ...row, agreement_state: agreementState(row.gold_codes, row.predicted_codes) };
}

export type Filter =
  | { kind: "all" }
  | { kind: "disagreements" }
  | { kind: "code"; code: string };

/** Disagreements are exact-set mismatches: partial overlap still disagrees. */
export function applyFilter(rows: TurnRowView[], filter: Filter): TurnRowView[] {
  switch (filter.kind) {
    case "all":
      return rows;
    case "disagreements":
      return rows.filter(
        (r) => r.agreement_state === "partial" || r.agreement_state === "disagree"
      );
    case "code":
      return rows.filter(
        (r) =>
          r.predicted_codes.includes(filter.code) ||
          (r.gold_codes ?? []).includes(filter.code) ||
          (r.adjudicated_codes ?? []).includes(filter.code)
      );
  }
}
