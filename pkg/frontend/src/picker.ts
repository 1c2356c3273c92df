// Code-picker selection rules. UC means "no code applies", so it can never
// accompany another code; the UI greys the rest out while UC is selected.

import { CODES, UNCODED } from "./types.js";

export function toggleCode(selected: string[], code: string): string[] {
  if (selected.includes(code)) {
    return selected.filter((c) => c !== code);
  }
  if (code === UNCODED) return [UNCODED];
  return [...selected.filter((c) => c !== UNCODED), code];
}

export function disabledCodes(selected: string[]): string[] {
  if (selected.includes(UNCODED)) {
    return CODES.filter((c) => c !== UNCODED);
  }
  return [];
}

export function selectionProblem(selected: string[]): string | null {
  if (selected.length === 0) return "select at least one code";
  const unknown = selected.filter((c) => !(CODES as readonly string[]).includes(c));
  if (unknown.length > 0) return `unknown code: ${unknown.join(", ")}`;
  if (selected.includes(UNCODED) && selected.length > 1) {
    return "UC cannot be combined with other codes";
  }
  return null;
}
