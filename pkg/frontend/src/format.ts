export function metricCell(value: number | null): string {
  if (value == null) return "-";
  return (100 * value).toFixed(1) + "%";
}

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function shortHash(hash: string): string {
  return hash.length > 12 ? hash.slice(0, 12) + "…" : hash;
}
