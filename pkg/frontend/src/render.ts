// String-based rendering helpers. Renderers return HTML so they stay testable
// without a DOM; main.ts assigns the results to innerHTML.

export function escapeHtml(value: unknown): string {
  return String(value)
    .replaceAll("&", "&amp;")
    .replaceAll("<", "&lt;")
    .replaceAll(">", "&gt;")
    .replaceAll('"', "&quot;")
    .replaceAll("'", "&#39;");
}

export function html(strings: TemplateStringsArray, ...values: unknown[]): string {
  let out = strings[0];
  for (let i = 0; i < values.length; i++) {
    const value = values[i];
    out += Array.isArray(value) ? value.join("") : escapeHtml(value);
    out += strings[i + 1];
  }
  return out;
}

export function formatScore(value: number, digits = 3): string {
  return Number.isInteger(value) ? String(value) : value.toFixed(digits);
}
