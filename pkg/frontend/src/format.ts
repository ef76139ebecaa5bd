// Small pure helpers shared by the DOM layer.

const HTML_ESCAPES: Record<string, string> = {
  "&": "&amp;",
  "<": "&lt;",
  ">": "&gt;",
  '"': "&quot;",
  "'": "&#39;",
};

export function escapeHtml(text: string): string {
  return text.replace(/[&<>"']/g, (ch) => HTML_ESCAPES[ch] ?? ch);
}

/** Compose an image URL from the configured base; null when images are not
 * wired up (the catalog ids are still shown as text). */
export function imageUrl(base: string, imageId: string | null): string | null {
  if (!base || !imageId) {
    return null;
  }
  return `${base.replace(/\/+$/, "")}/${encodeURIComponent(imageId)}`;
}

export function formatRate(rate: number | null): string {
  if (rate === null) {
    return "n/a";
  }
  return `${(rate * 100).toFixed(1)}%`;
}
