/** Pure HTML builders for the data table and report badges. */

import type { ReportKind, TablePage } from "./api.js";
import { pageLabel, percent, rateBadgeClass } from "./format.js";

function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function tableHtml(page: TablePage): string {
  if (page.total === 0) {
    return `<p class="empty">No rows for this resource kind.</p>`;
  }
  const head = page.columns.map((c) => `<th>${escapeHtml(c)}</th>`).join("");
  const body = page.rows
    .map((row) => `<tr>${row.map((cell) => `<td>${escapeHtml(cell)}</td>`).join("")}</tr>`)
    .join("");
  return `<table><thead><tr>${head}</tr></thead><tbody>${body}</tbody></table>`;
}

export function pagerHtml(offset: number, limit: number, total: number): string {
  const prevDisabled = offset <= 0 ? " disabled" : "";
  const nextDisabled = offset + limit >= total ? " disabled" : "";
  return (
    `<button data-page="prev"${prevDisabled}>&#8592; prev</button>` +
    `<span>${pageLabel(offset, limit, total)}</span>` +
    `<button data-page="next"${nextDisabled}>next &#8594;</button>`
  );
}

export function reportHtml(kinds: ReportKind[], fetchedPages?: number): string {
  const badges = kinds
    .map(
      (k) =>
        `<span class="${rateBadgeClass(k.success_rate)}" title="${escapeHtml(
          k.failures.map((f) => `#${f.resource_index} ${f.category}`).join("\n"),
        )}">${escapeHtml(k.kind)} ${k.succeeded}/${k.attempted} &middot; ${percent(k.success_rate)}</span>`,
    )
    .join(" ");
  const pages = fetchedPages !== undefined ? `<span class="pages">${fetchedPages} page(s) fetched</span>` : "";
  return badges + pages;
}
