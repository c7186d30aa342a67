/** Small display formatters shared by the table and report views. */

import type { ReportKind } from "./api.js";

export function percent(rate: number): string {
  return `${Math.round(rate * 1000) / 10}%`;
}

export function rateBadgeClass(rate: number): string {
  if (rate >= 1) return "badge ok";
  if (rate >= 0.9) return "badge warn";
  return "badge bad";
}

export function reportSummary(kinds: ReportKind[]): string {
  return kinds
    .map((k) => `${k.kind}: ${k.succeeded}/${k.attempted} (${percent(k.success_rate)})`)
    .join(", ");
}

export function pageLabel(offset: number, limit: number, total: number): string {
  if (total === 0) return "0 rows";
  const start = offset + 1;
  const end = Math.min(offset + limit, total);
  return `rows ${start}-${end} of ${total}`;
}
