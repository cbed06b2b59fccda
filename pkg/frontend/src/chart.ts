/** Bar-chart model for group-by results: pure data, no DOM.
 *
 * Bars carry the API numbers untouched; only the bar width is derived
 * (fraction of the largest raw value).
 */

import type { BarModel, GroupPayload } from "./types.js";

export function buildBarModel(rows: GroupPayload[]): BarModel[] {
  const max = rows.reduce((m, r) => Math.max(m, r.raw), 0);
  return rows.map((r) => ({
    label: r.values.length ? r.values.join(", ") : "all rows",
    raw: r.raw,
    rounded: r.rounded,
    fraction: max > 0 ? r.raw / max : 0,
  }));
}
