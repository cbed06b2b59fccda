import type { SchemaView } from "../src/types.js";

function numericLabels(lo: number, hi: number, buckets: number): string[] {
  const width = (hi - lo) / buckets;
  return Array.from({ length: buckets }, (_, b) =>
    `[${lo + b * width},${lo + (b + 1) * width})`);
}

/** Mirrors a GET /summaries/{id}/schema payload. */
export const demoSchema: SchemaView = {
  id: "demo",
  n: 500,
  attributes: [
    {
      name: "origin",
      kind: "categorical",
      size: 3,
      values: ["CA", "NY", "O'Hare"],
      labels: ["CA", "NY", "O'Hare"],
    },
    {
      name: "distance",
      kind: "numeric",
      size: 10,
      lo: 0,
      hi: 3000,
      buckets: 10,
      labels: numericLabels(0, 3000, 10),
    },
    {
      name: "delay",
      kind: "numeric",
      size: 5,
      lo: -10,
      hi: 40,
      buckets: 5,
      labels: numericLabels(-10, 40, 5),
    },
  ],
  pairs: [["origin", "distance"]],
  two_d_count: 4,
};
