import { describe, expect, it } from "vitest";

import { buildSchemaBrowser } from "../src/schema_view.js";
import { demoSchema } from "./fixtures.js";

describe("schema browser model", () => {
  it("lists attribute names, sizes, and domains", () => {
    const model = buildSchemaBrowser(demoSchema);
    expect(model.attributes.map((a) => [a.name, a.size])).toEqual([
      ["origin", 3], ["distance", 10], ["delay", 5],
    ]);
    expect(model.attributes[0]!.domainText).toBe("CA, NY, O'Hare");
    expect(model.attributes[1]!.domainText).toBe("[0, 3000) in 10 buckets");
    expect(model.pairTexts).toEqual(["origin x distance"]);
    expect(model.notice).toBeNull();
  });

  it("warns when a summary has no 2D statistics", () => {
    const model = buildSchemaBrowser({ ...demoSchema, pairs: [], two_d_count: 0 });
    expect(model.notice).toMatch(/no 2D statistics/);
  });

  it("shows a wide five-attribute layout by size", () => {
    const sizes = [307, 54, 54, 62, 81];
    const names = ["fl_date", "origin", "dest", "fl_time", "distance"];
    const schema = {
      id: "flights-coarse",
      n: 500_000,
      attributes: sizes.map((size, i) => ({
        name: names[i]!,
        kind: "numeric" as const,
        size,
        lo: 0,
        hi: size,
        buckets: size,
        labels: [],
      })),
      pairs: [["origin", "distance"], ["dest", "distance"]],
      two_d_count: 3000,
    };
    const model = buildSchemaBrowser(schema);
    expect(model.attributes.map((a) => a.size)).toEqual(sizes);
    expect(model.pairTexts).toEqual(["origin x distance", "dest x distance"]);
  });
});
