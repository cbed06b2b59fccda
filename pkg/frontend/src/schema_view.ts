/** Schema browser model: what an analyst needs to judge the summary's
 * trustworthiness, as plain data for the DOM layer. */

import type { SchemaView } from "./types.js";

export interface AttributeRow {
  name: string;
  kind: string;
  size: number;
  domainText: string;
}

export interface SchemaBrowserModel {
  id: string;
  n: number;
  attributes: AttributeRow[];
  pairTexts: string[];
  notice: string | null;
}

export function buildSchemaBrowser(schema: SchemaView): SchemaBrowserModel {
  const attributes = schema.attributes.map((a) => ({
    name: a.name,
    kind: a.kind,
    size: a.size,
    domainText:
      a.kind === "categorical"
        ? (a.values ?? []).join(", ")
        : `[${a.lo}, ${a.hi}) in ${a.buckets} buckets`,
  }));
  return {
    id: schema.id,
    n: schema.n,
    attributes,
    pairTexts: schema.pairs.map((p) => p.join(" x ")),
    notice:
      schema.two_d_count === 0
        ? "no 2D statistics: cross-attribute estimates assume independence"
        : null,
  };
}
