/** Widget state <-> SQL, mirroring the service grammar exactly.
 *
 * Grammar: SELECT [attrs,] COUNT(*) FROM name
 *          [WHERE attr = lit | attr IN [lit, lit] AND ...]
 *          [GROUP BY attrs] [ORDER BY cnt DESC LIMIT k]
 *
 * Numeric literals are emitted as bucket midpoints so the server's
 * equi-width bucketization maps them back to the exact bucket the slider
 * selected; categorical literals are the quoted labels.
 */

import type { AttributeInfo, Constraint, QueryDraft, SchemaView } from "./types.js";

export class SqlError extends Error {}

export function bucketize(attr: AttributeInfo, raw: string | number): number {
  if (attr.kind === "categorical") {
    const idx = (attr.values ?? []).indexOf(String(raw));
    if (idx < 0) throw new SqlError(`unknown label ${String(raw)} for ${attr.name}`);
    return idx;
  }
  const lo = attr.lo ?? 0;
  const hi = attr.hi ?? attr.size;
  const value = typeof raw === "number" ? raw : Number(raw);
  if (Number.isNaN(value)) throw new SqlError(`bad numeric literal for ${attr.name}`);
  if (value < lo) return 0;
  if (value >= hi) return attr.size - 1;
  const width = (hi - lo) / attr.size;
  return Math.min(Math.floor((value - lo) / width), attr.size - 1);
}

function quote(label: string): string {
  return `'${label.replace(/'/g, "''")}'`;
}

function formatNumber(x: number): string {
  // the grammar has no exponent form; print plainly and trim zeros
  if (Number.isInteger(x) && Math.abs(x) < 1e15) return String(x);
  let out = x.toFixed(12).replace(/0+$/, "").replace(/\.$/, "");
  if (!/^-?\d+(\.\d+)?$/.test(out)) throw new SqlError(`cannot format literal ${x}`);
  return out;
}

/** A literal the server maps back to exactly this bucket. */
export function bucketLiteral(attr: AttributeInfo, bucket: number): string {
  if (bucket < 0 || bucket >= attr.size) {
    throw new SqlError(`bucket ${bucket} out of range for ${attr.name}`);
  }
  if (attr.kind === "categorical") {
    const label = attr.values?.[bucket];
    if (label === undefined) throw new SqlError(`no label for bucket ${bucket}`);
    return quote(label);
  }
  const lo = attr.lo ?? 0;
  const hi = attr.hi ?? attr.size;
  const width = (hi - lo) / attr.size;
  const literal = formatNumber(lo + (bucket + 0.5) * width);
  if (bucketize(attr, Number(literal)) !== bucket) {
    throw new SqlError(`literal for bucket ${bucket} of ${attr.name} does not round-trip`);
  }
  return literal;
}

export function serializeDraft(draft: QueryDraft, schema: SchemaView): string {
  const attrs = schema.attributes;
  if (draft.constraints.length !== attrs.length || draft.groupBy.length !== attrs.length) {
    throw new SqlError("draft shape does not match the schema");
  }
  const groupNames: string[] = [];
  attrs.forEach((attr, i) => {
    if (draft.groupBy[i]) {
      if (draft.constraints[i]!.kind !== "any") {
        throw new SqlError(`grouped attribute ${attr.name} must stay unconstrained`);
      }
      groupNames.push(attr.name);
    }
  });
  const where: string[] = [];
  attrs.forEach((attr, i) => {
    const c = draft.constraints[i]!;
    if (c.kind === "point") {
      where.push(`${attr.name} = ${bucketLiteral(attr, c.value)}`);
    } else if (c.kind === "range") {
      if (c.lo > c.hi) throw new SqlError(`empty range on ${attr.name}`);
      where.push(
        `${attr.name} IN [${bucketLiteral(attr, c.lo)}, ${bucketLiteral(attr, c.hi)}]`);
    }
  });
  let sql = "SELECT ";
  if (groupNames.length) sql += groupNames.join(", ") + ", ";
  sql += "COUNT(*) FROM R";
  if (where.length) sql += " WHERE " + where.join(" AND ");
  if (groupNames.length) sql += " GROUP BY " + groupNames.join(", ");
  if (draft.limit !== null) sql += ` ORDER BY cnt DESC LIMIT ${draft.limit}`;
  return sql;
}

type Token =
  | { t: "num"; v: string }
  | { t: "str"; v: string }
  | { t: "name"; v: string }
  | { t: "kw"; v: string }
  | { t: "sym"; v: string };

const KEYWORDS = new Set([
  "select", "count", "from", "where", "and", "in",
  "group", "by", "order", "desc", "limit", "as",
]);

const TOKEN_RE =
  /\s*(?:(-?\d+(?:\.\d+)?)|('(?:[^']|'')*')|([A-Za-z_][A-Za-z_0-9]*)|([(),=\[\]*]))/y;

function tokenize(sql: string): Token[] {
  const tokens: Token[] = [];
  let pos = 0;
  while (pos < sql.length) {
    TOKEN_RE.lastIndex = pos;
    const m = TOKEN_RE.exec(sql);
    if (!m) {
      if (sql.slice(pos).trim() === "") break;
      throw new SqlError(`unexpected character at offset ${pos}`);
    }
    pos = TOKEN_RE.lastIndex;
    if (m[1] !== undefined) tokens.push({ t: "num", v: m[1] });
    else if (m[2] !== undefined)
      tokens.push({ t: "str", v: m[2].slice(1, -1).replace(/''/g, "'") });
    else if (m[3] !== undefined) {
      const lower = m[3].toLowerCase();
      if (KEYWORDS.has(lower)) tokens.push({ t: "kw", v: lower });
      else tokens.push({ t: "name", v: m[3] });
    } else tokens.push({ t: "sym", v: m[4]! });
  }
  return tokens;
}

class Parser {
  pos = 0;
  constructor(readonly tokens: Token[]) {}

  peek(): Token | undefined {
    return this.tokens[this.pos];
  }

  next(): Token {
    const tok = this.tokens[this.pos++];
    if (!tok) throw new SqlError("unexpected end of query");
    return tok;
  }

  expect(t: Token["t"], v?: string): string {
    const tok = this.next();
    if (tok.t !== t || (v !== undefined && tok.v !== v)) {
      throw new SqlError(`expected ${v ?? t}, found ${tok.v}`);
    }
    return tok.v;
  }

  accept(t: Token["t"], v?: string): boolean {
    const tok = this.peek();
    if (tok && tok.t === t && (v === undefined || tok.v === v)) {
      this.pos += 1;
      return true;
    }
    return false;
  }
}

function attrIndex(schema: SchemaView, name: string): number {
  const idx = schema.attributes.findIndex((a) => a.name === name);
  if (idx < 0) throw new SqlError(`unknown attribute ${name}`);
  return idx;
}

/** Parse SQL back into widget state for the given summary. */
export function parseSql(sql: string, schema: SchemaView, summaryId: string): QueryDraft {
  const p = new Parser(tokenize(sql));
  p.expect("kw", "select");
  const selected: string[] = [];
  for (;;) {
    const tok = p.peek();
    if (tok && tok.t === "kw" && tok.v === "count") {
      p.next();
      p.expect("sym", "(");
      p.expect("sym", "*");
      p.expect("sym", ")");
      if (p.accept("kw", "as")) p.next();
      break;
    }
    if (tok && tok.t === "name") {
      selected.push(tok.v);
      p.next();
      p.expect("sym", ",");
      continue;
    }
    throw new SqlError(`expected attribute or COUNT(*)`);
  }
  p.expect("kw", "from");
  const from = p.next();
  if (from.t !== "name") throw new SqlError("expected relation name after FROM");

  const constraints: Constraint[] = schema.attributes.map(() => ({ kind: "any" }));
  if (p.accept("kw", "where")) {
    for (;;) {
      const name = p.expect("name");
      const i = attrIndex(schema, name);
      const attr = schema.attributes[i]!;
      if (p.accept("sym", "=")) {
        const lit = p.next();
        if (lit.t !== "num" && lit.t !== "str") throw new SqlError("expected literal");
        const value = bucketize(attr, lit.t === "num" ? Number(lit.v) : lit.v);
        constraints[i] = { kind: "point", value };
      } else if (p.accept("kw", "in")) {
        p.expect("sym", "[");
        const lo = p.next();
        p.expect("sym", ",");
        const hi = p.next();
        p.expect("sym", "]");
        if ((lo.t !== "num" && lo.t !== "str") || (hi.t !== "num" && hi.t !== "str")) {
          throw new SqlError("expected literals in range");
        }
        const u = bucketize(attr, lo.t === "num" ? Number(lo.v) : lo.v);
        const v = bucketize(attr, hi.t === "num" ? Number(hi.v) : hi.v);
        if (u > v) throw new SqlError(`empty range for ${name}`);
        constraints[i] = { kind: "range", lo: u, hi: v };
      } else {
        throw new SqlError(`expected = or IN for ${name}`);
      }
      if (!p.accept("kw", "and")) break;
    }
  }

  const groupBy: boolean[] = schema.attributes.map(() => false);
  if (p.accept("kw", "group")) {
    p.expect("kw", "by");
    groupBy[attrIndex(schema, p.expect("name"))] = true;
    while (p.accept("sym", ",")) {
      groupBy[attrIndex(schema, p.expect("name"))] = true;
    }
  }

  let limit: number | null = null;
  if (p.accept("kw", "order")) {
    p.expect("kw", "by");
    const col = p.next();
    if (col.t !== "name" && !(col.t === "kw" && col.v === "count")) {
      throw new SqlError("expected sort column after ORDER BY");
    }
    p.expect("kw", "desc");
    p.expect("kw", "limit");
    limit = Number(p.expect("num"));
    if (!Number.isInteger(limit) || limit < 1) throw new SqlError("LIMIT must be positive");
  }
  if (p.peek()) throw new SqlError("unexpected trailing input");

  for (const name of selected) {
    if (!groupBy[attrIndex(schema, name)]) {
      throw new SqlError(`selected attribute ${name} must appear in GROUP BY`);
    }
  }
  groupBy.forEach((g, i) => {
    if (g && constraints[i]!.kind !== "any") {
      throw new SqlError("grouped attributes cannot be constrained");
    }
  });
  return { summaryId, constraints, groupBy, limit };
}
