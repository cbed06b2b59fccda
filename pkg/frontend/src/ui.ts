/** DOM layer: renders the schema browser, constraint widgets, and results.
 * All numbers shown come from API payloads; this file only formats them. */

import { ApiClient } from "./api.js";
import { QueryConsole } from "./console.js";
import { buildSchemaBrowser } from "./schema_view.js";
import type {
  ApiErrorInfo,
  Constraint,
  QueryDraft,
  SchemaView,
  SummaryMeta,
  UiResult,
} from "./types.js";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K, cls?: string, text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (cls) node.className = cls;
  if (text !== undefined) node.textContent = text;
  return node;
}

export class ExplorerApp {
  private schema: SchemaView | null = null;
  private draft: QueryDraft | null = null;
  private readonly console_: QueryConsole;

  constructor(
    private readonly root: HTMLElement,
    private readonly client: ApiClient,
  ) {
    this.console_ = new QueryConsole(client);
  }

  async start(): Promise<void> {
    this.root.replaceChildren();
    const header = el("header");
    header.append(el("h1", "", "summary explorer"));
    this.root.append(header);
    const picker = el("div", "picker");
    const browser = el("div", "browser");
    const composer = el("div", "composer");
    const results = el("div", "results");
    this.root.append(picker, browser, composer, results);

    let summaries: SummaryMeta[];
    try {
      summaries = await this.client.listSummaries();
    } catch (e) {
      this.renderBanner(results, {
        code: "UNAVAILABLE",
        message: "cannot reach the query service",
        detail: String(e),
      }, true, () => this.start());
      return;
    }
    if (!summaries.length) {
      browser.append(el(
        "p", "hint",
        "No summaries are loaded. Start the service with at least one " +
        "summary file: entsum serve --summary path/to/summary.json"));
      return;
    }
    const select = el("select");
    for (const s of summaries) {
      const opt = el("option", "", `${s.id} (n=${s.n})`);
      opt.value = s.id;
      select.append(opt);
    }
    select.addEventListener("change", () => this.loadSummary(select.value, browser, composer, results));
    picker.append(el("label", "", "summary: "), select);
    await this.loadSummary(summaries[0]!.id, browser, composer, results);
  }

  private async loadSummary(
    id: string, browser: HTMLElement, composer: HTMLElement, results: HTMLElement,
  ): Promise<void> {
    const schema = await this.client.getSchema(id);
    this.schema = schema;
    this.draft = {
      summaryId: id,
      constraints: schema.attributes.map(() => ({ kind: "any" } as Constraint)),
      groupBy: schema.attributes.map(() => false),
      limit: null,
    };
    this.renderBrowser(browser, schema);
    this.renderComposer(composer, results);
    results.replaceChildren();
  }

  private renderBrowser(host: HTMLElement, schema: SchemaView): void {
    const model = buildSchemaBrowser(schema);
    host.replaceChildren();
    host.append(el("h2", "", `${model.id}: ${model.n} rows`));
    const table = el("table", "schema");
    const head = el("tr");
    for (const h of ["attribute", "kind", "size", "domain"]) {
      head.append(el("th", "", h));
    }
    table.append(head);
    for (const a of model.attributes) {
      const tr = el("tr");
      tr.append(el("td", "", a.name), el("td", "", a.kind),
                el("td", "", String(a.size)), el("td", "domain", a.domainText));
      table.append(tr);
    }
    host.append(table);
    if (model.pairTexts.length) {
      host.append(el("p", "pairs", "2D statistics on: " + model.pairTexts.join("; ")));
    }
    if (model.notice) {
      host.append(el("p", "notice", model.notice));
    }
  }

  private renderComposer(host: HTMLElement, results: HTMLElement): void {
    const schema = this.schema!;
    const draft = this.draft!;
    host.replaceChildren();
    host.append(el("h2", "", "query"));
    schema.attributes.forEach((attr, i) => {
      const row = el("div", "attr-row");
      row.append(el("span", "attr-name", attr.name));

      const mode = el("select");
      for (const m of ["any", "value", "range"]) {
        const opt = el("option", "", m);
        opt.value = m;
        mode.append(opt);
      }
      const widgetHost = el("span", "widget");
      const groupToggle = el("input") as HTMLInputElement;
      groupToggle.type = "checkbox";
      groupToggle.title = "group by";

      const rebuild = () => {
        widgetHost.replaceChildren();
        if (mode.value === "value") {
          const pick = el("select");
          attr.labels.forEach((label, v) => {
            const opt = el("option", "", label);
            opt.value = String(v);
            pick.append(opt);
          });
          const current = draft.constraints[i]!;
          pick.value = String(current.kind === "point" ? current.value : 0);
          pick.addEventListener("change", () => {
            draft.constraints[i] = { kind: "point", value: Number(pick.value) };
          });
          draft.constraints[i] = { kind: "point", value: Number(pick.value) };
          widgetHost.append(pick);
        } else if (mode.value === "range") {
          const lo = el("input") as HTMLInputElement;
          const hi = el("input") as HTMLInputElement;
          const caption = el("span", "range-caption");
          for (const [input, start] of [[lo, 0], [hi, attr.size - 1]] as const) {
            input.type = "range";
            input.min = "0";
            input.max = String(attr.size - 1);
            input.step = "1";
            input.value = String(start);
          }
          const update = () => {
            let u = Number(lo.value);
            let v = Number(hi.value);
            if (u > v) [u, v] = [v, u];
            draft.constraints[i] = { kind: "range", lo: u, hi: v };
            caption.textContent = `${attr.labels[u]} .. ${attr.labels[v]}`;
            lo.title = caption.textContent;
            hi.title = caption.textContent;
          };
          lo.addEventListener("input", update);
          hi.addEventListener("input", update);
          update();
          widgetHost.append(lo, hi, caption);
        } else {
          draft.constraints[i] = { kind: "any" };
        }
      };
      mode.addEventListener("change", () => {
        if (mode.value !== "any" && groupToggle.checked) {
          groupToggle.checked = false;
          draft.groupBy[i] = false;
        }
        rebuild();
      });
      groupToggle.addEventListener("change", () => {
        draft.groupBy[i] = groupToggle.checked;
        if (groupToggle.checked) {
          mode.value = "any";
          rebuild();
        }
      });
      rebuild();
      row.append(mode, widgetHost, el("label", "group-label", " group"), groupToggle);
      host.append(row);
    });

    const controls = el("div", "controls");
    const limitInput = el("input") as HTMLInputElement;
    limitInput.type = "number";
    limitInput.min = "1";
    limitInput.placeholder = "top k";
    limitInput.addEventListener("input", () => {
      const v = Number(limitInput.value);
      draft.limit = Number.isInteger(v) && v >= 1 ? v : null;
    });
    const run = el("button", "", "run");
    run.addEventListener("click", () => void this.runQuery(results));
    controls.append(el("label", "", "limit: "), limitInput, run);
    host.append(controls);
  }

  private async runQuery(results: HTMLElement): Promise<void> {
    const outcome = await this.console_.submit(this.draft!, this.schema!);
    if (outcome.kind === "stale") return; // a newer submission owns the pane
    results.replaceChildren();
    if (outcome.kind === "error") {
      this.renderBanner(results, outcome.error, outcome.retryable,
                        () => void this.runQuery(results));
      return;
    }
    this.renderResult(results, outcome.result);
  }

  private renderBanner(
    host: HTMLElement, error: ApiErrorInfo, retryable: boolean, retry: () => void,
  ): void {
    const banner = el("div", "banner");
    banner.append(el("strong", "", error.code), el("span", "", " " + error.message));
    if (error.detail) banner.append(el("div", "detail", error.detail));
    if (retryable) {
      const button = el("button", "", "retry");
      button.addEventListener("click", retry);
      banner.append(button);
    }
    host.prepend(banner);
  }

  private renderResult(host: HTMLElement, result: UiResult): void {
    const badge = el("span", "wall-badge", `${result.wallMs.toFixed(1)} ms`);
    host.append(el("div", "sql-echo", result.sql));
    host.append(badge);
    const table = el("table", "result");
    const head = el("tr");
    head.append(el("th", "", "group"), el("th", "", "raw"), el("th", "", "rounded"));
    table.append(head);
    for (const row of result.rows) {
      const tr = el("tr");
      tr.append(
        el("td", "", row.values.length ? row.values.join(", ") : "all rows"),
        el("td", "num", String(row.raw)),
        el("td", "num", String(row.rounded)),
      );
      table.append(tr);
    }
    host.append(table);
    if (result.rows.length > 1) {
      const chart = el("div", "chart");
      for (const bar of result.bars) {
        const rowEl = el("div", "bar-row");
        const fill = el("div", "bar");
        fill.style.width = `${Math.round(bar.fraction * 100)}%`;
        fill.title = String(bar.raw);
        rowEl.append(el("span", "bar-label", bar.label), fill,
                     el("span", "bar-value", String(bar.rounded)));
        chart.append(rowEl);
      }
      host.append(chart);
    }
  }
}
