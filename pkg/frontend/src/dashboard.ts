/** Dashboard: budget gauge, the per-round labeling grid, grammar scale
 * counters and the parse-failure inbox. Every number is the payload's own
 * decimal text; the dashboard never computes grammar or budget state. */

import { ApiClient } from "./api.js";
import { budgetTexts, grammarCounterTexts, reportGridTexts } from "./format.js";
import type { Budget } from "./types.js";

export class Dashboard {
  private failures: string[] = [];

  constructor(
    private readonly doc: Document,
    private readonly root: HTMLElement,
    private readonly client: ApiClient,
  ) {}

  reportFailure(message: string): void {
    this.failures.push(message);
  }

  async refresh(budget: Budget | null): Promise<void> {
    const { stats } = await this.client.grammarStatsRaw();
    const { report } = await this.client.learnerReportRaw();
    this.root.textContent = "";

    if (budget) {
      const texts = budgetTexts(budget);
      const gauge = this.doc.createElement("div");
      gauge.className = "budget-gauge";
      const bar = this.doc.createElement("progress");
      bar.max = budget.limit;
      bar.value = budget.spent;
      gauge.appendChild(bar);
      const caption = this.doc.createElement("span");
      caption.className = "budget-caption";
      caption.textContent = `${texts.spent} / ${texts.limit} annotated (${texts.remaining} left)`;
      gauge.appendChild(caption);
      this.root.appendChild(gauge);
    }

    const counters = grammarCounterTexts(stats);
    const scale = this.doc.createElement("dl");
    scale.className = "grammar-scale";
    const rows: [string, string, string][] = [
      ["production rules", counters.productionRules, "counter-production-rules"],
      ["precedence tuples", counters.precedenceTuples, "counter-precedence-tuples"],
      ["rule instances", counters.ruleInstances, "counter-rule-instances"],
      ["symbols", counters.symbols, "counter-symbols"],
    ];
    for (const [label, value, cls] of rows) {
      const dt = this.doc.createElement("dt");
      dt.textContent = label;
      const dd = this.doc.createElement("dd");
      dd.className = cls;
      dd.textContent = value;
      scale.appendChild(dt);
      scale.appendChild(dd);
    }
    this.root.appendChild(scale);

    const grid = this.doc.createElement("table");
    grid.className = "round-grid";
    for (const cell of reportGridTexts(report)) {
      const tr = this.doc.createElement("tr");
      const th = this.doc.createElement("th");
      th.textContent = cell.label;
      const td = this.doc.createElement("td");
      td.textContent = cell.value;
      tr.appendChild(th);
      tr.appendChild(td);
      grid.appendChild(tr);
    }
    this.root.appendChild(grid);

    const inbox = this.doc.createElement("ul");
    inbox.className = "failure-inbox";
    for (const failure of this.failures) {
      const item = this.doc.createElement("li");
      item.textContent = failure;
      inbox.appendChild(item);
    }
    this.root.appendChild(inbox);
  }
}
