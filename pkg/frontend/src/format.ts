/** Dashboard number formatting.
 *
 * Displayed counters must equal the service payloads byte for byte, so the
 * only transformation allowed is JSON number -> its canonical decimal
 * string. Nothing is rounded, localized or recomputed client-side.
 */

import type { Budget, GrammarStats, LearnerReport } from "./types.js";

export function counterText(value: number): string {
  return String(value);
}

export interface GrammarCounterTexts {
  productionRules: string;
  precedenceTuples: string;
  ruleInstances: string;
  symbols: string;
}

export function grammarCounterTexts(stats: GrammarStats): GrammarCounterTexts {
  return {
    productionRules: counterText(stats.production_rules),
    precedenceTuples: counterText(stats.precedence_tuples),
    ruleInstances: counterText(stats.rule_instances),
    symbols: counterText(stats.symbols),
  };
}

export interface BudgetTexts {
  spent: string;
  limit: string;
  remaining: string;
}

export function budgetTexts(budget: Budget): BudgetTexts {
  return {
    spent: counterText(budget.spent),
    limit: counterText(budget.limit),
    remaining: counterText(budget.remaining),
  };
}

export interface ReportCell {
  label: string;
  value: string;
}

export function reportGridTexts(report: LearnerReport): ReportCell[] {
  return report.rows.map((row) => ({
    label: row.label,
    value: counterText(row.value),
  }));
}

export function probabilityText(probability: number): string {
  return `${(probability * 100).toFixed(1)}%`;
}
