/** Pending-queue state: service order preserved, decided cases drop out
 * client-side so the list updates without a reload. */

import type { CaseSummary } from "./types.js";

export class Queue {
  private items: CaseSummary[] = [];

  replace(summaries: CaseSummary[]): void {
    // keep exactly the service's sort response; never reorder client-side
    this.items = summaries.slice();
  }

  get cases(): readonly CaseSummary[] {
    return this.items;
  }

  get isEmpty(): boolean {
    return this.items.length === 0;
  }

  /** Drop a decided case; returns the next case to review, if any. */
  remove(caseId: string): CaseSummary | null {
    const at = this.items.findIndex((c) => c.case_id === caseId);
    if (at < 0) return this.items[0] ?? null;
    this.items.splice(at, 1);
    return this.items[at] ?? this.items[at - 1] ?? null;
  }
}
