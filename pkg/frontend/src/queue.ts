/** Annotation queue: the learner's far-batch texts in selection order.
 * Skipping requires a reason; a skipped text goes back to the tail and the
 * reason is kept for the event log. */

export interface QueueEntry {
  textId: string;
  skippedReason?: string;
}

export class AnnotationQueue {
  private entries: QueueEntry[];
  readonly skipLog: { textId: string; reason: string }[] = [];

  constructor(textIds: string[]) {
    this.entries = textIds.map((textId) => ({ textId }));
  }

  get length(): number {
    return this.entries.length;
  }

  peek(): QueueEntry | null {
    return this.entries[0] ?? null;
  }

  complete(textId: string): void {
    this.entries = this.entries.filter((e) => e.textId !== textId);
  }

  skip(textId: string, reason: string): void {
    if (!reason.trim()) {
      throw new Error("skipping requires a reason");
    }
    const index = this.entries.findIndex((e) => e.textId === textId);
    if (index < 0) return;
    const [entry] = this.entries.splice(index, 1);
    entry.skippedReason = reason;
    this.entries.push(entry);
    this.skipLog.push({ textId, reason });
  }

  toArray(): string[] {
    return this.entries.map((e) => e.textId);
  }
}
