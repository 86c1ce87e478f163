/** The annotation flow, headless.
 *
 * One decision in, one action request out; a rejection surfaces the reason
 * and keeps the latest good snapshot; finishing returns the tree and the
 * rules the session contributed. The browser panel and the contract tests
 * drive sessions through this same code path.
 */

import { ApiClient, Rejection, isRejection } from "./api.js";
import type { Action, FinishResult, SessionSnapshot } from "./types.js";

export interface FlowState {
  snapshot: SessionSnapshot;
  lastRejection: Rejection | null;
  finishResult: FinishResult | null;
}

export class AnnotationFlow {
  state: FlowState;

  constructor(
    private readonly client: ApiClient,
    snapshot: SessionSnapshot,
  ) {
    this.state = { snapshot, lastRejection: null, finishResult: null };
  }

  static async open(client: ApiClient, textId: string): Promise<AnnotationFlow> {
    const result = await client.createSession(textId);
    if (isRejection(result)) {
      throw new Error(`cannot open session: ${result.reason}`);
    }
    return new AnnotationFlow(client, result);
  }

  get sessionId(): string {
    return this.state.snapshot.session_id;
  }

  private async refresh(): Promise<void> {
    this.state.snapshot = await this.client.getSession(this.sessionId);
  }

  async decide(action: Action): Promise<FlowState> {
    const result = await this.client.act(this.sessionId, action);
    if (isRejection(result)) {
      this.state.lastRejection = result;
      await this.refresh(); // the form keeps its inputs; the view re-syncs
    } else {
      this.state.lastRejection = null;
      this.state.snapshot = result;
    }
    return this.state;
  }

  async undo(): Promise<FlowState> {
    const result = await this.client.undo(this.sessionId);
    if (isRejection(result)) {
      this.state.lastRejection = result;
    } else {
      this.state.lastRejection = null;
      this.state.snapshot = result;
    }
    return this.state;
  }

  async finish(): Promise<FlowState> {
    const result = await this.client.finish(this.sessionId);
    if (isRejection(result)) {
      this.state.lastRejection = result;
    } else {
      this.state.lastRejection = null;
      this.state.finishResult = result;
      await this.refresh();
    }
    return this.state;
  }

  /** Drive a whole scripted session: every decision, then finish. */
  async complete(actions: Action[]): Promise<FinishResult> {
    for (const action of actions) {
      const state = await this.decide(action);
      if (state.lastRejection) {
        throw new Error(
          `server rejected ${action.type}: ${state.lastRejection.reason}`,
        );
      }
    }
    const state = await this.finish();
    if (!state.finishResult) {
      throw new Error(
        `finish rejected: ${state.lastRejection?.reason ?? "unknown"}`,
      );
    }
    return state.finishResult;
  }
}
