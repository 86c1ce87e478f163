/** The action-legality mirror.
 *
 * The panel must only offer actions the service would accept, so button
 * state is derived from the same facts the server checks: shift needs an
 * unread buffer, reduce needs two stack items, and a finished session
 * accepts nothing. The contract test pins this against recorded server
 * snapshots.
 */

import type { SessionSnapshot } from "./types.js";

export function legalActions(snapshot: SessionSnapshot): string[] {
  if (snapshot.finished) return [];
  const actions: string[] = [];
  if (snapshot.buffer.remaining.length > 0) actions.push("shift");
  if (snapshot.stack.length >= 2) actions.push("reduce");
  return actions;
}

export function canShift(snapshot: SessionSnapshot): boolean {
  return legalActions(snapshot).includes("shift");
}

export function canReduce(snapshot: SessionSnapshot): boolean {
  return legalActions(snapshot).includes("reduce");
}

export function canFinish(snapshot: SessionSnapshot): boolean {
  return (
    !snapshot.finished &&
    snapshot.buffer.remaining.length === 0 &&
    snapshot.stack.length === 1
  );
}

export function canUndo(snapshot: SessionSnapshot): boolean {
  return !snapshot.finished && snapshot.history.length > 0;
}
