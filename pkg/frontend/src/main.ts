/** Browser entry point: open a session for a chosen text, annotate it, and
 * keep the dashboard in sync with the service. */

import { ApiClient, isRejection } from "./api.js";
import { Dashboard } from "./dashboard.js";
import { AnnotationFlow } from "./flow.js";
import { AnnotationQueue } from "./queue.js";
import { SessionView } from "./session-view.js";

async function boot(): Promise<void> {
  const base = (window as { RHETSUM_API?: string }).RHETSUM_API ?? "";
  const client = new ApiClient(base);
  const sessionRoot = document.getElementById("session")!;
  const dashboardRoot = document.getElementById("dashboard")!;
  const openForm = document.getElementById("open-form") as HTMLFormElement;
  const textInput = document.getElementById("text-id") as HTMLInputElement;
  const queueRoot = document.getElementById("queue")!;

  const dashboard = new Dashboard(document, dashboardRoot, client);
  await dashboard.refresh(null);

  const { queue: pending } = await client.learnerQueue();
  const queue = new AnnotationQueue(pending);
  renderQueue();

  function renderQueue(): void {
    queueRoot.textContent = queue.length
      ? `queue: ${queue.toArray().join(", ")}`
      : "queue idle";
  }

  async function openSession(textId: string): Promise<void> {
    const result = await client.createSession(textId);
    if (isRejection(result)) {
      sessionRoot.textContent = `cannot open session: ${result.reason}`;
      return;
    }
    const flow = new AnnotationFlow(client, result);
    const view = new SessionView(document, sessionRoot, flow, () => {
      queue.complete(textId);
      renderQueue();
      void dashboard.refresh(flow.state.snapshot.budget);
    });
    view.render();
    await dashboard.refresh(result.budget);
  }

  openForm.addEventListener("submit", (event) => {
    event.preventDefault();
    const next = textInput.value || queue.peek()?.textId;
    if (next) void openSession(next);
  });
}

if (typeof window !== "undefined" && typeof document !== "undefined") {
  void boot();
}
