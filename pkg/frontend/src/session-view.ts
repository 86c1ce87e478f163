/** Session panel: stack chips with subtree popovers, buffer strip with the
 * lookahead highlighted, the action panel (shift button plus the reduce
 * form), history with undo, and the live reduce-candidate probabilities.
 * Everything shown derives from the latest snapshot alone. */

import { AnnotationFlow } from "./flow.js";
import { canFinish, canReduce, canShift, canUndo } from "./legality.js";
import { probabilityText } from "./format.js";
import { parseBracket, renderTree } from "./tree.js";
import type { Action, SessionSnapshot } from "./types.js";

const ROLE_PAIRS: [string, string][] = [
  ["N", "S"],
  ["S", "N"],
  ["N", "N"],
];

export class SessionView {
  constructor(
    private readonly doc: Document,
    private readonly root: HTMLElement,
    private readonly flow: AnnotationFlow,
    private readonly onFinished: () => void = () => undefined,
  ) {}

  render(): void {
    const snapshot = this.flow.state.snapshot;
    this.root.textContent = "";
    this.root.appendChild(this.renderStack(snapshot));
    this.root.appendChild(this.renderBuffer(snapshot));
    this.root.appendChild(this.renderActions(snapshot));
    this.root.appendChild(this.renderHistory(snapshot));
    const rejection = this.flow.state.lastRejection;
    if (rejection) {
      const note = this.doc.createElement("p");
      note.className = "rejection";
      note.textContent = `Rejected: ${rejection.reason}`;
      this.root.appendChild(note);
    }
    if (snapshot.finished && snapshot.tree) {
      const done = this.doc.createElement("div");
      done.className = "final-tree";
      done.appendChild(renderTree(this.doc, parseBracket(snapshot.tree)));
      this.root.appendChild(done);
    }
  }

  private renderStack(snapshot: SessionSnapshot): HTMLElement {
    const strip = this.doc.createElement("div");
    strip.className = "stack-strip";
    for (const item of snapshot.stack) {
      const chip = this.doc.createElement("span");
      chip.className = "stack-chip";
      chip.textContent = item.symbol;
      chip.title = `${item.leaf_count} EDU(s) · ${item.rhet_rel ?? "leaf"} · ${item.digest.slice(0, 8)}`;
      strip.appendChild(chip);
    }
    if (!snapshot.stack.length) {
      strip.textContent = "(empty stack)";
    }
    return strip;
  }

  private renderBuffer(snapshot: SessionSnapshot): HTMLElement {
    const strip = this.doc.createElement("div");
    strip.className = "buffer-strip";
    snapshot.buffer.remaining.forEach((symbol, i) => {
      const cell = this.doc.createElement("span");
      cell.className = i === 0 ? "buffer-cell lookahead" : "buffer-cell";
      cell.textContent = symbol;
      strip.appendChild(cell);
    });
    if (!snapshot.buffer.remaining.length) {
      strip.textContent = "(buffer empty)";
    }
    return strip;
  }

  private renderActions(snapshot: SessionSnapshot): HTMLElement {
    const panel = this.doc.createElement("div");
    panel.className = "action-panel";

    const shift = this.doc.createElement("button");
    shift.textContent = "Shift";
    shift.disabled = !canShift(snapshot);
    shift.addEventListener("click", () => {
      void this.flow.decide({ type: "shift" }).then(() => this.render());
    });
    panel.appendChild(shift);

    panel.appendChild(this.renderReduceForm(snapshot));

    const undo = this.doc.createElement("button");
    undo.textContent = "Undo";
    undo.disabled = !canUndo(snapshot);
    undo.addEventListener("click", () => {
      void this.flow.undo().then(() => this.render());
    });
    panel.appendChild(undo);

    const finish = this.doc.createElement("button");
    finish.textContent = "Finish";
    finish.disabled = !canFinish(snapshot);
    finish.addEventListener("click", () => {
      void this.flow.finish().then(() => {
        this.render();
        this.onFinished();
      });
    });
    panel.appendChild(finish);
    return panel;
  }

  private renderReduceForm(snapshot: SessionSnapshot): HTMLElement {
    const form = this.doc.createElement("div");
    form.className = "reduce-form";

    const parent = this.doc.createElement("select");
    parent.className = "reduce-parent";
    // Candidates ordered by current probability; the free-text entry last so
    // the annotator sees what the model would do before overriding it.
    for (const candidate of snapshot.reduce_candidates) {
      const option = this.doc.createElement("option");
      option.value = candidate.parent;
      option.textContent = `${candidate.parent} · ${candidate.rhet_rel} (${probabilityText(candidate.probability)})`;
      parent.appendChild(option);
    }
    const custom = this.doc.createElement("option");
    custom.value = "";
    custom.textContent = "new parent…";
    parent.appendChild(custom);
    form.appendChild(parent);

    const parentText = this.doc.createElement("input");
    parentText.placeholder = "parent symbol";
    form.appendChild(parentText);

    const roles = this.doc.createElement("select");
    for (const pair of ROLE_PAIRS) {
      const option = this.doc.createElement("option");
      option.value = pair.join(",");
      option.textContent = `(${pair.join(", ")})`;
      roles.appendChild(option);
    }
    form.appendChild(roles);

    const relation = this.doc.createElement("input");
    relation.placeholder = "rhetorical relation";
    form.appendChild(relation);

    const equation = this.doc.createElement("input");
    equation.placeholder = "attribute equation (optional)";
    form.appendChild(equation);

    const submit = this.doc.createElement("button");
    submit.textContent = "Reduce";
    submit.disabled = !canReduce(snapshot);
    submit.addEventListener("click", () => {
      const chosen = parent.value || parentText.value;
      if (!chosen || !relation.value) return;
      const [x, y] = roles.value.split(",") as [string, string];
      const action: Action = {
        type: "reduce",
        parent: chosen,
        roles: [x, y],
        rhet_rel: relation.value,
      };
      if (equation.value) action.ae = equation.value;
      void this.flow.decide(action).then(() => this.render());
    });
    form.appendChild(submit);
    return form;
  }

  private renderHistory(snapshot: SessionSnapshot): HTMLElement {
    const list = this.doc.createElement("ol");
    list.className = "history";
    for (const event of snapshot.history) {
      const item = this.doc.createElement("li");
      item.textContent =
        event.kind === "shift"
          ? "shift"
          : `reduce → ${event.parent} (${event.roles?.join(",")}, ${event.rhet_rel})`;
      list.appendChild(item);
    }
    return list;
  }
}
