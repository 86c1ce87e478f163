/** Parse and render the bracketed tree export `(D^rel^X,Y left right)`.
 * Leaves are EDU ids. Rendering marks nucleus edges bold and satellite
 * edges thin, the usual RST visual convention. */

export interface TreeNode {
  symbol: string;
  rhetRel?: string;
  roles?: [string, string];
  children?: [TreeNode, TreeNode];
}

export function parseBracket(text: string): TreeNode {
  let pos = 0;

  function skipSpace(): void {
    while (pos < text.length && text[pos] === " ") pos++;
  }

  function parseNode(): TreeNode {
    skipSpace();
    if (text[pos] !== "(") {
      const start = pos;
      while (pos < text.length && ![" ", ")"].includes(text[pos])) pos++;
      return { symbol: text.slice(start, pos) };
    }
    pos++; // consume "("
    const headStart = pos;
    while (pos < text.length && text[pos] !== " ") pos++;
    const head = text.slice(headStart, pos);
    const [symbol, rhetRel, rolePair] = head.split("^");
    const roles = rolePair ? (rolePair.split(",") as [string, string]) : undefined;
    const left = parseNode();
    const right = parseNode();
    skipSpace();
    if (text[pos] !== ")") throw new Error(`unbalanced bracket at ${pos}`);
    pos++;
    return { symbol, rhetRel, roles, children: [left, right] };
  }

  const node = parseNode();
  skipSpace();
  if (pos !== text.length) throw new Error("trailing characters after tree");
  return node;
}

export function renderTree(doc: Document, node: TreeNode): HTMLElement {
  const box = doc.createElement("div");
  box.className = "tree-node";
  const label = doc.createElement("span");
  label.className = node.children ? "tree-label internal" : "tree-label leaf";
  label.textContent = node.children
    ? `${node.symbol} · ${node.rhetRel ?? ""}`
    : node.symbol;
  box.appendChild(label);
  if (node.children && node.roles) {
    const kids = doc.createElement("div");
    kids.className = "tree-children";
    node.children.forEach((child, i) => {
      const edge = doc.createElement("div");
      const role = node.roles![i];
      edge.className = role === "N" ? "edge nucleus" : "edge satellite";
      edge.dataset.role = role;
      edge.appendChild(renderTree(doc, child));
      kids.appendChild(edge);
    });
    box.appendChild(kids);
  }
  return box;
}
