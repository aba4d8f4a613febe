/**
 * The drill-down tree. Every node holds a full clause list; children are
 * created only through refine(), which appends clauses, so a child's clause
 * set is a superset of its parent's by construction. fromJSON revalidates
 * the invariant when importing a saved session.
 */

import type { ClauseJson, QueryAnswer } from "./api.js";

export type Verdict = "unreviewed" | "suspicious" | "cleared";

export interface NodeJson {
  clauses: ClauseJson[];
  answer: QueryAnswer | null;
  verdict: Verdict;
  collapsed: boolean;
  children: NodeJson[];
}

function sameClause(a: ClauseJson, b: ClauseJson): boolean {
  return (
    a.attribute === b.attribute &&
    a.op === b.op &&
    JSON.stringify(a.value) === JSON.stringify(b.value)
  );
}

export function isClauseSuperset(child: ClauseJson[], parent: ClauseJson[]): boolean {
  return parent.every((pc) => child.some((cc) => sameClause(cc, pc)));
}

export class DrillDownNode {
  readonly clauses: readonly ClauseJson[];
  readonly parent: DrillDownNode | null;
  readonly children: DrillDownNode[] = [];
  answer: QueryAnswer | null = null;
  verdict: Verdict = "unreviewed";
  collapsed = false;

  constructor(clauses: ClauseJson[], parent: DrillDownNode | null = null) {
    if (parent !== null && !isClauseSuperset(clauses, [...parent.clauses])) {
      throw new Error(
        "refinement invariant violated: child clauses must include every parent clause",
      );
    }
    this.clauses = Object.freeze([...clauses]);
    this.parent = parent;
  }

  /** Spawn a child whose predicate adds the given clauses to this node's. */
  refine(extra: ClauseJson[]): DrillDownNode {
    if (extra.length === 0) {
      throw new Error("a refinement must add at least one clause");
    }
    const child = new DrillDownNode([...this.clauses, ...extra], this);
    this.children.push(child);
    return child;
  }

  setVerdict(verdict: Verdict): void {
    this.verdict = verdict;
    // clearing a segment folds its subtree away
    this.collapsed = verdict === "cleared";
  }

  get depth(): number {
    return this.parent === null ? 0 : this.parent.depth + 1;
  }

  toJSON(): NodeJson {
    return {
      clauses: [...this.clauses],
      answer: this.answer,
      verdict: this.verdict,
      collapsed: this.collapsed,
      children: this.children.map((c) => c.toJSON()),
    };
  }

  static fromJSON(json: NodeJson, parent: DrillDownNode | null = null): DrillDownNode {
    const node = new DrillDownNode(json.clauses, parent);
    node.answer = json.answer;
    node.verdict = json.verdict;
    node.collapsed = json.collapsed;
    for (const child of json.children) {
      node.children.push(DrillDownNode.fromJSON(child, node));
    }
    return node;
  }
}

export function exportSession(root: DrillDownNode): string {
  return JSON.stringify(root.toJSON(), null, 2);
}

export function importSession(text: string): DrillDownNode {
  return DrillDownNode.fromJSON(JSON.parse(text) as NodeJson);
}
