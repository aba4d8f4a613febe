/**
 * Scripted drill-down sessions: a sequence of refinements run top-down
 * against the summary-query endpoint alone. Used by the demo walkthrough
 * ("total looks too high -> one department -> one hire year") and by tests
 * asserting that narrowing never touches the exact-query path.
 */

import type { ClauseJson, SketchQueryApi } from "./api.js";
import { DrillDownNode } from "./tree.js";

export interface SessionStep {
  /** clauses appended to the previous step's predicate */
  add: ClauseJson[];
}

export interface SessionResult {
  root: DrillDownNode;
  /** nodes in visit order, root first */
  trail: DrillDownNode[];
}

/** Whole sum, then one department, then one hire year inside it. */
export const SALARY_NARRATIVE: SessionStep[] = [
  { add: [{ attribute: "Department", op: "=", value: "Toys" }] },
  { add: [{ attribute: "HireYear", op: "=", value: "2009" }] },
];

export async function runScriptedSession(
  api: SketchQueryApi,
  sketchId: string,
  totalSum: number,
  steps: SessionStep[],
  suspicionThreshold = 0.5,
): Promise<SessionResult> {
  const root = new DrillDownNode([]);
  root.answer = await api.querySketch(sketchId, [...root.clauses]);
  const trail = [root];
  let current = root;
  for (const step of steps) {
    current.setVerdict(
      totalSum > 0 && current.answer!.estimate / totalSum >= suspicionThreshold
        ? "suspicious"
        : "cleared",
    );
    const child = current.refine(step.add);
    child.answer = await api.querySketch(sketchId, [...child.clauses]);
    trail.push(child);
    current = child;
  }
  return { root, trail };
}
