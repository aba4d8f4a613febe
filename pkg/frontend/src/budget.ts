/**
 * Live budget preview: the number of sampling trials certifying that m
 * queries are each answered within epsilon*S with probability 1-p is
 * ceil(ln(2m/p) / (2 epsilon^2)). The preview must agree exactly with the
 * value the backend computes when a sketch is built from the same triple;
 * this is the only arithmetic the UI performs itself.
 */

export interface GuaranteeTriple {
  m: number;
  p: number;
  epsilon: number;
}

export function computeBudget(m: number, p: number, epsilon: number): number {
  const problem = validateTriple({ m, p, epsilon });
  if (problem !== null) {
    throw new Error(problem);
  }
  return Math.ceil(Math.log((2 * m) / p) / (2 * epsilon * epsilon));
}

/** Smallest epsilon certified for an existing budget: sqrt(ln(2m/p)/(2b)). */
export function errorForBudget(b: number, m: number, p: number): number {
  if (!Number.isInteger(b) || b < 1) {
    throw new Error(`b must be a positive integer, got ${b}`);
  }
  const problem = validateTriple({ m, p, epsilon: 1 });
  if (problem !== null) {
    throw new Error(problem);
  }
  return Math.sqrt(Math.log((2 * m) / p) / (2 * b));
}

/** Inline-validation message for the build form, or null when admissible. */
export function validateTriple(t: Partial<GuaranteeTriple>): string | null {
  if (t.m === undefined || !Number.isFinite(t.m) || !Number.isInteger(t.m) || t.m < 1) {
    return "m must be a positive integer";
  }
  if (t.p === undefined || !Number.isFinite(t.p) || t.p <= 0 || t.p >= 1) {
    return "p must lie strictly between 0 and 1";
  }
  if (t.epsilon === undefined || !Number.isFinite(t.epsilon) || t.epsilon <= 0) {
    return "epsilon must be positive";
  }
  return null;
}
