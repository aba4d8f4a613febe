/**
 * Pure view models for the drill-down display. Bars are scaled to the whole
 * sum S (not the parent node) so "close to the total" is visually literal;
 * the +-epsilon*S band renders as a symmetric overlay around the bar end.
 */

import type { QueryAnswer } from "./api.js";

export interface BarModel {
  /** estimate / S, clamped to [0, 1] */
  fraction: number;
  /** half-width of the certified band as a fraction of S (0 when unknown) */
  bandFraction: number;
  /** answers flagged below resolution render visually muted */
  muted: boolean;
  /** suspiciously large answers render emphasized */
  emphasized: boolean;
}

export const DEFAULT_EMPHASIS_THRESHOLD = 0.5;

export function barModel(
  answer: QueryAnswer,
  totalSum: number,
  emphasisThreshold: number = DEFAULT_EMPHASIS_THRESHOLD,
): BarModel {
  const fraction = totalSum > 0 ? Math.min(Math.max(answer.estimate / totalSum, 0), 1) : 0;
  const bandFraction =
    answer.additive_bound !== null && totalSum > 0 ? answer.additive_bound / totalSum : 0;
  const muted = answer.flags.includes("below-resolution");
  return {
    fraction,
    bandFraction,
    muted,
    emphasized: !muted && fraction >= emphasisThreshold,
  };
}

const SI_STEPS: Array<[number, string]> = [
  [1e12, "T"],
  [1e9, "G"],
  [1e6, "M"],
  [1e3, "k"],
];

export function formatCompact(value: number): string {
  if (!Number.isFinite(value)) {
    return String(value);
  }
  const magnitude = Math.abs(value);
  for (const [threshold, suffix] of SI_STEPS) {
    if (magnitude >= threshold) {
      return `${(value / threshold).toPrecision(3)}${suffix}`;
    }
  }
  return value.toPrecision(3);
}

export function percent(fraction: number): string {
  return `${(100 * fraction).toFixed(1)}%`;
}
