"""Approximate SUM evaluation over summaries, plus two straw-man baselines.

The weighted summary answers a predicate by summing entry frequencies and
scaling by S/b; its runtime depends on the summary size only, never on the
source relation.  The baselines reuse the summary shape with their own
estimators: the top-k summary sums raw attribute values over matches, the
uniform summary reports both the unscaled sample sum and the n/b-scaled
estimate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateRelationError, ParameterError, SchemaError
from .relation import NUMERIC, Predicate, Relation
from .sampling import (
    KIND_LINEAGE,
    KIND_TOP_K,
    KIND_UNIFORM,
    GuaranteeParams,
    LineageSketch,
    _check_budget,
    _sketch_from_selection,
    derive_rng,
    error_for_budget,
)


@dataclass(frozen=True)
class ApproxAnswer:
    """Result of evaluating one predicate against one summary."""

    estimate: float
    matched_entries: int
    matched_frequency_mass: int
    total_sum: float
    budget: int
    kind: str
    epsilon_certified: float | None = None
    additive_bound: float | None = None
    sample_sum: float | None = None  # uniform baseline only: unscaled sum

    @property
    def rho(self) -> float:
        """Estimated query mass as a fraction of the total sum."""
        return self.estimate / self.total_sum if self.total_sum else 0.0


@dataclass(frozen=True)
class RelativeErrorReport:
    """Certified relative error epsilon/rho for one answer."""

    epsilon: float
    rho: float
    relative_error: float
    below_resolution: bool

    @property
    def note(self) -> str:
        if self.below_resolution:
            return "unreliable - below resolution"
        return "certified"


def _certification(sketch: LineageSketch, guarantees) -> tuple:
    if guarantees is None:
        return None, None
    if isinstance(guarantees, GuaranteeParams):
        m, p = guarantees.m, guarantees.p
    else:
        m, p = guarantees
    epsilon = error_for_budget(sketch.budget, int(m), float(p))
    return epsilon, epsilon * sketch.total_sum


def approx_sum(
    sketch: LineageSketch, predicate: Predicate, guarantees=None
) -> ApproxAnswer:
    """Answer a SUM predicate from the summary alone.

    For the weighted summary the estimate is (matched frequency mass)*S/b.
    ``guarantees`` may be a :class:`GuaranteeParams` or an ``(m, p)`` pair;
    when given, the answer carries the certified epsilon for the summary's
    budget and the additive bound epsilon*S.
    """
    mask = sketch.match_mask(predicate)
    matched = int(mask.sum())
    fmass = int(sketch.freqs[mask].sum())

    if sketch.kind == KIND_LINEAGE:
        estimate = fmass * sketch.total_sum / sketch.budget
        epsilon, bound = _certification(sketch, guarantees)
        return ApproxAnswer(
            estimate=estimate,
            matched_entries=matched,
            matched_frequency_mass=fmass,
            total_sum=sketch.total_sum,
            budget=sketch.budget,
            kind=sketch.kind,
            epsilon_certified=epsilon,
            additive_bound=bound,
        )

    values = sketch.entry_values()[mask]
    if sketch.kind == KIND_TOP_K:
        # Baseline keeps raw records; its answer is their plain sum.
        estimate = math.fsum((sketch.freqs[mask] * values).tolist())
        return ApproxAnswer(
            estimate=estimate,
            matched_entries=matched,
            matched_frequency_mass=fmass,
            total_sum=sketch.total_sum,
            budget=sketch.budget,
            kind=sketch.kind,
        )

    # Uniform baseline: Horvitz-Thompson estimate sum(f*a)*n/b, with the
    # unscaled sample sum reported alongside.
    sample_sum = math.fsum((sketch.freqs[mask] * values).tolist())
    estimate = sample_sum * sketch.source_n / sketch.budget
    return ApproxAnswer(
        estimate=estimate,
        matched_entries=matched,
        matched_frequency_mass=fmass,
        total_sum=sketch.total_sum,
        budget=sketch.budget,
        kind=sketch.kind,
        sample_sum=sample_sum,
    )


def relative_error_report(
    answer: ApproxAnswer, rho_hint: float | None = None, epsilon: float | None = None
) -> RelativeErrorReport:
    """Translate an additive guarantee into a relative one.

    A query of mass rho*S certified within epsilon*S has relative error
    epsilon/rho.  ``rho_hint`` overrides the default estimate/S; answers
    with rho below epsilon are flagged as below resolution (the certified
    relative error exceeds 1).
    """
    if epsilon is None:
        epsilon = answer.epsilon_certified
    if epsilon is None:
        raise ParameterError(
            "answer carries no certified epsilon; evaluate with guarantees "
            "or pass epsilon explicitly"
        )
    if rho_hint is not None:
        if not 0.0 < rho_hint <= 1.0:
            raise ParameterError(f"rho_hint must lie in (0, 1], got {rho_hint!r}")
        rho = float(rho_hint)
    else:
        rho = answer.rho
    relative = epsilon / rho if rho > 0 else math.inf
    return RelativeErrorReport(
        epsilon=epsilon,
        rho=rho,
        relative_error=relative,
        below_resolution=rho < epsilon,
    )


def top_k_baseline(rel: Relation, attribute: str, b: int) -> LineageSketch:
    """Keep the b largest-valued records (ties by id), frequency 1 each."""
    b = _check_budget(b)
    if rel.n == 0:
        raise DegenerateRelationError("relation has no records")
    values = rel.numeric_column(attribute)
    if not rel.totals[attribute] > 0:
        raise DegenerateRelationError(
            f"attribute {attribute!r} has zero total"
        )
    order = np.lexsort((np.arange(rel.n), -values))
    keep = np.sort(order[: min(b, rel.n)])
    freqs = np.ones(len(keep), dtype=np.int64)
    return _sketch_from_selection(
        rel, attribute, keep, freqs, kind=KIND_TOP_K, budget=b, seed=None
    )


def uniform_baseline(rel: Relation, attribute: str, b: int, seed: int) -> LineageSketch:
    """b uniform-with-replacement draws, ignoring attribute values."""
    b = _check_budget(b)
    if rel.n == 0:
        raise DegenerateRelationError("relation has no records")
    if rel.kind_of(attribute) != NUMERIC:
        raise SchemaError(f"attribute {attribute!r} is not numeric")
    rng = derive_rng(seed, "uniform", attribute)
    draws = rng.integers(0, rel.n, size=b)
    ids, freqs = np.unique(draws, return_counts=True)
    return _sketch_from_selection(
        rel, attribute, ids, freqs, kind=KIND_UNIFORM, budget=b, seed=seed
    )
