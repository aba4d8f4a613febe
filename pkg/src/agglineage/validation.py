"""Monte Carlo validation: bound checks, block replication, builder equivalence.

Every check rebuilds summaries under fresh derived seeds, compares
approximate answers against exact ones, and reports empirical violation
rates next to the two-sided tail ceiling ``2*exp(-2*epsilon^2*b)``.
Acceptance bands are sigma-based (3-sigma binomial allowance on rates,
4-sigma on means) so pinned-seed runs are reproducible.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats

from .errors import ParameterError
from .queries import approx_sum
from .relation import Relation, make_salaries_demo
from .sampling import (
    build_lineage,
    build_lineage_streaming,
    derive_child_seed,
)


def hoeffding_ceiling(epsilon: float, b: int) -> float:
    """Two-sided tail bound for the mean of b draws in [0, 1]."""
    return 2.0 * math.exp(-2.0 * epsilon**2 * b)


@dataclass
class QueryStats:
    """Per-query aggregates over all trials; errors are normalized by S."""

    label: str
    exact: float
    violations: int
    mean_error: float
    std_error: float
    mean_abs_error: float

    def violation_rate(self, trials: int) -> float:
        return self.violations / trials


@dataclass
class ValidationReport:
    trials: int
    epsilon: float
    budget: int
    total_sum: float
    hoeffding_ceiling: float
    queries: list
    union_violations: int
    failure_probability_target: float | None = None
    warnings: list = field(default_factory=list)
    error_samples: np.ndarray | None = None  # trials x queries, when small

    @property
    def union_violation_rate(self) -> float:
        return self.union_violations / self.trials

    def per_query_violation_rates(self) -> list:
        return [q.violation_rate(self.trials) for q in self.queries]

    def rate_allowance(self) -> float:
        """3-sigma binomial band on top of the tail ceiling."""
        c = self.hoeffding_ceiling
        return 3.0 * math.sqrt(max(c * (1.0 - c), 0.0) / self.trials)

    def band_violations(self) -> list:
        """Human-readable list of acceptance-band breaches (empty = clean)."""
        problems = []
        limit = min(self.hoeffding_ceiling + self.rate_allowance(), 1.0)
        for q in self.queries:
            rate = q.violation_rate(self.trials)
            if rate > limit:
                problems.append(
                    f"query {q.label!r}: violation rate {rate:.3g} exceeds "
                    f"ceiling+band {limit:.3g}"
                )
            mean_band = 4.0 * q.std_error / math.sqrt(self.trials)
            biased = (
                abs(q.mean_error) > mean_band
                if q.std_error > 0
                else q.mean_error != 0.0  # zero spread, so any offset is systematic
            )
            if biased:
                problems.append(
                    f"query {q.label!r}: |mean error| {abs(q.mean_error):.3g} "
                    f"exceeds unbiasedness band {mean_band:.3g}"
                )
        if (
            self.failure_probability_target is not None
            and self.union_violation_rate
            > self.failure_probability_target + self.rate_allowance()
        ):
            problems.append(
                f"union violation rate {self.union_violation_rate:.3g} exceeds "
                f"target p={self.failure_probability_target:.3g}"
            )
        return problems

    def to_csv(self, sink) -> None:
        close = False
        if isinstance(sink, (str, Path)):
            sink = open(sink, "w", newline="", encoding="utf-8")
            close = True
        try:
            writer = csv.writer(sink)
            writer.writerow(
                [
                    "query",
                    "exact",
                    "trials",
                    "violations",
                    "violation_rate",
                    "hoeffding_ceiling",
                    "mean_error_over_S",
                    "std_error_over_S",
                    "mean_abs_error_over_S",
                ]
            )
            for q in self.queries:
                writer.writerow(
                    [
                        q.label,
                        repr(q.exact),
                        self.trials,
                        q.violations,
                        repr(q.violation_rate(self.trials)),
                        repr(self.hoeffding_ceiling),
                        repr(q.mean_error),
                        repr(q.std_error),
                        repr(q.mean_abs_error),
                    ]
                )
        finally:
            if close:
                sink.close()

    def summary_text(self) -> str:
        lines = [
            f"trials={self.trials} b={self.budget} epsilon={self.epsilon} "
            f"ceiling={self.hoeffding_ceiling:.3g} "
            f"union_rate={self.union_violation_rate:.3g}"
        ]
        for q in self.queries:
            lines.append(
                f"  {q.label}: exact={q.exact:.6g} "
                f"rate={q.violation_rate(self.trials):.3g} "
                f"mean_err={q.mean_error:.3g} abs_err={q.mean_abs_error:.3g}"
            )
        for w in self.warnings:
            lines.append(f"  warning: {w}")
        problems = self.band_violations()
        lines.append(
            "bands: CLEAN" if not problems else "bands: VIOLATED\n  " + "\n  ".join(problems)
        )
        return "\n".join(lines)


_SAMPLE_CAP = 4_000_000  # keep raw error samples only below this many cells


def run_bound_check(
    rel: Relation,
    attribute: str,
    b: int,
    queries: list,
    trials: int,
    seed: int,
    epsilon: float,
    guarantees=None,
) -> ValidationReport:
    """Rebuild the summary ``trials`` times and test every query both ways.

    Queries must be constructed from the relation alone (oblivious to any
    summary).  Reports per-query violation rates against the tail ceiling
    and the all-queries union rate; fewer than 100 trials only warns.
    """
    if trials < 1:
        raise ParameterError("trials must be >= 1")
    if not epsilon > 0:
        raise ParameterError("epsilon must be positive")
    warnings = []
    if trials < 100:
        warnings.append(f"only {trials} trials: insufficient statistical power")

    queries = list(queries)
    if not queries:
        raise ParameterError("no queries given")
    exact = np.array([rel.exact_sum(attribute, q) for q in queries])
    total = rel.totals[attribute]
    threshold = epsilon * total

    n_q = len(queries)
    keep_samples = trials * n_q <= _SAMPLE_CAP
    samples = np.empty((trials, n_q)) if keep_samples else None
    err_sum = np.zeros(n_q)
    err_sumsq = np.zeros(n_q)
    abs_sum = np.zeros(n_q)
    violations = np.zeros(n_q, dtype=np.int64)
    union = 0
    for t in range(trials):
        sketch = build_lineage(
            rel, attribute, b, derive_child_seed(seed, "trial", t)
        )
        estimates = np.array(
            [approx_sum(sketch, q).estimate for q in queries]
        )
        err = estimates - exact
        hit = np.abs(err) > threshold
        violations += hit
        union += bool(hit.any())
        norm = err / total
        err_sum += norm
        err_sumsq += norm**2
        abs_sum += np.abs(norm)
        if keep_samples:
            samples[t] = np.abs(norm)

    query_stats = []
    for j, q in enumerate(queries):
        mean = err_sum[j] / trials
        var = max(err_sumsq[j] / trials - mean**2, 0.0)
        query_stats.append(
            QueryStats(
                label=q.describe(),
                exact=float(exact[j]),
                violations=int(violations[j]),
                mean_error=float(mean),
                std_error=float(math.sqrt(var)),
                mean_abs_error=float(abs_sum[j] / trials),
            )
        )
    return ValidationReport(
        trials=trials,
        epsilon=epsilon,
        budget=b,
        total_sum=total,
        hoeffding_ceiling=hoeffding_ceiling(epsilon, b),
        queries=query_stats,
        union_violations=union,
        failure_probability_target=(
            guarantees.p if guarantees is not None else None
        ),
        warnings=warnings,
        error_samples=samples,
    )


def oracle_exhaustive_sum(rel: Relation, attribute: str) -> dict:
    """Brute-force exact sums for every identifier subset of a tiny relation.

    Keys are subset bitmasks over record ids (bit i = record i).  Refuses
    relations with more than 20 records.
    """
    if rel.n > 20:
        raise ParameterError(
            f"exhaustive oracle limited to n <= 20 records, got n={rel.n}"
        )
    values = rel.numeric_column(attribute)
    sums = {0: 0.0}
    for mask in range(1, 1 << rel.n):
        low = mask & -mask
        sums[mask] = sums[mask ^ low] + float(values[low.bit_length() - 1])
    return sums


def run_exhaustive_bound_check(
    rel: Relation,
    attribute: str,
    b: int,
    trials: int,
    seed: int,
    epsilon: float,
    chunk: int = 8192,
) -> ValidationReport:
    """Bound check against every one of the 2^n subset queries.

    Uses the brute-force oracle for the exact side and evaluates all
    subsets per trial through one frequency-vector matrix product, which is
    arithmetic-identical to scaling matched frequency mass by S/b.
    """
    oracle = oracle_exhaustive_sum(rel, attribute)
    n = rel.n
    total = rel.totals[attribute]
    n_q = 1 << n
    subset_matrix = (
        (np.arange(n_q)[:, None] >> np.arange(n)[None, :]) & 1
    ).astype(np.float64)
    exact = np.array([oracle[mask] for mask in range(n_q)])
    threshold = epsilon * total
    scale = total / b

    warnings = []
    if trials < 100:
        warnings.append(f"only {trials} trials: insufficient statistical power")

    err_sum = np.zeros(n_q)
    err_sumsq = np.zeros(n_q)
    abs_sum = np.zeros(n_q)
    violations = np.zeros(n_q, dtype=np.int64)
    union = 0
    done = 0
    while done < trials:
        size = min(chunk, trials - done)
        freq_vectors = np.zeros((size, n))
        for i in range(size):
            sketch = build_lineage(
                rel, attribute, b, derive_child_seed(seed, "trial", done + i)
            )
            freq_vectors[i, sketch.ids] = sketch.freqs
        estimates = freq_vectors @ subset_matrix.T * scale
        err = estimates - exact[None, :]
        hit = np.abs(err) > threshold
        violations += hit.sum(axis=0)
        union += int(hit.any(axis=1).sum())
        norm = err / total
        err_sum += norm.sum(axis=0)
        err_sumsq += (norm**2).sum(axis=0)
        abs_sum += np.abs(norm).sum(axis=0)
        done += size

    query_stats = []
    for mask in range(n_q):
        mean = err_sum[mask] / trials
        var = max(err_sumsq[mask] / trials - mean**2, 0.0)
        query_stats.append(
            QueryStats(
                label=f"subset:{mask:0{n}b}",
                exact=float(exact[mask]),
                violations=int(violations[mask]),
                mean_error=float(mean),
                std_error=float(math.sqrt(var)),
                mean_abs_error=float(abs_sum[mask] / trials),
            )
        )
    return ValidationReport(
        trials=trials,
        epsilon=epsilon,
        budget=b,
        total_sum=total,
        hoeffding_ceiling=hoeffding_ceiling(epsilon, b),
        queries=query_stats,
        union_violations=union,
        warnings=warnings,
    )


# -- block replication -----------------------------------------------------------


@dataclass
class BlockRow:
    """Replication stats for one distinct attribute value of the demo data."""

    value: float
    source_count: int
    expected_bag_mass: float
    mean_bag_mass: float
    se_bag_mass: float
    mean_distinct: float
    se_distinct: float

    @property
    def mean_frequency_per_tuple(self) -> float:
        return self.mean_bag_mass / self.source_count

    @property
    def se_frequency_per_tuple(self) -> float:
        return self.se_bag_mass / self.source_count


@dataclass
class BlockReplication:
    trials: int
    budget: int
    total_sum: float
    rows: list

    def summary_text(self) -> str:
        lines = [f"trials={self.trials} b={self.budget}"]
        for r in self.rows:
            lines.append(
                f"  value={r.value:.3g}: expected_bag={r.expected_bag_mass:.4g} "
                f"mean_bag={r.mean_bag_mass:.4g} (se {r.se_bag_mass:.3g}) "
                f"mean_distinct={r.mean_distinct:.4g}"
            )
        return "\n".join(lines)


def replicate_block_table(
    b: int = 8852,
    trials: int = 200,
    seed: int = 0,
    rel: Relation | None = None,
    attribute: str = "Sal",
) -> BlockReplication:
    """Rebuild the demo summary repeatedly and average per-value-block stats.

    For each distinct attribute value: mean bag mass (sum of frequencies),
    mean distinct tuples selected, and their standard errors, next to the
    expectation b*(block mass)/S.
    """
    if rel is None:
        rel = make_salaries_demo()
    values = rel.numeric_column(attribute)
    total = rel.totals[attribute]
    distinct_values = sorted(set(values.tolist()), reverse=True)
    block_index = {v: i for i, v in enumerate(distinct_values)}
    source_counts = [int((values == v).sum()) for v in distinct_values]
    block_mass = [
        math.fsum(values[values == v].tolist()) for v in distinct_values
    ]

    n_blocks = len(distinct_values)
    bag = np.zeros((trials, n_blocks))
    distinct = np.zeros((trials, n_blocks))
    for t in range(trials):
        sketch = build_lineage(
            rel, attribute, b, derive_child_seed(seed, "block-trial", t)
        )
        entry_values = sketch.entry_values()
        for v, j in block_index.items():
            sel = entry_values == v
            bag[t, j] = sketch.freqs[sel].sum()
            distinct[t, j] = sel.sum()

    rows = []
    for j, v in enumerate(distinct_values):
        rows.append(
            BlockRow(
                value=float(v),
                source_count=source_counts[j],
                expected_bag_mass=b * block_mass[j] / total,
                mean_bag_mass=float(bag[:, j].mean()),
                se_bag_mass=float(bag[:, j].std(ddof=1) / math.sqrt(trials)),
                mean_distinct=float(distinct[:, j].mean()),
                se_distinct=float(distinct[:, j].std(ddof=1) / math.sqrt(trials)),
            )
        )
    return BlockReplication(
        trials=trials, budget=b, total_sum=total, rows=rows
    )


# -- builder equivalence -----------------------------------------------------------


@dataclass
class BuilderEquivalence:
    counts_memory: np.ndarray
    counts_streaming: np.ndarray
    chi2: float
    p_value: float

    def passes(self, significance: float = 0.01) -> bool:
        return self.p_value >= significance


def compare_builders(
    rel: Relation, attribute: str, builds: int, seed: int
) -> BuilderEquivalence:
    """Chi-square homogeneity test between the two builders' selections.

    Runs ``builds`` single-trial summaries through each builder and compares
    the per-record selection counts as a 2 x n contingency table.
    """
    records = list(rel.records())
    counts_memory = np.zeros(rel.n, dtype=np.int64)
    counts_streaming = np.zeros(rel.n, dtype=np.int64)
    for t in range(builds):
        sk_mem = build_lineage(
            rel, attribute, 1, derive_child_seed(seed, "mem", t)
        )
        counts_memory[sk_mem.ids[0]] += 1
        sk_str = build_lineage_streaming(
            records, attribute, 1, derive_child_seed(seed, "str", t)
        )
        counts_streaming[sk_str.ids[0]] += 1
    table = np.vstack([counts_memory, counts_streaming])
    # drop records neither builder ever selected (zero-weight records)
    table = table[:, table.sum(axis=0) > 0]
    chi2, p_value, _, _ = stats.chi2_contingency(table)
    return BuilderEquivalence(
        counts_memory=counts_memory,
        counts_streaming=counts_streaming,
        chi2=float(chi2),
        p_value=float(p_value),
    )
