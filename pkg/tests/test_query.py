import math

import numpy as np
import pytest

from agglineage import (
    ALWAYS_TRUE,
    ApproxAnswer,
    DegenerateRelationError,
    ParameterError,
    Predicate,
    PredicateError,
    Relation,
    approx_sum,
    build_lineage,
    derive_child_seed,
    relative_error_report,
    top_k_baseline,
    toys_subset_predicate,
    uniform_baseline,
)
from agglineage.sampling import KIND_LINEAGE, LineageSketch
from helpers import DEMO_Q1_EXACT, DEMO_S, TOPK_Q1_ANSWER


def tiny_sketch(entries, b, total, tags=None):
    """Hand-built summary: entries = [(id, weight_value, freq), ...]."""
    ids = np.array([e[0] for e in entries], dtype=np.int64)
    values = np.array([e[1] for e in entries], dtype=np.float64)
    freqs = np.array([e[2] for e in entries], dtype=np.int64)
    tags = tags or [f"t{i}" for i in ids]
    cats = tuple(dict.fromkeys(tags))
    codes = np.array([cats.index(t) for t in tags], dtype=np.int32)
    return LineageSketch(
        kind=KIND_LINEAGE,
        attribute="W",
        total_sum=total,
        budget=b,
        seed=0,
        source_n=max(int(ids.max()) + 1, len(ids)) if len(ids) else 0,
        schema=(("W", "numeric"), ("Tag", "categorical")),
        ids=ids,
        freqs=freqs,
        numeric={"W": values},
        cat_codes={"Tag": codes},
        cat_values={"Tag": cats},
    )


class TestApproxSum:
    def test_forced_two_entry_example(self):
        sketch = tiny_sketch([(0, 30.0, 2), (1, 10.0, 3)], b=5, total=100.0)
        answer = approx_sum(sketch, Predicate.of(("Tag", "=", "t0")))
        assert answer.estimate == 2 * 100.0 / 5 == 40.0
        assert answer.matched_entries == 1
        assert answer.matched_frequency_mass == 2

    def test_always_true_is_exactly_total(self, toy10):
        for seed in range(5):
            sketch = build_lineage(toy10, "W", 37, seed=seed)
            answer = approx_sum(sketch, ALWAYS_TRUE)
            assert answer.estimate == toy10.totals["W"]
            assert answer.matched_frequency_mass == 37

    def test_estimate_bounded_by_total(self, toy10):
        sketch = build_lineage(toy10, "W", 64, seed=3)
        for q in (
            Predicate.of(("W", ">", 5)),
            Predicate.of(("Tag", "in", ("r1", "r4"))),
            Predicate.of(("W", "<", 0)),
        ):
            answer = approx_sum(sketch, q)
            assert 0.0 <= answer.estimate <= toy10.totals["W"]
            assert answer.estimate == answer.matched_frequency_mass * sketch.scale

    def test_monotone_under_clause_addition(self, toy10):
        sketch = build_lineage(toy10, "W", 100, seed=9)
        q = Predicate()
        last = approx_sum(sketch, q).estimate
        for clause in (
            ("W", ">=", 2),
            ("Tag", "in", tuple(f"r{i}" for i in range(8))),
            ("W", "<=", 8),
        ):
            q = q.and_clause(*clause)
            current = approx_sum(sketch, q).estimate
            assert current <= last
            last = current

    def test_additive_over_disjoint_predicates(self, toy10):
        # disjoint matched frequency masses partition b exactly (integers);
        # the scaled estimates can differ by one rounding step when S/b is
        # not a dyadic rational, so they are compared at ulp tolerance
        sketch = build_lineage(toy10, "W", 80, seed=21)
        low = approx_sum(sketch, Predicate.of(("W", "<=", 5)))
        high = approx_sum(sketch, Predicate.of(("W", ">", 5)))
        whole = approx_sum(sketch, ALWAYS_TRUE)
        assert (
            low.matched_frequency_mass + high.matched_frequency_mass
            == whole.matched_frequency_mass
            == 80
        )
        assert low.estimate + high.estimate == pytest.approx(
            whole.estimate, rel=1e-15, abs=0.0
        )
        # with this fixture the scale is dyadic, so even the floats agree
        assert low.estimate + high.estimate == whole.estimate

    def test_rejects_frequency_predicate(self, toy10):
        sketch = build_lineage(toy10, "W", 10, seed=0)
        with pytest.raises(PredicateError, match="reserved"):
            approx_sum(sketch, Predicate.of(("Fr", ">", 1)))

    def test_rejects_unknown_attribute(self, toy10):
        sketch = build_lineage(toy10, "W", 10, seed=0)
        with pytest.raises(PredicateError, match="unknown"):
            approx_sum(sketch, Predicate.of(("Nope", "=", 1)))

    def test_certified_bound_attached(self, toy10):
        sketch = build_lineage(toy10, "W", 415, seed=1)
        answer = approx_sum(sketch, ALWAYS_TRUE, guarantees=(100, 0.05))
        assert answer.epsilon_certified <= 0.1
        assert answer.additive_bound == answer.epsilon_certified * sketch.total_sum

    def test_never_reads_the_source_relation(self, toy10, monkeypatch):
        sketch = build_lineage(toy10, "W", 50, seed=2)

        def forbidden(*args, **kwargs):
            raise AssertionError("approx_sum touched the source relation")

        monkeypatch.setattr(Relation, "match_mask", forbidden)
        monkeypatch.setattr(Relation, "numeric_column", forbidden)
        monkeypatch.setattr(Relation, "exact_sum", forbidden)
        answer = approx_sum(sketch, Predicate.of(("W", ">=", 3)))
        assert answer.estimate >= 0.0


class TestAdversarialReplay:
    """Replay the reference worst-case entry selections for the mixed query.

    The two extreme sub-lineages carry frequency mass 7,935 and 6,995; at
    scale S/b they bracket the exact answer 1.1e12.
    """

    def test_bracketing_values(self):
        scale = DEMO_S / 8852
        high = 7_935 * scale
        low = 6_995 * scale
        assert low <= DEMO_Q1_EXACT <= high
        assert round_sig(high, 3) == 1.17e12
        assert round_sig(low, 3) == 1.03e12

    def test_replayed_through_the_estimator(self):
        # one entry carries each extreme's matched frequency mass; a second
        # entry holds the unmatched remainder so frequencies still sum to b
        for fmass, reference in ((7_935, 1.17e12), (6_995, 1.03e12)):
            sketch = tiny_sketch(
                [(0, 1e6, fmass), (1, 1e9, 8852 - fmass)], b=8852, total=DEMO_S
            )
            answer = approx_sum(sketch, Predicate.of(("Tag", "=", "t0")))
            assert answer.matched_frequency_mass == fmass
            assert round_sig(answer.estimate, 3) == reference


def round_sig(x: float, digits: int) -> float:
    if x == 0:
        return 0.0
    exponent = math.floor(math.log10(abs(x)))
    return round(x, digits - 1 - exponent)


class TestRelativeErrorReport:
    def answer_with(self, estimate, total, epsilon):
        return ApproxAnswer(
            estimate=estimate,
            matched_entries=1,
            matched_frequency_mass=1,
            total_sum=total,
            budget=10,
            kind="lineage",
            epsilon_certified=epsilon,
            additive_bound=epsilon * total,
        )

    def test_reference_arithmetic(self):
        answer = self.answer_with(0.4 * 100.0, 100.0, 0.04)
        report = relative_error_report(answer)
        assert report.relative_error == pytest.approx(0.1)
        assert not report.below_resolution

        report = relative_error_report(answer, rho_hint=0.8)
        assert report.relative_error == pytest.approx(0.05)

    def test_whole_sum_relative_error_is_epsilon(self):
        answer = self.answer_with(100.0, 100.0, 0.04)
        report = relative_error_report(answer)
        assert report.rho == 1.0
        assert report.relative_error == pytest.approx(0.04)

    def test_below_resolution_flag(self):
        answer = self.answer_with(1.0, 100.0, 0.04)
        report = relative_error_report(answer)
        assert report.below_resolution
        assert report.relative_error > 1.0
        assert "below resolution" in report.note

    def test_zero_mass_answer(self):
        answer = self.answer_with(0.0, 100.0, 0.04)
        report = relative_error_report(answer)
        assert math.isinf(report.relative_error)
        assert report.below_resolution

    def test_requires_epsilon(self):
        answer = ApproxAnswer(
            estimate=1.0,
            matched_entries=1,
            matched_frequency_mass=1,
            total_sum=10.0,
            budget=5,
            kind="lineage",
        )
        with pytest.raises(ParameterError):
            relative_error_report(answer)
        report = relative_error_report(answer, epsilon=0.5)
        assert report.epsilon == 0.5

    def test_bad_rho_hint(self):
        answer = self.answer_with(1.0, 10.0, 0.1)
        for hint in (0.0, -0.5, 1.5):
            with pytest.raises(ParameterError):
                relative_error_report(answer, rho_hint=hint)


class TestTopKBaseline:
    def test_demo_composition(self, salaries):
        baseline = top_k_baseline(salaries, "Sal", 8852)
        values = baseline.entry_values()
        assert baseline.n_entries == 8852
        assert int((values == 1e9).sum()) == 100
        assert int((values == 1e8).sum()) == 1_000
        assert int((values == 1e7).sum()) == 7_752
        assert np.all(baseline.freqs == 1)

    def test_demo_mixed_query_answer_is_deterministic(self, salaries):
        baseline = top_k_baseline(salaries, "Sal", 8852)
        answer = approx_sum(baseline, toys_subset_predicate())
        again = approx_sum(top_k_baseline(salaries, "Sal", 8852), toys_subset_predicate())
        assert answer.estimate == again.estimate == TOPK_Q1_ANSWER

    def test_budget_at_least_n_is_exact(self, toy10):
        baseline = top_k_baseline(toy10, "W", 10)
        for q in (
            ALWAYS_TRUE,
            Predicate.of(("W", ">=", 4)),
            Predicate.of(("Tag", "in", ("r0", "r9"))),
        ):
            assert approx_sum(baseline, q).estimate == toy10.exact_sum("W", q)

    def test_ties_break_by_id(self):
        rel = Relation.build(
            "ties",
            [("W", "numeric")],
            {"W": [5.0, 9.0, 5.0, 5.0, 1.0]},
        )
        baseline = top_k_baseline(rel, "W", 2)
        assert baseline.ids.tolist() == [0, 1]


class TestUniformBaseline:
    def test_single_record_relation_is_exact(self):
        rel = Relation.build("one", [("W", "numeric")], {"W": [42.0]})
        baseline = uniform_baseline(rel, "W", 10, seed=0)
        assert approx_sum(baseline, ALWAYS_TRUE).estimate == 42.0
        assert approx_sum(baseline, ALWAYS_TRUE).sample_sum == 420.0

    def test_frequency_mass_is_budget(self, toy10):
        baseline = uniform_baseline(toy10, "W", 256, seed=1)
        assert baseline.frequency_mass == 256

    def test_horvitz_thompson_estimate_is_unbiased(self, toy10):
        predicate = Predicate.of(("W", ">=", 5))
        exact = toy10.exact_sum("W", predicate)
        trials = 4_000
        estimates = np.empty(trials)
        for t in range(trials):
            baseline = uniform_baseline(toy10, "W", 32, seed=derive_child_seed(3, t))
            estimates[t] = approx_sum(baseline, predicate).estimate
        stderr = estimates.std(ddof=1) / math.sqrt(trials)
        assert abs(estimates.mean() - exact) <= 4 * stderr

    def test_unscaled_sample_sum_expectation(self, toy10):
        # E[sum of matched draw values] = b * exact / n
        predicate = Predicate.of(("W", ">=", 5))
        exact = toy10.exact_sum("W", predicate)
        trials, b = 4_000, 32
        sums = np.empty(trials)
        for t in range(trials):
            baseline = uniform_baseline(toy10, "W", b, seed=derive_child_seed(5, t))
            sums[t] = approx_sum(baseline, predicate).sample_sum
        stderr = sums.std(ddof=1) / math.sqrt(trials)
        assert abs(sums.mean() - b * exact / toy10.n) <= 4 * stderr

    def test_equal_values_match_weighted_sampling_distribution(self):
        from scipy import stats

        rel = Relation.build(
            "flat",
            [("W", "numeric")],
            {"W": [6.0] * 6},
        )
        b, builds = 8, 3_000
        uniform_counts = np.zeros(6, dtype=np.int64)
        weighted_counts = np.zeros(6, dtype=np.int64)
        for t in range(builds):
            u = uniform_baseline(rel, "W", b, seed=derive_child_seed(8, t))
            uniform_counts[u.ids] += u.freqs
            w = build_lineage(rel, "W", b, seed=derive_child_seed(9, t))
            weighted_counts[w.ids] += w.freqs
        table = np.vstack([uniform_counts, weighted_counts])
        assert stats.chi2_contingency(table).pvalue >= 0.01

    def test_empty_relation(self):
        rel = Relation.build("empty", [("W", "numeric")], {"W": []})
        with pytest.raises(DegenerateRelationError):
            uniform_baseline(rel, "W", 4, seed=0)
