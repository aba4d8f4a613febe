"""Value-weighted summary construction.

The in-memory builder draws ``b`` independent trials by inverse-CDF lookup
over a cached cumulative-weight array (record ``t`` selected with
probability ``t[A]/S``) and collapses the resulting bag into distinct
entries annotated with a frequency column.  The streaming builder keeps
``b`` single-slot weighted reservoirs and finishes a stream of unknown
length in O(b) space; each slot's winner has exactly the same marginal
distribution as one in-memory trial.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping

import numpy as np

from .errors import (
    DegenerateRelationError,
    IngestError,
    ParameterError,
    SchemaError,
)
from .relation import (
    CATEGORICAL,
    NUMERIC,
    Predicate,
    Record,
    Relation,
    _ColumnStore,
)

KIND_LINEAGE = "lineage"
KIND_TOP_K = "top_k"
KIND_UNIFORM = "uniform"
SUMMARY_KINDS = (KIND_LINEAGE, KIND_TOP_K, KIND_UNIFORM)


@dataclass(frozen=True)
class GuaranteeParams:
    """Guarantee triple: m queries answered within epsilon*S, failure p."""

    m: int
    p: float
    epsilon: float

    def __post_init__(self):
        if not isinstance(self.m, int) or self.m < 1:
            raise ParameterError(f"m must be a positive integer, got {self.m!r}")
        if not 0.0 < self.p < 1.0:
            raise ParameterError(f"p must lie strictly in (0, 1), got {self.p!r}")
        if not self.epsilon > 0.0:
            raise ParameterError(f"epsilon must be positive, got {self.epsilon!r}")


def compute_budget(g: GuaranteeParams) -> int:
    """Number of sampling trials certifying the (m, p, epsilon) guarantee:
    ceil(ln(2m/p) / (2 epsilon^2))."""
    return math.ceil(math.log(2.0 * g.m / g.p) / (2.0 * g.epsilon**2))


def error_for_budget(b: int, m: int, p: float) -> float:
    """Smallest certified epsilon for an existing budget:
    sqrt(ln(2m/p) / (2b))."""
    if not isinstance(b, int) or b < 1:
        raise ParameterError(f"b must be a positive integer, got {b!r}")
    if not isinstance(m, int) or m < 1:
        raise ParameterError(f"m must be a positive integer, got {m!r}")
    if not 0.0 < p < 1.0:
        raise ParameterError(f"p must lie strictly in (0, 1), got {p!r}")
    log_term = math.log(2.0 * m / p)
    epsilon = math.sqrt(log_term / (2.0 * b))
    # Round-to-nearest can land a hair below the exact root, in which case
    # this epsilon would certify budget b+1; bump to the next float so the
    # returned value always round-trips to a budget <= b.
    while math.ceil(log_term / (2.0 * epsilon**2)) > b:
        epsilon = math.nextafter(epsilon, math.inf)
    return epsilon


# -- deterministic seed derivation -------------------------------------------


def derive_seed_sequence(seed: int, *context) -> np.random.SeedSequence:
    """Mix a master seed with string/int context into a SeedSequence.

    Child streams for different contexts (attribute name, trial index,
    summary index, ...) are independent yet fully reproducible.
    """
    if not isinstance(seed, int) or seed < 0:
        raise ParameterError(f"seed must be a nonnegative integer, got {seed!r}")
    digest = hashlib.sha256(
        "\x1f".join(str(part) for part in context).encode("utf-8")
    ).digest()
    words = tuple(
        int.from_bytes(digest[i : i + 8], "little") for i in range(0, 32, 8)
    )
    return np.random.SeedSequence(entropy=(seed, *words))


def derive_rng(seed: int, *context) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(derive_seed_sequence(seed, *context)))


def derive_child_seed(seed: int, *context) -> int:
    """A plain integer child seed, for nesting derivations."""
    return int(derive_seed_sequence(seed, *context).generate_state(1, np.uint64)[0])


# -- the summary type ---------------------------------------------------------


@dataclass
class LineageSketch:
    """A value-weighted summary: distinct sampled records plus frequencies.

    Shares the source schema, so any predicate valid on the source evaluates
    identically here.  ``kind`` distinguishes the weighted summary from the
    two baseline summaries that reuse this shape with different estimators.
    """

    kind: str
    attribute: str
    total_sum: float
    budget: int
    seed: int | None
    source_n: int
    schema: tuple
    ids: np.ndarray
    freqs: np.ndarray
    numeric: dict = field(repr=False)
    cat_codes: dict = field(repr=False)
    cat_values: dict = field(repr=False)

    def __post_init__(self):
        self.ids = np.asarray(self.ids, dtype=np.int64)
        self.freqs = np.asarray(self.freqs, dtype=np.int64)
        self._store = _ColumnStore(
            self.schema, self.numeric, self.cat_codes, self.cat_values, len(self.ids)
        )
        self.validate()

    @property
    def n_entries(self) -> int:
        return len(self.ids)

    @property
    def frequency_mass(self) -> int:
        return int(self.freqs.sum())

    @property
    def scale(self) -> float:
        """The per-frequency-unit contribution S/b."""
        return self.total_sum / self.budget

    def validate(self) -> None:
        if self.kind not in SUMMARY_KINDS:
            raise ParameterError(f"unknown summary kind {self.kind!r}")
        if self.n_entries and int(self.freqs.min()) < 1:
            raise ParameterError("summary holds an entry with frequency < 1")
        if len(np.unique(self.ids)) != self.n_entries:
            raise ParameterError("summary holds duplicate record ids")
        if self.n_entries > self.source_n:
            raise ParameterError("summary holds more entries than source records")
        if self.kind == KIND_LINEAGE:
            if self.frequency_mass != self.budget:
                raise ParameterError(
                    f"frequencies sum to {self.frequency_mass}, expected "
                    f"budget {self.budget}"
                )
            if self.n_entries > self.budget:
                raise ParameterError("more distinct entries than trials")
            values = self.numeric.get(self.attribute)
            if values is not None and values.size and float(values.min()) <= 0:
                raise ParameterError(
                    "summary selected a record with nonpositive weight"
                )

    def match_mask(self, predicate: Predicate) -> np.ndarray:
        return self._store.match_mask(predicate)

    def entries(self) -> Iterator[tuple]:
        """Yield (record, frequency) pairs; the record carries its source id."""
        for row in range(self.n_entries):
            values = self._store.record_values(row)
            yield Record(int(self.ids[row]), values), int(self.freqs[row])

    def entry_values(self) -> np.ndarray:
        """Aggregated-attribute values of the entries, aligned with freqs."""
        return self._store.numeric_column(self.attribute)

    def value_histogram(self) -> list:
        """Group entries by aggregated value, then by frequency.

        Returns rows sorted by value descending:
        ``{"value", "distinct", "bag_mass", "frequencies": [{"fr", "count"}]}``.
        """
        values = self.entry_values()
        rows = []
        for value in sorted(set(values.tolist()), reverse=True):
            sel = values == value
            freqs = self.freqs[sel]
            breakdown = [
                {"fr": int(fr), "count": int((freqs == fr).sum())}
                for fr in sorted(set(freqs.tolist()))
            ]
            rows.append(
                {
                    "value": float(value),
                    "distinct": int(sel.sum()),
                    "bag_mass": int(freqs.sum()),
                    "frequencies": breakdown,
                }
            )
        return rows

    def equals(self, other: "LineageSketch") -> bool:
        """Bit-for-bit equality of contents and metadata."""
        return (
            self.kind == other.kind
            and self.attribute == other.attribute
            and self.total_sum == other.total_sum
            and self.budget == other.budget
            and self.seed == other.seed
            and self.source_n == other.source_n
            and self.schema == other.schema
            and np.array_equal(self.ids, other.ids)
            and np.array_equal(self.freqs, other.freqs)
            and all(
                np.array_equal(self.numeric[a], other.numeric[a])
                for a in self.numeric
            )
            and all(
                np.array_equal(self.cat_codes[a], other.cat_codes[a])
                for a in self.cat_codes
            )
            and self.cat_values == other.cat_values
        )


def _sketch_from_selection(
    rel: Relation,
    attribute: str,
    ids: np.ndarray,
    freqs: np.ndarray,
    *,
    kind: str,
    budget: int,
    seed: int | None,
    total_sum: float | None = None,
) -> LineageSketch:
    numeric = {}
    cat_codes = {}
    cat_values = {}
    for attr, akind in rel.schema:
        if akind == NUMERIC:
            numeric[attr] = rel._store.numeric[attr][ids]
        else:
            cat_codes[attr] = rel._store.cat_codes[attr][ids]
            cat_values[attr] = rel._store.cat_values[attr]
    return LineageSketch(
        kind=kind,
        attribute=attribute,
        total_sum=rel.totals[attribute] if total_sum is None else total_sum,
        budget=budget,
        seed=seed,
        source_n=rel.n,
        schema=rel.schema,
        ids=ids.astype(np.int64),
        freqs=freqs.astype(np.int64),
        numeric=numeric,
        cat_codes=cat_codes,
        cat_values=cat_values,
    )


def _check_budget(b) -> int:
    if not isinstance(b, (int, np.integer)) or b < 1:
        raise ParameterError(f"budget b must be a positive integer, got {b!r}")
    return int(b)


def build_lineage(rel: Relation, attribute: str, b: int, seed: int) -> LineageSketch:
    """Run ``b`` independent weighted trials and collapse the bag.

    Each trial selects record ``t`` with probability ``t[A]/S`` via binary
    search over the cached cumulative-weight array of positive-weight
    records.  Deterministic for a fixed (relation, attribute, b, seed).
    """
    b = _check_budget(b)
    if rel.n == 0:
        raise DegenerateRelationError("relation has no records")
    if rel.kind_of(attribute) != NUMERIC:
        raise SchemaError(f"attribute {attribute!r} is not numeric")
    total = rel.totals[attribute]
    if not total > 0:
        raise DegenerateRelationError(
            f"attribute {attribute!r} has zero total; no selection "
            f"distribution exists"
        )
    positive, cumulative = rel.positive_weight_index(attribute)
    rng = derive_rng(seed, "lineage", attribute)
    points = rng.random(b) * cumulative[-1]
    slots = np.searchsorted(cumulative, points, side="right")
    # u < 1 keeps points strictly below the last cumulative value; the clip
    # only matters if rounding lands a point exactly on it.
    np.clip(slots, 0, len(positive) - 1, out=slots)
    draws = positive[slots]
    ids, freqs = np.unique(draws, return_counts=True)
    return _sketch_from_selection(
        rel, attribute, ids, freqs, kind=KIND_LINEAGE, budget=b, seed=seed
    )


def merge_lineage_parts(parts: list) -> LineageSketch:
    """Combine partial summaries built over partitioned trials.

    The b trials are mutually independent, so they may be split across
    workers (each with its own child seed and partial budget) and merged by
    adding frequencies per record id.  Parts must agree on kind, attribute,
    schema, source size, and total sum.
    """
    if not parts:
        raise ParameterError("no partial summaries to merge")
    first = parts[0]
    for part in parts[1:]:
        if (
            part.kind != first.kind
            or part.attribute != first.attribute
            or part.schema != first.schema
            or part.source_n != first.source_n
            or part.total_sum != first.total_sum
        ):
            raise ParameterError("partial summaries disagree on metadata")
    if first.kind != KIND_LINEAGE:
        raise ParameterError("only weighted summaries can be merged")

    combined: dict = {}
    rows: dict = {}
    for part in parts:
        for row, record_id in enumerate(part.ids.tolist()):
            combined[record_id] = combined.get(record_id, 0) + int(part.freqs[row])
            rows.setdefault(record_id, (part, row))
    ids = np.array(sorted(combined), dtype=np.int64)
    freqs = np.array([combined[i] for i in ids], dtype=np.int64)

    numeric = {}
    cat_codes = {}
    cat_values = {}
    for name, kind in first.schema:
        if kind == NUMERIC:
            numeric[name] = np.array(
                [rows[i][0].numeric[name][rows[i][1]] for i in ids], dtype=np.float64
            )
        else:
            cats: list = []
            index: dict = {}
            codes = np.empty(len(ids), dtype=np.int32)
            for out_row, i in enumerate(ids):
                part, row = rows[i]
                value = part.cat_values[name][part.cat_codes[name][row]]
                code = index.get(value)
                if code is None:
                    code = index[value] = len(cats)
                    cats.append(value)
                codes[out_row] = code
            cat_codes[name] = codes
            cat_values[name] = tuple(cats)
    return LineageSketch(
        kind=KIND_LINEAGE,
        attribute=first.attribute,
        total_sum=first.total_sum,
        budget=sum(part.budget for part in parts),
        seed=None,
        source_n=first.source_n,
        schema=first.schema,
        ids=ids,
        freqs=freqs,
        numeric=numeric,
        cat_codes=cat_codes,
        cat_values=cat_values,
    )


# -- streaming builder ---------------------------------------------------------


class _CompensatedSum:
    """Neumaier running sum; O(1) state for the one-pass builder."""

    __slots__ = ("_sum", "_carry")

    def __init__(self):
        self._sum = 0.0
        self._carry = 0.0

    def add(self, value: float) -> None:
        t = self._sum + value
        if abs(self._sum) >= abs(value):
            self._carry += (self._sum - t) + value
        else:
            self._carry += (value - t) + self._sum
        self._sum = t

    @property
    def total(self) -> float:
        return self._sum + self._carry


def _record_weight(record: Record, attribute: str) -> float:
    try:
        value = record.values[attribute]
    except KeyError:
        raise SchemaError(
            f"stream record {record.id} lacks attribute {attribute!r}"
        ) from None
    if not isinstance(value, (int, float)):
        raise SchemaError(
            f"stream record {record.id}: attribute {attribute!r} is not numeric"
        )
    value = float(value)
    if not math.isfinite(value) or value < 0:
        raise IngestError(
            f"stream record {record.id}: negative or non-finite value "
            f"{value!r} for attribute {attribute!r}"
        )
    return value


def _schema_from_record(record: Record) -> tuple:
    schema = []
    for name, value in record.values.items():
        kind = NUMERIC if isinstance(value, (int, float)) else CATEGORICAL
        schema.append((name, kind))
    return tuple(schema)


def build_lineage_streaming(
    records: Iterable[Record], attribute: str, b: int, seed: int
) -> LineageSketch:
    """One-pass weighted summary over a stream of unknown length.

    Keeps ``b`` independent single-slot reservoirs.  For every record of
    weight ``w`` each slot draws a fresh uniform ``u`` and keeps the record
    maximizing ``u^(1/w)``; keys are compared in the log domain
    (``log(u)/w``) so extreme weights cannot underflow.  Zero-weight records
    never displace a slot; key ties keep the earlier record.  Memory is
    O(b) regardless of stream length; time is O(b·n).
    """
    b = _check_budget(b)
    rng = derive_rng(seed, "stream", attribute)
    best = np.full(b, -np.inf)
    winners = np.empty(b, dtype=object)
    total = _CompensatedSum()
    schema: tuple | None = None
    n = 0
    for record in records:
        if schema is None:
            schema = _schema_from_record(record)
        n += 1
        weight = _record_weight(record, attribute)
        total.add(weight)
        if weight == 0.0:
            continue
        keys = np.log(rng.random(b)) / weight
        better = keys > best
        if better.any():
            best[better] = keys[better]
            winners[better] = record
    if n == 0:
        raise DegenerateRelationError("stream yielded no records")
    if winners[0] is None:
        raise DegenerateRelationError(
            f"stream carried no positive {attribute!r} mass; no selection "
            f"distribution exists"
        )
    assert schema is not None

    by_id: dict = {}
    counts: dict = {}
    for record in winners:
        by_id[record.id] = record
        counts[record.id] = counts.get(record.id, 0) + 1
    ids = np.array(sorted(by_id), dtype=np.int64)
    freqs = np.array([counts[i] for i in ids], dtype=np.int64)

    numeric = {}
    cat_codes = {}
    cat_values = {}
    for name, kind in schema:
        if kind == NUMERIC:
            numeric[name] = np.array(
                [float(by_id[i].values[name]) for i in ids], dtype=np.float64
            )
        else:
            cats: list = []
            index: dict = {}
            codes = np.empty(len(ids), dtype=np.int32)
            for row, i in enumerate(ids):
                v = str(by_id[i].values[name])
                code = index.get(v)
                if code is None:
                    code = index[v] = len(cats)
                    cats.append(v)
                codes[row] = code
            cat_codes[name] = codes
            cat_values[name] = tuple(cats)
    return LineageSketch(
        kind=KIND_LINEAGE,
        attribute=attribute,
        total_sum=total.total,
        budget=b,
        seed=seed,
        source_n=n,
        schema=schema,
        ids=ids,
        freqs=freqs,
        numeric=numeric,
        cat_codes=cat_codes,
        cat_values=cat_values,
    )


# -- multi-attribute construction ---------------------------------------------


@dataclass
class MultiLineageResult:
    """Per-attribute summaries plus any per-attribute degenerate failures."""

    sketches: dict
    failures: dict

    def __getitem__(self, attribute: str) -> LineageSketch:
        return self.sketches[attribute]


def build_multi_lineage(
    rel: Relation,
    attributes: Iterable[str],
    b: int | Mapping[str, int],
    seed: int,
) -> MultiLineageResult:
    """Build one summary per attribute with independent derived streams.

    ``b`` may be a single budget or a per-attribute mapping.  An attribute
    with zero total is reported in ``failures`` while the others still
    build; non-numeric attributes are a hard error.
    """
    attributes = list(attributes)
    if not attributes:
        raise ParameterError("no attributes given")
    for attribute in attributes:
        if rel.kind_of(attribute) != NUMERIC:
            raise SchemaError(f"attribute {attribute!r} is not numeric")
    sketches = {}
    failures = {}
    for attribute in attributes:
        budget = b[attribute] if isinstance(b, Mapping) else b
        try:
            sketches[attribute] = build_lineage(rel, attribute, budget, seed)
        except DegenerateRelationError as exc:
            failures[attribute] = str(exc)
    return MultiLineageResult(sketches=sketches, failures=failures)
