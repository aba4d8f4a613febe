"""Relations, predicates, exact SUM evaluation, and CSV ingestion.

A :class:`Relation` is an immutable in-memory table with numeric and
categorical attributes.  Numeric attributes must be nonnegative and are the
ones a summary can aggregate over; their per-relation totals are accumulated
with ``math.fsum`` so the stored total is the correctly rounded sum (exact
whenever all values are integral).  Storage is columnar: float64 arrays for
numeric columns, small-integer code arrays plus a category list for text
columns.  Record ids are 0-based row ordinals.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Iterable, Iterator, Mapping, Sequence

import numpy as np

from .errors import IngestError, PredicateError, SchemaError

NUMERIC = "numeric"
CATEGORICAL = "categorical"

# Reserved for the frequency column a summary adds; plain relations may not
# declare it and predicates may never reference it.
FREQUENCY_ATTRIBUTE = "Fr"

COMPARATORS = ("=", "!=", "<", "<=", ">", ">=", "in", "between")
_RANGE_OPS = frozenset(("<", "<=", ">", ">=", "between"))


@dataclass(frozen=True)
class Record:
    """One tuple: an opaque id plus a name -> value map."""

    id: int
    values: dict


@dataclass(frozen=True)
class Clause:
    """A single comparison ``attribute OP operand``.

    ``operand`` is a number or string for the scalar comparators, a
    collection of values for ``in``, and a ``(low, high)`` pair (inclusive
    on both ends) for ``between``.
    """

    attribute: str
    op: str
    operand: object

    def __post_init__(self):
        if self.op not in COMPARATORS:
            raise PredicateError(f"unknown comparator {self.op!r}")


@dataclass(frozen=True)
class Predicate:
    """A conjunction of clauses; the empty conjunction matches everything."""

    clauses: tuple = ()

    @classmethod
    def of(cls, *specs) -> "Predicate":
        """Build a predicate from ``(attribute, op, operand)`` triples."""
        return cls(tuple(Clause(a, op, v) for a, op, v in specs))

    @property
    def is_always_true(self) -> bool:
        return not self.clauses

    def and_clause(self, attribute: str, op: str, operand) -> "Predicate":
        return Predicate(self.clauses + (Clause(attribute, op, operand),))

    def describe(self) -> str:
        if not self.clauses:
            return "true"
        parts = []
        for c in self.clauses:
            if c.op == "in":
                vals = ", ".join(str(v) for v in c.operand)
                parts.append(f"{c.attribute} IN ({vals})")
            elif c.op == "between":
                lo, hi = c.operand
                parts.append(f"{c.attribute} BETWEEN {lo} AND {hi}")
            else:
                parts.append(f"{c.attribute} {c.op} {c.operand}")
        return " AND ".join(parts)


ALWAYS_TRUE = Predicate()


def _operand_number(clause: Clause, value) -> float:
    try:
        x = float(value)
    except (TypeError, ValueError):
        raise PredicateError(
            f"clause on numeric attribute {clause.attribute!r} has "
            f"non-numeric operand {value!r}"
        ) from None
    return x


def numeric_clause_mask(column: np.ndarray, clause: Clause) -> np.ndarray:
    op = clause.op
    if op == "in":
        vals = [_operand_number(clause, v) for v in clause.operand]
        return np.isin(column, vals)
    if op == "between":
        lo, hi = (_operand_number(clause, v) for v in clause.operand)
        return (column >= lo) & (column <= hi)
    x = _operand_number(clause, clause.operand)
    if op == "=":
        return column == x
    if op == "!=":
        return column != x
    if op == "<":
        return column < x
    if op == "<=":
        return column <= x
    if op == ">":
        return column > x
    return column >= x


def categorical_clause_mask(
    codes: np.ndarray, categories: Sequence[str], clause: Clause
) -> np.ndarray:
    if clause.op in _RANGE_OPS:
        raise PredicateError(
            f"range comparator {clause.op!r} is not defined on categorical "
            f"attribute {clause.attribute!r}"
        )
    index = {v: i for i, v in enumerate(categories)}
    if clause.op == "in":
        known = [index[str(v)] for v in clause.operand if str(v) in index]
        return np.isin(codes, known) if known else np.zeros(codes.shape, bool)
    code = index.get(str(clause.operand), -1)
    if clause.op == "=":
        return codes == code if code >= 0 else np.zeros(codes.shape, bool)
    return codes != code if code >= 0 else np.ones(codes.shape, bool)


class _ColumnStore:
    """Columnar attribute storage shared by relations and summaries."""

    def __init__(
        self,
        schema: tuple,
        numeric: dict,
        cat_codes: dict,
        cat_values: dict,
        n: int,
    ):
        self.schema = schema
        self.numeric = numeric
        self.cat_codes = cat_codes
        self.cat_values = cat_values
        self.n = n
        self._kinds = dict(schema)

    @property
    def attributes(self) -> tuple:
        return tuple(name for name, _ in self.schema)

    def kind_of(self, attribute: str) -> str:
        try:
            return self._kinds[attribute]
        except KeyError:
            raise SchemaError(f"unknown attribute {attribute!r}") from None

    def numeric_column(self, attribute: str) -> np.ndarray:
        if self.kind_of(attribute) != NUMERIC:
            raise SchemaError(f"attribute {attribute!r} is not numeric")
        return self.numeric[attribute]

    def clause_mask(self, clause: Clause) -> np.ndarray:
        if clause.attribute == FREQUENCY_ATTRIBUTE:
            raise PredicateError(
                f"predicates may not reference the reserved "
                f"{FREQUENCY_ATTRIBUTE!r} attribute"
            )
        if clause.attribute not in self._kinds:
            raise PredicateError(
                f"predicate references unknown attribute {clause.attribute!r}"
            )
        if self._kinds[clause.attribute] == NUMERIC:
            return numeric_clause_mask(self.numeric[clause.attribute], clause)
        return categorical_clause_mask(
            self.cat_codes[clause.attribute],
            self.cat_values[clause.attribute],
            clause,
        )

    def match_mask(self, predicate: Predicate) -> np.ndarray:
        mask = np.ones(self.n, dtype=bool)
        for clause in predicate.clauses:
            mask &= self.clause_mask(clause)
        return mask

    def value_at(self, attribute: str, row: int):
        if self._kinds[attribute] == NUMERIC:
            return float(self.numeric[attribute][row])
        return self.cat_values[attribute][self.cat_codes[attribute][row]]

    def record_values(self, row: int) -> dict:
        return {name: self.value_at(name, row) for name, _ in self.schema}


class Relation:
    """An immutable table with 0-based ordinal record ids.

    Construct through :func:`ingest_csv`, :meth:`Relation.build`, or
    :func:`make_salaries_demo`; after construction the relation is read-only
    and safe to share across threads.
    """

    def __init__(self, name: str, store: _ColumnStore, totals: dict):
        self.name = name
        self._store = store
        self.totals = totals
        self._sampling_cache: dict = {}

    # -- construction -----------------------------------------------------

    @classmethod
    def build(cls, name: str, schema: Sequence[tuple], columns: Mapping) -> "Relation":
        """Build a relation from per-attribute value sequences."""
        schema = tuple((str(a), k) for a, k in schema)
        seen = set()
        for attr, kind in schema:
            if attr in seen:
                raise SchemaError(f"duplicate attribute {attr!r}")
            seen.add(attr)
            if kind not in (NUMERIC, CATEGORICAL):
                raise SchemaError(f"unknown attribute kind {kind!r}")
            if attr == FREQUENCY_ATTRIBUTE:
                raise SchemaError(
                    f"{FREQUENCY_ATTRIBUTE!r} is reserved for summaries"
                )
        lengths = {len(columns[a]) for a, _ in schema} if schema else {0}
        if len(lengths) > 1:
            raise SchemaError(f"column lengths differ: {sorted(lengths)}")
        n = lengths.pop() if lengths else 0

        numeric: dict = {}
        cat_codes: dict = {}
        cat_values: dict = {}
        totals: dict = {}
        for attr, kind in schema:
            if kind == NUMERIC:
                col = np.asarray(columns[attr], dtype=np.float64)
                bad = np.flatnonzero(~np.isfinite(col) | (col < 0))
                if bad.size:
                    i = int(bad[0])
                    raise IngestError(
                        f"data row {i + 1}: negative or non-finite value "
                        f"{col[i]!r} in numeric column {attr!r}"
                    )
                col.setflags(write=False)
                numeric[attr] = col
                totals[attr] = math.fsum(col.tolist())
            else:
                values = [str(v) for v in columns[attr]]
                cats: list = []
                index: dict = {}
                codes = np.empty(n, dtype=np.int32)
                for i, v in enumerate(values):
                    code = index.get(v)
                    if code is None:
                        code = index[v] = len(cats)
                        cats.append(v)
                    codes[i] = code
                codes.setflags(write=False)
                cat_codes[attr] = codes
                cat_values[attr] = tuple(cats)
        store = _ColumnStore(schema, numeric, cat_codes, cat_values, n)
        return cls(name, store, totals)

    @classmethod
    def from_rows(
        cls, name: str, schema: Sequence[tuple], rows: Iterable[Sequence]
    ) -> "Relation":
        rows = [tuple(r) for r in rows]
        columns = {
            attr: [r[i] for r in rows] for i, (attr, _) in enumerate(schema)
        }
        return cls.build(name, schema, columns)

    # -- introspection ----------------------------------------------------

    @property
    def n(self) -> int:
        return self._store.n

    @property
    def schema(self) -> tuple:
        return self._store.schema

    @property
    def attributes(self) -> tuple:
        return self._store.attributes

    def kind_of(self, attribute: str) -> str:
        return self._store.kind_of(attribute)

    def numeric_column(self, attribute: str) -> np.ndarray:
        return self._store.numeric_column(attribute)

    def record(self, record_id: int) -> Record:
        if not 0 <= record_id < self.n:
            raise SchemaError(f"no record with id {record_id}")
        return Record(record_id, self._store.record_values(record_id))

    def records(self) -> Iterator[Record]:
        for i in range(self.n):
            yield Record(i, self._store.record_values(i))

    # -- query evaluation --------------------------------------------------

    def match_mask(self, predicate: Predicate) -> np.ndarray:
        return self._store.match_mask(predicate)

    def match_ids(self, predicate: Predicate) -> set:
        """Ids of every record satisfying all clauses of ``predicate``."""
        return set(np.flatnonzero(self.match_mask(predicate)).tolist())

    def exact_sum(self, attribute: str, predicate: Predicate = ALWAYS_TRUE) -> float:
        """Ground-truth SUM of ``attribute`` over the matching records."""
        column = self.numeric_column(attribute)
        if predicate.is_always_true:
            return self.totals[attribute]
        mask = self.match_mask(predicate)
        return math.fsum(column[mask].tolist())

    # -- sampling support ---------------------------------------------------

    def positive_weight_index(self, attribute: str):
        """Indices of records with positive weight and their cumulative sums.

        Cached per attribute; zero-weight records are excluded up front so a
        sampler can never land on them.
        """
        cached = self._sampling_cache.get(attribute)
        if cached is None:
            weights = self.numeric_column(attribute)
            positive = np.flatnonzero(weights > 0)
            cumulative = np.cumsum(weights[positive])
            cached = self._sampling_cache[attribute] = (positive, cumulative)
        return cached

    # -- export -------------------------------------------------------------

    def export_csv(self, sink) -> None:
        """Write the relation in the same CSV dialect `ingest_csv` reads."""
        close = False
        if isinstance(sink, (str, Path)):
            sink = open(sink, "w", newline="", encoding="utf-8")
            close = True
        try:
            writer = csv.writer(sink)
            writer.writerow(self._store.attributes)
            decoded = []
            for attr, kind in self.schema:
                if kind == NUMERIC:
                    decoded.append(
                        [_format_number(v) for v in self._store.numeric[attr]]
                    )
                else:
                    cats = self._store.cat_values[attr]
                    decoded.append(
                        [cats[c] for c in self._store.cat_codes[attr]]
                    )
            writer.writerows(zip(*decoded))
        finally:
            if close:
                sink.close()

    def to_csv_text(self) -> str:
        buf = io.StringIO()
        self.export_csv(buf)
        return buf.getvalue()

    def __repr__(self) -> str:
        return f"Relation({self.name!r}, n={self.n}, attributes={list(self.attributes)})"


def _format_number(value: float) -> str:
    if float(value).is_integer() and abs(value) < 1e16:
        return str(int(value))
    return repr(float(value))


# -- CSV ingestion ----------------------------------------------------------


def _open_text(source) -> IO[str]:
    if isinstance(source, Path) or (
        isinstance(source, str) and source and "\n" not in source
    ):
        return open(source, "r", newline="", encoding="utf-8")
    if isinstance(source, str):
        return io.StringIO(source)
    if isinstance(source, (bytes, bytearray)):
        return io.StringIO(source.decode("utf-8"))
    if isinstance(source, io.TextIOBase):
        return source
    # binary stream
    return io.TextIOWrapper(source, encoding="utf-8")


def _parse_header(reader, kinds: Mapping[str, str] | None):
    try:
        header = next(reader)
    except StopIteration:
        raise IngestError("empty input: no header line") from None
    header = [h.strip() for h in header]
    if any(not h for h in header):
        raise IngestError("header contains an empty attribute name")
    if len(set(header)) != len(header):
        raise IngestError("header contains duplicate attribute names")
    if FREQUENCY_ATTRIBUTE in header:
        raise IngestError(
            f"column {FREQUENCY_ATTRIBUTE!r} is reserved for summaries"
        )
    if kinds:
        unknown = set(kinds) - set(header)
        if unknown:
            raise IngestError(f"kind hints for unknown columns: {sorted(unknown)}")
        for k in kinds.values():
            if k not in (NUMERIC, CATEGORICAL):
                raise IngestError(f"unknown kind hint {k!r}")
    return header


def _looks_numeric(text: str) -> bool:
    try:
        return math.isfinite(float(text))
    except ValueError:
        return False


def _resolve_kinds(header, first_row, kinds):
    resolved = []
    for name, value in zip(header, first_row):
        if kinds and name in kinds:
            resolved.append(kinds[name])
        else:
            resolved.append(NUMERIC if _looks_numeric(value) else CATEGORICAL)
    return resolved


def _parse_numeric(text: str, row_number: int, attribute: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise IngestError(
            f"data row {row_number}: value {text!r} in numeric column "
            f"{attribute!r} does not parse as a decimal"
        ) from None
    if not math.isfinite(value):
        raise IngestError(
            f"data row {row_number}: non-finite value in numeric column "
            f"{attribute!r}"
        )
    if value < 0:
        raise IngestError(
            f"data row {row_number}: negative value {text} in numeric "
            f"column {attribute!r}"
        )
    return value


def ingest_csv(source, name: str = "relation", kinds: Mapping[str, str] | None = None) -> Relation:
    """Read a header-bearing CSV into a :class:`Relation` in one pass.

    ``source`` may be a path, CSV text, bytes, or an open stream.  Column
    kinds are inferred from the first data row (anything that parses as a
    decimal is numeric) unless overridden through ``kinds``.  Numeric
    columns must be nonnegative; violations raise :class:`IngestError`
    naming the offending data row (1-based) and column.
    """
    stream = _open_text(source)
    try:
        reader = csv.reader(stream)
        header = _parse_header(reader, kinds)
        width = len(header)
        columns: list = []
        resolved: list | None = None
        row_number = 0
        for row in reader:
            if not row:
                continue
            row_number += 1
            if len(row) != width:
                raise IngestError(
                    f"data row {row_number}: expected {width} fields, got {len(row)}"
                )
            if resolved is None:
                resolved = _resolve_kinds(header, row, kinds)
                columns = [[] for _ in header]
            for col, attr, kind, text in zip(columns, header, resolved, row):
                if kind == NUMERIC:
                    col.append(_parse_numeric(text, row_number, attr))
                else:
                    col.append(text)
        if resolved is None:
            raise IngestError("empty input: header but no data rows")
        schema = tuple(zip(header, resolved))
        return Relation.build(name, schema, dict(zip(header, columns)))
    finally:
        if stream is not source:
            stream.close()


def iter_csv_records(source, kinds: Mapping[str, str] | None = None) -> Iterator[Record]:
    """Yield :class:`Record` objects from a CSV without materializing it.

    Same validation rules as :func:`ingest_csv`; intended for the one-pass
    streaming summary builder.
    """
    stream = _open_text(source)
    try:
        reader = csv.reader(stream)
        header = _parse_header(reader, kinds)
        width = len(header)
        resolved = None
        row_number = 0
        for row in reader:
            if not row:
                continue
            row_number += 1
            if len(row) != width:
                raise IngestError(
                    f"data row {row_number}: expected {width} fields, got {len(row)}"
                )
            if resolved is None:
                resolved = _resolve_kinds(header, row, kinds)
            values = {}
            for attr, kind, text in zip(header, resolved, row):
                if kind == NUMERIC:
                    values[attr] = _parse_numeric(text, row_number, attr)
                else:
                    values[attr] = text
            yield Record(row_number - 1, values)
    finally:
        if stream is not source:
            stream.close()


# -- bundled demo dataset -----------------------------------------------------

# (salary value, record count, how many belong to the "Toys" department)
SALARY_BLOCKS = (
    (1e9, 100, 50),
    (1e8, 1_000, 0),
    (1e7, 10_000, 5_000),
    (1e6, 1_000_000, 1_000_000),
    (10.0, 1_000, 0),
)

_DEPARTMENTS = ("Toys", "Books", "Garden", "Media")
_HIRE_YEARS = tuple(str(y) for y in range(2005, 2013))


def make_salaries_demo() -> Relation:
    """Synthesize the bundled five-block Salaries dataset.

    Sal takes five distinct values with heavily skewed counts.  Department
    is assigned deterministically: inside a partially covered block the
    "Toys" department sits on even block-relative positions, so any prefix
    of a block contains half Toys records; the million-record block is all
    Toys.  The predicate Department = 'Toys' therefore selects 50 of the
    1e9 records, 5,000 of the 1e7 records, and every 1e6 record.  HireYear
    cycles through 2005..2012 by record id.
    """
    n = sum(count for _, count, _ in SALARY_BLOCKS)
    sal = np.repeat(
        [value for value, _, _ in SALARY_BLOCKS],
        [count for _, count, _ in SALARY_BLOCKS],
    )
    toys = np.zeros(n, dtype=bool)
    start = 0
    for _, count, toys_count in SALARY_BLOCKS:
        if toys_count == count:
            toys[start : start + count] = True
        elif toys_count:
            toys[start : start + count : 2] = True
        start += count
    ids = np.arange(n)
    dep_codes = np.where(toys, 0, 1 + ids % (len(_DEPARTMENTS) - 1)).astype(np.int32)
    year_codes = (ids % len(_HIRE_YEARS)).astype(np.int32)

    sal.setflags(write=False)
    dep_codes.setflags(write=False)
    year_codes.setflags(write=False)
    store = _ColumnStore(
        schema=(("Sal", NUMERIC), ("Department", CATEGORICAL), ("HireYear", CATEGORICAL)),
        numeric={"Sal": sal},
        cat_codes={"Department": dep_codes, "HireYear": year_codes},
        cat_values={"Department": _DEPARTMENTS, "HireYear": _HIRE_YEARS},
        n=n,
    )
    totals = {"Sal": math.fsum(value * count for value, count, _ in SALARY_BLOCKS)}
    return Relation("Salaries", store, totals)


def toys_subset_predicate() -> Predicate:
    """The mixed-mass demo predicate: Department = 'Toys'."""
    return Predicate.of(("Department", "=", "Toys"))
