"""Summary sets: repeated builds, benchmark scoring, selection, persistence.

A summary set holds k independently seeded summaries of the same relation
and attribute, scored by the Euclidean distance between their S-normalized
benchmark answers and the exact answers.  Selection discards the most
distant summary and keeps the best of the rest, with deterministic tie
rules.  Persistence is a single-file binary format: a human-readable first
line, a JSON header, length-prefixed little-endian arrays, and a trailing
SHA-256 checksum.  The canonical file extension is ``.alsk``.
"""

from __future__ import annotations

import hashlib
import io
import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ParameterError, SketchFormatError
from .queries import approx_sum
from .relation import CATEGORICAL, NUMERIC, Predicate, Relation
from .sampling import (
    KIND_LINEAGE,
    LineageSketch,
    build_lineage,
    derive_child_seed,
)

MAGIC = "#agglineage-sketch"
FORMAT_VERSION = 1
FILE_EXTENSION = ".alsk"


@dataclass
class SummarySet:
    """k summaries of one (relation, attribute) plus their benchmark scores."""

    sketches: list
    benchmark_queries: list
    benchmark_exact: list
    scores: list
    attribute: str
    budget: int
    total_sum: float
    seed: int


def default_benchmarks(rel: Relation, attribute: str) -> list:
    """Whole-sum plus, per categorical attribute, its heaviest value."""
    benchmarks = [Predicate()]
    weights = rel.numeric_column(attribute)
    for attr, kind in rel.schema:
        if kind != CATEGORICAL:
            continue
        codes = rel._store.cat_codes[attr]
        masses = np.bincount(codes, weights=weights)
        value = rel._store.cat_values[attr][int(np.argmax(masses))]
        benchmarks.append(Predicate.of((attr, "=", value)))
    return benchmarks


def build_summary_set(
    rel: Relation,
    attribute: str,
    b: int,
    k: int = 3,
    benchmarks: list | None = None,
    seed: int = 0,
) -> SummarySet:
    """Build k summaries under derived child seeds and score them.

    Each score is the Euclidean distance between the vector of S-normalized
    approximate benchmark answers and the S-normalized exact vector, so
    scores are unit-free and the always-true benchmark contributes zero.
    """
    if not isinstance(k, int) or k < 3:
        raise ParameterError(f"k must be an integer >= 3, got {k!r}")
    if benchmarks is None:
        benchmarks = default_benchmarks(rel, attribute)
    else:
        benchmarks = list(benchmarks)
    if not benchmarks:
        raise ParameterError("benchmark query list is empty")

    exact = [rel.exact_sum(attribute, q) for q in benchmarks]
    total = rel.totals[attribute]
    sketches = [
        build_lineage(rel, attribute, b, derive_child_seed(seed, "summary", i))
        for i in range(k)
    ]
    exact_norm = np.array(exact) / total
    scores = []
    for sketch in sketches:
        approx_norm = np.array(
            [approx_sum(sketch, q).estimate for q in benchmarks]
        ) / total
        scores.append(float(np.linalg.norm(approx_norm - exact_norm)))
    return SummarySet(
        sketches=sketches,
        benchmark_queries=benchmarks,
        benchmark_exact=exact,
        scores=scores,
        attribute=attribute,
        budget=sketches[0].budget,
        total_sum=total,
        seed=seed,
    )


def select_summary(summary_set: SummarySet) -> LineageSketch:
    """Discard the summary with the worst benchmark score, keep the best rest.

    Ties: the worst slot is the highest index among maxima; the winner is
    the lowest index among remaining minima.
    """
    scores = summary_set.scores
    if len(summary_set.sketches) < 2:
        raise ParameterError("need at least two summaries to select from")
    worst = max(range(len(scores)), key=lambda i: (scores[i], i))
    remaining = [i for i in range(len(scores)) if i != worst]
    winner = min(remaining, key=lambda i: (scores[i], i))
    return summary_set.sketches[winner]


# -- persistence ---------------------------------------------------------------


def _header_dict(sketch: LineageSketch) -> dict:
    return {
        "version": FORMAT_VERSION,
        "kind": sketch.kind,
        "attribute": sketch.attribute,
        "total_sum": sketch.total_sum,
        "budget": sketch.budget,
        "seed": sketch.seed,
        "source_n": sketch.source_n,
        "entry_count": sketch.n_entries,
        "freq_total": sketch.frequency_mass,
        "schema": [[name, kind] for name, kind in sketch.schema],
        "categories": {a: list(v) for a, v in sketch.cat_values.items()},
    }


def save_sketch(sketch: LineageSketch, sink) -> None:
    """Write a summary to a path or binary stream; round-trips exactly."""
    close = False
    if isinstance(sink, (str, Path)):
        sink = open(sink, "wb")
        close = True
    try:
        first_line = (
            f"{MAGIC} v{FORMAT_VERSION} kind={sketch.kind} "
            f"attribute={sketch.attribute} entries={sketch.n_entries} "
            f"b={sketch.budget}\n"
        ).encode("utf-8")
        header = json.dumps(_header_dict(sketch), sort_keys=True).encode("utf-8")
        digest = hashlib.sha256()

        def emit(data: bytes) -> None:
            digest.update(data)
            sink.write(data)

        emit(first_line)
        emit(struct.pack("<I", len(header)))
        emit(header)
        emit(np.ascontiguousarray(sketch.ids, dtype="<i8").tobytes())
        emit(np.ascontiguousarray(sketch.freqs, dtype="<i8").tobytes())
        for name, kind in sketch.schema:
            if kind == NUMERIC:
                emit(np.ascontiguousarray(sketch.numeric[name], dtype="<f8").tobytes())
            else:
                emit(np.ascontiguousarray(sketch.cat_codes[name], dtype="<i4").tobytes())
        sink.write(digest.digest())
    finally:
        if close:
            sink.close()


def _read_exact(stream, size: int, what: str) -> bytes:
    data = stream.read(size)
    if len(data) != size:
        raise SketchFormatError(f"truncated file while reading {what}")
    return data


def load_sketch(source) -> LineageSketch:
    """Read a summary back, verifying version, checksum, and invariants."""
    close = False
    if isinstance(source, (str, Path)):
        source = open(source, "rb")
        close = True
    try:
        payload = source.read()
    finally:
        if close:
            source.close()
    if len(payload) < 33 or b"\n" not in payload:
        raise SketchFormatError("not a summary file: missing header line")
    newline = payload.index(b"\n")
    first_line = payload[: newline + 1]
    try:
        text = first_line.decode("utf-8").strip()
    except UnicodeDecodeError:
        raise SketchFormatError("not a summary file: bad header line") from None
    parts = text.split()
    if not parts or parts[0] != MAGIC:
        raise SketchFormatError(
            f"not a summary file: expected magic {MAGIC!r}"
        )
    if len(parts) < 2 or not parts[1].startswith("v") or parts[1][1:] != str(
        FORMAT_VERSION
    ):
        raise SketchFormatError(
            f"unsupported format version {parts[1] if len(parts) > 1 else '?'}"
        )

    body, checksum = payload[:-32], payload[-32:]
    if hashlib.sha256(body).digest() != checksum:
        raise SketchFormatError("checksum mismatch: file is corrupt")

    stream = io.BytesIO(body[newline + 1 :])
    (header_len,) = struct.unpack("<I", _read_exact(stream, 4, "header length"))
    try:
        header = json.loads(_read_exact(stream, header_len, "header"))
    except json.JSONDecodeError:
        raise SketchFormatError("corrupt JSON header") from None
    if header.get("version") != FORMAT_VERSION:
        raise SketchFormatError(f"unsupported format version {header.get('version')!r}")

    entries = int(header["entry_count"])
    ids = np.frombuffer(_read_exact(stream, entries * 8, "ids"), dtype="<i8")
    freqs = np.frombuffer(_read_exact(stream, entries * 8, "frequencies"), dtype="<i8")
    schema = tuple((name, kind) for name, kind in header["schema"])
    numeric = {}
    cat_codes = {}
    cat_values = {}
    for name, kind in schema:
        if kind == NUMERIC:
            numeric[name] = np.frombuffer(
                _read_exact(stream, entries * 8, f"column {name}"), dtype="<f8"
            )
        else:
            cat_codes[name] = np.frombuffer(
                _read_exact(stream, entries * 4, f"column {name}"), dtype="<i4"
            )
            cat_values[name] = tuple(header["categories"][name])
    if stream.read(1):
        raise SketchFormatError("trailing bytes after arrays")

    freq_total = int(header["freq_total"])
    if int(freqs.sum()) != freq_total:
        raise SketchFormatError(
            f"invariant violated: frequencies sum to {int(freqs.sum())}, "
            f"header declares {freq_total}"
        )
    if header["kind"] == KIND_LINEAGE and freq_total != int(header["budget"]):
        raise SketchFormatError(
            f"invariant violated: frequencies sum to {freq_total}, "
            f"budget is {header['budget']}"
        )
    try:
        return LineageSketch(
            kind=header["kind"],
            attribute=header["attribute"],
            total_sum=float(header["total_sum"]),
            budget=int(header["budget"]),
            seed=header["seed"] if header["seed"] is None else int(header["seed"]),
            source_n=int(header["source_n"]),
            schema=schema,
            ids=ids.copy(),
            freqs=freqs.copy(),
            numeric={a: v.copy() for a, v in numeric.items()},
            cat_codes={a: v.copy() for a, v in cat_codes.items()},
            cat_values=cat_values,
        )
    except ParameterError as exc:
        raise SketchFormatError(f"invariant violated: {exc}") from None
