"""Value-weighted summaries for additive-error SUM query approximation.

Build a small summary of a relation's nonnegative numeric attribute with
``build_lineage`` (or the one-pass streaming variant), then answer arbitrary
conjunctive SUM predicates from the summary alone with ``approx_sum``.  The
budget ``b = ceil(ln(2m/p) / (2 eps^2))`` certifies m queries within
``eps * S`` with probability at least 1 - p.
"""

from .errors import (
    DegenerateRelationError,
    IngestError,
    LineageError,
    ParameterError,
    PredicateError,
    SchemaError,
    SketchFormatError,
)
from .predicate_text import PredicateParseError, parse_predicate
from .queries import (
    ApproxAnswer,
    RelativeErrorReport,
    approx_sum,
    relative_error_report,
    top_k_baseline,
    uniform_baseline,
)
from .relation import (
    ALWAYS_TRUE,
    CATEGORICAL,
    FREQUENCY_ATTRIBUTE,
    NUMERIC,
    Clause,
    Predicate,
    Record,
    Relation,
    ingest_csv,
    iter_csv_records,
    make_salaries_demo,
    toys_subset_predicate,
)
from .sampling import (
    GuaranteeParams,
    LineageSketch,
    MultiLineageResult,
    build_lineage,
    build_lineage_streaming,
    build_multi_lineage,
    compute_budget,
    derive_child_seed,
    error_for_budget,
    merge_lineage_parts,
)
from .summaries import (
    FILE_EXTENSION,
    SummarySet,
    build_summary_set,
    default_benchmarks,
    load_sketch,
    save_sketch,
    select_summary,
)
from .validation import (
    BlockReplication,
    BuilderEquivalence,
    ValidationReport,
    compare_builders,
    hoeffding_ceiling,
    oracle_exhaustive_sum,
    replicate_block_table,
    run_bound_check,
    run_exhaustive_bound_check,
)

__version__ = "0.1.0"

__all__ = [
    "ALWAYS_TRUE",
    "ApproxAnswer",
    "BlockReplication",
    "BuilderEquivalence",
    "CATEGORICAL",
    "Clause",
    "DegenerateRelationError",
    "FILE_EXTENSION",
    "FREQUENCY_ATTRIBUTE",
    "GuaranteeParams",
    "IngestError",
    "LineageError",
    "LineageSketch",
    "MultiLineageResult",
    "NUMERIC",
    "ParameterError",
    "Predicate",
    "PredicateError",
    "PredicateParseError",
    "Record",
    "Relation",
    "RelativeErrorReport",
    "SchemaError",
    "SketchFormatError",
    "SummarySet",
    "ValidationReport",
    "approx_sum",
    "build_lineage",
    "build_lineage_streaming",
    "build_multi_lineage",
    "build_summary_set",
    "compare_builders",
    "compute_budget",
    "default_benchmarks",
    "derive_child_seed",
    "error_for_budget",
    "hoeffding_ceiling",
    "ingest_csv",
    "iter_csv_records",
    "load_sketch",
    "make_salaries_demo",
    "merge_lineage_parts",
    "oracle_exhaustive_sum",
    "parse_predicate",
    "relative_error_report",
    "replicate_block_table",
    "run_bound_check",
    "run_exhaustive_bound_check",
    "save_sketch",
    "select_summary",
    "top_k_baseline",
    "toys_subset_predicate",
    "uniform_baseline",
]
