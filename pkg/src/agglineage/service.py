"""HTTP/JSON service hosting datasets and summaries for drill-down queries.

Single-tenant, in-memory catalog.  Summaries stay queryable after their
source dataset is evicted: answering a query touches only the summary.
Predicates travel as structured JSON, mirroring the clause model, so the
service needs no expression parser.  Error bodies are
``{"code", "message", "detail"}``.
"""

from __future__ import annotations

import itertools
import threading
from datetime import datetime, timezone
from typing import Any, Literal

from fastapi import FastAPI, Query, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, Response
from pydantic import BaseModel, Field

from .errors import (
    DegenerateRelationError,
    IngestError,
    LineageError,
    ParameterError,
    PredicateError,
    SchemaError,
)
from .queries import approx_sum
from .relation import Clause, Predicate, Relation, ingest_csv
from .sampling import GuaranteeParams, LineageSketch, compute_budget, error_for_budget
from .summaries import build_summary_set, select_summary


class NotFoundError(LineageError):
    pass


_STATUS = (
    (NotFoundError, 404, "not-found"),
    (IngestError, 400, "ingest-error"),
    (PredicateError, 400, "predicate-error"),
    (DegenerateRelationError, 422, "degenerate-attribute"),
    (SchemaError, 422, "schema-error"),
    (ParameterError, 422, "parameter-error"),
)


class ClauseModel(BaseModel):
    attribute: str
    op: Literal["=", "!=", "<", "<=", ">", ">=", "in", "between"]
    value: Any = None


class PredicateModel(BaseModel):
    clauses: list[ClauseModel] = Field(default_factory=list)

    def to_predicate(self) -> Predicate:
        clauses = []
        for c in self.clauses:
            if c.op == "in":
                if not isinstance(c.value, (list, tuple)) or not c.value:
                    raise PredicateError(
                        f"'in' clause on {c.attribute!r} needs a non-empty value list"
                    )
                operand: Any = tuple(c.value)
            elif c.op == "between":
                if not isinstance(c.value, (list, tuple)) or len(c.value) != 2:
                    raise PredicateError(
                        f"'between' clause on {c.attribute!r} needs a [low, high] pair"
                    )
                operand = tuple(c.value)
            else:
                if c.value is None or isinstance(c.value, (list, dict)):
                    raise PredicateError(
                        f"clause on {c.attribute!r} needs a scalar value"
                    )
                operand = c.value
            clauses.append(Clause(c.attribute, c.op, operand))
        return Predicate(tuple(clauses))


class QueryBody(BaseModel):
    predicate: PredicateModel


class ExactQueryBody(BaseModel):
    attribute: str
    predicate: PredicateModel


class SketchRequest(BaseModel):
    attribute: str
    b: int | None = None
    m: int | None = None
    p: float | None = None
    epsilon: float | None = None
    k: int = 3
    seed: int = 0


class SessionCatalog:
    """Thread-safe registry of datasets, summaries, and per-summary query logs."""

    def __init__(self):
        self._lock = threading.Lock()
        self._dataset_ids = itertools.count(1)
        self._sketch_ids = itertools.count(1)
        self.datasets: dict = {}
        self.tombstones: set = set()
        self.sketches: dict = {}
        self.query_log: dict = {}

    def add_dataset(self, rel: Relation) -> str:
        with self._lock:
            dataset_id = f"ds-{next(self._dataset_ids):04d}"
            self.datasets[dataset_id] = rel
        return dataset_id

    def get_dataset(self, dataset_id: str) -> Relation:
        rel = self.datasets.get(dataset_id)
        if rel is None:
            if dataset_id in self.tombstones:
                raise NotFoundError(f"dataset {dataset_id} was evicted")
            raise NotFoundError(f"unknown dataset {dataset_id}")
        return rel

    def evict_dataset(self, dataset_id: str) -> None:
        with self._lock:
            if dataset_id not in self.datasets:
                raise NotFoundError(f"unknown dataset {dataset_id}")
            del self.datasets[dataset_id]
            self.tombstones.add(dataset_id)

    def add_sketch(self, sketch: LineageSketch, guarantees, dataset_id: str) -> str:
        with self._lock:
            sketch_id = f"sk-{next(self._sketch_ids):04d}"
            self.sketches[sketch_id] = (sketch, guarantees, dataset_id)
            self.query_log[sketch_id] = []
        return sketch_id

    def get_sketch(self, sketch_id: str):
        entry = self.sketches.get(sketch_id)
        if entry is None:
            raise NotFoundError(f"unknown sketch {sketch_id}")
        return entry

    def append_log(self, sketch_id: str, item: dict) -> None:
        with self._lock:
            self.query_log[sketch_id].append(item)


def _error_response(exc: LineageError) -> JSONResponse:
    for cls, status, code in _STATUS:
        if isinstance(exc, cls):
            return JSONResponse(
                status_code=status,
                content={"code": code, "message": str(exc), "detail": None},
            )
    return JSONResponse(
        status_code=500,
        content={"code": "internal", "message": str(exc), "detail": None},
    )


def create_app() -> FastAPI:
    app = FastAPI(title="agglineage", version="0.1.0")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    catalog = SessionCatalog()
    app.state.catalog = catalog

    @app.exception_handler(LineageError)
    async def lineage_error_handler(request: Request, exc: LineageError):
        return _error_response(exc)

    @app.exception_handler(RequestValidationError)
    async def validation_error_handler(request: Request, exc: RequestValidationError):
        return JSONResponse(
            status_code=400,
            content={
                "code": "malformed-request",
                "message": "request body failed validation",
                "detail": exc.errors(),
            },
        )

    @app.post("/datasets")
    async def upload_dataset(request: Request, name: str = "dataset"):
        body = await request.body()
        if not body.strip():
            raise IngestError("empty request body: expected CSV content")
        rel = ingest_csv(body, name=name)
        dataset_id = catalog.add_dataset(rel)
        return {
            "id": dataset_id,
            "n": rel.n,
            "attributes": [{"name": a, "kind": k} for a, k in rel.schema],
            "totals": dict(rel.totals),
        }

    @app.delete("/datasets/{dataset_id}", status_code=204)
    async def evict_dataset(dataset_id: str):
        catalog.evict_dataset(dataset_id)
        return Response(status_code=204)

    @app.post("/datasets/{dataset_id}/sketches")
    async def build_sketch(dataset_id: str, req: SketchRequest):
        rel = catalog.get_dataset(dataset_id)
        triple = (req.m, req.p, req.epsilon)
        guarantees = None
        if req.b is not None and any(v is not None for v in triple):
            raise ParameterError("give either b or the (m, p, epsilon) triple, not both")
        if req.b is not None:
            b = req.b
        elif all(v is not None for v in triple):
            guarantees = GuaranteeParams(m=req.m, p=req.p, epsilon=req.epsilon)
            b = compute_budget(guarantees)
        else:
            raise ParameterError("give either b or all of (m, p, epsilon)")
        summary_set = build_summary_set(rel, req.attribute, b, k=req.k, seed=req.seed)
        sketch = select_summary(summary_set)
        certification = None
        if guarantees is not None:
            certification = (guarantees.m, guarantees.p)
        sketch_id = catalog.add_sketch(sketch, certification, dataset_id)
        return {
            "id": sketch_id,
            "dataset_id": dataset_id,
            "attribute": sketch.attribute,
            "b": sketch.budget,
            "epsilon_certified": (
                error_for_budget(sketch.budget, *certification)
                if certification
                else None
            ),
            "S": sketch.total_sum,
            "distinct_entries": sketch.n_entries,
        }

    @app.post("/sketches/{sketch_id}/query")
    async def query_sketch(sketch_id: str, body: QueryBody):
        sketch, certification, _ = catalog.get_sketch(sketch_id)
        predicate = body.predicate.to_predicate()
        answer = approx_sum(sketch, predicate, certification)
        flags = []
        relative_bound = None
        if answer.epsilon_certified is not None:
            rho = answer.rho
            if rho < answer.epsilon_certified:
                flags.append("below-resolution")
            if rho > 0:
                relative_bound = answer.epsilon_certified / rho
        response = {
            "estimate": answer.estimate,
            "additive_bound": answer.additive_bound,
            "relative_bound": relative_bound,
            "matched_entries": answer.matched_entries,
            "matched_frequency_mass": answer.matched_frequency_mass,
            "flags": flags,
        }
        catalog.append_log(
            sketch_id,
            {
                "predicate": body.predicate.model_dump()["clauses"],
                "answer": response,
                "timestamp": datetime.now(timezone.utc).isoformat(),
            },
        )
        return response

    @app.get("/sketches/{sketch_id}/log")
    async def sketch_log(
        sketch_id: str, limit: int | None = Query(default=None, ge=0)
    ):
        catalog.get_sketch(sketch_id)
        log = catalog.query_log[sketch_id]
        if limit is not None:
            log = log[-limit:] if limit > 0 else []
        return {"queries": log}

    @app.get("/sketches/{sketch_id}/stats")
    async def sketch_stats(sketch_id: str):
        sketch, _, _ = catalog.get_sketch(sketch_id)
        blocks = sketch.value_histogram()
        return {
            "attribute": sketch.attribute,
            "b": sketch.budget,
            "S": sketch.total_sum,
            "distinct_entries": sketch.n_entries,
            "frequency_mass": sketch.frequency_mass,
            "blocks": blocks,
        }

    @app.post("/datasets/{dataset_id}/exact-query")
    async def exact_query(dataset_id: str, body: ExactQueryBody):
        rel = catalog.get_dataset(dataset_id)
        predicate = body.predicate.to_predicate()
        return {"exact": rel.exact_sum(body.attribute, predicate)}

    return app


app = create_app()
