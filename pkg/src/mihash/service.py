"""HTTP service answering kNN and range queries against one loaded index."""

from __future__ import annotations

from dataclasses import asdict

from fastapi import FastAPI, HTTPException, Query

from .codes import BinaryCode
from .costmodel import best_substring_length, cost_curve
from .mih import MihIndex
from .schemas import (
    CostCurveResponse,
    CostPointModel,
    IndexInfo,
    KnnRequest,
    QueryResponse,
    QueryResult,
    RangeRequest,
    TraceModel,
)


def _decode(codes: list[str], b: int) -> list[BinaryCode]:
    try:
        return [BinaryCode.from_int(int(c, 16), b) for c in codes]
    except ValueError as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from None


def _result(found, trace) -> QueryResult:
    return QueryResult(
        ids=found.ids.tolist(),
        distances=found.distances.tolist(),
        trace=TraceModel(**asdict(trace)),
    )


def create_app(index: MihIndex) -> FastAPI:
    app = FastAPI(title="mihash", version="0.1.0")

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok"}

    @app.get("/index", response_model=IndexInfo)
    def index_info() -> IndexInfo:
        return IndexInfo(n=index.n, b=index.b, m=index.m, lengths=list(index.partition.lengths))

    @app.post("/knn", response_model=QueryResponse)
    def knn(req: KnnRequest) -> QueryResponse:
        if req.k > index.n:
            raise HTTPException(status_code=422, detail=f"k={req.k} exceeds database size {index.n}")
        queries = _decode(req.codes, index.b)
        return QueryResponse(results=[_result(*index.knn_search(q, req.k)) for q in queries])

    @app.post("/range", response_model=QueryResponse)
    def range_(req: RangeRequest) -> QueryResponse:
        if req.r > index.b:
            raise HTTPException(status_code=422, detail=f"radius {req.r} exceeds code length {index.b}")
        queries = _decode(req.codes, index.b)
        return QueryResponse(results=[_result(*index.range_search(q, req.r)) for q in queries])

    @app.get("/costmodel", response_model=CostCurveResponse)
    def costmodel(
        b: int = Query(ge=1, le=4096),
        r: int = Query(ge=0),
        n: float = Query(ge=0),
    ) -> CostCurveResponse:
        if r > b:
            raise HTTPException(status_code=422, detail="radius exceeds code length")
        points = [CostPointModel(**asdict(p)) for p in cost_curve(b, r, n)]
        return CostCurveResponse(b=b, r=r, n=n, best_s=best_substring_length(b, r, n), points=points)

    return app
