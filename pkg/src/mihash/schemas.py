"""Request and response models for the HTTP service.

Codes travel as hexadecimal strings of their integer value (bit ``i`` is
the ``2**i`` place), so ``"0x5"`` is a code with bits 0 and 2 set.
"""

from __future__ import annotations

from typing import List, Optional

from pydantic import BaseModel, Field, field_validator


def _parse_hex(value: str) -> str:
    try:
        if int(value, 16) < 0:
            raise ValueError
    except ValueError:
        raise ValueError(f"not a hexadecimal code: {value!r}") from None
    return value


class IndexInfo(BaseModel):
    n: int
    b: int
    m: int
    lengths: List[int]


class _CodesRequest(BaseModel):
    codes: List[str] = Field(min_length=1)

    @field_validator("codes")
    @classmethod
    def _check_codes(cls, v: List[str]) -> List[str]:
        return [_parse_hex(c) for c in v]


class KnnRequest(_CodesRequest):
    k: int = Field(ge=0)


class RangeRequest(_CodesRequest):
    r: int = Field(ge=0)


class TraceModel(BaseModel):
    lookups: int
    candidates: int
    unique_candidates: int
    distance_evaluations: int
    final_radius: Optional[int] = None


class QueryResult(BaseModel):
    ids: List[int]
    distances: List[int]
    trace: TraceModel


class QueryResponse(BaseModel):
    results: List[QueryResult]


class CostPointModel(BaseModel):
    s: int
    lookups: int
    lookup_bound: float
    cost: float
    cost_bound: float


class CostCurveResponse(BaseModel):
    b: int
    r: int
    n: float
    best_s: int
    points: List[CostPointModel]
