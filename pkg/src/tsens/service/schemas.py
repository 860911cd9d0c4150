"""Request and response models shared by the HTTP service and the CLI.

Every response, success or failure, is a ``Report``.  Counts are decimal
strings because they can exceed the integer range of common JSON readers.
"""

from __future__ import annotations

import json
from typing import Any, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field

SCHEMA_VERSION = 1

Count = str  # decimal digits


class _Model(BaseModel):
    model_config = ConfigDict(extra="forbid")


# -- requests -----------------------------------------------------------------------


class RelationIn(_Model):
    name: str
    attributes: list[str]
    rows: list[list[str]] = Field(default_factory=list)
    counts: Optional[list[Union[int, str]]] = None


class GhdNodeIn(_Model):
    atoms: list[str]
    parent: Optional[int] = None
    attrs: Optional[list[str]] = None


class DecomposeRequest(_Model):
    query: str


class _DataRequest(_Model):
    relations: list[RelationIn]
    query: str
    # value order used for tie-breaking; first-seen order of the rows when omitted
    dictionary: Optional[list[str]] = None
    timings: bool = False


class SensitivityRequest(_DataRequest):
    mode: Literal["exact", "topk"] = "exact"
    k: Optional[int] = Field(default=None, ge=1)
    ghd: Optional[list[GhdNodeIn]] = None


class DpRequest(_DataRequest):
    epsilon: float = Field(gt=0)
    epsilon_tsens: Optional[float] = Field(default=None, gt=0)
    ell: int = Field(ge=1)
    primary_private: str
    seed: int = Field(default=0, ge=0)
    test_mode: bool = False
    eps1_fraction: float = Field(default=0.5, gt=0, lt=1)
    ghd: Optional[list[GhdNodeIn]] = None


class OracleRequest(_DataRequest):
    guard: int = Field(default=10**6, ge=1)


class ReduceSatRequest(_Model):
    dimacs: str
    check: bool = False


# -- results ------------------------------------------------------------------------


class WitnessOut(_Model):
    relation: str
    values: list[str]
    tsens: Count


class RelationBest(_Model):
    relation: str
    tsens: Count
    witness: Optional[list[str]] = None


class SensitivityResult(_Model):
    ls: Count
    witness: Optional[WitnessOut]
    per_relation: list[RelationBest]
    join_size: Count
    method: str


class TreeNodeOut(_Model):
    atoms: list[str]
    attrs: list[str]
    parent: Optional[int]
    shared: list[str]


class ComponentOut(_Model):
    relations: list[str]
    acyclic: bool
    tree: Optional[list[TreeNodeOut]] = None
    residual: Optional[dict[str, list[str]]] = None
    doubly_acyclic: Optional[bool] = None
    doubly_acyclic_violation: Optional[int] = None


class DecomposeResult(_Model):
    query: str
    acyclic: bool
    doubly_acyclic: Optional[bool]
    path: Optional[list[str]]
    components: list[ComponentOut]


class DpResult(_Model):
    value: str
    tau: Count
    raw_truncated: Count
    noise_scale: float
    clamped: bool
    budget: dict[str, float]


class ReduceSatResult(_Model):
    num_vars: int
    num_clauses: int
    query: str
    relations: Optional[list[RelationIn]] = None
    manifest: Optional[str] = None
    query_file: Optional[str] = None
    satisfiable: Optional[bool] = None
    ls: Optional[Count] = None
    ls_positive: Optional[bool] = None


class ErrorOut(_Model):
    kind: Literal["usage", "data", "computation", "internal"]
    type: str
    message: str
    exit_code: int


Result = Union[SensitivityResult, DecomposeResult, DpResult, ReduceSatResult]


class Report(_Model):
    schema_: Literal[1] = Field(default=SCHEMA_VERSION, alias="schema")
    command: str
    config: dict[str, Any] = Field(default_factory=dict)
    result: Optional[Result] = None
    stats: Optional[dict[str, Any]] = None
    timings_ms: Optional[dict[str, float]] = None
    error: Optional[ErrorOut] = None

    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    def to_json(self) -> str:
        """Stable text: fixed key order, top-level fields left out when unset."""
        data = self.model_dump(mode="json", by_alias=True)
        return json.dumps({k: v for k, v in data.items() if v is not None}, indent=2)


def report_json_schema() -> dict:
    return Report.model_json_schema(by_alias=True)
