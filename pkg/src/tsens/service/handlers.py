"""Command implementations behind both the HTTP endpoints and the CLI.

Each ``run_*`` function takes parsed inputs and returns result models;
``handle`` does the request parsing and wraps everything, including
failures, into a ``Report``.
"""

from __future__ import annotations

import time
from pathlib import Path
from typing import Any, Callable

from ..dp import DpConfig, make_rng, tsens_dp
from ..errors import TSensError, UsageError
from ..io import database_from_inline, database_to_inline, export_database
from ..oracle import Cnf3, brute_force_ls, is_satisfiable, parse_dimacs, reduce_3sat
from ..query import ConjunctiveQuery, Cyclic, component_trees, is_doubly_acyclic, parse_query, path_order
from ..relation import Database
from ..sensitivity import SensitivityReport, analyze, ls_path
from .schemas import (
    ComponentOut,
    DecomposeRequest,
    DecomposeResult,
    DpRequest,
    DpResult,
    ErrorOut,
    OracleRequest,
    ReduceSatRequest,
    ReduceSatResult,
    RelationBest,
    RelationIn,
    Report,
    SensitivityRequest,
    SensitivityResult,
    TreeNodeOut,
    WitnessOut,
)

EXIT_CODES = {"usage": 1, "data": 2, "computation": 3, "internal": 3}

Outcome = tuple[Any, dict | None, dict | None]  # result, stats, timings


def sensitivity_result(report: SensitivityReport, method: str) -> SensitivityResult:
    w = report.witness
    return SensitivityResult(
        ls=str(report.ls),
        witness=WitnessOut(relation=w.relation, values=list(w.values), tsens=str(w.tsens)) if w else None,
        per_relation=[
            RelationBest(relation=r, tsens=str(b.tsens if b else 0), witness=list(b.values) if b else None)
            for r, b in report.per_relation
        ],
        join_size=str(report.join_size),
        method=method,
    )


def _timings(marks: dict[str, float]) -> dict[str, float]:
    return {k: round(v, 3) for k, v in marks.items()}


def run_decompose(q: ConjunctiveQuery) -> DecomposeResult:
    comps = []
    for sub, t in component_trees(q):
        if isinstance(t, Cyclic):
            comps.append(ComponentOut(relations=list(sub.relations), acyclic=False, residual=t.to_dict()))
            continue
        ok, bad = is_doubly_acyclic(t)
        comps.append(
            ComponentOut(
                relations=list(sub.relations),
                acyclic=True,
                tree=[TreeNodeOut(**n) for n in t.to_dict()],
                doubly_acyclic=ok,
                doubly_acyclic_violation=bad,
            )
        )
    acyclic = all(c.acyclic for c in comps)
    path = list(path_order(q)) if _is_path(q) else None
    return DecomposeResult(
        query=str(q),
        acyclic=acyclic,
        doubly_acyclic=all(c.doubly_acyclic for c in comps) if acyclic else None,
        path=path,
        components=comps,
    )


def _is_path(q: ConjunctiveQuery) -> bool:
    try:
        path_order(q)
    except TSensError:
        return False
    return True


def _method(q: ConjunctiveQuery, ghd, mode: str) -> str:
    if mode == "topk":
        return "topk"
    if ghd is not None:
        return "ghd"
    if _is_path(q):
        return "path"
    cyclic = any(isinstance(t, Cyclic) for _, t in component_trees(q))
    return "ghd-single-node" if cyclic else "join-tree"


def run_sensitivity(db: Database, q: ConjunctiveQuery, mode: str = "exact", k: int | None = None, ghd=None) -> Outcome:
    method = _method(q, ghd, mode)
    if method == "path":
        # the two chain passes never build the (quadratic) full multiplicity tables
        report = ls_path(db, q)
        return sensitivity_result(report, method), dict(report.stats), _timings(report.timings_ms)
    if mode == "topk":
        if k is None:
            raise UsageError("topk mode needs k")
        report = analyze(db, q, ghd, topk=k).report
    else:
        report = analyze(db, q, ghd).report
    stats = dict(report.stats)
    if mode == "topk":
        stats["k"] = k
    return sensitivity_result(report, method), stats, _timings(report.timings_ms)


def run_dp(db: Database, q: ConjunctiveQuery, cfg: DpConfig, ghd=None) -> Outcome:
    a = analyze(db, q, ghd)
    t0 = time.perf_counter()
    ans = tsens_dp(db, q, cfg, make_rng(cfg.seed), analysis=a)
    marks = dict(a.report.timings_ms)
    marks["dp"] = (time.perf_counter() - t0) * 1000.0
    result = DpResult(
        value=str(ans.value),
        tau=str(ans.tau),
        raw_truncated=str(ans.raw_truncated),
        noise_scale=ans.noise_scale,
        clamped=ans.clamped,
        budget=ans.budget,
    )
    return result, {"table_rows": a.report.stats.get("table_rows", {})}, _timings(marks)


def run_oracle(db: Database, q: ConjunctiveQuery, guard: int) -> Outcome:
    t0 = time.perf_counter()
    report = brute_force_ls(db, q, guard)
    return sensitivity_result(report, "oracle"), dict(report.stats), _timings({"oracle": (time.perf_counter() - t0) * 1000.0})


def run_reduce_sat(f: Cnf3, check: bool = False) -> ReduceSatResult:
    db, q = reduce_3sat(f)
    result = ReduceSatResult(
        num_vars=f.num_vars,
        num_clauses=len(f.clauses),
        query=str(q),
        relations=[RelationIn(**r) for r in database_to_inline(db)],
    )
    if check:
        ls = brute_force_ls(db, q).ls
        result.satisfiable = is_satisfiable(f)
        result.ls = str(ls)
        result.ls_positive = ls > 0
    return result


def write_reduction(result: ReduceSatResult, out_dir: str | Path) -> ReduceSatResult:
    """Move the inline relations of a reduction into CSV files plus a manifest."""
    out_dir = Path(out_dir)
    db = database_from_inline(r.model_dump() for r in result.relations or [])
    manifest = export_database(db, out_dir)
    qpath = out_dir / "query.cq"
    qpath.write_text(result.query + "\n", encoding="utf-8")
    return result.model_copy(update={"relations": None, "manifest": str(manifest), "query_file": str(qpath)})


# -- reports ------------------------------------------------------------------------


def error_report(command: str, config: dict, exc: BaseException) -> Report:
    kind = exc.kind if isinstance(exc, TSensError) and exc.kind in EXIT_CODES else "internal"
    return Report(
        command=command,
        config=config,
        error=ErrorOut(kind=kind, type=type(exc).__name__, message=str(exc), exit_code=EXIT_CODES[kind]),
    )


def make_report(command: str, config: dict, fn: Callable[[], Any], timings: bool = False) -> Report:
    """Run ``fn`` and wrap its outcome (or its error) in a report."""
    try:
        out = fn()
    except TSensError as exc:
        return error_report(command, config, exc)
    if isinstance(out, tuple):
        result, stats, marks = out
    else:
        result, stats, marks = out, None, None
    return Report(command=command, config=config, result=result, stats=stats, timings_ms=marks if timings else None)


def _ghd(nodes) -> list[dict] | None:
    if nodes is None:
        return None
    return [n.model_dump(exclude_none=True) | {"parent": n.parent} for n in nodes]


def _config(req, drop=("relations", "dictionary", "timings")) -> dict:
    return {k: v for k, v in req.model_dump(mode="json").items() if k not in drop}


def handle(command: str, req) -> Report:
    """Service entry point: a parsed request in, a report out."""
    config = _config(req)

    def data() -> tuple[Database, ConjunctiveQuery]:
        db = database_from_inline((r.model_dump() for r in req.relations), req.dictionary)
        return db, parse_query(req.query)

    if command == "decompose":
        assert isinstance(req, DecomposeRequest)
        return make_report(command, config, lambda: run_decompose(parse_query(req.query)))
    if command == "sensitivity":
        assert isinstance(req, SensitivityRequest)
        return make_report(command, config, lambda: run_sensitivity(*data(), req.mode, req.k, _ghd(req.ghd)), req.timings)
    if command == "dp-answer":
        assert isinstance(req, DpRequest)
        if req.epsilon_tsens is None:
            config["epsilon_tsens"] = req.epsilon / 2

        def dp():
            cfg = DpConfig(
                epsilon=req.epsilon,
                epsilon_tsens=req.epsilon_tsens if req.epsilon_tsens is not None else req.epsilon / 2,
                ell=req.ell,
                primary_private=req.primary_private,
                seed=req.seed,
                test_mode=req.test_mode,
                eps1_fraction=req.eps1_fraction,
            )
            return run_dp(*data(), cfg, _ghd(req.ghd))

        return make_report(command, config, dp, req.timings)
    if command == "oracle":
        assert isinstance(req, OracleRequest)
        return make_report(command, config, lambda: run_oracle(*data(), req.guard), req.timings)
    if command == "reduce-sat":
        assert isinstance(req, ReduceSatRequest)
        return make_report(command, config, lambda: run_reduce_sat(parse_dimacs(req.dimacs), req.check))
    raise ValueError(f"unknown command {command!r}")
