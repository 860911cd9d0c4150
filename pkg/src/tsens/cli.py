"""Command-line client.

Reads the manifest, query, decomposition and formula files, turns them into
a service request, and runs it either in-process (default) or against a
running service (``--server URL``).  Either way the JSON report is printed
to stdout and the exit code follows the error kind: 0 success, 1 usage,
2 data/format, 3 computation.
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import Sequence

from pydantic import ValidationError

from .errors import ComputationError, DataError, TSensError, UsageError
from .io import database_to_inline, load_database, load_manifest, read_text
from .query import load_ghd
from .service.handlers import error_report, handle, write_reduction
from .service.schemas import (
    DecomposeRequest,
    DpRequest,
    GhdNodeIn,
    OracleRequest,
    ReduceSatRequest,
    Report,
    SensitivityRequest,
)


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse would exit with status 2
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="tsens", description="Tuple sensitivity and private answers for counting conjunctive queries.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, data: bool = True):
        if data:
            sp.add_argument("--data", required=True, metavar="MANIFEST", help="JSON manifest listing the CSV relations")
        sp.add_argument("--query", required=True, metavar="FILE", help="conjunctive query file")
        sp.add_argument("--pretty", action="store_true", help="also print a human-readable table to stderr")
        sp.add_argument("--timings", action="store_true", help="include wall-clock timings (breaks byte-identical output)")
        sp.add_argument("--server", metavar="URL", help="send the request to a running service instead")

    sp = sub.add_parser("decompose", help="join tree or cyclicity witness")
    common(sp, data=False)

    sp = sub.add_parser("sensitivity", help="local sensitivity and most sensitive tuple")
    common(sp)
    sp.add_argument("--mode", choices=("exact", "topk"), default="exact")
    sp.add_argument("--k", type=int, help="frequencies kept per table in topk mode")
    sp.add_argument("--ghd", metavar="FILE", help="JSON decomposition for cyclic queries")

    sp = sub.add_parser("dp-answer", help="differentially private count")
    common(sp)
    sp.add_argument("--epsilon", type=float, required=True)
    sp.add_argument("--epsilon-tsens", type=float, help="budget for learning the threshold (default epsilon/2)")
    sp.add_argument("--ell", type=int, required=True, help="upper bound on tuple sensitivity")
    sp.add_argument("--primary-private", required=True, metavar="RELATION")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--test-mode", action="store_true", help="replace every noise draw by 0")
    sp.add_argument("--eps1-fraction", type=float, default=0.5, help="share of epsilon-tsens for the reference count")
    sp.add_argument("--ghd", metavar="FILE")

    sp = sub.add_parser("oracle", help="brute-force local sensitivity")
    common(sp)
    sp.add_argument("--guard", type=int, default=10**6, help="largest representative domain to enumerate")

    sp = sub.add_parser("reduce-sat", help="database and query from a 3CNF formula")
    sp.add_argument("--cnf", required=True, metavar="FILE", help="DIMACS file with 3 literals per clause")
    sp.add_argument("--check", action="store_true", help="compare brute-force sensitivity with satisfiability")
    sp.add_argument("--out", metavar="DIR", help="write CSVs, manifest and query here")
    sp.add_argument("--pretty", action="store_true")
    sp.add_argument("--server", metavar="URL")

    sp = sub.add_parser("serve", help="run the HTTP service")
    sp.add_argument("--host", default="127.0.0.1")
    sp.add_argument("--port", type=int, default=8000)
    return p


def _data(args) -> dict:
    db = load_database(load_manifest(args.data))
    return {"relations": database_to_inline(db), "dictionary": db.vdict.values()}


def _ghd(args) -> list[GhdNodeIn] | None:
    if not getattr(args, "ghd", None):
        return None
    try:
        return [GhdNodeIn.model_validate(n) for n in load_ghd(read_text(args.ghd, "decomposition file"))]
    except ValidationError as exc:
        raise DataError(f"decomposition file {args.ghd}: {exc.errors()[0]['msg']}") from None


def build_request(args):
    """Read the input files named on the command line into a request model."""
    try:
        if args.command == "reduce-sat":
            return ReduceSatRequest(dimacs=read_text(args.cnf, "CNF file"), check=args.check)
        query = read_text(args.query, "query file")
        if args.command == "decompose":
            return DecomposeRequest(query=query)
        base = {**_data(args), "query": query, "timings": args.timings}
        if args.command == "sensitivity":
            if args.mode == "topk" and args.k is None:
                raise UsageError("--mode topk needs --k")
            return SensitivityRequest(**base, mode=args.mode, k=args.k, ghd=_ghd(args))
        if args.command == "dp-answer":
            return DpRequest(
                **base,
                epsilon=args.epsilon,
                epsilon_tsens=args.epsilon_tsens,
                ell=args.ell,
                primary_private=args.primary_private,
                seed=args.seed,
                test_mode=args.test_mode,
                eps1_fraction=args.eps1_fraction,
                ghd=_ghd(args),
            )
        if args.command == "oracle":
            return OracleRequest(**base, guard=args.guard)
    except ValidationError as exc:
        e = exc.errors()[0]
        raise UsageError(f"{'.'.join(str(p) for p in e['loc'])}: {e['msg']}") from None
    raise UsageError(f"unknown command {args.command!r}")


def _remote(url: str, command: str, req) -> Report:
    import httpx

    try:
        resp = httpx.post(
            f"{url.rstrip('/')}/{command}",
            content=req.model_dump_json(),
            headers={"content-type": "application/json"},
            timeout=None,
        )
    except httpx.HTTPError as exc:
        raise ComputationError(f"cannot reach service at {url}: {exc}") from None
    try:
        return Report.model_validate_json(resp.text)
    except ValidationError:
        raise ComputationError(f"service answered {resp.status_code} with an unexpected body") from None


def _pretty(report: Report) -> str:
    if report.error:
        return f"error ({report.error.kind}): {report.error.message}"
    r = report.result
    lines = [f"{report.command}"]
    if report.command in ("sensitivity", "oracle"):
        lines.append(f"  local sensitivity  {r.ls}    join size  {r.join_size}    method  {r.method}")
        width = max([len(b.relation) for b in r.per_relation] + [8])
        lines.append(f"  {'relation':<{width}}  {'max tsens':>12}  witness")
        for b in r.per_relation:
            w = "(" + ", ".join(b.witness) + ")" if b.witness else "-"
            lines.append(f"  {b.relation:<{width}}  {b.tsens:>12}  {w}")
    elif report.command == "decompose":
        lines.append(f"  acyclic {r.acyclic}   doubly acyclic {r.doubly_acyclic}")
        for c in r.components:
            if c.tree:
                for i, n in enumerate(c.tree):
                    lines.append(f"  [{i}] {','.join(n.atoms)}  parent={n.parent}  shared={','.join(n.shared)}")
            else:
                lines.append(f"  residual {json.dumps(c.residual)}")
    elif report.command == "dp-answer":
        lines.append(f"  answer {r.value}   tau {r.tau}   noise scale {r.noise_scale:.4g}")
    elif report.command == "reduce-sat":
        lines.append(f"  {r.num_vars} variables, {r.num_clauses} clauses")
        if r.satisfiable is not None:
            lines.append(f"  satisfiable {r.satisfiable}   ls {r.ls}")
    return "\n".join(lines)


def run(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    command = next((a for a in argv if not a.startswith("-")), "")
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        report = error_report(command, {}, exc)
        print(report.to_json())
        return report.error.exit_code
    if args.command == "serve":
        import uvicorn

        uvicorn.run("tsens.service.app:app", host=args.host, port=args.port)
        return 0
    try:
        req = build_request(args)
        report = _remote(args.server, args.command, req) if args.server else handle(args.command, req)
        if args.command == "reduce-sat" and args.out and report.result is not None:
            report = report.model_copy(update={"result": write_reduction(report.result, args.out)})
    except TSensError as exc:
        report = error_report(args.command, {}, exc)
    print(report.to_json())
    if getattr(args, "pretty", False):
        print(_pretty(report), file=sys.stderr)
    return report.error.exit_code if report.error else 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
