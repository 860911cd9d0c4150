"""Shared checks: agreement with the oracle, and neighbouring databases for truncation."""

from __future__ import annotations

from typing import Iterator

from tsens.dp import truncated_count
from tsens.oracle import brute_force_ls, representative_domain, tuple_sensitivities
from tsens.query import ConjunctiveQuery
from tsens.relation import Database, canonicalize
from tsens.sensitivity import SensitivityReport, analyze


def assert_matches_oracle(report: SensitivityReport, db: Database, q: ConjunctiveQuery) -> None:
    """Same LS, join size and per-relation maxima as brute force; every witness re-checked.

    Witness tuples themselves may differ from the oracle's when several
    tuples tie, so each reported witness is instead recomputed by the oracle.
    """
    truth = brute_force_ls(db, q)
    assert report.ls == truth.ls
    assert report.join_size == truth.join_size
    assert report.per_relation_tsens() == truth.per_relation_tsens()
    sens = tuple_sensitivities(db, q)
    for r, w in report.per_relation:
        if w is not None:
            assert sens[r].get(w.values, 0) == w.tsens, (r, w)
    if report.ls:
        assert report.witness.tsens == report.ls
        assert sens[report.witness.relation].get(report.witness.values, 0) == report.ls


def one_copy_neighbours(db: Database, q: ConjunctiveQuery, relation: str) -> Iterator[Database]:
    """Every database differing from ``db`` by one copy of one tuple of ``relation``."""
    schema, rows = db.decoded(relation)
    candidates = dict.fromkeys(list(representative_domain(db, q, relation)) + list(rows))
    for t in candidates:
        cnt = rows.get(t, 0)
        for delta in (1, -1):
            if cnt + delta < 0:
                continue
            new = dict(rows)
            new[t] = cnt + delta
            items = [(v, c) for v, c in new.items() if c > 0]
            yield db.with_relation(canonicalize(relation, schema, items, db.vdict))


def truncation_violations(db: Database, q: ConjunctiveQuery, relation: str, taus) -> list[tuple]:
    base = analyze(db, q)
    before = {tau: truncated_count(base.bound, base.tables, relation, tau) for tau in taus}
    bad = []
    for nb in one_copy_neighbours(db, q, relation):
        a = analyze(nb, q)
        for tau in taus:
            after = truncated_count(a.bound, a.tables, relation, tau)
            if abs(after - before[tau]) > tau:
                bad.append((tau, before[tau], after))
    return bad
