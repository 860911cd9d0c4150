"""Local and per-tuple sensitivity of counting conjunctive queries.

The engine makes two passes over a join tree.  The bottom-up pass builds
botjoins (multiplicities of the subtree below each node, grouped on the
attributes shared with the parent); the top-down pass builds topjoins (the
same for the complement of the subtree).  Joining a node's topjoin with its
children's botjoins and grouping on the attributes of an atom gives that
atom's multiplicity table: for every tuple that can join with the rest of
the query, the number of output rows it takes part in.  That number is the
tuple's sensitivity under both insertion and one-copy deletion.

Plain acyclic queries use one atom per node (the GYO join tree); cyclic
queries run over a generalized hypertree decomposition, where the atoms
sharing a node ("cohorts") are joined into the multiplicity table as well.
"""

from __future__ import annotations

import os
import time
from dataclasses import dataclass, field
from operator import itemgetter
from typing import Mapping, Sequence

import numpy as np

from .errors import CyclicQuery, DataError, UnknownRelation
from .query import (
    Atom,
    ConjunctiveQuery,
    Cyclic,
    JoinTree,
    gyo_decompose,
    path_order,
    single_node_ghd,
    validate_ghd,
)
from .relation import Database, Key, Relation, ValueDict, check_cnt, cnt_join, groupby_sum, join_sum

DEFAULT_MAX_ROWS = 50_000_000
SENTINEL = "*"


def memory_budget() -> int:
    """Row limit for intermediate relations (``TSENS_MEM_ROWS`` overrides)."""
    raw = os.environ.get("TSENS_MEM_ROWS")
    if raw:
        try:
            value = int(raw)
        except ValueError:
            raise DataError(f"TSENS_MEM_ROWS must be an integer, got {raw!r}") from None
        if value < 1:
            raise DataError("TSENS_MEM_ROWS must be positive")
        return value
    return DEFAULT_MAX_ROWS


@dataclass(frozen=True)
class MultiplicityTable:
    """Tuple sensitivities of one atom, keyed on its non-exclusive attributes."""

    relation: str
    schema: tuple[str, ...]
    rows: Mapping[Key, int]
    atom: Atom = field(compare=False)
    vdict: ValueDict = field(compare=False, repr=False)
    # False when the exclusive attributes admit no value (contradictory predicates)
    satisfiable: bool = True

    def __len__(self) -> int:
        return len(self.rows)

    def best(self) -> tuple[Key, int] | None:
        """Largest entry; ties go to the smallest key."""
        if not self.satisfiable or not self.rows:
            return None
        top = max(self.rows.values())
        return min(k for k, c in self.rows.items() if c == top), top


@dataclass(frozen=True)
class Witness:
    relation: str
    values: tuple[str, ...]
    tsens: int


@dataclass(frozen=True)
class SensitivityReport:
    ls: int
    witness: Witness | None
    per_relation: tuple[tuple[str, Witness | None], ...]
    join_size: int
    stats: Mapping = field(default_factory=dict, compare=False)
    timings_ms: Mapping[str, float] = field(default_factory=dict, compare=False)

    def per_relation_tsens(self) -> dict[str, int]:
        return {r: (w.tsens if w else 0) for r, w in self.per_relation}


@dataclass
class PassTables:
    """Botjoins and topjoins per tree node; the root has no topjoin."""

    bot: dict[int, Relation] = field(default_factory=dict)
    top: dict[int, Relation] = field(default_factory=dict)
    node_rel: list[Relation] = field(default_factory=list)


# -- selections --------------------------------------------------------------


def apply_selections(db: Database, q: ConjunctiveQuery) -> Database:
    """Bind each atom to its relation and drop rows failing the atom's predicates.

    Columns are renamed to the atom's attribute names (positional binding),
    so every relation in the result has ``schema == atom.attrs``.
    """
    rels = {}
    for atom in q.atoms:
        if atom.relation not in db:
            raise UnknownRelation(f"query references relation {atom.relation!r} which is not in the database")
        rel = db[atom.relation]
        if rel.arity != len(atom.attrs):
            raise DataError(
                f"atom {atom.relation}{atom.attrs} has arity {len(atom.attrs)} but the relation has {rel.arity} columns"
            )
        if rel.schema != atom.attrs:
            rel = rel.renamed(schema=atom.attrs)
        if atom.selections:
            rel = rel.filter(_predicate(atom, atom.attrs, db.vdict))
        rels[atom.relation] = rel
    return Database(rels, db.vdict)


def _predicate(atom: Atom, attrs: Sequence[str], vdict: ValueDict):
    """Key filter for the atom's predicates restricted to ``attrs``."""
    checks = []
    for s in atom.selections:
        if s.attr not in attrs:
            continue
        pos = attrs.index(s.attr)
        lit = vdict.lookup(s.literal)
        checks.append((pos, s.op == "=", lit))

    def keep(key) -> bool:
        for pos, eq, lit in checks:
            if (key[pos] == lit) != eq:
                return False
        return True

    return keep


# -- two passes ----------------------------------------------------------------


def _truncate_topk(rel: Relation, k: int | None) -> Relation:
    """Keep the k largest counts; every other key gets the k-th largest count."""
    if k is None or len(rel) <= k:
        return rel
    ranked = sorted(rel.rows.items(), key=lambda kv: (-kv[1], kv[0]))
    kth = ranked[k - 1][1]
    rows = dict(ranked[:k])
    for key, _ in ranked[k:]:
        rows[key] = kth
    return Relation(rel.name, rel.schema, rows)


def node_relations(db: Database, t: JoinTree, max_rows: int | None = None) -> list[Relation]:
    out = []
    for i, nd in enumerate(t.nodes):
        rel = db[nd.atoms[0]]
        for other in nd.atoms[1:]:
            rel = cnt_join(rel, db[other], max_rows=max_rows)
        out.append(rel.renamed(name=f"node{i}"))
    return out


def compute_botjoins(
    db: Database, t: JoinTree, max_rows: int | None = None, topk: int | None = None
) -> PassTables:
    """Bottom-up pass: botjoin of every node, leaves first."""
    passes = PassTables(node_rel=node_relations(db, t, max_rows))
    for i in t.postorder():
        rel = passes.node_rel[i]
        for c in t.children(i):
            rel = cnt_join(rel, passes.bot[c], max_rows=max_rows)
        if i == t.root:
            passes.bot[i] = groupby_sum(rel, t.nodes[i].attrs, name=f"bot{i}")
        else:
            passes.bot[i] = _truncate_topk(groupby_sum(rel, t.shared(i), name=f"bot{i}"), topk)
    return passes


def compute_topjoins(
    db: Database, t: JoinTree, bot: PassTables, max_rows: int | None = None, topk: int | None = None
) -> PassTables:
    """Top-down pass: topjoin of every non-root node, from the root down."""
    for i in t.preorder():
        p = t.nodes[i].parent
        if p is None:
            continue
        rel = bot.node_rel[p]
        if p != t.root:
            rel = cnt_join(rel, bot.top[p], max_rows=max_rows)
        for s in t.siblings(i):
            rel = cnt_join(rel, bot.bot[s], max_rows=max_rows)
        bot.top[i] = _truncate_topk(groupby_sum(rel, t.shared(i), name=f"top{i}"), topk)
    return bot


def _exclusive_ok(atom: Atom, exclusive: Sequence[str]) -> bool:
    """Whether some value assignment of the exclusive attributes passes the predicates."""
    for a in exclusive:
        eqs = {s.literal for s in atom.selections_on(a) if s.op == "="}
        neqs = {s.literal for s in atom.selections_on(a) if s.op == "!="}
        if len(eqs) > 1 or eqs & neqs:
            return False
    return True


def compute_multiplicity_tables(
    db: Database,
    q: ConjunctiveQuery,
    t: JoinTree,
    passes: PassTables,
    factor: int = 1,
    max_rows: int | None = None,
) -> list[MultiplicityTable]:
    """One table per atom, scaled by ``factor`` (join size of other components)."""
    tables = []
    for i in range(len(t.nodes)):
        context: list[Relation] = []
        if i != t.root:
            context.append(passes.top[i])
        context.extend(passes.bot[c] for c in t.children(i))
        for r in t.nodes[i].atoms:
            atom = q.atom(r)
            key = q.key_attrs(r)
            parts = context + [db[c] for c in sorted(t.nodes[i].atoms) if c != r]
            if parts:
                rel = parts[0]
                for part in parts[1:]:
                    rel = cnt_join(rel, part, max_rows=max_rows)
                missing = [a for a in key if a not in rel.schema]
                if missing:
                    raise DataError(f"decomposition does not connect attribute(s) {missing} of {r}")
                rel = groupby_sum(rel, key, name=f"T[{r}]")
            else:
                rel = Relation(f"T[{r}]", (), {(): 1})
            keep = _predicate(atom, key, db.vdict)
            rows = {}
            for k, c in rel.rows.items():
                if keep(k):
                    c = check_cnt(c * factor)
                    if c:
                        rows[k] = c
            tables.append(
                MultiplicityTable(r, key, rows, atom, db.vdict, _exclusive_ok(atom, q.exclusive_attrs(r)))
            )
    return tables


# -- witnesses ---------------------------------------------------------------------


def _fresh_value(atom: Atom, attr: str) -> str:
    eqs = [s.literal for s in atom.selections_on(attr) if s.op == "="]
    if eqs:
        return eqs[0]
    banned = {s.literal for s in atom.selections_on(attr)}
    value = SENTINEL
    while value in banned:
        value += SENTINEL
    return value


def complete_tuple(db: Database, atom: Atom, key_attrs: Sequence[str], key: Key) -> tuple[str, ...]:
    """Fill in the attributes of ``atom`` that appear nowhere else.

    ``db`` is the input database, before selections.  If rows of the
    relation that pass the atom's predicates agree with ``key``, the smallest
    of them (by value ids) is the witness: deleting a copy changes the count
    as much as inserting one.  Otherwise each free attribute takes its
    smallest active value passing the predicates on it, an equality literal,
    or the sentinel ``*``.
    """
    if len(key_attrs) == len(atom.attrs):
        return tuple(db.vdict.resolve(key[key_attrs.index(a)]) for a in atom.attrs)
    rel = db[atom.relation]
    kpos = [atom.attrs.index(a) for a in key_attrs]
    # rows are stored in sorted key order, so the first match is the smallest
    if rel.columns is not None:
        hits = np.flatnonzero((rel.columns.keys[:, kpos] == np.asarray(key, dtype=np.int64)).all(axis=1))
        candidates = (tuple(int(v) for v in rel.columns.keys[h]) for h in hits)
    else:
        project = itemgetter(*kpos) if kpos else (lambda _: ())
        want = key[0] if len(kpos) == 1 else tuple(key)
        candidates = (row for row in rel.rows if project(row) == want)
    for row in candidates:
        values = db.decode(row)
        if atom.accepts(values):
            return values
    values: list[str] = []
    for pos, a in enumerate(atom.attrs):
        if a in key_attrs:
            values.append(db.vdict.resolve(key[key_attrs.index(a)]))
            continue
        preds = atom.selections_on(a)
        if not preds and rel.columns is not None:
            ok = [int(rel.columns.keys[:, pos].min())] if len(rel) else []
        else:
            active = {row[pos] for row in rel.rows}
            ok = [v for v in active if all(s.holds(db.vdict.resolve(v)) for s in preds)] if preds else active
        values.append(db.vdict.resolve(min(ok)) if ok else _fresh_value(atom, a))
    return tuple(values)


def report_from_tables(
    db: Database,
    q: ConjunctiveQuery,
    tables: Sequence[MultiplicityTable],
    join_size: int,
    stats: Mapping | None = None,
    timings: Mapping | None = None,
) -> SensitivityReport:
    """Pick the most sensitive tuple per relation and overall.

    ``db`` is the input database (before selections); witnesses are
    completed from it.  Ties go to the smallest (relation name, value-id key).
    """
    by_rel = {tb.relation: tb for tb in tables}
    per_relation = []
    ranked = []
    for r in q.relations:
        best = by_rel[r].best()
        if best is None:
            per_relation.append((r, None))
            continue
        key, c = best
        w = Witness(r, complete_tuple(db, q.atom(r), by_rel[r].schema, key), c)
        per_relation.append((r, w))
        ranked.append((-c, r, key, w))
    witness = min(ranked, key=lambda x: x[:3])[3] if ranked else None
    return SensitivityReport(
        ls=witness.tsens if witness else 0,
        witness=witness,
        per_relation=tuple(per_relation),
        join_size=join_size,
        stats=dict(stats or {}),
        timings_ms=dict(timings or {}),
    )


# -- drivers ------------------------------------------------------------------------


@dataclass
class Analysis:
    """Everything computed for one (query, database) pair."""

    bound: Database
    tables: list[MultiplicityTable]
    report: SensitivityReport
    trees: list[JoinTree]


class _Clock:
    def __init__(self):
        self.marks: dict[str, float] = {}

    def phase(self, name: str):
        clock = self

        class _Ctx:
            def __enter__(self):
                self.t0 = time.perf_counter()

            def __exit__(self, *exc):
                clock.marks[name] = clock.marks.get(name, 0.0) + (time.perf_counter() - self.t0) * 1000.0

        return _Ctx()


def _run_tree(bound, q, t, max_rows, topk, clock):
    with clock.phase("botjoin"):
        passes = compute_botjoins(bound, t, max_rows, topk)
    with clock.phase("topjoin"):
        compute_topjoins(bound, t, passes, max_rows, topk)
    size = passes.bot[t.root].total()
    return passes, size


def _table_stats(trees_passes, tables) -> dict:
    stats = {"pass_rows": [], "table_rows": {tb.relation: len(tb) for tb in tables}}
    for t, passes in trees_passes:
        for i, nd in enumerate(t.nodes):
            stats["pass_rows"].append(
                {
                    "node": list(nd.atoms),
                    "bot": len(passes.bot[i]),
                    "top": len(passes.top[i]) if i in passes.top else None,
                }
            )
    return stats


def analyze(
    db: Database,
    q: ConjunctiveQuery,
    ghd: JoinTree | Sequence[Mapping] | None = None,
    topk: int | None = None,
    max_rows: int | None = None,
) -> Analysis:
    """Multiplicity tables and report for any supported query.

    With ``ghd`` the query runs over that decomposition; otherwise each
    connected component is decomposed by GYO (a cyclic component falls back
    to a single-node decomposition).
    """
    if max_rows is None:
        max_rows = memory_budget()
    clock = _Clock()
    with clock.phase("selections"):
        bound = apply_selections(db, q)
    if ghd is not None:
        units = [(q, validate_ghd(q, ghd))]
    else:
        units = []
        for comp in q.components():
            sub = q.subquery(comp)
            t = gyo_decompose(sub)
            units.append((sub, single_node_ghd(sub) if isinstance(t, Cyclic) else t))
    runs = [(sub, t, *_run_tree(bound, sub, t, max_rows, topk, clock)) for sub, t in units]
    total = 1
    for *_, size in runs:
        total *= size
    tables: list[MultiplicityTable] = []
    with clock.phase("tables"):
        for idx, (sub, t, passes, _) in enumerate(runs):
            factor = 1
            for j, (*_, size) in enumerate(runs):
                if j != idx:
                    factor *= size
            tables.extend(compute_multiplicity_tables(bound, sub, t, passes, check_cnt(factor), max_rows))
    order = {r: i for i, r in enumerate(q.relations)}
    tables.sort(key=lambda tb: order[tb.relation])
    with clock.phase("select"):
        stats = _table_stats([(t, p) for _, t, p, _ in runs], tables)
        stats["components"] = len(runs)
        stats["width"] = max(t.width for _, t, _, _ in runs)
        report = report_from_tables(db, q, tables, check_cnt(total), stats)
    report = SensitivityReport(
        report.ls, report.witness, report.per_relation, report.join_size, report.stats, dict(clock.marks)
    )
    return Analysis(bound, tables, report, [t for _, t, _, _ in runs])


def ls_acyclic(db: Database, q: ConjunctiveQuery, max_rows: int | None = None) -> SensitivityReport:
    for comp in q.components():
        if isinstance(gyo_decompose(q.subquery(comp)), Cyclic):
            raise CyclicQuery(f"query {q.name} is cyclic; supply a decomposition and use ls_general")
    return analyze(db, q, max_rows=max_rows).report


def ls_general(
    db: Database,
    q: ConjunctiveQuery,
    ghd: JoinTree | Sequence[Mapping] | None = None,
    max_rows: int | None = None,
) -> SensitivityReport:
    """Sensitivity over a generalized hypertree decomposition (single node if omitted)."""
    return analyze(db, q, ghd if ghd is not None else single_node_ghd(q), max_rows=max_rows).report


def topk_bound(
    db: Database,
    q: ConjunctiveQuery,
    k: int,
    ghd: JoinTree | Sequence[Mapping] | None = None,
    max_rows: int | None = None,
) -> SensitivityReport:
    """Upper bound on the local sensitivity keeping only k frequencies per pass table."""
    if k < 1:
        raise DataError("k must be at least 1")
    return analyze(db, q, ghd, topk=k, max_rows=max_rows).report


def multiplicity_tables(db: Database, q: ConjunctiveQuery, ghd=None) -> list[MultiplicityTable]:
    return analyze(db, q, ghd).tables


def tuple_sensitivity(tables: Sequence[MultiplicityTable], relation: str, t: Sequence[str]) -> int:
    """Sensitivity of one copy of ``t`` (full value tuple of ``relation``)."""
    for tb in tables:
        if tb.relation == relation:
            break
    else:
        raise UnknownRelation(f"no multiplicity table for {relation!r}")
    atom = tb.atom
    if len(t) != len(atom.attrs):
        raise DataError(f"{relation} expects {len(atom.attrs)} values, got {len(t)}")
    t = tuple(str(v) for v in t)
    if not tb.satisfiable or not atom.accepts(t):
        return 0
    values = [t[atom.attrs.index(a)] for a in tb.schema]
    ids = []
    for v in values:
        vid = tb.vdict.lookup(v)
        if vid is None:
            return 0
        ids.append(vid)
    return tb.rows.get(tuple(ids), 0)


# -- path queries -------------------------------------------------------------------

# float64 holds every integer below 2**53 exactly; past that the dict passes take over
_EXACT = float(1 << 53)


class _Inexact(Exception):
    pass


@dataclass(frozen=True)
class _Side:
    """One pass table seen from a relation: counts keyed on a link's attributes."""

    schema: tuple[str, ...]
    size: int
    rel: Relation | None = None  # dict passes
    counts: object = None  # columnar passes: float vector indexed by link code
    decode: object = None  # code -> value ids (None when the code is the id itself)

    def best(self, atom: Atom, key_attrs: Sequence[str], vdict: ValueDict) -> tuple[int, Key] | None:
        """Largest count and its smallest key (in the atom's attribute order), or None."""
        pos = [self.schema.index(a) for a in key_attrs if a in self.schema]
        if self.rel is not None:
            side = self.rel.filter(_predicate(atom, self.schema, vdict)) if atom.selections else self.rel
            if not side.rows:
                return None
            hi = max(side.rows.values())
            keys = [k for k, c in side.rows.items() if c == hi]
            return hi, min(keys, key=lambda k: tuple(k[p] for p in pos))
        hi = self.counts.max(initial=0)
        if hi == 0:
            return None
        codes = np.flatnonzero(self.counts == hi)
        ids = codes[:, None] if self.decode is None else self.decode[codes]
        first = np.lexsort([ids[:, p] for p in reversed(pos)])[0]
        return int(hi), tuple(int(v) for v in ids[first])


def _dict_passes(rels: list[Relation], link: list) -> tuple[dict, dict, int]:
    m = len(rels)
    top: dict[int, Relation] = {}
    bot: dict[int, Relation] = {}
    for i in range(1, m):
        if i == 1:
            top[i] = groupby_sum(rels[0], link[i], name=f"top{i}")
        else:
            top[i] = join_sum(top[i - 1], rels[i - 1], link[i], name=f"top{i}")
    for i in range(m - 1, 0, -1):
        if i == m - 1:
            bot[i] = groupby_sum(rels[m - 1], link[i], name=f"bot{i}")
        else:
            bot[i] = join_sum(bot[i + 1], rels[i], link[i], name=f"bot{i}")
    join_size = rels[0].total() if m == 1 else join_sum(bot[1], rels[0], ()).total()

    def side(r: Relation) -> _Side:
        return _Side(r.schema, len(r), rel=r)

    return {i: side(r) for i, r in top.items()}, {i: side(r) for i, r in bot.items()}, join_size


def _columnar_passes(rels: list[Relation], link: list, n_values: int) -> tuple[dict, dict, int] | None:
    """The same passes as vector operations over the relations' columns.

    Returns None when a relation has no columns or a count would reach 2**53.
    """
    m = len(rels)
    if m < 2 or any(r.columns is None or r.columns.cnt is None for r in rels):
        return None
    cnt = [r.columns.cnt.astype(np.float64) for r in rels]
    # codes[i] = (code per row of rels[i-1], code per row of rels[i], decode table, number of codes)
    codes = {}
    for i in range(1, m):
        left = rels[i - 1].columns.keys[:, list(rels[i - 1].positions(link[i]))]
        right = rels[i].columns.keys[:, list(rels[i].positions(link[i]))]
        if len(link[i]) == 1:
            codes[i] = (left[:, 0], right[:, 0], None, n_values)
        else:
            uniq, inv = np.unique(np.concatenate([left, right]), axis=0, return_inverse=True)
            inv = inv.reshape(-1)
            codes[i] = (inv[: len(left)], inv[len(left) :], uniq, len(uniq))

    def exact(v: np.ndarray) -> np.ndarray:
        if v.size and v.max() >= _EXACT:
            raise _Inexact
        return v

    def group(idx, weights, size) -> np.ndarray:
        return exact(np.bincount(idx, weights=exact(weights), minlength=size))

    try:
        top: dict[int, np.ndarray] = {1: group(codes[1][0], cnt[0], codes[1][3])}
        for i in range(2, m):
            top[i] = group(codes[i][0], top[i - 1][codes[i - 1][1]] * cnt[i - 1], codes[i][3])
        bot: dict[int, np.ndarray] = {m - 1: group(codes[m - 1][1], cnt[m - 1], codes[m - 1][3])}
        for i in range(m - 2, 0, -1):
            bot[i] = group(codes[i][1], bot[i + 1][codes[i + 1][0]] * cnt[i], codes[i][3])
        paths = exact(bot[1][codes[1][0]] * cnt[0])
    except _Inexact:
        return None
    exact_paths = paths.astype(np.int64)
    if paths.sum() < 2.0**62:
        join_size = int(exact_paths.sum())
    else:
        join_size = sum(exact_paths.tolist())

    def side(i: int, v: np.ndarray) -> _Side:
        return _Side(tuple(link[i]), int(np.count_nonzero(v)), counts=v, decode=codes[i][2])

    return {i: side(i, v) for i, v in top.items()}, {i: side(i, v) for i, v in bot.items()}, join_size


def ls_path(db: Database, q: ConjunctiveQuery, max_rows: int | None = None) -> SensitivityReport:
    """Two linear passes along the chain R1 - R2 - ... - Rm.

    The sensitivity of a tuple of R_i is the number of incoming paths at its
    left attributes times the number of outgoing paths at its right
    attributes, so the best tuple of each relation combines the argmax of
    its topjoin with the argmax of its right neighbour's botjoin.

    Each pass step aggregates while joining, so no intermediate is larger
    than its input; ``max_rows`` is accepted for symmetry with the tree
    algorithm and never binds.  Relations loaded with columns run the
    passes vectorized; selections or very large counts use dictionaries.
    """
    clock = _Clock()
    order = path_order(q)
    with clock.phase("selections"):
        bound = apply_selections(db, q)
    rels = [bound[r] for r in order]
    m = len(rels)
    link = [None] + [
        q.order_attrs(set(rels[i - 1].schema) & set(rels[i].schema)) for i in range(1, m)
    ]  # link[i]: attributes shared by rels[i-1] and rels[i]
    with clock.phase("passes"):
        passes = _columnar_passes(rels, link, len(bound.vdict)) or _dict_passes(rels, link)
    top, bot, join_size = passes

    tables = []
    with clock.phase("select"):
        for i, r in enumerate(order):
            atom = q.atom(r)
            key_attrs = q.key_attrs(r)
            sides = ([top[i]] if i > 0 else []) + ([bot[i + 1]] if i < m - 1 else [])
            best_vals: dict[str, int] = {}
            tsens = 1
            for side in sides:
                found = side.best(atom, key_attrs, bound.vdict)
                if found is None:
                    tsens = 0
                    break
                hi, key = found
                best_vals.update(zip(side.schema, key))
                tsens *= hi
            rows = {}
            if tsens:
                rows[tuple(best_vals[a] for a in key_attrs)] = check_cnt(tsens)
            tables.append(
                MultiplicityTable(r, key_attrs, rows, atom, bound.vdict, _exclusive_ok(atom, q.exclusive_attrs(r)))
            )
    stats = {
        "pass_rows": [
            {"node": [r], "bot": bot[i].size if i in bot else None, "top": top[i].size if i in top else None}
            for i, r in enumerate(order)
        ],
        "order": list(order),
    }
    order_index = {r: i for i, r in enumerate(q.relations)}
    tables.sort(key=lambda tb: order_index[tb.relation])
    return report_from_tables(db, q, tables, check_cnt(join_size), stats, clock.marks)
