"""Ground truth by brute force, and the 3SAT hardness construction.

Nothing here touches the join/group-by operators of the engine.  Joins are
evaluated by backtracking over plain string rows, and local sensitivity is
found by literally inserting (and deleting one copy of) every candidate
tuple and re-counting the join.  Candidate insertions come from the
representative domain: per attribute, the values present in every other
relation that carries it.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass
from typing import Iterator, Mapping, Sequence

from .errors import DataError, OracleGuardExceeded, UnknownRelation
from .query import Atom, ConjunctiveQuery, parse_query
from .relation import MAX_CNT, Database, ValueDict, canonicalize
from .sensitivity import SENTINEL, SensitivityReport, Witness

DEFAULT_GUARD = 10**6

Rows = list[tuple[tuple[str, ...], int]]


def _string_rows(db: Database, q: ConjunctiveQuery) -> dict[str, Rows]:
    out = {}
    for atom in q.atoms:
        if atom.relation not in db:
            raise UnknownRelation(f"no relation named {atom.relation!r}")
        rel = db[atom.relation]
        if rel.arity != len(atom.attrs):
            raise DataError(f"atom {atom.relation} has arity {len(atom.attrs)}, relation has {rel.arity}")
        out[atom.relation] = [(db.decode(k), c) for k, c in rel.rows.items()]
    return out


def _atom_order(q: ConjunctiveQuery) -> list[Atom]:
    """Greedy order so each atom shares as many variables as possible with earlier ones."""
    remaining = list(q.atoms)
    order = [remaining.pop(0)]
    bound = set(order[0].attrs)
    while remaining:
        nxt = max(remaining, key=lambda a: len(bound & set(a.attrs)))
        remaining.remove(nxt)
        order.append(nxt)
        bound |= set(nxt.attrs)
    return order


def count_join(q: ConjunctiveQuery, rows: Mapping[str, Rows], order: Sequence[Atom] | None = None) -> int:
    """Bag join size by backtracking; each row contributes its count multiplicatively."""
    order = list(order) if order is not None else _atom_order(q)
    filtered = [[(v, c) for v, c in rows[a.relation] if a.accepts(v)] for a in order]

    def rec(depth: int, binding: dict) -> int:
        if depth == len(order):
            return 1
        atom = order[depth]
        total = 0
        for values, cnt in filtered[depth]:
            added = []
            ok = True
            for attr, val in zip(atom.attrs, values):
                cur = binding.get(attr)
                if cur is None:
                    binding[attr] = val
                    added.append(attr)
                elif cur != val:
                    ok = False
                    break
            if ok:
                sub = rec(depth + 1, binding)
                if sub:
                    total += cnt * sub
            for attr in added:
                del binding[attr]
        return total

    result = rec(0, {})
    if result > MAX_CNT:
        raise DataError("join size exceeds the 128-bit limit")
    return result


def naive_join_count(db: Database, q: ConjunctiveQuery) -> int:
    return count_join(q, _string_rows(db, q))


@dataclass(frozen=True)
class RepresentativeDomain:
    relation: str
    attrs: tuple[str, ...]
    values: tuple[tuple[str, ...], ...]  # per attribute, in attrs order

    def size(self) -> int:
        n = 1
        for v in self.values:
            n *= len(v)
        return n

    def __iter__(self) -> Iterator[tuple[str, ...]]:
        return itertools.product(*self.values)


def _id_order(vdict: ValueDict):
    def key(value: str):
        vid = vdict.lookup(value)
        return (0, vid, "") if vid is not None else (1, 0, value)

    return key


def representative_domain(db: Database, q: ConjunctiveQuery, relation: str) -> RepresentativeDomain:
    """Per-attribute candidate values for insertions into ``relation``.

    A shared attribute gets the intersection of its active domains in the
    other relations holding it.  An attribute found nowhere else gets one
    value: the smallest active value passing the atom's predicates, else an
    equality literal, else the sentinel.
    """
    atom = q.atom(relation)
    rows = _string_rows(db, q)
    order = _id_order(db.vdict)
    per_attr = []
    for pos, attr in enumerate(atom.attrs):
        others = [o for o in q.atoms if o.relation != relation and attr in o.attrs]
        if others:
            dom = None
            for o in others:
                opos = o.attrs.index(attr)
                active = {v[opos] for v, _ in rows[o.relation]}
                dom = active if dom is None else dom & active
            per_attr.append(tuple(sorted(dom, key=order)))
            continue
        preds = atom.selections_on(attr)
        active = sorted({v[pos] for v, _ in rows[relation]}, key=order)
        ok = [v for v in active if all(s.holds(v) for s in preds)]
        if ok:
            per_attr.append((ok[0],))
            continue
        eqs = [s.literal for s in preds if s.op == "="]
        if eqs:
            per_attr.append((eqs[0],))
            continue
        value = SENTINEL
        while any(not s.holds(value) for s in preds):
            value += SENTINEL
        per_attr.append((value,))
    return RepresentativeDomain(relation, atom.attrs, tuple(per_attr))


def tuple_sensitivities(
    db: Database, q: ConjunctiveQuery, guard: int = DEFAULT_GUARD
) -> dict[str, dict[tuple[str, ...], int]]:
    """TSens of every representative-domain tuple and every existing tuple, per relation.

    Each value is max(upward change, downward change) obtained by actually
    inserting one copy, or deleting one existing copy, and re-counting.
    """
    rows = _string_rows(db, q)
    order = _atom_order(q)
    base = count_join(q, rows, order)
    out: dict[str, dict[tuple[str, ...], int]] = {}
    for atom in q.atoms:
        r = atom.relation
        dom = representative_domain(db, q, r)
        if dom.size() > guard:
            raise OracleGuardExceeded(f"representative domain of {r} has {dom.size()} tuples (guard {guard})")
        existing = {v: c for v, c in rows[r]}
        candidates = dict.fromkeys(itertools.chain(dom, existing))
        sens = {}
        for t in candidates:
            cnt = existing.get(t, 0)
            up_rows = dict(rows)
            up_rows[r] = [(v, c) for v, c in rows[r] if v != t] + [(t, cnt + 1)]
            up = count_join(q, up_rows, order) - base
            down = 0
            if cnt:
                down_rows = dict(rows)
                down_rows[r] = [(v, c) for v, c in rows[r] if v != t] + ([(t, cnt - 1)] if cnt > 1 else [])
                down = base - count_join(q, down_rows, order)
            sens[t] = max(abs(up), abs(down))
        out[r] = sens
    return out


def brute_force_ls(db: Database, q: ConjunctiveQuery, guard: int = DEFAULT_GUARD) -> SensitivityReport:
    """Local sensitivity by exhaustive insertion/deletion.

    Ties go to the smallest (relation name, value-id tuple), matching the
    engine; values unknown to the dictionary sort after known ones.
    """
    sens = tuple_sensitivities(db, q, guard)
    order = _id_order(db.vdict)
    per_relation = []
    ranked = []
    for atom in q.atoms:
        r = atom.relation
        best = None
        for t, s in sens[r].items():
            if s <= 0:
                continue
            rank = (-s, [order(v) for v in t])
            if best is None or rank < best[0]:
                best = (rank, t, s)
        if best is None:
            per_relation.append((r, None))
        else:
            w = Witness(r, best[1], best[2])
            per_relation.append((r, w))
            ranked.append(((best[0][0], r, best[0][1]), w))
    witness = min(ranked, key=lambda x: x[0])[1] if ranked else None
    return SensitivityReport(
        ls=witness.tsens if witness else 0,
        witness=witness,
        per_relation=tuple(per_relation),
        join_size=naive_join_count(db, q),
        stats={"candidates": {r: len(s) for r, s in sens.items()}},
    )


# -- 3SAT ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Cnf3:
    num_vars: int
    clauses: tuple[tuple[int, int, int], ...]

    def __post_init__(self):
        if self.num_vars < 1 or not self.clauses:
            raise DataError("a 3CNF formula needs at least one variable and one clause")
        for c in self.clauses:
            if len(c) != 3 or any(lit == 0 or abs(lit) > self.num_vars for lit in c):
                raise DataError(f"bad clause {c}")

    def evaluate(self, assignment: Sequence[bool]) -> bool:
        return all(any(assignment[abs(l) - 1] == (l > 0) for l in c) for c in self.clauses)


def parse_dimacs(text: str) -> Cnf3:
    """Read ``p cnf V C`` followed by zero-terminated clause lines of 3 literals."""
    header = None
    lits: list[int] = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith(("c", "%")):
            continue
        if line.startswith("p"):
            parts = line.split()
            if len(parts) != 4 or parts[1] != "cnf":
                raise DataError(f"line {lineno}: bad header {line!r}")
            header = (int(parts[2]), int(parts[3]))
            continue
        if header is None:
            raise DataError(f"line {lineno}: clause before 'p cnf' header")
        try:
            lits.extend(int(x) for x in line.split())
        except ValueError:
            raise DataError(f"line {lineno}: non-integer literal") from None
    if header is None:
        raise DataError("missing 'p cnf V C' header")
    clauses, cur = [], []
    for lit in lits:
        if lit == 0:
            if len(cur) != 3:
                raise DataError(f"clause {len(clauses) + 1} has {len(cur)} literals, expected 3")
            clauses.append(tuple(cur))
            cur = []
        else:
            cur.append(lit)
    if cur:
        raise DataError("last clause is not terminated by 0")
    if len(clauses) != header[1]:
        raise DataError(f"header announces {header[1]} clauses, found {len(clauses)}")
    return Cnf3(header[0], tuple(clauses))


def format_dimacs(f: Cnf3) -> str:
    lines = [f"p cnf {f.num_vars} {len(f.clauses)}"]
    lines += [" ".join(str(l) for l in c) + " 0" for c in f.clauses]
    return "\n".join(lines) + "\n"


def random_cnf3(rng: random.Random, max_vars: int = 8, max_clauses: int = 12) -> Cnf3:
    n = rng.randint(1, max_vars)
    s = rng.randint(1, max_clauses)
    clauses = tuple(
        tuple(rng.choice((1, -1)) * rng.randint(1, n) for _ in range(3)) for _ in range(s)
    )
    return Cnf3(n, clauses)


def is_satisfiable(f: Cnf3) -> bool:
    if f.num_vars > 20:
        raise DataError("exhaustive satisfiability check is limited to 20 variables")
    return any(f.evaluate(bits) for bits in itertools.product((False, True), repeat=f.num_vars))


def reduce_3sat(f: Cnf3) -> tuple[Database, ConjunctiveQuery]:
    """Database and acyclic query whose local sensitivity is positive iff ``f`` is satisfiable.

    R0 holds every variable and is empty; clause relation Ri holds the
    satisfying Boolean assignments of its distinct variables.
    """
    vdict = ValueDict(["0", "1"])
    variables = [f"X{j}" for j in range(1, f.num_vars + 1)]
    rels = {"R0": canonicalize("R0", variables, [], vdict)}
    atoms = [f"R0({','.join(variables)})"]
    for i, clause in enumerate(f.clauses, 1):
        vars_ = sorted({abs(l) for l in clause})
        schema = [f"X{v}" for v in vars_]
        rows = []
        for bits in itertools.product((0, 1), repeat=len(vars_)):
            value = dict(zip(vars_, bits))
            if any(value[abs(l)] == (1 if l > 0 else 0) for l in clause):
                rows.append(tuple(str(b) for b in bits))
        rels[f"R{i}"] = canonicalize(f"R{i}", schema, rows, vdict)
        atoms.append(f"R{i}({','.join(schema)})")
    q = parse_query(f"Q({','.join(variables)}) :- {', '.join(atoms)}.")
    return Database(rels, vdict), q
