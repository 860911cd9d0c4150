"""Seeded random instances for property tests and benchmarks."""

from __future__ import annotations

import random
from dataclasses import dataclass

from .query import ConjunctiveQuery, parse_query
from .relation import Database, ValueDict


@dataclass(frozen=True)
class Instance:
    db: Database
    query: ConjunctiveQuery
    ghd: list[dict] | None = None
    family: str = "acyclic"


def _fill(rng: random.Random, q: ConjunctiveQuery, max_rows: int, max_dom: int, max_cnt: int) -> Database:
    dom = {a: rng.randint(1, max_dom) for a in q.attributes}
    spec = {}
    for atom in q.atoms:
        space = 1
        for a in atom.attrs:
            space *= dom[a]
        n = rng.randint(0, min(max_rows, space))
        rows: dict[tuple, int] = {}
        while len(rows) < n:
            t = tuple(f"{a.lower()}{rng.randrange(dom[a])}" for a in atom.attrs)
            rows.setdefault(t, rng.randint(1, max_cnt))
        spec[atom.relation] = (atom.attrs, [(t, c) for t, c in rows.items()])
    return Database.from_rows(spec, ValueDict())


def _names():
    i = 0
    while True:
        yield "A" if i == 0 else chr(ord("A") + i % 26) + ("" if i < 26 else str(i // 26))
        i += 1


def random_acyclic_query(rng: random.Random, max_atoms: int = 4, exclusive: float = 0.4) -> ConjunctiveQuery:
    """Random join tree; at most two attributes shared along each edge."""
    m = rng.randint(1, max_atoms)
    fresh = _names()
    attrs: list[list[str]] = []
    for i in range(m):
        own: list[str] = []
        if i > 0:
            parent = rng.randrange(i)
            s = rng.randint(1, 2)
            reuse = [a for a in attrs[parent] if rng.random() < 0.3][:s]
            own.extend(reuse)
            while len(own) < s:
                a = next(fresh)
                own.append(a)
                attrs[parent].append(a)
        if i == 0 or rng.random() < exclusive:
            own.append(next(fresh))
        attrs.append(own)
    names = [f"R{i + 1}" for i in range(m)]
    rng.shuffle(names)
    atoms = []
    for name, a in zip(names, attrs):
        a = list(a)
        rng.shuffle(a)
        atoms.append(f"{name}({','.join(a)})")
    return parse_query(f"Q :- {', '.join(atoms)}.")


def random_acyclic(
    rng: random.Random, max_atoms: int = 4, max_rows: int = 6, max_dom: int = 4, max_cnt: int = 3
) -> Instance:
    q = random_acyclic_query(rng, max_atoms)
    return Instance(_fill(rng, q, max_rows, max_dom, max_cnt), q)


def random_path(
    rng: random.Random, max_atoms: int = 5, max_rows: int = 6, max_dom: int = 4, max_cnt: int = 3
) -> Instance:
    m = rng.randint(2, max_atoms)
    fresh = _names()
    links = [[next(fresh) for _ in range(rng.randint(1, 2))] for _ in range(m - 1)]
    atoms = []
    for i in range(m):
        a = (links[i - 1] if i > 0 else []) + (links[i] if i < m - 1 else [])
        if i in (0, m - 1) or rng.random() < 0.3:
            a = a + [next(fresh)]
        rng.shuffle(a)
        atoms.append(f"R{i + 1}({','.join(a)})")
    q = parse_query(f"Q :- {', '.join(atoms)}.")
    return Instance(_fill(rng, q, max_rows, max_dom, max_cnt), q, family="path")


CYCLIC_FAMILIES = {
    "triangle": (
        "Qt :- R1(A,B), R2(B,C), R3(C,A).",
        [
            [{"atoms": ["R1", "R2", "R3"], "parent": None}],
            [{"atoms": ["R1", "R2"], "parent": None}, {"atoms": ["R3"], "parent": 0}],
            [{"atoms": ["R2", "R3"], "parent": None}, {"atoms": ["R1"], "parent": 0}],
        ],
    ),
    "4-cycle": (
        "Qs :- R1(A,B), R2(B,C), R3(C,D), R4(D,A).",
        [
            [{"atoms": ["R1", "R2"], "parent": None}, {"atoms": ["R3", "R4"], "parent": 0}],
            [{"atoms": ["R2", "R3"], "parent": None}, {"atoms": ["R4", "R1"], "parent": 0}],
            [{"atoms": ["R1", "R2", "R3", "R4"], "parent": None}],
        ],
    ),
    "star": (
        "Qy :- R1(A,B,C), R2(A,B), R3(B,C), R4(C,A).",
        [
            [
                {"atoms": ["R1"], "parent": None},
                {"atoms": ["R2"], "parent": 0},
                {"atoms": ["R3"], "parent": 0},
                {"atoms": ["R4"], "parent": 0},
            ],
            [{"atoms": ["R1"], "parent": None}, {"atoms": ["R2", "R3", "R4"], "parent": 0}],
            [{"atoms": ["R2", "R3", "R4"], "parent": None}, {"atoms": ["R1"], "parent": 0}],
        ],
    ),
}


def random_cyclic(
    rng: random.Random, family: str | None = None, max_rows: int = 6, max_dom: int = 4, max_cnt: int = 3
) -> Instance:
    family = family or rng.choice(sorted(CYCLIC_FAMILIES))
    text, ghds = CYCLIC_FAMILIES[family]
    q = parse_query(text)
    return Instance(_fill(rng, q, max_rows, max_dom, max_cnt), q, rng.choice(ghds), family)


def chain_database(m: int, n: int, seed: int = 0, domain: int | None = None) -> tuple[Database, ConjunctiveQuery]:
    """Path query over m binary relations of n random rows each."""
    rng = random.Random(seed)
    domain = domain or max(1, n // 4)
    attrs = [f"A{i}" for i in range(m + 1)]
    spec = {}
    for i in range(1, m + 1):
        rows = [(f"v{rng.randrange(domain)}", f"v{rng.randrange(domain)}") for _ in range(n)]
        spec[f"R{i}"] = ((attrs[i - 1], attrs[i]), rows)
    q = parse_query(
        "Qpath :- " + ", ".join(f"R{i}({attrs[i - 1]},{attrs[i]})" for i in range(1, m + 1)) + "."
    )
    return Database.from_rows(spec), q
