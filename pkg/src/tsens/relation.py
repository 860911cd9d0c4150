"""Bag-semantics relations with explicit multiplicity counts.

A relation is stored as a map from dictionary-encoded value tuples to a
positive count.  The two operators used everywhere else are the
count-propagating natural join (``cnt_join``) and the count-summing
group-by (``groupby_sum``).  Counts are Python ints, checked against a
128-bit ceiling so that an overflow surfaces as an error instead of a
silently wrong sensitivity.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from operator import itemgetter
from types import MappingProxyType
from typing import Iterable, Iterator, Mapping, Optional, Sequence

import numpy as np

from .errors import ArityError, CountOverflow, MemoryBudgetExceeded, UnknownAttribute, UnknownRelation

MAX_CNT = (1 << 128) - 1

Key = tuple  # tuple[int, ...]


def check_cnt(value: int) -> int:
    if value > MAX_CNT:
        raise CountOverflow(f"count {value} exceeds the 128-bit limit")
    return value


class ValueDict:
    """Interns attribute values (strings) as dense ids in first-seen order."""

    def __init__(self, values: Iterable[str] = ()):
        self._ids: dict[str, int] = {}
        self._values: list[str] = []
        for v in values:
            self.intern(v)

    def intern(self, value: str) -> int:
        value = str(value)
        vid = self._ids.get(value)
        if vid is None:
            vid = len(self._values)
            self._ids[value] = vid
            self._values.append(value)
        return vid

    def lookup(self, value: str) -> int | None:
        return self._ids.get(value)

    def resolve(self, vid: int) -> str:
        return self._values[vid]

    def __len__(self) -> int:
        return len(self._values)

    def __contains__(self, value: object) -> bool:
        return value in self._ids

    def values(self) -> list[str]:
        return list(self._values)


@dataclass(frozen=True)
class Columns:
    """Column-major copy of a relation's rows, in the same (sorted) order."""

    keys: np.ndarray  # (rows, arity) value ids
    cnt: Optional[np.ndarray]  # int64 counts, None when some count needs more than 62 bits

    @classmethod
    def of(cls, rows: Mapping[Key, int], arity: int) -> Columns:
        n = len(rows)
        keys = np.fromiter(itertools.chain.from_iterable(rows), dtype=np.int64, count=n * arity).reshape(n, arity)
        cnt = None
        if max(rows.values(), default=0) < 1 << 62:
            cnt = np.fromiter(rows.values(), dtype=np.int64, count=n)
        return cls(keys, cnt)


@dataclass(frozen=True)
class Relation:
    """A named bag of tuples; ``rows`` iterates in sorted key order."""

    name: str
    schema: tuple[str, ...]
    rows: Mapping[Key, int] = field(default_factory=dict, compare=False)
    # filled in for loaded relations; derived relations usually leave it out
    columns: Optional[Columns] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if len(set(self.schema)) != len(self.schema):
            raise ArityError(f"duplicate attribute in schema of {self.name}: {self.schema}")
        if not isinstance(self.rows, MappingProxyType):
            object.__setattr__(self, "rows", MappingProxyType(dict(sorted(self.rows.items()))))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Relation):
            return NotImplemented
        return (
            self.name == other.name
            and self.schema == other.schema
            and list(self.rows.items()) == list(other.rows.items())
        )

    def __hash__(self):
        return hash((self.name, self.schema, len(self.rows)))

    def __len__(self) -> int:
        return len(self.rows)

    def __iter__(self) -> Iterator[tuple[Key, int]]:
        return iter(self.rows.items())

    @property
    def arity(self) -> int:
        return len(self.schema)

    def total(self) -> int:
        return sum(self.rows.values())

    def positions(self, attrs: Sequence[str]) -> tuple[int, ...]:
        try:
            return tuple(self.schema.index(a) for a in attrs)
        except ValueError:
            missing = [a for a in attrs if a not in self.schema]
            raise UnknownAttribute(f"{self.name} has no attribute(s) {missing}") from None

    def renamed(self, name: str | None = None, schema: Sequence[str] | None = None) -> Relation:
        schema = tuple(schema) if schema is not None else self.schema
        if len(schema) != self.arity:
            raise ArityError(f"cannot rename {self.name}{self.schema} to {schema}")
        return _make(name if name is not None else self.name, schema, self.rows, sort=False, columns=self.columns)

    def with_columns(self) -> Relation:
        """Same relation carrying a column-major copy of its rows."""
        if self.columns is not None:
            return self
        return Relation(self.name, self.schema, self.rows, Columns.of(self.rows, self.arity))

    def filter(self, keep) -> Relation:
        """Rows for which ``keep(key)`` holds."""
        return _make(self.name, self.schema, {k: c for k, c in self.rows.items() if keep(k)}, sort=False)

    def max_cnt(self) -> int:
        return max(self.rows.values(), default=0)


def _make(
    name: str, schema: Sequence[str], rows: Mapping[Key, int], sort: bool = True, columns: Columns | None = None
) -> Relation:
    proxy = MappingProxyType(dict(sorted(rows.items())) if sort else dict(rows))
    return Relation(name, tuple(schema), proxy, columns)


def canonicalize(
    name: str,
    schema: Sequence[str],
    raw_rows: Iterable,
    vdict: ValueDict,
) -> Relation:
    """Merge duplicate tuples into a canonical relation.

    Each item of ``raw_rows`` is either a value tuple or a pair
    ``(value_tuple, cnt)``.  Values are interned in ``vdict``.
    """
    schema = tuple(schema)
    counts: dict[Key, int] = {}
    for item in raw_rows:
        if (
            isinstance(item, tuple)
            and len(item) == 2
            and isinstance(item[0], (tuple, list))
            and isinstance(item[1], int)
        ):
            values, cnt = item
        else:
            values, cnt = item, 1
        if len(values) != len(schema):
            raise ArityError(f"{name}: tuple {tuple(values)} has arity {len(values)}, expected {len(schema)}")
        if cnt < 1:
            raise ArityError(f"{name}: count must be >= 1, got {cnt}")
        key = tuple(vdict.intern(v) for v in values)
        counts[key] = check_cnt(counts.get(key, 0) + cnt)
    return _make(name, schema, counts).with_columns()


def cnt_join(left: Relation, right: Relation, max_rows: int | None = None, name: str | None = None) -> Relation:
    """Natural join on shared attributes; output counts are products.

    Output schema is the left schema followed by the right attributes not
    already present.  Without shared attributes this is a cross product.
    """
    shared = [a for a in left.schema if a in right.schema]
    rest = [a for a in right.schema if a not in left.schema]
    lpos = left.positions(shared)
    rpos = right.positions(shared)
    rrest = right.positions(rest)

    index: dict[Key, list[tuple[Key, int]]] = {}
    for key, cnt in right.rows.items():
        jk = tuple(key[p] for p in rpos)
        index.setdefault(jk, []).append((tuple(key[p] for p in rrest), cnt))

    out: dict[Key, int] = {}
    for key, cnt in left.rows.items():
        matches = index.get(tuple(key[p] for p in lpos))
        if not matches:
            continue
        for tail, rcnt in matches:
            c = cnt * rcnt
            if c > MAX_CNT:
                check_cnt(c)
            out[key + tail] = c
        if max_rows is not None and len(out) > max_rows:
            raise MemoryBudgetExceeded(len(out), max_rows)
    return _make(name or f"{left.name}*{right.name}", left.schema + tuple(rest), out)


def groupby_sum(rel: Relation, attrs: Sequence[str], name: str | None = None) -> Relation:
    """Group on ``attrs`` and sum counts; grouping on no attributes gives the total."""
    attrs = tuple(attrs)
    pos = rel.positions(attrs)
    out: dict[Key, int] = {}
    if pos == tuple(range(rel.arity)):
        return _make(name or rel.name, attrs, rel.rows, sort=False)
    for key, cnt in rel.rows.items():
        k = tuple(key[p] for p in pos)
        out[k] = out.get(k, 0) + cnt
    for c in out.values():
        check_cnt(c)
    return _make(name or rel.name, attrs, out)


def join_sum(left: Relation, right: Relation, attrs: Sequence[str], name: str | None = None) -> Relation:
    """``groupby_sum(cnt_join(left, right), attrs)`` without building the join.

    Only valid when ``left`` is keyed on attributes that ``right`` holds
    (every left row matches right rows through its whole key), which is the
    shape of one step along a join-tree edge.
    """
    if any(a not in right.schema for a in left.schema):
        return groupby_sum(cnt_join(left, right), attrs, name)
    lpos = right.positions(left.schema)
    pos = right.positions(attrs)
    # itemgetter returns a bare value for one position and a tuple otherwise;
    # key the lookups the same way so the inner loop stays in C calls
    lkey = itemgetter(*lpos) if lpos else (lambda _: ())
    okey = itemgetter(*pos) if pos else (lambda _: ())
    lrows = {(k[0] if len(lpos) == 1 else k): c for k, c in left.rows.items()}
    out: dict = {}
    get = out.get
    for key, cnt in right.rows.items():
        lc = lrows.get(lkey(key))
        if lc is not None:
            k = okey(key)
            out[k] = get(k, 0) + lc * cnt
    if len(pos) == 1:
        out = {(k,): c for k, c in out.items()}
    for c in out.values():
        check_cnt(c)
    return _make(name or f"{left.name}*{right.name}", tuple(attrs), out)


@dataclass(frozen=True)
class Database:
    """A set of named relations sharing one value dictionary."""

    relations: Mapping[str, Relation]
    vdict: ValueDict = field(compare=False)

    def __post_init__(self):
        for name, rel in self.relations.items():
            if rel.name != name:
                raise UnknownRelation(f"relation stored under {name!r} is named {rel.name!r}")
        if not isinstance(self.relations, MappingProxyType):
            object.__setattr__(self, "relations", MappingProxyType(dict(self.relations)))

    def __getitem__(self, name: str) -> Relation:
        try:
            return self.relations[name]
        except KeyError:
            raise UnknownRelation(f"no relation named {name!r}") from None

    def __contains__(self, name: object) -> bool:
        return name in self.relations

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Database):
            return NotImplemented
        if sorted(self.relations) != sorted(other.relations):
            return False
        return all(self.decoded(n) == other.decoded(n) for n in self.relations)

    def __hash__(self):
        return hash(tuple(sorted(self.relations)))

    def with_relation(self, rel: Relation) -> Database:
        rels = dict(self.relations)
        rels[rel.name] = rel
        return Database(rels, self.vdict)

    def size(self) -> int:
        """n: total number of tuple copies."""
        return sum(r.total() for r in self.relations.values())

    def distinct_rows(self) -> int:
        return sum(len(r) for r in self.relations.values())

    def decode(self, key: Key) -> tuple[str, ...]:
        return tuple(self.vdict.resolve(v) for v in key)

    def decoded(self, name: str) -> tuple[tuple[str, ...], dict[tuple[str, ...], int]]:
        rel = self[name]
        return rel.schema, {self.decode(k): c for k, c in rel.rows.items()}

    def encode(self, values: Sequence[str]) -> Key | None:
        """Ids for ``values``, or None when some value was never interned."""
        ids = []
        for v in values:
            vid = self.vdict.lookup(v)
            if vid is None:
                return None
            ids.append(vid)
        return tuple(ids)

    @classmethod
    def from_rows(cls, spec: Mapping[str, tuple[Sequence[str], Iterable]], vdict: ValueDict | None = None) -> Database:
        """Build a database from ``{name: (schema, raw_rows)}``."""
        vdict = vdict if vdict is not None else ValueDict()
        rels = {name: canonicalize(name, schema, rows, vdict) for name, (schema, rows) in spec.items()}
        return cls(rels, vdict)
