"""Conjunctive counting queries: parsing, hypergraphs and join trees.

The query language is a small datalog dialect::

    Q(A,B,C) :- R1(A,B), R2(B,C)[C != 'c1'].

Attributes are bound to relation columns by position.  Acyclic queries are
decomposed with GYO ear elimination into a join tree; cyclic queries take a
user-supplied generalized hypertree decomposition (several atoms per node).
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Mapping, Sequence

from .errors import (
    DataError,
    InvalidDecomposition,
    NotAPathQuery,
    QuerySyntaxError,
    SelfJoinUnsupported,
    UnknownAttribute,
    UnknownRelation,
)

OPS = ("=", "!=")


@dataclass(frozen=True)
class Selection:
    attr: str
    op: str
    literal: str

    def holds(self, value: str) -> bool:
        return (value == self.literal) if self.op == "=" else (value != self.literal)

    def __str__(self) -> str:
        lit = self.literal.replace("\\", "\\\\").replace("'", "\\'")
        return f"{self.attr} {self.op} '{lit}'"


@dataclass(frozen=True)
class Atom:
    relation: str
    attrs: tuple[str, ...]
    selections: tuple[Selection, ...] = ()

    def __post_init__(self):
        if len(set(self.attrs)) != len(self.attrs):
            raise DataError(f"atom {self.relation} repeats an attribute: {self.attrs}")
        for s in self.selections:
            if s.attr not in self.attrs:
                raise UnknownAttribute(f"selection on {s.attr!r} which is not an attribute of {self.relation}")
            if s.op not in OPS:
                raise DataError(f"unsupported selection operator {s.op!r}")

    def accepts(self, values: Sequence[str]) -> bool:
        """Whether a value tuple (in ``attrs`` order) passes every predicate."""
        for s in self.selections:
            if not s.holds(values[self.attrs.index(s.attr)]):
                return False
        return True

    def selections_on(self, attr: str) -> tuple[Selection, ...]:
        return tuple(s for s in self.selections if s.attr == attr)

    def __str__(self) -> str:
        body = f"{self.relation}({','.join(self.attrs)})"
        if self.selections:
            body += "[" + ", ".join(str(s) for s in self.selections) + "]"
        return body


@dataclass(frozen=True)
class ConjunctiveQuery:
    name: str
    atoms: tuple[Atom, ...]

    def __post_init__(self):
        if not self.atoms:
            raise DataError("query body is empty")
        seen = set()
        for a in self.atoms:
            if a.relation in seen:
                raise SelfJoinUnsupported(f"relation {a.relation} appears more than once (self-joins are not supported)")
            seen.add(a.relation)

    @cached_property
    def attributes(self) -> tuple[str, ...]:
        out: list[str] = []
        for a in self.atoms:
            out.extend(x for x in a.attrs if x not in out)
        return tuple(out)

    @cached_property
    def relations(self) -> tuple[str, ...]:
        return tuple(a.relation for a in self.atoms)

    def atom(self, relation: str) -> Atom:
        for a in self.atoms:
            if a.relation == relation:
                return a
        raise UnknownRelation(f"query has no atom over {relation!r}")

    def occurrences(self, attr: str) -> tuple[str, ...]:
        return tuple(a.relation for a in self.atoms if attr in a.attrs)

    def exclusive_attrs(self, relation: str) -> tuple[str, ...]:
        """Attributes of ``relation`` that appear in no other atom."""
        return tuple(x for x in self.atom(relation).attrs if len(self.occurrences(x)) == 1)

    def key_attrs(self, relation: str) -> tuple[str, ...]:
        """Attributes of ``relation`` shared with some other atom, in atom order."""
        return tuple(x for x in self.atom(relation).attrs if len(self.occurrences(x)) > 1)

    def order_attrs(self, attrs: Iterable[str]) -> tuple[str, ...]:
        attrs = set(attrs)
        return tuple(a for a in self.attributes if a in attrs)

    def subquery(self, relations: Iterable[str]) -> ConjunctiveQuery:
        keep = set(relations)
        return ConjunctiveQuery(self.name, tuple(a for a in self.atoms if a.relation in keep))

    def components(self) -> list[tuple[str, ...]]:
        """Connected components of the hypergraph, as relation-name tuples in query order."""
        parent = {a.relation: a.relation for a in self.atoms}

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for attr in self.attributes:
            occ = self.occurrences(attr)
            for other in occ[1:]:
                ra, rb = find(occ[0]), find(other)
                if ra != rb:
                    parent[rb] = ra
        groups: dict[str, list[str]] = {}
        for r in self.relations:
            groups.setdefault(find(r), []).append(r)
        return [tuple(g) for g in groups.values()]

    def is_connected(self) -> bool:
        return len(self.components()) == 1

    def __str__(self) -> str:
        return f"{self.name}({','.join(self.attributes)}) :- " + ", ".join(str(a) for a in self.atoms) + "."


# -- parsing -----------------------------------------------------------------

_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<comment>(?:%|\#|//)[^\n]*)
  | (?P<arrow>:-)
  | (?P<neq>!=|<>)
  | (?P<eq>=)
  | (?P<ellipsis>\.\.\.)
  | (?P<punct>[(),\[\].])
  | (?P<string>'(?:[^'\\]|\\.)*'|"(?:[^"\\]|\\.)*")
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*|-?[0-9]+(?:\.[0-9]+)?)
    """,
    re.VERBOSE,
)


def _tokenize(text: str) -> list[tuple[str, str, int, int]]:
    tokens = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise QuerySyntaxError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        value = m.group()
        if kind not in ("ws", "comment"):
            if kind == "string":
                value = re.sub(r"\\(.)", r"\1", value[1:-1])
            elif kind in ("punct", "eq", "neq", "arrow", "ellipsis"):
                kind = value if kind != "neq" else "!="
            tokens.append((kind, value, line, pos - line_start + 1))
        for i, ch in enumerate(value if kind != "string" else m.group()):
            if ch == "\n":
                line += 1
                line_start = pos + i + 1
        pos = m.end()
    tokens.append(("eof", "", line, pos - line_start + 1))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self, kind: str, what: str | None = None):
        tok = self.tokens[self.i]
        if tok[0] != kind:
            found = tok[1] or "end of input"
            raise QuerySyntaxError(f"expected {what or kind!r}, found {found!r}", tok[2], tok[3])
        self.i += 1
        return tok

    def ident_list(self, closing: str) -> list[str]:
        names = []
        if self.peek()[0] == closing:
            return names
        while True:
            names.append(self.take("ident", "attribute name")[1])
            if self.peek()[0] != ",":
                return names
            self.take(",")

    def query(self) -> ConjunctiveQuery:
        name = self.take("ident", "query name")[1]
        head = None
        if self.peek()[0] == "(":
            self.take("(")
            if self.peek()[0] == "...":
                self.take("...")
            else:
                head = self.ident_list(")")
            self.take(")", ")")
        arrow = self.take(":-", ":-")
        atoms = []
        if self.peek()[0] in (".", "eof"):
            raise QuerySyntaxError("query body is empty", arrow[2], arrow[3])
        while True:
            atoms.append(self.atom())
            if self.peek()[0] != ",":
                break
            self.take(",")
        self.take(".", "'.' at end of query")
        self.take("eof", "end of input")
        seen: set[str] = set()
        for a in atoms:
            if a.relation in seen:
                raise SelfJoinUnsupported(
                    f"relation {a.relation} appears more than once (self-joins are not supported)"
                )
            seen.add(a.relation)
        q = ConjunctiveQuery(name, tuple(atoms))
        if head is not None and set(head) != set(q.attributes):
            raise DataError(
                f"head {tuple(head)} must list exactly the body attributes {q.attributes} (full queries only)"
            )
        return q

    def atom(self) -> Atom:
        rel = self.take("ident", "relation name")
        self.take("(", "(")
        attrs = self.ident_list(")")
        close = self.take(")", ")")
        if not attrs:
            raise QuerySyntaxError(f"atom {rel[1]} has no attributes", close[2], close[3])
        if len(set(attrs)) != len(attrs):
            raise QuerySyntaxError(f"atom {rel[1]} repeats an attribute", rel[2], rel[3])
        sels = []
        if self.peek()[0] == "[":
            self.take("[")
            while True:
                attr = self.take("ident", "attribute name")
                op_tok = self.peek()
                if op_tok[0] not in ("=", "!="):
                    raise QuerySyntaxError("expected '=' or '!='", op_tok[2], op_tok[3])
                self.i += 1
                lit_tok = self.peek()
                if lit_tok[0] not in ("string", "ident"):
                    raise QuerySyntaxError("expected a literal", lit_tok[2], lit_tok[3])
                self.i += 1
                if attr[1] not in attrs:
                    raise UnknownAttribute(
                        f"selection on unknown attribute {attr[1]!r} of {rel[1]} (line {attr[2]}, column {attr[3]})"
                    )
                sels.append(Selection(attr[1], op_tok[0], lit_tok[1]))
                if self.peek()[0] != ",":
                    break
                self.take(",")
            self.take("]", "]")
        return Atom(rel[1], tuple(attrs), tuple(sels))


def parse_query(text: str) -> ConjunctiveQuery:
    return _Parser(text).query()


# -- hypergraph and GYO ----------------------------------------------------------


@dataclass(frozen=True)
class Hypergraph:
    vertices: tuple[str, ...]
    edges: Mapping[str, frozenset[str]]


def build_hypergraph(q: ConjunctiveQuery) -> Hypergraph:
    return Hypergraph(q.attributes, {a.relation: frozenset(a.attrs) for a in q.atoms})


@dataclass(frozen=True)
class Cyclic:
    """GYO got stuck: the residual hypergraph has no ear."""

    residual: Mapping[str, frozenset[str]]

    def to_dict(self) -> dict:
        return {name: sorted(v) for name, v in sorted(self.residual.items())}


def gyo_reduce(edges: Mapping[str, frozenset[str]]) -> tuple[list[tuple[str, str | None]], dict[str, frozenset[str]]]:
    """Ear elimination on an arbitrary (possibly disconnected) hypergraph.

    Returns the elimination sequence as ``(ear, witness)`` pairs, where the
    witness is None for an ear sharing nothing with the remaining edges, and
    the residual hypergraph (empty iff acyclic).  Among eligible ears the
    lexicographically largest name goes first, so the smallest name tends to
    survive as the root; witnesses are the smallest eligible name.
    """
    live = {k: frozenset(v) for k, v in edges.items()}
    order: list[tuple[str, str | None]] = []
    while live:
        if len(live) == 1:
            (last,) = live
            order.append((last, None))
            live.clear()
            break
        chosen = None
        for name in sorted(live, reverse=True):
            others = [o for o in live if o != name]
            shared = frozenset(v for v in live[name] if any(v in live[o] for o in others))
            if not shared:
                chosen = (name, None)
                break
            witnesses = sorted(o for o in others if shared <= live[o])
            if witnesses:
                chosen = (name, witnesses[0])
                break
        if chosen is None:
            break
        order.append(chosen)
        del live[chosen[0]]
    return order, live


def is_acyclic_edges(edges: Mapping[str, Iterable[str]]) -> bool:
    _, residual = gyo_reduce({k: frozenset(v) for k, v in edges.items()})
    return not residual


@dataclass(frozen=True)
class TreeNode:
    atoms: tuple[str, ...]
    attrs: tuple[str, ...]
    parent: int | None


@dataclass(frozen=True)
class JoinTree:
    """Rooted tree over groups of atoms, checked for running intersection."""

    nodes: tuple[TreeNode, ...]
    root: int

    def __post_init__(self):
        n = len(self.nodes)
        if n == 0:
            raise InvalidDecomposition("a decomposition needs at least one node")
        roots = [i for i, nd in enumerate(self.nodes) if nd.parent is None]
        if roots != [self.root]:
            raise InvalidDecomposition(f"expected exactly one root, found {roots}")
        for i, nd in enumerate(self.nodes):
            if nd.parent is not None and not (0 <= nd.parent < n) or nd.parent == i:
                raise InvalidDecomposition(f"node {i} has invalid parent {nd.parent}")
            if not nd.atoms:
                raise InvalidDecomposition(f"node {i} holds no atoms")
        for i in range(n):
            seen, j = set(), i
            while j is not None:
                if j in seen:
                    raise InvalidDecomposition(f"parent pointers form a cycle through node {i}")
                seen.add(j)
                j = self.nodes[j].parent
        attrs = {a for nd in self.nodes for a in nd.attrs}
        for a in attrs:
            holders = [i for i, nd in enumerate(self.nodes) if a in nd.attrs]
            edges = sum(
                1 for i in holders if self.nodes[i].parent is not None and a in self.nodes[self.nodes[i].parent].attrs
            )
            if len(holders) - edges != 1:
                raise InvalidDecomposition(
                    f"running intersection violated: nodes holding {a!r} ({holders}) are not connected"
                )

    @cached_property
    def _children(self) -> tuple[tuple[int, ...], ...]:
        kids: list[list[int]] = [[] for _ in self.nodes]
        for i, nd in enumerate(self.nodes):
            if nd.parent is not None:
                kids[nd.parent].append(i)
        return tuple(tuple(k) for k in kids)

    def children(self, i: int) -> tuple[int, ...]:
        return self._children[i]

    def siblings(self, i: int) -> tuple[int, ...]:
        p = self.nodes[i].parent
        return () if p is None else tuple(c for c in self._children[p] if c != i)

    def shared(self, i: int) -> tuple[str, ...]:
        """Attributes node ``i`` shares with its parent (empty for the root)."""
        p = self.nodes[i].parent
        if p is None:
            return ()
        pattrs = self.nodes[p].attrs
        return tuple(a for a in self.nodes[i].attrs if a in pattrs)

    def preorder(self) -> list[int]:
        out, stack = [], [self.root]
        while stack:
            i = stack.pop()
            out.append(i)
            stack.extend(reversed(self._children[i]))
        return out

    def postorder(self) -> list[int]:
        return list(reversed(self._reverse_post()))

    def _reverse_post(self) -> list[int]:
        out, stack = [], [self.root]
        while stack:
            i = stack.pop()
            out.append(i)
            stack.extend(self._children[i])
        return out

    def node_of(self, relation: str) -> int:
        for i, nd in enumerate(self.nodes):
            if relation in nd.atoms:
                return i
        raise UnknownRelation(f"no node holds {relation!r}")

    @property
    def width(self) -> int:
        """Max number of atoms in one node (1 for a plain join tree)."""
        return max(len(nd.atoms) for nd in self.nodes)

    def max_degree(self) -> int:
        return max(len(self._children[i]) + (self.nodes[i].parent is not None) for i in range(len(self.nodes)))

    def is_chain(self) -> bool:
        return all(len(self._children[i]) <= 1 for i in range(len(self.nodes)))

    def to_dict(self) -> list[dict]:
        return [
            {"atoms": list(nd.atoms), "attrs": list(nd.attrs), "parent": nd.parent, "shared": list(self.shared(i))}
            for i, nd in enumerate(self.nodes)
        ]


def _node_attrs(q: ConjunctiveQuery, atoms: Sequence[str]) -> tuple[str, ...]:
    return q.order_attrs(a for r in atoms for a in q.atom(r).attrs)


def gyo_decompose(q: ConjunctiveQuery | Hypergraph) -> JoinTree | Cyclic:
    """Join tree for a connected acyclic query, or the stuck residual."""
    if isinstance(q, ConjunctiveQuery):
        h = build_hypergraph(q)
        order_attrs = q.order_attrs
    else:
        h = q
        order_attrs = lambda attrs: tuple(v for v in h.vertices if v in set(attrs))  # noqa: E731
    order, residual = gyo_reduce(h.edges)
    if residual:
        return Cyclic(residual)
    if sum(1 for _, w in order if w is None) > 1:
        raise DataError("hypergraph is disconnected; decompose each component separately")
    # the last eliminated edge is the root; index nodes in elimination-reverse order
    names = [ear for ear, _ in reversed(order)]
    index = {name: i for i, name in enumerate(names)}
    witness = dict(order)
    nodes = tuple(
        TreeNode((name,), order_attrs(h.edges[name]), None if witness[name] is None else index[witness[name]])
        for name in names
    )
    return JoinTree(nodes, 0)


def component_trees(q: ConjunctiveQuery) -> list[tuple[ConjunctiveQuery, JoinTree | Cyclic]]:
    return [(sub, gyo_decompose(sub)) for sub in (q.subquery(c) for c in q.components())]


def is_doubly_acyclic(t: JoinTree) -> tuple[bool, int | None]:
    """Check that around every node the parent-side and child-side schemas join acyclically.

    Returns ``(True, None)`` or ``(False, node_index)`` naming the first
    violating node in preorder.
    """
    for i in t.preorder():
        edges = {}
        if t.nodes[i].parent is not None and t.shared(i):
            edges["top"] = frozenset(t.shared(i))
        for c in t.children(i):
            if t.shared(c):
                edges[f"bot{c}"] = frozenset(t.shared(c))
        if not is_acyclic_edges(edges):
            return False, i
    return True, None


def path_order(q: ConjunctiveQuery) -> tuple[str, ...]:
    """Order the atoms of a path query R1 - R2 - ... - Rm, or raise NotAPathQuery.

    Consecutive atoms must share at least one attribute and non-consecutive
    atoms none.  The orientation starts at the endpoint with the smaller name.
    """
    rels = q.relations
    if len(rels) == 1:
        return rels
    adj: dict[str, set[str]] = {r: set() for r in rels}
    for a in q.atoms:
        for b in q.atoms:
            if a.relation != b.relation and set(a.attrs) & set(b.attrs):
                adj[a.relation].add(b.relation)
    ends = sorted(r for r in rels if len(adj[r]) == 1)
    if len(ends) != 2 or any(len(adj[r]) > 2 for r in rels):
        raise NotAPathQuery(f"query {q.name} is not a path query")
    order, prev = [ends[0]], None
    while len(order) < len(rels):
        nxt = [r for r in adj[order[-1]] if r != prev]
        if len(nxt) != 1:
            raise NotAPathQuery(f"query {q.name} is not a path query")
        prev = order[-1]
        order.append(nxt[0])
    return tuple(order)


def validate_ghd(q: ConjunctiveQuery, ghd: JoinTree | Sequence[Mapping]) -> JoinTree:
    """Check a user-supplied generalized hypertree decomposition against ``q``.

    ``ghd`` is a JoinTree or a list of ``{"atoms": [...], "parent": i|None}``
    entries (an optional ``"attrs"`` list must equal the atoms' attributes).
    """
    if isinstance(ghd, JoinTree):
        entries = [{"atoms": list(nd.atoms), "parent": nd.parent, "attrs": list(nd.attrs)} for nd in ghd.nodes]
    else:
        entries = list(ghd)
    counts: dict[str, int] = {r: 0 for r in q.relations}
    nodes = []
    for i, e in enumerate(entries):
        if not isinstance(e, Mapping) or "atoms" not in e:
            raise InvalidDecomposition(f"node {i} must be an object with an 'atoms' list")
        atoms = tuple(e["atoms"])
        for r in atoms:
            if r not in counts:
                raise InvalidDecomposition(f"node {i} names unknown atom {r!r}")
            counts[r] += 1
        attrs = _node_attrs(q, atoms)
        if e.get("attrs") is not None:
            declared = set(e["attrs"])
            if not set(attrs) <= declared:
                raise InvalidDecomposition(f"node {i} does not cover the attributes of its atoms")
            if declared != set(attrs):
                raise InvalidDecomposition(f"node {i} declares attributes not covered by its atoms")
        parent = e.get("parent")
        if parent is not None and not isinstance(parent, int):
            raise InvalidDecomposition(f"node {i} has non-integer parent {parent!r}")
        nodes.append(TreeNode(atoms, attrs, parent))
    for r, c in counts.items():
        if c == 0:
            raise InvalidDecomposition(f"atom {r} is not assigned to any node")
        if c > 1:
            raise InvalidDecomposition(f"atom {r} is assigned to {c} nodes")
    roots = [i for i, nd in enumerate(nodes) if nd.parent is None]
    if len(roots) != 1:
        raise InvalidDecomposition(f"expected exactly one root, found {roots}")
    return JoinTree(tuple(nodes), roots[0])


def single_node_ghd(q: ConjunctiveQuery) -> JoinTree:
    return JoinTree((TreeNode(q.relations, q.attributes, None),), 0)


def load_ghd(text: str) -> list[dict]:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidDecomposition(f"decomposition file is not valid JSON: {exc}") from None
    if isinstance(data, Mapping) and "nodes" in data:
        data = data["nodes"]
    if not isinstance(data, list):
        raise InvalidDecomposition("decomposition must be a JSON list of nodes")
    return data
