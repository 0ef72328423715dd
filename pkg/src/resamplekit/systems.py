"""Structure-function specs: a small expression tree over sample arguments.

Grammar (whitespace-insensitive)::

    node  := INPUT
           | "min(" nodes ")" | "max(" nodes ")" | "sum(" nodes ")"
           | "kofn(" INT ";" nodes ")"
           | "ind(" node ("<"|">") VALUE ")"
           | "cmp(" node ("<"|">") node ")"
    nodes := node ("," node)*
    INPUT := "x" INT          (1-based argument position)
    VALUE := REAL | parameter name bound at parse time

``kofn(k; ...)`` takes the k-th largest child value, which for indicator
children coincides with "at least k children are 1".  ``ind`` maps a value
to {0, 1} against a fixed level; ``cmp`` compares two subtree values.  Ties
resolve as "not greater": ``> `` is strict, ``<`` includes equality.

Every input ``x1..xm`` must occur exactly once, so argument positions map
one-to-one onto draw slots.  Nodes are numbered post-order: leaves carry
their input index 1..m, internal nodes m+1..K with the root last.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from functools import reduce

import numpy as np

__all__ = [
    "SystemSyntaxError", "SystemValidationError",
    "Input", "Min", "Max", "Sum", "KOfN", "Threshold", "Compare",
    "SystemSpec", "parse_system", "evaluate", "evaluate_batch",
    "leaf_dependencies", "elementary_apply", "render",
]


class SystemSyntaxError(ValueError):
    """Spec text failed to parse; carries the offending position."""

    def __init__(self, message: str, position: int):
        self.position = position
        super().__init__(f"{message} (at position {position})")


class SystemValidationError(ValueError):
    """Structurally invalid system (bad leaf set, bad k-of-n, shared subtree)."""


# -- node types -----------------------------------------------------------

@dataclass(frozen=True)
class Input:
    index: int  # 1-based argument position


@dataclass(frozen=True)
class Min:
    children: tuple


@dataclass(frozen=True)
class Max:
    children: tuple


@dataclass(frozen=True)
class Sum:
    children: tuple


@dataclass(frozen=True)
class KOfN:
    k: int
    children: tuple


@dataclass(frozen=True)
class Threshold:
    child: object
    op: str  # "<" or ">"
    level: float


@dataclass(frozen=True)
class Compare:
    left: object
    op: str  # "<" or ">"
    right: object


def children_of(node) -> tuple:
    if isinstance(node, Input):
        return ()
    if isinstance(node, (Min, Max, Sum, KOfN)):
        return node.children
    if isinstance(node, Threshold):
        return (node.child,)
    if isinstance(node, Compare):
        return (node.left, node.right)
    raise TypeError(f"not a system node: {node!r}")


def elementary_apply(node, child_values: list[np.ndarray]) -> np.ndarray:
    """Apply the node's own operator to per-child value arrays."""
    if isinstance(node, Min):
        return reduce(np.minimum, child_values)
    if isinstance(node, Max):
        return reduce(np.maximum, child_values)
    if isinstance(node, Sum):
        return reduce(np.add, child_values)
    if isinstance(node, KOfN):
        stacked = np.stack(child_values, axis=0)
        stacked = np.sort(stacked, axis=0)
        return stacked[len(child_values) - node.k]
    if isinstance(node, Threshold):
        v = child_values[0]
        out = (v > node.level) if node.op == ">" else (v <= node.level)
        return out.astype(float)
    if isinstance(node, Compare):
        a, b = child_values
        out = (a > b) if node.op == ">" else (a <= b)
        return out.astype(float)
    raise TypeError(f"node {node!r} has no elementary operator")


# -- spec object ----------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SystemSpec:
    """A validated structure function with post-order node numbering."""

    root: object
    m: int = field(init=False)
    node_ids: dict = field(init=False, repr=False)   # node id -> node
    parent: dict = field(init=False, repr=False)     # node id -> parent id
    leaf_deps: dict = field(init=False, repr=False)  # node id -> frozenset of args

    def __post_init__(self):
        order: list = []
        seen: set[int] = set()

        def walk(node):
            if id(node) in seen:
                raise SystemValidationError(
                    "node object appears twice; the system must be a tree")
            seen.add(id(node))
            for c in children_of(node):
                walk(c)
            order.append(node)

        walk(self.root)
        inputs = [n for n in order if isinstance(n, Input)]
        indices = sorted(n.index for n in inputs)
        m = len(indices)
        if indices != list(range(1, m + 1)):
            raise SystemValidationError(
                f"leaf set must be exactly x1..x{m} with no repeats, "
                f"got {['x%d' % i for i in indices]}")
        for n in order:
            if isinstance(n, KOfN) and not 1 <= n.k <= len(n.children):
                raise SystemValidationError(
                    f"kofn needs 1 <= k <= {len(n.children)} children, got k={n.k}")
            if isinstance(n, (Min, Max, Sum, KOfN)) and not n.children:
                raise SystemValidationError("operator node with no children")
        node_ids: dict[int, object] = {}
        next_internal = m + 1
        assigned: dict[int, int] = {}  # id(node) -> node id
        for n in order:
            if isinstance(n, Input):
                nid = n.index
            else:
                nid = next_internal
                next_internal += 1
            node_ids[nid] = n
            assigned[id(n)] = nid
        parent: dict[int, int] = {}
        deps: dict[int, frozenset] = {}
        for n in order:
            nid = assigned[id(n)]
            if isinstance(n, Input):
                deps[nid] = frozenset((n.index,))
            else:
                acc = frozenset()
                for c in children_of(n):
                    cid = assigned[id(c)]
                    parent[cid] = nid
                    acc |= deps[cid]
                deps[nid] = acc
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "node_ids", node_ids)
        object.__setattr__(self, "parent", parent)
        object.__setattr__(self, "leaf_deps", deps)

    @property
    def root_id(self) -> int:
        return max(self.node_ids)

    def children_ids(self, node_id: int) -> tuple[int, ...]:
        node = self.node_ids[node_id]
        kids = children_of(node)
        by_obj = {id(n): i for i, n in self.node_ids.items()}
        return tuple(by_obj[id(c)] for c in kids)

    def __repr__(self):
        return f"SystemSpec({render(self.root)})"


def leaf_dependencies(spec: SystemSpec, node_id: int) -> frozenset:
    """Set of 1-based argument positions feeding the given node."""
    try:
        return spec.leaf_deps[node_id]
    except KeyError:
        raise SystemValidationError(f"no node with id {node_id}") from None


# -- evaluation -----------------------------------------------------------

def evaluate_batch(spec: SystemSpec, X) -> np.ndarray:
    """Evaluate the system on rows of ``X`` (shape (N, m)); returns (N,)."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[1] != spec.m:
        raise ValueError(f"expected {spec.m} argument columns, got {X.shape[1]}")

    def rec(node):
        if isinstance(node, Input):
            return X[:, node.index - 1]
        return elementary_apply(node, [rec(c) for c in children_of(node)])

    return rec(spec.root)


def evaluate(spec: SystemSpec, x) -> float:
    """Evaluate the system on one argument vector."""
    return float(evaluate_batch(spec, np.asarray(x, dtype=float)[None, :])[0])


# -- parsing --------------------------------------------------------------

_TOKEN = re.compile(r"""
    \s*(?:
    (?P<num>[-+]?(?:\d+\.\d*|\.\d+|\d+)(?:[eE][-+]?\d+)?)
    |(?P<ident>[A-Za-z_][A-Za-z_0-9]*)
    |(?P<sym>[(),;<>])
    )""", re.VERBOSE)


class _Parser:
    def __init__(self, text: str, params: dict | None):
        self.text = text
        self.params = params or {}
        self.pos = 0

    def error(self, message: str) -> SystemSyntaxError:
        return SystemSyntaxError(message, self.pos)

    def peek(self):
        m = _TOKEN.match(self.text, self.pos)
        if m is None:
            rest = self.text[self.pos:].lstrip()
            if not rest:
                return None, None, self.pos
            raise SystemSyntaxError(f"unexpected character {rest[0]!r}",
                                    self.pos + (len(self.text) - self.pos
                                                - len(rest)))
        kind = m.lastgroup
        return kind, m.group(kind), m.end()

    def next(self):
        kind, value, end = self.peek()
        if kind is None:
            raise self.error("unexpected end of input")
        self.pos = end
        return kind, value

    def expect_sym(self, sym: str):
        kind, value = self.next()
        if kind != "sym" or value != sym:
            raise self.error(f"expected {sym!r}, got {value!r}")

    def parse(self):
        node = self.node()
        kind, value, _ = self.peek()
        if kind is not None:
            raise self.error(f"trailing input {value!r}")
        return node

    def node(self):
        kind, value = self.next()
        if kind != "ident":
            raise self.error(f"expected an operator or input, got {value!r}")
        name = value
        if name in ("min", "max", "sum"):
            self.expect_sym("(")
            kids = self.node_list()
            self.expect_sym(")")
            cls = {"min": Min, "max": Max, "sum": Sum}[name]
            return cls(tuple(kids))
        if name == "kofn":
            self.expect_sym("(")
            k = self.integer("kofn count")
            self.expect_sym(";")
            kids = self.node_list()
            self.expect_sym(")")
            return KOfN(k, tuple(kids))
        if name == "ind":
            self.expect_sym("(")
            child = self.node()
            op = self.relation()
            level = self.value("threshold level")
            self.expect_sym(")")
            return Threshold(child, op, level)
        if name == "cmp":
            self.expect_sym("(")
            left = self.node()
            op = self.relation()
            right = self.node()
            self.expect_sym(")")
            return Compare(left, op, right)
        m = re.fullmatch(r"x([1-9]\d*)", name)
        if m:
            return Input(int(m.group(1)))
        raise self.error(f"unknown input name {name!r} (inputs are x1, x2, ...)")

    def node_list(self):
        kids = [self.node()]
        while True:
            kind, value, end = self.peek()
            if kind == "sym" and value == ",":
                self.pos = end
                kids.append(self.node())
            else:
                return kids

    def relation(self) -> str:
        kind, value = self.next()
        if kind != "sym" or value not in ("<", ">"):
            raise self.error(f"expected '<' or '>', got {value!r}")
        return value

    def integer(self, what: str) -> int:
        kind, value = self.next()
        if kind != "num" or not re.fullmatch(r"\d+", value):
            raise self.error(f"expected an integer {what}, got {value!r}")
        return int(value)

    def value(self, what: str) -> float:
        kind, value = self.next()
        if kind == "num":
            return float(value)
        if kind == "ident":
            if value in self.params:
                return float(self.params[value])
            raise self.error(f"unknown parameter {value!r} for {what}")
        raise self.error(f"expected a number or parameter for {what}")


def parse_system(text: str, params: dict | None = None) -> SystemSpec:
    """Parse grammar text into a validated :class:`SystemSpec`.

    Parameters
    ----------
    text : str
        Expression in the module grammar.
    params : dict, optional
        Named values usable in threshold positions, e.g. ``{"t": 1.0}``
        for ``ind(... < t)``.
    """
    root = _Parser(text, params).parse()
    return SystemSpec(root)


def render(node) -> str:
    """Render a node tree back to grammar text."""
    if isinstance(node, Input):
        return f"x{node.index}"
    if isinstance(node, (Min, Max, Sum)):
        name = type(node).__name__.lower()
        return f"{name}({','.join(render(c) for c in node.children)})"
    if isinstance(node, KOfN):
        return f"kofn({node.k};{','.join(render(c) for c in node.children)})"
    if isinstance(node, Threshold):
        return f"ind({render(node.child)}{node.op}{format(node.level, 'g')})"
    if isinstance(node, Compare):
        return f"cmp({render(node.left)}{node.op}{render(node.right)})"
    raise TypeError(f"not a system node: {node!r}")
