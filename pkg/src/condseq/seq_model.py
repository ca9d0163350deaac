"""Symbolic ordinal sequences, their tail graphs, and sequence models.

A sequence below omega^omega is written as a :class:`SeqExpr`: an element,
a concatenation, or an omega-fold repetition of a non-empty body. All
semantics route through the finite graph of distinct non-empty tails, which
is built by dropping ``omega**k`` elements at a time and merging equal tails
by bisimulation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Iterator, Mapping, Sequence

from .formula import Formula, is_boolean, normalize, classify_fragment, BOOLEAN, BOOLEAN_ANTECEDENT, MODAL
from .order_model import OrderFrame, PointedModel, Valuation, evaluate
from .ordinal import OMEGA, ONE, ZERO, OrdinalCNF

__all__ = [
    "SeqExpr", "Elem", "Cat", "OmegaRep", "seq", "Lasso", "ProtoworldTable", "SequenceModel",
    "TailGraph", "tail_graph", "tails", "expr_equal", "induced_order_model", "length", "head",
    "minimal_representation", "omega_padding", "relevant_positions", "restrict",
    "element_at", "prefix_elements", "expr_from_json", "expr_to_json", "expr_to_text",
    "list_expr", "lasso_expr", "FragmentError",
]


# ---------------------------------------------------------------- expressions

class SeqExpr:
    __slots__ = ("args", "_hash")
    tag = ""

    def __init__(self, args: tuple):
        object.__setattr__(self, "args", args)
        object.__setattr__(self, "_hash", hash((self.tag, args)))

    def __setattr__(self, name, value):
        raise AttributeError("SeqExpr is immutable")

    def __hash__(self) -> int:
        return self._hash

    def __eq__(self, other) -> bool:
        if self is other:
            return True
        return (isinstance(other, SeqExpr) and self._hash == other._hash
                and self.tag == other.tag and self.args == other.args)

    def __repr__(self) -> str:
        return expr_to_text(self)

    def __reduce__(self):
        return (type(self), self.args if self.tag != "cat" else (self.args,))


class Elem(SeqExpr):
    __slots__ = ()
    tag = "elem"

    def __init__(self, label):
        super().__init__((label,))

    @property
    def label(self):
        return self.args[0]


class Cat(SeqExpr):
    __slots__ = ()
    tag = "cat"

    def __init__(self, items: Iterable[SeqExpr]):
        super().__init__(tuple(items))

    @property
    def items(self) -> tuple[SeqExpr, ...]:
        return self.args


class OmegaRep(SeqExpr):
    __slots__ = ()
    tag = "rep"

    def __init__(self, body: SeqExpr):
        super().__init__((body,))

    @property
    def body(self) -> SeqExpr:
        return self.args[0]


def _items(e: SeqExpr) -> tuple[SeqExpr, ...]:
    return e.args if isinstance(e, Cat) else (e,)


def seq(*parts) -> SeqExpr:
    """Flattened concatenation; bare labels become elements."""
    out: list[SeqExpr] = []
    for p in parts:
        if isinstance(p, SeqExpr):
            out.extend(_items(p))
        elif isinstance(p, (list, tuple)):
            out.extend(_items(seq(*p)))
        else:
            out.append(Elem(p))
    if not out:
        raise ValueError("empty sequence")
    return out[0] if len(out) == 1 else Cat(out)


def _cat(items: Sequence[SeqExpr]) -> SeqExpr:
    flat: list[SeqExpr] = []
    for it in items:
        flat.extend(_items(it))
    return flat[0] if len(flat) == 1 else Cat(flat)


def _apply_rewrites(items: list[SeqExpr]) -> list[SeqExpr]:
    """x.x^w -> x^w and x.(y.x)^w -> (x.y)^w on a flat item list, to fixpoint."""
    changed = True
    while changed:
        changed = False
        for i, it in enumerate(items):
            if not isinstance(it, OmegaRep):
                continue
            body = list(_items(it.body))
            for j in range(len(body), 0, -1):
                x = body[-j:]
                if i >= j and items[i - j:i] == x:
                    y = body[:-j]
                    items = items[:i - j] + [OmegaRep(_cat(x + y))] + items[i + 1:]
                    changed = True
                    break
            if changed:
                break
    return items


def normalize_expr(e: SeqExpr) -> SeqExpr:
    """Flatten, drop trivial wrappers, and apply the two rewrite rules."""
    if isinstance(e, Elem):
        return e
    if isinstance(e, OmegaRep):
        return OmegaRep(normalize_expr(e.body))
    items: list[SeqExpr] = []
    for it in e.args:
        items.extend(_items(normalize_expr(it)))
    items = _apply_rewrites(items)
    return _cat(items)


def list_expr(labels: Sequence) -> SeqExpr:
    return seq(*labels)


def lasso_expr(prefix: Sequence, cycle: Sequence) -> SeqExpr:
    parts: list[SeqExpr] = [Elem(x) for x in prefix]
    if cycle:
        parts.append(OmegaRep(seq(*cycle)))
    return _cat(parts)


@lru_cache(maxsize=1 << 16)
def length(e: SeqExpr) -> OrdinalCNF:
    if isinstance(e, Elem):
        return ONE
    if isinstance(e, OmegaRep):
        return length(e.body).times_omega()
    out = ZERO
    for it in e.args:
        out = out + length(it)
    return out


def head(e: SeqExpr):
    while not isinstance(e, Elem):
        e = e.args[0]
    return e.label


def labels_of(e: SeqExpr) -> list:
    out: dict = {}

    def go(x):
        if isinstance(x, Elem):
            out.setdefault(x.label)
        else:
            for y in x.args:
                go(y)

    go(e)
    return list(out)


@lru_cache(maxsize=1 << 18)
def drop(e: SeqExpr, beta: OrdinalCNF) -> SeqExpr:
    """The tail of ``e`` starting at position ``beta`` (requires beta < length(e))."""
    if beta.is_zero:
        return e
    if isinstance(e, Elem):
        raise IndexError("position beyond the end of the sequence")
    if isinstance(e, Cat):
        items = e.args
        for i, it in enumerate(items):
            L = length(it)
            if beta < L:
                return _cat((drop(it, beta),) + items[i + 1:])
            beta = beta.left_sub(L)
        raise IndexError("position beyond the end of the sequence")
    body = e.body
    L = length(body)
    while not beta < L:
        beta = beta.left_sub(L)
    if beta.is_zero:
        return e
    return _cat((drop(body, beta), e))


def element_at(e: SeqExpr, beta: OrdinalCNF | int):
    if isinstance(beta, int):
        beta = OrdinalCNF.finite(beta)
    if not beta < length(e):
        raise IndexError(f"position {beta} is out of range for a sequence of length {length(e)}")
    return head(drop(e, beta))


def prefix_elements(e: SeqExpr, n: int) -> list:
    """The first n elements (fewer if the sequence is shorter)."""
    out = []
    cur = e
    while len(out) < n:
        out.append(head(cur))
        if length(cur) == ONE:
            break
        cur = drop(cur, ONE)
    return out


# ---------------------------------------------------------------- text and JSON

def expr_to_text(e: SeqExpr) -> str:
    if isinstance(e, Elem):
        return str(e.label)
    if isinstance(e, OmegaRep):
        return f"({' '.join(expr_to_text(x) for x in _items(e.body))})^ω"
    return " ".join(expr_to_text(x) for x in e.args)


def expr_to_json(e: SeqExpr):
    if isinstance(e, Elem):
        return e.label
    if isinstance(e, OmegaRep):
        return {"rep": [expr_to_json(x) for x in _items(e.body)]}
    return [expr_to_json(x) for x in e.args]


def expr_from_json(data) -> SeqExpr:
    if isinstance(data, (str, int)):
        return Elem(str(data))
    if isinstance(data, Mapping):
        if set(data) == {"prefix", "cycle"}:
            return lasso_expr([str(x) for x in data["prefix"]], [str(x) for x in data["cycle"]])
        if set(data) != {"rep"}:
            raise ValueError(f"unknown sequence object keys {sorted(data)}")
        body = data["rep"]
        if not body:
            raise ValueError("omega repetition needs a non-empty body")
        return OmegaRep(_cat([expr_from_json(x) for x in (body if isinstance(body, list) else [body])]))
    if isinstance(data, list):
        if not data:
            raise ValueError("empty sequence")
        return _cat([expr_from_json(x) for x in data])
    raise ValueError(f"cannot read a sequence from {data!r}")


# ---------------------------------------------------------------- lassos and tables

@dataclass(frozen=True)
class Lasso:
    """Prefix followed by an omega-repeated cycle; an empty cycle is a finite list."""

    prefix: tuple
    cycle: tuple

    def __post_init__(self):
        prefix, cycle = tuple(self.prefix), tuple(self.cycle)
        if not prefix and not cycle:
            raise ValueError("a lasso needs at least one element")
        if cycle:
            n = len(cycle)
            for d in range(1, n + 1):
                if n % d == 0 and cycle == cycle[:d] * (n // d):
                    cycle = cycle[:d]
                    break
            while prefix and prefix[-1] == cycle[-1]:
                prefix, cycle = prefix[:-1], (cycle[-1],) + cycle[:-1]
        object.__setattr__(self, "prefix", prefix)
        object.__setattr__(self, "cycle", cycle)

    def to_expr(self) -> SeqExpr:
        return lasso_expr(self.prefix, self.cycle)

    def positions(self) -> int:
        return len(self.prefix) + len(self.cycle)

    def to_json(self) -> dict:
        return {"prefix": list(self.prefix), "cycle": list(self.cycle)}

    @classmethod
    def from_json(cls, data) -> "Lasso":
        return cls(tuple(str(x) for x in data["prefix"]), tuple(str(x) for x in data["cycle"]))


@dataclass(frozen=True)
class ProtoworldTable:
    """Categorical valuation: an atom holds at a sequence iff its first element is listed."""

    atoms: Mapping[str, frozenset] = field(default_factory=dict)
    protoworlds: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "atoms", {k: frozenset(str(x) for x in v) for k, v in self.atoms.items()})

    def __hash__(self) -> int:
        return hash(tuple(sorted((k, tuple(sorted(v))) for k, v in self.atoms.items())))

    def holds(self, atom: str, label) -> bool:
        return str(label) in self.atoms.get(atom, frozenset())

    def letter(self, label) -> frozenset[str]:
        return frozenset(a for a, s in self.atoms.items() if str(label) in s)

    def to_json(self) -> dict:
        out = {"atoms": {k: sorted(v) for k, v in sorted(self.atoms.items())}}
        if self.protoworlds:
            out["protoworlds"] = list(self.protoworlds)
        return out

    @classmethod
    def from_json(cls, data) -> "ProtoworldTable":
        return cls({k: set(v) for k, v in data.get("atoms", {}).items()}, tuple(data.get("protoworlds", ())))


# ---------------------------------------------------------------- tail graphs

@dataclass
class TailGraph:
    """Distinct non-empty tails of a root, root first, in rank order."""

    root: SeqExpr
    exprs: list[SeqExpr]            # representative of each tail class
    ranks: list[OrdinalCNF]         # least rank of each class in the root
    orders: list[list[int]]         # full order of each class (itself first)
    heads: list

    def __len__(self) -> int:
        return len(self.exprs)

    def frame(self, names: Sequence[str] | None = None) -> OrderFrame:
        names = list(names) if names is not None else [f"t{i}" for i in range(len(self.exprs))]
        return OrderFrame(tuple(names), {names[i]: tuple(names[j] for j in o[1:]) for i, o in enumerate(self.orders)})

    def rank_from(self, i: int) -> dict[int, OrdinalCNF]:
        return self._ranks_from[i]


def _jump_levels(e: SeqExpr) -> int:
    L = length(e)
    return L.leading_exponent


@lru_cache(maxsize=1 << 14)
def tail_graph(root: SeqExpr) -> TailGraph:
    K = _jump_levels(root)
    jumps = [OrdinalCNF.omega_pow(k) for k in range(K + 1)]
    # explore context forms
    states: list[SeqExpr] = [root]
    index = {root: 0}
    trans: list[list[int]] = []
    i = 0
    while i < len(states):
        s = states[i]
        L = length(s)
        row = []
        for j in jumps:
            if j < L:
                t = drop(s, j)
                k = index.get(t)
                if k is None:
                    k = len(states)
                    states.append(t)
                    index[t] = k
                row.append(k)
            else:
                row.append(-1)
        trans.append(row)
        i += 1
    # bisimulation: same head and matching jump classes
    cls = _refine([head(s) for s in states], trans)
    ncls = max(cls) + 1
    rep = [-1] * ncls
    for si, c in enumerate(cls):
        if rep[c] < 0:
            rep[c] = si
    ctrans = [[(cls[t] if t >= 0 else -1) for t in trans[rep[c]]] for c in range(ncls)]

    memo: dict[tuple[int, int], dict[int, OrdinalCNF]] = {}

    def ranks(c: int, lvl: int) -> dict[int, OrdinalCNF]:
        key = (c, lvl)
        hit = memo.get(key)
        if hit is not None:
            return hit
        if lvl < 0:
            out = {c: ZERO}
        else:
            out: dict[int, OrdinalCNF] = {}
            cur, count, seen = c, 0, set()
            while cur >= 0 and cur not in seen:
                seen.add(cur)
                base = OrdinalCNF(((lvl, count),)) if count else ZERO
                for u, r in ranks(cur, lvl - 1).items():
                    if u not in out:
                        out[u] = base + r
                cur = ctrans[cur][lvl]
                count += 1
        memo[key] = out
        return out

    top = ranks(cls[0], K)
    ordered = sorted(top, key=lambda u: top[u])
    pos = {u: n for n, u in enumerate(ordered)}
    orders = []
    all_ranks = []
    for u in ordered:
        r = ranks(u, K)
        orders.append([pos[v] for v in sorted(r, key=lambda v: r[v])])
        all_ranks.append({pos[v]: x for v, x in r.items()})
    g = TailGraph(root, [states[rep[u]] for u in ordered], [top[u] for u in ordered], orders,
                  [head(states[rep[u]]) for u in ordered])
    g._ranks_from = all_ranks
    return g


def _refine(heads: list, trans: list[list[int]]) -> list[int]:
    lab: dict = {}
    cls = [lab.setdefault(h, len(lab)) for h in heads]
    while True:
        sig: dict = {}
        new = [sig.setdefault((cls[s], tuple(cls[t] if t >= 0 else -1 for t in trans[s])), len(sig))
               for s in range(len(heads))]
        if len(sig) == len(set(cls)):
            return new
        cls = new


def tails(e: SeqExpr) -> list[tuple[SeqExpr, OrdinalCNF]]:
    g = tail_graph(e)
    return list(zip(g.exprs, g.ranks))


def expr_equal(a: SeqExpr, b: SeqExpr) -> bool:
    """Same ordinal sequence, decided by bisimulation of the joint tail graph."""
    if a == b:
        return True
    if length(a) != length(b):
        return False
    K = max(_jump_levels(a), _jump_levels(b))
    jumps = [OrdinalCNF.omega_pow(k) for k in range(K + 1)]
    states = [a, b]
    index = {a: 0, b: 1}
    trans = []
    i = 0
    while i < len(states):
        s = states[i]
        L = length(s)
        row = []
        for j in jumps:
            if j < L:
                t = drop(s, j)
                if t not in index:
                    index[t] = len(states)
                    states.append(t)
                row.append(index[t])
            else:
                row.append(-1)
        trans.append(row)
        i += 1
    cls = _refine([head(s) for s in states], trans)
    return cls[0] == cls[1]


# ---------------------------------------------------------------- models

@dataclass(frozen=True)
class SequenceModel:
    root: SeqExpr
    table: ProtoworldTable

    @property
    def graph(self) -> TailGraph:
        return tail_graph(self.root)

    def pointed(self) -> PointedModel:
        return induced_order_model(self.root, self.table)

    def evaluate(self, f: Formula) -> bool:
        return evaluate(self.pointed(), f)

    def to_json(self) -> dict:
        return {"sequence": expr_to_json(self.root), "table": self.table.to_json()}

    @classmethod
    def from_json(cls, data) -> "SequenceModel":
        return cls(expr_from_json(data["sequence"]), ProtoworldTable.from_json(data.get("table", {})))


def induced_order_model(root: SeqExpr, table: ProtoworldTable) -> PointedModel:
    g = tail_graph(root)
    names = [f"t{i}" for i in range(len(g))]
    val: dict[str, set[str]] = {}
    for atom, labels in table.atoms.items():
        val[atom] = {names[i] for i, h in enumerate(g.heads) if str(h) in labels}
    return PointedModel(g.frame(names), Valuation(val), names[0])


def minimal_representation(lasso: Lasso, table: ProtoworldTable) -> tuple[Lasso, ProtoworldTable]:
    """Relabel every position with a fresh protoworld carrying the same atoms."""
    labels = list(lasso.prefix) + list(lasso.cycle)
    fresh = [f"n{i}" for i in range(len(labels))]
    atoms = {a: {fresh[i] for i, x in enumerate(labels) if table.holds(a, x)} for a in table.atoms}
    k = len(lasso.prefix)
    return Lasso(tuple(fresh[:k]), tuple(fresh[k:])), ProtoworldTable(atoms, tuple(fresh))


def omega_padding(items: Sequence) -> Lasso:
    if not items:
        raise ValueError("omega padding needs a non-empty list")
    return Lasso(tuple(items[:-1]), (items[-1],))


# ---------------------------------------------------------------- relevance restriction

class FragmentError(ValueError):
    pass


def _boolean_holds(f: Formula, letter: frozenset[str]) -> bool:
    k = f.kind
    if k == "atom":
        return f.name in letter
    if k == "not":
        return not _boolean_holds(f.args[0], letter)
    if k == "and":
        return _boolean_holds(f.args[0], letter) and _boolean_holds(f.args[1], letter)
    raise AssertionError(k)


def relevant_positions(root: SeqExpr, f: Formula, table: ProtoworldTable) -> frozenset[OrdinalCNF]:
    """Finite set of positions whose elements settle a Boolean-antecedent formula."""
    if classify_fragment(f) not in (BOOLEAN, BOOLEAN_ANTECEDENT, MODAL):
        raise FragmentError("relevant positions need every conditional antecedent to be Boolean")
    core = normalize(f)
    for g in _conds(core):
        if not is_boolean(g.args[0]):
            raise FragmentError("relevant positions need every conditional antecedent to be Boolean")
    g = tail_graph(root)
    letters = [table.letter(h) for h in g.heads]

    def h(state: int, phi: Formula) -> set[OrdinalCNF]:
        k = phi.kind
        if k == "atom":
            return {ZERO}
        if k == "not":
            return h(state, phi.args[0])
        if k == "and":
            return h(state, phi.args[0]) | h(state, phi.args[1])
        ant, con = phi.args
        rk = g.rank_from(state)
        hits = [u for u in g.orders[state] if _boolean_holds(ant, letters[u])]
        if not hits:
            return {ZERO}
        u = hits[0]
        a = rk[u]
        return {ZERO} | {a + b for b in h(u, con)}

    return frozenset(h(0, core))


def _conds(f: Formula) -> Iterator[Formula]:
    stack = [f]
    while stack:
        g = stack.pop()
        if g.kind == "cond":
            yield g
        if g.kind not in ("atom", "meta", "top", "bot"):
            stack.extend(g.args)


def restrict(root: SeqExpr, positions: Iterable[OrdinalCNF | int]) -> list:
    """Elements at the given positions, in increasing order of position."""
    ps = sorted(OrdinalCNF.finite(p) if isinstance(p, int) else p for p in positions)
    L = length(root)
    for p in ps:
        if not p < L:
            raise IndexError(f"position {p} is out of range for a sequence of length {L}")
    return [element_at(root, p) for p in ps]
