"""Finite order frames and models, truth evaluation and frame analysis."""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Iterator, Mapping, Sequence

from .formula import Atom, Formula, Neg, Or, Cond, atoms_of

__all__ = [
    "OrderFrame", "Valuation", "PointedModel", "KripkeModel", "FrameValidationError",
    "FrameReport", "validate", "evaluate", "denotation", "frame_properties",
    "successor", "reachable_set", "is_ancestral", "successor_sequence",
    "kripke_to_flat_order", "order_to_selection", "selection_to_order",
    "SelectionError", "enumerate_frames", "EnumerationCapError", "gamma_finite_witness",
    "model_from_json", "model_to_json", "frame_from_orders", "DEFAULT_CAP",
]

DEFAULT_CAP = 4


class FrameValidationError(ValueError):
    """Carries every violation as ``(reason, world)`` pairs."""

    def __init__(self, violations: list[tuple[str, str]]):
        self.violations = violations
        super().__init__("; ".join(f"{r}: {w}" for r, w in violations))


@dataclass(frozen=True)
class OrderFrame:
    worlds: tuple[str, ...]
    after: Mapping[str, tuple[str, ...]]

    def __post_init__(self):
        object.__setattr__(self, "after", {w: tuple(self.after.get(w, ())) for w in self.worlds})

    def __hash__(self) -> int:
        return hash((self.worlds, tuple(self.after[w] for w in self.worlds)))

    def __eq__(self, other) -> bool:
        return (isinstance(other, OrderFrame) and self.worlds == other.worlds
                and all(self.after[w] == other.after[w] for w in self.worlds))

    def order(self, w: str) -> tuple[str, ...]:
        """Full well-order of R(w): w itself first."""
        return (w,) + self.after[w]

    def access(self, w: str) -> frozenset[str]:
        return frozenset(self.order(w))

    def precedes(self, w: str, x: str, y: str) -> bool:
        """x <_w y."""
        o = self.order(w)
        return x in o and y in o and o.index(x) < o.index(y)

    def to_json(self) -> dict:
        return {"worlds": list(self.worlds), "after": {w: list(self.after[w]) for w in self.worlds}}


@dataclass(frozen=True)
class Valuation:
    """Atom name to set of worlds; unlisted atoms are false everywhere."""

    table: Mapping[str, frozenset[str]] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "table", {k: frozenset(v) for k, v in self.table.items()})

    def __hash__(self) -> int:
        return hash(tuple(sorted((k, tuple(sorted(v))) for k, v in self.table.items())))

    def worlds_of(self, atom: str) -> frozenset[str]:
        return self.table.get(atom, frozenset())

    def to_json(self) -> dict:
        return {k: sorted(v) for k, v in sorted(self.table.items())}


@dataclass(frozen=True)
class PointedModel:
    frame: OrderFrame
    valuation: Valuation
    designated: str

    def __post_init__(self):
        if self.designated not in self.frame.worlds:
            raise FrameValidationError([("designated world not in frame", self.designated)])
        for atom, ws in self.valuation.table.items():
            bad = [w for w in ws if w not in self.frame.worlds]
            if bad:
                raise FrameValidationError([(f"valuation of {atom} names unknown world", b) for b in bad])

    def evaluate(self, f: Formula, world: str | None = None) -> bool:
        return evaluate(self, f, world)

    def to_json(self) -> dict:
        return model_to_json(self)


@dataclass(frozen=True)
class KripkeModel:
    worlds: tuple[str, ...]
    relation: frozenset[tuple[str, str]]
    valuation: Valuation
    designated: str

    def access(self, w: str) -> frozenset[str]:
        return frozenset(y for x, y in self.relation if x == w)


# ---------------------------------------------------------------- validation

def validate(desc) -> OrderFrame:
    """Build a frame from ``{"worlds": [...], "after": {...}}`` or a bare after-map."""
    if isinstance(desc, OrderFrame):
        desc = desc.to_json()
    if "after" in desc and isinstance(desc.get("after"), Mapping):
        after = {str(k): [str(x) for x in v] for k, v in desc["after"].items()}
        worlds = [str(w) for w in desc.get("worlds", list(after))]
    else:
        after = {str(k): [str(x) for x in v] for k, v in desc.items()}
        worlds = list(after)
    violations: list[tuple[str, str]] = []
    if len(set(worlds)) != len(worlds):
        violations.extend(("duplicate world", w) for w in worlds if worlds.count(w) > 1)
    known = set(worlds)
    for w in after:
        if w not in known:
            violations.append(("unknown world", w))
    for w in worlds:
        lst = after.get(w, [])
        if w in lst:
            violations.append(("world in own after-list", w))
        seen = set()
        for x in lst:
            if x in seen:
                violations.append(("duplicate", w))
            seen.add(x)
            if x not in known:
                violations.append(("unknown world", x))
    if violations:
        raise FrameValidationError(violations)
    return OrderFrame(tuple(worlds), {w: tuple(after.get(w, ())) for w in worlds})


def frame_from_orders(orders: Sequence[Sequence[int]], names: Sequence[str] | None = None) -> OrderFrame:
    """Frame from integer orders (each starting with its own world)."""
    n = len(orders)
    names = list(names) if names is not None else [f"w{i}" for i in range(n)]
    return OrderFrame(tuple(names), {names[w]: tuple(names[x] for x in orders[w][1:]) for w in range(n)})


# ---------------------------------------------------------------- semantics

def denotation(frame: OrderFrame, valuation: Valuation, f: Formula) -> frozenset[str]:
    """Set of worlds where ``f`` holds; derived connectives use their own clauses."""
    memo: dict[Formula, frozenset[str]] = {}
    W = frozenset(frame.worlds)

    def first_in(w: str, s: frozenset[str]) -> str | None:
        for x in frame.order(w):
            if x in s:
                return x
        return None

    def go(g: Formula) -> frozenset[str]:
        hit = memo.get(g)
        if hit is not None:
            return hit
        k = g.kind
        if k == "atom":
            out = valuation.worlds_of(g.name) & W
        elif k == "meta":
            raise ValueError("cannot evaluate a formula containing metavariables")
        elif k == "top":
            out = W
        elif k == "bot":
            out = frozenset()
        elif k == "not":
            out = W - go(g.args[0])
        elif k == "and":
            out = go(g.args[0]) & go(g.args[1])
        elif k == "or":
            out = go(g.args[0]) | go(g.args[1])
        elif k == "imp":
            out = (W - go(g.args[0])) | go(g.args[1])
        elif k == "iff":
            a, b = go(g.args[0]), go(g.args[1])
            out = W - (a ^ b)
        elif k == "box":
            a = go(g.args[0])
            out = frozenset(w for w in W if frame.access(w) <= a)
        elif k == "dia":
            a = go(g.args[0])
            out = frozenset(w for w in W if frame.access(w) & a)
        elif k in ("cond", "scond"):
            a, b = go(g.args[0]), go(g.args[1])
            res = set()
            for w in W:
                x = first_in(w, a)
                if k == "cond" and (x is None or x in b):
                    res.add(w)
                elif k == "scond" and x is not None and x in b:
                    res.add(w)
            out = frozenset(res)
        else:
            raise AssertionError(k)
        memo[g] = out
        return out

    return go(f)


def evaluate(m: PointedModel, f: Formula, world: str | None = None) -> bool:
    w = m.designated if world is None else world
    return w in denotation(m.frame, m.valuation, f)


# ---------------------------------------------------------------- frame properties

@dataclass(frozen=True)
class FrameReport:
    reflexive_accessibility: bool
    transitive: bool
    connected: bool
    semi_flat: bool
    flat: bool
    ancestral: bool

    def to_json(self) -> dict:
        return dict(self.__dict__)


def _is_transitive(fr: OrderFrame) -> bool:
    return all(fr.access(x) <= fr.access(w) for w in fr.worlds for x in fr.access(w))


def _is_connected(fr: OrderFrame) -> bool:
    for w in fr.worlds:
        R = fr.access(w)
        for x in R:
            for y in R:
                if x != y and y not in fr.access(x) and x not in fr.access(y):
                    return False
    return True


def _is_semi_flat(fr: OrderFrame) -> bool:
    """x <_w y and (y <=_w z or z in R(x) minus R(w)) imply y <=_x z."""
    for w in fr.worlds:
        ow = fr.order(w)
        Rw = set(ow)
        for i, x in enumerate(ow):
            ox = fr.order(x)
            pos_x = {v: k for k, v in enumerate(ox)}
            for y in ow[i + 1:]:
                targets = set(ow[ow.index(y):]) | (set(ox) - Rw)
                for z in targets:
                    # y <=_x z requires both in R(x) with y no later than z
                    if y not in pos_x or z not in pos_x or pos_x[y] > pos_x[z]:
                        return False
    return True


def frame_properties(fr: OrderFrame) -> FrameReport:
    semi = _is_semi_flat(fr)
    trans = _is_transitive(fr)
    return FrameReport(
        reflexive_accessibility=True,
        transitive=trans,
        connected=_is_connected(fr),
        semi_flat=semi,
        flat=semi and trans,
        ancestral=is_ancestral(fr),
    )


def successor(fr: OrderFrame, w: str) -> str:
    return fr.after[w][0] if fr.after[w] else w


def reachable_set(fr: OrderFrame, w: str) -> frozenset[str]:
    seen = {w}
    cur = w
    while True:
        nxt = successor(fr, cur)
        if nxt in seen:
            return frozenset(seen)
        seen.add(nxt)
        cur = nxt


def is_ancestral(fr: OrderFrame) -> bool:
    return all(fr.access(w) <= reachable_set(fr, w) for w in fr.worlds)


def successor_sequence(fr: OrderFrame, w: str):
    """The successor orbit of w as prefix plus cycle."""
    from .seq_model import Lasso

    path: list[str] = []
    pos: dict[str, int] = {}
    cur = w
    while cur not in pos:
        pos[cur] = len(path)
        path.append(cur)
        cur = successor(fr, cur)
    k = pos[cur]
    return Lasso(tuple(path[:k]), tuple(path[k:]))


# ---------------------------------------------------------------- transforms

def kripke_to_flat_order(k: KripkeModel, tie_order: Sequence[str]) -> OrderFrame:
    """Flat order frame agreeing with a reflexive, transitive, connected relation."""
    W = list(k.worlds)
    R = {w: k.access(w) for w in W}
    for w in W:
        if w not in R[w]:
            raise ValueError(f"relation not reflexive at ({w}, {w})")
        for x in R[w]:
            for y in R[x]:
                if y not in R[w]:
                    raise ValueError(f"relation not transitive at ({w}, {x}, {y})")
        for x in R[w]:
            for y in R[w]:
                if x != y and y not in R[x] and x not in R[y]:
                    raise ValueError(f"relation not connected at ({x}, {y})")
    if sorted(tie_order) != sorted(W):
        raise ValueError("tie order must list every world exactly once")
    rank = {w: i for i, w in enumerate(tie_order)}
    for x in W:
        for y in W:
            if rank[x] < rank[y] and y not in R[x]:
                raise ValueError(f"tie order puts {x} before {y} but ({x}, {y}) is not in the relation")
    after = {w: tuple(sorted((x for x in R[w] if x != w), key=rank.get)) for w in W}
    return OrderFrame(tuple(W), after)


class SelectionError(ValueError):
    def __init__(self, constraint: int, detail: str):
        super().__init__(f"constraint {constraint} violated: {detail}")
        self.constraint = constraint


def _subsets(ws: Sequence[str]) -> Iterator[frozenset[str]]:
    for r in range(len(ws) + 1):
        for c in itertools.combinations(ws, r):
            yield frozenset(c)


def order_to_selection(fr: OrderFrame) -> dict[tuple[frozenset[str], str], frozenset[str]]:
    table = {}
    for phi in _subsets(fr.worlds):
        for w in fr.worlds:
            first = next((x for x in fr.order(w) if x in phi), None)
            table[(phi, w)] = frozenset() if first is None else frozenset({first})
    return table


def _check_selection(table, worlds: Sequence[str]) -> None:
    subsets = list(_subsets(worlds))
    for w in worlds:
        for phi in subsets:
            val = table[(phi, w)]
            if w in phi and w not in val:
                raise SelectionError(1, f"f({sorted(phi)}, {w}) omits {w}")
            if not val <= phi:
                raise SelectionError(3, f"f({sorted(phi)}, {w}) leaves the set")
            if len(val) > 1:
                raise SelectionError(4, f"f({sorted(phi)}, {w}) has {len(val)} members")
        for phi in subsets:
            for psi in subsets:
                a, b = table[(phi, w)], table[(psi, w)]
                if a <= psi and b <= phi and a != b:
                    raise SelectionError(2, f"f({sorted(phi)}, {w}) and f({sorted(psi)}, {w}) differ")


def selection_to_order(table, worlds: Sequence[str] | None = None) -> OrderFrame:
    if worlds is None:
        worlds = sorted({w for _, w in table})
    worlds = list(worlds)
    missing = [(p, w) for p in _subsets(worlds) for w in worlds if (p, w) not in table]
    if missing:
        raise ValueError(f"selection table incomplete, e.g. at {sorted(missing[0][0])}, {missing[0][1]}")
    _check_selection(table, worlds)
    after = {}
    for w in worlds:
        R = [x for x in worlds if table[(frozenset({x}), w)] == frozenset({x})]

        def before(x, y):
            return table[(frozenset({x, y}), w)] == frozenset({x})

        # R is totally ordered by the pairwise choices (constraint 2 gives transitivity)
        ordered = sorted(R, key=lambda x: sum(1 for y in R if y != x and before(y, x)))
        if ordered[0] != w:
            raise SelectionError(1, f"{w} is not first in its own order")
        after[w] = tuple(ordered[1:])
    return OrderFrame(tuple(worlds), after)


# ---------------------------------------------------------------- enumeration

class EnumerationCapError(ValueError):
    pass


def _after_choices(n: int, w: int) -> list[tuple[int, ...]]:
    others = [x for x in range(n) if x != w]
    out = []
    for r in range(len(others) + 1):
        out.extend(itertools.permutations(others, r))
    return out


@lru_cache(maxsize=None)
def _canonical_frames(n: int) -> tuple[tuple[tuple[int, ...], ...], ...]:
    """Orbit representatives (lexicographically least relabeling) of all frames."""
    perms = list(itertools.permutations(range(n)))
    reps = []
    for combo in itertools.product(*[_after_choices(n, w) for w in range(n)]):
        best = combo
        for p in perms[1:]:
            new = [None] * n
            for w in range(n):
                new[p[w]] = tuple(p[x] for x in combo[w])
            t = tuple(new)
            if t < best:
                best = t
                break
        if best == combo:
            reps.append(combo)
    return tuple(reps)


def enumerate_frames(n: int, cls: str = "all", cap: int = DEFAULT_CAP) -> Iterator[OrderFrame]:
    """Frames on worlds w0..w{n-1}, one per renaming class, in lexicographic after-list order."""
    if n < 1:
        raise ValueError("n must be at least 1")
    if n > cap:
        raise EnumerationCapError(f"n={n} exceeds the enumeration cap {cap}")
    if cls not in ("all", "flat", "flat_ancestral"):
        raise ValueError(f"unknown frame class {cls!r}")
    for combo in _canonical_frames(n):
        fr = frame_from_orders([(w,) + combo[w] for w in range(n)])
        if cls != "all":
            rep = frame_properties(fr)
            if not rep.flat or (cls == "flat_ancestral" and not rep.ancestral):
                continue
        yield fr


def canonical_orders(n: int) -> tuple[tuple[tuple[int, ...], ...], ...]:
    """Integer full orders (own world first) of every canonical frame of size n."""
    return tuple(tuple((w,) + combo[w] for w in range(n)) for combo in _canonical_frames(n))


# ---------------------------------------------------------------- constructions

def gamma_finite_witness(k: int) -> PointedModel:
    """Worlds w0..wk; wk orders the rest downward; p_i true exactly at w_i."""
    if k < 1:
        raise ValueError("k must be at least 1")
    names = [f"w{i}" for i in range(k + 1)]
    after = {w: () for w in names}
    after[names[k]] = tuple(reversed(names[:k]))
    val = Valuation({f"p{i}": {names[i]} for i in range(k + 1)})
    return PointedModel(OrderFrame(tuple(names), after), val, names[k])


def gamma_sentences(k: int) -> list[Formula]:
    return [Neg(Cond(Or(Atom(i), Atom(i + 1)), Atom(i))) for i in range(k)]


# ---------------------------------------------------------------- JSON

def model_from_json(data) -> PointedModel:
    if isinstance(data, str):
        data = json.loads(data)
    fr = validate({"worlds": data.get("worlds", list(data["after"])), "after": data["after"]})
    val = Valuation({k: set(map(str, v)) for k, v in data.get("valuation", {}).items()})
    designated = str(data.get("designated", fr.worlds[0]))
    return PointedModel(fr, val, designated)


def model_to_json(m: PointedModel) -> dict:
    out = m.frame.to_json()
    out["valuation"] = m.valuation.to_json()
    out["designated"] = m.designated
    return out


def restrict_valuation(m: PointedModel, atoms: Iterable[Formula]) -> PointedModel:
    names = {a.name for a in atoms}
    return PointedModel(m.frame, Valuation({k: v for k, v in m.valuation.table.items() if k in names}), m.designated)


def truth_table(m: PointedModel, f: Formula) -> dict[str, bool]:
    den = denotation(m.frame, m.valuation, f)
    return {w: w in den for w in m.frame.worlds}


def used_atoms(f: Formula) -> list[str]:
    return [a.name for a in atoms_of(f)]
