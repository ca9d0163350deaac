"""Probabilities of conditionals under product measures.

Sequences are i.i.d. draws from a protoworld measure; atoms look only at the
first draw. Trees label every list of naturals with an independent draw.

The exact engine tracks, after each draw, the truth of the formula as a
Boolean function of the conditionals still pending at the next tail. Those
functions form a finite absorbing chain whose absorption probabilities are
solved over the rationals. Chains that fail to absorb are outside the exact
scope and are refused.
"""

from __future__ import annotations

import json
import math
from bisect import bisect_right
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Mapping, Sequence

import numpy as np

from .formula import TOP, And, Cond, Formula, Neg, atoms_of, is_boolean, normalize, parse, sort_key, to_text
from .seq_model import ProtoworldTable

__all__ = [
    "ProtoMeasure", "ProductSpec", "Estimate", "ExactScopeError", "ZeroDenominatorError", "ExplorationCapError",
    "HorizonAbortError", "load_spec", "exact_prob", "exact_details", "mc_prob_seq", "mc_prob_tree",
    "conditional_prob", "stalnaker_report", "nested_closed_form", "vacuous_substitute",
]


class ExactScopeError(ValueError):
    """The pending-conditional chain does not absorb; use Monte Carlo."""


class ZeroDenominatorError(ZeroDivisionError):
    pass


class ExplorationCapError(RuntimeError):
    pass


class HorizonAbortError(RuntimeError):
    pass


# ---------------------------------------------------------------- measures

@dataclass(frozen=True)
class ProtoMeasure:
    weights: Mapping[str, Fraction]

    def __post_init__(self):
        w = {str(k): Fraction(v) for k, v in self.weights.items()}
        if any(x < 0 for x in w.values()):
            raise ValueError("protoworld weights must be non-negative")
        if sum(w.values()) != 1:
            raise ValueError(f"protoworld weights sum to {sum(w.values())}, not 1")
        object.__setattr__(self, "weights", w)

    @property
    def protoworlds(self) -> tuple[str, ...]:
        return tuple(self.weights)

    def __getitem__(self, w: str) -> Fraction:
        return self.weights[w]

    def mass(self, pred: Callable[[str], bool]) -> Fraction:
        return sum((x for w, x in self.weights.items() if pred(w)), Fraction(0))


@dataclass(frozen=True)
class ProductSpec:
    measure: ProtoMeasure
    table: ProtoworldTable
    shape: str = "omega"

    def __post_init__(self):
        if self.shape not in ("omega", "tree"):
            raise ValueError("shape must be 'omega' or 'tree'")
        unknown = {w for s in self.table.atoms.values() for w in s} - set(self.measure.protoworlds)
        if unknown:
            raise ValueError(f"atom table names unknown protoworlds {sorted(unknown)}")

    def with_shape(self, shape: str) -> "ProductSpec":
        return ProductSpec(self.measure, self.table, shape)

    def holds(self, f: Formula, w: str) -> bool:
        """Truth of a Boolean formula at a protoworld."""
        return _bool_eval(f, lambda a: self.table.holds(a, w))

    def mass(self, f: Formula) -> Fraction:
        return self.measure.mass(lambda w: self.holds(f, w))

    def to_json(self) -> dict:
        return {"pi": {w: str(x) for w, x in self.measure.weights.items()},
                "atoms": {a: sorted(s) for a, s in sorted(self.table.atoms.items())}, "shape": self.shape}

    @classmethod
    def from_json(cls, data: Mapping) -> "ProductSpec":
        pi = ProtoMeasure({k: Fraction(str(v)) for k, v in data["pi"].items()})
        table = ProtoworldTable({k: set(v) for k, v in data.get("atoms", {}).items()}, pi.protoworlds)
        return cls(pi, table, data.get("shape", "omega"))

    @classmethod
    def from_letters(cls, atoms: Sequence[str], weights: Mapping[str, Fraction | str], shape: str = "omega"):
        """Protoworlds named by literal strings such as ``"p&~q"``."""
        table: dict[str, set] = {a: set() for a in atoms}
        for name in weights:
            for lit in name.split("&"):
                lit = lit.strip()
                if lit and not lit.startswith("~"):
                    table[lit].add(name)
        pi = ProtoMeasure({k: Fraction(str(v)) for k, v in weights.items()})
        return cls(pi, ProtoworldTable(table, pi.protoworlds), shape)


def load_spec(path: str) -> ProductSpec:
    with open(path, encoding="utf-8") as fh:
        return ProductSpec.from_json(json.load(fh))


def _bool_eval(f: Formula, atom: Callable[[str], bool]) -> bool:
    k = f.kind
    if k == "atom":
        return atom(f.name)
    if k == "top":
        return True
    if k == "bot":
        return False
    if k == "not":
        return not _bool_eval(f.args[0], atom)
    if k == "and":
        return _bool_eval(f.args[0], atom) and _bool_eval(f.args[1], atom)
    if k == "or":
        return _bool_eval(f.args[0], atom) or _bool_eval(f.args[1], atom)
    if k == "imp":
        return (not _bool_eval(f.args[0], atom)) or _bool_eval(f.args[1], atom)
    if k == "iff":
        return _bool_eval(f.args[0], atom) == _bool_eval(f.args[1], atom)
    raise ValueError(f"not Boolean: {to_text(f)}")


def vacuous_substitute(f: Formula, spec: ProductSpec) -> tuple[Formula, list[Formula]]:
    """Replace conditionals whose Boolean antecedent has zero mass by T.

    No such antecedent is ever drawn almost surely, so the vacuous clause decides.
    """
    hits: list[Formula] = []

    def go(g: Formula) -> Formula:
        if g.kind in ("atom", "top", "bot", "meta"):
            return g
        args = tuple(go(x) for x in g.args)
        if g.kind == "cond" and is_boolean(args[0]) and spec.mass(args[0]) == 0:
            hits.append(g)
            return TOP
        return g if args == g.args else Formula(g.kind, args)

    return go(normalize(f)), hits


# ---------------------------------------------------------------- Boolean functions over pending conditionals

@dataclass(frozen=True)
class _Fn:
    """Truth table over ``vars``: bit i of ``table`` is the value at assignment i."""

    vars: tuple[Formula, ...]
    table: int

    @property
    def const(self) -> bool | None:
        if self.vars:
            return None
        return bool(self.table & 1)


_TRUE = _Fn((), 1)
_FALSE = _Fn((), 0)


def _var(c: Formula) -> _Fn:
    return _Fn((c,), 0b10)


def _lift(fn: _Fn, U: tuple) -> list[bool]:
    pos = [U.index(v) for v in fn.vars]
    out = []
    for a in range(1 << len(U)):
        i = 0
        for j, p in enumerate(pos):
            if (a >> p) & 1:
                i |= 1 << j
        out.append(bool((fn.table >> i) & 1))
    return out


def _make(U: tuple, values: list[bool]) -> _Fn:
    """Build and drop variables the table does not depend on."""
    U = list(U)
    vals = list(values)
    j = 0
    while j < len(U):
        bit = 1 << j
        if all(vals[a] == vals[a | bit] for a in range(len(vals)) if not a & bit):
            vals = [vals[a] for a in range(len(vals)) if not a & bit]
            # re-index: remove bit j
            U.pop(j)
        else:
            j += 1
    order = sorted(range(len(U)), key=lambda i: sort_key(U[i]))
    U2 = tuple(U[i] for i in order)
    table = 0
    for a in range(1 << len(U2)):
        src = 0
        for newpos, oldpos in enumerate(order):
            if (a >> newpos) & 1:
                src |= 1 << oldpos
        if vals[src]:
            table |= 1 << a
    return _Fn(U2, table)


def _union(fns: Sequence[_Fn]) -> tuple:
    seen: dict[Formula, None] = {}
    for f in fns:
        for v in f.vars:
            seen.setdefault(v)
    return tuple(seen)


def _apply(op: Callable[..., bool], *fns: _Fn) -> _Fn:
    U = _union(fns)
    cols = [_lift(f, U) for f in fns]
    return _make(U, [op(*(c[a] for c in cols)) for a in range(1 << len(U))])


class _Chain:
    def __init__(self, f: Formula, spec: ProductSpec):
        self.spec = spec
        self.f = f
        self.pws = [w for w in spec.measure.protoworlds if spec.measure[w] > 0]
        self.memo: dict[tuple, _Fn] = {}

    def reduce(self, g: Formula, w: str) -> _Fn:
        """Truth of ``g`` at a tail whose first draw is ``w``, over conditionals at the next tail."""
        key = (g, w)
        hit = self.memo.get(key)
        if hit is not None:
            return hit
        k = g.kind
        if k == "atom":
            out = _TRUE if self.spec.table.holds(g.name, w) else _FALSE
        elif k == "not":
            out = _apply(lambda x: not x, self.reduce(g.args[0], w))
        elif k == "and":
            out = _apply(lambda x, y: x and y, self.reduce(g.args[0], w), self.reduce(g.args[1], w))
        elif k == "cond":
            a = self.reduce(g.args[0], w)
            if a.const is True:
                out = self.reduce(g.args[1], w)
            elif a.const is False:
                out = _var(g)
            else:
                out = _apply(lambda x, y, z: y if x else z, a, self.reduce(g.args[1], w), _var(g))
        elif k == "top":
            out = _TRUE
        elif k == "bot":
            out = _FALSE
        else:
            raise AssertionError(k)
        self.memo[key] = out
        return out

    def step(self, s: _Fn, w: str) -> _Fn:
        if s.const is not None:
            return s
        subs = [self.reduce(v, w) for v in s.vars]
        U = _union(subs)
        cols = [_lift(x, U) for x in subs]
        vals = []
        for a in range(1 << len(U)):
            i = 0
            for j, c in enumerate(cols):
                if c[a]:
                    i |= 1 << j
            vals.append(bool((s.table >> i) & 1))
        return _make(U, vals)

    def solve(self, max_states: int = 5000) -> tuple[Fraction, int]:
        pi = self.spec.measure
        start = {w: self.reduce(self.f, w) for w in self.pws}
        states: dict[_Fn, int] = {}
        trans: list[dict[_Fn, Fraction]] = []
        todo = [s for s in start.values() if s.const is None]
        while todo:
            s = todo.pop()
            if s in states:
                continue
            states[s] = len(states)
            if len(states) > max_states:
                raise ExactScopeError("pending-conditional chain exceeds the state cap")
            row: dict[_Fn, Fraction] = {}
            for w in self.pws:
                t = self.step(s, w)
                row[t] = row.get(t, Fraction(0)) + pi[w]
                if t.const is None and t not in states:
                    todo.append(t)
            trans.append(row)
        order = list(states)
        # absorption: every state must reach a constant
        reach = {s for s, i in states.items() if any(t.const is not None for t in trans[i])}
        changed = True
        while changed:
            changed = False
            for s, i in states.items():
                if s not in reach and any(t in reach for t in trans[i]):
                    reach.add(s)
                    changed = True
        if len(reach) != len(states):
            raise ExactScopeError("some pending conditional never resolves with positive probability")
        n = len(order)
        A = [[Fraction(0)] * n + [Fraction(0)] for _ in range(n)]
        for i, s in enumerate(order):
            A[i][i] += 1
            for t, p in trans[i].items():
                if t.const is None:
                    A[i][states[t]] -= p
                elif t.const:
                    A[i][n] += p
        x = _gauss(A)
        total = Fraction(0)
        for w, s in start.items():
            total += pi[w] * (Fraction(int(s.const)) if s.const is not None else x[states[s]])
        return total, n


def _gauss(A: list[list[Fraction]]) -> list[Fraction]:
    n = len(A)
    for c in range(n):
        p = next(r for r in range(c, n) if A[r][c] != 0)
        A[c], A[p] = A[p], A[c]
        piv = A[c][c]
        A[c] = [v / piv for v in A[c]]
        for r in range(n):
            if r != c and A[r][c] != 0:
                k = A[r][c]
                A[r] = [a - k * b for a, b in zip(A[r], A[c])]
    return [A[r][n] for r in range(n)]


@dataclass
class ExactResult:
    value: Fraction
    states: int
    vacuous: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        return {"value": str(self.value), "float": float(self.value), "states": self.states,
                "vacuous_antecedents": self.vacuous}


def exact_details(f: Formula | str, spec: ProductSpec) -> ExactResult:
    if isinstance(f, str):
        f = parse(f)
    if spec.shape != "omega":
        raise ExactScopeError("the exact engine covers sequence measures only")
    g, hits = vacuous_substitute(f, spec)
    value, n = _Chain(g, spec).solve()
    return ExactResult(value, n, [to_text(h) for h in hits])


def exact_prob(f: Formula | str, spec: ProductSpec) -> Fraction:
    return exact_details(f, spec).value


def nested_closed_form(spec: ProductSpec, p: Formula, q: Formula) -> Fraction:
    """P((p>q)>p) on sequences for Boolean p, q, by the renewal equation.

    Restart after each p-and-not-q element. From a restart the first element is
    p-and-q (success), p-and-not-q (restart), or not-p, in which case the next
    p-element decides: p-and-q fails, p-and-not-q restarts.
    """
    a = spec.mass(And(p, q))
    b = spec.mass(And(p, Neg(q)))
    c = 1 - a - b
    if a + b == 0:
        return Fraction(0)       # p > q is vacuous, so the outer antecedent holds at the root
    if a == 0:
        return Fraction(1)       # p > q never holds, so the outer conditional is vacuous
    return a / (1 - b - c * b / (a + b))


# ---------------------------------------------------------------- Monte Carlo

@dataclass
class Estimate:
    value: float
    stderr: float
    samples: int
    seed: int
    aborts: int = 0

    def to_json(self) -> dict:
        return {"value": self.value, "stderr": self.stderr, "samples": self.samples, "seed": self.seed,
                "aborts": self.aborts}

    def within(self, target: float, k: float = 4.0) -> bool:
        return abs(self.value - float(target)) <= k * self.stderr + 1e-12


def _estimate(x: np.ndarray, seed: int, aborts: int = 0) -> Estimate:
    n = len(x)
    mean = float(x.mean()) if n else 0.0
    sd = float(x.std(ddof=1)) if n > 1 else 0.0
    return Estimate(mean, sd / math.sqrt(n) if n else 0.0, n, seed, aborts)


BLOCK = 4096
H0 = 32
HMAX = 1 << 13
ABORT_LIMIT = 0.001


def _stream(seed: int, block: int, rnd: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed & (2**64 - 1), block, rnd])))


class _SeqEval:
    def __init__(self, spec: ProductSpec):
        pws = [w for w in spec.measure.protoworlds]
        self.pws = pws
        self.cum = np.cumsum([float(spec.measure[w]) for w in pws])
        self.cum[-1] = 1.0
        self.truth = {a: np.array([spec.table.holds(a, w) for w in pws], bool) for a in spec.table.atoms}

    def draw(self, gen: np.random.Generator, shape) -> np.ndarray:
        idx = np.searchsorted(self.cum, gen.random(shape), side="right")
        # zero-weight protoworlds are never drawn
        return np.minimum(idx, len(self.pws) - 1).astype(np.int32)

    def eval(self, g: Formula, D: np.ndarray, memo: dict) -> tuple[np.ndarray, np.ndarray]:
        hit = memo.get(g)
        if hit is not None:
            return hit
        k = g.kind
        B, H = D.shape
        if k == "atom":
            t = self.truth.get(g.name)
            val = t[D] if t is not None else np.zeros_like(D, bool)
            out = (val, np.ones_like(val))
        elif k == "top":
            out = (np.ones((B, H), bool), np.ones((B, H), bool))
        elif k == "bot":
            out = (np.zeros((B, H), bool), np.ones((B, H), bool))
        elif k == "not":
            v, d = self.eval(g.args[0], D, memo)
            out = (~v, d)
        elif k == "and":
            v1, d1 = self.eval(g.args[0], D, memo)
            v2, d2 = self.eval(g.args[1], D, memo)
            out = (v1 & v2, (d1 & d2) | (d1 & ~v1) | (d2 & ~v2))
        elif k == "cond":
            va, da = self.eval(g.args[0], D, memo)
            vb, db = self.eval(g.args[1], D, memo)
            pos = np.broadcast_to(np.arange(H), (B, H))
            t_idx = np.where(da & va, pos, H)
            u_idx = np.where(~da, pos, H)
            nt = np.minimum.accumulate(t_idx[:, ::-1], axis=1)[:, ::-1]
            nu = np.minimum.accumulate(u_idx[:, ::-1], axis=1)[:, ::-1]
            ok = (nt < H) & (nt < nu)
            at = np.minimum(nt, H - 1)
            val = np.take_along_axis(vb, at, 1)
            dd = ok & np.take_along_axis(db, at, 1)
            out = (val, dd)
        else:
            raise AssertionError(k)
        memo[g] = out
        return out

    def root(self, g: Formula, D: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        v, d = self.eval(g, D, {})
        return v[:, 0], d[:, 0]


def mc_prob_seq(f: Formula | str, spec: ProductSpec, samples: int = 100_000, seed: int = 0,
                horizon_cap: int = HMAX) -> Estimate:
    """Sample sequences in fixed blocks; each block's draws depend only on (seed, block, round)."""
    if isinstance(f, str):
        f = parse(f)
    g, _ = vacuous_substitute(f, spec)
    ev = _SeqEval(spec)
    out = np.empty(samples, np.float64)
    aborts = 0
    for b, s0 in enumerate(range(0, samples, BLOCK)):
        n = min(BLOCK, samples - s0)
        D = ev.draw(_stream(seed, b, 0), (BLOCK, H0))[:n]
        val, dd = ev.root(g, D)
        res = val.copy()
        pending = np.flatnonzero(~dd)
        rnd, H = 0, H0
        while pending.size and H < horizon_cap:
            rnd += 1
            extra = ev.draw(_stream(seed, b, rnd), (BLOCK, H))[:n]
            D = np.concatenate([D, extra], axis=1)
            H *= 2
            v2, d2 = ev.root(g, D[pending])
            res[pending] = v2
            pending = pending[~d2]
        if pending.size:
            aborts += int(pending.size)
            res[pending] = True      # vacuous rule
        out[s0:s0 + n] = res
    if aborts > ABORT_LIMIT * samples:
        raise HorizonAbortError(f"{aborts} of {samples} draws did not settle within {horizon_cap} tails")
    return _estimate(out, seed, aborts)


_MASK = (1 << 64) - 1


def _mix(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK
    return x ^ (x >> 31)


class _TreeEval:
    """Lazy tree: a node is the hash of its address; its protoworld is a function of that hash."""

    def __init__(self, spec: ProductSpec, cap: int):
        self.pws = list(spec.measure.protoworlds)
        self.cum = [float(x) for x in np.cumsum([float(spec.measure[w]) for w in self.pws])]
        self.cum[-1] = 1.0
        self.truth = {a: [spec.table.holds(a, w) for w in self.pws] for a in spec.table.atoms}
        self.cap = cap
        self.memo: dict = {}
        self.labels: dict[int, int] = {}

    def label(self, h: int) -> int:
        lab = self.labels.get(h)
        if lab is None:
            u = (_mix(h ^ 0x5851F42D4C957F2D) >> 11) / float(1 << 53)
            lab = min(bisect_right(self.cum, u), len(self.pws) - 1)
            self.labels[h] = lab
        return lab

    @staticmethod
    def child(h: int, n: int) -> int:
        return _mix(h ^ _mix(n + 1))

    def eval(self, g: Formula, h: int) -> bool:
        key = (g, h)
        hit = self.memo.get(key)
        if hit is not None:
            return hit
        k = g.kind
        if k == "atom":
            t = self.truth.get(g.name)
            out = bool(t[self.label(h)]) if t is not None else False
        elif k == "not":
            out = not self.eval(g.args[0], h)
        elif k == "and":
            out = self.eval(g.args[0], h) and self.eval(g.args[1], h)
        elif k == "top":
            out = True
        elif k == "bot":
            out = False
        elif k == "cond":
            a, b = g.args
            if self.eval(a, h):
                out = self.eval(b, h)
            else:
                for n in range(self.cap):
                    c = self.child(h, n)
                    if self.eval(a, c):
                        out = self.eval(b, c)
                        break
                else:
                    raise ExplorationCapError(f"no branch satisfies {to_text(a)} among the first {self.cap}")
        else:
            raise AssertionError(k)
        self.memo[key] = out
        return out


def mc_prob_tree(f: Formula | str, spec: ProductSpec, samples: int = 100_000, seed: int = 0,
                 cap: int = 100_000) -> Estimate:
    """Branches are probed 0, 1, 2, ... at each node; sample i's tree depends only on (seed, i)."""
    if isinstance(f, str):
        f = parse(f)
    g, _ = vacuous_substitute(f, spec)
    base = _mix(seed & _MASK)
    out = np.empty(samples, np.float64)
    for i in range(samples):
        ev = _TreeEval(spec, cap)
        out[i] = ev.eval(g, _mix(base ^ _mix(i)))
    return _estimate(out, seed)


# ---------------------------------------------------------------- conditional probability

def _ratio(num: np.ndarray, den: np.ndarray, seed: int) -> Estimate:
    n = len(den)
    mden = den.mean()
    if mden == 0:
        raise ZeroDenominatorError("conditioning event never occurred in the sample")
    r = num.mean() / mden
    resid = num - r * den
    se = float(resid.std(ddof=1) / (mden * math.sqrt(n))) if n > 1 else 0.0
    return Estimate(float(r), se, n, seed)


def conditional_prob(f: Formula | str, g: Formula | str, spec: ProductSpec, method: str = "exact",
                     samples: int = 100_000, seed: int = 0):
    """P(f | g): a Fraction for ``exact``, else a ratio Estimate with a delta-method error."""
    f = parse(f) if isinstance(f, str) else f
    g = parse(g) if isinstance(g, str) else g
    if method == "exact":
        den = exact_prob(g, spec)
        if den == 0:
            raise ZeroDenominatorError(f"P({to_text(g)}) = 0")
        return exact_prob(And(f, g), spec) / den
    num, den = _indicators([And(f, g), g], spec, method, samples, seed)
    return _ratio(num, den, seed)


def _indicators(fs: Sequence[Formula], spec: ProductSpec, method: str, samples: int, seed: int):
    """Per-sample indicators of several formulas on the same draws."""
    if method == "mc":
        ev = _SeqEval(spec)
        outs = [np.empty(samples, np.float64) for _ in fs]
        gs = [vacuous_substitute(f, spec)[0] for f in fs]
        for b, s0 in enumerate(range(0, samples, BLOCK)):
            n = min(BLOCK, samples - s0)
            D = ev.draw(_stream(seed, b, 0), (BLOCK, H0))[:n]
            H, rnd = H0, 0
            while True:
                memo: dict = {}
                vals = [ev.eval(g, D, memo) for g in gs]
                if all(d[:, 0].all() for _, d in vals) or H >= HMAX:
                    break
                rnd += 1
                D = np.concatenate([D, ev.draw(_stream(seed, b, rnd), (BLOCK, H))[:n]], axis=1)
                H *= 2
            for o, (v, d) in zip(outs, vals):
                o[s0:s0 + n] = v[:, 0] | ~d[:, 0]
        return outs
    if method == "tree":
        gs = [vacuous_substitute(f, spec)[0] for f in fs]
        base = _mix(seed & _MASK)
        outs = [np.empty(samples, np.float64) for _ in fs]
        for i in range(samples):
            ev = _TreeEval(spec, 100_000)
            h = _mix(base ^ _mix(i))
            for o, g in zip(outs, gs):
                o[i] = ev.eval(g, h)
        return outs
    raise ValueError(f"unknown method {method!r}")


# ---------------------------------------------------------------- facts report

def _is_zero_degree(f: Formula) -> bool:
    g = normalize(f)
    return g.kind == "cond" and is_boolean(g.args[0]) and is_boolean(g.args[1])


def _conjuncts(f: Formula) -> list[Formula]:
    if f.kind == "and":
        return _conjuncts(f.args[0]) + _conjuncts(f.args[1])
    return [f]


def _bool_or_zero_degree_conj(f: Formula) -> bool:
    return all(is_boolean(c) or _is_zero_degree(c) for c in _conjuncts(f))


def stalnaker_report(p: Formula | str, q: Formula | str, r: Formula | str | None, spec: ProductSpec,
                     samples: int = 100_000, seed: int = 0) -> dict:
    """Compare P(p>q | r) with P(q | p) under each applicable fact's side conditions."""
    p, q = (parse(x) if isinstance(x, str) else x for x in (p, q))
    r = TOP if r is None else (parse(r) if isinstance(r, str) else r)
    cond = Cond(p, q)
    facts: dict[str, dict] = {}

    def compare(method: str, sp: ProductSpec) -> dict:
        if method == "exact":
            lhs = conditional_prob(cond, r, sp, "exact")
            rhs = conditional_prob(q, p, sp, "exact")
            return {"method": "exact", "lhs": str(lhs), "rhs": str(rhs), "agree": lhs == rhs}
        lhs = conditional_prob(cond, r, sp, method, samples, seed)
        rhs = conditional_prob(q, p, sp, method, samples, seed + 1)
        gap = abs(lhs.value - rhs.value)
        tol = 4 * math.hypot(lhs.stderr, rhs.stderr)
        return {"method": method, "lhs": lhs.to_json(), "rhs": rhs.to_json(), "agree": gap <= tol + 1e-12,
                "tolerance": tol}

    seq_spec = spec.with_shape("omega")
    tree_spec = spec.with_shape("tree")

    def run(shape: str) -> dict:
        if shape == "tree":
            return {"status": "applicable", **compare("tree", tree_spec)}
        try:
            return {"status": "applicable", **compare("exact", seq_spec)}
        except ExactScopeError:
            return {"status": "applicable", **compare("mc", seq_spec)}

    both_bool = is_boolean(p) and is_boolean(q)
    mixed = (is_boolean(p) and _is_zero_degree(q)) or (_is_zero_degree(p) and is_boolean(q))
    try:
        p_pos = exact_prob(p, seq_spec) > 0
        r_given_p = conditional_prob(r, p, seq_spec, "exact") if p_pos else None
    except ExactScopeError:
        p_pos, r_given_p = None, None

    def unmet(why: str) -> dict:
        return {"status": "side condition unmet", "why": why}

    if r != TOP:
        facts["vFfact"] = unmet("the conditioning sentence is not T")
    elif not p_pos:
        facts["vFfact"] = unmet("the antecedent has no positive probability")
    elif not (both_bool or mixed):
        facts["vFfact"] = unmet("needs both Boolean, or one Boolean and one zero-degree conditional")
    else:
        facts["vFfact"] = run("omega")
    if not (_bool_or_zero_degree_conj(p) and _bool_or_zero_degree_conj(r)):
        facts["strongfact"] = unmet("antecedent and condition must be conjunctions of Booleans and "
                                    "zero-degree conditionals")
    elif not p_pos:
        facts["strongfact"] = unmet("the antecedent has no positive probability")
    elif r_given_p != 1:
        facts["strongfact"] = unmet("P(condition | antecedent) is not 1")
    else:
        facts["strongfact"] = run("omega")
    tree_p_pos = is_boolean(p) and spec.mass(p) > 0
    if not (is_boolean(p) and is_boolean(r)):
        facts["treefact"] = unmet("antecedent and condition must be Boolean in trees")
        facts["treefact"]["observed"] = run("tree")
        facts["treefact"]["observed"]["note"] = "divergence allowed"
    elif not tree_p_pos:
        facts["treefact"] = unmet("the antecedent has no positive probability")
    elif (spec.mass(And(p, r)) != spec.mass(p)):
        facts["treefact"] = unmet("P(condition | antecedent) is not 1")
    else:
        facts["treefact"] = run("tree")
    return {"p": to_text(p), "q": to_text(q), "r": to_text(r), "facts": facts}
