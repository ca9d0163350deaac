"""State descriptions, the list-to-sentence builder, the consistency oracle,
list classification, the sequence construction and canonical models.

A state description is stored structurally: depth 0 is the set of true atoms,
depth n+1 is the tuple of depth-n descriptions whose sentence, closed with a
final bottom, it denotes. Its sentence is rebuilt on demand.

Consistency of a description list is settled, in order, by:

* exact refutations: repeated elements, inconsistent elements, the projection
  rule (first occurrences of the element heads match the first element's own
  list), and for logics with Flattening the tail-decomposition rule below;
* exact confirmations: a list model for depth-0 elements, the union-plus-root
  model for C2, the sequence construction for bottom-terminated lists, or a
  realised type found by searching the logic's frames;
* the logic-specific refutations for circuitous lists (sequence logics reject
  non-bottom ones, final logics reject bottom-terminated ones);
* otherwise "no", exact only when the search reached ``ceil(3 k!/2)`` tails.

Every confirmation carries a model on which the list's sentence is evaluated.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

from . import kernels
from .classes import LogicId, frames_of_size, parse_logic
from .formula import (
    BOT, TOP, And, Atom, Cond, Formula, Neg, SCond, conj, disj, sort_key, to_text,
)
from .ordinal import OMEGA
from .order_model import OrderFrame, PointedModel, Valuation, evaluate
from .seq_model import (
    Cat, Elem, OmegaRep, ProtoworldTable, SeqExpr, SequenceModel, length, normalize_expr, omega_padding,
    tails,
)

__all__ = [
    "make_sentence", "StateDescription", "BOTTOM", "DescriptionList", "Consistency", "ConsistencyOracle",
    "consistent", "oracle", "classify_list", "Classification", "make_seq", "MakeSeqResult", "MakeSeqError",
    "canonical_model_for", "canonical_c2_model", "CanonicalModel", "state_descriptions", "YSet",
    "SizeCapError", "sd_from_json", "sd_to_json", "list_from_json", "list_to_json", "tails_bound",
    "letter_sd", "parse_letter",
]


# ---------------------------------------------------------------- sentences

def make_sentence(items: Sequence[Formula]) -> Formula:
    out = TOP
    prev: list[Formula] = []
    for p in items:
        ante = Neg(disj(prev))
        out = And(out, Cond(ante, p) if p == BOT else SCond(ante, p))
        prev.append(p)
    return out


@dataclass(frozen=True)
class StateDescription:
    """``items`` is a frozenset of true atoms (depth 0) or a tuple of descriptions."""

    atoms: tuple[str, ...]
    items: frozenset | tuple

    def __post_init__(self):
        if isinstance(self.items, tuple):
            if not self.items:
                raise ValueError("a positive-depth description needs at least one element")
            d = self.items[0].depth
            if any(x.depth != d or x.atoms != self.atoms for x in self.items):
                raise ValueError("elements must share depth and atoms")
        else:
            object.__setattr__(self, "items", frozenset(self.items))
            if not self.items <= set(self.atoms):
                raise ValueError("letter names atoms outside the atom set")

    @cached_property
    def depth(self) -> int:
        return 0 if isinstance(self.items, frozenset) else self.items[0].depth + 1

    @property
    def head(self) -> "StateDescription":
        return self.items[0]

    @cached_property
    def letter(self) -> frozenset:
        x = self
        while x.depth:
            x = x.items[0]
        return x.items

    @cached_property
    def sentence(self) -> Formula:
        if self.depth == 0:
            return conj(Atom(a) if a in self.items else Neg(Atom(a)) for a in self.atoms)
        return make_sentence([x.sentence for x in self.items] + [BOT])

    @cached_property
    def key(self) -> tuple:
        return sort_key(self.sentence)

    def to_text(self) -> str:
        if self.depth == 0:
            return "&".join(a if a in self.items else "~" + a for a in self.atoms)
        return "[" + ", ".join(x.to_text() for x in self.items) + ", _|_]"

    def __repr__(self) -> str:
        return f"SD({self.to_text()})"


class _Bottom:
    """The final bottom element of a description list."""

    depth = None
    sentence = BOT

    def __repr__(self) -> str:
        return "_|_"

    def to_text(self) -> str:
        return "_|_"


BOTTOM = _Bottom()


def letter_sd(atoms: Sequence[str], true_atoms: Iterable[str]) -> StateDescription:
    return StateDescription(tuple(atoms), frozenset(true_atoms))


def parse_letter(text: str, atoms: Sequence[str]) -> StateDescription:
    """``"p&~q"`` style literal conjunction naming every atom once."""
    lits = [t.strip() for t in text.replace(" ", "").split("&") if t.strip()]
    true, seen = set(), set()
    for lit in lits:
        name = lit.lstrip("~¬")
        if name not in atoms or name in seen:
            raise ValueError(f"bad literal {lit!r} for atoms {list(atoms)}")
        seen.add(name)
        if name == lit:
            true.add(name)
    if seen != set(atoms):
        raise ValueError(f"letter {text!r} must mention every atom of {list(atoms)}")
    return letter_sd(atoms, true)


def sd_from_json(data, atoms: Sequence[str]) -> StateDescription:
    if isinstance(data, str):
        return parse_letter(data, atoms)
    items = [x for x in data if not _is_bottom_token(x)]
    if len(items) != len(data) and not _is_bottom_token(data[-1]):
        raise ValueError("bottom may only close a description")
    return StateDescription(tuple(atoms), tuple(sd_from_json(x, atoms) for x in items))


def sd_to_json(sd: StateDescription):
    if sd.depth == 0:
        return sd.to_text()
    return [sd_to_json(x) for x in sd.items]


def _is_bottom_token(x) -> bool:
    return isinstance(x, str) and x.strip().lower() in ("bot", "_|_", "⊥", "bottom")


@dataclass(frozen=True)
class DescriptionList:
    """Descriptions of one depth, optionally closed by bottom."""

    items: tuple[StateDescription, ...]
    bottom: bool = False
    logic: LogicId = LogicId.C2F

    def __post_init__(self):
        object.__setattr__(self, "logic", parse_logic(self.logic))
        if self.items and len({x.depth for x in self.items}) != 1:
            raise ValueError("description list elements must share a depth")

    @property
    def elements(self) -> list:
        return list(self.items) + ([BOTTOM] if self.bottom else [])

    @property
    def depth(self) -> int | None:
        return self.items[0].depth if self.items else None

    @cached_property
    def sentence(self) -> Formula:
        return make_sentence([x.sentence for x in self.elements])

    def __len__(self) -> int:
        return len(self.items) + self.bottom


def list_from_json(data, logic: LogicId | str | None = None) -> DescriptionList:
    atoms = list(data["atoms"])
    raw = list(data["items"])
    bottom = bool(data.get("bottom", False))
    if raw and _is_bottom_token(raw[-1]):
        raw, bottom = raw[:-1], True
    if any(_is_bottom_token(x) for x in raw):
        raise ValueError("bottom may only occur as the last element")
    items = tuple(sd_from_json(x, atoms) for x in raw)
    return DescriptionList(items, bottom, parse_logic(logic or data.get("logic", "c2f")))


def list_to_json(dl: DescriptionList) -> dict:
    atoms = list(dl.items[0].atoms) if dl.items else []
    return {"atoms": atoms, "logic": dl.logic.value.lower(), "items": [sd_to_json(x) for x in dl.items],
            "bottom": dl.bottom}


def _fo(xs: Iterable) -> tuple:
    return tuple(dict.fromkeys(xs))


def tails_bound(k: int) -> int:
    """Tail bound for a bottom-terminated list with k non-bottom elements."""
    return math.ceil(3 * math.factorial(k) / 2)


# ---------------------------------------------------------------- answers

@dataclass
class Consistency:
    consistent: bool
    exact: bool
    reason: str
    witness: PointedModel | SequenceModel | None = None
    bound: int | None = None

    def __bool__(self) -> bool:
        return self.consistent

    @property
    def label(self) -> str:
        if self.consistent:
            return "yes"
        return "no (exact)" if self.exact else f"no (within {self.bound} tails)"

    def to_json(self) -> dict:
        from .decide import model_json

        out = {"consistent": self.consistent, "exact": self.exact, "reason": self.reason}
        if self.bound is not None:
            out["bound"] = self.bound
        if self.witness is not None:
            out["witness"] = model_json(self.witness)
        return out


def _yes(reason, witness):
    return Consistency(True, True, reason, witness)


def _no(reason, exact=True, bound=None):
    return Consistency(False, exact, reason, None, bound)


class MakeSeqError(RuntimeError):
    """The sequence construction could not proceed; signals an oracle gap or bug."""


class SizeCapError(ValueError):
    pass


# ---------------------------------------------------------------- realised types

class _Realized:
    """Depth-n types realised at the worlds of the logic's frames, by size."""

    CHUNK = 1 << 22

    def __init__(self, logic: LogicId, atoms: tuple[str, ...]):
        self.logic = logic
        self.atoms = atoms
        self.natoms = len(atoms)
        self.intern: dict[int, dict[tuple, int]] = {}
        self.done: dict[int, int] = {}                      # list depth -> sizes scanned
        self.full: dict[int, dict[tuple, tuple]] = {}       # bottom-terminated rows
        self.prefix: dict[int, dict[tuple, tuple]] = {}     # every non-empty prefix

    def _code_rows(self, rows: np.ndarray, depth: int) -> np.ndarray:
        """Intern fo-rows of depth-(depth-1) codes as depth codes; -1 rows stay -1."""
        table = self.intern.setdefault(depth, {})
        flat = rows.reshape(-1, rows.shape[-1])
        uniq, inv = np.unique(flat, axis=0, return_inverse=True)
        ids = np.empty(len(uniq), np.int64)
        for i, row in enumerate(uniq):
            key = tuple(int(x) for x in row if x >= 0)
            ids[i] = table.setdefault(key, len(table)) if key else -1
        return ids[inv.reshape(-1)].reshape(rows.shape[:-1])

    def scan(self, depth: int, upto: int) -> None:
        """Index the fo-rows of depth-``depth`` codes for frames up to ``upto`` tails."""
        start = self.done.get(depth, 0) + 1
        full = self.full.setdefault(depth, {})
        pref = self.prefix.setdefault(depth, {})
        for n in range(start, upto + 1):
            kernels.check_bits(self.natoms, [n])
            frames = frames_of_size(self.logic, n)
            orders, olens, nws = kernels.pack_orders([[list(o) for o in cf.orders] for cf in frames])
            per = (1 << (self.natoms * n)) * n * n
            step = max(1, self.CHUNK // per)
            for f0 in range(0, len(frames), step):
                sl = slice(f0, min(len(frames), f0 + step))
                codes = kernels.letters(self.natoms, nws[sl])
                for d in range(1, depth + 1):
                    rows = kernels.fo_rows(codes, orders[sl], olens[sl], nws[sl])
                    codes = self._code_rows(rows, d)
                rows = kernels.fo_rows(codes, orders[sl], olens[sl], nws[sl])
                F, V, W, N = rows.shape
                flat = rows.reshape(-1, N)
                uniq, first = np.unique(flat, axis=0, return_index=True)
                for row, at in sorted(zip(map(tuple, uniq.tolist()), first.tolist()), key=lambda t: t[1]):
                    key = tuple(x for x in row if x >= 0)
                    if not key:
                        continue
                    f, rest = divmod(at, V * W)
                    v, w = divmod(rest, W)
                    wit = (n, f0 + f, v, w)
                    full.setdefault(key, wit)
                    for m in range(1, len(key) + 1):
                        pref.setdefault(key[:m], wit)
            self.done[depth] = n

    def code(self, sd: StateDescription) -> int | None:
        if sd.depth == 0:
            return sum(1 << j for j, a in enumerate(self.atoms) if a in sd.items)
        kids = []
        for x in sd.items:
            c = self.code(x)
            if c is None:
                return None
            kids.append(c)
        return self.intern.get(sd.depth, {}).get(tuple(kids))

    def find(self, items: Sequence[StateDescription], bottom: bool, upto: int):
        depth = items[0].depth
        for n in range(1, upto + 1):
            self.scan(depth, n)
            key = []
            for x in items:
                c = self.code(x)
                if c is None:
                    break
                key.append(c)
            else:
                hit = (self.full if bottom else self.prefix)[depth].get(tuple(key))
                if hit is not None:
                    return hit
        return None


# ---------------------------------------------------------------- the oracle

def _default_tails(natoms: int) -> int:
    return 6 if natoms <= 1 else 4


class ConsistencyOracle:
    """Memoised consistency of description lists for one logic and atom set."""

    def __init__(self, logic: LogicId | str, atoms: Sequence[str], max_tails: int | None = None):
        self.logic = parse_logic(logic)
        self.atoms = tuple(atoms)
        self.max_tails = max_tails or _default_tails(len(self.atoms))
        self.memo: dict[tuple, Consistency] = {}
        self.realized = _Realized(self.logic, self.atoms) if self.logic is not LogicId.C2 else None
        self.in_progress: set[tuple] = set()

    # -- public
    def check(self, items: Sequence[StateDescription], bottom: bool) -> Consistency:
        key = (tuple(items), bool(bottom))
        hit = self.memo.get(key)
        if hit is None:
            hit = self._decide(key[0], key[1])
            if hit.consistent:
                self._verify(key[0], key[1], hit.witness)
            self.memo[key] = hit
        return hit

    def description(self, sd: StateDescription) -> Consistency:
        if sd.depth == 0:
            return _yes("a letter is true at a one-world model", self._list_witness([sd], True))
        return self.check(sd.items, True)

    def orderly(self, elements: Sequence) -> Consistency:
        """Orderliness of a list whose last element may be BOTTOM."""
        elements = list(elements)
        if not elements:
            return _no("orderly lists are non-empty")
        bottom = elements[-1] is BOTTOM
        items = elements[:-1] if bottom else elements
        if any(x is BOTTOM for x in items):
            return _no("bottom occurs before the end")
        return self.check(items, bottom)

    # -- decision procedure
    def _decide(self, items: tuple, bottom: bool) -> Consistency:
        if not items:
            if bottom:
                return _no("every world sees itself, so T > bottom fails")
            return _yes("the empty list denotes T", self._list_witness([letter_sd(self.atoms, ())], False))
        if len(set(items)) != len(items):
            return _no("repeated element")
        d = items[0].depth
        for x in items:
            if x.atoms != self.atoms:
                raise ValueError("description over a different atom set")
            if x.depth != d:
                raise ValueError("elements of different depths")
        for x in items:
            r = self.description(x)
            if not r.consistent:
                return _no(f"element {x.to_text()} is inconsistent ({r.reason})", r.exact, r.bound)
        if d == 0:
            return _yes("distinct letters form a list model", self._list_witness(list(items), bottom))
        heads = _fo(x.head for x in items)
        own = items[0].items
        if (heads != own) if bottom else (own[: len(heads)] != heads):
            return _no("first occurrences of the element heads disagree with the first element")
        if self.logic is LogicId.C2:
            return _yes("union of element models under a new root", self._c2_witness(items, bottom))
        bad = self._decomposition_failure(items, bottom)
        if bad:
            return _no(bad)
        key = (items, bottom)
        if bottom and key not in self.in_progress:
            got = self._makeseq_witness(items)
            if got is not None:
                return _yes("sequence construction", got)
        if not bottom:
            got = self._extension_witness(items)
            if got is not None:
                return _yes("a bottom-closed extension is consistent", got)
        hit = self.realized.find(items, bottom, self.max_tails)
        if hit is not None:
            return _yes(f"realised on a {hit[0]}-tail frame", self._search_witness(hit))
        circ = self._circuitous_refutation(items, bottom)
        if circ:
            return _no(circ)
        if bottom and self.max_tails >= tails_bound(len(items)):
            return _no(f"no model with at most {tails_bound(len(items))} tails", True, self.max_tails)
        return _no("no model found within the tail bound", False, self.max_tails)

    def _decomposition_failure(self, items: tuple, bottom: bool) -> str | None:
        """Tail-decomposition rule, sound for every logic with Flattening.

        In a sequence, the tails from the first occurrence of element i up to
        the first occurrence of the last element have heads among the earlier
        element heads; the rest of element i's list is the last element's list.
        Later elements are tails of earlier ones, so what they see is a subset.
        """
        seen = [set(x.items) for x in items]
        for i in range(1, len(items)):
            if not seen[i] <= seen[i - 1]:
                return f"element {i} sees a description its predecessor does not"
        k = len(items) if bottom else len(items) - 1
        H = {x.head for x in items[:k]}
        rest = () if bottom else items[-1].items
        for i in range(k):
            inner = items[i].items
            need = {x.head for x in items[i:k]}
            ok = False
            for m in range(1, len(inner) + 1):
                Q = inner[:m]
                if not set(Q) <= H:
                    break
                if not need <= set(Q):
                    continue
                if i == 0 and Q != _fo(x.head for x in items[:k]):
                    continue
                if inner[m:] == tuple(e for e in rest if e not in Q):
                    ok = True
                    break
            if not ok:
                return f"element {i} cannot be a tail of a sequence whose later tails match the last element"
        return None

    def _extension_witness(self, items: tuple):
        """Close the list with the suffixes of its last element's own list, then bottom."""
        inner = items[-1].items
        tail = [StateDescription(self.atoms, inner[j:]) for j in range(1, len(inner))]
        ext = tuple(items) + tuple(x for x in tail if x not in items)
        for cand in (ext, tuple(items)):
            r = self.check(cand, True)
            if r.consistent:
                return r.witness
        return None

    def _circuitous_refutation(self, items: tuple, bottom: bool) -> str | None:
        seq_like = self.logic in (LogicId.C2FS, LogicId.C2FSM)
        final = self.logic in (LogicId.C2FM, LogicId.C2FSM)
        elements = list(items) + ([BOTTOM] if bottom else [])
        if len(elements) < 3 or not ((seq_like and not bottom) or (final and bottom)):
            return None
        cl = _Classifier(self, elements)
        if cl.find_direct() is None and cl.exact:
            return ("circuitous lists must end with bottom in this logic" if not bottom
                    else "circuitous lists cannot end with bottom in this logic")
        return None

    # -- witnesses
    def _table(self, labels: Mapping[str, StateDescription]) -> ProtoworldTable:
        return ProtoworldTable({a: {lab for lab, sd in labels.items() if a in sd.letter} for a in self.atoms},
                               tuple(labels))

    def _list_witness(self, letters: list, bottom: bool):
        if self.logic is LogicId.C2:
            names = [f"w{i}" for i in range(len(letters))]
            after = {names[0]: tuple(names[1:])}
            after.update({n: () for n in names[1:]})
            val = Valuation({a: {names[i] for i, x in enumerate(letters) if a in x.letter} for a in self.atoms})
            return PointedModel(OrderFrame(tuple(names), after), val, names[0])
        labels = {f"t{i}": x for i, x in enumerate(letters)}
        return self._class_model(Cat([Elem(l) for l in labels]) if len(labels) > 1 else Elem("t0"),
                                 self._table(labels))

    def _class_model(self, expr: SeqExpr, table: ProtoworldTable) -> SequenceModel | None:
        """Fit a tail model into the logic's class, or None if it does not belong."""
        L = length(expr)
        if self.logic is LogicId.C2FS:
            if L.is_finite:
                from .seq_model import prefix_elements

                return SequenceModel(omega_padding(prefix_elements(expr, int(L))).to_expr(), table)
            if L != OMEGA and not L < OMEGA:
                return None
        elif self.logic is LogicId.C2FM and not L.is_successor:
            return None
        elif self.logic is LogicId.C2FSM and not L.is_finite:
            return None
        return SequenceModel(expr, table)

    def _c2_witness(self, items: tuple, bottom: bool) -> PointedModel:
        if not bottom:
            have = {x.head for x in items}
            extra = [StateDescription(self.atoms, (h,)) for h in items[0].items if h not in have]
            items = tuple(items) + tuple(extra)
        worlds: list[str] = []
        after: dict[str, tuple] = {}
        val: dict[str, set] = {a: set() for a in self.atoms}

        def build(letter: frozenset, children: Sequence[StateDescription]) -> str:
            name = f"w{len(worlds)}"
            worlds.append(name)
            for a in letter:
                val[a].add(name)
            after[name] = tuple(build(c.letter, c.items[1:] if c.depth else ()) for c in children)
            return name

        root = build(items[0].letter, items[1:])
        return PointedModel(OrderFrame(tuple(worlds), after), Valuation(val), root)

    def _search_witness(self, hit) -> SequenceModel:
        from .decide import _witness

        n, f, v, w = hit
        cf = frames_of_size(self.logic, n)[f]
        return _witness(cf, v, w, [Atom(a) for a in self.atoms])

    def _makeseq_witness(self, items: tuple):
        key = (items, True)
        self.in_progress.add(key)
        try:
            res = _MakeSeq(self, list(items) + [BOTTOM]).run(checked=True)
        except MakeSeqError:
            return None
        finally:
            self.in_progress.discard(key)
        return self._class_model(res.expr, self._table(res.labels))

    def _verify(self, items, bottom, witness) -> None:
        f = make_sentence([x.sentence for x in items] + ([BOT] if bottom else []))
        ok = witness.evaluate(f) if isinstance(witness, SequenceModel) else evaluate(witness, f)
        if not ok:
            raise AssertionError("consistency witness does not verify the list sentence")


_ORACLES: dict[tuple, ConsistencyOracle] = {}


def oracle(logic: LogicId | str, atoms: Sequence[str], max_tails: int | None = None) -> ConsistencyOracle:
    key = (parse_logic(logic), tuple(atoms), max_tails or _default_tails(len(atoms)))
    o = _ORACLES.get(key)
    if o is None:
        o = _ORACLES[key] = ConsistencyOracle(key[0], key[1], key[2])
    return o


def consistent(f, logic: LogicId | str = LogicId.C2, budget=None) -> Consistency:
    """Consistency of a formula, a state description or a description list."""
    from .decide import SearchBudget, Status, satisfiable

    logic = parse_logic(logic)
    tails = budget.max_worlds if budget is not None else None
    if isinstance(f, StateDescription):
        return oracle(logic, f.atoms, tails).description(f)
    if isinstance(f, DescriptionList):
        atoms = f.items[0].atoms if f.items else ()
        return oracle(f.logic if logic is None else logic, atoms, tails).check(f.items, f.bottom)
    v = satisfiable(f, logic, budget or SearchBudget())
    if v.status is Status.SAT:
        return Consistency(True, True, "model found", v.model, v.bound)
    return Consistency(False, v.status is Status.UNSAT_EXACT, v.certificate or "no model within the bound",
                       None, v.bound)


# ---------------------------------------------------------------- classification

@dataclass
class Classification:
    kind: str            # disorderly | orderly_short | direct | circuitous
    exact: bool
    j: int | None = None
    rho: tuple[int, ...] | None = None


class _Classifier:
    """Searches orderly sub-lists of ``elements`` (indices into it) in the fixed order."""

    def __init__(self, orc: ConsistencyOracle, elements: list):
        self.orc = orc
        self.el = elements
        ranks = sorted(range(len(elements) - 1), key=lambda i: elements[i].key)
        self.rank = {i: r for r, i in enumerate(ranks)}
        self.exact = True

    def ok(self, idx: Sequence[int]) -> bool:
        r = self.orc.orderly([self.el[i] for i in idx])
        if not r.consistent and not r.exact:
            self.exact = False
        return r.consistent

    def _ordered(self, pool: Iterable[int], size: int) -> Iterator[tuple[int, ...]]:
        pool = sorted(pool, key=self.rank.get)
        yield from itertools.permutations(pool, size)

    def find_direct(self) -> tuple[int, tuple[int, ...]] | None:
        L = len(self.el)
        last = L - 1
        for j in range(L - 2, -1, -1):
            middle_pool = [i for i in range(L - 1) if i != j]
            for size in range(0, L - 2):
                for mid in self._ordered(middle_pool, size):
                    cand = (j,) + mid + (last,)
                    if self.ok(cand):
                        return j, cand
        return None

    def first_full(self, first: int) -> tuple[int, ...] | None:
        """First orderly list beginning with ``first``, ending with the last element, using all elements."""
        L = len(self.el)
        pool = [i for i in range(L - 1) if i != first]
        for mid in self._ordered(pool, len(pool)):
            cand = (first,) + mid + (L - 1,)
            if self.ok(cand):
                return cand
        return None


def _as_elements(tau) -> tuple[list, ConsistencyOracle | None]:
    if isinstance(tau, DescriptionList):
        atoms = tau.items[0].atoms if tau.items else ()
        return tau.elements, oracle(tau.logic, atoms)
    return list(tau), None


def classify_list(tau, logic: LogicId | str | None = None, orc: ConsistencyOracle | None = None) -> Classification:
    elements, o = _as_elements(tau)
    if orc is None:
        if o is None or logic is not None:
            atoms = next(x.atoms for x in elements if x is not BOTTOM)
            o = oracle(logic or LogicId.C2F, atoms)
        orc = o
    r = orc.orderly(elements)
    if not r.consistent:
        return Classification("disorderly", r.exact)
    if len(elements) < 3:
        return Classification("orderly_short", True)
    cl = _Classifier(orc, elements)
    hit = cl.find_direct()
    if hit is not None:
        return Classification("direct", True, hit[0], hit[1])
    return Classification("circuitous", cl.exact)


# ---------------------------------------------------------------- the sequence construction

@dataclass
class MakeSeqResult:
    expr: SeqExpr
    labels: dict[str, StateDescription]
    trace: list[dict]

    @property
    def length(self):
        return length(self.expr)

    def to_json(self) -> dict:
        from .seq_model import expr_to_json

        return {"sequence": expr_to_json(self.expr), "length": self.length.to_text(),
                "labels": {k: sd_to_json(v) for k, v in self.labels.items()}, "trace": self.trace}


class _MakeSeq:
    def __init__(self, orc: ConsistencyOracle, elements: list):
        self.orc = orc
        self.el = elements
        self.trace: list[dict] = []
        self.memo: dict[tuple, SeqExpr | None] = {}

    def label(self, i: int) -> str:
        return f"t{i}"

    def run(self, checked: bool = False) -> MakeSeqResult:
        L = len(self.el)
        if not checked and not self.orc.orderly(self.el).consistent:
            raise MakeSeqError("the list is not orderly")
        out = self.go(tuple(range(L)))
        if out is None:
            raise MakeSeqError("the construction is empty for a length-1 list")
        used = {self.label(i): self.el[i] for i in range(L) if self.el[i] is not BOTTOM}
        return MakeSeqResult(normalize_expr(out), used, self.trace)

    def go(self, idx: tuple[int, ...]) -> SeqExpr | None:
        hit = self.memo.get(idx, 0)
        if hit != 0:
            return hit
        L = len(idx)
        names = [self.label(i) for i in idx]
        if L == 1:
            out = None
        elif L == 2:
            out = Elem(names[0])
        else:
            sub = [self.el[i] for i in idx]
            cl = _Classifier(self.orc, sub)
            hit_d = cl.find_direct()
            if hit_d is not None:
                j, rho_local = hit_d
                rho = tuple(idx[i] for i in rho_local)
                if j == L - 2:
                    theta = (idx[-2],)
                    theta_plus = None
                else:
                    tp = cl.first_full(L - 2)
                    if tp is None:
                        raise MakeSeqError(f"no full list from the penultimate element of {names}")
                    theta_plus = tuple(idx[i] for i in tp)
                    cut = tp.index(j)
                    theta = theta_plus[: cut + 1]
                self.trace.append({"list": names, "case": "direct", "j": j,
                                   "rho": [self.label(i) for i in rho],
                                   "theta_plus": None if theta_plus is None else [self.label(i) for i in theta_plus],
                                   "theta": [self.label(i) for i in theta]})
                parts = [self.go(idx[:-1]), self.go(theta), self.go(rho)]
                out = _join([p for p in parts if p is not None])
            else:
                pi: dict[int, tuple[int, ...]] = {0: tuple(range(L))}
                for t in range(1, L - 1):
                    full = cl.first_full(t)
                    if full is None:
                        raise MakeSeqError(f"no full list from element {t} of circuitous {names}")
                    pi[t] = full
                g = {t: pi[t][-2] for t in pi}
                order, seen, t = [], {}, 0
                while t not in seen:
                    seen[t] = len(order)
                    order.append(t)
                    t = g[t]
                start = seen[t]
                self.trace.append({"list": names, "case": "circuitous",
                                   "pi": {self.label(idx[t]): [self.label(idx[i]) for i in pi[t]] for t in pi},
                                   "g": {self.label(idx[t]): self.label(idx[g[t]]) for t in g}})
                piece = {t: self.go(tuple(idx[i] for i in pi[t][:-1])) for t in order}
                prefix = [piece[t] for t in order[:start]]
                cycle = _join([piece[t] for t in order[start:]])
                out = _join(prefix + [OmegaRep(cycle)])
        self.memo[idx] = out
        return out


def _join(parts: list[SeqExpr]) -> SeqExpr:
    flat: list[SeqExpr] = []
    for p in parts:
        flat.extend(p.args if isinstance(p, Cat) else (p,))
    return flat[0] if len(flat) == 1 else Cat(flat)


def make_seq(tau, logic: LogicId | str | None = None, orc: ConsistencyOracle | None = None) -> MakeSeqResult:
    """The sequence built from an orderly description list (labels ``t<i>`` by position)."""
    elements, o = _as_elements(tau)
    if orc is None:
        if o is None or logic is not None:
            atoms = next(x.atoms for x in elements if x is not BOTTOM)
            o = oracle(logic or LogicId.C2F, atoms)
        orc = o
    return _MakeSeq(orc, elements).run()


def canonical_model_for(s: StateDescription, logic: LogicId | str = LogicId.C2F,
                        orc: ConsistencyOracle | None = None) -> SequenceModel:
    """Tail model of the sequence built from ``s``'s list closed by bottom."""
    if s.depth == 0:
        raise ValueError("canonical sequence models are built for positive depth")
    orc = orc or oracle(logic, s.atoms)
    res = _MakeSeq(orc, list(s.items) + [BOTTOM]).run()
    return SequenceModel(res.expr, orc._table(res.labels))


# ---------------------------------------------------------------- hierarchies

@dataclass
class YSet:
    atoms: tuple[str, ...]
    depth: int
    logic: LogicId
    members: tuple[StateDescription, ...]
    undecided: tuple[StateDescription, ...] = ()
    bound: int | None = None

    @property
    def exact(self) -> bool:
        return not self.undecided

    def __len__(self) -> int:
        return len(self.members)

    def __iter__(self):
        return iter(self.members)

    def __contains__(self, x) -> bool:
        return x in self._set

    @cached_property
    def _set(self) -> frozenset:
        return frozenset(self.members)

    def to_json(self) -> dict:
        return {"atoms": list(self.atoms), "depth": self.depth, "logic": self.logic.value,
                "count": len(self.members), "exact": self.exact, "bound": self.bound,
                "members": [sd_to_json(x) for x in self.members],
                "undecided": [sd_to_json(x) for x in self.undecided]}


MAX_CANDIDATES = 200_000


def _candidate_lists(prev: Sequence[StateDescription], depth: int) -> Iterator[tuple]:
    """Non-repeating lists of ``prev`` meeting the projection rule for bottom closure."""
    ordered = sorted(prev, key=lambda x: x.key)
    if depth == 1:
        for k in range(1, len(ordered) + 1):
            yield from itertools.permutations(ordered, k)
        return

    def extend(cur: list, heads: list):
        own = cur[0].items
        if tuple(heads) == own:
            yield tuple(cur)
        for x in ordered:
            if x in cur:
                continue
            h = x.head
            nh = heads if h in heads else heads + [h]
            if own[: len(nh)] != tuple(nh):
                continue
            cur.append(x)
            yield from extend(cur, nh)
            cur.pop()

    for x in ordered:
        yield from extend([x], [x.head])


def _estimate(prev_count: int) -> int:
    return sum(math.perm(prev_count, k) for k in range(1, prev_count + 1))


_Y_CACHE: dict[tuple, YSet] = {}


def state_descriptions(atoms: Sequence[str], depth: int, logic: LogicId | str = LogicId.C2,
                       max_tails: int | None = None, max_candidates: int = MAX_CANDIDATES) -> YSet:
    logic = parse_logic(logic)
    atoms = tuple(atoms)
    if not atoms:
        raise ValueError("at least one atom is required")
    key = (atoms, depth, logic, max_tails)
    if key in _Y_CACHE:
        return _Y_CACHE[key]
    if depth == 0:
        letters = [letter_sd(atoms, [a for j, a in enumerate(atoms) if (m >> j) & 1]) for m in range(1 << len(atoms))]
        out = YSet(atoms, 0, logic, tuple(sorted(letters, key=lambda x: x.key)))
    else:
        prev = state_descriptions(atoms, depth - 1, logic, max_tails, max_candidates)
        if depth == 1 and _estimate(len(prev)) > max_candidates:
            raise SizeCapError(f"{_estimate(len(prev))} candidate lists exceed the cap {max_candidates}")
        orc = oracle(logic, atoms, max_tails)
        members, undecided = [], []
        count = 0
        for lst in _candidate_lists(prev.members, depth):
            count += 1
            if count > max_candidates:
                raise SizeCapError(f"more than {max_candidates} candidate lists at depth {depth}")
            sd = StateDescription(atoms, lst)
            r = orc.description(sd)
            if r.consistent:
                members.append(sd)
            elif not r.exact:
                undecided.append(sd)
        out = YSet(atoms, depth, logic, tuple(sorted(members, key=lambda x: x.key)),
                   tuple(undecided), orc.max_tails)
    _Y_CACHE[key] = out
    return out


@dataclass
class CanonicalModel:
    model: PointedModel
    worlds: dict[str, StateDescription]

    @property
    def frame(self) -> OrderFrame:
        return self.model.frame

    @property
    def valuation(self) -> Valuation:
        return self.model.valuation

    def at(self, name: str) -> PointedModel:
        return PointedModel(self.model.frame, self.model.valuation, name)


def canonical_c2_model(atoms: Sequence[str], depth: int) -> CanonicalModel:
    """Worlds are the C2 state descriptions of depth at most ``depth``."""
    atoms = tuple(atoms)
    levels = [state_descriptions(atoms, m, LogicId.C2).members for m in range(depth + 1)]
    names: dict[StateDescription, str] = {}
    for m, lvl in enumerate(levels):
        for i, sd in enumerate(lvl):
            names[sd] = f"d{m}_{i}"
    after = {names[sd]: (tuple(names[x] for x in sd.items[1:]) if sd.depth else ()) for sd in names}
    val = {a: {names[sd] for sd in names if a in sd.letter} for a in atoms}
    frame = OrderFrame(tuple(names.values()), after)
    model = PointedModel(frame, Valuation(val), next(iter(names.values())))
    return CanonicalModel(model, {v: k for k, v in names.items()})
