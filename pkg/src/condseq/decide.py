"""Bounded satisfiability and validity per logic, schema testing, the Hilbert
derivation checker and modal-fragment decisions.

Searches enumerate each logic's canonical frame class by size, then by frame,
then by valuation index, so the first witness is deterministic. Every SAT or
INVALID verdict carries a model that the reference evaluator re-checks.

A negative answer is labelled exact only when one of these certificates holds
at the searched bound:

* depth 0: one world decides a propositional formula;
* depth 1: every depth-1 state description is realised by a list of distinct
  letters, so lists of length ``2**atoms`` suffice;
* sequence logics and Boolean antecedents: truth is fixed by one position per
  distinct (context, antecedent) pair plus the root, and those positions form
  a list model;
* C2 with a small canonical model: the formula is evaluated at every world of
  the canonical model over its atoms and depth.
"""

from __future__ import annotations

import enum
import itertools
import json
import time
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from . import kernels
from .classes import ClassFrame, LogicId, frames_of_size, parse_logic
from .formula import (
    And, Cond, Formula, Iff, Imp, Neg, Schema, atoms_of, canon_dn, classify_fragment,
    instantiate, is_boolean, modal_depth, normalize, parse, MODAL, BOOLEAN, Atom, Box, Meta,
)
from .order_model import (
    DEFAULT_CAP, KripkeModel, OrderFrame, PointedModel, Valuation, evaluate, frame_from_orders, model_from_json,
)
from .seq_model import ProtoworldTable, SequenceModel, tail_graph

__all__ = [
    "Status", "SearchBudget", "Verdict", "BudgetExceeded", "DeadlineExceeded", "satisfiable", "valid",
    "countermodel", "SchemaEntry", "SCHEMAS", "schema", "schema_instance", "test_schema", "SchemaReport",
    "valid_on_frames", "Derivation", "AxiomInstance", "Tautology", "Detachment", "Normality",
    "Necessitation", "FlatteningRule", "RuleForm", "DerivationReport", "check_derivation", "derivation_from_json",
    "derivation_to_json", "is_tautology", "decide_modal", "kripke_evaluate", "default_bound", "model_json",
    "model_from_any", "replay",
]


# ---------------------------------------------------------------- verdicts and budgets

class Status(str, enum.Enum):
    SAT = "SAT"
    UNSAT_EXACT = "UNSAT_EXACT"
    UNSAT_WITHIN_BOUND = "UNSAT_WITHIN_BOUND"
    VALID_EXACT = "VALID_EXACT"
    VALID_WITHIN_BOUND = "VALID_WITHIN_BOUND"
    INVALID = "INVALID"


class BudgetExceeded(RuntimeError):
    """The search could not honour the requested bound within its budget."""


class DeadlineExceeded(BudgetExceeded):
    pass


@dataclass(frozen=True)
class SearchBudget:
    max_worlds: int | None = None
    max_protoworlds: int = 6
    deadline_ms: int | None = None
    exact: bool = True
    max_checks: int = 200_000_000

    def __post_init__(self):
        for name in ("max_worlds", "deadline_ms"):
            v = getattr(self, name)
            if v is not None and v < 1:
                raise ValueError(f"{name} must be at least 1")
        if self.max_protoworlds < 1 or self.max_checks < 1:
            raise ValueError("budget bounds must be at least 1")


def default_bound(logic: LogicId | str) -> int:
    return DEFAULT_CAP if parse_logic(logic) is LogicId.C2 else 5


Model = PointedModel | SequenceModel | KripkeModel


@dataclass
class Verdict:
    status: Status
    logic: str
    formula: Formula
    bound: int
    model: Model | None = None
    certificate: str | None = None
    checks: int = 0

    @property
    def exact(self) -> bool:
        return self.status in (Status.UNSAT_EXACT, Status.VALID_EXACT)

    @property
    def positive(self) -> bool:
        """SAT, or validity of either kind."""
        return self.status in (Status.SAT, Status.VALID_EXACT, Status.VALID_WITHIN_BOUND)

    def to_json(self) -> dict:
        from .formula import to_text

        out: dict[str, Any] = {
            "status": self.status.value, "logic": self.logic, "formula": to_text(self.formula),
            "bound": self.bound, "checks": self.checks,
        }
        if self.certificate:
            out["certificate"] = self.certificate
        if self.model is not None:
            out["model"] = model_json(self.model)
        return out


def model_json(m: Model) -> dict:
    if isinstance(m, SequenceModel):
        return {"kind": "sequence", **m.to_json()}
    if isinstance(m, KripkeModel):
        return {"kind": "kripke", "worlds": list(m.worlds),
                "relation": sorted([list(p) for p in m.relation]),
                "valuation": m.valuation.to_json(), "designated": m.designated}
    return {"kind": "order", **m.to_json()}


def model_from_any(data) -> Model:
    """Load a model emitted by ``model_json`` (order models may omit ``kind``)."""
    if isinstance(data, str):
        data = json.loads(data)
    kind = data.get("kind", "order")
    if kind == "sequence":
        return SequenceModel.from_json(data)
    if kind == "kripke":
        return KripkeModel(tuple(data["worlds"]), frozenset(tuple(p) for p in data["relation"]),
                           Valuation({k: set(v) for k, v in data.get("valuation", {}).items()}),
                           data.get("designated", data["worlds"][0]))
    if kind == "order":
        return model_from_json(data)
    raise ValueError(f"unknown model kind {kind!r}")


def replay(m: Model, f: Formula) -> bool:
    if isinstance(m, SequenceModel):
        return m.evaluate(f)
    if isinstance(m, KripkeModel):
        return kripke_evaluate(m, f)
    return evaluate(m, f)


# ---------------------------------------------------------------- frame batches

@lru_cache(maxsize=None)
def _packed(logic: LogicId, n: int, chains_only: bool):
    frames = frames_of_size(logic, n, chains_only)
    orders, olens, nws = kernels.pack_orders([[list(o) for o in cf.orders] for cf in frames])
    return frames, orders, olens, nws


def _targets(logic: LogicId, frames: Sequence[ClassFrame], root_only: bool) -> np.ndarray:
    if root_only:
        return np.ones(len(frames), np.int64)
    return np.array([(1 << cf.size) - 1 for cf in frames], np.int64)


def _witness(cf: ClassFrame, v: int, w: int, atoms: Sequence[Formula]) -> Model:
    nw = cf.size
    true_at = {a.name: [x for x in range(nw) if (v >> (j * nw + x)) & 1] for j, a in enumerate(atoms)}
    if cf.expr is None:
        fr = frame_from_orders(cf.orders)
        val = Valuation({a: {f"w{x}" for x in xs} for a, xs in true_at.items()})
        return PointedModel(fr, val, f"w{w}")
    g = tail_graph(cf.expr)
    table = ProtoworldTable({a: {str(cf.heads[x]) for x in xs} for a, xs in true_at.items()},
                            tuple(str(h) for h in cf.heads))
    root = g.exprs[w] if w else cf.expr
    return SequenceModel(root, table)


class _Clock:
    def __init__(self, deadline_ms: int | None):
        self.stop = None if deadline_ms is None else time.monotonic() + deadline_ms / 1000.0

    def check(self) -> None:
        if self.stop is not None and time.monotonic() > self.stop:
            raise DeadlineExceeded("deadline reached before the search finished")


def _scan(prog: kernels.Program, frames, orders, olens, nws, targets, clock: _Clock):
    """First hit over a packed batch, checking the deadline between chunks."""
    if prog.natoms * int(nws.max()) > kernels.MAX_BITS:
        raise BudgetExceeded(f"{prog.natoms} atoms over {int(nws.max())} worlds exceeds the valuation index")
    per = 1 << (prog.natoms * int(nws.max()))
    step = max(1, (1 << 20) // per)
    for f0 in range(0, len(frames), step):
        clock.check()
        f, v, w = kernels.search(prog, orders, olens, nws, targets, f0, min(len(frames), f0 + step))
        if f >= 0:
            return f, v, w
    return -1, -1, -1


# ---------------------------------------------------------------- exactness certificates

def _position_keys(core: Formula, context: tuple = ()) -> set:
    """Distinct (enclosing antecedents, antecedent) pairs; each fixes at most one position."""
    if core.kind in ("atom", "meta", "top", "bot"):
        return set()
    if core.kind == "cond":
        ante = canon_dn(core.args[0])
        return {(context, ante)} | _position_keys(core.args[1], context + (ante,))
    out = set()
    for x in core.args:
        out |= _position_keys(x, context)
    return out


def _boolean_antecedents(core: Formula) -> bool:
    stack = [core]
    while stack:
        g = stack.pop()
        if g.kind == "cond" and not is_boolean(g.args[0]):
            return False
        if g.kind not in ("atom", "meta", "top", "bot"):
            stack.extend(g.args)
    return True


def exactness_bound(f: Formula, logic: LogicId, natoms: int) -> tuple[int, str] | None:
    """Least size whose exhaustive search decides ``f`` exactly, with its reason."""
    depth = modal_depth(f)
    options = []
    if depth == 0:
        options.append((1, "propositional: one world decides"))
    if depth <= 1:
        options.append((max(1, 2 ** natoms), "depth-1 descriptions are realised by lists of distinct letters"))
    core = normalize(f)
    if logic is not LogicId.C2 and _boolean_antecedents(core):
        options.append((1 + len(_position_keys(core)),
                        "Boolean antecedents: truth is fixed on a list of relevant positions"))
    return min(options) if options else None


def _canonical_certificate(f: Formula, prog: kernels.Program):
    """Evaluate at every world of the canonical C2 model when it is small."""
    names = [a.name for a in prog.atoms]
    depth = modal_depth(f)
    if not names or len(names) > 2 or (len(names) == 2 and depth > 1) or depth > 2:
        return None
    from .statedesc import canonical_c2_model

    cm = canonical_c2_model(names, depth)
    for w in cm.frame.worlds:
        if evaluate(cm.model, f, w):
            return cm.at(w)
    return False


# ---------------------------------------------------------------- satisfiability

def _as_formula(f: Formula | str) -> Formula:
    return parse(f) if isinstance(f, str) else f


def satisfiable(f: Formula | str, logic: LogicId | str = LogicId.C2, budget: SearchBudget | None = None) -> Verdict:
    f = _as_formula(f)
    logic = parse_logic(logic)
    budget = budget or SearchBudget()
    bound = budget.max_worlds or default_bound(logic)
    clock = _Clock(budget.deadline_ms)
    prog = kernels.compile_formula(f)
    if prog.op[prog.root] == kernels.OP_CONST:
        if prog.a[prog.root] == 1:
            cf = frames_of_size(logic, 1)[0]
            m = _witness(cf, 0, 0, atoms_of(f))
            return _sat(f, logic, 1, m, 1)
        return Verdict(Status.UNSAT_EXACT, logic.value, f, 0, certificate="folds to a contradiction")
    depth = modal_depth(f)
    chains = logic is LogicId.C2 and depth <= 1
    cert = exactness_bound(f, logic, prog.natoms) if budget.exact else None
    checks = 0
    searched = 0
    capped = False
    for n in range(1, bound + 1):
        if logic is LogicId.C2 and not chains and n > DEFAULT_CAP:
            capped = True
            break
        if cert and n > cert[0]:
            break
        frames, orders, olens, nws = _packed(logic, n, chains)
        cost = len(frames) << (prog.natoms * n)
        if prog.natoms * n > kernels.MAX_BITS or checks + cost > budget.max_checks:
            raise BudgetExceeded(f"size {n} needs {cost} checks, beyond the budget of {budget.max_checks}")
        fi, v, w = _scan(prog, frames, orders, olens, nws, _targets(logic, frames, logic is not LogicId.C2), clock)
        if fi >= 0:
            m = _witness(frames[fi], v, w, prog.atoms)
            return _sat(f, logic, n, m, checks + (fi << (prog.natoms * n)) + v + 1)
        checks += cost
        searched = n
    if cert and searched >= cert[0]:
        return Verdict(Status.UNSAT_EXACT, logic.value, f, searched, certificate=cert[1], checks=checks)
    if logic is LogicId.C2 and budget.exact:
        got = _canonical_certificate(f, prog)
        if got is not None:
            if got is False:
                return Verdict(Status.UNSAT_EXACT, logic.value, f, searched, checks=checks,
                               certificate="false at every world of the canonical model")
            return _sat(f, logic, searched, got, checks)
    if capped:
        raise BudgetExceeded(f"order frames are enumerated only up to {DEFAULT_CAP} worlds; "
                             f"no model found up to that size")
    return Verdict(Status.UNSAT_WITHIN_BOUND, logic.value, f, searched, checks=checks)


def _sat(f: Formula, logic: LogicId, n: int, m: Model, checks: int) -> Verdict:
    if not replay(m, f):
        raise AssertionError("kernel witness failed to replay under the reference evaluator")
    return Verdict(Status.SAT, logic.value, f, n, model=m, checks=checks)


def valid(f: Formula | str, logic: LogicId | str = LogicId.C2, budget: SearchBudget | None = None) -> Verdict:
    f = _as_formula(f)
    v = satisfiable(Neg(f), logic, budget)
    status = {Status.SAT: Status.INVALID, Status.UNSAT_EXACT: Status.VALID_EXACT,
              Status.UNSAT_WITHIN_BOUND: Status.VALID_WITHIN_BOUND}[v.status]
    return Verdict(status, v.logic, f, v.bound, v.model, v.certificate, v.checks)


def countermodel(f: Formula | str, logic: LogicId | str = LogicId.C2, budget: SearchBudget | None = None):
    return valid(f, logic, budget).model


# ---------------------------------------------------------------- schema library

ALL = frozenset(LogicId)
FPLUS = frozenset({LogicId.C2F, LogicId.C2FS, LogicId.C2FM, LogicId.C2FSM})
SEQ = frozenset({LogicId.C2FS, LogicId.C2FSM})
FINAL = frozenset({LogicId.C2FM, LogicId.C2FSM})


@dataclass(frozen=True)
class SchemaEntry:
    schema: Schema
    valid_in: frozenset = frozenset()
    invalid_in: frozenset = frozenset()
    aliases: tuple[str, ...] = ()

    @property
    def name(self) -> str:
        return self.schema.name


def _entry(name, text, valid_in=frozenset(), invalid_in=frozenset(), aliases=()):
    return SchemaEntry(Schema.from_text(name, text), frozenset(valid_in), frozenset(invalid_in), tuple(aliases))


_LIB = [
    _entry("Identity", "?p > ?p", ALL),
    _entry("Reciprocity", "((?p > ?q) & (?q > ?p) & (?p > ?r)) -> (?q > ?r)", ALL, aliases=("CSO",)),
    _entry("MP", "(?p > ?q) -> (?p -> ?q)", ALL),
    _entry("CEM", "(?p > ?q) | (?p > ~?q)", ALL),
    _entry("MOD", "[]?p -> (?q > ?p)", ALL),
    _entry("K", "[](?p -> ?q) -> ([]?p -> []?q)", ALL),
    _entry("T", "[]?p -> ?p", ALL),
    _entry("4", "[]?p -> [][]?p", FPLUS, {LogicId.C2}),
    _entry("H", "(<>?p & <>?q) -> (<>(?p & <>?q) | <>(?q & <>?p))", FPLUS, {LogicId.C2}),
    _entry("Dum", "[]([](?p -> []?p) -> ?p) -> (<>[]?p -> ?p)", SEQ, {LogicId.C2, LogicId.C2F}),
    _entry("McKinsey", "[]<>?p -> <>[]?p", FINAL, {LogicId.C2, LogicId.C2F, LogicId.C2FS}, aliases=("M",)),
    _entry("M*", "[](?p | ?q) -> (<>[]?p | <>[]?q)", FINAL, {LogicId.C2, LogicId.C2F, LogicId.C2FS},
           aliases=("MStar",)),
    _entry("Flattening", "(?p > ((?p & ?q) > ?r)) <-> ((?p & ?q) > ?r)", FPLUS, {LogicId.C2}),
    _entry("Cautious Importation", "(?p > ((?p & ?q) > ?r)) -> ((?p & ?q) > ?r)", FPLUS, {LogicId.C2},
           aliases=("CI",)),
    _entry("Cautious Exportation", "((?p & ?q) > ?r) -> (?p > ((?p & ?q) > ?r))", FPLUS, {LogicId.C2},
           aliases=("CE",)),
    _entry("Crashing Cautious Importation", "(?p > ~<>(?p & ?q)) -> ~<>(?p & ?q)", FPLUS, {LogicId.C2},
           aliases=("Crashing CI",)),
    _entry("Crashing Cautious Exportation", "~<>(?p & ?q) -> (?p > ~<>(?p & ?q))", FPLUS, {LogicId.C2},
           aliases=("Crashing CE",)),
    _entry(">>-Flattening", "(?p >> ((?p & ?q) >> ?r)) <-> ((?p & ?q) >> ?r)", FPLUS, {LogicId.C2},
           aliases=("Strong Flattening", "≫-Flattening")),
    _entry("IE", "(?p > (?q > ?r)) <-> ((?p & ?q) > ?r)", (), ALL, aliases=("Import-Export",)),
    _entry("Materialism", "(?p > ?q) <-> (?p -> ?q)", (), ALL),
    _entry("Transitivity", "((?p > ?q) & (?q > ?r)) -> (?p > ?r)", (), ALL),
    _entry("Monotonicity", "(?p > ?q) -> ((?p & ?r) > ?q)", (), ALL),
    _entry("Cautious Transitivity", "((?p > ?q) & ((?p & ?q) > ?r)) -> (?p > ?r)", ALL),
    _entry("Cautious Monotonicity", "(?p > (?q & ?r)) -> ((?p & ?r) > ?q)", ALL),
    _entry("Sequentiality",
           "([](?p -> (~?p > ?r)) & [](?q -> (~?q > ?r))) -> ((?p | ?q) -> (~(?p | ?q) > ?r))",
           SEQ, {LogicId.C2, LogicId.C2F, LogicId.C2FM}),
    _entry("Restricted Sequentiality",
           "([](?p -> (~?p > ?q)) & [](?q -> (~?q > ?p))) -> ((?p | ?q) -> [](?p | ?q))",
           SEQ, {LogicId.C2, LogicId.C2F, LogicId.C2FM}),
    _entry("Conditional Sequentiality",
           "(((~?p > ~?q) > ~?p) & ((~?q > ~?p) > ~?q)) -> ((?p | ?q) -> [](?p | ?q))",
           SEQ, {LogicId.C2, LogicId.C2F, LogicId.C2FM}),
    _entry("CMon", "(?p > (?q & ?r)) -> ((?p & ?q) > ?r)", ALL),
    _entry("CMon>>", "(?p >> (?q & ?r)) -> ((?p & ?q) >> ?r)", ALL, aliases=("CMon≫",)),
    _entry("Or-Distribution", "(?p > (?q | ?r)) -> ((?p > ?q) | (?p > ?r))", ALL,
           aliases=("∨-Distribution", "v-Distribution")),
]

SCHEMAS: dict[str, SchemaEntry] = {e.name: e for e in _LIB}


def _norm_name(s: str) -> str:
    return "".join(ch for ch in s.lower() if ch.isalnum() or ch in "*>≫∨")


_BY_NAME = {}
for _e in _LIB:
    for _n in (_e.name,) + _e.aliases:
        _BY_NAME[_norm_name(_n)] = _e


def schema(name: str) -> SchemaEntry:
    try:
        return _BY_NAME[_norm_name(name)]
    except KeyError:
        raise KeyError(f"unknown schema {name!r}") from None


def schema_instance(name_or_schema: str | Schema | SchemaEntry, atoms: Sequence[str] | None = None) -> Formula:
    """Instantiate metavariables with distinct atoms (p0, p1, ... by default)."""
    s = name_or_schema
    if isinstance(s, str):
        s = schema(s)
    if isinstance(s, SchemaEntry):
        s = s.schema
    metas = s.metavariables
    atoms = list(atoms) if atoms is not None else [f"p{i}" for i in range(len(metas))]
    if len(atoms) < len(metas):
        raise ValueError(f"schema {s.name} needs {len(metas)} atoms")
    return instantiate(s, {m: Atom(a) for m, a in zip(metas, atoms)})


# ---------------------------------------------------------------- schema testing

@dataclass
class SchemaReport:
    schema: str
    frame_class: str
    max_size: int
    valid: bool
    failure: dict | None = None
    model: Model | None = None
    frames_checked: int = 0

    def to_json(self) -> dict:
        out = {"schema": self.schema, "class": self.frame_class, "max_size": self.max_size,
               "verdict": "valid at this size" if self.valid else "countermodel",
               "frames_checked": self.frames_checked}
        if self.failure:
            out["failure"] = self.failure
        if self.model is not None:
            out["model"] = model_json(self.model)
        return out


_ORDER_CLASSES = ("order", "flat", "flat_ancestral")


def _class_frames(cls: str | LogicId, n: int) -> tuple[ClassFrame, ...]:
    if isinstance(cls, str) and cls in _ORDER_CLASSES:
        if n > DEFAULT_CAP:
            raise BudgetExceeded(f"order frames are enumerated only up to {DEFAULT_CAP} worlds")
        return _filtered_order_frames(cls, n)
    logic = parse_logic(cls)
    if logic is LogicId.C2 and n > DEFAULT_CAP:
        raise BudgetExceeded(f"order frames are enumerated only up to {DEFAULT_CAP} worlds")
    return frames_of_size(logic, n)


@lru_cache(maxsize=None)
def _filtered_order_frames(cls: str, n: int) -> tuple[ClassFrame, ...]:
    from .order_model import frame_properties

    out = []
    for cf in frames_of_size(LogicId.C2, n):
        if cls != "order":
            rep = frame_properties(frame_from_orders(cf.orders))
            if not rep.flat or (cls == "flat_ancestral" and not rep.ancestral):
                continue
        out.append(cf)
    return tuple(out)


def test_schema(s: str | Schema | SchemaEntry, frame_class: str | LogicId, max_size: int,
                atoms: Sequence[str] | None = None, deadline_ms: int | None = None) -> SchemaReport:
    """First failing (frame, world, valuation) of the schema over the class, by size."""
    inst = schema_instance(s, atoms)
    name = s if isinstance(s, str) else s.name
    cls_name = frame_class.value if isinstance(frame_class, LogicId) else str(frame_class)
    prog = kernels.compile_formula(Neg(inst))
    clock = _Clock(deadline_ms)
    checked = 0
    for n in range(1, max_size + 1):
        frames = _class_frames(frame_class, n)
        if not frames:
            continue
        orders, olens, nws = kernels.pack_orders([[list(o) for o in cf.orders] for cf in frames])
        targets = np.array([(1 << cf.size) - 1 for cf in frames], np.int64)
        if prog.op[prog.root] == kernels.OP_CONST:
            if prog.a[prog.root] == 0:
                checked += len(frames)
                continue
            fi, v, w = 0, 0, 0
        else:
            fi, v, w = _scan(prog, frames, orders, olens, nws, targets, clock)
        if fi >= 0:
            cf = frames[fi]
            m = _witness(cf, v, w, prog.atoms)
            if replay(m, inst):
                raise AssertionError("schema countermodel failed to replay")
            failure = {"size": n, "frame": [list(o) for o in cf.orders], "world": w,
                       "valuation": {a.name: [x for x in range(cf.size) if (v >> (j * cf.size + x)) & 1]
                                     for j, a in enumerate(prog.atoms)}}
            return SchemaReport(name, cls_name, max_size, False, failure, m, checked + fi + 1)
        checked += len(frames)
    return SchemaReport(name, cls_name, max_size, True, None, None, checked)


def valid_on_frames(f: Formula, frame_orders: Sequence[Sequence[Sequence[int]]]) -> list[bool]:
    """Frame validity of ``f`` (every world, every valuation) for each frame."""
    prog = kernels.compile_formula(Neg(f))
    if prog.op[prog.root] == kernels.OP_CONST:
        return [prog.a[prog.root] == 0] * len(frame_orders)
    orders, olens, nws = kernels.pack_orders([[list(o) for o in fr] for fr in frame_orders])
    targets = np.array([(1 << len(fr)) - 1 for fr in frame_orders], np.int64)
    hitv, _ = kernels.first_hits(prog, orders, olens, nws, targets)
    return [bool(h < 0) for h in hitv]


# ---------------------------------------------------------------- derivations

@dataclass(frozen=True)
class AxiomInstance:
    schema: str
    binding: Mapping[str, str] = field(default_factory=dict)


@dataclass(frozen=True)
class Tautology:
    pass


@dataclass(frozen=True)
class Detachment:
    minor: int   # step proving A (1-based)
    major: int   # step proving A -> B


@dataclass(frozen=True)
class Normality:
    premise: int


@dataclass(frozen=True)
class Necessitation:
    premise: int


@dataclass(frozen=True)
class FlatteningRule:
    premise: int | None = None


@dataclass(frozen=True)
class RuleForm:
    """Rule form of a Flattening-family schema: (p & q) becomes q, given |- q -> p."""

    schema: str
    binding: Mapping[str, str] = field(default_factory=dict)
    premise: int | None = None


RULE_FORM_SCHEMAS = ("Flattening", "Cautious Importation", "Cautious Exportation",
                     "Crashing Cautious Importation", "Crashing Cautious Exportation")

Justification = AxiomInstance | Tautology | Detachment | Normality | Necessitation | FlatteningRule | RuleForm


@dataclass(frozen=True)
class Derivation:
    steps: tuple[tuple[Formula, Justification], ...]
    logic: LogicId = LogicId.C2
    extra_axioms: tuple[str, ...] = ()
    goal: Formula | None = None
    name: str = ""


@dataclass(frozen=True)
class DerivationReport:
    ok: bool
    first_bad_step: int | None = None
    reason: str = ""

    def to_json(self) -> dict:
        out: dict[str, Any] = {"ok": self.ok}
        if not self.ok:
            out["first_bad_step"] = self.first_bad_step
            out["reason"] = self.reason
        return out


AXIOMS = {
    LogicId.C2: ("Identity", "Reciprocity", "MP", "CEM"),
    LogicId.C2F: ("Identity", "Reciprocity", "MP", "CEM", "Flattening"),
    LogicId.C2FS: ("Identity", "Reciprocity", "MP", "CEM", "Flattening", "Sequentiality"),
    LogicId.C2FM: ("Identity", "Reciprocity", "MP", "CEM", "Flattening", "McKinsey"),
    LogicId.C2FSM: ("Identity", "Reciprocity", "MP", "CEM", "Flattening", "Sequentiality", "McKinsey"),
}


def _key(f: Formula) -> Formula:
    return canon_dn(normalize(f))


def is_tautology(f: Formula, max_letters: int = 22) -> bool:
    """Classical tautology, treating each conditional of the core form as a letter."""
    core = _key(f)
    letters: dict[Formula, int] = {}

    def collect(g: Formula) -> None:
        if g.kind in ("atom", "cond", "meta"):
            letters.setdefault(g, len(letters))
        elif g.kind in ("not", "and"):
            for x in g.args:
                collect(x)
        else:
            raise AssertionError(g.kind)

    collect(core)
    n = len(letters)
    if n > max_letters:
        raise ValueError(f"{n} propositional letters exceed the truth-table limit {max_letters}")
    rows = 1 << n
    full = (1 << rows) - 1
    cols = {}
    for g, i in letters.items():
        block = (1 << (1 << i)) - 1          # 2**i ones
        period = block << (1 << i)           # pattern: 2**i zeros then 2**i ones
        pat = 0
        for start in range(0, rows, 1 << (i + 1)):
            pat |= period >> (1 << i) << (start + (1 << i))
        cols[g] = pat & full
    memo: dict[Formula, int] = {}

    def ev(g: Formula) -> int:
        hit = memo.get(g)
        if hit is not None:
            return hit
        if g.kind == "not":
            out = full ^ ev(g.args[0])
        elif g.kind == "and":
            out = ev(g.args[0]) & ev(g.args[1])
        else:
            out = cols[g]
        memo[g] = out
        return out

    return ev(core) == full


def _allowed_axioms(d: Derivation) -> dict[str, SchemaEntry]:
    names = AXIOMS[d.logic] + tuple(d.extra_axioms)
    return {schema(n).name: schema(n) for n in names}


def check_derivation(d: Derivation, logic: LogicId | str | None = None) -> DerivationReport:
    if logic is not None:
        d = Derivation(d.steps, parse_logic(logic), d.extra_axioms, d.goal, d.name)
    allowed = _allowed_axioms(d)
    flattening_ok = d.logic.includes_flattening or "Flattening" in allowed
    keys: list[Formula] = []
    for k, (f, just) in enumerate(d.steps, start=1):
        reason = _check_step(f, just, k, keys, d.steps, allowed, flattening_ok)
        if reason:
            return DerivationReport(False, k, reason)
        keys.append(_key(f))
    if d.goal is not None:
        if not d.steps or keys[-1] != _key(d.goal):
            return DerivationReport(False, len(d.steps) + 1, "last step is not the goal")
    return DerivationReport(True)


def _cited(i: int, k: int) -> str | None:
    if not isinstance(i, int) or i < 1 or i >= k:
        return f"step {k} cites step {i}, which is not an earlier step"
    return None


def _check_step(f, just, k, keys, steps, allowed, flattening_ok) -> str | None:
    if isinstance(just, Tautology):
        try:
            return None if is_tautology(f) else "not a classical tautology"
        except ValueError as exc:
            return str(exc)
    if isinstance(just, AxiomInstance):
        try:
            entry = schema(just.schema)
        except KeyError as exc:
            return str(exc)
        if entry.name not in allowed:
            return f"{entry.name} is not an axiom of this system"
        try:
            inst = instantiate(entry.schema, dict(just.binding))
        except (KeyError, ValueError) as exc:
            return f"bad binding: {exc}"
        return None if _key(inst) == _key(f) else f"formula is not the stated instance of {entry.name}"
    if isinstance(just, Detachment):
        for i in (just.minor, just.major):
            bad = _cited(i, k)
            if bad:
                return bad
        minor = steps[just.minor - 1][0]
        if keys[just.major - 1] != _key(Imp(minor, f)):
            return f"step {just.major} is not an implication from step {just.minor} to this formula"
        return None
    if isinstance(just, Normality):
        bad = _cited(just.premise, k)
        if bad:
            return bad
        if not (f.kind == "imp" and f.args[0].kind == "and" and f.args[1].kind == "cond"
                and all(x.kind == "cond" for x in f.args[0].args)):
            return "Normality output must have the shape ((s > a) & (s > b)) -> (s > c)"
        (c1, c2), c3 = f.args[0].args, f.args[1]
        if not (c1.args[0] == c2.args[0] == c3.args[0]):
            return "Normality output must use one antecedent throughout"
        if keys[just.premise - 1] != _key(Imp(And(c1.args[1], c2.args[1]), c3.args[1])):
            return f"step {just.premise} is not (a & b) -> c for this Normality output"
        return None
    if isinstance(just, Necessitation):
        bad = _cited(just.premise, k)
        if bad:
            return bad
        if f.kind == "box":
            inner = f.args[0]
        elif f.kind == "cond" and _key(f.args[0]) == _key(Neg(f.args[1])):
            inner = f.args[1]
        else:
            return "Necessitation output must be a box"
        return None if keys[just.premise - 1] == _key(inner) else f"step {just.premise} is not the boxed formula"
    if isinstance(just, FlatteningRule):
        if not flattening_ok:
            return "the Flattening Rule is not available in this system"
        if not (f.kind == "iff" and f.args[0].kind == "cond" and f.args[1].kind == "cond"
                and f.args[0].args[1].kind == "cond"):
            return "Flattening Rule output must have the shape (p > (q > r)) <-> (q > r)"
        p, inner = f.args[0].args
        if inner != f.args[1]:
            return "Flattening Rule output must repeat q > r on both sides"
        q = inner.args[0]
        side = Imp(q, p)
        if just.premise is None:
            return None if is_tautology(side) else "q -> p is neither cited nor a tautology"
        bad = _cited(just.premise, k)
        if bad:
            return bad
        return None if keys[just.premise - 1] == _key(side) else f"step {just.premise} is not q -> p"
    if isinstance(just, RuleForm):
        try:
            entry = schema(just.schema)
        except KeyError as exc:
            return str(exc)
        if entry.name not in RULE_FORM_SCHEMAS:
            return f"{entry.name} has no rule form"
        if not (flattening_ok or entry.name in allowed):
            return f"the rule form of {entry.name} is not available in this system"
        pq = And(Meta("p"), Meta("q"))
        template = _replace_sub(entry.schema.template, pq, Meta("q"))
        try:
            inst = instantiate(template, dict(just.binding))
            side = instantiate(Imp(Meta("q"), Meta("p")), dict(just.binding))
        except (KeyError, ValueError) as exc:
            return f"bad binding: {exc}"
        if _key(inst) != _key(f):
            return f"formula is not the stated rule-form instance of {entry.name}"
        if just.premise is None:
            return None if is_tautology(side) else "q -> p is neither cited nor a tautology"
        bad = _cited(just.premise, k)
        if bad:
            return bad
        return None if keys[just.premise - 1] == _key(side) else f"step {just.premise} is not q -> p"
    return f"unknown justification {just!r}"


def _replace_sub(f: Formula, old: Formula, new: Formula) -> Formula:
    if f == old:
        return new
    if f.kind in ("atom", "meta", "top", "bot"):
        return f
    return Formula(f.kind, tuple(_replace_sub(x, old, new) for x in f.args))


def _parse_just(step: Mapping) -> Justification:
    by = str(step.get("by", "")).lower().replace("-", "_")
    src = list(step.get("from", []))
    if by == "axiom":
        return AxiomInstance(step["schema"], dict(step.get("binding", {})))
    if by in ("pc", "tautology"):
        return Tautology()
    if by in ("detachment", "mp_rule"):
        if len(src) != 2:
            raise ValueError("detachment cites two steps")
        return Detachment(int(src[0]), int(src[1]))
    if by == "normality":
        return Normality(int(src[0]))
    if by == "necessitation":
        return Necessitation(int(src[0]))
    if by == "rule_form":
        return RuleForm(step["schema"], dict(step.get("binding", {})), int(src[0]) if src else None)
    if by in ("flattening_rule", "flattening"):
        return FlatteningRule(int(src[0]) if src else None)
    raise ValueError(f"unknown justification {step.get('by')!r}")


def derivation_from_json(data) -> Derivation:
    if isinstance(data, str):
        data = json.loads(data)
    steps = tuple((parse(s["formula"]), _parse_just(s)) for s in data["steps"])
    goal = parse(data["goal"]) if data.get("goal") else None
    return Derivation(steps, parse_logic(data.get("logic", "c2")), tuple(data.get("extra_axioms", ())),
                      goal, data.get("name", ""))


def _just_json(j: Justification) -> dict:
    if isinstance(j, AxiomInstance):
        return {"by": "axiom", "schema": j.schema, "binding": dict(j.binding)}
    if isinstance(j, Tautology):
        return {"by": "pc"}
    if isinstance(j, Detachment):
        return {"by": "detachment", "from": [j.minor, j.major]}
    if isinstance(j, Normality):
        return {"by": "normality", "from": [j.premise]}
    if isinstance(j, Necessitation):
        return {"by": "necessitation", "from": [j.premise]}
    if isinstance(j, RuleForm):
        return {"by": "rule_form", "schema": j.schema, "binding": dict(j.binding),
                "from": [] if j.premise is None else [j.premise]}
    return {"by": "flattening_rule", "from": [] if j.premise is None else [j.premise]}


def derivation_to_json(d: Derivation) -> dict:
    from .formula import to_text

    out: dict[str, Any] = {"name": d.name, "logic": d.logic.value.lower(), "extra_axioms": list(d.extra_axioms)}
    if d.goal is not None:
        out["goal"] = to_text(d.goal)
    out["steps"] = [{"formula": to_text(f), **_just_json(j)} for f, j in d.steps]
    return out


# ---------------------------------------------------------------- modal fragment

def kripke_evaluate(m: KripkeModel, f: Formula, world: str | None = None) -> bool:
    """Reference evaluator for the modal fragment on a Kripke model."""
    R = {w: m.access(w) for w in m.worlds}
    memo: dict[Formula, frozenset] = {}
    W = frozenset(m.worlds)

    def den(g: Formula) -> frozenset:
        hit = memo.get(g)
        if hit is not None:
            return hit
        k = g.kind
        if k == "atom":
            out = m.valuation.worlds_of(g.name) & W
        elif k == "top":
            out = W
        elif k == "bot":
            out = frozenset()
        elif k == "not":
            out = W - den(g.args[0])
        elif k == "and":
            out = den(g.args[0]) & den(g.args[1])
        elif k == "or":
            out = den(g.args[0]) | den(g.args[1])
        elif k == "imp":
            out = (W - den(g.args[0])) | den(g.args[1])
        elif k == "iff":
            a, b = den(g.args[0]), den(g.args[1])
            out = W - (a ^ b)
        elif k == "box":
            s = den(g.args[0])
            out = frozenset(w for w in W if R[w] <= s)
        elif k == "dia":
            s = den(g.args[0])
            out = frozenset(w for w in W if R[w] & s)
        elif k == "cond" and _key(g.args[0]) == _key(Neg(g.args[1])):
            s = den(g.args[1])
            out = frozenset(w for w in W if R[w] <= s)
        else:
            raise ValueError("formula is outside the modal fragment")
        memo[g] = out
        return out

    return (m.designated if world is None else world) in den(f)


_SYSTEM_LOGIC = {"KT": LogicId.C2, "S43": LogicId.C2F, "S431": LogicId.C2FS}
_SYSTEM_BOUND = {"KT": 3, "S43": 4, "S431": 6}


@lru_cache(maxsize=None)
def _relations(system: str, n: int) -> tuple[tuple[frozenset, ...], ...]:
    """Accessibility relations (as successor sets) for the system's frames on n worlds."""
    out = []
    if system == "KT":
        pairs = [(x, y) for x in range(n) for y in range(n) if x != y]
        for bits in range(1 << len(pairs)):
            succ = [{w} for w in range(n)]
            for i, (x, y) in enumerate(pairs):
                if (bits >> i) & 1:
                    succ[x].add(y)
            out.append(tuple(frozenset(s) for s in succ))
    elif system == "S43":
        # total preorders: ordered partitions of the worlds into clusters
        seen = set()
        for labels in itertools.product(range(n), repeat=n):
            used = sorted(set(labels))
            if used != list(range(len(used))):
                continue
            succ = tuple(frozenset(y for y in range(n) if labels[y] >= labels[x]) for x in range(n))
            if succ not in seen:
                seen.add(succ)
                out.append(succ)
    elif system == "S431":
        for cf in frames_of_size(LogicId.C2FS, n):
            out.append(tuple(frozenset(o) for o in cf.orders))
    else:
        raise ValueError(f"unknown modal system {system!r}")
    return tuple(out)


def decide_modal(f: Formula | str, system: str = "KT", budget: SearchBudget | None = None,
                 crosscheck: bool = True) -> Verdict:
    """Bounded validity in KT, S4.3 or S4.3.1, cross-checked against the matching conditional logic."""
    f = _as_formula(f)
    system = system.upper().replace(".", "")
    if system not in _SYSTEM_LOGIC:
        raise ValueError(f"unknown modal system {system!r}; expected KT, S43 or S431")
    if classify_fragment(f) not in (MODAL, BOOLEAN):
        raise ValueError("formula is outside the modal fragment")
    budget = budget or SearchBudget()
    bound = budget.max_worlds or _SYSTEM_BOUND[system]
    clock = _Clock(budget.deadline_ms)
    prog = kernels.compile_formula(Neg(f))
    result = None
    checks = 0
    for n in range(1, bound + 1):
        rels = _relations(system, n)
        # an order listing each world first, then its successors by index, has the same box
        frames = [[[w] + sorted(x for x in succ[w] if x != w) for w in range(n)] for succ in rels]
        if prog.op[prog.root] == kernels.OP_CONST:
            if prog.a[prog.root] == 0:
                break
            hit = (0, 0, 0)
        else:
            orders, olens, nws = kernels.pack_orders(frames)
            targets = np.array([(1 << n) - 1] * len(frames), np.int64)
            hit = _scan(prog, frames, orders, olens, nws, targets, clock)
        checks += len(frames) << (prog.natoms * n)
        if hit[0] >= 0:
            fi, v, w = hit
            names = [f"w{x}" for x in range(n)]
            relation = frozenset((names[x], names[y]) for x in range(n) for y in rels[fi][x])
            val = Valuation({a.name: {names[x] for x in range(n) if (v >> (j * n + x)) & 1}
                             for j, a in enumerate(prog.atoms)})
            km = KripkeModel(tuple(names), relation, val, names[w])
            if kripke_evaluate(km, f):
                raise AssertionError("modal countermodel failed to replay")
            result = Verdict(Status.INVALID, system, f, n, km, checks=checks)
            break
    if result is None:
        result = Verdict(Status.VALID_WITHIN_BOUND, system, f, bound, checks=checks)
        if modal_depth(f) == 0:
            result.status = Status.VALID_EXACT
            result.certificate = "propositional: one world decides"
    if crosscheck:
        other = valid(f, _SYSTEM_LOGIC[system], SearchBudget(max_worlds=min(bound, default_bound(
            _SYSTEM_LOGIC[system])) if system != "S431" else bound))
        if (other.status is Status.INVALID) != (result.status is Status.INVALID):
            if not (other.status is not Status.INVALID and result.bound > other.bound) and \
                    not (result.status is not Status.INVALID and other.bound > result.bound):
                raise AssertionError(f"modal verdict disagrees with {other.logic}: {result.status} vs {other.status}")
        result.certificate = (result.certificate + "; " if result.certificate else "") + \
            f"agrees with {other.logic} search ({other.status.value})"
    return result
