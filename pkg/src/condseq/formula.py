"""Formulas of the conditional language: syntax tree, parser, printer, normal form.

Core connectives are atoms, negation, conjunction and the conditional ``>``.
Every other connective is stored as its own node and expands under
:func:`normalize`.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping

__all__ = [
    "Formula", "Atom", "Meta", "Neg", "And", "Or", "Imp", "Iff", "Cond", "SCond",
    "Box", "Dia", "TOP", "BOT", "Top", "Bot", "conj", "disj",
    "FormulaSyntaxError", "FormulaAmbiguityError", "MissingBindingError",
    "parse", "to_text", "normalize", "canon_dn", "equal_mod_dn", "modal_depth",
    "classify_fragment", "is_boolean", "atoms_of", "metavariables_of", "substitute",
    "Schema", "instantiate", "sort_key", "size",
]

BOOLEAN = "boolean"
BOOLEAN_ANTECEDENT = "boolean_antecedent"
MODAL = "modal"
GENERAL = "general"

_LEAVES = frozenset({"atom", "meta", "top", "bot"})
_UNARY = frozenset({"not", "box", "dia"})
_BINARY = frozenset({"and", "or", "imp", "iff", "cond", "scond"})


class Formula:
    """Immutable syntax node with structural equality and a cached hash."""

    __slots__ = ("kind", "args", "_hash")

    def __init__(self, kind: str, args: tuple):
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "args", args)
        object.__setattr__(self, "_hash", hash((kind, args)))

    def __setattr__(self, name, value):
        raise AttributeError("Formula is immutable")

    def __hash__(self) -> int:
        return self._hash

    def __eq__(self, other) -> bool:
        if self is other:
            return True
        if not isinstance(other, Formula) or self._hash != other._hash:
            return False
        return self.kind == other.kind and self.args == other.args

    def __repr__(self) -> str:
        return f"Formula({to_text(self)!r})"

    def __str__(self) -> str:
        return to_text(self, "unicode")

    def __reduce__(self):
        return (Formula, (self.kind, self.args))

    @property
    def name(self) -> str:
        if self.kind not in ("atom", "meta"):
            raise AttributeError("only atoms and metavariables have names")
        return self.args[0]

    @property
    def index(self) -> int | None:
        """Numeric index of a ``p<digits>`` atom, else ``None``."""
        if self.kind != "atom":
            return None
        m = re.fullmatch(r"p(\d+)", self.args[0])
        return int(m.group(1)) if m else None

    @property
    def sub(self) -> "Formula":
        return self.args[0]

    @property
    def left(self) -> "Formula":
        return self.args[0]

    @property
    def right(self) -> "Formula":
        return self.args[1]


def Atom(ident: int | str) -> Formula:
    if isinstance(ident, int):
        if ident < 0:
            raise ValueError("atom index must be non-negative")
        ident = f"p{ident}"
    if not re.fullmatch(r"[A-Za-z_][A-Za-z0-9_]*", ident):
        raise ValueError(f"bad atom name {ident!r}")
    return Formula("atom", (ident,))


def Meta(name: str) -> Formula:
    name = name.lstrip("?")
    if not re.fullmatch(r"[a-z]", name):
        raise ValueError(f"metavariables are ?a..?z, got {name!r}")
    return Formula("meta", (name,))


def Neg(a: Formula) -> Formula:
    return Formula("not", (a,))


def And(a: Formula, b: Formula) -> Formula:
    return Formula("and", (a, b))


def Or(a: Formula, b: Formula) -> Formula:
    return Formula("or", (a, b))


def Imp(a: Formula, b: Formula) -> Formula:
    return Formula("imp", (a, b))


def Iff(a: Formula, b: Formula) -> Formula:
    return Formula("iff", (a, b))


def Cond(a: Formula, b: Formula) -> Formula:
    return Formula("cond", (a, b))


def SCond(a: Formula, b: Formula) -> Formula:
    return Formula("scond", (a, b))


def Box(a: Formula) -> Formula:
    return Formula("box", (a,))


def Dia(a: Formula) -> Formula:
    return Formula("dia", (a,))


TOP = Formula("top", ())
BOT = Formula("bot", ())


def Top() -> Formula:
    return TOP


def Bot() -> Formula:
    return BOT


def conj(items: Iterable[Formula]) -> Formula:
    """Left-nested conjunction; empty gives TOP."""
    out = None
    for f in items:
        out = f if out is None else And(out, f)
    return TOP if out is None else out


def disj(items: Iterable[Formula]) -> Formula:
    """Left-nested disjunction; empty gives BOT."""
    out = None
    for f in items:
        out = f if out is None else Or(out, f)
    return BOT if out is None else out


# ---------------------------------------------------------------- parsing

class FormulaSyntaxError(ValueError):
    """Raised with the UTF-8 byte offset of the offending token."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at byte {offset}")
        self.offset = offset
        self.reason = message


class FormulaAmbiguityError(FormulaSyntaxError):
    pass


class MissingBindingError(KeyError):
    pass


_TOKEN_TABLE = [
    ("<->", "iff"), ("->", "imp"), (">>", "scond"), ("[]", "box"), ("<>", "dia"),
    ("#t", "top"), ("#f", "bot"), ("~", "not"), ("&", "and"), ("|", "or"),
    (">", "cond"), ("(", "lp"), (")", "rp"),
    ("¬", "not"), ("∧", "and"), ("∨", "or"), ("→", "imp"), ("↔", "iff"),
    ("□", "box"), ("◇", "dia"), ("⊤", "top"), ("⊥", "bot"), ("≫", "scond"),
]
_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_META = re.compile(r"\?[a-z](?![A-Za-z0-9_])")


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    toks = []
    i = 0
    byte = 0
    n = len(text)
    while i < n:
        c = text[i]
        if c.isspace():
            i += 1
            byte += len(c.encode())
            continue
        for lit, kind in _TOKEN_TABLE:
            if text.startswith(lit, i):
                toks.append((kind, lit, byte))
                i += len(lit)
                byte += len(lit.encode())
                break
        else:
            m = _IDENT.match(text, i) or _META.match(text, i)
            if not m:
                raise FormulaSyntaxError(f"unexpected character {c!r}", byte)
            lit = m.group(0)
            toks.append(("meta" if lit[0] == "?" else "atom", lit, byte))
            i = m.end()
            byte += len(lit.encode())
    toks.append(("eof", "", byte))
    return toks


class _Parser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.pos = 0

    def peek(self) -> tuple[str, str, int]:
        return self.toks[self.pos]

    def take(self) -> tuple[str, str, int]:
        tok = self.toks[self.pos]
        self.pos += 1
        return tok

    def parse(self) -> Formula:
        f = self.arrow()
        kind, lit, off = self.peek()
        if kind != "eof":
            raise FormulaSyntaxError(f"unexpected {lit!r}", off)
        return f

    def arrow(self) -> Formula:
        left = self.disjunction()
        kind, _, _ = self.peek()
        if kind in ("imp", "iff"):
            self.take()
            right = self.disjunction()
            nxt, lit, off = self.peek()
            if nxt in ("imp", "iff"):
                raise FormulaAmbiguityError(f"chained {lit!r} needs parentheses", off)
            return Formula(kind, (left, right))
        return left

    def disjunction(self) -> Formula:
        out = self.conjunction()
        while self.peek()[0] == "or":
            self.take()
            out = Or(out, self.conjunction())
        return out

    def conjunction(self) -> Formula:
        out = self.conditional()
        while self.peek()[0] == "and":
            self.take()
            out = And(out, self.conditional())
        return out

    def conditional(self) -> Formula:
        left = self.unary()
        kind, _, _ = self.peek()
        if kind in ("cond", "scond"):
            self.take()
            right = self.unary()
            nxt, lit, off = self.peek()
            if nxt in ("cond", "scond"):
                raise FormulaAmbiguityError(f"nested {lit!r} needs parentheses", off)
            return Formula(kind, (left, right))
        return left

    def unary(self) -> Formula:
        kind, lit, off = self.take()
        if kind in _UNARY:
            return Formula(kind, (self.unary(),))
        if kind == "atom":
            return Atom(lit)
        if kind == "meta":
            return Meta(lit)
        if kind == "top":
            return TOP
        if kind == "bot":
            return BOT
        if kind == "lp":
            inner = self.arrow()
            k2, lit2, off2 = self.take()
            if k2 != "rp":
                raise FormulaSyntaxError(f"expected ')' but found {lit2 or 'end of input'!r}", off2)
            return inner
        raise FormulaSyntaxError(f"expected a formula but found {lit or 'end of input'!r}", off)


def parse(text: str) -> Formula:
    """Parse formula text; raises FormulaSyntaxError / FormulaAmbiguityError.

    Binding, tightest first: ``~ [] <>``, then ``> >>``, then ``&``, then ``|``,
    then ``-> <->``. Chains of ``>`` or ``->`` need explicit parentheses.
    """
    return _Parser(text).parse()


# ---------------------------------------------------------------- printing

_SYMBOLS = {
    "ascii": {"not": "~", "box": "[]", "dia": "<>", "and": " & ", "or": " | ",
              "imp": " -> ", "iff": " <-> ", "cond": " > ", "scond": " >> ",
              "top": "#t", "bot": "#f"},
    "unicode": {"not": "¬", "box": "□", "dia": "◇", "and": " ∧ ", "or": " ∨ ",
                "imp": " → ", "iff": " ↔ ", "cond": " > ", "scond": " ≫ ",
                "top": "⊤", "bot": "⊥"},
}
_PREC = {"imp": 1, "iff": 1, "or": 2, "and": 3, "cond": 4, "scond": 4,
         "not": 5, "box": 5, "dia": 5, "atom": 6, "meta": 6, "top": 6, "bot": 6}
# minimum child precedence (left, right) that prints without parentheses
_CHILD_MIN = {"imp": (2, 2), "iff": (2, 2), "or": (2, 3), "and": (3, 4),
              "cond": (5, 5), "scond": (5, 5)}


def to_text(f: Formula, style: str = "ascii") -> str:
    """Render with minimal parentheses; ``parse`` inverts it exactly."""
    try:
        sym = _SYMBOLS[style]
    except KeyError:
        raise ValueError(f"style must be 'ascii' or 'unicode', got {style!r}") from None

    def go(g: Formula, need: int) -> str:
        k = g.kind
        if k == "atom":
            s = g.args[0]
        elif k == "meta":
            s = "?" + g.args[0]
        elif k in ("top", "bot"):
            s = sym[k]
        elif k in _UNARY:
            s = sym[k] + go(g.args[0], 5)
        else:
            lmin, rmin = _CHILD_MIN[k]
            s = go(g.args[0], lmin) + sym[k] + go(g.args[1], rmin)
        return f"({s})" if _PREC[k] < need else s

    return go(f, 0)


# ---------------------------------------------------------------- normal form

def _rebuild(f: Formula, args: tuple) -> Formula:
    return f if args == f.args else Formula(f.kind, args)


_P0 = Atom(0)
_CORE_BOT = And(_P0, Neg(_P0))


def normalize(f: Formula) -> Formula:
    """Expand derived connectives into atoms, negation, conjunction and ``>``."""
    memo: dict[Formula, Formula] = {}

    def go(g: Formula) -> Formula:
        hit = memo.get(g)
        if hit is not None:
            return hit
        k = g.kind
        if k in ("atom", "meta"):
            out = g
        elif k == "bot":
            out = _CORE_BOT
        elif k == "top":
            out = Neg(_CORE_BOT)
        else:
            a = tuple(go(x) for x in g.args)
            if k in ("not", "and", "cond"):
                out = _rebuild(g, a)
            elif k == "or":
                out = Neg(And(Neg(a[0]), Neg(a[1])))
            elif k == "imp":
                out = Neg(And(a[0], Neg(a[1])))
            elif k == "iff":
                out = And(Neg(And(a[0], Neg(a[1]))), Neg(And(a[1], Neg(a[0]))))
            elif k == "scond":
                out = Neg(Cond(a[0], Neg(a[1])))
            elif k == "box":
                out = Cond(Neg(a[0]), a[0])
            elif k == "dia":
                # ◇x is ¬□¬x
                out = Neg(Cond(Neg(Neg(a[0])), Neg(a[0])))
            else:
                raise AssertionError(k)
        memo[g] = out
        return out

    return go(f)


def canon_dn(f: Formula) -> Formula:
    """Strip double negations everywhere; used only for comparisons."""
    memo: dict[Formula, Formula] = {}

    def go(g: Formula) -> Formula:
        hit = memo.get(g)
        if hit is not None:
            return hit
        if g.kind == "not" and g.args[0].kind == "not":
            out = go(g.args[0].args[0])
        elif g.kind in _LEAVES:
            out = g
        else:
            out = _rebuild(g, tuple(go(x) for x in g.args))
        memo[g] = out
        return out

    return go(f)


def equal_mod_dn(a: Formula, b: Formula) -> bool:
    return canon_dn(a) == canon_dn(b)


def modal_depth(f: Formula) -> int:
    """Nesting depth of conditionals, counting each derived modal/≫ as one."""
    memo: dict[Formula, int] = {}

    def go(g: Formula) -> int:
        hit = memo.get(g)
        if hit is not None:
            return hit
        if g.kind in _LEAVES:
            out = 0
        else:
            out = max(go(x) for x in g.args)
            if g.kind in ("cond", "scond", "box", "dia"):
                out += 1
        memo[g] = out
        return out

    return go(f)


def size(f: Formula) -> int:
    if f.kind in _LEAVES:
        return 1
    return 1 + sum(size(x) for x in f.args)


def is_boolean(f: Formula) -> bool:
    return modal_depth(f) == 0


def classify_fragment(f: Formula) -> str:
    """Return boolean, modal, boolean_antecedent or general (checked in that order)."""
    core = normalize(f)
    conds: list[Formula] = []
    seen: set[Formula] = set()
    stack = [core]
    while stack:
        g = stack.pop()
        if g in seen:
            continue
        seen.add(g)
        if g.kind == "cond":
            conds.append(g)
        stack.extend(x for x in g.args if isinstance(x, Formula))
    if not conds:
        return BOOLEAN
    if all(canon_dn(c.args[0]) == canon_dn(Neg(c.args[1])) for c in conds):
        return MODAL
    if all(is_boolean(c.args[0]) for c in conds):
        return BOOLEAN_ANTECEDENT
    return GENERAL


def atoms_of(f: Formula) -> list[Formula]:
    """Object atoms in first-occurrence order (metavariables excluded)."""
    out: dict[Formula, None] = {}

    def go(g: Formula) -> None:
        if g.kind == "atom":
            out.setdefault(g)
        elif g.kind not in _LEAVES:
            for x in g.args:
                go(x)

    go(f)
    return list(out)


def metavariables_of(f: Formula) -> list[str]:
    out: dict[str, None] = {}

    def go(g: Formula) -> None:
        if g.kind == "meta":
            out.setdefault(g.args[0])
        elif g.kind not in _LEAVES:
            for x in g.args:
                go(x)

    go(f)
    return list(out)


def substitute(f: Formula, leaf_map: Callable[[Formula], Formula | None]) -> Formula:
    """Replace leaves by ``leaf_map(leaf)`` when it returns a formula."""
    memo: dict[Formula, Formula] = {}

    def go(g: Formula) -> Formula:
        hit = memo.get(g)
        if hit is not None:
            return hit
        if g.kind in _LEAVES:
            rep = leaf_map(g)
            out = g if rep is None else rep
        else:
            out = _rebuild(g, tuple(go(x) for x in g.args))
        memo[g] = out
        return out

    return go(f)


# ---------------------------------------------------------------- schemas

@dataclass(frozen=True)
class Schema:
    name: str
    template: Formula

    @property
    def metavariables(self) -> list[str]:
        return metavariables_of(self.template)

    @classmethod
    def from_text(cls, name: str, text: str) -> "Schema":
        return cls(name, parse(text))


def instantiate(schema: Schema | Formula, binding: Mapping[str, Formula | str]) -> Formula:
    """Uniformly replace metavariables; keys may be written ``p`` or ``?p``."""
    template = schema.template if isinstance(schema, Schema) else schema
    table: dict[str, Formula] = {}
    for key, val in binding.items():
        table[key.lstrip("?")] = parse(val) if isinstance(val, str) else val
    missing = [m for m in metavariables_of(template) if m not in table]
    if missing:
        raise MissingBindingError("missing binding for " + ", ".join("?" + m for m in missing))
    return substitute(template, lambda g: table[g.args[0]] if g.kind == "meta" else None)


_KEY_CACHE: dict[Formula, tuple] = {}


def sort_key(f: Formula) -> tuple:
    """Fixed total order on sentences: depth, then printed length, then text."""
    k = _KEY_CACHE.get(f)
    if k is None:
        s = to_text(f)
        k = (modal_depth(f), len(s), s)
        if len(_KEY_CACHE) > 200_000:
            _KEY_CACHE.clear()
        _KEY_CACHE[f] = k
    return k
