"""Ordinals below omega^omega in Cantor normal form."""

from __future__ import annotations

from functools import total_ordering
from typing import Iterable

__all__ = ["OrdinalCNF", "ZERO", "ONE", "OMEGA"]


@total_ordering
class OrdinalCNF:
    """Sum of ``omega**e * c`` terms with strictly decreasing exponents, all c >= 1."""

    __slots__ = ("terms",)

    def __init__(self, terms: Iterable[tuple[int, int]] = ()):
        ts = tuple((int(e), int(c)) for e, c in terms)
        for i, (e, c) in enumerate(ts):
            if e < 0 or c < 1:
                raise ValueError(f"bad CNF term {(e, c)}")
            if i and ts[i - 1][0] <= e:
                raise ValueError("exponents must strictly decrease")
        object.__setattr__(self, "terms", ts)

    def __setattr__(self, name, value):
        raise AttributeError("OrdinalCNF is immutable")

    @classmethod
    def finite(cls, n: int) -> "OrdinalCNF":
        if n < 0:
            raise ValueError("negative ordinal")
        return cls(((0, n),)) if n else cls()

    @classmethod
    def omega_pow(cls, e: int) -> "OrdinalCNF":
        return cls(((e, 1),))

    # ------------------------------------------------------------ queries
    def __hash__(self) -> int:
        return hash(self.terms)

    def __eq__(self, other) -> bool:
        if isinstance(other, int):
            other = OrdinalCNF.finite(other)
        return isinstance(other, OrdinalCNF) and self.terms == other.terms

    def __lt__(self, other) -> bool:
        if isinstance(other, int):
            other = OrdinalCNF.finite(other)
        for a, b in zip(self.terms, other.terms):
            if a != b:
                return a < b
        return len(self.terms) < len(other.terms)

    def __bool__(self) -> bool:
        return bool(self.terms)

    @property
    def is_zero(self) -> bool:
        return not self.terms

    @property
    def is_finite(self) -> bool:
        return not self.terms or self.terms[0][0] == 0

    @property
    def is_successor(self) -> bool:
        return bool(self.terms) and self.terms[-1][0] == 0

    @property
    def is_limit(self) -> bool:
        return bool(self.terms) and self.terms[-1][0] > 0

    @property
    def leading_exponent(self) -> int:
        if not self.terms:
            raise ValueError("zero has no leading exponent")
        return self.terms[0][0]

    def __int__(self) -> int:
        if not self.is_finite:
            raise ValueError(f"{self} is infinite")
        return self.terms[0][1] if self.terms else 0

    def __index__(self) -> int:
        return int(self)

    # ------------------------------------------------------------ arithmetic
    def __add__(self, other: "OrdinalCNF | int") -> "OrdinalCNF":
        if isinstance(other, int):
            other = OrdinalCNF.finite(other)
        if not other.terms:
            return self
        e = other.terms[0][0]
        head = [t for t in self.terms if t[0] > e]
        same = [t for t in self.terms if t[0] == e]
        first = (e, other.terms[0][1] + (same[0][1] if same else 0))
        return OrdinalCNF(head + [first] + list(other.terms[1:]))

    def __radd__(self, other: int) -> "OrdinalCNF":
        return OrdinalCNF.finite(other) + self

    def left_sub(self, alpha: "OrdinalCNF | int") -> "OrdinalCNF":
        """Unique gamma with ``alpha + gamma == self``; requires alpha <= self."""
        if isinstance(alpha, int):
            alpha = OrdinalCNF.finite(alpha)
        if self < alpha:
            raise ValueError(f"{alpha} exceeds {self}")
        mine, theirs = self.terms, alpha.terms
        for i, b in enumerate(mine):
            if i >= len(theirs):
                return OrdinalCNF(mine[i:])
            a = theirs[i]
            if a == b:
                continue
            if a[0] == b[0]:
                return OrdinalCNF(((b[0], b[1] - a[1]),) + mine[i + 1:])
            return OrdinalCNF(mine[i:])
        return OrdinalCNF()

    def times_omega(self) -> "OrdinalCNF":
        """``self * omega``; equals omega**(lead+1) for nonzero self."""
        if not self.terms:
            return self
        return OrdinalCNF.omega_pow(self.terms[0][0] + 1)

    # ------------------------------------------------------------ text
    def __repr__(self) -> str:
        return f"OrdinalCNF({list(self.terms)!r})"

    def __str__(self) -> str:
        return self.to_text("unicode")

    def to_text(self, style: str = "unicode") -> str:
        if not self.terms:
            return "0"
        w = "ω" if style == "unicode" else "w"
        parts = []
        for e, c in self.terms:
            if e == 0:
                parts.append(str(c))
                continue
            base = w if e == 1 else f"{w}^{e}"
            parts.append(base if c == 1 else (f"{base}·{c}" if style == "unicode" else f"{base}*{c}"))
        return " + ".join(parts)

    def to_json(self) -> list[list[int]]:
        return [[e, c] for e, c in self.terms]

    @classmethod
    def from_json(cls, data) -> "OrdinalCNF":
        if isinstance(data, int):
            return cls.finite(data)
        return cls((e, c) for e, c in data)


ZERO = OrdinalCNF()
ONE = OrdinalCNF.finite(1)
OMEGA = OrdinalCNF.omega_pow(1)
