"""Logic identifiers and the finite frame classes searched for each logic.

Sequence frames are enumerated as tail graphs of sequence expressions whose
leaves carry distinct labels, so a valuation of the worlds is always
categorical. Worlds are numbered by rank in the root, root first, which is a
canonical labelling: two expressions give the same frame exactly when their
integer orders coincide.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Iterator

from .order_model import canonical_orders
from .seq_model import Cat, Elem, OmegaRep, SeqExpr, expr_from_json, expr_to_json, lasso_expr, list_expr, tail_graph

__all__ = ["LogicId", "ClassFrame", "frames_of_size", "frames_up_to", "parse_logic"]


class LogicId(str, enum.Enum):
    C2 = "C2"
    C2F = "C2F"
    C2FS = "C2FS"
    C2FM = "C2FM"
    C2FSM = "C2FSM"

    @property
    def frame_class(self) -> str:
        return {
            "C2": "all order frames",
            "C2F": "ordinal sequence frames",
            "C2FS": "omega-sequence frames (lassos)",
            "C2FM": "final ordinal sequence frames",
            "C2FSM": "list frames",
        }[self.value]

    @property
    def includes_flattening(self) -> bool:
        return self is not LogicId.C2

    def contains(self, other: "LogicId") -> bool:
        """Theorems of ``other`` are theorems of ``self``."""
        order = {
            LogicId.C2: {LogicId.C2},
            LogicId.C2F: {LogicId.C2, LogicId.C2F},
            LogicId.C2FS: {LogicId.C2, LogicId.C2F, LogicId.C2FS},
            LogicId.C2FM: {LogicId.C2, LogicId.C2F, LogicId.C2FM},
            LogicId.C2FSM: set(LogicId),
        }
        return other in order[self]


def parse_logic(text: str | LogicId) -> LogicId:
    if isinstance(text, LogicId):
        return text
    key = text.upper().replace(".", "")
    try:
        return LogicId(key)
    except ValueError:
        raise ValueError(f"unknown logic {text!r}; expected one of c2, c2f, c2fs, c2fm, c2fsm") from None


@dataclass(frozen=True)
class ClassFrame:
    """A rooted frame; ``expr`` is a sequence realizing it, or None for order frames."""

    orders: tuple[tuple[int, ...], ...]
    expr: SeqExpr | None
    heads: tuple[str, ...] | None

    @property
    def size(self) -> int:
        return len(self.orders)


# ---------------------------------------------------------------- shapes

@lru_cache(maxsize=None)
def _items(n: int) -> tuple:
    """Item shapes with n leaves: a leaf, or an omega-repetition of a body.

    A body is a single leaf or a list of at least two items; a repetition of
    a lone repetition is excluded since it denotes the same sequence.
    """
    out = []
    if n == 1:
        out.extend(["x", ("rep", ("x",))])
    out.extend(("rep", body) for body in _multi_lists(n))
    return tuple(out)


@lru_cache(maxsize=None)
def _multi_lists(n: int) -> tuple:
    """Lists of at least two items with n leaves in total."""
    out = []
    for k in range(1, n):
        for first in _items(k):
            for rest in _lists(n - k):
                out.append((first,) + rest)
    return tuple(out)


@lru_cache(maxsize=None)
def _lists(n: int) -> tuple:
    """Non-empty item lists with n leaves in total."""
    return tuple((it,) for it in _items(n)) + _multi_lists(n)


def _build(shape, counter) -> SeqExpr:
    if shape == "x":
        counter[0] += 1
        return Elem(str(counter[0]))
    body = [_build(s, counter) for s in shape[1]]
    return OmegaRep(body[0] if len(body) == 1 else Cat(body))


def _shape_expr(shape_list) -> SeqExpr:
    counter = [0]
    items = [_build(s, counter) for s in shape_list]
    return items[0] if len(items) == 1 else Cat(items)


def _class_frame(expr: SeqExpr) -> ClassFrame | None:
    g = tail_graph(expr)
    if len(set(g.heads)) != len(g.heads):
        return None
    return ClassFrame(tuple(tuple(o) for o in g.orders), expr, tuple(str(h) for h in g.heads))


def _is_final(orders) -> bool:
    return all(len(orders[o[-1]]) == 1 for o in orders)


_DATA = Path(__file__).with_name("data") / "ordinal_frames.json"


@lru_cache(maxsize=None)
def _stored_ordinal_frames() -> dict[int, tuple[ClassFrame, ...]]:
    if not _DATA.exists():
        return {}
    raw = json.loads(_DATA.read_text())
    out = {}
    for key, frames in raw["frames"].items():
        out[int(key)] = tuple(
            ClassFrame(tuple(tuple(o) for o in fr["orders"]), expr_from_json(fr["sequence"]), tuple(fr["heads"]))
            for fr in frames)
    return out


@lru_cache(maxsize=None)
def _ordinal_frames(n: int) -> tuple[ClassFrame, ...]:
    stored = _stored_ordinal_frames()
    if n in stored:
        return stored[n]
    return enumerate_ordinal_frames(n)


def enumerate_ordinal_frames(n: int) -> tuple[ClassFrame, ...]:
    """Distinct tail frames of all expression shapes with n leaves (slow for n >= 6)."""
    seen: dict = {}
    for shape in _lists(n):
        cf = _class_frame(_shape_expr(shape))
        if cf is not None and cf.size == n and cf.orders not in seen:
            seen[cf.orders] = cf
    return tuple(seen[k] for k in sorted(seen))


@lru_cache(maxsize=None)
def _lasso_frames(n: int) -> tuple[ClassFrame, ...]:
    seen: dict = {}
    for k in range(n - 1, -1, -1):
        labels = [str(i + 1) for i in range(n)]
        cf = _class_frame(lasso_expr(labels[:k], labels[k:]))
        if cf.orders not in seen:
            seen[cf.orders] = cf
    return tuple(seen[k] for k in sorted(seen))


@lru_cache(maxsize=None)
def _list_frames(n: int) -> tuple[ClassFrame, ...]:
    return (_class_frame(list_expr([str(i + 1) for i in range(n)])),)


@lru_cache(maxsize=None)
def _order_frames(n: int) -> tuple[ClassFrame, ...]:
    return tuple(ClassFrame(o, None, None) for o in canonical_orders(n))


@lru_cache(maxsize=None)
def _chain_frames(n: int) -> tuple[ClassFrame, ...]:
    orders = (tuple(range(n)),) + tuple((w,) for w in range(1, n))
    return (ClassFrame(orders, None, None),)


def frames_of_size(logic: LogicId, n: int, chains_only: bool = False) -> tuple[ClassFrame, ...]:
    """Canonical frames with exactly n worlds for the logic's class."""
    logic = parse_logic(logic)
    if logic is LogicId.C2:
        return _chain_frames(n) if chains_only else _order_frames(n)
    if logic is LogicId.C2FSM:
        return _list_frames(n)
    if logic is LogicId.C2FS:
        return _lasso_frames(n)
    frames = _ordinal_frames(n)
    if logic is LogicId.C2FM:
        frames = tuple(f for f in frames if _is_final(f.orders))
    return frames


def frames_up_to(logic: LogicId, bound: int, chains_only: bool = False) -> Iterator[ClassFrame]:
    for n in range(1, bound + 1):
        yield from frames_of_size(logic, n, chains_only)


def shape_count(n: int) -> int:
    return len(_lists(n))


def write_ordinal_frames(max_n: int, path: Path = _DATA) -> None:
    """Regenerate the shipped table of ordinal sequence frames."""
    data = {"max_tails": max_n, "frames": {}}
    for n in range(1, max_n + 1):
        data["frames"][str(n)] = [
            {"orders": [list(o) for o in cf.orders], "sequence": expr_to_json(cf.expr), "heads": list(cf.heads)}
            for cf in enumerate_ordinal_frames(n)]
    path.write_text(json.dumps(data, separators=(",", ":")) + "\n")


if __name__ == "__main__":
    import sys

    write_ordinal_frames(int(sys.argv[1]) if len(sys.argv) > 1 else 6)
