"""Bit-parallel model-checking kernels.

A formula compiles to a postfix program over the core connectives. A frame
batch is an int64 array ``orders[f, w, i]`` listing the order of world ``w``
(``w`` first), padded with -1, plus ``olens[f, w]`` and ``nws[f]``. Truth sets
are int64 bitmasks over worlds, so a frame has at most 62 worlds and a
valuation index packs ``natoms * nw <= 62`` bits: atom ``j`` holds bits
``j*nw .. j*nw+nw-1``.

Numba is used when importable; ``CONDSEQ_NO_NUMBA=1`` forces the numpy path.
Both paths return identical results.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .formula import Formula, normalize

OP_ATOM, OP_CONST, OP_NOT, OP_AND, OP_COND = 0, 1, 2, 3, 4

MAX_BITS = 62

_DISABLED = os.environ.get("CONDSEQ_NO_NUMBA", "").strip() not in ("", "0")
try:
    if _DISABLED:
        raise ImportError("disabled by CONDSEQ_NO_NUMBA")
    from numba import njit

    HAVE_NUMBA = True
except ImportError:
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda fn: fn


def backend() -> str:
    return "numba" if HAVE_NUMBA else "numpy"


# ---------------------------------------------------------------- compilation

@dataclass(frozen=True)
class Program:
    op: np.ndarray
    a: np.ndarray
    b: np.ndarray
    root: int
    atoms: tuple[Formula, ...]

    @property
    def natoms(self) -> int:
        return len(self.atoms)

    def __len__(self) -> int:
        return len(self.op)


def compile_formula(f: Formula, atoms=None) -> Program:
    """Compile to a hash-consed program; ``x & ~x`` folds to a constant.

    ``atoms`` fixes the atom order; atoms outside it are an error. By default
    the atoms that survive folding are used in first-occurrence order.
    """
    core = normalize(f)
    nodes: list[tuple[int, int, int]] = []
    index: dict[tuple[int, int, int], int] = {}
    memo: dict[Formula, int] = {}
    used: dict[Formula, int] = {}
    fixed = None if atoms is None else {a: i for i, a in enumerate(atoms)}

    def emit(key):
        k = index.get(key)
        if k is None:
            k = len(nodes)
            nodes.append(key)
            index[key] = k
        return k

    def const_of(k):
        o, a, _ = nodes[k]
        return a if o == OP_CONST else None

    def go(g: Formula) -> int:
        hit = memo.get(g)
        if hit is not None:
            return hit
        kind = g.kind
        if kind == "atom":
            if fixed is not None:
                if g not in fixed:
                    raise ValueError(f"atom {g.name} not in the atom list")
                j = fixed[g]
            else:
                j = used.setdefault(g, len(used))
            out = emit((OP_ATOM, j, 0))
        elif kind == "meta":
            raise ValueError("cannot evaluate a formula containing metavariables")
        elif kind == "not":
            s = go(g.args[0])
            c = const_of(s)
            if c is not None:
                out = emit((OP_CONST, 1 - c, 0))
            elif nodes[s][0] == OP_NOT:
                out = nodes[s][1]
            else:
                out = emit((OP_NOT, s, 0))
        elif kind == "and":
            l, r = go(g.args[0]), go(g.args[1])
            cl, cr = const_of(l), const_of(r)
            if cl == 0 or cr == 0:
                out = emit((OP_CONST, 0, 0))
            elif cl == 1:
                out = r
            elif cr == 1:
                out = l
            elif l == r:
                out = l
            elif (nodes[r][0] == OP_NOT and nodes[r][1] == l) or (nodes[l][0] == OP_NOT and nodes[l][1] == r):
                out = emit((OP_CONST, 0, 0))
            else:
                out = emit((OP_AND, l, r))
        elif kind == "cond":
            l, r = go(g.args[0]), go(g.args[1])
            if const_of(l) == 0 or const_of(r) == 1 or l == r:
                out = emit((OP_CONST, 1, 0))
            else:
                out = emit((OP_COND, l, r))
        else:
            raise AssertionError(kind)
        memo[g] = out
        return out

    root = go(core)
    # drop nodes unreachable from root (folding can orphan atoms)
    keep = sorted(_reachable(nodes, root))
    remap = {old: new for new, old in enumerate(keep)}
    if atoms is None:
        live = sorted({nodes[k][1] for k in keep if nodes[k][0] == OP_ATOM})
        order = sorted(used, key=used.get)
        atom_remap = {old: new for new, old in enumerate(live)}
        atom_tuple = tuple(order[j] for j in live)
    else:
        atom_remap = None
        atom_tuple = tuple(atoms)
    op = np.empty(len(keep), np.int64)
    a = np.zeros(len(keep), np.int64)
    b = np.zeros(len(keep), np.int64)
    for new, old in enumerate(keep):
        o, x, y = nodes[old]
        op[new] = o
        if o == OP_ATOM:
            a[new] = atom_remap[x] if atom_remap is not None else x
        elif o == OP_CONST:
            a[new] = x
        elif o == OP_NOT:
            a[new] = remap[x]
        else:
            a[new], b[new] = remap[x], remap[y]
    return Program(op, a, b, remap[root], atom_tuple)


def _reachable(nodes, root) -> set[int]:
    seen = set()
    stack = [root]
    while stack:
        k = stack.pop()
        if k in seen:
            continue
        seen.add(k)
        o, x, y = nodes[k]
        if o == OP_NOT:
            stack.append(x)
        elif o in (OP_AND, OP_COND):
            stack.extend((x, y))
    return seen


# ---------------------------------------------------------------- frame batches

def pack_orders(frames: list[list[list[int]]]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``frames[f][w]`` is the full order of ``w`` (starting with ``w``)."""
    nmax = max((len(fr) for fr in frames), default=1)
    F = len(frames)
    orders = np.full((F, nmax, nmax), -1, np.int64)
    olens = np.zeros((F, nmax), np.int64)
    nws = np.zeros(F, np.int64)
    for f, fr in enumerate(frames):
        nws[f] = len(fr)
        for w, lst in enumerate(fr):
            olens[f, w] = len(lst)
            orders[f, w, : len(lst)] = lst
    return orders, olens, nws


# ---------------------------------------------------------------- numba kernels

@njit(cache=True)
def _eval_nb(op, a, b, atom_masks, order, olen, nw, out):
    full = (np.int64(1) << nw) - 1
    for k in range(op.shape[0]):
        o = op[k]
        if o == 0:
            out[k] = atom_masks[a[k]]
        elif o == 1:
            out[k] = full if a[k] == 1 else 0
        elif o == 2:
            out[k] = (~out[a[k]]) & full
        elif o == 3:
            out[k] = out[a[k]] & out[b[k]]
        else:
            ant = out[a[k]]
            con = out[b[k]]
            m = np.int64(0)
            for w in range(nw):
                res = np.int64(1)
                for i in range(olen[w]):
                    x = order[w, i]
                    if (ant >> x) & 1:
                        res = (con >> x) & 1
                        break
                if res:
                    m |= np.int64(1) << w
            out[k] = m


@njit(cache=True)
def _search_nb(op, a, b, root, natoms, orders, olens, nws, targets, fstart, fstop, vstart):
    """First (frame, valuation, world) with root true inside ``targets[f]``."""
    out = np.zeros(op.shape[0], np.int64)
    masks = np.zeros(max(natoms, 1), np.int64)
    for f in range(fstart, fstop):
        nw = nws[f]
        full = (np.int64(1) << nw) - 1
        nv = np.int64(1) << (natoms * nw)
        v0 = vstart if f == fstart else 0
        for v in range(v0, nv):
            for j in range(natoms):
                masks[j] = (v >> (j * nw)) & full
            _eval_nb(op, a, b, masks, orders[f], olens[f], nw, out)
            hit = out[root] & targets[f]
            if hit != 0:
                w = 0
                while not ((hit >> w) & 1):
                    w += 1
                return f, v, w
    return -1, -1, -1


@njit(cache=True)
def _first_hits_nb(op, a, b, root, natoms, orders, olens, nws, targets, hitv, hitw):
    out = np.zeros(op.shape[0], np.int64)
    masks = np.zeros(max(natoms, 1), np.int64)
    for f in range(nws.shape[0]):
        hitv[f] = -1
        hitw[f] = -1
        nw = nws[f]
        full = (np.int64(1) << nw) - 1
        nv = np.int64(1) << (natoms * nw)
        for v in range(nv):
            for j in range(natoms):
                masks[j] = (v >> (j * nw)) & full
            _eval_nb(op, a, b, masks, orders[f], olens[f], nw, out)
            hit = out[root] & targets[f]
            if hit != 0:
                w = 0
                while not ((hit >> w) & 1):
                    w += 1
                hitv[f] = v
                hitw[f] = w
                break


@njit(cache=True)
def _letters_nb(natoms, nws, nvals, nmax):
    """Letter (atom bitmask) of every world under every valuation index."""
    F = nws.shape[0]
    out = np.full((F, nvals, nmax), -1, np.int64)
    for f in range(F):
        nw = nws[f]
        nv = np.int64(1) << (natoms * nw)
        for v in range(nv):
            for w in range(nw):
                code = 0
                for j in range(natoms):
                    if (v >> (j * nw + w)) & 1:
                        code |= 1 << j
                out[f, v, w] = code
    return out


@njit(cache=True)
def _fo_rows_nb(codes, orders, olens, nws, root_only):
    """Row of first occurrences of ``codes`` along each world's order."""
    F, V, N = codes.shape
    W = 1 if root_only else N
    out = np.full((F, V, W, N), -1, np.int64)
    for f in range(F):
        nw = nws[f]
        for v in range(V):
            if codes[f, v, 0] < 0:
                continue
            for w in range(nw if not root_only else 1):
                cnt = 0
                for i in range(olens[f, w]):
                    c = codes[f, v, orders[f, w, i]]
                    dup = False
                    for q in range(cnt):
                        if out[f, v, w, q] == c:
                            dup = True
                            break
                    if not dup:
                        out[f, v, w, cnt] = c
                        cnt += 1
    return out


# ---------------------------------------------------------------- numpy fallbacks

def _eval_np(prog: Program, atom_masks: np.ndarray, order, olen, nw) -> np.ndarray:
    """Vectorised over valuations: ``atom_masks`` has shape (natoms, V)."""
    full = (1 << nw) - 1
    V = atom_masks.shape[1] if atom_masks.ndim == 2 else 1
    out = np.zeros((len(prog.op), V), np.int64)
    for k in range(len(prog.op)):
        o = prog.op[k]
        if o == OP_ATOM:
            out[k] = atom_masks[prog.a[k]]
        elif o == OP_CONST:
            out[k] = full if prog.a[k] == 1 else 0
        elif o == OP_NOT:
            out[k] = (~out[prog.a[k]]) & full
        elif o == OP_AND:
            out[k] = out[prog.a[k]] & out[prog.b[k]]
        else:
            ant = out[prog.a[k]]
            con = out[prog.b[k]]
            m = np.zeros(V, np.int64)
            for w in range(nw):
                res = np.ones(V, np.int64)
                decided = np.zeros(V, bool)
                for i in range(olen[w]):
                    x = order[w, i]
                    take = (~decided) & (((ant >> x) & 1) == 1)
                    res = np.where(take, (con >> x) & 1, res)
                    decided |= take
                m |= res << w
            out[k] = m
    return out


def _frame_masks_np(natoms, nw, v0, v1):
    vs = np.arange(v0, v1, dtype=np.int64)
    full = (1 << nw) - 1
    masks = np.stack([(vs >> (j * nw)) & full for j in range(natoms)]) if natoms else np.zeros((0, len(vs)), np.int64)
    return vs, masks


_CHUNK = 1 << 16


def _search_np(prog, orders, olens, nws, targets, fstart, fstop, vstart):
    for f in range(fstart, fstop):
        nw = int(nws[f])
        nv = 1 << (prog.natoms * nw)
        v = vstart if f == fstart else 0
        while v < nv:
            v1 = min(nv, v + _CHUNK)
            vs, masks = _frame_masks_np(prog.natoms, nw, v, v1)
            root = _eval_np(prog, masks, orders[f], olens[f], nw)[prog.root]
            hit = root & targets[f]
            idx = np.flatnonzero(hit)
            if idx.size:
                i = idx[0]
                h = int(hit[i])
                w = (h & -h).bit_length() - 1
                return f, int(vs[i]), w
            v = v1
    return -1, -1, -1


# ---------------------------------------------------------------- public API

def search(prog: Program, orders, olens, nws, targets, fstart=0, fstop=None, vstart=0):
    """First (frame, valuation, world) where the program holds at a target world."""
    fstop = len(nws) if fstop is None else fstop
    check_bits(prog.natoms, nws[fstart:fstop])
    if HAVE_NUMBA:
        f, v, w = _search_nb(prog.op, prog.a, prog.b, prog.root, prog.natoms, orders, olens, nws,
                             targets, fstart, fstop, vstart)
        return int(f), int(v), int(w)
    return _search_np(prog, orders, olens, nws, targets, fstart, fstop, vstart)


def first_hits(prog: Program, orders, olens, nws, targets):
    """Per frame: the first valuation (and world) hitting a target, else -1."""
    check_bits(prog.natoms, nws)
    F = len(nws)
    hitv = np.full(F, -1, np.int64)
    hitw = np.full(F, -1, np.int64)
    if HAVE_NUMBA:
        _first_hits_nb(prog.op, prog.a, prog.b, prog.root, prog.natoms, orders, olens, nws, targets, hitv, hitw)
        return hitv, hitw
    for f in range(F):
        f2, v, w = _search_np(prog, orders, olens, nws, targets, f, f + 1, 0)
        if f2 >= 0:
            hitv[f], hitw[f] = v, w
    return hitv, hitw


def eval_masks(prog: Program, atom_masks, order, olen, nw) -> np.ndarray:
    """Truth masks of every program node for one frame and valuation."""
    atom_masks = np.asarray(atom_masks, np.int64)
    if HAVE_NUMBA:
        out = np.zeros(len(prog.op), np.int64)
        _eval_nb(prog.op, prog.a, prog.b, atom_masks if len(atom_masks) else np.zeros(1, np.int64),
                 order, olen, nw, out)
        return out
    return _eval_np(prog, atom_masks.reshape(len(atom_masks), 1), order, olen, nw)[:, 0]


def letters(natoms: int, nws) -> np.ndarray:
    """``out[f, v, w]``: atom bitmask of world w under valuation v (-1 padded)."""
    nws = np.asarray(nws, np.int64)
    check_bits(natoms, nws)
    nmax = int(nws.max()) if len(nws) else 1
    nvals = 1 << (natoms * nmax)
    if HAVE_NUMBA:
        return _letters_nb(natoms, nws, nvals, nmax)
    out = np.full((len(nws), nvals, nmax), -1, np.int64)
    for f, nw in enumerate(nws):
        nw = int(nw)
        vs = np.arange(1 << (natoms * nw), dtype=np.int64)
        for w in range(nw):
            code = np.zeros_like(vs)
            for j in range(natoms):
                code |= ((vs >> (j * nw + w)) & 1) << j
            out[f, : len(vs), w] = code
    return out


def fo_rows(codes, orders, olens, nws, root_only=False) -> np.ndarray:
    """First-occurrence rows of per-world codes along each world's order."""
    codes = np.ascontiguousarray(codes, np.int64)
    if HAVE_NUMBA:
        return _fo_rows_nb(codes, orders, olens, nws, root_only)
    F, V, N = codes.shape
    W = 1 if root_only else N
    out = np.full((F, V, W, N), -1, np.int64)
    for f in range(F):
        nw = int(nws[f])
        for v in range(V):
            if codes[f, v, 0] < 0:
                continue
            for w in range(1 if root_only else nw):
                seen = []
                for i in range(int(olens[f, w])):
                    c = int(codes[f, v, orders[f, w, i]])
                    if c not in seen:
                        seen.append(c)
                out[f, v, w, : len(seen)] = seen
    return out


class BitBudgetError(ValueError):
    pass


def check_bits(natoms: int, nws) -> None:
    nws = np.asarray(nws)
    if len(nws) and (int(nws.max()) > MAX_BITS or natoms * int(nws.max()) > MAX_BITS):
        raise BitBudgetError(f"{natoms} atoms over {int(nws.max())} worlds exceeds the {MAX_BITS}-bit valuation index")
