import json
import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings

from condseq import kernels
from condseq.formula import Neg
from condseq.order_model import canonical_orders

from conftest import formula_st

needs_numba = pytest.mark.skipif(not kernels.HAVE_NUMBA, reason="numba not importable")

FRAMES = [[list(o) for o in orders] for n in (1, 2, 3) for orders in canonical_orders(n)]
PACKED = kernels.pack_orders(FRAMES)


def both(monkeypatch, fn):
    """Run fn under each backend and return (numba result, numpy result)."""
    fast = fn()
    monkeypatch.setattr(kernels, "HAVE_NUMBA", False)
    slow = fn()
    monkeypatch.setattr(kernels, "HAVE_NUMBA", True)
    return fast, slow


@needs_numba
@settings(max_examples=40)
@given(formula_st(2, 7))
def test_search_and_first_hits_agree(f):
    mp = pytest.MonkeyPatch()
    try:
        prog = kernels.compile_formula(Neg(f))
        orders, olens, nws = PACKED
        targets = np.ones(len(nws), np.int64)
        a, b = both(mp, lambda: kernels.search(prog, orders, olens, nws, targets))
        assert a == b
        (hv1, hw1), (hv2, hw2) = both(mp, lambda: kernels.first_hits(prog, orders, olens, nws, targets))
        assert (hv1 == hv2).all() and (hw1 == hw2).all()
    finally:
        mp.undo()


@needs_numba
@settings(max_examples=30)
@given(formula_st(2, 7))
def test_eval_masks_agree(f):
    mp = pytest.MonkeyPatch()
    try:
        prog = kernels.compile_formula(f)
        orders, olens, nws = PACKED
        rng = np.random.default_rng(0)
        for fi in range(len(nws)):
            nw = int(nws[fi])
            masks = rng.integers(0, 1 << nw, size=prog.natoms)
            a, b = both(mp, lambda: kernels.eval_masks(prog, masks, orders[fi], olens[fi], nw))
            assert (a == b).all()
    finally:
        mp.undo()


@needs_numba
@pytest.mark.parametrize("natoms", [1, 2])
def test_letters_and_first_occurrence_rows_agree(monkeypatch, natoms):
    orders, olens, nws = PACKED
    a, b = both(monkeypatch, lambda: kernels.letters(natoms, nws))
    assert (a == b).all()
    for root_only in (False, True):
        r1, r2 = both(monkeypatch, lambda: kernels.fo_rows(a, orders, olens, nws, root_only))
        assert (r1 == r2).all()


def test_bit_budget():
    with pytest.raises(kernels.BitBudgetError):
        kernels.check_bits(9, [8])


def test_environment_flag_selects_numpy():
    code = ("import json; from condseq import kernels; from condseq.decide import valid; "
            "print(json.dumps([kernels.backend(), valid('(p0 > ((p0&p1)>p2)) <-> ((p0&p1)>p2)', 'c2').status.value]))")
    env = dict(os.environ, CONDSEQ_NO_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert json.loads(out.stdout) == ["numpy", "INVALID"]
