import os
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from condseq.formula import And, Atom, Bot, Box, Cond, Dia, Iff, Imp, Neg, Or, SCond, Top

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", max_examples=200, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

DATA = Path(__file__).resolve().parent.parent / "src" / "condseq" / "data"
GOLDEN = Path(__file__).resolve().parent / "golden"


@pytest.fixture
def data_dir() -> Path:
    return DATA


def atoms_st(n: int = 3):
    return st.sampled_from([Atom(i) for i in range(n)])


def boolean_st(n: int = 2, max_leaves: int = 6):
    return st.recursive(
        st.one_of(atoms_st(n), st.just(Top()), st.just(Bot())),
        lambda sub: st.one_of(
            st.builds(Neg, sub), st.builds(And, sub, sub), st.builds(Or, sub, sub),
            st.builds(Imp, sub, sub)),
        max_leaves=max_leaves)


def formula_st(n: int = 3, max_leaves: int = 10):
    """Arbitrary formulas over every connective."""
    return st.recursive(
        st.one_of(atoms_st(n), st.just(Top()), st.just(Bot())),
        lambda sub: st.one_of(
            st.builds(Neg, sub), st.builds(Box, sub), st.builds(Dia, sub),
            st.builds(And, sub, sub), st.builds(Or, sub, sub), st.builds(Imp, sub, sub),
            st.builds(Iff, sub, sub), st.builds(Cond, sub, sub), st.builds(SCond, sub, sub)),
        max_leaves=max_leaves)


def lba_st(n: int = 2, depth: int = 2, max_leaves: int = 4):
    """Formulas whose conditional antecedents are Boolean, nesting depth at most ``depth``."""
    base = boolean_st(n, 3)
    level = base
    for _ in range(depth):
        prev = level
        level = st.recursive(
            st.one_of(prev, st.builds(Cond, base, prev)),
            lambda sub, prev=prev: st.one_of(st.builds(Neg, sub), st.builds(And, sub, sub),
                                             st.builds(Or, sub, sub)),
            max_leaves=max_leaves)
    return level
