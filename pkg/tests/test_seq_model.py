import pytest
from hypothesis import given
from hypothesis import strategies as st

from condseq.formula import Atom, Cond, parse
from condseq.order_model import frame_properties, successor
from condseq.ordinal import OMEGA, OrdinalCNF
from condseq.seq_model import (Cat, Elem, FragmentError, Lasso, OmegaRep, ProtoworldTable, SequenceModel,
                               element_at, expr_equal, expr_from_json, expr_to_json, expr_to_text,
                               induced_order_model, lasso_expr, length, list_expr, minimal_representation, normalize_expr,
                               omega_padding, prefix_elements, relevant_positions, restrict, seq, tails)

from conftest import formula_st, lba_st

LABELS = ["1", "2", "3", "4"]


def naive_lasso_eval(prefix, cycle, table, f, n=0):
    """Truth at the tail starting at integer position n of prefix + cycle^omega (or a finite list)."""
    total = len(prefix) + len(cycle)

    def canon(i):
        if cycle and i >= len(prefix):
            return len(prefix) + (i - len(prefix)) % len(cycle)
        return i

    def label(i):
        i = canon(i)
        return prefix[i] if i < len(prefix) else cycle[i - len(prefix)]

    def positions(i):
        """Canonical start indices of the non-empty tails of the tail at i, in order."""
        out, seen = [], set()
        j = i
        while (j < total or cycle) and canon(j) not in seen:
            seen.add(canon(j))
            out.append(canon(j))
            j += 1
            if not cycle and j >= total:
                break
        return out

    def ev(g, i):
        k = g.kind
        if k == "atom":
            return table.holds(g.name, label(i))
        if k == "top":
            return True
        if k == "bot":
            return False
        if k == "not":
            return not ev(g.args[0], i)
        if k == "and":
            return ev(g.args[0], i) and ev(g.args[1], i)
        if k == "or":
            return ev(g.args[0], i) or ev(g.args[1], i)
        if k == "imp":
            return (not ev(g.args[0], i)) or ev(g.args[1], i)
        if k == "iff":
            return ev(g.args[0], i) == ev(g.args[1], i)
        if k == "box":
            return all(ev(g.args[0], j) for j in positions(i))
        if k == "dia":
            return any(ev(g.args[0], j) for j in positions(i))
        a, b = g.args
        hit = next((j for j in positions(i) if ev(a, j)), None)
        if k == "cond":
            return hit is None or ev(b, hit)
        return hit is not None and ev(b, hit)

    return ev(f, n)


@st.composite
def lassos(draw, allow_finite=True):
    prefix = draw(st.lists(st.sampled_from(LABELS), max_size=3))
    cmin = 0 if (allow_finite and prefix) else 1
    cycle = draw(st.lists(st.sampled_from(LABELS), min_size=cmin, max_size=3))
    return tuple(prefix), tuple(cycle)


@st.composite
def tables(draw, atoms=("p0", "p1", "p2")):
    return ProtoworldTable({a: set(draw(st.lists(st.sampled_from(LABELS), unique=True))) for a in atoms})


def exprs(max_leaves=6):
    """Symbolic sequences with nested omega-repetitions (lengths below omega^omega)."""
    return st.recursive(
        st.sampled_from(LABELS).map(Elem),
        lambda sub: st.one_of(st.lists(sub, min_size=2, max_size=3).map(lambda xs: seq(*xs)),
                              sub.map(OmegaRep)),
        max_leaves=max_leaves)


@given(lassos(), tables(), formula_st())
def test_lasso_semantics_matches_naive(ls, table, f):
    prefix, cycle = ls
    m = SequenceModel(lasso_expr(prefix, cycle), table)
    assert m.evaluate(f) == naive_lasso_eval(prefix, cycle, table, f)


@given(exprs())
def test_expr_json_round_trip(e):
    assert expr_from_json(expr_to_json(e)) == e


@given(exprs())
def test_tails_are_well_ordered_root_first(e):
    ts = tails(e)
    ranks = [r for _, r in ts]
    assert ranks[0] == OrdinalCNF.finite(0)
    assert all(a < b for a, b in zip(ranks, ranks[1:]))
    assert all(r < length(e) for r in ranks)


@given(exprs(), tables())
def test_induced_frames_are_flat(e, table):
    rep = frame_properties(induced_order_model(e, table).frame)
    assert rep.flat


@given(lassos(), tables())
def test_lasso_and_list_frames(ls, table):
    prefix, cycle = ls
    m = induced_order_model(lasso_expr(prefix, cycle), table)
    rep = frame_properties(m.frame)
    assert rep.flat and rep.ancestral
    if not cycle:
        for w in m.frame.worlds:
            x = w
            for _ in range(len(m.frame.worlds)):
                x = successor(m.frame, x)
            assert successor(m.frame, x) == x


class TestExprEqual:
    @given(exprs())
    def test_reflexive(self, e):
        assert expr_equal(e, e)

    @given(exprs(), exprs())
    def test_symmetric(self, a, b):
        assert expr_equal(a, b) == expr_equal(b, a)

    @given(exprs(4), exprs(4), exprs(4))
    def test_transitive(self, a, b, c):
        if expr_equal(a, b) and expr_equal(b, c):
            assert expr_equal(a, c)

    @pytest.mark.parametrize("a,b", [
        (seq("1", OmegaRep(Elem("1"))), OmegaRep(Elem("1"))),
        (seq("1", OmegaRep(seq("2", "1"))), OmegaRep(seq("1", "2"))),
        (OmegaRep(seq("1", "1")), OmegaRep(Elem("1"))),
    ])
    def test_rewrite_identities(self, a, b):
        assert expr_equal(a, b)

    @given(exprs())
    def test_normalization_preserves_sequence(self, e):
        n = normalize_expr(e)
        assert length(n) == length(e) and expr_equal(n, e)

    def test_distinguishes(self):
        # same single-tail frame, different lengths
        assert not expr_equal(OmegaRep(OmegaRep(Elem("1"))), OmegaRep(Elem("1")))
        assert not expr_equal(OmegaRep(seq("1", "2")), OmegaRep(seq("2", "1")))
        assert not expr_equal(seq(OmegaRep(Elem("1")), "2"), OmegaRep(Elem("1")))

    @given(exprs(4), exprs(4), tables())
    def test_congruence_for_truth(self, a, b, table):
        if expr_equal(a, b):
            for f in (parse("p0 > p1"), parse("[]p0"), parse("p0 > (p1 > p2)")):
                assert SequenceModel(a, table).evaluate(f) == SequenceModel(b, table).evaluate(f)


class TestLengths:
    def test_examples(self):
        assert length(list_expr(["1", "2", "3"])) == OrdinalCNF.finite(3)
        assert length(lasso_expr(["1"], ["2", "3"])) == OMEGA
        worked = Cat([OmegaRep(seq("a", "b")), Elem("c"), Elem("a"), Elem("b")])
        assert length(worked) == OMEGA + 3
        assert length(OmegaRep(seq(OmegaRep(Elem("1")), "2"))) == OMEGA.times_omega()

    @given(lassos())
    def test_element_at_matches_prefix(self, ls):
        prefix, cycle = ls
        e = lasso_expr(prefix, cycle)
        els = prefix_elements(e, 7)
        for i, x in enumerate(els):
            assert element_at(e, i) == x


class TestLasso:
    def test_cycle_minimized(self):
        assert Lasso(("1",), ("2", "3", "2", "3")).cycle == ("2", "3")

    def test_prefix_rolled_into_cycle(self):
        assert Lasso(("1", "3"), ("2", "3")) == Lasso(("1",), ("3", "2"))

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            Lasso((), ())

    @given(lassos(allow_finite=False))
    def test_json(self, ls):
        lasso = Lasso(*ls)
        assert Lasso.from_json(lasso.to_json()) == lasso


@given(st.lists(st.sampled_from(LABELS), min_size=1, max_size=5), tables(), formula_st())
def test_omega_padding_preserves_truth(items, table, f):
    finite = SequenceModel(list_expr(items), table)
    padded = SequenceModel(omega_padding(items).to_expr(), table)
    assert finite.evaluate(f) == padded.evaluate(f)


@given(lassos(allow_finite=False), tables(), formula_st())
def test_minimal_representation_preserves_truth(ls, table, f):
    lasso = Lasso(*ls)
    l2, t2 = minimal_representation(lasso, table)
    labels = list(l2.prefix) + list(l2.cycle)
    assert len(set(labels)) == len(labels)
    assert SequenceModel(lasso.to_expr(), table).evaluate(f) == SequenceModel(l2.to_expr(), t2).evaluate(f)


@given(exprs(), tables(), lba_st())
def test_restriction_preserves_truth(e, table, f):
    pos = relevant_positions(e, f, table)
    restricted = SequenceModel(list_expr(restrict(e, pos)), table)
    assert SequenceModel(e, table).evaluate(f) == restricted.evaluate(f)


def test_relevant_positions_rejects_nested_antecedent():
    with pytest.raises(FragmentError):
        relevant_positions(Elem("1"), Cond(Cond(Atom(0), Atom(1)), Atom(2)), ProtoworldTable())


def test_text_rendering():
    assert expr_to_text(Cat([OmegaRep(seq("a", "b")), Elem("c")])) == "(a b)^ω c"
