import json

import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from condseq.decide import kripke_evaluate
from condseq.formula import Atom, Box, Cond, Dia, Neg, Or, parse
from condseq.order_model import (FrameValidationError, KripkeModel, OrderFrame, PointedModel, SelectionError,
                                 Valuation, canonical_orders, enumerate_frames, evaluate, frame_from_orders,
                                 frame_properties, gamma_finite_witness, gamma_sentences, kripke_to_flat_order,
                                 model_from_json, model_to_json, order_to_selection, reachable_set,
                                 selection_to_order, successor_sequence, validate)

from conftest import DATA, formula_st


def naive_eval(fr: OrderFrame, val: dict, f, w: str) -> bool:
    """Direct reading of the truth clauses over each world's well-order."""
    k = f.kind
    if k == "atom":
        return w in val.get(f.name, ())
    if k == "top":
        return True
    if k == "bot":
        return False
    if k == "not":
        return not naive_eval(fr, val, f.args[0], w)
    if k == "and":
        return all(naive_eval(fr, val, x, w) for x in f.args)
    if k == "or":
        return any(naive_eval(fr, val, x, w) for x in f.args)
    if k == "imp":
        return (not naive_eval(fr, val, f.args[0], w)) or naive_eval(fr, val, f.args[1], w)
    if k == "iff":
        return naive_eval(fr, val, f.args[0], w) == naive_eval(fr, val, f.args[1], w)
    if k == "box":
        return all(naive_eval(fr, val, f.args[0], x) for x in fr.order(w))
    if k == "dia":
        return any(naive_eval(fr, val, f.args[0], x) for x in fr.order(w))
    a, b = f.args
    first = next((x for x in fr.order(w) if naive_eval(fr, val, a, x)), None)
    if k == "cond":
        return first is None or naive_eval(fr, val, b, first)
    if k == "scond":
        return first is not None and naive_eval(fr, val, b, first)
    raise AssertionError(k)


@st.composite
def models(draw, max_worlds=4, atoms=("p0", "p1", "p2")):
    n = draw(st.integers(1, max_worlds))
    names = [f"w{i}" for i in range(n)]
    after = {}
    for i, w in enumerate(names):
        others = [x for x in names if x != w]
        chosen = draw(st.lists(st.sampled_from(others), unique=True)) if others else []
        after[w] = tuple(chosen)
    val = {a: set(draw(st.lists(st.sampled_from(names), unique=True))) for a in atoms}
    fr = OrderFrame(tuple(names), after)
    return PointedModel(fr, Valuation(val), draw(st.sampled_from(names)))


@given(models(), formula_st())
def test_evaluate_matches_truth_clauses(m, f):
    val = {k: set(v) for k, v in m.valuation.table.items()}
    for w in m.frame.worlds:
        assert evaluate(m, f, w) == naive_eval(m.frame, val, f, w)


@given(models())
def test_json_round_trip(m):
    assert model_from_json(json.loads(json.dumps(model_to_json(m)))) == m


@given(models())
def test_successor_sequence_visits_reachable_set(m):
    for w in m.frame.worlds:
        lasso = successor_sequence(m.frame, w)
        assert set(lasso.prefix) | set(lasso.cycle) == reachable_set(m.frame, w)


@given(models())
def test_selection_round_trip(m):
    fr = m.frame
    assert selection_to_order(order_to_selection(fr), fr.worlds) == fr


def test_selection_constraint_violation():
    fr = frame_from_orders([(0, 1), (1,)])
    table = order_to_selection(fr)
    table[(frozenset({"w0"}), "w0")] = frozenset()
    with pytest.raises(SelectionError) as ei:
        selection_to_order(table, fr.worlds)
    assert ei.value.constraint == 1


class TestValidation:
    def test_rejects_self_in_after_list(self):
        with pytest.raises(FrameValidationError) as ei:
            validate({"worlds": ["a"], "after": {"a": ["a"]}})
        assert ("world in own after-list", "a") in ei.value.violations

    def test_collects_every_violation(self):
        with pytest.raises(FrameValidationError) as ei:
            validate({"worlds": ["a", "b"], "after": {"a": ["b", "b", "c"]}})
        reasons = {r for r, _ in ei.value.violations}
        assert {"duplicate", "unknown world"} <= reasons

    def test_designated_must_exist(self):
        with pytest.raises(FrameValidationError):
            PointedModel(frame_from_orders([(0,)]), Valuation(), "zz")


class TestFrameProperties:
    def test_counts_of_canonical_frames(self):
        # renaming classes of frames with one, two and three worlds
        assert [len(canonical_orders(n)) for n in (1, 2, 3)] == [1, 3, 25]

    def test_enumeration_cap(self):
        with pytest.raises(ValueError):
            list(enumerate_frames(5))

    def test_flat_implies_semi_flat_and_transitive(self):
        for n in (1, 2, 3):
            for fr in enumerate_frames(n):
                rep = frame_properties(fr)
                if rep.flat:
                    assert rep.semi_flat and rep.transitive

    def test_flat_classes_are_subsets(self):
        for n in (1, 2, 3):
            flat = set(enumerate_frames(n, "flat"))
            anc = set(enumerate_frames(n, "flat_ancestral"))
            assert anc <= flat <= set(enumerate_frames(n))

    def test_flat_non_ancestral_example(self):
        # 1 and 2 are each other's successors; 3 is accessible from 1 but never reached
        fr = validate({"1": ["2", "3"], "2": ["1", "3"], "3": []})
        rep = frame_properties(fr)
        assert rep.flat and not rep.ancestral


@st.composite
def total_preorders(draw):
    """Reflexive, transitive, connected relations: ranked clusters, later clusters accessible."""
    n = draw(st.integers(1, 4))
    names = [f"v{i}" for i in range(n)]
    ranks = draw(st.lists(st.integers(0, 2), min_size=n, max_size=n))
    rel = {(x, y) for i, x in enumerate(names) for j, y in enumerate(names) if ranks[i] <= ranks[j]}
    val = {a: set(draw(st.lists(st.sampled_from(names), unique=True))) for a in ("p0", "p1")}
    tie = sorted(names, key=lambda x: ranks[names.index(x)])
    return KripkeModel(tuple(names), frozenset(rel), Valuation(val), names[0]), tie


def modal_st():
    return st.recursive(
        st.sampled_from([Atom(0), Atom(1)]),
        lambda s: st.one_of(st.builds(Neg, s), st.builds(Box, s), st.builds(Dia, s), st.builds(Or, s, s)),
        max_leaves=6)


@given(total_preorders(), modal_st())
def test_kripke_to_flat_order(km, f):
    k, tie = km
    fr = kripke_to_flat_order(k, tie)
    assert frame_properties(fr).flat
    m = PointedModel(fr, k.valuation, k.designated)
    for w in k.worlds:
        assert evaluate(m, f, w) == kripke_evaluate(k, f, w)


def test_kripke_to_flat_rejects_non_connected():
    k = KripkeModel(("a", "b", "c"), frozenset({("a", "a"), ("b", "b"), ("c", "c"), ("a", "b"), ("a", "c")}),
                    Valuation(), "a")
    with pytest.raises(ValueError, match="connected"):
        kripke_to_flat_order(k, ["a", "b", "c"])


@pytest.mark.parametrize("k", [1, 2, 3, 5])
def test_gamma_witness(k):
    m = gamma_finite_witness(k)
    assert all(evaluate(m, g) for g in gamma_sentences(k))


class TestBundledModels:
    def test_flattening_countermodel(self):
        m = model_from_json((DATA / "flattening_countermodel.json").read_text())
        assert not evaluate(m, parse("(p&q) > r"), "1")
        assert evaluate(m, parse("p > ((p&q) > r)"), "1")

    def test_flat_not_sequential(self):
        m = model_from_json((DATA / "flat_not_sequential.json").read_text())
        rep = frame_properties(m.frame)
        assert rep.flat and not rep.ancestral
