import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from condseq.classes import LogicId
from condseq.decide import (AxiomInstance, Derivation, Detachment, SearchBudget, Status, Tautology,
                            check_derivation, decide_modal, derivation_from_json, derivation_to_json,
                            is_tautology, model_from_any, model_json, replay, satisfiable, schema,
                            schema_instance, test_schema as run_schema_test, valid, valid_on_frames)
from condseq.formula import Neg, parse, to_text
from condseq.order_model import canonical_orders, frame_from_orders, frame_properties

from conftest import DATA, formula_st, lba_st

FLATTENING = "(p0 > ((p0&p1)>p2)) <-> ((p0&p1)>p2)"
B3 = SearchBudget(max_worlds=3)


class TestVerdicts:
    def test_flattening(self):
        assert valid(FLATTENING, "c2f").status is Status.VALID_EXACT
        v = valid(FLATTENING, "c2")
        assert v.status is Status.INVALID and not replay(v.model, parse(FLATTENING))
        # smallest order-frame countermodel
        assert len(v.model.frame.worlds) == 3

    def test_sequentiality(self):
        f = schema_instance("Sequentiality")
        assert valid(f, "c2fs", SearchBudget(max_worlds=6)).status is Status.VALID_WITHIN_BOUND
        v = valid(f, "c2f")
        assert v.status is Status.INVALID and not replay(v.model, f)

    def test_sat_with_model(self):
        v = satisfiable("p0 & ~(p0 > p0)", "c2")
        assert v.status in (Status.UNSAT_EXACT, Status.UNSAT_WITHIN_BOUND)
        v = satisfiable("p0 > ~p0", "c2f")
        assert v.status is Status.SAT and replay(v.model, parse("p0 > ~p0"))

    def test_budget_validation(self):
        with pytest.raises(ValueError):
            SearchBudget(max_worlds=0)

    def test_json_round_trip_of_models(self):
        v = valid(FLATTENING, "c2")
        m = model_from_any(json.loads(json.dumps(model_json(v.model))))
        assert replay(m, parse(FLATTENING)) is False


@settings(max_examples=30)
@given(formula_st(2, 7), st.sampled_from(["c2", "c2f", "c2fs", "c2fm", "c2fsm"]))
def test_witness_replay(f, logic):
    v = satisfiable(f, logic, B3)
    if v.status is Status.SAT:
        assert replay(v.model, f)
    w = valid(f, logic, B3)
    if w.status is Status.INVALID:
        assert not replay(w.model, f)


@settings(max_examples=25)
@given(formula_st(2, 6), st.sampled_from(["c2", "c2f", "c2fs"]))
def test_budget_monotone(f, logic):
    small = satisfiable(f, logic, SearchBudget(max_worlds=2))
    big = satisfiable(f, logic, SearchBudget(max_worlds=3))
    if small.status is Status.SAT:
        assert big.status is Status.SAT
    if small.status is Status.UNSAT_EXACT:
        assert big.status is Status.UNSAT_EXACT


@settings(max_examples=25)
@given(formula_st(2, 7))
def test_logic_lattice(f):
    """Frame-class containment: validity propagates up the lattice."""
    verdict = {L: valid(f, L, B3).status is not Status.INVALID for L in ("c2", "c2f", "c2fs", "c2fm", "c2fsm")}
    if verdict["c2"]:
        assert verdict["c2f"]
    if verdict["c2f"]:
        assert verdict["c2fs"] and verdict["c2fm"]
    if verdict["c2fs"] or verdict["c2fm"]:
        assert verdict["c2fsm"]


@settings(max_examples=40)
@given(lba_st(2, 2))
def test_boolean_antecedent_collapse(f):
    a = valid(f, "c2f", B3).status is Status.INVALID
    b = valid(f, "c2fsm", B3).status is Status.INVALID
    assert a == b


def test_sequentiality_variants_agree_on_flat_frames():
    names = ["Sequentiality", "Restricted Sequentiality", "Conditional Sequentiality"]
    for n in (1, 2, 3):
        flat = [o for o in canonical_orders(n) if frame_properties(frame_from_orders(o)).flat]
        rows = [valid_on_frames(schema_instance(s), flat) for s in names]
        assert rows[0] == rows[1] == rows[2]


class TestSchemaLibrary:
    @pytest.mark.parametrize("name", ["Identity", "CSO", "crashing ce", "∨-Distribution", "CMon≫", "M*"])
    def test_aliases(self, name):
        assert schema(name)

    def test_unknown(self):
        with pytest.raises(KeyError):
            schema("nope")

    def test_materialism_witness_in_c2fs(self):
        rep = run_schema_test("Materialism", "c2fs", 4)
        assert not rep.valid and not replay(rep.model, schema_instance("Materialism"))

    def test_import_export_fails_everywhere(self):
        for L in LogicId:
            assert not run_schema_test("IE", L, 4).valid


class TestModal:
    def test_t_valid_in_kt(self):
        assert decide_modal("[]p -> p", "KT").status is Status.VALID_WITHIN_BOUND

    def test_four_needs_transitivity(self):
        assert decide_modal("[]p -> [][]p", "KT").status is Status.INVALID
        assert decide_modal("[]p -> [][]p", "S43").status is Status.VALID_WITHIN_BOUND

    def test_mckinsey_fails_on_omega_sequences(self):
        v = decide_modal("[]<>p -> <>[]p", "S431")
        assert v.status is Status.INVALID and not replay(v.model, parse("[]<>p -> <>[]p"))

    def test_rejects_conditionals(self):
        with pytest.raises(ValueError):
            decide_modal("p > q", "KT")


class TestDerivations:
    @pytest.mark.parametrize("stem", ["mod", "four", "h", "restricted_sequentiality"])
    def test_bundled_check(self, stem):
        d = derivation_from_json(json.loads((DATA / "derivations" / f"{stem}.json").read_text()))
        assert check_derivation(d).ok

    @pytest.mark.parametrize("stem", ["mod", "four", "restricted_sequentiality"])
    def test_each_corruption_rejected_at_its_step(self, stem):
        data = json.loads((DATA / "derivations" / f"{stem}.json").read_text())
        for i in range(len(data["steps"])):
            bad = json.loads(json.dumps(data))
            bad["steps"][i]["formula"] = to_text(Neg(parse(bad["steps"][i]["formula"])))
            rep = check_derivation(derivation_from_json(bad))
            assert not rep.ok and rep.first_bad_step == i + 1

    def test_json_round_trip(self):
        data = json.loads((DATA / "derivations" / "mod.json").read_text())
        d = derivation_from_json(data)
        assert derivation_from_json(derivation_to_json(d)) == d

    def test_forward_citation_rejected(self):
        f = parse("p0 -> p0")
        d = Derivation(((f, Detachment(2, 1)), (f, Tautology())))
        rep = check_derivation(d)
        assert not rep.ok and rep.first_bad_step == 1

    def test_axiom_not_in_logic(self):
        f = schema_instance("Flattening")
        b = {m: f"p{i}" for i, m in enumerate(schema("Flattening").schema.metavariables)}
        d = Derivation(((f, AxiomInstance("Flattening", b)),), LogicId.C2)
        assert not check_derivation(d).ok
        assert check_derivation(d, "c2f").ok

    def test_tautology(self):
        assert is_tautology(parse("(p > q) | ~(p > q)"))
        assert not is_tautology(parse("p > q"))
