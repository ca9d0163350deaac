"""condseq command line.

Exit codes: 0 success, 1 refuted or rejected, 2 inconclusive within the bound,
3 input error, 4 budget exceeded. Diagnostics go to stderr as one JSON object.
"""

from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable

EXIT_OK, EXIT_REFUTED, EXIT_BOUND, EXIT_INPUT, EXIT_BUDGET = 0, 1, 2, 3, 4


class InputError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        raise InputError(message)


# ---------------------------------------------------------------- helpers

def _read_json(path: str) -> Any:
    try:
        text = sys.stdin.read() if path == "-" else Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path} is not valid JSON: {exc}") from exc


def _formula_text(args) -> str:
    if getattr(args, "file", None):
        try:
            return Path(args.file).read_text(encoding="utf-8").strip()
        except OSError as exc:
            raise InputError(f"cannot read {args.file}: {exc}") from exc
    if not getattr(args, "formula", None):
        raise InputError("a formula is required (positional or --file)")
    return args.formula


def _formula(text: str):
    from .formula import FormulaSyntaxError, parse

    try:
        return parse(text)
    except FormulaSyntaxError as exc:
        raise InputError(f"formula syntax: {exc}") from exc


def _atoms(args) -> list[str]:
    if not args.atoms:
        return ["p"]
    return [a.strip() for a in args.atoms.split(",") if a.strip()]


def _budget(args):
    from .decide import SearchBudget

    try:
        return SearchBudget(max_worlds=args.bound, deadline_ms=args.deadline_ms)
    except ValueError as exc:
        raise InputError(str(exc)) from exc


def _emit(args, payload: dict, text: str | Callable[[], str]) -> None:
    if args.format == "json":
        print(json.dumps(payload, indent=2, sort_keys=True, ensure_ascii=False))
    else:
        print(text() if callable(text) else text)


def _write_model(args, model) -> None:
    if getattr(args, "out", None) and model is not None:
        from .decide import model_json

        Path(args.out).write_text(json.dumps(model_json(model), indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _model_text(model) -> str:
    from .decide import model_json
    from .seq_model import SequenceModel, expr_to_text

    if isinstance(model, SequenceModel):
        atoms = ", ".join(f"{a}@{{{','.join(sorted(v))}}}" for a, v in sorted(model.table.atoms.items()))
        return f"sequence {expr_to_text(model.root)}; {atoms}"
    return json.dumps(model_json(model), sort_keys=True)


# ---------------------------------------------------------------- commands

def cmd_parse(args) -> int:
    from .formula import atoms_of, classify_fragment, modal_depth, normalize, to_text

    f = _formula(_formula_text(args))
    payload = {"formula": to_text(f), "unicode": to_text(f, "unicode"), "core": to_text(normalize(f)),
               "fragment": classify_fragment(f), "depth": modal_depth(f), "atoms": [a.name for a in atoms_of(f)]}
    _emit(args, payload, lambda: f"{payload['unicode']}\nfragment {payload['fragment']}, depth {payload['depth']}")
    return EXIT_OK


def _load_model(args):
    from .decide import model_from_any

    if not args.model:
        raise InputError("--model FILE is required")
    try:
        return model_from_any(_read_json(args.model))
    except (KeyError, ValueError, TypeError) as exc:
        raise InputError(f"bad model file: {exc}") from exc


def cmd_eval(args) -> int:
    from .decide import replay
    from .order_model import PointedModel, evaluate
    from .formula import to_text

    m = _load_model(args)
    f = _formula(_formula_text(args))
    if args.world is not None:
        if not isinstance(m, PointedModel):
            raise InputError("--world applies to order models only")
        if args.world not in m.frame.worlds:
            raise InputError(f"unknown world {args.world!r}")
        truth = evaluate(m, f, args.world)
        where = args.world
    else:
        truth = replay(m, f)
        where = getattr(m, "designated", "root")
    _emit(args, {"formula": to_text(f), "world": where, "value": truth}, "true" if truth else "false")
    return EXIT_OK if truth else EXIT_REFUTED


def cmd_frame_info(args) -> int:
    from .order_model import PointedModel, frame_properties
    from .seq_model import SequenceModel

    m = _load_model(args)
    if isinstance(m, SequenceModel):
        m = m.pointed()
    if not isinstance(m, PointedModel):
        raise InputError("frame-info needs an order or sequence model")
    rep = frame_properties(m.frame).to_json()
    _emit(args, rep, lambda: "\n".join(f"{k}: {v}" for k, v in rep.items()))
    return EXIT_OK


_SAT_EXIT = {"SAT": EXIT_OK, "UNSAT_EXACT": EXIT_REFUTED, "UNSAT_WITHIN_BOUND": EXIT_BOUND}
_VALID_EXIT = {"VALID_EXACT": EXIT_OK, "INVALID": EXIT_REFUTED, "VALID_WITHIN_BOUND": EXIT_BOUND}


def _verdict_text(v) -> str:
    line = f"{v.status.value} ({v.logic}, bound {v.bound})"
    if v.certificate:
        line += f"\ncertificate: {v.certificate}"
    if v.model is not None:
        line += "\nmodel: " + _model_text(v.model)
    return line


def cmd_sat(args) -> int:
    from .decide import satisfiable

    v = satisfiable(_formula(_formula_text(args)), args.logic, _budget(args))
    _write_model(args, v.model)
    _emit(args, v.to_json(), lambda: _verdict_text(v))
    return _SAT_EXIT[v.status.value]


def cmd_valid(args) -> int:
    from .decide import valid

    v = valid(_formula(_formula_text(args)), args.logic, _budget(args))
    _write_model(args, v.model)
    _emit(args, v.to_json(), lambda: _verdict_text(v))
    return _VALID_EXIT[v.status.value]


def cmd_countermodel(args) -> int:
    from .decide import model_json, valid

    v = valid(_formula(_formula_text(args)), args.logic, _budget(args))
    _write_model(args, v.model)
    payload = v.to_json()
    if v.model is not None:
        _emit(args, payload, lambda: _model_text(v.model))
    else:
        _emit(args, payload, f"no countermodel ({v.status.value}, bound {v.bound})")
    return _VALID_EXIT[v.status.value]


def cmd_schema_test(args) -> int:
    from .decide import schema, test_schema

    try:
        schema(args.name)
    except KeyError as exc:
        raise InputError(str(exc)) from exc
    cls = args.frame_class or args.logic
    rep = test_schema(args.name, cls, args.bound or 4, args.atoms.split(",") if args.atoms else None,
                      args.deadline_ms)
    _write_model(args, rep.model)
    _emit(args, rep.to_json(), lambda: (f"{rep.schema} on {rep.frame_class} up to {rep.max_size}: "
                                       + ("valid at this size" if rep.valid else "countermodel "
                                          + _model_text(rep.model))))
    return EXIT_OK if rep.valid else EXIT_REFUTED


def cmd_statedesc(args) -> int:
    from .statedesc import SizeCapError, consistent, list_from_json, list_to_json, sd_to_json, state_descriptions

    if args.file:
        try:
            dl = list_from_json(_read_json(args.file), args.logic if args.logic_given else None)
        except (KeyError, ValueError) as exc:
            raise InputError(f"bad description list: {exc}") from exc
        r = consistent(dl, args.logic)
        payload = {"list": list_to_json(dl), **r.to_json()}
        _emit(args, payload, lambda: f"{r.label}: {r.reason}")
        if r.consistent:
            return EXIT_OK
        return EXIT_REFUTED if r.exact else EXIT_BOUND
    try:
        y = state_descriptions(_atoms(args), args.depth if args.depth is not None else 1, args.logic,
                               max_tails=args.bound)
    except SizeCapError as exc:
        raise InputError(str(exc)) from exc
    _emit(args, y.to_json(),
          lambda: "\n".join([f"{len(y)} state descriptions ({'exact' if y.exact else 'within bound'})"]
                            + [x.to_text() for x in y.members]))
    return EXIT_OK if y.exact else EXIT_BOUND


def cmd_makeseq(args) -> int:
    from .statedesc import MakeSeqError, list_from_json, make_seq
    from .seq_model import expr_to_text

    if not args.file:
        raise InputError("makeseq needs --file with a description list")
    try:
        dl = list_from_json(_read_json(args.file), args.logic if args.logic_given else None)
    except (KeyError, ValueError) as exc:
        raise InputError(f"bad description list: {exc}") from exc
    try:
        res = make_seq(dl)
    except MakeSeqError as exc:
        print(json.dumps({"error": str(exc), "kind": "refuted"}), file=sys.stderr)
        return EXIT_REFUTED
    _emit(args, res.to_json(), lambda: f"{expr_to_text(res.expr)}  (length {res.length.to_text()})")
    return EXIT_OK


def cmd_canonical_model(args) -> int:
    from .decide import model_json
    from .statedesc import canonical_c2_model, canonical_model_for, sd_from_json, sd_to_json

    if args.file:
        data = _read_json(args.file)
        try:
            sd = sd_from_json(data["items"] if isinstance(data, dict) else data,
                              data["atoms"] if isinstance(data, dict) else _atoms(args))
        except (KeyError, ValueError) as exc:
            raise InputError(f"bad state description: {exc}") from exc
        m = canonical_model_for(sd, args.logic)
        _write_model(args, m)
        _emit(args, model_json(m), lambda: _model_text(m))
        return EXIT_OK
    cm = canonical_c2_model(_atoms(args), args.depth if args.depth is not None else 1)
    payload = {**model_json(cm.model), "descriptions": {w: sd_to_json(sd) for w, sd in cm.worlds.items()}}
    _write_model(args, cm.model)
    _emit(args, payload, lambda: f"{len(cm.worlds)} worlds")
    return EXIT_OK


def cmd_check_derivation(args) -> int:
    from .decide import check_derivation, derivation_from_json

    path = args.file or args.formula
    if not path:
        raise InputError("check-derivation needs a transcript file")
    try:
        d = derivation_from_json(_read_json(path))
    except (KeyError, ValueError, TypeError) as exc:
        raise InputError(f"bad derivation: {exc}") from exc
    rep = check_derivation(d, args.logic if args.logic_given else None)
    _emit(args, rep.to_json(), lambda: "ok" if rep.ok else f"rejected at step {rep.first_bad_step}: {rep.reason}")
    return EXIT_OK if rep.ok else EXIT_REFUTED


def _spec(args):
    from .prob import ProductSpec

    if not args.spec:
        raise InputError("--spec FILE is required")
    try:
        spec = ProductSpec.from_json(_read_json(args.spec))
    except (KeyError, ValueError, ZeroDivisionError) as exc:
        raise InputError(f"bad spec: {exc}") from exc
    return spec


def cmd_prob(args) -> int:
    from .prob import (ExactScopeError, ExplorationCapError, HorizonAbortError, ZeroDenominatorError,
                       conditional_prob, exact_details, mc_prob_seq, mc_prob_tree, stalnaker_report)

    spec = _spec(args)
    seed, samples = args.seed or 0, args.samples or 100_000
    try:
        if args.mode == "report":
            parts = args.operands
            if len(parts) not in (2, 3):
                raise InputError("prob report takes p q [r]")
            rep = stalnaker_report(*(_formula(x) for x in parts[:2]),
                                   _formula(parts[2]) if len(parts) == 3 else None, spec, samples, seed)
            _emit(args, rep, lambda: json.dumps(rep, indent=2))
            return EXIT_OK
        if len(args.operands) != 1:
            raise InputError(f"prob {args.mode} takes one formula")
        f = _formula(args.operands[0])
        if args.given:
            g = _formula(args.given)
            method = {"exact": "exact", "mc": "mc", "tree": "tree"}[args.mode]
            val = conditional_prob(f, g, spec.with_shape("tree") if method == "tree" else spec, method,
                                   samples, seed)
            if isinstance(val, Fraction):
                _emit(args, {"value": str(val), "float": float(val)}, str(val))
            else:
                _emit(args, val.to_json(), f"{val.value:.6f} ± {val.stderr:.6f}")
            return EXIT_OK
        if args.mode == "exact":
            res = exact_details(f, spec.with_shape("omega"))
            _emit(args, res.to_json(), str(res.value))
            return EXIT_OK
        est = (mc_prob_seq(f, spec, samples, seed) if args.mode == "mc"
               else mc_prob_tree(f, spec.with_shape("tree"), samples, seed))
        _emit(args, est.to_json(), f"{est.value:.6f} ± {est.stderr:.6f}")
        return EXIT_OK
    except ExactScopeError as exc:
        raise InputError(f"outside the exact engine: {exc}") from exc
    except ZeroDenominatorError as exc:
        raise InputError(str(exc)) from exc
    except (ExplorationCapError, HorizonAbortError) as exc:
        from .decide import BudgetExceeded

        raise BudgetExceeded(str(exc)) from exc


def cmd_convert(args) -> int:
    from .decide import KripkeModel, model_from_any, model_json
    from .order_model import (PointedModel, kripke_to_flat_order, model_from_json, order_to_selection,
                              selection_to_order)
    from .seq_model import Lasso, ProtoworldTable, minimal_representation, omega_padding

    if not args.file:
        raise InputError("convert needs --file")
    data = _read_json(args.file)
    try:
        if args.mode == "omega-pad":
            items = data["items"] if isinstance(data, dict) else data
            out = omega_padding([str(x) for x in items]).to_json()
        elif args.mode == "min-rep":
            lasso = Lasso.from_json(data["lasso"])
            table = ProtoworldTable.from_json(data.get("table", {}))
            lasso2, table2 = minimal_representation(lasso, table)
            out = {"lasso": lasso2.to_json(), "table": table2.to_json()}
        elif args.mode == "kripke-to-flat":
            m = model_from_any({**data, "kind": "kripke"})
            tie = data.get("tie_order") or list(m.worlds)
            fr = kripke_to_flat_order(m, tie)
            out = model_json(PointedModel(fr, m.valuation, m.designated))
        elif args.mode == "selection":
            if "selection" in data:
                table = {(frozenset(e["set"]), e["world"]): frozenset(e["value"]) for e in data["selection"]}
                fr = selection_to_order(table, data.get("worlds"))
                out = fr.to_json()
            else:
                fr = model_from_json(data).frame
                table = order_to_selection(fr)
                out = {"worlds": list(fr.worlds),
                       "selection": [{"set": sorted(s), "world": w, "value": sorted(v)}
                                     for (s, w), v in sorted(table.items(),
                                                             key=lambda kv: (len(kv[0][0]), sorted(kv[0][0]),
                                                                             kv[0][1]))]}
        else:
            raise InputError(f"unknown conversion {args.mode}")
    except (KeyError, ValueError, TypeError) as exc:
        raise InputError(f"conversion failed: {exc}") from exc
    print(json.dumps(out, indent=2, sort_keys=True, ensure_ascii=False))
    return EXIT_OK


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--logic", default=None, help="c2 | c2f | c2fs | c2fm | c2fsm (default c2)")
    common.add_argument("--bound", type=int, default=None, help="size bound (worlds or tails)")
    common.add_argument("--atoms", default=None, help="comma-separated atom names")
    common.add_argument("--depth", type=int, default=None, help="state description depth")
    common.add_argument("--seed", type=int, default=None, help="random seed")
    common.add_argument("--samples", type=int, default=None, help="Monte Carlo sample count")
    common.add_argument("--format", choices=("text", "json"), default="text")
    common.add_argument("--file", default=None, help="read the input from a file")
    common.add_argument("--deadline-ms", type=int, default=None, help="search deadline in milliseconds")

    p = _Parser(prog="condseq", description="Conditional logics C2 and its sequence extensions.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, fn, help_text, formula=True, **extra):
        sp = sub.add_parser(name, parents=[common], help=help_text, description=help_text)
        if formula:
            sp.add_argument("formula", nargs="?", help="formula text")
        sp.set_defaults(fn=fn)
        return sp

    add("parse", cmd_parse, "parse and print a formula")
    sp = add("eval", cmd_eval, "evaluate a formula in a model file (exit 1 when false)")
    sp.add_argument("--model", required=False)
    sp.add_argument("--world", default=None)
    sp = add("frame-info", cmd_frame_info, "frame properties of a model file", formula=False)
    sp.add_argument("--model", required=False)
    for name, fn, h in (("sat", cmd_sat, "bounded satisfiability"), ("valid", cmd_valid, "bounded validity"),
                        ("countermodel", cmd_countermodel, "search for a countermodel")):
        sp = add(name, fn, h)
        sp.add_argument("--out", default=None, help="write the model JSON here")
    sp = add("schema-test", cmd_schema_test, "test a named schema on a frame class", formula=False)
    sp.add_argument("name")
    sp.add_argument("--class", dest="frame_class", default=None,
                    help="order | flat | flat_ancestral | a logic name (default: --logic)")
    sp.add_argument("--out", default=None)
    add("statedesc", cmd_statedesc, "list state descriptions, or check a list given with --file", formula=False)
    add("makeseq", cmd_makeseq, "build the sequence for a description list (--file)", formula=False)
    sp = add("canonical-model", cmd_canonical_model,
             "canonical C2 model for --atoms/--depth, or the sequence model of a description (--file)",
             formula=False)
    sp.add_argument("--out", default=None)
    add("check-derivation", cmd_check_derivation, "check a derivation transcript (path or --file)")
    sp = add("prob", cmd_prob, "probabilities under a product measure", formula=False)
    sp.add_argument("mode", choices=("exact", "mc", "tree", "report"))
    sp.add_argument("operands", nargs="+", help="formula, or p q [r] for report")
    sp.add_argument("--spec", default=None, help="measure spec JSON")
    sp.add_argument("--given", default=None, help="condition on this formula")
    sp = add("convert", cmd_convert, "format conversions", formula=False)
    sp.add_argument("mode", choices=("omega-pad", "min-rep", "kripke-to-flat", "selection"))
    return p


def main(argv: list[str] | None = None) -> int:
    from .classes import parse_logic
    from .decide import BudgetExceeded

    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        args.logic_given = args.logic is not None
        try:
            args.logic = parse_logic(args.logic or "c2")
        except (KeyError, ValueError) as exc:
            raise InputError(f"unknown logic {args.logic!r}") from exc
        return args.fn(args)
    except InputError as exc:
        print(json.dumps({"error": str(exc), "kind": "input"}), file=sys.stderr)
        return EXIT_INPUT
    except BudgetExceeded as exc:
        print(json.dumps({"error": str(exc), "kind": "budget"}), file=sys.stderr)
        return EXIT_BUDGET


if __name__ == "__main__":
    raise SystemExit(main())
