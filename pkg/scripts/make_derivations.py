"""Regenerate the bundled derivation transcripts and check each one.

Usage: python3 scripts/make_derivations.py [OUTDIR]
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

from condseq.decide import check_derivation, derivation_from_json
from condseq.formula import parse, to_text

OUT = Path(__file__).resolve().parent.parent / "src" / "condseq" / "data" / "derivations"


class Builder:
    def __init__(self, name: str, logic: str, goal: str, extra_axioms=()):
        self.data = {"name": name, "logic": logic, "extra_axioms": list(extra_axioms),
                     "goal": to_text(parse(goal)), "steps": []}

    def _add(self, formula: str, **just) -> int:
        self.data["steps"].append({"formula": to_text(parse(formula)), **just})
        return len(self.data["steps"])

    def pc(self, f: str) -> int:
        return self._add(f, by="pc")

    def axiom(self, name: str, binding: dict, f: str) -> int:
        return self._add(f, by="axiom", schema=name, binding=binding)

    def normality(self, prem: int, f: str) -> int:
        return self._add(f, by="normality", **{"from": [prem]})

    def rule(self, name: str, binding: dict, prem: int, f: str) -> int:
        return self._add(f, by="rule_form", schema=name, binding=binding, **{"from": [prem]})

    def text(self, n: int) -> str:
        return self.data["steps"][n - 1]["formula"]

    def combine(self, prems: list[int], goal: str) -> int:
        """A tautology chaining the premises into the goal, then one detachment per premise."""
        body = f"({goal})"
        for n in reversed(prems):
            body = f"(({self.text(n)}) -> {body})"
        cur = self.pc(body)
        for n in prems:
            rest = self.text(cur)
            f = parse(rest).args[1]
            cur = self._add(to_text(f), by="detachment", **{"from": [n, cur]})
        return cur

    def mod(self, a: str, q: str) -> int:
        """[]a -> (q > a)."""
        a, q = f"({a})", f"({q})"
        n1 = self.pc(f"({a} & ~{a}) -> {q}")
        n2 = self.normality(n1, f"((~{a} > {a}) & (~{a} > ~{a})) -> (~{a} > {q})")
        n3 = self.axiom("Identity", {"p": f"~{a}"}, f"~{a} > ~{a}")
        n4 = self.axiom("Reciprocity", {"p": f"~{a}", "q": q, "r": a},
                        f"((~{a} > {q}) & ({q} > ~{a}) & (~{a} > {a})) -> ({q} > {a})")
        n5 = self.axiom("CEM", {"p": q, "q": a}, f"({q} > {a}) | ({q} > ~{a})")
        return self.combine([n3, n2, n4, n5], f"[]{a} -> ({q} > {a})")

    def box_mono(self, imp_step: int, a: str, b: str) -> int:
        """From a step proving a -> b, derive []a -> []b."""
        a, b = f"({a})", f"({b})"
        m = self.mod(a, f"~{b}")
        aa = self.combine([imp_step], f"({a} & {a}) -> {b}")
        nb = self.normality(aa, f"((~{b} > {a}) & (~{b} > {a})) -> (~{b} > {b})")
        return self.combine([m, nb], f"[]{a} -> []{b}")

    def possibility_lemma(self, p: str, c: str) -> int:
        """(<>p & (p > c)) -> <>(p & c)."""
        s = f"({p} & {c})"
        m = self.mod(f"~{s}", p)
        i = self.axiom("Identity", {"p": p}, f"{p} > {p}")
        t1 = self.pc(f"({p} & {c}) -> {s}")
        n1 = self.normality(t1, f"(({p} > {p}) & ({p} > {c})) -> ({p} > {s})")
        t2 = self.pc(f"({s} & ~{s}) -> ~{p}")
        n2 = self.normality(t2, f"(({p} > {s}) & ({p} > ~{s})) -> ({p} > ~{p})")
        return self.combine([m, i, n1, n2], f"(<>{p} & ({p} > {c})) -> <>{s}")


def mod() -> Builder:
    b = Builder("MOD", "c2", "[]p -> (q > p)")
    b.mod("p", "q")
    return b


def four() -> Builder:
    b = Builder("4 from Crashing Cautious Exportation", "c2", "[]p -> [][]p",
                ["Crashing Cautious Exportation"])
    n1 = b.axiom("MP", {"p": "~p", "q": "p"}, "(~p > p) -> (~p -> p)")
    n2 = b.combine([n1], "~p -> ~[]p")
    n3 = b.rule("Crashing Cautious Exportation", {"p": "~[]p", "q": "~p"}, n2, "~<>~p -> (~[]p > ~<>~p)")
    b.combine([n3], "[]p -> [][]p")
    return b


def h_axiom() -> Builder:
    X, R = "(p | q)", "(<>p & <>q)"
    b = Builder("H", "c2", "(<>p & <>q) -> (<>(p & <>q) | <>(q & <>p))", ["Crashing Cautious Importation"])
    d = {}
    for v in ("p", "q"):
        t = b.pc(f"{v} -> {X}")
        r = b.rule("Crashing Cautious Importation", {"p": X, "q": v}, t, f"({X} > ~<>{v}) -> ~<>{v}")
        c = b.axiom("CEM", {"p": X, "q": f"<>{v}"}, f"({X} > <>{v}) | ({X} > ~<>{v})")
        d[v] = b.combine([r, c], f"<>{v} -> ({X} > <>{v})")
    t3 = b.pc(f"{R} -> {R}")
    n3 = b.normality(t3, f"(({X} > <>p) & ({X} > <>q)) -> ({X} > {R})")
    e1 = b.combine([d["p"], d["q"], n3], f"{R} -> ({X} > {R})")
    i1 = b.axiom("Identity", {"p": X}, f"{X} > {X}")
    t4 = b.pc(f"({X} & ~p) -> q")
    n4 = b.normality(t4, f"(({X} > {X}) & ({X} > ~p)) -> ({X} > q)")
    back = []
    for v in ("q", "p"):
        t = b.pc(f"({v} & {v}) -> {X}")
        i = b.axiom("Identity", {"p": v}, f"{v} > {v}")
        n = b.normality(t, f"(({v} > {v}) & ({v} > {v})) -> ({v} > {X})")
        back += [i, n]
    rc1 = b.axiom("Reciprocity", {"p": X, "q": "q", "r": R}, f"(({X} > q) & (q > {X}) & ({X} > {R})) -> (q > {R})")
    rc2 = b.axiom("Reciprocity", {"p": X, "q": "p", "r": R}, f"(({X} > p) & (p > {X}) & ({X} > {R})) -> (p > {R})")
    c3 = b.axiom("CEM", {"p": X, "q": "p"}, f"({X} > p) | ({X} > ~p)")
    e2 = b.combine([i1, n4, *back, rc1, rc2, c3], f"({X} > {R}) -> ((p > {R}) | (q > {R}))")
    t7 = b.pc(f"({R} & {R}) -> <>q")
    n7 = b.normality(t7, f"((p > {R}) & (p > {R})) -> (p > <>q)")
    t8 = b.pc(f"({R} & {R}) -> <>p")
    n8 = b.normality(t8, f"((q > {R}) & (q > {R})) -> (q > <>p)")
    l1 = b.possibility_lemma("p", "<>q")
    l2 = b.possibility_lemma("q", "<>p")
    b.combine([e1, e2, n7, n8, l1, l2], "(<>p & <>q) -> (<>(p & <>q) | <>(q & <>p))")
    return b


def restricted_from_sequentiality() -> Builder:
    goal = "([](p -> (~p > q)) & [](q -> (~q > p))) -> ((p | q) -> [](p | q))"
    b = Builder("Restricted Sequentiality from Sequentiality", "c2fs", goal)
    X = "(p | q)"
    seq = b.axiom("Sequentiality", {"p": "p", "q": "q", "r": X},
                  f"([](p -> (~p > {X})) & [](q -> (~q > {X}))) -> ({X} -> (~{X} > {X}))")
    monos = []
    for v, w in (("p", "q"), ("q", "p")):
        a, c = f"({v} -> (~{v} > {w}))", f"({v} -> (~{v} > {X}))"
        t = b.pc(f"({w} & {w}) -> {X}")
        n = b.normality(t, f"((~{v} > {w}) & (~{v} > {w})) -> (~{v} > {X})")
        ab = b.combine([n], f"{a} -> {c}")
        monos.append(b.box_mono(ab, a, c))
    b.combine([seq, *monos], goal)
    return b


BUILDERS = {"mod": mod, "four": four, "h": h_axiom, "restricted_sequentiality": restricted_from_sequentiality}


def main(argv: list[str]) -> int:
    out = Path(argv[1]) if len(argv) > 1 else OUT
    out.mkdir(parents=True, exist_ok=True)
    status = 0
    for stem, make in BUILDERS.items():
        data = make().data
        rep = check_derivation(derivation_from_json(data))
        print(f"{stem}: {len(data['steps'])} steps, {'ok' if rep.ok else rep.to_json()}")
        status |= not rep.ok
        (out / f"{stem}.json").write_text(json.dumps(data, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
    return status


if __name__ == "__main__":
    raise SystemExit(main(sys.argv))
