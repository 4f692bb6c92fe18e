"""Command-line entry point.

Every command writes one JSON document to stdout; ``--pretty`` adds row art
on stderr.  Exit codes: 0 success, 1 failed bound check, 2 usage error,
3 capacity error.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import faultlab as FL
from . import layer1 as L1
from . import layer2 as L2
from . import layer34 as K
from . import solver
from .core import CapacityError, TileRuleSet, TilingError, compile_squares_to_pairs, load_json
from .tm import TuringMachine, tm_to_rule_set


class UsageError(Exception):
    pass


def _emit(doc) -> None:
    sys.stdout.write(json.dumps(doc, ensure_ascii=False, sort_keys=True) + "\n")


def _art(args, lines) -> None:
    if getattr(args, "pretty", False):
        for line in lines:
            sys.stderr.write(line + "\n")


def _write(path, doc) -> None:
    Path(path).write_text(json.dumps(doc, ensure_ascii=False, sort_keys=True, indent=1) + "\n", encoding="utf-8")


def _problem(name: str) -> K.OracleProblem:
    toys = {p.name: p for p in K.toy_problems()}
    if name in toys:
        return toys[name]
    if Path(name).exists():
        return K.OracleProblem.load(name)
    raise UsageError(f"--problem must be a file or one of {sorted(toys)}")


def _bits(s: str, name: str) -> str:
    if any(c not in "01" for c in s):
        raise UsageError(f"{name} must be a bit string")
    return s


# ---------------------------------------------------------------------------
# commands


def cmd_compile_tm(args) -> int:
    tm = TuringMachine.load(args.tm)
    rules = tm_to_rule_set(tm, require_normalized=not args.allow_unnormalized)
    doc = rules.to_json()
    if args.out:
        _write(args.out, doc)
        _emit({"tiles": rules.d, "illegal_squares": len(rules.squares), "out": args.out})
    else:
        _emit(doc)
    return 0


def cmd_compile_squares(args) -> int:
    rules = TileRuleSet.from_json(load_json(args.rules))
    out = compile_squares_to_pairs(rules, args.height, args.width)
    compiled = out if isinstance(out, TileRuleSet) else out.rules
    doc = compiled.to_json()
    if args.out:
        _write(args.out, doc)
        _emit({"tiles": compiled.d, "penalty": getattr(out, "penalty", None), "out": args.out})
    else:
        _emit(doc)
    return 0


def _sim_layer1(args) -> dict:
    tiling = L1.simulate_layer1(args.n)
    final = tiling.row(args.n - 2)
    doc = {"layer": 1, "n": args.n, "mu": L1.mu(args.n), "sizes": L1.sizes(final),
           "end_rows": L1.end_row_indices(tiling)}
    if args.dump_final:
        doc["final_row"] = L1.row_text(final)
    if args.dump_all:
        doc["rows"] = tiling.text_rows()
    _art(args, tiling.text_rows()[::-1])
    return doc


def _sim_layer2(args) -> dict:
    run = L2.layer2_from_layer1(args.n)
    doc = {"layer": 2, "n": args.n, "census": run.census}
    if args.dump_final:
        doc["final_row"] = L2.row_text(run.last_row())
    if args.dump_all:
        doc["rows"] = [L2.row_text(r) for r in run.rows_top_down()]
    _art(args, [L2.row_text(r) for r in run.rows_top_down()])
    return doc


def _sim_layer3(args) -> dict:
    run = L2.layer2_from_layer1(args.n)
    if args.variant == "gwt":
        layer3 = K.gwt_layer3_rules()
        first = K.gwt_translate(run.last_row())
        strips = []
        for a, b in L2.strip_spans(first):
            hist, cost = layer3.run_strip(first[a + 1:b], args.n - 3)
            strips.append({"start": a, "final": L2.row_text(hist[-1]), "rejections": cost})
        return {"layer": 3, "variant": "gwt", "n": args.n, "strips": strips,
                "rejections": sum(s["rejections"] for s in strips)}
    longs = [s for s in run.strips if s.form == "long"]
    z = args.z or ""
    ys = [K.encode_y(s.tape(), (z + "0" * len(s.tape()))[: len(s.tape())]) for s in longs]
    if len(ys) < 2:
        return {"layer": 3, "variant": "fwt", "n": args.n, "long_strips": len(ys), "verification_cost": 0}
    res = K.run_consensus(K.consensus_tape(ys))
    return {"layer": 3, "variant": "fwt", "n": args.n, "long_strips": len(ys), "ys": ys,
            "verification_cost": res.cost, "events": res.events, "steps": res.steps}


def _sim_layer4(args) -> dict:
    problem = _problem(args.problem)
    x = _bits(args.x or "", "--x")
    z = _bits(args.z if args.z is not None else problem.correct_z(x), "--z")
    tiling = L1.simulate_layer1(args.n)
    sizes = [s for s in L1.sizes(tiling.row(args.n - 2)) if s >= 2]
    mu = L1.mu(args.n)
    roles = [str(K.interval_role(s, mu, x, z, problem)) for s in sizes]
    return {"layer": 4, "n": args.n, "mu": mu, "x": x, "z": z, "sizes": sizes, "roles": roles,
            "fwt_total": K.fwt_total(problem, x, z, sizes, mu),
            "pwt_total": K.pwt_total(problem, x, z, sizes, mu)}


def cmd_simulate(args) -> int:
    if args.n < 5:
        raise UsageError("--n must be at least 5")
    doc = {1: _sim_layer1, 2: _sim_layer2, 3: _sim_layer3, 4: _sim_layer4}[args.layer](args)
    _emit(doc)
    return 0


def cmd_reduce(args) -> int:
    _emit(L2.reduce_input(_bits(args.x, "--x")))
    return 0


def cmd_mu(args) -> int:
    if args.n < 5:
        raise UsageError("--n must be at least 5")
    _emit(L1.mu(args.n))
    return 0


def cmd_solve(args) -> int:
    rules = TileRuleSet.from_json(load_json(args.rules))
    budget = args.budget if args.budget is not None else solver.budget_from_env()
    fn = solver.solve_exhaustive if args.exhaustive else solver.solve_dp
    res = fn(rules, args.height, args.width, budget=budget)
    doc = res.to_json(rules)
    if args.witness and res.witness is not None:
        _write(args.witness, doc["witness"])
    _emit(doc)
    if res.witness is not None:
        _art(args, [" ".join(rules.name(c) for c in row) for row in reversed(res.witness.cells)])
    return 0


def cmd_audit(args) -> int:
    if args.tiling:
        doc = load_json(args.tiling)
        rows = [L1.parse_row(r) for r in doc["rows"]]
        tiling = L1.Layer1Tiling(len(rows) + 2, rows)
        report = FL.audit(tiling)
    else:
        report = FL.audit(FL.base_analysis(args.n).tiling)
    _emit(report.to_json())
    return 0 if report.passed else 1


def cmd_inject(args) -> int:
    base = FL.base_analysis(args.n)
    plan = FL.FaultPlan(seed=args.seed, count=args.count, placement=args.placement, row=args.row)
    tiling = FL.inject(base.tiling, plan)
    report = FL.audit(tiling, base=base, seed=args.seed)
    doc = report.to_json()
    doc["plan"] = {"seed": plan.seed, "count": plan.count, "placement": plan.placement}
    if args.out:
        _write(args.out, {"n": args.n, "rows": [L1.row_text(r) for r in tiling.rows]})
    _emit(doc)
    return 0 if report.passed else 1


def cmd_verify_lemmas(args) -> int:
    results = []
    ok = True
    for n in args.n_list:
        tiling = L1.simulate_layer1(n)
        sizes = L1.sizes(tiling.row(n - 2))
        checks = {
            "mu": len(sizes) == L1.mu(n),
            "mu_lower": L1.mu(n) >= n ** 0.25 / 2,
            "sizes_nonincreasing": all(a >= b for a, b in zip(sizes, sizes[1:])),
            "fault_free_audit": FL.audit(FL.base_analysis(n).tiling).passed,
        }
        failed_seeds = [s for s, rep in FL.campaign(n, range(args.seeds)) if not rep.passed]
        checks["injected_audits"] = not failed_seeds
        ok &= all(checks.values())
        results.append({"n": n, "checks": checks, "failed_seeds": failed_seeds})
    _emit({"passed": ok, "results": results})
    return 0 if ok else 1


def cmd_krentel(args) -> int:
    problem = _problem(args.problem)
    x, z = _bits(args.x, "--x"), _bits(args.z, "--z")
    if len(z) < problem.nbar:
        raise UsageError(f"--z needs at least {problem.nbar} bits")
    c, target = K.krentel_cost(problem, x, z)
    _emit({"problem": problem.name, "x": x, "z": z, "C": c, "target": target})
    return 0


# ---------------------------------------------------------------------------


def _n_list(text: str) -> list[int]:
    try:
        return [int(t) for t in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError("expected a list of integers") from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="wtile", description=__doc__.splitlines()[0])
    p.add_argument("--pretty", action="store_true", help="row art on stderr")
    p.add_argument("--threads", type=int, default=None, help="accepted for compatibility; runs single-threaded")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("compile-tm", help="Turing machine file to tile rules")
    s.add_argument("--tm", required=True)
    s.add_argument("--out")
    s.add_argument("--allow-unnormalized", action="store_true")
    s.set_defaults(fn=cmd_compile_tm)

    s = sub.add_parser("compile-squares", help="square rules to pair rules")
    s.add_argument("--rules", required=True)
    s.add_argument("--height", type=int, default=3)
    s.add_argument("--width", type=int, default=3)
    s.add_argument("--out")
    s.set_defaults(fn=cmd_compile_squares)

    s = sub.add_parser("simulate", help="fault-free layer simulation")
    s.add_argument("--layer", type=int, choices=(1, 2, 3, 4), required=True)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--dump-final", action="store_true")
    s.add_argument("--dump-all", action="store_true")
    s.add_argument("--variant", choices=("gwt", "fwt"), default="gwt")
    s.add_argument("--problem", default="echo")
    s.add_argument("--x")
    s.add_argument("--z")
    s.set_defaults(fn=cmd_simulate)

    s = sub.add_parser("reduce", help="grid size for input x")
    s.add_argument("--x", required=True)
    s.set_defaults(fn=cmd_reduce)

    s = sub.add_parser("mu", help="interval count of the final Layer 1 row")
    s.add_argument("--n", type=int, required=True)
    s.set_defaults(fn=cmd_mu)

    s = sub.add_parser("solve", help="exact minimum-cost tiling")
    s.add_argument("--rules", required=True)
    s.add_argument("--height", type=int, required=True)
    s.add_argument("--width", type=int, required=True)
    s.add_argument("--witness")
    s.add_argument("--budget", type=int)
    s.add_argument("--exhaustive", action="store_true")
    s.set_defaults(fn=cmd_solve)

    s = sub.add_parser("audit", help="audit a Layer 1 tiling")
    g = s.add_mutually_exclusive_group(required=True)
    g.add_argument("--n", type=int)
    g.add_argument("--tiling")
    s.set_defaults(fn=cmd_audit)

    s = sub.add_parser("inject", help="inject faults and audit")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--count", type=int, default=1)
    s.add_argument("--placement", choices=(FL.UNIFORM, FL.ROW, FL.INTERVAL), default=FL.UNIFORM)
    s.add_argument("--row", type=int)
    s.add_argument("--out")
    s.set_defaults(fn=cmd_inject)

    s = sub.add_parser("verify-lemmas", help="run the invariant suite")
    s.add_argument("--n-list", type=_n_list, required=True)
    s.add_argument("--seeds", type=int, default=20)
    s.set_defaults(fn=cmd_verify_lemmas)

    s = sub.add_parser("krentel", help="C(x, z) and the ideal minimum total")
    s.add_argument("--problem", required=True)
    s.add_argument("--x", required=True)
    s.add_argument("--z", required=True)
    s.set_defaults(fn=cmd_krentel)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except CapacityError as e:
        sys.stderr.write(f"capacity error: {e}\n")
        return 3
    except (UsageError, TilingError, ValueError, FileNotFoundError) as e:
        sys.stderr.write(f"error: {e}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
