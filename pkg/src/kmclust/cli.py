"""Command-line harness: gen, run, bench, verify."""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .graph import (as_fraction, gen_lower_bound_instance, gen_random_instance,
                    random_partition, sample_lower_bound_bits)
from .instance_io import read_instance, write_instance
from .runtime import Runtime

REPORT_SCHEMA_VERSION = 1
BENCH_COLUMNS = ("n", "k", "rounds", "charged_rounds", "cost", "seed")


class CliError(Exception):
    pass


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def sparse_density(n: int) -> float:
    return min(1.0, 2 * math.log(n) / n) if n > 1 else 1.0


# ---------------------------------------------------------------- gen

def cmd_gen(args) -> int:
    if args.kind == "random":
        density = args.density if args.density is not None else sparse_density(args.n)
        graph, costs = gen_random_instance(args.n, density, seed=args.seed)
    else:
        if args.X is not None and args.Y is not None:
            X, Y = _bits(args.X), _bits(args.Y)
        else:
            X, Y = sample_lower_bound_bits(args.b, args.seed)
        inst = gen_lower_bound_instance(args.b, args.c, X, Y)
        inst.validate()
        graph, costs = inst.graph, inst.costs
    paths = write_instance(args.out, graph, costs, fmt="json" if args.format == "json" else "text")
    sys.stdout.write("".join(f"{p}\n" for p in paths))
    return 0


def _bits(text: str) -> tuple[int, ...]:
    return tuple(int(ch) for ch in text.replace(",", "").strip())


# ---------------------------------------------------------------- run

def run_problem(problem: str, graph, costs, k: int, eps, beta, p, seed: int, mode: str) -> dict:
    from .facility_location import mettu_plaxton_beta
    from .pcenter import solve_pcenter
    from .pmedian import PMEDIAN_BETA, solve_pmedian

    rt = Runtime(graph, random_partition(graph.n, k, seed), mode)
    params = {"k": k, "eps": str(as_fraction(eps)), "seed": seed, "sssp_mode": mode}
    report = {"schema_version": REPORT_SCHEMA_VERSION, "tool_version": __version__,
              "instance_digest": graph.digest(), "problem": problem, "params": params}
    if problem == "facloc":
        if costs is None:
            raise CliError("facloc needs opening costs")
        beta = Fraction(1) if beta is None else as_fraction(beta)
        params["beta"] = str(beta)
        run = mettu_plaxton_beta(rt, costs, beta, as_fraction(eps), seed)
        report["solution"] = run.solution.to_json()
        report["cost"] = str(run.solution.cost)
        report["radii"] = run.radii.to_json()
    elif problem == "pmedian":
        if p is None:
            raise CliError("pmedian needs --p")
        beta = PMEDIAN_BETA if beta is None else as_fraction(beta)
        params.update(beta=str(beta), p=p)
        sol = solve_pmedian(rt, p, as_fraction(eps), seed, beta=beta)
        report["solution"] = sol.to_json()
        report["cost"] = str(sol.cost)
    elif problem == "pcenter":
        if p is None:
            raise CliError("pcenter needs --p")
        params["p"] = p
        sol = solve_pcenter(rt, p, as_fraction(eps), seed)
        report["solution"] = sol.to_json()
        report["cost"] = str(sol.radius)
    else:
        raise CliError(f"unknown problem {problem!r}")
    report["ledger"] = rt.ledger.to_json()
    return report


def cmd_run(args) -> int:
    graph, costs = read_instance(args.instance, args.costs)
    if not graph.is_connected():
        raise CliError("instance graph is disconnected")
    try:
        report = run_problem(args.problem, graph, costs, args.k, args.eps, args.beta, args.p, args.seed,
                             args.sssp_mode)
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    _emit(_dump(report), args.out)
    return 0


# ---------------------------------------------------------------- bench

def bench_rows(ns, ks, seed: int, eps, mode: str = "charged", density=None) -> list[dict]:
    rows = []
    for n in ns:
        graph, costs = gen_random_instance(n, density if density is not None else sparse_density(n), seed=seed)
        for k in ks:
            rep = run_problem("facloc", graph, costs, k, eps, None, None, seed, mode)
            led = rep["ledger"]
            rows.append({"n": n, "k": k, "rounds": led["rounds"], "charged_rounds": led["charged_rounds"],
                         "cost": rep["cost"], "seed": seed})
    return rows


def format_rows(rows: list[dict], fmt: str) -> str:
    if fmt == "json":
        return _dump(rows)
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=BENCH_COLUMNS, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()


def cmd_bench(args) -> int:
    rows = bench_rows(args.n, args.k, args.seed, args.eps, args.sssp_mode, args.density)
    _emit(format_rows(rows, args.format), args.out)
    return 0


# ---------------------------------------------------------------- verify

def verify_report(report: dict, graph, costs, slack_power: int = 10, info: dict | None = None) -> list[str]:
    """All violated checks for a run report (empty list = pass). Never mutates the report.

    When ``info`` is given it receives the brute-force optimum and the
    achieved ratio on instances small enough to enumerate.
    """
    info = {} if info is None else info
    from .facility_location import FacilitySolution, RadiusTable, dual_certificate, verify_certificate
    from .oracles import MetricOracle, OracleCapError, brute_force, exact_radii
    from .powers import EpsPowers

    problems: list[str] = []
    if report.get("instance_digest") != graph.digest():
        return ["instance digest does not match the report"]
    params = report["params"]
    eps = Fraction(params["eps"])
    pw = EpsPowers(eps)
    sol = report["solution"]
    oracle = MetricOracle(graph)
    centers = sol["S"] if "S" in sol else sol["C"]
    center_set = set(centers)
    assignment = {a["client"]: a["facility"] for a in sol["assignment"]}

    # coverage: each client sits at a center within (1+ε) of its nearest one
    for j in range(graph.n):
        if j in center_set:
            continue
        if j not in assignment:
            problems.append(f"client {j} unassigned")
            continue
        f = assignment[j]
        if f not in center_set:
            problems.append(f"client {j} assigned to closed vertex {f}")
            continue
        best = min(oracle.d(j, s) for s in center_set)
        if oracle.d(j, f) > pw.base * best:
            problems.append(f"coverage: client {j} at distance {oracle.d(j, f)} > (1+eps)*{best}")
    hosts = random_partition(graph.n, params["k"], params["seed"]).host
    for a in sol["assignment"]:
        if int(hosts[a["facility"]]) != a["facility_host"]:
            problems.append(f"client {a['client']}: wrong host id for facility {a['facility']}")

    problem = report["problem"]
    if problem == "facloc":
        beta = Fraction(params["beta"])
        radii = RadiusTable(Fraction(report["radii"]["eps"]), np.array(report["radii"]["exponent"], dtype=np.int64),
                            np.array(report["radii"]["zero"], dtype=bool))
        exact = exact_radii(graph, costs, beta, oracle)
        band = pw.pow(3)
        for v in range(graph.n):
            r = radii.radius(v)
            if not (exact[v] / band <= r <= exact[v] * band):
                problems.append(f"radius sandwich: vertex {v} r~={r} exact={exact[v]}")
        opened = sorted(center_set)
        for x in range(len(opened)):
            for y in range(x + 1, len(opened)):
                u, v = opened[x], opened[y]
                if oracle.d(u, v) < 2 * max(radii.radius(u), radii.radius(v)) / pw.pow(3):
                    problems.append(f"separation: open facilities {u}, {v} too close")
        F = sum((costs[i] for i in opened), Fraction(0))
        C = sum((oracle.d(j, f) for j, f in assignment.items()), Fraction(0))
        if Fraction(sol["F"]) != F or Fraction(sol["C"]) != C:
            problems.append("reported F/C differ from the recomputed costs")
        fs = FacilitySolution(tuple(opened), {j: (f, int(hosts[f])) for j, f in assignment.items()}, {}, F, C)
        cert = dual_certificate(oracle, radii, costs, beta, opened)
        rep = verify_certificate(fs, cert, oracle, costs, slack_power)
        if not rep.per_client_ok:
            problems.append(f"certificate: per-client violations at {rep.violators}")
        if not rep.aggregate_ok:
            problems.append("certificate: aggregate inequality fails")
        if not rep.dual_constraints_ok:
            problems.append("certificate: dual constraints fail")
        try:
            opt, _ = brute_force("facloc", graph, costs, oracle=oracle)
            info.update(opt=str(opt), ratio=float((F + C) / opt) if opt else None)
            if F + C > 3 * pw.pow(slack_power) * opt:
                problems.append(f"ratio: cost {F + C} exceeds 3(1+eps)^{slack_power} * OPT {opt}")
        except OracleCapError:
            pass
    elif problem == "pmedian":
        p = params["p"]
        if len(center_set) != p:
            problems.append(f"cardinality: {len(center_set)} centers, expected {p}")
        try:
            opt, _ = brute_force("pmedian", graph, p=p, oracle=oracle)
            cost = sum((oracle.d(j, f) for j, f in assignment.items()), Fraction(0))
            # the guarantee holds in expectation, so a single run is only reported
            info.update(opt=str(opt), ratio=float(cost / opt) if opt else None)
        except OracleCapError:
            pass
    elif problem == "pcenter":
        p = params["p"]
        if len(center_set) > p:
            problems.append(f"cardinality: {len(center_set)} centers exceed p={p}")
        radius = max((oracle.d(j, f) for j, f in assignment.items()), default=Fraction(0))
        if Fraction(sol["radius"]) != radius:
            problems.append("reported radius differs from the recomputed one")
        d = Fraction(sol["d_probe"])
        if radius > 2 * pw.base * d * pw.pow(3):
            problems.append("MIS coverage exceeds 2(1+eps)^4 * d_probe")
        try:
            opt, _ = brute_force("pcenter", graph, p=p, oracle=oracle)
            info.update(opt=str(opt), ratio=float(radius / opt) if opt else None)
            if radius > 2 * pw.pow(4) * opt:
                problems.append(f"ratio: radius {radius} exceeds 2(1+eps)^4 * OPT {opt}")
        except OracleCapError:
            pass
    return problems


def cmd_verify(args) -> int:
    report = json.loads(Path(args.report).read_text())
    graph, costs = read_instance(args.instance, args.costs)
    info: dict = {}
    problems = verify_report(report, graph, costs, info=info)
    _emit(_dump({"ok": not problems, "violations": problems, "info": info}), None)
    return 1 if problems else 0


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="kmclust", description=__doc__)
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate an instance")
    gsub = gen.add_subparsers(dest="kind", required=True)
    g_rand = gsub.add_parser("random", help="connected random graph with integer weights and costs")
    g_rand.add_argument("--n", type=int, required=True)
    g_rand.add_argument("--density", type=float, default=None, help="edge probability (default 2 ln n / n)")
    g_rand.add_argument("--seed", type=int, default=0)
    g_lb = gsub.add_parser("lowerbound", help="two-hub gadget family with L = n^c")
    g_lb.add_argument("--b", type=int, required=True)
    g_lb.add_argument("--c", type=int, default=3)
    g_lb.add_argument("--X", default=None, help="bit string, e.g. 1011")
    g_lb.add_argument("--Y", default=None)
    g_lb.add_argument("--seed", type=int, default=0, help="samples X, Y when they are not given")
    for g in (g_rand, g_lb):
        g.add_argument("--out", required=True, help="output path prefix")
        g.add_argument("--format", choices=("text", "json"), default="text")
    gen.set_defaults(func=cmd_gen)

    run = sub.add_parser("run", help="solve an instance and print a JSON report")
    run.add_argument("problem", choices=("facloc", "pmedian", "pcenter"))
    run.add_argument("--instance", required=True)
    run.add_argument("--costs", default=None)
    _common(run)
    run.add_argument("--beta", default=None)
    run.add_argument("--p", type=int, default=None)
    run.add_argument("--out", default=None)
    run.set_defaults(func=cmd_run)

    bench = sub.add_parser("bench", help="facility-location sweep over n and k")
    bench.add_argument("--n", type=int, nargs="+", required=True)
    bench.add_argument("--k", type=int, nargs="+", default=[8])
    bench.add_argument("--density", type=float, default=None)
    bench.add_argument("--eps", default="1")
    bench.add_argument("--seed", type=int, default=0)
    bench.add_argument("--sssp-mode", choices=Runtime.MODES, default="charged")
    bench.add_argument("--format", choices=("csv", "json"), default="csv")
    bench.add_argument("--out", default=None)
    bench.set_defaults(func=cmd_bench)

    ver = sub.add_parser("verify", help="re-check a run report against exact oracles")
    ver.add_argument("--report", required=True)
    ver.add_argument("--instance", required=True)
    ver.add_argument("--costs", default=None)
    ver.set_defaults(func=cmd_verify)
    return ap


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--k", type=int, default=4)
    p.add_argument("--eps", default="0.25")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sssp-mode", choices=Runtime.MODES, default="charged")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        sys.stderr.write(_dump({"error": str(exc)}))
        return 2


if __name__ == "__main__":
    sys.exit(main())
