"""``fairtime`` command line: generate instances, solve them, run the verify suites.

Exit codes: 0 success, 1 a check or re-verified guarantee failed, 2 bad
input, 3 a guard refused the request (search space, rounding gate,
unsupported combination).
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
import time
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from .aggregation import AggregationError, Average, LinearCombo, Minimum, format_aggregator, parse_aggregator
from .colgen import ColgenError, run_colgen
from .exact import SearchSpaceError, evaluate_counts, solve_descriptive, solve_pe
from .instance import InstanceError, alpha_filter, gen_ambulance, gen_random, gen_tsp_pickup, load_instance, save_instance
from .relaxation import (
    RelaxationError,
    RoundingGateError,
    check_perfect_fairness,
    epsilon_schedule,
    rationalize,
    solve_relaxation,
)
from .unfairness import Gap, UnfairnessError, format_unfairness, parse_unfairness
from .verify import SUITES, CaseRow, rows_to_csv, run_suite

log = logging.getLogger("fairtime")

EXIT_OK, EXIT_FAIL, EXIT_INPUT, EXIT_GUARD = 0, 1, 2, 3
LOG_LEVELS = {"quiet": logging.WARNING, "info": logging.INFO, "debug": logging.DEBUG}
GUARANTEE_TOL = 1e-9


class GuardRefusal(Exception):
    pass


class ReportError(Exception):
    """A reported guarantee did not survive re-verification."""


@dataclass
class RunReport:
    instance: dict
    method: str
    aggregator: str
    unfairness: str
    objective: float
    T: int | None = None
    counts: list | None = None
    probs: list | None = None
    fractions: list | None = None
    phi_hat: float | None = None
    phi_T: float | None = None
    L: float | None = None
    guarantee: str | None = None
    extra: dict = field(default_factory=dict)
    wall_ms: float | None = None

    def csv_row(self) -> CaseRow:
        ok = self.extra.get("bound_ok", True)
        return CaseRow(self.instance["path"], self.method, self.T, self.objective, self.phi_hat, self.L, ok,
                       self.wall_ms)


# -- generate -----------------------------------------------------------------------

def cmd_generate(args) -> int:
    rng = np.random.default_rng(args.seed)
    if args.kind == "tsp":
        points = rng.integers(0, 11, size=(args.n, 2)).tolist()
        inst = gen_tsp_pickup(points, (0, 0), alpha=args.alpha)
    elif args.kind == "ambulance":
        bases = rng.integers(0, 21, size=(args.bases, 2)).tolist()
        streets = rng.integers(0, 21, size=(args.n, 2)).tolist()
        inst = gen_ambulance(bases, streets, cutoff=args.cutoff, alpha=args.alpha)
    else:
        inst = gen_random(args.n, args.k, seed=args.seed, alpha=args.alpha, resolution=args.resolution)
    save_instance(inst, args.out)
    print(f"k={inst.k} opt={float(inst.efficiency.max())!r}")
    log.info("wrote %s (n=%d)", args.out, inst.n)
    return EXIT_OK


# -- solve --------------------------------------------------------------------------

def _fraction_text(p) -> list | None:
    q = rationalize(p)
    return None if q is None else [str(f) for f in q.rational]


def _colgen_weights(agg):
    """``(w_min, w_avg)`` when ``agg`` is a min/avg combination."""
    if isinstance(agg, LinearCombo) and len(agg.terms) == 2:
        w = {type(s): float(c) for c, s in agg.terms}
        if set(w) == {Minimum, Average}:
            return w[Minimum], w[Average]
    return None


def _solve_exact(fi, agg, unf, args, report):
    if args.T is None:
        raise ValueError(f"--T is required for method {args.method}")
    solver = solve_descriptive if args.method == "descriptive" else solve_pe
    try:
        sol = solver(fi, agg, unf, args.T)
    except SearchSpaceError as exc:
        raise GuardRefusal(str(exc)) from None
    check, _ = evaluate_counts(fi, agg, unf, sol.count_vector.counts)
    if abs(check - sol.objective) > 1e-10:
        raise ReportError(f"objective {sol.objective!r} re-evaluates to {check!r}")
    report.objective = sol.objective
    report.T = args.T
    report.counts = list(sol.count_vector.counts)
    report.probs = list(sol.count_vector.probs)
    report.fractions = [str(Fraction(q, args.T)) for q in sol.count_vector.counts]
    report.extra["enumerated"] = sol.enumerated
    if sol.schedule is not None:
        report.extra["schedule"] = list(sol.schedule.picks)


def _solve_relax(fi, agg, unf, args, report):
    try:
        r = solve_relaxation(fi, agg, unf)
    except RelaxationError as exc:
        raise GuardRefusal(str(exc)) from None
    report.phi_hat = r.objective
    report.objective = r.objective
    report.L = r.lipschitz
    report.probs = list(r.p.probs)
    report.fractions = _fraction_text(r.p)
    report.extra["strategy"] = r.method
    if r.certificate is not None:
        report.extra["certificate"] = r.certificate
    perfect = check_perfect_fairness(r)
    report.extra["perfect_fairness"] = perfect.verdict
    if perfect.T is not None:
        report.extra["perfect_T"] = perfect.T
    if args.eps is None and args.T is None:
        return
    eps = 0.1 if args.eps is None else args.eps
    try:
        e = epsilon_schedule(r, eps, T=args.T)
    except RoundingGateError as exc:
        raise GuardRefusal(str(exc)) from None
    except RelaxationError as exc:
        raise GuardRefusal(str(exc)) from None
    # fail closed: recompute everything the guarantee line states
    phi_T, _ = evaluate_counts(fi, agg, unf, e.counts.counts)
    moved = max(abs(Fraction(q, e.T) - Fraction(p)) for q, p in zip(e.counts.counts, r.p.probs))
    bound = r.objective + e.lipschitz / e.T
    if phi_T != e.phi_T or phi_T > bound + GUARANTEE_TOL or moved > Fraction(1, e.T):
        raise ReportError(f"rounded schedule breaks its guarantee (phi_T={phi_T!r}, bound={bound!r})")
    if e.T == math.ceil(Fraction(e.lipschitz) / Fraction(eps)) and phi_T > r.objective + eps + GUARANTEE_TOL:
        raise ReportError("rounded objective exceeds phi_hat + eps")
    report.T = e.T
    report.phi_T = phi_T
    report.objective = phi_T
    report.counts = list(e.counts.counts)
    report.guarantee = (f"phi_T = {phi_T!r} <= phi_hat + L/T = {r.objective!r} + {e.lipschitz!r}/{e.T} "
                        f"= {bound!r} (eps = {eps!r})")
    report.extra["bound_ok"] = True


def _solve_colgen(fi, agg, unf, args, report):
    weights = _colgen_weights(agg)
    if weights is None or not isinstance(unf, Gap):
        raise GuardRefusal("colgen supports only combo:<w>*min+<w>*avg with gap; "
                           f"got {format_aggregator(agg)} with {format_unfairness(unf)}")
    try:
        res = run_colgen(fi, weights=weights)
    except ColgenError as exc:
        raise ReportError(str(exc)) from None
    final_violation = res.trace[-1][3]
    if final_violation > 1e-7:
        raise ReportError(f"dual rows violated by {final_violation!r} at termination")
    report.objective = res.value
    probs = np.zeros(fi.k)
    for j, v in res.probs.items():
        probs[j] = v
    report.probs = probs.tolist()
    report.fractions = _fraction_text(probs / probs.sum())
    report.extra.update(iterations=res.iterations, active=list(res.state.active),
                        max_dual_violation=final_violation)
    report.guarantee = f"master LP value {res.value!r}; dual rows hold within {final_violation!r}"


def _to_original(report: RunReport, fi) -> None:
    """Re-index counts, probabilities and schedules from kept to all decisions."""
    k = fi.base.k
    for name in ("counts", "probs", "fractions"):
        local = getattr(report, name)
        if local is not None:
            full = [0 if name == "counts" else 0.0 if name == "probs" else "0"] * k
            for j, v in zip(fi.kept, local):
                full[j] = v
            setattr(report, name, full)
    if "schedule" in report.extra:
        report.extra["schedule"] = [fi.kept[j] for j in report.extra["schedule"]]
    if "active" in report.extra:
        report.extra["active"] = [fi.kept[j] for j in report.extra["active"]]


def cmd_solve(args) -> int:
    try:
        inst = load_instance(args.path)
        agg = parse_aggregator(args.agg)
        unf = parse_unfairness(args.unf)
    except (InstanceError, AggregationError, UnfairnessError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    if args.alpha is not None:
        inst = type(inst)(inst.utilities, inst.efficiency, alpha=args.alpha, labels=inst.labels)
    try:
        fi = alpha_filter(inst, offset=args.offset)
    except InstanceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    report = RunReport(
        instance={"path": str(args.path), "n": inst.n, "k": inst.k, "kept": list(fi.kept), "opt": fi.opt},
        method=args.method, aggregator=format_aggregator(agg), unfairness=format_unfairness(unf),
        objective=math.nan,
    )
    handlers = {"descriptive": _solve_exact, "pe": _solve_exact, "relax": _solve_relax, "colgen": _solve_colgen}
    t0 = time.perf_counter()
    try:
        handlers[args.method](fi, agg, unf, args, report)
    except GuardRefusal as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return EXIT_GUARD
    except ReportError as exc:
        print(f"report withheld: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    _to_original(report, fi)
    if args.timing:
        report.wall_ms = round((time.perf_counter() - t0) * 1e3, 3)
    _print_report(report)
    if args.json:
        Path(args.json).write_text(json.dumps(asdict(report), indent=1) + "\n", encoding="utf-8")
    if args.csv:
        Path(args.csv).write_text(rows_to_csv([report.csv_row()], timing=args.timing), encoding="utf-8")
    return EXIT_OK


def _fmt(v) -> str:
    if v is None:
        return "-"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, list):
        return " ".join(_fmt(x) for x in v)
    return str(v)


def _print_report(r: RunReport) -> None:
    inst = r.instance
    lines = [
        ("instance", f"{inst['path']} (n={inst['n']}, k={inst['k']}, kept={len(inst['kept'])}, opt={inst['opt']!r})"),
        ("method", r.method),
        ("aggregator", r.aggregator),
        ("unfairness", r.unfairness),
        ("objective", r.objective),
        ("phi_hat", r.phi_hat),
        ("phi_T", r.phi_T),
        ("L", r.L),
        ("T", r.T),
        ("counts", r.counts),
        ("p", r.probs),
        ("p (fractions)", r.fractions),
    ]
    lines += [(k, v) for k, v in r.extra.items() if k != "bound_ok"]
    if r.wall_ms is not None:
        lines.append(("wall_ms", r.wall_ms))
    width = max(len(k) for k, _ in lines)
    for k, v in lines:
        print(f"{k:<{width}}  {_fmt(v)}")
    if r.guarantee:
        print(f"guarantee: {r.guarantee}")


# -- verify -------------------------------------------------------------------------

def cmd_verify(args) -> int:
    if args.threads is not None and args.threads < 1:
        print("error: --threads must be positive", file=sys.stderr)
        return EXIT_INPUT
    options = {}
    if args.bigm_scale is not None:
        if args.suite != "encodings":
            print("error: --bigm-scale only applies to the encodings suite", file=sys.stderr)
            return EXIT_INPUT
        options["bigm_scale"] = args.bigm_scale
    result = run_suite(args.suite, seed=args.seed, count=args.count, **options)
    if args.csv:
        Path(args.csv).write_text(rows_to_csv(result.rows, timing=args.timing), encoding="utf-8")
    for row in result.failures[:20]:
        print(f"FAIL {row.case} {row.method} {row.detail}".rstrip())
    status = "pass" if result.passed else "fail"
    print(f"{args.suite}: {len(result.rows) - len(result.failures)}/{len(result.rows)} cases ok -> {status}")
    return EXIT_OK if result.passed else EXIT_FAIL


# -- entry point --------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fairtime", description="Fair repeated decisions over a horizon.")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write an instance file")
    g.add_argument("kind", choices=("tsp", "ambulance", "random"))
    g.add_argument("--out", required=True, help="instance JSON path")
    g.add_argument("--n", type=int, default=3, help="stakeholders (streets for ambulance)")
    g.add_argument("--k", type=int, default=4, help="decisions (random only)")
    g.add_argument("--bases", type=int, default=2, help="ambulance bases")
    g.add_argument("--cutoff", type=float, default=15.0, help="ambulance response cutoff (minutes)")
    g.add_argument("--resolution", type=int, default=None, help="round random utilities to 1/r")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--alpha", type=float, default=1.0)
    g.set_defaults(func=cmd_generate)

    s = sub.add_parser("solve", help="solve an instance")
    s.add_argument("path")
    s.add_argument("--method", choices=("descriptive", "pe", "relax", "colgen"), default="pe")
    s.add_argument("--agg", default="avg")
    s.add_argument("--unf", default="gap")
    s.add_argument("--T", type=int, default=None)
    s.add_argument("--eps", type=float, default=None, help="round the relaxation to within eps")
    s.add_argument("--alpha", type=float, default=None, help="override the instance alpha")
    s.add_argument("--offset", action="store_true", help="shift efficiencies by -min(c) before filtering")
    s.add_argument("--seed", type=int, default=0, help="accepted for symmetry; solvers are deterministic")
    s.add_argument("--threads", type=int, default=None)
    s.add_argument("--csv", default=None)
    s.add_argument("--json", default=None)
    s.add_argument("--timing", action="store_true", help="record wall time")
    s.set_defaults(func=cmd_solve)

    v = sub.add_parser("verify", help="run a seeded invariant suite")
    v.add_argument("suite", choices=tuple(SUITES))
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--count", type=int, default=None)
    v.add_argument("--csv", default=None)
    v.add_argument("--timing", action="store_true", help="fill the wall_ms column")
    v.add_argument("--bigm-scale", type=float, default=None, help="build encodings with M = scale * range")
    v.add_argument("--threads", type=int, default=None, help="accepted; suites run single-threaded")
    v.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    level = os.environ.get("FOT_LOG", "quiet").lower()
    logging.basicConfig(level=LOG_LEVELS.get(level, logging.WARNING), format="%(levelname)s %(message)s")
    logging.captureWarnings(True)
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InstanceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
