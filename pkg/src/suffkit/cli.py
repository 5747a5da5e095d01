"""
Command-line interface.

Exit codes: 0 ordered/feasible, 1 not ordered/infeasible or a harness
counterexample, 2 input or numerical error.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import io
from ._config import default_solver_tol
from .channels import find_cptp_map
from .classical import check_ordering, optimal_expected_payoff
from .exceptions import SuffkitError
from .harness import SUITES, RunConfig, run_suite
from .quantum import optimal_quantum_payoff
from .structures import check_sufficiency, construct_morphism, game_payoff

EXIT_OK, EXIT_NEGATIVE, EXIT_ERROR = 0, 1, 2


def _verdict_block(v):
    if v.sufficient:
        return {"sufficient": True, "transition": v.transition.matrix.tolist(), "residual": v.residual}
    return {
        "sufficient": False,
        "witness": io.decision_problem_to_json(v.witness),
        "gap": v.gap,
    }


def cmd_compare_classical(args):
    e = io.classical_model_from_json(io.read_json(args.e_path))
    f = io.classical_model_from_json(io.read_json(args.f_path))
    ef, fe = check_ordering(e, f, args.tol), check_ordering(f, e, args.tol)
    verdict = {
        (True, True): "equivalent",
        (True, False): "E>F",
        (False, True): "F>E",
        (False, False): "incomparable",
    }[(ef.sufficient, fe.sufficient)]
    report = {"verdict": verdict, "certificate": {"E_to_F": _verdict_block(ef), "F_to_E": _verdict_block(fe)}}
    return report, EXIT_NEGATIVE if verdict == "incomparable" else EXIT_OK


def _channel_block(res):
    if res.feasible:
        return {"choi": io.choi_to_json(res.choi), "residual": res.residual}
    out = {"upper_bound": res.upper_bound, "affine_inconsistent": res.affine_inconsistent, "residual": res.residual}
    w = getattr(res, "witness", None)
    if w is not None:
        out["witness"] = {"pair": list(w.pair), "input_distance": w.input_distance, "output_distance": w.output_distance}
    return out


def cmd_check_sufficiency(args):
    load = io.read_json
    if args.mode == "classical":
        v = check_ordering(io.classical_model_from_json(load(args.r_path)), io.classical_model_from_json(load(args.s_path)), args.tol)
        return {"verdict": "sufficient" if v.sufficient else "not-sufficient", "certificate": _verdict_block(v)}, (
            EXIT_OK if v.sufficient else EXIT_NEGATIVE
        )
    if args.mode == "quantum":
        r = io.quantum_model_from_json(load(args.r_path))
        s = io.quantum_model_from_json(load(args.s_path))
        if r.n_theta != s.n_theta:
            raise SuffkitError(f"parameter sets differ: {r.n_theta} vs {s.n_theta}")
        res = find_cptp_map(r.states, s.states, args.tol)
    else:
        res = check_sufficiency(io.structure_from_json(load(args.r_path)), io.structure_from_json(load(args.s_path)), args.tol)
    verdict = "sufficient" if res.feasible else "not-sufficient"
    return {"verdict": verdict, "certificate": _channel_block(res)}, EXIT_OK if res.feasible else EXIT_NEGATIVE


def cmd_construct_morphism(args):
    src = io.structure_from_json(io.read_json(args.src_path))
    tgt = io.structure_from_json(io.read_json(args.tgt_path))
    res = construct_morphism(src, tgt, args.tol)
    if res.success:
        cert = {
            "morphism": {"dim_in": res.morphism.dim_in, "dim_out": res.morphism.dim_out, "matrix": io.encode_matrix(res.morphism.matrix)},
            "realizing_povm": [io.encode_matrix(p) for p in res.realizing_povm.elements],
            "residual": res.residual,
        }
        return {"verdict": "m-sufficient", "certificate": cert}, EXIT_OK
    cert = {"witness": io.payoff_operators_to_json(res.witness), "gap": res.gap}
    return {"verdict": "not-m-sufficient", "certificate": cert}, EXIT_NEGATIVE


def cmd_optimal_payoff(args):
    a, b = io.read_json(args.model_path), io.read_json(args.problem_path)
    if args.mode == "classical":
        value, rule = optimal_expected_payoff(io.classical_model_from_json(a), io.decision_problem_from_json(b))
        return {"verdict": "solved", "certificate": {"value": value, "rule": np.asarray(rule).tolist()}}, EXIT_OK
    if args.mode == "quantum":
        sol = optimal_quantum_payoff(io.quantum_model_from_json(a), io.decision_problem_from_json(b), args.tol)
    else:
        sol = game_payoff(io.structure_from_json(a), io.payoff_operators_from_json(b), args.tol)
    cert = {
        "value": sol.value,
        "dual_bound": sol.dual_bound,
        "gap": sol.gap,
        "povm": [io.encode_matrix(p) for p in sol.povm.elements],
    }
    return {"verdict": "solved", "certificate": cert}, EXIT_OK


def cmd_verify(args):
    cfg = RunConfig(seed=args.seed, trials=args.trials, max_dim=args.max_dim, tol=args.tol)
    report = run_suite(args.suite, cfg, timing=args.timing)
    return report, EXIT_OK if report["failed"] == 0 else EXIT_NEGATIVE


def _text(report) -> str:
    if report.get("command") == "verify":
        lines = [
            f"suite {report['config']['suite']}: {report['passed']} passed, {report['failed']} failed",
            f"verdict: {report['verdict']}",
        ]
        ce = report["counterexample"]
        if ce is not None:
            lines.append(f"first counterexample: trial {ce['trial']} ({ce['kind']}): {'; '.join(ce['failures'])}")
        if report.get("timing"):
            lines.append(f"time: {report['timing']['seconds']} s")
        return "\n".join(lines)
    lines = [f"verdict: {report['verdict']}"]
    for key, val in (report.get("certificate") or {}).items():
        if isinstance(val, (int, float, str, bool)):
            lines.append(f"{key}: {val}")
        else:
            lines.append(f"{key}: {json.dumps(val)}")
    if "error" in report:
        lines.append(f"error: {report['error']}")
    return "\n".join(lines)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tol", type=float, default=None, help="solver tolerance (default: SUFFKIT_TOL or 1e-8)")
    common.add_argument("--format", choices=("text", "json"), default="text")

    p = argparse.ArgumentParser(prog="suffkit", description="Compare statistical models and information structures.")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("compare-classical", parents=[common], help="order two classical models")
    c.add_argument("e_path")
    c.add_argument("f_path")
    c.set_defaults(func=cmd_compare_classical)

    c = sub.add_parser("check-sufficiency", parents=[common], help="search for a transition matrix or channel")
    c.add_argument("--mode", choices=("classical", "quantum", "structure"), default="quantum")
    c.add_argument("r_path")
    c.add_argument("s_path")
    c.set_defaults(func=cmd_check_sufficiency)

    c = sub.add_parser("construct-morphism", parents=[common], help="build a statistical morphism between structures")
    c.add_argument("src_path")
    c.add_argument("tgt_path")
    c.set_defaults(func=cmd_construct_morphism)

    c = sub.add_parser("optimal-payoff", parents=[common], help="solve a decision problem or game")
    c.add_argument("--mode", choices=("classical", "quantum", "game"), default="classical")
    c.add_argument("model_path")
    c.add_argument("problem_path")
    c.set_defaults(func=cmd_optimal_payoff)

    c = sub.add_parser("verify", parents=[common], help="randomized theorem checks")
    c.add_argument("--suite", choices=SUITES, default="bss")
    c.add_argument("--trials", type=int, default=20)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--max-dim", type=int, default=3)
    c.add_argument("--timing", action="store_true", help="include wall time (breaks byte-identical replay)")
    c.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.tol is None:
            args.tol = default_solver_tol()
        if not args.tol > 0:
            raise ValueError("--tol must be positive")
        report, code = args.func(args)
    except (SuffkitError, ValueError, OSError, np.linalg.LinAlgError) as exc:
        report = {"verdict": "error", "error": f"{type(exc).__name__}: {exc}"}
        code = EXIT_ERROR
    report = {"schema": 1, "command": args.command, **report}
    if args.format == "json":
        sys.stdout.write(json.dumps(report, indent=2, sort_keys=False) + "\n")
    else:
        sys.stdout.write(_text(report) + "\n")
    return code


if __name__ == "__main__":
    sys.exit(main())
