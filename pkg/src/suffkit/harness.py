"""
Randomized verification of the ordering equivalences.

Each suite draws ``trials`` instances, trial ``t`` from the substream
``(seed, t)``, runs the library's decision procedure and then checks the
verdict with independent evidence: payoff dominance on sampled problems for
positive verdicts, a re-evaluated witness gap for negative ones. Check
tolerances are fixed and do not follow ``tol``, so a corrupted solver
tolerance shows up as counterexamples.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import generators as gen
from . import io
from .channels import (
    ChoiMatrix,
    depolarizing_choi,
    find_cptp_map,
    measure_prepare_extension,
    teleportation_extension,
)
from .classical import check_ordering, garble, optimal_expected_payoff
from .exceptions import SuffkitError
from .linalg import simultaneous_diagonalization, trace_norm
from .quantum import QuantumModel, fit_povm_to_statistics
from .structures import (
    InfoStructure,
    PayoffOperators,
    check_sufficiency,
    compose_structures,
    construct_morphism,
    cq_structure_from_model,
    extract_b_morphism,
    game_payoff,
    isotropic_structure,
    local_state_space_span,
)

SUITES = ("bss", "ncbss", "semiclassical", "structures")
SCHEMA = 1

DOMINANCE_TOL = 1e-8
GAME_TOL = 1e-7
GAP_MIN = 1e-9
RESID_TOL = 1e-6
N_PROBLEMS = 50
N_GAMES = 5


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    trials: int = 1
    max_dim: int = 3
    tol: float = 1e-8

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if not 2 <= self.max_dim <= 4:
            raise ValueError("max_dim must lie in [2, 4]")
        if not self.tol > 0:
            raise ValueError("tol must be positive")


def _num(x):
    """Round for stable report bytes."""
    return float(f"{float(x):.6g}")


class _Trial:
    def __init__(self, kind):
        self.kind = kind
        self.verdict = None
        self.failures = []
        self.detail = {}
        self.instance = {}

    def check(self, ok, message):
        if not ok:
            self.failures.append(message)

    def record(self, index):
        return {
            "trial": index,
            "kind": self.kind,
            "verdict": self.verdict,
            "pass": not self.failures,
            "failures": self.failures,
            "detail": {k: _num(v) if isinstance(v, (float, np.floating)) else v for k, v in self.detail.items()},
        }


# ---- bss ---------------------------------------------------------------


def _trial_bss(rng, cfg):
    n_theta = int(rng.integers(2, 5))
    nd, na = int(rng.integers(2, 6)), int(rng.integers(2, 6))
    planted = bool(rng.random() < 0.5)
    e = gen.random_classical_model(rng, n_theta, nd)
    f = garble(e, gen.random_transition(rng, na, nd)) if planted else gen.random_classical_model(rng, n_theta, na)
    tr = _Trial("planted" if planted else "random")
    tr.instance = {"E": io.classical_model_to_json(e), "F": io.classical_model_to_json(f)}

    v = check_ordering(e, f, tol=cfg.tol)
    tr.verdict = "ordered" if v.sufficient else "not-ordered"
    if v.sufficient:
        m = v.transition.matrix
        resid = float(np.abs(e.probs @ m.T - f.probs).sum(axis=1).max())
        tr.detail["residual"] = resid
        tr.check(resid <= DOMINANCE_TOL, f"transition residual {resid:.3e}")
        worst = np.inf
        for _ in range(N_PROBLEMS):
            prob = gen.random_decision_problem(rng, n_theta, int(rng.integers(2, 5)))
            worst = min(worst, optimal_expected_payoff(e, prob)[0] - optimal_expected_payoff(f, prob)[0])
        tr.detail["min_advantage"] = worst
        tr.check(worst >= -DOMINANCE_TOL, f"E loses a sampled problem by {-worst:.3e}")
    else:
        tr.check(not planted, "planted garbling reported as not ordered")
        gap = optimal_expected_payoff(f, v.witness)[0] - optimal_expected_payoff(e, v.witness)[0]
        tr.detail["gap"] = gap
        tr.check(gap > GAP_MIN, f"witness gap {gap:.3e} not above {GAP_MIN}")
    return tr


# ---- ncbss -------------------------------------------------------------


def _random_games(rng, dim_a, n):
    return [PayoffOperators([gen.random_hermitian(rng, dim_a) for _ in range(int(rng.integers(2, 4)))]) for _ in range(n)]


def _check_witness(tr, src, tgt, witness):
    hi = game_payoff(tgt, witness, tol=1e-9).value
    lo = game_payoff(src, witness, tol=1e-9).dual_bound
    gap = hi - lo
    tr.detail["gap"] = gap
    tr.check(gap > GAP_MIN, f"witness game gap {gap:.3e} not above {GAP_MIN}")


def _check_morphism(tr, res, src, tgt, rng):
    tr.detail["residual"] = res.residual
    tr.check(res.residual < RESID_TOL, f"morphism residual {res.residual:.3e}")
    unital = float(np.abs(res.morphism.dual(np.eye(tgt.dim_b)) - np.eye(src.dim_b)).max())
    tr.detail["dual_unit_error"] = unital
    tr.check(unital <= DOMINANCE_TOL, f"dual misses the identity by {unital:.3e}")
    worst = np.inf
    for game in _random_games(rng, src.dim_a, N_GAMES):
        hi = game_payoff(src, game, tol=1e-9).dual_bound
        lo = game_payoff(tgt, game, tol=1e-9).value
        worst = min(worst, hi - lo)
    tr.detail["min_advantage"] = worst
    tr.check(worst >= -GAME_TOL, f"source loses a sampled game by {-worst:.3e}")


def _trial_ncbss(rng, cfg):
    n_theta = int(rng.integers(2, 4))
    d, dp = int(rng.integers(2, cfg.max_dim + 1)), int(rng.integers(2, cfg.max_dim + 1))
    planted = bool(rng.random() < 0.5)
    r = gen.random_quantum_model(rng, n_theta, d)
    if planted:
        ch = gen.random_channel(rng, d, dp)
        s = QuantumModel([ch(x) for x in r.states])
    else:
        s = gen.random_quantum_model(rng, n_theta, dp)
    tr = _Trial("planted" if planted else "random")
    tr.instance = {"R": io.quantum_model_to_json(r), "S": io.quantum_model_to_json(s)}
    src, tgt = cq_structure_from_model(r), cq_structure_from_model(s)
    res = construct_morphism(src, tgt, tol=cfg.tol)
    tr.verdict = "ordered" if res.success else "not-ordered"
    if res.success:
        _check_morphism(tr, res, src, tgt, rng)
    else:
        tr.check(not planted, "planted pair reported as not ordered")
        _check_witness(tr, src, tgt, res.witness)
    return tr


# ---- semiclassical -----------------------------------------------------


def _trial_semiclassical(rng, cfg):
    n_theta = int(rng.integers(2, 4))
    d = int(rng.integers(2, cfg.max_dim + 1))
    planted = bool(rng.random() < 0.5)
    r = gen.random_quantum_model(rng, n_theta, d)
    if planted:
        dp = int(rng.integers(2, cfg.max_dim + 1))
        u = gen.random_unitary(rng, dp)
        basis = [np.outer(u[:, i], u[:, i].conj()) for i in range(dp)]
        meas = gen.random_povm(rng, d, dp)
        s = QuantumModel([sum(p * b for p, b in zip(meas.probabilities(x), basis)) for x in r.states])
    else:
        # perfectly distinguishable outputs cannot come from overlapping inputs
        dp = max(n_theta, int(rng.integers(2, cfg.max_dim + 1)))
        u = gen.random_unitary(rng, dp)
        s = QuantumModel([np.outer(u[:, t], u[:, t].conj()) for t in range(n_theta)])
    tr = _Trial("planted" if planted else "distinguishable")
    tr.instance = {"R": io.quantum_model_to_json(r), "S": io.quantum_model_to_json(s)}

    src, tgt = cq_structure_from_model(r), cq_structure_from_model(s)
    cptp = find_cptp_map(r.states, s.states, tol=cfg.tol)
    res = construct_morphism(src, tgt, tol=cfg.tol)
    tr.verdict = "ordered" if res.success else "not-ordered"
    tr.check(cptp.feasible == res.success, f"CPTP search says {cptp.feasible}, morphism says {res.success}")
    if res.success:
        _check_morphism(tr, res, src, tgt, rng)
        v = simultaneous_diagonalization(list(s.states))
        pis = [np.outer(v[:, i], v[:, i].conj()) for i in range(dp)]
        stats = np.array([[np.trace(p @ x).real for x in s.states] for p in pis])
        fit = fit_povm_to_statistics(list(r.states), stats, tol=cfg.tol * 1e-2)
        tr.check(fit.feasible, "no measurement reproduces the abelian statistics")
        if fit.feasible:
            choi = measure_prepare_extension(fit.povm, pis)
            err = max(trace_norm(choi(x) - y) for x, y in zip(r.states, s.states))
            tr.detail["extension_error"] = err
            tr.check(err < RESID_TOL, f"measure-prepare extension misses by {err:.3e}")
    else:
        tr.check(not planted, "planted pair reported as not ordered")
        _check_witness(tr, src, tgt, res.witness)
    return tr


# ---- structures --------------------------------------------------------


def _b_inputs(s: InfoStructure):
    ops = [w for w in local_state_space_span(s, "B").spanning_ops if np.trace(w).real > 1e-9]
    out = []
    for w in ops:
        w = w / np.trace(w).real
        lo = np.linalg.eigvalsh(w)[0]
        if lo > -1e-10:
            out.append(w)
    return out


def _trial_structures(rng, cfg):
    # composed B sides grow as d_Y * d_B, so B dimensions stay at 2
    da, db, dbp = int(rng.integers(1, 3)), int(rng.integers(1, 3)), 2
    kind = ["planted", "depolarized", "product"][int(rng.integers(0, 3))]
    if kind == "planted":
        src = gen.random_structure(rng, da, db)
        ch = gen.random_channel(rng, db, dbp)
        tgt = InfoStructure(ch.extend(src.state, da), da, dbp)
    else:
        da, db = 2, dbp
        tgt = gen.random_structure(rng, da, dbp, rank=1)
        if kind == "depolarized":
            dep = depolarizing_choi(dbp, float(rng.uniform(0.3, 0.7)))
            state = sum(
                np.kron(np.outer(ea, eb), dep(blk))
                for ea, eb, blk in _blocks(tgt)
            )
        else:
            state = np.kron(tgt.marginal("A"), tgt.marginal("B"))
        src = InfoStructure(state, da, db)
    tr = _Trial(kind)
    tr.instance = {"source": io.structure_to_json(src), "target": io.structure_to_json(tgt)}

    omega = isotropic_structure(dbp, 1.0 / (dbp + 1))
    big_src, big_tgt = compose_structures(omega, src), compose_structures(omega, tgt)
    res = construct_morphism(big_src, big_tgt, tol=cfg.tol)
    direct = check_sufficiency(src, tgt, tol=cfg.tol)
    tr.verdict = "ordered" if res.success else "not-ordered"
    tr.check(direct.feasible == res.success, f"CPTP search says {direct.feasible}, composed morphism says {res.success}")
    if res.success:
        tr.detail["residual"] = res.residual
        tr.check(res.residual < RESID_TOL, f"composed morphism residual {res.residual:.3e}")
        lb = extract_b_morphism(res.morphism, dbp)
        choi = teleportation_extension(lb, tol=cfg.tol, input_states=_b_inputs(src) or None)
        err = trace_norm(_extend_choi(choi, src) - tgt.state)
        tr.detail["extension_error"] = err
        tr.check(err < RESID_TOL, f"teleportation extension misses the target by {err:.3e}")
    else:
        tr.check(kind != "planted", "planted pair reported as not ordered")
        _check_witness(tr, big_src, big_tgt, res.witness)
    return tr


def _blocks(s: InfoStructure):
    da, db = s.dim_a, s.dim_b
    t = s.state.reshape(da, db, da, db)
    eye = np.eye(da)
    for a in range(da):
        for b in range(da):
            yield eye[a], eye[b], t[a, :, b, :]


def _extend_choi(choi: ChoiMatrix, s: InfoStructure):
    return sum(np.kron(np.outer(ea, eb), choi(blk)) for ea, eb, blk in _blocks(s))


_RUNNERS = {
    "bss": _trial_bss,
    "ncbss": _trial_ncbss,
    "semiclassical": _trial_semiclassical,
    "structures": _trial_structures,
}


def run_suite(suite, cfg: RunConfig, timing=False) -> dict:
    """
    Run ``cfg.trials`` trials and return the JSON-ready report.

    A trial that raises a library error counts as a counterexample; its
    message is kept in the record.
    """
    if suite not in _RUNNERS:
        raise ValueError(f"unknown suite {suite!r}; expected one of {SUITES}")
    start = time.perf_counter()
    records, first = [], None
    for t in range(cfg.trials):
        rng = gen.trial_rng(cfg.seed, t)
        try:
            tr = _RUNNERS[suite](rng, cfg)
        except (SuffkitError, np.linalg.LinAlgError) as exc:
            tr = _Trial("error")
            tr.verdict = "error"
            tr.failures.append(f"{type(exc).__name__}: {exc}")
        rec = tr.record(t)
        records.append(rec)
        if first is None and not rec["pass"]:
            first = dict(rec, instance=tr.instance)
    failed = sum(not r["pass"] for r in records)
    return {
        "schema": SCHEMA,
        "command": "verify",
        "config": {"suite": suite, "trials": cfg.trials, "seed": cfg.seed, "max_dim": cfg.max_dim, "tol": cfg.tol},
        "verdict": "pass" if failed == 0 else "fail",
        "passed": len(records) - failed,
        "failed": failed,
        "counterexample": first,
        "trials": records,
        "timing": {"seconds": round(time.perf_counter() - start, 3)} if timing else None,
    }
