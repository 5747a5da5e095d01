"""
Acceptance suite. Each test prints one PASS/FAIL line, collected again in
the terminal summary; run with ``-s`` to see them inline as well.
"""

import itertools
import json
import subprocess
import sys
import time

import numpy as np

from suffkit import generators as gen
from suffkit.channels import (
    apply_choi,
    find_cptp_map,
    measure_prepare_extension,
    teleportation_extension,
)
from suffkit.classical import optimal_expected_payoff
from suffkit.harness import RunConfig, run_suite
from suffkit.linalg import partial_trace, partial_transpose, trace_norm
from suffkit.quantum import QuantumModel, abelian_to_classical, classical_to_quantum, optimal_quantum_payoff
from suffkit.structures import (
    InfoStructure,
    construct_morphism,
    game_payoff,
    isotropic_structure,
    local_state_space_span,
)

from conftest import ACCEPTANCE, KET0, KET1, KETP, proj


def report(n, ok, text):
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {text}"
    ACCEPTANCE[n] = line
    print(line)
    assert ok, line


def is_cptp(choi, tol=1e-8):
    tr_out = partial_trace(choi.j, choi.dim_in, choi.dim_out, "B")
    return np.linalg.eigvalsh(choi.j)[0] >= -tol and np.abs(tr_out - np.eye(choi.dim_in) / choi.dim_in).max() <= tol


def test_criterion_1_classical_equivalence():
    start = time.perf_counter()
    rep = run_suite("bss", RunConfig(seed=42, trials=200))
    elapsed = time.perf_counter() - start
    verdicts = [r["verdict"] for r in rep["trials"]]
    ok = rep["failed"] == 0 and elapsed < 60
    report(1, ok, f"{rep['passed']}/200 pairs certified ({verdicts.count('ordered')} ordered, "
                  f"{verdicts.count('not-ordered')} not), {elapsed:.1f} s")


def test_criterion_2_enumeration_oracle():
    rng = np.random.default_rng(2)
    worst, count = 0.0, 0
    while count < 200:
        n_theta, nd, nx = (int(v) for v in rng.integers([1, 1, 1], [5, 7, 5]))
        if nx**nd > 4096:
            continue
        count += 1
        model = gen.random_classical_model(rng, n_theta, nd)
        problem = gen.random_decision_problem(rng, n_theta, nx)
        best = -np.inf
        for rule in itertools.product(range(nx), repeat=nd):
            v = sum(problem.payoff[t, rule[d]] * model.probs[t, d] for t in range(n_theta) for d in range(nd))
            best = max(best, v / n_theta)
        worst = max(worst, abs(optimal_expected_payoff(model, problem)[0] - best))
    report(2, worst < 1e-12, f"max |solver - enumeration| = {worst:.2e} over {count} instances")


def test_criterion_3_helstrom():
    rng = np.random.default_rng(3)
    worst_diff = worst_gap = 0.0
    for _ in range(100):
        d = int(rng.integers(2, 5))
        model = gen.random_quantum_model(rng, int(rng.integers(1, 4)), d)
        problem = gen.random_decision_problem(rng, model.n_theta, 2)
        closed = optimal_quantum_payoff(model, problem)
        it = optimal_quantum_payoff(model, problem, tol=1e-9, method="iterative")
        worst_diff = max(worst_diff, abs(closed.value - it.value))
        worst_gap = max(worst_gap, it.gap)
    report(3, worst_diff <= 1e-7 and worst_gap <= 1e-7,
           f"max diff {worst_diff:.2e}, max iterative gap {worst_gap:.2e}")


def test_criterion_4_cptp_completeness():
    rng = np.random.default_rng(4)
    feasible, worst = 0, 0.0
    for _ in range(100):
        di, do = int(rng.integers(1, 4)), int(rng.integers(1, 4))
        ch = gen.random_channel(rng, di, do)
        rhos = [gen.random_state(rng, di) for _ in range(int(rng.integers(1, 5)))]
        sigmas = [ch(r) for r in rhos]
        res = find_cptp_map(rhos, sigmas)
        if res.feasible and is_cptp(res.choi):
            feasible += 1
            worst = max(worst, max(trace_norm(apply_choi(res.choi, r) - s) for r, s in zip(rhos, sigmas)))
    bad = find_cptp_map([proj(KET0), proj(KETP)], [proj(KET0), proj(KET1)])
    w = bad.witness
    witness_ok = (not bad.feasible and w is not None and abs(w.output_distance - 2) < 1e-12
                  and abs(w.input_distance - np.sqrt(2)) < 1e-12)
    ok = feasible == 100 and worst < 1e-6 and witness_ok
    report(4, ok, f"{feasible}/100 planted feasible, max residual {worst:.2e}; "
                  f"witness {w.output_distance:.4f} > {w.input_distance:.4f}")


def test_criterion_5_main_construction():
    rng = np.random.default_rng(5)
    good, worst_res, worst_tp = 0, 0.0, 0.0
    for _ in range(50):
        da, db, dbp = 2, int(rng.integers(2, 4)), int(rng.integers(2, 4))
        src = gen.random_structure(rng, da, db)
        ch = gen.random_channel(rng, db, dbp)
        tgt = InfoStructure(ch.extend(src.state, da), da, dbp)
        res = construct_morphism(src, tgt)
        if res.success:
            good += 1
            worst_res = max(worst_res, res.residual)
            worst_tp = max(worst_tp, np.abs(res.morphism.dual(np.eye(dbp)) - np.eye(db)).max())
    gaps = []
    for _ in range(20):
        # a pure entangled target cannot be recovered from a depolarized copy
        d = 2
        tgt = InfoStructure(gen.random_pure_state(rng, d * d), d, d)
        p = rng.uniform(0.3, 0.7)
        mixed = p * tgt.state + (1 - p) * np.kron(tgt.marginal("A"), np.eye(d) / d)
        src = InfoStructure(mixed, d, d)
        res = construct_morphism(src, tgt)
        if res.success:
            gaps.append(-np.inf)
            continue
        tv = game_payoff(tgt, res.witness, tol=1e-10).value
        sv = game_payoff(src, res.witness, tol=1e-10).dual_bound
        gaps.append(tv - sv)
    ok = good == 50 and worst_res < 1e-6 and worst_tp <= 1e-8 and min(gaps) > 1e-9
    report(5, ok, f"{good}/50 planted (residual {worst_res:.1e}, |L*(I)-I| {worst_tp:.1e}); "
                  f"min witness gap {min(gaps):.3e} over 20 non-ordered")


def test_criterion_6_extensions():
    rng = np.random.default_rng(6)
    worst, cptp = 0.0, 0
    for _ in range(20):
        d, di = int(rng.integers(2, 4)), int(rng.integers(1, 4))
        ch = gen.random_channel(rng, di, d)
        choi = teleportation_extension(ch)
        cptp += is_cptp(choi)
        for _ in range(5):
            r = gen.random_state(rng, di)
            worst = max(worst, trace_norm(apply_choi(choi, r) - ch(r)))
    mp_worst = 0.0
    for _ in range(20):
        di, do = int(rng.integers(2, 4)), int(rng.integers(2, 4))
        u = gen.random_unitary(rng, do)
        pis = [np.outer(u[:, k], u[:, k].conj()) for k in range(do)]
        povm = gen.random_povm(rng, di, do)
        choi = measure_prepare_extension(povm, pis)
        r = gen.random_state(rng, di)
        direct = sum(np.trace(q @ r).real * p for q, p in zip(povm.elements, pis))
        mp_worst = max(mp_worst, np.abs(apply_choi(choi, r) - direct).max())
    ok = worst <= 1e-7 and cptp == 20 and mp_worst <= 1e-9
    report(6, ok, f"teleportation max error {worst:.2e}, {cptp}/20 CPTP; measure-prepare max error {mp_worst:.2e}")


def test_criterion_7_isotropic():
    ranks = {}
    ok = True
    min_pt = np.inf
    for d in (2, 3):
        for p in (0.0, 0.25, 0.5, 1.0):
            r = local_state_space_span(isotropic_structure(d, p)).rank
            ranks[(d, p)] = r
            ok &= r == (1 if p == 0 else d * d)
        pt = partial_transpose(isotropic_structure(d, 1 / (d + 1)).state, d, d)
        min_pt = min(min_pt, np.linalg.eigvalsh(pt)[0])
    ok &= min_pt >= -1e-10
    report(7, ok, f"ranks {ranks}, min PT eigenvalue at p=1/(d+1): {min_pt:.2e}")


def test_criterion_8_correspondence():
    rng = np.random.default_rng(8)
    worst, worst_rt = 0.0, 0.0
    for _ in range(20):
        d, n = int(rng.integers(2, 4)), int(rng.integers(2, 4))
        probs = rng.dirichlet(np.ones(d), size=n)
        u = gen.random_unitary(rng, d)
        q = QuantumModel([u @ np.diag(p) @ u.conj().T for p in probs])
        c = abelian_to_classical(q)
        for _ in range(20):
            problem = gen.random_decision_problem(rng, n, int(rng.integers(2, 4)))
            worst = max(worst, abs(optimal_quantum_payoff(q, problem).value - optimal_expected_payoff(c, problem)[0]))
        e = gen.random_classical_model(rng, n, d)
        back = abelian_to_classical(classical_to_quantum(e))
        worst_rt = max(worst_rt, np.abs(back.probs - e.probs).max())
    report(8, worst < 1e-7 and worst_rt < 1e-10, f"max payoff diff {worst:.2e}, round-trip error {worst_rt:.2e}")


def test_criterion_9_replay():
    cmd = [sys.executable, "-m", "suffkit.cli", "verify", "--suite", "bss", "--trials", "200", "--seed", "42",
           "--format", "json"]
    a = subprocess.run(cmd, capture_output=True)
    b = subprocess.run(cmd, capture_output=True)
    same = a.stdout == b.stdout and a.returncode == b.returncode == 0
    ok = same and json.loads(a.stdout)["passed"] == 200
    report(9, ok, f"two runs byte-identical: {same} ({len(a.stdout)} bytes)")
