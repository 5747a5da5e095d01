import numpy as np
import pytest

from suffkit import generators as gen
from suffkit.channels import (
    ChoiMatrix,
    Superoperator,
    apply_choi,
    build_bell_basis,
    choi_from_kraus,
    choi_of_superoperator,
    depolarizing_choi,
    find_cptp_map,
    identity_choi,
    max_entangled,
    measure_prepare_extension,
    replacer_choi,
    superoperator_of_choi,
    teleportation_extension,
)
from suffkit.exceptions import NotExtendableError, PreconditionError, ShapeError, ValidationError
from suffkit.linalg import partial_trace, trace_norm
from suffkit.quantum import Povm

from conftest import KET0, KET1, KETM, KETP, proj


def kraus_apply(kraus, rho):
    return sum(k @ rho @ k.conj().T for k in kraus)


def assert_cptp(choi, tol=1e-8):
    assert np.linalg.eigvalsh(choi.j)[0] >= -tol
    tr_out = partial_trace(choi.j, choi.dim_in, choi.dim_out, "B")
    assert np.abs(tr_out - np.eye(choi.dim_in) / choi.dim_in).max() <= tol


def test_identity_and_replacer(rng):
    rho = gen.random_state(rng, 3)
    assert np.abs(apply_choi(identity_choi(3), rho) - rho).max() < 1e-12
    sigma = gen.random_state(rng, 2)
    rep = replacer_choi(sigma, 3)
    for _ in range(5):
        assert np.abs(apply_choi(rep, gen.random_state(rng, 3)) - sigma).max() < 1e-12


def test_choi_validation():
    with pytest.raises(ValidationError):
        ChoiMatrix(np.eye(4) / 2, 2, 2)
    with pytest.raises(ValidationError):
        ChoiMatrix(np.diag([0.5, -0.1, 0.1, 0.5]), 2, 2)
    with pytest.raises(ShapeError):
        apply_choi(identity_choi(2), np.eye(3) / 3)


def test_stinespring_oracle(rng):
    for _ in range(20):
        di, do = int(rng.integers(1, 4)), int(rng.integers(1, 4))
        kraus = gen.random_kraus(rng, di, do)
        # isometry V = Σ_k |k⟩ ⊗ K_k, then trace out the environment
        v = np.vstack(kraus)
        assert np.abs(v.conj().T @ v - np.eye(di)).max() < 1e-12
        choi = choi_from_kraus(kraus)
        assert_cptp(choi)
        for _ in range(3):
            rho = gen.random_state(rng, di)
            full = v @ rho @ v.conj().T
            direct = partial_trace(full, len(kraus), do, "A")
            out = apply_choi(choi, rho)
            assert np.abs(out - direct).max() < 1e-9
            assert abs(np.trace(out).real - 1) < 1e-8


def test_choi_round_trip(rng):
    for _ in range(50):
        di, do = int(rng.integers(1, 4)), int(rng.integers(1, 4))
        op = gen.random_channel(rng, di, do)
        back = superoperator_of_choi(choi_of_superoperator(op))
        assert np.abs(back.matrix - op.matrix).max() < 1e-9


def test_superoperator_dual_and_extend(rng):
    op = gen.random_channel(rng, 2, 3)
    x, t = gen.random_hermitian(rng, 3), gen.random_hermitian(rng, 2)
    assert abs(np.trace(op.dual(x) @ t) - np.trace(x @ op(t))) < 1e-12
    assert np.abs(op.dual(np.eye(3)) - np.eye(2)).max() < 1e-12
    a, b = gen.random_state(rng, 2), gen.random_state(rng, 2)
    assert np.abs(op.extend(np.kron(a, b), 2) - np.kron(a, op(b))).max() < 1e-12
    with pytest.raises(ValidationError):
        Superoperator(2 * np.eye(4), 2, 2)
    with pytest.raises(ShapeError):
        Superoperator(np.eye(4), 2, 3)


def test_depolarizing_closed_form(rng):
    ch = depolarizing_choi(3, 0.4)
    rho = gen.random_state(rng, 3)
    assert np.abs(apply_choi(ch, rho) - (0.4 * rho + 0.6 * np.eye(3) / 3)).max() < 1e-12


def test_find_cptp_trivial_cases(rng):
    states = [gen.random_state(rng, 2) for _ in range(3)]
    res = find_cptp_map(states, states)
    assert res.feasible and res.residual <= 1e-8
    sigma = gen.random_state(rng, 3)
    res = find_cptp_map(states, [sigma] * 3)
    assert res.feasible
    assert max(trace_norm(apply_choi(res.choi, s) - sigma) for s in states) <= 1e-8
    res = find_cptp_map([proj(KET0), proj(KET1)], [proj(KETP), proj(KETM)])
    assert res.feasible
    assert_cptp(res.choi)


def test_find_cptp_monotonicity_witness():
    res = find_cptp_map([proj(KET0), proj(KETP)], [proj(KET0), proj(KET1)])
    assert not res.feasible
    assert res.witness.pair == (0, 1)
    assert abs(res.witness.input_distance - np.sqrt(2)) < 1e-12
    assert abs(res.witness.output_distance - 2) < 1e-12
    assert res.upper_bound < 0 or res.affine_inconsistent


def test_find_cptp_errors():
    with pytest.raises(ShapeError):
        find_cptp_map([np.eye(2) / 2], [])
    with pytest.raises(ShapeError):
        find_cptp_map([np.eye(2) / 2, np.eye(3) / 3], [np.eye(2) / 2] * 2)


def test_find_cptp_planted(rng):
    for _ in range(100):
        di, do = int(rng.integers(1, 4)), int(rng.integers(1, 4))
        n = int(rng.integers(1, 5))
        ch = gen.random_channel(rng, di, do)
        rhos = [gen.random_state(rng, di) for _ in range(n)]
        sigmas = [ch(r) for r in rhos]
        res = find_cptp_map(rhos, sigmas)
        assert res.feasible and res.residual < 1e-8
        assert_cptp(res.choi)
        for i in range(n):
            for j in range(i):
                assert trace_norm(sigmas[i] - sigmas[j]) <= trace_norm(rhos[i] - rhos[j]) + 1e-7


def test_find_cptp_infeasible_random_certified(rng):
    # pure outputs that are pairwise farther apart than the mixed inputs
    for _ in range(10):
        rhos = [gen.random_state(rng, 2) for _ in range(3)]
        u = gen.random_unitary(rng, 2)
        sigmas = [u @ proj(k) @ u.conj().T for k in (KET0, KET1, KETP)]
        res = find_cptp_map(rhos, sigmas)
        assert not res.feasible
        assert res.upper_bound < 0 or res.affine_inconsistent


def test_measure_prepare_dephasing(rng):
    basis = [proj(KET0), proj(KET1)]
    choi = measure_prepare_extension(Povm(basis), basis)
    assert_cptp(choi)
    rho = gen.random_state(rng, 2)
    assert np.abs(apply_choi(choi, rho) - np.diag(np.diag(rho))).max() < 1e-12
    diag = np.diag([0.3, 0.7])
    assert np.abs(apply_choi(choi, diag) - diag).max() < 1e-12


def test_measure_prepare_degenerate(rng):
    basis = [proj(KETP), proj(KETM)]
    choi = measure_prepare_extension(Povm([np.eye(3), np.zeros((3, 3))]), basis)
    for _ in range(5):
        assert np.abs(apply_choi(choi, gen.random_state(rng, 3)) - basis[0]).max() < 1e-12


def test_measure_prepare_planted_and_commuting(rng):
    u = gen.random_unitary(rng, 3)
    pis = [np.outer(u[:, k], u[:, k].conj()) for k in range(3)]
    povm = gen.random_povm(rng, 2, 3)
    choi = measure_prepare_extension(povm, pis)
    assert_cptp(choi)
    for _ in range(20):
        rho = gen.random_state(rng, 2)
        direct = sum(np.trace(q @ rho).real * p for q, p in zip(povm.elements, pis))
        out = apply_choi(choi, rho)
        assert np.abs(out - direct).max() < 1e-9
        for p in pis:
            assert np.abs(out @ p - p @ out).max() < 1e-9


def test_measure_prepare_preconditions():
    with pytest.raises(PreconditionError):
        measure_prepare_extension(Povm([np.eye(2) / 2] * 2), [proj(KET0), proj(KETP)])
    with pytest.raises(PreconditionError):
        measure_prepare_extension(Povm([np.eye(2)]), [proj(KET0), proj(KET1)])
    with pytest.raises(PreconditionError):
        measure_prepare_extension(Povm([np.eye(2) / 2] * 2), [proj(KET0), 0.5 * np.eye(2)])


@pytest.mark.parametrize("d", [2, 3])
def test_bell_basis(d):
    bell = build_bell_basis(d)
    assert bell.projectors.shape == (d * d, d * d, d * d)
    assert np.abs(bell.projectors.sum(axis=0) - np.eye(d * d)).max() < 1e-10
    gram = np.einsum("iab,jba->ij", bell.projectors, bell.projectors).real
    assert np.abs(gram - np.eye(d * d)).max() < 1e-10
    assert np.abs(bell.psi_plus - max_entangled(d)).max() == 0
    for u, b in zip(bell.unitaries, bell.projectors):
        assert np.abs(u @ u.conj().T - np.eye(d)).max() < 1e-10
        ue = np.kron(u, np.eye(d))
        assert np.abs(ue @ bell.psi_plus @ ue.conj().T - b).max() < 1e-10


def test_bell_basis_d2_explicit():
    bell = build_bell_basis(2)
    s = 1 / np.sqrt(2)
    kets = [np.array([s, 0, 0, s]), np.array([s, 0, 0, -s]), np.array([0, s, s, 0]), np.array([0, s, -s, 0])]
    for k, b in zip(kets, bell.projectors):
        assert np.abs(b - np.outer(k, k)).max() < 1e-12


def test_bell_corrections_teleport(rng):
    # Ψ⁺ on factors 1,2 and the input on 3; measuring B^i on 2,3 and correcting
    # factor 1 returns the input
    for d in (2, 3):
        bell = build_bell_basis(d)
        rho = gen.random_state(rng, d)
        total = np.zeros((d, d), dtype=complex)
        for b, v in zip(bell.projectors, bell.corrections):
            full = np.kron(bell.psi_plus, rho)
            proj_b = np.kron(np.eye(d), b)
            post = partial_trace(proj_b @ full @ proj_b, d, d * d, "B")
            prob = np.trace(post).real
            assert abs(prob - 1 / d**2) < 1e-12
            total += v @ post @ v.conj().T
            assert np.abs(v @ post @ v.conj().T / prob - rho).max() < 1e-10
        assert np.abs(total - rho).max() < 1e-10


def test_teleportation_identity():
    choi = teleportation_extension(Superoperator.identity(2))
    assert np.abs(choi.j - max_entangled(2)).max() < 1e-8


def test_teleportation_depolarizing():
    op = superoperator_of_choi(depolarizing_choi(2, 0.6))
    choi = teleportation_extension(op)
    assert np.abs(choi.j - depolarizing_choi(2, 0.6).j).max() < 1e-7


def test_teleportation_planted(rng):
    for _ in range(5):
        di = int(rng.integers(1, 4))
        op = gen.random_channel(rng, di, 2)
        choi = teleportation_extension(op)
        assert_cptp(choi)
        for _ in range(5):
            rho = gen.random_state(rng, di)
            assert trace_norm(apply_choi(choi, rho) - op(rho)) < 1e-7


def test_teleportation_partial_domain(rng):
    # only the restriction to a subspace of states is given
    ch = gen.random_channel(rng, 3, 2)
    states = [gen.random_state(rng, 3) for _ in range(2)]
    choi = teleportation_extension(ch, input_states=states)
    assert_cptp(choi)
    for s in states:
        assert trace_norm(apply_choi(choi, s) - ch(s)) < 1e-7


def test_teleportation_preconditions(rng):
    with pytest.raises(PreconditionError):
        teleportation_extension(Superoperator.identity(2), ancilla_span=[proj(KET0), proj(KET1)])
    with pytest.raises(ShapeError):
        teleportation_extension(Superoperator.identity(2), ancilla_span=[np.eye(3) / 3])


def test_teleportation_transpose_not_extendable():
    # transposition is positive and trace preserving but not completely positive
    t = Superoperator.from_function(lambda e: e.T, 2, 2)
    with pytest.raises(NotExtendableError) as info:
        teleportation_extension(t)
    assert info.value.fit.gap > 0
