import numpy as np
import pytest

from suffkit import generators as gen
from suffkit.channels import (
    Superoperator,
    apply_choi,
    max_entangled,
    superoperator_of_choi,
    teleportation_extension,
)
from suffkit.classical import optimal_expected_payoff
from suffkit.exceptions import PreconditionError, ShapeError
from suffkit.linalg import partial_trace, partial_transpose, trace_norm
from suffkit.quantum import OperatorFamily, Povm, QuantumModel, optimal_quantum_payoff
from suffkit.structures import (
    InfoStructure,
    OperatorTuple,
    PayoffOperators,
    check_sufficiency,
    compose_structures,
    construct_morphism,
    cq_structure_from_model,
    extract_b_morphism,
    find_realizing_test,
    game_payoff,
    is_complete_structure,
    isotropic_structure,
    local_state_space_span,
    model_from_cq_structure,
    payoff_from_operators,
    reduced_tuple,
)

from conftest import KET0, KET1, KETP, proj


def product(rng, da, db):
    return InfoStructure(np.kron(gen.random_state(rng, da), gen.random_state(rng, db)), da, db)


def planted_pair(rng, da=2, db=2, dbp=2):
    src = gen.random_structure(rng, da, db)
    ch = gen.random_channel(rng, db, dbp)
    return src, InfoStructure(ch.extend(src.state, da), da, dbp), ch


def test_cq_structure_examples(rng):
    rho = gen.random_state(rng, 2)
    s = cq_structure_from_model(QuantumModel([rho]))
    assert np.abs(s.state - rho).max() == 0
    m = gen.random_quantum_model(rng, 2, 2)
    s = cq_structure_from_model(m)
    # index oracle: ⟨θ, b| ρ |θ', b'⟩ = δ_θθ' ρ_θ[b, b'] / 2
    for t in range(2):
        for tp in range(2):
            for b in range(2):
                for bp in range(2):
                    want = m.states[t][b, bp] / 2 if t == tp else 0
                    assert abs(s.state[2 * t + b, 2 * tp + bp] - want) < 1e-15
    assert np.abs(s.marginal("A") - np.eye(2) / 2).max() < 1e-15
    assert np.abs(s.marginal("B") - (m.states[0] + m.states[1]) / 2).max() < 1e-15


def test_cq_round_trip_and_rejection(rng):
    m = gen.random_quantum_model(rng, 3, 2)
    back = model_from_cq_structure(cq_structure_from_model(m))
    assert max(np.abs(a - b).max() for a, b in zip(back.states, m.states)) < 1e-10
    with pytest.raises(PreconditionError, match="off-block"):
        model_from_cq_structure(isotropic_structure(2, 0.5))
    skew = InfoStructure(np.kron(np.diag([0.3, 0.7]), np.eye(2) / 2), 2, 2)
    with pytest.raises(PreconditionError, match="uniform"):
        model_from_cq_structure(skew)


def test_cq_rotated_basis(rng):
    m = gen.random_quantum_model(rng, 2, 2)
    u = gen.random_unitary(rng, 2)
    s = cq_structure_from_model(m)
    k = np.kron(u, np.eye(2))
    rotated = InfoStructure(k @ s.state @ k.conj().T, 2, 2)
    back = model_from_cq_structure(rotated, basis=[u[:, 0], u[:, 1]])
    assert max(np.abs(a - b).max() for a, b in zip(back.states, m.states)) < 1e-10


def test_payoff_from_diagonal_operators():
    o = PayoffOperators([np.diag([1.0, 2.0]), np.diag([3.0, -1.0])])
    assert np.abs(payoff_from_operators(o).payoff - [[1, 3], [2, -1]]).max() == 0


def test_game_vs_decision_problem(rng):
    for _ in range(20):
        m = gen.random_quantum_model(rng, 2, 2)
        ops = [np.diag(rng.standard_normal(2)) for _ in range(int(rng.integers(2, 4)))]
        o = PayoffOperators(ops)
        s = cq_structure_from_model(m)
        dp = optimal_quantum_payoff(m, payoff_from_operators(o)).value
        assert abs(game_payoff(s, o).value - dp) < 1e-7


def test_game_payoff_examples(rng):
    s = product(rng, 2, 3)
    ops = [gen.random_hermitian(rng, 2) for _ in range(3)]
    rho_a = s.marginal("A")
    best = max(np.trace(o @ rho_a).real for o in ops)
    assert abs(game_payoff(s, PayoffOperators(ops)).value - best) < 1e-7
    assert abs(game_payoff(s, PayoffOperators([np.zeros((2, 2))] * 2)).value) < 1e-12
    with pytest.raises(ShapeError):
        game_payoff(s, PayoffOperators([np.eye(3)]))


def test_local_span_examples(rng):
    assert local_state_space_span(product(rng, 2, 2)).rank == 1
    assert local_state_space_span(InfoStructure(max_entangled(2), 2, 2)).rank == 4
    m = QuantumModel([proj(KET0), proj(KETP), np.eye(2) / 2])
    span = local_state_space_span(cq_structure_from_model(m))
    assert span.rank == 3
    # each span element lies in span{ρθ}
    basis = np.array([s.reshape(-1) for s in m.states]).T
    for w in span.spanning_ops:
        coef = np.linalg.lstsq(basis, w.reshape(-1), rcond=None)[0]
        assert np.abs(basis @ coef - w.reshape(-1)).max() < 1e-12
        assert np.linalg.eigvalsh(w)[0] > -1e-9


def test_reduced_tuple_examples(rng):
    s = gen.random_structure(rng, 2, 3)
    tup = reduced_tuple(s, OperatorFamily([np.eye(3)]))
    assert np.abs(tup.members[0] - s.marginal("A")).max() < 1e-14
    p = product(rng, 2, 2)
    rho_b = p.marginal("B")
    tup = reduced_tuple(p, Povm([proj(KET0), proj(KET1)]))
    for k, ket in enumerate((KET0, KET1)):
        prob = np.vdot(ket, rho_b @ ket).real
        assert np.abs(tup.members[k] - prob * p.marginal("A")).max() < 1e-14
    for _ in range(10):
        s = gen.random_structure(rng, 2, 2, rank=1)
        t = reduced_tuple(s, gen.random_povm(rng, 2, 3))
        assert np.abs(t.members.sum(axis=0) - s.marginal("A")).max() < 1e-9


def test_reduced_tuple_span_orthogonal_perturbation(rng):
    # B-span of a product state is span{ρ_B}; adding X ⟂ ρ_B to the tests changes nothing
    s = product(rng, 2, 2)
    rho_b = s.marginal("B")
    h = gen.random_hermitian(rng, 2)
    x = h - np.trace(h @ rho_b).real / np.trace(rho_b @ rho_b).real * rho_b
    p = gen.random_povm(rng, 2, 2)
    bumped = OperatorFamily([p.elements[0] + 0.01 * x, p.elements[1] - 0.01 * x])
    a, b = reduced_tuple(s, p).members, reduced_tuple(s, bumped).members
    assert np.abs(a - b).max() < 1e-9


def test_realizing_test_examples(rng):
    s = gen.random_structure(rng, 2, 2)
    p = gen.random_povm(rng, 2, 3)
    res = find_realizing_test(s, reduced_tuple(s, p))
    assert res.feasible and res.residual <= 1e-8
    res = find_realizing_test(s, OperatorTuple([s.marginal("A")]))
    assert res.feasible
    assert np.abs(res.povm.elements[0] - np.eye(2)).max() < 1e-7


def test_realizing_test_separation():
    rho_a = np.eye(2) / 2
    s = InfoStructure(np.kron(rho_a, np.eye(2) / 2), 2, 2)
    target = OperatorTuple([proj(KET0) / 2, proj(KET1) / 2])
    res = find_realizing_test(s, target)
    assert not res.feasible and res.gap > 0
    ops = res.witness.operators
    lhs = game_payoff(s, res.witness, tol=1e-10).dual_bound
    rhs = float(np.einsum("iab,iba->", target.members, ops).real)
    assert rhs - lhs > 0 and abs(rhs - lhs - res.gap) < 1e-8


def test_realizing_test_normalization_defect(rng):
    s = gen.random_structure(rng, 2, 2)
    res = find_realizing_test(s, OperatorTuple([np.eye(2)]))
    assert not res.feasible and res.gap > 0


def test_morphism_identity(rng):
    s = gen.random_structure(rng, 2, 2)
    res = construct_morphism(s, s)
    assert res.success and res.residual < 1e-9
    assert np.abs(res.morphism.dual(np.eye(2)) - np.eye(2)).max() < 1e-8


def test_morphism_planted(rng):
    for _ in range(10):
        src, tgt, ch = planted_pair(rng)
        res = construct_morphism(src, tgt)
        assert res.success and res.residual <= 1e-8
        assert res.morphism.trace_preserving
        assert np.abs(res.morphism.dual(np.eye(2)) - np.eye(2)).max() < 1e-8
        # agreement with the planted channel on the source's B span
        for w in local_state_space_span(src).spanning_ops:
            assert np.abs(res.morphism(w) - ch(w)).max() < 1e-6


def test_morphism_failure_product_source(rng):
    src = InfoStructure(np.kron(np.eye(2) / 2, np.eye(2) / 2), 2, 2)
    tgt = InfoStructure(max_entangled(2), 2, 2)
    res = construct_morphism(src, tgt)
    assert not res.success and res.gap > 0
    tv = game_payoff(tgt, res.witness, tol=1e-10).value
    sv = game_payoff(src, res.witness, tol=1e-10).dual_bound
    assert tv - sv > 0


def test_morphism_witnesses_reevaluate(rng):
    seen = 0
    while seen < 10:
        src, tgt = gen.random_structure(rng, 2, 2), gen.random_structure(rng, 2, 2)
        res = construct_morphism(src, tgt)
        if res.success:
            continue
        seen += 1
        tv = game_payoff(tgt, res.witness, tol=1e-10).value
        sv = game_payoff(src, res.witness, tol=1e-10).dual_bound
        assert tv - sv > 0


def test_abelian_target_never_beats_source_when_ordered(rng):
    # a morphism certificate must survive arbitrary sampled games
    for _ in range(10):
        src = gen.random_structure(rng, 2, 2)
        u = gen.random_unitary(rng, 2)
        probs = rng.dirichlet(np.ones(2), size=2)
        tgt = cq_structure_from_model(QuantumModel([u @ np.diag(p) @ u.conj().T for p in probs]))
        res = construct_morphism(src, tgt)
        for _ in range(20):
            ops = PayoffOperators([gen.random_hermitian(rng, 2) for _ in range(2)])
            t, s = game_payoff(tgt, ops).value, game_payoff(src, ops).dual_bound
            if res.success:
                assert t <= s + 1e-7


def test_check_sufficiency_examples(rng):
    s = gen.random_structure(rng, 2, 2)
    res = check_sufficiency(s, s)
    assert res.feasible and res.residual <= 1e-8
    src, tgt, _ = planted_pair(rng, 2, 2, 3)
    res = check_sufficiency(src, tgt)
    assert res.feasible and res.choi.dim_out == 3
    prod = InfoStructure(np.kron(np.eye(2) / 2, np.eye(2) / 2), 2, 2)
    corr = cq_structure_from_model(QuantumModel([proj(KET0), proj(KET1)]))
    res = check_sufficiency(prod, corr)
    assert not res.feasible
    ops = PayoffOperators([proj(KET0), proj(KET1)])
    assert game_payoff(corr, ops).value - game_payoff(prod, ops).dual_bound > 0.4


def test_check_sufficiency_planted_image(rng):
    for _ in range(5):
        src, tgt, _ = planted_pair(rng, 2, 2, 2)
        res = check_sufficiency(src, tgt)
        assert res.feasible
        op = superoperator_of_choi(res.choi)
        assert trace_norm(op.extend(src.state, 2) - tgt.state) <= 1e-8


def test_compose_examples(rng):
    x = gen.random_structure(rng, 2, 2)
    one = InfoStructure(np.ones((1, 1)), 1, 1)
    c = compose_structures(x, one)
    assert (c.dim_a, c.dim_b) == (2, 2) and np.abs(c.state - x.state).max() == 0
    y = gen.random_structure(rng, 2, 3)
    c = compose_structures(x, y)
    assert (c.dim_a, c.dim_b) == (4, 6)
    # (A X)(B Y) layout: tracing one pair of factors leaves the other structure
    t = c.state.reshape(2, 2, 2, 3, 2, 2, 2, 3)
    assert np.abs(np.einsum("axbycxdy->abcd", t).reshape(4, 4) - x.state).max() < 1e-14
    assert np.abs(np.einsum("axbyazbw->xyzw", t).reshape(6, 6) - y.state).max() < 1e-14


def test_compose_span_rank(rng):
    for _ in range(10):
        x = gen.random_structure(rng, 2, 2, rank=int(rng.integers(1, 5)))
        y = gen.random_structure(rng, 1 + int(rng.integers(1, 3)), 2, rank=int(rng.integers(1, 3)))
        rx = local_state_space_span(x).rank
        ry = local_state_space_span(y).rank
        assert local_state_space_span(compose_structures(x, y)).rank >= rx * ry


def test_isotropic_examples():
    for d in (2, 3):
        assert np.abs(isotropic_structure(d, 0).state - np.eye(d * d) / d**2).max() == 0
        assert np.abs(isotropic_structure(d, 1).state - max_entangled(d)).max() == 0
        pt = partial_transpose(isotropic_structure(d, 1 / (d + 1)).state, d, d)
        assert np.linalg.eigvalsh(pt)[0] >= -1e-10
        # just above the boundary the partial transpose is not PSD
        pt = partial_transpose(isotropic_structure(d, 1 / (d + 1) + 1e-3).state, d, d)
        assert np.linalg.eigvalsh(pt)[0] < 0
    with pytest.raises(ValueError):
        isotropic_structure(2, 1.5)


def test_completeness_examples():
    c = is_complete_structure(isotropic_structure(2, 0.5))
    assert c.complete and c.rank == 4 and c.fixes_only_identity
    c = is_complete_structure(isotropic_structure(2, 0.0))
    assert not c and c.rank == 1
    assert is_complete_structure(InfoStructure(max_entangled(2), 2, 2)).rank == 4


def test_composed_extension_reproduces_channel(rng):
    # planted models: compose with the isotropic ancilla, construct, restrict, extend
    d = 2
    omega = isotropic_structure(d, 1 / (d + 1))
    for _ in range(3):
        m = gen.random_quantum_model(rng, 2, 2)
        ch = gen.random_channel(rng, 2, 2)
        out = QuantumModel([ch(s) for s in m.states])
        src = compose_structures(omega, cq_structure_from_model(m))
        tgt = compose_structures(omega, cq_structure_from_model(out))
        res = construct_morphism(src, tgt)
        assert res.success
        ell = extract_b_morphism(res.morphism, d)
        choi = teleportation_extension(ell, input_states=list(m.states))
        for r, s in zip(m.states, out.states):
            assert trace_norm(apply_choi(choi, r) - s) < 1e-6


def test_extract_b_morphism_product(rng):
    ch = gen.random_channel(rng, 2, 2)
    composed = Superoperator.from_function(lambda e: ch.extend(e, 2), 4, 4)
    ell = extract_b_morphism(composed, 2)
    assert np.abs(ell.matrix - ch.matrix).max() < 1e-12
