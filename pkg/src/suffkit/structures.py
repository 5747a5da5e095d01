"""
Bipartite information structures.

A structure is a state ``ρ_AB``. The ``A`` side holds the payoff-relevant
system, the ``B`` side the observations: a player measures ``B`` with a
POVM ``{P^i}`` and collects ``Tr[(O^i ⊗ P^i) ρ_AB]``. Everything the ``B``
side can reveal about ``A`` is captured by the reduced tuple
``ρ^i_{A|P} = Tr_B[(I ⊗ P^i) ρ_AB]``.

Morphisms between structures are built from an IC frame on the target's
``B`` side; when the realizing POVM does not exist the separating functional
becomes a game that the target wins and the source cannot.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ._config import TOL, default_solver_tol
from .channels import ChannelSearch, ChoiMatrix, Superoperator, choi_feasibility, max_entangled
from .classical import DecisionProblem
from .exceptions import CapacityError, NumericalError, PreconditionError, ShapeError
from .frames import build_ic_povm
from .linalg import (
    check_density,
    check_hermitian,
    hmat,
    operator_rank,
    partial_trace,
    permute_subsystems,
    tensor_product,
    trace_norm,
)
from .quantum import (
    OperatorFamily,
    PayoffSolution,
    Povm,
    QuantumModel,
    fit_povm_to_statistics,
    optimal_povm,
)

__all__ = [
    "InfoStructure",
    "PayoffOperators",
    "OperatorTuple",
    "StateSpaceSpan",
    "RealizingTest",
    "MorphismResult",
    "Completeness",
    "cq_structure_from_model",
    "model_from_cq_structure",
    "payoff_from_operators",
    "game_payoff",
    "local_state_space_span",
    "reduced_tuple",
    "find_realizing_test",
    "construct_morphism",
    "extract_b_morphism",
    "check_sufficiency",
    "compose_structures",
    "isotropic_structure",
    "is_complete_structure",
]


@dataclass(frozen=True, init=False)
class InfoStructure:
    """Joint density matrix on ``C^{dim_a} ⊗ C^{dim_b}``."""

    state: np.ndarray
    dim_a: int
    dim_b: int

    def __init__(self, state, dim_a, dim_b):
        dim_a, dim_b = int(dim_a), int(dim_b)
        rho = check_density(state, name="joint state")
        if rho.shape[0] != dim_a * dim_b:
            raise ShapeError(f"state of dim {rho.shape[0]} for {dim_a}x{dim_b}")
        rho.setflags(write=False)
        object.__setattr__(self, "state", rho)
        object.__setattr__(self, "dim_a", dim_a)
        object.__setattr__(self, "dim_b", dim_b)

    def marginal(self, side="A") -> np.ndarray:
        traced = "B" if side == "A" else "A"
        return partial_trace(self.state, self.dim_a, self.dim_b, traced)


def _herm_stack(ops, name):
    ms = [check_hermitian(o, name=f"{name} {k}") for k, o in enumerate(ops)]
    if not ms:
        raise ShapeError(f"empty {name} list")
    if any(m.shape != ms[0].shape for m in ms):
        raise ShapeError(f"{name}s must share one dimension")
    out = np.array(ms)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, init=False)
class PayoffOperators:
    """Self-adjoint payoff operators ``O^i`` on the ``A`` side."""

    operators: np.ndarray

    def __init__(self, operators):
        object.__setattr__(self, "operators", _herm_stack(operators, "payoff operator"))

    @property
    def decision_size(self) -> int:
        return self.operators.shape[0]


@dataclass(frozen=True, init=False)
class OperatorTuple:
    """Operators ``ρ^i`` on the ``A`` side, one per outcome."""

    members: np.ndarray

    def __init__(self, members):
        object.__setattr__(self, "members", _herm_stack(members, "tuple member"))

    def __len__(self):
        return self.members.shape[0]


@dataclass(frozen=True)
class StateSpaceSpan:
    """Unnormalized conditional states spanning a local state space."""

    spanning_ops: np.ndarray
    rank: int


@dataclass(frozen=True)
class RealizingTest:
    """
    Outcome of :func:`find_realizing_test`.

    ``witness`` (when infeasible) is a game whose certified source optimum
    lies ``gap`` below what the target tuple scores.
    """

    feasible: bool
    povm: Optional[Povm] = None
    residual: float = 0.0
    witness: Optional[PayoffOperators] = None
    gap: Optional[float] = None


@dataclass(frozen=True)
class MorphismResult:
    """
    Outcome of :func:`construct_morphism`.

    On success ``morphism`` satisfies ``(id ⊗ ℒ)(ρ) = σ`` within
    ``residual`` and ``ℒ*(I) = I``. On failure ``witness`` is a game the
    target wins by at least ``gap``.
    """

    success: bool
    morphism: Optional[Superoperator] = None
    realizing_povm: Optional[Povm] = None
    residual: float = float("nan")
    witness: Optional[PayoffOperators] = None
    gap: Optional[float] = None


@dataclass(frozen=True)
class Completeness:
    """Local-span completeness of a structure.

    ``complete`` is the full-rank condition on the ``B`` span. A full span
    also forces any trace-preserving map fixing the structure to be the
    identity on ``B``, reported as ``fixes_only_identity``.
    """

    complete: bool
    rank: int
    fixes_only_identity: bool

    def __bool__(self):
        return self.complete


def _frame(d):
    if d == 1:
        one = np.ones((1, 1, 1), dtype=complex)
        return one, one
    f = build_ic_povm(d)
    return np.array(f.elements), np.array(f.duals)


def cq_structure_from_model(model: QuantumModel) -> InfoStructure:
    """``(1/|Θ|) Σ_θ |θ⟩⟨θ| ⊗ ρ_θ``."""
    n, d = model.n_theta, model.dim
    if n * d > TOL.max_dim:
        raise CapacityError(f"structure dimension {n * d} exceeds cap {TOL.max_dim}")
    rho = np.zeros((n * d, n * d), dtype=complex)
    for t, s in enumerate(model.states):
        rho[t * d : (t + 1) * d, t * d : (t + 1) * d] = s / n
    return InfoStructure(rho, n, d)


def _a_basis(dim_a, basis):
    if basis is None:
        return np.eye(dim_a, dtype=complex)
    u = np.array(basis, dtype=complex).T
    if u.shape != (dim_a, dim_a) or np.abs(u.conj().T @ u - np.eye(dim_a)).max() > 1e-10:
        raise PreconditionError("A basis must be an orthonormal list of dim_a vectors")
    return u


def model_from_cq_structure(s: InfoStructure, basis=None, tol=TOL.choi) -> QuantumModel:
    """
    Recover ``ρ_θ`` from a classical-quantum structure.

    Parameters
    ----------
    basis : sequence of vectors, optional
        Orthonormal ``A`` basis ``|θ⟩``; the computational basis by default.

    Raises
    ------
    PreconditionError
        If off-block mass exceeds ``tol`` or block weights are not uniform.
    """
    u = _a_basis(s.dim_a, basis)
    k = np.kron(u, np.eye(s.dim_b))
    rho = k.conj().T @ s.state @ k
    n, d = s.dim_a, s.dim_b
    blocks = rho.reshape(n, d, n, d)
    off = blocks.copy()
    for t in range(n):
        off[t, :, t, :] = 0
    mass = np.abs(off).max()
    if mass > tol:
        raise PreconditionError(f"structure is not classical-quantum (off-block mass {mass:.3e})")
    weights = np.array([np.trace(blocks[t, :, t, :]).real for t in range(n)])
    if np.abs(weights - 1 / n).max() > tol:
        raise PreconditionError(f"block weights {weights} are not uniform")
    return QuantumModel([blocks[t, :, t, :] * n for t in range(n)])


def payoff_from_operators(o: PayoffOperators, basis=None) -> DecisionProblem:
    """``ℓ(θ, i) = ⟨θ|O^i|θ⟩``."""
    dim_a = o.operators.shape[1]
    u = _a_basis(dim_a, basis)
    return DecisionProblem(np.einsum("at,iab,bt->ti", u.conj(), o.operators, u).real)


def _payoff_ops(s, o):
    ops = o.operators if isinstance(o, PayoffOperators) else np.asarray(o)
    if ops.shape[1:] != (s.dim_a, s.dim_a):
        raise ShapeError(f"payoff operators of shape {ops.shape[1:]} for dim_a={s.dim_a}")
    t = s.state.reshape(s.dim_a, s.dim_b, s.dim_a, s.dim_b)
    # R^i = Tr_A[(O^i ⊗ I) ρ]
    return np.einsum("iab,bcad->icd", ops, t)


def game_payoff(s: InfoStructure, o: PayoffOperators, tol=None, method="auto") -> PayoffSolution:
    """Optimal ``max_P Σ_i Tr[(O^i ⊗ P^i) ρ_AB]`` with its dual certificate."""
    return optimal_povm(list(_payoff_ops(s, o)), tol, method)


def local_state_space_span(s: InfoStructure, side="B") -> StateSpaceSpan:
    """
    Conditional operators spanning the local state space on ``side``.

    For ``side="B"`` these are ``Tr_A[(F^j ⊗ I) ρ]`` for the IC frame on
    ``A``; by linearity their span contains every conditional state.
    """
    t = s.state.reshape(s.dim_a, s.dim_b, s.dim_a, s.dim_b)
    if side == "B":
        f, _ = _frame(s.dim_a)
        ops = np.einsum("jab,bcad->jcd", f, t)
    elif side == "A":
        f, _ = _frame(s.dim_b)
        ops = np.einsum("jcd,adbc->jab", f, t)
    else:
        raise ValueError(f"side must be 'A' or 'B', got {side!r}")
    ops = (ops + ops.conj().transpose(0, 2, 1)) / 2
    ops.setflags(write=False)
    return StateSpaceSpan(ops, operator_rank(ops))


def reduced_tuple(s: InfoStructure, family) -> OperatorTuple:
    """``ρ^i = Tr_B[(I ⊗ M^i) ρ_AB]`` for a family on ``B``."""
    ms = family.members if isinstance(family, OperatorFamily) else (
        family.elements if isinstance(family, Povm) else np.asarray(family)
    )
    if ms.shape[1:] != (s.dim_b, s.dim_b):
        raise ShapeError(f"family of dim {ms.shape[1]} for dim_b={s.dim_b}")
    t = s.state.reshape(s.dim_a, s.dim_b, s.dim_a, s.dim_b)
    out = np.einsum("icd,adbc->iab", ms, t)
    return OperatorTuple(list((out + out.conj().transpose(0, 2, 1)) / 2))


def _certified_gap(s, ops, target_value, tol):
    sol = game_payoff(s, PayoffOperators(ops), tol=min(tol, 1e-9))
    return target_value - sol.dual_bound


def find_realizing_test(s: InfoStructure, target: OperatorTuple, tol=None) -> RealizingTest:
    """
    Search for a POVM on ``B`` whose reduced tuple equals ``target``.

    Returns
    -------
    RealizingTest
        On failure the witness game ``T̃`` satisfies
        ``max_P Σ_i Tr[ρ^i_{A|P} T̃^i] = Σ_i Tr[target_i T̃^i] − gap`` up to the
        certified dual bound, with ``gap > 0``.
    """
    tol = default_solver_tol() if tol is None else float(tol)
    members = target.members
    if members.shape[1:] != (s.dim_a, s.dim_a):
        raise ShapeError(f"target members of dim {members.shape[1]} for dim_a={s.dim_a}")
    rho_a = s.marginal("A")
    defect = members.sum(axis=0) - rho_a
    if np.abs(defect).max() > tol:
        ops = np.array([defect] * len(members))
        tv = float(np.einsum("iab,iba->", members, ops).real)
        gap = _certified_gap(s, ops, tv, tol)
        return RealizingTest(False, residual=float(np.abs(defect).max()),
                             witness=PayoffOperators(list(ops)), gap=float(gap))

    f, duals = _frame(s.dim_a)
    span = local_state_space_span(s, "B").spanning_ops
    stats = np.einsum("iab,jba->ij", members, f).real
    fit = fit_povm_to_statistics(list(span), stats, tol=tol * 1e-2)
    if fit.feasible:
        got = reduced_tuple(s, fit.povm).members
        resid = max(trace_norm(g - m) for g, m in zip(got, members))
        if resid > tol:
            raise NumericalError(f"realizing POVM misses the tuple by {resid:.3e}", residual=resid)
        return RealizingTest(True, povm=fit.povm, residual=float(resid))
    ops = np.einsum("ij,jab->iab", fit.coefficients, f)
    tv = float(np.sum(fit.coefficients * stats))
    gap = _certified_gap(s, ops, tv, tol)
    if not gap > 0:
        raise NumericalError("separating game did not re-evaluate positive", residual=fit.residual)
    return RealizingTest(False, residual=fit.residual, witness=PayoffOperators(list(ops)), gap=float(gap))


def _failure(source, target, tup, test, tol):
    ops = test.witness.operators
    # the target attains at least the tuple value with the test itself
    tv = float(np.einsum("iab,iba->", tup.members, ops).real)
    best = game_payoff(target, test.witness, tol=min(tol, 1e-9)).value
    src = game_payoff(source, test.witness, tol=min(tol, 1e-9)).dual_bound
    return MorphismResult(False, witness=test.witness, gap=float(max(tv, best) - src))


def _screen_tests(target, n_games, seed):
    """Hard measurements on ``B'``: a spectral basis of the conditionals and game optima."""
    rng = np.random.default_rng(seed)
    span = local_state_space_span(target, "B").spanning_ops
    mix = np.tensordot(rng.standard_normal(len(span)), span, axes=1)
    _, v = np.linalg.eigh((mix + mix.conj().T) / 2)
    yield np.array([np.outer(v[:, k], v[:, k].conj()) for k in range(target.dim_b)])
    for _ in range(n_games):
        k = int(rng.integers(2, 4))
        g = rng.standard_normal((k, target.dim_a, target.dim_a)) + 1j * rng.standard_normal((k, target.dim_a, target.dim_a))
        game = PayoffOperators(list((g + g.conj().transpose(0, 2, 1)) / 2))
        yield np.array(game_payoff(target, game, tol=1e-9).povm.elements)


def construct_morphism(source: InfoStructure, target: InfoStructure, tol=None, screen=8, seed=0) -> MorphismResult:
    """
    Statistical morphism ``ℒ`` on ``B`` with ``(id ⊗ ℒ)(ρ) = σ``.

    With an IC frame ``(F^i, θ^i)`` on the target's ``B'``, the target tuple
    ``Tr_{B'}[(I ⊗ F^i) σ]`` is realized on the source by a POVM ``F̃``, and
    ``ℒ(T) = Σ_i Tr[T F̃^i] θ^i``. Its dual sends ``F^i`` to ``F̃^i``.

    Realizing one tuple is necessary but not sufficient for the ordering, so
    the tuples of further target measurements are also checked: a spectral
    basis of the target conditionals (decisive when they commute) and the
    optimal measurements of ``screen`` seeded random games. Any tuple the
    source cannot realize yields the failure witness.

    Returns
    -------
    MorphismResult
        On failure, ``witness`` is a game on ``A`` with certified gap
        ``$(σ, O) − $(ρ, O) >= gap > 0``.
    """
    tol = default_solver_tol() if tol is None else float(tol)
    if source.dim_a != target.dim_a:
        raise ShapeError(f"A dimensions differ: {source.dim_a} vs {target.dim_a}")
    f, duals = _frame(target.dim_b)
    tup = reduced_tuple(target, f)
    test = find_realizing_test(source, tup, tol)
    if not test.feasible:
        return _failure(source, target, tup, test, tol)

    ft = test.povm.elements
    db, dbp = source.dim_b, target.dim_b
    mat = sum(np.outer(th.reshape(-1), g.T.reshape(-1)) for th, g in zip(duals, ft))
    morphism = Superoperator(mat, db, dbp)
    image = morphism.extend(source.state, source.dim_a)
    resid = trace_norm(image - target.state)
    if resid > max(tol, 1e-12):
        raise NumericalError(f"morphism residual {resid:.3e} exceeds tol", residual=resid)

    for meas in _screen_tests(target, int(screen), seed):
        extra = reduced_tuple(target, meas)
        check = find_realizing_test(source, extra, tol)
        if not check.feasible:
            return _failure(source, target, extra, check, tol)
    return MorphismResult(True, morphism, test.povm, float(resid))


def extract_b_morphism(composed: Superoperator, dim_y) -> Superoperator:
    """
    Restrict a morphism on ``Y ⊗ B`` to ``B`` by feeding ``I/d_Y ⊗ T`` and
    tracing ``Y`` out of the image.
    """
    dy = int(dim_y)
    db = composed.dim_in // dy
    dbp = composed.dim_out // dy
    if db * dy != composed.dim_in or dbp * dy != composed.dim_out:
        raise ShapeError("composed morphism does not factor through dim_y")

    def fn(t):
        out = composed(np.kron(np.eye(dy) / dy, t))
        return partial_trace(out, dy, dbp, "A")

    return Superoperator.from_function(fn, db, dbp)


def check_sufficiency(source: InfoStructure, target: InfoStructure, tol=None) -> ChannelSearch:
    """
    CPTP ``ℰ`` on ``B`` with ``(id ⊗ ℰ)(ρ_AB) = σ_AB'``.

    Infeasibility is certified when the linear data are inconsistent or the
    barrier bound on the smallest Choi eigenvalue is negative.
    """
    tol = default_solver_tol() if tol is None else float(tol)
    if source.dim_a != target.dim_a:
        raise ShapeError(f"A dimensions differ: {source.dim_a} vs {target.dim_a}")
    di, do = source.dim_b, target.dim_b
    out = choi_feasibility([(source.state, target.state, source.dim_a)], di, do, tol)
    if out.feasible:
        return ChannelSearch(True, ChoiMatrix(hmat(out.x, di * do), di, do), out.residual)
    if not (out.affine_inconsistent or out.upper_bound < 0):
        raise NumericalError(
            f"CPTP search stalled at residual {out.residual:.3e} without a verdict",
            residual=out.residual,
        )
    return ChannelSearch(False, residual=out.residual, upper_bound=float(out.upper_bound),
                         affine_inconsistent=out.affine_inconsistent)


def compose_structures(x: InfoStructure, y: InfoStructure) -> InfoStructure:
    """``ρ_AB ⊗ ω_XY`` regrouped as ``(A ⊗ X) ⊗ (B ⊗ Y)``."""
    joint = tensor_product(x.state, y.state)
    dims = [x.dim_a, x.dim_b, y.dim_a, y.dim_b]
    state = permute_subsystems(joint, dims, [0, 2, 1, 3])
    return InfoStructure(state, x.dim_a * y.dim_a, x.dim_b * y.dim_b)


def isotropic_structure(d, p) -> InfoStructure:
    """``p Ψ⁺ + (1 − p) I/d²`` on ``C^d ⊗ C^d``."""
    p = float(p)
    if not 0 <= p <= 1:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    d = int(d)
    return InfoStructure(p * max_entangled(d) + (1 - p) * np.eye(d * d) / (d * d), d, d)


def is_complete_structure(s: InfoStructure) -> Completeness:
    rank = local_state_space_span(s, "B").rank
    full = rank == s.dim_b**2
    return Completeness(full, rank, full)
