"""
Quantum statistical models, POVMs and payoff optimization.

The optimal payoff of a decision problem on a quantum model is a
semidefinite program over POVMs. Two outcomes have a closed form (positive
part of ``R¹ − R²``); larger decision sets go through a barrier method that
returns a primal POVM together with a dual matrix ``Y ⪰ R^i``, so every
reported value carries its own optimality gap.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Optional, Sequence

import numpy as np

from ._config import TOL, default_solver_tol
from ._sdp import Block, povm_dual_barrier, psd_feasibility
from .classical import ClassicalModel, DecisionProblem
from .exceptions import NumericalError, PreconditionError, ShapeError, ValidationError
from .linalg import (
    check_density,
    check_hermitian,
    commutator_norm,
    hmat,
    hvec,
    operator_rank,
    simultaneous_diagonalization,
    tensor_product,
)

__all__ = [
    "QuantumModel",
    "Povm",
    "OperatorFamily",
    "PayoffSolution",
    "AbelianCheck",
    "PovmFit",
    "payoff_operators",
    "optimal_povm",
    "optimal_quantum_payoff",
    "is_abelian",
    "abelian_to_classical",
    "classical_to_quantum",
    "compose_models",
    "is_complete_model",
    "fit_povm_to_statistics",
]


def _freeze(ms):
    out = np.array(ms, dtype=complex)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, init=False)
class QuantumModel:
    """Density matrices ``states[θ]`` sharing one dimension."""

    states: np.ndarray
    theta_labels: tuple

    def __init__(self, states, theta_labels=None):
        states = [check_density(s, name=f"state {k}") for k, s in enumerate(states)]
        if not states:
            raise ShapeError("a model needs at least one state")
        d = states[0].shape[0]
        if any(s.shape != (d, d) for s in states):
            raise ShapeError("all states must share one dimension")
        if theta_labels is None:
            theta_labels = tuple(str(k) for k in range(len(states)))
        theta_labels = tuple(str(x) for x in theta_labels)
        if len(theta_labels) != len(states):
            raise ShapeError(f"{len(theta_labels)} labels for {len(states)} states")
        object.__setattr__(self, "states", _freeze(states))
        object.__setattr__(self, "theta_labels", theta_labels)

    @property
    def dim(self) -> int:
        return self.states.shape[1]

    @property
    def n_theta(self) -> int:
        return self.states.shape[0]


@dataclass(frozen=True, init=False)
class Povm:
    """Positive operators ``elements[i]`` summing to the identity."""

    elements: np.ndarray

    def __init__(self, elements):
        els = [check_hermitian(p, tol=1e-10, name=f"element {k}") for k, p in enumerate(elements)]
        if not els:
            raise ShapeError("a POVM needs at least one element")
        d = els[0].shape[0]
        if any(p.shape != (d, d) for p in els):
            raise ShapeError("POVM elements must share one dimension")
        lo = min(np.linalg.eigvalsh(p)[0] for p in els)
        if lo < -TOL.povm_psd:
            raise ValidationError(f"POVM element has eigenvalue {lo:.3e}")
        dev = np.abs(sum(els) - np.eye(d)).max()
        if dev > TOL.povm_sum:
            raise ValidationError(f"POVM elements sum to identity only within {dev:.3e}")
        object.__setattr__(self, "elements", _freeze(els))

    @property
    def dim(self) -> int:
        return self.elements.shape[1]

    def __len__(self):
        return self.elements.shape[0]

    def probabilities(self, rho) -> np.ndarray:
        """Outcome distribution ``Tr[P^i ρ]``."""
        return np.einsum("iab,ba->i", self.elements, np.asarray(rho)).real


@dataclass(frozen=True, init=False)
class OperatorFamily:
    """Hermitian operators with no positivity requirement."""

    members: np.ndarray

    def __init__(self, members):
        ms = [check_hermitian(m, name=f"member {k}") for k, m in enumerate(members)]
        if not ms:
            raise ShapeError("empty operator family")
        d = ms[0].shape[0]
        if any(m.shape != (d, d) for m in ms):
            raise ShapeError("family members must share one dimension")
        object.__setattr__(self, "members", _freeze(ms))

    @property
    def dim(self) -> int:
        return self.members.shape[1]

    def __len__(self):
        return self.members.shape[0]


@dataclass(frozen=True)
class PayoffSolution:
    """
    Primal POVM with its value and a dual certificate.

    ``dual ⪰ R^i`` for every ``i``, hence ``dual_bound = Tr dual`` bounds the
    optimum from above; ``converged`` is ``gap <= tol``.
    """

    value: float
    povm: Povm
    dual_bound: float
    gap: float
    dual: np.ndarray
    converged: bool = True


@dataclass(frozen=True)
class AbelianCheck:
    abelian: bool
    worst_commutator: float

    def __bool__(self):
        return self.abelian


def payoff_operators(model: QuantumModel, problem: DecisionProblem):
    """``R^i = (1/|Θ|) Σ_θ ℓ(θ,i) ρ_θ`` as a ``(|X|, d, d)`` array."""
    if problem.payoff.shape[0] != model.n_theta:
        raise ShapeError(
            f"payoff has {problem.payoff.shape[0]} rows, model has {model.n_theta} states"
        )
    return np.einsum("ti,tab->iab", problem.payoff, model.states) / model.n_theta


def _binary(rs):
    r1, r2 = rs
    w, u = np.linalg.eigh(r1 - r2)
    pos = w > 0
    p1 = u[:, pos] @ u[:, pos].conj().T
    d = r1.shape[0]
    p2 = np.eye(d) - p1
    dual = r2 + (u * np.clip(w, 0, None)) @ u.conj().T
    value = float(np.trace(r2).real + w[pos].sum())
    return PayoffSolution(value, Povm([p1, p2]), float(np.trace(dual).real), 0.0, dual)


def optimal_povm(rs, tol=None, method="auto") -> PayoffSolution:
    """
    Maximize ``Σ_i Tr[R^i P^i]`` over POVMs.

    Parameters
    ----------
    rs : sequence of Hermitian matrices
    tol : float, optional
        Target duality gap.
    method : {"auto", "iterative"}
        ``"auto"`` uses the closed form for one or two outcomes.
    """
    tol = default_solver_tol() if tol is None else float(tol)
    rs = [check_hermitian(r, tol=1e-10, name=f"R[{k}]") for k, r in enumerate(rs)]
    if not rs:
        raise ShapeError("need at least one payoff operator")
    d = rs[0].shape[0]
    if method not in ("auto", "iterative"):
        raise ValueError(f"unknown method {method!r}")
    if len(rs) == 1:
        tr = float(np.trace(rs[0]).real)
        return PayoffSolution(tr, Povm([np.eye(d)]), tr, 0.0, rs[0] + 0 * np.eye(d))
    if len(rs) == 2 and method == "auto":
        return _binary(rs)
    opt = povm_dual_barrier(rs, tol=tol)
    gap = max(opt.dual_bound - opt.value, 0.0)
    return PayoffSolution(opt.value, Povm(opt.povm), opt.dual_bound, gap, opt.dual, gap <= tol)


def optimal_quantum_payoff(model: QuantumModel, problem: DecisionProblem, tol=None, method="auto"):
    """
    Optimal expected payoff ``max_P (1/|Θ|) Σ_{θ,i} ℓ(θ,i) Tr[ρ_θ P^i]``.

    Returns
    -------
    PayoffSolution
        When the iteration cap is hit before the gap closes, the best pair is
        returned with ``converged=False``.

    Examples
    --------
    >>> m = QuantumModel([np.diag([1.0, 0.0]), np.full((2, 2), 0.5)])
    >>> round(optimal_quantum_payoff(m, DecisionProblem(np.eye(2))).value, 6)
    0.853553
    """
    return optimal_povm(payoff_operators(model, problem), tol, method)


def is_abelian(model: QuantumModel) -> AbelianCheck:
    """Whether all states pairwise commute, with the worst commutator max-norm."""
    worst = 0.0
    for a, b in combinations(model.states, 2):
        worst = max(worst, commutator_norm(a, b))
    return AbelianCheck(worst <= TOL.commutator, worst)


def abelian_to_classical(model: QuantumModel) -> ClassicalModel:
    """
    Classical model of the eigenvalue distributions in a common eigenbasis.

    Raises
    ------
    PreconditionError
        If the states do not commute.
    """
    check = is_abelian(model)
    if not check:
        raise PreconditionError(
            f"model is not abelian (commutator norm {check.worst_commutator:.3e})"
        )
    u = simultaneous_diagonalization(list(model.states))
    p = np.einsum("ak,tab,bk->tk", u.conj(), model.states, u).real
    p = np.clip(p, 0, None)
    p /= p.sum(axis=1, keepdims=True)
    return ClassicalModel(p, model.theta_labels)


def classical_to_quantum(model: ClassicalModel) -> QuantumModel:
    """Diagonal embedding ``ρ_θ = diag(p_θ)``."""
    return QuantumModel([np.diag(p).astype(complex) for p in model.probs], model.theta_labels)


def compose_models(t: QuantumModel, r: QuantumModel) -> QuantumModel:
    """
    Product model over ``Ξ × Θ`` with states ``τ_ξ ⊗ ρ_θ``.

    The parameter index is ``ξ * |Θ| + θ`` (``ξ`` major) and labels read
    ``"ξ,θ"``.
    """
    states = []
    labels = []
    for xl, tau in zip(t.theta_labels, t.states):
        for tl, rho in zip(r.theta_labels, r.states):
            states.append(tensor_product(tau, rho))
            labels.append(f"{xl},{tl}")
    return QuantumModel(states, labels)


def is_complete_model(t: QuantumModel):
    """
    Whether the states span all operators on the space.

    Returns
    -------
    complete : bool
    rank : int
        Dimension of the real span of the states.
    """
    rank = operator_rank(t.states)
    return rank == t.dim**2, rank


@dataclass(frozen=True)
class PovmFit:
    """
    Result of :func:`fit_povm_to_statistics`.

    On success ``povm`` reproduces the targets within ``residual``. Otherwise
    ``separator`` holds ``T̃^i = Σ_k coefficients[i,k] ω_k``: every POVM
    scores at most ``bound`` on ``Σ_i Tr[T̃^i P^i]`` while the targets score
    ``bound + gap``.
    """

    feasible: bool
    povm: Optional[Povm] = None
    residual: float = 0.0
    separator: Optional[OperatorFamily] = None
    coefficients: Optional[np.ndarray] = None
    bound: Optional[float] = None
    gap: Optional[float] = None


def _fit_problem(omegas, targets):
    n, k = targets.shape
    d = omegas.shape[1]
    d2 = d * d
    nvar = n * d2
    rows = []
    rhs = []
    eye_v = hvec(np.eye(d))
    for a in range(d2):
        r = np.zeros(nvar)
        r[a::d2] = 1
        rows.append(r)
        rhs.append(eye_v[a])
    ov = hvec(omegas)
    for i in range(n):
        for j in range(k):
            r = np.zeros(nvar)
            r[i * d2 : (i + 1) * d2] = ov[j]
            rows.append(r)
            rhs.append(targets[i, j])
    blocks = []
    for i in range(n):
        sel = np.zeros((d2, nvar))
        sel[:, i * d2 : (i + 1) * d2] = np.eye(d2)
        blocks.append(Block(sel, np.zeros(d2), d))
    return np.array(rows), np.array(rhs), blocks


def _separator_from_duals(nu, n, d, k):
    d2 = d * d
    c = nu[d2:].reshape(n, k)
    return -c


def fit_povm_to_statistics(span_states, targets, tol=None) -> PovmFit:
    """
    Find a POVM with prescribed statistics ``Tr[P^i ω_k] = targets[i, k]``.

    Parameters
    ----------
    span_states : sequence of Hermitian matrices
        The ``ω_k``; they need not be normalized or independent.
    targets : array_like, shape (|X|, len(span_states))
    tol : float, optional
        Accepted max-abs statistics mismatch.

    Returns
    -------
    PovmFit
        A feasible POVM, or a separating family whose gap has been verified
        against the certified POVM optimum.

    Raises
    ------
    NumericalError
        When the solver neither reaches ``tol`` nor produces a separator
        with positive gap.
    """
    tol = default_solver_tol() if tol is None else float(tol)
    omegas = np.array([check_hermitian(w, name=f"span state {j}") for j, w in enumerate(span_states)])
    t = np.asarray(targets, dtype=float)
    if t.ndim != 2 or t.shape[1] != omegas.shape[0]:
        raise ShapeError(f"targets of shape {t.shape} do not match {omegas.shape[0]} span states")
    if not np.all(np.isfinite(t)):
        raise ValidationError("targets have non-finite entries")
    n, k = t.shape
    d = omegas.shape[1]
    d2 = d * d
    A, b, blocks = _fit_problem(omegas, t)

    def repair(x, s):
        ps = x.reshape(n, d2)
        ps = np.array([hvec(p) for p in _renormalize(ps, d, s)])
        return ps.ravel()

    def residual(x):
        ps = x.reshape(n, d2)
        return float(np.abs(ps @ hvec(omegas).T - t).max())

    out = psd_feasibility(A, b, blocks, repair, residual, tol=tol)
    if out.feasible:
        els = [hmat(v, d) for v in out.x.reshape(n, d2)]
        return PovmFit(True, Povm(els), out.residual)

    coeffs = _separator_from_duals(out.nu, n, d, k)
    scale = np.abs(coeffs).max()
    if scale == 0 or not np.isfinite(scale):
        raise NumericalError("fit failed without a usable separator", residual=out.residual)
    coeffs = coeffs / scale
    tt = np.einsum("ik,kab->iab", coeffs, omegas)
    opt = optimal_povm(list(tt), tol=min(tol, 1e-9))
    target_value = float(np.sum(coeffs * t))
    gap = target_value - opt.dual_bound
    if not gap > 0:
        raise NumericalError(
            f"fit stalled at residual {out.residual:.3e} with no certified separator",
            residual=out.residual,
        )
    return PovmFit(
        False,
        residual=out.residual,
        separator=OperatorFamily(list(tt)),
        coefficients=coeffs,
        bound=float(opt.dual_bound),
        gap=float(gap),
    )


def _renormalize(ps, d, s):
    n = ps.shape[0]
    mats = [hmat(v, d) for v in ps]
    if s < 0:
        mats = [(m - s * np.eye(d)) / (1 - n * s) for m in mats]
    tot = sum(mats)
    w, u = np.linalg.eigh((tot + tot.conj().T) / 2)
    k = (u / np.sqrt(np.clip(w, 1e-300, None))) @ u.conj().T
    out = []
    for m in mats:
        q = k @ m @ k
        out.append((q + q.conj().T) / 2)
    return out
