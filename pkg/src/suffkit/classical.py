"""
Classical statistical models and their comparison.

A model is a stack of probability vectors ``probs[θ, δ]``; a decision problem
is a payoff table ``payoff[θ, i]``. Sufficiency of ``e`` for ``f`` means a
column-stochastic ``M`` with ``M p_θ = q_θ`` for every ``θ``; it is decided
exactly by a phase-1 simplex. When no such ``M`` exists, the Farkas vector of
the linear program is turned into a decision problem on which ``f`` beats
``e``.

Examples
--------
>>> e = ClassicalModel([[0.75, 0.25], [0.25, 0.75]])
>>> value, rule = optimal_expected_payoff(e, DecisionProblem(np.eye(2)))
>>> round(value, 6), rule.tolist()
(0.75, [0, 1])
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from ._config import TOL, default_solver_tol
from ._simplex import phase1
from .exceptions import (
    CertificateInvalidError,
    PreconditionError,
    ShapeError,
    ValidationError,
)

__all__ = [
    "ClassicalModel",
    "DecisionProblem",
    "RandomizedDecisionFunction",
    "TransitionMatrix",
    "FarkasCertificate",
    "TransitionSearch",
    "SufficiencyVerdict",
    "payoff_vector",
    "optimal_expected_payoff",
    "find_transition_matrix",
    "witness_from_certificate",
    "check_ordering",
    "garble",
]


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def _labels(labels, n):
    if labels is None:
        return tuple(str(k) for k in range(n))
    labels = tuple(str(x) for x in labels)
    if len(labels) != n:
        raise ShapeError(f"{len(labels)} labels for {n} parameters")
    return labels


@dataclass(frozen=True, init=False)
class ClassicalModel:
    """
    Finite family of probability vectors indexed by ``Θ``.

    Entries in ``[-1e-12, 0)`` are clamped to zero and the affected row is
    renormalized; anything further from the simplex is rejected.
    """

    probs: np.ndarray
    theta_labels: tuple

    def __init__(self, probs, theta_labels=None):
        p = np.array(probs, dtype=float)
        if p.ndim != 2 or p.shape[0] < 1 or p.shape[1] < 1:
            raise ShapeError(f"probs must be a non-empty |Θ|x|Δ| table, got {p.shape}")
        if not np.all(np.isfinite(p)):
            raise ValidationError("probs has non-finite entries")
        if p.min() < -1e-12:
            raise ValidationError(f"negative probability {p.min():.3e}")
        sums = p.sum(axis=1)
        if np.abs(sums - 1).max() > TOL.probability:
            raise ValidationError(f"rows must sum to 1, got {sums}")
        if p.min() < 0:
            p = np.clip(p, 0, None)
            p /= p.sum(axis=1, keepdims=True)
        object.__setattr__(self, "probs", _frozen(p))
        object.__setattr__(self, "theta_labels", _labels(theta_labels, p.shape[0]))

    @property
    def n_theta(self) -> int:
        return self.probs.shape[0]

    @property
    def delta_size(self) -> int:
        return self.probs.shape[1]


@dataclass(frozen=True, init=False)
class DecisionProblem:
    """Payoff table ``payoff[θ, i]`` over a finite decision set."""

    payoff: np.ndarray

    def __init__(self, payoff):
        ell = np.array(payoff, dtype=float)
        if ell.ndim != 2 or min(ell.shape) < 1:
            raise ShapeError(f"payoff must be a non-empty |Θ|x|X| table, got {ell.shape}")
        if not np.all(np.isfinite(ell)):
            raise ValidationError("payoff has non-finite entries")
        object.__setattr__(self, "payoff", _frozen(ell))

    @property
    def decision_size(self) -> int:
        return self.payoff.shape[1]


@dataclass(frozen=True, init=False)
class RandomizedDecisionFunction:
    """Conditional probabilities ``cond_probs[i, δ] = t(i|δ)``."""

    cond_probs: np.ndarray

    def __init__(self, cond_probs):
        t = np.array(cond_probs, dtype=float)
        if t.ndim != 2:
            raise ShapeError(f"cond_probs must be 2-D, got {t.shape}")
        if t.min() < -TOL.probability or np.abs(t.sum(axis=0) - 1).max() > TOL.probability:
            raise ValidationError("columns of cond_probs must be probability vectors")
        object.__setattr__(self, "cond_probs", _frozen(t))

    @classmethod
    def deterministic(cls, rule, decision_size):
        """Point-mass rdf sending sample ``δ`` to decision ``rule[δ]``."""
        rule = np.asarray(rule, dtype=int)
        t = np.zeros((decision_size, rule.size))
        t[rule, np.arange(rule.size)] = 1
        return cls(t)


@dataclass(frozen=True, init=False)
class TransitionMatrix:
    """Column-stochastic ``|Δ'|x|Δ|`` matrix."""

    matrix: np.ndarray

    def __init__(self, matrix):
        m = np.array(matrix, dtype=float)
        if m.ndim != 2:
            raise ShapeError(f"transition matrix must be 2-D, got {m.shape}")
        if m.min() < -1e-10:
            raise ValidationError(f"negative transition entry {m.min():.3e}")
        if np.abs(m.sum(axis=0) - 1).max() > TOL.choi:
            raise ValidationError("transition matrix columns must sum to 1")
        object.__setattr__(self, "matrix", _frozen(m))

    def apply(self, model: ClassicalModel) -> ClassicalModel:
        return garble(model, self)


@dataclass(frozen=True)
class FarkasCertificate:
    """
    Dual vector of the infeasible transition LP.

    ``y[θ, δ']`` multiplies the constraint rows ``(M p_θ)(δ') = q_θ(δ')`` and
    ``z[δ]`` the column-sum rows. They satisfy
    ``Σ_θ y[θ,δ'] p_θ(δ) + z[δ] <= 0`` for all ``δ', δ`` while
    ``slack = Σ y q + Σ z > 0``.
    """

    y: np.ndarray
    z: np.ndarray
    slack: float


@dataclass(frozen=True)
class TransitionSearch:
    """Result of :func:`find_transition_matrix`.

    Exactly one of ``matrix`` / ``certificate`` is set, matching ``feasible``.
    """

    feasible: bool
    matrix: Optional[TransitionMatrix] = None
    residual: float = 0.0
    certificate: Optional[FarkasCertificate] = None
    iterations: int = 0


@dataclass(frozen=True)
class SufficiencyVerdict:
    """``sufficient`` with a transition matrix, or a witness problem and its gap."""

    sufficient: bool
    transition: Optional[TransitionMatrix] = None
    witness: Optional[DecisionProblem] = None
    gap: Optional[float] = None
    residual: float = 0.0


def _check_pair(model, problem):
    if problem.payoff.shape[0] != model.n_theta:
        raise ShapeError(
            f"payoff has {problem.payoff.shape[0]} rows, model has {model.n_theta} parameters"
        )


def payoff_vector(model: ClassicalModel, problem: DecisionProblem, rdf: RandomizedDecisionFunction):
    """
    Payoff vector ``v[θ] = Σ_i ℓ(θ,i) Σ_δ t(i|δ) p_θ(δ)``.
    """
    _check_pair(model, problem)
    t = rdf.cond_probs
    if t.shape != (problem.decision_size, model.delta_size):
        raise ShapeError(
            f"rdf shape {t.shape} does not match (|X|, |Δ|) = "
            f"{(problem.decision_size, model.delta_size)}"
        )
    return np.einsum("ti,id,td->t", problem.payoff, t, model.probs)


def optimal_expected_payoff(model: ClassicalModel, problem: DecisionProblem):
    """
    Optimal Bayes payoff under the uniform prior.

    Returns
    -------
    value : float
        ``(1/|Θ|) Σ_δ max_i Σ_θ ℓ(θ,i) p_θ(δ)``.
    rule : ndarray of int
        Deterministic decision function attaining it; ``rule[δ]`` is the
        decision taken on sample ``δ`` (lowest index on ties).
    """
    _check_pair(model, problem)
    # scores[i, δ] = Σ_θ ℓ(θ,i) p_θ(δ)
    scores = problem.payoff.T @ model.probs
    rule = np.argmax(scores, axis=0)
    value = scores[rule, np.arange(model.delta_size)].sum() / model.n_theta
    return float(value), rule


def garble(model: ClassicalModel, transition) -> ClassicalModel:
    """Push every ``p_θ`` through a column-stochastic matrix."""
    m = transition.matrix if isinstance(transition, TransitionMatrix) else np.asarray(transition)
    if m.shape[1] != model.delta_size:
        raise ShapeError(f"transition of shape {m.shape} cannot act on |Δ|={model.delta_size}")
    q = model.probs @ m.T
    return ClassicalModel(q / q.sum(axis=1, keepdims=True), model.theta_labels)


def _transition_lp(p, q):
    # variable x = vec(M) row-major: x[a*nd + d] = M[a, d]
    nt, nd = p.shape
    na = q.shape[1]
    rows = []
    rhs = []
    for t in range(nt):
        for a in range(na):
            r = np.zeros(na * nd)
            r[a * nd : (a + 1) * nd] = p[t]
            rows.append(r)
            rhs.append(q[t, a])
    for d in range(nd):
        r = np.zeros(na * nd)
        r[d::nd] = 1
        rows.append(r)
        rhs.append(1.0)
    return np.array(rows), np.array(rhs)


def find_transition_matrix(e: ClassicalModel, f: ClassicalModel, tol=None) -> TransitionSearch:
    """
    Search for a column-stochastic ``M`` with ``M p_θ = q_θ``.

    Parameters
    ----------
    e, f : ClassicalModel
        Source and target over the same parameter set.
    tol : float, optional
        Largest accepted ``max_θ ‖M p_θ − q_θ‖₁``. Defaults to the package
        solver tolerance.

    Returns
    -------
    TransitionSearch
        Either ``matrix`` (feasible) or a :class:`FarkasCertificate`.

    Raises
    ------
    NumericalError
        If the simplex exceeds its pivot cap.
    """
    tol = default_solver_tol() if tol is None else float(tol)
    if tol <= 0:
        raise ValueError("tol must be positive")
    if e.n_theta != f.n_theta:
        raise ShapeError(f"parameter sets differ: {e.n_theta} vs {f.n_theta}")
    p, q = e.probs, f.probs
    nd, na = e.delta_size, f.delta_size
    A, b = _transition_lp(p, q)
    res = phase1(A, b)
    if res.infeasibility <= tol:
        m = res.x.reshape(na, nd)
        cols = m.sum(axis=0, keepdims=True)
        # a zero column can only come from an unconstrained δ; any distribution works
        m = np.where(cols > 0, m / np.where(cols > 0, cols, 1.0), 1.0 / na)
        resid = float(np.abs(p @ m.T - q).sum(axis=1).max())
        if resid <= tol:
            return TransitionSearch(True, TransitionMatrix(m), resid, None, res.iterations)
    nrow = e.n_theta * na
    y = res.y[:nrow].reshape(e.n_theta, na)
    z = res.y[nrow:]
    cert = FarkasCertificate(y=y, z=z, slack=float(b @ res.y))
    return TransitionSearch(False, None, res.infeasibility, cert, res.iterations)


def witness_from_certificate(cert: FarkasCertificate, e: ClassicalModel, f: ClassicalModel, tol=None):
    """
    Decision problem on which ``f`` strictly beats ``e``.

    The decision set is ``Δ'`` and ``ℓ(θ, i) = |Θ| y[θ, i] / max|y|``.

    Returns
    -------
    problem : DecisionProblem
    gap : float
        ``$(f, problem) − $(e, problem)``, recomputed from scratch.

    Raises
    ------
    CertificateInvalidError
        If the recomputed gap is not above ``tol``.
    """
    tol = default_solver_tol() if tol is None else float(tol)
    if cert is None:
        raise PreconditionError("no certificate: the pair is sufficient")
    y = np.asarray(cert.y, dtype=float)
    if y.shape != (e.n_theta, f.delta_size):
        raise ShapeError(f"certificate shape {y.shape} does not match the pair")
    scale = np.abs(y).max()
    if scale == 0:
        raise CertificateInvalidError("certificate is identically zero")
    problem = DecisionProblem(e.n_theta * y / scale)
    gap = optimal_expected_payoff(f, problem)[0] - optimal_expected_payoff(e, problem)[0]
    if not gap > tol:
        raise CertificateInvalidError(f"witness gap {gap:.3e} does not exceed tol {tol:.1e}")
    return problem, float(gap)


def check_ordering(e: ClassicalModel, f: ClassicalModel, tol=None) -> SufficiencyVerdict:
    """Decide whether ``e`` is sufficient for ``f``, with a certificate either way."""
    search = find_transition_matrix(e, f, tol)
    if search.feasible:
        return SufficiencyVerdict(True, transition=search.matrix, residual=search.residual)
    problem, gap = witness_from_certificate(search.certificate, e, f, tol)
    return SufficiencyVerdict(False, witness=problem, gap=gap, residual=search.residual)
