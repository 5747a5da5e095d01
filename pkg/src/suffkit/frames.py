"""
Informationally complete POVMs and their dual operators.

An IC-POVM ``{F^i}`` on ``C^d`` has ``d²`` elements spanning all operators, so
any ``T`` is recovered from its statistics through the dual operators:
``T = Σ_i Tr[T F^i] θ^i``. With exactly ``d²`` elements the duals are unique
and biorthogonal, ``Tr[F^i θ^j] = δ_ij``.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from ._config import TOL
from .exceptions import NotInformationallyCompleteError, ShapeError
from .linalg import check_hermitian, hmat, hvec
from .quantum import Povm

__all__ = ["ICFrame", "spanning_projectors", "build_ic_povm", "dual_frame", "reconstruct"]


def spanning_projectors(d):
    """
    Rank-one projectors onto ``|j⟩``, ``(|j⟩+|k⟩)/√2`` and ``(|j⟩+i|k⟩)/√2``.

    Exactly ``d²`` of them, in that order (pairs ``j < k`` lexicographic).
    """
    vecs = [np.eye(d)[j].astype(complex) for j in range(d)]
    for j, k in combinations(range(d), 2):
        v = np.zeros(d, dtype=complex)
        v[j], v[k] = 1, 1
        vecs.append(v / np.sqrt(2))
        v = np.zeros(d, dtype=complex)
        v[j], v[k] = 1, 1j
        vecs.append(v / np.sqrt(2))
    return np.array([np.outer(v, v.conj()) for v in vecs])


@dataclass(frozen=True)
class ICFrame:
    """IC-POVM with its dual operators; validated on construction."""

    povm: Povm
    duals: np.ndarray

    def __post_init__(self):
        d = self.povm.dim
        duals = np.array(self.duals, dtype=complex)
        if duals.shape != (d * d, d, d) or len(self.povm) != d * d:
            raise ShapeError(f"IC frame on C^{d} needs {d * d} elements and duals")
        duals.setflags(write=False)
        object.__setattr__(self, "duals", duals)
        # reconstruction on the Hermitian basis, i.e. Θᵀ F = I
        fv = hvec(self.povm.elements)
        tv = hvec(duals)
        err = np.abs(tv.T @ fv - np.eye(d * d)).max()
        if err > TOL.choi:
            raise ShapeError(f"duals do not reconstruct (error {err:.3e})")

    @property
    def dim(self) -> int:
        return self.povm.dim

    @property
    def elements(self) -> np.ndarray:
        return self.povm.elements


def dual_frame(povm: Povm, jitter=1e-12) -> np.ndarray:
    """
    Canonical dual operators ``θ^i = S^{-1}(F^i)``.

    ``S`` is the frame operator ``T ↦ Σ_i Tr[T F^i] F^i``, factorized by
    Cholesky on the real ``d²``-dimensional space of Hermitian operators.

    Raises
    ------
    NotInformationallyCompleteError
        If the elements span fewer than ``d²`` dimensions.
    """
    d = povm.dim
    fv = hvec(povm.elements)
    sv = np.linalg.svd(fv, compute_uv=False)
    rank = int(np.sum(sv > TOL.rank))
    if rank < d * d:
        raise NotInformationallyCompleteError(rank, d * d)
    s = fv.T @ fv
    c = np.linalg.cholesky(s + jitter * np.eye(d * d))

    def solve(rhs):
        return np.linalg.solve(c.T, np.linalg.solve(c, rhs))

    theta = solve(fv.T)
    # one refinement step removes the jitter bias
    theta = (theta + solve(fv.T - s @ theta)).T
    return hmat(theta, d)


def build_ic_povm(d) -> ICFrame:
    """
    Deterministic IC-POVM on ``C^d``.

    The spanning projectors ``Q_m`` are made into a POVM by the congruence
    ``F_m = S^{-1/2} Q_m S^{-1/2}`` with ``S = Σ_m Q_m``; elements stay rank
    one and the family stays linearly independent.
    """
    d = int(d)
    if not 2 <= d <= TOL.max_dim:
        raise ShapeError(f"dimension must lie in [2, {TOL.max_dim}], got {d}")
    q = spanning_projectors(d)
    w, u = np.linalg.eigh(q.sum(axis=0))
    k = (u / np.sqrt(w)) @ u.conj().T
    f = k @ q @ k
    f = (f + f.conj().transpose(0, 2, 1)) / 2
    povm = Povm(list(f))
    return ICFrame(povm, dual_frame(povm))


def reconstruct(t, frame: ICFrame) -> np.ndarray:
    """``Σ_i Tr[t F^i] θ^i``."""
    t = check_hermitian(t, tol=1e-10)
    if t.shape[0] != frame.dim:
        raise ShapeError(f"operator of dim {t.shape[0]} on a frame of dim {frame.dim}")
    coeffs = np.einsum("iab,ba->i", frame.elements, t).real
    return np.einsum("i,iab->ab", coeffs, frame.duals)
