"""
Dense complex-matrix primitives.

Every operator in the package is a plain two-dimensional ``numpy`` array of
``complex128``. The helpers below validate inputs at API boundaries
(Hermiticity, density-matrix normalization) and implement the few
operations the solvers are built on: Kronecker products, partial traces,
Hermitian eigendecomposition, projection onto the positive semidefinite cone
and simultaneous diagonalization of commuting families.

A real orthonormal parametrization of Hermitian matrices (``herm_basis``,
``hvec``, ``hmat``) is also provided; the conic solvers work in it.
"""

from __future__ import annotations

from functools import lru_cache
from itertools import combinations
from typing import Sequence

import numpy as np

from ._config import TOL
from .exceptions import (
    CapacityError,
    NonCommutingError,
    NumericalError,
    ShapeError,
    ValidationError,
)

__all__ = [
    "as_matrix",
    "check_hermitian",
    "check_density",
    "tensor_product",
    "partial_trace",
    "partial_transpose",
    "eig_hermitian",
    "jacobi_eigh",
    "psd_project",
    "psd_power",
    "commutator_norm",
    "simultaneous_diagonalization",
    "trace_norm",
    "herm_basis",
    "hvec",
    "hmat",
    "operator_rank",
    "permute_subsystems",
]


def as_matrix(a, name="matrix") -> np.ndarray:
    """Return ``a`` as a finite 2-D complex array or raise."""
    m = np.asarray(a, dtype=complex)
    if m.ndim != 2 or m.shape[0] < 1 or m.shape[1] < 1:
        raise ShapeError(f"{name} must be a non-empty 2-D array, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValidationError(f"{name} has non-finite entries")
    return m


def check_hermitian(h, tol=TOL.hermitian, name="operator") -> np.ndarray:
    """Validate a Hermitian matrix and return its exactly-Hermitian part."""
    m = as_matrix(h, name)
    if m.shape[0] != m.shape[1]:
        raise ShapeError(f"{name} must be square, got shape {m.shape}")
    dev = np.abs(m - m.conj().T).max()
    if dev > tol:
        raise ValidationError(f"{name} is not Hermitian (deviation {dev:.3e})")
    return (m + m.conj().T) / 2


def check_density(rho, tol=TOL.density, name="state") -> np.ndarray:
    """Validate a density matrix: Hermitian, unit trace, positive semidefinite."""
    m = check_hermitian(rho, max(tol, TOL.hermitian), name)
    tr = np.trace(m).real
    if abs(tr - 1) > tol:
        raise ValidationError(f"{name} has trace {tr!r}, expected 1")
    lam = np.linalg.eigvalsh(m)[0]
    if lam < -tol:
        raise ValidationError(f"{name} has negative eigenvalue {lam:.3e}")
    return m


def tensor_product(a, b, cap=TOL.max_dim) -> np.ndarray:
    """
    Kronecker product ``a ⊗ b``.

    Raises
    ------
    CapacityError
        If either output dimension would exceed ``cap``.
    """
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    rows = a.shape[0] * b.shape[0]
    cols = a.shape[1] * b.shape[1]
    if rows > cap or cols > cap:
        raise CapacityError(f"tensor product of shape {(rows, cols)} exceeds cap {cap}")
    return np.kron(a, b)


def partial_trace(m, dim_a, dim_b, traced_side="B") -> np.ndarray:
    """
    Trace out one factor of an operator on ``H_A ⊗ H_B``.

    Parameters
    ----------
    m : array_like
        Square operator of dimension ``dim_a * dim_b``.
    dim_a, dim_b : int
        Factor dimensions, ``A`` first.
    traced_side : {"A", "B"}
        The factor to remove.
    """
    m = np.asarray(m, dtype=complex)
    if m.shape != (dim_a * dim_b, dim_a * dim_b):
        raise ShapeError(
            f"operator of shape {m.shape} does not match dims {dim_a}x{dim_b}"
        )
    t = m.reshape(dim_a, dim_b, dim_a, dim_b)
    if traced_side == "B":
        return np.einsum("ibjb->ij", t)
    if traced_side == "A":
        return np.einsum("aiaj->ij", t)
    raise ValueError(f"traced_side must be 'A' or 'B', got {traced_side!r}")


def partial_transpose(m, dim_a, dim_b, side="B") -> np.ndarray:
    m = np.asarray(m, dtype=complex)
    if m.shape != (dim_a * dim_b, dim_a * dim_b):
        raise ShapeError(
            f"operator of shape {m.shape} does not match dims {dim_a}x{dim_b}"
        )
    t = m.reshape(dim_a, dim_b, dim_a, dim_b)
    if side == "B":
        t = t.transpose(0, 3, 2, 1)
    elif side == "A":
        t = t.transpose(2, 1, 0, 3)
    else:
        raise ValueError(f"side must be 'A' or 'B', got {side!r}")
    return t.reshape(dim_a * dim_b, dim_a * dim_b)


def permute_subsystems(m, dims, perm) -> np.ndarray:
    """Reorder the tensor factors of a square operator on ``⊗ dims``."""
    m = np.asarray(m, dtype=complex)
    n = len(dims)
    t = m.reshape(tuple(dims) * 2)
    axes = list(perm) + [n + p for p in perm]
    d = int(np.prod(dims))
    return t.transpose(axes).reshape(d, d)


def jacobi_eigh(h, tol=1e-15, max_sweeps=60):
    """
    Cyclic Jacobi eigendecomposition of a Hermitian matrix.

    Each rotation first removes the phase of the pivot entry with a diagonal
    unitary and then applies the classical real Jacobi rotation.

    Returns
    -------
    eigenvalues : ndarray
        Real, ascending.
    eigenvectors : ndarray
        Unitary matrix whose columns are the eigenvectors.

    Raises
    ------
    NumericalError
        When the off-diagonal mass has not vanished after ``max_sweeps``.
    """
    a = check_hermitian(h, tol=max(TOL.hermitian, 1e-12)).copy()
    n = a.shape[0]
    v = np.eye(n, dtype=complex)
    scale = max(np.abs(a).max(), 1e-300)
    for _ in range(max_sweeps):
        off = np.linalg.norm(a - np.diag(np.diag(a)))
        if off <= tol * scale:
            break
        for p, q in combinations(range(n), 2):
            apq = a[p, q]
            mag = abs(apq)
            if mag <= 1e-300:
                continue
            phase = apq / mag
            theta = (a[q, q].real - a[p, p].real) / (2 * mag)
            t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1))
            if theta == 0:
                t = 1.0
            c = 1 / np.sqrt(t * t + 1)
            s = t * c
            g = np.array([[1, 0], [0, np.conj(phase)]]) @ np.array([[c, s], [-s, c]])
            idx = [p, q]
            a[:, idx] = a[:, idx] @ g
            a[idx, :] = g.conj().T @ a[idx, :]
            a[q, p] = 0
            a[p, q] = 0
            v[:, idx] = v[:, idx] @ g
    else:
        off = np.linalg.norm(a - np.diag(np.diag(a)))
        raise NumericalError(
            f"Jacobi iteration did not converge in {max_sweeps} sweeps", residual=off
        )
    w = np.diag(a).real
    order = np.argsort(w, kind="stable")
    return w[order], v[:, order]


def eig_hermitian(h, method="lapack"):
    """
    Eigendecomposition of a Hermitian operator.

    Parameters
    ----------
    h : array_like
        Hermitian matrix.
    method : {"lapack", "jacobi"}
        ``"lapack"`` calls ``numpy.linalg.eigh``; ``"jacobi"`` uses the
        pure cyclic-Jacobi routine :func:`jacobi_eigh`.

    Returns
    -------
    eigenvalues : ndarray
        Real, ascending.
    eigenvectors : ndarray
        Unitary matrix of column eigenvectors.
    """
    if method == "jacobi":
        return jacobi_eigh(h)
    if method != "lapack":
        raise ValueError(f"unknown method {method!r}")
    m = check_hermitian(h, tol=max(TOL.hermitian, 1e-12))
    w, u = np.linalg.eigh(m)
    return w, u


def psd_project(h) -> np.ndarray:
    """Nearest positive semidefinite matrix in Frobenius norm."""
    w, u = eig_hermitian(h)
    out = (u * np.clip(w, 0, None)) @ u.conj().T
    return (out + out.conj().T) / 2


def psd_power(h, power, floor=0.0) -> np.ndarray:
    """``h**power`` for positive semidefinite ``h``; eigenvalues below ``floor`` are dropped."""
    w, u = np.linalg.eigh((np.asarray(h) + np.asarray(h).conj().T) / 2)
    keep = w > floor
    wp = np.zeros_like(w)
    wp[keep] = w[keep] ** power
    return (u * wp) @ u.conj().T


def trace_norm(x) -> float:
    return float(np.linalg.svd(np.asarray(x, dtype=complex), compute_uv=False).sum())


def commutator_norm(a, b) -> float:
    """Max-norm of ``[a, b]``."""
    a = np.asarray(a)
    b = np.asarray(b)
    return float(np.abs(a @ b - b @ a).max())


def _canonical_basis(u):
    # order columns by their dominant coordinate and make that entry real positive
    lead = np.argmax(np.abs(u) > np.abs(u).max(axis=0) - 1e-12, axis=0)
    order = np.argsort(lead, kind="stable")
    u = u[:, order]
    lead = lead[order]
    phase = u[lead, np.arange(u.shape[1])]
    return u * (np.abs(phase) / phase)


def simultaneous_diagonalization(family: Sequence, seed=0, tol=TOL.commutator):
    """
    Common eigenbasis of a commuting Hermitian family.

    A random real combination of the family is diagonalized and the basis is
    checked against every member; up to three combinations are tried.

    Returns
    -------
    ndarray
        Unitary ``U`` such that ``U† M U`` is diagonal (within ``1e-8``) for
        every member ``M``.

    Raises
    ------
    NonCommutingError
        Carrying the first non-commuting pair and its commutator norm.
    """
    mats = [check_hermitian(m, tol=max(TOL.hermitian, 1e-12)) for m in family]
    if not mats:
        raise ValueError("empty family")
    d = mats[0].shape[0]
    if any(m.shape != (d, d) for m in mats):
        raise ShapeError("family members have different dimensions")
    for i, j in combinations(range(len(mats)), 2):
        norm = commutator_norm(mats[i], mats[j])
        if norm > tol:
            raise NonCommutingError((i, j), norm)
    scale = max(max(np.abs(m).max() for m in mats), 1.0)
    rng = np.random.default_rng(seed)
    worst = np.inf
    for _ in range(3):
        coeffs = rng.standard_normal(len(mats))
        combo = sum(c * m for c, m in zip(coeffs, mats))
        _, u = np.linalg.eigh(combo)
        worst = 0.0
        for m in mats:
            r = u.conj().T @ m @ u
            worst = max(worst, np.abs(r - np.diag(np.diag(r))).max())
        if worst < 1e-8 * scale:
            return _canonical_basis(u)
    raise NumericalError("no combination separated the common eigenspaces", residual=worst)


@lru_cache(maxsize=None)
def _herm_basis(d):
    basis = []
    for a in range(d):
        e = np.zeros((d, d), dtype=complex)
        e[a, a] = 1
        basis.append(e)
    r2 = 1 / np.sqrt(2)
    for a, b in combinations(range(d), 2):
        e = np.zeros((d, d), dtype=complex)
        e[a, b] = e[b, a] = r2
        basis.append(e)
        e = np.zeros((d, d), dtype=complex)
        e[a, b] = -1j * r2
        e[b, a] = 1j * r2
        basis.append(e)
    out = np.array(basis)
    out.setflags(write=False)
    return out


def herm_basis(d) -> np.ndarray:
    """
    Orthonormal basis of the ``d²``-dimensional real space of Hermitian matrices.

    Orthonormal for the Hilbert-Schmidt product ``Tr[X Y]``; diagonal units
    come first. Returned array has shape ``(d², d, d)`` and is read-only.
    """
    return _herm_basis(int(d))


def hvec(x) -> np.ndarray:
    """Real coordinates of Hermitian ``x`` (or a stack of them) in :func:`herm_basis`."""
    x = np.asarray(x, dtype=complex)
    d = x.shape[-1]
    return np.einsum("kab,...ba->...k", herm_basis(d), x).real


def hmat(v, d=None) -> np.ndarray:
    """Inverse of :func:`hvec`."""
    v = np.asarray(v, dtype=float)
    if d is None:
        d = int(round(np.sqrt(v.shape[-1])))
    return np.einsum("...k,kab->...ab", v, herm_basis(d))


def operator_rank(ops, tol=TOL.rank) -> int:
    """Dimension of the real span of a list of Hermitian operators."""
    ops = list(ops)
    if not ops:
        return 0
    mat = hvec(np.array(ops))
    s = np.linalg.svd(np.atleast_2d(mat), compute_uv=False)
    return int(np.sum(s > tol))
