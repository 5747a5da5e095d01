"""
Small dense log-barrier solvers.

``povm_dual_barrier`` maximizes ``Σ_i Tr[R^i P^i]`` over POVMs by following
the central path of the dual ``min Tr Y s.t. Y ⪰ R^i``. Points on the path
give a primal POVM ``P^i = μ (Y − R^i)^{-1}`` for free.

``psd_feasibility`` decides whether an affine family of block-Hermitian
matrices meets the PSD cone, by maximizing the smallest eigenvalue ``s`` over
the affine set.

Both work in the real coordinates of :func:`suffkit.linalg.herm_basis`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .linalg import herm_basis, hmat, hvec


def _hess_block(w, basis):
    # H[k, l] = Re Tr(W E_k W E_l)
    we = np.matmul(w, basis)
    wew = np.matmul(we, w)
    return np.einsum("kab,lba->kl", wew, basis).real


def _inv_or_none(x):
    try:
        c = np.linalg.cholesky(x)
    except np.linalg.LinAlgError:
        return None
    ci = np.linalg.inv(c)
    return ci.conj().T @ ci, 2 * np.log(np.abs(np.diag(c))).sum()


def _solve_spd(h, g):
    d = np.sqrt(np.clip(np.diag(h), 1e-300, None))
    hs = h / d[:, None] / d[None, :]
    try:
        c = np.linalg.cholesky(hs)
        step = np.linalg.solve(c.T, np.linalg.solve(c, g / d))
    except np.linalg.LinAlgError:
        step = np.linalg.lstsq(hs, g / d, rcond=1e-14)[0]
    return step / d


@dataclass
class PovmOptimum:
    value: float
    povm: list
    dual: np.ndarray
    dual_bound: float
    iterations: int
    converged: bool


def _project_povm(ps):
    s = sum(ps)
    w, u = np.linalg.eigh(s)
    w = np.clip(w, 1e-300, None)
    k = (u / np.sqrt(w)) @ u.conj().T
    out = []
    for p in ps:
        q = k @ p @ k
        out.append((q + q.conj().T) / 2)
    return out


def _lift_dual(rs, y):
    y = (y + y.conj().T) / 2
    lift = max(np.linalg.eigvalsh(r - y)[-1] for r in rs)
    return y + max(lift, 0.0) * np.eye(y.shape[0])


def povm_dual_barrier(rs, tol=1e-8, max_iter=500) -> PovmOptimum:
    """
    Maximize ``Σ_i Tr[R^i P^i]`` over POVMs with a certified upper bound.

    The returned ``dual`` satisfies ``dual ⪰ R^i`` exactly (by construction of
    the lift or by strict barrier feasibility), so ``Tr dual`` is a valid
    bound whatever happened during the iteration.
    """
    rs = [np.asarray(r, dtype=complex) for r in rs]
    rs = [(r + r.conj().T) / 2 for r in rs]
    n = len(rs)
    d = rs[0].shape[0]
    basis = herm_basis(d)
    eye = np.eye(d)
    scale = max(max(np.abs(np.linalg.eigvalsh(r)).max() for r in rs), 1e-12)
    y = (max(np.linalg.eigvalsh(r)[-1] for r in rs) + scale) * eye
    mu = scale / d
    tr_e = hvec(eye)

    def evaluate(y, mu):
        acc = 0.0
        ws = []
        for r in rs:
            res = _inv_or_none(y - r)
            if res is None:
                return None
            ws.append(res[0])
            acc += res[1]
        return np.trace(y).real - mu * acc, ws

    it = 0
    converged = False
    best = None
    while it < max_iter:
        ev = evaluate(y, mu)
        f, ws = ev
        for _ in range(50):
            it += 1
            g = tr_e - mu * sum(hvec(w) for w in ws)
            h = mu * sum(_hess_block(w, basis) for w in ws)
            step = -_solve_spd(h, g)
            dec = -(g @ step) / mu
            if dec < 1e-20:
                break
            alpha = 1.0
            accepted = False
            while alpha > 1e-12:
                yn = y + alpha * hmat(step, d)
                evn = evaluate(yn, mu)
                if evn is not None and evn[0] <= f + 0.25 * alpha * (g @ step):
                    y, (f, ws) = yn, evn
                    accepted = True
                    break
                alpha *= 0.5
            if not accepted or dec < 1e-18 or it >= max_iter:
                break
            if dec < 1e-3 and alpha == 1.0 and mu * n * d > tol / 10:
                break

        ps = _project_povm([mu * w for w in ws])
        value = float(sum(np.trace(r @ p).real for r, p in zip(rs, ps)))
        lifted = _lift_dual(rs, sum(r @ p for r, p in zip(rs, ps)))
        candidates = [(np.trace(y).real, y), (np.trace(lifted).real, lifted)]
        bound, dual = min(candidates, key=lambda c: c[0])
        if best is None or bound - value < best.dual_bound - best.value:
            best = PovmOptimum(value, ps, dual, float(bound), it, False)
        if bound - value <= tol / 2 or mu * n * d <= tol * 1e-3:
            converged = bound - value <= tol
            break
        mu *= 0.2
    best.iterations = it
    best.converged = best.dual_bound - best.value <= tol
    return best


@dataclass
class Block:
    """Hermitian block ``hmat(L @ x + c)`` of dimension ``dim``."""

    L: np.ndarray
    c: np.ndarray
    dim: int


@dataclass
class FeasibilityOutcome:
    feasible: bool
    x: Optional[np.ndarray]
    residual: float
    s: float
    upper_bound: float
    lam: list = field(default_factory=list)
    nu: Optional[np.ndarray] = None
    affine_inconsistent: bool = False
    iterations: int = 0


def psd_feasibility(
    A,
    b,
    blocks,
    repair: Callable,
    residual: Callable,
    tol=1e-8,
    max_iter=400,
) -> FeasibilityOutcome:
    """
    Find ``x`` with ``A x = b`` and every block PSD.

    Parameters
    ----------
    A, b : ndarray
        Real affine constraints.
    blocks : list of Block
    repair : callable
        ``repair(x, s)`` turns a point whose blocks are ``⪰ s I`` into an
        exactly PSD point (generally violating the affine data by ``O(|s|)``).
    residual : callable
        ``residual(x)`` measures the data mismatch in the caller's norm.
    tol : float
        Accept as soon as ``residual(repair(x, s)) <= tol``.

    Notes
    -----
    Maximizes ``s`` subject to ``block_b(x) ⪰ s I`` with a log barrier in
    the null-space coordinates of ``A``. Multipliers ``lam`` (PSD, unit total
    trace) and ``nu`` (least squares) are returned for the dual bound.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float)
    nvar = A.shape[1]
    u, sv, vt = np.linalg.svd(A, full_matrices=True)
    rank = int(np.sum(sv > sv.max() * 1e-12)) if sv.size else 0
    x0 = vt[:rank].T @ ((u[:, :rank].T @ b) / sv[:rank])
    ls_res = b - A @ x0
    null = vt[rank:].T
    m_tot = sum(bl.dim for bl in blocks)

    def blocks_at(x):
        return [hmat(bl.L @ x + bl.c, bl.dim) for bl in blocks]

    def min_eig(x):
        return min(np.linalg.eigvalsh(m)[0] for m in blocks_at(x))

    if np.abs(ls_res).max() > tol:
        # no x satisfies the affine data; Aᵀν = 0 and bᵀν < 0 for ν = −res
        return FeasibilityOutcome(
            False, None, float(np.abs(ls_res).max()), -np.inf, -np.inf,
            lam=[np.zeros((bl.dim, bl.dim), dtype=complex) for bl in blocks],
            nu=-ls_res, affine_inconsistent=True,
        )

    s0 = min_eig(x0)
    if null.shape[1] == 0 or s0 >= 0:
        xr = repair(x0, min(s0, 0.0))
        res = residual(xr)
        out = FeasibilityOutcome(res <= tol, xr, res, s0, s0 if null.shape[1] == 0 else np.inf)
        if not out.feasible:
            # the point is unique: the most negative eigenvector separates
            mats = blocks_at(x0)
            worst = int(np.argmin([np.linalg.eigvalsh(m)[0] for m in mats]))
            lam = []
            for i, m in enumerate(mats):
                v = np.linalg.eigh(m)[1][:, 0]
                lam.append(np.outer(v, v.conj()) if i == worst else 0 * m)
            out.lam = lam
            lam_vec = sum(bl.L.T @ hvec(l_) for bl, l_ in zip(blocks, lam))
            out.nu = np.linalg.lstsq(A.T, lam_vec, rcond=None)[0]
        return out

    bases = [herm_basis(bl.dim) for bl in blocks]
    ms = [bl.L @ null for bl in blocks]
    us = [bl.L @ x0 + bl.c for bl in blocks]
    es = [hvec(np.eye(bl.dim)) for bl in blocks]
    r = null.shape[1]

    def evaluate(z, s, mu):
        acc = 0.0
        ws = []
        for bl, m, u0 in zip(blocks, ms, us):
            res = _inv_or_none(hmat(u0 + m @ z, bl.dim) - s * np.eye(bl.dim))
            if res is None:
                return None
            ws.append(res[0])
            acc += res[1]
        return -s - mu * acc, ws

    z = np.zeros(r)
    s = s0 - 1.0
    mu = 1.0 / m_tot
    best = None
    it = 0
    outcome_lam = []
    while it < max_iter:
        f, ws = evaluate(z, s, mu)
        for _ in range(60):
            it += 1
            gz = -mu * sum(m.T @ hvec(w) for m, w in zip(ms, ws))
            gs = -1.0 + mu * sum(np.trace(w).real for w in ws)
            g = np.append(gz, gs)
            h = np.zeros((r + 1, r + 1))
            for m, e, w, basis in zip(ms, es, ws, bases):
                jb = np.hstack([m, -e[:, None]])
                h += jb.T @ _hess_block(w, basis) @ jb
            h *= mu
            step = -_solve_spd(h, g)
            dec = -(g @ step) / mu
            if dec < 1e-20:
                break
            alpha = 1.0
            accepted = False
            while alpha > 1e-12:
                zn = z + alpha * step[:r]
                sn = s + alpha * step[r]
                ev = evaluate(zn, sn, mu)
                if ev is not None and ev[0] <= f + 0.25 * alpha * (g @ step):
                    z, s, (f, ws) = zn, sn, ev
                    accepted = True
                    break
                alpha *= 0.5
            if not accepted or it >= max_iter:
                break
            if s > 0:
                break
            if dec < 1e-2 and alpha == 1.0:
                break

        x = x0 + null @ z
        ub = s + mu * m_tot
        xr = repair(x, min(s, 0.0))
        res = residual(xr)
        lam = [mu * w for w in ws]
        total = sum(np.trace(l_).real for l_ in lam)
        lam = [l_ / total for l_ in lam]
        if best is None or res < best.residual:
            best = FeasibilityOutcome(res <= tol, xr, res, s, ub, lam)
        else:
            best.upper_bound = min(best.upper_bound, ub)
            best.lam = lam
        if res <= tol:
            best = FeasibilityOutcome(True, xr, res, s, ub, lam)
            break
        if ub < -1e-10 * max(1.0, abs(s)) or mu * m_tot < 1e-15:
            break
        mu *= 0.2

    if not best.feasible:
        lam_vec = sum(bl.L.T @ hvec(l_) for bl, l_ in zip(blocks, best.lam))
        best.nu = np.linalg.lstsq(A.T, lam_vec, rcond=None)[0]
    best.iterations = it
    return best
