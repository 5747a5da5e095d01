"""
Quantum channels: Choi matrices, superoperators and CPTP feasibility.

Conventions, used everywhere in the package:

* ``vec`` is row-major, ``vec(X)[a*d + b] = X[a, b]`` (``numpy`` reshape).
* A superoperator ``S`` acts as ``vec(ℒ(X)) = S @ vec(X)``, so
  ``S[(a,b),(c,d)] = ⟨a|ℒ(|c⟩⟨d|)|b⟩``.
* The Choi matrix is ``J = (id ⊗ ℰ)(Ψ⁺)`` with the unit-trace maximally
  entangled state, input factor first. Then
  ``ℰ(ρ) = d_in Tr_in[(ρᵀ ⊗ I) J]`` and trace preservation reads
  ``Tr_out J = I / d_in``.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Optional, Sequence

import numpy as np

from ._config import TOL, default_solver_tol
from ._sdp import Block, psd_feasibility
from .exceptions import (
    NotExtendableError,
    NumericalError,
    PreconditionError,
    ShapeError,
    ValidationError,
)
from .linalg import (
    check_density,
    check_hermitian,
    herm_basis,
    hmat,
    hvec,
    operator_rank,
    partial_trace,
    trace_norm,
)
from .quantum import Povm, fit_povm_to_statistics

__all__ = [
    "ChoiMatrix",
    "Superoperator",
    "BellBasis",
    "ChannelSearch",
    "MonotonicityWitness",
    "apply_choi",
    "choi_of_superoperator",
    "superoperator_of_choi",
    "choi_from_kraus",
    "identity_choi",
    "replacer_choi",
    "depolarizing_choi",
    "monotonicity_witness",
    "find_cptp_map",
    "measure_prepare_extension",
    "build_bell_basis",
    "teleportation_extension",
    "max_entangled",
]


def max_entangled(d) -> np.ndarray:
    """Unit-trace projector onto ``d^{-1/2} Σ_j |jj⟩``."""
    v = np.eye(d).reshape(d * d).astype(complex) / np.sqrt(d)
    return np.outer(v, v.conj())


@dataclass(frozen=True, init=False)
class ChoiMatrix:
    """Choi matrix of a CPTP map ``C^{dim_in} → C^{dim_out}``."""

    j: np.ndarray
    dim_in: int
    dim_out: int

    def __init__(self, j, dim_in, dim_out, tol=TOL.choi):
        dim_in, dim_out = int(dim_in), int(dim_out)
        m = check_hermitian(j, tol=1e-10, name="Choi matrix")
        if m.shape[0] != dim_in * dim_out:
            raise ShapeError(f"Choi matrix of dim {m.shape[0]} for {dim_in}x{dim_out}")
        lo = np.linalg.eigvalsh(m)[0]
        if lo < -tol:
            raise ValidationError(f"Choi matrix has eigenvalue {lo:.3e}")
        dev = np.abs(partial_trace(m, dim_in, dim_out, "B") - np.eye(dim_in) / dim_in).max()
        if dev > tol:
            raise ValidationError(f"Choi matrix is not trace preserving (deviation {dev:.3e})")
        m.setflags(write=False)
        object.__setattr__(self, "j", m)
        object.__setattr__(self, "dim_in", dim_in)
        object.__setattr__(self, "dim_out", dim_out)

    def __call__(self, rho):
        return apply_choi(self, rho)


@dataclass(frozen=True, init=False)
class Superoperator:
    """
    Linear map on operators, stored as a ``(d_out², d_in²)`` matrix.

    ``trace_preserving`` is checked on construction through the dual:
    ``ℒ*(I_out) = I_in``.
    """

    matrix: np.ndarray
    dim_in: int
    dim_out: int
    trace_preserving: bool

    def __init__(self, matrix, dim_in, dim_out, trace_preserving=True, tol=TOL.choi):
        m = np.array(matrix, dtype=complex)
        if m.shape != (dim_out * dim_out, dim_in * dim_in):
            raise ShapeError(f"superoperator shape {m.shape} for {dim_in}->{dim_out}")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "dim_in", int(dim_in))
        object.__setattr__(self, "dim_out", int(dim_out))
        object.__setattr__(self, "trace_preserving", bool(trace_preserving))
        if trace_preserving:
            dev = np.abs(self.dual(np.eye(dim_out)) - np.eye(dim_in)).max()
            if dev > tol:
                raise ValidationError(f"dual does not fix the identity (deviation {dev:.3e})")

    @classmethod
    def from_function(cls, fn, dim_in, dim_out, **kw):
        """Tabulate a linear map given as a Python callable."""
        cols = []
        for c in range(dim_in):
            for d in range(dim_in):
                e = np.zeros((dim_in, dim_in), dtype=complex)
                e[c, d] = 1
                cols.append(np.asarray(fn(e)).reshape(-1))
        return cls(np.array(cols).T, dim_in, dim_out, **kw)

    @classmethod
    def identity(cls, d):
        return cls(np.eye(d * d), d, d)

    def __call__(self, x):
        x = np.asarray(x, dtype=complex)
        return (self.matrix @ x.reshape(-1)).reshape(self.dim_out, self.dim_out)

    def dual(self, x):
        """Trace dual: ``Tr[ℒ*(X) T] = Tr[X ℒ(T)]``."""
        x = np.asarray(x, dtype=complex)
        v = self.matrix.T @ x.T.reshape(-1)
        return v.reshape(self.dim_in, self.dim_in).T

    def extend(self, x, dim_a):
        """``(id_a ⊗ ℒ)(x)`` for ``x`` on ``C^{dim_a} ⊗ C^{dim_in}``."""
        di, do = self.dim_in, self.dim_out
        t = np.asarray(x, dtype=complex).reshape(dim_a, di, dim_a, di)
        t = t.transpose(0, 2, 1, 3).reshape(dim_a * dim_a, di * di)
        out = (t @ self.matrix.T).reshape(dim_a, dim_a, do, do).transpose(0, 2, 1, 3)
        return out.reshape(dim_a * do, dim_a * do)


def choi_of_superoperator(op: Superoperator, tol=TOL.choi) -> ChoiMatrix:
    di, do = op.dim_in, op.dim_out
    s = op.matrix.reshape(do, do, di, di)  # [a, b, c, d]
    j = s.transpose(2, 0, 3, 1).reshape(di * do, di * do) / di
    return ChoiMatrix(j, di, do, tol=tol)


def superoperator_of_choi(choi: ChoiMatrix) -> Superoperator:
    di, do = choi.dim_in, choi.dim_out
    j = choi.j.reshape(di, do, di, do)  # [c, a, d, b]
    s = j.transpose(1, 3, 0, 2).reshape(do * do, di * di) * di
    return Superoperator(s, di, do)


def apply_choi(choi: ChoiMatrix, rho) -> np.ndarray:
    """``ℰ(ρ) = d_in Tr_in[(ρᵀ ⊗ I) J]``."""
    rho = np.asarray(rho, dtype=complex)
    di, do = choi.dim_in, choi.dim_out
    if rho.shape != (di, di):
        raise ShapeError(f"input of shape {rho.shape} for a channel on C^{di}")
    j = choi.j.reshape(di, do, di, do)
    return di * np.einsum("cd,cadb->ab", rho, j)


def choi_from_kraus(kraus, tol=TOL.choi) -> ChoiMatrix:
    """Choi matrix of ``ρ ↦ Σ_k K_k ρ K_k†``."""
    kraus = [np.asarray(k, dtype=complex) for k in kraus]
    do, di = kraus[0].shape
    psi = max_entangled(di)
    j = sum(
        np.kron(np.eye(di), k) @ psi @ np.kron(np.eye(di), k).conj().T for k in kraus
    )
    return ChoiMatrix(j, di, do, tol=tol)


def identity_choi(d) -> ChoiMatrix:
    return ChoiMatrix(max_entangled(d), d, d)


def replacer_choi(sigma, dim_in) -> ChoiMatrix:
    """Channel sending every state to ``sigma``."""
    sigma = check_density(sigma)
    return ChoiMatrix(np.kron(np.eye(dim_in) / dim_in, sigma), dim_in, sigma.shape[0])


def depolarizing_choi(d, p) -> ChoiMatrix:
    """``ρ ↦ p ρ + (1 − p) Tr[ρ] I/d``."""
    return ChoiMatrix(p * max_entangled(d) + (1 - p) * np.eye(d * d) / (d * d), d, d)


@dataclass(frozen=True)
class MonotonicityWitness:
    """Pair whose output trace distance exceeds the input one."""

    pair: tuple
    input_distance: float
    output_distance: float

    def describe(self) -> str:
        i, j = self.pair
        return (
            f"||s{i} - s{j}||_1 = {self.output_distance:.6g} exceeds "
            f"||r{i} - r{j}||_1 = {self.input_distance:.6g}; no channel can increase it"
        )


def monotonicity_witness(inputs, outputs, tol=0.0) -> Optional[MonotonicityWitness]:
    """Largest violation of trace-distance contraction, if any exceeds ``tol``."""
    best = None
    for i, j in combinations(range(len(inputs)), 2):
        din = trace_norm(inputs[i] - inputs[j])
        dout = trace_norm(outputs[i] - outputs[j])
        if dout > din + tol and (best is None or dout - din > best.output_distance - best.input_distance):
            best = MonotonicityWitness((i, j), din, dout)
    return best


@dataclass(frozen=True)
class ChannelSearch:
    """
    Result of a CPTP feasibility search.

    When infeasible, ``upper_bound`` bounds the largest achievable minimum
    Choi eigenvalue on the affine data (negative means no CPTP map) and
    ``affine_inconsistent`` means no linear trace-preserving map fits at all.
    """

    feasible: bool
    choi: Optional[ChoiMatrix] = None
    residual: float = 0.0
    witness: Optional[MonotonicityWitness] = None
    upper_bound: float = float("nan")
    affine_inconsistent: bool = False


def _choi_repair(di, do):
    dd = di * do

    def repair(x, s):
        j = hmat(x, dd)
        if s < 0:
            j = (j - s * np.eye(dd)) / (1 - s * dd)
        t = partial_trace(j, di, do, "B") * di
        w, u = np.linalg.eigh((t + t.conj().T) / 2)
        k = np.kron((u / np.sqrt(np.clip(w, 1e-300, None))) @ u.conj().T, np.eye(do))
        j = k @ j @ k
        return hvec((j + j.conj().T) / 2)

    return repair


def choi_feasibility(pairs, di, do, tol):
    """
    CPTP ``ℰ`` with ``(id_k ⊗ ℰ)(X_m) = Y_m`` for Hermitian pairs.

    ``pairs`` holds ``(X, Y, k)``: ``X`` on ``C^k ⊗ C^{di}``, ``Y`` on
    ``C^k ⊗ C^{do}``. Plain input/output states use ``k = 1``.
    """
    dd = di * do
    nvar = dd * dd
    eye_basis = hvec(np.eye(dd))
    rows, rhs = [], []
    for e in herm_basis(di):
        rows.append(hvec(np.kron(e, np.eye(do))))
        rhs.append(np.trace(e).real / di)
    for x, y, k in pairs:
        # Tr[(E ⊗ F)(id⊗ℰ)(X)] = di Tr[(X^{T_in} ⊗ F) J] after contracting k
        xt = np.asarray(x).reshape(k, di, k, di)
        for ea in herm_basis(k):
            # block of X along the ancilla observable, then the usual rule
            red = np.einsum("ab,bcad->cd", ea, xt)
            for f in herm_basis(do):
                rows.append(di * hvec(np.kron(red.T, f)))
                rhs.append(np.trace(np.kron(ea, f) @ y).real)
    A = np.array(rows)
    b = np.array(rhs)
    blocks = [Block(np.eye(nvar), np.zeros(nvar), dd)]
    repair = _choi_repair(di, do)

    def residual(v):
        choi_j = hmat(v, dd).reshape(di, do, di, do)
        worst = 0.0
        for x, y, k in pairs:
            xt = np.asarray(x).reshape(k, di, k, di)
            out = di * np.einsum("pcqd,cadb->paqb", xt, choi_j).reshape(k * do, k * do)
            worst = max(worst, trace_norm(out - y))
        return worst

    return psd_feasibility(A, b, blocks, repair, residual, tol=tol)


def find_cptp_map(inputs, outputs, tol=None) -> ChannelSearch:
    """
    Search for a CPTP map with ``ℰ(ρ_θ) = σ_θ``.

    Parameters
    ----------
    inputs, outputs : sequence of density matrices
        Equal lengths; each list shares one dimension.
    tol : float, optional
        Accepted ``max_θ ‖ℰ(ρ_θ) − σ_θ‖₁``.

    Returns
    -------
    ChannelSearch
        Infeasibility is certified when the affine data are inconsistent or
        the barrier bound is negative; a trace-distance monotonicity
        violation is attached whenever one exists.

    Raises
    ------
    NumericalError
        If the solver stops without either outcome.
    """
    tol = default_solver_tol() if tol is None else float(tol)
    inputs = [check_density(r, name="input") for r in inputs]
    outputs = [check_density(s, name="output") for s in outputs]
    if len(inputs) != len(outputs) or not inputs:
        raise ShapeError("inputs and outputs must be non-empty and of equal length")
    di = inputs[0].shape[0]
    do = outputs[0].shape[0]
    if any(r.shape != (di, di) for r in inputs) or any(s.shape != (do, do) for s in outputs):
        raise ShapeError("states within a list must share one dimension")
    out = choi_feasibility([(r, s, 1) for r, s in zip(inputs, outputs)], di, do, tol)
    return _channel_result(out, di, do, tol, monotonicity_witness(inputs, outputs, tol))


def _channel_result(out, di, do, tol, witness):
    if out.feasible:
        return ChannelSearch(True, ChoiMatrix(hmat(out.x, di * do), di, do), out.residual)
    certified = out.affine_inconsistent or out.upper_bound < 0
    if not certified and witness is None:
        raise NumericalError(
            f"CPTP search stalled at residual {out.residual:.3e} without a verdict",
            residual=out.residual,
        )
    return ChannelSearch(
        False,
        residual=out.residual,
        witness=witness,
        upper_bound=float(out.upper_bound),
        affine_inconsistent=out.affine_inconsistent,
    )


def measure_prepare_extension(realizing_povm: Povm, output_projectors) -> ChoiMatrix:
    """
    Choi matrix of ``ρ ↦ Σ_i Tr[Π̃^i ρ] Π^i``.

    Parameters
    ----------
    realizing_povm : Povm
        The measurement ``Π̃``.
    output_projectors : sequence of matrices
        Orthogonal rank-one projectors ``Π^i`` summing to the identity.
    """
    pis = [check_hermitian(p, tol=1e-10) for p in output_projectors]
    if len(pis) != len(realizing_povm):
        raise PreconditionError(
            f"{len(realizing_povm)} POVM elements for {len(pis)} output projectors"
        )
    do = pis[0].shape[0]
    for i, p in enumerate(pis):
        if np.abs(p @ p - p).max() > 1e-9 or abs(np.trace(p).real - 1) > 1e-9:
            raise PreconditionError(f"output {i} is not a rank-one projector")
    for i, j in combinations(range(len(pis)), 2):
        if np.abs(pis[i] @ pis[j]).max() > 1e-9:
            raise PreconditionError(f"outputs {i} and {j} are not orthogonal")
    if np.abs(sum(pis) - np.eye(do)).max() > 1e-9:
        raise PreconditionError("output projectors do not sum to the identity")
    di = realizing_povm.dim
    j = sum(np.kron(q.T, p) for q, p in zip(realizing_povm.elements, pis)) / di
    return ChoiMatrix(j, di, do)


@dataclass(frozen=True)
class BellBasis:
    """
    Generalized Bell basis on ``C^d ⊗ C^d``.

    ``projectors[i] = (U^i ⊗ I) Ψ⁺ (U^i ⊗ I)†`` with ``U^{(a,b)} = X^a Z^b``
    at index ``i = a*d + b``. ``corrections[i]`` is the unitary that undoes
    outcome ``i`` in teleportation; for this family it is ``(U^i)ᵀ``.
    """

    d: int
    projectors: np.ndarray
    unitaries: np.ndarray
    corrections: np.ndarray
    psi_plus: np.ndarray


def build_bell_basis(d) -> BellBasis:
    d = int(d)
    if d < 2:
        raise ShapeError("Bell basis needs d >= 2")
    shift = np.roll(np.eye(d), 1, axis=0)  # X|j⟩ = |j+1⟩
    clock = np.diag(np.exp(2j * np.pi * np.arange(d) / d))
    psi = max_entangled(d)
    us, bs = [], []
    for a in range(d):
        for b in range(d):
            u = np.linalg.matrix_power(shift, a) @ np.linalg.matrix_power(clock, b)
            ue = np.kron(u, np.eye(d))
            us.append(u)
            bs.append(ue @ psi @ ue.conj().T)
    us = np.array(us)
    return BellBasis(d, np.array(bs), us, us.transpose(0, 2, 1).copy(), psi)


def _isotropic_span(d):
    from .structures import isotropic_structure, local_state_space_span

    span = local_state_space_span(isotropic_structure(d, 1.0 / (d + 1)), "B")
    return [w / np.trace(w).real for w in span.spanning_ops]


def _teleport(bell: BellBasis, povm_elements, di, rho):
    d = bell.d
    full = np.kron(bell.psi_plus, rho)
    out = np.zeros((d, d), dtype=complex)
    for v, bt in zip(bell.corrections, povm_elements):
        x = np.kron(np.eye(d), bt) @ full
        x = partial_trace(x, d, d * di, "B")
        out += v @ x @ v.conj().T
    return out


def teleportation_extension(
    morphism: Superoperator,
    ancilla_span=None,
    tol=None,
    input_states=None,
) -> ChoiMatrix:
    """
    CPTP extension of a morphism through a fitted Bell measurement.

    A POVM ``B̃`` on ``C^d ⊗ C^{d_in}`` is fitted to the statistics of
    ``(id ⊗ ℒ*)(B^i)`` on the product states ``ω ⊗ σ``; measuring it on half
    of ``Ψ⁺`` and the input, then applying the correction for the outcome,
    yields a channel that agrees with ``ℒ`` on the span of the inputs.

    Parameters
    ----------
    morphism : Superoperator
        ``ℒ`` with ``dim_out = d``.
    ancilla_span : sequence of density matrices on ``C^d``, optional
        Must span all operators. Defaults to the normalized conditional
        states of the isotropic state at ``p = 1/(d+1)``.
    tol : float, optional
        Bound on ``‖ℰ(σ) − ℒ(σ)‖₁`` over ``input_states``.
    input_states : sequence of density matrices on ``C^{d_in}``, optional
        Spanning set of the domain; defaults to the full operator space.

    Raises
    ------
    PreconditionError
        If the ancilla span is incomplete or ``ℒ`` does not map the inputs
        into states.
    NotExtendableError
        If no Bell-measurement POVM reproduces the statistics; the fit
        carries the separating family.
    """
    tol = default_solver_tol() if tol is None else float(tol)
    d, di = morphism.dim_out, morphism.dim_in
    if ancilla_span is None:
        ancilla_span = _isotropic_span(d)
    ancilla = [check_density(w, name="ancilla state") for w in ancilla_span]
    if any(w.shape != (d, d) for w in ancilla):
        raise ShapeError(f"ancilla states must live on C^{d}")
    rank = operator_rank(ancilla)
    if rank < d * d:
        raise PreconditionError(f"ancilla span has rank {rank}, {d * d} required")
    if input_states is None:
        from .frames import build_ic_povm

        input_states = [f / np.trace(f).real for f in build_ic_povm(di).elements] if di > 1 else [np.eye(1)]
    inputs = [check_density(s, name="input state") for s in input_states]
    images = [morphism(s) for s in inputs]
    for k, img in enumerate(images):
        img_h = (img + img.conj().T) / 2
        if np.abs(img - img_h).max() > 1e-8 or np.linalg.eigvalsh(img_h)[0] < -1e-8:
            raise PreconditionError(f"morphism maps input {k} outside the state space")

    bell = build_bell_basis(d)
    span = [np.kron(w, s) for w in ancilla for s in inputs]
    targets = np.array(
        [[np.trace(b @ np.kron(w, img)).real for w in ancilla for img in images] for b in bell.projectors]
    )
    fit = fit_povm_to_statistics(span, targets, tol=tol * 1e-2)
    if not fit.feasible:
        raise NotExtendableError(
            f"no Bell-measurement POVM realizes the morphism (gap {fit.gap:.3e})", fit
        )
    els = fit.povm.elements
    op = Superoperator.from_function(lambda e: _teleport(bell, els, di, e), di, d)
    choi = choi_of_superoperator(op)
    worst = max(trace_norm(apply_choi(choi, s) - img) for s, img in zip(inputs, images))
    if worst > tol:
        raise NumericalError(f"extension misses the morphism by {worst:.3e}", residual=worst)
    return choi
