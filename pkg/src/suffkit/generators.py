"""
Seeded random instances.

Every generator takes a ``numpy.random.Generator``; harness trials derive
theirs from ``(seed, trial)`` so runs are reproducible and order-free.
"""

from __future__ import annotations

import numpy as np

from .channels import Superoperator
from .classical import ClassicalModel, DecisionProblem
from .quantum import Povm, QuantumModel
from .structures import InfoStructure


def trial_rng(seed, trial) -> np.random.Generator:
    return np.random.default_rng([int(seed), int(trial)])


def random_simplex(rng, n) -> np.ndarray:
    return rng.dirichlet(np.ones(n))


def random_classical_model(rng, n_theta, delta_size) -> ClassicalModel:
    return ClassicalModel(rng.dirichlet(np.ones(delta_size), size=n_theta))


def random_transition(rng, n_out, n_in) -> np.ndarray:
    """Column-stochastic ``n_out x n_in`` matrix with Dirichlet columns."""
    return rng.dirichlet(np.ones(n_out), size=n_in).T


def random_decision_problem(rng, n_theta, n_decisions) -> DecisionProblem:
    return DecisionProblem(rng.standard_normal((n_theta, n_decisions)))


def _ginibre(rng, rows, cols):
    return rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))


def random_state(rng, d, rank=None) -> np.ndarray:
    """Normalized Wishart matrix ``G G† / Tr``."""
    g = _ginibre(rng, d, d if rank is None else rank)
    rho = g @ g.conj().T
    rho /= np.trace(rho).real
    return (rho + rho.conj().T) / 2


def random_pure_state(rng, d) -> np.ndarray:
    return random_state(rng, d, rank=1)


def random_unitary(rng, d) -> np.ndarray:
    q, r = np.linalg.qr(_ginibre(rng, d, d))
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_hermitian(rng, d) -> np.ndarray:
    g = _ginibre(rng, d, d)
    return (g + g.conj().T) / 2


def random_kraus(rng, dim_in, dim_out, n_kraus=None):
    """Kraus operators cut from a Gaussian isometry ``C^{d_in} → C^{d_out ⊗ k}``."""
    k = n_kraus if n_kraus is not None else int(rng.integers(1, dim_in * dim_out + 1))
    k = max(k, -(-dim_in // dim_out))
    q, _ = np.linalg.qr(_ginibre(rng, dim_out * k, dim_in))
    return [q[i * dim_out : (i + 1) * dim_out] for i in range(k)]


def kraus_superoperator(kraus) -> Superoperator:
    do, di = kraus[0].shape
    return Superoperator.from_function(lambda x: sum(k @ x @ k.conj().T for k in kraus), di, do)


def random_channel(rng, dim_in, dim_out, n_kraus=None) -> Superoperator:
    return kraus_superoperator(random_kraus(rng, dim_in, dim_out, n_kraus))


def random_povm(rng, d, n) -> Povm:
    gs = [(lambda g: g @ g.conj().T)(_ginibre(rng, d, d)) for _ in range(n)]
    w, u = np.linalg.eigh(sum(gs))
    k = (u / np.sqrt(w)) @ u.conj().T
    return Povm([k @ g @ k for g in gs])


def random_quantum_model(rng, n_theta, d) -> QuantumModel:
    return QuantumModel([random_state(rng, d) for _ in range(n_theta)])


def random_structure(rng, dim_a, dim_b, rank=None) -> InfoStructure:
    return InfoStructure(random_state(rng, dim_a * dim_b, rank), dim_a, dim_b)
