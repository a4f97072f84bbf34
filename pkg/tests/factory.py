"""Random states and channels shared by the test modules."""

from __future__ import annotations

import numpy as np

from epreserve.objects import ProcessMatrix, choi_to_process, kraus_to_process, mix, tensor_extend

PHI_PLUS = np.array([1, 0, 0, 1], dtype=complex) / np.sqrt(2)
PHI_MINUS = np.array([1, 0, 0, -1], dtype=complex) / np.sqrt(2)
PSI_PLUS = np.array([0, 1, 1, 0], dtype=complex) / np.sqrt(2)


def proj(v) -> np.ndarray:
    v = np.asarray(v, dtype=complex)
    return np.outer(v, v.conj())


def rand_ket(rng, d: int) -> np.ndarray:
    v = rng.normal(size=d) + 1j * rng.normal(size=d)
    return v / np.linalg.norm(v)


def rand_state(rng, d: int = 4, rank: int | None = None) -> np.ndarray:
    """Random density matrix of the given rank (full rank by default)."""
    rank = rank or d
    g = rng.normal(size=(d, rank)) + 1j * rng.normal(size=(d, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def rand_product_state(rng) -> np.ndarray:
    return np.kron(rand_state(rng, 2), rand_state(rng, 2))


def rand_hermitian(rng, d: int) -> np.ndarray:
    g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return (g + g.conj().T) / 2


def rand_unitary(rng, d: int) -> np.ndarray:
    q, r = np.linalg.qr(rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d)))
    return q * (np.diag(r) / np.abs(np.diag(r)))


def rand_kraus(rng, d: int, n_ops: int, trace_preserving: bool = True) -> list[np.ndarray]:
    """Kraus operators from a random isometry, optionally shrunk to be trace-decreasing."""
    g = rng.normal(size=(n_ops * d, d)) + 1j * rng.normal(size=(n_ops * d, d))
    q, _ = np.linalg.qr(g)
    ops = [q[i * d:(i + 1) * d] for i in range(n_ops)]
    if not trace_preserving:
        ops = [k * rng.uniform(0.3, 1.0) for k in ops]
    return ops


def rand_process(rng, n_qubits: int = 2, n_ops: int = 2, trace_preserving: bool = True) -> ProcessMatrix:
    return kraus_to_process(rand_kraus(rng, 2**n_qubits, n_ops, trace_preserving))


def rand_entanglement_breaking_qubit(rng) -> ProcessMatrix:
    """Measure-and-prepare qubit channel with a random two-outcome measurement."""
    povm = rand_kraus(rng, 2, 2)
    ops = []
    for k in povm:
        w, v = np.linalg.eigh(k.conj().T @ k)
        psi = rand_ket(rng, 2)
        ops += [np.sqrt(lam) * np.outer(psi, vec.conj()) for lam, vec in zip(w, v.T) if lam > 1e-12]
    return kraus_to_process(ops)


def rand_incapable(rng, n_terms: int = 2) -> ProcessMatrix:
    """Random mixture of local channels with one entanglement-breaking side.

    Every term sends each input, entangled or not, to a separable output.
    """
    parts = []
    for _ in range(n_terms):
        eb = rand_entanglement_breaking_qubit(rng)
        other = rand_process(rng, n_qubits=1, n_ops=2)
        parts.append(tensor_extend(eb, other) if rng.random() < 0.5 else tensor_extend(other, eb))
    return mix(rng.dirichlet(np.ones(n_terms)), parts)


def rand_capable(rng) -> ProcessMatrix:
    """Random unitary process mixed with a random incapable one."""
    q = rng.uniform(0.2, 0.9)
    return mix([q, 1 - q], [kraus_to_process([rand_unitary(rng, 4)]), rand_incapable(rng)])


def measure_prepare_phi_minus() -> ProcessMatrix:
    """Measure ``{|phi-><phi-|, I - |phi-><phi-|}``; prepare ``phi-`` or the complement state.

    Every tomography input overlaps ``|phi->`` by at most one half, so all
    sixteen tomography outputs are PPT, yet ``|phi->`` itself is reproduced.
    """
    p = proj(PHI_MINUS)
    rest = np.eye(4) - p
    choi = np.kron(p.T, p) + np.kron(rest.T, rest / 3)
    return choi_to_process(choi)
