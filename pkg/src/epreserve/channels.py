"""Builders for the channels evaluated by the measures.

Gates, heralded photon fusion with timing noise, local mixtures (LOSR),
a measure-and-prepare example, and Lindblad dynamics of two coupled qubits
with depolarising noise on qubit B.  Polarisation is mapped to qubits as
``|H> = |0>`` and ``|V> = |1>``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np
from scipy.linalg import expm

from . import linalg
from .objects import (
    KrausSet,
    ProcessMatrix,
    Superoperator,
    choi_to_process,
    identity_process,
    kraus_to_process,
    matrix_from_json,
    mix,
    super_to_process,
    tensor_extend,
)

I2 = np.eye(2, dtype=complex)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)

GATES = {
    "I": I2,
    "X": PAULI_X,
    "Y": PAULI_Y,
    "Z": PAULI_Z,
    "H": np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2),
    "T": np.diag([1, np.exp(1j * np.pi / 4)]),
    "CNOT": np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex),
    "CZ": np.diag([1, 1, 1, -1]).astype(complex),
}

# heralded fusion at a polarising beam splitter: both photons H or both V
FUSION_OP = np.diag([1, 0, 0, 1]).astype(complex)
NOISE_OPS = (np.diag([1, 0, 0, 0]).astype(complex), np.diag([0, 0, 0, 1]).astype(complex))


def gate_unitary(name: str) -> np.ndarray:
    try:
        return GATES[name.upper()].copy()
    except (KeyError, AttributeError):
        raise ValueError(f"unknown gate {name!r}; choose from {sorted(GATES)}") from None


def build_gate(name: str) -> ProcessMatrix:
    """Process of an ideal gate (one qubit for I, X, Y, Z, H, T; two for CNOT, CZ)."""
    return kraus_to_process([gate_unitary(name)])


def fully_depolarizing(n_qubits: int = 1) -> ProcessMatrix:
    """The channel ``rho -> tr(rho) I/d``."""
    d = 2**n_qubits
    ops = []
    for a in range(d):
        for b in range(d):
            k = np.zeros((d, d), dtype=complex)
            k[a, b] = 1.0 / np.sqrt(d)
            ops.append(k)
    return kraus_to_process(ops)


def build_fusion(p_noise: float) -> ProcessMatrix:
    """Unnormalised fusion process with timing noise, trace 1/2.

    ``(1 - p) * fusion + p * noise`` where the noise case replaces the
    coherent projector with the incoherent pair ``|HH><HH|``, ``|VV><VV|``.
    """
    p = float(p_noise)
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p_noise must lie in [0, 1], got {p_noise}")
    ideal = kraus_to_process([FUSION_OP])
    noise = kraus_to_process(list(NOISE_OPS))
    return ProcessMatrix((1 - p) * ideal.chi + p * noise.chi)


def _as_process(k) -> ProcessMatrix:
    if isinstance(k, ProcessMatrix):
        return k
    if isinstance(k, KrausSet):
        return kraus_to_process(k)
    return kraus_to_process(list(k))


def build_losr(probs: Sequence[float], local_pairs: Sequence[tuple]) -> ProcessMatrix:
    """Mixture ``sum_i p_i chi_i^A (x) chi_i^B`` of independent local channels.

    Each entry of ``local_pairs`` holds two single-qubit channels given as
    :class:`KrausSet`, a list of Kraus matrices or a :class:`ProcessMatrix`.
    """
    probs = np.asarray(probs, dtype=float)
    if len(probs) != len(local_pairs):
        raise ValueError("need one probability per local pair")
    if np.any(probs < 0) or abs(probs.sum() - 1.0) > 1e-9:
        raise ValueError("probabilities must be non-negative and sum to 1")
    parts = [tensor_extend(_as_process(a), _as_process(b)) for a, b in local_pairs]
    return mix(probs, parts)


def build_example_eq8() -> ProcessMatrix:
    """Measure-and-prepare channel heralding a Bell pair.

    Measures ``{|00><00|, I - |00><00|}``; the first outcome prepares
    ``|phi+>``, the second prepares ``(I - |phi+><phi+|)/3``.
    """
    p00 = np.diag([1, 0, 0, 0]).astype(complex)
    phi = np.array([1, 0, 0, 1], dtype=complex) / np.sqrt(2)
    bell = np.outer(phi, phi.conj())
    rest = (np.eye(4) - bell) / 3
    choi = np.kron(p00.T, bell) + np.kron((np.eye(4) - p00).T, rest)
    return choi_to_process(choi)


# ---------------------------------------------------------------------------
# Lindblad dynamics
# ---------------------------------------------------------------------------


def interaction_hamiltonian() -> np.ndarray:
    """``(1/2) sum_jk (-1)^{jk} |jk><jk|`` in units of the coupling."""
    return 0.5 * np.diag([1, 1, 1, -1]).astype(complex)


@dataclass(frozen=True)
class LindbladGenerator:
    """Liouvillian of ``d rho/dt = -i[H, rho] + gamma/2 sum_P (P_B rho P_B - rho)``.

    ``P`` runs over the three Pauli matrices acting on qubit B, so that each
    Pauli error occurs at rate ``gamma/2``.  The matrix uses column stacking.
    """

    hamiltonian: np.ndarray = field(repr=False)
    jump_rate: float
    superop: Superoperator = field(repr=False)

    def apply(self, rho) -> np.ndarray:
        return self.superop.apply(rho)


def lindblad_generator(gamma: float) -> LindbladGenerator:
    gamma = float(gamma)
    if not np.isfinite(gamma) or gamma < 0:
        raise ValueError(f"gamma must be a finite non-negative number, got {gamma}")
    h = interaction_hamiltonian()
    eye = np.eye(4)
    liou = -1j * (np.kron(eye, h) - np.kron(h.T, eye))
    for p in (PAULI_X, PAULI_Y, PAULI_Z):
        jump = np.kron(I2, p)
        liou += 0.5 * gamma * (np.kron(jump.conj(), jump) - np.eye(16))
    return LindbladGenerator(h, gamma, Superoperator(liou))


def build_lindblad_process(tau: float, gamma: float) -> ProcessMatrix:
    """Process generated by evolving for dimensionless time ``tau``."""
    tau = float(tau)
    if not np.isfinite(tau) or tau < 0:
        raise ValueError(f"tau must be a finite non-negative number, got {tau}")
    gen = lindblad_generator(gamma)
    return super_to_process(expm(gen.superop.matrix * tau))


# ---------------------------------------------------------------------------
# declarative channel description
# ---------------------------------------------------------------------------

KINDS = (
    "gate",
    "fusion",
    "fusion_noisy",
    "losr",
    "example_eq8",
    "lindblad",
    "depolarize_tensor_id",
    "custom_kraus",
    "custom_chi",
)


def _kraus_from_json(items) -> list[np.ndarray]:
    if not isinstance(items, list) or not items:
        raise ValueError("expected a non-empty list of operator matrices")
    return [matrix_from_json(m) for m in items]


@dataclass(frozen=True)
class ChannelSpec:
    """A channel described by ``kind`` and kind-specific parameters.

    JSON form is flat, e.g. ``{"kind": "fusion_noisy", "p_noise": 0.3}`` or
    ``{"kind": "gate", "name": "CNOT"}``.
    """

    kind: str
    params: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown channel kind {self.kind!r}; choose from {list(KINDS)}")
        p = self.params
        if self.kind == "fusion_noisy":
            pn = float(p.get("p_noise", 0.0))
            if not 0.0 <= pn <= 1.0:
                raise ValueError(f"p_noise must lie in [0, 1], got {pn}")
        if self.kind == "lindblad" and float(p.get("gamma", 0.0)) < 0:
            raise ValueError("gamma must be non-negative")
        if self.kind == "losr":
            probs = np.asarray(p.get("probs", []), dtype=float)
            if probs.size == 0 or abs(probs.sum() - 1.0) > 1e-9 or np.any(probs < 0):
                raise ValueError("losr probabilities must be non-negative and sum to 1")

    @classmethod
    def from_dict(cls, data: dict) -> "ChannelSpec":
        if not isinstance(data, dict) or "kind" not in data:
            raise ValueError("channel spec must be a JSON object with a 'kind' field")
        params = {k: v for k, v in data.items() if k != "kind"}
        return cls(str(data["kind"]), params)

    def to_dict(self) -> dict:
        return {"kind": self.kind, **self.params}

    def build(self) -> ProcessMatrix:
        """The described channel as a two-qubit process.

        Single-qubit gates act on qubit A with the identity on qubit B.
        """
        p = self.params
        k = self.kind
        if k == "gate":
            chi = build_gate(str(p.get("name", "")))
            if chi.n_qubits == 1:
                chi = tensor_extend(chi, identity_process(1))
            return chi
        if k == "fusion":
            return build_fusion(0.0)
        if k == "fusion_noisy":
            return build_fusion(float(p.get("p_noise", 0.0)))
        if k == "example_eq8":
            return build_example_eq8()
        if k == "lindblad":
            return build_lindblad_process(float(p.get("tau", 0.0)), float(p.get("gamma", 0.0)))
        if k == "depolarize_tensor_id":
            q = float(p.get("p", 1.0))
            if not 0.0 <= q <= 1.0:
                raise ValueError(f"p must lie in [0, 1], got {q}")
            local = mix([1 - q, q], [identity_process(1), fully_depolarizing(1)])
            return tensor_extend(local, identity_process(1))
        if k == "losr":
            pairs = [(_kraus_from_json(a), _kraus_from_json(b)) for a, b in p.get("pairs", [])]
            return build_losr(p["probs"], pairs)
        if k == "custom_kraus":
            chi = kraus_to_process(_kraus_from_json(p.get("operators")))
        else:  # custom_chi
            chi = ProcessMatrix.from_json(p.get("process", {}))
        if chi.n_qubits == 1:
            chi = tensor_extend(chi, identity_process(1))
        return chi


def process_fidelity(a: ProcessMatrix, b: ProcessMatrix) -> float:
    """``tr(chi_a chi_b)`` of the normalised processes."""
    return float(np.real(linalg.hs_inner(a.chi / a.trace, b.chi / b.trace)))
