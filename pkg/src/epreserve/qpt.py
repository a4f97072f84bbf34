"""Quantum process tomography for one and two qubits.

Reconstruction works from the outputs of a fixed set of preparable input
states.  Each basis operator ``E_k = |a><b|`` is first written as a linear
combination of input projectors.  Diagonal elements are prepared directly;
a coherence ``|a><b|`` uses the two superpositions ``s = (a + b)/sqrt(2)`` and
``t = (a + i b)/sqrt(2)``:

    |a><b| = |s><s| + i |t><t| - e^{+i pi/4}/sqrt(2) (|a><a| + |b><b|)
    |b><a| = |s><s| - i |t><t| - e^{-i pi/4}/sqrt(2) (|a><a| + |b><b|)

By linearity the same combinations of the measured outputs give
``Phi(E_k)``.  The process matrix then follows from

    chi[(a, b), (a', b')] = <a| Phi(|b><b'|) |a'> / d,

which arranges the ``Phi(E_k)`` as a ``d x d`` grid of ``d x d`` blocks.

A second part simulates Pauli-basis measurements and inverts them
linearly, so the full experimental pipeline can be exercised.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import linalg
from .objects import DensityMatrix, ProcessMatrix, _basis_indices

SQ2 = np.sqrt(2.0)

# single-qubit kets used in preparation labels
KETS_1Q = {
    "0": np.array([1, 0], dtype=complex),
    "1": np.array([0, 1], dtype=complex),
    "+": np.array([1, 1], dtype=complex) / SQ2,
    "-": np.array([1, -1], dtype=complex) / SQ2,
    "R": np.array([1, 1j], dtype=complex) / SQ2,
    "L": np.array([1, -1j], dtype=complex) / SQ2,
}

QPT_LABELS_1Q = ("0", "1", "+", "R")
QPT_LABELS_2Q = (
    "00", "01", "10", "11",
    "0+", "0R", "1+", "1R",
    "+1", "+0", "R1", "R0",
    "phi+", "phi+i", "psi+", "psi+i",
)  # fmt: skip
PRODUCT_LABELS_2Q = tuple(a + b for a in "01+-RL" for b in "01+-RL")

_BELL_KETS = {
    "phi+": np.array([1, 0, 0, 1], dtype=complex) / SQ2,
    "phi+i": np.array([1, 0, 0, 1j], dtype=complex) / SQ2,
    "psi+": np.array([0, 1, 1, 0], dtype=complex) / SQ2,
    "psi+i": np.array([0, 1, 1j, 0], dtype=complex) / SQ2,
}

# (a, b) computational indices -> labels of the states s and t above
_COHERENCE_PAIRS = {
    1: {(0, 1): ("+", "R")},
    2: {
        (0, 1): ("0+", "0R"),
        (2, 3): ("1+", "1R"),
        (0, 2): ("+0", "R0"),
        (1, 3): ("+1", "R1"),
        (0, 3): ("phi+", "phi+i"),
        (1, 2): ("psi+", "psi+i"),
    },
}


def ket(label: str) -> np.ndarray:
    """State vector for a preparation label such as ``"0R"`` or ``"psi+"``."""
    if label in _BELL_KETS:
        return _BELL_KETS[label].copy()
    try:
        v = np.array([1.0 + 0j])
        for ch in label:
            v = np.kron(v, KETS_1Q[ch])
    except KeyError:
        raise ValueError(f"unknown preparation label {label!r}") from None
    return v


def projector(label: str) -> np.ndarray:
    v = ket(label)
    return np.outer(v, v.conj())


def qpt_labels(n_qubits: int) -> tuple[str, ...]:
    try:
        return {1: QPT_LABELS_1Q, 2: QPT_LABELS_2Q}[n_qubits]
    except KeyError:
        raise ValueError(f"n_qubits must be 1 or 2, got {n_qubits}") from None


@dataclass(frozen=True)
class QptInputSet:
    n_qubits: int
    states: tuple[DensityMatrix, ...]

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(s.label for s in self.states)


def qpt_input_states(n_qubits: int = 2) -> QptInputSet:
    return QptInputSet(n_qubits, tuple(DensityMatrix(projector(l), l) for l in qpt_labels(n_qubits)))


def decomposition_coefficients(n_qubits: int) -> np.ndarray:
    """Matrix ``c`` with ``E_k = sum_m c[k, m] rho_in[m]`` (0-based indices)."""
    labels = qpt_labels(n_qubits)
    pos = {l: i for i, l in enumerate(labels)}
    d = 2**n_qubits
    diag_labels = labels[:d]
    _, _, lookup = _basis_indices(n_qubits)
    c = np.zeros((d * d, d * d), dtype=complex)
    for a in range(d):
        c[lookup[a, a], pos[diag_labels[a]]] = 1.0
    w = np.exp(1j * np.pi / 4) / SQ2
    for (a, b), (s, t) in _COHERENCE_PAIRS[n_qubits].items():
        for (r, col), sign, corr in (((a, b), 1j, w), ((b, a), -1j, np.conj(w))):
            k = lookup[r, col]
            c[k, pos[s]] += 1.0
            c[k, pos[t]] += sign
            c[k, pos[diag_labels[a]]] -= corr
            c[k, pos[diag_labels[b]]] -= corr
    return c


def reconstruct_chi(outputs: Sequence, n_qubits: int) -> np.ndarray:
    """Linear QPT map from the ordered output matrices to a raw ``chi`` array.

    No positivity checks are done, so the map may be applied to arbitrary
    (e.g. partially transposed) operators.
    """
    d = 2**n_qubits
    outs = np.array([o.matrix if isinstance(o, DensityMatrix) else np.asarray(o) for o in outputs],
                    dtype=complex)
    if outs.shape != (d * d, d, d):
        raise ValueError(f"expected {d * d} outputs of shape ({d}, {d}), got {outs.shape}")
    phi_e = np.einsum("km,mxy->kxy", decomposition_coefficients(n_qubits), outs)
    _, _, lookup = _basis_indices(n_qubits)
    # tensor C[a, b, a', b'] = Phi(|b><b'|)[a, a'] / d
    t = phi_e[lookup].transpose(2, 0, 3, 1) / d
    rows, cols, _ = _basis_indices(n_qubits)
    return t[rows[:, None], cols[:, None], rows[None, :], cols[None, :]]


def _check_outputs(outputs, n_qubits: int) -> list:
    labels = qpt_labels(n_qubits)
    if len(outputs) != len(labels):
        raise ValueError(f"need {len(labels)} outputs, got {len(outputs)}")
    for want, o in zip(labels, outputs):
        if isinstance(o, DensityMatrix) and o.label is not None and o.label != want:
            raise ValueError(f"output for {want!r} is labelled {o.label!r}; check the input order")
        m = o.matrix if isinstance(o, DensityMatrix) else linalg.as_matrix(o)
        if not linalg.is_hermitian(m, 1e-9):
            raise ValueError("QPT outputs must be Hermitian")
    return list(outputs)


def qpt_reconstruct_2q(outputs: Sequence) -> ProcessMatrix:
    """Two-qubit process matrix from the 16 outputs in :data:`QPT_LABELS_2Q` order."""
    chi = reconstruct_chi(_check_outputs(outputs, 2), 2)
    return ProcessMatrix(linalg.hermitian_part(chi))


def qpt_reconstruct_1q(outputs: Sequence) -> ProcessMatrix:
    """Single-qubit process matrix from outputs for ``|0>, |1>, |+>, |R>``."""
    chi = reconstruct_chi(_check_outputs(outputs, 1), 1)
    return ProcessMatrix(linalg.hermitian_part(chi))


# ---------------------------------------------------------------------------
# measurement simulation and state tomography
# ---------------------------------------------------------------------------

_PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}
_EIGEN = {"X": ("+", "-"), "Y": ("R", "L"), "Z": ("0", "1")}


def settings(n_qubits: int) -> list[str]:
    return ["".join(s) for s in itertools.product("XYZ", repeat=n_qubits)]


def outcomes(n_qubits: int) -> list[str]:
    return ["".join(s) for s in itertools.product("+-", repeat=n_qubits)]


@dataclass(frozen=True)
class TomographyRecord:
    """Pauli-basis measurement counts for one prepared input.

    ``counts[setting][outcome]`` holds the number of shots with outcome
    string ``outcome`` (``+``/``-`` per qubit) in the local basis
    ``setting`` (``X``/``Y``/``Z`` per qubit).  ``weight`` is the
    probability that the state was produced at all; it is below one for
    heralded (post-selected) processes and rescales the reconstructed state.
    Non-integer counts are permitted only when ``exact`` is set.
    """

    input_label: str
    counts: Mapping[str, Mapping[str, float]] = field(repr=False)
    shots: int
    weight: float = 1.0
    exact: bool = False

    def __post_init__(self):
        if self.shots < 1:
            raise ValueError("shots must be at least 1")
        if not (0.0 <= self.weight <= 1.0 + 1e-9):
            raise ValueError(f"weight must lie in [0, 1], got {self.weight}")
        frozen = {}
        for s, row in self.counts.items():
            vals = {o: float(n) for o, n in row.items()}
            if any(v < 0 for v in vals.values()):
                raise ValueError(f"negative count in setting {s}")
            if not self.exact and any(v != int(v) for v in vals.values()):
                raise ValueError(f"non-integer count in setting {s}; use exact records")
            if abs(sum(vals.values()) - self.shots) > 1e-9 * self.shots:
                raise ValueError(f"counts for setting {s} do not sum to shots={self.shots}")
            frozen[s] = vals
        object.__setattr__(self, "counts", frozen)

    @property
    def n_qubits(self) -> int:
        return len(next(iter(self.counts)))

    def to_json(self) -> dict:
        def num(v):
            return v if self.exact else int(v)

        out = {
            "input": self.input_label,
            "shots": int(self.shots),
            "settings": {s: {o: num(v) for o, v in row.items()} for s, row in self.counts.items()},
        }
        if self.weight != 1.0:
            out["weight"] = self.weight
        if self.exact:
            out["exact"] = True
        return out

    @classmethod
    def from_json(cls, data: dict, exact: bool | None = None) -> "TomographyRecord":
        try:
            return cls(
                input_label=str(data["input"]),
                counts=data["settings"],
                shots=int(data["shots"]),
                weight=float(data.get("weight", 1.0)),
                exact=bool(data.get("exact", False)) if exact is None else exact,
            )
        except (KeyError, TypeError, AttributeError) as exc:
            raise ValueError(f"malformed tomography record: {exc}") from None


def born_probabilities(rho) -> dict[str, dict[str, float]]:
    """Outcome probabilities for every local Pauli setting, for a normalised ``rho``."""
    m = rho.matrix if isinstance(rho, DensityMatrix) else linalg.as_matrix(rho)
    n = {2: 1, 4: 2}[m.shape[0]]
    tr = np.real(np.trace(m))
    m = m / tr if tr > 1e-15 else np.eye(2**n) / 2**n
    probs = {}
    for s in settings(n):
        row = {}
        for o in outcomes(n):
            v = np.array([1.0 + 0j])
            for basis, sign in zip(s, o):
                v = np.kron(v, KETS_1Q[_EIGEN[basis][sign == "-"]])
            row[o] = float(np.clip(np.real(v.conj() @ m @ v), 0.0, None))
        tot = sum(row.values())
        probs[s] = {o: p / tot for o, p in row.items()}
    return probs


def _weight_of(rho) -> float:
    m = rho.matrix if isinstance(rho, DensityMatrix) else linalg.as_matrix(rho)
    return float(np.clip(np.real(np.trace(m)), 0.0, 1.0))


def _label_of(rho, label):
    if label is not None:
        return label
    return rho.label if isinstance(rho, DensityMatrix) and rho.label else ""


def simulate_counts(rho, shots: int, seed: int, label: str | None = None) -> TomographyRecord:
    """Sample multinomial Pauli-basis counts; deterministic given ``seed``."""
    if shots < 1:
        raise ValueError("shots must be at least 1")
    rng = np.random.default_rng(seed)
    probs = born_probabilities(rho)
    counts = {}
    for s, row in probs.items():
        keys = list(row)
        draws = rng.multinomial(shots, [row[k] for k in keys])
        counts[s] = {k: int(n) for k, n in zip(keys, draws)}
    return TomographyRecord(_label_of(rho, label), counts, shots, weight=_weight_of(rho))


def exact_record(rho, shots: int = 1, label: str | None = None) -> TomographyRecord:
    """Record whose counts equal ``shots`` times the exact Born probabilities."""
    probs = born_probabilities(rho)
    counts = {s: {o: shots * p for o, p in row.items()} for s, row in probs.items()}
    return TomographyRecord(_label_of(rho, label), counts, shots, weight=_weight_of(rho), exact=True)


def state_tomography(record: TomographyRecord) -> DensityMatrix:
    """Linear-inversion estimate followed by projection onto the PSD cone."""
    n = record.n_qubits
    missing = [s for s in settings(n) if s not in record.counts]
    if missing:
        raise ValueError(f"record {record.input_label!r} is missing settings {missing}")
    d = 2**n
    freqs = {s: {o: v / record.shots for o, v in row.items()} for s, row in record.counts.items()}
    rho = np.zeros((d, d), dtype=complex)
    for pauli in itertools.product("IXYZ", repeat=n):
        support = [i for i, p in enumerate(pauli) if p != "I"]
        vals = []
        for s in settings(n):
            if any(s[i] != pauli[i] for i in support):
                continue
            vals.append(sum(f * np.prod([1 if o[i] == "+" else -1 for i in support])
                            for o, f in freqs[s].items()))
        op = np.array([[1.0 + 0j]])
        for p in pauli:
            op = np.kron(op, _PAULI[p])
        rho += np.mean(vals) * op
    rho = record.weight * rho / d
    return DensityMatrix(linalg.psd_projection(rho), record.input_label)


# ---------------------------------------------------------------------------
# full pipeline
# ---------------------------------------------------------------------------


def _by_label(records: Sequence[TomographyRecord]) -> dict[str, TomographyRecord]:
    out: dict[str, TomographyRecord] = {}
    dups = []
    for r in records:
        if r.input_label in out:
            dups.append(r.input_label)
        out[r.input_label] = r
    if dups:
        raise ValueError(f"duplicate input labels: {sorted(set(dups))}")
    return out


def missing_labels(records: Sequence[TomographyRecord]) -> list[str]:
    """Labels still needed to complete either the canonical or the product-state set."""
    have = {r.input_label for r in records}
    n = records[0].n_qubits if records else 2
    canonical = [l for l in qpt_labels(n) if l not in have]
    if n == 2 and have and have <= set(PRODUCT_LABELS_2Q) and not have <= set(QPT_LABELS_2Q):
        return [l for l in PRODUCT_LABELS_2Q if l not in have]
    return canonical


def synthesize_canonical_outputs(product_outputs: Mapping[str, np.ndarray]) -> list[np.ndarray]:
    """Outputs for the 16 canonical inputs from outputs on the 36 product inputs.

    Each canonical input is expanded (minimum-norm least squares) in the
    product-state projectors, and the outputs are combined the same way.
    """
    labels = list(PRODUCT_LABELS_2Q)
    vecs = np.array([projector(l).reshape(-1) for l in labels]).T  # 16 x 36
    outs = np.array([product_outputs[l] for l in labels])
    result = []
    for l in QPT_LABELS_2Q:
        w, *_ = np.linalg.lstsq(vecs, projector(l).reshape(-1), rcond=None)
        result.append(np.einsum("i,ixy->xy", w, outs))
    return result


def qpt_from_counts(records: Sequence[TomographyRecord]) -> ProcessMatrix:
    """State tomography on every record, reconstruction, then PSD projection.

    Accepts the canonical input set (4 or 16 records) or, for two qubits, the
    36 Pauli-eigenstate product inputs.
    """
    records = list(records)
    if not records:
        raise ValueError("no tomography records given")
    by = _by_label(records)
    n = records[0].n_qubits
    if n == 2 and set(by) == set(PRODUCT_LABELS_2Q):
        outs = {l: state_tomography(r).matrix for l, r in by.items()}
        outputs = synthesize_canonical_outputs(outs)
    else:
        miss = [l for l in qpt_labels(n) if l not in by]
        extra = sorted(set(by) - set(qpt_labels(n)))
        if miss or extra:
            raise ValueError(f"incomplete QPT record set: missing {miss}, unexpected {extra}")
        outputs = [state_tomography(by[l]).matrix for l in qpt_labels(n)]
    chi = linalg.hermitian_part(reconstruct_chi(outputs, n))
    return ProcessMatrix(linalg.psd_projection(chi))
