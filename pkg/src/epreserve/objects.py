"""Quantum states and channel representations.

A channel on ``n`` qubits (``d = 2**n``) is stored as a process matrix
``chi`` in the operator basis ``E_k = |a_k><b_k|``.  The basis index obeys

    k - 1 = sum_i k_i 2**(i - 1),    E_k = (x)_m |k_m><k_{m+n}|,

so the ket bits carry the low weights and the bra bits the high weights,
with qubit ``A`` first inside each group.  With this ordering the fusion
operator ``|00><00| + |11><11|`` is ``E_1 + E_16``.

The stored matrix is normalised so that a trace-preserving channel has
``tr(chi) = 1``; the channel action is

    Phi(rho) = d * sum_{kj} chi_kj E_k rho E_j^dagger.

Other representations use these conventions:

* Choi matrix ``J = sum_{b b'} |b><b'| (x) Phi(|b><b'|)`` (input factor first).
* Superoperator with column stacking, ``vec(K rho K^dagger) = (conj(K) (x) K) vec(rho)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from . import linalg

TOL = 1e-9


# ---------------------------------------------------------------------------
# operator basis
# ---------------------------------------------------------------------------


@lru_cache(maxsize=None)
def _basis_indices(n_qubits: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Row index, column index and inverse lookup for the basis ``E_k``.

    Returns ``(rows, cols, lookup)`` where ``E_k`` (0-based ``k``) has a single
    unit entry at ``(rows[k], cols[k])`` and ``lookup[r, c]`` is its index.
    """
    if n_qubits not in (1, 2):
        raise ValueError(f"n_qubits must be 1 or 2, got {n_qubits}")
    d = 2**n_qubits
    rows = np.empty(d * d, dtype=int)
    cols = np.empty(d * d, dtype=int)
    lookup = np.empty((d, d), dtype=int)
    for k in range(d * d):
        bits = [(k >> i) & 1 for i in range(2 * n_qubits)]
        ket, bra = bits[:n_qubits], bits[n_qubits:]
        r = int(sum(b << (n_qubits - 1 - m) for m, b in enumerate(ket)))
        c = int(sum(b << (n_qubits - 1 - m) for m, b in enumerate(bra)))
        rows[k], cols[k] = r, c
        lookup[r, c] = k
    for arr in (rows, cols, lookup):
        arr.setflags(write=False)
    return rows, cols, lookup


@dataclass(frozen=True)
class OperatorBasis:
    """The ``4**n`` matrix units ``E_k`` in the process-matrix ordering."""

    n_qubits: int
    elements: np.ndarray = field(repr=False)

    def __len__(self) -> int:
        return len(self.elements)

    def __getitem__(self, k: int) -> np.ndarray:
        """0-based access; ``basis[0]`` is ``E_1``."""
        return self.elements[k]

    def index(self, row: int, col: int) -> int:
        """0-based index ``k`` with ``E_k = |row><col|``."""
        return int(_basis_indices(self.n_qubits)[2][row, col])


@lru_cache(maxsize=None)
def operator_basis(n_qubits: int) -> OperatorBasis:
    rows, cols, _ = _basis_indices(n_qubits)
    d = 2**n_qubits
    el = np.zeros((d * d, d, d), dtype=complex)
    el[np.arange(d * d), rows, cols] = 1.0
    el.setflags(write=False)
    return OperatorBasis(n_qubits, el)


def _n_qubits_for_dim(dim: int) -> int:
    try:
        return {2: 1, 4: 2}[dim]
    except KeyError:
        raise ValueError(f"unsupported Hilbert-space dimension {dim}") from None


def _n_qubits_for_chi(shape: tuple[int, ...]) -> int:
    if len(shape) != 2 or shape[0] != shape[1]:
        raise ValueError(f"process matrix must be square, got shape {shape}")
    try:
        return {4: 1, 16: 2}[shape[0]]
    except KeyError:
        raise ValueError(f"unsupported process-matrix size {shape[0]}") from None


# ---------------------------------------------------------------------------
# value types
# ---------------------------------------------------------------------------


def _frozen(m: np.ndarray) -> np.ndarray:
    m = np.array(m, dtype=complex)
    m.setflags(write=False)
    return m


@dataclass(frozen=True)
class DensityMatrix:
    """A one- or two-qubit density matrix, possibly sub-normalised.

    Parameters
    ----------
    matrix : array_like
        Hermitian positive semidefinite matrix with ``0 <= tr <= 1``.  A
        zero matrix is allowed because heralded channels may annihilate an
        input entirely.
    label : str, optional
        Free-form name, e.g. the preparation label in tomography.
    """

    matrix: np.ndarray = field(repr=False)
    label: str | None = None

    def __post_init__(self):
        m = linalg.as_matrix(self.matrix)
        _n_qubits_for_dim(m.shape[0])
        if m.shape[0] != m.shape[1]:
            raise ValueError(f"density matrix must be square, got {m.shape}")
        if not linalg.is_psd(m, TOL):
            raise ValueError("density matrix must be Hermitian and positive semidefinite")
        tr = float(np.real(np.trace(m)))
        if not (tr <= 1.0 + TOL):
            raise ValueError(f"density matrix trace must not exceed 1, got {tr}")
        object.__setattr__(self, "matrix", _frozen(m))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_qubits(self) -> int:
        return _n_qubits_for_dim(self.dim)

    @property
    def trace(self) -> float:
        return float(np.real(np.trace(self.matrix)))

    def is_ppt(self, tol: float = TOL) -> bool:
        """Positive partial transpose test (two-qubit states only)."""
        return linalg.min_eigenvalue(linalg.partial_transpose(self.matrix, "B")) >= -tol

    @classmethod
    def from_ket(cls, ket, label: str | None = None) -> "DensityMatrix":
        v = np.asarray(ket, dtype=complex).reshape(-1)
        v = v / np.linalg.norm(v)
        return cls(np.outer(v, v.conj()), label)

    def to_json(self) -> dict:
        return matrix_to_json(self.matrix, self.n_qubits, label=self.label)

    @classmethod
    def from_json(cls, data: dict) -> "DensityMatrix":
        return cls(matrix_from_json(data), data.get("label"))


@dataclass(frozen=True)
class ProcessMatrix:
    """Process matrix ``chi`` of a completely positive map.

    ``normalized`` is set automatically when ``tr(chi) = 1`` within
    tolerance, unless given explicitly.
    """

    chi: np.ndarray = field(repr=False)
    normalized: bool | None = None

    def __post_init__(self):
        m = linalg.as_matrix(self.chi)
        _n_qubits_for_chi(m.shape)
        if not linalg.is_psd(m, TOL):
            raise ValueError("process matrix must be Hermitian and positive semidefinite (CP)")
        tr = float(np.real(np.trace(m)))
        if self.normalized is None:
            object.__setattr__(self, "normalized", abs(tr - 1.0) <= TOL)
        elif self.normalized and abs(tr - 1.0) > TOL:
            raise ValueError(f"normalized process must have unit trace, got {tr}")
        object.__setattr__(self, "chi", _frozen(m))

    @property
    def n_qubits(self) -> int:
        return _n_qubits_for_chi(self.chi.shape)

    @property
    def dim(self) -> int:
        return 2**self.n_qubits

    @property
    def trace(self) -> float:
        return float(np.real(np.trace(self.chi)))

    def tp_residual(self) -> float:
        """``max |sum_kj chi_kj E_j^dagger E_k - I|`` scaled by ``d``."""
        d = self.dim
        return float(np.max(np.abs(adjoint_apply_chi(self.chi, np.eye(d)) - np.eye(d))))

    def is_trace_preserving(self, tol: float = 1e-9) -> bool:
        return self.tp_residual() <= tol

    def to_json(self) -> dict:
        return matrix_to_json(self.chi, self.n_qubits, normalized=bool(self.normalized))

    @classmethod
    def from_json(cls, data: dict) -> "ProcessMatrix":
        m = matrix_from_json(data)
        p = cls(m)
        if int(data.get("n_qubits", p.n_qubits)) != p.n_qubits:
            raise ValueError("n_qubits does not match matrix size")
        return p


@dataclass(frozen=True)
class KrausSet:
    """Kraus operators of a (possibly trace-decreasing) CP map."""

    operators: tuple = field(repr=False)

    def __post_init__(self):
        ops = tuple(_frozen(linalg.as_matrix(k)) for k in self.operators)
        if not ops:
            raise ValueError("a Kraus set needs at least one operator")
        shape = ops[0].shape
        if any(k.shape != shape for k in ops) or shape[0] != shape[1]:
            raise ValueError("Kraus operators must be square and share one shape")
        _n_qubits_for_dim(shape[0])
        s = sum(k.conj().T @ k for k in ops)
        if linalg.min_eigenvalue(np.eye(shape[0]) - s) < -TOL:
            raise ValueError("Kraus operators exceed trace preservation (sum K^dagger K > I)")
        object.__setattr__(self, "operators", ops)

    @property
    def dim(self) -> int:
        return self.operators[0].shape[0]

    @property
    def n_qubits(self) -> int:
        return _n_qubits_for_dim(self.dim)

    def apply(self, rho) -> np.ndarray:
        r = _as_array(rho)
        return sum(k @ r @ k.conj().T for k in self.operators)


@dataclass(frozen=True)
class Superoperator:
    """Column-stacked matrix ``S`` with ``vec(Phi(rho)) = S vec(rho)``."""

    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = linalg.as_matrix(self.matrix)
        if m.shape not in ((4, 4), (16, 16)):
            raise ValueError(f"superoperator must be 4x4 or 16x16, got {m.shape}")
        object.__setattr__(self, "matrix", _frozen(m))

    @property
    def n_qubits(self) -> int:
        return _n_qubits_for_chi(self.matrix.shape)

    def apply(self, rho) -> np.ndarray:
        r = _as_array(rho)
        d = r.shape[0]
        return (self.matrix @ r.reshape(-1, order="F")).reshape(d, d, order="F")


@dataclass(frozen=True)
class ChoiMatrix:
    """Choi matrix ``sum |b><b'| (x) Phi(|b><b'|)`` with the input factor first."""

    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = linalg.as_matrix(self.matrix)
        if m.shape not in ((4, 4), (16, 16)):
            raise ValueError(f"Choi matrix must be 4x4 or 16x16, got {m.shape}")
        object.__setattr__(self, "matrix", _frozen(m))

    @property
    def n_qubits(self) -> int:
        return _n_qubits_for_chi(self.matrix.shape)

    def apply(self, rho) -> np.ndarray:
        r = _as_array(rho)
        d = r.shape[0]
        j = self.matrix.reshape(d, d, d, d)  # (b, a, b', a')
        return np.einsum("bacd,bc->ad", j, r)


def _as_array(rho) -> np.ndarray:
    if isinstance(rho, DensityMatrix):
        return rho.matrix
    return linalg.as_matrix(rho)


# ---------------------------------------------------------------------------
# linear kernels on raw arrays (no validation; used inside SDP modelling)
# ---------------------------------------------------------------------------


def chi_tensor(chi: np.ndarray) -> np.ndarray:
    """Reshuffle ``chi`` into ``C[a, b, a', b'] = chi[k(a,b), k(a',b')]``."""
    chi = np.asarray(chi)
    n = _n_qubits_for_chi(chi.shape)
    lookup = _basis_indices(n)[2]
    return chi[lookup[:, :, None, None], lookup[None, None, :, :]]


def chi_from_tensor(c: np.ndarray) -> np.ndarray:
    """Inverse of :func:`chi_tensor`."""
    d = c.shape[0]
    n = _n_qubits_for_dim(d)
    rows, cols, _ = _basis_indices(n)
    return c[rows[:, None], cols[:, None], rows[None, :], cols[None, :]]


def apply_chi(chi: np.ndarray, rho: np.ndarray) -> np.ndarray:
    """``d * sum_kj chi_kj E_k rho E_j^dagger`` for raw arrays.

    Linear in both arguments; no positivity checks.
    """
    c = chi_tensor(chi)
    d = c.shape[0]
    return d * np.einsum("abcd,bd->ac", c, rho)


def adjoint_apply_chi(chi: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Heisenberg-picture action ``d * sum_kj chi_kj E_j^dagger x E_k``."""
    c = chi_tensor(chi)
    d = c.shape[0]
    return d * np.einsum("abcd,ac->bd", c, x)


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------


def apply_process(p: ProcessMatrix, rho) -> DensityMatrix:
    """Apply the channel ``p`` to a state.

    Raises
    ------
    ValueError
        If the qubit counts differ.
    """
    r = _as_array(rho)
    if r.shape != (p.dim, p.dim):
        raise ValueError(f"state of shape {r.shape} does not match a {p.n_qubits}-qubit process")
    out = linalg.hermitian_part(apply_chi(p.chi, r))
    label = rho.label if isinstance(rho, DensityMatrix) else None
    return DensityMatrix(out, label)


def kraus_coefficients(op: np.ndarray) -> np.ndarray:
    """Coefficients ``c_k`` with ``op = sum_k c_k E_k``."""
    op = linalg.as_matrix(op)
    rows, cols, _ = _basis_indices(_n_qubits_for_dim(op.shape[0]))
    return op[rows, cols]


def kraus_to_process(k: KrausSet | Sequence) -> ProcessMatrix:
    """Process matrix ``chi_kj = sum_i c_ik conj(c_ij) / d`` of a Kraus set."""
    if not isinstance(k, KrausSet):
        k = KrausSet(tuple(k))
    c = np.array([kraus_coefficients(op) for op in k.operators])
    chi = c.T @ c.conj() / k.dim
    return ProcessMatrix(linalg.hermitian_part(chi))


def process_to_choi(p: ProcessMatrix) -> ChoiMatrix:
    c = chi_tensor(p.chi)
    d = p.dim
    return ChoiMatrix(d * c.transpose(1, 0, 3, 2).reshape(d * d, d * d))


def choi_to_process(c: ChoiMatrix | np.ndarray) -> ProcessMatrix:
    """Inverse of :func:`process_to_choi`; rejects non-PSD Choi matrices."""
    j = c.matrix if isinstance(c, ChoiMatrix) else linalg.as_matrix(c)
    d = int(round(np.sqrt(j.shape[0])))
    if not linalg.is_psd(j, TOL * max(1.0, float(np.max(np.abs(j))))):
        raise ValueError("Choi matrix is not positive semidefinite: the map is not CP")
    t = j.reshape(d, d, d, d).transpose(1, 0, 3, 2) / d
    return ProcessMatrix(linalg.hermitian_part(chi_from_tensor(t)))


def process_to_super(p: ProcessMatrix) -> Superoperator:
    c = chi_tensor(p.chi)
    d = p.dim
    return Superoperator(d * c.transpose(2, 0, 3, 1).reshape(d * d, d * d))


def super_to_process(s: Superoperator | np.ndarray) -> ProcessMatrix:
    m = s.matrix if isinstance(s, Superoperator) else linalg.as_matrix(s)
    d = int(round(np.sqrt(m.shape[0])))
    t = m.reshape(d, d, d, d).transpose(1, 3, 0, 2) / d
    return ProcessMatrix(linalg.hermitian_part(chi_from_tensor(t)))


def choi_to_kraus(c: ChoiMatrix | np.ndarray, cutoff: float = 1e-10) -> KrausSet:
    """Kraus operators from the eigendecomposition of a Choi matrix.

    Eigenvalues below ``cutoff`` are dropped; a clearly negative eigenvalue
    raises ``ValueError``.
    """
    j = c.matrix if isinstance(c, ChoiMatrix) else linalg.as_matrix(c)
    d = int(round(np.sqrt(j.shape[0])))
    w, v = linalg.hermitian_eig(j)
    if w[0] < -TOL * max(1.0, abs(w[-1])):
        raise ValueError("Choi matrix is not positive semidefinite: the map is not CP")
    ops = [np.sqrt(lam) * v[:, i].reshape(d, d).T for i, lam in enumerate(w) if lam > cutoff]
    if not ops:
        ops = [np.zeros((d, d))]
    return KrausSet(tuple(ops))


def process_to_kraus(p: ProcessMatrix) -> KrausSet:
    return choi_to_kraus(process_to_choi(p))


def tensor_extend(p1: ProcessMatrix, p2: ProcessMatrix) -> ProcessMatrix:
    """Two-qubit process ``p1 (x) p2`` with ``p1`` acting on qubit A."""
    if p1.n_qubits != 1 or p2.n_qubits != 1:
        raise ValueError("tensor_extend needs two single-qubit processes")
    sa = process_to_super(p1).matrix.reshape(2, 2, 2, 2)  # (a', a, c', c) column stacking
    sb = process_to_super(p2).matrix.reshape(2, 2, 2, 2)
    # Output vec index (2a'+b') * 4 + (2a+b) in C order reads axes (a', b', a, b).
    s = np.einsum("pqrs,tuvw->ptqurvsw", sa, sb).reshape(16, 16)
    return super_to_process(s)


def normalize(p: ProcessMatrix) -> ProcessMatrix:
    tr = p.trace
    if tr <= 1e-12:
        raise ValueError("cannot normalize a process with zero trace")
    if p.normalized:
        return p
    return ProcessMatrix(p.chi / tr, normalized=True)


def compose(outer: ProcessMatrix, inner: ProcessMatrix) -> ProcessMatrix:
    """Process of ``outer o inner`` (``inner`` acts first)."""
    if outer.n_qubits != inner.n_qubits:
        raise ValueError("cannot compose processes on different qubit counts")
    s = process_to_super(outer).matrix @ process_to_super(inner).matrix
    return super_to_process(s)


def mix(probs: Iterable[float], processes: Sequence[ProcessMatrix]) -> ProcessMatrix:
    probs = np.asarray(list(probs), dtype=float)
    if len(probs) != len(processes):
        raise ValueError("need one weight per process")
    chi = sum(w * p.chi for w, p in zip(probs, processes))
    return ProcessMatrix(chi)


def identity_process(n_qubits: int = 2) -> ProcessMatrix:
    return kraus_to_process([np.eye(2**n_qubits)])


# ---------------------------------------------------------------------------
# JSON helpers
# ---------------------------------------------------------------------------


def matrix_to_json(m: np.ndarray, n_qubits: int, **extra) -> dict:
    m = np.asarray(m, dtype=complex)
    out = {"n_qubits": int(n_qubits), "re": m.real.tolist(), "im": m.imag.tolist()}
    out.update({k: v for k, v in extra.items() if v is not None})
    return out


def matrix_from_json(data: dict) -> np.ndarray:
    try:
        re = np.asarray(data["re"], dtype=float)
        im = np.asarray(data.get("im", np.zeros_like(re)), dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"malformed matrix JSON: {exc}") from None
    if re.shape != im.shape or re.ndim != 2:
        raise ValueError("matrix JSON needs equal-shape 2-D 're' and 'im' arrays")
    return re + 1j * im
