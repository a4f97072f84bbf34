"""Dense complex matrix helpers for one- and two-qubit operators.

Matrices are plain ``numpy.ndarray`` objects.  For two-qubit operators the
first tensor factor is qubit ``A`` and row index ``2*a + b`` labels ``|a b>``.
"""

from __future__ import annotations

import numpy as np

PSD_TOL = 1e-9


def as_matrix(m) -> np.ndarray:
    """Return ``m`` as a 2-D complex array."""
    arr = np.asarray(m, dtype=complex)
    if arr.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {arr.shape}")
    return arr


def is_hermitian(m, tol: float = PSD_TOL) -> bool:
    m = as_matrix(m)
    if m.shape[0] != m.shape[1]:
        return False
    return bool(np.max(np.abs(m - m.conj().T), initial=0.0) <= tol)


def is_psd(m, tol: float = PSD_TOL) -> bool:
    """Hermitian within ``tol`` and smallest eigenvalue at least ``-tol``."""
    m = as_matrix(m)
    if not is_hermitian(m, tol):
        return False
    return bool(min_eigenvalue(m) >= -tol)


def hermitian_part(m) -> np.ndarray:
    m = as_matrix(m)
    return 0.5 * (m + m.conj().T)


def kron(a, b) -> np.ndarray:
    return np.kron(as_matrix(a), as_matrix(b))


def _check_two_qubit(m) -> np.ndarray:
    m = as_matrix(m)
    if m.shape != (4, 4):
        raise ValueError(f"expected a 4x4 two-qubit matrix, got shape {m.shape}")
    return m


def _subsystem_axis(subsystem: str) -> int:
    try:
        return {"A": 0, "B": 1}[subsystem.upper()]
    except (KeyError, AttributeError):
        raise ValueError(f"subsystem must be 'A' or 'B', got {subsystem!r}") from None


def partial_transpose(m, subsystem: str = "B") -> np.ndarray:
    """Transpose the indices of one qubit of a 4x4 operator."""
    t = _check_two_qubit(m).reshape(2, 2, 2, 2)  # (a, b, a', b')
    if _subsystem_axis(subsystem) == 0:
        t = t.transpose(2, 1, 0, 3)
    else:
        t = t.transpose(0, 3, 2, 1)
    return t.reshape(4, 4)


def partial_trace(m, subsystem: str = "B") -> np.ndarray:
    """Trace out ``subsystem`` of a 4x4 operator, returning the 2x2 remainder."""
    t = _check_two_qubit(m).reshape(2, 2, 2, 2)
    if _subsystem_axis(subsystem) == 0:
        return np.einsum("abac->bc", t)
    return np.einsum("abcb->ac", t)


def hermitian_eig(m, tol: float = 1e-10) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition of a Hermitian matrix.

    Returns
    -------
    (eigenvalues, eigenvectors)
        Real eigenvalues in ascending order and a unitary matrix whose
        columns are the matching eigenvectors.

    Raises
    ------
    ValueError
        If ``m`` is not Hermitian within ``tol`` (relative to its scale).
    """
    m = as_matrix(m)
    scale = max(1.0, float(np.max(np.abs(m), initial=0.0)))
    if not is_hermitian(m, tol * scale):
        raise ValueError("hermitian_eig requires a Hermitian matrix")
    w, v = np.linalg.eigh(hermitian_part(m))
    return w, v


def min_eigenvalue(m) -> float:
    return float(np.linalg.eigvalsh(hermitian_part(m))[0])


def hs_inner(a, b) -> complex:
    """Hilbert-Schmidt inner product ``tr(a^dagger b)``."""
    a, b = as_matrix(a), as_matrix(b)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return complex(np.vdot(a, b))


def psd_projection(m, trace: float | None = None) -> np.ndarray:
    """Clip negative eigenvalues of a Hermitian matrix to zero.

    The result is rescaled to ``trace`` (defaults to the input trace).  A
    matrix with no positive spectrum is returned as zeros.
    """
    h = hermitian_part(m)
    target = float(np.real(np.trace(h))) if trace is None else float(trace)
    w, v = np.linalg.eigh(h)
    w = np.clip(w, 0.0, None)
    out = (v * w) @ v.conj().T
    tr = float(np.real(np.trace(out)))
    if tr <= 0.0:
        return np.zeros_like(out)
    return out * (target / tr)


def trace_distance(a, b) -> float:
    d = hermitian_part(as_matrix(a) - as_matrix(b))
    return 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh(d))))
