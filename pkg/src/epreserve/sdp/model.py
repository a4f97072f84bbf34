"""Modelling layer for semidefinite programs over Hermitian matrices.

A :class:`ConicProgram` owns Hermitian matrix variables.  Each ``d x d``
variable is parameterised by ``d**2`` real numbers in an orthonormal
Hermitian basis, and every expression is affine in those numbers:

    expr = const + sum_j x_j coeff_j.

Linear maps act on an expression through :meth:`Affine.map`, which applies
the map to the constant and to every coefficient, so constraints such as
"the output of the channel ``X`` on input ``rho`` is PSD" can be written
with ordinary array code.

:meth:`ConicProgram.compile` lowers the program to the real standard form

    minimise  c^T x
    s.t.      G x + s = h,  s in a product of PSD cones,
              A x = b,

with complex blocks replaced by their real embedding
``[[Re H, -Im H], [Im H, Re H]]``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np


def hermitian_basis(d: int) -> np.ndarray:
    """Orthonormal (Hilbert-Schmidt) basis of ``d x d`` Hermitian matrices.

    Diagonal units come first, then ``(e_ij + e_ji)/sqrt(2)`` and
    ``i(e_ij - e_ji)/sqrt(2)`` for each ``i < j``.
    """
    out = np.zeros((d * d, d, d), dtype=complex)
    k = 0
    for i in range(d):
        out[k, i, i] = 1.0
        k += 1
    r = 1.0 / np.sqrt(2.0)
    for i in range(d):
        for j in range(i + 1, d):
            out[k, i, j] = out[k, j, i] = r
            out[k + 1, i, j] = 1j * r
            out[k + 1, j, i] = -1j * r
            k += 2
    return out


def hermitian_coordinates(m: np.ndarray) -> np.ndarray:
    """Coordinates of a Hermitian matrix in :func:`hermitian_basis`."""
    d = m.shape[0]
    return np.real(np.einsum("kij,ij->k", hermitian_basis(d).conj(), m))


def real_embed(h):
    """Real symmetric embedding ``[[Re H, -Im H], [Im H, Re H]]``.

    Accepts a Hermitian array or an :class:`Affine` matrix expression.  The
    embedding is PSD exactly when ``H`` is, and its trace is twice that of
    ``H``.

    Raises
    ------
    ValueError
        If the (constant part of the) input is not Hermitian.
    """
    if isinstance(h, Affine):
        _require_hermitian(h.const)
        return h.map(_embed_array, real=True)
    h = np.asarray(h, dtype=complex)
    _require_hermitian(h)
    return _embed_array(h)


def _embed_array(h: np.ndarray) -> np.ndarray:
    re, im = np.real(h), np.imag(h)
    return np.block([[re, -im], [im, re]])


def _require_hermitian(m: np.ndarray, tol: float = 1e-9):
    m = np.asarray(m)
    if m.ndim == 2 and (m.shape[0] != m.shape[1] or np.max(np.abs(m - m.conj().T), initial=0) > tol):
        raise ValueError("expression is not Hermitian")


class Affine:
    """Affine expression ``const + sum_v sum_j x_{v,j} coeffs[v][j]``.

    ``const`` is a scalar or a square matrix; ``coeffs[v]`` stacks one
    coefficient of that shape per real parameter of variable ``v``.
    """

    __array_priority__ = 100

    def __init__(self, const, coeffs: Mapping[str, np.ndarray] | None = None):
        self.const = np.asarray(const, dtype=complex)
        self.coeffs = {k: np.asarray(v, dtype=complex) for k, v in (coeffs or {}).items()}
        for k, v in self.coeffs.items():
            if v.shape[1:] != self.const.shape:
                raise ValueError(f"coefficient shape {v.shape[1:]} of {k!r} != {self.const.shape}")

    @property
    def shape(self) -> tuple[int, ...]:
        return self.const.shape

    def _combine(self, other, sign: float) -> "Affine":
        if not isinstance(other, Affine):
            other = Affine(other)
        if other.shape != self.shape:
            raise ValueError(f"shape mismatch {self.shape} vs {other.shape}")
        coeffs = dict(self.coeffs)
        for k, v in other.coeffs.items():
            coeffs[k] = coeffs[k] + sign * v if k in coeffs else sign * v
        return Affine(self.const + sign * other.const, coeffs)

    def __add__(self, other):
        return self._combine(other, 1.0)

    def __radd__(self, other):
        return self._combine(other, 1.0)

    def __sub__(self, other):
        return self._combine(other, -1.0)

    def __rsub__(self, other):
        return (-self)._combine(other, 1.0)

    def __neg__(self):
        return Affine(-self.const, {k: -v for k, v in self.coeffs.items()})

    def __mul__(self, scalar):
        if not np.isscalar(scalar):
            raise TypeError("Affine expressions can only be scaled by numbers; use map()")
        return Affine(scalar * self.const, {k: scalar * v for k, v in self.coeffs.items()})

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return self * (1.0 / scalar)

    def map(self, fn: Callable[[np.ndarray], np.ndarray], real: bool = False) -> "Affine":
        """Apply a linear map to the expression (``fn`` must be linear)."""
        const = fn(self.const)
        coeffs = {k: np.array([fn(c) for c in v]) for k, v in self.coeffs.items()}
        if real:
            const = np.real(const)
            coeffs = {k: np.real(v) for k, v in coeffs.items()}
        return Affine(const, coeffs)

    def trace(self) -> "Affine":
        return self.map(np.trace)

    def inner(self, m) -> "Affine":
        """``tr(M^dagger expr)``, a scalar expression."""
        m = np.asarray(m, dtype=complex)
        return self.map(lambda a: np.vdot(m, a))

    def value(self, values: Mapping[str, np.ndarray]) -> np.ndarray:
        """Evaluate for parameter vectors ``values[v]``."""
        out = self.const.copy()
        for k, v in self.coeffs.items():
            out = out + np.tensordot(values[k], v, axes=1)
        return out


@dataclass
class Variable:
    name: str
    dim: int
    offset: int

    @property
    def n_params(self) -> int:
        return self.dim * self.dim


@dataclass
class Block:
    """One PSD constraint after lowering: ``h - sum_j x_j G[j]`` is PSD."""

    name: str
    G: np.ndarray
    h: np.ndarray
    complex_dim: int

    @property
    def size(self) -> int:
        return self.h.shape[0]


@dataclass
class CompiledProgram:
    c: np.ndarray
    c0: float
    blocks: list[Block]
    A: np.ndarray
    b: np.ndarray
    eq_names: list[str]
    variables: list[Variable]
    sense: str

    @property
    def n(self) -> int:
        return self.c.shape[0]

    def unpack(self, x: np.ndarray) -> dict[str, np.ndarray]:
        out = {}
        for v in self.variables:
            coords = x[v.offset:v.offset + v.n_params]
            out[v.name] = np.tensordot(coords, hermitian_basis(v.dim), axes=1)
        return out


@dataclass
class ConicProgram:
    """Block-structured SDP over Hermitian matrix variables."""

    variables: list[Variable] = field(default_factory=list)
    psd_constraints: list[tuple[str, Affine]] = field(default_factory=list)
    eq_constraints: list[tuple[str, Affine]] = field(default_factory=list)
    objective: Affine | None = None
    sense: str = "minimize"
    expressions: dict[str, Affine] = field(default_factory=dict)

    @property
    def n_params(self) -> int:
        return sum(v.n_params for v in self.variables)

    def variable(self, name: str, dim: int) -> Affine:
        """Declare a ``dim x dim`` Hermitian variable and return it as an expression."""
        if any(v.name == name for v in self.variables):
            raise ValueError(f"variable {name!r} already declared")
        self.variables.append(Variable(name, dim, self.n_params))
        return Affine(np.zeros((dim, dim)), {name: hermitian_basis(dim)})

    def _check_refs(self, expr: Affine):
        known = {v.name for v in self.variables}
        unknown = set(expr.coeffs) - known
        if unknown:
            raise ValueError(f"expression references undeclared variables {sorted(unknown)}")

    def add_psd(self, expr: Affine, name: str | None = None):
        """Require a square Hermitian expression to be PSD."""
        if not isinstance(expr, Affine):
            expr = Affine(expr)
        if expr.const.ndim != 2:
            raise ValueError("PSD constraints need a matrix expression")
        self._check_refs(expr)
        _require_hermitian(expr.const)
        self.psd_constraints.append((name or f"psd{len(self.psd_constraints)}", expr))

    def add_nonneg(self, expr: Affine, name: str | None = None):
        """Require a real scalar expression to be non-negative."""
        if expr.const.ndim != 0:
            raise ValueError("add_nonneg needs a scalar expression")
        self.add_psd(expr.map(lambda a: np.reshape(a, (1, 1))), name)

    def add_eq(self, expr: Affine, name: str | None = None):
        """Require a real scalar expression to vanish."""
        if not isinstance(expr, Affine):
            expr = Affine(expr)
        if expr.const.ndim != 0:
            raise ValueError("equality constraints must be scalar")
        self._check_refs(expr)
        self.eq_constraints.append((name or f"eq{len(self.eq_constraints)}", expr))

    def name_expression(self, name: str, expr: Affine):
        """Register ``expr`` to be evaluated at the solution under ``name``."""
        self._check_refs(expr)
        self.expressions[name] = expr

    def minimize(self, expr: Affine):
        self._set_objective(expr, "minimize")

    def maximize(self, expr: Affine):
        self._set_objective(expr, "maximize")

    def _set_objective(self, expr: Affine, sense: str):
        if not isinstance(expr, Affine):
            expr = Affine(expr)
        if expr.const.ndim != 0:
            raise ValueError("objective must be scalar")
        self._check_refs(expr)
        self.objective = expr
        self.sense = sense

    # -- lowering ---------------------------------------------------------

    def _dense(self, expr: Affine) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(const, coeffs)`` with coeffs stacked over all parameters."""
        coeffs = np.zeros((self.n_params,) + expr.shape, dtype=complex)
        for v in self.variables:
            if v.name in expr.coeffs:
                coeffs[v.offset:v.offset + v.n_params] = expr.coeffs[v.name]
        return expr.const, coeffs

    def compile(self) -> CompiledProgram:
        if self.objective is None:
            raise ValueError("program has no objective")
        n = self.n_params
        const, coeffs = self._dense(self.objective)
        sign = 1.0 if self.sense == "minimize" else -1.0
        c = sign * np.real(coeffs)
        c0 = sign * float(np.real(const))
        blocks = []
        for name, expr in self.psd_constraints:
            k, co = self._dense(expr)
            m = k.shape[0]
            is_real = m == 1 or (np.all(np.abs(np.imag(k)) == 0) and np.all(np.abs(np.imag(co)) == 0))
            if is_real:
                h, g = np.real(k), -np.real(co)
            else:
                h = _embed_array(k)
                g = -np.array([_embed_array(ci) for ci in co]) if n else np.zeros((0, 2 * m, 2 * m))
            g = 0.5 * (g + np.swapaxes(g, 1, 2))
            h = 0.5 * (h + h.T)
            blocks.append(Block(name, g, h, m))
        rows, rhs = [], []
        for name, expr in self.eq_constraints:
            k, co = self._dense(expr)
            rows.append(np.real(co))
            rhs.append(-float(np.real(k)))
        A = np.array(rows).reshape(len(rows), n)
        b = np.array(rhs, dtype=float)
        return CompiledProgram(c, c0, blocks, A, b, [nm for nm, _ in self.eq_constraints],
                               list(self.variables), self.sense)

    # -- diagnostics ------------------------------------------------------

    def to_json(self) -> str:
        """Self-describing dump of the lowered real program."""
        cp = self.compile()
        data = {
            "format": "real-sdp/v1",
            "form": "minimize c.x + c0 s.t. h_b - sum_j x_j G_b[j] PSD, A x = b",
            "sense": self.sense,
            "variables": [{"name": v.name, "dim": v.dim, "offset": v.offset} for v in cp.variables],
            "c": cp.c.tolist(),
            "c0": cp.c0,
            "blocks": [{"name": bl.name, "h": bl.h.tolist(), "G": bl.G.tolist()} for bl in cp.blocks],
            "A": cp.A.tolist(),
            "b": cp.b.tolist(),
            "eq_names": cp.eq_names,
        }
        return json.dumps(data)
