"""Entanglement preservation and creation measures of two-qubit processes.

A process is *incapable* of preserving entanglement when every output is
separable.  For two qubits separability is equivalent to a positive partial
transpose (PPT), so ``X`` is incapable exactly when ``T_B o X`` (partial
transpose after the channel) is a positive map.  Positivity of a map is not
a semidefinite condition.  The preservation set used by the measures asks
instead that ``T_B o X`` be *decomposable*:

* ``X`` is PSD,
* ``T_B o X = Phi_1 + Phi_2 o T`` with ``Phi_1``, ``Phi_2`` completely
  positive and ``T`` the full transpose.

Both terms map states to PSD matrices, so every input, not only the 16
tomography states, leaves with a PPT output.  In the process-matrix
picture the condition reads ``pt(X) = P + tr(Q)`` with ``P, Q`` PSD, where
``pt`` and ``tr`` are the linear maps rebuilding the process matrices of
``T_B o X`` and ``Q o T`` by tomography.  The set is convex and closed
under composition with any completely positive map, which is what the
measure properties rely on.

The direct test of the 16 tomography outputs (PSD and PPT) is available
through :meth:`IncapableConstraintSet.violations`.  It is necessary but not
sufficient for incapability (see ``tests``).

The creation set only asks that separable inputs stay separable.  The PPT
condition is imposed on a finite list of product inputs, so the creation
measures are lower bounds of the exact ones.

Measures (each solved as an SDP):

* ``alpha``: smallest capable weight ``a`` in ``chi = a chi_C + X`` with
  ``X`` incapable and ``tr X = 1 - a``.
* ``beta``: smallest ``tr X - 1`` such that ``X - chi`` is PSD and ``X`` is
  incapable (the amount of mixing noise that removes the capability).
* ``f_threshold``: largest ``tr(X chi_target)`` over normalised incapable
  ``X``.  Any process with a larger fidelity to the target is capable.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from . import linalg
from .objects import ProcessMatrix, apply_chi, normalize
from .qpt import PRODUCT_LABELS_2Q, QPT_LABELS_2Q, projector, reconstruct_chi
from .sdp import Affine, ConicProgram, SdpSolution, solve

PRESERVATION = "preservation"
CREATION = "creation"
ZERO_CLIP = 1e-6
SUPPORT_TOL = 1e-10


class SolverError(RuntimeError):
    """Raised when an SDP behind a measure does not reach optimal status."""

    def __init__(self, quantity: str, solution: SdpSolution):
        self.quantity = quantity
        self.solution = solution
        super().__init__(
            f"{quantity}: solver status {solution.status} after {solution.iterations} iterations "
            f"(gap {solution.gap:.3g}, primal residual {solution.primal_residual:.3g})"
        )


# ---------------------------------------------------------------------------
# linear maps on process matrices, precomputed as dense matrices
# ---------------------------------------------------------------------------


def _unit(k: int) -> np.ndarray:
    e = np.zeros(256, dtype=complex)
    e[k] = 1.0
    return e.reshape(16, 16)


@lru_cache(maxsize=None)
def _output_map(label_or_key) -> np.ndarray:
    """Matrix ``O`` with ``vec(X(rho)) = O vec(X)`` for a cached input state."""
    rho = _STATE_CACHE[label_or_key]
    return np.array([apply_chi(_unit(k), rho).reshape(-1) for k in range(256)]).T


_STATE_CACHE: dict = {}


def _register_state(rho: np.ndarray) -> tuple:
    key = tuple(np.round(np.asarray(rho, dtype=complex).reshape(-1), 15))
    _STATE_CACHE.setdefault(key, np.asarray(rho, dtype=complex))
    return key


def _pt_process(chi: np.ndarray) -> np.ndarray:
    outs = [linalg.partial_transpose(apply_chi(chi, projector(l)), "B") for l in QPT_LABELS_2Q]
    return reconstruct_chi(outs, 2)


@lru_cache(maxsize=None)
def _pt_process_map() -> np.ndarray:
    return np.array([_pt_process(_unit(k)).reshape(-1) for k in range(256)]).T


def _transpose_first(chi: np.ndarray) -> np.ndarray:
    outs = [apply_chi(chi, projector(l).T) for l in QPT_LABELS_2Q]
    return reconstruct_chi(outs, 2)


@lru_cache(maxsize=None)
def _transpose_first_map() -> np.ndarray:
    return np.array([_transpose_first(_unit(k)).reshape(-1) for k in range(256)]).T


def pt_process(chi) -> np.ndarray:
    """Process matrix of ``T_B o chi`` (generally not PSD)."""
    arr = chi.chi if isinstance(chi, ProcessMatrix) else np.asarray(chi)
    return (_pt_process_map() @ arr.reshape(-1)).reshape(16, 16)


def _mapped(mat: np.ndarray, shape: tuple[int, int]):
    return lambda a: (mat @ np.asarray(a).reshape(-1)).reshape(shape)


# ---------------------------------------------------------------------------
# constraint sets
# ---------------------------------------------------------------------------


def random_pure_products(n: int, seed: int) -> list[np.ndarray]:
    """``n`` Haar-random pure product states of two qubits."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        va = rng.normal(size=2) + 1j * rng.normal(size=2)
        vb = rng.normal(size=2) + 1j * rng.normal(size=2)
        v = np.kron(va / np.linalg.norm(va), vb / np.linalg.norm(vb))
        out.append(np.outer(v, v.conj()))
    return out


@dataclass(frozen=True)
class IncapableConstraintSet:
    """PSD conditions describing the incapable processes of one flavour.

    ``input_states`` lists the states whose outputs must be PPT: the 16
    tomography inputs (preservation) or a separable discretisation
    (creation).
    """

    flavor: str
    input_states: tuple = field(repr=False)
    labels: tuple = ()

    def direct_constraints(self, x: Affine) -> list[tuple[str, Affine]]:
        """Named expressions that must be PSD, listed state by state.

        Preservation: ``X``, and every tomography output with its partial
        transpose.  Creation: ``X``, every tomography output, and the
        partial transpose of the output of every separable input.
        """
        cons = [("chi", x)]
        for lab in QPT_LABELS_2Q:
            key = _register_state(projector(lab))
            out = x.map(_mapped(_output_map(key), (4, 4)))
            cons.append((f"out[{lab}]", out))
            if self.flavor == PRESERVATION:
                cons.append((f"pt[{lab}]", out.map(lambda a: linalg.partial_transpose(a, "B"))))
        if self.flavor == CREATION:
            for lab, rho in zip(self.labels, self.input_states):
                key = _register_state(rho)
                pt = _output_map(key).reshape(2, 2, 2, 2, 256).transpose(0, 3, 2, 1, 4).reshape(16, 256)
                cons.append((f"pt[{lab}]", x.map(_mapped(pt, (4, 4)))))
        return cons

    def add_to(self, program: ConicProgram, x: Affine, include_implied: bool = False,
               psd_form: Affine | None = None):
        """Add the constraints for ``x`` to ``program``.

        Conditions implied by ``X`` being PSD (the outputs of the
        tomography inputs) are only added when ``include_implied`` is set.
        The preservation flavour declares an auxiliary variable ``Q`` for
        the decomposition of ``T_B o X``.  ``psd_form`` replaces ``x`` in the
        condition ``X`` PSD, for programs that parameterise ``X`` on a face
        of the cone.
        """
        program.add_psd(x if psd_form is None else psd_form, "chi")
        direct = self.direct_constraints(x)[1:]
        if self.flavor == CREATION:
            for name, expr in direct:
                if include_implied or name.startswith("pt["):
                    program.add_psd(expr, name)
            return
        q = program.variable("Q", 16)
        program.add_psd(q, "Q")
        rest = x.map(_mapped(_pt_process_map(), (16, 16))) - q.map(_mapped(_transpose_first_map(), (16, 16)))
        program.add_psd(rest, "pt_process-Q")
        if include_implied:
            for name, expr in direct:
                program.add_psd(expr, name)

    def violations(self, chi) -> dict[str, float]:
        """Smallest eigenvalue of every direct constraint at ``chi``."""
        arr = chi.chi if isinstance(chi, ProcessMatrix) else np.asarray(chi)
        return {name: linalg.min_eigenvalue(expr.const) for name, expr in self.direct_constraints(Affine(arr))}

    def contains(self, chi, tol: float = 1e-7) -> bool:
        """Whether ``chi`` passes every direct constraint to ``tol``."""
        return all(v >= -tol for v in self.violations(chi).values())


def preservation_set() -> IncapableConstraintSet:
    states = tuple(projector(l) for l in QPT_LABELS_2Q)
    return IncapableConstraintSet(PRESERVATION, states, QPT_LABELS_2Q)


def creation_set(n_random: int = 0, seed: int = 0) -> IncapableConstraintSet:
    """Creation set on the 36 Pauli-eigenstate products plus ``n_random`` random products."""
    states = [projector(l) for l in PRODUCT_LABELS_2Q]
    labels = list(PRODUCT_LABELS_2Q)
    extra = random_pure_products(n_random, seed)
    states += extra
    labels += [f"rand{i}" for i in range(len(extra))]
    return IncapableConstraintSet(CREATION, tuple(states), tuple(labels))


# ---------------------------------------------------------------------------
# programs
# ---------------------------------------------------------------------------


@dataclass
class SolverOptions:
    gap_tol: float = 1e-7
    feas_tol: float = 1e-8
    max_iter: int = 200
    backend: str = "embedded"


def _prepared(chi) -> np.ndarray:
    if not isinstance(chi, ProcessMatrix):
        chi = ProcessMatrix(chi)
    if chi.n_qubits != 2:
        raise ValueError("measures are defined for two-qubit processes")
    return normalize(chi).chi


def _support(c: np.ndarray, rel_tol: float = SUPPORT_TOL) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues and eigenvectors of the numerical range of a PSD matrix."""
    w, v = np.linalg.eigh(c)
    keep = w > rel_tol * max(w[-1], 0.0)
    return w[keep], v[:, keep]


def composition_program(chi, cset: IncapableConstraintSet) -> ConicProgram:
    """``min 1 - tr X`` s.t. ``chi - X`` PSD and ``X`` in the incapable set.

    ``0 <= X <= chi`` confines ``X`` to the range of ``chi``, so ``X`` is
    written as ``V Y V^dagger`` with ``V`` an orthonormal basis of that
    range.  The reduced program has strictly feasible points even when
    ``chi`` is rank deficient.  The full ``X`` is available as the named
    expression ``"X"``.
    """
    c = _prepared(chi)
    w, v = _support(c)
    p = ConicProgram()
    y = p.variable("Y", len(w))
    x = y.map(lambda a: v @ a @ v.conj().T)
    p.add_psd(Affine(np.diag(w)) - y, "chi-X")
    cset.add_to(p, x, psd_form=y)
    p.name_expression("X", x)
    p.minimize(1.0 - y.trace().map(np.real))
    return p


def robustness_program(chi, cset: IncapableConstraintSet) -> ConicProgram:
    """``min tr X - 1`` s.t. ``X - chi`` PSD, ``tr X >= 1``, ``X`` incapable."""
    c = _prepared(chi)
    p = ConicProgram()
    x = p.variable("X", 16)
    p.add_psd(x - Affine(c), "X-chi")
    tr = x.trace().map(np.real)
    p.add_nonneg(tr - 1.0, "trace>=1")
    cset.add_to(p, x)
    p.name_expression("X", x)
    p.minimize(tr - 1.0)
    return p


def threshold_program(target, cset: IncapableConstraintSet) -> ConicProgram:
    """``max tr(X chi_target)`` over incapable ``X`` with unit trace."""
    t = _prepared(target)
    p = ConicProgram()
    x = p.variable("X", 16)
    cset.add_to(p, x)
    p.name_expression("X", x)
    p.add_eq(x.trace().map(np.real) - 1.0, "trace=1")
    p.maximize(x.inner(t).map(np.real))
    return p


def _run(quantity: str, program: ConicProgram, opts: SolverOptions | None) -> SdpSolution:
    opts = opts or SolverOptions()
    sol = solve(program, gap_tol=opts.gap_tol, feas_tol=opts.feas_tol, max_iter=opts.max_iter,
                backend=opts.backend)
    if not sol.optimal:
        raise SolverError(quantity, sol)
    return sol


def solve_measure(quantity: str, chi, opts: SolverOptions | None = None,
                  cset: IncapableConstraintSet | None = None) -> SdpSolution:
    """Solve the SDP behind ``quantity`` and return the full solution."""
    builders = {
        "alpha_pre": (composition_program, PRESERVATION),
        "beta_pre": (robustness_program, PRESERVATION),
        "f_threshold": (threshold_program, PRESERVATION),
        "alpha_cre": (composition_program, CREATION),
        "beta_cre": (robustness_program, CREATION),
    }
    try:
        build, flavor = builders[quantity]
    except KeyError:
        raise ValueError(f"unknown quantity {quantity!r}") from None
    if cset is None:
        cset = preservation_set() if flavor == PRESERVATION else creation_set()
    return _run(quantity, build(chi, cset), opts)


def alpha_pre(chi, opts: SolverOptions | None = None) -> float:
    """Preservation composition: the capable fraction that cannot be removed."""
    return solve_measure("alpha_pre", chi, opts).optimal_value


def beta_pre(chi, opts: SolverOptions | None = None) -> float:
    """Preservation robustness: noise weight needed to make ``chi`` incapable."""
    return solve_measure("beta_pre", chi, opts).optimal_value


def f_threshold(target, opts: SolverOptions | None = None) -> float:
    """Best fidelity with ``target`` reachable by an incapable process."""
    return solve_measure("f_threshold", target, opts).optimal_value


def alpha_cre(chi, opts: SolverOptions | None = None, cset: IncapableConstraintSet | None = None) -> float:
    return solve_measure("alpha_cre", chi, opts, cset).optimal_value


def beta_cre(chi, opts: SolverOptions | None = None, cset: IncapableConstraintSet | None = None) -> float:
    return solve_measure("beta_cre", chi, opts, cset).optimal_value


def clip_difference(value: float) -> float:
    return 0.0 if -ZERO_CLIP <= value < 0.0 else value


def alpha_pre_prime(chi, opts: SolverOptions | None = None) -> float:
    """Preservation that is not explained by creation: ``alpha_pre - alpha_cre``."""
    return clip_difference(alpha_pre(chi, opts) - alpha_cre(chi, opts))


def f_expt(chi, target) -> float:
    """``tr(chi chi_target)`` for the normalised processes."""
    a, t = _prepared(chi), _prepared(target)
    return float(np.real(linalg.hs_inner(a, t)))


def is_incapable(chi, tol: float = 1e-7) -> bool:
    """Membership in the preservation-incapable set by direct eigenvalue checks."""
    return preservation_set().contains(_prepared(chi), tol)


def worst_product_pt_eigenvalue(chi, n_samples: int = 10_000, seed: int = 0) -> float:
    """Smallest PT eigenvalue of outputs over random pure product inputs.

    Audits a creation-measure optimiser: a negative value means the finite
    constraint list let through a process that creates entanglement.
    """
    arr = chi.chi if isinstance(chi, ProcessMatrix) else np.asarray(chi)
    worst = np.inf
    for rho in random_pure_products(n_samples, seed):
        out = linalg.partial_transpose(apply_chi(arr, rho), "B")
        worst = min(worst, linalg.min_eigenvalue(out))
    return float(worst)


# ---------------------------------------------------------------------------
# report
# ---------------------------------------------------------------------------


@dataclass
class MeasureReport:
    alpha_pre: float
    beta_pre: float
    f_expt: float | None = None
    f_threshold: float | None = None
    alpha_cre: float | None = None
    beta_cre: float | None = None
    alpha_pre_prime: float | None = None
    solver: dict = field(default_factory=dict)

    VALUE_FIELDS = ("alpha_pre", "beta_pre", "f_expt", "f_threshold", "alpha_cre", "beta_cre",
                    "alpha_pre_prime")

    def to_dict(self) -> dict:
        out = {k: getattr(self, k) for k in self.VALUE_FIELDS}
        out["solver"] = self.solver
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=False)


def measure_report(chi, target=None, creation: bool = False, opts: SolverOptions | None = None,
                   n_random_products: int = 0, seed: int = 0) -> MeasureReport:
    """Evaluate every requested measure, stopping at the first solver failure."""
    pres = preservation_set()
    sols = {
        "alpha_pre": solve_measure("alpha_pre", chi, opts, pres),
        "beta_pre": solve_measure("beta_pre", chi, opts, pres),
    }
    report = MeasureReport(sols["alpha_pre"].optimal_value, sols["beta_pre"].optimal_value)
    if target is not None:
        report.f_expt = f_expt(chi, target)
        sols["f_threshold"] = solve_measure("f_threshold", target, opts, pres)
        report.f_threshold = sols["f_threshold"].optimal_value
    if creation:
        cre = creation_set(n_random_products, seed)
        sols["alpha_cre"] = solve_measure("alpha_cre", chi, opts, cre)
        sols["beta_cre"] = solve_measure("beta_cre", chi, opts, cre)
        report.alpha_cre = sols["alpha_cre"].optimal_value
        report.beta_cre = sols["beta_cre"].optimal_value
        report.alpha_pre_prime = clip_difference(report.alpha_pre - report.alpha_cre)
    report.solver = {k: s.diagnostics() for k, s in sols.items()}
    return report


def compose_with(chi: ProcessMatrix, inner: Sequence[ProcessMatrix] | ProcessMatrix) -> ProcessMatrix:
    """Convenience wrapper: ``chi o inner`` via superoperators."""
    from .objects import compose

    return compose(chi, inner)
