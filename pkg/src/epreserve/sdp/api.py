"""Solve contract shared by all backends."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .model import CompiledProgram, ConicProgram, hermitian_coordinates
from .solver import IterationRecord, solve_compiled

STATUSES = ("optimal", "infeasible", "unbounded", "max_iterations")


@dataclass
class SdpSolution:
    """Result of a solve.

    ``optimal_value`` and ``dual_value`` are reported in the sense of the
    program (a maximisation reports the maximum).  ``gap`` is the larger of
    the complementarity ``<s, z>`` and ``|primal - dual|``.  ``history`` is
    recorded in minimisation form, so its objectives and bounds carry the
    opposite sign for a maximisation.
    """

    optimal_value: float
    variable_values: dict[str, np.ndarray]
    status: str
    gap: float
    iterations: int
    dual_value: float = float("nan")
    primal_residual: float = float("nan")
    dual_residual: float = float("nan")
    backend: str = "embedded"
    solve_time: float = 0.0
    history: list[IterationRecord] = field(default_factory=list, repr=False)
    expression_values: dict[str, np.ndarray] = field(default_factory=dict, repr=False)

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"

    def diagnostics(self) -> dict:
        return {
            "status": self.status,
            "gap": self.gap,
            "iterations": self.iterations,
            "primal_residual": self.primal_residual,
            "dual_residual": self.dual_residual,
            "dual_value": self.dual_value,
            "backend": self.backend,
        }


Backend = Callable[[CompiledProgram, float, float, int], SdpSolution]
_BACKENDS: dict[str, Backend] = {}


def register_backend(name: str, fn: Backend):
    """Make ``fn(compiled, gap_tol, feas_tol, max_iter)`` available to :func:`solve`."""
    _BACKENDS[name] = fn


def available_backends() -> list[str]:
    return sorted(_BACKENDS)


def _embedded(prog: CompiledProgram, gap_tol: float, feas_tol: float, max_iter: int) -> SdpSolution:
    res = solve_compiled(prog, gap_tol=gap_tol, feas_tol=feas_tol, max_iter=max_iter)
    sign = 1.0 if prog.sense == "minimize" else -1.0
    return SdpSolution(
        optimal_value=sign * res.primal_objective,
        variable_values=prog.unpack(res.x),
        status=res.status,
        gap=res.gap,
        iterations=res.iterations,
        dual_value=sign * res.dual_objective,
        primal_residual=res.primal_residual,
        dual_residual=res.dual_residual,
        backend="embedded",
        solve_time=res.solve_time,
        history=res.history,
    )


register_backend("embedded", _embedded)


def _cvxpy_backend(prog: CompiledProgram, gap_tol: float, feas_tol: float, max_iter: int) -> SdpSolution:
    import time

    import cvxpy as cp

    t0 = time.perf_counter()
    x = cp.Variable(prog.n)
    cons = []
    for bl in prog.blocks:
        m = bl.size
        expr = bl.h - cp.reshape(bl.G.reshape(prog.n, -1).T @ x, (m, m), order="C")
        cons.append((expr + expr.T) / 2 >> 0)
    if prog.A.shape[0]:
        cons.append(prog.A @ x == prog.b)
    problem = cp.Problem(cp.Minimize(prog.c @ x + prog.c0), cons)
    problem.solve(solver=cp.CLARABEL)
    status = {
        cp.OPTIMAL: "optimal",
        cp.INFEASIBLE: "infeasible",
        cp.UNBOUNDED: "unbounded",
    }.get(problem.status, "max_iterations")
    sign = 1.0 if prog.sense == "minimize" else -1.0
    xv = x.value if x.value is not None else np.zeros(prog.n)
    value = float(problem.value) if status == "optimal" else float("nan")
    return SdpSolution(
        optimal_value=sign * value,
        variable_values=prog.unpack(xv),
        status=status,
        gap=float("nan"),
        iterations=int(problem.solver_stats.num_iters or 0),
        backend="cvxpy",
        solve_time=time.perf_counter() - t0,
    )


register_backend("cvxpy", _cvxpy_backend)


def solve(program: ConicProgram, gap_tol: float = 1e-7, feas_tol: float = 1e-8,
          max_iter: int = 200, backend: str = "embedded") -> SdpSolution:
    """Solve ``program`` with the chosen backend (the embedded solver by default)."""
    try:
        fn = _BACKENDS[backend]
    except KeyError:
        raise ValueError(f"unknown backend {backend!r}; available: {available_backends()}") from None
    sol = fn(program.compile(), gap_tol, feas_tol, max_iter)
    if program.expressions:
        coords = _coordinates(sol)
        sol.expression_values = {k: e.value(coords) for k, e in program.expressions.items()}
    return sol


def _coordinates(solution: SdpSolution) -> dict[str, np.ndarray]:
    return {name: hermitian_coordinates(np.asarray(m)) for name, m in solution.variable_values.items()}


@dataclass
class Replay:
    """Constraints and objective re-evaluated at a returned solution.

    ``psd_margins`` holds the smallest eigenvalue of each PSD constraint and
    ``eq_residuals`` the absolute value of each equality constraint.
    """

    objective: float
    psd_margins: dict[str, float]
    eq_residuals: dict[str, float]

    @property
    def worst_violation(self) -> float:
        worst = max((-m for m in self.psd_margins.values()), default=0.0)
        worst = max([worst, *self.eq_residuals.values()])
        return max(worst, 0.0)

    def passes(self, solution: SdpSolution, feas_tol: float = 1e-8, objective_tol: float = 1e-9) -> bool:
        return (self.worst_violation <= feas_tol
                and abs(self.objective - solution.optimal_value) <= objective_tol)


def replay(program: ConicProgram, solution: SdpSolution) -> Replay:
    """Evaluate every constraint of ``program`` at ``solution.variable_values``."""
    coords = _coordinates(solution)
    psd = {}
    for name, expr in program.psd_constraints:
        v = expr.value(coords)
        psd[name] = float(np.linalg.eigvalsh(0.5 * (v + v.conj().T))[0])
    eq = {name: float(abs(np.real(expr.value(coords)))) for name, expr in program.eq_constraints}
    obj = float(np.real(program.objective.value(coords)))
    return Replay(obj, psd, eq)
