import json

import numpy as np
import pytest

from epreserve.channels import build_fusion
from epreserve.measures import composition_program, preservation_set
from epreserve.sdp import (
    Affine,
    ConicProgram,
    available_backends,
    hermitian_basis,
    hermitian_coordinates,
    real_embed,
    replay,
    solve,
)

from factory import PHI_PLUS, proj, rand_hermitian, rand_state

Y = np.array([[0, -1j], [1j, 0]], dtype=complex)


def trace_one_program(c, dim=2):
    p = ConicProgram()
    x = p.variable("X", dim)
    p.add_psd(x, "X")
    p.add_eq(x.trace().map(np.real) - 1.0, "trace")
    p.minimize(x.inner(c).map(np.real))
    return p


# -- real embedding -----------------------------------------------------------


def test_real_embed_identity():
    np.testing.assert_array_equal(real_embed(np.eye(2)), np.eye(4))


def test_real_embed_pauli_y():
    w = np.linalg.eigvalsh(real_embed(Y))
    np.testing.assert_allclose(w, [-1, -1, 1, 1], atol=1e-14)


def test_real_embed_bell_projector_rank():
    e = real_embed(proj(PHI_PLUS))
    w = np.linalg.eigvalsh(e)
    assert e.shape == (8, 8)
    assert w[0] >= -1e-14
    assert np.sum(w > 1e-9) == 2


def test_real_embed_psd_and_trace():
    rng = np.random.default_rng(0)
    for _ in range(50):
        h = rand_hermitian(rng, 4)
        e = real_embed(h)
        assert np.trace(e) == pytest.approx(2 * np.trace(h).real)
        assert (np.linalg.eigvalsh(e)[0] >= -1e-12) == (np.linalg.eigvalsh(h)[0] >= -1e-12)
        # every eigenvalue of H appears twice
        np.testing.assert_allclose(np.linalg.eigvalsh(e), np.repeat(np.linalg.eigvalsh(h), 2), atol=1e-12)


def test_real_embed_rejects_non_hermitian():
    with pytest.raises(ValueError):
        real_embed(np.array([[0, 1], [0, 0]]))
    with pytest.raises(ValueError):
        real_embed(Affine(np.array([[0, 1], [0, 0]], dtype=complex)))


def test_real_embed_of_expression():
    p = ConicProgram()
    x = p.variable("X", 2)
    vals = {"X": hermitian_coordinates(Y)}
    np.testing.assert_allclose(real_embed(x).value(vals), real_embed(Y), atol=1e-15)


# -- modelling layer ----------------------------------------------------------


def test_hermitian_basis_is_orthonormal():
    b = hermitian_basis(3)
    gram = np.real(np.einsum("kij,lij->kl", b.conj(), b))
    np.testing.assert_allclose(gram, np.eye(9), atol=1e-15)
    h = rand_hermitian(np.random.default_rng(1), 3)
    np.testing.assert_allclose(np.tensordot(hermitian_coordinates(h), b, axes=1), h, atol=1e-14)


def test_undeclared_variables_are_rejected():
    other = ConicProgram()
    x = other.variable("X", 2)
    p = ConicProgram()
    with pytest.raises(ValueError):
        p.add_psd(x)
    with pytest.raises(ValueError):
        p.minimize(x.trace().map(np.real))


def test_non_hermitian_constant_is_rejected():
    p = ConicProgram()
    x = p.variable("X", 2)
    with pytest.raises(ValueError):
        p.add_psd(x + Affine(np.array([[0, 1], [0, 0]], dtype=complex)))


def test_duplicate_variable_and_missing_objective():
    p = ConicProgram()
    p.variable("X", 2)
    with pytest.raises(ValueError):
        p.variable("X", 2)
    with pytest.raises(ValueError):
        p.compile()


def test_affine_arithmetic():
    p = ConicProgram()
    x = p.variable("X", 2)
    vals = {"X": hermitian_coordinates(np.diag([1.0, 3.0]))}
    expr = 2 * x - Affine(np.eye(2)) + x / 2
    np.testing.assert_allclose(expr.value(vals), np.diag([1.5, 6.5]))
    assert (x.trace() * 3).value(vals) == pytest.approx(12.0)
    with pytest.raises(TypeError):
        x * np.eye(2)


# -- toy programs with known solutions ----------------------------------------


def test_trace_constraint_forces_value():
    sol = solve(trace_one_program(np.eye(2)))
    assert sol.optimal
    assert abs(sol.optimal_value - 1.0) <= 1e-8


def test_diagonal_cost():
    sol = solve(trace_one_program(np.diag([1.0, 2.0])))
    assert sol.optimal
    assert abs(sol.optimal_value - 1.0) <= 1e-8
    np.testing.assert_allclose(sol.variable_values["X"], np.diag([1.0, 0.0]), atol=1e-7)


def test_smallest_eigenvalue_of_random_hermitian():
    rng = np.random.default_rng(2)
    for d in (2, 3, 4):
        c = rand_hermitian(rng, d)
        sol = solve(trace_one_program(c, d))
        assert sol.optimal
        assert abs(sol.optimal_value - np.linalg.eigvalsh(c)[0]) <= 1e-8


def test_maximisation_reports_maximum():
    p = ConicProgram()
    x = p.variable("X", 2)
    p.add_psd(x)
    p.add_eq(x.trace().map(np.real) - 1.0)
    p.maximize(x.inner(proj(np.array([1, 1j]) / np.sqrt(2))).map(np.real))
    sol = solve(p)
    assert sol.optimal
    assert abs(sol.optimal_value - 1.0) <= 1e-8


def test_fidelity_with_bell_state_under_ppt():
    """Largest overlap of a PPT state with phi+ is 1/2."""
    p = ConicProgram()
    x = p.variable("X", 4)
    p.add_psd(x, "X")
    p.add_psd(x.map(lambda a: a.reshape(2, 2, 2, 2).transpose(0, 3, 2, 1).reshape(4, 4)), "PT")
    p.add_eq(x.trace().map(np.real) - 1.0)
    p.maximize(x.inner(proj(PHI_PLUS)).map(np.real))
    sol = solve(p)
    assert sol.optimal
    assert abs(sol.optimal_value - 0.5) <= 1e-8


def test_inequality_constraint():
    # min x subject to x >= 0.3 in a 1x1 variable
    p = ConicProgram()
    x = p.variable("x", 1)
    p.add_nonneg(x.trace().map(np.real) - 0.3)
    p.minimize(x.trace().map(np.real))
    sol = solve(p)
    assert sol.optimal
    assert abs(sol.optimal_value - 0.3) <= 1e-8


def test_fusion_composition_value():
    sol = solve(composition_program(build_fusion(0), preservation_set()))
    assert sol.optimal
    assert abs(sol.optimal_value - 1.0) <= 1e-6


# -- statuses -----------------------------------------------------------------


def test_infeasible_program():
    p = ConicProgram()
    x = p.variable("X", 2)
    p.add_psd(x)
    p.add_eq(x.trace().map(np.real) + 1.0)
    p.minimize(x.trace().map(np.real))
    sol = solve(p)
    assert sol.status == "infeasible"


def test_unbounded_program():
    p = ConicProgram()
    x = p.variable("X", 2)
    p.add_psd(x)
    p.minimize(-x.trace().map(np.real))
    sol = solve(p)
    assert sol.status == "unbounded"


def test_iteration_cap():
    sol = solve(trace_one_program(np.diag([1.0, 2.0])), max_iter=1)
    assert sol.status == "max_iterations"
    assert not sol.optimal


def test_unknown_backend():
    with pytest.raises(ValueError):
        solve(trace_one_program(np.eye(2)), backend="nope")
    assert "embedded" in available_backends()


# -- invariants ---------------------------------------------------------------


def random_program(rng):
    c = rand_hermitian(rng, 4)
    p = ConicProgram()
    x = p.variable("X", 4)
    p.add_psd(x, "X")
    p.add_psd(Affine(np.eye(4)) - x, "I-X")
    p.add_eq(x.inner(rand_state(rng)).map(np.real) - 0.4, "overlap")
    p.minimize(x.inner(c).map(np.real))
    return p


def test_replay_of_optimal_solutions():
    rng = np.random.default_rng(3)
    for _ in range(10):
        p = random_program(rng)
        sol = solve(p)
        assert sol.optimal
        rep = replay(p, sol)
        assert rep.worst_violation <= 1e-8
        assert abs(rep.objective - sol.optimal_value) <= 1e-9
        assert rep.passes(sol)
        assert set(rep.psd_margins) == {"X", "I-X"}


def test_gap_at_optimal_status():
    rng = np.random.default_rng(4)
    for _ in range(10):
        sol = solve(random_program(rng))
        assert sol.optimal
        assert sol.gap <= 1e-7 * (1 + abs(sol.optimal_value))
        assert sol.primal_residual <= 1e-8


def test_weak_duality_and_monotone_gap():
    rng = np.random.default_rng(5)
    for _ in range(5):
        sol = solve(random_program(rng))
        hist = sol.history
        for rec in hist:
            assert rec.dual_bound <= rec.primal_bound + 1e-12
        gaps = [rec.gap for rec in hist]
        assert all(b <= a for a, b in zip(gaps, gaps[1:]))
        assert np.isfinite(gaps[-1])


def test_scaling_the_objective():
    rng = np.random.default_rng(6)
    c = rand_hermitian(rng, 3)
    base = solve(trace_one_program(c, 3))
    scaled = solve(trace_one_program(10 * c, 3))
    assert scaled.optimal and base.optimal
    assert abs(scaled.optimal_value - 10 * base.optimal_value) <= 1e-6 * abs(10 * base.optimal_value)
    assert np.max(np.abs(scaled.variable_values["X"] - base.variable_values["X"])) <= 1e-6


def test_solve_is_deterministic():
    p1 = random_program(np.random.default_rng(7))
    p2 = random_program(np.random.default_rng(7))
    a, b = solve(p1), solve(p2)
    assert a.optimal_value == b.optimal_value
    assert a.iterations == b.iterations
    np.testing.assert_array_equal(a.variable_values["X"], b.variable_values["X"])


def test_named_expressions_are_evaluated():
    p = trace_one_program(np.diag([1.0, 2.0]))
    x = Affine(np.zeros((2, 2)), {"X": hermitian_basis(2)})
    p.name_expression("double", 2 * x)
    sol = solve(p)
    np.testing.assert_allclose(sol.expression_values["double"], 2 * sol.variable_values["X"], atol=1e-15)


def test_json_dump_is_self_describing():
    data = json.loads(trace_one_program(np.eye(2)).to_json())
    assert data["format"] == "real-sdp/v1"
    assert data["variables"] == [{"name": "X", "dim": 2, "offset": 0}]
    assert len(data["c"]) == 4
    assert len(data["blocks"]) == 1 and data["eq_names"] == ["trace"]
    assert np.array(data["A"]).shape == (1, 4)


def test_cvxpy_backend_agrees():
    pytest.importorskip("cvxpy")
    p = trace_one_program(np.diag([1.0, 2.0]))
    sol = solve(p, backend="cvxpy")
    assert sol.backend == "cvxpy"
    assert sol.optimal
    assert abs(sol.optimal_value - 1.0) <= 1e-6
