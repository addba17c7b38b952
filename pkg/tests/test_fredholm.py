"""Quadrature grids, the Nystrom solve of (lam + K) w = f0, range-of-
operator targets, the continuous objective, and bias decay in lam."""

import json

import numpy as np
import pytest
import scipy.stats

import rkhsreg.fredholm as fredholm_mod
from rkhsreg.estimator import KernelExpansion, evaluate_batch, rkhs_norm_sq
from rkhsreg.fredholm import (
    DesignMeasure,
    QuadratureGrid,
    bias_norm_sq,
    build_grid,
    continuous_objective,
    f0_in_range,
    flambda_expansion,
    solve_coefficient,
)
from rkhsreg.kernels import KernelSpec, kernel_eval

GL2_OFFSET = 0.2886751345948129  # 1 / (2 sqrt(3))
UNIFORM = DesignMeasure.uniform(0.0, 1.0)
CONSTANT = KernelSpec("constant", dim=1)
GAUSS = KernelSpec("gaussian", 0.25, 1)


def test_gauss_legendre_two_point_rule():
    grid = build_grid(UNIFORM, 2)
    np.testing.assert_allclose(
        grid.nodes[:, 0], [0.5 - GL2_OFFSET, 0.5 + GL2_OFFSET], atol=1e-15
    )
    np.testing.assert_allclose(grid.weights, [0.5, 0.5], atol=1e-15)
    np.testing.assert_allclose(grid.density_values, [1.0, 1.0], atol=1e-15)


def test_quadrature_integrates_polynomials():
    grid = build_grid(UNIFORM, 200)
    assert float(grid.weights @ grid.nodes[:, 0]) == pytest.approx(0.5, abs=1e-12)
    assert float(grid.weights @ grid.nodes[:, 0] ** 3) == pytest.approx(0.25, abs=1e-12)


def test_dirac_grid_collapses():
    grid = build_grid(DesignMeasure.dirac(0.3), 50)
    assert grid.m == 1
    assert grid.nodes[0, 0] == 0.3
    assert grid.weights[0] == 1.0


def test_truncated_gaussian_grid():
    measure = DesignMeasure.truncated_gaussian(0.0, 1.0, 0.5, 0.3)
    grid = build_grid(measure, 64)
    assert np.all(grid.weights > 0)
    assert float(grid.weights.sum()) == pytest.approx(1.0, abs=1e-12)
    a, b = (0.0 - 0.5) / 0.3, (1.0 - 0.5) / 0.3
    ref_mean = float(scipy.stats.truncnorm.mean(a, b, loc=0.5, scale=0.3))
    assert float(grid.weights @ grid.nodes[:, 0]) == pytest.approx(ref_mean, abs=1e-8)


def test_truncated_gaussian_midpoint_fallback():
    measure = DesignMeasure.truncated_gaussian(0.0, 1.0, 0.5, 0.3)
    grid = build_grid(measure, 2)
    np.testing.assert_allclose(grid.nodes[:, 0], [0.25, 0.75], atol=1e-15)
    assert float(grid.weights.sum()) == pytest.approx(1.0, abs=1e-12)


def test_uniform_2d_tensor_grid():
    measure = DesignMeasure.uniform((0.0, 0.0), (1.0, 2.0))
    grid = build_grid(measure, 16)
    assert grid.m == 16
    assert float(grid.weights.sum()) == pytest.approx(1.0, abs=1e-12)
    total = float(grid.weights @ (grid.nodes[:, 0] + grid.nodes[:, 1]))
    assert total == pytest.approx(0.5 + 1.0, abs=1e-12)


def test_grid_validation():
    with pytest.raises(ValueError):
        build_grid(UNIFORM, 0)
    with pytest.raises(ValueError):
        DesignMeasure("pareto")
    with pytest.raises(ValueError):
        DesignMeasure.uniform(1.0, 0.0)
    with pytest.raises(ValueError):
        QuadratureGrid(np.array([0.0, 1.0]), np.array([0.7, 0.7]))  # sum != 1
    with pytest.raises(ValueError):
        QuadratureGrid(np.array([0.0, 1.0]), np.array([1.5, -0.5]))  # negative


def test_constant_kernel_solution_closed_form():
    # With k = 1 the operator is rank one, and constant targets give
    # w = f0 / (lam + 1) exactly.
    grid = build_grid(UNIFORM, 64)
    for lam, c in ((1.0, 1.0), (0.25, 2.0), (10.0, -0.5)):
        f0 = np.full(grid.m, c)
        sol = solve_coefficient(CONSTANT, grid, f0, lam)
        np.testing.assert_allclose(sol.w_values, f0 / (lam + 1.0), atol=1e-10)
        np.testing.assert_allclose(sol.flambda_values, f0 / (lam + 1.0), atol=1e-10)
        assert sol.residual_max <= 1e-9


def test_constant_kernel_zero_target():
    grid = build_grid(UNIFORM, 16)
    sol = solve_coefficient(CONSTANT, grid, np.zeros(16), 0.5)
    np.testing.assert_allclose(sol.w_values, np.zeros(16), atol=1e-14)


def test_dirac_scalar_closed_form():
    grid = build_grid(DesignMeasure.dirac(0.3), 1)
    sol = solve_coefficient(GAUSS, grid, np.array([2.0]), 0.5)
    assert sol.w_values[0] == pytest.approx(2.0 / 1.5, abs=1e-12)
    assert sol.flambda_values[0] == pytest.approx(2.0 / 1.5, abs=1e-12)


def test_identity_residual_across_kernels_and_lambdas():
    # f0 - f_lambda = lam * w holds at the nodes to solver precision.
    designs = [(UNIFORM, 64), (DesignMeasure.truncated_gaussian(0.0, 1.0, 0.4, 0.25), 32)]
    kernels = [GAUSS, KernelSpec("laplace", 0.5, 1), KernelSpec("rational_quadratic", 1.0, 1)]
    for measure, m in designs:
        grid = build_grid(measure, m)
        w0 = np.sin(2 * np.pi * grid.nodes[:, 0])
        for spec in kernels:
            f0, _ = f0_in_range(spec, grid, w0)
            for lam in (1e-3, 0.1, 1.0):
                sol = solve_coefficient(spec, grid, f0, lam)
                assert sol.residual_max <= 1e-9


def test_solver_flags_inconsistent_discretization(monkeypatch):
    grid = build_grid(UNIFORM, 8)
    monkeypatch.setattr(fredholm_mod, "solve_spd", lambda A, b, *a, **k: np.zeros_like(b))
    with pytest.raises(ArithmeticError):
        solve_coefficient(GAUSS, grid, np.ones(8), 0.5)


def test_solver_input_validation():
    grid = build_grid(UNIFORM, 8)
    with pytest.raises(ValueError):
        solve_coefficient(GAUSS, grid, np.ones(8), 0.0)
    with pytest.raises(ValueError):
        solve_coefficient(GAUSS, grid, np.ones(7), 0.5)


def test_flambda_expansion_zero_and_literal():
    grid = build_grid(UNIFORM, 16)
    zero_sol = solve_coefficient(CONSTANT, grid, np.zeros(16), 1.0)
    assert rkhs_norm_sq(flambda_expansion(zero_sol)) == 0.0
    sol = solve_coefficient(CONSTANT, grid, np.ones(16), 1.0)
    flam = flambda_expansion(sol)
    # f_lambda is the constant 1/2, of unit-kernel norm 1/2.
    grid_pts = np.linspace(0, 1, 7)
    np.testing.assert_allclose(evaluate_batch(flam, grid_pts), np.full(7, 0.5), atol=1e-10)
    assert rkhs_norm_sq(flam) == pytest.approx(0.25, abs=1e-10)


def test_flambda_norm_matches_double_sum():
    grid = build_grid(UNIFORM, 24)
    w0 = np.sin(2 * np.pi * grid.nodes[:, 0])
    f0, _ = f0_in_range(GAUSS, grid, w0)
    sol = solve_coefficient(GAUSS, grid, f0, 0.2)
    flam = flambda_expansion(sol)
    coeffs = np.asarray(flam.coeffs)
    nodes = grid.nodes
    double_sum = sum(
        coeffs[i] * coeffs[j] * kernel_eval(GAUSS, nodes[i], nodes[j])
        for i in range(grid.m)
        for j in range(grid.m)
    )
    assert rkhs_norm_sq(flam) == pytest.approx(double_sum, abs=1e-10)


def test_f0_in_range_zero_and_constant_kernel():
    grid = build_grid(UNIFORM, 32)
    f0, c0 = f0_in_range(GAUSS, grid, np.zeros(32))
    np.testing.assert_allclose(f0, np.zeros(32), atol=1e-15)
    assert c0 == 0.0
    # constant kernel with w0 = x: f0 = integral of x = 1/2, c0 = 1/2.
    f0c, c0c = f0_in_range(CONSTANT, grid, grid.nodes[:, 0])
    np.testing.assert_allclose(f0c, np.full(32, 0.5), atol=1e-12)
    assert c0c == pytest.approx(0.5, abs=1e-12)


def test_f0_grid_refinement_agreement():
    w0 = lambda x: np.sin(2 * np.pi * x)
    probes = np.array([0.1, 0.37, 0.82])
    values = []
    for m in (200, 400):
        grid = build_grid(UNIFORM, m)
        w0_vals = w0(grid.nodes[:, 0])
        f0_expansion = KernelExpansion(GAUSS, grid.nodes, grid.weights * w0_vals)
        values.append(evaluate_batch(f0_expansion, probes))
    np.testing.assert_allclose(values[0], values[1], atol=1e-6)


def test_continuous_objective_noise_floor_only():
    grid = build_grid(UNIFORM, 16)
    sol = solve_coefficient(GAUSS, grid, np.zeros(16), 0.3)
    assert continuous_objective(sol, 0.04) == pytest.approx(0.04, abs=1e-15)


def test_continuous_objective_rank_one_literal():
    # Constant kernel, f0 = 1, lam = 1: w = 1/2, f_lambda = 1/2, and
    # lam <w, Kw> + lam^2 ||w||^2 = 1/4 + 1/4 = 1/2.
    grid = build_grid(UNIFORM, 16)
    sol = solve_coefficient(CONSTANT, grid, np.ones(16), 1.0)
    assert continuous_objective(sol, 0.0) == pytest.approx(0.5, abs=1e-10)


def test_continuous_objective_two_routes():
    # lam <w, f_lambda> + lam^2 ||w||^2 = lam <w, f0> because
    # f0 - f_lambda = lam w; both quadrature routes must agree.
    grid = build_grid(UNIFORM, 48)
    w0 = np.sin(2 * np.pi * grid.nodes[:, 0])
    f0, _ = f0_in_range(GAUSS, grid, w0)
    for lam in (0.05, 0.2, 1.0):
        sol = solve_coefficient(GAUSS, grid, f0, lam)
        route_a = continuous_objective(sol, 0.04)
        route_b = 0.04 + lam * float((grid.weights * sol.w_values) @ sol.f0_values)
        assert route_a == pytest.approx(route_b, abs=1e-12)


def test_continuous_objective_decomposed_form():
    # irreducible + ||f0 - f_lambda||_L2^2 + lam ||f_lambda||_k^2 is the
    # same value: the L2 gap is lam^2 ||w||_L2^2 and the penalty term is
    # lam <w, Kw>.
    grid = build_grid(UNIFORM, 48)
    w0 = np.sin(2 * np.pi * grid.nodes[:, 0])
    f0, _ = f0_in_range(GAUSS, grid, w0)
    for lam in (0.05, 0.2, 1.0):
        sol = solve_coefficient(GAUSS, grid, f0, lam)
        gap_l2 = float(grid.weights @ (sol.f0_values - sol.flambda_values) ** 2)
        decomposed = 0.04 + gap_l2 + lam * rkhs_norm_sq(flambda_expansion(sol))
        assert continuous_objective(sol, 0.04) == pytest.approx(decomposed, abs=1e-9)


def test_bias_constant_kernel_closed_form():
    # w0 = x^3: f0 = 1/4, w = (1/4)/(1+lam), and
    # ||f0 - f_lambda||_k = (1/4) lam / (1 + lam).
    grid = build_grid(UNIFORM, 128)
    w0 = grid.nodes[:, 0] ** 3
    f0, c0 = f0_in_range(CONSTANT, grid, w0)
    assert c0 == pytest.approx(0.25, abs=1e-12)
    lam = 0.3
    sol = solve_coefficient(CONSTANT, grid, f0, lam)
    expected = (0.25 * lam / (1.0 + lam)) ** 2
    assert bias_norm_sq(sol, w0) == pytest.approx(expected, abs=1e-12)


def test_bias_bounded_by_c0_lambda_unit_eigenvalue_operator():
    # The linear-in-lam bound with the range-norm constant is exact for
    # the constant kernel, whose only nonzero eigenvalue is 1:
    # bias = C0 lam / (1 + lam) <= C0 lam.
    grid = build_grid(UNIFORM, 96)
    w0 = grid.nodes[:, 0] ** 3
    f0, c0 = f0_in_range(CONSTANT, grid, w0)
    for lam in (0.01, 0.1, 1.0):
        sol = solve_coefficient(CONSTANT, grid, f0, lam)
        bias = np.sqrt(bias_norm_sq(sol, w0))
        assert bias <= c0 * lam * (1 + 1e-9) + 1e-12
        assert bias == pytest.approx(c0 * lam / (1 + lam), abs=1e-12)


def test_bias_bounded_by_sandwich_rate():
    # Spectrally, mu/(lam+mu)^2 <= 1/(4 lam) gives the kernel-free bound
    # ||f0 - f_lambda||_k^2 <= (lam/4) ||w0||_L2^2 for any f0 = K w0.
    grid = build_grid(UNIFORM, 96)
    w0 = np.sin(2 * np.pi * grid.nodes[:, 0])
    f0, _ = f0_in_range(GAUSS, grid, w0)
    w0_l2_sq = float(grid.weights @ (w0 * w0))
    for lam in (0.01, 0.1, 1.0):
        sol = solve_coefficient(GAUSS, grid, f0, lam)
        assert bias_norm_sq(sol, w0) <= 0.25 * lam * w0_l2_sq * (1 + 1e-9) + 1e-12


def test_bias_slope_near_one_for_rank_one_operator():
    grid = build_grid(UNIFORM, 128)
    w0 = grid.nodes[:, 0] ** 3
    f0, _ = f0_in_range(CONSTANT, grid, w0)
    lams = np.logspace(-3, 0, 13)
    biases = [
        np.sqrt(bias_norm_sq(solve_coefficient(CONSTANT, grid, f0, lam), w0))
        for lam in lams
    ]
    slope = np.polyfit(np.log(lams), np.log(biases), 1)[0]
    assert 0.9 <= slope <= 1.1


def test_flambda_grid_refinement():
    probes = np.array([0.15, 0.5, 0.9])
    values = []
    for m in (256, 512):
        grid = build_grid(UNIFORM, m)
        w0 = np.sin(2 * np.pi * grid.nodes[:, 0])
        f0, _ = f0_in_range(GAUSS, grid, w0)
        sol = solve_coefficient(GAUSS, grid, f0, 0.2)
        values.append(evaluate_batch(flambda_expansion(sol), probes))
    np.testing.assert_allclose(values[0], values[1], atol=1e-5)


def test_solution_serializes_to_json():
    grid = build_grid(UNIFORM, 8)
    f0, _ = f0_in_range(GAUSS, grid, np.ones(8))
    sol = solve_coefficient(GAUSS, grid, f0, 0.5)
    payload = json.dumps(sol.to_dict())
    assert "flambda_values" in payload


def test_design_measure_serialization_roundtrip():
    for measure in (
        UNIFORM,
        DesignMeasure.truncated_gaussian(0.0, 1.0, 0.5, 0.3),
        DesignMeasure.dirac((0.2, 0.7)),
    ):
        assert DesignMeasure.from_dict(measure.to_dict()) == measure
