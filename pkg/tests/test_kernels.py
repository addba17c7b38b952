"""Kernel families: closed-form values, PSD Gram matrices, invariances."""

import numpy as np
import pytest
from hypothesis import given, strategies as st

from rkhsreg.kernels import (
    FAMILIES,
    KernelSpec,
    as_points,
    cross_gram,
    gram,
    kernel_eval,
)

# Frozen closed-form evaluations at unit separation.
EXP_HALF = 0.6065306597126334  # exp(-1/2)
EXP_ONE = 0.36787944117144233  # exp(-1)
EXP_TWO = 0.1353352832366127  # exp(-2)


def test_gaussian_closed_forms():
    spec = KernelSpec("gaussian", 1.0, 1)
    assert kernel_eval(spec, 0.0, 1.0) == pytest.approx(EXP_HALF, abs=1e-15)
    spec_quarter = KernelSpec("gaussian", 0.25, 1)
    # squared distance 0.25, 2 h^2 = 0.125 -> exp(-2)
    assert kernel_eval(spec_quarter, 0.0, 0.5) == pytest.approx(EXP_TWO, abs=1e-15)


def test_laplace_closed_forms():
    spec = KernelSpec("laplace", 1.0, 1)
    assert kernel_eval(spec, 0.0, 1.0) == pytest.approx(EXP_ONE, abs=1e-15)
    assert kernel_eval(KernelSpec("laplace", 0.5, 1), 0.0, 1.0) == pytest.approx(
        EXP_TWO, abs=1e-15
    )


def test_rational_quadratic_closed_forms():
    spec = KernelSpec("rational_quadratic", 1.0, 1)
    assert kernel_eval(spec, 0.0, 1.0) == pytest.approx(2.0 / 3.0, abs=1e-15)
    half = KernelSpec("rational_quadratic", np.sqrt(0.5), 1)
    assert kernel_eval(half, 0.0, 1.0) == pytest.approx(0.5, abs=1e-15)


def test_constant_family_is_one_everywhere():
    spec = KernelSpec("constant", dim=2)
    assert kernel_eval(spec, (0.0, 0.0), (3.0, -7.0)) == 1.0
    K = gram(spec, np.random.default_rng(0).normal(size=(6, 2)))
    assert np.array_equal(K, np.ones((6, 6)))


def test_unit_diagonal_and_exact_symmetry():
    rng = np.random.default_rng(1)
    for family in FAMILIES:
        pts = rng.uniform(-2, 2, size=(15, 1))
        K = gram(KernelSpec(family, 0.7, 1), pts)
        assert np.array_equal(np.diag(K), np.ones(15))
        assert np.array_equal(K, K.T)


def test_kernel_values_bounded():
    rng = np.random.default_rng(2)
    for family in FAMILIES:
        spec = KernelSpec(family, 0.5, 2)
        a = rng.normal(size=(40, 2))
        b = rng.normal(size=(40, 2))
        vals = cross_gram(spec, a, b)
        assert np.all(vals > 0.0)
        assert np.all(vals <= 1.0)


def test_gram_psd_many_random_sets():
    # 200 random point sets across families and dimensions; the minimum
    # eigenvalue may only dip below zero by roundoff proportional to n.
    rng = np.random.default_rng(3)
    for trial in range(200):
        family = FAMILIES[trial % len(FAMILIES)]
        dim = 1 + trial % 2
        n = int(rng.integers(1, 41))
        pts = rng.uniform(-3, 3, size=(n, dim))
        K = gram(KernelSpec(family, 0.4, dim), pts)
        min_eig = float(np.linalg.eigvalsh(K)[0])
        assert min_eig >= -1e-8 * n


def test_permutation_invariance():
    rng = np.random.default_rng(4)
    pts = rng.uniform(0, 1, size=(12, 2))
    perm = rng.permutation(12)
    spec = KernelSpec("gaussian", 0.3, 2)
    K = gram(spec, pts)
    K_perm = gram(spec, pts[perm])
    # BLAS blocking may round the cross terms differently per layout,
    # so agreement is to the last ulp rather than bitwise.
    np.testing.assert_allclose(K_perm, K[np.ix_(perm, perm)], rtol=0, atol=1e-14)


def test_near_duplicate_points_clamped():
    spec = KernelSpec("laplace", 1e-3, 1)
    # Cancellation in the quadratic-form expansion is clamped, so
    # coincident points evaluate to exactly 1 even at tiny bandwidth.
    assert kernel_eval(spec, 0.1, 0.1) == 1.0


def test_as_points_shapes():
    assert as_points(0.3, 1).shape == (1, 1)
    assert as_points([0.1, 0.2, 0.3], 1).shape == (3, 1)
    assert as_points([0.1, 0.2], 2).shape == (1, 2)
    assert as_points(np.zeros((5, 2)), 2).shape == (5, 2)


def test_as_points_dim_mismatch_raises():
    with pytest.raises(ValueError):
        as_points([0.1, 0.2, 0.3], 2)
    with pytest.raises(ValueError):
        as_points(np.zeros((4, 3)), 2)


def test_kernel_eval_rejects_batches():
    spec = KernelSpec("gaussian", 1.0, 1)
    with pytest.raises(ValueError):
        kernel_eval(spec, np.zeros((2, 1)), 0.0)


def test_cross_gram_shape():
    spec = KernelSpec("gaussian", 1.0, 1)
    out = cross_gram(spec, np.zeros((3, 1)), np.ones((5, 1)))
    assert out.shape == (3, 5)


def test_gram_empty_raises():
    with pytest.raises(ValueError):
        gram(KernelSpec("gaussian", 1.0, 1), np.zeros((0, 1)))


def test_spec_validation():
    with pytest.raises(ValueError):
        KernelSpec("epanechnikov", 1.0, 1)
    with pytest.raises(ValueError):
        KernelSpec("gaussian", 0.0, 1)
    with pytest.raises(ValueError):
        KernelSpec("gaussian", 1.0, 0)
    assert KernelSpec("GAUSSIAN", 1.0, 1).family == "gaussian"
    # constant ignores bandwidth entirely
    assert KernelSpec("constant", -1.0, 1).family == "constant"


def test_spec_serialization_roundtrip():
    for family in FAMILIES:
        spec = KernelSpec(family, 0.35, 2)
        assert KernelSpec.from_dict(spec.to_dict()) == spec


@given(
    st.lists(st.floats(min_value=-5, max_value=5), min_size=1, max_size=12),
    st.sampled_from(FAMILIES),
)
def test_gram_psd_property(coords, family):
    pts = np.asarray(coords).reshape(-1, 1)
    K = gram(KernelSpec(family, 0.6, 1), pts)
    assert float(np.linalg.eigvalsh(K)[0]) >= -1e-8 * len(coords)


@given(
    st.floats(min_value=-4, max_value=4),
    st.floats(min_value=-4, max_value=4),
    st.sampled_from(FAMILIES),
)
def test_symmetry_in_arguments(x, y, family):
    spec = KernelSpec(family, 0.8, 1)
    assert kernel_eval(spec, x, y) == kernel_eval(spec, y, x)
