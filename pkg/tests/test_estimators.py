import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from normthresh import distributions as dist
from normthresh.estimators import (
    as_sample,
    empirical_mean,
    geometric_median,
    median_of_means,
    psi,
    shrink,
    shrink_rows,
    thresholded_mean,
    trimmed_mean,
)

finite = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)
lams = st.floats(1e-4, 1e4, allow_nan=False, allow_infinity=False)


def vectors(d):
    return arrays(np.float64, d, elements=finite)


# --- psi ------------------------------------------------------------------


@pytest.mark.parametrize("t, expected", [(0.5, 0.5), (2.0, 1.0), (0.0, 0.0), (1.0, 1.0)])
def test_psi_values(t, expected):
    assert psi(t) == expected


@pytest.mark.parametrize("bad", [-1e-9, float("nan"), float("inf")])
def test_psi_rejects_bad_input(bad):
    with pytest.raises(ValueError):
        psi(bad)


def test_psi_monotone_and_below_identity():
    t = np.linspace(0, 10, 1001)
    out = psi(t)
    assert np.all(np.diff(out) >= 0)
    assert np.all(out <= t)


# --- shrink ---------------------------------------------------------------


def test_shrink_zero_vector():
    np.testing.assert_array_equal(shrink(np.zeros(3), 7.0), np.zeros(3))


def test_shrink_identity_branch():
    np.testing.assert_array_equal(shrink([0.5], 1.0), [0.5])


def test_shrink_projects_to_ball():
    # ||(3, 4)|| = 5 -> (3, 4) / 5
    np.testing.assert_allclose(shrink([3.0, 4.0], 1.0), [0.6, 0.8], rtol=0, atol=1e-14)


@pytest.mark.parametrize("lam", [0.0, -1.0, float("inf"), float("nan")])
def test_shrink_rejects_bad_lambda(lam):
    with pytest.raises(ValueError):
        shrink([1.0, 2.0], lam)


def test_shrink_rejects_nonfinite_vector():
    with pytest.raises(ValueError):
        shrink([1.0, np.nan], 1.0)


@settings(max_examples=300, deadline=None)
@given(st.integers(1, 8).flatmap(lambda d: st.tuples(vectors(d), vectors(d))), lams)
def test_shrink_is_contraction(pair, lam):
    x, y = pair
    lhs = np.linalg.norm(shrink(x, lam) - shrink(y, lam))
    assert lhs <= np.linalg.norm(x - y) * (1 + 1e-12) + 1e-12


@settings(max_examples=300, deadline=None)
@given(st.integers(1, 8).flatmap(vectors), lams)
def test_shrink_norm_cap(x, lam):
    assert lam * np.linalg.norm(shrink(x, lam)) <= 1.0 or np.array_equal(shrink(x, lam), x)
    if lam * np.linalg.norm(x) > 1:
        assert lam * np.linalg.norm(shrink(x, lam)) <= 1.0


@settings(max_examples=300, deadline=None)
@given(st.integers(1, 8).flatmap(vectors), lams)
def test_shrink_preserves_direction(x, lam):
    y = shrink(x, lam)
    nx = np.linalg.norm(x)
    if nx == 0:
        return
    c = np.dot(y, x) / nx**2
    assert 0 < c <= 1 + 1e-12
    np.testing.assert_allclose(y, c * x, rtol=1e-12, atol=1e-12 * nx)


def test_shrink_rows_matches_shrink():
    rng = np.random.default_rng(3)
    x = rng.standard_normal((50, 4)) * 3
    rows = shrink_rows(x, 0.7)
    for i in range(50):
        np.testing.assert_array_equal(rows[i], shrink(x[i], 0.7))


# --- thresholded / empirical ---------------------------------------------


def test_thresholded_equals_empirical_when_nothing_clipped():
    rng = np.random.default_rng(0)
    x = rng.standard_normal((37, 3))
    lam = 0.5 / np.max(np.linalg.norm(x, axis=1))
    np.testing.assert_array_equal(thresholded_mean(x, lam), empirical_mean(x))


def test_thresholded_opposite_rows_cancel():
    np.testing.assert_allclose(thresholded_mean([[3, 4], [-3, -4]], 1.0), [0.0, 0.0], atol=0)


def test_thresholded_single_row():
    # ||(10, 0)|| = 10, radius 1 / 0.5 = 2
    np.testing.assert_allclose(thresholded_mean([[10.0, 0.0]], 0.5), [2.0, 0.0], rtol=1e-14)


@pytest.mark.parametrize(
    "rows, expected",
    [([[1, 0], [3, 0]], [2, 0]), ([[4.5, -2.0]], [4.5, -2.0]), ([[1, 1], [-1, -1]], [0, 0])],
)
def test_empirical_mean_examples(rows, expected):
    np.testing.assert_array_equal(empirical_mean(rows), expected)


def test_empirical_mean_matches_numpy():
    x = np.random.default_rng(1).standard_normal((1001, 5))
    np.testing.assert_allclose(empirical_mean(x), x.mean(axis=0), rtol=1e-13, atol=1e-15)


@pytest.mark.parametrize("bad", [np.zeros((0, 2)), [[1.0, np.inf]], np.zeros((2, 2, 2))])
def test_as_sample_rejects(bad):
    with pytest.raises(ValueError):
        as_sample(bad)


def test_variance_domination_is_exact_on_samples():
    # sum ||Y_i - Ybar||^2 = (1/2n) sum_ij ||Y_i - Y_j||^2 and shrink is 1-Lipschitz
    for family, params in [("student_t", {"df": 3}), ("pareto_radial", {"alpha": 2.5}), ("gaussian", {})]:
        spec = dist.GeneratorSpec(family, 5, params)
        x = dist.sample(spec, 100_000, 11)
        y = shrink_rows(x, 0.4)
        sx = np.sum((x - x.mean(axis=0)) ** 2, axis=1)
        sy = np.sum((y - y.mean(axis=0)) ** 2, axis=1)
        se = np.std(sx) / np.sqrt(len(sx))
        assert sy.mean() <= sx.mean() + 3 * se
        assert sy.mean() <= sx.mean()


# --- geometric median -----------------------------------------------------


def test_geometric_median_single_point():
    res = geometric_median([[1.5, -2.0]])
    np.testing.assert_array_equal(res.point, [1.5, -2.0])
    assert res.converged


def test_geometric_median_two_points_objective():
    p, q = np.array([0.0, 0.0]), np.array([3.0, 4.0])
    res = geometric_median([p, q])
    obj = np.linalg.norm(res.point - p) + np.linalg.norm(res.point - q)
    assert abs(obj - 5.0) <= 1e-10


def test_geometric_median_symmetric_cross():
    res = geometric_median([[1, 0], [-1, 0], [0, 1], [0, -1]])
    np.testing.assert_allclose(res.point, [0, 0], atol=1e-10)
    assert res.converged


def test_geometric_median_one_dimension_is_median():
    res = geometric_median([[1.0], [2.0], [100.0]])
    np.testing.assert_allclose(res.point, [2.0], atol=1e-10)


def test_geometric_median_vertex_optimum_with_duplicates():
    pts = [[0, 0], [0, 0], [0, 0], [1, 0], [0, 1]]
    res = geometric_median(pts)
    np.testing.assert_array_equal(res.point, [0, 0])


def test_geometric_median_reports_nonconvergence():
    pts = np.random.default_rng(2).standard_normal((30, 3))
    res = geometric_median(pts, tol=1e-300, max_iter=3)
    assert not res.converged
    assert res.n_iter == 3


def _brute_objective_min(pts):
    from scipy.optimize import minimize

    f = lambda y: np.sum(np.linalg.norm(pts - y, axis=1))
    best = minimize(f, np.median(pts, axis=0), method="Nelder-Mead", options={"xatol": 1e-12, "fatol": 1e-14, "maxiter": 20000})
    return best.fun


@pytest.mark.parametrize("seed", range(5))
def test_geometric_median_beats_coordinate_median_and_matches_optimiser(seed):
    rng = np.random.default_rng(seed)
    pts = rng.standard_t(2, size=(40, 3))
    res = geometric_median(pts)
    coord = np.sum(np.linalg.norm(pts - np.median(pts, axis=0), axis=1))
    assert res.objective <= coord + 1e-12
    assert res.objective <= _brute_objective_min(pts) + 1e-8


# --- median of means ------------------------------------------------------


def test_mom_one_block_is_empirical_mean():
    x = np.random.default_rng(4).standard_normal((25, 3))
    np.testing.assert_array_equal(median_of_means(x, 1, 99), empirical_mean(x))


def test_mom_n_blocks_is_geometric_median_of_rows():
    x = np.random.default_rng(5).standard_normal((9, 2))
    np.testing.assert_allclose(median_of_means(x, 9, 0), geometric_median(x).point, atol=1e-9)


def test_mom_one_dimensional_example():
    assert median_of_means([[1.0], [2.0], [100.0]], 3, 123)[0] == pytest.approx(2.0, abs=1e-10)


@pytest.mark.parametrize("blocks", [0, 4])
def test_mom_rejects_bad_block_count(blocks):
    with pytest.raises(ValueError):
        median_of_means([[1.0], [2.0], [3.0]], blocks, 0)


def test_mom_is_seed_deterministic():
    x = np.random.default_rng(6).standard_t(2, size=(103, 4))
    a, b = median_of_means(x, 7, 42), median_of_means(x, 7, 42)
    np.testing.assert_array_equal(a, b)


# --- trimmed mean ---------------------------------------------------------


def test_trimmed_zero_fraction_is_empirical():
    x = np.random.default_rng(7).standard_normal((10, 2))
    np.testing.assert_array_equal(trimmed_mean(x, 0.0), empirical_mean(x))


def test_trimmed_drops_largest_norm():
    assert trimmed_mean([[0.0], [0.0], [100.0]], 1 / 3)[0] == 0.0


def test_trimmed_identical_rows():
    x = np.tile([1.25, -3.0], (8, 1))
    for f in (0.0, 0.1, 0.3, 0.49):
        np.testing.assert_array_equal(trimmed_mean(x, f), [1.25, -3.0])


@pytest.mark.parametrize("f", [-0.1, 0.5, 0.7])
def test_trimmed_rejects_fraction(f):
    with pytest.raises(ValueError):
        trimmed_mean([[1.0], [2.0]], f)


def test_trimmed_rejects_trimming_everything():
    with pytest.raises(ValueError):
        trimmed_mean([[1.0]], 0.4)
