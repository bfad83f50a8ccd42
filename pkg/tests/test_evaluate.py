import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from ousynth.errors import AlignmentError, DegenerateSampleError, DomainError
from ousynth.evaluate import evaluate_scenario, kde_1d, kde_2d, kolmogorov_sf, ks_two_sample, moments
from ousynth.timeseries import PricePanel


def brute_force_d(a, b):
    """sup |ECDF_a - ECDF_b| evaluated exactly at every sample point."""
    best = Fraction(0)
    for x in list(a) + list(b):
        fa = Fraction(sum(v <= x for v in a), len(a))
        fb = Fraction(sum(v <= x for v in b), len(b))
        best = max(best, abs(fa - fb))
    return best


def multisets(values, max_size):
    for n in range(1, max_size + 1):
        yield from itertools.combinations_with_replacement(values, n)


def random_panel(T=120, cols=("SPY", "A", "B"), seed=0, vol=0.01):
    rng = np.random.default_rng(seed)
    m = np.cumprod(1 + rng.normal(0.0005, vol, (T, len(cols))), axis=0)
    return PricePanel(np.arange(T), cols, m)


def trapz(y, x):
    return float(np.sum((y[1:] + y[:-1]) * np.diff(x)) / 2)


# -- KS ------------------------------------------------------------------------


def test_ks_identical_samples():
    a = np.random.default_rng(0).normal(size=50)
    r = ks_two_sample(a, a.copy())
    assert r.statistic == 0.0
    assert r.p_value >= 0.999
    assert (r.n1, r.n2) == (50, 50)


def test_ks_disjoint_supports():
    assert ks_two_sample([0, 0], [1, 1]).statistic == 1.0


def test_ks_exhaustive_small_samples():
    sets = list(multisets((0, 1, 2), 6))
    for a in sets:
        for b in sets:
            assert ks_two_sample(a, b).statistic == float(brute_force_d(a, b))


@given(
    st.lists(st.floats(-5, 5), min_size=1, max_size=40),
    st.lists(st.floats(-5, 5), min_size=1, max_size=40),
)
@settings(max_examples=200, deadline=None)
@pytest.mark.filterwarnings("ignore::RuntimeWarning")  # scipy internals for size-1 samples
def test_ks_symmetric_and_matches_scipy_statistic(a, b):
    ab, ba = ks_two_sample(a, b), ks_two_sample(b, a)
    assert (ab.statistic, ab.p_value) == (ba.statistic, ba.p_value)
    assert ab.statistic == pytest.approx(stats.ks_2samp(a, b, method="asymp").statistic, abs=1e-15)
    assert 0 <= ab.statistic <= 1 and 0 <= ab.p_value <= 1


def test_kolmogorov_series_matches_scipy():
    for lam in np.linspace(0.05, 3.5, 300):
        assert kolmogorov_sf(lam) == pytest.approx(stats.kstwobign.sf(lam), abs=1e-12)


def test_ks_pvalue_formula():
    a = np.random.default_rng(1).normal(size=80)
    b = np.random.default_rng(2).normal(0.3, 1, size=60)
    r = ks_two_sample(a, b)
    ne = 80 * 60 / 140
    lam = (np.sqrt(ne) + 0.12 + 0.11 / np.sqrt(ne)) * r.statistic
    assert r.p_value == pytest.approx(stats.kstwobign.sf(lam), abs=1e-12)


def test_ks_pvalue_monotone_in_d():
    from ousynth import evaluate

    for n1, n2 in [(10, 10), (50, 80), (500, 500)]:
        sq = np.sqrt(n1 * n2 / (n1 + n2))
        ps = [evaluate.kolmogorov_sf((sq + 0.12 + 0.11 / sq) * d) for d in np.arange(0.05, 0.951, 0.05)]
        assert all(p1 >= p2 for p1, p2 in zip(ps, ps[1:]))


def test_ks_empty_sample():
    with pytest.raises(DomainError):
        ks_two_sample([], [1.0])


# -- KDE -----------------------------------------------------------------------


def test_kde_symmetric_input():
    grid = np.linspace(-4, 4, 201)
    k = kde_1d([-1.0, 1.0], grid)
    assert np.max(np.abs(k.density - k.density[::-1])) < 1e-12


def test_kde_normalisation_and_scott_rule():
    x = np.random.default_rng(3).standard_normal(1000)
    k = kde_1d(x)
    assert k.grid.size == 512
    assert k.bandwidth == pytest.approx(np.std(x, ddof=1) * 1000 ** (-0.2))
    assert 0.99 <= trapz(k.density, k.grid) <= 1.01
    assert np.all(k.density >= 0)


def test_kde_matches_scipy_gaussian_kde():
    x = np.random.default_rng(4).gamma(2.0, size=300)
    k = kde_1d(x)
    np.testing.assert_allclose(k.density, stats.gaussian_kde(x, bw_method="scott")(k.grid), rtol=1e-9, atol=1e-14)


def test_kde_unimodal_for_single_cluster():
    x = np.random.default_rng(5).normal(2.0, 0.5, 500)
    d = np.diff(kde_1d(x).density)
    signs = np.sign(d[d != 0])
    assert np.count_nonzero(np.diff(signs)) == 1


def test_kde_permutation_and_affine_invariance():
    x = np.random.default_rng(6).normal(size=200)
    grid = np.linspace(-5, 5, 101)
    base = kde_1d(x, grid)
    perm = kde_1d(np.random.default_rng(7).permutation(x), grid)
    np.testing.assert_allclose(perm.density, base.density, rtol=1e-12, atol=1e-15)
    a, b = 2.0, 1.0
    moved = kde_1d(a * x + b, a * grid + b)
    np.testing.assert_allclose(moved.density, base.density / abs(a), atol=1e-6)


def test_kde_degenerate():
    with pytest.raises(DegenerateSampleError):
        kde_1d([1.0, 1.0, 1.0])
    with pytest.raises(DegenerateSampleError):
        kde_1d([1.0])


def test_kde2d_reflection_symmetry():
    rng = np.random.default_rng(8)
    base = np.abs(rng.normal(size=(50, 2)))
    pts = np.vstack([base * s for s in ([1, 1], [-1, 1], [1, -1], [-1, -1])])
    g = np.linspace(-4, 4, 41)
    k = kde_2d(pts[:, 0], pts[:, 1], g, g)
    assert np.max(np.abs(k.density - k.density[::-1, :])) < 1e-10
    assert np.max(np.abs(k.density - k.density[:, ::-1])) < 1e-10


def test_kde2d_normalisation_and_shape():
    rng = np.random.default_rng(9)
    x, y = rng.standard_normal(1000), rng.standard_normal(1000)
    k = kde_2d(x, y)
    assert k.kind == "bivariate"
    total = trapz(np.array([trapz(row, k.grid_y) for row in k.density]), k.grid)
    assert 0.98 <= total <= 1.02
    k = kde_2d(x, y, np.linspace(-3, 3, 17), np.linspace(-2, 2, 9))
    assert k.density.shape == (17, 9)


def test_kde2d_brute_force():
    rng = np.random.default_rng(10)
    x, y = rng.normal(size=30), rng.normal(size=30)
    gx, gy = np.linspace(-2, 2, 5), np.linspace(-1, 1, 4)
    k = kde_2d(x, y, gx, gy)
    hx, hy = np.diag(k.bandwidth)
    assert hx == pytest.approx(np.std(x, ddof=1) * 30 ** (-1 / 6))
    for i, u in enumerate(gx):
        for j, v in enumerate(gy):
            expected = np.mean(stats.norm.pdf(u, x, hx) * stats.norm.pdf(v, y, hy))
            assert k.density[i, j] == pytest.approx(expected, rel=1e-10)


def test_kde2d_degenerate():
    x = np.arange(10.0)
    with pytest.raises(DegenerateSampleError):
        kde_2d(x, 2 * x + 1)


# -- moments and report ----------------------------------------------------------


def test_moments_against_scipy():
    x = np.array([0.01, -0.02, 0.03, 0.0, 0.05, -0.01, 0.02])
    m = moments(x)
    assert m.mean == pytest.approx(np.mean(x))
    assert m.std == pytest.approx(np.std(x, ddof=1))
    assert m.skewness == pytest.approx(stats.skew(x))
    assert m.excess_kurtosis == pytest.approx(stats.kurtosis(x))


def test_self_evaluation():
    real = random_panel(cols=tuple(["SPY"] + [f"X{i}" for i in range(11)]))
    rep = evaluate_scenario(real, real)
    assert all(r.statistic == 0 for r in rep.ks.values())
    assert rep.pass_count == 12
    assert len(rep.ks) == 12 and len(rep.kde2d) == 11
    assert all(pair[0] == "SPY" for pair in rep.kde2d)


def test_report_contents():
    real = random_panel(seed=1)
    synth = [random_panel(seed=s, T=80) for s in (2, 3)]
    rep = evaluate_scenario(real, synth, significance=0.05, market_id="SPY")
    assert rep.ks["A"].n1 == 119 and rep.ks["A"].n2 == 158
    r_kde, s_kde = rep.kde["A"]
    assert np.array_equal(r_kde.grid, s_kde.grid)
    r2, s2 = rep.kde2d[("SPY", "B")]
    assert r2.density.shape == s2.density.shape
    ret = real.matrix[1:, 1] / real.matrix[:-1, 1] - 1
    assert rep.moments_real["A"].std == pytest.approx(np.std(ret, ddof=1))
    assert rep.pass_count <= len(rep.ks)


def test_column_mismatch_lists_difference():
    real = random_panel()
    other = random_panel(cols=("SPY", "A", "C"))
    with pytest.raises(AlignmentError, match=r"\['B'\].*\['C'\]"):
        evaluate_scenario(real, other)
