import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from ousynth.errors import AlignmentError, DomainError
from ousynth.timeseries import (
    PricePanel,
    PriceSeries,
    ReturnSeries,
    align_panel,
    normalize,
    prices_from_returns,
    recombine_returns,
    relative_returns,
    returns_from_prices,
)

from conftest import day_axis

# step ratios bounded to e^+-0.7: near r = -1 the sum 1 + r cancels and no
# simple-return representation can round-trip to 1e-12
log_steps = arrays(float, st.integers(1, 60), elements=st.floats(-0.7, 0.7))


@st.composite
def positive_prices(draw):
    start = draw(st.floats(1e-3, 1e4))
    return start * np.exp(np.concatenate([[0.0], np.cumsum(draw(log_steps))]))


def series(values, sid="X", start="2021-01-04"):
    return PriceSeries(sid, day_axis(len(values), start), values)


def test_constant_series_has_zero_returns():
    r = returns_from_prices(series([1.0, 1.0, 1.0]))
    assert r.values.tolist() == [0.0, 0.0]


def test_returns_ratio_oracle():
    p = [1.0, 1.1, 0.99]
    r = returns_from_prices(series(p))
    expected = [p[t + 1] / p[t] - 1 for t in range(2)]
    np.testing.assert_allclose(r.values, expected, rtol=0, atol=1e-15)
    np.testing.assert_allclose(r.values, [0.1, -0.1], atol=1e-12)


def test_return_dates_are_end_days():
    s = series([1.0, 2.0, 3.0])
    r = returns_from_prices(s)
    assert np.array_equal(r.dates, s.dates[1:])
    assert r.origin == s.dates[0]


def test_non_positive_price_names_date():
    with pytest.raises(DomainError, match="2021-01-05"):
        series([1.0, 0.0, 2.0])


def test_empty_propagation():
    out = prices_from_returns(ReturnSeries("X", np.array([], dtype=np.int64), []), 1.0)
    assert out.values.tolist() == [1.0]


def test_cumulative_product_oracle():
    out = prices_from_returns(ReturnSeries("X", [1, 2], [0.1, -0.1]), 1.0)
    expected = [1.0, 1.0 * 1.1, 1.0 * 1.1 * 0.9]
    np.testing.assert_allclose(out.values, expected, rtol=1e-15)
    np.testing.assert_allclose(out.values, [1, 1.1, 0.99], rtol=1e-12)


def test_zero_returns_keep_start():
    out = prices_from_returns(ReturnSeries("X", [1, 2, 3], [0.0, 0.0, 0.0]), 2.0)
    assert out.values.tolist() == [2.0] * 4


def test_return_at_minus_one_rejected():
    with pytest.raises(DomainError):
        ReturnSeries("X", [1, 2], [0.1, -1.0])


@given(positive_prices())
@settings(max_examples=200, deadline=None)
def test_price_return_round_trip(values):
    p = series(values)
    back = prices_from_returns(returns_from_prices(p), p.values[0])
    np.testing.assert_allclose(back.values, p.values, rtol=1e-12)
    assert np.array_equal(back.dates, p.dates)


def _two_return_series(n=5, seed=0):
    rng = np.random.default_rng(seed)
    d = day_axis(n)
    return ReturnSeries("S", d, rng.normal(0, 0.02, n)), ReturnSeries("M", d, rng.normal(0, 0.02, n))


def test_relative_of_identical_is_zero():
    s, _ = _two_return_series()
    rel = relative_returns(s, ReturnSeries("M", s.dates, s.values))
    assert np.all(rel.values == 0)


def test_relative_and_recombine_examples():
    d = day_axis(1)
    rel = relative_returns(ReturnSeries("S", d, [0.02]), ReturnSeries("M", d, [0.005]))
    np.testing.assert_allclose(rel.values, [0.02 - 0.005], atol=0)
    np.testing.assert_allclose(rel.values, [0.015], atol=1e-15)
    back = recombine_returns(ReturnSeries("S", d, [0.015]), ReturnSeries("M", d, [0.005]))
    np.testing.assert_allclose(back.values, [0.02], atol=1e-15)


def test_recombine_zero_relative_returns_market():
    _, m = _two_return_series()
    zero = ReturnSeries("S", m.dates, np.zeros(len(m)))
    assert np.array_equal(recombine_returns(zero, m).values, m.values)


@given(st.integers(0, 10_000))
@settings(max_examples=100, deadline=None)
def test_relative_recombine_inverse(seed):
    s, m = _two_return_series(50, seed)
    np.testing.assert_allclose(recombine_returns(relative_returns(s, m), m).values, s.values, rtol=0, atol=1e-15)
    rel = relative_returns(s, m)
    np.testing.assert_allclose(relative_returns(recombine_returns(rel, m), m).values, rel.values, atol=1e-15)


def test_relative_axis_mismatch():
    d = day_axis(3)
    with pytest.raises(AlignmentError):
        relative_returns(ReturnSeries("S", d, [0, 0, 0]), ReturnSeries("M", d + 1, [0, 0, 0]))


def test_align_single_series():
    s = series([1.0, 2.0, 3.0])
    panel = align_panel([s])
    assert panel.columns == ("X",)
    assert np.array_equal(panel.dates, s.dates)


def test_align_intersection():
    a = PriceSeries("A", np.array(["2021-01-01", "2021-01-02", "2021-01-03"], "datetime64[D]"), [1, 2, 3])
    b = PriceSeries("B", np.array(["2021-01-02", "2021-01-03", "2021-01-04"], "datetime64[D]"), [5, 6, 7])
    expected_dates = sorted(set(a.dates.tolist()) & set(b.dates.tolist()))
    panel = align_panel([a, b])
    assert panel.dates.tolist() == expected_dates
    assert panel.matrix.tolist() == [[2, 5], [3, 6]]
    assert panel.columns == ("A", "B")


def test_align_disjoint_lists_ranges():
    a = series([1.0, 2.0], "A", "2021-01-01")
    b = series([1.0, 2.0], "B", "2022-01-01")
    with pytest.raises(AlignmentError, match="A: 2021-01-01"):
        align_panel([a, b])


@given(st.lists(st.sets(st.integers(0, 40), min_size=2, max_size=30), min_size=1, max_size=4))
@settings(max_examples=100, deadline=None)
def test_align_dates_subset_of_every_input(date_sets):
    common = set.intersection(*date_sets)
    inputs = [PriceSeries(f"S{i}", sorted(ds), np.arange(1, len(ds) + 1)) for i, ds in enumerate(date_sets)]
    if len(common) < 2:
        with pytest.raises(AlignmentError):
            align_panel(inputs)
        return
    panel = align_panel(inputs)
    assert panel.dates.tolist() == sorted(common)
    assert np.all(np.diff(panel.dates) > 0)
    for s, col in zip(inputs, panel.matrix.T):
        lookup = dict(zip(s.dates.tolist(), s.values.tolist()))
        assert col.tolist() == [lookup[d] for d in panel.dates.tolist()]


def test_normalize_anchor():
    s = normalize(series([4.0, 5.0, 2.0]), anchor=1.0)
    np.testing.assert_allclose(s.values, [1.0, 1.25, 0.5])


def test_series_are_immutable():
    s = series([1.0, 2.0])
    with pytest.raises(ValueError):
        s.values[0] = 3.0


def test_panel_rejects_missing():
    with pytest.raises(AlignmentError):
        PricePanel([0, 1], ("A",), [[1.0], [np.nan]])
