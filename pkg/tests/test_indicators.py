"""Indicator unit tests: worked examples, loop-oracle equivalence, properties."""

import numpy as np
import pandas as pd
import pytest

from momentum_lab.indicators import (
    AnalyticsTable,
    IndicatorConfig,
    atr,
    build_analytics,
    ema,
    forward_return,
    momentum,
    sma,
    true_range,
)

import oracles
from conftest import make_series, random_walk

REL_TOL = 1e-9


def assert_matches_oracle(actual, expected):
    actual = np.asarray(actual, dtype=float)
    expected = np.asarray(expected, dtype=float)
    assert actual.shape == expected.shape
    assert np.array_equal(np.isnan(actual), np.isnan(expected))
    mask = ~np.isnan(actual)
    np.testing.assert_allclose(actual[mask], expected[mask], rtol=REL_TOL, atol=0.0)


class TestSma:
    def test_constant_series(self):
        out = sma([5.0, 5.0, 5.0], 3)
        assert np.isnan(out[0]) and np.isnan(out[1])
        assert out[2] == 5.0

    def test_arithmetic_means(self):
        out = sma([1.0, 2.0, 3.0, 4.0], 3)
        assert np.isnan(out[:2]).all()
        assert out[2] == pytest.approx(2.0) and out[3] == pytest.approx(3.0)

    def test_window_zero_rejected(self):
        with pytest.raises(ValueError):
            sma([1.0], 0)

    def test_random_walk_matches_loop(self, rng):
        closes = random_walk(rng, 1000)
        assert_matches_oracle(sma(closes, 200), oracles.sma_loop(list(closes), 200))


class TestEma:
    def test_constant_is_fixed_point(self):
        out = ema([7.0] * 10, 4)
        assert np.isnan(out[:3]).all()
        np.testing.assert_allclose(out[3:], 7.0)

    def test_hand_recurrence(self):
        # seed at i=1 is (1+2)/2 = 1.5; i=2 -> (2/3)*3 + (1/3)*1.5 = 2.5
        out = ema([1.0, 2.0, 3.0], 2)
        assert np.isnan(out[0])
        assert out[1] == pytest.approx(1.5)
        assert out[2] == pytest.approx(2.5)

    def test_span_zero_rejected(self):
        with pytest.raises(ValueError):
            ema([1.0], 0)

    def test_random_walk_matches_loop(self, rng):
        closes = random_walk(rng, 500)
        assert_matches_oracle(ema(closes, 50), oracles.ema_loop(list(closes), 50))

    def test_shorter_than_span_all_undefined(self):
        assert np.isnan(ema([1.0, 2.0], 5)).all()


class TestMomentum:
    def test_direct_formula(self):
        closes = [100.0] * 63 + [110.0]
        out = momentum(closes, 63)
        assert out[-1] == pytest.approx(0.10)

    def test_constant_series_zero(self):
        out = momentum([50.0] * 80, 63)
        assert np.isnan(out[:63]).all()
        np.testing.assert_array_equal(out[63:], 0.0)

    def test_random_matches_loop_exactly(self, rng):
        closes = random_walk(rng, 300)
        out = momentum(closes, 63)
        ref = oracles.momentum_loop(list(closes), 63)
        mask = ~np.isnan(out)
        np.testing.assert_array_equal(out[mask], np.asarray(ref)[mask])


class TestTrueRange:
    def test_direct(self):
        assert true_range(102.0, 101.0, 100.0) == 2.0

    def test_degenerate_bar(self):
        assert true_range(100.0, 100.0, 100.0) == 0.0

    def test_gap_down(self):
        assert true_range(95.0, 94.0, 100.0) == 6.0

    def test_high_below_low_rejected(self):
        with pytest.raises(ValueError):
            true_range(94.0, 95.0, 100.0)


class TestAtr:
    def test_flat_bars_zero(self):
        closes = [100.0] * 30
        series = make_series("AAA", closes, opens=closes, highs=closes, lows=closes)
        out = atr(series, 14)
        assert np.isnan(out[:13]).all()
        np.testing.assert_array_equal(out[13:], 0.0)

    def test_constant_tr_fixed_point(self):
        n = 40
        closes = np.full(n, 100.0)
        series = make_series("AAA", closes, opens=closes,
                             highs=closes + 1.5, lows=closes - 1.5)
        out = atr(series, 14)
        np.testing.assert_allclose(out[13:], 3.0)

    def test_fewer_than_two_bars_undefined(self):
        series = make_series("AAA", [100.0])
        assert np.isnan(atr(series, 14)).all()

    def test_matches_composed_loop_oracle(self, rng):
        closes = random_walk(rng, 100)
        highs = closes * (1 + np.abs(rng.normal(0, 0.01, 100)))
        lows = closes * (1 - np.abs(rng.normal(0, 0.01, 100)))
        series = make_series("AAA", closes, opens=closes, highs=highs, lows=lows)
        ref = oracles.atr_loop(list(highs), list(lows), list(closes), 14)
        assert_matches_oracle(atr(series, 14), ref)


class TestForwardReturn:
    def test_direct(self):
        closes = [100.0] + [1.0] * 20 + [105.0]
        out = forward_return(closes, 21)
        assert out[0] == pytest.approx(0.05)

    def test_constant_zero(self):
        out = forward_return([10.0] * 30, 21)
        np.testing.assert_array_equal(out[:9], 0.0)
        assert np.isnan(out[9:]).all()

    def test_matches_loop_exactly(self, rng):
        closes = random_walk(rng, 100)
        out = forward_return(closes, 21)
        ref = np.asarray(oracles.forward_return_loop(list(closes), 21))
        mask = ~np.isnan(out)
        np.testing.assert_array_equal(out[mask], ref[mask])


class TestProperties:
    def test_translation_equivariance_sma_ema(self, rng):
        closes = random_walk(rng, 300)
        shift = 37.5
        for fn, arg in ((sma, 50), (ema, 50)):
            base = fn(closes, arg)
            moved = fn(closes + shift, arg)
            mask = ~np.isnan(base)
            np.testing.assert_allclose(moved[mask], base[mask] + shift, rtol=REL_TOL)

    def test_scaling_equivariance(self, rng):
        closes = random_walk(rng, 300)
        highs = closes * 1.01
        lows = closes * 0.99
        k = 3.7
        series = make_series("AAA", closes, opens=closes, highs=highs, lows=lows)
        scaled = make_series("AAA", closes * k, opens=closes * k,
                             highs=highs * k, lows=lows * k)
        for fn, arg in ((sma, 50), (ema, 50)):
            base, moved = fn(closes, arg), fn(closes * k, arg)
            mask = ~np.isnan(base)
            np.testing.assert_allclose(moved[mask], base[mask] * k, rtol=REL_TOL)
        base, moved = atr(series, 14), atr(scaled, 14)
        mask = ~np.isnan(base)
        np.testing.assert_allclose(moved[mask], base[mask] * k, rtol=REL_TOL)
        for fn, arg in ((momentum, 63), (forward_return, 21)):
            base, moved = fn(closes, arg), fn(closes * k, arg)
            mask = ~np.isnan(base)
            np.testing.assert_allclose(moved[mask], base[mask], rtol=REL_TOL)

    def test_causality_under_truncation(self, rng):
        closes = random_walk(rng, 120)
        cut = 77
        full = {"sma": sma(closes, 20), "ema": ema(closes, 20),
                "momentum": momentum(closes, 30)}
        truncated = {"sma": sma(closes[:cut], 20), "ema": ema(closes[:cut], 20),
                     "momentum": momentum(closes[:cut], 30)}
        for name in full:
            a, b = full[name][:cut], truncated[name]
            mask = ~np.isnan(a)
            assert np.array_equal(np.isnan(a), np.isnan(b))
            np.testing.assert_array_equal(a[mask], b[mask])

    def test_undefined_prefix_lengths(self, rng):
        closes = random_walk(rng, 150)
        highs, lows = closes * 1.01, closes * 0.99
        series = make_series("AAA", closes, opens=closes, highs=highs, lows=lows)
        assert np.isnan(sma(closes, 50)[:49]).all() and not np.isnan(sma(closes, 50)[49])
        assert np.isnan(ema(closes, 50)[:49]).all() and not np.isnan(ema(closes, 50)[49])
        m = momentum(closes, 63)
        assert np.isnan(m[:63]).all() and not np.isnan(m[63])
        a = atr(series, 14)
        assert np.isnan(a[:13]).all() and not np.isnan(a[13])
        f = forward_return(closes, 21)
        assert not np.isnan(f[-22]) and np.isnan(f[-21:]).all()


class TestBuildAnalytics:
    def test_ma200_defined_from_index_199(self):
        series = make_series("AAA", np.linspace(100, 200, 300))
        table = build_analytics([series])
        col = table.frame["ma200"].to_numpy()
        assert np.isnan(col[:199]).all() and not np.isnan(col[199:]).any()

    def test_empty_universe(self):
        table = build_analytics([])
        assert len(table) == 0

    def test_columns_match_per_indicator_oracles(self, rng):
        universe = []
        for i in range(5):
            closes = random_walk(rng, 260)
            highs = closes * (1 + np.abs(rng.normal(0, 0.01, 260)))
            lows = closes * (1 - np.abs(rng.normal(0, 0.01, 260)))
            universe.append(make_series(f"T{i:02d}", closes, opens=closes,
                                        highs=highs, lows=lows))
        config = IndicatorConfig()
        table = build_analytics(universe, config)
        for series in universe:
            part = table.frame[table.frame["ticker"] == series.ticker]
            closes = list(series.closes)
            highs = list(series.frame["high"])
            lows = list(series.frame["low"])
            checks = {
                "ma50": oracles.sma_loop(closes, 50),
                "ma200": oracles.sma_loop(closes, 200),
                "ema50": oracles.ema_loop(closes, 50),
                "ema200": oracles.ema_loop(closes, 200),
                "momentum63": oracles.momentum_loop(closes, 63),
                "atr14": oracles.atr_loop(highs, lows, closes, 14),
                "fwd_return_21": oracles.forward_return_loop(closes, 21),
            }
            for column, expected in checks.items():
                assert_matches_oracle(part[column].to_numpy(), expected)

    def test_parallel_schedule_identical(self, rng):
        universe = [make_series(f"T{i:02d}", random_walk(rng, 300)) for i in range(6)]
        serial = build_analytics(universe)
        threaded = build_analytics(universe, max_workers=4)
        pd.testing.assert_frame_equal(serial.frame, threaded.frame)

    def test_csv_round_trip(self, rng, tmp_path):
        universe = [make_series("AAA", random_walk(rng, 250))]
        table = build_analytics(universe)
        path = tmp_path / "analytics.csv"
        table.to_csv(path)
        loaded = AnalyticsTable.from_csv(path)
        pd.testing.assert_frame_equal(
            table.frame, loaded.frame, check_dtype=False, rtol=1e-12)
