import datetime as dt
import logging

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from sbas.config import data_path
from sbas.correlate import (CorrelationReport, ProductionRecord, aggregate_production, best_lag, displacement_rate,
                            lagged_correlation, load_production, load_report, load_series, parse_month, pearson,
                            production_per_interval, save_production, save_report, save_series)

JAN, FEB, MAR, APR = (dt.date(2005, m, 1) for m in (1, 2, 3, 4))
RECORDS = [ProductionRecord("78", JAN, 100.0), ProductionRecord("78", FEB, 200.0), ProductionRecord("78", MAR, 300.0)]

finite = st.floats(-1e3, 1e3, allow_nan=False)


class TestAggregate:
    def test_full_coverage(self):
        assert aggregate_production(RECORDS, JAN, APR) == pytest.approx(600.0)

    def test_half_month(self):
        # Jan 1..Jan 16 exclusive is 15 of 31 days; Jan 17 gives 16
        assert aggregate_production(RECORDS, JAN, dt.date(2005, 1, 16)) == pytest.approx(100 * 15 / 31)
        assert aggregate_production(RECORDS, dt.date(2005, 1, 16), FEB) == pytest.approx(100 * 16 / 31)

    def test_straddling(self):
        got = aggregate_production(RECORDS, dt.date(2005, 1, 17), dt.date(2005, 2, 15))
        assert got == pytest.approx(100 * 15 / 31 + 200 * 14 / 28)

    def test_disjoint(self):
        assert aggregate_production(RECORDS, dt.date(2006, 1, 1), dt.date(2006, 6, 1)) == 0.0

    def test_empty_interval(self):
        assert aggregate_production(RECORDS, FEB, FEB) == 0.0

    def test_reversed(self):
        with pytest.raises(ValueError):
            aggregate_production(RECORDS, APR, JAN)

    def test_well_filter(self):
        recs = RECORDS + [ProductionRecord("166", JAN, 50.0)]
        assert aggregate_production(recs, JAN, FEB, "166") == 50.0
        assert aggregate_production(recs, JAN, FEB) == 150.0

    @given(st.integers(0, 200), st.integers(0, 200), st.integers(0, 200))
    def test_additive(self, a, b, c):
        d0, d1, d2 = sorted(dt.date(2004, 12, 1) + dt.timedelta(days=k) for k in (a, b, c))
        whole = aggregate_production(RECORDS, d0, d2)
        parts = aggregate_production(RECORDS, d0, d1) + aggregate_production(RECORDS, d1, d2)
        assert whole == pytest.approx(parts, abs=1e-9)

    def test_per_interval(self):
        got = production_per_interval(RECORDS, [JAN, FEB, APR])
        np.testing.assert_allclose(got, [100.0, 500.0])


class TestRecords:
    def test_negative_barrels(self):
        with pytest.raises(ValueError):
            ProductionRecord("1", JAN, -1.0)

    def test_month_normalised(self):
        assert ProductionRecord("1", dt.date(2005, 3, 17), 1.0).month == MAR

    def test_parse_month(self):
        assert parse_month("2004-02") == dt.date(2004, 2, 1)
        with pytest.raises(ValueError):
            parse_month("2004/02")


class TestPearson:
    def test_examples(self):
        assert pearson([1, 2, 3], [2, 4, 6]) == pytest.approx(1.0)
        assert pearson([1, 2, 3], [6, 4, 2]) == pytest.approx(-1.0)
        assert pearson([1, 2, 4], [1, 3, 3]) == pytest.approx(0.7559, abs=5e-5)

    def test_matches_numpy(self):
        x, y = np.random.default_rng(0).normal(size=(2, 30))
        assert pearson(x, y) == pytest.approx(np.corrcoef(x, y)[0, 1], abs=1e-12)

    @pytest.mark.parametrize("x, y", [([1, 1, 1], [1, 2, 3]), ([1, 2], [5, 5]), ([1], [2]), ([1, 2], [1, 2, 3])])
    def test_errors(self, x, y):
        with pytest.raises(ValueError):
            pearson(x, y)

    @given(st.lists(st.tuples(finite, finite), min_size=3, max_size=20))
    def test_symmetric_and_bounded(self, xy):
        x, y = np.array(xy).T
        assume(np.ptp(x) > 1e-3 and np.ptp(y) > 1e-3)
        r = pearson(x, y)
        assert -1 <= r <= 1
        assert r == pytest.approx(pearson(y, x), abs=1e-12)

    @given(st.lists(st.tuples(finite, finite), min_size=3, max_size=20), st.floats(0.01, 100), finite)
    def test_affine_invariance(self, xy, a, b):
        x, y = np.array(xy).T
        assume(np.ptp(x) > 1e-2 and np.ptp(y) > 1e-2)
        r = pearson(x, y)
        assert pearson(a * x + b, y) == pytest.approx(r, abs=1e-6)
        assert pearson(-x, y) == pytest.approx(-r, abs=1e-12)


class TestLagged:
    PROD = np.array([3.0, 7.0, 1.0, 8.0, 2.0, 9.0, 4.0, 6.0, 5.0, 10.0])

    def test_negative_multiple(self):
        reports = lagged_correlation(self.PROD, -0.3 * self.PROD, 2, "78")
        assert [r.lag_months for r in reports] == [-2, -1, 0, 1, 2]
        zero = next(r for r in reports if r.lag_months == 0)
        assert zero.pearson_r == pytest.approx(-1.0) and zero.n == 10
        assert all(abs(r.pearson_r) < 1 - 1e-9 for r in reports if r.lag_months != 0)
        assert {r.n for r in reports if r.lag_months != 0} == {8, 9}

    def test_shifted_copy(self):
        rng = np.random.default_rng(1)
        prod = rng.uniform(0, 10, 20)
        rate = np.empty_like(prod)
        rate[2:] = -2.0 * prod[:-2]  # surface answers two intervals later
        rate[:2] = rng.uniform(-20, 0, 2)
        best = best_lag(lagged_correlation(prod, rate, 4))
        assert best.lag_months == 2 and best.pearson_r == pytest.approx(-1.0)

    def test_white_noise(self):
        prod, rate = np.random.default_rng(50).normal(size=(2, 50))
        assert all(abs(r.pearson_r) < 0.4 for r in lagged_correlation(prod, rate, 5))

    def test_short_overlap_omitted(self):
        reports = lagged_correlation([1.0, 2.0, 4.0], [3.0, 1.0, 0.0], 3)
        assert sorted(r.lag_months for r in reports) == [-1, 0, 1]

    def test_constant_window_omitted(self, caplog):
        with caplog.at_level(logging.WARNING):
            reports = lagged_correlation([1.0, 1.0, 1.0, 2.0], [1.0, 2.0, 3.0, 5.0], 1)
        assert [r.lag_months for r in reports] == [-1, 0]
        assert "lag 1 omitted" in caplog.text

    def test_errors(self):
        with pytest.raises(ValueError):
            lagged_correlation([1.0, 2.0], [1.0], 1)
        with pytest.raises(ValueError):
            lagged_correlation([1.0, 2.0], [1.0, 2.0], -1)

    @settings(max_examples=50)
    @given(st.lists(st.tuples(finite, finite), min_size=4, max_size=15))
    def test_lag_zero_is_pearson(self, xy):
        x, y = np.array(xy).T
        assume(np.ptp(x) > 1e-3 and np.ptp(y) > 1e-3)
        (zero,) = [r for r in lagged_correlation(x, y, 0)]
        assert zero.pearson_r == pytest.approx(pearson(x, y)) and zero.n == x.size

    def test_best_lag_empty(self):
        assert best_lag([]) is None


def test_displacement_rate():
    epochs = [dt.date(2004, 1, 1), dt.date(2004, 7, 1), dt.date(2005, 1, 1)]
    t = np.array([(d - epochs[0]).days for d in epochs]) / 365.25
    rate = displacement_rate([0.0, -3.0, -3.0], epochs)
    np.testing.assert_allclose(rate, [-3.0 / t[1], 0.0])
    with pytest.raises(ValueError):
        displacement_rate([0.0, 1.0], epochs)


class TestFiles:
    def test_production_round_trip(self, tmp_path):
        save_production(RECORDS, tmp_path / "p.csv")
        assert load_production(tmp_path / "p.csv") == RECORDS

    def test_shipped_production(self):
        recs = load_production(data_path("production_synthetic.csv"))
        assert {r.well_id for r in recs} == {"78", "166"}
        assert min(r.month for r in recs) <= dt.date(2003, 9, 1)
        assert max(r.month for r in recs) >= dt.date(2005, 8, 1)

    @pytest.mark.parametrize("row", ["78,2005-13,10", "78,2005-01,-5", "78,2005-01", "78,2005-02,1"])
    def test_bad_production(self, tmp_path, row):
        path = tmp_path / "p.csv"
        path.write_text(f"well_id,month,barrels\n78,2005-02,10\n{row}\n")
        with pytest.raises(ValueError, match="line 3"):
            load_production(path)

    def test_report_round_trip(self, tmp_path):
        reports = [CorrelationReport("78", -1, -0.25, 8), CorrelationReport("166", 2, 0.5, 7)]
        save_report(reports, tmp_path / "r.csv")
        assert (tmp_path / "r.csv").read_text().splitlines()[0] == "well_id,lag,r,n"
        assert load_report(tmp_path / "r.csv") == reports

    def test_series_round_trip(self, tmp_path):
        epochs = [dt.date(2004, 1, 1), dt.date(2004, 2, 5)]
        save_series(epochs, [0.0, -1.25], tmp_path / "s.csv")
        got_epochs, values = load_series(tmp_path / "s.csv")
        assert got_epochs == epochs
        np.testing.assert_allclose(values, [0.0, -1.25])
