import numpy as np
import pytest

from insured_marl.market_data import (MarketSeries, SplitSpec, inject_crash, load_csv, save_csv, split,
                                      split_index, synth_gbm)


def write(tmp_path, text, name="prices.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_inner_join_drops_date_missing_for_one_asset(tmp_path):
    p = write(tmp_path, "date,asset,close\n"
                        "2021-01-04,AAA,10\n2021-01-04,BBB,20\n"
                        "2021-01-05,AAA,11\n"
                        "2021-01-06,AAA,12\n2021-01-06,BBB,22\n")
    s = load_csv(p)
    assert s.asset_ids == ("AAA", "BBB")
    assert s.dates == ("2021-01-04", "2021-01-06")
    np.testing.assert_array_equal(s.prices, [[10, 20], [12, 22]])


def test_single_asset_pass_through(tmp_path):
    p = write(tmp_path, "date,asset,close\n2021-01-05,X,10.5\n2021-01-04,X,10.0\n")
    s = load_csv(p)
    assert (s.n_dates, s.n_assets) == (2, 1)
    np.testing.assert_array_equal(s.prices[:, 0], [10.0, 10.5])


def test_negative_price_reports_line(tmp_path):
    p = write(tmp_path, "date,asset,close\n2021-01-04,X,10.0\n2021-01-05,X,-1.0\n")
    with pytest.raises(ValueError, match="non-positive price at line 3"):
        load_csv(p)


def test_unparsable_row_reports_line(tmp_path):
    p = write(tmp_path, "date,asset,close\n2021-01-04,X,abc\n")
    with pytest.raises(ValueError, match="line 2"):
        load_csv(p)


def test_missing_file():
    with pytest.raises(FileNotFoundError, match="nope.csv"):
        load_csv("nope.csv")


def test_empty_date_intersection(tmp_path):
    p = write(tmp_path, "date,asset,close\n2021-01-04,X,1\n2021-01-05,Y,1\n")
    with pytest.raises(ValueError, match="empty intersection"):
        load_csv(p)


def test_custom_schema_and_round_trip(tmp_path):
    from insured_marl.market_data import CsvSchema
    s = synth_gbm(3, 6, seed=3)
    schema = CsvSchema("day", "ticker", "px")
    save_csv(s, tmp_path / "s.csv", schema)
    back = load_csv(tmp_path / "s.csv", schema)
    assert back.asset_ids == s.asset_ids and back.dates == s.dates
    np.testing.assert_array_equal(back.prices, s.prices)


def test_load_matches_rederived_intersection(tmp_path):
    rng = np.random.default_rng(0)
    rows, raw = [], {}
    dates = [f"2021-02-{d:02d}" for d in range(1, 21)]
    for a in ("A", "B", "C"):
        for d in dates:
            if rng.random() < 0.8:
                px = float(rng.uniform(1, 100))
                rows.append(f"{d},{a},{px!r}")
                raw.setdefault(a, {})[d] = px
    p = write(tmp_path, "date,asset,close\n" + "\n".join(rows) + "\n")
    s = load_csv(p)
    common = sorted(set(raw["A"]) & set(raw["B"]) & set(raw["C"]))
    assert list(s.dates) == common
    assert np.all(s.prices > 0)
    for t, d in enumerate(common):
        assert [raw[a][d] for a in s.asset_ids] == list(s.prices[t])


def test_gbm_zero_noise_is_flat():
    s = synth_gbm(3, 20, mu=0.0, sigma=0.0, s0=[10.0, 20.0, 30.0], seed=1)
    np.testing.assert_array_equal(s.prices, np.tile([10.0, 20.0, 30.0], (20, 1)))


def test_gbm_deterministic_given_seed():
    a = synth_gbm(4, 50, mu=0.1, sigma=0.3, seed=7)
    b = synth_gbm(4, 50, mu=0.1, sigma=0.3, seed=7)
    assert a.prices.tobytes() == b.prices.tobytes()


def test_gbm_log_return_volatility():
    s = synth_gbm(1, 10_000, mu=0.0, sigma=0.2, seed=42)
    sd = np.diff(np.log(s.prices[:, 0])).std(ddof=1)
    assert abs(sd / (0.2 / np.sqrt(252)) - 1) < 0.05


@pytest.mark.parametrize("kw", [{"s0": 0.0}, {"s0": -1.0}, {"sigma": -0.1}])
def test_gbm_rejects_bad_parameters(kw):
    with pytest.raises(ValueError):
        synth_gbm(2, 10, **kw)


def test_split_slices_windows():
    s = synth_gbm(2, 10, seed=0)
    tr, te = split(s, SplitSpec(s.dates[0], s.dates[6], s.dates[7], s.dates[9]))
    assert (tr.n_dates, te.n_dates) == (7, 3)
    assert set(tr.dates).isdisjoint(te.dates)
    np.testing.assert_array_equal(np.vstack([tr.prices, te.prices]), s.prices)


def test_split_rejects_overlap():
    s = synth_gbm(2, 10, seed=0)
    with pytest.raises(ValueError, match="overlap"):
        SplitSpec(s.dates[0], s.dates[6], s.dates[5], s.dates[9])


def test_split_empty_test_window():
    s = synth_gbm(2, 10, seed=0)
    with pytest.raises(ValueError, match="empty test window"):
        split(s, SplitSpec(s.dates[0], s.dates[6], "2099-01-01", "2099-12-31"))


def test_split_index_helper():
    s = synth_gbm(1, 12, seed=0)
    tr, te = split(s, split_index(s, 9))
    assert (tr.n_dates, te.n_dates) == (9, 3)


def test_inject_crash_total_drop():
    s = synth_gbm(2, 40, mu=0.0, sigma=0.0, seed=0)
    c = inject_crash(s, start=10, length=10, drop=0.3)
    np.testing.assert_allclose(c.prices[:10], s.prices[:10])
    np.testing.assert_allclose(c.prices[20:] / s.prices[20:], 0.7)
    assert np.all(np.diff(c.prices[9:20, 0]) < 0)


def test_series_invariants():
    with pytest.raises(ValueError):
        MarketSeries(("A",), ("2021-01-02", "2021-01-01"), np.ones((2, 1)))
    with pytest.raises(ValueError):
        MarketSeries(("A",), ("2021-01-01", "2021-01-02"), np.array([[1.0], [0.0]]))
