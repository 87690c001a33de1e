"""Return panels, CSV serialization, moment estimates, scenario sets."""

from datetime import date, timedelta

import numpy as np
import pytest

from drtrack.data import (
    GaussianMC,
    Historical,
    ReturnPanel,
    build_sample_set,
    estimate_moments,
    gen_synthetic,
    load_returns_csv,
    save_returns_csv,
)
from drtrack.errors import DataError, InvalidInputError


def make_panel(n=6, d=2, seed=0):
    rng = np.random.default_rng(seed)
    start = date(2021, 3, 1)
    return ReturnPanel(
        dates=tuple(start + timedelta(days=i) for i in range(n)),
        index_returns=rng.normal(0.0, 0.01, n),
        asset_returns=rng.normal(0.0, 0.01, (n, d)),
        asset_names=tuple(f"a{i}" for i in range(d)),
    )


def test_panel_validation():
    good = make_panel()
    with pytest.raises(InvalidInputError):
        ReturnPanel(dates=("2021-03-01", "2021-03-02"),
                    index_returns=good.index_returns[:2],
                    asset_returns=good.asset_returns[:2],
                    asset_names=good.asset_names)
    with pytest.raises(InvalidInputError):
        ReturnPanel(dates=(good.dates[1], good.dates[0]),
                    index_returns=good.index_returns[:2],
                    asset_returns=good.asset_returns[:2],
                    asset_names=good.asset_names)
    with pytest.raises(InvalidInputError):
        ReturnPanel(dates=good.dates[:1],
                    index_returns=good.index_returns[:1],
                    asset_returns=good.asset_returns[:1],
                    asset_names=good.asset_names)
    with pytest.raises(InvalidInputError):
        ReturnPanel(dates=good.dates, index_returns=good.index_returns[:-1],
                    asset_returns=good.asset_returns,
                    asset_names=good.asset_names)
    with pytest.raises(InvalidInputError):
        ReturnPanel(dates=good.dates, index_returns=good.index_returns,
                    asset_returns=good.asset_returns,
                    asset_names=("a0",))
    with pytest.raises(InvalidInputError):
        ReturnPanel(dates=good.dates, index_returns=good.index_returns,
                    asset_returns=good.asset_returns,
                    asset_names=("dup", "dup"))
    with pytest.raises(InvalidInputError):
        ReturnPanel(dates=good.dates, index_returns=good.index_returns,
                    asset_returns=good.asset_returns,
                    asset_names=("", "a1"))
    bad = np.array(good.asset_returns)
    bad[2, 1] = -1.0
    with pytest.raises(InvalidInputError):
        ReturnPanel(dates=good.dates, index_returns=good.index_returns,
                    asset_returns=bad, asset_names=good.asset_names)
    bad[2, 1] = np.nan
    with pytest.raises(InvalidInputError):
        ReturnPanel(dates=good.dates, index_returns=good.index_returns,
                    asset_returns=bad, asset_names=good.asset_names)


def test_joint_matrix_puts_index_last():
    panel = make_panel(n=5, d=3)
    joint = panel.joint_matrix()
    assert joint.shape == (5, 4)
    assert np.array_equal(joint[:, :3], panel.asset_returns)
    assert np.array_equal(joint[:, 3], panel.index_returns)


def test_gen_synthetic_is_deterministic():
    a = gen_synthetic(d=4, n_days=50, seed=123)
    b = gen_synthetic(d=4, n_days=50, seed=123)
    c = gen_synthetic(d=4, n_days=50, seed=124)
    assert a.dates == b.dates
    assert np.array_equal(a.index_returns, b.index_returns)
    assert np.array_equal(a.asset_returns, b.asset_returns)
    assert not np.array_equal(a.index_returns, c.index_returns)
    assert a.n_days == 50 and a.n_assets == 4
    assert a.asset_names == ("asset_1", "asset_2", "asset_3", "asset_4")


def test_gen_synthetic_validation():
    with pytest.raises(InvalidInputError):
        gen_synthetic(d=0, n_days=10, seed=0)
    with pytest.raises(InvalidInputError):
        gen_synthetic(d=2, n_days=0, seed=0)
    for bad_shift in (0, 10, 11):
        with pytest.raises(InvalidInputError):
            gen_synthetic(d=2, n_days=10, seed=0, regime_shift=bad_shift)


def test_gen_synthetic_regime_shift_changes_only_the_tail():
    base = gen_synthetic(d=3, n_days=40, seed=7)
    shifted = gen_synthetic(d=3, n_days=40, seed=7, regime_shift=25)
    assert np.array_equal(base.index_returns, shifted.index_returns)
    assert np.array_equal(base.asset_returns[:25], shifted.asset_returns[:25])
    assert not np.array_equal(base.asset_returns[25:], shifted.asset_returns[25:])


def test_gen_synthetic_unit_beta_zero_noise_replicates_index():
    panel = gen_synthetic(d=2, n_days=30, seed=3,
                          beta_range=(1.0, 1.0), sigma_range=(0.0, 0.0))
    for j in range(2):
        assert np.array_equal(panel.asset_returns[:, j], panel.index_returns)


def test_csv_round_trip_is_exact(tmp_path):
    panel = gen_synthetic(d=3, n_days=25, seed=11)
    path = tmp_path / "returns.csv"
    save_returns_csv(panel, path)
    back = load_returns_csv(path)
    assert back.dates == panel.dates
    assert back.asset_names == panel.asset_names
    assert np.array_equal(back.index_returns, panel.index_returns)
    assert np.array_equal(back.asset_returns, panel.asset_returns)
    # identical bytes when saved again
    twin = tmp_path / "again.csv"
    save_returns_csv(back, twin)
    assert path.read_bytes() == twin.read_bytes()


def write_csv(tmp_path, text):
    path = tmp_path / "bad.csv"
    path.write_text(text, encoding="utf-8")
    return path


def test_load_rejects_malformed_files(tmp_path):
    with pytest.raises(DataError, match="not found"):
        load_returns_csv(tmp_path / "missing.csv")
    cases = {
        "empty": "",
        "bad header": "day,index,a\n2021-01-01,0.0,0.0\n2021-01-02,0.0,0.0\n",
        "no assets": "date,index\n2021-01-01,0.0\n2021-01-02,0.0\n",
        "blank name": "date,index,\n2021-01-01,0.0,0.0\n2021-01-02,0.0,0.0\n",
        "dup names": "date,index,a,a\n2021-01-01,0,0,0\n2021-01-02,0,0,0\n",
        "field count": "date,index,a\n2021-01-01,0.0\n2021-01-02,0.0,0.0\n",
        "bad date": "date,index,a\nnot-a-date,0.0,0.0\n2021-01-02,0.0,0.0\n",
        "date order": "date,index,a\n2021-01-02,0.0,0.0\n2021-01-01,0.0,0.0\n",
        "bad number": "date,index,a\n2021-01-01,zero,0.0\n2021-01-02,0.0,0.0\n",
        "non-finite": "date,index,a\n2021-01-01,nan,0.0\n2021-01-02,0.0,0.0\n",
        "below -1": "date,index,a\n2021-01-01,0.0,-1.5\n2021-01-02,0.0,0.0\n",
        "one row": "date,index,a\n2021-01-01,0.0,0.0\n",
    }
    for label, text in cases.items():
        with pytest.raises(DataError):
            load_returns_csv(write_csv(tmp_path, text))


def test_estimate_moments_matches_numpy():
    panel = gen_synthetic(d=3, n_days=60, seed=5)
    est = estimate_moments(panel, start=10, stop=50)
    block = panel.joint_matrix()[10:50]
    assert est.mu_hat == pytest.approx(block.mean(axis=0), rel=1e-14)
    assert est.sigma_hat == pytest.approx(np.cov(block.T, bias=True), rel=1e-12)
    assert not est.repaired and est.jitter == 0.0
    assert np.linalg.eigvalsh(est.sigma_hat).min() > 0.0


def test_estimate_moments_repairs_degenerate_windows():
    # perfectly replicated index: joint covariance is rank deficient
    panel = gen_synthetic(d=2, n_days=20, seed=9,
                          beta_range=(1.0, 1.0), sigma_range=(0.0, 0.0))
    est = estimate_moments(panel)
    assert est.repaired and est.jitter > 0.0
    assert np.linalg.eigvalsh(est.sigma_hat).min() > 0.0


def test_estimate_moments_validation():
    panel = make_panel(n=6)
    for start, stop in ((-1, 4), (3, 3), (0, 7), (5, 4)):
        with pytest.raises(InvalidInputError):
            estimate_moments(panel, start=start, stop=stop)
    with pytest.raises(InvalidInputError):
        estimate_moments(panel, start=2, stop=3)


def test_build_sample_set_historical_slices_the_window():
    panel = gen_synthetic(d=3, n_days=30, seed=2)
    samples = build_sample_set(panel, start=5, stop=25, mode=Historical())
    assert np.array_equal(samples.samples, panel.joint_matrix()[5:25])
    assert samples.n_samples == 20 and samples.n_assets == 3


def test_build_sample_set_gaussian_mc():
    panel = gen_synthetic(d=3, n_days=60, seed=4)
    mode = GaussianMC(count=20_000, seed=77)
    a = build_sample_set(panel, mode=mode)
    b = build_sample_set(panel, mode=GaussianMC(count=20_000, seed=77))
    assert np.array_equal(a.samples, b.samples)
    assert a.n_samples == 20_000 and a.n_assets == 3
    est = estimate_moments(panel)
    assert a.samples.mean(axis=0) == pytest.approx(est.mu_hat, abs=5e-4)
    assert np.cov(a.samples.T, bias=True) == pytest.approx(
        est.sigma_hat, abs=5e-6
    )
    with pytest.raises(InvalidInputError):
        GaussianMC(count=0, seed=1)
    with pytest.raises(InvalidInputError):
        build_sample_set(panel, mode="historical")
