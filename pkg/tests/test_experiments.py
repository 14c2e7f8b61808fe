import csv

import numpy as np
import pytest

from icos.experiments import (
    SPX_STRIKES,
    McDesign,
    McReport,
    bimodal_chain,
    cboe_strikes,
    design_dict,
    noise_matrix,
    run_mc,
    spx_like_chain,
    strike_derivatives,
    vix_panel_chains,
    vol_path,
    write_quotes,
)
from icos.market_data import load_chain
from icos.models import BsModel, SvcjModel


def test_design_defaults_and_validation():
    d = McDesign()
    assert d.strikes.size == 201 and d.strikes[0] == 3400 and d.strikes[-1] == 4400
    assert (d.N, d.Nt) == (14, 25)
    assert McDesign(tenor="1y").N == 7
    assert McDesign(model="svcj").N == 25 and McDesign(model="svcj").Nt == 30
    with pytest.raises(ValueError):
        McDesign(model="heston")
    with pytest.raises(ValueError):
        McDesign(tenor="2y")
    with pytest.raises(ValueError):
        McDesign(reps=0)
    assert design_dict(d)["targets"] == list(d.targets)


def test_noise_rows_do_not_depend_on_batch_size():
    a = noise_matrix(7, 10, 5, 0.025)
    b = noise_matrix(7, 4, 5, 0.025)
    np.testing.assert_array_equal(a[:4], b)
    assert a.std() == pytest.approx(0.025, rel=0.3)


def test_strike_derivatives_fd_matches_closed_form():
    bs = BsModel()
    exact = strike_derivatives(bs, 3400.0, 4400.0)

    class Wrapped:  # same model, forced through the finite-difference branch
        price = staticmethod(bs.price)

    fd = strike_derivatives(Wrapped(), 3400.0, 4400.0)
    np.testing.assert_allclose(fd, exact, atol=1e-7)


def test_run_mc_is_deterministic_and_tabulates(tmp_path):
    d = McDesign(reps=30, seed=7, ks_c=(0.1,))
    r1, r2 = run_mc(d), run_mc(d)
    assert r1.rows == r2.rows
    names = {r["estimator"] for r in r1.rows}
    assert names == {"call", "rnd", "delta", "theta_c", "theta_p", "ks0.1_call", "ks0.1_rnd", "ks0.1_delta"}
    cell = r1.cell("call", 1.0)
    assert cell["truth"] == pytest.approx(137.21, abs=0.005) and cell["reps"] == 30
    assert abs(cell["mc_bias"]) < 0.01 and 0 < cell["mc_std"] < 0.02
    assert r1.column("delta", "coverage").shape == (6,)
    p1, p2 = r1.to_csv(tmp_path / "a.csv"), r2.to_csv(tmp_path / "b.csv")
    assert p1.read_bytes() == p2.read_bytes()
    rows = list(csv.DictReader(open(p1)))
    assert float(rows[0]["truth"]) == r1.rows[0]["truth"]
    with pytest.raises(KeyError):
        r1.cell("call", 0.5)


def test_report_counts_failures():
    r = McReport(McDesign())
    row = r.add("x", 1.0, 0.0, np.array([1.0, np.nan, 3.0]), dropped=4)
    assert row["reps"] == 2 and row["failures"] == 1 and row["dropped_quotes"] == 4
    assert row["mc_bias"] == 2.0


def test_spx_fixture():
    assert SPX_STRIKES.size == 239
    c = spx_like_chain(seed=3)
    assert c.n == 239 and not c.grid.uniform
    assert np.all(c.otm_prices >= 0.0125)
    np.testing.assert_array_equal(spx_like_chain(seed=3).otm_prices, c.otm_prices)


def test_bimodal_fixture_is_positive():
    c = bimodal_chain(seed=1)
    assert np.all(c.otm_prices >= 0) and c.grid.uniform


def test_write_quotes_round_trip(tmp_path):
    c = bimodal_chain(seed=None)
    back = load_chain(write_quotes(c, tmp_path / "q.csv", with_forward=True))
    np.testing.assert_allclose(back.otm_prices, c.otm_prices, atol=1e-9)
    assert back.forward == c.forward


def test_cboe_strikes_bands():
    k = cboe_strikes(4000.0, 0.3, 30 / 365)
    d = np.diff(k)
    assert np.all(d > 0)
    near = np.abs(np.log(k[:-1] / 4000)) < 0.05
    far = np.abs(np.log(k[:-1] / 4000)) > 0.16
    assert np.all(d[near & (np.abs(np.log(k[1:] / 4000)) < 0.05)] == 5)
    assert np.all(d[far & (np.abs(np.log(k[1:] / 4000)) > 0.16)] == 100)


def test_vol_path_and_panel():
    v = vol_path(250, seed=0)
    assert v.shape == (250,) and v.min() >= 0.09 and v.max() <= 0.8
    np.testing.assert_array_equal(v, vol_path(250, seed=0))
    days = vix_panel_chains(3, seed=0)
    assert len(days) == 3 and days[0][0].maturity < days[0][1].maturity


def test_svcj_mc_smoke():
    r = run_mc(McDesign(model="svcj", reps=20, seed=1))
    assert r.cell("call", 1.0)["truth"] == pytest.approx(54.13, abs=0.01)
    assert SvcjModel().forward == 4000.0
