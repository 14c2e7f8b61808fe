import numpy as np
import pytest
from scipy.integrate import quad

from icos.exceptions import ChainError
from icos.experiments import bs_vix_chain, cboe_strikes
from icos.market_data import OptionChain
from icos.models import BsModel
from icos.vix import (
    blend,
    civ,
    dissect,
    fit_tenor,
    k0_index,
    panel,
    strike_widths,
    tenor_variance,
    vix_index,
)

NEAR, NEXT = 23 / 365, 37 / 365


def test_strike_widths_use_one_sided_edges():
    np.testing.assert_array_equal(strike_widths([10.0, 12.0, 15.0, 20.0]), [2.0, 2.5, 4.0, 5.0])
    with pytest.raises(ChainError):
        strike_widths([1.0])


def test_k0_is_first_strike_below_forward():
    assert k0_index([90.0, 100.0, 110.0], 105.0) == 1
    assert k0_index([90.0, 100.0, 110.0], 100.0) == 1
    with pytest.raises(ChainError):
        k0_index([90.0, 100.0], 120.0)


def test_blend_interpolates_total_variance():
    assert blend([0.04], [30 / 365]) == pytest.approx(20.0)
    assert blend([0.04, 0.04], [NEAR, NEXT]) == pytest.approx(20.0)
    v = blend([0.04, 0.09], [20 / 365, 40 / 365])
    assert v == pytest.approx(100 * np.sqrt((20 * 0.04 * 0.5 + 40 * 0.09 * 0.5) / 30))
    with pytest.raises(ChainError):
        blend([0.04, 0.04], [NEXT, NEAR])
    with pytest.raises(ChainError):
        blend([-0.01], [NEAR])


def test_single_tenor_vix_on_a_full_black_scholes_strip():
    """A wide, fine strip recovers sigma to a hundredth of an index point."""
    T = 30 / 365
    k = np.arange(1500.0, 9000.1, 5.0)
    m = BsModel(4000.0, 0.0, 0.3, T)
    v = tenor_variance(k, m.otm_price(k), 4000.0, 0.0, T)
    assert 100 * np.sqrt(v) == pytest.approx(30.0, abs=0.01)


def _corridor_oracle(model, a, b, T):
    f = lambda k: model.otm_price(k) / k**2
    return 100 * np.sqrt(2 / T * (quad(f, a, model.forward)[0] + quad(f, model.forward, b)[0]))


def test_vix_exceeds_corridor_oracle_on_the_same_strikes():
    T = 30 / 365
    m = BsModel(4000.0, 0.0, 0.3, T)
    k = np.linspace(3400.0, 4400.0, 201)
    vix = 100 * np.sqrt(tenor_variance(k, m.otm_price(k), 4000.0, 0.0, T))
    assert vix > _corridor_oracle(m, 3400.0, 4400.0, T)


def test_civ_matches_analytic_corridor():
    T = 30 / 365
    m = BsModel(4000.0, 0.0, 0.3, T)
    k = np.linspace(3400.0, 4400.0, 201)
    chain = OptionChain.from_model(m, k)
    model = fit_tenor(chain, n_terms=14, regrid=False)
    value, floored = civ([model], [chain])
    assert value == pytest.approx(_corridor_oracle(m, 3400.0, 4400.0, T), abs=0.05)
    assert floored == 0


def test_identities_on_noiseless_chains():
    near, nxt = bs_vix_chain(0.2, NEAR), bs_vix_chain(0.2, NEXT)
    d = dissect(near, nxt)
    assert abs(d.vix - (d.civ_hat + d.zeta_hat + d.xi_hat)) < 1e-12
    assert abs(d.xi_hat) < 0.005
    assert d.zeta_hat > 0
    assert d.vix == pytest.approx(20.0, abs=0.1)
    assert set(d.as_dict()) >= {"vix", "vix_hat", "civ_hat", "xi_hat", "zeta_hat", "n_floored", "n_terms"}


def test_xi_is_zero_on_observed_prices():
    near = bs_vix_chain(0.3, NEAR, seed=4)
    assert vix_index(near, prices=[near.otm_prices]) == vix_index(near)


@pytest.mark.parametrize("sigma", [0.12, 0.3, 0.8])
def test_zeta_positive_on_black_scholes_fixtures(sigma):
    d = dissect(bs_vix_chain(sigma, NEAR), bs_vix_chain(sigma, NEXT), n_terms=14)
    assert d.zeta_hat > 0


def test_zeta_positive_on_uniform_grid():
    k = np.linspace(3400.0, 4400.0, 201)
    d = dissect(bs_vix_chain(0.3, 30 / 365, strikes=k), n_terms=14, regrid=False)
    assert d.zeta_hat > 0 and abs(d.xi_hat) < 0.005


def test_tenor_ordering_is_checked():
    with pytest.raises(ChainError):
        dissect(bs_vix_chain(0.2, NEXT), bs_vix_chain(0.2, NEAR))


def test_panel_runs_each_day():
    days = [(bs_vix_chain(0.2, NEAR, seed=s), bs_vix_chain(0.2, NEXT, seed=s + 100)) for s in range(2)]
    out = panel(days, n_terms=14)
    assert len(out) == 2 and all(abs(d.xi_hat) < 0.04 for d in out)


def test_cboe_grid_covers_the_forward():
    k = cboe_strikes(2500.0, 0.8, 30 / 365)
    assert k[0] < 2500.0 < k[-1]
