"""VIX replication and its split into observation and discretization errors.

``xi = VIX - VIX_hat`` compares the index on observed quotes with the same
index on iCOS-fitted prices at the observed strikes; ``zeta = VIX_hat - CIV``
compares that with the corridor implied volatility, the continuous integral of
fitted OTM prices over ``[alpha, beta]``.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .estimator import ICOS
from .exceptions import ChainError
from .market_data import OptionChain, spline_iv_regrid
from .quadrature import integrate

THIRTY_DAYS = 30 / 365
CIV_GRID = 2001


@dataclass(frozen=True)
class VixDecomposition:
    vix: float
    vix_hat: float
    civ_hat: float
    n_floored: int = 0
    n_terms: tuple = ()

    @property
    def xi_hat(self) -> float:
        """Observation error ``VIX - VIX_hat``."""
        return self.vix - self.vix_hat

    @property
    def zeta_hat(self) -> float:
        """Discretization error ``VIX_hat - CIV``."""
        return self.vix_hat - self.civ_hat

    def as_dict(self) -> dict:
        d = asdict(self)
        d.update(xi_hat=self.xi_hat, zeta_hat=self.zeta_hat, n_terms=list(self.n_terms))
        return d


def strike_widths(strikes) -> np.ndarray:
    """CBOE ``Delta K``: half the distance between neighbours, one-sided at the ends."""
    k = np.asarray(strikes, dtype=float)
    if k.size < 2:
        raise ChainError("need at least two strikes")
    d = np.empty_like(k)
    d[1:-1] = 0.5 * (k[2:] - k[:-2])
    d[0] = k[1] - k[0]
    d[-1] = k[-1] - k[-2]
    return d


def k0_index(strikes, forward) -> int:
    k = np.asarray(strikes, dtype=float)
    below = np.flatnonzero(k <= forward)
    if below.size == 0 or forward > k[-1]:
        raise ChainError(f"forward {forward} outside strike range [{k[0]}, {k[-1]}]")
    return int(below[-1])


def tenor_variance(strikes, otm, forward, rate, maturity) -> float:
    """Single-tenor CBOE variance ``sigma^2`` (annualised, not yet scaled by 100).

    At ``K0`` the put and call are averaged, i.e. the put plus half its parity gap.
    """
    k = np.asarray(strikes, dtype=float)
    o = np.array(otm, dtype=float)
    i0 = k0_index(k, forward)
    o[i0] += 0.5 * np.exp(-rate * maturity) * (forward - k[i0])
    strip = np.sum(strike_widths(k) / k**2 * o)
    return 2 / maturity * np.exp(rate * maturity) * strip - (forward / k[i0] - 1) ** 2 / maturity


def blend(variances, maturities, target: float = THIRTY_DAYS) -> float:
    """``100 sqrt(.)`` of one variance, or of two interpolated linearly in total variance."""
    if len(variances) == 1:
        v = variances[0]
    else:
        (v1, v2), (t1, t2) = variances, maturities
        if not t1 < t2:
            raise ChainError("near-term maturity must precede next-term maturity")
        w1 = (t2 - target) / (t2 - t1)
        v = (t1 * v1 * w1 + t2 * v2 * (1 - w1)) / target
    if v < 0:
        raise ChainError(f"negative blended variance {v:.6g}")
    return 100.0 * np.sqrt(v)


def _tenors(near: OptionChain, next_: OptionChain | None):
    return (near,) if next_ is None else (near, next_)


def vix_index(near: OptionChain, next_: OptionChain | None = None, prices=None) -> float:
    """CBOE index from the chains' own quotes, or from ``prices`` (one array per tenor)."""
    chains = _tenors(near, next_)
    prices = [c.otm_prices for c in chains] if prices is None else prices
    variances = [tenor_variance(c.strikes, p, c.forward, c.rate, c.maturity) for c, p in zip(chains, prices)]
    return blend(variances, [c.maturity for c in chains])


def fitted_otm(model: ICOS, x, forward) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    put = x <= forward
    out = np.empty_like(x)
    if put.any():
        out[put] = model.price_put(x[put]).value
    if (~put).any():
        out[~put] = model.price_call(x[~put]).value
    return out


def corridor_variance(model: ICOS, chain: OptionChain, grid: int = CIV_GRID):
    """``(2/T) e^{rT} int O_hat(x)/x^2 dx`` on a uniform Simpson grid; returns ``(variance, n_floored)``."""
    x = np.linspace(chain.alpha, chain.beta, grid)
    o = fitted_otm(model, x, chain.forward)
    neg = o < 0
    o = np.where(neg, 0.0, o)
    v = 2 / chain.maturity * np.exp(chain.rate * chain.maturity) * integrate(o / x**2, x, "simpson")
    return float(v), int(neg.sum())


def civ(models, chains, grid: int = CIV_GRID):
    """Corridor implied volatility from fitted models, blended across tenors like the index."""
    parts = [corridor_variance(m, c, grid) for m, c in zip(models, chains)]
    return blend([p[0] for p in parts], [c.maturity for c in chains]), sum(p[1] for p in parts)


def fit_tenor(chain: OptionChain, n_terms="auto", quad="simpson", regrid: bool = True, m: int | None = None) -> ICOS:
    data = spline_iv_regrid(chain, m) if regrid else chain
    return ICOS(n_terms=n_terms, n_sine_terms=1, quad=quad).fit(data)


def dissect(near: OptionChain, next_: OptionChain | None = None, n_terms="auto", quad="simpson",
            regrid: bool = True, m: int | None = None, grid: int = CIV_GRID) -> VixDecomposition:
    """Spline-regrid and fit each tenor, then compute VIX, VIX_hat and CIV."""
    chains = _tenors(near, next_)
    if next_ is not None and not near.maturity < next_.maturity:
        raise ChainError("near-term maturity must precede next-term maturity")
    models = [fit_tenor(c, n_terms, quad, regrid, m) for c in chains]
    vix = vix_index(near, next_)
    vix_hat = vix_index(near, next_, [fitted_otm(mod, c.strikes, c.forward) for mod, c in zip(models, chains)])
    civ_hat, floored = civ(models, chains, grid)
    return VixDecomposition(vix, vix_hat, civ_hat, floored, tuple(mod.n_terms_ for mod in models))


def panel(days, n_terms="auto", **kwargs) -> list:
    """Dissect a sequence of ``(near, next)`` chain pairs, one per day."""
    return [dissect(near, nxt, n_terms=n_terms, **kwargs) for near, nxt in days]
