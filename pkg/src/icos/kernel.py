"""Nadaraya-Watson smoothing of implied volatilities, the comparison baseline.

Prices come from Black-Scholes at the smoothed volatility and the density from
a centred second difference of those prices. The delta treats the smile as a
function of moneyness ``K / S`` (sticky moneyness): the Black-Scholes delta at
the smoothed volatility plus ``vega * d sigma / d S``.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .exceptions import ChainError, OutOfBoundsError
from .market_data import OptionChain, implied_vol
from .models import CALL, PUT, black_delta, black_price, black_vega

_TINY = 1e-300


def bandwidth(c: float, n: int, p: int = 2) -> float:
    """``h = (c / log n) n^{-1/(2p+1)}``, in units of moneyness ``K / F``."""
    return c / np.log(n) * n ** (-1.0 / (2 * p + 1))


def otm_implied_vols(strikes, otm, forward, rate, maturity) -> np.ndarray:
    """Implied vols of OTM quotes (any leading batch axes); NaN where a quote cannot be inverted."""
    k = np.asarray(strikes, dtype=float)
    o = np.asarray(otm, dtype=float)
    put = k <= forward
    iv = np.empty(o.shape)
    iv[..., put] = implied_vol(o[..., put], forward, k[put], rate, maturity, PUT, errors="nan")
    iv[..., ~put] = implied_vol(o[..., ~put], forward, k[~put], rate, maturity, CALL, errors="nan")
    return iv


def nw_weights(x, strikes, h_strike, valid=None) -> np.ndarray:
    """Normalised Gaussian weights, shape ``(..., len(x), n)``; rows sum to one.

    ``valid`` masks out quotes (same leading axes as the result minus the ``x`` axis).
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    e = 0.5 * ((x[:, None] - np.asarray(strikes)[None, :]) / h_strike) ** 2
    # shift by the row minimum so a narrow kernel does not underflow
    k = np.exp(-(e - e.min(axis=1, keepdims=True)))
    if valid is not None:
        k = k * np.asarray(valid, dtype=float)[..., None, :]
    s = k.sum(axis=-1, keepdims=True)
    if np.any(s < _TINY):
        raise ChainError("kernel weights degenerate; bandwidth too small")
    return k / s


def nw_vol(x, strikes, ivs, h_strike) -> np.ndarray:
    """Smoothed vol at ``x`` for each row of ``ivs`` (NaN entries are skipped)."""
    ok = np.isfinite(ivs)
    w = nw_weights(x, strikes, h_strike, ok)
    return np.einsum("...pn,...n->...p", w, np.where(ok, ivs, 0.0))


class KernelSmoother(BaseEstimator):
    """Gaussian-kernel smoother on Black-Scholes implied volatility.

    Parameters
    ----------
    c : float
        Bandwidth constant.
    p : int
        Smoothness order in the bandwidth rate ``n^{-1/(2p+1)}``.
    fd_step : float, optional
        Step of the second difference for the density; the smallest strike spacing when omitted.
    """

    def __init__(self, c=0.1, p=2, fd_step=None):
        self.c = c
        self.p = p
        self.fd_step = fd_step

    def fit(self, X, y=None, *, forward=None, rate=0.0, maturity=None, spot=None):
        if isinstance(X, OptionChain):
            k, o, forward, rate, maturity = X.strikes, X.otm_prices, X.forward, X.rate, X.maturity
            spot = X.spot if spot is None else spot
        else:
            if y is None or forward is None or maturity is None:
                raise ChainError("with raw strikes, pass y (OTM prices), forward and maturity")
            k, o = np.asarray(X, dtype=float), np.asarray(y, dtype=float)
        if self.c <= 0:
            raise ValueError("bandwidth constant c must be positive")
        iv = otm_implied_vols(k, o, forward, rate, maturity)
        ok = np.isfinite(iv)
        if ok.sum() < 2:
            raise ChainError("fewer than two invertible quotes")
        self.n_dropped_ = int((~ok).sum())
        self.strikes_ = k[ok]
        self.ivs_ = iv[ok]
        self.forward_, self.rate_, self.maturity_ = float(forward), float(rate), float(maturity)
        self.spot_ = self.forward_ * np.exp(-self.rate_ * self.maturity_) if spot is None else float(spot)
        self.alpha_, self.beta_ = float(k[0]), float(k[-1])
        self.h_ = bandwidth(self.c, k.size, self.p) * self.forward_
        self.step_ = float(np.min(np.diff(k))) if self.fd_step is None else float(self.fd_step)
        return self

    def kernel_weights(self, x) -> np.ndarray:
        check_is_fitted(self, "ivs_")
        return nw_weights(x, self.strikes_, self.h_)

    def vol(self, x) -> np.ndarray:
        return self.kernel_weights(x) @ self.ivs_

    def vol_slope(self, x) -> np.ndarray:
        """``d sigma / d K`` by a central difference on the smoothed curve."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        e = 1e-3 * self.h_
        return (self.vol(x + e) - self.vol(x - e)) / (2 * e)

    def price_call(self, x) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return black_price(self.forward_, x, self.rate_, self.maturity_, self.vol(x), CALL)

    def predict(self, X):
        return self.price_call(X)

    def rnd(self, y) -> np.ndarray:
        """Density of ``log S_T`` from a centred second difference of smoothed call prices."""
        s = np.exp(np.atleast_1d(np.asarray(y, dtype=float)))
        h = self.step_
        if np.any(s - h < self.alpha_ * (1 - 1e-12)) or np.any(s + h > self.beta_ * (1 + 1e-12)):
            raise OutOfBoundsError("finite-difference stencil leaves [alpha, beta]")
        c = self.price_call(np.concatenate([s - h, s, s + h])).reshape(3, -1)
        f_s = np.exp(self.rate_ * self.maturity_) * (c[0] - 2 * c[1] + c[2]) / h**2
        return s * f_s

    def delta(self, x) -> np.ndarray:
        """Sticky-moneyness delta: ``sigma(K/S)`` moves with the spot, so ``d sigma/dS = -(K/S) sigma'(K)``."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        sig = self.vol(x)
        bs = black_delta(self.forward_, x, self.rate_, self.maturity_, sig, CALL)
        vega = black_vega(self.forward_, x, self.rate_, self.maturity_, sig)
        return bs - vega * (x / self.spot_) * self.vol_slope(x)


def ks_batch(strikes, otm, forward, rate, maturity, c, points, spot=None, p=2, fd_step=None):
    """Price, log-density and delta at ``points`` for every row of ``otm`` (``(reps, n)``).

    Same numbers as fitting :class:`KernelSmoother` row by row, computed in one pass.
    Rows with fewer than two invertible quotes come back as NaN.
    """
    k = np.asarray(strikes, dtype=float)
    x = np.asarray(points, dtype=float)
    iv = otm_implied_vols(k, otm, forward, rate, maturity)
    good = np.isfinite(iv).sum(axis=-1) >= 2
    iv = np.where(good[:, None], iv, np.nan)
    iv_safe = np.where(good[:, None], iv, 0.3)
    h = bandwidth(c, k.size, p) * forward
    step = float(np.min(np.diff(k))) if fd_step is None else float(fd_step)
    e = 1e-3 * h
    grid = np.concatenate([x - step, x, x + step, x - e, x + e])
    sig = nw_vol(grid, k, iv_safe, h).reshape(iv.shape[0], 5, x.size)
    calls = black_price(forward, grid.reshape(5, -1), rate, maturity, sig, CALL)
    price = calls[:, 1]
    dens = x * np.exp(rate * maturity) * (calls[:, 0] - 2 * calls[:, 1] + calls[:, 2]) / step**2
    s0 = forward * np.exp(-rate * maturity) if spot is None else spot
    slope = (sig[:, 4] - sig[:, 3]) / (2 * e)
    delta = black_delta(forward, x, rate, maturity, sig[:, 1], CALL) - black_vega(
        forward, x, rate, maturity, sig[:, 1]
    ) * (x / s0) * slope
    out = np.stack([price, dens, delta])
    out[:, ~good] = np.nan
    return out, int((~np.isfinite(iv)).sum())
