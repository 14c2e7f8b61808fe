"""Ground-truth generators: Black-Scholes closed forms, the SVCJ model and a COS pricer."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.stats import norm

from .basis import _chi, _cos_int

CALL, PUT = "call", "put"


def _side(right: str) -> str:
    r = str(right).lower()
    if r in ("c", "call"):
        return CALL
    if r in ("p", "put"):
        return PUT
    raise ValueError(f"unknown option right {right!r}")


def black_price(forward, strike, rate, maturity, sigma, right="call"):
    """Black-Scholes price written on the forward; vectorised over all arguments."""
    F, K, sig = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (forward, strike, sigma)))
    disc = np.exp(-rate * maturity)
    sd = sig * np.sqrt(maturity)
    with np.errstate(divide="ignore", invalid="ignore"):
        d1 = (np.log(F / K) + 0.5 * sd**2) / sd
    d2 = d1 - sd
    if _side(right) == CALL:
        return disc * (F * norm.cdf(d1) - K * norm.cdf(d2))
    return disc * (K * norm.cdf(-d2) - F * norm.cdf(-d1))


def black_vega(forward, strike, rate, maturity, sigma):
    sd = np.asarray(sigma, dtype=float) * np.sqrt(maturity)
    d1 = (np.log(np.asarray(forward) / np.asarray(strike)) + 0.5 * sd**2) / sd
    return np.exp(-rate * maturity) * np.asarray(forward) * norm.pdf(d1) * np.sqrt(maturity)


def black_delta(forward, strike, rate, maturity, sigma, right="call"):
    """Spot delta for a non-dividend underlying (``F = S0 e^{rT}``)."""
    sd = np.asarray(sigma, dtype=float) * np.sqrt(maturity)
    d1 = (np.log(np.asarray(forward) / np.asarray(strike)) + 0.5 * sd**2) / sd
    return norm.cdf(d1) if _side(right) == CALL else norm.cdf(d1) - 1.0


@dataclass(frozen=True)
class BsModel:
    spot: float = 4000.0
    rate: float = 0.0
    sigma: float = 0.3
    maturity: float = 30 / 365

    def __post_init__(self):
        if self.sigma <= 0 or self.maturity <= 0:
            raise ValueError("sigma and maturity must be positive")

    @property
    def forward(self) -> float:
        return self.spot * np.exp(self.rate * self.maturity)

    def price(self, strike, right="call"):
        return black_price(self.forward, strike, self.rate, self.maturity, self.sigma, right)

    def otm_price(self, strike):
        k = np.asarray(strike, dtype=float)
        return np.where(k <= self.forward, self.price(k, PUT), self.price(k, CALL))

    def delta(self, strike, right="call"):
        return black_delta(self.forward, strike, self.rate, self.maturity, self.sigma, right)

    def rnd(self, y):
        """Density of ``log S_T`` at ``y``."""
        mean = np.log(self.spot) + (self.rate - 0.5 * self.sigma**2) * self.maturity
        return norm.pdf(y, loc=mean, scale=self.sigma * np.sqrt(self.maturity))

    def _d2(self, strike):
        sd = self.sigma * np.sqrt(self.maturity)
        return (np.log(self.forward / np.asarray(strike, dtype=float)) - 0.5 * sd**2) / sd

    def call_strike_derivative(self, strike):
        return -np.exp(-self.rate * self.maturity) * norm.cdf(self._d2(strike))

    def put_strike_derivative(self, strike):
        return np.exp(-self.rate * self.maturity) * norm.cdf(-self._d2(strike))

    def cf(self, u):
        """Characteristic function of ``log S_T``."""
        u = np.asarray(u, dtype=complex)
        mean = np.log(self.spot) + (self.rate - 0.5 * self.sigma**2) * self.maturity
        return np.exp(1j * u * mean - 0.5 * self.sigma**2 * self.maturity * u**2)


@dataclass(frozen=True)
class SvcjParams:
    """Stochastic volatility with correlated-timing jumps in returns and variance."""

    v0: float = 0.1**2
    kappa: float = 2.6
    vbar: float = 0.02
    rho: float = -0.95
    sigma_v: float = 0.3
    lam: float = 1.0
    mu_j: float = -0.05
    sigma_j: float = 0.03
    mu_v: float = 0.05

    def __post_init__(self):
        for name in ("kappa", "vbar", "sigma_v", "mu_v"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.lam < 0 or self.v0 < 0:
            raise ValueError("lam and v0 must be non-negative")
        if abs(self.rho) > 1:
            raise ValueError("|rho| must not exceed 1")

    @property
    def jump_compensator(self) -> float:
        return np.exp(self.mu_j + 0.5 * self.sigma_j**2) - 1.0


def svcj_cf(params: SvcjParams, u, spot: float, rate: float, maturity: float):
    """Characteristic function ``E[exp(i u log S_T)]`` from the affine closed form."""
    p = params
    u = np.asarray(u, dtype=complex)
    iu = 1j * u
    tau = maturity
    xi = p.kappa - p.rho * p.sigma_v * iu
    d = np.sqrt(xi**2 + p.sigma_v**2 * (iu + u**2))
    g = (xi - d) / (xi + d)
    e = np.exp(-d * tau)
    A = (xi - d) / p.sigma_v**2
    D = A * (1 - e) / (1 - g * e)
    C = p.kappa * p.vbar / p.sigma_v**2 * ((xi - d) * tau - 2 * np.log((1 - g * e) / (1 - g)))

    # int_0^tau ds / (1 - mu_v D(s)), written to stay finite as g - mu_v A -> 0
    pp = 1 - p.mu_v * A
    qq = g - p.mu_v * A
    z = qq * (1 - e) / (pp - qq)
    small = np.abs(z) < 1e-12
    log1p_over = np.where(small, 1.0 - z / 2, np.log1p(np.where(small, 1.0, z)) / np.where(small, 1.0, z))
    integral = tau / pp - p.mu_v * A * (1 - g) * (1 - e) / (d * pp * (pp - qq)) * log1p_over
    jump_cf = np.exp(iu * p.mu_j - 0.5 * p.sigma_j**2 * u**2)
    J = p.lam * (jump_cf * integral - tau)

    drift = np.log(spot) + (rate - p.lam * p.jump_compensator) * tau
    return np.exp(iu * drift + C + D * p.v0 + J)


def log_mean(cf: Callable, h: float = 1e-5) -> float:
    """First cumulant of ``log S_T`` from a central difference of ``log cf``."""
    lp, lm = np.log(cf(np.array([h, -h], dtype=complex)))
    return float(((lp - lm) / (2j * h)).real)


@dataclass
class CosPricer:
    """Classic parametric COS pricer on ``[mean - L sqrt(T), mean + L sqrt(T)]``."""

    cf: Callable
    maturity: float
    rate: float = 0.0
    n_terms: int = 1024
    width: float = 4.0

    def __post_init__(self):
        self.center = log_mean(self.cf)
        half = self.width * np.sqrt(self.maturity)
        self.lo, self.hi = self.center - half, self.center + half
        m = np.arange(self.n_terms)
        self.u = m * np.pi / (self.hi - self.lo)
        phi = self.cf(self.u.astype(complex))
        self.coef = (phi * np.exp(-1j * self.u * self.lo)).real
        self.coef[0] *= 0.5

    def _ab(self, strike):
        k = np.atleast_1d(np.asarray(strike, dtype=float))
        return k, self.lo - np.log(k), self.hi - np.log(k)

    def price(self, strike, right="call"):
        k, a, b = self._ab(strike)
        u = self.u[:, None]
        scale = 2 / (b - a) * k
        if _side(right) == CALL:
            H = scale * (_chi(u, 0.0, b, a) - _cos_int(u, 0.0, b, a))
        else:
            H = scale * (_cos_int(u, a, 0.0, a) - _chi(u, a, 0.0, a))
        return np.exp(-self.rate * self.maturity) * (self.coef @ H)

    def density(self, y):
        """Density of ``log S_T``."""
        y = np.atleast_1d(np.asarray(y, dtype=float))
        return 2 / (self.hi - self.lo) * (self.coef @ np.cos(self.u[:, None] * (y[None, :] - self.lo)))

    def delta(self, strike, spot):
        """Call delta ``e^{-rT} E[S_T / S0 ; S_T > K]`` (valid for models homogeneous in S0)."""
        k, a, b = self._ab(strike)
        H = 2 / (b - a) * (k / spot) * _chi(self.u[:, None], 0.0, b, a)
        return np.exp(-self.rate * self.maturity) * (self.coef @ H)


@dataclass(frozen=True)
class SvcjModel:
    params: SvcjParams = SvcjParams()
    spot: float = 4000.0
    rate: float = 0.0
    maturity: float = 30 / 365
    n_terms: int = 1024

    @property
    def forward(self) -> float:
        return self.spot * np.exp(self.rate * self.maturity)

    def cf(self, u):
        return svcj_cf(self.params, u, self.spot, self.rate, self.maturity)

    @property
    def pricer(self) -> CosPricer:
        # frozen dataclass: memoise by hand
        cached = self.__dict__.get("_pricer")
        if cached is None:
            cached = CosPricer(self.cf, self.maturity, self.rate, self.n_terms)
            object.__setattr__(self, "_pricer", cached)
        return cached

    def price(self, strike, right="call"):
        return self.pricer.price(strike, right)

    def otm_price(self, strike):
        k = np.asarray(strike, dtype=float)
        return np.where(k <= self.forward, self.price(k, PUT), self.price(k, CALL))

    def delta(self, strike, right="call"):
        d = self.pricer.delta(strike, self.spot)
        return d if _side(right) == CALL else d - 1.0

    def rnd(self, y):
        return self.pricer.density(y)


@dataclass(frozen=True)
class LognormalMixture:
    """Mixture of lognormal terminal laws sharing one forward (a bimodal test density).

    Component ``i`` has forward ``forward * scales[i]`` and volatility ``sigmas[i]``;
    the scales are renormalised so the mixture forward equals ``forward``.
    """

    weights: tuple = (0.5, 0.5)
    scales: tuple = (0.94, 1.06)
    sigmas: tuple = (0.35, 0.35)
    spot: float = 1500.0
    rate: float = 0.0
    maturity: float = 1 / 365

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.shape != np.shape(self.scales) or w.shape != np.shape(self.sigmas):
            raise ValueError("weights, scales and sigmas must have equal length")
        if np.any(w <= 0) or np.any(np.asarray(self.sigmas) <= 0):
            raise ValueError("weights and sigmas must be positive")

    @property
    def forward(self) -> float:
        return self.spot * np.exp(self.rate * self.maturity)

    def _components(self):
        w = np.asarray(self.weights, dtype=float)
        w = w / w.sum()
        sc = np.asarray(self.scales, dtype=float)
        sc = sc / (w @ sc)
        return w, self.forward * sc, np.asarray(self.sigmas, dtype=float)

    def price(self, strike, right="call"):
        k = np.asarray(strike, dtype=float)
        w, F, s = self._components()
        return sum(wi * black_price(Fi, k, self.rate, self.maturity, si, right) for wi, Fi, si in zip(w, F, s))

    def otm_price(self, strike):
        k = np.asarray(strike, dtype=float)
        return np.where(k <= self.forward, self.price(k, PUT), self.price(k, CALL))

    def delta(self, strike, right="call"):
        k = np.asarray(strike, dtype=float)
        w, F, s = self._components()
        return sum(wi * black_delta(Fi, k, self.rate, self.maturity, si, right) for wi, Fi, si in zip(w, F, s))

    def rnd(self, y):
        """Density of ``log S_T``."""
        w, F, s = self._components()
        t = self.maturity
        return sum(wi * norm.pdf(y, np.log(Fi) - 0.5 * si**2 * t, si * np.sqrt(t)) for wi, Fi, si in zip(w, F, s))

    def modes(self) -> np.ndarray:
        """Component log-modes, where the mixture peaks when the components are well separated."""
        _, F, s = self._components()
        return np.log(F) - 0.5 * s**2 * self.maturity
