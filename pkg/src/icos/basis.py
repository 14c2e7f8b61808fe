"""Deterministic Fourier-cosine quantities on a fixed strike interval [alpha, beta].

All functions broadcast over the expansion index ``m`` and the price argument,
so ``psi(m[:, None], strikes[None, :], iv)`` yields an ``(M, n)`` matrix.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .exceptions import OutOfBoundsError

_EDGE_TOL = 1e-12


@dataclass(frozen=True)
class Interval:
    alpha: float
    beta: float

    def __post_init__(self):
        if not (0 < self.alpha < self.beta):
            raise ValueError(f"need 0 < alpha < beta, got [{self.alpha}, {self.beta}]")

    @property
    def width(self) -> float:
        """Width of the interval in log-price, ``log(beta / alpha)``."""
        return float(np.log(self.beta / self.alpha))

    def u(self, m):
        return np.asarray(m) * np.pi / self.width

    def check(self, x, what: str = "strike"):
        x = np.asarray(x, dtype=float)
        lo, hi = self.alpha * (1 - _EDGE_TOL), self.beta * (1 + _EDGE_TOL)
        if np.any(x < lo) or np.any(x > hi):
            raise OutOfBoundsError(f"{what} outside [{self.alpha}, {self.beta}]")
        return np.clip(x, self.alpha, self.beta)

    def check_log(self, y):
        y = np.asarray(y, dtype=float)
        la, lb = np.log(self.alpha), np.log(self.beta)
        if np.any(y < la - _EDGE_TOL) or np.any(y > lb + _EDGE_TOL):
            raise OutOfBoundsError(f"log-price outside [{la}, {lb}]")
        return np.clip(y, la, lb)


def _positive(s):
    s = np.asarray(s, dtype=float)
    if np.any(s <= 0):
        raise OutOfBoundsError("prices must be strictly positive")
    return s


def psi(m, s, interval: Interval):
    """Second strike-derivative of ``cos(u_m log(s / alpha))``."""
    s = _positive(s)
    u = interval.u(m)
    z = u * np.log(s / interval.alpha)
    return u / s**2 * (np.sin(z) - u * np.cos(z))


def psi_tilde(m, s, interval: Interval):
    """Second strike-derivative of ``sin(u_m log(s / alpha))``."""
    s = _positive(s)
    u = interval.u(m)
    z = u * np.log(s / interval.alpha)
    return -u / s**2 * (np.cos(z) + u * np.sin(z))


def _chi(u, c, d, a):
    """``int_c^d e^y cos(u (y - a)) dy``."""
    return (
        np.cos(u * (d - a)) * np.exp(d)
        - np.cos(u * (c - a)) * np.exp(c)
        + u * np.sin(u * (d - a)) * np.exp(d)
        - u * np.sin(u * (c - a)) * np.exp(c)
    ) / (1.0 + u**2)


def _cos_int(u, c, d, a):
    """``int_c^d cos(u (y - a)) dy``."""
    u = np.asarray(u, dtype=float)
    safe = np.where(u == 0, 1.0, u)
    return np.where(u == 0, d - c, (np.sin(u * (d - a)) - np.sin(u * (c - a))) / safe)


def h_call(m, x, interval: Interval):
    """Cosine coefficients of the call payoff ``x max(e^y - 1, 0)``, ``y = log(S/x)``."""
    x = interval.check(_positive(x))
    m = np.asarray(m)
    L = interval.width
    u = interval.u(m)
    la = np.log(interval.alpha / x)
    safe_u = np.where(m == 0, 1.0, u)
    hm = (
        2 * x / (safe_u * (1 + safe_u**2) * L)
        * ((-1.0) ** m * safe_u * interval.beta / x - safe_u * np.cos(safe_u * la) - np.sin(safe_u * la))
    )
    h0 = 2 / L * (interval.beta - x - x * np.log(interval.beta / x))
    return np.where(m == 0, h0, hm)


def h_put(m, x, interval: Interval):
    """Cosine coefficients of the put payoff ``x max(1 - e^y, 0)``."""
    x = interval.check(_positive(x))
    u = interval.u(m)
    a = np.log(interval.alpha / x)
    return 2 / interval.width * x * (_cos_int(u, a, 0.0, a) - _chi(u, a, 0.0, a))


def h_forward(m, x, interval: Interval):
    """Cosine coefficients of the forward payoff ``x (e^y - 1)`` on the whole interval."""
    x = interval.check(_positive(x))
    u = interval.u(m)
    a = np.log(interval.alpha / x)
    b = np.log(interval.beta / x)
    return 2 / interval.width * x * (_chi(u, a, b, a) - _cos_int(u, a, b, a))


def h_density(m, y, interval: Interval):
    """``cos(u_m (y - log alpha))``, the cosine basis evaluated at a log-price."""
    return np.cos(interval.u(m) * (np.asarray(y, dtype=float) - np.log(interval.alpha)))


def prime_weights(N: int) -> np.ndarray:
    """Weights of the primed sum: the m = 0 term is halved."""
    w = np.ones(N)
    w[0] = 0.5
    return w


def _signs(N: int) -> np.ndarray:
    return (-1.0) ** np.arange(N)


def z_terms(N: int, x, interval: Interval):
    """Boundary loadings ``(Z_c^N(x), Z_p^N(x))`` of the call representation."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    m = np.arange(N)[:, None]
    H = h_call(m, x[None, :], interval) * prime_weights(N)[:, None]
    zc = x - interval.beta + _signs(N) @ H
    zp = -H.sum(axis=0)
    return zc, zp


def z_terms_put(N: int, x, interval: Interval):
    """Boundary loadings ``(Z_c^p(x), Z_p^p(x))`` of the put representation."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    m = np.arange(N)[:, None]
    H = h_put(m, x[None, :], interval) * prime_weights(N)[:, None]
    zc = _signs(N) @ H
    zp = x - interval.alpha - H.sum(axis=0)
    return zc, zp


def z_terms_f(N: int, y, interval: Interval):
    """``(sum' (-1)^m H^f_m(y), sum' H^f_m(y))`` for the density representation."""
    y = np.atleast_1d(np.asarray(y, dtype=float))
    Hf = h_density(np.arange(N)[:, None], y[None, :], interval) * prime_weights(N)[:, None]
    return _signs(N) @ Hf, Hf.sum(axis=0)


def z_terms_delta(N: int, x, interval: Interval):
    """Loadings of the boundary observation errors in the delta estimator."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    m = np.arange(1, N)
    u2H = interval.u(m)[:, None] ** 2 * h_call(m[:, None], x[None, :], interval)
    zc = 1.0 + ((-1.0) ** m / interval.beta) @ u2H
    zp = -u2H.sum(axis=0) / interval.alpha
    return zc, zp


@dataclass
class CosineBasis:
    """Basis values precomputed once for an interval, a strike grid and ``n_max`` terms."""

    interval: Interval
    strikes: np.ndarray
    n_max: int
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.strikes = np.asarray(self.strikes, dtype=float)

    @cached_property
    def m(self) -> np.ndarray:
        return np.arange(self.n_max)

    @cached_property
    def u(self) -> np.ndarray:
        return self.interval.u(self.m)

    @cached_property
    def psi(self) -> np.ndarray:
        """``psi_m(K_i)``, shape ``(n_max, n)``."""
        return psi(self.m[:, None], self.strikes[None, :], self.interval)

    @cached_property
    def psi_tilde(self) -> np.ndarray:
        return psi_tilde(self.m[:, None], self.strikes[None, :], self.interval)

    @cached_property
    def h_call(self) -> np.ndarray:
        """``H_m(K_i)``, shape ``(n_max, n)``."""
        return h_call(self.m[:, None], self.strikes[None, :], self.interval)

    def extend(self, n_max: int) -> "CosineBasis":
        if n_max <= self.n_max:
            return self
        return CosineBasis(self.interval, self.strikes, n_max)
