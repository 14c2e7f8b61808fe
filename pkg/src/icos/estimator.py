"""The iCOS estimators of call/put prices, the risk-neutral density and the call delta.

:class:`IcosDesign` holds everything that depends only on the strike grid and
the expansion orders (basis values, regression design, the ``Psi`` matrix and
the degrees of freedom). :meth:`IcosDesign.fit` then maps observed OTM prices
to an :class:`IcosFit`; prices may be stacked as ``(reps, n)`` so that a whole
Monte Carlo batch is fitted in one pass. :class:`ICOS` wraps both behind a
scikit-learn style estimator.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.stats import norm
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted, column_or_1d

from . import inference
from .basis import CosineBasis, Interval, h_call, h_density, h_put, prime_weights, z_terms_delta
from .exceptions import ChainError, OutOfBoundsError
from .market_data import OptionChain
from .quadrature import canonical_scheme, weights


@dataclass(frozen=True)
class EstimateWithCI:
    value: np.ndarray
    std_err: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    conf: float = 0.95

    @classmethod
    def from_std(cls, value, std_err, conf: float = 0.95) -> "EstimateWithCI":
        if not 0 < conf < 1:
            raise ValueError("conf must lie in (0, 1)")
        q = norm.ppf(0.5 + conf / 2)
        return cls(value, std_err, value - q * std_err, value + q * std_err, conf)

    def covers(self, truth) -> np.ndarray:
        return (self.lo <= truth) & (truth <= self.hi)


def _signs(N: int) -> np.ndarray:
    return (-1.0) ** np.arange(N)


class IcosDesign:
    """Noise-independent part of an iCOS fit for one strike grid and expansion orders.

    Parameters
    ----------
    strikes : ascending strikes; ``alpha`` and ``beta`` are the first and last.
    forward, rate, maturity : market data of the expiry.
    n_terms : cosine terms ``N`` used for prices and the density.
    n_sine_terms : sine terms used for the delta; defaults to ``2 N``.
    quad : quadrature rule for the option-portfolio integrals.
    extra_terms : additional coefficients ``D_m`` computed beyond ``N`` (the
        order-selection rule needs ``A_N``).
    """

    def __init__(self, strikes, forward, rate, maturity, n_terms, n_sine_terms=None, quad="simpson", extra_terms=1):
        self.strikes = np.asarray(strikes, dtype=float)
        k = self.strikes
        if k.ndim != 1 or k.size < 4:
            raise ChainError("need at least 4 strikes")
        if np.any(np.diff(k) <= 0):
            raise ChainError("strikes must be strictly ascending")
        if not (k[0] <= forward <= k[-1]):
            raise ChainError(f"forward {forward} outside strike range [{k[0]}, {k[-1]}]")
        if maturity <= 0:
            raise ChainError("maturity must be positive")
        self.forward, self.rate, self.maturity = float(forward), float(rate), float(maturity)
        self.N = int(n_terms)
        if self.N < 1:
            raise ValueError("n_terms must be at least 1")
        self.Nt = 2 * self.N if n_sine_terms is None else int(n_sine_terms)
        if self.Nt < 1:
            raise ValueError("n_sine_terms must be at least 1")
        self.quad = canonical_scheme(quad)
        self.interval = Interval(float(k[0]), float(k[-1]))
        w, delta = weights(self.quad, k)
        self.wd = w * delta
        self.disc = float(np.exp(-self.rate * self.maturity))
        self.n_max = max(self.N + extra_terms, self.Nt)
        self.basis = CosineBasis(self.interval, k, self.n_max)
        self.pw = prime_weights(self.N)

        H = self.basis.h_call[: self.N]
        Hw = H * self.pw[:, None]
        zc = k - self.interval.beta + _signs(self.N) @ Hw
        zp = -Hw.sum(axis=0)
        self.Z = np.column_stack([np.ones_like(k), zc, zp])
        self.zz_inv = inference.zz_inverse(self.Z)
        self.Psi = inference.psi_matrix(H, self.basis.psi[: self.N], self.wd)
        self.G = inference.regression_map(self.Z, self.Psi, self.zz_inv)
        self.nu = inference.degrees_of_freedom(self.Z, self.Psi, self.zz_inv)

        # linear maps from OTM prices to D_m and to the portfolio part of B_m
        u = self.basis.u
        log_fa = np.log(self.forward / self.interval.alpha)
        self.psi_wd = self.basis.psi * self.wd
        self.d_offset = self.disc * np.cos(u * log_fa)
        m_s = np.arange(1, self.Nt)
        self.psit_wd = self.basis.psi_tilde[1 : self.Nt] * self.wd
        self.b_offset = self.disc * np.sin(u[1 : self.Nt] * log_fa)
        self.sine_m = m_s
        self.sine_u = u[1 : self.Nt]

    @property
    def n(self) -> int:
        return self.strikes.size

    @property
    def alpha(self) -> float:
        return self.interval.alpha

    @property
    def beta(self) -> float:
        return self.interval.beta

    @cached_property
    def parity_shift(self) -> np.ndarray:
        """Add to OTM prices to get calls at every strike."""
        k = self.strikes
        return np.where(k <= self.forward, self.disc * (self.forward - k), 0.0)

    def fit(self, otm_prices, spot: float | None = None) -> "IcosFit":
        o = np.asarray(otm_prices, dtype=float)
        if o.shape[-1] != self.n:
            raise ChainError(f"expected {self.n} prices, got {o.shape[-1]}")
        calls = o + self.parity_shift
        call_beta = calls[..., -1]
        put_alpha = calls[..., 0] - self.disc * (self.forward - self.alpha)
        D = self.d_offset + o @ self.psi_wd.T
        D[..., 0] = self.disc
        y = calls - (D[..., : self.N] * self.pw) @ self.basis.h_call[: self.N] - call_beta[..., None]
        theta = y @ (self.zz_inv @ self.Z.T).T
        resid = y - theta @ self.Z.T
        u = self.sine_u
        B = (
            self.b_offset
            + o @ self.psit_wd.T
            - np.multiply.outer(call_beta, u / self.beta * (-1.0) ** self.sine_m)
            + np.multiply.outer(put_alpha, u / self.alpha)
        )
        S0 = self.forward * self.disc if spot is None else float(spot)
        if S0 <= 0:
            raise ValueError("spot must be positive")
        return IcosFit(self, o, D, B, theta, resid, inference.feasible_sigma(resid, self.nu), call_beta, put_alpha, S0)


@dataclass(frozen=True)
class IcosFit:
    """Fitted coefficients; leading axes (if any) index independent price vectors."""

    design: IcosDesign
    otm_prices: np.ndarray
    D: np.ndarray
    B: np.ndarray
    theta: np.ndarray
    residuals: np.ndarray
    sigma2: np.ndarray
    call_beta: np.ndarray
    put_alpha: np.ndarray
    spot: float

    @property
    def theta_bar(self):
        return self.theta[..., 0]

    @property
    def theta_c(self):
        return self.theta[..., 1]

    @property
    def theta_p(self):
        return self.theta[..., 2]

    def var_theta(self) -> np.ndarray:
        return inference.var_theta(self.design.G, self.sigma2)

    def _x(self, x):
        return self.design.interval.check(np.atleast_1d(np.asarray(x, dtype=float)))

    def _y(self, y):
        return self.design.interval.check_log(np.atleast_1d(np.asarray(y, dtype=float)))

    def _spread(self, values, grads: inference.Gradients):
        return values, grads.std(self.sigma2)

    # prices
    def call_gradients(self, x) -> inference.Gradients:
        d = self.design
        x = self._x(x)
        Hx = h_call(np.arange(d.N)[:, None], x[None, :], d.interval)
        rows = Hx[1:].T @ d.psi_wd[1 : d.N]
        rows[:, -1] += 1.0
        z = self._z_call(Hx, x)
        return inference.Gradients(rows + z @ d.G)

    def _z_call(self, Hx, x):
        d = self.design
        Hw = Hx * d.pw[:, None]
        return np.column_stack([np.ones_like(x), x - d.beta + _signs(d.N) @ Hw, -Hw.sum(axis=0)])

    def price_call(self, x):
        """Returns ``(value, std_err)`` of the call price at strikes ``x``."""
        d = self.design
        x = self._x(x)
        Hx = h_call(np.arange(d.N)[:, None], x[None, :], d.interval)
        z = self._z_call(Hx, x)
        value = (self.D[..., : d.N] * d.pw) @ Hx + self.call_beta[..., None] + self.theta @ z.T
        return self._spread(value, self.call_gradients(x))

    def _z_put(self, Hp, x):
        d = self.design
        Hw = Hp * d.pw[:, None]
        return np.column_stack([np.ones_like(x), _signs(d.N) @ Hw, x - d.alpha - Hw.sum(axis=0)])

    def price_put(self, x):
        d = self.design
        x = self._x(x)
        Hp = h_put(np.arange(d.N)[:, None], x[None, :], d.interval)
        z = self._z_put(Hp, x)
        value = (self.D[..., : d.N] * d.pw) @ Hp + self.put_alpha[..., None] + self.theta @ z.T
        rows = Hp[1:].T @ d.psi_wd[1 : d.N]
        rows[:, 0] += 1.0
        return self._spread(value, inference.Gradients(rows + z @ d.G))

    # density
    @property
    def nu_f(self) -> float:
        d = self.design
        return 2.0 / (d.disc * d.interval.width)

    def rnd(self, y):
        """Density of ``log S_T`` at log-prices ``y``."""
        d = self.design
        y = self._y(y)
        Hf = h_density(np.arange(d.N)[:, None], y[None, :], d.interval)
        Hw = Hf * d.pw[:, None]
        z = np.column_stack([np.zeros_like(y), _signs(d.N) @ Hw, -Hw.sum(axis=0)])
        value = self.nu_f * ((self.D[..., : d.N] * d.pw) @ Hf + self.theta @ z.T)
        rows = Hf[1:].T @ d.psi_wd[1 : d.N] + z @ d.G
        return self._spread(value, inference.Gradients(rows, self.nu_f))

    # delta
    def delta(self, x):
        d = self.design
        x = self._x(x)
        Hd = h_call(d.sine_m[:, None], x[None, :], d.interval)
        value = (-(self.B * d.sine_u) @ Hd + (self.call_beta - d.beta * self.theta_c)[..., None]) / self.spot
        zc, zp = z_terms_delta(d.Nt, x, d.interval)
        rows = -(Hd.T * d.sine_u) @ d.psit_wd
        rows[:, -1] += zc
        rows[:, 0] += zp
        rows = rows + np.outer(np.full_like(x, -d.beta), d.G[1])
        return self._spread(value, inference.Gradients(rows, 1.0 / self.spot))

    # coefficients
    def a_coeffs(self, n_coeffs: int | None = None):
        """``A_m = e^{rT}(D_m + (-1)^m theta_c - theta_p)`` for ``m = 0..n_coeffs-1``."""
        d = self.design
        M = d.N if n_coeffs is None else int(n_coeffs)
        if M > d.n_max:
            raise ValueError(f"only {d.n_max} coefficients were precomputed")
        sg = _signs(M)
        scale = 1.0 / d.disc
        value = scale * (self.D[..., :M] + np.multiply.outer(self.theta_c, sg) - self.theta_p[..., None])
        z = np.column_stack([np.zeros(M), sg, -np.ones(M)])
        rows = d.psi_wd[:M] + z @ d.G
        return self._spread(value, inference.Gradients(rows, scale))

    def d_std(self, n_coeffs: int | None = None) -> np.ndarray:
        d = self.design
        M = d.N if n_coeffs is None else int(n_coeffs)
        return np.sqrt(inference.var_D(d.basis.psi[:M], d.wd, self.sigma2))


def _as_arrays(X, y, forward, rate, maturity, spot):
    if isinstance(X, OptionChain):
        return X.strikes, X.otm_prices, X.forward, X.rate, X.maturity, X.spot if spot is None else spot
    if y is None or forward is None or maturity is None:
        raise ChainError("with raw strikes, pass y (OTM prices), forward and maturity")
    k = column_or_1d(np.asarray(X, dtype=float))
    o = column_or_1d(np.asarray(y, dtype=float))
    if k.shape != o.shape:
        raise ChainError("strikes and prices differ in length")
    if not (np.all(np.isfinite(k)) and np.all(np.isfinite(o))):
        raise ChainError("strikes and prices must be finite")
    return k, o, float(forward), float(rate), float(maturity), spot


class ICOS(BaseEstimator):
    """Option-implied Fourier-cosine estimator.

    Parameters
    ----------
    n_terms : int or "auto"
        Cosine terms ``N``; ``"auto"`` runs the rule-of-thumb order selection.
    n_sine_terms : int, optional
        Sine terms for the delta estimator; ``2 * n_terms`` when omitted.
    quad : {"left", "right", "trap", "simpson"}
        Quadrature rule for the option-portfolio integrals.
    conf : float
        Confidence level of the reported intervals.
    spot : float, optional
        Spot used to scale the delta; ``F e^{-rT}`` when omitted.
    """

    def __init__(self, n_terms=14, n_sine_terms=None, quad="simpson", conf=0.95, spot=None):
        self.n_terms = n_terms
        self.n_sine_terms = n_sine_terms
        self.quad = quad
        self.conf = conf
        self.spot = spot

    def fit(self, X, y=None, *, forward=None, rate=0.0, maturity=None):
        """Fit to an :class:`OptionChain` or to strikes ``X`` with OTM prices ``y``."""
        k, o, F, r, T, spot = _as_arrays(X, y, forward, rate, maturity, self.spot)
        if isinstance(self.n_terms, str):
            if self.n_terms != "auto":
                raise ValueError(f"n_terms must be an int or 'auto', got {self.n_terms!r}")
            from .order import optimal_N

            self.order_trace_ = optimal_N(k, o, F, r, T, quad=self.quad)
            N = self.order_trace_.n_star
        else:
            N = int(self.n_terms)
        self.n_terms_ = N
        self.design_ = IcosDesign(k, F, r, T, N, self.n_sine_terms, self.quad)
        self.fit_ = self.design_.fit(o, spot)
        self.theta_ = self.fit_.theta
        self.D_ = self.fit_.D[: N]
        self.B_ = self.fit_.B
        self.residuals_ = self.fit_.residuals
        self.sigma2_ = self.fit_.sigma2
        self.nu_ = self.design_.nu
        self.Z_ = self.design_.Z
        self.n_features_in_ = 1
        return self

    def _ci(self, pair):
        value, std = pair
        return EstimateWithCI.from_std(value, std, self.conf)

    def price_call(self, x) -> EstimateWithCI:
        check_is_fitted(self, "fit_")
        return self._ci(self.fit_.price_call(x))

    def price_put(self, x) -> EstimateWithCI:
        check_is_fitted(self, "fit_")
        return self._ci(self.fit_.price_put(x))

    def rnd(self, y) -> EstimateWithCI:
        """Density of ``log S_T`` at ``y``."""
        check_is_fitted(self, "fit_")
        return self._ci(self.fit_.rnd(y))

    def rnd_price(self, s) -> EstimateWithCI:
        """Density of ``S_T`` at prices ``s``: ``f(log s) / s``."""
        s = np.atleast_1d(np.asarray(s, dtype=float))
        if np.any(s <= 0):
            raise OutOfBoundsError("prices must be positive")
        est = self.rnd(np.log(s))
        return EstimateWithCI(est.value / s, est.std_err / s, est.lo / s, est.hi / s, est.conf)

    def delta(self, x) -> EstimateWithCI:
        check_is_fitted(self, "fit_")
        return self._ci(self.fit_.delta(x))

    def a_coeffs(self, n_coeffs=None) -> EstimateWithCI:
        check_is_fitted(self, "fit_")
        return self._ci(self.fit_.a_coeffs(n_coeffs))

    def var_theta(self) -> np.ndarray:
        check_is_fitted(self, "fit_")
        return self.fit_.var_theta()

    def predict(self, X):
        """Call prices at strikes ``X``."""
        return self.price_call(column_or_1d(np.asarray(X, dtype=float))).value

    def transform(self, X):
        """Columns ``(call price, log-price density, delta)`` at strikes ``X``."""
        x = column_or_1d(np.asarray(X, dtype=float))
        return np.column_stack([self.predict(x), self.rnd(np.log(x)).value, self.delta(x).value])
