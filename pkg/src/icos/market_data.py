"""Option chains: quotes, CSV ingestion, forward inference, implied volatility and IV regridding."""
from __future__ import annotations

import csv
from collections import defaultdict
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.interpolate import CubicSpline

from .exceptions import ChainError, OutOfBoundsError
from .models import CALL, PUT, _side, black_price, black_vega
from .quadrature import GridKind

CSV_HEADER = ("expiry_days", "rate", "forward", "strike", "right", "bid", "ask")
MIN_STRIKES = 5
SIGMA_LO, SIGMA_HI = 1e-6, 5.0


@dataclass(frozen=True)
class OptionQuote:
    strike: float
    bid: float
    ask: float
    right: str

    def __post_init__(self):
        object.__setattr__(self, "right", _side(self.right))
        if self.strike <= 0:
            raise ChainError(f"strike must be positive, got {self.strike}")
        if self.bid < 0 or self.ask < 0:
            raise ChainError(f"negative quote at strike {self.strike}")
        if self.ask < self.bid:
            raise ChainError(f"ask below bid at strike {self.strike}")

    @property
    def mid(self) -> float:
        return 0.5 * (self.bid + self.ask)

    @property
    def half_spread(self) -> float:
        return 0.5 * (self.ask - self.bid)


@dataclass(frozen=True)
class OptionChain:
    """One expiry of out-of-the-money prices: puts at ``K <= F``, calls above."""

    strikes: np.ndarray
    otm_prices: np.ndarray
    forward: float
    rate: float
    maturity: float
    spot: float | None = None
    half_spread: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        k = np.asarray(self.strikes, dtype=float)
        o = np.asarray(self.otm_prices, dtype=float)
        object.__setattr__(self, "strikes", k)
        object.__setattr__(self, "otm_prices", o)
        if k.ndim != 1 or k.shape != o.shape:
            raise ChainError("strikes and prices must be 1-D arrays of equal length")
        if k.size < MIN_STRIKES:
            raise ChainError(f"need at least {MIN_STRIKES} strikes, got {k.size}")
        if np.any(np.diff(k) <= 0):
            raise ChainError("strikes must be strictly ascending")
        if not (k[0] <= self.forward <= k[-1]):
            raise ChainError(f"forward {self.forward} outside strike range [{k[0]}, {k[-1]}]")
        if np.any(o < 0):
            raise ChainError("out-of-the-money prices must be non-negative")
        if self.maturity <= 0:
            raise ChainError("maturity must be positive")

    @property
    def alpha(self) -> float:
        return float(self.strikes[0])

    @property
    def beta(self) -> float:
        return float(self.strikes[-1])

    @property
    def n(self) -> int:
        return self.strikes.size

    @property
    def grid(self) -> GridKind:
        return GridKind.detect(self.strikes)

    @property
    def discount(self) -> float:
        return float(np.exp(-self.rate * self.maturity))

    @property
    def spot_price(self) -> float:
        return self.spot if self.spot is not None else self.forward * self.discount

    def is_put(self) -> np.ndarray:
        return self.strikes <= self.forward

    def call_prices(self) -> np.ndarray:
        """Calls at every strike, ITM ones through put-call parity."""
        return otm_to_call(self.strikes, self.otm_prices, self.forward, self.rate, self.maturity)

    @classmethod
    def from_model(cls, model, strikes, noise=None) -> "OptionChain":
        k = np.asarray(strikes, dtype=float)
        o = np.asarray(model.otm_price(k), dtype=float)
        if noise is not None:
            o = o + noise
        return cls(k, o, model.forward, model.rate, model.maturity, spot=model.spot)


def otm_to_call(strikes, otm, forward, rate, maturity):
    k = np.asarray(strikes, dtype=float)
    return np.asarray(otm, dtype=float) + np.where(k <= forward, np.exp(-rate * maturity) * (forward - k), 0.0)


@dataclass(frozen=True)
class IngestConfig:
    strike_min: float | None = None
    strike_max: float | None = None
    day_count: float = 365.0


def imply_forward(calls, puts, rate: float, maturity: float) -> float:
    """Forward from put-call parity at the strike where ``|C - P|`` is smallest.

    Ties go to the lowest strike.
    """
    c = {q.strike: q.mid for q in calls}
    p = {q.strike: q.mid for q in puts}
    common = sorted(set(c) & set(p))
    if not common:
        raise ChainError("cannot imply the forward: no strike quoted on both sides")
    k_star = min(common, key=lambda k: (abs(c[k] - p[k]), k))
    return k_star + np.exp(rate * maturity) * (c[k_star] - p[k_star])


def load_chain(path, config: IngestConfig | None = None) -> OptionChain:
    """Read one expiry from a CSV with header ``expiry_days,rate,forward,strike,right,bid,ask``."""
    config = config or IngestConfig()
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(CSV_HEADER) - set(reader.fieldnames or ())
        if missing:
            raise ChainError(f"{path}: missing columns {sorted(missing)}")
        rows = list(reader)
    if not rows:
        raise ChainError(f"{path}: no quotes")

    try:
        days = {float(r["expiry_days"]) for r in rows}
        rates = {float(r["rate"]) for r in rows}
        forwards = {float(r["forward"]) for r in rows if r["forward"].strip()}
        quotes = [OptionQuote(float(r["strike"]), float(r["bid"]), float(r["ask"]), r["right"]) for r in rows]
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ChainError):
            raise
        raise ChainError(f"{path}: malformed row ({exc})") from exc
    if len(days) != 1 or len(rates) != 1:
        raise ChainError(f"{path}: quotes must share one expiry and one rate")
    if len(forwards) > 1:
        raise ChainError(f"{path}: conflicting forward values")
    maturity = days.pop() / config.day_count
    rate = rates.pop()

    quotes = [q for q in quotes if q.bid > 0]
    if config.strike_min is not None:
        quotes = [q for q in quotes if q.strike >= config.strike_min]
    if config.strike_max is not None:
        quotes = [q for q in quotes if q.strike <= config.strike_max]

    by_side: dict[str, dict[float, list[OptionQuote]]] = {CALL: defaultdict(list), PUT: defaultdict(list)}
    for q in quotes:
        by_side[q.right][q.strike].append(q)

    def merged(side):
        return [
            OptionQuote(k, float(np.mean([q.bid for q in qs])), float(np.mean([q.ask for q in qs])), side)
            for k, qs in by_side[side].items()
        ]

    calls, puts = merged(CALL), merged(PUT)
    if forwards:
        forward = forwards.pop()
    else:
        forward = imply_forward(calls, puts, rate, maturity)

    chosen = {q.strike: q for q in puts if q.strike <= forward}
    chosen.update({q.strike: q for q in calls if q.strike > forward})
    ks = sorted(chosen)
    if len(ks) < MIN_STRIKES:
        raise ChainError(f"{path}: only {len(ks)} usable strikes, need {MIN_STRIKES}")
    return OptionChain(
        np.array(ks),
        np.array([chosen[k].mid for k in ks]),
        forward,
        rate,
        maturity,
        half_spread=np.array([chosen[k].half_spread for k in ks]),
    )


def write_chain(chain: OptionChain, path, day_count: float = 365.0) -> Path:
    """Write OTM prices as zero-spread quotes; ``load_chain`` reads them back exactly."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_HEADER)
        days = repr(float(chain.maturity * day_count))
        for k, o in zip(chain.strikes, chain.otm_prices):
            right = "P" if k <= chain.forward else "C"
            w.writerow([days, repr(float(chain.rate)), repr(float(chain.forward)), repr(float(k)), right, repr(float(o)), repr(float(o))])
    return path


def implied_vol(price, forward, strike, rate, maturity, right="call", errors: str = "raise"):
    """Black-Scholes implied volatility by vectorised bisection with a Newton polish.

    Prices outside the open no-arbitrage band raise ``OutOfBoundsError``; with
    ``errors="nan"`` those entries come back as NaN instead.
    """
    side = _side(right)
    price, F, K = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (price, forward, strike)))
    disc = np.exp(-rate * maturity)
    if side == CALL:
        lower, upper = disc * np.maximum(F - K, 0.0), disc * F
    else:
        lower, upper = disc * np.maximum(K - F, 0.0), disc * K

    def f(sig):
        return black_price(F, K, rate, maturity, sig, side)

    p_lo, p_hi = f(np.full(price.shape, SIGMA_LO)), f(np.full(price.shape, SIGMA_HI))
    bad = ~((price > lower) & (price < upper) & (price >= p_lo) & (price <= p_hi))
    if np.any(bad) and errors == "raise":
        i = np.flatnonzero(bad.ravel())[0]
        raise OutOfBoundsError(
            f"price {price.ravel()[i]:.10g} at strike {K.ravel()[i]:.10g} outside the attainable "
            f"{side} range ({max(lower.ravel()[i], p_lo.ravel()[i]):.10g}, {min(upper.ravel()[i], p_hi.ravel()[i]):.10g})"
        )

    lo = np.full(price.shape, SIGMA_LO)
    hi = np.full(price.shape, SIGMA_HI)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        above = f(mid) > price
        hi = np.where(above, mid, hi)
        lo = np.where(above, lo, mid)
        if np.all(hi - lo < 1e-13):
            break
    sig = 0.5 * (lo + hi)
    for _ in range(3):
        vega = black_vega(F, K, rate, maturity, sig)
        step = np.where(vega > 1e-300, (f(sig) - price) / np.where(vega > 1e-300, vega, 1.0), 0.0)
        sig = np.clip(sig - step, lo, hi)
    sig = np.where(bad, np.nan, sig)
    return sig if sig.ndim else float(sig)


def chain_implied_vols(chain: OptionChain, errors: str = "raise") -> np.ndarray:
    k = chain.strikes
    put = chain.is_put()
    out = np.empty_like(k)
    out[put] = implied_vol(chain.otm_prices[put], chain.forward, k[put], chain.rate, chain.maturity, PUT, errors)
    out[~put] = implied_vol(chain.otm_prices[~put], chain.forward, k[~put], chain.rate, chain.maturity, CALL, errors)
    return out


def otm_from_vols(strikes, vols, forward, rate, maturity) -> np.ndarray:
    k = np.asarray(strikes, dtype=float)
    put = black_price(forward, k, rate, maturity, vols, PUT)
    call = black_price(forward, k, rate, maturity, vols, CALL)
    return np.where(k <= forward, put, call)


def spline_iv_regrid(chain: OptionChain, m: int | None = None) -> OptionChain:
    """Natural cubic spline of implied vols in log-strike, re-priced on a uniform grid.

    The default grid has ``4 (n - 1) + 1`` points: odd, so Simpson's rule applies, and
    it contains every original strike when those are equidistant.
    """
    n = chain.n
    if n < 4:
        raise ChainError("spline regridding needs at least 4 strikes")
    m = 4 * (n - 1) + 1 if m is None else int(m)
    if m < n:
        raise ChainError(f"regridding to {m} < {n} points would discard quotes")
    vols = chain_implied_vols(chain)
    spline = CubicSpline(np.log(chain.strikes), vols, bc_type="natural")
    grid = np.linspace(chain.alpha, chain.beta, m)
    grid[0], grid[-1] = chain.alpha, chain.beta
    prices = otm_from_vols(grid, spline(np.log(grid)), chain.forward, chain.rate, chain.maturity)
    prices[0], prices[-1] = chain.otm_prices[0], chain.otm_prices[-1]
    return replace(chain, strikes=grid, otm_prices=prices, half_spread=None)
