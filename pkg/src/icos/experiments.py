"""Monte Carlo harness: synthetic chains with i.i.d. quote noise, batched fits and summary tables."""
from __future__ import annotations

import csv
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .estimator import EstimateWithCI, IcosDesign
from .kernel import ks_batch
from .market_data import OptionChain
from .models import BsModel, LognormalMixture, SvcjModel, SvcjParams

TARGETS = (0.86, 0.9, 0.95, 1.0, 1.05, 1.09)
MATURITIES = {"30d": 30 / 365, "1y": 1.0}
# reference settings: cosine terms per (model, tenor) and sine terms per model
DEFAULT_TERMS = {("bs", "30d"): 14, ("bs", "1y"): 7, ("svcj", "30d"): 25, ("svcj", "1y"): 25}
DEFAULT_SINE_TERMS = {"bs": 25, "svcj": 30}
REPORT_FIELDS = ("estimator", "target", "truth", "mc_bias", "mc_std", "as_std", "coverage", "reps", "failures", "dropped_quotes")


@dataclass(frozen=True)
class McDesign:
    model: str = "bs"
    tenor: str = "30d"
    spot: float = 4000.0
    rate: float = 0.0
    strike_lo: float = 0.85
    strike_hi: float = 1.10
    strike_step: float = 5.0
    noise: float = 0.025
    reps: int = 500
    seed: int = 0
    n_terms: int | None = None
    n_sine_terms: int | None = None
    quad: str = "simpson"
    conf: float = 0.95
    targets: tuple = TARGETS
    ks_c: tuple = ()

    def __post_init__(self):
        if self.model not in ("bs", "svcj"):
            raise ValueError(f"model must be 'bs' or 'svcj', got {self.model!r}")
        if self.tenor not in MATURITIES:
            raise ValueError(f"tenor must be one of {sorted(MATURITIES)}")
        if self.reps < 1:
            raise ValueError("reps must be positive")

    @property
    def maturity(self) -> float:
        return MATURITIES[self.tenor]

    @property
    def strikes(self) -> np.ndarray:
        lo, hi = self.strike_lo * self.spot, self.strike_hi * self.spot
        return np.linspace(lo, hi, int(round((hi - lo) / self.strike_step)) + 1)

    @property
    def N(self) -> int:
        return self.n_terms or DEFAULT_TERMS[(self.model, self.tenor)]

    @property
    def Nt(self) -> int:
        return self.n_sine_terms or DEFAULT_SINE_TERMS[self.model]

    def reference(self):
        if self.model == "bs":
            return BsModel(self.spot, self.rate, 0.3, self.maturity)
        return SvcjModel(SvcjParams(), self.spot, self.rate, self.maturity)


def noise_matrix(seed: int, reps: int, n: int, scale: float) -> np.ndarray:
    """One independent stream per replication, spawned from a single master seed.

    Row ``r`` depends only on ``(seed, r)``, so any split of the replications
    reproduces the same draws.
    """
    children = np.random.SeedSequence(seed).spawn(reps)
    return scale * np.stack([np.random.default_rng(c).standard_normal(n) for c in children])


def strike_derivatives(model, alpha: float, beta: float, h: float = 1e-3):
    """``(C_K'(beta), P_K'(alpha))``; closed form for Black-Scholes, central differences otherwise."""
    if isinstance(model, BsModel):
        return float(model.call_strike_derivative(beta)), float(model.put_strike_derivative(alpha))
    cb = model.price(np.array([beta - h, beta + h]), "call")
    pa = model.price(np.array([alpha - h, alpha + h]), "put")
    return float((cb[1] - cb[0]) / (2 * h)), float((pa[1] - pa[0]) / (2 * h))


@dataclass
class McReport:
    design: McDesign
    rows: list = field(default_factory=list)

    def add(self, estimator, target, truth, values, stds=None, lo=None, hi=None, failures=0, dropped=0):
        values = np.asarray(values, dtype=float)
        ok = np.isfinite(values)
        v = values[ok]
        row = {
            "estimator": estimator,
            "target": float(target),
            "truth": float(truth),
            "mc_bias": float(v.mean() - truth) if v.size else np.nan,
            "mc_std": float(v.std(ddof=1)) if v.size > 1 else 0.0,
            "as_std": float(np.mean(np.asarray(stds)[ok])) if stds is not None and v.size else np.nan,
            "coverage": float(np.mean((np.asarray(lo)[ok] <= truth) & (truth <= np.asarray(hi)[ok])))
            if lo is not None and v.size
            else np.nan,
            "reps": int(v.size),
            "failures": int(failures + (~ok).sum()),
            "dropped_quotes": int(dropped),
        }
        self.rows.append(row)
        return row

    def cell(self, estimator: str, target: float) -> dict:
        for r in self.rows:
            if r["estimator"] == estimator and np.isclose(r["target"], target):
                return r
        raise KeyError((estimator, target))

    def column(self, estimator: str, key: str) -> np.ndarray:
        return np.array([r[key] for r in self.rows if r["estimator"] == estimator])

    def to_csv(self, path) -> Path:
        path = Path(path)
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=REPORT_FIELDS)
            w.writeheader()
            for r in self.rows:
                w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
        return path


def _add_estimate(report, name, target, truth, est: EstimateWithCI):
    report.add(name, target, truth, est.value, est.std_err, est.lo, est.hi)


def run_mc(design: McDesign) -> McReport:
    """Fit every replication and tabulate bias, spread and coverage per target strike."""
    model = design.reference()
    K = design.strikes
    F = model.forward
    x = np.asarray(design.targets, dtype=float) * F
    y = np.log(x)
    truth0 = model.otm_price(K)
    otm = truth0 + noise_matrix(design.seed, design.reps, K.size, design.noise)

    icos = IcosDesign(K, F, design.rate, design.maturity, design.N, design.Nt, design.quad)
    fit = icos.fit(otm, spot=design.spot)
    report = McReport(design)

    def ci(pair):
        return EstimateWithCI.from_std(*pair, design.conf)

    call, dens, delta = ci(fit.price_call(x)), ci(fit.rnd(y)), ci(fit.delta(x))
    c_true, f_true, d_true = model.price(x, "call"), model.rnd(y), model.delta(x)
    for j, t in enumerate(design.targets):
        for name, est, truth in (("call", call, c_true), ("rnd", dens, f_true), ("delta", delta, d_true)):
            _add_estimate(report, name, t, truth[j],
                          EstimateWithCI(est.value[:, j], est.std_err[:, j], est.lo[:, j], est.hi[:, j]))

    theta_c, theta_p = strike_derivatives(model, K[0], K[-1])
    se = np.sqrt(np.diagonal(fit.var_theta(), axis1=-2, axis2=-1))
    for k, name, truth in ((1, "theta_c", theta_c), (2, "theta_p", theta_p)):
        est = EstimateWithCI.from_std(fit.theta[:, k], se[:, k], design.conf)
        _add_estimate(report, name, np.nan, truth, est)

    for c in design.ks_c:
        vals, dropped = ks_batch(K, otm, F, design.rate, design.maturity, c, x, spot=design.spot)
        for j, t in enumerate(design.targets):
            for i, (name, truth) in enumerate((("call", c_true), ("rnd", f_true), ("delta", d_true))):
                report.add(f"ks{c:g}_{name}", t, truth[j], vals[i, :, j], dropped=dropped)
    return report


# fixtures ------------------------------------------------------------------

SPX_STRIKES = np.concatenate([np.arange(2950.0, 3276.0, 25.0), np.arange(3280.0, 4401.0, 5.0)])
# variance level near the 17% implied vol of SPX in early April 2021; other parameters as in the MC design
SPX_PARAMS = SvcjParams(v0=0.03, vbar=0.03)
SPX_FORWARD = 4008.5
SPX_MATURITY = 29 / 365


def spx_like_model() -> SvcjModel:
    return SvcjModel(SPX_PARAMS, spot=SPX_FORWARD, rate=0.0, maturity=SPX_MATURITY)


def spx_like_chain(seed: int | None = 0, noise: float = 0.025, floor: float = 0.0125) -> OptionChain:
    """239 non-equidistant SVCJ quotes on [2950, 4400] with i.i.d. noise, floored at a quarter tick."""
    model = spx_like_model()
    o = model.otm_price(SPX_STRIKES)
    if seed is not None and noise > 0:
        o = np.maximum(o + noise * np.random.default_rng(seed).standard_normal(o.size), floor)
    return OptionChain(SPX_STRIKES, o, model.forward, model.rate, model.maturity, spot=model.spot)


def bimodal_model() -> LognormalMixture:
    return LognormalMixture()


def bimodal_chain(seed: int | None = 0, noise: float = 0.025) -> OptionChain:
    model = bimodal_model()
    k = np.arange(1300.0, 1700.1, 5.0)
    o = model.otm_price(k)
    if seed is not None and noise > 0:
        o = np.abs(o + noise * np.random.default_rng(seed).standard_normal(o.size))
    return OptionChain(k, o, model.forward, model.rate, model.maturity, spot=model.spot)


def write_quotes(chain: OptionChain, path, half_spread: float = 0.05, with_forward: bool = False,
                 day_count: float = 365.0) -> Path:
    """Write both rights at every strike; the ITM side carries the OTM quote error through parity.

    Bids never drop below half of the mid, so no quote is filtered as zero-bid.
    """
    path = Path(path)
    calls = chain.call_prices()
    puts = calls - chain.discount * (chain.forward - chain.strikes)
    days = repr(float(chain.maturity * day_count))
    fwd = repr(float(chain.forward)) if with_forward else ""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("expiry_days", "rate", "forward", "strike", "right", "bid", "ask"))
        for k, c, p in zip(chain.strikes, calls, puts):
            for right, mid in (("C", c), ("P", p)):
                hs = min(half_spread, 0.5 * mid)
                w.writerow((days, repr(float(chain.rate)), fwd, repr(float(k)), right, repr(float(mid - hs)), repr(float(mid + hs))))
    return path


def design_dict(design: McDesign) -> dict:
    return {k: (list(v) if isinstance(v, tuple) else v) for k, v in asdict(design).items()}


def cboe_strikes(forward: float, sigma: float, maturity: float, lo_sd: float = 5.0, hi_sd: float = 3.0,
                 bands=((0.05, 5.0), (0.15, 25.0), (np.inf, 100.0))) -> np.ndarray:
    """An SPX-style listing: fine strikes near the money, coarser ones further out.

    ``bands`` holds ``(max |log K/F|, spacing)`` pairs from the inside out; the
    listing spans ``lo_sd`` standard deviations below and ``hi_sd`` above the forward.
    """
    sd = sigma * np.sqrt(maturity)
    lo, hi = forward * np.exp(-lo_sd * sd), forward * np.exp(hi_sd * sd)
    coarsest = bands[-1][1]
    k = np.arange(np.floor(lo / coarsest) * coarsest, hi + coarsest, min(s for _, s in bands))
    dist = np.abs(np.log(k / forward))
    keep = np.zeros(k.size, dtype=bool)
    inner = 0.0
    for edge, step in bands:
        band = (dist >= inner) & (dist < edge)
        keep |= band & np.isclose(np.mod(k, step), 0.0)
        inner = edge
    k = k[keep & (k >= lo - coarsest) & (k <= hi + coarsest)]
    return k[k > 0]


def bs_vix_chain(sigma: float, maturity: float, seed: int | None = None, noise: float = 0.025,
                 strikes=None, forward: float = 4000.0, floor: float = 0.0125) -> OptionChain:
    """Black-Scholes OTM chain for VIX experiments; CBOE-style strikes unless given."""
    model = BsModel(forward, 0.0, sigma, maturity)
    k = cboe_strikes(forward, sigma, maturity) if strikes is None else np.asarray(strikes, dtype=float)
    o = model.otm_price(k)
    if seed is not None and noise > 0:
        o = np.maximum(o + noise * np.random.default_rng(seed).standard_normal(o.size), floor)
    return OptionChain(k, o, model.forward, 0.0, maturity, spot=model.spot)


CRISIS_FORWARD = 2500.0  # index level in a crisis, where fixed point spacings are wide relative to F
NEAR_DAYS, NEXT_DAYS = 23, 37


def vol_path(days: int, seed: int = 0, level: float = 0.18, persistence: float = 0.97, stdev: float = 0.35,
             lo: float = 0.09, hi: float = 0.8) -> np.ndarray:
    """AR(1) path of log volatility with stationary standard deviation ``stdev``, clipped to ``[lo, hi]``."""
    rng = np.random.default_rng(seed)
    shock = stdev * np.sqrt(1 - persistence**2)
    z = np.empty(days)
    z[0] = stdev * rng.standard_normal()
    for t in range(1, days):
        z[t] = persistence * z[t - 1] + shock * rng.standard_normal()
    return np.clip(level * np.exp(z), lo, hi)


def vix_panel_chains(days: int = 250, seed: int = 0, noise: float = 0.025, forward: float = 4000.0, sigmas=None):
    """Near/next Black-Scholes chain pairs on CBOE-style strikes, one pair per day of a volatility path."""
    sigmas = vol_path(days, seed) if sigmas is None else np.broadcast_to(np.asarray(sigmas, dtype=float), (days,))
    seeds = np.random.SeedSequence(seed).spawn(days)
    out = []
    for s, ss in zip(sigmas, seeds):
        a, b = ss.generate_state(2)
        out.append((bs_vix_chain(s, NEAR_DAYS / 365, int(a), noise, forward=forward),
                    bs_vix_chain(s, NEXT_DAYS / 365, int(b), noise, forward=forward)))
    return out
