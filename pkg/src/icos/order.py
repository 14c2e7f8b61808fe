"""Rule-of-thumb choice of the number of cosine terms.

Adding the ``N``-th term lowers the AMISE while ``A_N^2 > Var(A_N)``. The rule
compares the average log-magnitude of the last three estimated coefficients
with the log standard deviation and stops once noise dominates.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .estimator import IcosDesign
from .exceptions import ICOSError
from .market_data import OptionChain

N_START = 5
N_MAX = 50


@dataclass
class OrderTrace:
    n_star: int
    rows: list = field(default_factory=list)  # (N, a_bar, s_a)

    def table(self) -> np.ndarray:
        return np.array(self.rows, dtype=float).reshape(-1, 3)


def icos_a(strikes, otm, forward, rate, maturity, N, quad="simpson"):
    """``(A_1..A_N, sigma_A(1)..sigma_A(N))`` from a fit with ``N`` terms."""
    design = IcosDesign(strikes, forward, rate, maturity, N, n_sine_terms=1, quad=quad, extra_terms=1)
    value, std = design.fit(otm).a_coeffs(N + 1)
    return value[1:], std[1:]


def optimal_N(X, y=None, forward=None, rate=0.0, maturity=None, *, quad="simpson", n_start=N_START, n_max=N_MAX) -> OrderTrace:
    """Run the stopping rule and return the selected order with its trace.

    ``X`` is an :class:`OptionChain` or a strike vector with OTM prices ``y``.
    """
    if isinstance(X, OptionChain):
        k, o, forward, rate, maturity = X.strikes, X.otm_prices, X.forward, X.rate, X.maturity
    else:
        k, o = np.asarray(X, dtype=float), np.asarray(y, dtype=float)
    N, a_bar, s_a = n_start, 1.0, 0.0
    trace = OrderTrace(n_star=n_start)
    while a_bar > s_a and N < n_max:
        N += 1
        try:
            A, sA = icos_a(k, o, forward, rate, maturity, N, quad)
        except ICOSError as exc:
            raise type(exc)(f"refit with N={N} failed: {exc}") from exc
        with np.errstate(divide="ignore"):
            a_bar = float(np.mean(np.log(np.abs(A[N - 3 : N]))))
            s_a = float(np.log(sA[N - 2]))
        trace.rows.append((N, a_bar, s_a))
    trace.n_star = N - 1
    return trace
