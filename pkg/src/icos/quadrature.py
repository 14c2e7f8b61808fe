"""Composite quadrature weights on a strike grid.

Integrals are approximated as ``sum_i w_i f(K_i) * delta`` where ``delta`` is the
common spacing of a uniform grid. On non-uniform grids the trapezoid rule is
used and ``delta`` is folded into the weights (``delta = 1``).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from .exceptions import QuadratureError

Scheme = Literal["left", "right", "trap", "simpson"]

SCHEMES: dict[str, int] = {"left": 1, "right": 1, "trap": 2, "simpson": 4}

_ALIASES = {
    "left-riemann": "left",
    "right-riemann": "right",
    "trapezoid": "trap",
    "simpson13": "simpson",
}

UNIFORM_RTOL = 1e-9


def canonical_scheme(scheme: str) -> str:
    name = _ALIASES.get(scheme, scheme)
    if name not in SCHEMES:
        raise QuadratureError(f"unknown quadrature scheme {scheme!r}; expected one of {sorted(SCHEMES)}")
    return name


def order(scheme: str) -> int:
    """Error order of the composite rule on smooth integrands."""
    return SCHEMES[canonical_scheme(scheme)]


@dataclass(frozen=True)
class GridKind:
    """Uniform grids carry their spacing; non-uniform grids carry all spacings."""

    uniform: bool
    spacing: float | None = None
    spacings: np.ndarray | None = None

    @classmethod
    def detect(cls, strikes) -> "GridKind":
        k = np.asarray(strikes, dtype=float)
        if k.ndim != 1 or k.size < 2:
            raise QuadratureError("a grid needs at least two nodes")
        d = np.diff(k)
        if np.any(d <= 0):
            raise QuadratureError("grid nodes must be strictly ascending")
        mean = (k[-1] - k[0]) / (k.size - 1)
        if np.max(np.abs(d - mean)) < UNIFORM_RTOL * mean:
            return cls(uniform=True, spacing=float(mean))
        return cls(uniform=False, spacings=d)


def table_weights(scheme: str, n: int) -> np.ndarray:
    """Unit weights ``w_1..w_n`` of a composite rule on an equidistant grid."""
    scheme = canonical_scheme(scheme)
    if n < 2:
        raise QuadratureError("need n >= 2 nodes")
    w = np.ones(n)
    if scheme == "left":
        w[-1] = 0.0
    elif scheme == "right":
        w[0] = 0.0
    elif scheme == "trap":
        w[0] = w[-1] = 0.5
    else:
        if n % 2 == 0:
            raise QuadratureError(f"Simpson's 1/3 rule needs an odd number of nodes, got {n}; regrid the chain")
        i = np.arange(1, n + 1)
        w = (3.0 + (-1.0) ** i) / 3.0
        w[0] = w[-1] = 1.0 / 3.0
    return w


def weights(scheme: str, strikes) -> tuple[np.ndarray, float]:
    """Return ``(w, delta)`` so that the integral is ``sum(w * f * delta)``.

    Non-uniform grids always use the trapezoid rule with ``delta = 1``.
    """
    grid = GridKind.detect(strikes)
    n = len(np.asarray(strikes))
    if grid.uniform:
        return table_weights(scheme, n), grid.spacing
    d = grid.spacings
    w = np.zeros(n)
    w[:-1] += 0.5 * d
    w[1:] += 0.5 * d
    return w, 1.0


def effective_weights(scheme: str, strikes) -> np.ndarray:
    """Per-node weights with the spacing folded in."""
    w, delta = weights(scheme, strikes)
    return w * delta


def integrate(samples, strikes, scheme: str = "simpson") -> float:
    f = np.asarray(samples, dtype=float)
    k = np.asarray(strikes, dtype=float)
    if f.shape[-1] != k.shape[0]:
        raise QuadratureError(f"length mismatch: {f.shape[-1]} samples for {k.shape[0]} nodes")
    return f @ effective_weights(scheme, k)
