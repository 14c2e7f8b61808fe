"""Feasible error covariance and asymptotic variances of the iCOS estimators.

Every estimator is linear in the observation errors ``eps``: its error is
``g @ eps`` for a gradient row ``g``, so its variance is ``g diag(sigma2) g'``.
The gradients are assembled from the regression map
``G = (Z'Z)^{-1} Z' (I - Psi)``, which sends ``eps`` to the error of theta-hat.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import DegreesOfFreedomError, SingularDesignError


def psi_matrix(h_call: np.ndarray, psi: np.ndarray, wd: np.ndarray) -> np.ndarray:
    """``Psi`` with ``Psi~_ij = w_j delta sum_{m>=1} psi_m(K_j) H_m(K_i)`` and 1 added to the last column.

    ``h_call`` and ``psi`` are ``(N, n)`` with the ``m = 0`` row first.
    """
    tilde = h_call[1:].T @ (psi[1:] * wd)
    tilde[:, -1] += 1.0
    return tilde


def zz_inverse(Z: np.ndarray) -> np.ndarray:
    ztz = Z.T @ Z
    if np.linalg.cond(ztz) > 1e14:
        raise SingularDesignError(f"regression design is rank deficient (cond = {np.linalg.cond(ztz):.3g})")
    return np.linalg.inv(ztz)


def degrees_of_freedom(Z: np.ndarray, Psi: np.ndarray, zz_inv: np.ndarray | None = None) -> float:
    """``nu = tr Q - 2 tr(Q Psi) + tr(Q Psi Psi')`` with ``Q = I - Z (Z'Z)^{-1} Z'``.

    Traces are taken through the rank-3 projection, so nothing ``n x n`` beyond ``Psi`` is formed.
    """
    n, k = Z.shape
    zz_inv = zz_inverse(Z) if zz_inv is None else zz_inv
    tr_q = n - k
    tr_q_psi = np.trace(Psi) - np.trace(zz_inv @ (Z.T @ Psi @ Z))
    pz = Psi.T @ Z
    tr_q_psipsi = np.sum(Psi**2) - np.trace(zz_inv @ (pz.T @ pz))
    nu = tr_q - 2.0 * tr_q_psi + tr_q_psipsi
    # nu = tr(Q (I - Psi)(I - Psi)') >= 0, so the failure mode is a numerical zero
    if not nu > 1e-9 * n:
        raise DegreesOfFreedomError(f"non-positive degrees of freedom nu = {nu:.6g}; reduce the number of terms")
    return float(nu)


def degrees_of_freedom_dense(Z: np.ndarray, Psi: np.ndarray) -> float:
    """Reference implementation with the explicit ``n x n`` projection."""
    n = Z.shape[0]
    Q = np.eye(n) - Z @ np.linalg.solve(Z.T @ Z, Z.T)
    return float(np.trace(Q) - 2 * np.trace(Q @ Psi) + np.trace(Q @ Psi @ Psi.T))


def feasible_sigma(residuals: np.ndarray, nu: float) -> np.ndarray:
    """Diagonal of ``(n / nu) diag(e^2)``; works row-wise on stacked residuals."""
    n = residuals.shape[-1]
    return n / nu * residuals**2


def quad_form(g: np.ndarray, sigma2: np.ndarray) -> np.ndarray:
    """``g diag(sigma2) g'`` for gradient rows ``g`` (``(..., p, n)``) and variances ``(..., n)``.

    Returns the variances of the ``p`` estimates, broadcast over leading axes of ``sigma2``.
    """
    return np.einsum("pn,...n->...p", g**2, sigma2)


def var_theta(G: np.ndarray, sigma2: np.ndarray) -> np.ndarray:
    """``Var(theta-hat) = G Sigma G'`` (3 x 3, or stacked)."""
    return np.einsum("in,...n,jn->...ij", G, sigma2, G)


def var_theta_sandwich(Z: np.ndarray, Psi: np.ndarray, sigma2: np.ndarray) -> np.ndarray:
    """The three-term sandwich ``(Z'Z)^{-1} Z'(S - 2 Psi S + Psi S Psi') Z (Z'Z)^{-1}``.

    The middle matrix is not symmetric but its quadratic forms equal those of
    ``(I - Psi) S (I - Psi)'``; kept as an independent check on :func:`var_theta`.
    """
    S = np.diag(sigma2)
    zz_inv = np.linalg.inv(Z.T @ Z)
    middle = S - 2 * Psi @ S + Psi @ S @ Psi.T
    return zz_inv @ Z.T @ middle @ Z @ zz_inv


def var_D(psi_m: np.ndarray, wd: np.ndarray, sigma2: np.ndarray) -> np.ndarray:
    """``sigma_D^2(m) = sum_i w_i^2 psi_m(K_i)^2 sigma_i^2 delta^2`` for rows ``psi_m``."""
    return quad_form(psi_m * wd, sigma2)


@dataclass(frozen=True)
class Gradients:
    """Gradient rows for one family of point estimates, ready for :func:`quad_form`."""

    rows: np.ndarray
    scale: float = 1.0

    def std(self, sigma2: np.ndarray) -> np.ndarray:
        return self.scale * np.sqrt(np.maximum(quad_form(self.rows, sigma2), 0.0))


def regression_map(Z: np.ndarray, Psi: np.ndarray, zz_inv: np.ndarray) -> np.ndarray:
    """``G = (Z'Z)^{-1} Z' (I - Psi)``, shape ``(3, n)``."""
    zt = zz_inv @ Z.T
    return zt - zt @ Psi
