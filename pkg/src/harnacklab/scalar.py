"""Gaussian special functions, the isoperimetric profile and curvature rates.

All functions are vectorized over numpy arrays and return floats for scalar
input.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import ndtr, ndtri

#: probabilities are clamped to ``[EPS_CLAMP, 1 - EPS_CLAMP]`` before inversion
EPS_CLAMP = 1e-15

_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


@dataclass(frozen=True)
class CurvatureParams:
    """Curvature lower bound ``K`` and optional dimension ``N`` (None means infinite)."""

    K: float
    N: Optional[float] = None

    def __post_init__(self):
        if self.N is not None and self.N < 1:
            raise ValueError(f"dimension N must be >= 1, got {self.N}")

    @property
    def finite_dimension(self) -> bool:
        return self.N is not None


def _out(x):
    return float(x) if np.ndim(x) == 0 else x


def norm_cdf(x):
    """Standard normal distribution function."""
    return _out(ndtr(np.asarray(x, dtype=float)))


def norm_pdf(x):
    """Standard normal density."""
    x = np.asarray(x, dtype=float)
    return _out(_INV_SQRT_2PI * np.exp(-0.5 * x * x))


def clamp_probability(p, eps=EPS_CLAMP):
    """Clamp probabilities into ``[eps, 1 - eps]``.

    Returns
    -------
    clamped : ndarray or float
    fired : bool
        True when at least one entry was moved.
    """
    p = np.asarray(p, dtype=float)
    clamped = np.clip(p, eps, 1.0 - eps)
    return _out(clamped), bool(np.any(clamped != p))


def norm_ppf(p, clamp=False):
    """Standard normal quantile.

    With ``clamp=True`` the input is first clamped with :func:`clamp_probability`
    so that exact 0/1 masses map to finite values.
    """
    p = np.asarray(p, dtype=float)
    if np.any((p < 0) | (p > 1)):
        raise ValueError("probabilities must lie in [0, 1]")
    if clamp:
        p = np.clip(p, EPS_CLAMP, 1.0 - EPS_CLAMP)
    # ndtri is accurate to a few ulp; one Newton step on the cdf costs little
    # and removes the residual bias in the far tails
    z = ndtri(p)
    ok = np.isfinite(z) & (p > 0) & (p < 1)
    if np.any(ok):
        zo = z[ok] if z.ndim else z
        dens = _INV_SQRT_2PI * np.exp(-0.5 * zo * zo)
        po = p[ok] if p.ndim else p
        err = np.where(po < 0.5, ndtr(zo) - po, -(ndtr(-zo) - (1.0 - po)))
        step = np.where(dens > 1e-300, err / np.maximum(dens, 1e-300), 0.0)
        if z.ndim:
            z[ok] = zo - step
        else:
            z = zo - step
    return _out(z)


def iso_profile(v):
    """Gaussian isoperimetric profile ``I = norm_pdf o norm_ppf`` on ``[0, 1]``.

    Endpoints map exactly to 0. The profile is evaluated on ``min(v, 1 - v)``
    so that the symmetry ``I(v) = I(1 - v)`` holds to rounding.
    """
    v = np.asarray(v, dtype=float)
    if np.any(~np.isfinite(v)) or np.any((v < 0) | (v > 1)):
        raise ValueError("iso_profile is defined on [0, 1]")
    w = np.minimum(v, 1.0 - v)
    out = np.zeros_like(w)
    pos = w > 0
    if np.any(pos):
        out[pos] = norm_pdf(np.atleast_1d(norm_ppf(w[pos])))
    return _out(out)


iso_profile_eval = iso_profile


def sigma(K, t):
    """Harnack rate ``(exp(2Kt) - 1)/K``; equals ``2t`` at ``K = 0``."""
    K = np.asarray(K, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("time must be non-negative")
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(K == 0, 2.0 * t, np.expm1(2.0 * K * t) / np.where(K == 0, 1.0, K))
    return _out(out)


def kappa(K, t):
    """Isoperimetric rate ``(1 - exp(-2Kt))/K``; equals ``2t`` at ``K = 0``."""
    K = np.asarray(K, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("time must be non-negative")
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(K == 0, 2.0 * t, -np.expm1(-2.0 * K * t) / np.where(K == 0, 1.0, K))
    return _out(out)
