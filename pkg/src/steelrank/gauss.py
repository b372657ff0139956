"""Normal-approximation kernels: joint tails of the one-factor model via one quadrature.

The K statistics share the covariance of n_i*V0 + V_i with independent normal V's,
so every joint box probability is a single integral over the common factor:

    P(all coordinates standardized <= u_i) = integral of
        prod_i Phi((u_i*tau_i - n_i*sigma0*z) / sigma_i) * phi(z) dz.

Composite Gauss-Legendre on [-8.5, 8.5] (truncation mass < 2e-17) evaluates it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq
from scipy.special import ndtr

from .errors import NumericError, ParameterError
from .moments import MomentSet

INTEGRATION_LIMIT = 8.5
DEFAULT_NODES = 160
_PANELS = 8


@lru_cache(maxsize=64)
def _nodes(num_nodes: int, lo: float, hi: float) -> tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre abscissas and phi-weighted weights on [lo, hi]."""
    per_panel = max(2, -(-num_nodes // _PANELS))
    x, w = np.polynomial.legendre.leggauss(per_panel)
    edges = np.linspace(lo, hi, _PANELS + 1)
    zs, ws = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        half = (b - a) / 2
        zs.append(half * x + (b + a) / 2)
        ws.append(half * w)
    z = np.concatenate(zs)
    weight = np.concatenate(ws) * np.exp(-z * z / 2) / math.sqrt(2 * math.pi)
    z.setflags(write=False)
    weight.setflags(write=False)
    return z, weight


def std_normal_cdf(z: float) -> float:
    """Standard normal distribution function (saturates at 0/1 for huge |z|)."""
    return float(ndtr(z))


@dataclass(frozen=True)
class FactorModel:
    """One-factor representation of the joint statistic distribution.

    ``n`` are the treatment sizes, ``mu`` the null means; tau_i^2 must equal
    n_i^2*sigma0^2 + sigma_i^2.  sigma_i == 0 is allowed (the corresponding
    integrand factor becomes a step function).
    """

    n: tuple[int, ...]
    sigma0: float
    sigma: np.ndarray
    tau: np.ndarray
    mu: np.ndarray

    def __post_init__(self) -> None:
        sigma = np.asarray(self.sigma, dtype=float)
        tau = np.asarray(self.tau, dtype=float)
        mu = np.asarray(self.mu, dtype=float)
        n = tuple(int(v) for v in self.n)
        if not (len(n) == sigma.size == tau.size == mu.size) or len(n) == 0:
            raise ParameterError("model component lengths disagree")
        if self.sigma0 < 0 or (sigma < 0).any():
            raise ParameterError("standard deviations must be nonnegative")
        if (tau <= 0).any():
            raise ParameterError("tau must be strictly positive (degenerate data carry no test)")
        recon = np.asarray(n, dtype=float) ** 2 * self.sigma0**2 + sigma**2
        if np.any(np.abs(recon - tau**2) > 1e-10 * tau**2):
            raise ParameterError("tau^2 != n^2*sigma0^2 + sigma^2; inconsistent model")
        for name, arr in (("sigma", sigma), ("tau", tau), ("mu", mu)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "n", n)

    @property
    def K(self) -> int:
        return len(self.n)

    @classmethod
    def from_moments(cls, ms: MomentSet) -> "FactorModel":
        return cls(
            n=ms.sizes[1:],
            sigma0=math.sqrt(ms.sigma0_2),
            sigma=np.sqrt(ms.sigma2),
            tau=np.sqrt(ms.tau2),
            mu=np.asarray(ms.mu, dtype=float),
        )


def _as_u(model: FactorModel, u, name: str) -> np.ndarray:
    arr = np.asarray(u, dtype=float)
    if arr.ndim == 0:
        arr = np.full(model.K, float(arr))
    if arr.shape != (model.K,):
        raise ParameterError(f"{name} must be a scalar or a length-K vector")
    return arr


def _smooth_args(model: FactorModel, u: np.ndarray, z: np.ndarray, keep: np.ndarray) -> np.ndarray:
    numer = u[keep] * model.tau[keep] - np.outer(
        z, np.asarray(model.n, dtype=float)[keep] * model.sigma0
    )
    return numer / model.sigma[keep]


def _degenerate_caps(model: FactorModel, u: np.ndarray, deg: np.ndarray) -> np.ndarray:
    """z thresholds where the sigma_i == 0 indicator factors switch.

    A degenerate factor has tau_i = n_i*sigma0 > 0, so its argument sign flips at
    z = u_i*tau_i / (n_i*sigma0) = u_i exactly.
    """
    return u[deg] * model.tau[deg] / (np.asarray(model.n, dtype=float)[deg] * model.sigma0)


def _product_mass(model, u, nodes, lo, hi, survival: bool) -> float:
    """Integral of prod_i F_i(z) * phi(z) over [lo, hi], with F = Phi or 1 - Phi."""
    if hi <= lo:
        return 0.0
    z, weight = _nodes(nodes, lo, hi)
    keep = model.sigma > 0
    if keep.any():
        a = _smooth_args(model, u, z, keep)
        vals = np.prod(ndtr(-a if survival else a), axis=1)
    else:
        vals = np.ones_like(z)
    return min(max(float(weight @ vals), 0.0), 1.0)


def _box_mass(model: FactorModel, u: np.ndarray, nodes: int) -> float:
    """P(all standardized coordinates <= u_i); degenerate factors clip the interval."""
    lo, hi = -INTEGRATION_LIMIT, INTEGRATION_LIMIT
    deg = model.sigma == 0
    if deg.any():
        hi = min(hi, float(_degenerate_caps(model, u, deg).min()))
    return _product_mass(model, u, nodes, lo, hi, survival=False)


def tail_prob_max(model: FactorModel, threshold: float, nodes: int = DEFAULT_NODES) -> float:
    """P(max standardized coordinate >= threshold) under the factor model."""
    return tail_prob_max_multi(model, _as_u(model, threshold, "threshold"), nodes)


def tail_prob_max_multi(model: FactorModel, thresholds, nodes: int = DEFAULT_NODES) -> float:
    """Per-coordinate-threshold variant: P(any coordinate i >= thresholds[i])."""
    u = _as_u(model, thresholds, "thresholds")
    return 1.0 - _box_mass(model, u, nodes)


def tail_prob_min(model: FactorModel, threshold: float, nodes: int = DEFAULT_NODES) -> float:
    """P(min standardized coordinate <= threshold)."""
    return tail_prob_min_multi(model, _as_u(model, threshold, "threshold"), nodes)


def tail_prob_min_multi(model: FactorModel, thresholds, nodes: int = DEFAULT_NODES) -> float:
    u = _as_u(model, thresholds, "thresholds")
    lo, hi = -INTEGRATION_LIMIT, INTEGRATION_LIMIT
    deg = model.sigma == 0
    if deg.any():  # survival indicator is 1 only above the switch point
        lo = max(lo, float(_degenerate_caps(model, u, deg).max()))
    return 1.0 - _product_mass(model, u, nodes, lo, hi, survival=True)


def tail_prob_abs(model: FactorModel, threshold: float, nodes: int = DEFAULT_NODES) -> float:
    """P(max |standardized coordinate| >= threshold), threshold >= 0."""
    if threshold < 0:
        raise ParameterError("two-sided threshold must be >= 0")
    return tail_prob_abs_multi(model, _as_u(model, threshold, "threshold"), nodes)


def tail_prob_abs_multi(model: FactorModel, thresholds, nodes: int = DEFAULT_NODES) -> float:
    u = _as_u(model, thresholds, "thresholds")
    if (u < 0).any():
        raise ParameterError("two-sided thresholds must be >= 0")
    lo, hi = -INTEGRATION_LIMIT, INTEGRATION_LIMIT
    deg = model.sigma == 0
    if deg.any():  # indicator window is symmetric: -u_i <= z <= u_i per factor
        caps = _degenerate_caps(model, u, deg)
        hi = min(hi, float(caps.min()))
        lo = max(lo, float(-caps.min()))
    if hi <= lo:
        return 1.0
    z, weight = _nodes(nodes, lo, hi)
    keep = model.sigma > 0
    if keep.any():
        inside = ndtr(_smooth_args(model, u, z, keep)) - ndtr(_smooth_args(model, -u, z, keep))
        vals = np.prod(inside, axis=1)
    else:
        vals = np.ones_like(z)
    return 1.0 - min(max(float(weight @ vals), 0.0), 1.0)


def joint_lower_box_prob(model: FactorModel, c, nodes: int = DEFAULT_NODES) -> float:
    """P(W_i <= c_i for all i) with thresholds c on the raw statistic scale."""
    c = np.asarray(c, dtype=float)
    if c.shape != (model.K,):
        raise ParameterError("c must be a length-K vector of raw-scale thresholds")
    u = (c - model.mu) / model.tau
    return _box_mass(model, u, nodes)


def solve_common_threshold(
    model: FactorModel, gamma: float, side: str = "upper_box", nodes: int = DEFAULT_NODES
) -> float:
    """u with P(all W_i <= mu_i + u*tau_i) == gamma, by bracketed root finding."""
    if not 0 < gamma < 1:
        raise ParameterError(f"gamma must be in (0, 1), got {gamma}")
    if side != "upper_box":
        raise ParameterError(f"unknown side {side!r}")

    def f(u: float) -> float:
        return _box_mass(model, np.full(model.K, u), nodes) - gamma

    root = float(brentq(f, -45.0, 45.0, xtol=1e-13, maxiter=200))
    if abs(f(root)) > 1e-9:
        raise NumericError("threshold solve did not reach the 1e-9 target")
    return root
