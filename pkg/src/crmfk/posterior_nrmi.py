"""Posterior machinery for normalized generalized-gamma mixing measures.

Conditional on data grouped into k clusters with sizes n_1..n_k and on a
latent positive variable U, the posterior of the underlying measure splits
into an exponentially tilted CRM part (theta shifted by u) plus one fixed
atom per cluster with Gamma(n_j - gamma) distributed mass.  The U marginal
has an unnormalized density handled here on an adaptive geometric grid:
sampling, the posterior mean and mixed-expectation ratios all ride on it.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .families import GG_FAMILIES, CrmSpec
from .numerics import NumericError

__all__ = [
    "DataSummary",
    "NggPosterior",
    "u_log_density",
    "u_grid_density",
    "sample_u",
    "u_posterior_mean",
    "posterior_spec",
    "ngg_posterior",
    "sample_fixed_jumps",
    "relative_importance",
]

_GRID_NODES = 4096
_GRID_DECAY = 1e-12
_GRID_MAX_GROWTH = 60


@dataclass(frozen=True)
class DataSummary:
    """Cluster layout of n observations: k groups, optionally their sizes.

    k may be non-integral for what-if evaluations of the ratio formulas;
    operations that need actual cluster sizes require freqs.
    """

    n: int
    k: float
    freqs: np.ndarray | None = None

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be a positive integer")
        if not 0 < self.k <= self.n:
            raise ValueError("k must lie in (0, n]")
        if self.freqs is not None:
            f = np.asarray(self.freqs, dtype=float)
            if len(f) != self.k:
                raise ValueError("freqs length must equal k")
            if np.any(f < 1) or f.sum() != self.n:
                raise ValueError("freqs must be positive and sum to n")
            object.__setattr__(self, "freqs", f)

    @staticmethod
    def from_freqs(freqs):
        f = np.asarray(freqs, dtype=float)
        return DataSummary(n=int(f.sum()), k=len(f), freqs=f)


def _check_ngg(a, gamma):
    if a <= 0:
        raise ValueError("a must be positive")
    if not 0.0 < gamma < 1.0:
        raise ValueError("the latent-variable density needs gamma in (0, 1); "
                         "the gamma-process boundary has no such density")


def u_log_density(data: DataSummary, a: float, gamma: float, u):
    """Unnormalized log density of U given the cluster layout.

    log f(u) = (n-1) log u + (k gamma - n) log(1+u) - (a/gamma)(1+u)^gamma
    up to an additive constant, for u > 0 and gamma strictly inside (0, 1).
    """
    _check_ngg(a, gamma)
    u_arr = np.asarray(u, dtype=float)
    if np.any(u_arr <= 0.0):
        raise ValueError("u must be positive")
    out = (data.n - 1) * np.log(u_arr) \
        + (data.k * gamma - data.n) * np.log1p(u_arr) \
        - (a / gamma) * (1.0 + u_arr) ** gamma
    return out if isinstance(u, np.ndarray) else float(out)


def u_grid_density(data: DataSummary, a: float, gamma: float):
    """Geometric grid capturing the U density to its far tails.

    Returns (nodes, pdf, cdf) with the pdf normalized by trapezoid mass
    and the cdf running from 0 to 1.  The grid is regrown until both
    boundary densities fall below 1e-12 of the peak.
    """
    _check_ngg(a, gamma)
    lo, hi = 1e-8, 50.0 * max(1.0, data.n / a)
    for _ in range(_GRID_MAX_GROWTH):
        nodes = np.geomspace(lo, hi, _GRID_NODES)
        logf = u_log_density(data, a, gamma, nodes)
        m = logf.max()
        grow = False
        if logf[-1] - m > np.log(_GRID_DECAY):
            hi *= 4.0
            grow = True
        if logf[0] - m > np.log(_GRID_DECAY) and lo > 1e-250:
            lo /= 16.0
            grow = True
        if not grow:
            break
    else:
        raise NumericError("U-density grid failed to localize the mass")
    pdf = np.exp(logf - m)
    steps = np.diff(nodes)
    panel = 0.5 * (pdf[1:] + pdf[:-1]) * steps
    cdf = np.concatenate(([0.0], np.cumsum(panel)))
    total = cdf[-1]
    return nodes, pdf / total, cdf / total


def sample_u(data: DataSummary, a: float, gamma: float,
             rng: np.random.Generator, size: int | None = None):
    """Inverse-CDF draws of U from the grid representation."""
    nodes, _, cdf = u_grid_density(data, a, gamma)
    w = rng.uniform(size=size)
    out = np.interp(w, cdf, nodes)
    return out if size is not None else float(out)


def u_posterior_mean(data: DataSummary, a: float, gamma: float) -> float:
    """E[U | data] by trapezoid quadrature on the adaptive grid."""
    nodes, pdf, _ = u_grid_density(data, a, gamma)
    return float(np.trapezoid(nodes * pdf, nodes))


def posterior_spec(prior: CrmSpec, u: float) -> CrmSpec:
    """The CRM part of the posterior: the prior tilted by e^(-u v)."""
    if prior.family not in GG_FAMILIES:
        raise ValueError("exponential tilting applies to the generalized-"
                         "gamma group")
    if u <= 0:
        raise ValueError("u must be positive")
    return replace(prior, theta=prior.theta + u)


@dataclass(frozen=True)
class NggPosterior:
    """Both posterior halves at a fixed latent u."""

    prior: CrmSpec
    data: DataSummary
    u: float
    tilted: CrmSpec
    jump_shapes: np.ndarray
    jump_rate: float


def ngg_posterior(prior: CrmSpec, data: DataSummary, u: float) -> NggPosterior:
    if data.freqs is None:
        raise ValueError("building the posterior needs cluster sizes")
    gamma = prior.gamma
    if np.any(data.freqs <= gamma):
        raise ValueError("every cluster size must exceed gamma")
    return NggPosterior(
        prior=prior, data=data, u=float(u),
        tilted=posterior_spec(prior, u),
        jump_shapes=data.freqs - gamma,
        jump_rate=prior.theta + u)


def sample_fixed_jumps(prior: CrmSpec, data: DataSummary, u: float,
                       rng: np.random.Generator):
    """One draw of the k fixed-atom masses, Gamma(n_j - gamma, theta + u)."""
    post = ngg_posterior(prior, data, u)
    return rng.gamma(post.jump_shapes, 1.0 / post.jump_rate)


def relative_importance(prior: CrmSpec, data: DataSummary, u: float | None = None,
                        n_draws: int | None = None,
                        rng: np.random.Generator | None = None) -> float:
    """Expected fixed-atom mass over expected CRM-part mass.

    With `u` given the ratio is conditional on that value,

        (n - k gamma) / (a (1 + u)^gamma),

    assuming the standard unit-scale prior.  With `n_draws` instead, both
    expectations are first averaged separately over U draws and then
    divided (the ratio of means, not the mean ratio).
    """
    if prior.family not in GG_FAMILIES or prior.theta != 1.0:
        raise ValueError("the ratio formulas assume theta = 1")
    a, gamma = prior.a, prior.gamma
    _check_ngg(a, gamma)
    if (u is None) == (n_draws is None):
        raise ValueError("give exactly one of u or n_draws")
    if u is not None:
        if u <= 0:
            raise ValueError("u must be positive")
        return (data.n - data.k * gamma) / (a * (1.0 + u) ** gamma)
    if rng is None:
        raise ValueError("mixing over U needs an rng")
    draws = sample_u(data, a, gamma, rng, size=int(n_draws))
    num = np.mean((data.n - data.k * gamma) / (1.0 + draws))
    den = np.mean(a * (1.0 + draws) ** (gamma - 1.0))
    return float(num / den)
