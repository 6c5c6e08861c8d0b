"""Posterior structure of the stable-beta process under Bernoulli sampling.

After n rounds of feature sampling, the underlying measure splits into a
stable-beta CRM with updated concentration c + n and shrunken total mass,
plus one beta-distributed fixed atom per observed feature.  All updates
are conjugate, so everything here is closed form.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .families import SBP_FAMILIES, CrmSpec
from .numerics import ascending_factorial
from .sampler import Trajectory

__all__ = [
    "SbpPosterior",
    "posterior_spec",
    "sbp_posterior",
    "posterior_cumulant",
    "sample_fixed_jumps",
    "relative_importance",
    "sample_bernoulli_process",
]


def _check_sbp(prior: CrmSpec):
    if prior.family not in SBP_FAMILIES:
        raise ValueError("Bernoulli-sampling conjugacy needs a beta or "
                         "stable-beta prior")


def posterior_spec(prior: CrmSpec, n: int) -> CrmSpec:
    """CRM part after n samples: c -> c + n, mass scaled by
    (c + sigma)_(n) / (c + 1)_(n)."""
    _check_sbp(prior)
    if n < 1:
        raise ValueError("n must be a positive integer")
    shrink = ascending_factorial(prior.c + prior.sigma, n) \
        / ascending_factorial(prior.c + 1.0, n)
    return replace(prior, a=prior.a * shrink, c=prior.c + n)


@dataclass(frozen=True)
class SbpPosterior:
    prior: CrmSpec
    n: int
    freqs: np.ndarray
    tilted: CrmSpec
    jump_alphas: np.ndarray
    jump_betas: np.ndarray


def sbp_posterior(prior: CrmSpec, freqs, n: int) -> SbpPosterior:
    """Bundle the tilted CRM with the fixed-atom beta parameters.

    freqs[j] counts how many of the n samples exhibited feature j; the
    atom law there is Beta(n_j - sigma, c + sigma + n - n_j).
    """
    _check_sbp(prior)
    f = np.asarray(freqs, dtype=float)
    if np.any(f < 1) or np.any(f > n):
        raise ValueError("feature counts must lie in 1..n")
    if np.any(f <= prior.sigma):
        raise ValueError("every feature count must exceed sigma")
    return SbpPosterior(
        prior=prior, n=int(n), freqs=f,
        tilted=posterior_spec(prior, n),
        jump_alphas=f - prior.sigma,
        jump_betas=prior.c + prior.sigma + n - f)


def posterior_cumulant(prior: CrmSpec, n: int, i: int) -> float:
    """kappa_i of the posterior CRM part, directly:
    a (1-sigma)_(i-1) (c+sigma)_(n) / (c+1)_(n+i-1)."""
    _check_sbp(prior)
    if i < 1:
        raise ValueError("cumulant order starts at 1")
    return prior.a * ascending_factorial(1.0 - prior.sigma, i - 1) \
        * ascending_factorial(prior.c + prior.sigma, n) \
        / ascending_factorial(prior.c + 1.0, n + i - 1)


def sample_fixed_jumps(prior: CrmSpec, freqs, n: int,
                       rng: np.random.Generator):
    post = sbp_posterior(prior, freqs, n)
    return rng.beta(post.jump_alphas, post.jump_betas)


def relative_importance(prior: CrmSpec, n: int, k: float) -> float:
    """Expected fixed-atom mass over expected CRM-part mass after n rounds.

    Closed form (n - k sigma) (c+1)_(n-1) / (a (c+sigma)_(n)); k may be
    non-integral so growth rules like k = n^sigma evaluate directly.
    """
    _check_sbp(prior)
    if n < 1:
        raise ValueError("n must be a positive integer")
    if k <= 0:
        raise ValueError("k must be positive")
    return (n - k * prior.sigma) \
        * ascending_factorial(prior.c + 1.0, n - 1) \
        / (prior.a * ascending_factorial(prior.c + prior.sigma, n))


def sample_bernoulli_process(trajectory: Trajectory,
                             rng: np.random.Generator):
    """One feature-sampling round: keep atom i with probability J_i.

    Returns the boolean selection mask; the caller reads locations off
    the trajectory.  Jumps must lie in (0, 1], as they do for the
    stable-beta group.
    """
    j = trajectory.jumps
    if np.any(j <= 0) or np.any(j > 1.0):
        raise ValueError("Bernoulli thinning needs jump sizes in (0, 1]")
    return rng.uniform(size=len(j)) < j
