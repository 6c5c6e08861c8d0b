"""Special-function kernels shared by the samplers.

Everything here is deliberately boring: scalar or vectorized wrappers
around scipy primitives, plus the few routines scipy does not provide
in a usable form (upper incomplete gamma at non-positive shape, the
stable-beta tail integral near its singular endpoint).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special
from scipy.optimize import brentq

__all__ = [
    "NumericError",
    "QuadratureSettings",
    "RootSettings",
    "upper_incomplete_gamma",
    "sbp_tail_integral",
    "gamma_quantile",
    "ascending_factorial",
    "invert_monotone_decreasing",
    "solve_decreasing_log",
]


class NumericError(RuntimeError):
    """A numeric routine failed to deliver its accuracy contract."""


_DBL_TINY = np.finfo(float).tiny  # smallest normal double, 2.2e-308


@dataclass(frozen=True)
class QuadratureSettings:
    rel_tol: float = 1e-10
    abs_tol: float = 1e-14
    max_subdivisions: int = 200


@dataclass(frozen=True)
class RootSettings:
    rel_tol: float = 1e-12
    max_iter: int = 200


# ---------------------------------------------------------------------------
# upper incomplete gamma, any real shape


def upper_incomplete_gamma(shape, x):
    """Gamma(shape, x) = int_x^inf t^(shape-1) e^(-t) dt for real shape, x > 0.

    scipy's gammaincc only covers shape > 0.  For shape <= 0 the value is
    reached by stepping down from a positive shape with

        Gamma(s, x) = (Gamma(s + 1, x) - x^s e^(-x)) / s,

    which is stable here because the power term dominates for small x and
    the subtraction loses only O(x) ulps for large x, where the result is
    already far below 1.

    Parameters
    ----------
    shape : float
        Any real number.
    x : float or ndarray
        Strictly positive lower limit.

    Returns
    -------
    float or ndarray, same shape as `x`.
    """
    x_arr = np.asarray(x, dtype=float)
    if np.any(x_arr <= 0.0):
        raise ValueError("upper_incomplete_gamma requires x > 0")
    s = float(shape)

    if s > 0.0:
        out = special.gammaincc(s, x_arr) * special.gamma(s)
        return out if isinstance(x, np.ndarray) else float(out)

    # Number of downward steps to land on a base shape in (0, 1], or on 0
    # exactly when the shape is a non-positive integer.
    steps = int(math.ceil(-s))
    base = s + steps
    if base == 0.0:
        val = special.exp1(x_arr)
    else:
        val = special.gammaincc(base, x_arr) * special.gamma(base)
    logx = np.log(x_arr)
    for j in range(1, steps + 1):
        t = base - j
        val = (val - np.exp(t * logx - x_arr)) / t
    if not np.all(np.isfinite(val)):
        raise NumericError("upper_incomplete_gamma recurrence overflowed")
    return val if isinstance(x, np.ndarray) else float(val)


# ---------------------------------------------------------------------------
# stable-beta tail integral  I(v) = int_v^1 u^(-sigma-1) (1-u)^(c+sigma-1) du
#
# Four regimes, split on v and on q = c + sigma.  The series pair covers
# moderate q; large q needs the integrated-by-parts form (sigma > 0) or a
# digamma identity (sigma = 0), both valid only once (q-1) v <= 1, with a
# fixed-order panel rule bridging the window in between.  Branch agreement
# at the seams is at the 1e-12 level, checked in the tests against an
# arbitrary-precision reference.

_Q_SERIES = 10.0
_SERIES2_TERMS = 80
_SERIES1_TERMS = 90
_SIGMA0_TERMS = 30
_GL_NODES = 24


def _series_upper(X, sigma, q, terms=_SERIES2_TERMS):
    # I(1 - X) as a hypergeometric-style series in X = 1 - v <= 1/2.
    # All terms positive, ratio bounded by 1/2, so ~80 terms reach 1e-24.
    # Powers advance by one multiply per term rather than a fresh pow.
    tot = np.zeros_like(X)
    xp = X ** q
    coef = 1.0
    for i in range(terms):
        if i > 0:
            coef *= (sigma + i) / i
        tot += coef * xp / (q + i)
        xp = xp * X
    return tot


def _series_lower(v, sigma, q, terms=_SERIES1_TERMS):
    # int_v^(1/2), expanding (1-u)^(q-1) about u = 0.  Alternating with
    # 2^q growth in the tail cancellation, hence the q <= _Q_SERIES guard.
    h = 0.5
    if sigma == 0.0:
        tot = np.log(h / v)
    else:
        tot = (v ** -sigma - h ** -sigma) / sigma
    coef = 1.0
    hp = h ** (1.0 - sigma)
    vp = v ** (1.0 - sigma)
    for k in range(1, terms):
        coef *= (k - q) / k
        tot = tot + coef * (hp - vp) / (k - sigma)
        hp *= h
        vp = vp * v
    return tot


def _window_panels(v, sigma, q, nodes=_GL_NODES):
    # Fixed-order Gauss-Legendre over [v, 1/2], one panel per ~6 units of
    # q - 1 so the integrand's decay scale is resolved.
    npan = int(np.ceil((q - 1.0) / 6.0)) + 1
    xs, ws = np.polynomial.legendre.leggauss(nodes)
    width = (0.5 - v) / npan
    tot = np.zeros_like(v)
    for j in range(npan):
        lo = v + j * width
        mid = lo + 0.5 * width
        half = 0.5 * width
        uu = mid[:, None] + half[:, None] * xs[None, :]
        f = uu ** (-1.0 - sigma) * np.exp((q - 1.0) * np.log1p(-uu))
        tot += half * np.dot(f, ws)
    return tot


def _small_v_sigma0(v, q, terms=_SIGMA0_TERMS):
    # I(v) = ln(1/v) - psi(q) - euler_gamma + sum_k -(1-q)_k / k! * v^k / k,
    # convergent fast once (q - 1) v <= 1.
    tot = -np.log(v) - special.digamma(q) - np.euler_gamma
    coef = 1.0
    add = np.zeros_like(v)
    vp = np.array(v, dtype=float, copy=True)
    for k in range(1, terms):
        coef *= (k - q) / k
        add = add - coef * vp / k
        vp = vp * v
    return tot + add


def _small_v_sigmapos(v, sigma, q):
    # Integration by parts pushes the endpoint singularity into a
    # complemented regularized beta with positive parameters.
    t1 = v ** -sigma * np.exp((q - 1.0) * np.log1p(-v)) / sigma
    t2 = (q - 1.0) / sigma * special.beta(1.0 - sigma, q - 1.0) \
        * special.betaincc(1.0 - sigma, q - 1.0, v)
    return t1 - t2


def sbp_tail_integral(v, sigma, c):
    """int_v^1 u^(-sigma-1) (1-u)^(c+sigma-1) du, elementwise in v.

    Parameters
    ----------
    v : float or ndarray
        Points in (0, 1); values >= 1 give 0.
    sigma : float
        Stability index in [0, 1).
    c : float
        Concentration, c + sigma > 0.

    Returns
    -------
    float or ndarray matching `v`.
    """
    if not 0.0 <= sigma < 1.0:
        raise ValueError("sigma must lie in [0, 1)")
    q = c + sigma
    if q <= 0.0:
        raise ValueError("c + sigma must be positive")
    v_arr = np.atleast_1d(np.asarray(v, dtype=float))
    if np.any(v_arr <= 0.0):
        raise ValueError("v must be positive")
    out = np.zeros_like(v_arr)

    hi = v_arr >= 0.5
    top = hi & (v_arr < 1.0)
    if np.any(top):
        out[top] = _series_upper(1.0 - v_arr[top], sigma, q)

    lo = ~hi
    if np.any(lo):
        if q <= _Q_SERIES:
            k0 = _series_upper(np.array([0.5]), sigma, q)[0]
            out[lo] = k0 + _series_lower(v_arr[lo], sigma, q)
        else:
            w0 = 1.0 / (q - 1.0)
            win = lo & (v_arr > w0)
            sml = lo & ~win
            if np.any(win):
                k0 = _series_upper(np.array([0.5]), sigma, q)[0]
                out[win] = k0 + _window_panels(v_arr[win], sigma, q)
            if np.any(sml):
                if sigma == 0.0:
                    out[sml] = _small_v_sigma0(v_arr[sml], q)
                else:
                    out[sml] = _small_v_sigmapos(v_arr[sml], sigma, q)

    if not np.all(np.isfinite(out)):
        raise NumericError("sbp_tail_integral produced non-finite values")
    return out if isinstance(v, np.ndarray) else float(out[0])


# ---------------------------------------------------------------------------


def gamma_quantile(shape, p):
    """Quantile of Gamma(shape, 1): smallest t with P(X <= t) = p."""
    if not 0.0 < p < 1.0:
        raise ValueError("p must lie strictly between 0 and 1")
    if shape <= 0.0:
        raise ValueError("shape must be positive")
    q = special.gammaincinv(shape, p)
    if not np.isfinite(q):
        raise NumericError(f"gamma quantile failed at shape={shape}, p={p}")
    return float(q)


def ascending_factorial(x, k):
    """(x)_k = x (x+1) ... (x+k-1), with (x)_0 = 1.

    Computed as a direct product; callers needing n, k beyond a few
    hundred should work in log space instead.
    """
    k = int(k)
    if k < 0:
        raise ValueError("k must be a non-negative integer")
    if k == 0:
        return 1.0
    return float(np.prod(np.asarray(x, dtype=float) + np.arange(k)))


def invert_monotone_decreasing(f, target, bracket_hint=None,
                               settings: RootSettings | None = None):
    """Solve f(v) = target for a continuous strictly decreasing f > 0.

    A bracket is grown geometrically from `bracket_hint` (or 1.0) until it
    straddles the target, then handed to Brent's method.
    """
    settings = settings or RootSettings()
    if target <= 0.0:
        raise ValueError("target must be positive")
    lo = hi = float(bracket_hint) if bracket_hint else 1.0
    grow = 8.0
    it = 0
    while f(lo) < target:
        lo /= grow
        it += 1
        if it > settings.max_iter or lo < 1e-308:
            raise NumericError("bracket expansion failed on the left")
    it = 0
    while f(hi) > target:
        hi *= grow
        it += 1
        if it > settings.max_iter or hi > 1e308:
            raise NumericError("bracket expansion failed on the right")
    if lo == hi:
        return lo
    # Brent in t = log v, where an absolute tolerance on t is a relative
    # tolerance on v, uniformly over many orders of magnitude.
    root_t = brentq(lambda t: f(math.exp(t)) - target,
                    math.log(lo), math.log(hi),
                    xtol=max(settings.rel_tol, 4 * np.finfo(float).eps),
                    maxiter=settings.max_iter)
    return float(math.exp(root_t))


def solve_decreasing_log(fn, targets, t_lo, t_hi,
                         settings: RootSettings | None = None,
                         log_slope=None):
    """Vectorized root search in t = log v for a decreasing fn(exp(t)).

    Each element's path depends only on its own bracket and function
    values, never on how targets are batched, so results are
    bit-identical across any split of the input.  `t_lo` and `t_hi`
    must bracket every target: fn(exp(t_lo)) >= max(targets) and
    fn(exp(t_hi)) <= min(targets).

    Without `log_slope` the search is plain lockstep bisection.  With
    it (a callback (v, fn(v)) -> d log fn / d log v) brackets are first
    bisected down to unit width in t, then finished by safeguarded
    Newton steps on log fn, which cuts the `fn` evaluations roughly in
    third for smooth tails; any element whose Newton proposal leaves
    its bracket falls back to bisecting that bracket, so the tolerance
    guarantee is unchanged.
    """
    settings = settings or RootSettings()
    targets = np.asarray(targets, dtype=float)
    span = t_hi - t_lo
    tol = settings.rel_tol
    lo = np.full(targets.shape, float(t_lo))
    hi = np.full(targets.shape, float(t_hi))

    if log_slope is None:
        iters = min(settings.max_iter, int(math.ceil(math.log2(span / tol))))
        for _ in range(iters):
            mid = 0.5 * (lo + hi)
            high_side = fn(np.exp(mid)) >= targets
            lo = np.where(high_side, mid, lo)
            hi = np.where(high_side, hi, mid)
        return np.exp(0.5 * (lo + hi))

    for _ in range(max(0, int(math.ceil(math.log2(max(span, 1.0)))))):
        mid = 0.5 * (lo + hi)
        high_side = fn(np.exp(mid)) >= targets
        lo = np.where(high_side, mid, lo)
        hi = np.where(high_side, hi, mid)

    result = 0.5 * (lo + hi)
    t = result.copy()
    log_targets = np.log(targets)
    idx = np.nonzero(hi - lo > tol)[0]
    for _ in range(settings.max_iter):
        if idx.size == 0:
            break
        v = np.exp(t[idx])
        f = fn(v)
        high_side = f >= targets[idx]
        lo[idx] = np.where(high_side, t[idx], lo[idx])
        hi[idx] = np.where(high_side, hi[idx], t[idx])
        with np.errstate(divide="ignore", invalid="ignore"):
            step = (np.log(f) - log_targets[idx]) / log_slope(v, f)
            prop = t[idx] - step
        # Below the normal floating range exp(t) quantizes to a few bits,
        # fn(exp(t)) freezes, and Newton can drift without converging;
        # those elements must bisect to the narrow-bracket exit instead.
        inside = (np.isfinite(prop) & (v >= _DBL_TINY)
                  & (prop > lo[idx]) & (prop < hi[idx]))
        # a Newton step below tolerance pins the root to that accuracy
        settled = inside & (np.abs(step) <= 0.5 * tol)
        narrow = hi[idx] - lo[idx] <= tol
        t[idx] = np.where(inside, prop, 0.5 * (lo[idx] + hi[idx]))
        result[idx] = np.where(narrow, 0.5 * (lo[idx] + hi[idx]), t[idx])
        idx = idx[~(settled | narrow)]
    else:
        if idx.size:
            raise NumericError("log-domain root search failed to settle")
    return np.exp(result)
