"""Jump-intensity families and their tail-mass machinery.

A completely random measure is described here by its Levy intensity
rho(dv) P*(dx).  Two parametric groups are supported:

  generalized gamma   rho(dv) = a / Gamma(1-gamma) v^(-1-gamma) e^(-theta v) dv
                      with gamma in [0, 1); gamma = 0 is the gamma process
                      and gamma = 1/2 the inverse-Gaussian process
  stable beta         rho(dv) = a B(1, c)^-1-ish normalization
                      a Gamma(c+1) / (Gamma(1-sigma) Gamma(c+sigma))
                      v^(-1-sigma) (1-v)^(c+sigma-1) dv on (0, 1),
                      sigma = 0 being the plain beta process

The decreasing-series sampler needs N(v) = rho((v, inf)) and its inverse,
both provided here in scalar and batched form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import integrate, special

from .numerics import (
    NumericError,
    QuadratureSettings,
    RootSettings,
    ascending_factorial,
    invert_monotone_decreasing,
    sbp_tail_integral,
    solve_decreasing_log,
    upper_incomplete_gamma,
)

__all__ = [
    "BaseMeasure",
    "CrmSpec",
    "GG_FAMILIES",
    "SBP_FAMILIES",
    "tail_mass",
    "inverse_tail_mass",
    "inverse_tail_mass_batch",
    "cumulant",
    "cumulant_by_quadrature",
    "levy_density",
    "laplace_exponent",
    "spec_to_config",
    "spec_from_config",
]

GG_FAMILIES = ("gamma", "inverse_gaussian", "generalized_gamma")
SBP_FAMILIES = ("beta", "stable_beta")

# exp underflows to 0 below this, so log-jumps are searched in
# [_LOG_FLOOR, family-specific ceiling]
_LOG_FLOOR = -745.0


@dataclass(frozen=True)
class BaseMeasure:
    """Where the atoms live.  kind selects the sampler for locations."""

    kind: str = "uniform"
    params: tuple[float, ...] = (0.0, 1.0)
    path: str | None = None
    _values: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in ("uniform", "normal", "normal_inverse_gamma", "empirical"):
            raise ValueError(f"unknown base measure kind {self.kind!r}")
        if self.kind == "uniform":
            lo, hi = self.params
            if not lo < hi:
                raise ValueError("uniform base needs lo < hi")
        elif self.kind == "normal":
            if self.params[1] <= 0:
                raise ValueError("normal base needs sd > 0")
        elif self.kind == "normal_inverse_gamma":
            m0, kappa0, alpha0, beta0 = self.params
            if min(kappa0, alpha0, beta0) <= 0:
                raise ValueError("normal_inverse_gamma base needs positive "
                                 "kappa0, alpha0, beta0")
        elif self.kind == "empirical":
            if self.path is None and self._values is None:
                raise ValueError("empirical base needs a file path")

    @staticmethod
    def empirical(path):
        vals = np.loadtxt(path, dtype=float, ndmin=1)
        return BaseMeasure(kind="empirical", params=(), path=str(path),
                           _values=vals)

    @property
    def dim(self):
        return 2 if self.kind == "normal_inverse_gamma" else 1

    def sample(self, rng, size):
        if self.kind == "uniform":
            lo, hi = self.params
            return rng.uniform(lo, hi, size)
        if self.kind == "normal":
            m, s = self.params
            return rng.normal(m, s, size)
        if self.kind == "normal_inverse_gamma":
            m0, kappa0, alpha0, beta0 = self.params
            var = beta0 / rng.gamma(alpha0, 1.0, size)
            mu = rng.normal(m0, np.sqrt(var / kappa0))
            return np.column_stack([mu, var])
        vals = self._values
        if vals is None:
            vals = np.loadtxt(self.path, dtype=float, ndmin=1)
            object.__setattr__(self, "_values", vals)
        return rng.choice(vals, size)


@dataclass(frozen=True)
class CrmSpec:
    """Immutable description of one CRM.

    Use the per-family constructors; the bare constructor does not fill
    in linked parameters (a gamma process is generalized gamma with the
    index pinned to zero, and so on).
    """

    family: str
    a: float
    gamma: float | None = None
    theta: float | None = None
    c: float | None = None
    sigma: float | None = None
    base_measure: BaseMeasure = field(default_factory=BaseMeasure)

    def __post_init__(self):
        if self.a <= 0:
            raise ValueError("total mass a must be positive")
        if self.family in GG_FAMILIES:
            if self.gamma is None or not 0.0 <= self.gamma < 1.0:
                raise ValueError("gamma must lie in [0, 1)")
            if self.family == "gamma" and self.gamma != 0.0:
                raise ValueError("the gamma process has index 0")
            if self.family == "inverse_gaussian" and self.gamma != 0.5:
                raise ValueError("the inverse-Gaussian process has index 1/2")
            if self.theta is None or self.theta <= 0:
                raise ValueError("theta must be positive")
        elif self.family in SBP_FAMILIES:
            if self.sigma is None or not 0.0 <= self.sigma < 1.0:
                raise ValueError("sigma must lie in [0, 1)")
            if self.family == "beta" and self.sigma != 0.0:
                raise ValueError("the beta process has sigma = 0")
            if self.c is None or self.c + self.sigma <= 0:
                raise ValueError("c + sigma must be positive")
        else:
            raise ValueError(f"unknown family {self.family!r}")

    # -- constructors -------------------------------------------------

    @staticmethod
    def gamma_process(a, theta=1.0, base_measure=None):
        return CrmSpec("gamma", a, gamma=0.0, theta=theta,
                       base_measure=base_measure or BaseMeasure())

    @staticmethod
    def inverse_gaussian(a, theta=1.0, base_measure=None):
        return CrmSpec("inverse_gaussian", a, gamma=0.5, theta=theta,
                       base_measure=base_measure or BaseMeasure())

    @staticmethod
    def generalized_gamma(a, gamma, theta=1.0, base_measure=None):
        return CrmSpec("generalized_gamma", a, gamma=gamma, theta=theta,
                       base_measure=base_measure or BaseMeasure())

    @staticmethod
    def beta_process(a, c, base_measure=None):
        return CrmSpec("beta", a, c=c, sigma=0.0,
                       base_measure=base_measure or BaseMeasure())

    @staticmethod
    def stable_beta(a, c, sigma, base_measure=None):
        return CrmSpec("stable_beta", a, c=c, sigma=sigma,
                       base_measure=base_measure or BaseMeasure())

    def with_base(self, base_measure):
        return replace(self, base_measure=base_measure)


def _sbp_norm(a, c, sigma):
    # a Gamma(c+1) / (Gamma(1-sigma) Gamma(c+sigma)), in log-ratio form so
    # large c does not overflow the intermediate gammas.
    return a * math.exp(special.gammaln(c + 1.0) - special.gammaln(c + sigma)) \
        / special.gamma(1.0 - sigma)


def tail_mass(spec: CrmSpec, v):
    """N(v) = rho((v, inf)): expected number of jumps exceeding v.

    Vectorized over `v`.  Decreasing, -> 0 at the right edge of the
    support, -> infinity as v -> 0 (all supported intensities are
    infinite-activity).
    """
    v_arr = np.asarray(v, dtype=float)
    if np.any(v_arr <= 0.0):
        raise ValueError("tail mass is defined for v > 0")
    if spec.family in GG_FAMILIES:
        g, th = spec.gamma, spec.theta
        out = spec.a * th ** g / special.gamma(1.0 - g) \
            * upper_incomplete_gamma(-g, th * v_arr)
    else:
        out = np.zeros_like(np.atleast_1d(v_arr))
        inside = np.atleast_1d(v_arr) < 1.0
        if np.any(inside):
            out[inside] = _sbp_norm(spec.a, spec.c, spec.sigma) \
                * sbp_tail_integral(np.atleast_1d(v_arr)[inside],
                                    spec.sigma, spec.c)
        out = out.reshape(v_arr.shape)
    return out if isinstance(v, np.ndarray) else float(out)


def _log_bracket_hi(spec: CrmSpec):
    # A right end t_hi with N(exp(t_hi)) below any target that can occur in
    # double precision.  For the exponential-tilted group, N(746/theta) is
    # already under 1e-320; the stable-beta support ends at 1.
    if spec.family in GG_FAMILIES:
        return math.log(746.0) - math.log(spec.theta)
    return 0.0


def _closed_inverse(spec: CrmSpec, xi):
    # At c = 1 - sigma the stable-beta tail is elementary:
    # N(v) = a (1-sigma)(v^-sigma - 1)/sigma, limiting to -a log v, so the
    # inverse needs no iteration at all.
    if spec.family not in SBP_FAMILIES or spec.c != 1.0 - spec.sigma:
        return None
    s, a = spec.sigma, spec.a
    if s == 0.0:
        return np.exp(-xi / a)
    return (1.0 + s * xi / (a * (1.0 - s))) ** (-1.0 / s)


def _log_slope(spec: CrmSpec):
    # d log N / d log v = -v rho(v) / N(v), reusing the N already in hand.
    # v rho(v) is fused so its v^(-1-gamma) factor cannot overflow at the
    # bracket floor; the rare non-finite slope degenerates to a bisection
    # step in the solver, so the edges of the bracket stay safe.
    if spec.family in GG_FAMILIES:
        pref = spec.a / special.gamma(1.0 - spec.gamma)
        g, th = spec.gamma, spec.theta

        def slope(v, n_of_v):
            with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
                return -pref * v ** -g * np.exp(-th * v) / n_of_v
    else:
        pref = _sbp_norm(spec.a, spec.c, spec.sigma)
        s, q1 = spec.sigma, spec.c + spec.sigma - 1.0

        def slope(v, n_of_v):
            with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
                return -pref * v ** -s * np.exp(q1 * np.log1p(-v)) / n_of_v
    return slope


def inverse_tail_mass(spec: CrmSpec, xi, prev_jump=None,
                      settings: RootSettings | None = None):
    """The decreasing inverse N^-1(xi), one scalar at a time.

    `prev_jump`, when given, must be a jump already known to satisfy
    N(prev_jump) <= xi; it tightens the search bracket from the right.
    """
    if xi <= 0.0:
        raise ValueError("xi must be positive")
    closed = _closed_inverse(spec, xi)
    if closed is not None:
        return float(closed)
    t_hi = _log_bracket_hi(spec)
    if prev_jump is not None:
        t_hi = min(t_hi, math.log(prev_jump))
    out = solve_decreasing_log(lambda w: tail_mass(spec, w),
                               np.array([xi]), _LOG_FLOOR, t_hi, settings,
                               log_slope=_log_slope(spec))
    return float(out[0])


def inverse_tail_mass_batch(spec: CrmSpec, xi,
                            settings: RootSettings | None = None):
    """N^-1 applied elementwise to an array of positive levels.

    Every element is solved in lockstep from the same family-wide bracket,
    so results are bit-identical however the input is split into batches.
    Levels beyond N(exp(-745)) (possible only for extreme xi) clamp to the
    bracket edge, which is indistinguishable from zero downstream.
    """
    xi = np.asarray(xi, dtype=float)
    if np.any(xi <= 0.0):
        raise ValueError("xi must be positive")
    closed = _closed_inverse(spec, xi)
    if closed is not None:
        return closed
    flat = solve_decreasing_log(lambda w: tail_mass(spec, w), xi.ravel(),
                                _LOG_FLOOR, _log_bracket_hi(spec), settings,
                                log_slope=_log_slope(spec))
    return flat.reshape(xi.shape)


def cumulant(spec: CrmSpec, i: int):
    """i-th cumulant of the total mass, kappa_i = int v^i rho(dv)."""
    if i < 1:
        raise ValueError("cumulant order starts at 1")
    if spec.family in GG_FAMILIES:
        g, th = spec.gamma, spec.theta
        return spec.a * ascending_factorial(1.0 - g, i - 1) / th ** (i - g)
    return spec.a * ascending_factorial(1.0 - spec.sigma, i - 1) \
        / ascending_factorial(spec.c + 1.0, i - 1)


def levy_density(spec: CrmSpec, v):
    """rho(v), the Levy intensity density, vectorized."""
    v_arr = np.asarray(v, dtype=float)
    if spec.family in GG_FAMILIES:
        g, th = spec.gamma, spec.theta
        out = spec.a / special.gamma(1.0 - g) \
            * v_arr ** (-1.0 - g) * np.exp(-th * v_arr)
    else:
        s, c = spec.sigma, spec.c
        flat = np.atleast_1d(v_arr).astype(float)
        out = np.zeros_like(flat)
        inside = (flat > 0.0) & (flat < 1.0)
        out[inside] = _sbp_norm(spec.a, c, s) * flat[inside] ** (-1.0 - s) \
            * np.exp((c + s - 1.0) * np.log1p(-flat[inside]))
        out = out.reshape(v_arr.shape)
    return out if isinstance(v, np.ndarray) else float(out)


def cumulant_by_quadrature(spec: CrmSpec, i: int,
                           settings: QuadratureSettings | None = None):
    """int v^i rho(dv) by adaptive quadrature; cross-check for cumulant."""
    settings = settings or QuadratureSettings()
    if spec.family in GG_FAMILIES:
        g, th = spec.gamma, spec.theta
        pref = spec.a / special.gamma(1.0 - g)
        # v^-gamma endpoint singularity handled by the algebraic weight on
        # [0, 1]; the rest of the line is smooth.
        head, _ = integrate.quad(
            lambda v: pref * v ** (i - 1) * math.exp(-th * v),
            0.0, 1.0, weight="alg", wvar=(-g, 0.0),
            epsrel=settings.rel_tol, epsabs=settings.abs_tol,
            limit=settings.max_subdivisions)
        tail, _ = integrate.quad(
            lambda v: v ** i * levy_density(spec, v), 1.0, np.inf,
            epsrel=settings.rel_tol, epsabs=settings.abs_tol,
            limit=settings.max_subdivisions)
        return head + tail
    s, c = spec.sigma, spec.c
    # pull the endpoint powers into quad's algebraic weight
    val, _ = integrate.quad(
        lambda v: _sbp_norm(spec.a, c, s) * v ** (i - 1),
        0.0, 1.0, weight="alg", wvar=(-s, c + s - 1.0),
        epsrel=settings.rel_tol, epsabs=settings.abs_tol,
        limit=settings.max_subdivisions)
    return val


def laplace_exponent(spec: CrmSpec, u,
                     settings: QuadratureSettings | None = None):
    """psi(u) = int (1 - e^(-u v)) rho(dv), vectorized over u >= 0.

    Closed form for the exponential-tilted group, adaptive quadrature on
    (0, 1) for the stable-beta group.
    """
    u_arr = np.asarray(u, dtype=float)
    if np.any(u_arr < 0.0):
        raise ValueError("the Laplace exponent is evaluated at u >= 0")
    if spec.family in GG_FAMILIES:
        g, th = spec.gamma, spec.theta
        if g == 0.0:
            out = spec.a * np.log1p(u_arr / th)
        else:
            out = spec.a / g * ((th + u_arr) ** g - th ** g)
        return out if isinstance(u, np.ndarray) else float(out)
    settings = settings or QuadratureSettings()
    s, c = spec.sigma, spec.c
    norm = _sbp_norm(spec.a, c, s)

    def one(uu):
        if uu == 0.0:
            return 0.0

        def integrand(v):
            # (1 - e^(-u v)) / v, continuous at 0 with limit u
            if uu * v == 0.0:
                return norm * uu
            return norm * -special.expm1(-uu * v) / v

        val, _ = integrate.quad(
            integrand, 0.0, 1.0, weight="alg", wvar=(-s, c + s - 1.0),
            epsrel=settings.rel_tol, epsabs=settings.abs_tol,
            limit=settings.max_subdivisions)
        return val

    if isinstance(u, np.ndarray):
        return np.array([one(float(x)) for x in u_arr.ravel()]).reshape(u_arr.shape)
    return one(float(u_arr))


# ---------------------------------------------------------------------------
# flat key-value serialization, used by manifests and config files


def spec_to_config(spec: CrmSpec) -> dict[str, str]:
    cfg = {"family": spec.family, "a": repr(spec.a)}
    if spec.family in GG_FAMILIES:
        cfg["gamma"] = repr(spec.gamma)
        cfg["theta"] = repr(spec.theta)
    else:
        cfg["c"] = repr(spec.c)
        cfg["sigma"] = repr(spec.sigma)
    bm = spec.base_measure
    cfg["base"] = bm.kind
    if bm.kind == "empirical":
        cfg["base_path"] = bm.path or ""
    elif bm.params:
        cfg["base_params"] = ",".join(repr(p) for p in bm.params)
    return cfg


def spec_from_config(cfg) -> CrmSpec:
    family = cfg["family"].strip().lower().replace("-", "_")
    kw = {"a": float(cfg["a"])}
    if family in GG_FAMILIES:
        kw["theta"] = float(cfg.get("theta", 1.0))
        if family == "generalized_gamma":
            kw["gamma"] = float(cfg["gamma"])
        elif family == "gamma":
            kw["gamma"] = 0.0
        else:
            kw["gamma"] = 0.5
    elif family in SBP_FAMILIES:
        kw["c"] = float(cfg["c"])
        kw["sigma"] = float(cfg.get("sigma", 0.0)) if family == "stable_beta" else 0.0
    else:
        raise ValueError(f"unknown family {cfg['family']!r}")
    kind = cfg.get("base", "uniform").strip().lower()
    if kind == "empirical":
        base = BaseMeasure.empirical(cfg["base_path"])
    else:
        defaults = {"uniform": (0.0, 1.0), "normal": (0.0, 1.0),
                    "normal_inverse_gamma": (0.0, 0.01, 2.0, 1.0)}
        raw = cfg.get("base_params", "")
        params = tuple(float(x) for x in raw.split(",")) if raw else defaults[kind]
        base = BaseMeasure(kind=kind, params=params)
    return CrmSpec(family, base_measure=base, **kw)
