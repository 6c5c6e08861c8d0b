"""Moment-based quality index for series truncation.

The random total mass T of a CRM has cumulants available in closed form
(kappa_i = int v^i rho(dv)), hence exact raw moments through the usual
cumulant-to-moment recursion.  Comparing those with the empirical moments
of the truncated series gives a scalar index

    ell_M = sqrt( (1/K) sum_n (m_n^(1/n) - mhat_n^(1/n))^2 ),

and the smallest M driving ell_M under a target is read off one ensemble
simulated once at the largest M, using each trajectory's prefix sums so
every candidate M sees common random numbers.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from math import comb

import numpy as np

from .families import CrmSpec, cumulant, spec_to_config
from .sampler import Ensemble, sample_ensemble

__all__ = [
    "MomentVector",
    "TruncationReport",
    "moments_from_cumulants",
    "theoretical_moments",
    "empirical_moments",
    "moment_distance",
    "relative_error_index",
    "required_truncation",
]

_K_MAX = 10


@dataclass(frozen=True)
class MomentVector:
    """Raw moments m_1 .. m_K of the total mass, in order."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or not 1 <= len(v) <= _K_MAX:
            raise ValueError(f"expected 1..{_K_MAX} moments in a flat array")
        object.__setattr__(self, "values", v)

    def __len__(self):
        return len(self.values)

    def __getitem__(self, n):
        """Moment of order n, 1-based."""
        return float(self.values[n - 1])


def moments_from_cumulants(kappas) -> MomentVector:
    """m_n = sum_j C(n-1, j) m_j kappa_(n-j), starting from m_0 = 1."""
    kappas = np.asarray(kappas, dtype=float)
    K = len(kappas)
    m = [1.0]
    for n in range(1, K + 1):
        m.append(sum(comb(n - 1, j) * m[j] * kappas[n - j - 1]
                     for j in range(n)))
    return MomentVector(np.array(m[1:]))


def theoretical_moments(spec: CrmSpec, K: int = 4) -> MomentVector:
    if not 1 <= K <= _K_MAX:
        raise ValueError(f"K must lie in 1..{_K_MAX}")
    return moments_from_cumulants([cumulant(spec, i) for i in range(1, K + 1)])


def empirical_moments(ensemble: Ensemble, M: int | None = None,
                      K: int = 4) -> MomentVector:
    """Moments of the truncated total mass, averaged over trajectories."""
    if not 1 <= K <= _K_MAX:
        raise ValueError(f"K must lie in 1..{_K_MAX}")
    M = M if M is not None else ensemble.M
    if not 1 <= M <= ensemble.M:
        raise ValueError("M exceeds the ensemble truncation level")
    totals = np.array([t.jumps[:M].sum() for t in ensemble.trajectories])
    return MomentVector(np.array([np.mean(totals ** n)
                                  for n in range(1, K + 1)]))


def moment_distance(theoretical: MomentVector, empirical: MomentVector) -> float:
    """Root mean square gap between n-th root moments."""
    if len(theoretical) != len(empirical):
        raise ValueError("moment vectors must have equal length")
    n = np.arange(1, len(theoretical) + 1)
    roots_t = theoretical.values ** (1.0 / n)
    roots_e = empirical.values ** (1.0 / n)
    return float(np.sqrt(np.mean((roots_t - roots_e) ** 2)))


def relative_error_index(ensemble: Ensemble, M: int | None = None) -> float:
    """e_M: mean share of the retained mass carried by the last jump."""
    M = M if M is not None else ensemble.M
    if not 1 <= M <= ensemble.M:
        raise ValueError("M exceeds the ensemble truncation level")
    shares = [t.jumps[M - 1] / t.jumps[:M].sum() for t in ensemble.trajectories]
    return float(np.mean(shares))


@dataclass(frozen=True)
class TruncationReport:
    """ell_M and e_M over M = 1 .. M_max from one common-random ensemble."""

    spec: CrmSpec
    ell_target: float
    M_grid: np.ndarray
    ell: np.ndarray
    e: np.ndarray
    resolved_M: int | None
    n_fk: int
    K: int
    master_seed: int

    def to_csv(self, path):
        with open(path, "w") as f:
            f.write("M,ell,e\n")
            for m, l, e in zip(self.M_grid, self.ell, self.e):
                f.write(f"{int(m)},{float(l)!r},{float(e)!r}\n")

    def to_json(self, path):
        doc = {
            "spec": spec_to_config(self.spec),
            "ell_target": self.ell_target,
            "resolved_M": self.resolved_M,
            "n_fk": self.n_fk,
            "K": self.K,
            "master_seed": self.master_seed,
            "M": [int(m) for m in self.M_grid],
            "ell": [float(x) for x in self.ell],
            "e": [float(x) for x in self.e],
        }
        with open(path, "w") as f:
            json.dump(doc, f, indent=1)


def required_truncation(spec: CrmSpec, ell_target: float, M_max: int,
                        n_fk: int = 10_000, K: int = 4, master_seed: int = 0,
                        threads: int | None = None) -> TruncationReport:
    """Smallest M with ell_M <= ell_target, scanned on prefix sums.

    One ensemble is drawn at M_max and every candidate M reuses its
    trajectories, so the reported curve is monotone in sampling noise
    rather than re-randomized per M.  resolved_M is None when even M_max
    leaves the index above target.
    """
    if ell_target <= 0:
        raise ValueError("ell_target must be positive")
    ensemble = sample_ensemble(spec, M_max, n_fk, master_seed, threads=threads)
    theo = theoretical_moments(spec, K).values
    orders = np.arange(1, K + 1)
    roots_t = theo ** (1.0 / orders)

    J = ensemble.jump_matrix()
    T = np.cumsum(J, axis=1)
    sq_acc = np.zeros(M_max)
    for n in range(1, K + 1):
        mhat = np.mean(T ** n, axis=0)
        sq_acc += (roots_t[n - 1] - mhat ** (1.0 / n)) ** 2
    ell = np.sqrt(sq_acc / K)
    e = np.mean(J / T, axis=0)

    hits = np.nonzero(ell <= ell_target)[0]
    resolved = int(hits[0]) + 1 if hits.size else None
    return TruncationReport(
        spec=spec, ell_target=ell_target,
        M_grid=np.arange(1, M_max + 1), ell=ell, e=e,
        resolved_M=resolved, n_fk=n_fk, K=K, master_seed=master_seed)
