"""Decreasing-series trajectory sampler.

Jumps are generated largest first: a standard Poisson process xi_1 <
xi_2 < ... on the positive axis is pushed through the decreasing inverse
of the tail mass, J_i = N^-1(xi_i), and each jump gets an independent
location from the base measure.  Truncating at M therefore keeps exactly
the M largest jumps, and extending M never perturbs the jumps already
drawn (each trajectory owns two private streams, one for the Poisson
arrivals and one for locations).
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .families import CrmSpec, inverse_tail_mass_batch, spec_from_config, spec_to_config

__all__ = [
    "Trajectory",
    "Ensemble",
    "default_thread_count",
    "sample_trajectory",
    "sample_ensemble",
    "ensemble_to_csv",
    "save_ensemble",
    "load_ensemble",
]

CSV_HEADER = "trajectory_id,i,xi,jump,location"

# jumps this small are pure underflow; ordering is not meaningful there
_STRICT_FLOOR = 1e-300

_CACHE_VERSION = 1

_CHUNK = 256


@dataclass(frozen=True)
class Trajectory:
    """One realization: Poisson levels, matched jumps, atom locations."""

    xi: np.ndarray
    jumps: np.ndarray
    locations: np.ndarray

    def __post_init__(self):
        if not (len(self.xi) == len(self.jumps) == len(self.locations)):
            raise ValueError("xi, jumps and locations must share a length")

    def __len__(self):
        return len(self.jumps)

    def prefix(self, m):
        if not 0 < m <= len(self):
            raise ValueError("prefix length out of range")
        return Trajectory(self.xi[:m], self.jumps[:m], self.locations[:m])

    @property
    def total_mass(self):
        return float(self.jumps.sum())


@dataclass(frozen=True)
class Ensemble:
    spec: CrmSpec
    trajectories: list[Trajectory] = field(repr=False)
    master_seed: int
    M: int

    @property
    def n_fk(self):
        return len(self.trajectories)

    def jump_matrix(self):
        return np.stack([t.jumps for t in self.trajectories])

    def prefix(self, m):
        return Ensemble(self.spec, [t.prefix(m) for t in self.trajectories],
                        self.master_seed, m)


def default_thread_count():
    """CRM_FK_THREADS when set, else the CPU count capped at 8."""
    env = os.environ.get("CRM_FK_THREADS")
    if env:
        n = int(env)
        if n < 1:
            raise ValueError("CRM_FK_THREADS must be a positive integer")
        return n
    return min(os.cpu_count() or 1, 8)


def _check_decreasing(jumps):
    # above the underflow floor the series must be strictly decreasing
    live = jumps[..., :-1] > _STRICT_FLOOR
    diffs = np.diff(jumps, axis=-1)
    if np.any(diffs[live] >= 0):
        raise AssertionError("jump series is not strictly decreasing")


def sample_trajectory(spec: CrmSpec, M: int, rng: np.random.Generator):
    """Draw one trajectory of the M largest jumps with their locations."""
    if M < 1:
        raise ValueError("M must be at least 1")
    jump_rng, loc_rng = rng.spawn(2)
    xi = np.cumsum(jump_rng.exponential(size=M))
    jumps = inverse_tail_mass_batch(spec, xi)
    _check_decreasing(jumps)
    locations = spec.base_measure.sample(loc_rng, M)
    return Trajectory(xi=xi, jumps=jumps, locations=locations)


def sample_ensemble(spec: CrmSpec, M: int, n_fk: int, master_seed: int,
                    threads: int | None = None):
    """Draw n_fk independent trajectories, reproducibly.

    Each trajectory is fed from its own child of SeedSequence(master_seed),
    so the output depends only on (spec, M, n_fk, master_seed).  Thread
    count and chunking affect wall time, never content.
    """
    if n_fk < 1:
        raise ValueError("n_fk must be at least 1")
    if M < 1:
        raise ValueError("M must be at least 1")
    threads = threads if threads is not None else default_thread_count()
    children = np.random.SeedSequence(master_seed).spawn(n_fk)
    out: list[Trajectory | None] = [None] * n_fk

    def run_chunk(start):
        stop = min(start + _CHUNK, n_fk)
        rows = []
        loc_rngs = []
        for k in range(start, stop):
            jump_rng, loc_rng = np.random.default_rng(children[k]).spawn(2)
            rows.append(np.cumsum(jump_rng.exponential(size=M)))
            loc_rngs.append(loc_rng)
        xi = np.stack(rows)
        jumps = inverse_tail_mass_batch(spec, xi)
        _check_decreasing(jumps)
        for k in range(start, stop):
            j = k - start
            out[k] = Trajectory(
                xi=xi[j], jumps=jumps[j],
                locations=spec.base_measure.sample(loc_rngs[j], M))

    starts = range(0, n_fk, _CHUNK)
    if threads == 1:
        for s in starts:
            run_chunk(s)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(run_chunk, starts))
    return Ensemble(spec=spec, trajectories=out, master_seed=master_seed, M=M)


# ---------------------------------------------------------------------------
# persistence


def ensemble_to_csv(ensemble: Ensemble, path):
    """Write the flat delimited form, one row per jump.

    Columns are trajectory_id (0-based), i (1-based series index), xi,
    jump, location.  Floats use shortest round-trip formatting.  Only
    scalar locations fit this layout; composite atoms are cache-only.
    """
    first = ensemble.trajectories[0]
    if first.locations.ndim != 1:
        raise ValueError("delimited export needs scalar locations")
    with open(path, "w") as f:
        f.write(CSV_HEADER + "\n")
        for tid, t in enumerate(ensemble.trajectories):
            for i in range(len(t)):
                f.write(f"{tid},{i + 1},{float(t.xi[i])!r},"
                        f"{float(t.jumps[i])!r},{float(t.locations[i])!r}\n")


def save_ensemble(ensemble: Ensemble, path):
    """Versioned binary cache; exact to the bit, unlike the CSV view."""
    with open(path, "wb") as f:
        np.savez_compressed(
            f,
            format_version=_CACHE_VERSION,
            spec_config=json.dumps(spec_to_config(ensemble.spec)),
            master_seed=ensemble.master_seed,
            M=ensemble.M,
            xi=np.stack([t.xi for t in ensemble.trajectories]),
            jumps=np.stack([t.jumps for t in ensemble.trajectories]),
            locations=np.stack([t.locations for t in ensemble.trajectories]),
        )


def load_ensemble(path) -> Ensemble:
    with np.load(path, allow_pickle=False) as z:
        version = int(z["format_version"])
        if version != _CACHE_VERSION:
            raise ValueError(f"cache format {version} is not supported")
        spec = spec_from_config(json.loads(str(z["spec_config"])))
        xi, jumps, locations = z["xi"], z["jumps"], z["locations"]
        trajectories = [
            Trajectory(xi=xi[k], jumps=jumps[k], locations=locations[k])
            for k in range(xi.shape[0])
        ]
        return Ensemble(spec=spec, trajectories=trajectories,
                        master_seed=int(z["master_seed"]), M=int(z["M"]))
