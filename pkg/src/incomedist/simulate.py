"""Euler-Maruyama ensemble simulation of the threshold Langevin dynamics.

The Fokker-Planck form +d/dm[A P] fixes the SDE drift at -A(m); diffusion
enters through C(m) = sqrt(2 B(m)). A reflecting boundary at m_init keeps
the stationary flux zero, which is exactly the regime the closed-form
density solves.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import NumericsError, PreconditionError
from .model import MicroParams, diffusion_B, drift_A

__all__ = [
    "Boundary",
    "SimConfig",
    "StationaryHistogram",
    "SimResult",
    "step",
    "run",
]


class Boundary(enum.Enum):
    REFLECT_AT_M_INIT = "reflect_at_m_init"


def _max_rate(p: MicroParams) -> float:
    """Largest inverse time scale among the drift/diffusion coefficients."""
    return max(abs(p.a), abs(p.ap), p.b, p.A0 * p.A0 / p.B0, p.A0p * p.A0p / p.B0)


@dataclass(frozen=True)
class SimConfig:
    """Ensemble settings; omitted dt / burn_in / sample_every fall back to
    0.01 over the fastest rate, 10^6 steps, and roughly one relaxation
    time respectively."""

    params: MicroParams
    seed: int
    n_walkers: int = 1024
    dt: float = None
    burn_in: int = None
    sample_every: int = None
    total_samples: int = 100_000
    boundary: Boundary = Boundary.REFLECT_AT_M_INIT

    def __post_init__(self):
        p = self.params
        if not isinstance(p, MicroParams):
            raise PreconditionError("params must be MicroParams")
        if not isinstance(self.seed, (int, np.integer)):
            raise PreconditionError("an integer seed is required")
        rate = _max_rate(p)
        if self.dt is None:
            object.__setattr__(self, "dt", 0.01 / rate)
        if not (isinstance(self.dt, (int, float)) and self.dt > 0):
            raise PreconditionError("dt must be positive")
        coeff_rate = max(abs(p.a), abs(p.ap), p.b)
        if coeff_rate > 0 and not self.dt < 0.1 / coeff_rate:
            raise PreconditionError(
                f"unstable step: dt={self.dt:g} but stability requires "
                f"dt < {0.1 / coeff_rate:g}"
            )
        if self.burn_in is None:
            object.__setattr__(self, "burn_in", 1_000_000)
        if self.sample_every is None:
            object.__setattr__(self, "sample_every",
                               max(1, math.ceil(1.0 / (self.dt * rate))))
        if self.burn_in < 0 or self.sample_every < 1:
            raise PreconditionError("burn_in must be >= 0 and sample_every >= 1")
        if self.n_walkers < 1:
            raise PreconditionError("need at least one walker")
        if self.total_samples < 1:
            raise PreconditionError("need at least one retained sample")
        if self.boundary is not Boundary.REFLECT_AT_M_INIT:
            raise PreconditionError(f"unsupported boundary {self.boundary!r}")


@dataclass(frozen=True)
class StationaryHistogram:
    """Log-binned density estimate; densities integrate to 1 exactly by
    renormalization at construction."""

    bin_edges: np.ndarray
    counts: np.ndarray
    densities: np.ndarray

    def __post_init__(self):
        edges = np.asarray(self.bin_edges, dtype=float)
        counts = np.asarray(self.counts)
        dens = np.asarray(self.densities, dtype=float)
        if len(edges) != len(counts) + 1 or len(counts) != len(dens):
            raise PreconditionError("histogram arrays have inconsistent lengths")
        total = float(np.sum(dens * np.diff(edges)))
        if abs(total - 1.0) > 1e-12:
            raise PreconditionError(f"densities integrate to {total!r}, not 1")
        for arr in (edges, counts, dens):
            arr.setflags(write=False)
        object.__setattr__(self, "bin_edges", edges)
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "densities", dens)

    @classmethod
    def from_samples(cls, samples, n_bins: int = 200, edges=None):
        x = np.asarray(samples, dtype=float)
        if x.size == 0:
            raise PreconditionError("no samples to bin")
        if edges is None:
            lo = float(x.min())
            hi = float(x.max())
            if lo <= 0.0:
                positive = x[x > 0]
                if positive.size == 0:
                    raise PreconditionError("log binning needs positive samples")
                lo = float(positive.min())
            if lo == hi:
                lo, hi = lo * (1.0 - 1e-9), hi * (1.0 + 1e-9)
            edges = np.geomspace(lo, hi, n_bins + 1)
        edges = np.asarray(edges, dtype=float)
        counts, _ = np.histogram(x, bins=edges)
        widths = np.diff(edges)
        kept = counts.sum()
        if kept == 0:
            raise PreconditionError("all samples fall outside the bin edges")
        dens = counts / (kept * widths)
        dens /= float(np.sum(dens * widths))
        return cls(edges, counts, dens)


@dataclass(frozen=True)
class SimResult:
    """run() output: the retained samples and their log-binned histogram."""

    samples: np.ndarray
    histogram: StationaryHistogram
    config: SimConfig


def step(m, p: MicroParams, dt: float, noise):
    """One Euler-Maruyama update with reflection about m_init."""
    m_arr = np.asarray(m, dtype=float)
    if np.any(m_arr < p.m_init):
        raise PreconditionError("walker below m_init before step")
    z = np.asarray(noise, dtype=float)
    drift = drift_A(m_arr, p)
    diff = diffusion_B(m_arr, p)
    out = m_arr - drift * dt + np.sqrt(2.0 * diff * dt) * z
    out = np.where(out < p.m_init, 2.0 * p.m_init - out, out)
    bad = ~np.isfinite(out)
    if np.any(bad):
        idx = np.nonzero(np.atleast_1d(bad))[0][:5]
        raise NumericsError(
            f"non-finite walker position(s) at indices {idx.tolist()} "
            f"(dt={dt:g}); reduce dt"
        )
    return float(out) if np.ndim(m) == 0 else out


def _initial_positions(config: SimConfig, rng) -> np.ndarray:
    p = config.params
    if p.A0 > 0:
        spread = p.B0 / p.A0
    else:
        spread = math.sqrt(p.B0 / p.b)
    return p.m_init + spread * rng.random(config.n_walkers)


def run(config: SimConfig) -> SimResult:
    """Burn in, then record the ensemble every sample_every steps until
    total_samples positions are retained. Deterministic for a given seed."""
    p = config.params
    rng = np.random.default_rng(config.seed)
    m = _initial_positions(config, rng)
    n = config.n_walkers
    for _ in range(config.burn_in):
        m = step(m, p, config.dt, rng.standard_normal(n))
    chunks = []
    collected = 0
    while collected < config.total_samples:
        for _ in range(config.sample_every):
            m = step(m, p, config.dt, rng.standard_normal(n))
        chunks.append(m.copy())
        collected += n
    samples = np.concatenate(chunks)[: config.total_samples]
    hist = StationaryHistogram.from_samples(samples)
    return SimResult(samples=samples, histogram=hist, config=config)
