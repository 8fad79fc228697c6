"""Empirical CCDFs by the Weibull plotting-position recipe, plus comparison
statistics (KS distance, sliding log-log slopes)."""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import PreconditionError

__all__ = [
    "Source",
    "IncomeSample",
    "EmpiricalCCDF",
    "build_ccdf",
    "ks_distance",
    "local_log_slope",
]


class Source(enum.Enum):
    SURVEY = "survey"
    RICHLIST = "richlist"


@dataclass(frozen=True)
class IncomeSample:
    """One income observation with its provenance."""

    income: float
    source: Source = Source.SURVEY
    year: int | None = None

    def __post_init__(self):
        if not np.isfinite(self.income):
            raise PreconditionError("income must be finite")
        if self.source is Source.RICHLIST and not self.income > 0:
            raise PreconditionError("rich-list effective incomes must be positive")


def _income_array(samples) -> np.ndarray:
    if isinstance(samples, np.ndarray) and samples.dtype != object:
        return samples.astype(float, copy=True)
    seq = list(samples)
    if seq and isinstance(seq[0], IncomeSample):
        return np.array([s.income for s in seq], dtype=float)
    return np.asarray(seq, dtype=float)


@dataclass(frozen=True)
class EmpiricalCCDF:
    """Rank-based CCDF: one point per sample, no binning.

    The i-th smallest of N incomes (1-indexed) sits at probability
    1 - i/(N+1); equal incomes keep their distinct rank positions.
    """

    sorted_incomes: np.ndarray
    plot_positions: np.ndarray

    def __post_init__(self):
        inc = np.asarray(self.sorted_incomes, dtype=float)
        pos = np.asarray(self.plot_positions, dtype=float)
        if inc.shape != pos.shape or inc.ndim != 1:
            raise PreconditionError("incomes and positions must be equal-length vectors")
        if np.any(np.diff(inc) < 0):
            raise PreconditionError("incomes must be sorted ascending")
        if np.any(pos <= 0) or np.any(pos >= 1) or np.any(np.diff(pos) >= 0):
            raise PreconditionError("positions must be strictly decreasing within (0,1)")
        inc.setflags(write=False)
        pos.setflags(write=False)
        object.__setattr__(self, "sorted_incomes", inc)
        object.__setattr__(self, "plot_positions", pos)

    def __len__(self) -> int:
        return len(self.sorted_incomes)


def build_ccdf(samples) -> EmpiricalCCDF:
    """Sort ascending, then attach Weibull positions 1 - i/(N+1).

    Accepts IncomeSample records or raw income values. Output size equals
    input size; ties are not collapsed.
    """
    incomes = _income_array(samples)
    n = len(incomes)
    if n < 2:
        raise PreconditionError("need at least 2 samples to build a CCDF")
    incomes.sort(kind="stable")
    ranks = np.arange(1, n + 1, dtype=float)
    return EmpiricalCCDF(incomes, 1.0 - ranks / (n + 1))


def ks_distance(ecdf: EmpiricalCCDF, model) -> float:
    """sup over the plotted points of |position - model(income)|."""
    if len(ecdf) == 0:
        raise PreconditionError("empty empirical CCDF")
    try:
        mod = np.asarray(model(ecdf.sorted_incomes), dtype=float)
        if mod.shape != ecdf.sorted_incomes.shape:
            raise TypeError
    except (TypeError, ValueError):
        mod = np.array([float(model(m)) for m in ecdf.sorted_incomes])
    return float(np.max(np.abs(ecdf.plot_positions - mod)))


def local_log_slope(ecdf: EmpiricalCCDF, window: int) -> list[tuple[float, float]]:
    """Sliding least-squares slope of log(position) against log(income).

    Windows with no income spread or with non-positive incomes carry no
    log-log slope; they are skipped and counted in a single notice.
    """
    n = len(ecdf)
    if window < 3:
        raise PreconditionError("window must be at least 3 points")
    if window > n:
        raise PreconditionError("window exceeds the number of points")
    m = ecdf.sorted_incomes
    w = window
    positive = m > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        lx = np.where(positive, np.log(np.where(positive, m, 1.0)), 0.0)
    ly = np.log(ecdf.plot_positions)
    lx_c = lx - lx[positive].mean() if positive.any() else lx
    ly_c = ly - ly.mean()

    def sliding(v):
        c = np.concatenate([[0.0], np.cumsum(v)])
        return c[w:] - c[:-w]

    sx, sy = sliding(lx_c), sliding(ly_c)
    sxx, sxy = sliding(lx_c * lx_c), sliding(lx_c * ly_c)
    var = sxx - sx * sx / w
    cov = sxy - sx * sy / w
    starts = np.arange(n - w + 1)
    # sorted incomes: a window is degenerate iff its endpoints coincide
    flat = m[starts + w - 1] == m[starts]
    nonpos = sliding((~positive).astype(float)) > 0
    bad = flat | nonpos
    n_skipped = int(bad.sum())
    if n_skipped:
        warnings.warn(f"local_log_slope: skipped {n_skipped} degenerate window(s)")
    centers = m[starts + (w - 1) // 2]
    out = []
    for i in starts[~bad]:
        out.append((float(centers[i]), float(cov[i] / var[i])))
    return out
