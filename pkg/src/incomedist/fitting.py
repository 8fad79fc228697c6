"""Three-step fit: crossover detection, temperature regression, and the
two weak-Pareto regressions.

Crossovers come from a deterministic grid search over empirical-quantile
candidate pairs, scored by the summed squared residuals of the three
segment regressions. All regressions are unweighted least squares on
log positions, matching a straight-edge fit on the published log-log
plots rather than maximum likelihood.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .empirical import EmpiricalCCDF, build_ccdf
from .errors import PreconditionError
from .model import EffectiveParams

__all__ = [
    "CrossoverResult",
    "TemperatureFit",
    "ParetoFit",
    "FitReport",
    "detect_crossovers",
    "fit_temperature",
    "fit_pareto",
    "fit_pipeline",
]

MIN_WINDOW_POINTS = 30
GUARD_FRACTION = 0.10       # clearance around each crossover, Pareto side
_N_CANDIDATES = 60          # per crossover; tail quantiles 50% .. 99.99%
# stability contract: refining the sample (a full doubling) must stay
# within the reported error ~95% of the time. A doubling moves an
# estimate by about its own standard deviation on top of drift, so the
# quoted error carries a factor 2 over the plain quadrature sum.
_REFINE_COVERAGE = 2.0


@dataclass(frozen=True)
class CrossoverResult:
    """Estimated crossover pair with profile (residual-curvature) errors."""

    m0: float
    m1: float
    m0_rel_se: float
    m1_rel_se: float
    no_high_income_regime: bool = False

    def __iter__(self):
        return iter((self.m0, self.m1))


@dataclass(frozen=True)
class TemperatureFit:
    temperature: float
    stderr: float
    r_squared: float
    n_points: int
    window: tuple
    slope: float


@dataclass(frozen=True)
class ParetoFit:
    exponent: float
    scale: float
    stderr: float
    r_squared: float
    n_points: int
    window: tuple


@dataclass(frozen=True)
class FitReport:
    params: EffectiveParams
    windows: dict
    r_squared: dict
    std_errors: dict
    infinite_variance_flag: bool
    crossover_uncertainty: float
    no_high_income_regime: bool
    notes: tuple


class _SegmentSums:
    """Prefix sums enabling O(1) least squares on any index range, in both
    (income, log position) and (log income, log position) coordinates."""

    def __init__(self, ecdf: EmpiricalCCDF):
        x = ecdf.sorted_incomes
        if np.any(x <= 0):
            raise PreconditionError("regressions need positive incomes")
        self.x = x
        self.lx = np.log(x)
        self.ly = np.log(ecdf.plot_positions)
        # center to tame cancellation in the prefix differences
        self.x0 = float(self.x.mean())
        self.lx0 = float(self.lx.mean())
        self.ly0 = float(self.ly.mean())
        xc, lxc, lyc = self.x - self.x0, self.lx - self.lx0, self.ly - self.ly0
        z = lambda v: np.concatenate([[0.0], np.cumsum(v)])
        self.sx, self.sxx = z(xc), z(xc * xc)
        self.slx, self.slxlx = z(lxc), z(lxc * lxc)
        self.sy, self.syy = z(lyc), z(lyc * lyc)
        self.sxy, self.slxy = z(xc * lyc), z(lxc * lyc)

    def _stats(self, i: int, j: int, log_x: bool):
        n = j - i
        if log_x:
            su, suu = self.slx[j] - self.slx[i], self.slxlx[j] - self.slxlx[i]
            suv = self.slxy[j] - self.slxy[i]
        else:
            su, suu = self.sx[j] - self.sx[i], self.sxx[j] - self.sxx[i]
            suv = self.sxy[j] - self.sxy[i]
        sv, svv = self.sy[j] - self.sy[i], self.syy[j] - self.syy[i]
        duu = suu - su * su / n
        dvv = svv - sv * sv / n
        duv = suv - su * sv / n
        return n, su, sv, duu, dvv, duv

    def regress(self, i: int, j: int, log_x: bool):
        """Slope, intercept (in uncentered coordinates), ssr, r^2 on [i, j)."""
        n, su, sv, duu, dvv, duv = self._stats(i, j, log_x)
        if duu <= 0:
            raise PreconditionError("window has no income spread")
        slope = duv / duu
        ssr = max(dvv - slope * duv, 0.0)
        r2 = 1.0 - ssr / dvv if dvv > 0 else 1.0
        u0 = self.lx0 if log_x else self.x0
        intercept = (sv / n + self.ly0) - slope * (su / n + u0)
        return slope, intercept, ssr, r2

    def ssr(self, i: int, j: int, log_x: bool) -> float:
        n, _, _, duu, dvv, duv = self._stats(i, j, log_x)
        if duu <= 0:
            return dvv
        return max(dvv - duv * duv / duu, 0.0)


def _lag1_inflation(residuals: np.ndarray) -> float:
    """Variance inflation (1+rho)/(1-rho) from lag-1 residual correlation;
    plotted positions are strongly dependent, iid errors are a fiction."""
    r = residuals - residuals.mean()
    denom = float(np.dot(r, r))
    if len(r) < 3 or denom <= 0:
        return 1.0
    rho = float(np.dot(r[:-1], r[1:])) / denom
    rho = min(max(rho, 0.0), 0.99)
    return (1.0 + rho) / (1.0 - rho)


def _window_indices(x: np.ndarray, lo: float, hi: float) -> tuple:
    return int(np.searchsorted(x, lo, side="left")), int(np.searchsorted(x, hi, side="right"))


def _segment_bounds(x, c0: float, c1: float, guard: float):
    """Index ranges of the three regression windows for a candidate pair."""
    n = len(x)
    hi0 = int(np.searchsorted(x, c0, side="right"))
    lo1 = int(np.searchsorted(x, c0 * (1.0 + guard), side="left"))
    hi1 = int(np.searchsorted(x, c1 * (1.0 - guard), side="right"))
    lo2 = int(np.searchsorted(x, c1 * (1.0 + guard), side="left"))
    return (0, hi0), (lo1, hi1), (lo2, n)


def _profile_rel_se(lnc: np.ndarray, profile: np.ndarray, k_best: int,
                    s2_eff: float) -> float:
    """Relative uncertainty of a crossover from its SSR profile.

    The profile over the candidate mesh is jagged (window membership
    changes discretely), so a curvature read-out at the minimum badly
    overstates precision. Instead the profile's own local fluctuation
    scale (median absolute successive difference) sets the height of an
    acceptance band above the minimum; the half-width of the candidate
    range inside the band is the reported relative error.
    """
    valid = np.isfinite(profile)
    pv = profile[valid]
    lv = lnc[valid]
    if len(pv) >= 3:
        kappa = max(float(np.median(np.abs(np.diff(pv)))), s2_eff)
        band = lv[pv <= pv.min() + kappa]
        half = 0.5 * (float(band.max()) - float(band.min()))
        if half > 0:
            return half
    left = lnc[k_best] - lnc[max(k_best - 1, 0)]
    right = lnc[min(k_best + 1, len(lnc) - 1)] - lnc[k_best]
    return max(left, right, 1e-3)


def detect_crossovers(ecdf: EmpiricalCCDF, guard: float = GUARD_FRACTION) -> CrossoverResult:
    """Best (m0, m1) pair over a 60x60 empirical-quantile mesh.

    Purely exponential data has no Pareto tail to place m1 in; that case
    is recognized by the high window preferring a line in (income, log
    position) over one in log-log, and m1 is pinned at the top feasible
    candidate with the degeneracy flagged.
    """
    x = ecdf.sorted_incomes
    n = len(x)
    if n < 100 or x[0] <= 0 or x[-1] / x[0] < 100.0:
        raise PreconditionError(
            "need at least 100 points spanning two decades for crossover "
            "detection; pass manual overrides (m0, m1) instead"
        )
    sums = _SegmentSums(ecdf)
    probs = np.geomspace(0.5, 1e-4, _N_CANDIDATES)
    cand = np.unique(np.quantile(x, 1.0 - probs))
    k = len(cand)
    obj = np.full((k, k), np.inf)
    for i in range(k):
        for j in range(i + 1, k):
            (a0, b0), (a1, b1), (a2, b2) = _segment_bounds(x, cand[i], cand[j], guard)
            if min(b0 - a0, b1 - a1, b2 - a2) < MIN_WINDOW_POINTS:
                continue
            obj[i, j] = (sums.ssr(a0, b0, False)
                         + sums.ssr(a1, b1, True)
                         + sums.ssr(a2, b2, True))
    if not np.isfinite(obj).any():
        raise PreconditionError(
            "no candidate crossover pair admits three populated windows; "
            "pass manual overrides (m0, m1) instead"
        )
    i_best, j_best = np.unravel_index(np.argmin(obj), obj.shape)
    c0, c1 = float(cand[i_best]), float(cand[j_best])

    (a0, b0), (a1, b1), (a2, b2) = _segment_bounds(x, c0, c1, guard)
    res = []
    for (a, b), log_x in (((a0, b0), False), ((a1, b1), True), ((a2, b2), True)):
        slope, intercept, _, _ = sums.regress(a, b, log_x)
        u = sums.lx[a:b] if log_x else sums.x[a:b]
        res.append(sums.ly[a:b] - (slope * u + intercept))
    residuals = np.concatenate(res)
    n_res = len(residuals)
    infl = _lag1_inflation(residuals)
    dof = max(n_res - 6, 1)
    s2_eff = float(obj[i_best, j_best]) / dof * infl

    lnc = np.log(cand)
    prof0 = np.min(obj, axis=1)
    prof1 = np.min(obj, axis=0)
    rel0 = _profile_rel_se(lnc, prof0, int(i_best), s2_eff)
    rel1 = _profile_rel_se(lnc, prof1, int(j_best), s2_eff)

    # degenerate tail: does log position prefer income over log income?
    ssr_exp = sums.ssr(a2, b2, False)
    ssr_par = sums.ssr(a2, b2, True)
    no_high = bool(ssr_exp <= ssr_par)
    if no_high:
        for jj in range(k - 1, -1, -1):
            a2d = int(np.searchsorted(x, cand[jj] * (1.0 + guard), side="left"))
            if n - a2d >= MIN_WINDOW_POINTS:
                c1 = float(cand[jj])
                break
    return CrossoverResult(c0, c1, float(rel0), float(rel1), no_high)


def fit_temperature(ecdf: EmpiricalCCDF, m_init: float, m0: float) -> TemperatureFit:
    """Exponential-regime temperature from ln(position) against income on
    [m_init, m0]; T = -1/slope."""
    sums = _SegmentSums(ecdf)
    i, j = _window_indices(ecdf.sorted_incomes, m_init, m0)
    n = j - i
    if n < MIN_WINDOW_POINTS:
        raise PreconditionError(
            f"temperature window [{m_init:g}, {m0:g}] holds {n} points; "
            f"need {MIN_WINDOW_POINTS}"
        )
    slope, _, ssr, r2 = sums.regress(i, j, False)
    if slope >= 0:
        raise PreconditionError("data not exponential on window")
    u = ecdf.sorted_incomes[i:j]
    duu = float(np.sum((u - u.mean()) ** 2))
    infl = _lag1_inflation(sums.ly[i:j] - slope * u
                           - (sums.ly[i:j] - slope * u).mean())
    se_slope = math.sqrt(ssr / max(n - 2, 1) / duu * infl)
    temperature = -1.0 / slope
    # positions are rank statistics, so the residual-based error can land
    # far below what n exponential observations could ever determine;
    # floor at the T/sqrt(n) information bound
    return TemperatureFit(
        temperature=temperature,
        stderr=max(se_slope / slope ** 2, temperature / math.sqrt(n)),
        r_squared=r2,
        n_points=n,
        window=(float(m_init), float(m0)),
        slope=slope,
    )


def fit_pareto(ecdf: EmpiricalCCDF, window: tuple) -> ParetoFit:
    """Weak-Pareto exponent from ln(position) against ln(income) on the
    window; exponent = -slope, scale from the intercept."""
    lo, hi = window
    sums = _SegmentSums(ecdf)
    i, j = _window_indices(ecdf.sorted_incomes, lo, hi)
    n = j - i
    if n < MIN_WINDOW_POINTS:
        raise PreconditionError(
            f"Pareto window [{lo:g}, {hi:g}] holds {n} points; "
            f"need {MIN_WINDOW_POINTS}"
        )
    slope, intercept, ssr, r2 = sums.regress(i, j, True)
    if slope >= 0:
        raise PreconditionError("data not Pareto on window")
    exponent = -slope
    scale = math.exp(intercept / exponent)
    u = sums.lx[i:j]
    duu = float(np.sum((u - u.mean()) ** 2))
    resid = sums.ly[i:j] - (slope * u + intercept)
    se_slope = math.sqrt(ssr / max(n - 2, 1) / duu * _lag1_inflation(resid))
    # floor at the exponent/sqrt(k) tail-index bound for k window points
    return ParetoFit(
        exponent=exponent,
        scale=scale,
        stderr=max(se_slope, exponent / math.sqrt(n)),
        r_squared=r2,
        n_points=n,
        window=(float(lo), float(hi)),
    )


def _labeled(step: str, exc: PreconditionError) -> PreconditionError:
    return PreconditionError(f"{step}: {exc}")


def _pareto_refit_exponent(ecdf, lo, hi):
    try:
        return fit_pareto(ecdf, (lo, hi)).exponent
    except PreconditionError:
        return None


def _window_sensitivity(ecdf, base_exponent, lo, hi, vary_lo, rel_se):
    """d(exponent)/d(ln crossover) * rel_se, by refitting at shifted
    window edges; one-sided when a shift empties the window."""
    if not (np.isfinite(rel_se) and rel_se > 0):
        return 0.0
    h = min(rel_se, 0.3)
    if vary_lo:
        up = _pareto_refit_exponent(ecdf, lo * math.exp(h), hi)
        dn = _pareto_refit_exponent(ecdf, lo * math.exp(-h), hi)
    else:
        up = _pareto_refit_exponent(ecdf, lo, hi * math.exp(h))
        dn = _pareto_refit_exponent(ecdf, lo, hi * math.exp(-h))
    if up is not None and dn is not None:
        deriv = (up - dn) / (2.0 * h)
    elif up is not None:
        deriv = (up - base_exponent) / h
    elif dn is not None:
        deriv = (base_exponent - dn) / h
    else:
        return 0.0
    return deriv * rel_se


def _fit_core(ecdf: EmpiricalCCDF, cross: CrossoverResult, guard: float):
    """The three labeled regressions for a fixed crossover pair."""
    x = ecdf.sorted_incomes
    m_init = float(x[0])
    try:
        tfit = fit_temperature(ecdf, m_init, cross.m0)
    except PreconditionError as exc:
        raise _labeled("temperature fit", exc) from exc
    alpha_window = (cross.m0 * (1.0 + guard), cross.m1 * (1.0 - guard))
    try:
        afit = fit_pareto(ecdf, alpha_window)
    except PreconditionError as exc:
        raise _labeled("alpha fit", exc) from exc
    alpha1_window = (cross.m1 * (1.0 + guard), float(x[-1]))
    try:
        a1fit = fit_pareto(ecdf, alpha1_window)
    except PreconditionError as exc:
        raise _labeled("alpha1 fit", exc) from exc
    return tfit, afit, a1fit, alpha_window, alpha1_window


def _refinement_drift(ecdf: EmpiricalCCDF, guard: float):
    """How far each estimate moved over the last resolution doubling.

    Thinning to every second order statistic is a valid half-size sample
    of the same law; rerunning the full pipeline on it measures the
    estimator's own drift with sample size, deterministically and
    without resampling. The next doubling is expected to move estimates
    by no more than the previous one did.
    """
    thin = build_ccdf(ecdf.sorted_incomes[::2])
    cross = detect_crossovers(thin, guard)
    tfit, afit, a1fit, _, _ = _fit_core(thin, cross, guard)
    return tfit.temperature, afit.exponent, a1fit.exponent


def fit_pipeline(ecdf: EmpiricalCCDF, overrides=None,
                 guard: float = GUARD_FRACTION) -> FitReport:
    """Full three-step fit; manual crossover overrides skip detection and
    are echoed in the report."""
    x = ecdf.sorted_incomes
    m_init = float(x[0])
    if overrides is not None:
        m0, m1 = float(overrides[0]), float(overrides[1])
        if not (m_init < m0 < m1):
            raise PreconditionError(
                f"crossover override must satisfy m_init < m0 < m1, "
                f"got ({m0:g}, {m1:g}) with m_init={m_init:g}"
            )
        cross = CrossoverResult(m0, m1, math.nan, math.nan, False)
        overridden = True
    else:
        try:
            cross = detect_crossovers(ecdf, guard)
        except PreconditionError as exc:
            raise _labeled("crossover detection", exc) from exc
        overridden = False
    m0, m1 = cross.m0, cross.m1

    tfit, afit, a1fit, alpha_window, alpha1_window = _fit_core(ecdf, cross, guard)

    try:
        params = EffectiveParams(
            T=tfit.temperature, T1=tfit.temperature,
            m0=m0, m1=m1,
            alpha=afit.exponent, alpha1=a1fit.exponent,
            m_init=m_init,
        )
    except PreconditionError as exc:
        raise _labeled("parameter assembly", exc) from exc

    # detection uncertainty of the window edges feeds the exponent errors;
    # without it the reported errors are dishonestly small under refinement
    se_alpha = afit.stderr
    se_alpha1 = a1fit.stderr
    se_temp = tfit.stderr
    if not overridden:
        s_lo = _window_sensitivity(ecdf, afit.exponent, *alpha_window,
                                   vary_lo=True, rel_se=cross.m0_rel_se)
        s_hi = _window_sensitivity(ecdf, afit.exponent, *alpha_window,
                                   vary_lo=False, rel_se=cross.m1_rel_se)
        se_alpha = math.sqrt(afit.stderr ** 2 + s_lo ** 2 + s_hi ** 2)
        s1_lo = _window_sensitivity(ecdf, a1fit.exponent, *alpha1_window,
                                    vary_lo=True, rel_se=cross.m1_rel_se)
        # the tail window ends at the sample maximum, which creeps up by
        # ~ln(2)/alpha1 per doubling; the slope there has not converged,
        # so sensitivity to that edge is part of the honest error
        s1_hi = _window_sensitivity(ecdf, a1fit.exponent, *alpha1_window,
                                    vary_lo=False,
                                    rel_se=math.log(2.0) / a1fit.exponent)
        se_alpha1 = math.sqrt(a1fit.stderr ** 2 + s1_lo ** 2 + s1_hi ** 2)
        try:
            t_up = fit_temperature(ecdf, m_init, m0 * math.exp(min(cross.m0_rel_se, 0.3))).temperature
            t_dn = fit_temperature(ecdf, m_init, m0 * math.exp(-min(cross.m0_rel_se, 0.3))).temperature
            dT = (t_up - t_dn) / (2.0 * min(cross.m0_rel_se, 0.3)) * cross.m0_rel_se
        except PreconditionError:
            dT = 0.0
        try:
            T_h, a_h, a1_h = _refinement_drift(ecdf, guard)
            drift_T = tfit.temperature - T_h
            drift_a = afit.exponent - a_h
            drift_a1 = a1fit.exponent - a1_h
        except PreconditionError:
            drift_T = drift_a = drift_a1 = 0.0
        se_temp = _REFINE_COVERAGE * math.sqrt(
            tfit.stderr ** 2 + dT ** 2 + drift_T ** 2)
        se_alpha = _REFINE_COVERAGE * math.sqrt(se_alpha ** 2 + drift_a ** 2)
        se_alpha1 = _REFINE_COVERAGE * math.sqrt(se_alpha1 ** 2 + drift_a1 ** 2)

    notes = []
    if params.alpha1 < 1.0:
        notes.append("high class variance infinite (alpha1 < 1)")
    if params.alpha > 2.0:
        notes.append("medium class variance finite (alpha > 2)")
    if cross.no_high_income_regime:
        notes.append("no high-income regime detected")
    if overridden:
        notes.append("crossovers supplied manually")

    cross_unc = math.nan if overridden else max(cross.m0_rel_se, cross.m1_rel_se)
    return FitReport(
        params=params,
        windows={
            "temperature": tfit.window,
            "alpha": alpha_window,
            "alpha1": alpha1_window,
        },
        r_squared={
            "temperature": tfit.r_squared,
            "alpha": afit.r_squared,
            "alpha1": a1fit.r_squared,
        },
        std_errors={
            "temperature": se_temp,
            "alpha": se_alpha,
            "alpha1": se_alpha1,
            "m0": (math.nan if overridden else cross.m0_rel_se * m0),
            "m1": (math.nan if overridden else cross.m1_rel_se * m1),
        },
        infinite_variance_flag=bool(params.alpha1 < 1.0),
        crossover_uncertainty=cross_unc,
        no_high_income_regime=cross.no_high_income_regime,
        notes=tuple(notes),
    )
