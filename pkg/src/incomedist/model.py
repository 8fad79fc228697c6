"""Core model: parameter sets, Langevin coefficients, stationary densities.

The stationary density of the threshold Fokker-Planck equation is a
two-branch expression: each branch has the form

    exp(-(m0/T) * arctan(m/m0)) / (1 + (m/m0)**2) ** ((alpha + 1) / 2)

with (T, alpha) below the threshold m1 and (T1, alpha1) at and above it.
Branch constants are fixed by continuity at m1 plus normalization over
[m_init, infinity). A generic quadrature evaluator built only on the
drift/diffusion coefficients serves as an independent oracle.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace
from enum import Enum
from functools import lru_cache

import numpy as np
from scipy import integrate

from .errors import NumericsError, PreconditionError

__all__ = [
    "Branch",
    "EffectiveParams",
    "MicroParams",
    "branch_of",
    "drift_A",
    "diffusion_B",
    "micro_from_effective",
    "effective_from_micro",
    "stationary_pdf",
    "stationary_pdf_quadrature",
    "yakovenko_pdf",
]

_QUAD_LIMIT = 200


class Branch(Enum):
    """Which branch of the threshold coefficients applies at an income."""

    BELOW = "below"
    ABOVE = "above"


def branch_of(m: float, m1: float) -> Branch:
    """The threshold income itself belongs to the upper branch (m >= m1)."""
    return Branch.ABOVE if m >= m1 else Branch.BELOW


@dataclass(frozen=True)
class EffectiveParams:
    """Fitted model parameters.

    Parameters
    ----------
    T : float
        Income temperature of the low-income (exponential) regime.
    T1 : float
        Temperature parameter of the branch at and above m1. The fitting
        pipeline imposes T1 = T; it is kept free here.
    m0 : float
        Crossover income between additive and multiplicative noise.
    m1 : float
        Threshold income between the medium- and high-income regimes.
        May be ``math.inf`` for the single-branch model.
    alpha : float
        Medium-class Pareto exponent (CCDF tail index below m1).
    alpha1 : float
        High-class Pareto exponent. Values in (0, 1) are valid and imply
        an infinite-variance tail; values <= 0 are not normalizable.
    m_init : float
        Lowest household income; lower end of the support.
    """

    T: float
    T1: float
    m0: float
    m1: float
    alpha: float
    alpha1: float
    m_init: float

    def __post_init__(self):
        for name in ("T", "T1", "m0", "alpha", "alpha1", "m_init"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise PreconditionError(f"EffectiveParams.{name} must be finite, got {v!r}")
        if self.T <= 0 or self.T1 <= 0:
            raise PreconditionError("temperatures must be positive")
        if self.m0 <= 0:
            raise PreconditionError("m0 must be positive")
        if math.isnan(self.m1) or self.m1 < self.m0:
            raise PreconditionError("m1 must satisfy m1 >= m0")
        if not (0 <= self.m_init < self.m0):
            raise PreconditionError("m_init must satisfy 0 <= m_init < m0")
        if self.alpha1 <= 0:
            raise PreconditionError(
                "alpha1 <= 0 gives a non-normalizable density (CCDF tail index must be positive)"
            )
        if math.isinf(self.m1) and self.alpha <= 1:
            raise PreconditionError("alpha must exceed 1 when m1 is infinite")


@dataclass(frozen=True)
class MicroParams:
    """Langevin (Fokker-Planck) coefficients of the threshold dynamics.

    Drift is A(m) = A0 + a*m below m1 and A0p + ap*m at and above it;
    diffusion is B(m) = B0 + b*m**2 everywhere. The derived identities
    T = B0/A0, T1 = B0/A0p, m0 = sqrt(B0/b), alpha = 1 + a/b and
    alpha1 = 1 + ap/b hold exactly.
    """

    A0: float
    A0p: float
    a: float
    ap: float
    B0: float
    b: float
    m1: float
    m_init: float

    def __post_init__(self):
        for name in ("A0", "A0p", "a", "ap", "B0", "b", "m_init"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise PreconditionError(f"MicroParams.{name} must be finite, got {v!r}")
        if self.B0 <= 0 or self.b <= 0:
            raise PreconditionError("diffusion must be strictly positive: B0 > 0 and b > 0")
        if math.isnan(self.m1) or self.m1 <= 0:
            raise PreconditionError("m1 must be positive")
        if self.m_init < 0:
            raise PreconditionError("m_init must be non-negative")


def drift_A(m, p: MicroParams):
    """Threshold drift coefficient A(m).

    Returns A0 + a*m for m < m1 and A0p + ap*m for m >= m1. Accepts a
    scalar or array of incomes; negative incomes are rejected.
    """
    m_arr = np.asarray(m, dtype=float)
    if np.any(m_arr < 0):
        raise PreconditionError("income must be non-negative")
    out = np.where(m_arr < p.m1, p.A0 + p.a * m_arr, p.A0p + p.ap * m_arr)
    return float(out) if m_arr.ndim == 0 else out


def diffusion_B(m, p: MicroParams):
    """Diffusion coefficient B(m) = B0 + b*m**2, continuous across m1."""
    m_arr = np.asarray(m, dtype=float)
    if np.any(m_arr < 0):
        raise PreconditionError("income must be non-negative")
    out = p.B0 + p.b * m_arr * m_arr
    return float(out) if m_arr.ndim == 0 else out


def micro_from_effective(e: EffectiveParams, b: float = 1.0) -> MicroParams:
    """Build Langevin coefficients from effective parameters at gauge ``b``.

    Only ratios of the coefficients enter the stationary density, so the
    multiplicative rate b is a free positive time-scale gauge.
    """
    if not (b > 0) or not math.isfinite(b):
        raise PreconditionError("gauge rate b must be positive and finite")
    if math.isinf(e.m1):
        raise PreconditionError("micro coefficients need a finite threshold m1")
    B0 = b * e.m0 ** 2
    return MicroParams(
        A0=B0 / e.T,
        A0p=B0 / e.T1,
        a=(e.alpha - 1.0) * b,
        ap=(e.alpha1 - 1.0) * b,
        B0=B0,
        b=b,
        m1=e.m1,
        m_init=e.m_init,
    )


def effective_from_micro(p: MicroParams) -> EffectiveParams:
    """Invert micro_from_effective; exact for any gauge b."""
    return EffectiveParams(
        T=p.B0 / p.A0 if p.A0 != 0 else math.inf,
        T1=p.B0 / p.A0p if p.A0p != 0 else math.inf,
        m0=math.sqrt(p.B0 / p.b),
        m1=p.m1,
        alpha=1.0 + p.a / p.b,
        alpha1=1.0 + p.ap / p.b,
        m_init=p.m_init,
    )


# ---------------------------------------------------------------------------
# closed-form density


def _log_branch(x, theta, alpha):
    """log of exp(-theta*arctan(x)) * (1+x^2)^(-(alpha+1)/2)."""
    return -theta * np.arctan(x) - 0.5 * (alpha + 1.0) * np.log1p(x * x)


def _branch_integral(theta, ex, u_lo, u_hi):
    """m0-free part of the branch mass: int exp(-theta*u) * cos(u)^(ex-1) du.

    In the substitution u = arctan(m/m0) the density integrates to
    m0 * this integral. When ex < 1 the integrand is singular at pi/2;
    the substitution w = pi/2 - u exposes the w^(ex-1) factor, which
    scipy's algebraic-weight rule integrates exactly.
    """
    if u_lo >= u_hi:
        return 0.0, 0.0

    def f(u):
        return math.exp(-theta * (u - u_lo)) * math.cos(u) ** (ex - 1.0)

    # When theta*(span) is large the mass sits in a layer of width 1/theta
    # at u_lo, invisible to the first adaptive panel; breakpoints there
    # keep quad honest. The exponential is taken relative to u_lo so the
    # integrand stays O(1) inside quad; the prefactor is restored below.
    # Panels spanning many orders of magnitude trip QUADPACK's roundoff
    # heuristic even when converged, so that warning is silenced here;
    # accuracy is pinned by the closed-form/quadrature cross-oracle.
    scale = math.exp(-theta * u_lo)
    need_layer = theta * (u_hi - u_lo) > 45.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        if u_hi < math.pi / 2 - 1e-9:
            pts = [u_lo + c / theta for c in (1.0, 10.0, 45.0)] if need_layer else []
            pts = [p for p in pts if p < u_hi]
            val, err = integrate.quad(
                f, u_lo, u_hi, points=pts or None,
                epsabs=0.0, epsrel=1e-13, limit=_QUAD_LIMIT,
            )
            return scale * val, scale * err
        w_hi = math.pi / 2 - u_lo
        val = err = 0.0
        if need_layer:
            # peel off the boundary layer before the algebraic-weight rule,
            # which cannot take breakpoints
            u_mid = u_lo + 45.0 / theta
            pts = [u_lo + 1.0 / theta, u_lo + 10.0 / theta]
            val, err = integrate.quad(
                f, u_lo, u_mid, points=pts,
                epsabs=0.0, epsrel=1e-13, limit=_QUAD_LIMIT,
            )
            u_lo = u_mid
            w_hi = math.pi / 2 - u_lo

        def g(w):
            # (sin w / w)^(ex-1) is smooth at w = 0; the singular w^(ex-1)
            # factor is carried by the quadrature weight below
            s = math.sin(w) / w if w > 0 else 1.0
            return math.exp(-theta * (math.pi / 2 - w)) * s ** (ex - 1.0)

        tail, terr = integrate.quad(
            g, 0.0, w_hi, weight="alg", wvar=(ex - 1.0, 0.0),
            epsabs=0.0, epsrel=1e-13, limit=_QUAD_LIMIT,
        )
    return scale * val + tail, scale * err + terr


@lru_cache(maxsize=128)
def _norm_constants(e: EffectiveParams):
    """(c_lo, c_hi): branch prefactors normalizing the density on [m_init, inf)."""
    th = e.m0 / e.T
    th1 = e.m0 / e.T1
    u0 = math.atan(e.m_init / e.m0)
    if math.isinf(e.m1):
        i1, _ = _branch_integral(th, e.alpha, u0, math.pi / 2)
        return 1.0 / (e.m0 * i1), 0.0
    u1 = math.atan(e.m1 / e.m0)
    i1, _ = _branch_integral(th, e.alpha, u0, u1)
    i2, _ = _branch_integral(th1, e.alpha1, u1, math.pi / 2)
    x1 = e.m1 / e.m0
    # continuity ratio c_hi/c_lo computed in logs: the individual branch
    # values can underflow for large m0/T while their ratio stays modest
    log_ratio = _log_branch(x1, th, e.alpha) - _log_branch(x1, th1, e.alpha1)
    ratio = math.exp(log_ratio)
    z = e.m0 * (i1 + ratio * i2)
    if not (z > 0) or not math.isfinite(z):
        raise NumericsError(f"normalization integral is not finite/positive: {z!r}")
    return 1.0 / z, ratio / z


def stationary_pdf(m, e: EffectiveParams):
    """Two-branch stationary density, normalized over [m_init, inf).

    Continuous at m1 by construction; the threshold income itself is
    evaluated on the upper branch. Incomes below m_init are rejected.
    """
    m_arr = np.asarray(m, dtype=float)
    if np.any(m_arr < e.m_init):
        raise PreconditionError("income below m_init is outside the model support")
    c_lo, c_hi = _norm_constants(e)
    x = m_arr / e.m0
    with np.errstate(under="ignore"):
        log_lo = _log_branch(x, e.m0 / e.T, e.alpha)
        if math.isinf(e.m1):
            out = c_lo * np.exp(log_lo)
        else:
            log_hi = _log_branch(x, e.m0 / e.T1, e.alpha1)
            out = np.where(m_arr < e.m1, c_lo * np.exp(log_lo), c_hi * np.exp(log_hi))
    return float(out) if m_arr.ndim == 0 else out


def yakovenko_pdf(m, e: EffectiveParams):
    """Single-branch density (threshold at infinity), a named convenience."""
    single = replace(e, m1=math.inf, T1=e.T, alpha1=e.alpha)
    return stationary_pdf(m, single)


# ---------------------------------------------------------------------------
# quadrature oracle


def _oracle_scales(p: MicroParams):
    """Characteristic incomes the adaptive rules must not step over."""
    scales = [p.m1, math.sqrt(p.B0 / p.b)]
    if p.A0 > 0:
        # additive decay length T = B0/A0; the density can be confined to a
        # boundary layer of a few T above m_init
        t_add = p.B0 / p.A0
        scales += [p.m_init + 5.0 * t_add, p.m_init + 50.0 * t_add]
    return scales


def _oracle_pivot(p: MicroParams) -> float:
    return max(10.0 * p.m1, 10.0 * p.m_init + 1.0)


@lru_cache(maxsize=64)
def _oracle_norm(p: MicroParams):
    """Normalization of exp(-int A/B)/B over [m_init, inf) for the oracle.

    Split at a finite pivot; the remainder is mapped onto (0, 1] by
    t = pivot/m, which a generic adaptive rule resolves even for slowly
    decaying power tails.
    """
    def unnorm(m):
        val, _ = _oracle_exponent(p, float(m))
        with np.errstate(over="ignore"):
            bm = p.B0 + p.b * m * m
        return math.exp(-val) / bm if math.isfinite(bm) else 0.0

    pivot = _oracle_pivot(p)
    pts = sorted({s for s in _oracle_scales(p) if p.m_init < s < pivot}) or None
    z_head, err_head = integrate.quad(
        unnorm, p.m_init, pivot, points=pts, epsabs=0.0, epsrel=1e-12, limit=_QUAD_LIMIT,
    )
    z_tail, err_tail = integrate.quad(
        lambda t: unnorm(pivot / t) * pivot / (t * t),
        0.0, 1.0, epsabs=0.0, epsrel=1e-12, limit=_QUAD_LIMIT,
    )
    z = z_head + z_tail
    err = err_head + err_tail
    if not (z > 0) or not math.isfinite(z):
        raise NumericsError(f"oracle normalization is not finite/positive: {z!r}")
    if err > 1e-8 * z:
        raise NumericsError(
            f"oracle normalization did not converge: achieved relative tolerance {err / z:.3e}"
        )
    return z


def _oracle_exponent(p: MicroParams, m: float):
    """int_{m_init}^{m} A(m')/B(m') dm' by adaptive quadrature.

    Far beyond all model scales A/B decays like 1/m, so the straight
    integral is re-expressed in log-income there; otherwise an adaptive
    rule over a huge interval can step entirely over the integrand.
    """
    ratio = lambda s: drift_A(s, p) / diffusion_B(s, p)
    pivot = max(_oracle_pivot(p), 10.0 * math.sqrt(p.B0 / p.b))
    top = min(m, pivot)
    pts = sorted({s for s in _oracle_scales(p) if p.m_init < s < top}) or None
    val, err = integrate.quad(
        ratio, p.m_init, top, points=pts, epsabs=1e-13, epsrel=1e-12, limit=_QUAD_LIMIT,
    )
    if m > pivot:
        v2, e2 = integrate.quad(
            lambda u: ratio(math.exp(u)) * math.exp(u),
            math.log(pivot), math.log(m), epsabs=1e-13, epsrel=1e-12, limit=_QUAD_LIMIT,
        )
        val += v2
        err += e2
    return val, err


def stationary_pdf_quadrature(m, p: MicroParams):
    """Density via direct quadrature of the drift and diffusion coefficients.

    Evaluates exp(-int_{m_init}^m A/B) / B(m) and normalizes numerically.
    Uses only drift_A/diffusion_B; independent of the closed form, which
    it cross-checks as an oracle.
    """
    m_arr = np.asarray(m, dtype=float)
    if np.any(m_arr < p.m_init):
        raise PreconditionError("income below m_init is outside the model support")
    z = _oracle_norm(p)
    flat = np.atleast_1d(m_arr).ravel()
    out = np.empty(flat.shape)
    for i, mi in enumerate(flat):
        expo, err = _oracle_exponent(p, float(mi))
        if err > 1e-8 * max(1.0, abs(expo)):
            raise NumericsError(
                f"oracle exponent quadrature at m={mi:g} did not converge: "
                f"achieved absolute tolerance {err:.3e}"
            )
        with np.errstate(under="ignore"):
            out[i] = math.exp(-expo) / (p.B0 + p.b * mi * mi) / z
    out = out.reshape(np.atleast_1d(m_arr).shape)
    return float(out[0]) if m_arr.ndim == 0 else out
