"""Numerical evaluation of the orbisurface trace formula with the Gaussian
test function h(r) = exp(-r^2 t).

Spectral-side bookkeeping uses geometric eigenvalues lambda >= 0; the
spectral parameter satisfies r^2 = lambda - 1/4, and the nonpositive
eigenvalue convention of the inversion formulas is lambda_paper = -lambda.
Imaginary spectral parameters are never represented as complex numbers;
everything is written directly in lambda.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .fuchsian import LengthSpectrum, elliptic_class_data
from .orbisurface import Signature
from .quadrature import ABS_TOL, TAIL_EPS, adaptive_quad, gauss_quad_doubling


@dataclass(frozen=True)
class HeatTestFunction:
    """Gaussian test function h(r) = exp(-r^2 t), t > 0."""

    t: float

    def __post_init__(self):
        if not self.t > 0:
            raise ValueError("t must be positive")

    def __call__(self, r):
        return np.exp(-r * r * self.t)


@dataclass(frozen=True)
class TraceFormulaInput:
    """Geometric side data: area, cone orders and a length spectrum."""

    area: float
    cone_orders: tuple
    spectrum: LengthSpectrum
    length_cutoff: float | None = None

    def __post_init__(self):
        if not self.area > 0:
            raise ValueError("area must be positive")
        object.__setattr__(self, "cone_orders", tuple(self.cone_orders))
        if self.length_cutoff is None:
            object.__setattr__(self, "length_cutoff", self.spectrum.max_length)


@dataclass(frozen=True)
class TermBreakdown:
    identity_term: float
    elliptic_term: float
    hyperbolic_term: float
    total: float
    truncation_bound: float

    def to_json(self, t: float) -> dict:
        return {
            "t": t,
            "identity": self.identity_term,
            "elliptic": self.elliptic_term,
            "hyperbolic": self.hyperbolic_term,
            "total": self.total,
            "truncation_bound": self.truncation_bound,
        }


@dataclass(frozen=True)
class SpectralData:
    """Geometric eigenvalues (lambda >= 0) with multiplicities, ascending."""

    eigenvalues: tuple

    def __post_init__(self):
        eigs = tuple((float(l), int(m)) for l, m in self.eigenvalues)
        if any(l < 0 or m < 1 for l, m in eigs):
            raise ValueError("eigenvalues must be >= 0 with multiplicity >= 1")
        if list(eigs) != sorted(eigs):
            raise ValueError("eigenvalues must be ascending")
        object.__setattr__(self, "eigenvalues", eigs)


def _sigma_integrand(t: float):
    def f(r):
        return r * math.exp(-r * r * t) * math.tanh(math.pi * r)
    return f


def _sigma_cutoff(t: float) -> float:
    # Gaussian tail bound: int_R^inf r e^{-r^2 t} dr = e^{-R^2 t}/(2t) < TAIL_EPS
    arg = -math.log(2.0 * t * TAIL_EPS)
    return math.sqrt(max(arg, 9.0) / t)


@lru_cache(maxsize=4096)
def sigma(t: float) -> float:
    """sigma(t) = (1/2pi) int_0^inf r e^{-r^2 t} tanh(pi r) dr."""
    if not t > 0:
        raise ValueError("t must be positive")
    R = _sigma_cutoff(t)
    return adaptive_quad(_sigma_integrand(t), 0.0, R) / (2.0 * math.pi)


def sigma_crosscheck(t: float) -> float:
    """sigma via the independent fixed-order scheme (for dual-route tests)."""
    R = _sigma_cutoff(t)
    return gauss_quad_doubling(_sigma_integrand(t), 0.0, R) / (2.0 * math.pi)


def identity_term(area: float, t: float) -> float:
    """mu(F)/(4 pi) * full-line tanh integral; equals area * sigma(t) by evenness."""
    if area < 0:
        raise ValueError("area must be >= 0")
    if area == 0.0:
        return 0.0
    return area * sigma(t)


def _elliptic_integrand(theta: float, t: float):
    def f(r):
        # e^{-2 theta r} / (1 + e^{-2 pi r}) computed in log form so the
        # r -> -inf side (growth rate 2 pi - 2 theta before the Gaussian)
        # cannot overflow
        return math.exp(-2.0 * theta * r - np.logaddexp(0.0, -2.0 * math.pi * r)
                        - r * r * t)
    return f


def _elliptic_bounds(theta: float) -> tuple:
    # pure-exponential tail bounds, valid for every t > 0
    rate_pos = 2.0 * theta
    rate_neg = 2.0 * math.pi - 2.0 * theta
    r_pos = -math.log(rate_pos * TAIL_EPS) / rate_pos
    r_neg = -math.log(rate_neg * TAIL_EPS) / rate_neg
    return -r_neg, r_pos


@lru_cache(maxsize=65536)
def _elliptic_integral(theta: float, t: float) -> float:
    lo, hi = _elliptic_bounds(theta)
    return adaptive_quad(_elliptic_integrand(theta, t), lo, hi)


def _elliptic_integral_crosscheck(theta: float, t: float) -> float:
    lo, hi = _elliptic_bounds(theta)
    return gauss_quad_doubling(_elliptic_integrand(theta, t), lo, hi)


def elliptic_term(cone_orders, t: float) -> float:
    """Sum over nontrivial cone-point rotation classes of
    1/(2 m sin theta) * int e^{-2 theta r}/(1 + e^{-2 pi r}) e^{-r^2 t} dr."""
    if not t > 0:
        raise ValueError("t must be positive")
    total = 0.0
    for rec in elliptic_class_data(Signature(0, tuple(cone_orders)) if cone_orders
                                   else Signature(0, ())):
        weight = 1.0 / (2.0 * rec.centralizer_order * math.sin(rec.theta))
        total += weight * _elliptic_integral(rec.theta, t)
    return total


def hyperbolic_term(spectrum: LengthSpectrum, t: float) -> tuple:
    """(sum, truncation_bound): each entry (l, l0, mult) contributes
    mult * l0 / (2 sinh(l/2)) * (4 pi t)^{-1/2} e^{-l^2/(4t)}.

    The truncation bound reports the scale of the first omitted term:
    (4 pi t)^{-1/2} e^{-L^2/(4t)} * C with L the spectrum cutoff and C the
    multiplicity at the last entry."""
    if not t > 0:
        raise ValueError("t must be positive")
    if not spectrum.entries:
        return 0.0, 0.0
    pref = 1.0 / math.sqrt(4.0 * math.pi * t)
    total = 0.0
    for length, prim, mult in spectrum.entries:
        total += mult * prim / (2.0 * math.sinh(length / 2.0)) \
            * pref * math.exp(-length * length / (4.0 * t))
    cutoff = spectrum.max_length if spectrum.max_length else spectrum.entries[-1][0]
    count_at_cutoff = spectrum.entries[-1][2]
    bound = pref * math.exp(-cutoff * cutoff / (4.0 * t)) * count_at_cutoff
    return total, bound


def geometric_heat_trace(inp: TraceFormulaInput, t: float) -> TermBreakdown:
    """Right-hand side of the trace formula for h(r) = e^{-r^2 t}; equals the
    spectral sum over e^{-r_n^2 t} for consistent data."""
    ident = identity_term(inp.area, t)
    ell = elliptic_term(inp.cone_orders, t)
    hyp, bound = hyperbolic_term(inp.spectrum, t)
    total = ident + ell + hyp
    return TermBreakdown(ident, ell, hyp, total, bound)


def spectral_heat_trace(data: SpectralData, t: float) -> float:
    """Sum of mult * e^{-(lambda - 1/4) t} over the stored eigenvalues
    (r^2 = lambda - 1/4, negative allowed)."""
    if not t > 0:
        raise ValueError("t must be positive")
    return sum(m * math.exp(-(lam - 0.25) * t) for lam, m in data.eigenvalues)


def c_function(inp: TraceFormulaInput, t: float) -> float:
    """Geometric construction of the inversion kernel:
    c(t) = e^{-t/4} (elliptic term + hyperbolic term)."""
    ell = elliptic_term(inp.cone_orders, t)
    hyp, _ = hyperbolic_term(inp.spectrum, t)
    return math.exp(-t / 4.0) * (ell + hyp)


def c_function_error_estimate(inp: TraceFormulaInput, t: float) -> float:
    """Absolute error budget for c_function: quadrature tolerance plus the
    reported hyperbolic truncation bound."""
    n_classes = sum(m - 1 for m in inp.cone_orders)
    _, bound = hyperbolic_term(inp.spectrum, t)
    return math.exp(-t / 4.0) * (n_classes * 2.0 * ABS_TOL + bound + 1e-15)
