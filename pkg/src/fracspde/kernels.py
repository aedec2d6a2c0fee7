"""Fourier-space kernels of the fractional diffusion operator and their energies.

All kernels are functions of |xi| of the form w * E_{beta,b}(-c |xi|**alpha).
Integrals of products of such kernels against |xi|**a are computed by
adaptive Gauss-Kronrod panels on a bounded range plus an analytic tail built
from the large-argument expansion of the Mittag-Leffler function.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import mlf
from .errors import DivergentIntegral, DomainError
from .params import ModelParams
from .quadrature import ExpPowerTerm, adaptive_panels, geometric_edges, multiply_terms, tail_integral

# Argument of E below which the two-term Taylor expansion is used analytically.
_HEAD_X = 1e-9
# Argument of E from which the tail is integrated analytically.
_TAIL_X = 1e4
_TAIL_TERMS = 8
XI_CAP = 1e6


@dataclass(frozen=True)
class EnergyResult:
    value: float
    abs_err: float
    cutoff: float
    tail_bound: float


@dataclass(frozen=True)
class _Kernel:
    """w * E_{beta,b}(-c xi**alpha)."""

    w: float
    c: float
    b: float


def _as_output(x, out):
    return float(out) if np.ndim(x) == 0 else out


def fourier_Z(p: ModelParams, t: float, xi):
    """t**(ceil(beta)-1) E_{beta,ceil(beta)}(-nu t**beta |xi|**alpha / 2)."""
    if not t > 0:
        raise DomainError("t must be positive")
    m = p.ceil_beta
    x = 0.5 * p.nu * t ** p.beta * np.abs(np.asarray(xi, dtype=float)) ** p.alpha
    return _as_output(xi, t ** (m - 1) * mlf.ml_neg(p.beta, float(m), x))


def fourier_Y(p: ModelParams, t: float, xi):
    """t**(beta+gamma-1) E_{beta,beta+gamma}(-nu t**beta |xi|**alpha / 2)."""
    if not t > 0:
        raise DomainError("t must be positive")
    b = p.b_Y
    x = 0.5 * p.nu * t ** p.beta * np.abs(np.asarray(xi, dtype=float)) ** p.alpha
    return _as_output(xi, t ** (b - 1.0) * mlf.ml_neg(p.beta, b, x))


def fourier_Zstar(p: ModelParams, t: float, xi):
    """E_beta(-nu t**beta |xi|**alpha / 2), defined for beta in (1, 2]."""
    if p.beta <= 1.0:
        raise DomainError("fourier_Zstar needs beta in (1, 2]")
    if not t > 0:
        raise DomainError("t must be positive")
    x = 0.5 * p.nu * t ** p.beta * np.abs(np.asarray(xi, dtype=float)) ** p.alpha
    return _as_output(xi, mlf.ml_neg(p.beta, 1.0, x))


def j0(p: ModelParams, t):
    """Contribution of the initial data; constant in space."""
    t = np.asarray(t, dtype=float)
    if p.beta <= 1.0:
        out = np.full_like(t, p.mu0)
    else:
        out = p.mu0 + p.mu1 * t
    return float(out) if out.ndim == 0 else out


def _y_kernel(p: ModelParams, t: float, weight: float = 1.0) -> _Kernel:
    b = p.b_Y
    return _Kernel(weight * t ** (b - 1.0), 0.5 * p.nu * t ** p.beta, b)


def _eval_sum(beta, alpha, kernels, xi):
    out = np.zeros_like(xi)
    xa = xi ** alpha
    for k in kernels:
        out = out + k.w * mlf.ml_neg(beta, k.b, k.c * xa)
    return out


def _asymptotic_terms(beta: float, alpha: float, k: _Kernel, n_terms: int) -> list[ExpPowerTerm]:
    """Large-xi expansion of one kernel in the variable v = xi**(alpha/beta)."""
    sign, logm = mlf._alg_coefficients(beta, k.b, n_terms)
    terms = []
    for j in range(n_terms):
        if sign[j] == 0.0:
            continue
        coef = k.w * sign[j] * math.exp(logm[j]) * k.c ** (-(j + 1))
        terms.append(ExpPowerTerm(complex(coef), -beta * (j + 1)))
    if beta == 1.0:
        psi = math.pi * (1.0 - k.b)
        coef = k.w * k.c ** (1.0 - k.b) * complex(math.cos(psi), math.sin(psi))
        terms.append(ExpPowerTerm(coef, 1.0 - k.b, complex(-k.c, 0.0)))
    elif beta > 1.0:
        psi = math.pi * (1.0 - k.b) / beta
        coef = k.w * (2.0 / beta) * k.c ** ((1.0 - k.b) / beta) * complex(math.cos(psi), math.sin(psi))
        speed = k.c ** (1.0 / beta)
        re = 0.0 if beta == 2.0 else speed * math.cos(math.pi / beta)
        rate = complex(re, speed * math.sin(math.pi / beta))
        terms.append(ExpPowerTerm(coef, 1.0 - k.b, rate))
    return terms


def _oscillation_edges(beta, alpha, kernels, edges):
    """Split panels so the product of two kernels turns by at most pi/2 per panel."""
    if beta <= 1.0:
        return edges
    sigma = math.sin(math.pi / beta)
    speed = max(k.c for k in kernels) ** (1.0 / beta)
    s = speed * edges ** (alpha / beta)
    out = [edges[:1]]
    for i in range(len(edges) - 1):
        n = int(math.ceil(2.0 * sigma * (s[i + 1] - s[i]) / (0.5 * math.pi)))
        if n > 1:
            out.append(np.linspace(edges[i], edges[i + 1], n + 1)[1:])
        else:
            out.append(edges[i + 1:i + 2])
    return np.concatenate(out)


def spectral_integral(beta: float, alpha: float, left: list[_Kernel], right: list[_Kernel],
                      a: float, rtol: float = 1e-11) -> EnergyResult:
    """Integral over the real line of L(xi) R(xi) |xi|**a for kernel sums L, R."""
    left = [k for k in left if k.w != 0.0]
    right = [k for k in right if k.w != 0.0]
    if not left or not right:
        return EnergyResult(0.0, 0.0, 0.0, 0.0)
    allk = left + right
    c_min = min(k.c for k in allk)
    c_max = max(k.c for k in allk)
    x_tail = max(_TAIL_X, 2.0 * mlf.VECTOR_CROSSOVER ** beta)
    eps = (_HEAD_X / c_max) ** (1.0 / alpha)
    cutoff = (x_tail / c_min) ** (1.0 / alpha)
    if cutoff > XI_CAP:
        cutoff = max(XI_CAP, (2.0 * mlf.VECTOR_CROSSOVER ** beta / c_min) ** (1.0 / alpha))

    # analytic head from the two-term Taylor expansion at the origin
    def taylor(ks):
        c0 = sum(k.w * mlf.reciprocal_gamma(k.b) for k in ks)
        c1 = -sum(k.w * k.c * mlf.reciprocal_gamma(k.b + beta) for k in ks)
        return c0, c1

    l0, l1 = taylor(left)
    r0, r1 = taylor(right)
    head = l0 * r0 * eps ** (a + 1.0) / (a + 1.0)
    head += (l0 * r1 + l1 * r0) * eps ** (a + 1.0 + alpha) / (a + 1.0 + alpha)
    head_err = abs(l1 * r1) * eps ** (a + 1.0 + 2 * alpha) / (a + 1.0 + 2 * alpha)

    def f(xi):
        return xi ** a * _eval_sum(beta, alpha, left, xi) * _eval_sum(beta, alpha, right, xi)

    edges = _oscillation_edges(beta, alpha, allk, geometric_edges(eps, cutoff))
    body, body_err = adaptive_panels(f, edges, rtol=rtol, atol=1e-300)

    lt = [t for k in left for t in _asymptotic_terms(beta, alpha, k, _TAIL_TERMS)]
    rt = [t for k in right for t in _asymptotic_terms(beta, alpha, k, _TAIL_TERMS)]
    prod = multiply_terms(lt, rt)
    v0 = cutoff ** (alpha / beta)
    tail = (beta / alpha) * tail_integral(prod, v0, beta * (a + 1.0) / alpha - 1.0)
    # size of the first omitted algebraic term relative to the kept ones
    rel = 0.0
    for k in allk:
        x = k.c * cutoff ** alpha
        scale = mlf.magnitude_scale(beta, k.b, x)
        if scale > 0:
            rel = max(rel, mlf._envelope(beta, k.b, x, _TAIL_TERMS + 1) / scale)
    tail_bound = (2.0 * rel + 1e-15) * abs(tail)
    value = float(2.0 * (head + body + tail))
    return EnergyResult(value, 2.0 * (body_err + head_err), cutoff, 2.0 * tail_bound)


def energy_limit(p: ModelParams) -> float:
    """Upper end of the admissible range of the weight exponent a."""
    if p.is_wave:
        return p.alpha * min(1.0 + p.gamma, 2.0) - 1.0
    return 2.0 * p.alpha - 1.0


def _check_weight(p: ModelParams, a: float):
    hi = energy_limit(p)
    if not -1.0 < a < hi:
        raise DivergentIntegral(f"weight exponent a={a} outside (-1, {hi:.6g}); energy is infinite")


def weighted_energy(p: ModelParams, t: float, a: float, rtol: float = 1e-11) -> EnergyResult:
    """Integral of |F Y(t, .)(xi)|**2 |xi|**a over the real line."""
    if not t > 0:
        raise DomainError("t must be positive")
    _check_weight(p, a)
    k = _y_kernel(p, t)
    return spectral_integral(p.beta, p.alpha, [k], [k], a, rtol)


def cross_energy(p: ModelParams, r: float, s: float, a: float, rtol: float = 1e-11) -> EnergyResult:
    """Integral of F Y(r, .)(xi) F Y(s, .)(xi) |xi|**a over the real line."""
    if not (r > 0 and s > 0):
        raise DomainError("r and s must be positive")
    _check_weight(p, a)
    lo, hi = sorted((r, s))
    return spectral_integral(p.beta, p.alpha, [_y_kernel(p, lo)], [_y_kernel(p, hi)], a, rtol)


def c_constant(p: ModelParams, a: float, gamma1: float, gamma2: float,
               rtol: float = 1e-11) -> EnergyResult:
    """C_{a,g1,g2} = (nu/2)**(-(a+1)/alpha) * integral of E_{beta,g1} E_{beta,g2}(-|xi|**alpha) |xi|**a."""
    if p.is_wave:
        hi = min(2.0 * p.alpha, 0.5 * p.alpha * (gamma1 + gamma2 - 2.0)) - 1.0
    else:
        hi = 2.0 * p.alpha - 1.0
    if not -1.0 < a < hi:
        raise DivergentIntegral(f"weight exponent a={a} outside (-1, {hi:.6g}); constant is infinite")
    res = spectral_integral(p.beta, p.alpha, [_Kernel(1.0, 1.0, gamma1)], [_Kernel(1.0, 1.0, gamma2)], a, rtol)
    f = (0.5 * p.nu) ** (-(a + 1.0) / p.alpha)
    return EnergyResult(f * res.value, f * res.abs_err, res.cutoff, f * res.tail_bound)


def time_increment_energy(p: ModelParams, r: float, s: float, t: float, a: float,
                          rtol: float = 1e-12) -> EnergyResult:
    """Integral of |F Y(t-r, .) - F Y(s-r, .)|**2 |xi|**a over the real line."""
    if not (0.0 <= r < min(s, t)):
        raise DomainError("need 0 <= r < min(s, t)")
    if not a > -1.0 or a > 1.0 - 2.0 * p.H:
        raise DomainError(f"weight exponent a={a} must lie in (-1, 1-2H]")
    _check_weight(p, a)
    if s == t:
        return EnergyResult(0.0, 0.0, 0.0, 0.0)
    lo, hi = sorted((s - r, t - r))
    ks = [_y_kernel(p, hi), _y_kernel(p, lo, -1.0)]
    return spectral_integral(p.beta, p.alpha, ks, ks, a, rtol)
