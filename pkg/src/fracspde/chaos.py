"""Wiener chaos norms of the mild solution and the identities behind their bounds.

The n-th term of the second moment is n! ||f_n||^2.  With white time
(H0 = 1/2) it is

    lam^(2n) c_H^n  int_{T_n(t)} J0(s_1)^2 int_{R^n} prod_j |F Y(s_{j+1}-s_j)(eta_j)|^2
                    prod_j |eta_j - eta_{j-1}|^(1-2H) d eta ds,

with s_{n+1} = t and eta_0 = 0.  Writing the kernel as
F Y(r)(eta) = r^(b-1) E_{beta,b}(-(sigma(r) eta)^alpha) with
sigma(r) = (nu/2)^(1/alpha) r^(beta/alpha), the innermost time integral and the
outermost frequency integral reduce to two one-dimensional functions

    f_m(y) = int_0^1 u^(m+2b-2) g(u^l y) du,      k(y) = int_R g(z) |z-y|^(1-2H) dz,

where g(z) = E_{beta,b}(-|z|^alpha)^2 and l = beta/alpha.  Both are tabulated
once per (alpha, beta, b, H).  The case n = 2 is then a two-dimensional
integral done by nested Gauss-Kronrod panels; n = 3, 4 use scrambled Sobol
points over the remaining variables.
"""
from __future__ import annotations

import enum
import functools
import itertools
import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import binom, gammaincinv, gammaln
from scipy.stats import qmc

from . import mlf
from .cheb import PiecewiseChebyshev
from .errors import DivergentIntegral, DomainError, NonConvergence
from .kernels import (_Kernel, _asymptotic_terms, cross_energy, j0, weighted_energy)
from .params import ModelParams
from .quadrature import (ExpPowerTerm, adaptive_panels, gauss_jacobi, geometric_edges,
                         multiply_terms, tail_integral)
from .regimes import check_existence, theta

logger = logging.getLogger(__name__)

QMC_POINTS = 2 ** 20
QMC_REPLICATES = 16
# Default outer frequency cutoff in scaled units sigma(t) * Xi; smaller when the
# kernel oscillates because the tables then need many more panels.
DEFAULT_SCALED_CUTOFF = 2.0 ** 18
OSCILLATORY_SCALED_CUTOFF = 2.0 ** 10


def _default_scaled_cutoff(p: ModelParams) -> float:
    return DEFAULT_SCALED_CUTOFF if p.beta <= 1.0 else OSCILLATORY_SCALED_CUTOFF


class Method(str, enum.Enum):
    QUADRATURE = "Quadrature"
    QMC = "MonteCarloQuadrature"


@dataclass(frozen=True)
class ChaosNormResult:
    n: int
    value: float
    abs_err: float
    cutoff: float
    method: Method

    def as_dict(self) -> dict:
        return {"n": self.n, "value": self.value, "abs_err": self.abs_err,
                "cutoff": self.cutoff, "method": self.method.value}


# ---------------------------------------------------------------- multi-indices

@dataclass(frozen=True)
class MultiIndex:
    entries: tuple[float, ...]

    @property
    def n(self) -> int:
        return len(self.entries)


def multi_index_set(n: int, H: float) -> list[MultiIndex]:
    """The 2^(n-1) exponent vectors from expanding prod |eta_j - eta_{j-1}|^(1-2H).

    Each factor j >= 2 is bounded by |eta_{j-1}|^(1-2H) + |eta_j|^(1-2H); a
    subset J of {2..n} records which factors took the first option.
    """
    if n < 1:
        raise DomainError("n must be positive")
    a = 1.0 - 2.0 * H
    out = []
    for bits in itertools.product((False, True), repeat=n - 1):
        e = [0] * n
        e[0] = 1
        for j, take_prev in zip(range(1, n), bits):
            e[j - 1 if take_prev else j] += 1
        out.append(MultiIndex(tuple(a * k for k in e)))
    return out


# ---------------------------------------------------------------- closed-form identities

def dirichlet_simplex_integral(t: float, b: Sequence[float]) -> float:
    """Integral over 0 < s_1 < ... < s_n < t of prod_j (s_{j+1} - s_j)^b_j, s_{n+1} = t."""
    b = np.asarray(b, dtype=float)
    if b.ndim != 1 or b.size == 0:
        raise DomainError("b must be a nonempty vector")
    if np.any(b <= -1.0):
        raise DomainError("every exponent must exceed -1")
    if not t > 0:
        raise DomainError("t must be positive")
    n = b.size
    tot = float(b.sum())
    logv = float(np.sum(gammaln(b + 1.0))) - float(gammaln(tot + n + 1.0)) + (tot + n) * math.log(t)
    return math.exp(logv)


def gamma_ratio_asymptotic(a: float, b: float, n) -> np.ndarray:
    """Leading large-n form of Gamma(a n + b) / (n!)^a."""
    n = np.asarray(n, dtype=float)
    return ((2.0 * math.pi) ** (0.5 * (1.0 - a)) * np.exp((a * n + b - 0.5) * math.log(a))
            * n ** (b - 0.5 - 0.5 * a))


def gamma_factorial_bounds(a: float, b: float, n_max: int) -> tuple[float, float]:
    """(c, C) with c^n (n!)^a <= Gamma(a n + b) <= C^n (n!)^a for 1 <= n <= n_max.

    The asymptotic form fixes the geometric rate a^a; the constants absorb the
    remaining power of n and the small-n deviations, and are then checked
    directly on every n.
    """
    if not a > 0:
        raise DomainError("a must be positive")
    if n_max < 1:
        raise DomainError("n_max must be positive")
    n = np.arange(1, n_max + 1, dtype=float)
    if np.any(a * n + b <= 0):
        raise DomainError("a n + b must be positive for every n <= n_max")
    log_r = gammaln(a * n + b) - a * gammaln(n + 1.0)
    per_n = log_r / n
    c = math.exp(float(np.min(per_n)))
    C = math.exp(float(np.max(per_n)))
    # guard against the last bit of rounding in exp/log
    if np.any(n * math.log(c) > log_r + 1e-12 * np.maximum(1.0, np.abs(log_r))):
        c *= 1.0 - 1e-12
    if np.any(n * math.log(C) < log_r - 1e-12 * np.maximum(1.0, np.abs(log_r))):
        C *= 1.0 + 1e-12
    return c, C


def exp_weighted_ml_integral(p: ModelParams, eta: float, rtol: float = 1e-12) -> float:
    """Integral over r > 0 of e^(-r) r^(b-1) E_{beta,b}(-nu r^beta eta^alpha / 2), b = beta + gamma.

    The value is 1 / (1 + nu eta^alpha / 2); the quadrature result is checked
    against it and NonConvergence is raised on a mismatch above 1e-6.
    """
    hi = (2.0 / p.nu) ** (1.0 / p.alpha)
    if not 0.0 < eta < hi:
        raise DomainError(f"eta must lie in (0, {hi:.6g})")
    beta, b = p.beta, p.b_Y
    c = 0.5 * p.nu * eta ** p.alpha
    r0 = 1e-12
    r_hi = 80.0
    c0 = mlf.reciprocal_gamma(b)
    c1 = c * mlf.reciprocal_gamma(b + beta)
    head = c0 * r0 ** b / b - c1 * r0 ** (b + beta) / (b + beta) - c0 * r0 ** (b + 1.0) / (b + 1.0)

    def f(r):
        return np.exp(-r) * r ** (b - 1.0) * mlf.ml_neg(beta, b, c * r ** beta)

    edges = geometric_edges(r0, r_hi)
    edges = _split_oscillatory(edges, lambda r: c ** (1.0 / beta) * r, beta)
    body, _ = adaptive_panels(f, edges, rtol=rtol, atol=1e-300)
    value = head + body
    exact = 1.0 / (1.0 + c)
    if abs(value / exact - 1.0) > 1e-6:
        raise NonConvergence(f"quadrature {value!r} disagrees with {exact!r}")
    return value


def _split_oscillatory(edges, s_of, beta: float, damp_floor: float = 1e-20):
    """Split panels where E_{beta,.}(-x) oscillates, s = x^(1/beta), to <= pi/4 of phase of E^2."""
    if beta <= 1.0:
        return np.asarray(edges, dtype=float)
    edges = np.asarray(edges, dtype=float)
    s = s_of(edges)
    sig = math.sin(math.pi / beta)
    cth = math.cos(math.pi / beta)
    out = [edges[:1]]
    for i in range(len(edges) - 1):
        n = 1
        if beta == 2.0 or math.exp(2.0 * s[i] * cth) > damp_floor:
            n = max(1, int(math.ceil(2.0 * sig * (s[i + 1] - s[i]) / (0.25 * math.pi))))
        if n > 1:
            out.append(np.linspace(edges[i], edges[i + 1], n + 1)[1:])
        else:
            out.append(edges[i + 1:i + 2])
    return np.concatenate(out)


def _sine_integral(p: ModelParams) -> float:
    """Integral over R of sin^2(sqrt(nu/2) |eta|^(alpha/2)) |eta|^(1-2H-alpha)."""
    a = 1.0 - 2.0 * p.H
    k = math.sqrt(0.5 * p.nu)
    e = 2.0 * (a + 1.0 - p.alpha) / p.alpha
    pw = e - 1.0
    # in w = k eta^(alpha/2): 2 (2/alpha) k^(-e) int_0^inf sin^2(w) w^pw dw, -3 < pw < -1
    w0, w_hi = 1e-8, 256.0 * math.pi
    head = w0 ** (pw + 3.0) / (pw + 3.0)

    def f(w):
        return np.sin(w) ** 2 * w ** pw

    edges = np.union1d(geometric_edges(w0, 1.0), np.linspace(1.0, w_hi, 1025))
    body, _ = adaptive_panels(f, edges, rtol=1e-13, atol=1e-300)
    tail = tail_integral([ExpPowerTerm(0.5 + 0j, pw), ExpPowerTerm(-0.5 + 0j, pw, 2j)], w_hi)
    return 2.0 * (2.0 / p.alpha) * k ** (-e) * (head + body + tail)


def wave_cross_energy(p: ModelParams, r: float, s: float) -> float:
    """Integral over R of F Y(r)(eta) F Y(s)(eta) |eta|^(1-2H) for the wave kernel (beta=2, gamma=0)."""
    if not (p.beta == 2.0 and p.gamma == 0.0):
        raise DomainError("wave_cross_energy needs beta = 2 and gamma = 0")
    if not check_existence(p)[0]:
        raise DomainError("existence condition fails")
    if not (r > 0 and s > 0):
        raise DomainError("r and s must be positive")
    kap = (2.0 / p.alpha) * (p.alpha + 2.0 * p.H - 2.0)
    S = _sine_integral_cached(p.alpha, p.nu, p.H)
    return (2.0 / p.nu) * ((0.5 * (r + s)) ** kap - (0.5 * abs(r - s)) ** kap) * S


@functools.lru_cache(maxsize=64)
def _sine_integral_cached(alpha: float, nu: float, H: float) -> float:
    return _sine_integral(ModelParams(alpha=alpha, beta=2.0, gamma=0.0, nu=nu, H=H))


def hls_sharp_constant(H: float) -> float:
    """Best constant in the one-dimensional Hardy-Littlewood-Sobolev inequality used below."""
    return math.pi ** (1.5 - 2.0 * H) * math.gamma(H - 0.5) / math.gamma(H)


def hls_check_n1(H: float, phi, edges, C_H: float | None = None) -> tuple[float, float]:
    """Both sides of int int phi(t) phi(s) |t-s|^(2H-2) <= C_H (int |phi|^(1/H))^(2H).

    ``phi`` holds the values of a piecewise-constant function on the cells
    delimited by ``edges``.  The left side is evaluated exactly cell by cell.
    """
    if not 0.5 < H < 1.0:
        raise DomainError("H must lie in (1/2, 1)")
    phi = np.asarray(phi, dtype=float)
    edges = np.asarray(edges, dtype=float)
    if edges.shape != (phi.size + 1,) or np.any(np.diff(edges) <= 0):
        raise DomainError("edges must be increasing with one more entry than phi")
    if np.any(phi < 0):
        raise DomainError("phi must be nonnegative")
    if C_H is None:
        C_H = hls_sharp_constant(H)
    g = 2.0 * H - 2.0

    def G(x):
        return np.abs(x) ** (g + 2.0) / ((g + 1.0) * (g + 2.0))

    a, b = edges[:-1, None], edges[1:, None]
    c, d = edges[None, :-1], edges[None, 1:]
    block = G(b - c) - G(a - c) - G(b - d) + G(a - d)
    lhs = float(phi @ block @ phi)
    rhs = C_H * float(np.sum(phi ** (1.0 / H) * np.diff(edges))) ** (2.0 * H)
    return lhs, rhs


# ---------------------------------------------------------------- tables

def _first_algebraic_index(beta: float, b: float) -> float:
    """Index of the first nonzero term of the algebraic expansion of E_{beta,b}(-x)."""
    sign, _ = mlf._alg_coefficients(beta, b, 6)
    nz = np.nonzero(sign)[0]
    return float(nz[0] + 1) if nz.size else math.inf


def _f_decay(beta: float, alpha: float, b: float, m: int) -> float:
    """Exponent d with f_m(y) ~ y^(-d) as y -> infinity."""
    j0 = _first_algebraic_index(beta, b)
    d = alpha * min((m + 2.0 * b - 1.0) / beta, 2.0 * j0)
    if beta == 2.0:
        d = min(d, alpha * (b - 1.0))
    return d


def tail_exponent(p: ModelParams) -> float:
    """q such that the outer frequency density of the n = 2 term decays like |eta|^(-1-q)."""
    a = 1.0 - 2.0 * p.H
    return _f_decay(p.beta, p.alpha, p.b_Y, 0) - 2.0 * a - 1.0


class _Tables:
    """f_0, f_1, f_2 and k for one (beta, alpha, b, a) on [0, y_max]."""

    def __init__(self, beta: float, alpha: float, b: float, a: float, y_max: float):
        self.beta, self.alpha, self.b, self.a, self.y_max = beta, alpha, b, a, y_max
        self.ell = beta / alpha
        self.r0 = mlf.reciprocal_gamma(b)
        self.r1 = mlf.reciprocal_gamma(b + beta)
        self.g0 = self.r0 ** 2
        self.f_dec = [_f_decay(beta, alpha, b, m) for m in range(3)]
        wmax_f = math.log1p(y_max ** alpha)
        self.f_tab = [PiecewiseChebyshev(functools.partial(self._f_on_w, m), 0.0, wmax_f,
                                         rtol=1e-11, min_width=1e-6) for m in range(3)]
        self._setup_k_tail()
        self.k_tab = PiecewiseChebyshev(self._k_on_w, 0.0, math.log1p(y_max),
                                        rtol=1e-11, min_width=1e-6)
        self.f_end = [float(self.f_tab[m](np.array([wmax_f]))[0]) for m in range(3)]
        self.k_end = float(self.k_tab(np.array([math.log1p(y_max)]))[0])
        logger.debug("chaos tables beta=%g alpha=%g b=%g: f pieces %s, k pieces %d", beta, alpha, b,
                     [t.n_pieces for t in self.f_tab], self.k_tab.n_pieces)

    def g(self, z):
        return mlf.ml_neg(self.beta, self.b, np.abs(z) ** self.alpha) ** 2

    def _s_of(self, z):
        return np.abs(z) ** (self.alpha / self.beta)

    # f_m -----------------------------------------------------------------
    def _f_direct(self, m: int, y: float) -> float:
        pw = m + 2.0 * self.b - 2.0
        X = y ** self.alpha
        X0 = 1e-9
        # two-term Taylor head: E^2 ~ r0^2 - 2 r0 r1 x
        if X <= X0:
            return self.g0 / (pw + 1.0) - 2.0 * self.r0 * self.r1 * X / (pw + 1.0 + self.beta)
        u0 = (X0 / X) ** (1.0 / self.beta)
        head = self.g0 * u0 ** (pw + 1.0) / (pw + 1.0) \
            - 2.0 * self.r0 * self.r1 * X * u0 ** (pw + 1.0 + self.beta) / (pw + 1.0 + self.beta)

        def fun(u):
            return u ** pw * mlf.ml_neg(self.beta, self.b, X * u ** self.beta) ** 2

        edges = _split_oscillatory(geometric_edges(u0, 1.0), lambda u: (X * u ** self.beta) ** (1.0 / self.beta),
                                   self.beta)
        body, _ = adaptive_panels(fun, edges, rtol=1e-12, atol=1e-300)
        return head + body

    def _f_on_w(self, m, w):
        y = np.expm1(w) ** (1.0 / self.alpha)
        return np.array([self._f_direct(m, float(v)) for v in y])

    def f(self, m: int, y):
        y = np.abs(np.asarray(y, dtype=float))
        inside = y <= self.y_max
        out = np.empty_like(y)
        out[inside] = self.f_tab[m](np.log1p(y[inside] ** self.alpha))
        yo = y[~inside]
        out[~inside] = self.f_end[m] * (yo / self.y_max) ** (-self.f_dec[m])
        return out

    # k -------------------------------------------------------------------
    def _setup_k_tail(self):
        beta, alpha = self.beta, self.alpha
        x_tail = max(1e4, 2.0 * mlf.VECTOR_CROSSOVER ** beta)
        self.z0 = max(4.0 * self.y_max, x_tail ** (1.0 / alpha))
        terms = _asymptotic_terms(beta, alpha, _Kernel(1.0, 1.0, self.b), 8)
        prod = multiply_terms(terms, terms)
        v0 = self.z0 ** (alpha / beta)
        self.k_moments = []
        for j in range(0, 24, 2):
            ex = beta * (self.a - j + 1.0) / alpha - 1.0
            self.k_moments.append((j, (beta / alpha) * tail_integral(prod, v0, ex)))
        self.z_eps = 1e-9 ** (1.0 / alpha)

    def _k_direct(self, y: float) -> float:
        a, eps, z0 = self.a, self.z_eps, self.z0
        # head on [0, eps] with g frozen at g(0)
        if y >= eps:
            h1 = (y ** (a + 1.0) - (y - eps) ** (a + 1.0)) / (a + 1.0)
        else:
            h1 = (y ** (a + 1.0) + (eps - y) ** (a + 1.0)) / (a + 1.0)
        h2 = ((eps + y) ** (a + 1.0) - y ** (a + 1.0)) / (a + 1.0)
        head = self.g0 * (h1 + h2)

        def fun(z):
            return self.g(z) * (np.abs(z - y) ** a + (z + y) ** a)

        edges = geometric_edges(eps, z0)
        if y > 2.0 * eps:
            near = y * (1.0 - 2.0 ** -np.arange(1, 40))
            near = np.concatenate([near, [y], y * (1.0 + 2.0 ** -np.arange(1, 40))])
            edges = np.union1d(edges, near[(near > eps) & (near < z0)])
        edges = _split_oscillatory(edges, self._s_of, self.beta)
        body, _ = adaptive_panels(fun, edges, rtol=1e-12, atol=1e-300)
        tail = 0.0
        for j, mom in self.k_moments:
            tail += 2.0 * binom(a, j) * y ** j * mom
        return head + body + tail

    def _k_on_w(self, w):
        y = np.expm1(w)
        return np.array([self._k_direct(float(v)) for v in y])

    def k(self, y):
        y = np.abs(np.asarray(y, dtype=float))
        inside = y <= self.y_max
        out = np.empty_like(y)
        out[inside] = self.k_tab(np.log1p(y[inside]))
        out[~inside] = self.k_end * (y[~inside] / self.y_max) ** self.a
        return out


@functools.lru_cache(maxsize=32)
def _tables(beta: float, alpha: float, b: float, a: float, y_max: float) -> _Tables:
    return _Tables(beta, alpha, b, a, y_max)


def _tables_for(p: ModelParams, y_needed: float) -> _Tables:
    y_max = 2.0 ** max(4, math.ceil(math.log2(y_needed)))
    return _tables(p.beta, p.alpha, p.b_Y, 1.0 - 2.0 * p.H, y_max)


# ---------------------------------------------------------------- white-time norms

def _sigma(p: ModelParams, r):
    return (0.5 * p.nu) ** (1.0 / p.alpha) * np.asarray(r, dtype=float) ** (p.beta / p.alpha)


def _j0_sq_coeffs(p: ModelParams, T):
    """A_m(T) with J0(T - r)^2 = sum_m A_m(T) r^m."""
    T = np.asarray(T, dtype=float)
    if p.beta <= 1.0 or p.mu1 == 0.0:
        return [np.full_like(T, p.mu0 ** 2)]
    A = p.mu0 + p.mu1 * T
    return [A * A, -2.0 * p.mu1 * A, np.full_like(T, p.mu1 ** 2)]


def _require_white(p: ModelParams, n: int):
    if p.H0 != 0.5:
        raise DomainError("white-time norms need H0 = 1/2")
    if not 1 <= n <= 4:
        raise DomainError("n must be 1, 2, 3 or 4")
    if not check_existence(p)[0]:
        raise DivergentIntegral("existence condition fails; the chaos norms are infinite")


def _norm_n1(p: ModelParams, t: float) -> ChaosNormResult:
    a = 1.0 - 2.0 * p.H
    e = 2.0 * p.b_Y - 2.0 - p.beta * (1.0 + a) / p.alpha
    if e <= -1.0:
        raise DivergentIntegral("first chaos term is infinite")
    w = weighted_energy(p, 1.0, a)
    # int_0^t J0(s)^2 (t-s)^e ds with J0 affine in s
    if p.beta <= 1.0 or p.mu1 == 0.0:
        poly = [p.mu0 ** 2]
    else:
        poly = [p.mu0 ** 2, 2.0 * p.mu0 * p.mu1, p.mu1 ** 2]
    s = 0.0
    for k, ck in enumerate(poly):
        s += ck * t ** (k + e + 1.0) * math.exp(gammaln(k + 1.0) + gammaln(e + 1.0) - gammaln(k + e + 2.0))
    pref = p.lam ** 2 * p.c_H
    return ChaosNormResult(1, pref * w.value * s, pref * (w.abs_err + w.tail_bound) * abs(s),
                           math.inf, Method.QUADRATURE)


def _n2_density(p: ModelParams, tab: _Tables, t: float, y: np.ndarray) -> np.ndarray:
    """Outer frequency density D(y) (both signs of y), scaled units."""
    a, ell, b = tab.a, tab.ell, tab.b
    es = 2.0 * b - 2.0 - ell * (1.0 + a)
    ymax = float(np.max(y))
    lo = min(1e-10, (1e-6 / max(ymax, 1.0)) ** (1.0 / ell))
    ratio = 2.0 ** min(1.0, 1.0 / ell)
    nseg = int(math.ceil(math.log(0.5 / lo) / math.log(ratio)))
    e1 = 0.5 * ratio ** -np.arange(nseg, -1, -1)
    x_gk, w_gk = _gk()
    left = e1[:-1, None] + 0.5 * np.diff(e1)[:, None] * (x_gk[None, :] + 1.0)
    lw = 0.5 * np.diff(e1)[:, None] * w_gk[None, :]
    v = np.concatenate([left.ravel(), 1.0 - left.ravel()[::-1]])
    wv = np.concatenate([lw.ravel(), lw.ravel()[::-1]])
    lo_v = e1[0]

    yy = y.reshape(-1, 1)
    vv = v.reshape(1, -1)
    kv = tab.k(vv ** ell * yy)
    T = t * (1.0 - v)
    F = np.zeros_like(kv)
    for m, Am in enumerate(_j0_sq_coeffs(p, T)):
        F += (Am * T ** (2.0 * b - 1.0 + m))[None, :] * tab.f(m, (1.0 - vv) ** ell * yy)
    inner = (kv * F * vv ** es) @ wv
    # v < lo_v: k and f frozen at their v = 0 values
    k0 = tab.k(np.zeros(1))[0]
    F0 = np.zeros(yy.shape[0])
    for m, Am in enumerate(_j0_sq_coeffs(p, np.array([t]))):
        F0 += Am[0] * t ** (2.0 * b - 1.0 + m) * tab.f(m, y.ravel())
    inner += k0 * F0 * lo_v ** (es + 1.0) / (es + 1.0)
    # 1 - v < lo_v contributes O(lo_v^(2b)); dropped
    return (2.0 * np.abs(y.ravel()) ** a * inner).reshape(y.shape)


@functools.lru_cache(maxsize=1)
def _gk():
    from .quadrature import GK_NODES, GK_WEIGHTS
    return GK_NODES, GK_WEIGHTS


def _norm_n2(p: ModelParams, t: float, cutoff: float | None, extrapolate: bool = True) -> ChaosNormResult:
    a = 1.0 - 2.0 * p.H
    sig_t = float(_sigma(p, t))
    Y = _default_scaled_cutoff(p) if cutoff is None else sig_t * cutoff
    q = tail_exponent(p)
    if extrapolate and q <= 0:
        raise DivergentIntegral(f"outer frequency integral diverges (tail exponent {q:.4g} <= 0)")
    tab = _tables_for(p, Y)
    b = p.b_Y
    pref = p.lam ** 4 * p.c_H ** 2 * t ** (2.0 * b - 1.0) * sig_t ** (-2.0 - 2.0 * a)

    def dens(y):
        return _n2_density(p, tab, t, y)

    y_lo = 1e-8
    edges = geometric_edges(y_lo, Y)
    val, err = adaptive_panels(dens, edges, rtol=1e-10, atol=1e-300)
    head = float(dens(np.array([y_lo]))[0]) * y_lo / (a + 1.0)
    value = head + val
    tail = tail_err = 0.0
    if extrapolate:
        i1, _ = adaptive_panels(dens, geometric_edges(0.5 * Y, Y), rtol=1e-10, atol=1e-300)
        i0, _ = adaptive_panels(dens, geometric_edges(0.25 * Y, 0.5 * Y), rtol=1e-10, atol=1e-300)
        g = 2.0 ** q - 1.0
        tail = i1 / g
        tail_err = abs(i1 - 2.0 ** -q * i0) / g
    total = pref * (value + tail)
    return ChaosNormResult(2, total, pref * (err + tail_err) + 1e-10 * abs(total), Y / sig_t,
                           Method.QUADRATURE)


def _dirichlet_exponents(p: ModelParams, n: int) -> np.ndarray:
    a = 1.0 - 2.0 * p.H
    ell = p.beta / p.alpha
    b = p.b_Y
    kap = np.empty(n)
    kap[0] = 2.0 * b - ell * (1.0 + 2.0 * a)
    kap[1:n - 1] = 2.0 * b - 1.0 - ell * (1.0 + 2.0 * a)
    kap[n - 1] = 2.0 * b - 1.0 - ell * (1.0 + a)
    if np.any(kap <= 0):
        raise DivergentIntegral("time singularity of the chaos integrand is not integrable")
    return np.minimum(0.8 * kap, 1.0)


def _heavy_sample(u, kz):
    """Symmetric density kz/2 (1+|z|)^(-1-kz): returns z and its density."""
    sgn = np.where(u < 0.5, -1.0, 1.0)
    w = np.abs(2.0 * u - 1.0)
    z = (1.0 - w) ** (-1.0 / kz) - 1.0
    dens = 0.5 * kz * (1.0 + z) ** (-1.0 - kz)
    return sgn * z, dens


def _qmc_white_batch(p: ModelParams, tab: _Tables, n: int, t: float, u: np.ndarray) -> np.ndarray:
    """Importance-weighted integrand values for one block of points in [0,1)^(2n-1)."""
    a, ell, b = tab.a, tab.ell, tab.b
    kap = _dirichlet_exponents(p, n)
    kz = 0.8 * min(tail_exponent(p), 1.0)
    if kz <= 0:
        raise DivergentIntegral("outer frequency integral diverges")
    G = gammaincinv(kap[None, :], np.clip(u[:, :n], 1e-300, None))
    G = np.maximum(G, 1e-300)
    D = G / G.sum(axis=1, keepdims=True)
    x = t * D                                     # (T, r_2, ..., r_n)
    log_pdf = (gammaln(kap.sum()) - float(np.sum(gammaln(kap)))
               + np.sum((kap - 1.0)[None, :] * np.log(D), axis=1) - (n - 1) * math.log(t))
    T = x[:, 0]
    weight = np.exp(-log_pdf)
    etas = []
    for j in range(n - 1):
        r = T if j == 0 else x[:, j]
        scale = 1.0 / _sigma(p, r)
        z, dz = _heavy_sample(u[:, n + j], kz)
        eta = scale * z
        weight = weight * scale / dz
        etas.append(eta)
    # first block: integral over r_1 already folded into f_m
    F = np.zeros_like(T)
    sT = _sigma(p, T)
    for m, Am in enumerate(_j0_sq_coeffs(p, T)):
        F += Am * T ** (2.0 * b - 1.0 + m) * tab.f(m, sT * etas[0])
    val = F * np.abs(etas[0]) ** a
    for j in range(1, n - 1):
        r = x[:, j]
        val = val * r ** (2.0 * b - 2.0) * tab.g(_sigma(p, r) * etas[j]) * np.abs(etas[j] - etas[j - 1]) ** a
    rn = x[:, n - 1]
    sn = _sigma(p, rn)
    val = val * rn ** (2.0 * b - 2.0) * sn ** (-1.0 - a) * tab.k(sn * etas[n - 2])
    return val * weight


def _qmc_estimate(batch, dim: int, n_points: int, replicates: int, seed: int):
    per = max(1, n_points // replicates)
    m = int(round(math.log2(per)))
    means = []
    for rep in range(replicates):
        eng = qmc.Sobol(d=dim, scramble=True, seed=np.random.default_rng([seed, rep]))
        u = eng.random_base2(m)
        chunk = 2 ** 15
        acc = []
        for i in range(0, u.shape[0], chunk):
            acc.append(np.sum(batch(u[i:i + chunk])))
        means.append(math.fsum(acc) / u.shape[0])
    means = np.array(means)
    est = float(np.mean(means))
    se = float(np.std(means, ddof=1) / math.sqrt(replicates)) if replicates > 1 else math.inf
    return est, se


def _norm_qmc_white(p: ModelParams, n: int, t: float, n_points: int, seed: int,
                    replicates: int = QMC_REPLICATES) -> ChaosNormResult:
    tab = _tables_for(p, _default_scaled_cutoff(p))
    pref = p.lam ** (2 * n) * p.c_H ** n
    est, se = _qmc_estimate(lambda u: _qmc_white_batch(p, tab, n, t, u), 2 * n - 1,
                            n_points, replicates, seed)
    return ChaosNormResult(n, pref * est, pref * se, math.inf, Method.QMC)


def chaos_norm_white(p: ModelParams, n: int, t: float, cutoff: float | None = None,
                     method: Method | str | None = None, n_points: int = QMC_POINTS,
                     seed: int = 0) -> ChaosNormResult:
    """n! ||f_n(., t, x)||^2 for white time noise, n = 1..4.

    n = 1 uses the exact time scaling of the weighted energy; n = 2 is a nested
    quadrature with the outer frequency cut at ``cutoff`` (physical units) and
    the power-law remainder added; n = 3, 4 use scrambled Sobol points.
    ``method="MonteCarloQuadrature"`` forces the Sobol estimator for n >= 2.
    """
    _require_white(p, n)
    if not t > 0:
        raise DomainError("t must be positive")
    method = Method(method) if method is not None else None
    if p.lam == 0.0:
        m = Method.QUADRATURE if n <= 2 else Method.QMC
        return ChaosNormResult(n, 0.0, 0.0, math.inf if cutoff is None else cutoff, m)
    if n == 1:
        return _norm_n1(p, t)
    if method is Method.QMC or n >= 3:
        return _norm_qmc_white(p, n, t, n_points, seed)
    return _norm_n2(p, t, cutoff)


def chaos_norm_white_truncated(p: ModelParams, t: float, cutoff: float) -> ChaosNormResult:
    """Second chaos term with every frequency beyond ``cutoff`` dropped and no tail added.

    Defined whether or not the full integral converges; used to diagnose divergence.
    """
    if p.H0 != 0.5:
        raise DomainError("white-time norms need H0 = 1/2")
    return _norm_n2(p, t, cutoff, extrapolate=False)


def diagnose_divergence(p: ModelParams, t: float, cutoffs: Sequence[float],
                        growth: float = 0.05) -> tuple[bool, list[float]]:
    """True when the truncated second term grows by more than ``growth`` at every step."""
    vals = [chaos_norm_white_truncated(p, t, c).value for c in cutoffs]
    ratios = [vals[i + 1] / vals[i] for i in range(len(vals) - 1)]
    return all(r > 1.0 + growth for r in ratios), vals


# ---------------------------------------------------------------- fractional time

def _frac_weight(H0: float) -> float:
    return H0 * (2.0 * H0 - 1.0)


def _norm_frac_n1(p: ModelParams, t: float, rtol: float = 1e-9) -> ChaosNormResult:
    a = 1.0 - 2.0 * p.H
    deg = 2.0 * p.b_Y - 2.0 - p.beta * (1.0 + a) / p.alpha
    if 2.0 * p.H0 + deg <= 0:
        raise DivergentIntegral("first chaos term is infinite")
    if p.beta <= 1.0 or p.mu1 == 0.0:
        A = p.mu0
        polys = [lambda rho: np.full_like(rho, A * A)]
    else:
        A = p.mu0 + p.mu1 * t
        polys = [lambda rho: np.full_like(rho, A * A),
                 lambda rho: -A * p.mu1 * (1.0 + rho),
                 lambda rho: p.mu1 ** 2 * rho]
    g = 2.0 * p.H0 - 2.0

    def chi(rho):
        return np.array([cross_energy(p, float(r), 1.0, a, rtol=rtol).value for r in np.ravel(rho)]).reshape(
            np.shape(rho))

    def integrand(rho):
        c = chi(rho)
        return sum(P(rho) * c * t ** (2.0 * p.H0 + deg + k) / (2.0 * p.H0 + deg + k)
                   for k, P in enumerate(polys))

    # [1/2, 1]: Gauss-Jacobi for the (1 - rho)^(2H0-2) weight
    x, w = gauss_jacobi(24, g, 0.0, 0.5, 1.0)
    right = float(np.dot(w, integrand(x)))
    # [0, 1/2]: dyadic panels towards 0, stopped once their share is negligible
    xl, wl = np.polynomial.legendre.leggauss(8)
    left = 0.0
    hi = 0.5
    prev = math.inf
    for _ in range(200):
        lo = 0.5 * hi
        nodes = lo + 0.5 * (hi - lo) * (xl + 1.0)
        part = 0.5 * (hi - lo) * float(np.dot(wl, (1.0 - nodes) ** g * integrand(nodes)))
        left += part
        if abs(part) < 1e-10 * abs(left + right) and abs(prev) < 1e-9 * abs(left + right):
            break
        prev = part
        hi = lo
    pref = 2.0 * p.lam ** 2 * p.c_H * _frac_weight(p.H0)
    total = pref * (left + right)
    return ChaosNormResult(1, total, 1e-7 * abs(total), math.inf, Method.QUADRATURE)


def _fy(p: ModelParams, r, eta):
    b = p.b_Y
    x = 0.5 * p.nu * r ** p.beta * np.abs(eta) ** p.alpha
    return r ** (b - 1.0) * mlf.ml_neg(p.beta, b, x)


def _qmc_frac2_batch(p: ModelParams, t: float, u: np.ndarray) -> np.ndarray:
    a = 1.0 - 2.0 * p.H
    H0 = p.H0
    e = 2.0 * H0 - 1.0
    s = t * u[:, 0:2]
    r = np.empty_like(s)
    weight = np.full(u.shape[0], t * t)
    for j in range(2):
        L = s[:, j] ** e
        R = (t - s[:, j]) ** e
        left = u[:, 2 + j] * (L + R) < L
        # distance drawn with density proportional to d^(2H0-2) on the chosen side
        uu = np.where(left, u[:, 2 + j] * (L + R) / L, (u[:, 2 + j] * (L + R) - L) / R)
        uu = np.clip(uu, 1e-300, 1.0)
        d = np.where(left, (uu * L) ** (1.0 / e), (uu * R) ** (1.0 / e))
        r[:, j] = np.where(left, s[:, j] - d, s[:, j] + d)
        weight = weight * H0 * (L + R)
    order_s = s[:, 0] <= s[:, 1]
    order_r = r[:, 0] <= r[:, 1]
    s_lo, s_hi = np.minimum(s[:, 0], s[:, 1]), np.maximum(s[:, 0], s[:, 1])
    r_lo, r_hi = np.minimum(r[:, 0], r[:, 1]), np.maximum(r[:, 0], r[:, 1])
    kz = 0.8 * min(tail_exponent(p), 1.0)
    if kz <= 0:
        raise DivergentIntegral("spectral integral diverges")
    sc1 = 1.0 / _sigma(p, np.minimum(s_hi - s_lo, r_hi - r_lo))
    sc2 = 1.0 / _sigma(p, np.minimum(t - s_hi, t - r_hi))
    z1, d1 = _heavy_sample(u[:, 4], kz)
    z2, d2 = _heavy_sample(u[:, 5], kz)
    A = sc1 * z1
    eta2 = sc2 * z2
    weight = weight * sc1 / d1 * sc2 / d2
    B = np.where(order_s == order_r, A, eta2 - A)
    val = (j0(p, s_lo) * j0(p, r_lo)
           * _fy(p, s_hi - s_lo, A) * _fy(p, t - s_hi, eta2)
           * _fy(p, r_hi - r_lo, B) * _fy(p, t - r_hi, eta2)
           * np.abs(A) ** a * np.abs(eta2 - A) ** a)
    return 0.5 * val * weight


def chaos_norm_fractional(p: ModelParams, n: int, t: float, n_points: int = QMC_POINTS,
                          seed: int = 0) -> ChaosNormResult:
    """n! ||f_n(., t, x)||^2 for fractional time noise H0 in (1/2, 1), n = 1, 2."""
    if not 0.5 < p.H0 < 1.0:
        raise DomainError("fractional-time norms need H0 in (1/2, 1)")
    if n not in (1, 2):
        raise DomainError("n must be 1 or 2")
    if not t > 0:
        raise DomainError("t must be positive")
    if not check_existence(p)[0]:
        raise DivergentIntegral("existence condition fails; the chaos norms are infinite")
    if p.lam == 0.0:
        return ChaosNormResult(n, 0.0, 0.0, math.inf, Method.QUADRATURE if n == 1 else Method.QMC)
    if n == 1:
        return _norm_frac_n1(p, t)
    pref = p.lam ** 4 * p.c_H ** 2
    est, se = _qmc_estimate(lambda u: _qmc_frac2_batch(p, t, u), 6, n_points, QMC_REPLICATES, seed)
    return ChaosNormResult(2, pref * est, pref * se, math.inf, Method.QMC)


# ---------------------------------------------------------------- bounds

def chaos_upper_bound_term(p: ModelParams, n: int, t: float, C_user: float) -> float:
    """C^n lam^(2n) J0(t)^2 (n!)^(2H0-1) (t^(n(theta+1)) / Gamma(n(theta+1)+1))^(2H0)."""
    ok, _ = check_existence(p)
    if not ok:
        raise DomainError("existence condition fails")
    if n < 0:
        raise DomainError("n must be nonnegative")
    J = j0(p, t)
    if n == 0:
        return J * J
    th1 = theta(p) + 1.0
    if p.lam == 0.0:
        return 0.0
    logv = (n * math.log(C_user) + 2 * n * math.log(abs(p.lam)) + (2.0 * p.H0 - 1.0) * gammaln(n + 1.0)
            + 2.0 * p.H0 * (n * th1 * math.log(t) - gammaln(n * th1 + 1.0)))
    return J * J * math.exp(logv)


def chaos_lower_bound_shape(p: ModelParams, n: int, t: float, c: float) -> float:
    """c^n lam^(2n) mu0^2 t^(n(theta+1)) / Gamma(n(theta+1)+1).

    The lower bound is only established for beta <= 1 and for the wave case
    with gamma = 0.
    """
    if not (p.beta <= 1.0 or (p.is_wave and p.gamma == 0.0)):
        raise DomainError("lower bound needs beta <= 1, or beta = 2 with gamma = 0")
    if n == 0:
        return p.mu0 ** 2
    if p.lam == 0.0:
        return 0.0
    th1 = theta(p) + 1.0
    logv = (n * math.log(c) + 2 * n * math.log(abs(p.lam)) + n * th1 * math.log(t)
            - gammaln(n * th1 + 1.0))
    return p.mu0 ** 2 * math.exp(logv)


def fit_sandwich_constants(p: ModelParams, t: float, safety: float = 2.0) -> tuple[float, float]:
    """(c, C_user) fitted on the first chaos term and widened by ``safety``."""
    v1 = chaos_norm_white(p, 1, t).value
    c = v1 / chaos_lower_bound_shape(p, 1, t, 1.0) / safety
    C = v1 / chaos_upper_bound_term(p, 1, t, 1.0) * safety
    return c, C


def chaos_dn_bound(p: ModelParams, n: int, t: float) -> float:
    """Upper bound for the n-th white-time term obtained by splitting the frequency factor over D_n.

    Valid for H0 = 1/2; every piece is a product of weighted energies
    integrated over the simplex in closed form.
    """
    _require_white(p, n)
    a = 1.0 - 2.0 * p.H
    tot = 0.0
    for mi in multi_index_set(n, p.H):
        prod = 1.0
        ex = []
        for aj in mi.entries:
            prod *= weighted_energy(p, 1.0, aj).value
            ex.append(2.0 * p.b_Y - 2.0 - p.beta * (aj + 1.0) / p.alpha)
        tot += prod * dirichlet_simplex_integral(t, ex)
    J = j0(p, t)
    return p.lam ** (2 * n) * p.c_H ** n * J * J * tot


def factorial_series_bound(a: float) -> tuple[float, float]:
    """(C1, C2) with sum_n x^n / (n!)^a <= C1 exp(C2 x^(1/a)) for all x > 0.

    With y = x^(1/a) the terms are (y^n/n!)^a.  For a >= 1 the l^a norm is
    below the l^1 norm, giving exp(a y).  For a < 1, Hoelder's inequality with
    geometric weights 2^(-n) gives 2^(1-a) exp(a 2^((1-a)/a) y).
    """
    if not a > 0:
        raise DomainError("a must be positive")
    if a >= 1.0:
        return 1.0, a
    return 2.0 ** (1.0 - a), a * 2.0 ** ((1.0 - a) / a)


def upper_series_envelope(p: ModelParams, t: float, C_user: float, n_max: int = 200) -> tuple[float, float]:
    """(K1, K2) bounding the partial sums of chaos_upper_bound_term up to n_max.

    sum_{n <= n_max} term(n) <= K1 exp(K2 |lam|^(2/A) t^(2 H0 (theta+1) / A)), A = 2 H0 theta + 1.
    Gamma(n(theta+1)+1) is bounded below by c^n (n!)^(theta+1) on n <= n_max,
    which turns the series into one of the form sum x^n/(n!)^A.
    """
    th1 = theta(p) + 1.0
    A = 2.0 * p.H0 * theta(p) + 1.0
    if not A > 0:
        raise DomainError("2 H0 theta + 1 must be positive")
    c, _ = gamma_factorial_bounds(th1, 1.0, n_max)
    C1, C2 = factorial_series_bound(A)
    J = j0(p, t)
    return J * J * C1, C2 * (C_user * c ** (-2.0 * p.H0)) ** (1.0 / A)


def second_moment_truncated(p: ModelParams, t: float, N: int, **kw) -> tuple[float, list[ChaosNormResult]]:
    """J0(t)^2 plus the chaos terms n = 1..N, and the per-term results (n = 0 first)."""
    if not 0 <= N <= 4:
        raise DomainError("N must lie in 0..4")
    if p.H0 != 0.5 and N > 2:
        raise DomainError("fractional-time terms are available for N <= 2 only")
    J = j0(p, t)
    terms = [ChaosNormResult(0, J * J, 0.0, math.inf, Method.QUADRATURE)]
    for n in range(1, N + 1):
        if p.H0 == 0.5:
            terms.append(chaos_norm_white(p, n, t, **kw))
        else:
            terms.append(chaos_norm_fractional(p, n, t, **kw))
    return math.fsum(r.value for r in terms), terms
