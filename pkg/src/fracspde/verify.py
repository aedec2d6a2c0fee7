"""Identity and property checks grouped by module, run by ``fracspde verify``."""
from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import gamma as gamma_fn

from . import chaos, kernels, mlf, regimes, sim
from .params import ModelParams


@dataclass(frozen=True)
class CheckResult:
    suite: str
    name: str
    passed: bool
    detail: str
    seconds: float


Check = Callable[[], tuple[bool, str]]
SUITES: dict[str, list[tuple[str, Check]]] = {}


def check(suite: str, name: str):
    def deco(fn):
        SUITES.setdefault(suite, []).append((name, fn))
        return fn
    return deco


def _ml(a, b, z):
    return mlf.ml_eval(mlf.MLQuery(a, b, z)).value


# ---------------------------------------------------------------- mlf

@check("mlf", "E_{1,1}(-x) = exp(-x)")
def _mlf_exp():
    x = np.linspace(0.0, 50.0, 500)
    err = max(abs(_ml(1.0, 1.0, -v) - math.exp(-v)) for v in x)
    return err <= 1e-9, f"max abs err {err:.2e}"


@check("mlf", "E_{2,1}(-x^2) = cos x")
def _mlf_cos():
    x = np.linspace(0.0, 30.0, 500)
    err = max(abs(_ml(2.0, 1.0, -v * v) - math.cos(v)) for v in x)
    return err <= 1e-9, f"max abs err {err:.2e}"


@check("mlf", "E_{2,2}(-x^2) = sin(x)/x")
def _mlf_sinc():
    x = np.linspace(1e-3, 30.0, 500)
    err = max(abs(_ml(2.0, 2.0, -v * v) - math.sin(v) / v) for v in x)
    return err <= 1e-9, f"max abs err {err:.2e}"


@check("mlf", "vectorized table agrees with scalar evaluation")
def _mlf_table():
    rng = np.random.default_rng(11)
    worst = 0.0
    for _ in range(10):
        a, b = rng.uniform(0.2, 2.0), rng.uniform(0.2, 3.0)
        x = rng.uniform(0.0, 40.0, 20)
        v = mlf.ml_neg(a, b, x)
        ref = np.array([_ml(a, b, -xi) for xi in x])
        scale = np.array([max(abs(r), mlf.magnitude_scale(a, b, xi)) for r, xi in zip(ref, x)])
        worst = max(worst, float(np.max(np.abs(v - ref) / scale)))
    return worst <= 1e-9, f"max scaled err {worst:.2e}"


@check("mlf", "series and asymptotic expansion agree past the crossover")
def _mlf_overlap():
    rng = np.random.default_rng(12)
    worst = 0.0
    for _ in range(40):
        a, b = rng.uniform(0.3, 1.9), rng.uniform(0.3, 3.0)
        s = (mlf.crossover(a) ** (1.0 / a)) + rng.uniform(0.0, mlf.OVERLAP_WIDTH)
        z = -s ** a
        ser = mlf.ml_series(mlf.MLQuery(a, b, z)).value
        asy = mlf.ml_asymptotic(a, b, z).value
        worst = max(worst, abs(ser - asy) / max(abs(asy), mlf.magnitude_scale(a, b, -z)))
    return worst <= 1e-9, f"max scaled diff {worst:.2e}"


@check("mlf", "derivative identity against finite differences")
def _mlf_derivative():
    rng = np.random.default_rng(13)
    worst = 0.0
    for _ in range(20):
        a, b = rng.uniform(0.3, 2.0), rng.uniform(1.5, 3.0)
        lam, z = -rng.uniform(0.1, 2.0), rng.uniform(0.5, 2.0)
        h = 1e-4 * z

        def f(x):
            return x ** (b - 1) * _ml(a, b, lam * x ** a)

        fd = (f(z + h) - f(z - h)) / (2 * h)
        ex = mlf.ml_weighted_derivative(a, b, lam, z, 1)
        worst = max(worst, abs(fd - ex) / max(abs(ex), 1e-300))
    return worst <= 1e-5, f"max rel err {worst:.2e}"


# ---------------------------------------------------------------- kernels

@check("kernels", "heat weighted energy closed form")
def _k_heat():
    p = ModelParams(H=0.3)
    worst = 0.0
    for t, a in ((0.5, 0.0), (2.0, 0.4), (1.0, -0.5)):
        v = kernels.weighted_energy(p, t, a).value
        ex = gamma_fn((a + 1) / 2) * (p.nu * t) ** (-(a + 1) / 2)
        worst = max(worst, abs(v / ex - 1))
    return worst <= 1e-8, f"max rel err {worst:.2e}"


@check("kernels", "weighted energy scaling law in t")
def _k_scaling():
    rng = np.random.default_rng(21)
    worst = 0.0
    for _ in range(5):
        beta = rng.uniform(0.3, 1.9)
        alpha = rng.uniform(1.0, 2.0)
        p = ModelParams(alpha=alpha, beta=beta, gamma=rng.uniform(0.0, 0.5), H=0.4)
        a = rng.uniform(-0.5, min(0.2, kernels.energy_limit(p) - 0.1))
        e1 = kernels.weighted_energy(p, 0.7, a).value
        e2 = kernels.weighted_energy(p, 1.9, a).value
        slope = math.log(e2 / e1) / math.log(1.9 / 0.7)
        ex = 2 * beta + 2 * p.gamma - 2 - beta * (a + 1) / alpha
        worst = max(worst, abs(slope - ex) / max(abs(ex), 1e-3))
    return worst <= 1e-5, f"max rel err {worst:.2e}"


@check("kernels", "cross energy reduces to weighted energy at r = s")
def _k_cross():
    p = ModelParams(alpha=1.5, beta=0.7, gamma=0.2, H=0.4)
    v = kernels.cross_energy(p, 0.8, 0.8, 0.1).value
    w = kernels.weighted_energy(p, 0.8, 0.1).value
    return abs(v / w - 1) <= 1e-10, f"rel diff {abs(v / w - 1):.2e}"


@check("kernels", "time increment energy vanishes at s = t and is positive otherwise")
def _k_increment():
    p = ModelParams(H=0.3)
    z = kernels.time_increment_energy(p, 0.0, 1.0, 1.0, 0.0).value
    v = kernels.time_increment_energy(p, 0.0, 1.0, 2.0, 0.0).value
    ex = math.sqrt(math.pi) * (1 - 2 * math.sqrt(2 / 3) + math.sqrt(0.5))
    return z == 0.0 and abs(v / ex - 1) < 1e-8, f"value {v:.10g} vs {ex:.10g}"


@check("kernels", "initial-data term")
def _k_j0():
    p = ModelParams(beta=1.5, mu0=2.0, mu1=0.5, H=0.4)
    return kernels.j0(p, 2.0) == 3.0 and kernels.j0(ModelParams(), 5.0) == 1.0, "J0 values"


# ---------------------------------------------------------------- regimes

def _random_params(rng, kind):
    H = rng.uniform(0.01, 0.49)
    if kind == "heat":
        return ModelParams(H=H, H0=rng.uniform(0.5, 0.99))
    if kind == "wave":
        return ModelParams(alpha=rng.uniform(0.2, 4.0), beta=2.0, H=H)
    return ModelParams(alpha=rng.uniform(0.2, 4.0), beta=rng.uniform(0.05, 2.0),
                       gamma=rng.uniform(0.0, 2.0), H=H)


@check("regimes", "heat case reduces to H0 + H > 3/4")
def _r_heat():
    rng = np.random.default_rng(31)
    bad = 0
    for _ in range(10000):
        p = _random_params(rng, "heat")
        bad += regimes.check_existence(p)[0] != (p.H0 + p.H > 0.75)
    return bad == 0, f"{bad} disagreements"


@check("regimes", "wave case reduces to alpha > 3 - 4H")
def _r_wave():
    rng = np.random.default_rng(32)
    bad = 0
    for _ in range(10000):
        p = _random_params(rng, "wave")
        bad += regimes.check_existence(p)[0] != (p.alpha > 3 - 4 * p.H)
    return bad == 0, f"{bad} disagreements"


@check("regimes", "space-time white noise form")
def _r_white():
    rng = np.random.default_rng(33)
    bad = 0
    for _ in range(10000):
        alpha, gamma = rng.uniform(0.05, 4.0), rng.uniform(0.0, 2.0)
        beta = 2.0 if rng.random() < 0.3 else rng.uniform(0.05, 2.0)
        if beta == 2.0:
            ref = alpha * min(1 + gamma, 2) > 1
        else:
            ref = 2 * alpha + (alpha / beta) * min(2 * gamma - 1, 0) > 1
        bad += (regimes.margin_from(alpha, beta, gamma, 0.5, 0.5) > 0) != ref
    return bad == 0, f"{bad} disagreements"


@check("regimes", "Hoelder exponents reduce to the classical forms")
def _r_holder():
    rng = np.random.default_rng(34)
    worst = 0.0
    ok = True
    for _ in range(1000):
        H0, H = rng.uniform(0.5, 1.0), rng.uniform(0.01, 0.49)
        rho, kappa, _ = regimes.holder_from(2.0, 1.0, 0.0, H0, H)
        worst = max(worst, abs(rho - (H0 + H / 2 - 0.5)), abs(kappa - (2 * H0 + H - 1)))
        alpha, beta, gamma = rng.uniform(0.5, 4.0), rng.uniform(0.05, 1.99), rng.uniform(0.0, 2.0)
        rho, kappa, _ = regimes.holder_from(alpha, beta, gamma, 0.5, 0.5)
        worst = max(worst, abs(rho - (beta + gamma - 0.5 - beta / (2 * alpha))),
                    abs(kappa - (alpha - 0.5 + (alpha / beta) * min(gamma - 0.5, 0))))
        rho, kappa, valid = regimes.holder_from(alpha, 2.0, 0.0, H0, H)
        worst = max(worst, abs(kappa - (alpha / 2 - 1 + H)))
        ok &= not valid
    return ok and worst <= 1e-12, f"max diff {worst:.1e}"


# ---------------------------------------------------------------- chaos

@check("chaos", "Dirichlet simplex integral against Monte Carlo")
def _c_dirichlet():
    rng = np.random.default_rng(41)
    worst = 0.0
    for n in (1, 2, 3):
        b = rng.uniform(-0.5, 1.5, n)
        s = np.sort(rng.uniform(0.0, 1.0, (200000, n)), axis=1)
        gaps = np.diff(np.concatenate([s, np.ones((len(s), 1))], axis=1), axis=1)
        f = np.prod(gaps ** b, axis=1) / math.factorial(n)
        z = abs(f.mean() - chaos.dirichlet_simplex_integral(1.0, b)) / (f.std() / math.sqrt(len(f)))
        worst = max(worst, z)
    return worst < 4.0, f"max |z| {worst:.2f}"


@check("chaos", "first heat term closed form")
def _c_n1():
    p = ModelParams(H=0.3)
    v = chaos.chaos_norm_white(p, 1, 0.5).value
    ex = p.c_H * math.gamma(1 - p.H) * 0.5 ** p.H / p.H
    return abs(v / ex - 1) < 1e-10, f"rel err {abs(v / ex - 1):.2e}"


@check("chaos", "exponential-weight identity")
def _c_expw():
    rng = np.random.default_rng(43)
    worst = 0.0
    for _ in range(10):
        p = ModelParams(alpha=2.0, beta=rng.uniform(0.2, 2.0), gamma=rng.uniform(0.0, 1.0),
                        nu=rng.uniform(0.5, 2.0), H=0.45)
        eta = rng.uniform(0.05, 0.99) * (2.0 / p.nu) ** (1.0 / p.alpha)
        v = chaos.exp_weighted_ml_integral(p, eta)
        worst = max(worst, abs(v * (1 + 0.5 * p.nu * eta ** p.alpha) - 1))
    return worst <= 1e-6, f"max rel err {worst:.2e}"


@check("chaos", "wave cross energy against direct quadrature")
def _c_wave():
    p = ModelParams(alpha=2.0, beta=2.0, nu=2.0, H=0.4)
    a = 1 - 2 * p.H
    worst = 0.0
    for r, s in ((1.0, 2.0), (0.3, 2.5), (1.0, 1.0)):
        v = chaos.wave_cross_energy(p, r, s)
        d = kernels.cross_energy(p, r, s, a).value
        worst = max(worst, abs(v - d) / abs(d))
    return worst <= 1e-4, f"max rel err {worst:.2e}"


@check("chaos", "second term scales like t^(2(theta+1))")
def _c_scaling():
    p = ModelParams(H=0.3)
    v1 = chaos.chaos_norm_white(p, 2, 0.5).value
    v2 = chaos.chaos_norm_white(p, 2, 1.0).value
    ex = 2.0 ** (2 * (regimes.theta(p) + 1))
    return abs(v2 / v1 / ex - 1) < 1e-2, f"ratio {v2 / v1:.6g} vs {ex:.6g}"


@check("chaos", "gamma-factorial bounds hold")
def _c_gamma():
    c, C = chaos.gamma_factorial_bounds(1.5, 0.7, 40)
    n = np.arange(1, 41)
    from scipy.special import gammaln
    lr = gammaln(1.5 * n + 0.7) - 1.5 * gammaln(n + 1.0)
    ok = np.all(n * math.log(c) <= lr + 1e-9) and np.all(lr <= n * math.log(C) + 1e-9)
    return bool(ok), f"c={c:.4g}, C={C:.4g}"


# ---------------------------------------------------------------- sim

def _small_cfg(**kw):
    base = dict(params=ModelParams(H=0.35), t_max=0.25, n_time=32, L=4.0, n_modes=64,
                n_paths=32, seed=5)
    base.update(kw)
    return sim.SimConfig(**base)


@check("sim", "noise increment variance")
def _s_var():
    import warnings
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        cfg = _small_cfg()
    rng = sim.path_rng(9, 0)
    d = np.array([sim.sample_noise_increment(cfg, rng)[::32] for _ in range(4000)])
    v = d.var(axis=0)
    ex = float(sim.discrete_covariance(cfg, 0.0))
    z = np.abs(v - ex) / (ex * math.sqrt(2.0 / len(d)))
    return bool(np.all(z < 4.0)), f"max |z| {float(z.max()):.2f}"


@check("sim", "no noise gives the initial data exactly")
def _s_lam0():
    import warnings
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        e = sim.simulate_paths(_small_cfg(params=ModelParams(H=0.35, lam=0.0)))
    return bool(np.all(e.final == 1.0) and np.all(e.probes == 1.0)), "u == mu0"


@check("sim", "history sum equals the heat propagator")
def _s_hist():
    import warnings
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        cfg = _small_cfg(n_paths=4)
    a = sim.simulate_paths(cfg, "propagator").final
    b = sim.simulate_paths(cfg, "history").final
    d = float(np.max(np.abs(a - b)))
    return d < 1e-10, f"max diff {d:.2e}"


@check("sim", "identical seeds give identical ensembles")
def _s_det():
    import warnings
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        cfg = _small_cfg(n_paths=6)
        other = _small_cfg(n_paths=6, batch=4)
    a = sim.simulate_paths(cfg)
    b = sim.simulate_paths(other)
    return bool(np.array_equal(a.final, b.final) and np.array_equal(a.probes, b.probes)), "bitwise"


@check("sim", "ensemble mean equals the initial data")
def _s_mean():
    import warnings
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        e = sim.simulate_paths(_small_cfg(n_paths=64))
    m, se = sim.estimate_moments(e, (2,), x=None, holder=False).mean
    return abs(m - 1.0) < 3.5 * se, f"mean {m:.4f} +- {se:.4f}"


def run(suites: list[str]) -> list[CheckResult]:
    out = []
    for s in suites:
        for name, fn in SUITES[s]:
            t0 = time.perf_counter()
            try:
                ok, detail = fn()
            except Exception as e:  # a crashing check is a failed check
                ok, detail = False, f"{type(e).__name__}: {e}"
            out.append(CheckResult(s, name, bool(ok), detail, time.perf_counter() - t0))
    return out


def format_table(results: list[CheckResult]) -> str:
    w = max(len(r.name) for r in results)
    lines = [f"{'suite':8} {'check':{w}}  result  detail"]
    for r in results:
        lines.append(f"{r.suite:8} {r.name:{w}}  {'pass' if r.passed else 'FAIL':6}  {r.detail} ({r.seconds:.2f}s)")
    n_ok = sum(r.passed for r in results)
    lines.append(f"{n_ok}/{len(results)} checks passed")
    return "\n".join(lines)
