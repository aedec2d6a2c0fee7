"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line in the summary.

Runtime budgets are asserted alongside the numerical checks.
"""
import math
import subprocess
import sys
import time
import warnings

import numpy as np
import pytest

from fracspde import chaos, kernels, mlf, regimes, sim
from fracspde.params import ModelParams

crit = pytest.mark.criterion


def _ml(a, b, z):
    return mlf.ml_eval(mlf.MLQuery(a, b, z)).value


def _finish(criterion, ok, detail, budget):
    elapsed = time.perf_counter() - criterion.t0
    ok = bool(ok) and elapsed < budget
    criterion.report(ok, f"{detail}; {elapsed:.1f}s of {budget:g}s")
    assert ok, detail


@crit(1, "Mittag-Leffler identities")
def test_c01_mittag_leffler_identities(criterion):
    x = np.linspace(0.0, 50.0, 500)
    e_exp = max(abs(_ml(1.0, 1.0, -v) - math.exp(-v)) for v in x)
    x = np.linspace(0.0, 30.0, 500)
    e_cos = max(abs(_ml(2.0, 1.0, -v * v) - math.cos(v)) for v in x)
    x = np.linspace(1e-3, 30.0, 500)
    e_sinc = max(abs(_ml(2.0, 2.0, -v * v) - math.sin(v) / v) for v in x)
    rng = np.random.default_rng(101)
    worst = 0.0
    for _ in range(200):
        a, b = rng.uniform(0.3, 1.9), rng.uniform(0.3, 3.0)
        s = mlf.crossover(a) ** (1.0 / a) + rng.uniform(0.0, mlf.OVERLAP_WIDTH)
        z = -s ** a
        ser = mlf.ml_series(mlf.MLQuery(a, b, z)).value
        asy = mlf.ml_asymptotic(a, b, z).value
        worst = max(worst, abs(ser - asy) / max(abs(asy), mlf.magnitude_scale(a, b, -z)))
    ok = max(e_exp, e_cos, e_sinc) <= 1e-9 and worst <= 10 * mlf.DEFAULT_TOL
    detail = f"exp {e_exp:.1e}, cos {e_cos:.1e}, sinc {e_sinc:.1e}, overlap {worst:.1e}"
    _finish(criterion, ok, detail, 5.0)


@crit(2, "derivative identity")
def test_c02_derivative_identity(criterion):
    rng = np.random.default_rng(102)
    worst = 0.0
    for _ in range(100):
        a, b = rng.uniform(0.3, 2.0), rng.uniform(1.2, 3.0)
        lam, z = -rng.uniform(0.1, 2.0), rng.uniform(0.5, 2.0)
        h = 1e-4 * z

        def f(x):
            return x ** (b - 1) * _ml(a, b, lam * x ** a)

        fd = (f(z + h) - f(z - h)) / (2 * h)
        ex = mlf.ml_weighted_derivative(a, b, lam, z, 1)
        worst = max(worst, abs(fd - ex) / abs(ex))
    _finish(criterion, worst <= 1e-5, f"max rel err {worst:.1e} over 100 draws", 5.0)


@crit(3, "weighted-energy scaling law")
def test_c03_scaling_law(criterion):
    rng = np.random.default_rng(103)
    worst = 0.0
    n = 0
    betas = []
    while n < 50:
        beta = 2.0 if n % 10 == 0 else rng.uniform(0.05, 2.0)
        p = ModelParams(alpha=rng.uniform(0.8, 2.5), beta=beta, gamma=rng.uniform(0.0, 1.0),
                        nu=rng.uniform(0.5, 2.0), H=rng.uniform(0.1, 0.45))
        a = rng.uniform(-0.8, min(1.0, kernels.energy_limit(p) - 0.2))
        ex = 2 * p.beta + 2 * p.gamma - 2 - p.beta * (a + 1) / p.alpha
        if abs(ex) < 0.05:
            continue  # relative error of a near-zero exponent is not informative
        t1, t2 = rng.uniform(0.2, 1.0), rng.uniform(1.5, 4.0)
        e1 = kernels.weighted_energy(p, t1, a).value
        e2 = kernels.weighted_energy(p, t2, a).value
        slope = math.log(e2 / e1) / math.log(t2 / t1)
        worst = max(worst, abs(slope / ex - 1))
        betas.append(beta)
        n += 1
    detail = f"max rel err {worst:.1e}, beta in [{min(betas):.2f}, {max(betas):.2f}]"
    _finish(criterion, worst <= 1e-5 and max(betas) == 2.0, detail, 60.0)


@crit(4, "Dirichlet simplex integral")
def test_c04_dirichlet(criterion):
    rng = np.random.default_rng(104)
    m = 10 ** 6
    worst = 0.0
    for n in (1, 2, 3):
        for _ in range(20):
            b = rng.uniform(-0.45, 2.0, n)
            s = np.sort(rng.uniform(0.0, 1.0, (m, n)), axis=1)
            gaps = np.diff(np.concatenate([s, np.ones((m, 1))], axis=1), axis=1)
            f = np.prod(gaps ** b, axis=1) / math.factorial(n)
            z = abs(f.mean() - chaos.dirichlet_simplex_integral(1.0, b)) / (f.std() / math.sqrt(m))
            worst = max(worst, z)
    _finish(criterion, worst < 3.0, f"max |z| {worst:.2f} over 60 vectors", 60.0)


@crit(5, "exponential-weight identity")
def test_c05_exponential_weight(criterion):
    rng = np.random.default_rng(105)
    worst = 0.0
    for _ in range(50):
        p = ModelParams(alpha=rng.uniform(0.8, 2.5), beta=rng.uniform(0.1, 2.0), gamma=rng.uniform(0.0, 1.0),
                        nu=rng.uniform(0.3, 3.0), H=0.4)
        eta = rng.uniform(0.01, 0.99) * (2.0 / p.nu) ** (1.0 / p.alpha)
        v = chaos.exp_weighted_ml_integral(p, eta)
        worst = max(worst, abs(v * (1 + 0.5 * p.nu * eta ** p.alpha) - 1))
    _finish(criterion, worst <= 1e-6, f"max rel err {worst:.1e}", 30.0)


@crit(6, "wave cross-energy")
def test_c06_wave_cross_energy(criterion):
    rng = np.random.default_rng(106)
    p = ModelParams(alpha=2.0, beta=2.0, nu=2.0, H=0.4)
    a = 1 - 2 * p.H
    worst = 0.0
    nonneg = True
    for _ in range(100):
        r, s = rng.uniform(0.05, 3.0, 2)
        v = chaos.wave_cross_energy(p, r, s)
        d = kernels.cross_energy(p, r, s, a).value
        worst = max(worst, abs(v - d) / abs(d))
        nonneg &= v >= 0
    diag = max(abs(chaos.wave_cross_energy(p, t, t) / kernels.weighted_energy(p, t, a).value - 1)
               for t in (0.3, 1.0, 2.5))
    ok = worst <= 1e-4 and nonneg and diag <= 1e-4
    _finish(criterion, ok, f"max rel err {worst:.1e}, nonnegative {nonneg}, r=s {diag:.1e}", 60.0)


@crit(7, "regime reductions")
def test_c07_regime_reductions(criterion):
    rng = np.random.default_rng(107)
    bad = {"heat": 0, "wave": 0, "white": 0}
    for _ in range(10000):
        H = rng.uniform(0.01, 0.49)
        p = ModelParams(H=H, H0=rng.uniform(0.5, 0.99))
        bad["heat"] += regimes.check_existence(p)[0] != (p.H0 + p.H > 0.75)
        p = ModelParams(alpha=rng.uniform(0.2, 4.0), beta=2.0, H=H)
        bad["wave"] += regimes.check_existence(p)[0] != (p.alpha > 3 - 4 * p.H)
        alpha, beta, gamma = rng.uniform(0.05, 4.0), rng.uniform(0.05, 2.0), rng.uniform(0.0, 2.0)
        ref = 2 * alpha + (alpha / beta) * min(2 * gamma - 1, 0) > 1
        bad["white"] += (regimes.margin_from(alpha, beta, gamma, 0.5, 0.5) > 0) != ref
    diff = 0.0
    for _ in range(1000):
        H0, H = rng.uniform(0.5, 1.0), rng.uniform(0.01, 0.49)
        rho, kappa, _ = regimes.holder_from(2.0, 1.0, 0.0, H0, H)
        diff = max(diff, abs(rho - (H0 + H / 2 - 0.5)), abs(kappa - (2 * H0 + H - 1)))
        alpha, beta, gamma = rng.uniform(0.5, 4.0), rng.uniform(0.05, 1.99), rng.uniform(0.0, 2.0)
        rho, kappa, _ = regimes.holder_from(alpha, beta, gamma, 0.5, 0.5)
        diff = max(diff, abs(rho - (beta + gamma - 0.5 - beta / (2 * alpha))),
                   abs(kappa - (alpha - 0.5 + (alpha / beta) * min(gamma - 0.5, 0))))
        _, kappa, _ = regimes.holder_from(alpha, 2.0, 0.0, H0, H)
        diff = max(diff, abs(kappa - (alpha / 2 - 1 + H)))
    ok = sum(bad.values()) == 0 and diff <= 1e-12
    _finish(criterion, ok, f"disagreements {bad}, Hoelder max diff {diff:.1e}", 5.0)


@crit(8, "chaos norms: closed form, scaling, sandwich")
def test_c08_chaos_sandwich(criterion):
    p = ModelParams(H0=0.5, H=0.3, lam=1.0, mu0=1.0)
    t1, t2 = 0.5, 1.0
    v1 = chaos.chaos_norm_white(p, 1, t1).value
    closed = p.c_H * math.gamma(1 - p.H) * p.nu ** (p.H - 1) * t1 ** p.H / p.H
    e_closed = abs(v1 / closed - 1)
    th1 = regimes.theta(p) + 1
    e_scale = 0.0
    vals = {}
    for n in (1, 2, 3):
        vals[n] = (chaos.chaos_norm_white(p, n, t1).value, chaos.chaos_norm_white(p, n, t2).value)
    for n in (1, 2):
        e_scale = max(e_scale, abs(vals[n][1] / vals[n][0] / (t2 / t1) ** (n * th1) - 1))
    c, C = chaos.fit_sandwich_constants(p, t1, safety=2.0)
    sandwich = all(chaos.chaos_lower_bound_shape(p, n, t, c) <= vals[n][i] <= chaos.chaos_upper_bound_term(p, n, t, C)
                   for n in (2, 3) for i, t in enumerate((t1, t2)))
    ok = e_closed <= 1e-4 and e_scale <= 1e-2 and sandwich
    detail = f"n=1 closed form {e_closed:.1e}, scaling {e_scale:.1e}, sandwich n=2,3 {sandwich}"
    _finish(criterion, ok, detail, 600.0)


@crit(9, "necessity: divergence below the threshold")
def test_c09_necessity(criterion):
    cutoffs = [2.0 ** k for k in (6, 7, 8, 9)]
    grows, low = chaos.diagnose_divergence(ModelParams(H=0.2), 0.5, cutoffs, growth=0.05)
    ratios = [low[i + 1] / low[i] for i in range(3)]
    high = [chaos.chaos_norm_white(ModelParams(H=0.3), 2, 0.5, cutoff=c).value for c in cutoffs]
    spread = max(abs(h / high[-1] - 1) for h in high)
    ok = grows and min(ratios) > 1.05 and spread <= 0.01
    detail = f"H=0.2 growth per doubling {[round(r, 3) for r in ratios]}, H=0.3 spread {spread:.1e}"
    _finish(criterion, ok, detail, 600.0)


@pytest.mark.slow
@crit(10, "simulation cross-check")
def test_c10_simulation(criterion):
    p = ModelParams(H0=0.5, H=0.35, lam=1.0, mu0=1.0)
    cfg = sim.SimConfig(p, t_max=0.5, n_time=256, L=20.0, n_modes=512, n_paths=2000, seed=2024, n_chaos_ref=3)
    ens = sim.simulate_paths(cfg)
    est = sim.estimate_moments(ens, (2,), x=None)
    m2, se2 = est.moments[2]
    ref = est.reference
    mean, se_mean = est.mean
    hs, hs_se = est.space_holder_slope
    ht, ht_se = est.time_holder_slope
    ok_m2 = abs(m2 - ref) <= max(3 * se2, 0.1 * ref)
    ok_mean = abs(mean - p.mu0) <= 3 * se_mean
    ok_h = abs(hs - p.H) <= 0.15 and abs(ht - p.H / 2) <= 0.10
    detail = (f"E|u|^2 {m2:.4f}+-{se2:.4f} vs {ref:.4f}, mean {mean:.4f}+-{se_mean:.4f}, "
              f"space {hs:.3f}, time {ht:.3f}")
    _finish(criterion, ok_m2 and ok_mean and ok_h, detail, 900.0)


INCREMENT_SETS = [
    ModelParams(H=0.35),
    ModelParams(alpha=1.5, beta=0.8, gamma=0.3, H=0.4),
    ModelParams(alpha=2.0, beta=1.5, gamma=0.2, H=0.3),
    ModelParams(alpha=1.8, beta=0.6, gamma=0.3, H0=0.7, H=0.4),
    ModelParams(alpha=2.0, beta=2.0, gamma=1.0, H=0.3),
]


@crit(11, "increment-energy slope")
def test_c11_increment_slope(criterion):
    slack = []
    admissible = True
    for p in INCREMENT_SETS:
        rep = regimes.regime_report(p)
        admissible &= rep.exists and rep.time_holder_valid
        a = 1 - 2 * p.H
        r, s = 0.0, 0.5
        h = np.geomspace(1e-3, 0.5, 12)
        e = np.array([kernels.time_increment_energy(p, r, s, s + hh, a).value for hh in h])
        slope = np.polyfit(np.log(h), np.log(e), 1)[0]
        q = 0.9 * 2 * p.H0 * (regimes.theta(p) + 1)
        slack.append(slope - (min(q, 2.0) - 0.05))
    ok = admissible and min(slack) >= 0
    _finish(criterion, ok, f"admissible {admissible}, min slope margin {min(slack):.3f}", 60.0)


@crit(12, "determinism and self-check")
def test_c12_determinism(criterion, tmp_path):
    args = [sys.executable, "-m", "fracspde.cli", "simulate", "--H", "0.35", "--n-paths", "8", "--n-modes", "64",
            "--L", "4", "--n-time", "64", "--t-max", "0.25", "--seed", "7"]
    outs = []
    for k in range(2):
        d = tmp_path / f"run{k}"
        subprocess.run(args + ["--out", str(d)], check=True, capture_output=True)
        outs.append(((d / "ensemble.csv").read_bytes(), (d / "estimate.json").read_bytes()))
    same = outs[0] == outs[1]
    v = subprocess.run([sys.executable, "-m", "fracspde.cli", "verify", "--suite", "all"], capture_output=True)
    ok = same and v.returncode == 0
    _finish(criterion, ok, f"byte-identical {same}, verify exit {v.returncode}", 600.0)
