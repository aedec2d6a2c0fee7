import math
import warnings

import numpy as np
import pytest

from fracspde import chaos, sim
from fracspde.errors import ConfigError, InsufficientResolution
from fracspde.params import ModelParams


def cfg(**kw):
    base = dict(params=ModelParams(H=0.35), t_max=0.25, n_time=32, L=4.0, n_modes=64, n_paths=16, seed=3)
    base.update(kw)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return sim.SimConfig(**base)


def test_config_validation():
    with pytest.raises(ConfigError):
        cfg(params=ModelParams(H0=0.7, H=0.35))
    with pytest.raises(ConfigError):
        cfg(params=ModelParams(H=0.2))
    with pytest.raises(ConfigError):
        cfg(params=ModelParams(alpha=2.0, beta=0.4, gamma=0.0, H=0.45))
    with pytest.raises(ConfigError):
        cfg(n_paths=0)


def test_cutoff_warning():
    with pytest.warns(RuntimeWarning):
        sim.SimConfig(ModelParams(H=0.35), n_modes=8, L=20.0)


def test_grid_and_modes():
    c = cfg()
    assert c.n_grid == 4 * c.n_modes
    assert sim.grid(c)[0] == -c.L
    assert sim.modes(c)[-1] == pytest.approx(c.xi_max)


def test_noise_covariance():
    c = cfg()
    rng = sim.path_rng(1, 0)
    d = np.array([sim.sample_noise_increment(c, rng) for _ in range(3000)])
    lag = 5
    emp = np.mean(d[:, :-lag] * d[:, lag:])
    dx = 2 * c.L / c.n_grid
    ex = float(sim.discrete_covariance(c, lag * dx))
    v0 = float(sim.discrete_covariance(c, 0.0))
    assert abs(emp - ex) < 0.05 * v0
    assert np.mean(d * d) == pytest.approx(v0, rel=0.05)


def test_step_kernels_heat():
    c = cfg()
    K = sim.step_kernels(c)
    xi = sim.modes(c)
    a = c.params.nu * c.dt * xi ** 2
    # first step: RMS of exp(-nu r xi^2 / 2) over [0, dt]
    ex = np.sqrt(np.where(a > 0, (1 - np.exp(-a)) / np.where(a > 0, a, 1.0), 1.0))
    assert np.allclose(K[0], ex, rtol=1e-10)
    assert np.allclose(K[3], np.exp(-1.5 * a) * ex, rtol=1e-10)


def test_history_matches_propagator():
    c = cfg(n_paths=3)
    a = sim.simulate_paths(c, "propagator")
    b = sim.simulate_paths(c, "history")
    assert np.max(np.abs(a.final - b.final)) < 1e-10


def test_zero_noise_is_initial_data():
    e = sim.simulate_paths(cfg(params=ModelParams(H=0.35, lam=0.0, mu0=2.5)))
    assert np.all(e.final == 2.5)


def test_batching_and_workers_do_not_change_results():
    a = sim.simulate_paths(cfg(n_paths=7, batch=32, workers=1))
    b = sim.simulate_paths(cfg(n_paths=7, batch=2, workers=3))
    assert np.array_equal(a.final, b.final) and np.array_equal(a.probes, b.probes)


def test_seed_matters():
    a = sim.simulate_paths(cfg(n_paths=2, seed=1))
    b = sim.simulate_paths(cfg(n_paths=2, seed=2))
    assert not np.array_equal(a.final, b.final)


def test_small_noise_variance_matches_first_term():
    # for small lam the variance is the first chaos term up to O(lam^4)
    p = ModelParams(alpha=1.5, beta=0.8, gamma=0.3, H=0.4, lam=0.1)
    c = cfg(params=p, t_max=0.5, n_time=64, L=10.0, n_modes=256, n_paths=200, seed=1)
    e = sim.simulate_paths(c)
    per_path = ((e.final - 1.0) ** 2).mean(axis=1)
    ref = chaos.chaos_norm_white(p, 1, 0.5).value
    assert abs(per_path.mean() / ref - 1) < 0.1


def test_wave_runs():
    p = ModelParams(alpha=2.0, beta=2.0, H=0.4)
    e = sim.simulate_paths(cfg(params=p, n_paths=4))
    assert np.all(np.isfinite(e.final))


def test_estimate_moments_and_json():
    e = sim.simulate_paths(cfg(n_paths=64, n_time=256, n_modes=128))
    est = sim.estimate_moments(e, (2, 4), x=None)
    m, se = est.mean
    assert abs(m - 1.0) < 4 * se
    assert est.moments[4][0] >= est.moments[2][0] ** 2 - 4 * est.moments[4][1]
    assert 0 < est.space_holder_slope[0] < 1
    assert '"moments"' in est.to_json()


def test_holder_needs_resolution():
    e = sim.simulate_paths(cfg(n_paths=2, n_time=16))
    with pytest.raises(InsufficientResolution):
        sim.estimate_holder(e)


def test_csv_layout():
    e = sim.simulate_paths(cfg(n_paths=2))
    lines = e.to_csv(x_stride=8).splitlines()
    assert lines[0] == "path,t,x,u"
    per_path = sim.N_PROBES * (len(e.t) - 1) + math.ceil(e.cfg.n_grid / 8)
    assert len(lines) == 1 + 2 * per_path
    assert float(lines[1].split(",")[3]) == e.probes[0, 0, 0]
