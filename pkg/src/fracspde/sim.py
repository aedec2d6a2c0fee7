"""Monte Carlo simulation of the mild solution with white time noise.

Each path lives in mode space on a periodic interval [-L, L).  The noise has
modes xi_m = m pi / L for m = 1..n_modes; products u * dW are formed on a grid
of 4 * n_modes points, which is exact for band-limited factors, and then
projected back onto the retained modes.  The stochastic integral is taken at
the left endpoint of each step (Ito).
"""
from __future__ import annotations

import csv
import io
import json
import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import fft as sfft

from . import mlf
from .chaos import second_moment_truncated
from .errors import ConfigError, InsufficientResolution
from .kernels import j0
from .params import ModelParams
from .quadrature import gauss_jacobi, gauss_legendre
from .regimes import check_existence

logger = logging.getLogger(__name__)

# Scaled frequency sigma(t) * xi the mode grid should reach (a warning only).
CUTOFF_HEURISTIC = 16.0
N_PROBES = 16
_STEP_NODES = 16
_DRAW_CHUNK = 64


@dataclass(frozen=True)
class SimConfig:
    params: ModelParams
    t_max: float = 0.5
    n_time: int = 256
    L: float = 20.0
    n_modes: int = 512
    n_paths: int = 200
    seed: int = 0
    n_chaos_ref: int = 0
    batch: int = 32
    workers: int = 1

    def __post_init__(self):
        p = self.params
        if p.H0 != 0.5:
            raise ConfigError("simulation needs white time noise (H0 = 1/2)")
        ok, m = check_existence(p)
        if not ok:
            raise ConfigError(f"existence condition fails (margin {m:.6g})")
        if not self.t_max > 0 or not self.L > 0:
            raise ConfigError("t_max and L must be positive")
        for name in ("n_time", "n_modes", "n_paths", "batch", "workers"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be a positive integer")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        if not 0 <= self.n_chaos_ref <= 4:
            raise ConfigError("n_chaos_ref must lie in 0..4")
        if p.b_Y <= 0.5:
            raise ConfigError("per-mode step kernel is not square integrable for beta + gamma <= 1/2")
        if self.xi_max < self.cutoff_heuristic:
            warnings.warn(f"mode grid reaches xi = {self.xi_max:.4g}, below the suggested "
                          f"{self.cutoff_heuristic:.4g}", RuntimeWarning, stacklevel=2)

    @property
    def dt(self) -> float:
        return self.t_max / self.n_time

    @property
    def dxi(self) -> float:
        return math.pi / self.L

    @property
    def xi_max(self) -> float:
        return self.n_modes * math.pi / self.L

    @property
    def n_grid(self) -> int:
        return 4 * self.n_modes

    @property
    def cutoff_heuristic(self) -> float:
        p = self.params
        sigma = (0.5 * p.nu) ** (1.0 / p.alpha) * self.t_max ** (p.beta / p.alpha)
        return CUTOFF_HEURISTIC / sigma

    def as_dict(self) -> dict:
        d = {f"params.{k}": v for k, v in self.params.as_dict().items()}
        d.update(t_max=self.t_max, n_time=self.n_time, L=self.L, n_modes=self.n_modes,
                 n_paths=self.n_paths, seed=self.seed, n_chaos_ref=self.n_chaos_ref)
        return d


def modes(cfg: SimConfig) -> np.ndarray:
    return np.arange(cfg.n_modes + 1) * cfg.dxi


def grid(cfg: SimConfig) -> np.ndarray:
    return -cfg.L + 2.0 * cfg.L * np.arange(cfg.n_grid) / cfg.n_grid


def noise_std(cfg: SimConfig) -> np.ndarray:
    """Standard deviation of the cos and sin coefficients of one increment.

    Each retained mode stands for the pair +xi_m, -xi_m of the full-line
    spectral measure, hence the factor 2.
    """
    p = cfg.params
    xi = modes(cfg)[1:]
    return np.sqrt(2.0 * p.c_H * xi ** (1.0 - 2.0 * p.H) * cfg.dxi * cfg.dt)


def path_rng(seed: int, path: int) -> np.random.Generator:
    """Counter-based generator for one path; independent of batching and threads."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(path,))))


def _noise_coefficients(cfg: SimConfig, g: np.ndarray) -> np.ndarray:
    """rfft coefficients of the field sum_m s_m (g_m cos + g'_m sin)(xi_m x) on the grid.

    ``g`` has shape (..., 2, n_modes).
    """
    n = cfg.n_grid
    s = noise_std(cfg)
    sign = np.where(np.arange(1, cfg.n_modes + 1) % 2 == 0, 1.0, -1.0)
    out = np.zeros(g.shape[:-2] + (n // 2 + 1,), dtype=complex)
    out[..., 1:cfg.n_modes + 1] = 0.5 * n * sign * s * (g[..., 0, :] - 1j * g[..., 1, :])
    return out


def sample_noise_increment(cfg: SimConfig, rng: np.random.Generator) -> np.ndarray:
    """One time-step noise increment on the spatial grid."""
    g = rng.standard_normal((2, cfg.n_modes))
    return sfft.irfft(_noise_coefficients(cfg, g), n=cfg.n_grid)


def discrete_covariance(cfg: SimConfig, x) -> np.ndarray:
    """Cov(dW(0), dW(x)) of the discretized noise."""
    s = noise_std(cfg)
    xi = modes(cfg)[1:]
    x = np.asarray(x, dtype=float)
    return np.cos(np.multiply.outer(x, xi)) @ (s * s)


def step_kernels(cfg: SimConfig) -> np.ndarray:
    """Weights K[i, m] applied to the noise of the step that ended i steps ago.

    K is the signed root mean square of F Y(r, xi_m) over r in [i dt, (i+1) dt],
    so the one-step variance of every mode matches the continuous kernel.
    For the heat semigroup this reproduces the exact propagator.
    """
    p = cfg.params
    b = p.b_Y
    dt = cfg.dt
    c = 0.5 * p.nu * modes(cfg) ** p.alpha
    out = np.empty((cfg.n_time, cfg.n_modes + 1))
    xg, wg = gauss_legendre(_STEP_NODES)
    for i in range(cfg.n_time):
        if i == 0:
            r, w = gauss_jacobi(_STEP_NODES, 0.0, 2.0 * b - 2.0, 0.0, dt)
            e = mlf.ml_neg(p.beta, b, np.outer(c, r ** p.beta))
            msq = e * e @ w / dt
            mean = e @ (w * r ** (1.0 - b)) / dt
        else:
            r = i * dt + dt * xg
            f = r ** (b - 1.0) * mlf.ml_neg(p.beta, b, np.outer(c, r ** p.beta))
            msq = f * f @ wg
            mean = f @ wg
        out[i] = np.where(mean < 0.0, -1.0, 1.0) * np.sqrt(msq)
    return out


def _uses_semigroup(p: ModelParams) -> bool:
    return p.beta == 1.0 and p.gamma == 0.0


@dataclass
class Ensemble:
    """Simulated fields.

    ``final`` holds u(t_max, x) on the whole grid; ``probes`` holds the time
    series u(t_k, x) at the grid indices ``probe_index``.
    """

    cfg: SimConfig
    t: np.ndarray
    x: np.ndarray
    probe_index: np.ndarray
    probes: np.ndarray
    final: np.ndarray

    def to_csv(self, x_stride: int = 1) -> str:
        """Rows (path, t, x, u): the probe time series, then the final field."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["path", "t", "x", "u"])
        for k in range(self.probes.shape[0]):
            for j, xi in enumerate(self.probe_index):
                for ti in range(len(self.t) - 1):
                    w.writerow([k, repr(float(self.t[ti])), repr(float(self.x[xi])),
                                repr(float(self.probes[k, ti, j]))])
            for xi in range(0, len(self.x), x_stride):
                w.writerow([k, repr(float(self.t[-1])), repr(float(self.x[xi])),
                            repr(float(self.final[k, xi]))])
        return buf.getvalue()


def _simulate_batch(cfg: SimConfig, paths: range, K: np.ndarray | None, decay, weight):
    p = cfg.params
    n = cfg.n_grid
    nm = cfg.n_modes + 1
    B = len(paths)
    rngs = [path_rng(cfg.seed, k) for k in paths]
    tk = np.arange(cfg.n_time + 1) * cfg.dt
    J = np.broadcast_to(j0(p, tk), tk.shape)
    probe_index = n // 2 + (np.arange(N_PROBES) * n) // N_PROBES
    probe_index %= n
    probes = np.empty((B, cfg.n_time + 1, N_PROBES))
    uh = np.zeros((B, nm), dtype=complex)
    uh[:, 0] = n * J[0]
    hist = None if K is None else np.empty((B, cfg.n_time, nm), dtype=complex)
    g = None
    for k in range(cfg.n_time):
        if k % _DRAW_CHUNK == 0:
            m = min(_DRAW_CHUNK, cfg.n_time - k)
            g = np.stack([r.standard_normal((m, 2, cfg.n_modes)) for r in rngs])
        u = sfft.irfft(uh, n=n, workers=cfg.workers)
        probes[:, k] = u[:, probe_index]
        if p.lam == 0.0:
            prod = np.zeros_like(uh)
        else:
            dw = sfft.irfft(_noise_coefficients(cfg, g[:, k % _DRAW_CHUNK]), n=n, workers=cfg.workers)
            prod = sfft.rfft(u * dw, workers=cfg.workers)[:, :nm]
        if K is None:
            uh = decay * uh + p.lam * weight * prod
        else:
            hist[:, k] = prod
            uh = p.lam * np.einsum("jm,bjm->bm", K[k::-1], hist[:, :k + 1])
            uh[:, 0] += n * J[k + 1]
    u = sfft.irfft(uh, n=n, workers=cfg.workers)
    probes[:, -1] = u[:, probe_index]
    return probe_index, probes, u


def simulate_paths(cfg: SimConfig, scheme: str | None = None) -> Ensemble:
    """Run ``cfg.n_paths`` independent paths up to ``cfg.t_max``.

    ``scheme`` is "propagator" (heat semigroup only) or "history"; by default
    the propagator is used whenever the semigroup property holds.
    """
    p = cfg.params
    if scheme is None:
        scheme = "propagator" if _uses_semigroup(p) else "history"
    if scheme not in ("propagator", "history"):
        raise ConfigError(f"unknown scheme {scheme!r}")
    if scheme == "propagator" and not _uses_semigroup(p):
        raise ConfigError("the one-step propagator needs beta = 1 and gamma = 0")
    if scheme == "propagator":
        a = cfg.dt * p.nu * modes(cfg) ** p.alpha
        decay = np.exp(-0.5 * a)
        weight = np.ones_like(a)
        pos = a > 0
        weight[pos] = np.sqrt(-np.expm1(-a[pos]) / a[pos])
        K = None
    else:
        K = step_kernels(cfg)
        decay = weight = None
    chunks = []
    probe_index = None
    for start in range(0, cfg.n_paths, cfg.batch):
        paths = range(start, min(start + cfg.batch, cfg.n_paths))
        probe_index, pr, fin = _simulate_batch(cfg, paths, K, decay, weight)
        chunks.append((pr, fin))
    t = np.arange(cfg.n_time + 1) * cfg.dt
    return Ensemble(cfg, t, grid(cfg), probe_index,
                    np.concatenate([c[0] for c in chunks]), np.concatenate([c[1] for c in chunks]))


# ---------------------------------------------------------------- estimators

def _mean_se(v: np.ndarray) -> tuple[float, float]:
    """Sample mean and its delete-one jackknife standard error."""
    n = len(v)
    m = float(np.mean(v))
    if n < 2:
        return m, math.nan
    loo = (np.sum(v) - v) / (n - 1)
    se = math.sqrt((n - 1) / n * float(np.sum((loo - np.mean(loo)) ** 2)))
    return m, se


def _block_jackknife(stat, n: int, groups: int = 20) -> tuple[float, float]:
    """stat(mask) over all paths and with each of ``groups`` blocks removed."""
    full = stat(np.ones(n, dtype=bool))
    g = min(groups, n)
    if g < 2:
        return full, math.nan
    labels = np.arange(n) % g
    reps = np.array([stat(labels != j) for j in range(g)])
    se = math.sqrt((g - 1) / g * float(np.sum((reps - reps.mean()) ** 2)))
    return full, se


def _fit_slope(lags: np.ndarray, sf: np.ndarray) -> float:
    return float(np.polyfit(np.log(lags), np.log(sf), 1)[0])


@dataclass(frozen=True)
class HolderFit:
    exponent: float
    std_error: float
    lags: tuple
    structure: tuple
    degenerate: bool = False


def estimate_holder(ens: Ensemble, n_octaves: int = 8, space_lag0: int = 1,
                    time_lag0: int = 1) -> tuple[HolderFit, HolderFit]:
    """Empirical Hoelder exponents in space (at t_max) and in time (ending at t_max).

    Lags are ``lag0 * 2**j`` grid steps, j < n_octaves.  The exponent is half
    the least-squares slope of log E|increment|**2 against log lag; its
    standard error comes from a block jackknife over paths.
    """
    cfg = ens.cfg
    n = cfg.n_grid
    s_steps = space_lag0 * 2 ** np.arange(n_octaves)
    t_steps = time_lag0 * 2 ** np.arange(n_octaves)
    if s_steps[-1] > n // 2:
        raise InsufficientResolution(f"need {s_steps[-1]} grid steps in half the period, have {n // 2}")
    if t_steps[-1] > cfg.n_time:
        raise InsufficientResolution(f"need {t_steps[-1]} time steps, have {cfg.n_time}")
    dx = 2.0 * cfg.L / n
    # per-path mean squared increments, shape (paths, octaves)
    sp = np.stack([np.mean((np.roll(ens.final, -h, axis=1) - ens.final) ** 2, axis=1)
                   for h in s_steps], axis=1)
    last = ens.probes[:, -1, :]
    tp = np.stack([np.mean((last - ens.probes[:, -1 - h, :]) ** 2, axis=1) for h in t_steps], axis=1)
    out = []
    for per_path, lags in ((sp, s_steps * dx), (tp, t_steps * cfg.dt)):
        sf = per_path.mean(axis=0)
        if np.any(sf <= 0.0):
            out.append(HolderFit(math.nan, math.nan, tuple(lags), tuple(sf), True))
            continue
        slope, se = _block_jackknife(lambda m: _fit_slope(lags, per_path[m].mean(axis=0)), len(per_path))
        out.append(HolderFit(0.5 * slope, 0.5 * se, tuple(lags), tuple(sf)))
    return out[0], out[1]


@dataclass
class SimEstimate:
    moments: dict
    space_holder_slope: tuple
    time_holder_slope: tuple
    mean: tuple
    t: float
    x: float | None
    reference: float | None = None
    reference_terms: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "t": self.t,
            "x": self.x,
            "mean": list(self.mean),
            "moments": {str(k): list(v) for k, v in self.moments.items()},
            "space_holder_slope": list(self.space_holder_slope),
            "time_holder_slope": list(self.time_holder_slope),
            "reference_second_moment": self.reference,
            "reference_terms": self.reference_terms,
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), default=_json_default, indent=2)


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    raise TypeError(type(o).__name__)


def point_values(ens: Ensemble, x: float | None = 0.0) -> np.ndarray:
    """u(t_max, x) per path, or the spatial average of powers when x is None."""
    if x is None:
        return ens.final
    i = int(round((x + ens.cfg.L) * ens.cfg.n_grid / (2.0 * ens.cfg.L))) % ens.cfg.n_grid
    return ens.final[:, i]


def estimate_moments(ens: Ensemble, p_list=(2, 4), x: float | None = 0.0,
                     holder: bool = True) -> SimEstimate:
    """Absolute moments of u(t_max, x) with jackknife errors over paths.

    With ``x=None`` each path contributes its spatial average of |u|**p, which
    is legitimate because the law of u is stationary in x.
    """
    if ens.final.shape[0] == 0:
        raise ConfigError("empty ensemble")
    v = point_values(ens, x)
    mom = {}
    for pw in p_list:
        a = np.abs(v) ** pw
        mom[pw] = _mean_se(a if a.ndim == 1 else a.mean(axis=1))
    mean = _mean_se(v if v.ndim == 1 else v.mean(axis=1))
    nanfit = (math.nan, math.nan)
    sh = th = nanfit
    if holder:
        try:
            hs, ht = estimate_holder(ens)
            sh, th = (hs.exponent, hs.std_error), (ht.exponent, ht.std_error)
        except InsufficientResolution as e:
            logger.info("Hoelder estimate skipped: %s", e)
    ref, terms = None, []
    cfg = ens.cfg
    if cfg.n_chaos_ref > 0:
        ref, res = second_moment_truncated(cfg.params, cfg.t_max, cfg.n_chaos_ref)
        terms = [r.as_dict() for r in res]
    return SimEstimate(mom, sh, th, mean, cfg.t_max, x, ref, terms)
