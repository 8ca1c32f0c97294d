"""Monte Carlo simulation of the time-changed intensity and default indicator.

A background CIR path ``X`` is stepped exactly on a fine grid, the hazard
``H(t) = int_0^t X du`` is accumulated by the trapezoid rule, and the
background default time is ``zeta = inf{t : H(t) >= E}`` for a unit
exponential ``E``. An independent subordinator ``T`` is sampled at business
times ``t_i``; the observed pair is ``X^phi_{t_i} = X(T_{t_i})`` and
``D^phi_{t_i} = 1{zeta <= T_{t_i}}``.

Random streams are derived per block of ``BLOCK_SIZE`` paths from
``(seed, block index)``, so results do not depend on the worker count.
"""

from __future__ import annotations

import csv
import functools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from . import model, subordinators
from .cir import CirParams
from .errors import ConvergenceError, DomainError
from .model import SubCirModel

BLOCK_SIZE = 8192
HORIZON_CAP = 1e4
K_GRID_MAX = 1.0
# steps shorter than this are treated as landing on the current point
_DT_EPS = 1e-13


def _block_rng(seed: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(block,))))


def sample_cir_exact(p: CirParams, x0, dt, rng: np.random.Generator, size=None):
    """Draw ``X_{dt}`` given ``X_0 = x0`` from the exact transition law:
    ``c`` times a noncentral chi-square with ``4 kappa theta / sigma^2`` degrees of freedom.
    """
    dt = np.asarray(dt, dtype=float)
    if np.any(dt <= 0):
        raise DomainError("dt must be positive")
    x0 = np.asarray(x0, dtype=float)
    if np.any(x0 < 0):
        raise DomainError("x0 must be nonnegative")
    q = -np.expm1(-p.kappa * dt)
    c = p.sigma**2 * q / (4.0 * p.kappa)
    df = 4.0 * p.kappa * p.theta / p.sigma**2
    nonc = x0 * np.exp(-p.kappa * dt) / c
    if size is None:
        size = np.broadcast(x0, dt).shape or None
    return c * rng.noncentral_chisquare(df, nonc, size)


@dataclass
class Background:
    times: Optional[np.ndarray]
    trajectory: Optional[np.ndarray]
    hazard: Optional[np.ndarray]
    hazard_end: np.ndarray
    threshold: np.ndarray
    zeta: np.ndarray


def _identity(x):
    return x


def simulate_background(p: CirParams, k: Callable = _identity, horizon_bg: float = 1.0,
                        h: float = 1 / 500, rng: Optional[np.random.Generator] = None,
                        n_paths: int = 1, x0: Optional[float] = None, threshold=None,
                        step: Optional[Callable] = None, extend: bool = True,
                        keep_trajectory: bool = True) -> Background:
    """Background CIR paths, trapezoid hazard and default time ``zeta``.

    With ``extend`` the march continues past ``horizon_bg`` until every path
    has defaulted or ``HORIZON_CAP`` is reached; otherwise ``zeta = inf``
    marks paths that survive ``horizon_bg``. ``step(x, dt, rng)`` replaces
    the exact transition (a test hook).
    """
    if not (h > 0 and horizon_bg > 0):
        raise DomainError("h and horizon_bg must be positive")
    rng = np.random.default_rng() if rng is None else rng
    step = step or (lambda x, dt, g: sample_cir_exact(p, x, dt, g))
    x = np.full(n_paths, p.theta if x0 is None else float(x0))
    E = rng.exponential(size=n_paths) if threshold is None else np.broadcast_to(
        np.asarray(threshold, dtype=float), (n_paths,)).copy()
    H = np.zeros(n_paths)
    zeta = np.full(n_paths, np.inf)
    kx = np.asarray(k(x), dtype=float)
    traj, haz = [x.copy()], [H.copy()]
    n_steps = int(math.ceil(horizon_bg / h - 1e-9))
    i = 0
    while True:
        if i == n_steps:
            if not extend or np.all(np.isfinite(zeta)):
                break
            if (i + 1) * h > HORIZON_CAP:
                raise ConvergenceError(f"default not reached by the {HORIZON_CAP}-year cap")
            n_steps += int(math.ceil(horizon_bg / h - 1e-9))
        x_new = np.asarray(step(x, h, rng), dtype=float)
        k_new = np.asarray(k(x_new), dtype=float)
        H_new = H + 0.5 * h * (kx + k_new)
        cross = (H < E) & (H_new >= E)
        zeta[cross] = i * h + h * (E[cross] - H[cross]) / (H_new[cross] - H[cross])
        x, kx, H = x_new, k_new, H_new
        i += 1
        if keep_trajectory:
            traj.append(x.copy())
            haz.append(H.copy())
    if keep_trajectory:
        return Background(np.arange(i + 1) * h, np.stack(traj, 1), np.stack(haz, 1), H, E, zeta)
    return Background(None, None, None, H, E, zeta)


@dataclass(frozen=True)
class PathConfig:
    business_times: Sequence[float]
    n_paths: int
    seed: int = 0
    h: float = 1 / 500
    antithetic: bool = False
    x0: Optional[float] = None

    def __post_init__(self):
        bt = np.asarray(self.business_times, dtype=float)
        if bt.ndim != 1 or bt.size == 0:
            raise DomainError("business_times must be a nonempty 1-d grid")
        if bt[0] < 0 or np.any(np.diff(bt) <= 0):
            raise DomainError("business_times must start at >= 0 and increase strictly")
        if not self.h > 0:
            raise DomainError("h must be positive")
        if self.n_paths < 1:
            raise DomainError("n_paths must be positive")
        if self.antithetic and self.n_paths % 2:
            raise DomainError("antithetic sampling needs an even n_paths")
        if self.x0 is not None and not self.x0 >= 0:
            raise DomainError("x0 must be nonnegative")

    @property
    def grid(self) -> np.ndarray:
        return np.asarray(self.business_times, dtype=float)


@dataclass
class PathSet:
    """Paths observed at business times.

    ``clock``, ``x_phi``, ``d_phi`` and ``hazard`` have shape
    ``(n_paths, n_times)``; ``hazard`` is ``H(T_t)``. With ``antithetic``
    paths ``i`` and ``i + n/2`` of each block share the uniform behind the
    threshold; ``pair_index`` maps each path to its pair.
    """

    business_times: np.ndarray
    clock: np.ndarray
    x_phi: np.ndarray
    d_phi: np.ndarray
    hazard: np.ndarray
    threshold: np.ndarray
    zeta: np.ndarray
    pair_index: np.ndarray

    @property
    def n_paths(self) -> int:
        return self.clock.shape[0]

    def to_csv(self, fh, k_phi: Optional[Callable] = None):
        w = csv.writer(fh, lineterminator="\n")
        head = ["path_id", "t", "T_t", "X_phi", "D_phi"]
        if k_phi is not None:
            head.append("k_phi_of_X")
            kv = np.asarray(k_phi(self.x_phi))
        w.writerow(head)
        for i in range(self.n_paths):
            for j, t in enumerate(self.business_times):
                row = [i, repr(float(t)), repr(float(self.clock[i, j])), repr(float(self.x_phi[i, j])),
                       int(self.d_phi[i, j])]
                if k_phi is not None:
                    row.append(repr(float(kv[i, j])))
                w.writerow(row)


def _subordinator_clock(sub, grid: np.ndarray, n: int, rng) -> np.ndarray:
    dts = np.diff(np.concatenate(([0.0], grid)))
    cols = []
    for dt in dts:
        cols.append(np.zeros(n) if dt == 0 else np.asarray(subordinators.sample_increment(sub, dt, rng, n)))
    return np.cumsum(np.stack(cols, 1), axis=1)


def _march(p: CirParams, x0: float, targets: np.ndarray, E: np.ndarray, h: float, rng):
    """Step every path along the fine grid merged with its own target times.

    Returns ``X`` and ``H`` at the targets and the crossing time ``zeta``
    (``inf`` if ``H`` has not reached ``E`` by the last target).
    """
    n, K = targets.shape
    if targets[:, -1].max() > HORIZON_CAP:
        raise ConvergenceError(f"subordinator clock exceeded the {HORIZON_CAP}-year cap")
    X = np.full(n, x0)
    t = np.zeros(n)
    H = np.zeros(n)
    zeta = np.full(n, np.inf)
    nxt = np.zeros(n, dtype=np.int64)
    out_x = np.empty((n, K))
    out_h = np.empty((n, K))

    def advance(idx, t_new):
        dt = t_new - t[idx]
        mv = dt > _DT_EPS
        if not mv.any():
            return
        i = idx[mv]
        d = dt[mv]
        x_old = X[i]
        x_new = sample_cir_exact(p, x_old, d, rng)
        h_old = H[i]
        h_new = h_old + 0.5 * d * (x_old + x_new)
        e = E[i]
        cross = (h_old < e) & (h_new >= e)
        if cross.any():
            zeta[i[cross]] = t[i[cross]] + d[cross] * (e[cross] - h_old[cross]) / (h_new[cross] - h_old[cross])
        X[i] = x_new
        H[i] = h_new
        t[i] = t_new[mv]

    active = np.arange(n)
    g = 0
    while active.size:
        t_grid = (g + 1) * h
        while active.size:
            tgt = targets[active, nxt[active]]
            hit = tgt <= t_grid + _DT_EPS
            if not hit.any():
                break
            idx = active[hit]
            advance(idx, tgt[hit])
            out_x[idx, nxt[idx]] = X[idx]
            out_h[idx, nxt[idx]] = H[idx]
            nxt[idx] += 1
            active = active[nxt[active] < K]
        if active.size:
            advance(active, np.full(active.size, t_grid))
        g += 1
    return out_x, out_h, zeta


def _simulate_block(m: SubCirModel, cfg: PathConfig, block: int, n: int) -> PathSet:
    rng = _block_rng(cfg.seed, block)
    grid = cfg.grid
    clock = _subordinator_clock(m.sub, grid, n, rng)
    if cfg.antithetic:
        u = rng.random(n // 2)
        u = np.concatenate((u, 1.0 - u))
        pair = np.concatenate((np.arange(n // 2), np.arange(n // 2)))
    else:
        u = rng.random(n)
        pair = np.arange(n)
    # E = -log(1 - u) keeps E finite for u = 0
    E = -np.log1p(-u)
    x0 = m.cir.theta if cfg.x0 is None else cfg.x0
    x_phi, haz, zeta = _march(m.cir, x0, clock, E, cfg.h, rng)
    d_phi = zeta[:, None] <= clock
    return PathSet(grid, clock, x_phi, d_phi, haz, E, zeta, pair)


def _blocks(n_paths: int):
    sizes = [BLOCK_SIZE] * (n_paths // BLOCK_SIZE)
    if n_paths % BLOCK_SIZE:
        sizes.append(n_paths % BLOCK_SIZE)
    return sizes


def simulate_subcir(m: SubCirModel, cfg: PathConfig, threads: int = 1) -> PathSet:
    """Simulate ``cfg.n_paths`` paths of ``(T, X^phi, D^phi)``; ``threads`` does not
    affect the result."""
    sizes = _blocks(cfg.n_paths)
    job = functools.partial(_simulate_block, m, cfg)
    if threads > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(job, range(len(sizes)), sizes))
    else:
        parts = [job(b, s) for b, s in enumerate(sizes)]
    offsets = np.cumsum([0] + sizes[:-1])
    return PathSet(
        cfg.grid,
        np.concatenate([q.clock for q in parts]),
        np.concatenate([q.x_phi for q in parts]),
        np.concatenate([q.d_phi for q in parts]),
        np.concatenate([q.hazard for q in parts]),
        np.concatenate([q.threshold for q in parts]),
        np.concatenate([q.zeta for q in parts]),
        np.concatenate([q.pair_index + o for q, o in zip(parts, offsets)]),
    )


def _grid_index(grid: np.ndarray, T: float) -> int:
    j = np.flatnonzero(np.isclose(grid, T, rtol=0.0, atol=1e-12))
    if j.size == 0:
        raise DomainError(f"T={T} is not a business time")
    return int(j[0])


def _mean_se(values: np.ndarray, pair_index: np.ndarray):
    """Mean and standard error, averaging antithetic pairs first."""
    n_groups = int(pair_index.max()) + 1
    if n_groups < values.size:
        values = np.bincount(pair_index, weights=values, minlength=n_groups) / np.bincount(pair_index)
    mean = float(np.mean(values))
    se = float(np.std(values, ddof=1) / math.sqrt(values.size)) if values.size > 1 else 0.0
    return mean, se


def estimate_survival(m: SubCirModel, T: float, x: float, cfg: PathConfig,
                      paths: Optional[PathSet] = None, threads: int = 1):
    """``(estimate, standard error)`` of ``P(D^phi_T = 0)`` started at ``x``."""
    if T == 0:
        return 1.0, 0.0
    if paths is None:
        cfg = PathConfig(cfg.business_times, cfg.n_paths, cfg.seed, cfg.h, cfg.antithetic, x)
        paths = simulate_subcir(m, cfg, threads)
    j = _grid_index(paths.business_times, T)
    return _mean_se(1.0 - paths.d_phi[:, j].astype(float), paths.pair_index)


@functools.lru_cache(maxsize=8)
def _cached_killing_rate(m: SubCirModel, x_max: float):
    return model.killing_rate_interpolator(m, x_max)


@dataclass(frozen=True)
class CompensatorResult:
    lhs: float
    rhs: float
    diff: float
    se: float


def compensator_check(m: SubCirModel, T: float, x: float, cfg: PathConfig,
                      paths: Optional[PathSet] = None, threads: int = 1) -> CompensatorResult:
    """Compare ``E[D^phi_T]`` with ``E[int_0^T (1 - D^phi_s) k^phi(X^phi_s) ds]`` on the
    same paths. The standard error is that of the per-path difference.
    """
    grid = cfg.grid if paths is None else paths.business_times
    j = _grid_index(grid, T)
    if j > 0 and np.max(np.diff(grid[: j + 1])) > 1 / 50 + 1e-12:
        raise DomainError("business step must not exceed 1/50 year on [0, T]")
    if T == 0:
        return CompensatorResult(0.0, 0.0, 0.0, 0.0)
    if paths is None:
        cfg = PathConfig(cfg.business_times, cfg.n_paths, cfg.seed, cfg.h, cfg.antithetic, x)
        paths = simulate_subcir(m, cfg, threads)
    k = (lambda v: v) if m.sub.is_trivial else _cached_killing_rate(m, K_GRID_MAX)
    d = paths.d_phi[:, : j + 1].astype(float)
    integrand = (1.0 - d) * k(paths.x_phi[:, : j + 1])
    dt = np.diff(paths.business_times[: j + 1])
    comp = np.sum(0.5 * (integrand[:, 1:] + integrand[:, :-1]) * dt, axis=1)
    if paths.business_times[0] > 0:
        raise DomainError("compensator grid must start at 0")
    lhs, _ = _mean_se(d[:, j], paths.pair_index)
    rhs, _ = _mean_se(comp, paths.pair_index)
    diff, se = _mean_se(d[:, j] - comp, paths.pair_index)
    return CompensatorResult(lhs, rhs, diff, se)
