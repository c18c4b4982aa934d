# -*- coding: utf-8 -*-
"""
Samplers ABC por rechazo / muestreo por importancia.

Flujo:
1) simulate_pool: theta_i ~ q_n, s_i ~ f_n(s|theta_i), log-peso log pi - log q
   y un uniforme por draw. Es lo caro (el simulador) y no depende del kernel.
2) accept_pool: aplica kernel y bandwidth sobre el pool (modo bernoulli o threshold).
3) run_rejection = 1 + 2.

Semillas: el draw i pertenece al bloque i // block_size y el bloque b usa
SeedSequence([seed, b]). Los bloques se reparten entre workers (joblib) y se
juntan por índice, así que el resultado no depende del número de workers.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from scipy import stats

from abcapp.errors import InsufficientSampleError
from abcapp.services import kernels
from abcapp.services.kernels import KernelSpec
from abcapp.services.models import ModelSpec, check_vector
from abcapp.utils.outputs import write_csv
from abcapp.utils.seeds import rng_for

log = logging.getLogger(__name__)

AcceptMode = Literal["bernoulli", "threshold"]
DEFAULT_BLOCK_SIZE = 1000


# ---------------------------
# Propuestas
# ---------------------------
@dataclass(frozen=True, eq=False)
class ProposalSpec:
    """
    Familia location-scale: theta = mu + sigma * L x, x ~ N(0, I), con
    shape = L L^T. base='prior' ignora mu/sigma y propone desde el prior.
    """
    base: Literal["gaussian", "prior"]
    mu: np.ndarray | None = None
    sigma: float = 1.0
    shape: np.ndarray | None = None

    def __post_init__(self) -> None:
        if self.base not in ("gaussian", "prior"):
            raise ValueError(f"propuesta desconocida: {self.base!r}")
        if self.base == "prior":
            return
        if not self.sigma > 0:
            raise ValueError(f"sigma debe ser > 0 (sigma={self.sigma})")
        mu = np.asarray(self.mu, dtype=float).reshape(-1)
        shape = np.eye(mu.size) if self.shape is None else np.atleast_2d(np.asarray(self.shape, dtype=float))
        if shape.shape != (mu.size, mu.size):
            raise ValueError(f"shape {shape.shape} incompatible con mu de dimensión {mu.size}")
        try:
            np.linalg.cholesky(shape)
        except np.linalg.LinAlgError as exc:
            raise ValueError("la matriz de forma de la propuesta no es definida positiva") from exc
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "shape", shape)

    @classmethod
    def prior(cls) -> "ProposalSpec":
        return cls("prior")

    @property
    def cov(self) -> np.ndarray:
        if self.base == "prior":
            raise ValueError("la propuesta 'prior' no tiene covarianza propia")
        return self.sigma**2 * self.shape

    def _mvn(self):
        return stats.multivariate_normal(mean=self.mu, cov=self.cov)

    def sample(self, model: ModelSpec, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.base == "prior":
            return model.prior.sample(rng, size)
        chol = np.linalg.cholesky(self.cov)
        x = rng.standard_normal((size, self.mu.size))
        return self.mu + x @ chol.T

    def log_weights(self, model: ModelSpec, thetas: np.ndarray) -> np.ndarray:
        """log pi(theta) - log q_n(theta); 0 exacto con propuesta prior."""
        if self.base == "prior":
            return np.zeros(thetas.shape[0])
        logq = np.atleast_1d(self._mvn().logpdf(thetas))
        return model.prior.logpdf(thetas) - logq


def make_proposal(center, cov, c: float, offset=None) -> ProposalSpec:
    """Normal con media center+offset y covarianza c^2 * cov."""
    center = np.asarray(center, dtype=float).reshape(-1)
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    if not c > 0:
        raise ValueError(f"c debe ser > 0 (c={c})")
    if cov.shape != (center.size, center.size):
        raise ValueError(f"cov {cov.shape} incompatible con center de dimensión {center.size}")
    try:
        np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise ValueError("cov de la propuesta no es definida positiva") from exc
    off = np.zeros_like(center) if offset is None else check_vector(offset, center.size, "offset")
    return ProposalSpec("gaussian", mu=center + off, sigma=float(c), shape=cov)


# ---------------------------
# Pool de simulaciones
# ---------------------------
@dataclass(frozen=True, eq=False)
class SimulationPool:
    theta: np.ndarray        # (N, p)
    s: np.ndarray            # (N, d); NaN donde pi(theta)=0 o el simulador no está definido
    log_weight: np.ndarray   # (N,)
    u: np.ndarray            # (N,) uniformes para la aceptación bernoulli
    seed: int
    block_size: int = DEFAULT_BLOCK_SIZE

    @property
    def n_proposed(self) -> int:
        return int(self.theta.shape[0])

    @property
    def simulated(self) -> np.ndarray:
        return np.all(np.isfinite(self.s), axis=1)

    def distances(self, kernel: KernelSpec, s_obs) -> np.ndarray:
        """||s_i - s_obs||_Lambda; +inf para draws no simulados."""
        out = np.full(self.n_proposed, np.inf)
        ok = self.simulated
        if np.any(ok):
            out[ok] = kernels.distance(kernel, self.s[ok], s_obs)
        return out


def _simulate_block(model: ModelSpec, proposal: ProposalSpec, seed: int, block: int, size: int):
    rng = rng_for(seed, block)
    theta = proposal.sample(model, rng, size)
    logw = proposal.log_weights(model, theta)
    u = rng.uniform(size=size)
    s = np.full((size, model.d), np.nan)
    ok = np.isfinite(logw) & model.valid(theta)
    if np.any(ok):
        s[ok] = model.simulate_summaries(theta[ok], rng)
    return theta, s, logw, u


def simulate_pool(
    model: ModelSpec,
    proposal: ProposalSpec,
    N: int,
    seed: int,
    *,
    block_size: int = DEFAULT_BLOCK_SIZE,
    n_jobs: int = 1,
) -> SimulationPool:
    if N < 1:
        raise ValueError(f"N debe ser >= 1 (N={N})")
    if block_size < 1:
        raise ValueError(f"block_size debe ser >= 1 (block_size={block_size})")
    sizes = [min(block_size, N - start) for start in range(0, N, block_size)]
    if n_jobs == 1:
        parts = [_simulate_block(model, proposal, seed, b, sz) for b, sz in enumerate(sizes)]
    else:
        parts = Parallel(n_jobs=n_jobs)(
            delayed(_simulate_block)(model, proposal, seed, b, sz) for b, sz in enumerate(sizes)
        )
    theta, s, logw, u = (np.concatenate(x, axis=0) for x in zip(*parts))
    return SimulationPool(theta=theta, s=s, log_weight=logw, u=u, seed=int(seed), block_size=int(block_size))


# ---------------------------
# Draws y runs
# ---------------------------
@dataclass(frozen=True, eq=False)
class AbcDraw:
    idx: int
    theta: np.ndarray
    s: np.ndarray
    distance: float
    kernel_value: float
    weight: float
    accepted: bool


@dataclass(frozen=True, eq=False)
class AbcRun:
    theta: np.ndarray          # aceptados (k, p)
    s: np.ndarray              # (k, d)
    distance: np.ndarray       # (k,) sin escalar
    kernel_value: np.ndarray   # (k,)
    weight: np.ndarray         # (k,)
    idx: np.ndarray            # (k,) índice del draw en el pool
    n_proposed: int
    p_acc_hat: float
    epsilon: float
    seed: int
    mode: AcceptMode
    s_obs: np.ndarray = field(default_factory=lambda: np.zeros(0))
    pool: SimulationPool | None = None
    pool_distance: np.ndarray | None = None
    pool_kernel_value: np.ndarray | None = None

    @property
    def n_accepted(self) -> int:
        return int(self.theta.shape[0])

    @property
    def is_empty(self) -> bool:
        return self.n_accepted == 0

    @property
    def draws(self) -> list[AbcDraw]:
        return [
            AbcDraw(int(i), t, s, float(dist), float(k), float(w), True)
            for i, t, s, dist, k, w in zip(self.idx, self.theta, self.s, self.distance, self.kernel_value, self.weight)
        ]

    @property
    def ess(self) -> float:
        return effective_sample_size(self.weight)


def effective_sample_size(weights) -> float:
    """ESS = (sum w)^2 / sum w^2."""
    w = np.asarray(weights, dtype=float)
    sw2 = float(np.sum(w * w))
    if sw2 == 0.0:
        return 0.0
    return float(np.sum(w)) ** 2 / sw2


def accept_pool(
    pool: SimulationPool,
    kernel: KernelSpec,
    s_obs,
    mode: AcceptMode = "bernoulli",
    *,
    keep_pool: bool = False,
) -> AbcRun:
    s_obs = check_vector(s_obs, kernel.d, "s_obs")
    dist = pool.distances(kernel, s_obs)
    with np.errstate(invalid="ignore", divide="ignore"):
        scaled = dist / kernel.epsilon
    kval = np.where(np.isfinite(scaled), kernels.kernel_profile(kernel.family, np.square(scaled)), 0.0)
    if mode == "bernoulli":
        accepted = pool.u < kval
    elif mode == "threshold":
        accepted = scaled <= 1.0
    else:
        raise ValueError(f"modo de aceptación desconocido: {mode!r}")

    idx = np.flatnonzero(accepted)
    weight = np.exp(pool.log_weight[idx])
    run = AbcRun(
        theta=pool.theta[idx],
        s=pool.s[idx],
        distance=dist[idx],
        kernel_value=kval[idx],
        weight=weight,
        idx=idx,
        n_proposed=pool.n_proposed,
        p_acc_hat=idx.size / pool.n_proposed,
        epsilon=float(kernel.epsilon),
        seed=pool.seed,
        mode=mode,
        s_obs=s_obs,
        pool=pool if keep_pool else None,
        pool_distance=dist if keep_pool else None,
        pool_kernel_value=kval if keep_pool else None,
    )
    if run.is_empty:
        log.warning("[sampler] 0 aceptados de %d (eps=%.4g, modo=%s)", pool.n_proposed, kernel.epsilon, mode)
    return run


def run_rejection(
    model: ModelSpec,
    kernel: KernelSpec,
    proposal: ProposalSpec,
    s_obs,
    N: int,
    mode: AcceptMode = "bernoulli",
    seed: int = 0,
    *,
    block_size: int = DEFAULT_BLOCK_SIZE,
    n_jobs: int = 1,
    keep_pool: bool = False,
) -> AbcRun:
    pool = simulate_pool(model, proposal, N, seed, block_size=block_size, n_jobs=n_jobs)
    run = accept_pool(pool, kernel, s_obs, mode, keep_pool=keep_pool)
    log.debug("[sampler] %s: %d/%d aceptados (p_acc=%.4g, eps=%.4g)", mode, run.n_accepted, N, run.p_acc_hat, run.epsilon)
    return run


def _smallest(dist: np.ndarray, k: int) -> np.ndarray:
    """Índices con distancia <= k-ésima menor (empates incluidos)."""
    if dist.size <= k:
        return np.arange(dist.size)
    kth = np.partition(dist, k - 1)[k - 1]
    return np.flatnonzero(dist <= kth)


def _nearest_block(model, proposal, kernel, s_obs, seed, block, start, size, k):
    theta, s, logw, _ = _simulate_block(model, proposal, seed, block, size)
    dist = np.full(size, np.inf)
    ok = np.all(np.isfinite(s), axis=1)
    if np.any(ok):
        dist[ok] = kernels.distance(kernel, s[ok], s_obs)
    keep = _smallest(dist, k)
    return start + keep, theta[keep], s[keep], logw[keep], dist[keep]


def run_nearest(
    model: ModelSpec,
    proposal: ProposalSpec,
    kernel: KernelSpec,
    s_obs,
    N: int,
    q: float,
    seed: int,
    *,
    block_size: int = DEFAULT_BLOCK_SIZE,
    n_jobs: int = 1,
) -> AbcRun:
    """
    Equivale a simulate_pool + bandwidth_from_proportion(q) + accept_pool en
    modo threshold, pero sólo retiene los ceil(qN) draws más cercanos de cada
    bloque: la memoria no crece con N.
    """
    if N < 1:
        raise ValueError(f"N debe ser >= 1 (N={N})")
    if not 0.0 < q <= 1.0:
        raise ValueError(f"q debe estar en (0, 1] (q={q})")
    s_obs = check_vector(s_obs, kernel.d, "s_obs")
    k = min(N, max(1, math.ceil(q * N - 1e-9)))
    starts = list(range(0, N, block_size))
    tasks = (
        delayed(_nearest_block)(model, proposal, kernel, s_obs, seed, b, start, min(block_size, N - start), k)
        for b, start in enumerate(starts)
    )
    if n_jobs == 1:
        parts = (fn(*args, **kw) for fn, args, kw in tasks)
    else:
        parts = Parallel(n_jobs=n_jobs, return_as="generator")(tasks)

    best = None
    for part in parts:
        merged = part if best is None else tuple(np.concatenate(pair, axis=0) for pair in zip(best, part))
        keep = _smallest(merged[4], k)
        best = tuple(x[keep] for x in merged)

    idx, theta, s, logw, dist = best
    order = np.argsort(idx, kind="stable")
    idx, theta, s, logw, dist = idx[order], theta[order], s[order], logw[order], dist[order]
    eps = float(np.partition(dist, k - 1)[k - 1])
    accepted = np.isfinite(dist) & (dist <= eps)
    kval = kernels.kernel_profile(kernel.family, np.square(dist[accepted] / eps)) if eps > 0 else np.ones(int(accepted.sum()))
    run = AbcRun(
        theta=theta[accepted],
        s=s[accepted],
        distance=dist[accepted],
        kernel_value=kval,
        weight=np.exp(logw[accepted]),
        idx=idx[accepted],
        n_proposed=int(N),
        p_acc_hat=int(accepted.sum()) / N,
        epsilon=eps,
        seed=int(seed),
        mode="threshold",
        s_obs=s_obs,
    )
    log.debug("[sampler] nearest: %d/%d con eps=%.4g", run.n_accepted, N, eps)
    return run


def estimate_pacc(run: AbcRun) -> tuple[float, float]:
    """Estimación Monte Carlo de p_acc y su error estándar binomial."""
    if run.n_proposed < 1:
        raise ValueError("estimate_pacc: N debe ser >= 1")
    p = run.n_accepted / run.n_proposed
    return p, math.sqrt(p * (1.0 - p) / run.n_proposed)


def weighted_moments(theta: np.ndarray, weights: np.ndarray | None) -> tuple[np.ndarray, np.ndarray]:
    """Media y covarianza autonormalizadas; con pesos iguales, las muestrales (ddof=1)."""
    t = np.atleast_2d(np.asarray(theta, dtype=float))
    if weights is None:
        mean = t.mean(axis=0)
        cov = np.atleast_2d(np.cov(t, rowvar=False))
    else:
        w = np.asarray(weights, dtype=float)
        mean = np.average(t, axis=0, weights=w)
        cov = np.atleast_2d(np.cov(t, rowvar=False, aweights=w))
    return mean, cov


def posterior_estimates(run, use_weights: bool = True) -> tuple[np.ndarray, np.ndarray, float]:
    """
    (media, covarianza, ESS) sobre los aceptados. Sirve para AbcRun y para
    AdjustedRun (ambos exponen .theta y .weight).
    """
    k = int(np.asarray(run.theta).shape[0])
    if k < 2:
        raise InsufficientSampleError(f"se necesitan >= 2 draws aceptados (hay {k})")
    w = np.asarray(run.weight, dtype=float) if use_weights else None
    if w is not None and float(np.sum(w)) <= 0.0:
        raise InsufficientSampleError("los pesos de importancia suman 0")
    mean, cov = weighted_moments(run.theta, w)
    ess = effective_sample_size(run.weight if use_weights else np.ones(k))
    return mean, cov, ess


def run_frame(run: AbcRun, *, all_draws: bool = False, theta_star: np.ndarray | None = None) -> pd.DataFrame:
    """
    Tabla idx,theta_1..theta_p,s_1..s_d,distance,kernel_value,weight,accepted
    (+ theta_star_1..theta_star_p si hay ajuste).
    """
    if all_draws:
        if run.pool is None:
            raise ValueError("run sin pool retenido: no se pueden volcar los rechazados")
        pool = run.pool
        accepted = np.zeros(pool.n_proposed, dtype=bool)
        accepted[run.idx] = True
        idx = np.arange(pool.n_proposed)
        theta, s = pool.theta, pool.s
        weight = np.exp(pool.log_weight)
        kval = run.pool_kernel_value
        distance = run.pool_distance
    else:
        idx, theta, s, weight = run.idx, run.theta, run.s, run.weight
        kval, distance = run.kernel_value, run.distance
        accepted = np.ones(run.n_accepted, dtype=bool)

    cols: dict[str, np.ndarray] = {"idx": idx}
    for j in range(theta.shape[1]):
        cols[f"theta_{j + 1}"] = theta[:, j]
    for j in range(s.shape[1]):
        cols[f"s_{j + 1}"] = s[:, j]
    cols.update(distance=distance, kernel_value=kval, weight=weight, accepted=accepted.astype(int))
    if theta_star is not None:
        full = np.full((idx.size, theta.shape[1]), np.nan)
        pos = np.searchsorted(idx, run.idx)
        full[pos] = theta_star
        for j in range(theta.shape[1]):
            cols[f"theta_star_{j + 1}"] = full[:, j]
    return pd.DataFrame(cols)


def write_run_csv(run: AbcRun, path: Path, config_hash: str, *, all_draws: bool = False, theta_star: np.ndarray | None = None) -> Path:
    df = run_frame(run, all_draws=all_draws, theta_star=theta_star)
    return write_csv(df, path, config_hash, run.seed, extra={"epsilon": run.epsilon, "mode": run.mode, "N": run.n_proposed})
