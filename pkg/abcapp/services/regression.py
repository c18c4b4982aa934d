# -*- coding: utf-8 -*-
"""
Ajuste por regresión lineal local de los draws aceptados.

    theta_i = alpha + beta (s_i - s_obs) + e_i
    beta_hat = cov_N(s, theta) var_N(s)^{-1}     (mínimos cuadrados, ponderados si hay pesos)
    theta*_i = theta_i - beta_hat (s_i - s_obs)
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import pandas as pd

from abcapp.errors import InsufficientSampleError
from abcapp.services.kernels import KernelSpec, kernel_profile
from abcapp.services.models import GaussianOracle, GaussianOracleModel, check_vector
from abcapp.services.samplers import AbcRun, ProposalSpec, run_rejection
from abcapp.utils.seeds import derive_seed

log = logging.getLogger(__name__)

DEFAULT_RIDGE = 1e-8
COND_LIMIT = 1e12


@dataclass(frozen=True, eq=False)
class RegressionFit:
    alpha_hat: np.ndarray    # (p,)
    beta_hat: np.ndarray     # (p, d)
    gram_condition: float
    n_used: int
    ridge: float = 0.0       # jitter sumado a la diagonal de la Gram (0 si no hizo falta)
    weighted: bool = False


@dataclass(frozen=True, eq=False)
class AdjustedRun:
    theta_star: np.ndarray   # (k, p)
    weight: np.ndarray       # (k,) los mismos pesos que la fuente
    source: AbcRun
    fit: RegressionFit

    @property
    def theta(self) -> np.ndarray:
        return self.theta_star

    @property
    def n_accepted(self) -> int:
        return int(self.theta_star.shape[0])


def fit_linear_arrays(
    theta,
    s,
    s_obs,
    weights=None,
    *,
    ridge: float = DEFAULT_RIDGE,
) -> RegressionFit:
    t = np.asarray(theta, dtype=float)
    x = np.asarray(s, dtype=float)
    # vectores 1-D = una columna
    t = t.reshape(-1, 1) if t.ndim == 1 else t
    x = x.reshape(-1, 1) if x.ndim == 1 else x
    k, d = x.shape
    if t.shape[0] != k:
        raise ValueError(f"theta ({t.shape[0]} filas) y s ({k} filas) no coinciden")
    s_obs = check_vector(s_obs, d, "s_obs")
    if k <= d + 1:
        raise InsufficientSampleError(f"regresión con {k} draws y d={d}: se necesitan más de d+1")

    w = np.ones(k) if weights is None else np.asarray(weights, dtype=float).reshape(-1)
    sw = float(np.sum(w))
    if sw <= 0.0:
        raise InsufficientSampleError("los pesos de la regresión suman 0")
    s_bar = w @ x / sw
    t_bar = w @ t / sw
    xc = x - s_bar
    tc = t - t_bar
    gram = (xc * w[:, None]).T @ xc / sw       # var_N(s)
    cross = (xc * w[:, None]).T @ tc / sw      # cov_N(s, theta)

    cond = float(np.linalg.cond(gram))
    jitter = 0.0
    if not np.isfinite(cond) or cond > COND_LIMIT:
        tr = float(np.trace(gram))
        jitter = ridge * tr / d if tr > 0 else ridge
        gram = gram + jitter * np.eye(d)
        log.warning("[regression] Gram mal condicionada (cond=%.3g): jitter %.3g en la diagonal", cond, jitter)
        cond = float(np.linalg.cond(gram))

    coef = np.linalg.solve(gram, cross)        # (d, p)
    beta_hat = coef.T
    alpha_hat = t_bar - beta_hat @ (s_bar - s_obs)
    return RegressionFit(
        alpha_hat=alpha_hat,
        beta_hat=beta_hat,
        gram_condition=cond,
        n_used=k,
        ridge=jitter,
        weighted=weights is not None,
    )


def fit_linear(
    draws: AbcRun,
    s_obs,
    use_weights: bool = True,
    *,
    ridge: float = DEFAULT_RIDGE,
    kernel_weighted: bool = False,
) -> RegressionFit:
    """
    Regresión de theta sobre (1, s - s_obs) en los aceptados. Con
    kernel_weighted=True los pesos se multiplican por el perfil Epanechnikov de
    distance/epsilon (variante local-lineal clásica; desactivada por defecto).
    """
    weights = np.asarray(draws.weight, dtype=float) if use_weights else None
    if kernel_weighted and np.isfinite(draws.epsilon):
        kw = kernel_profile("epanechnikov", np.square(draws.distance / draws.epsilon))
        weights = kw if weights is None else weights * kw
    return fit_linear_arrays(draws.theta, draws.s, s_obs, weights, ridge=ridge)


def adjust(run: AbcRun, fit: RegressionFit, s_obs) -> AdjustedRun:
    """theta*_i = theta_i - beta_hat (s_i - s_obs); pesos intactos."""
    p, d = fit.beta_hat.shape
    if run.theta.shape[1] != p or run.s.shape[1] != d:
        raise ValueError(
            f"dimensiones del ajuste ({p}x{d}) no casan con el run (p={run.theta.shape[1]}, d={run.s.shape[1]})"
        )
    s_obs = check_vector(s_obs, d, "s_obs")
    theta_star = run.theta - (run.s - s_obs) @ fit.beta_hat.T
    return AdjustedRun(theta_star=theta_star, weight=run.weight.copy(), source=run, fit=fit)


# ---------------------------
# Oráculo gaussiano
# ---------------------------
def oracle_beta(oracle: GaussianOracle) -> float:
    """
    beta_eps poblacional con propuesta prior: el kernel sólo depende de s,
    así que theta|s no cambia al aceptar y beta_eps = v0 / (v0 + sigma^2/n)
    para cualquier epsilon.
    """
    return oracle.prior_var / (oracle.prior_var + oracle.summary_var)


def beta_zero(oracle: GaussianOracle) -> float:
    return oracle.beta0


def beta_error_scaling(
    oracle: GaussianOracle,
    n: int,
    epsilon: float,
    N_grid,
    replicates: int,
    seed: int,
    *,
    s_obs: float | None = None,
    N_ref: int | None = None,
    kernel_family: str = "gaussian",
    mode: str = "bernoulli",
    block_size: int = 1000,
) -> pd.DataFrame:
    """
    Error ||beta_hat - beta_ref|| frente a N (propuestas). beta_ref sale de un
    ajuste de referencia con N_ref = 100 * max(N_grid) por defecto.
    Columnas: N, replicate, beta_hat, beta_ref, error.
    """
    grid = [int(v) for v in N_grid]
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError(f"N_grid debe ser creciente: {grid}")
    model = GaussianOracleModel(GaussianOracle(oracle.prior_mean, oracle.prior_var, oracle.obs_noise_var, int(n)))
    s_obs_v = np.array([oracle.prior_mean if s_obs is None else float(s_obs)])
    kernel = KernelSpec.identity(kernel_family, 1, epsilon)
    proposal = ProposalSpec.prior()

    def _beta(N: int, run_seed: int) -> float:
        run = run_rejection(model, kernel, proposal, s_obs_v, N, mode, run_seed, block_size=block_size)
        return float(fit_linear(run, s_obs_v, use_weights=False).beta_hat[0, 0])

    n_ref = int(N_ref) if N_ref else 100 * max(grid)
    beta_ref = _beta(n_ref, derive_seed(seed, 0, n_ref))
    log.info("[regression] beta_ref=%.6f con N_ref=%d", beta_ref, n_ref)

    rows = []
    for N in grid:
        for r in range(int(replicates)):
            b = _beta(N, derive_seed(seed, 1, N, r))
            rows.append({"N": N, "replicate": r, "beta_hat": b, "beta_ref": beta_ref, "error": abs(b - beta_ref)})
    return pd.DataFrame(rows)


def error_slope(table: pd.DataFrame) -> float:
    """Pendiente de log(mediana del error) frente a log N."""
    med = table.groupby("N")["error"].median()
    slope, _ = np.polyfit(np.log(med.index.to_numpy(dtype=float)), np.log(med.to_numpy()), 1)
    return float(slope)
