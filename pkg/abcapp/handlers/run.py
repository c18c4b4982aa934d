# -*- coding: utf-8 -*-
# abcapp/handlers/run.py
from __future__ import annotations

import logging
from pathlib import Path
from typing import Any

import numpy as np

from abcapp import __version__
from abcapp.config import RunConfig
from abcapp.errors import ConfigError, ZeroAcceptanceError
from abcapp.services.kernels import bandwidth_from_proportion, build_kernel
from abcapp.services.models import ModelSpec, build_model, read_dataset
from abcapp.services.regression import adjust, fit_linear
from abcapp.services.samplers import (
    ProposalSpec,
    accept_pool,
    estimate_pacc,
    posterior_estimates,
    simulate_pool,
    write_run_csv,
)
from abcapp.utils.outputs import write_json
from abcapp.utils.seeds import derive_seed

log = logging.getLogger(__name__)


def observed_summary(cfg: RunConfig, model: ModelSpec) -> np.ndarray:
    """model.observed (fichero de dataset) o, si está vacío, un dataset simulado con model.truth."""
    if cfg.model.observed:
        path = Path(cfg.model.observed)
        if not path.exists():
            raise ConfigError(f"no existe el dataset observado: {path}")
        return model.summarize(read_dataset(path))
    return model.observed_summary(cfg.model.theta0, derive_seed(cfg.seed, 20))


def build_proposal(cfg: RunConfig, model: ModelSpec) -> ProposalSpec:
    block = cfg.proposal
    if block.base == "prior":
        return ProposalSpec.prior()
    if len(block.mean) != model.p or len(block.sd) != model.p:
        raise ConfigError(f"proposal.mean y proposal.sd deben tener {model.p} valores")
    return ProposalSpec("gaussian", mu=np.asarray(block.mean), sigma=float(block.c), shape=np.diag(np.square(block.sd)))


def _moments(run, use_weights: bool) -> dict[str, Any]:
    mean, cov, ess = posterior_estimates(run, use_weights)
    return {"mean": mean, "sd": np.sqrt(np.diag(cov)), "ess": ess}


def cmd_run(cfg: RunConfig, config_hash: str) -> dict[str, Any]:
    """
    run

    - Sampler ABC (epsilon fijo o por proporción kernel.q) y, si está
      activado, ajuste por regresión.
    - Escribe raw.csv, adjusted.csv y summary.json en <out>/run.
    """
    out = Path(cfg.output_dir) / "run"
    model = build_model(cfg.model)
    s_obs = observed_summary(cfg, model)
    proposal = build_proposal(cfg, model)
    kernel = build_kernel(cfg.kernel, model, derive_seed(cfg.seed, 21))

    run_seed = derive_seed(cfg.seed, 22)
    pool = simulate_pool(model, proposal, int(cfg.sampler.N), run_seed, block_size=int(cfg.sampler.block_size), n_jobs=int(cfg.threads))
    if cfg.kernel.epsilon is None:
        eps = bandwidth_from_proportion(pool.distances(kernel, s_obs), float(cfg.kernel.q))
        log.info("[run] epsilon por proporción q=%.4g: %.6g", cfg.kernel.q, eps)
    else:
        eps = float(cfg.kernel.epsilon)
    run = accept_pool(pool, kernel.with_epsilon(eps), s_obs, cfg.sampler.mode, keep_pool=cfg.sampler.retain_rejected)
    if run.is_empty:
        raise ZeroAcceptanceError(f"0 aceptados de {run.n_proposed} propuestas (epsilon={eps:.6g})")

    p_acc, p_se = estimate_pacc(run)
    use_w = cfg.regression.use_weights
    summary: dict[str, Any] = {
        "_header": {"version": __version__, "config_hash": config_hash, "seed": cfg.seed},
        "model": model.name,
        "n": model.n,
        "N": run.n_proposed,
        "epsilon": eps,
        "mode": run.mode,
        "n_accepted": run.n_accepted,
        "p_acc": p_acc,
        "p_acc_se": p_se,
        "s_obs": s_obs,
        "raw": _moments(run, use_w),
    }
    write_run_csv(run, out / "raw.csv", config_hash, all_draws=cfg.sampler.retain_rejected)

    if cfg.regression.enabled:
        fit = fit_linear(run, s_obs, use_w, ridge=cfg.regression.ridge, kernel_weighted=cfg.regression.kernel_weighted)
        adj = adjust(run, fit, s_obs)
        summary["adjusted"] = _moments(adj, use_w)
        summary["regression"] = {
            "alpha_hat": fit.alpha_hat,
            "beta_hat": fit.beta_hat,
            "gram_condition": fit.gram_condition,
            "ridge": fit.ridge,
        }
        write_run_csv(run, out / "adjusted.csv", config_hash, all_draws=cfg.sampler.retain_rejected, theta_star=adj.theta_star)

    write_json(summary, out / "summary.json")
    log.info("[run] %d/%d aceptados (p_acc=%.4g) -> %s", run.n_accepted, run.n_proposed, p_acc, out)
    return summary
