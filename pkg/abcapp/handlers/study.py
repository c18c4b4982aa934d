# -*- coding: utf-8 -*-
# abcapp/handlers/study.py
from __future__ import annotations

import logging
from pathlib import Path

from abcapp.config import RunConfig
from abcapp.services.asymptotics import RegimeSpec, StudyResult, figure1_study, regime_sweep
from abcapp.services.models import build_model
from abcapp.utils.outputs import write_csv

log = logging.getLogger(__name__)


def cmd_study(cfg: RunConfig, config_hash: str) -> StudyResult:
    """
    study

    - study.kind=figure1: cruce n x c x objetivos x {raw, adjusted}; reanudable
      por celdas en <out>/study/cells.
    - study.kind=regime: barrido de p_acc frente a n con eps_n = c n^{-gamma}.
    """
    if cfg.study.kind == "figure1":
        try:
            return figure1_study(cfg, cfg.output_dir, config_hash=config_hash)
        except KeyboardInterrupt:
            log.warning("[study] interrumpido: las celdas terminadas quedan en %s", Path(cfg.output_dir) / "study" / "cells")
            raise

    regime = RegimeSpec(cfg.study.a_n_rate, cfg.study.eps_c, cfg.study.eps_gamma)
    result = regime_sweep(
        build_model(cfg.model),
        regime,
        cfg.study.n_grid,
        int(cfg.study.N),
        int(cfg.seed),
        theta0=cfg.model.theta0,
        sigma_ratio=cfg.study.sigma_ratio,
        kernel_family=cfg.study.regime_kernel,
        block_size=int(cfg.sampler.block_size),
        n_jobs=int(cfg.threads),
        gold_N=int(cfg.study.gold_N),
        gold_q=float(cfg.study.gold_q),
        config_hash=config_hash,
    )
    out = Path(cfg.output_dir) / "study"
    write_csv(result.records, out / "regime.csv", config_hash, cfg.seed, extra={"c_eps": regime.c_eps_class})
    log.info("[study] régimen %s: %d puntos -> %s", regime.c_eps_class, len(result.records), out / "regime.csv")
    return result
