# -*- coding: utf-8 -*-
# abcapp/handlers/report.py
from __future__ import annotations

import logging
from pathlib import Path

import pandas as pd

from abcapp.config import RunConfig
from abcapp.errors import ConfigError
from abcapp.services.asymptotics import summarize_records
from abcapp.utils.outputs import read_csv, write_csv

log = logging.getLogger(__name__)

GROUP_COLS = ["n", "c", "method", "target_metric", "target_value"]
STATISTICS = ("median", "q025", "q975")


def tidy_table(summary: pd.DataFrame, value: str = "required_q") -> pd.DataFrame:
    """Formato largo n,c,method,target_metric,target_value,statistic,value (gnuplot/vega)."""
    cols = {f"{value}_{stat}": stat for stat in STATISTICS}
    long = summary.melt(id_vars=GROUP_COLS, value_vars=list(cols), var_name="statistic", value_name="value")
    long["statistic"] = long["statistic"].map(cols)
    return long.sort_values(GROUP_COLS + ["statistic"], kind="mergesort").reset_index(drop=True)


def cmd_report(cfg: RunConfig, config_hash: str) -> Path:
    """
    report

    - Lee <out>/study/study.csv (y study_summary.csv; lo regenera si falta).
    - Escribe <out>/study/figure1_tidy.csv.
    """
    study_dir = Path(cfg.output_dir) / "study"
    study_csv = study_dir / "study.csv"
    if not study_csv.exists():
        raise ConfigError(f"no hay resultados de estudio en {study_csv}; ejecuta antes 'study'")
    summary_csv = study_dir / "study_summary.csv"
    if summary_csv.exists():
        summary = read_csv(summary_csv)
    else:
        summary = summarize_records(read_csv(study_csv), GROUP_COLS, ["required_q"])
        write_csv(summary, summary_csv, config_hash, cfg.seed)
        log.info("[report] regenerado %s", summary_csv)
    path = write_csv(tidy_table(summary), study_dir / "figure1_tidy.csv", config_hash, cfg.seed)
    log.info("[report] tabla larga -> %s", path)
    return path
