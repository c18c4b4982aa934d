# -*- coding: utf-8 -*-
# abcapp/handlers/verify.py
from __future__ import annotations

import logging
from pathlib import Path

from rich.console import Console
from rich.table import Table

from abcapp.config import RunConfig
from abcapp.errors import VerificationFailure
from abcapp.services.verification import CriterionResult, results_frame, run_verification
from abcapp.utils.outputs import write_csv

log = logging.getLogger(__name__)


def render(results: list[CriterionResult], console: Console | None = None) -> None:
    table = Table(title="Verificación (oráculo gaussiano)")
    table.add_column("#", justify="right")
    table.add_column("criterio")
    table.add_column("medido")
    table.add_column("esperado")
    table.add_column("estado")
    table.add_column("s", justify="right")
    for r in results:
        state = "[green]OK[/green]" if r.passed else "[red]FALLO[/red]"
        table.add_row(r.key, r.name, r.measured, r.expected, state, f"{r.seconds:.1f}")
    (console or Console()).print(table)


def cmd_verify(cfg: RunConfig, config_hash: str, *, full: bool | None = None) -> list[CriterionResult]:
    """verify [--full]: criterios 1-6 y 8 (7 con --full); escribe <out>/verify.csv."""
    results = run_verification(cfg, full=full)
    render(results)
    write_csv(results_frame(results), Path(cfg.output_dir) / "verify.csv", config_hash, cfg.seed,
              extra={"tolerance_scale": cfg.verify.tolerance_scale})
    failed = [r.key for r in results if not r.passed]
    if failed:
        raise VerificationFailure(f"criterios fallidos: {', '.join(failed)}")
    log.info("[verify] %d criterios OK", len(results))
    return results
