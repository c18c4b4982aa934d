# -*- coding: utf-8 -*-
# abcapp/handlers/simulate.py
from __future__ import annotations

import logging
from pathlib import Path

from abcapp.config import RunConfig
from abcapp.errors import ConfigError
from abcapp.services.models import build_model, write_dataset
from abcapp.utils.outputs import write_json
from abcapp.utils.seeds import derive_seed
from abcapp import __version__

log = logging.getLogger(__name__)


def dataset_seed(cfg: RunConfig, j: int) -> int:
    """Misma derivación que usa el estudio de tasas requeridas para sus datasets."""
    return derive_seed(cfg.seed, 10, cfg.model.n, j)


def cmd_simulate(cfg: RunConfig, config_hash: str) -> Path:
    """
    simulate

    - Genera study.datasets datasets del modelo con theta = model.truth.
    - Escribe <out>/datasets/dataset_XXX.txt (un real por línea) y manifest.json.
    """
    out = Path(cfg.output_dir) / "datasets"
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"no se puede escribir en {out}: {exc}") from exc

    model = build_model(cfg.model)
    theta0 = cfg.model.theta0
    entries = []
    for j in range(int(cfg.study.datasets)):
        seed_j = dataset_seed(cfg, j)
        path = out / f"dataset_{j:03d}.txt"
        write_dataset(model.simulate(theta0, seed_j), path, config_hash, seed_j, extra={"model": model.name, "n": model.n})
        entries.append({"index": j, "file": path.name, "seed": seed_j})

    manifest = {
        "_header": {"version": __version__, "config_hash": config_hash, "seed": cfg.seed},
        "model": model.name,
        "n": model.n,
        "theta": theta0,
        "datasets": entries,
    }
    path = write_json(manifest, out / "manifest.json")
    log.info("[simulate] %d datasets (%s, n=%d) -> %s", len(entries), model.name, model.n, out)
    return path
