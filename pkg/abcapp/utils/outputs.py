# -*- coding: utf-8 -*-
"""
Escritura de salidas: todo fichero empieza con una cabecera de comentarios

    # abcapp <versión>
    # config_hash: <hash>
    # seed: <semilla>

CSV vía pandas, JSON vía orjson.
"""
from __future__ import annotations

from pathlib import Path
from typing import Any, Iterable

import numpy as np
import orjson
import pandas as pd

from abcapp import __version__


def header_lines(config_hash: str, seed: int, extra: dict[str, Any] | None = None) -> list[str]:
    lines = [f"# abcapp {__version__}", f"# config_hash: {config_hash}", f"# seed: {seed}"]
    for key, value in (extra or {}).items():
        lines.append(f"# {key}: {value}")
    return lines


def write_csv(df: pd.DataFrame, path: Path, config_hash: str, seed: int, extra: dict[str, Any] | None = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        fh.write("\n".join(header_lines(config_hash, seed, extra)) + "\n")
        df.to_csv(fh, index=False, float_format="%.17g", lineterminator="\n")
    return path


def read_csv(path: Path) -> pd.DataFrame:
    return pd.read_csv(path, comment="#")


def read_header(path: Path) -> dict[str, str]:
    """Devuelve las claves de la cabecera '# clave: valor'."""
    out: dict[str, str] = {}
    with Path(path).open(encoding="utf-8") as fh:
        for line in fh:
            if not line.startswith("#"):
                break
            body = line[1:].strip()
            if ":" in body:
                k, v = body.split(":", 1)
                out[k.strip()] = v.strip()
            elif body.startswith("abcapp "):
                out["version"] = body.split(" ", 1)[1]
    return out


def write_values(values: Iterable[float], path: Path, config_hash: str, seed: int, extra: dict[str, Any] | None = None) -> Path:
    """Volcado de dataset: un real por línea, texto."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    body = "\n".join(repr(float(v)) for v in values)
    path.write_text("\n".join(header_lines(config_hash, seed, extra)) + "\n" + body + "\n", encoding="utf-8")
    return path


def read_values(path: Path) -> np.ndarray:
    vals = [
        float(line)
        for line in Path(path).read_text(encoding="utf-8").splitlines()
        if line.strip() and not line.startswith("#")
    ]
    return np.asarray(vals, dtype=float)


def _default(obj: Any) -> Any:
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"no serializable: {type(obj)!r}")


def write_json(data: Any, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(orjson.dumps(data, default=_default, option=orjson.OPT_INDENT_2 | orjson.OPT_SERIALIZE_NUMPY))
    return path


def read_json(path: Path) -> Any:
    return orjson.loads(Path(path).read_bytes())
