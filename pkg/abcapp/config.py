# -*- coding: utf-8 -*-
"""
Configuración de ejecuciones.

Formato: texto plano clave=valor con secciones como prefijos con punto
(``kernel.family=uniform``), leído con python-dotenv. Las listas van separadas
por comas. Un ``.env`` local puede fijar ABC_OUTPUT_DIR, ABC_THREADS y
ABC_LOG_LEVEL; los flags de la CLI mandan sobre ambos.
"""
from __future__ import annotations

import hashlib
import io
import os
from pathlib import Path
from typing import Annotated, Any, Literal

from dotenv import dotenv_values, load_dotenv
from pydantic import BaseModel, BeforeValidator, ConfigDict, Field, ValidationError

from abcapp.errors import ConfigError

load_dotenv()


def _split_csv(value: Any) -> Any:
    if isinstance(value, str):
        return [s.strip() for s in value.split(",") if s.strip()]
    return value


def _empty_to_none(value: Any) -> Any:
    if isinstance(value, str) and not value.strip():
        return None
    return value


FloatList = Annotated[list[float], BeforeValidator(_split_csv)]
IntList = Annotated[list[int], BeforeValidator(_split_csv)]
StrList = Annotated[list[str], BeforeValidator(_split_csv)]
OptPositive = Annotated[Annotated[float, Field(gt=0)] | None, BeforeValidator(_empty_to_none)]
Positive = Annotated[float, Field(gt=0)]
Proportion = Annotated[float, Field(gt=0, le=1)]
Count = Annotated[int, Field(ge=1)]

DEFAULT_GK_TRUTH = [3.0, 1.0, 2.0, 0.5]
DEFAULT_GAUSSIAN_TRUTH = [0.0]


class _Block(BaseModel):
    model_config = ConfigDict(extra="forbid", validate_assignment=True)


class ModelBlock(_Block):
    name: Literal["gk", "gaussian"] = "gk"
    truth: FloatList = []
    n: Count = 500
    d: Count = 19
    prior_low: float = 0.0
    prior_high: float = 10.0
    prior_mean: float = 0.0
    prior_var: Positive = 1.0
    obs_noise_var: Positive = 1.0
    observed: str = ""

    @property
    def theta0(self) -> list[float]:
        if self.truth:
            return list(self.truth)
        return list(DEFAULT_GK_TRUTH if self.name == "gk" else DEFAULT_GAUSSIAN_TRUTH)


class KernelBlock(_Block):
    family: Literal["gaussian", "uniform", "epanechnikov"] = "uniform"
    scaling: Literal["identity", "standardized"] = "identity"
    epsilon: OptPositive = None
    q: Proportion = 0.01
    pilot: Annotated[int, Field(ge=2)] = 2000


class SamplerBlock(_Block):
    N: Count = 100_000
    mode: Literal["bernoulli", "threshold"] = "threshold"
    block_size: Count = 1000
    retain_rejected: bool = False


class ProposalBlock(_Block):
    base: Literal["prior", "gaussian"] = "prior"
    mean: FloatList = []
    sd: FloatList = []
    c: Positive = 1.0
    offset_sd: float = 0.5


class RegressionBlock(_Block):
    enabled: bool = True
    use_weights: bool = True
    ridge: Annotated[float, Field(ge=0)] = 1e-8
    kernel_weighted: bool = False


class StudyBlock(_Block):
    kind: Literal["figure1", "regime"] = "figure1"
    n_grid: IntList = [500, 2000]
    c_grid: FloatList = [1.0, 2.0]
    datasets: Count = 10
    inner_reps: Count = 5
    N: Count = 100_000
    q_max: Proportion = 0.5
    q_min: Proportion = 5e-4
    q_points: Annotated[int, Field(ge=2)] = 16
    targets: StrList = ["mu:0.08", "mu:0.05", "sigma:0.2", "sigma:0.1"]
    gold_N: Count = 2_000_000
    gold_q: Proportion = 1e-3
    # regime_sweep
    eps_c: Positive = 1.0
    eps_gamma: float = 0.4
    a_n_rate: float = 0.5
    sigma_ratio: Positive = 0.3
    regime_kernel: Literal["gaussian", "uniform", "epanechnikov"] = "uniform"

    @property
    def target_pairs(self) -> list[tuple[str, float]]:
        out: list[tuple[str, float]] = []
        for item in self.targets:
            metric, _, value = item.partition(":")
            metric = metric.strip().lower()
            if metric not in ("mu", "sigma") or not value:
                raise ConfigError(f"objetivo inválido '{item}' (usa mu:<valor> o sigma:<valor>)")
            out.append((metric, float(value)))
        return out


class VerifyBlock(_Block):
    tolerance_scale: Positive = 1.0
    full: bool = False


class RunConfig(_Block):
    model: ModelBlock = ModelBlock()
    kernel: KernelBlock = KernelBlock()
    sampler: SamplerBlock = SamplerBlock()
    proposal: ProposalBlock = ProposalBlock()
    regression: RegressionBlock = RegressionBlock()
    study: StudyBlock = StudyBlock()
    verify: VerifyBlock = VerifyBlock()
    seed: Annotated[int, Field(ge=0)] = 20180516
    output_dir: str = "./output"
    threads: int = 1


_SECTIONS = ("model", "kernel", "sampler", "proposal", "regression", "study", "verify")
# No cambian los resultados: fuera del hash.
RUNTIME_KEYS = ("output_dir", "threads")


def _fmt(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (list, tuple)):
        return ",".join(_fmt(v) for v in value)
    return str(value)


def flatten_config(cfg: RunConfig) -> dict[str, str]:
    flat: dict[str, str] = {}
    dumped = cfg.model_dump()
    for key, value in dumped.items():
        if key in _SECTIONS:
            for sub, v in value.items():
                flat[f"{key}.{sub}"] = _fmt(v)
        else:
            flat[key] = _fmt(value)
    return flat


def serialize_config(cfg: RunConfig) -> str:
    flat = flatten_config(cfg)
    return "".join(f"{k}={flat[k]}\n" for k in sorted(flat))


def config_hash(cfg: RunConfig) -> str:
    """SHA-256 (16 hex) de la serialización sin las claves de ejecución (output_dir, threads)."""
    flat = flatten_config(cfg)
    text = "".join(f"{k}={flat[k]}\n" for k in sorted(flat) if k not in RUNTIME_KEYS)
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


def _unflatten(flat: dict[str, str | None]) -> dict[str, Any]:
    nested: dict[str, Any] = {}
    for key, value in flat.items():
        section, dot, field = key.partition(".")
        if dot:
            if section not in _SECTIONS:
                raise ConfigError(f"sección desconocida en la clave '{key}'")
            nested.setdefault(section, {})[field] = value if value is not None else ""
        else:
            nested[key] = value if value is not None else ""
    return nested


def parse_config(text: str) -> RunConfig:
    flat = dotenv_values(stream=io.StringIO(text), interpolate=False)
    try:
        return RunConfig.model_validate(_unflatten(dict(flat)))
    except ValidationError as exc:
        raise ConfigError(f"configuración inválida: {exc}") from exc


def load_config(path: str | Path | None) -> RunConfig:
    if path is None:
        return apply_env_overrides(RunConfig())
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"no existe el fichero de configuración: {p}")
    return apply_env_overrides(parse_config(p.read_text(encoding="utf-8")))


def apply_env_overrides(cfg: RunConfig) -> RunConfig:
    update: dict[str, Any] = {}
    out = os.getenv("ABC_OUTPUT_DIR", "").strip()
    if out:
        update["output_dir"] = out
    threads = os.getenv("ABC_THREADS", "").strip()
    if threads:
        try:
            update["threads"] = int(threads)
        except ValueError as exc:
            raise ConfigError(f"ABC_THREADS no es entero: {threads!r}") from exc
    return cfg.model_copy(update=update) if update else cfg


def with_overrides(cfg: RunConfig, *, seed: int | None = None, out: str | None = None, threads: int | None = None) -> RunConfig:
    update: dict[str, Any] = {}
    if seed is not None:
        update["seed"] = int(seed)
    if out:
        update["output_dir"] = str(out)
    if threads is not None:
        update["threads"] = int(threads)
    return cfg.model_copy(update=update) if update else cfg
