# -*- coding: utf-8 -*-
"""
Kernels de aceptación con máximo 1 en el origen y dependencia radial en la
norma ||v||_Lambda (v^T Lambda v), más la selección del bandwidth por
proporción aceptada.

Familias: gaussian  exp(-r2/2)
          uniform   1{r2 <= 1}
          epanechnikov  max(0, 1 - r2)
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from abcapp.services.models import ModelSpec, prior_sample
from abcapp.utils.seeds import rng_for

log = logging.getLogger(__name__)

KernelFamily = Literal["gaussian", "uniform", "epanechnikov"]
FAMILIES: tuple[str, ...] = ("gaussian", "uniform", "epanechnikov")


def kernel_profile(family: str, r2) -> np.ndarray:
    """Perfil K̄ evaluado en r2 = ||v||^2_Lambda."""
    r2 = np.asarray(r2, dtype=float)
    if family == "gaussian":
        return np.exp(-0.5 * r2)
    if family == "uniform":
        return (r2 <= 1.0).astype(float)
    if family == "epanechnikov":
        return np.maximum(0.0, 1.0 - r2)
    raise ValueError(f"familia de kernel desconocida: {family!r}")


@dataclass(frozen=True, eq=False)
class KernelSpec:
    family: KernelFamily
    lam: np.ndarray
    epsilon: float = 1.0
    _chol: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if self.family not in FAMILIES:
            raise ValueError(f"familia de kernel desconocida: {self.family!r}")
        lam = np.atleast_2d(np.asarray(self.lam, dtype=float))
        if lam.shape[0] != lam.shape[1]:
            raise ValueError(f"Lambda debe ser cuadrada (forma {lam.shape})")
        if not np.allclose(lam, lam.T, rtol=1e-12, atol=1e-14):
            raise ValueError("Lambda debe ser simétrica")
        try:
            chol = np.linalg.cholesky(lam)
        except np.linalg.LinAlgError as exc:
            raise ValueError("Lambda debe ser definida positiva") from exc
        if not (math.isfinite(self.epsilon) or self.epsilon == math.inf) or self.epsilon <= 0:
            raise ValueError(f"epsilon debe ser > 0 (epsilon={self.epsilon})")
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "_chol", chol)

    @classmethod
    def identity(cls, family: KernelFamily, d: int, epsilon: float = 1.0) -> "KernelSpec":
        return cls(family, np.eye(d), epsilon)

    @property
    def d(self) -> int:
        return int(self.lam.shape[0])

    def with_epsilon(self, epsilon: float) -> "KernelSpec":
        return KernelSpec(self.family, self.lam, float(epsilon))

    def norm_sq(self, v) -> np.ndarray:
        """||v||^2_Lambda por filas; v de forma (d,) o (m, d)."""
        arr = np.asarray(v, dtype=float)
        if arr.shape[-1] != self.d:
            raise ValueError(f"dimensión {arr.shape[-1]} != d={self.d}")
        # v^T L L^T v = ||L^T v||^2
        w = arr @ self._chol
        return np.sum(w * w, axis=-1)


def eval(kernel: KernelSpec, v) -> np.ndarray | float:  # noqa: A001
    """K(v) con v ya escalado por 1/epsilon. Valor en [0, 1]."""
    out = kernel_profile(kernel.family, kernel.norm_sq(v))
    return float(out) if np.ndim(out) == 0 else out


def distance(kernel: KernelSpec, s, s_obs) -> np.ndarray | float:
    """||s - s_obs||_Lambda sin escalar por epsilon (entrada del bandwidth por proporción)."""
    s = np.asarray(s, dtype=float)
    s_obs = np.asarray(s_obs, dtype=float).reshape(-1)
    if s_obs.size != kernel.d:
        raise ValueError(f"s_obs de dimensión {s_obs.size} != d={kernel.d}")
    out = np.sqrt(kernel.norm_sq(s - s_obs))
    return float(out) if np.ndim(out) == 0 else out


def scaled_distance(kernel: KernelSpec, s, s_obs) -> np.ndarray | float:
    """||eps^{-1}(s - s_obs)||_Lambda."""
    return distance(kernel, s, s_obs) / kernel.epsilon


def bandwidth_from_proportion(distances, q: float) -> float:
    """
    Devuelve el ceil(q*N)-ésimo menor valor de distances. Con kernel uniforme
    eso acepta (salvo empates) exactamente esa proporción.
    """
    d = np.asarray(distances, dtype=float).reshape(-1)
    if d.size == 0:
        raise ValueError("bandwidth_from_proportion: distancias vacías")
    if not 0.0 < q <= 1.0:
        raise ValueError(f"bandwidth_from_proportion: q debe estar en (0, 1] (q={q})")
    k = min(d.size, max(1, math.ceil(q * d.size - 1e-9)))
    return float(np.partition(d, k - 1)[k - 1])


def standardized_scaling(model: ModelSpec, n_pilot: int, seed: int) -> np.ndarray:
    """
    Lambda = diag(1/sd^2) con sd la desviación típica predictiva a priori de
    cada coordenada del resumen, estimada con n_pilot simulaciones.
    """
    thetas = prior_sample(model, n_pilot, seed)
    ok = model.valid(thetas)
    summaries = model.simulate_summaries(thetas[ok], rng_for(seed, 1))
    sd = np.std(summaries, axis=0, ddof=1)
    sd = np.where(sd > 0, sd, 1.0)
    log.info("[kernel] escalado estandarizado con %d pilotos (sd min=%.3g, max=%.3g)", int(ok.sum()), sd.min(), sd.max())
    return np.diag(1.0 / sd**2)


def build_kernel(block, model: ModelSpec, seed: int, epsilon: float = 1.0) -> KernelSpec:
    """KernelSpec desde kernel.family / kernel.scaling de la config."""
    if block.scaling == "standardized":
        lam = standardized_scaling(model, int(block.pilot), seed)
    else:
        lam = np.eye(model.d)
    return KernelSpec(block.family, lam, epsilon)
