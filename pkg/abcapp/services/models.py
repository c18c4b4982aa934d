# -*- coding: utf-8 -*-
"""
Modelos simulables: g-and-k (benchmark) y el oráculo gaussiano conjugado.

Cada modelo declara (p, d, n, prior) y ofrece:
- simulate(theta, seed)      -> dataset (vector de longitud n)
- summarize(dataset)         -> estadístico resumen (vector de longitud d)
- simulate_summaries(thetas, rng) -> resúmenes de un lote de parámetros (m, d)

El camino por lotes es el que usan los samplers; simulate/summarize son la
versión pura y legible para un solo punto.
"""
from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import stats

from abcapp.utils.normal_quantile import norm_ppf
from abcapp.utils.outputs import read_values, write_values

GK_SKEW_FACTOR = 0.8
# Tamaño máximo (filas*n) de cada trozo de simulación g-and-k, para acotar memoria.
_GK_CHUNK_CELLS = 2_000_000


def check_vector(values: Sequence[float] | np.ndarray, length: int, what: str = "vector") -> np.ndarray:
    arr = np.asarray(values, dtype=float).reshape(-1)
    if arr.size != length:
        raise ValueError(f"{what}: longitud {arr.size}, se esperaba {length}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{what}: contiene valores no finitos")
    return arr


# ---------------------------
# g-and-k
# ---------------------------
@dataclass(frozen=True)
class GkParams:
    alpha: float
    beta: float
    gamma: float
    kappa: float

    def __post_init__(self) -> None:
        vals = (self.alpha, self.beta, self.gamma, self.kappa)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError(f"GkParams no finitos: {vals}")
        if self.beta <= 0:
            raise ValueError(f"GkParams: beta debe ser > 0 (beta={self.beta})")
        if self.kappa <= -0.5:
            raise ValueError(f"GkParams: kappa debe ser > -0.5 (kappa={self.kappa})")

    @classmethod
    def from_vector(cls, theta: Sequence[float] | np.ndarray) -> "GkParams":
        a, b, g, k = check_vector(theta, 4, "GkParams")
        return cls(float(a), float(b), float(g), float(k))

    def as_array(self) -> np.ndarray:
        return np.array([self.alpha, self.beta, self.gamma, self.kappa], dtype=float)


def gk_transform(z: np.ndarray, alpha, beta, gamma, kappa) -> np.ndarray:
    """
    F^{-1} expresada sobre z = z(x). El término (1-e^{-gz})/(1+e^{-gz}) se
    evalúa como tanh(gz/2): es la misma función y no desborda.
    """
    skew = 1.0 + GK_SKEW_FACTOR * np.tanh(0.5 * gamma * z)
    return alpha + beta * skew * np.power(1.0 + z * z, kappa) * z


def gk_quantile(x, params: GkParams):
    """Función cuantil g-and-k en x ∈ (0, 1). Escalar o array."""
    arr = np.asarray(x, dtype=float)
    if np.any(~np.isfinite(arr)) or np.any(arr <= 0.0) or np.any(arr >= 1.0):
        raise ValueError("gk_quantile: x debe estar en (0, 1)")
    z = norm_ppf(arr)
    out = gk_transform(np.asarray(z), params.alpha, params.beta, params.gamma, params.kappa)
    if np.ndim(x) == 0:
        return float(out)
    return out


def gk_sample(n: int, params: GkParams, seed: int) -> np.ndarray:
    """n draws i.i.d. transformando normales estándar; determinista dada la semilla."""
    if n < 1:
        raise ValueError(f"gk_sample: n debe ser >= 1 (n={n})")
    rng = np.random.default_rng(seed)
    z = rng.standard_normal(n)
    return gk_transform(z, params.alpha, params.beta, params.gamma, params.kappa)


def quantile_levels(d: int) -> np.ndarray:
    return np.arange(1, d + 1, dtype=float) / (d + 1)


def quantile_summaries(dataset, d: int) -> np.ndarray:
    """
    Cuantiles empíricos en k/(d+1), k=1..d, interpolación lineal entre
    estadísticos de orden (tipo 7). Con un array 2-D resume cada fila.
    """
    arr = np.asarray(dataset, dtype=float)
    if arr.size == 0 or arr.shape[-1] == 0:
        raise ValueError("quantile_summaries: dataset vacío")
    if d < 1:
        raise ValueError(f"quantile_summaries: d debe ser >= 1 (d={d})")
    if arr.shape[-1] < d:
        raise ValueError(f"quantile_summaries: {arr.shape[-1]} observaciones < d={d}")
    q = np.quantile(arr, quantile_levels(d), axis=-1, method="linear")
    return np.moveaxis(q, 0, -1)


# ---------------------------
# Priors
# ---------------------------
class Prior(ABC):
    p: int

    @abstractmethod
    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray: ...

    @abstractmethod
    def logpdf(self, thetas: np.ndarray) -> np.ndarray: ...

    def pdf(self, thetas: np.ndarray) -> np.ndarray:
        return np.exp(self.logpdf(thetas))


@dataclass(frozen=True, eq=False)
class BoxPrior(Prior):
    """Uniforme en la caja [low, high]^p (bordes incluidos)."""
    low: np.ndarray
    high: np.ndarray

    def __post_init__(self) -> None:
        low = np.asarray(self.low, dtype=float).reshape(-1)
        high = np.asarray(self.high, dtype=float).reshape(-1)
        if low.shape != high.shape or np.any(high <= low):
            raise ValueError("BoxPrior: se requiere low < high en cada coordenada")
        object.__setattr__(self, "low", low)
        object.__setattr__(self, "high", high)

    @classmethod
    def cube(cls, low: float, high: float, p: int) -> "BoxPrior":
        return cls(np.full(p, float(low)), np.full(p, float(high)))

    @property
    def p(self) -> int:  # type: ignore[override]
        return int(self.low.size)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.uniform(self.low, self.high, size=(size, self.p))

    def logpdf(self, thetas: np.ndarray) -> np.ndarray:
        t = np.atleast_2d(np.asarray(thetas, dtype=float))
        inside = np.all((t >= self.low) & (t <= self.high), axis=1)
        log_vol = float(np.sum(np.log(self.high - self.low)))
        return np.where(inside, -log_vol, -np.inf)


@dataclass(frozen=True)
class GaussianPrior(Prior):
    mean: float
    var: float

    def __post_init__(self) -> None:
        if not self.var > 0:
            raise ValueError(f"GaussianPrior: var debe ser > 0 (var={self.var})")

    @property
    def p(self) -> int:  # type: ignore[override]
        return 1

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return self.mean + math.sqrt(self.var) * rng.standard_normal((size, 1))

    def logpdf(self, thetas: np.ndarray) -> np.ndarray:
        t = np.asarray(thetas, dtype=float).reshape(-1)
        return stats.norm.logpdf(t, loc=self.mean, scale=math.sqrt(self.var))


# ---------------------------
# Modelos
# ---------------------------
class ModelSpec(ABC):
    name: str
    p: int
    d: int
    n: int
    prior: Prior

    @abstractmethod
    def simulate(self, theta, seed: int) -> np.ndarray: ...

    @abstractmethod
    def summarize(self, dataset) -> np.ndarray: ...

    @abstractmethod
    def simulate_summaries(self, thetas: np.ndarray, rng: np.random.Generator) -> np.ndarray: ...

    def valid(self, thetas: np.ndarray) -> np.ndarray:
        return np.all(np.isfinite(np.atleast_2d(thetas)), axis=1)

    def observed_summary(self, theta, seed: int) -> np.ndarray:
        return self.summarize(self.simulate(theta, seed))


@dataclass(frozen=True)
class GkModel(ModelSpec):
    n: int = 500
    d: int = 19
    prior: Prior = field(default_factory=lambda: BoxPrior.cube(0.0, 10.0, 4))
    name: str = "gk"
    p: int = 4

    def simulate(self, theta, seed: int) -> np.ndarray:
        return gk_sample(self.n, GkParams.from_vector(theta), seed)

    def summarize(self, dataset) -> np.ndarray:
        return quantile_summaries(dataset, self.d)

    def valid(self, thetas: np.ndarray) -> np.ndarray:
        t = np.atleast_2d(thetas)
        return np.all(np.isfinite(t), axis=1) & (t[:, 1] > 0.0) & (t[:, 3] > -0.5)

    def simulate_summaries(self, thetas: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        t = np.atleast_2d(np.asarray(thetas, dtype=float))
        m = t.shape[0]
        out = np.empty((m, self.d))
        rows = max(1, _GK_CHUNK_CELLS // self.n)
        for start in range(0, m, rows):
            blk = t[start:start + rows]
            z = rng.standard_normal((blk.shape[0], self.n))
            x = gk_transform(z, blk[:, [0]], blk[:, [1]], blk[:, [2]], blk[:, [3]])
            out[start:start + rows] = quantile_summaries(x, self.d)
        return out


@dataclass(frozen=True)
class GaussianOracle:
    """
    Modelo conjugado: theta ~ N(prior_mean, prior_var), Y_i | theta ~ N(theta, obs_noise_var),
    resumen = media muestral. Todas las cantidades de la teoría son cerradas:
    s(theta)=theta, A=obs_noise_var, a_n=sqrt(n), Ds=1.
    """
    prior_mean: float = 0.0
    prior_var: float = 1.0
    obs_noise_var: float = 1.0
    n: int = 100

    def __post_init__(self) -> None:
        if not self.prior_var > 0 or not self.obs_noise_var > 0:
            raise ValueError("GaussianOracle: prior_var y obs_noise_var deben ser > 0")
        if self.n < 1:
            raise ValueError(f"GaussianOracle: n debe ser >= 1 (n={self.n})")

    @property
    def a_n(self) -> float:
        return math.sqrt(self.n)

    @property
    def A(self) -> float:
        return self.obs_noise_var

    @property
    def Ds(self) -> float:
        return 1.0

    def s(self, theta: float) -> float:
        return float(theta)

    @property
    def information(self) -> float:
        """I(theta0) = Ds^T A^{-1} Ds."""
        return self.Ds * self.Ds / self.A

    @property
    def beta0(self) -> float:
        """beta_0 = I^{-1} Ds^T A^{-1}."""
        return (1.0 / self.information) * self.Ds / self.A

    @property
    def summary_var(self) -> float:
        return self.obs_noise_var / self.n


def gaussian_sample(oracle: GaussianOracle, theta: float, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return float(theta) + math.sqrt(oracle.obs_noise_var) * rng.standard_normal(oracle.n)


def gaussian_summary(dataset) -> float:
    arr = np.asarray(dataset, dtype=float)
    if arr.size == 0:
        raise ValueError("gaussian_summary: dataset vacío")
    return float(np.mean(arr))


def _normal_posterior(oracle: GaussianOracle, s_obs: float, lik_var: float) -> tuple[float, float]:
    precision = 1.0 / oracle.prior_var + 1.0 / lik_var
    var = 1.0 / precision
    mean = var * (oracle.prior_mean / oracle.prior_var + float(s_obs) / lik_var)
    return mean, var


def true_posterior(oracle: GaussianOracle, s_obs: float) -> tuple[float, float]:
    """Posterior conjugado exacto dado el resumen: precisión = 1/prior_var + n/obs_noise_var."""
    return _normal_posterior(oracle, s_obs, oracle.summary_var)


def abc_posterior_oracle(oracle: GaussianOracle, s_obs: float, epsilon: float) -> tuple[float, float]:
    """
    Posterior ABC exacto con kernel gaussiano: la verosimilitud ABC es la
    convolución N(s_obs; theta, obs_noise_var/n + eps^2).
    """
    if epsilon < 0:
        raise ValueError(f"abc_posterior_oracle: epsilon debe ser >= 0 (epsilon={epsilon})")
    return _normal_posterior(oracle, s_obs, oracle.summary_var + float(epsilon) ** 2)


@dataclass(frozen=True)
class GaussianOracleModel(ModelSpec):
    oracle: GaussianOracle = field(default_factory=GaussianOracle)
    name: str = "gaussian"
    p: int = 1
    d: int = 1

    @property
    def n(self) -> int:  # type: ignore[override]
        return self.oracle.n

    @property
    def prior(self) -> Prior:  # type: ignore[override]
        return GaussianPrior(self.oracle.prior_mean, self.oracle.prior_var)

    def with_n(self, n: int) -> "GaussianOracleModel":
        o = self.oracle
        return GaussianOracleModel(GaussianOracle(o.prior_mean, o.prior_var, o.obs_noise_var, int(n)))

    def simulate(self, theta, seed: int) -> np.ndarray:
        (t,) = check_vector(theta, 1, "theta")
        return gaussian_sample(self.oracle, float(t), seed)

    def summarize(self, dataset) -> np.ndarray:
        return np.array([gaussian_summary(dataset)])

    def simulate_summaries(self, thetas: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        # La media de n normales tiene ley exacta N(theta, obs_noise_var/n).
        t = np.asarray(thetas, dtype=float).reshape(-1, 1)
        return t + math.sqrt(self.oracle.summary_var) * rng.standard_normal(t.shape)


def prior_sample(model: ModelSpec, size: int, seed: int) -> np.ndarray:
    return model.prior.sample(np.random.default_rng(seed), size)


def prior_density(model: ModelSpec, theta) -> float | np.ndarray:
    t = np.asarray(theta, dtype=float)
    vals = model.prior.pdf(t.reshape(-1, model.p))
    return float(vals[0]) if t.ndim <= 1 and vals.size == 1 else vals


def build_model(block) -> ModelSpec:
    """Selecciona el modelo por nombre ('gk' | 'gaussian') desde el bloque model.* de la config."""
    if block.name == "gk":
        return GkModel(n=int(block.n), d=int(block.d), prior=BoxPrior.cube(block.prior_low, block.prior_high, 4))
    if block.name == "gaussian":
        return GaussianOracleModel(GaussianOracle(block.prior_mean, block.prior_var, block.obs_noise_var, int(block.n)))
    raise ValueError(f"modelo desconocido: {block.name!r}")


def write_dataset(dataset, path, config_hash: str, seed: int, extra: dict | None = None):
    """Un real por línea tras la cabecera común."""
    return write_values(np.asarray(dataset, dtype=float).reshape(-1), path, config_hash, seed, extra)


def read_dataset(path) -> np.ndarray:
    return read_values(path)
