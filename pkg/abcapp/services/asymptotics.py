# -*- coding: utf-8 -*-
"""
Banco de pruebas de los resultados asintóticos a escala de escritorio.

- RegimeSpec / regime_sweep: p_acc frente a n con eps_n = c n^{-gamma}.
- re_metrics, gold_standard, required_acceptance_rate, figure1_study:
  tasa de aceptación necesaria para una precisión dada (con y sin ajuste).
- LimitReference / shape_test: forma límite del posterior (KS).
- posterior_mean_study / mean_variability: dispersión de la media posterior
  entre datasets frente a la inversa de la información.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal, Sequence

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from scipy import integrate, stats
from tqdm import tqdm

from abcapp.errors import InsufficientSampleError
from abcapp.services.gold_cache import GoldCache, dataset_hash
from abcapp.services.kernels import KernelSpec, bandwidth_from_proportion, kernel_profile, standardized_scaling
from abcapp.services.models import (
    BoxPrior,
    GaussianOracle,
    GaussianOracleModel,
    GkModel,
    GkParams,
    ModelSpec,
    check_vector,
    gk_sample,
    true_posterior,
)
from abcapp.services.regression import adjust, fit_linear
from abcapp.services.samplers import (
    ProposalSpec,
    SimulationPool,
    accept_pool,
    estimate_pacc,
    make_proposal,
    posterior_estimates,
    run_nearest,
    run_rejection,
    simulate_pool,
)
from abcapp.utils.outputs import read_csv, read_header, write_csv
from abcapp.utils.seeds import derive_seed

log = logging.getLogger(__name__)

METHODS = ("raw", "adjusted")
METRIC_COLUMN = {"mu": "RE_mu", "sigma": "RE_sigma"}
STUDY_COLUMNS = ["n", "c", "dataset", "method", "target_metric", "target_value", "required_q", "p_acc", "RE_mu", "RE_sigma", "seed"]
GOLD_N = 2_000_000
GOLD_Q = 1e-3
MIN_SHAPE_DRAWS = 500


def default_q_grid(q_max: float = 0.5, q_min: float = 5e-4, points: int = 16) -> np.ndarray:
    """Rejilla log-espaciada y descendente de proporciones aceptadas."""
    return np.geomspace(q_max, q_min, int(points))


# ---------------------------
# Regímenes
# ---------------------------
@dataclass(frozen=True)
class RegimeSpec:
    """a_n = n^r, eps_n = c n^{-gamma}; c_eps = lim a_n eps_n."""
    a_n_rate: float = 0.5
    eps_c: float = 1.0
    eps_gamma: float = 0.4

    def epsilon(self, n: int) -> float:
        return self.eps_c * float(n) ** (-self.eps_gamma)

    def a_n(self, n: int) -> float:
        return float(n) ** self.a_n_rate

    @property
    def c_eps_class(self) -> Literal["zero", "finite", "infinite"]:
        if math.isclose(self.eps_gamma, self.a_n_rate, rel_tol=0.0, abs_tol=1e-12):
            return "finite"
        return "zero" if self.eps_gamma > self.a_n_rate else "infinite"


@dataclass(frozen=True, eq=False)
class StudyResult:
    records: pd.DataFrame
    config_hash: str = ""
    seed: int = 0
    group_cols: tuple[str, ...] = ()
    value_cols: tuple[str, ...] = ()

    def summary(self) -> pd.DataFrame:
        return summarize_records(self.records, list(self.group_cols), list(self.value_cols))


def summarize_records(records: pd.DataFrame, group_cols: list[str], value_cols: list[str]) -> pd.DataFrame:
    """
    Mediana y cuantiles 2.5% / 97.5% (interpolación lineal) sobre datasets.
    Los NaN (objetivo no alcanzado) se excluyen; <col>_n cuenta los válidos.
    """
    grouped = records.groupby(group_cols, sort=True, dropna=False)[value_cols]
    med = grouped.median().add_suffix("_median")
    lo = grouped.quantile(0.025).add_suffix("_q025")
    hi = grouped.quantile(0.975).add_suffix("_q975")
    achieved = grouped.count().add_suffix("_n")
    count = grouped.size().rename("datasets")
    return pd.concat([med, lo, hi, achieved, count], axis=1).reset_index()


# ---------------------------
# Métricas y referencias
# ---------------------------
def re_metrics(est_mean, est_sd, ref_mean, ref_sd) -> tuple[float, float]:
    """Errores relativos absolutos medios sobre las p coordenadas: (RE_mu, RE_sigma)."""
    em, es = np.asarray(est_mean, float).reshape(-1), np.asarray(est_sd, float).reshape(-1)
    rm, rs = np.asarray(ref_mean, float).reshape(-1), np.asarray(ref_sd, float).reshape(-1)
    if not (em.size == es.size == rm.size == rs.size):
        raise ValueError("re_metrics: dimensiones distintas")
    if np.any(rm == 0) or np.any(rs == 0):
        raise ValueError("re_metrics: referencia con componentes nulas")
    re_mu = float(np.mean(np.abs(em - rm) / np.abs(rm)))
    re_sigma = float(np.mean(np.abs(es - rs) / np.abs(rs)))
    return re_mu, re_sigma


@dataclass(frozen=True, eq=False)
class GoldStandard:
    mean: np.ndarray
    sd: np.ndarray
    cov: np.ndarray
    n_accepted: int
    epsilon: float
    cached: bool = False


def gold_standard(
    model: ModelSpec,
    dataset,
    seed: int,
    *,
    N: int = GOLD_N,
    q: float = GOLD_Q,
    cache: GoldCache | None = None,
    block_size: int = 1000,
    n_jobs: int = 1,
) -> GoldStandard:
    """
    Referencia de alto coste: ABC por umbral con propuesta prior, N draws,
    proporción aceptada q, ajustado por regresión. Cacheado por hash del dataset.
    """
    key = dataset_hash(dataset, model.name, model.n, model.d, N, q, seed, block_size)
    if cache is not None:
        hit = cache.get(key)
        if hit is not None:
            log.info("[gold] caché: %s…", key[:12])
            cov = np.atleast_2d(np.asarray(hit["cov"], dtype=float))
            return GoldStandard(
                np.asarray(hit["mean"], float), np.asarray(hit["sd"], float), cov,
                int(hit["n_accepted"]), float(hit["epsilon"]), cached=True,
            )

    s_obs = model.summarize(dataset)
    base = KernelSpec.identity("uniform", model.d)
    run = run_nearest(model, ProposalSpec.prior(), base, s_obs, int(N), float(q), seed, block_size=block_size, n_jobs=n_jobs)
    eps = run.epsilon
    fit = fit_linear(run, s_obs, use_weights=True)
    mean, cov, _ = posterior_estimates(adjust(run, fit, s_obs), use_weights=True)
    sd = np.sqrt(np.diag(cov))
    log.info("[gold] N=%d q=%.3g eps=%.4g aceptados=%d", N, q, eps, run.n_accepted)
    gold = GoldStandard(mean, sd, cov, run.n_accepted, eps)
    if cache is not None:
        cache.set(key, {"mean": mean, "sd": sd, "cov": cov, "n_accepted": run.n_accepted, "epsilon": eps})
    return gold


# ---------------------------
# Formas límite
# ---------------------------
LimitCase = Literal["prop1_i", "prop1_iii", "thm1"]


@dataclass(frozen=True, eq=False)
class LimitReference:
    """
    prop1_i / thm1: N(0, I^{-1}) (marginal por coordenada).
    prop1_iii: psi(t) ∝ K{Ds t}, sólo p = 1, normalizada por cuadratura.
    """
    case: LimitCase
    inv_information: np.ndarray | None = None
    kernel_family: str = "uniform"
    ds: float = 1.0
    lam: float = 1.0
    _grid: np.ndarray | None = field(default=None, repr=False)
    _cdf_grid: np.ndarray | None = field(default=None, repr=False)
    _norm: float = field(default=1.0, repr=False)

    def __post_init__(self) -> None:
        if self.case in ("prop1_i", "thm1"):
            inv = np.atleast_2d(np.asarray(self.inv_information, dtype=float))
            object.__setattr__(self, "inv_information", inv)
            return
        if self.case != "prop1_iii":
            raise ValueError(f"caso límite desconocido: {self.case!r}")
        scale = abs(self.ds) * math.sqrt(self.lam)
        half = (1.0 if self.kernel_family != "gaussian" else 12.0) / scale
        raw_pdf = lambda t: float(kernel_profile(self.kernel_family, self.lam * (self.ds * t) ** 2))  # noqa: E731
        norm, _ = integrate.quad(raw_pdf, -half, half, limit=200)
        grid = np.linspace(-half, half, 20001)
        dens = kernel_profile(self.kernel_family, self.lam * (self.ds * grid) ** 2)
        cdf = integrate.cumulative_trapezoid(dens, grid, initial=0.0)
        object.__setattr__(self, "_norm", norm)
        object.__setattr__(self, "_grid", grid)
        object.__setattr__(self, "_cdf_grid", cdf / cdf[-1])

    @property
    def p(self) -> int:
        return 1 if self.case == "prop1_iii" else int(self.inv_information.shape[0])

    def pdf(self, t, coord: int = 0):
        t = np.asarray(t, dtype=float)
        if self.case == "prop1_iii":
            return kernel_profile(self.kernel_family, self.lam * (self.ds * t) ** 2) / self._norm
        return stats.norm.pdf(t, scale=math.sqrt(self.inv_information[coord, coord]))

    def cdf(self, t, coord: int = 0):
        t = np.asarray(t, dtype=float)
        if self.case == "prop1_iii":
            return np.interp(t, self._grid, self._cdf_grid, left=0.0, right=1.0)
        return stats.norm.cdf(t, scale=math.sqrt(self.inv_information[coord, coord]))

    def total_mass(self, coord: int = 0) -> float:
        if self.case == "prop1_iii":
            half = float(self._grid[-1])
            val, _ = integrate.quad(lambda x: float(self.pdf(x)), -half, half, limit=200)
        else:
            val, _ = integrate.quad(lambda x: float(self.pdf(x, coord)), -np.inf, np.inf)
        return float(val)


def oracle_limit_reference(case: LimitCase, oracle: GaussianOracle, kernel: KernelSpec | None = None) -> LimitReference:
    if case == "prop1_iii":
        if kernel is None:
            raise ValueError("el caso prop1_iii necesita el kernel")
        return LimitReference(case, kernel_family=kernel.family, ds=oracle.Ds, lam=float(kernel.lam[0, 0]))
    return LimitReference(case, inv_information=np.array([[1.0 / oracle.information]]))


def _weighted_ks(x: np.ndarray, w: np.ndarray, cdf) -> float:
    order = np.argsort(x)
    xs, ws = x[order], w[order] / np.sum(w)
    upper = np.cumsum(ws)
    lower = upper - ws
    f = cdf(xs)
    return float(max(np.max(np.abs(upper - f)), np.max(np.abs(f - lower))))


def shape_test(run, reference: LimitReference, scale: float, *, weights=None) -> np.ndarray:
    """
    Centra los draws en su media estimada, multiplica por `scale` (a_n o 1/eps_n)
    y devuelve la distancia KS a la CDF de referencia, coordenada a coordenada.
    """
    if hasattr(run, "theta"):
        draws = np.asarray(run.theta, dtype=float)
        weights = run.weight if weights is None else weights
    else:
        draws = np.asarray(run, dtype=float)
    draws = draws.reshape(-1, 1) if draws.ndim == 1 else draws
    if draws.shape[0] < MIN_SHAPE_DRAWS:
        raise InsufficientSampleError(f"shape_test necesita >= {MIN_SHAPE_DRAWS} draws (hay {draws.shape[0]})")
    if reference.case == "prop1_iii" and draws.shape[1] != 1:
        raise ValueError("prop1_iii sólo está implementado para p = 1")

    w = None if weights is None else np.asarray(weights, dtype=float)
    uniform_w = w is None or np.allclose(w, w[0])
    center = draws.mean(axis=0) if uniform_w else np.average(draws, axis=0, weights=w)
    z = (draws - center) * float(scale)
    out = np.empty(draws.shape[1])
    for j in range(draws.shape[1]):
        cdf = lambda t, j=j: reference.cdf(t, j)  # noqa: E731
        if uniform_w:
            out[j] = stats.kstest(z[:, j], cdf).statistic
        else:
            out[j] = _weighted_ks(z[:, j], w, cdf)
    return out


# ---------------------------
# Tasa de aceptación requerida
# ---------------------------
def _estimates_at(pool: SimulationPool, kernel: KernelSpec, s_obs, use_weights: bool):
    run = accept_pool(pool, kernel, s_obs, "threshold")
    out = {"raw": None, "adjusted": None}
    try:
        mean, cov, _ = posterior_estimates(run, use_weights)
        out["raw"] = (mean, np.sqrt(np.diag(cov)))
        fit = fit_linear(run, s_obs, use_weights)
        amean, acov, _ = posterior_estimates(adjust(run, fit, s_obs), use_weights)
        out["adjusted"] = (amean, np.sqrt(np.diag(acov)))
    except InsufficientSampleError:
        pass
    return run, out


def evaluate_q_grid(
    model: ModelSpec,
    s_obs,
    proposal: ProposalSpec,
    ref_mean,
    ref_sd,
    q_grid: Sequence[float],
    N: int,
    seed: int,
    *,
    inner_reps: int = 5,
    lam: np.ndarray | None = None,
    use_weights: bool = True,
    block_size: int = 1000,
    n_jobs: int = 1,
) -> pd.DataFrame:
    """
    RE_mu / RE_sigma crudos y ajustados para cada q de la rejilla. Cada réplica
    interna simula un pool y lo re-umbraliza para todos los q.
    Columnas: rep, q, method, epsilon, n_accepted, p_acc, RE_mu, RE_sigma.
    """
    q_arr = np.asarray(q_grid, dtype=float)
    if np.any(np.diff(q_arr) >= 0):
        raise ValueError("q_grid debe estar ordenada de forma descendente")
    base = KernelSpec("uniform", np.eye(model.d) if lam is None else lam)
    rows = []
    for rep in range(int(inner_reps)):
        pool = simulate_pool(model, proposal, int(N), derive_seed(seed, rep), block_size=block_size, n_jobs=n_jobs)
        dist = pool.distances(base, s_obs)
        for q in q_arr:
            eps = bandwidth_from_proportion(dist, float(q))
            run, est = _estimates_at(pool, base.with_epsilon(eps), s_obs, use_weights)
            for method in METHODS:
                if est[method] is None:
                    re_mu = re_sigma = math.inf
                else:
                    re_mu, re_sigma = re_metrics(est[method][0], est[method][1], ref_mean, ref_sd)
                rows.append({
                    "rep": rep, "q": float(q), "method": method, "epsilon": eps,
                    "n_accepted": run.n_accepted, "p_acc": run.p_acc_hat,
                    "RE_mu": re_mu, "RE_sigma": re_sigma,
                })
    return pd.DataFrame(rows)


def pick_required_q(table: pd.DataFrame, method: str, metric: str, value: float) -> float | None:
    """Mayor q cuya RE (mediana sobre réplicas internas) cumple el objetivo; None si ninguna."""
    col = METRIC_COLUMN.get(metric, metric)
    med = table[table["method"] == method].groupby("q")[col].median()
    ok = med[med <= value]
    if ok.empty:
        return None
    return float(ok.index.max())


def required_acceptance_rate(
    model: ModelSpec,
    dataset,
    method: Literal["raw", "adjusted"],
    target: tuple[str, float],
    q_grid: Sequence[float],
    N: int,
    proposal: ProposalSpec,
    seed: int,
    *,
    reference: tuple[np.ndarray, np.ndarray],
    inner_reps: int = 5,
    table: pd.DataFrame | None = None,
    **kwargs,
) -> float | None:
    """
    Proporción aceptada necesaria para alcanzar target=(métrica, valor).
    `table` permite reutilizar un evaluate_q_grid ya calculado.
    """
    if method not in METHODS:
        raise ValueError(f"método desconocido: {method!r}")
    if table is None:
        s_obs = model.summarize(dataset)
        table = evaluate_q_grid(
            model, s_obs, proposal, reference[0], reference[1], q_grid, N, seed, inner_reps=inner_reps, **kwargs
        )
    return pick_required_q(table, method, target[0], target[1])


def _row_at(table: pd.DataFrame, method: str, q: float | None) -> dict[str, float]:
    if q is None:
        return {"p_acc": math.nan, "RE_mu": math.nan, "RE_sigma": math.nan}
    sub = table[(table["method"] == method) & np.isclose(table["q"], q)]
    return {"p_acc": float(sub["p_acc"].median()), "RE_mu": float(sub["RE_mu"].median()), "RE_sigma": float(sub["RE_sigma"].median())}


# ---------------------------
# Barrido de regímenes
# ---------------------------
def regime_sweep(
    model: ModelSpec,
    regime: RegimeSpec,
    n_grid: Sequence[int],
    N: int,
    seed: int,
    *,
    theta0: Sequence[float] | None = None,
    sigma_ratio: float = 0.3,
    kernel_family: str = "uniform",
    mode: str = "bernoulli",
    block_size: int = 1000,
    n_jobs: int = 1,
    gold_N: int = GOLD_N,
    gold_q: float = GOLD_Q,
    config_hash: str = "",
) -> StudyResult:
    """
    Para cada n: eps_n de la regla, propuesta normal centrada en la media gold
    con sigma_n = sigma_ratio * eps_n, sampler bernoulli, p_acc y resúmenes.
    En el oráculo gaussiano la media gold es la del posterior conjugado exacto.
    """
    grid = [int(v) for v in n_grid]
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError(f"n_grid debe ser creciente: {grid}")
    theta0 = np.asarray(theta0 if theta0 is not None else np.zeros(model.p), dtype=float)
    rows = []
    for i, n in enumerate(grid):
        m = _with_n(model, n)
        dataset = m.simulate(theta0, derive_seed(seed, 0, i))
        s_obs = m.summarize(dataset)
        eps = regime.epsilon(n)
        if isinstance(m, GaussianOracleModel):
            center, _ = true_posterior(m.oracle, float(s_obs[0]))
            center = np.array([center])
        else:
            center = gold_standard(m, dataset, derive_seed(seed, 2, i), N=gold_N, q=gold_q, n_jobs=n_jobs).mean
        proposal = ProposalSpec("gaussian", mu=center, sigma=sigma_ratio * eps)
        kernel = KernelSpec.identity(kernel_family, m.d, eps)
        run_seed = derive_seed(seed, 1, i)
        run = run_rejection(m, kernel, proposal, s_obs, int(N), mode, run_seed, block_size=block_size, n_jobs=n_jobs)
        p, se = estimate_pacc(run)
        row = {
            "n": n, "epsilon": eps, "a_n": regime.a_n(n), "a_n_eps": regime.a_n(n) * eps,
            "c_eps_class": regime.c_eps_class, "p_acc": p, "p_acc_se": se, "n_accepted": run.n_accepted,
            "seed": run_seed, "config_hash": config_hash,
        }
        if isinstance(m, GaussianOracleModel):
            row["p_acc_exact"] = oracle_pacc(m.oracle, float(s_obs[0]), float(center[0]), sigma_ratio * eps, eps, kernel_family)
        try:
            mean, cov, _ = posterior_estimates(run, True)
            row.update({f"mean_raw_{j + 1}": v for j, v in enumerate(mean)})
            row.update({f"sd_raw_{j + 1}": v for j, v in enumerate(np.sqrt(np.diag(cov)))})
            amean, acov, _ = posterior_estimates(adjust(run, fit_linear(run, s_obs, True), s_obs), True)
            row.update({f"mean_adj_{j + 1}": v for j, v in enumerate(amean)})
            row.update({f"sd_adj_{j + 1}": v for j, v in enumerate(np.sqrt(np.diag(acov)))})
        except InsufficientSampleError as exc:
            log.warning("[regime] n=%d sin resúmenes: %s", n, exc)
        log.info("[regime] n=%d eps=%.4g p_acc=%.4f ± %.4f (%s)", n, eps, p, se, regime.c_eps_class)
        rows.append(row)
    return StudyResult(pd.DataFrame(rows), config_hash=config_hash, seed=int(seed), group_cols=("n",), value_cols=("p_acc",))


def oracle_pacc(oracle: GaussianOracle, s_obs: float, center: float, sigma: float, epsilon: float, kernel_family: str) -> float:
    """
    p_acc exacto del oráculo con propuesta N(center, sigma^2): s - s_obs es
    N(center - s_obs, sigma^2 + obs_noise_var/n). Cerrado para los kernels
    uniforme y gaussiano; NaN para el resto.
    """
    m = float(center) - float(s_obs)
    v = float(sigma) ** 2 + oracle.summary_var
    if kernel_family == "uniform":
        sd = math.sqrt(v)
        return float(stats.norm.cdf((epsilon - m) / sd) - stats.norm.cdf((-epsilon - m) / sd))
    if kernel_family == "gaussian":
        t = epsilon**2 + v
        return float(epsilon / math.sqrt(t) * math.exp(-m * m / (2.0 * t)))
    return math.nan


def posterior_mean_study(
    model: ModelSpec,
    theta0: Sequence[float],
    epsilon: float,
    N: int,
    datasets: int,
    seed: int,
    *,
    kernel_family: str = "gaussian",
    mode: str = "bernoulli",
    proposal: ProposalSpec | None = None,
    block_size: int = 1000,
    n_jobs: int = 1,
    config_hash: str = "",
) -> StudyResult:
    """
    Variabilidad de la media posterior ABC entre datasets: para cada dataset
    replicado con theta0 guarda z = a_n (media - theta0), cruda y ajustada.
    Con d = p la varianza de z tiende a I(theta0)^{-1}.
    Columnas: dataset, s_obs_1.., n_accepted, z_raw_1.., z_adj_1..
    """
    theta0 = check_vector(theta0, model.p, "theta0")
    proposal = proposal or ProposalSpec.prior()
    kernel = KernelSpec.identity(kernel_family, model.d, epsilon)
    a_n = math.sqrt(model.n)
    rows = []
    for j in tqdm(range(int(datasets)), desc="datasets", unit="dataset", leave=False):
        s_obs = model.summarize(model.simulate(theta0, derive_seed(seed, 0, j)))
        run = run_rejection(model, kernel, proposal, s_obs, int(N), mode, derive_seed(seed, 1, j), block_size=block_size, n_jobs=n_jobs)
        row = {"dataset": j, **{f"s_obs_{k + 1}": v for k, v in enumerate(s_obs)}, "n_accepted": run.n_accepted}
        try:
            mean, _, _ = posterior_estimates(run, True)
            amean, _, _ = posterior_estimates(adjust(run, fit_linear(run, s_obs, True), s_obs), True)
        except InsufficientSampleError as exc:
            log.warning("[media] dataset %d sin estimación: %s", j, exc)
            mean = amean = np.full(model.p, np.nan)
        row.update({f"z_raw_{k + 1}": a_n * (v - t) for k, (v, t) in enumerate(zip(mean, theta0))})
        row.update({f"z_adj_{k + 1}": a_n * (v - t) for k, (v, t) in enumerate(zip(amean, theta0))})
        rows.append(row)
    value_cols = tuple(f"z_{m}_{k + 1}" for m in ("raw", "adj") for k in range(model.p))
    return StudyResult(pd.DataFrame(rows), config_hash=config_hash, seed=int(seed), value_cols=value_cols)


def mean_variability(records: pd.DataFrame, inv_information, method: str = "adj") -> pd.DataFrame:
    """Por coordenada: media y varianza de z frente a I^{-1}, con sus errores estándar."""
    inv = np.atleast_2d(np.asarray(inv_information, dtype=float))
    rows = []
    for k in range(inv.shape[0]):
        z = records[f"z_{method}_{k + 1}"].dropna().to_numpy()
        m = z.size
        var = float(np.var(z, ddof=1))
        rows.append({
            "coord": k + 1, "datasets": m, "mean": float(np.mean(z)), "mean_se": math.sqrt(var / m),
            "var": var, "var_se": var * math.sqrt(2.0 / (m - 1)), "var_limit": float(inv[k, k]),
        })
    return pd.DataFrame(rows)


def _with_n(model: ModelSpec, n: int) -> ModelSpec:
    if isinstance(model, GaussianOracleModel):
        return model.with_n(n)
    if isinstance(model, GkModel):
        return GkModel(n=int(n), d=model.d, prior=model.prior)
    raise ValueError(f"modelo sin variante por n: {model.name}")


# ---------------------------
# Estudio de tasas de aceptación requeridas (g-and-k)
# ---------------------------
@dataclass(frozen=True)
class _Cell:
    index: int
    n: int
    c_index: int
    c: float
    dataset: int

    @property
    def filename(self) -> str:
        return f"cell_n{self.n}_c{self.c_index}_d{self.dataset}.csv"


def _figure1_dataset(cfg, n: int, j: int) -> np.ndarray:
    truth = GkParams.from_vector(cfg.model.theta0)
    return gk_sample(n, truth, derive_seed(cfg.seed, 10, n, j))


def _figure1_model(cfg, n: int) -> GkModel:
    return GkModel(n=int(n), d=int(cfg.model.d), prior=BoxPrior.cube(cfg.model.prior_low, cfg.model.prior_high, 4))


def _figure1_gold(cfg, n: int, j: int, cache_path: Path) -> GoldStandard:
    model = _figure1_model(cfg, n)
    with GoldCache(cache_path) as cache:
        return gold_standard(
            model, _figure1_dataset(cfg, n, j), derive_seed(cfg.seed, 11, n, j),
            N=int(cfg.study.gold_N), q=float(cfg.study.gold_q), cache=cache, block_size=int(cfg.sampler.block_size),
        )


def _figure1_cell(cfg, cell: _Cell, cache_path: Path, q_grid: np.ndarray) -> pd.DataFrame:
    model = _figure1_model(cfg, cell.n)
    dataset = _figure1_dataset(cfg, cell.n, cell.dataset)
    gold = _figure1_gold(cfg, cell.n, cell.dataset, cache_path)
    proposal = make_proposal(gold.mean, gold.cov, cell.c, offset=cfg.proposal.offset_sd * gold.sd)
    lam = None
    if cfg.kernel.scaling == "standardized":
        lam = standardized_scaling(model, int(cfg.kernel.pilot), derive_seed(cfg.seed, 13, cell.n))
    cell_seed = derive_seed(cfg.seed, 12, cell.n, cell.dataset, cell.c_index)
    table = evaluate_q_grid(
        model, model.summarize(dataset), proposal, gold.mean, gold.sd, q_grid, int(cfg.study.N), cell_seed,
        inner_reps=int(cfg.study.inner_reps), lam=lam, use_weights=cfg.regression.use_weights,
        block_size=int(cfg.sampler.block_size),
    )
    rows = []
    for method in METHODS:
        for metric, value in cfg.study.target_pairs:
            q = pick_required_q(table, method, metric, value)
            rows.append({
                "n": cell.n, "c": cell.c, "dataset": cell.dataset, "method": method,
                "target_metric": METRIC_COLUMN[metric], "target_value": value,
                "required_q": math.nan if q is None else q, **_row_at(table, method, q), "seed": cell_seed,
            })
    return pd.DataFrame(rows, columns=STUDY_COLUMNS)


def _cell_done(path: Path, config_hash: str) -> bool:
    """Una celda sólo se reutiliza si la escribió la misma configuración."""
    if not path.exists():
        return False
    if read_header(path).get("config_hash", "") == config_hash:
        return True
    log.info("[study] %s viene de otra configuración; se recalcula", path.name)
    return False


def figure1_study(cfg, out_dir: str | Path | None = None, *, config_hash: str = "", n_jobs: int | None = None) -> StudyResult:
    """
    Cruce completo {n} x {c} x {objetivos} x {raw, adjusted} sobre datasets
    replicados con (alpha, beta, gamma, kappa) = model.truth. Escribe un CSV por
    celda en cells/ (reanudable), study.csv y study_summary.csv.
    """
    out = Path(out_dir or cfg.output_dir) / "study"
    cells_dir = out / "cells"
    cells_dir.mkdir(parents=True, exist_ok=True)
    cache_path = out / "gold_cache.sqlite3"
    jobs = int(n_jobs if n_jobs is not None else cfg.threads)
    q_grid = default_q_grid(cfg.study.q_max, cfg.study.q_min, cfg.study.q_points)

    cells = [
        _Cell(idx, int(n), ci, float(c), j)
        for idx, (n, (ci, c), j) in enumerate(
            (n, ci_c, j) for n in cfg.study.n_grid for ci_c in enumerate(cfg.study.c_grid) for j in range(cfg.study.datasets)
        )
    ]
    pending = [cell for cell in cells if not _cell_done(cells_dir / cell.filename, config_hash)]
    if len(pending) < len(cells):
        log.info("[study] reanudando: %d/%d celdas ya completas", len(cells) - len(pending), len(cells))

    # Primero los gold (uno por n y dataset), luego las celdas.
    gold_keys = sorted({(cell.n, cell.dataset) for cell in pending})
    if gold_keys:
        done = Parallel(n_jobs=jobs, return_as="generator")(
            delayed(_figure1_gold)(cfg, n, j, cache_path) for n, j in gold_keys
        )
        for _ in tqdm(done, total=len(gold_keys), desc="gold", unit="dataset"):
            pass

    def _run_and_save(cell: _Cell) -> None:
        df = _figure1_cell(cfg, cell, cache_path, q_grid)
        write_csv(df, cells_dir / cell.filename, config_hash, cfg.seed, extra={"cell": cell.index})

    done = Parallel(n_jobs=jobs, return_as="generator")(delayed(_run_and_save)(cell) for cell in pending)
    for _ in tqdm(done, total=len(pending), desc="celdas", unit="celda"):
        pass

    records = pd.concat([read_csv(cells_dir / cell.filename) for cell in cells], ignore_index=True)
    records = records[STUDY_COLUMNS]
    result = StudyResult(
        records, config_hash=config_hash, seed=int(cfg.seed),
        group_cols=("n", "c", "method", "target_metric", "target_value"), value_cols=("required_q",),
    )
    write_csv(records, out / "study.csv", config_hash, cfg.seed)
    write_csv(result.summary(), out / "study_summary.csv", config_hash, cfg.seed)
    log.info("[study] %d filas -> %s", len(records), out / "study.csv")
    return result
