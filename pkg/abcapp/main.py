from __future__ import annotations
# --- compat: permitir ejecutar este archivo como script ---
if __package__ is None or __package__ == "":
    import sys, pathlib
    sys.path.append(str(pathlib.Path(__file__).resolve().parents[1]))

import argparse
import logging
import os
import sys
from typing import Sequence

import numpy as np

from abcapp import __version__
from abcapp.config import RunConfig, config_hash, load_config, with_overrides
from abcapp.errors import ConfigError, InsufficientSampleError, VerificationFailure, ZeroAcceptanceError
from abcapp.handlers.report import cmd_report
from abcapp.handlers.run import build_proposal, cmd_run
from abcapp.handlers.simulate import cmd_simulate
from abcapp.handlers.study import cmd_study
from abcapp.handlers.verify import cmd_verify
from abcapp.services.models import GkParams, build_model, check_vector
from abcapp.utils.logging import setup_logging

log = logging.getLogger("abcapp")

# ===== Subcomandos =====
COMMANDS = [
    ("simulate", "Genera datasets y su manifest con semillas"),
    ("run", "Sampler ABC + ajuste por regresión sobre un dataset"),
    ("study", "Estudio de tasas de aceptación requeridas o barrido de regímenes (reanudable)"),
    ("verify", "Batería de aceptación sobre el oráculo gaussiano"),
    ("report", "Tabla larga para gnuplot/vega desde los resultados del estudio"),
]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="Fichero clave=valor (secciones con prefijo: kernel.family=uniform)")
    common.add_argument("--seed", type=int, help="Semilla maestra (u64)")
    common.add_argument("--out", help="Directorio de salida")
    common.add_argument("--threads", type=int, help="Workers para los pools (joblib)")

    parser = argparse.ArgumentParser(prog="abcapp", description="ABC por rechazo con ajuste por regresión y estudios asintóticos.")
    parser.add_argument("--version", action="version", version=f"abcapp {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in COMMANDS:
        p = sub.add_parser(name, parents=[common], help=help_text)
        if name == "verify":
            p.add_argument("--full", action="store_true", help="Incluye el criterio direccional g-and-k (lento)")
    return parser


def _validate(cfg: RunConfig) -> None:
    """Comprobaciones que necesitan el modelo construido; cualquier fallo es de configuración."""
    try:
        model = build_model(cfg.model)
        theta0 = check_vector(cfg.model.theta0, model.p, "model.truth")
        if cfg.model.name == "gk":
            GkParams.from_vector(theta0)
            smallest = min([cfg.model.n, *cfg.study.n_grid])
            if cfg.model.d > smallest:
                raise ValueError(f"model.d={cfg.model.d} mayor que el menor n ({smallest})")
        if not np.isfinite(model.prior.logpdf(theta0.reshape(1, -1))[0]):
            raise ValueError(f"model.truth={theta0.tolist()} fuera del soporte del prior")
        if cfg.study.q_min >= cfg.study.q_max:
            raise ValueError(f"study.q_min={cfg.study.q_min} debe ser < study.q_max={cfg.study.q_max}")
        _ = cfg.study.target_pairs
        build_proposal(cfg, model)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _config(args: argparse.Namespace) -> RunConfig:
    cfg = load_config(args.config)
    if args.seed is not None and args.seed < 0:
        raise ConfigError(f"--seed debe ser >= 0 ({args.seed})")
    if args.threads is not None and args.threads == 0:
        raise ConfigError("--threads no puede ser 0")
    cfg = with_overrides(cfg, seed=args.seed, out=args.out, threads=args.threads)
    _validate(cfg)
    return cfg


def dispatch(args: argparse.Namespace) -> int:
    cfg = _config(args)
    chash = config_hash(cfg)
    log.info("abcapp %s · %s · config_hash=%s seed=%d", __version__, args.command, chash, cfg.seed)
    if args.command == "simulate":
        cmd_simulate(cfg, chash)
    elif args.command == "run":
        cmd_run(cfg, chash)
    elif args.command == "study":
        cmd_study(cfg, chash)
    elif args.command == "verify":
        cmd_verify(cfg, chash, full=True if args.full else None)
    elif args.command == "report":
        cmd_report(cfg, chash)
    return 0


def main(argv: Sequence[str] | None = None) -> int:
    setup_logging(os.getenv("ABC_LOG_LEVEL", "INFO"))
    args = build_parser().parse_args(argv)
    try:
        return dispatch(args)
    except ConfigError as exc:
        log.error("Error de configuración: %s", exc)
        return exc.exit_code
    except (ZeroAcceptanceError, InsufficientSampleError) as exc:
        log.error("Fallo numérico: %s", exc)
        return exc.exit_code
    except VerificationFailure as exc:
        log.error("Verificación fallida: %s", exc)
        return exc.exit_code
    except KeyboardInterrupt:
        log.warning("Interrumpido por el usuario")
        return 130


if __name__ == "__main__":
    sys.exit(main())
