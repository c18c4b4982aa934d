# -*- coding: utf-8 -*-
"""
Caché SQLite de referencias gold-standard (media, sd, covarianza por dataset).

Clave = hash del dataset + modelo + protocolo. Un payload ilegible o
incompleto se trata como fallo de caché: se recalcula y se sobrescribe. Un
fichero que no es una base SQLite se descarta y se reconstruye vacío.
"""
from __future__ import annotations

import hashlib
import logging
import sqlite3
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

import numpy as np
import orjson

log = logging.getLogger(__name__)

REQUIRED_KEYS = ("mean", "sd", "cov", "n_accepted", "epsilon")


def dataset_hash(dataset, *parts: Any) -> str:
    h = hashlib.sha256(np.ascontiguousarray(np.asarray(dataset, dtype=np.float64)).tobytes())
    for part in parts:
        h.update(b"|")
        h.update(str(part).encode("utf-8"))
    return h.hexdigest()


def _check_payload(data: Any) -> dict[str, Any]:
    if not isinstance(data, dict):
        raise ValueError("payload no es un objeto")
    missing = [k for k in REQUIRED_KEYS if k not in data]
    if missing:
        raise ValueError(f"faltan claves {missing}")
    mean = np.asarray(data["mean"], dtype=float).reshape(-1)
    sd = np.asarray(data["sd"], dtype=float).reshape(-1)
    cov = np.asarray(data["cov"], dtype=float)
    if sd.size != mean.size or cov.size != mean.size**2:
        raise ValueError("dimensiones incoherentes")
    if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(sd)) and np.all(np.isfinite(cov))):
        raise ValueError("valores no finitos")
    int(data["n_accepted"])
    float(data["epsilon"])
    return data


class GoldCache:
    def __init__(self, path: str | Path = "gold_cache.sqlite3"):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.conn = self._connect()

    def _connect(self) -> sqlite3.Connection:
        conn = sqlite3.connect(str(self.path), timeout=30)
        try:
            self._ensure_table(conn)
        except sqlite3.DatabaseError as exc:
            conn.close()
            log.warning("[gold] caché ilegible en %s (%s); se reconstruye", self.path, exc)
            self.path.unlink(missing_ok=True)
            conn = sqlite3.connect(str(self.path), timeout=30)
            self._ensure_table(conn)
        return conn

    @staticmethod
    def _ensure_table(conn: sqlite3.Connection) -> None:
        conn.execute(
            """
            CREATE TABLE IF NOT EXISTS gold (
                key        TEXT PRIMARY KEY,
                payload    TEXT,
                updated_at TEXT
            )
            """
        )
        conn.commit()

    def get(self, key: str) -> dict[str, Any] | None:
        try:
            row = self.conn.execute("SELECT payload FROM gold WHERE key = ?", (key,)).fetchone()
        except sqlite3.DatabaseError as exc:
            log.warning("[gold] lectura fallida para %s… (%s); se recalcula", key[:12], exc)
            return None
        if row is None:
            return None
        try:
            return _check_payload(orjson.loads(row[0]))
        except (orjson.JSONDecodeError, ValueError, TypeError) as exc:
            log.warning("[gold] entrada corrupta para %s… (%s); se recalcula", key[:12], exc)
            return None

    def set(self, key: str, payload: dict[str, Any]) -> None:
        try:
            self.conn.execute(
                "INSERT OR REPLACE INTO gold (key, payload, updated_at) VALUES (?, ?, ?)",
                (
                    key,
                    orjson.dumps(payload, option=orjson.OPT_SERIALIZE_NUMPY).decode("utf-8"),
                    datetime.now(timezone.utc).isoformat(timespec="seconds"),
                ),
            )
            self.conn.commit()
        except sqlite3.DatabaseError as exc:
            log.warning("[gold] no se pudo guardar %s… (%s)", key[:12], exc)

    def close(self) -> None:
        self.conn.close()

    def __enter__(self) -> "GoldCache":
        return self

    def __exit__(self, *exc) -> None:
        self.close()
