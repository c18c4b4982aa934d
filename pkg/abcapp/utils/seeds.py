# -*- coding: utf-8 -*-
"""Derivación determinista de semillas (hash(semilla, claves...)) con SeedSequence."""
from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1


def derive_seed(base: int, *keys: int) -> int:
    """Semilla de 64 bits derivada de (base, *keys). Independiente del orden de ejecución."""
    entropy = [int(base) & _MASK64, *(int(k) & _MASK64 for k in keys)]
    lo, hi = np.random.SeedSequence(entropy).generate_state(2, dtype=np.uint32)
    return (int(hi) << 32) | int(lo)


def rng_for(base: int, *keys: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(base) & _MASK64, *(int(k) & _MASK64 for k in keys)]))
