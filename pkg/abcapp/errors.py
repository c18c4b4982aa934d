# -*- coding: utf-8 -*-
"""Excepciones del dominio. Cada una lleva el código de salida que usa la CLI."""
from __future__ import annotations


class ConfigError(ValueError):
    exit_code = 2


class InsufficientSampleError(ValueError):
    """Muy pocas simulaciones aceptadas para el estimador pedido."""
    exit_code = 3


class ZeroAcceptanceError(RuntimeError):
    exit_code = 3

    def __init__(self, message: str, advice: str = "sube la proporción aceptada (kernel.q) o el bandwidth") -> None:
        super().__init__(f"{message}. Sugerencia: {advice}")
        self.advice = advice


class VerificationFailure(RuntimeError):
    exit_code = 4
