# src/core/config.py
from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Optional

from src.core.errors import ParamodeError


class ConfigError(ParamodeError):
    """Parámetro de ejecución inválido."""
    pass


# ---------------------------------------------------------------------
# Configuración de una corrida
#  - resolution: paso h del raster; None = 1e-3 de la diagonal del bbox
#  - rtol / atol: tolerancias del integrador RK 5(4)
#  - blowup_bound: cota B a partir de la cual una rebanada "explota"
#  - min_step: paso mínimo; el margen de frontera es 10 * min_step
#  - nt / nx: tamaño de la malla de muestreo (t, x)
#  - seed: semilla para los fixtures aleatorios
#  - quad_tol: tolerancia de las cuadraturas adaptativas
#  - zero_tol: umbral relativo (Hadamard) para declarar W = 0
# ---------------------------------------------------------------------
@dataclass(frozen=True)
class RunConfig:
    resolution: Optional[float] = None
    rtol: float = 1e-9
    atol: float = 1e-12
    blowup_bound: float = 1e12
    min_step: float = 1e-10
    nt: int = 41
    nx: int = 41
    seed: int = 0
    quad_tol: float = 1e-10
    zero_tol: float = 1e-10
    output_dir: str = "output"

    @property
    def boundary_margin(self) -> float:
        return 10.0 * self.min_step

    def validate(self) -> "RunConfig":
        """
        Verifica que todos los parámetros numéricos sean positivos.

        :raises ConfigError: con el nombre del campo inválido.
        """
        for field in dataclasses.fields(self):
            value = getattr(self, field.name)
            if field.name in ("output_dir", "seed"):
                continue
            if value is None and field.name == "resolution":
                continue
            if not isinstance(value, (int, float)) or not value > 0:
                raise ConfigError(f"'{field.name}' debe ser positivo (recibido {value!r})")
        if self.seed < 0:
            raise ConfigError(f"'seed' no puede ser negativo (recibido {self.seed!r})")
        if self.nt < 1 or self.nx < 2:
            raise ConfigError("La malla necesita nt >= 1 y nx >= 2")
        return self

    def with_overrides(self, **overrides) -> "RunConfig":
        """Copia con los campos indicados reemplazados (se ignoran los None)."""
        clean = {k: v for k, v in overrides.items() if v is not None}
        return dataclasses.replace(self, **clean).validate()

    @classmethod
    def from_json(cls, data: dict) -> "RunConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known - {"schema"}
        if unknown:
            raise ConfigError(f"Claves de configuración desconocidas: {sorted(unknown)}")
        values = {k: v for k, v in data.items() if k in known}
        for key in ("nt", "nx", "seed"):
            if key in values:
                values[key] = int(values[key])
        return cls(**values).validate()

    def to_json(self) -> dict:
        return dataclasses.asdict(self)
