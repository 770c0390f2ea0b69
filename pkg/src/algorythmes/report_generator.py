# algorythmes/report_generator.py
import csv
import math
import os
from typing import Any, Dict, Optional

import numpy as np

from src.core.json_loader import SCHEMA, save_json
from src.core.operators import SampledField


def clean(value: Any) -> Any:
    """
    Convierte a tipos JSON: numpy a Python y los reales no finitos a None
    (los reportes se escriben con allow_nan=False).
    """
    if isinstance(value, dict):
        return {str(k): clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [clean(v) for v in value]
    if isinstance(value, np.ndarray):
        return clean(value.tolist())
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def fmt(value: float) -> str:
    return format(float(value), ".17g")


class ReportGenerator:
    """
    Reporte de una ejecución en formato JSON, en la carpeta indicada.

    Estructura del JSON resultante:
      {
        "schema": "paramode/1",
        "command": "...",
        "inputs": {...},
        "sections": {"classification": ..., "verdict": ..., ...},
        "checks": [{"name", "value", "tolerance", "pass"}, ...],
        "end_reason": "ok" | "failed"
      }
    Sin marcas de tiempo: dos ejecuciones con la misma semilla producen el mismo archivo.
    """

    def __init__(self, output_dir: str, command: str, inputs: Optional[Dict[str, Any]] = None):
        self.output_dir = output_dir
        os.makedirs(self.output_dir, exist_ok=True)

        self.data = {
            "schema": SCHEMA,
            "command": command,
            "inputs": dict(inputs or {}),
            "sections": {},
            "checks": [],
            "end_reason": None,
        }

    # ----------------------------------------------------------------------
    # Secciones (clasificación, veredictos, reportes de patologías)
    # ----------------------------------------------------------------------
    def log_section(self, name: str, content: Any):
        """Guarda un bloque con nombre; se admite cualquier objeto con to_dict()."""
        if hasattr(content, "to_dict"):
            content = content.to_dict()
        self.data["sections"][name] = content

    # ----------------------------------------------------------------------
    # Comprobaciones numéricas
    # ----------------------------------------------------------------------
    def log_check(self, name: str, value: float, tolerance: float, passed: Optional[bool] = None) -> bool:
        """
        Registra |value| <= tolerance (o el resultado dado en passed).
        Devuelve si la comprobación pasó.
        """
        value = float(value)
        if passed is None:
            passed = math.isfinite(value) and abs(value) <= tolerance
        self.data["checks"].append({
            "name": name,
            "value": value,
            "tolerance": float(tolerance),
            "pass": bool(passed),
        })
        return bool(passed)

    @property
    def passed(self) -> bool:
        return all(c["pass"] for c in self.data["checks"])

    # ----------------------------------------------------------------------
    # Finalizar el reporte y guardar a disco
    # ----------------------------------------------------------------------
    def finalize(self, filename: Optional[str] = None) -> str:
        """Cierra el reporte y devuelve la ruta del JSON generado."""
        self.data["end_reason"] = "ok" if self.passed else "failed"
        filename = filename or f"report_{self.data['command']}.json"
        filepath = os.path.join(self.output_dir, filename)
        save_json(clean(self.data), filepath)
        return filepath


# ----------------------------------------------------------------------
# CSV
# ----------------------------------------------------------------------
def write_grid_csv(field: SampledField, file_path: str, names=None) -> str:
    """
    Una fila por nodo: t, x y las componentes del estado, con .17g.
    Los nodos no alcanzados se escriben vacíos.
    """
    values = field.values.reshape(field.values.shape[:2] + (-1,))
    ncomp = values.shape[-1]
    names = list(names) if names is not None else [f"v{k}" for k in range(ncomp)]
    folder = os.path.dirname(file_path)
    if folder:
        os.makedirs(folder, exist_ok=True)
    with open(file_path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["t", "x"] + names)
        for i, t in enumerate(field.t):
            for j, x in enumerate(field.x[i]):
                if not math.isfinite(x):
                    continue
                row = [fmt(t), fmt(x)]
                row += [fmt(v) if math.isfinite(v) else "" for v in values[i, j]]
                writer.writerow(row)
    return file_path


def write_rows_csv(rows, header, stream) -> None:
    """Filas arbitrarias a un flujo abierto (stdout o archivo); reales con .17g."""
    writer = csv.writer(stream)
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])


# ----------------------------------------------------------------------
# JSON
# ----------------------------------------------------------------------
def write_grid_json(field: SampledField, file_path: str, names=None, extra: Optional[Dict[str, Any]] = None) -> str:
    """
    Misma malla que write_grid_csv en un JSON: t, x (nt x nx) y una grilla
    nt x nx por componente; los nodos no alcanzados quedan en null.
    """
    values = field.values.reshape(field.values.shape[:2] + (-1,))
    names = list(names) if names is not None else [f"v{k}" for k in range(values.shape[-1])]
    data = {
        "schema": SCHEMA,
        **(extra or {}),
        "t": field.t,
        "x": field.x,
        "grids": {name: values[..., k] for k, name in enumerate(names)},
    }
    save_json(clean(data), file_path)
    return file_path
