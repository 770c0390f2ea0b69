import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from src.core.errors import ParamodeError
from src.core.expr import Expr, ExprError, parse
from src.core.operators import LinearSystem, OperatorError, Provenance, ScalarOperator
from src.core.region import Band, DiskShape, PredicateShape, RectShape, Region, RegionError

logger = logging.getLogger(__name__)

SCHEMA = "paramode/1"


class JsonLoadError(ParamodeError):
    """Error al cargar un archivo: lleva ruta, línea/columna o el campo con la expresión inválida."""

    def __init__(self, message: str, path: Optional[Path] = None, line: Optional[int] = None,
                 column: Optional[int] = None, field: Optional[str] = None):
        self.path = path
        self.line = line
        self.column = column
        self.field = field
        where = str(path) if path is not None else "<inline>"
        if line is not None:
            where += f":{line}:{column}"
        if field is not None:
            where += f" [{field}]"
        super().__init__(f"{where}: {message}")


@dataclass(frozen=True)
class Problem:
    """Problema escalar leído de archivo: operador + sección e datos iniciales opcionales."""
    operator: ScalarOperator
    theta: Optional[Expr] = None
    init: Optional[Tuple[Expr, ...]] = None


@dataclass(frozen=True)
class SystemProblem:
    system: LinearSystem
    theta: Optional[Expr] = None
    init: Optional[Tuple[Expr, ...]] = None


class JsonLoader:
    """Carga y valida los archivos de región, problema, sistema y ζ."""

    def __init__(self, file_path: str):
        self.file_path = Path(file_path)
        self.data: Optional[Dict[str, Any]] = None

    def load(self) -> Dict[str, Any]:
        """Lee el JSON y comprueba la etiqueta de esquema."""
        if not self.file_path.exists():
            raise JsonLoadError("Archivo no encontrado", self.file_path)

        try:
            with self.file_path.open("r", encoding="utf-8") as f:
                self.data = json.load(f)
        except json.JSONDecodeError as e:
            raise JsonLoadError(f"JSON inválido: {e.msg}", self.file_path, e.lineno, e.colno)

        if not isinstance(self.data, dict):
            raise JsonLoadError("El documento debe ser un objeto JSON", self.file_path)
        _check_schema(self.data, self.file_path)
        logger.info("Archivo %s cargado", self.file_path)
        return self.data

    def _loaded(self) -> Dict[str, Any]:
        if self.data is None:
            self.load()
        return self.data

    def region(self) -> Region:
        return region_from_dict(self._loaded(), self.file_path)

    def problem(self) -> Problem:
        return problem_from_dict(self._loaded(), self.file_path)

    def system(self) -> SystemProblem:
        return system_from_dict(self._loaded(), self.file_path)

    def zeta(self) -> Tuple[np.ndarray, np.ndarray]:
        """(t de forma (n,), ζ de forma (p, n))."""
        data = self._loaded()
        for key in ("t", "zeta"):
            if key not in data:
                raise JsonLoadError(f"Falta la clave '{key}'", self.file_path)
        try:
            t = np.asarray(data["t"], dtype=float)
            zeta = np.atleast_2d(np.asarray(data["zeta"], dtype=float))
        except (TypeError, ValueError) as e:
            raise JsonLoadError(f"Valores numéricos inválidos: {e}", self.file_path)
        if t.ndim != 1 or zeta.shape[1] != t.size:
            raise JsonLoadError("'zeta' debe tener una fila de len(t) valores por cada ζ^s", self.file_path)
        if np.any(np.diff(t) <= 0):
            raise JsonLoadError("'t' debe ser estrictamente creciente", self.file_path)
        return t, zeta

    def is_system(self) -> bool:
        return "A" in self._loaded()


# =============================================================================
#  Decodificación
# =============================================================================

def _check_schema(data: dict, path: Optional[Path]) -> None:
    schema = data.get("schema")
    if schema is None:
        logger.warning("%s: sin etiqueta 'schema', se asume %s", path or "<inline>", SCHEMA)
    elif schema != SCHEMA:
        raise JsonLoadError(f"Esquema no soportado: {schema!r} (se esperaba {SCHEMA!r})", path)


def _expr(src: Any, path: Optional[Path], field: str, variables=("t", "x"), predicate=False) -> Expr:
    if not isinstance(src, str):
        raise JsonLoadError("Se esperaba una expresión (cadena)", path, field=field)
    try:
        return parse(src, variables=variables, predicate=predicate)
    except ExprError as e:
        raise JsonLoadError(f"{e} (columna {e.column})", path, field=field) from e


def _number(value: Any, path: Optional[Path], field: str, none_as: Optional[float] = None) -> float:
    if value is None and none_as is not None:
        return none_as
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise JsonLoadError(f"Se esperaba un número, hay {value!r}", path, field=field)
    return float(value)


def _numbers(values: Any, n: int, path: Optional[Path], field: str) -> List[float]:
    if not isinstance(values, list) or len(values) != n:
        raise JsonLoadError(f"Se esperaba una lista de {n} números", path, field=field)
    return [_number(v, path, f"{field}[{i}]") for i, v in enumerate(values)]


def region_from_dict(data: dict, path: Optional[Path] = None) -> Region:
    if "bbox" not in data or "shapes" not in data:
        raise JsonLoadError("Una región necesita 'bbox' y 'shapes'", path)
    bbox = tuple(_numbers(data["bbox"], 4, path, "bbox"))

    shapes = []
    for i, shape in enumerate(data["shapes"]):
        field = f"shapes[{i}]"
        if not isinstance(shape, dict) or len(shape) != 1:
            raise JsonLoadError("Cada figura es {'rect'|'disk'|'expr': ...}", path, field=field)
        (kind, value), = shape.items()
        if kind == "rect":
            if not isinstance(value, list) or len(value) != 4:
                raise JsonLoadError("'rect' necesita [t0, t1, x0, x1]", path, field=field)
            # null = ±∞
            t0, t1, x0, x1 = (
                _number(v, path, f"{field}.rect[{j}]", none_as=(-math.inf if j % 2 == 0 else math.inf))
                for j, v in enumerate(value)
            )
            shapes.append(RectShape(t0, t1, x0, x1))
        elif kind == "disk":
            shapes.append(DiskShape(*_numbers(value, 3, path, f"{field}.disk")))
        elif kind == "expr":
            shapes.append(PredicateShape(_expr(value, path, f"{field}.expr", predicate=True)))
        else:
            raise JsonLoadError(f"Figura desconocida '{kind}'", path, field=field)

    points = tuple(tuple(_numbers(p, 2, path, f"exclude_points[{i}]"))
                   for i, p in enumerate(data.get("exclude_points", [])))
    vsegs = tuple(tuple(_numbers(s, 3, path, f"exclude_vsegments[{i}]"))
                  for i, s in enumerate(data.get("exclude_vsegments", [])))
    hsegs = tuple(tuple(_numbers(s, 3, path, f"exclude_hsegments[{i}]"))
                  for i, s in enumerate(data.get("exclude_hsegments", [])))
    resolution = data.get("resolution")
    if resolution is not None:
        resolution = _number(resolution, path, "resolution")
    band = _band(data["band"], path) if data.get("band") is not None else None

    try:
        return Region(bbox, tuple(shapes), points, vsegs, hsegs, resolution, band,
                      name=str(data.get("name", path.stem if path else "")))
    except RegionError as e:
        raise JsonLoadError(str(e), path) from e


def _band(data: Any, path: Optional[Path]) -> Band:
    """Franja de una pieza: listas t, lo, hi de igual longitud con t creciente."""
    if not isinstance(data, dict) or any(k not in data for k in ("t", "lo", "hi")):
        raise JsonLoadError("'band' necesita t, lo y hi", path, field="band")
    n = len(data["t"]) if isinstance(data["t"], list) else 0
    if n < 2:
        raise JsonLoadError("'band' necesita al menos dos muestras", path, field="band.t")
    t, lo, hi = (tuple(_numbers(data[k], n, path, f"band.{k}")) for k in ("t", "lo", "hi"))
    if any(b <= a for a, b in zip(t, t[1:])):
        raise JsonLoadError("'band.t' debe ser estrictamente creciente", path, field="band.t")
    return Band(t, lo, hi)


def _region_ref(data: dict, path: Optional[Path]) -> Region:
    ref = data.get("region")
    if ref is None:
        raise JsonLoadError("Falta la clave 'region'", path)
    if isinstance(ref, str):
        base = path.parent if path is not None else Path(".")
        return JsonLoader(str(base / ref)).region()
    if isinstance(ref, dict):
        return region_from_dict(ref, path)
    raise JsonLoadError("'region' debe ser una ruta o un objeto", path, field="region")


def _section_and_init(data: dict, path: Optional[Path]) -> Tuple[Optional[Expr], Optional[Tuple[Expr, ...]]]:
    theta = None
    if data.get("theta") is not None:
        theta = _expr(data["theta"], path, "theta", variables=("t",))
    init = None
    if data.get("init") is not None:
        if not isinstance(data["init"], list):
            raise JsonLoadError("'init' debe ser una lista de expresiones en t", path, field="init")
        init = tuple(_expr(e, path, f"init[{i}]", variables=("t",)) for i, e in enumerate(data["init"]))
    return theta, init


def problem_from_dict(data: dict, path: Optional[Path] = None) -> Problem:
    for key in ("order", "g"):
        if key not in data:
            raise JsonLoadError(f"Falta la clave '{key}'", path)
    order = data["order"]
    if isinstance(order, bool) or not isinstance(order, int):
        raise JsonLoadError("'order' debe ser entero", path, field="order")
    if not isinstance(data["g"], list):
        raise JsonLoadError("'g' debe ser una lista de expresiones", path, field="g")
    g = tuple(_expr(src, path, f"g[{i}]") for i, src in enumerate(data["g"]))
    f = _expr(data["f"], path, "f") if data.get("f") is not None else None
    meta = data.get("meta")
    provenance = Provenance.from_dict(meta) if meta else None
    theta, init = _section_and_init(data, path)
    if init is not None and len(init) != order:
        raise JsonLoadError(f"'init' debe tener {order} expresiones", path, field="init")
    try:
        op = ScalarOperator(order, g, _region_ref(data, path), f, provenance)
    except OperatorError as e:
        raise JsonLoadError(str(e), path) from e
    return Problem(op, theta, init)


def system_from_dict(data: dict, path: Optional[Path] = None) -> SystemProblem:
    if "A" not in data:
        raise JsonLoadError("Falta la clave 'A'", path)
    rows = data["A"]
    if not isinstance(rows, list) or not rows:
        raise JsonLoadError("'A' debe ser una lista de filas", path, field="A")
    p = len(rows)
    A = []
    for i, row in enumerate(rows):
        if not isinstance(row, list):
            raise JsonLoadError("Cada fila de 'A' es una lista", path, field=f"A[{i}]")
        A.append(tuple(_expr(src, path, f"A[{i}][{j}]") for j, src in enumerate(row)))
    F = data.get("F") or ["0"] * p
    if not isinstance(F, list):
        raise JsonLoadError("'F' debe ser una lista de expresiones", path, field="F")
    F = tuple(_expr(src, path, f"F[{i}]") for i, src in enumerate(F))
    theta, init = _section_and_init(data, path)
    try:
        system = LinearSystem(p, tuple(A), F, _region_ref(data, path))
    except OperatorError as e:
        raise JsonLoadError(str(e), path) from e
    return SystemProblem(system, theta, init)


# =============================================================================
#  Codificación
# =============================================================================

def problem_to_dict(op: ScalarOperator, theta: Optional[Expr] = None) -> dict:
    """Problema JSON con la región en línea; las expresiones usan la impresión canónica."""
    data = {
        "schema": SCHEMA,
        "region": op.region.to_dict(),
        "order": op.p,
        "g": [g.to_source() for g in op.g],
        "f": op.f.to_source() if op.f is not None else None,
    }
    if theta is not None:
        data["theta"] = theta.to_source()
    if op.provenance is not None:
        data["meta"] = op.provenance.to_dict()
    return data


def save_json(data: dict, file_path: str) -> Path:
    """Escritura determinista: claves en el orden de inserción, sin marcas de tiempo."""
    path = Path(file_path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as f:
        json.dump(data, f, indent=2, ensure_ascii=False, allow_nan=False, default=_jsonable)
        f.write("\n")
    return path


def _jsonable(value: Any):
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError(f"Tipo no serializable: {type(value).__name__}")
