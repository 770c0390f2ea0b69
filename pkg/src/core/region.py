# src/core/region.py
"""
Regiones abiertas del plano (t, x): unión de figuras primitivas menos
puntos y segmentos excluidos, recortada a un bbox abierto.

Las rebanadas se calculan de forma semi-analítica (rectángulos y discos
exactos, predicados muestreados y refinados por bisección), de modo que
las perforaciones de medida cero sobreviven al muestreo.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from src.core.errors import ParamodeError
from src.core.expr import Expr, parse

# Tolerancia para comparar t con la abscisa de una exclusión
_T_TOL = 1e-12


class RegionError(ParamodeError):
    """Región mal formada o consulta fuera del bbox."""
    pass


# =============================================================================
#  Figuras primitivas
# =============================================================================

@dataclass(frozen=True)
class RectShape:
    """Rectángulo abierto (t0, t1) x (x0, x1); admite extremos infinitos."""
    t0: float
    t1: float
    x0: float
    x1: float

    def contains(self, t, x):
        return (self.t0 < t) & (t < self.t1) & (self.x0 < x) & (x < self.x1)

    def intervals(self, t: float, x_nodes: np.ndarray, h: float) -> List[Tuple[float, float]]:
        if self.t0 < t < self.t1:
            return [(self.x0, self.x1)]
        return []

    def to_dict(self) -> dict:
        return {"rect": [_finite_or_none(v) for v in (self.t0, self.t1, self.x0, self.x1)]}


@dataclass(frozen=True)
class DiskShape:
    """Disco abierto de centro (ct, cx) y radio r."""
    ct: float
    cx: float
    r: float

    def contains(self, t, x):
        return (t - self.ct) ** 2 + (x - self.cx) ** 2 < self.r ** 2

    def intervals(self, t: float, x_nodes: np.ndarray, h: float) -> List[Tuple[float, float]]:
        dt2 = (t - self.ct) ** 2
        if dt2 >= self.r ** 2:
            return []
        half = math.sqrt(self.r ** 2 - dt2)
        return [(self.cx - half, self.cx + half)]

    def to_dict(self) -> dict:
        return {"disk": [self.ct, self.cx, self.r]}


@dataclass(frozen=True)
class PredicateShape:
    """Conjunto {(t,x) | predicado verdadero}, muestreado sobre el raster."""
    predicate: Expr

    def contains(self, t, x):
        return np.asarray(self.predicate(t, x), dtype=bool)

    def intervals(self, t: float, x_nodes: np.ndarray, h: float) -> List[Tuple[float, float]]:
        inside = np.asarray(self.predicate(t, x_nodes), dtype=bool)
        if not inside.any():
            return []
        edges = np.diff(inside.astype(np.int8))
        starts = list(np.flatnonzero(edges == 1) + 1)
        ends = list(np.flatnonzero(edges == -1))
        if inside[0]:
            starts.insert(0, 0)
        if inside[-1]:
            ends.append(len(inside) - 1)

        tol = h / 100.0
        out = []
        for s, e in zip(starts, ends):
            lo = -math.inf if s == 0 else self._refine(t, x_nodes[s - 1], x_nodes[s], tol)
            hi = math.inf if e == len(inside) - 1 else self._refine(t, x_nodes[e + 1], x_nodes[e], tol)
            out.append((lo, hi))
        return out

    def _refine(self, t: float, outside: float, inside: float, tol: float) -> float:
        """Bisección hasta tol; devuelve el punto del lado exterior."""
        while abs(inside - outside) > tol:
            mid = 0.5 * (inside + outside)
            if self.predicate.scalar(t, mid):
                inside = mid
            else:
                outside = mid
        return outside

    def to_dict(self) -> dict:
        return {"expr": self.predicate.to_source()}


Shape = RectShape | DiskShape | PredicateShape


@dataclass(frozen=True)
class Band:
    """Franja lo(t) < x < hi(t), lineal a trozos entre muestras (separa una pieza)."""
    t: Tuple[float, ...]
    lo: Tuple[float, ...]
    hi: Tuple[float, ...]

    def bounds(self, t):
        return np.interp(t, self.t, self.lo), np.interp(t, self.t, self.hi)

    def contains(self, t, x):
        lo, hi = self.bounds(t)
        return (self.t[0] <= t) & (t <= self.t[-1]) & (lo < x) & (x < hi)

    def to_dict(self) -> dict:
        return {"t": list(self.t), "lo": list(self.lo), "hi": list(self.hi)}


# =============================================================================
#  Rebanadas
# =============================================================================

@dataclass(frozen=True)
class SliceInterval:
    """Intervalo abierto de una rebanada con el tipo de cada extremo: clip | boundary | excluded."""
    lo: float
    hi: float
    lo_kind: str = "boundary"
    hi_kind: str = "boundary"

    def contains(self, x: float) -> bool:
        return self.lo < x < self.hi

    @property
    def width(self) -> float:
        return self.hi - self.lo


@dataclass(frozen=True)
class Slice:
    t: float
    intervals: Tuple[SliceInterval, ...]

    @property
    def count(self) -> int:
        return len(self.intervals)

    def as_tuples(self) -> List[Tuple[float, float]]:
        return [(iv.lo, iv.hi) for iv in self.intervals]

    def containing(self, x: float) -> Optional[SliceInterval]:
        for iv in self.intervals:
            if iv.contains(x):
                return iv
        return None


# =============================================================================
#  Región
# =============================================================================

@dataclass(frozen=True)
class Region:
    bbox: Tuple[float, float, float, float]
    shapes: Tuple[Shape, ...]
    excluded_points: Tuple[Tuple[float, float], ...] = ()
    excluded_vsegments: Tuple[Tuple[float, float, float], ...] = ()
    excluded_hsegments: Tuple[Tuple[float, float, float], ...] = ()
    resolution: Optional[float] = None
    band: Optional[Band] = None
    name: str = field(default="", compare=False)

    def __post_init__(self):
        t0, t1, x0, x1 = self.bbox
        if not (math.isfinite(t0) and math.isfinite(t1) and math.isfinite(x0) and math.isfinite(x1)):
            raise RegionError("El bbox debe ser finito")
        if not (t0 < t1 and x0 < x1):
            raise RegionError(f"bbox degenerado: {self.bbox}")
        if self.resolution is not None and not self.resolution > 0:
            raise RegionError("La resolución h debe ser positiva")
        if not self.shapes:
            raise RegionError("La región necesita al menos una figura")
        for _, xlo, xhi in self.excluded_vsegments:
            if xlo > xhi:
                raise RegionError("Segmento vertical con x_lo > x_hi")
        for tlo, thi, _ in self.excluded_hsegments:
            if tlo > thi:
                raise RegionError("Segmento horizontal con t_lo > t_hi")

    # -----------------------------------------------------------------
    # Geometría básica
    # -----------------------------------------------------------------
    @property
    def h(self) -> float:
        if self.resolution is not None:
            return float(self.resolution)
        t0, t1, x0, x1 = self.bbox
        return 1e-3 * math.hypot(t1 - t0, x1 - x0)

    @property
    def x_nodes(self) -> np.ndarray:
        """Centros de celda del raster en x (compartidos con graph_utils)."""
        _, _, x0, x1 = self.bbox
        n = max(1, int(math.ceil((x1 - x0) / self.h - 1e-9)))
        return x0 + (np.arange(n) + 0.5) * ((x1 - x0) / n)

    def t_extent(self) -> Tuple[float, float]:
        t0, t1 = self.bbox[0], self.bbox[1]
        if self.band is not None:
            t0, t1 = max(t0, self.band.t[0]), min(t1, self.band.t[-1])
        return t0, t1

    def contains(self, t, x):
        """Pertenencia vectorizada (bbox abierto, figuras, exclusiones, franja)."""
        t = np.asarray(t, dtype=float)
        x = np.asarray(x, dtype=float)
        bt0, bt1, bx0, bx1 = self.bbox
        inside = (bt0 < t) & (t < bt1) & (bx0 < x) & (x < bx1)
        union = np.zeros(np.broadcast(t, x).shape, dtype=bool)
        with np.errstate(all="ignore"):
            for shape in self.shapes:
                union |= shape.contains(t, x)
        inside = inside & union
        for tp, xp in self.excluded_points:
            inside &= ~((np.abs(t - tp) <= _T_TOL) & (np.abs(x - xp) <= _T_TOL))
        for ts, xlo, xhi in self.excluded_vsegments:
            inside &= ~((np.abs(t - ts) <= _T_TOL) & (xlo <= x) & (x <= xhi))
        for tlo, thi, xs in self.excluded_hsegments:
            inside &= ~((np.abs(x - xs) <= _T_TOL) & (tlo <= t) & (t <= thi))
        if self.band is not None:
            inside &= self.band.contains(t, x)
        if inside.ndim == 0:
            return bool(inside)
        return inside

    def exclusion_ts(self) -> List[float]:
        """Abscisas t donde una exclusión puede partir una rebanada."""
        t0, t1 = self.t_extent()
        ts = [tp for tp, _ in self.excluded_points]
        ts += [s[0] for s in self.excluded_vsegments]
        ts += [s[0] for s in self.excluded_hsegments] + [s[1] for s in self.excluded_hsegments]
        return sorted({t for t in ts if t0 < t < t1})

    # -----------------------------------------------------------------
    # Rebanada Ω_t
    # -----------------------------------------------------------------
    def slice(self, t: float) -> Slice:
        """
        Intervalos abiertos maximales de Ω_t a resolución h.

        :raises RegionError: si t está fuera del rango t del bbox.
        """
        t = float(t)
        bt0, bt1, bx0, bx1 = self.bbox
        if not (bt0 <= t <= bt1):
            raise RegionError(f"t={t} fuera del bbox [{bt0}, {bt1}]")
        if t in (bt0, bt1):
            return Slice(t, ())
        if self.band is not None and not (self.band.t[0] <= t <= self.band.t[-1]):
            return Slice(t, ())

        raw: List[Tuple[float, float]] = []
        nodes = self.x_nodes
        for shape in self.shapes:
            raw.extend(shape.intervals(t, nodes, self.h))
        merged = _merge(raw)

        lo_cap, hi_cap, cap_kind = bx0, bx1, "clip"
        intervals: List[SliceInterval] = []
        for lo, hi in merged:
            lo_kind = "boundary"
            hi_kind = "boundary"
            if lo <= lo_cap:
                lo, lo_kind = lo_cap, cap_kind
            if hi >= hi_cap:
                hi, hi_kind = hi_cap, cap_kind
            if lo < hi:
                intervals.append(SliceInterval(lo, hi, lo_kind, hi_kind))

        if self.band is not None:
            band_lo, band_hi = (float(v) for v in self.band.bounds(t))
            clipped = []
            for iv in intervals:
                lo, lo_kind = (band_lo, "boundary") if band_lo > iv.lo else (iv.lo, iv.lo_kind)
                hi, hi_kind = (band_hi, "boundary") if band_hi < iv.hi else (iv.hi, iv.hi_kind)
                if lo < hi:
                    clipped.append(SliceInterval(lo, hi, lo_kind, hi_kind))
            intervals = clipped

        intervals = self._apply_exclusions(t, intervals)
        intervals = [self._snap(t, iv) for iv in intervals]
        return Slice(t, tuple(iv for iv in intervals if iv.lo < iv.hi))

    def _apply_exclusions(self, t: float, intervals: List[SliceInterval]) -> List[SliceInterval]:
        cuts: List[Tuple[float, float]] = []
        for tp, xp in self.excluded_points:
            if abs(t - tp) <= _T_TOL:
                cuts.append((xp, xp))
        for ts, xlo, xhi in self.excluded_vsegments:
            if abs(t - ts) <= _T_TOL:
                cuts.append((xlo, xhi))
        for tlo, thi, xs in self.excluded_hsegments:
            if tlo - _T_TOL <= t <= thi + _T_TOL:
                cuts.append((xs, xs))

        for a, b in sorted(cuts):
            out: List[SliceInterval] = []
            for iv in intervals:
                if b <= iv.lo or a >= iv.hi:
                    out.append(iv)
                    continue
                if iv.lo < a:
                    out.append(SliceInterval(iv.lo, a, iv.lo_kind, "excluded"))
                if b < iv.hi:
                    out.append(SliceInterval(b, iv.hi, "excluded", iv.hi_kind))
            intervals = out
        return intervals

    def _snap(self, t: float, iv: SliceInterval) -> SliceInterval:
        """Empuja los extremos de frontera hasta que queden fuera de Ω (redondeo)."""
        lo, hi = iv.lo, iv.hi
        if iv.lo_kind == "boundary":
            for _ in range(8):
                if not self.contains(t, lo):
                    break
                lo = math.nextafter(lo, -math.inf)
        if iv.hi_kind == "boundary":
            for _ in range(8):
                if not self.contains(t, hi):
                    break
                hi = math.nextafter(hi, math.inf)
        return SliceInterval(lo, hi, iv.lo_kind, iv.hi_kind)

    # -----------------------------------------------------------------
    # Derivadas de la región
    # -----------------------------------------------------------------
    def restrict(self, t_range: Tuple[float, float], band: Band, name: str = "") -> "Region":
        t0 = max(self.bbox[0], t_range[0])
        t1 = min(self.bbox[1], t_range[1])
        return dataclasses.replace(
            self, bbox=(t0, t1, self.bbox[2], self.bbox[3]), band=band, resolution=self.h,
            name=name or self.name,
        )

    def to_dict(self) -> dict:
        """Región JSON; las piezas guardan su franja y vuelven a leerse iguales."""
        data = {
            "schema": "paramode/1",
            "bbox": list(self.bbox),
            "shapes": [s.to_dict() for s in self.shapes],
            "exclude_points": [list(p) for p in self.excluded_points],
            "exclude_vsegments": [list(s) for s in self.excluded_vsegments],
            "exclude_hsegments": [list(s) for s in self.excluded_hsegments],
        }
        if self.resolution is not None:
            data["resolution"] = self.resolution
        if self.band is not None:
            data["band"] = self.band.to_dict()
        if self.name:
            data["name"] = self.name
        return data


def _merge(raw: Sequence[Tuple[float, float]]) -> List[Tuple[float, float]]:
    """Unión de intervalos abiertos; los que solo se tocan en un extremo quedan separados."""
    merged: List[Tuple[float, float]] = []
    for lo, hi in sorted(raw):
        if merged and lo < merged[-1][1]:
            merged[-1] = (merged[-1][0], max(merged[-1][1], hi))
        else:
            merged.append((lo, hi))
    return merged


def _finite_or_none(value: float) -> Optional[float]:
    return value if math.isfinite(value) else None


# =============================================================================
#  Fábricas de regiones de referencia
# =============================================================================

_EVERYTHING = RectShape(-math.inf, math.inf, -math.inf, math.inf)


def rectangle(t0: float, t1: float, x0: float, x1: float, resolution: Optional[float] = None) -> Region:
    return Region((t0, t1, x0, x1), (RectShape(t0, t1, x0, x1),), resolution=resolution, name="rectangle")


def strip(x0: float, x1: float, t_range=(-1.0, 1.0), resolution: Optional[float] = None) -> Region:
    """Franja ℝ x (x0, x1) recortada a t_range."""
    pad = 0.25 * (x1 - x0)
    bbox = (t_range[0], t_range[1], x0 - pad, x1 + pad)
    return Region(bbox, (RectShape(-math.inf, math.inf, x0, x1),), resolution=resolution, name="strip")


def punctured_plane(bbox=(-1.0, 1.0, -1.0, 1.0), point=(0.0, 0.0), resolution: Optional[float] = None) -> Region:
    return Region(tuple(bbox), (_EVERYTHING,), excluded_points=(tuple(point),),
                  resolution=resolution, name="punctured_plane")


def slit_plane(bbox=(-1.0, 1.0, -1.0, 1.0), resolution: Optional[float] = None) -> Region:
    """ℝ² menos la semirrecta [0, ∞) x {0}: simplemente conexo pero no x-simple."""
    return Region(tuple(bbox), (_EVERYTHING,), excluded_hsegments=((0.0, bbox[1], 0.0),),
                  resolution=resolution, name="slit_plane")


def stacked_rectangles(resolution: Optional[float] = None) -> Region:
    """(0,1)x(0,1) ∪ (0,1)x(2,3): dos componentes x-simples que se solapan en t."""
    shapes = (RectShape(0.0, 1.0, 0.0, 1.0), RectShape(0.0, 1.0, 2.0, 3.0))
    return Region((0.0, 1.0, -0.5, 3.5), shapes, resolution=resolution, name="stacked_rectangles")


def annulus(r_in: float = 0.5, r_out: float = 1.0, resolution: Optional[float] = None) -> Region:
    """Anillo centrado en el origen: conexo, no x-simple, múltiplemente conexo."""
    predicate = parse(f"t^2 + x^2 < {r_out ** 2!r} and t^2 + x^2 > {r_in ** 2!r}", predicate=True)
    pad = 0.1 * r_out
    bbox = (-r_out - pad, r_out + pad, -r_out - pad, r_out + pad)
    return Region(bbox, (PredicateShape(predicate),), resolution=resolution, name="annulus")


def punctured_square(K: int, resolution: Optional[float] = None) -> Region:
    """
    Cuadrado (0,1)x(0,1) menos los puntos (2^-k l, 1 - 2^-k), l = 1..2^k - 1, k <= K.

    La resolución por defecto 2^-(K+1) deja las líneas perforadas a distancia
    2h, por debajo de lo que el raster puede separar como pieza: la
    clasificación sale sin piezas. Con h fino (1e-3 para K = 3) el raster sí
    separa las ventanas entre perforaciones y aparecen piezas.
    """
    if K < 1:
        raise RegionError("K debe ser >= 1")
    points = tuple(
        (l / 2 ** k, 1.0 - 1.0 / 2 ** k) for k in range(1, K + 1) for l in range(1, 2 ** k)
    )
    h = resolution if resolution is not None else 2.0 ** -(K + 1)
    return Region((0.0, 1.0, 0.0, 1.0), (RectShape(0.0, 1.0, 0.0, 1.0),), excluded_points=points,
                  resolution=h, name=f"punctured_square_K{K}")
