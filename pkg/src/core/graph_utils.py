# src/core/graph_utils.py
"""
Utilidades del raster: la región se ve como un grafo de celdas con
vecindad-4 y sus componentes conexas se etiquetan por inundación.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
from scipy import ndimage

from src.core.region import Region

# Vecindad-4 (sin diagonales)
FOUR_CONNECTED = ndimage.generate_binary_structure(2, 1)


@dataclass(frozen=True)
class Raster:
    """Malla de centros de celda con la máscara de pertenencia y las etiquetas."""
    t_nodes: np.ndarray
    x_nodes: np.ndarray
    mask: np.ndarray      # (nt, nx) bool
    labels: np.ndarray    # (nt, nx) int, 0 = fuera
    count: int

    @property
    def ht(self) -> float:
        return float(self.t_nodes[1] - self.t_nodes[0]) if len(self.t_nodes) > 1 else 0.0

    @property
    def hx(self) -> float:
        return float(self.x_nodes[1] - self.x_nodes[0]) if len(self.x_nodes) > 1 else 0.0

    def column_of(self, t: float) -> int:
        """Índice de la columna cuyo centro está más cerca de t."""
        j = int(np.searchsorted(self.t_nodes, t))
        if j <= 0:
            return 0
        if j >= len(self.t_nodes):
            return len(self.t_nodes) - 1
        return j if abs(self.t_nodes[j] - t) < abs(t - self.t_nodes[j - 1]) else j - 1

    def label_of_interval(self, t: float, lo: float, hi: float) -> int:
        """
        Etiqueta mayoritaria de las celdas del intervalo (lo, hi) en la columna de t.
        Prueba las columnas vecinas si el intervalo es más fino que la celda; 0 si no hay.
        """
        j = self.column_of(t)
        rows = (self.x_nodes > lo) & (self.x_nodes < hi)
        for col in (j, j - 1, j + 1):
            if not 0 <= col < len(self.t_nodes):
                continue
            found = self.labels[col, rows]
            found = found[found > 0]
            if found.size:
                return int(np.bincount(found).argmax())
        if not rows.any():
            # Intervalo sin ningún centro de celda: usar la celda más cercana
            k = int(np.argmin(np.abs(self.x_nodes - 0.5 * (lo + hi))))
            return int(self.labels[j, k])
        return 0


def raster_axes(region: Region) -> Tuple[np.ndarray, np.ndarray]:
    t0, t1 = region.t_extent()
    nt = max(1, int(math.ceil((t1 - t0) / region.h - 1e-9)))
    t_nodes = t0 + (np.arange(nt) + 0.5) * ((t1 - t0) / nt)
    return t_nodes, region.x_nodes


def raster_mask(region: Region, t_nodes: np.ndarray, x_nodes: np.ndarray) -> np.ndarray:
    """
    Pertenencia en los centros de celda. Los segmentos excluidos se
    engrosan a una celda para que puedan desconectar el raster; los
    puntos aislados no (nunca desconectan un abierto).
    """
    tt, xx = np.meshgrid(t_nodes, x_nodes, indexing="ij")
    mask = np.array(region.contains(tt, xx), dtype=bool)
    ht = t_nodes[1] - t_nodes[0] if len(t_nodes) > 1 else region.h
    hx = x_nodes[1] - x_nodes[0] if len(x_nodes) > 1 else region.h
    for ts, xlo, xhi in region.excluded_vsegments:
        cols = np.abs(t_nodes - ts) <= 0.5 * ht
        rows = (x_nodes >= xlo - 0.5 * hx) & (x_nodes <= xhi + 0.5 * hx)
        mask[np.ix_(cols, rows)] = False
    for tlo, thi, xs in region.excluded_hsegments:
        cols = (t_nodes >= tlo - 0.5 * ht) & (t_nodes <= thi + 0.5 * ht)
        rows = np.abs(x_nodes - xs) <= 0.5 * hx
        mask[np.ix_(cols, rows)] = False
    return mask


def label_components(mask: np.ndarray) -> Tuple[np.ndarray, int]:
    """Inundación vecindad-4; devuelve (etiquetas, número de componentes)."""
    labels, count = ndimage.label(mask, structure=FOUR_CONNECTED)
    return labels, int(count)


def build_raster(region: Region) -> Raster:
    t_nodes, x_nodes = raster_axes(region)
    mask = raster_mask(region, t_nodes, x_nodes)
    labels, count = label_components(mask)
    return Raster(t_nodes, x_nodes, mask, labels, count)


def component_boxes(raster: Raster) -> List[Optional[Tuple[float, float, float, float]]]:
    """Caja (t_lo, t_hi, x_lo, x_hi) de cada componente, en coordenadas del plano."""
    boxes = []
    ht, hx = raster.ht or 0.0, raster.hx or 0.0
    for sl in ndimage.find_objects(raster.labels):
        if sl is None:
            boxes.append(None)
            continue
        ts, xs = sl
        boxes.append((
            float(raster.t_nodes[ts.start] - 0.5 * ht),
            float(raster.t_nodes[ts.stop - 1] + 0.5 * ht),
            float(raster.x_nodes[xs.start] - 0.5 * hx),
            float(raster.x_nodes[xs.stop - 1] + 0.5 * hx),
        ))
    return boxes


def component_cells(raster: Raster) -> List[Tuple[int, int]]:
    """Extensión en celdas (columnas, filas) de cada componente."""
    out = []
    for sl in ndimage.find_objects(raster.labels):
        if sl is None:
            out.append((0, 0))
        else:
            out.append((sl[0].stop - sl[0].start, sl[1].stop - sl[1].start))
    return out
