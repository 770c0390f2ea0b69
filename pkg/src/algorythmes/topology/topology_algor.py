from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.ndimage import gaussian_filter1d

from src.core.errors import ParamodeError
from src.core.expr import Expr
from src.core.graph_utils import Raster, build_raster, component_boxes, component_cells
from src.core.region import Band, Region, Slice, SliceInterval

logger = logging.getLogger(__name__)

# Margen estricto exigido a la sección: a + 1e-9 < θ < b - 1e-9
SECTION_MARGIN = 1e-9
# Sondas por celda h (por eje) al verificar el rectángulo del testigo
SAMPLES_PER_CELL = 10
MAX_SAMPLES = 4_000_000


class NotXSimpleError(ParamodeError):
    """La región no es x-simple a resolución h; trabajar por piezas."""
    pass


class WitnessNotFoundError(ParamodeError):
    """No se encontró testigo a resolución h (refinar h)."""
    pass


# =============================================================================
#  Tipos de resultado
# =============================================================================

@dataclass(frozen=True)
class SliceScan:
    """Rebanadas muestreadas: t de las columnas del raster más las abscisas de exclusión."""
    ts: np.ndarray
    slices: Tuple[Slice, ...]
    labels: Tuple[Tuple[int, ...], ...]

    @property
    def max_count(self) -> int:
        return max((s.count for s in self.slices), default=0)


@dataclass(frozen=True)
class Component:
    label: int
    box: Tuple[float, float, float, float]
    cells: Tuple[int, int]
    x_simple: bool

    @property
    def t_range(self) -> Tuple[float, float]:
        return self.box[0], self.box[1]


@dataclass(frozen=True)
class Piece:
    """Pieza x-simple: región padre restringida a un intervalo en t y a una franja."""
    region: Region
    t_range: Tuple[float, float]
    label: int


@dataclass(frozen=True)
class NonSimplicityWitness:
    """
    Rectángulo [t0-eps, t0] x [x1-eps, x2+eps] (o [t0, t0+eps] si reflected_t)
    contenido en la región salvo un entorno de radio nu de los puntos upsilon,
    que están en {t0} x [x1, x2] y fuera de la región.
    """
    t0: float
    eps: float
    x1: float
    x2: float
    upsilon: Tuple[Tuple[float, float], ...]
    reflected_t: bool = False
    nu: float = 0.0
    label: int = 0

    @property
    def t_window(self) -> Tuple[float, float]:
        if self.reflected_t:
            return self.t0, self.t0 + self.eps
        return self.t0 - self.eps, self.t0

    @property
    def x_window(self) -> Tuple[float, float]:
        return self.x1 - self.eps, self.x2 + self.eps

    def approach(self, d: float) -> float:
        """Abscisa t a distancia d de t0 por el lado del rectángulo."""
        return self.t0 + d if self.reflected_t else self.t0 - d

    def to_dict(self) -> dict:
        return {
            "t0": self.t0,
            "eps": self.eps,
            "x1": self.x1,
            "x2": self.x2,
            "upsilon": [list(p) for p in self.upsilon],
            "reflected_t": self.reflected_t,
            "nu": self.nu,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "NonSimplicityWitness":
        return cls(
            t0=float(data["t0"]), eps=float(data["eps"]),
            x1=float(data["x1"]), x2=float(data["x2"]),
            upsilon=tuple(tuple(float(v) for v in p) for p in data.get("upsilon", [])),
            reflected_t=bool(data.get("reflected_t", False)),
            nu=float(data.get("nu", 0.0)),
        )


@dataclass(frozen=True)
class Classification:
    x_simple: bool
    components: Tuple[Component, ...]
    pieces: Tuple[Piece, ...]
    witness: Optional[NonSimplicityWitness]
    warnings: Tuple[str, ...]
    scan: SliceScan = field(compare=False, repr=False)
    raster: Raster = field(compare=False, repr=False)

    @property
    def masks(self) -> List[np.ndarray]:
        """Máscara del raster de cada componente."""
        return [self.raster.labels == c.label for c in self.components]

    def component(self, label: int) -> Component:
        return self.components[label - 1]

    def to_dict(self) -> dict:
        return {
            "x_simple": self.x_simple,
            "components": len(self.components),
            "component_details": [
                {"label": c.label, "t_range": list(c.t_range), "x_simple": c.x_simple}
                for c in self.components
            ],
            "pieces": [list(p.t_range) for p in self.pieces],
            "witness": self.witness.to_dict() if self.witness is not None else None,
            "warnings": list(self.warnings),
        }


@dataclass(frozen=True)
class BoundsFn:
    """a(t) = lb, b(t) = ub muestreados; clip marca las cotas que son borde del bbox (±∞)."""
    t: np.ndarray
    a: np.ndarray
    b: np.ndarray
    a_clip: np.ndarray
    b_clip: np.ndarray


class SectionFn:
    """θ(t) muestreada con interpolación cúbica monótona (PCHIP); se mantiene constante fuera de rango."""

    def __init__(self, t: Sequence[float], theta: Sequence[float]):
        self.t = np.asarray(t, dtype=float)
        self.theta = np.asarray(theta, dtype=float)
        if self.t.size == 0 or self.t.shape != self.theta.shape:
            raise ValueError("SectionFn necesita muestras t y θ de igual longitud")
        self._interp = PchipInterpolator(self.t, self.theta) if self.t.size > 1 else None

    @classmethod
    def constant(cls, c: float, t_range: Tuple[float, float] = (-1.0, 1.0)) -> "SectionFn":
        return cls([t_range[0], t_range[1]], [c, c])

    @classmethod
    def from_expr(cls, e: Expr, ts: Sequence[float]) -> "SectionFn":
        ts = np.asarray(ts, dtype=float)
        return cls(ts, e(ts, np.zeros_like(ts)))

    def __call__(self, t):
        scalar = np.ndim(t) == 0
        tt = np.clip(np.asarray(t, dtype=float), self.t[0], self.t[-1])
        out = np.full(tt.shape, self.theta[0]) if self._interp is None else self._interp(tt)
        return float(out) if scalar else out

    def inside(self, region: Region, ts: Optional[Sequence[float]] = None) -> bool:
        """θ(t) dentro de la rebanada en cada muestra no vacía."""
        ts = self.t if ts is None else ts
        for t in ts:
            s = region.slice(float(t))
            if s.count and s.containing(self(float(t))) is None:
                return False
        return True


# =============================================================================
#  Barrido de rebanadas
# =============================================================================

def sample_ts(region: Region, raster: Raster) -> np.ndarray:
    t0, t1 = region.t_extent()
    extra = [t for t in region.exclusion_ts() if t0 < t < t1]
    return np.unique(np.concatenate([raster.t_nodes, np.asarray(extra, dtype=float)]))


def scan(region: Region, raster: Optional[Raster] = None) -> SliceScan:
    raster = raster if raster is not None else build_raster(region)
    ts = sample_ts(region, raster)
    slices = tuple(region.slice(float(t)) for t in ts)
    labels = tuple(
        tuple(raster.label_of_interval(s.t, iv.lo, iv.hi) for iv in s.intervals) for s in slices
    )
    return SliceScan(ts, slices, labels)


def bounds(region: Region, sliced: Optional[SliceScan] = None) -> BoundsFn:
    sliced = sliced if sliced is not None else scan(region)
    n = len(sliced.ts)
    a, b = np.full(n, np.nan), np.full(n, np.nan)
    a_clip, b_clip = np.zeros(n, dtype=bool), np.zeros(n, dtype=bool)
    for i, s in enumerate(sliced.slices):
        if s.count:
            first, last = s.intervals[0], s.intervals[-1]
            a[i], b[i] = first.lo, last.hi
            a_clip[i], b_clip[i] = first.lo_kind == "clip", last.hi_kind == "clip"
    return BoundsFn(sliced.ts.copy(), a, b, a_clip, b_clip)


# =============================================================================
#  Clasificación
# =============================================================================

def classify(region: Region, with_witness: bool = True) -> Classification:
    """
    x-simplicidad, componentes conexas (vecindad-4 en el raster), piezas
    x-simples y, si alguna componente no es x-simple, un testigo.
    """
    raster = build_raster(region)
    sliced = scan(region, raster)
    if raster.count == 0 and sliced.max_count == 0:
        logger.warning("Región vacía a resolución h=%g", region.h)

    warnings: List[str] = []
    bad_labels = set()
    unassigned = 0
    for s, labels in zip(sliced.slices, sliced.labels):
        unassigned += sum(1 for lab in labels if lab == 0)
        seen = set()
        for lab in labels:
            if lab and lab in seen:
                bad_labels.add(lab)
            seen.add(lab)
    if unassigned:
        warnings.append(f"{unassigned} intervalos de rebanada sin celda del raster (refinar h)")

    components = []
    for label, (box, cells) in enumerate(zip(component_boxes(raster), component_cells(raster)), start=1):
        if box is None:
            continue
        if min(cells) < 2:
            warnings.append(f"Componente {label} de menos de 2h en alguna dirección (refinar h)")
        components.append(Component(label, box, cells, label not in bad_labels))

    pieces, piece_warnings = find_pieces(region, sliced, raster)
    warnings.extend(piece_warnings)

    x_simple = sliced.max_count <= 1
    witness = None
    if with_witness and bad_labels:
        try:
            witness = find_witness(region, sliced)
        except WitnessNotFoundError as e:
            warnings.append(str(e))
    for w in warnings:
        logger.warning(w)
    logger.info("Clasificación: x_simple=%s, %d componentes, %d piezas", x_simple, len(components), len(pieces))
    return Classification(x_simple, tuple(components), tuple(pieces), witness, tuple(warnings), sliced, raster)


def _one_to_one(prev: Sequence[SliceInterval], cur: Sequence[SliceInterval]) -> Dict[int, int]:
    """Enlaces j -> k entre intervalos que solo se solapan entre sí."""
    forward: Dict[int, List[int]] = {j: [] for j in range(len(cur))}
    backward: Dict[int, List[int]] = {k: [] for k in range(len(prev))}
    for j, iv in enumerate(cur):
        for k, pv in enumerate(prev):
            if iv.lo < pv.hi and pv.lo < iv.hi:
                forward[j].append(k)
                backward[k].append(j)
    return {j: ks[0] for j, ks in forward.items() if len(ks) == 1 and backward[ks[0]] == [j]}


def find_pieces(region: Region, sliced: SliceScan, raster: Raster) -> Tuple[List[Piece], List[str]]:
    """
    Piezas = cadenas maximales de intervalos enlazados uno a uno entre
    muestras consecutivas cuyo recorrido muestreado en t es >= 2h.
    """
    tracks: List[List[Tuple[int, int]]] = []
    open_tracks: Dict[int, List[Tuple[int, int]]] = {}
    for i, s in enumerate(sliced.slices):
        links = _one_to_one(sliced.slices[i - 1].intervals, s.intervals) if i else {}
        current: Dict[int, List[Tuple[int, int]]] = {}
        for j in range(s.count):
            k = links.get(j)
            if k is not None and k in open_tracks:
                track = open_tracks[k]
                track.append((i, j))
            else:
                track = [(i, j)]
                tracks.append(track)
            current[j] = track
        open_tracks = current

    exclusion = set(region.exclusion_ts())
    t_lo_ext, t_hi_ext = region.t_extent()
    _, _, bx0, bx1 = region.bbox
    ts = sliced.ts
    pieces: List[Piece] = []
    warnings: List[str] = []
    for track in tracks:
        i_first, i_last = track[0][0], track[-1][0]
        if ts[i_last] - ts[i_first] < 2 * region.h:
            continue
        band_t, band_lo, band_hi = [], [], []
        for i, j in track:
            s = sliced.slices[i]
            iv = s.intervals[j]
            lo = bx0 if j == 0 else 0.5 * (s.intervals[j - 1].hi + iv.lo)
            hi = bx1 if j == s.count - 1 else 0.5 * (iv.hi + s.intervals[j + 1].lo)
            band_t.append(float(ts[i]))
            band_lo.append(lo)
            band_hi.append(hi)

        t_start = _extend(ts, i_first, -1, exclusion, t_lo_ext)
        t_end = _extend(ts, i_last, +1, exclusion, t_hi_ext)
        if t_start < band_t[0]:
            band_t.insert(0, t_start)
            band_lo.insert(0, band_lo[0])
            band_hi.insert(0, band_hi[0])
        if t_end > band_t[-1]:
            band_t.append(t_end)
            band_lo.append(band_lo[-1])
            band_hi.append(band_hi[-1])

        i0, j0 = track[0]
        label = sliced.labels[i0][j0]
        band = Band(tuple(band_t), tuple(band_lo), tuple(band_hi))
        name = f"{region.name or 'region'}:piece{len(pieces) + 1}"
        piece_region = region.restrict((t_start, t_end), band, name)
        if scan(piece_region).max_count > 1:
            warnings.append(f"Pieza descartada en t=({t_start:.6g}, {t_end:.6g}): no es x-simple")
            continue
        pieces.append(Piece(piece_region, (t_start, t_end), label))
    return pieces, warnings


def _extend(ts: np.ndarray, i: int, step: int, exclusion: set, edge: float) -> float:
    """Extiende el extremo de una pieza hasta la muestra vecina si es una abscisa de exclusión."""
    k = i + step
    if not 0 <= k < len(ts):
        return edge
    if float(ts[k]) in exclusion:
        return float(ts[k])
    return float(ts[i])


# =============================================================================
#  Testigo de no x-simplicidad
# =============================================================================

def find_witness(region: Region, sliced: Optional[SliceScan] = None) -> NonSimplicityWitness:
    """
    Busca una rebanada desconectada dentro de una componente, sigue el hueco
    hacia la izquierda hasta el t extremo donde persiste (bisección a h/100)
    y reduce eps a la mitad hasta que el rectángulo queda dentro de la región.
    Si el rectángulo izquierdo no sirve se prueba el reflejado a la derecha.

    :raises WitnessNotFoundError: si no hay testigo a resolución h.
    """
    sliced = sliced if sliced is not None else scan(region)
    h = region.h

    candidates: Dict[int, List[Tuple[int, Tuple[float, float]]]] = {}
    for i, (s, labels) in enumerate(zip(sliced.slices, sliced.labels)):
        for j in range(s.count - 1):
            if labels[j] and labels[j] == labels[j + 1]:
                gap = (s.intervals[j].hi, s.intervals[j + 1].lo)
                candidates.setdefault(labels[j], []).append((i, gap))
    if not candidates:
        raise WitnessNotFoundError(
            f"Sin testigo a resolución h={h:g}: ninguna rebanada desconectada dentro de una componente; refinar h"
        )

    for label in sorted(candidates):
        gaps = candidates[label]
        first_i = gaps[0][0]
        last_i = gaps[-1][0]
        for reflected, start in ((False, first_i), (True, last_i)):
            for i, gap in gaps:
                if i != start:
                    continue
                witness = _witness_from(region, sliced, i, gap, reflected, label)
                if witness is not None:
                    logger.info("Testigo: t0=%.6g, x=[%.6g, %.6g], eps=%.3g, reflejado=%s",
                                witness.t0, witness.x1, witness.x2, witness.eps, witness.reflected_t)
                    return witness
    raise WitnessNotFoundError(f"Ningún rectángulo testigo verificado a resolución h={h:g}; refinar h")


def _gap_near(s: Slice, lo: float, hi: float, tol: float) -> Optional[Tuple[float, float]]:
    for left, right in zip(s.intervals, s.intervals[1:]):
        a, b = left.hi, right.lo
        if a <= hi + tol and b >= lo - tol:
            return a, b
    return None


def _witness_from(region: Region, sliced: SliceScan, i: int, gap: Tuple[float, float],
                  reflected: bool, label: int) -> Optional[NonSimplicityWitness]:
    h = region.h
    step = 1 if reflected else -1
    ts = sliced.ts
    while 0 <= i + step < len(ts):
        nxt = _gap_near(sliced.slices[i + step], gap[0], gap[1], h)
        if nxt is None:
            break
        i, gap = i + step, nxt

    t_gap = float(ts[i])
    if 0 <= i + step < len(ts):
        t_free = float(ts[i + step])
    else:
        t_free = region.t_extent()[1 if reflected else 0]
    while abs(t_gap - t_free) > h / 100:
        mid = 0.5 * (t_gap + t_free)
        nxt = _gap_near(region.slice(mid), gap[0], gap[1], h)
        if nxt is None:
            t_free = mid
        else:
            t_gap, gap = mid, nxt

    x1, x2 = gap
    nu = h / 10
    xs = np.linspace(x1, x2, max(2, int(math.ceil((x2 - x1) / h * SAMPLES_PER_CELL)) + 1)) if x2 > x1 else np.array([x1])
    upsilon = tuple((t_gap, float(x)) for x in xs if not region.contains(t_gap, float(x)))
    if region.contains(t_gap, x1) or region.contains(t_gap, x2):
        return None

    t_lo, t_hi, x_lo, x_hi = region.bbox
    eps = min(1.0, 0.25 * min(t_hi - t_lo, x_hi - x_lo))
    while eps >= h / 100:
        w = NonSimplicityWitness(t_gap, eps, x1, x2, upsilon, reflected, nu, label)
        if verify_witness(region, w):
            return NonSimplicityWitness(t_gap, eps / 2, x1, x2, upsilon, reflected, nu, label)
        eps /= 2
    return None


def verify_witness(region: Region, w: NonSimplicityWitness, samples_per_cell: int = SAMPLES_PER_CELL,
                   max_samples: int = MAX_SAMPLES) -> bool:
    """
    Comprobación densa del rectángulo del testigo: todas las sondas fuera del
    entorno de Υ están en la región y (t0, x1), (t0, x2) no lo están.
    """
    h = region.h
    if region.contains(w.t0, w.x1) or region.contains(w.t0, w.x2):
        return False
    t_a, t_b = w.t_window
    x_a, x_b = w.x_window
    nt = int(math.ceil((t_b - t_a) / h * samples_per_cell)) + 1
    nx = int(math.ceil((x_b - x_a) / h * samples_per_cell)) + 1
    if nt * nx > max_samples:
        scale = math.sqrt(max_samples / (nt * nx))
        nt, nx = max(2, int(nt * scale)), max(2, int(nx * scale))
    tt, xx = np.meshgrid(np.linspace(t_a, t_b, nt), np.linspace(x_a, x_b, nx), indexing="ij")
    near = (np.abs(tt - w.t0) <= w.nu) & (xx >= w.x1 - w.nu) & (xx <= w.x2 + w.nu)
    inside = np.asarray(region.contains(tt, xx), dtype=bool)
    return bool(np.all(inside | near))


# =============================================================================
#  Sección suave
# =============================================================================

def _raw_section(iv: SliceInterval) -> float:
    width = iv.hi - iv.lo
    lo_free, hi_free = iv.lo_kind != "clip", iv.hi_kind != "clip"
    if lo_free and hi_free:
        return 0.5 * (iv.lo + iv.hi)
    if lo_free:
        return iv.lo + min(1.0, 0.5 * width)
    if hi_free:
        return iv.hi - min(1.0, 0.5 * width)
    margin = min(1.0, 0.25 * width)
    return float(np.clip(0.0, iv.lo + margin, iv.hi - margin))


def smooth_section(region: Region, sliced: Optional[SliceScan] = None, sigma: float = 8.0) -> SectionFn:
    """
    θ estrictamente entre las cotas: punto medio (o desplazamiento desde la
    cota finita) suavizado con un promedio gaussiano cuyo ancho se reduce a
    la mitad hasta que la curva suavizada respeta las cotas.

    :raises NotXSimpleError: si alguna rebanada tiene más de un intervalo.
    """
    sliced = sliced if sliced is not None else scan(region)
    if sliced.max_count > 1:
        raise NotXSimpleError(
            f"La región '{region.name}' no es x-simple a resolución h={region.h:g}; usar sus piezas"
        )
    keep = [i for i, s in enumerate(sliced.slices) if s.count == 1]
    if not keep:
        raise NotXSimpleError(f"La región '{region.name}' no tiene rebanadas no vacías")

    ts = sliced.ts[keep]
    a = np.array([sliced.slices[i].intervals[0].lo for i in keep])
    b = np.array([sliced.slices[i].intervals[0].hi for i in keep])
    raw = np.array([_raw_section(sliced.slices[i].intervals[0]) for i in keep])

    # Suavizado por tramos contiguos de muestras no vacías
    theta = raw.copy()
    runs = np.split(np.arange(len(keep)), np.flatnonzero(np.diff(keep) > 1) + 1)
    for run in runs:
        s = sigma
        while s >= 0.5:
            cand = gaussian_filter1d(raw[run], s, mode="nearest")
            if np.all(a[run] + SECTION_MARGIN < cand) and np.all(cand < b[run] - SECTION_MARGIN):
                theta[run] = cand
                break
            s /= 2
    if not (np.all(a + SECTION_MARGIN < theta) and np.all(theta < b - SECTION_MARGIN)):
        raise NotXSimpleError(f"Rebanadas de '{region.name}' demasiado estrechas para una sección a resolución h")
    return SectionFn(ts, theta)
