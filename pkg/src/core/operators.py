# src/core/operators.py
"""
Operadores escalares P = Σ g^i(t,x) ∂_x^i y su reducción a sistemas de
primer orden v_x = A v + F (sistema compañero).
"""
from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from src.core import expr as ex
from src.core.errors import ParamodeError
from src.core.expr import Expr
from src.core.graph_utils import build_raster
from src.core.region import Region

logger = logging.getLogger(__name__)


class OperatorError(ParamodeError):
    """Operador mal formado (orden, número de coeficientes, dimensiones)."""
    pass


class LeadingCoefficientError(OperatorError):
    """El coeficiente principal se anula, no es finito o cambia de signo en una componente."""

    def __init__(self, message: str, point: Tuple[float, float]):
        self.point = point
        super().__init__(message)


class ResidualGridError(OperatorError):
    """Malla demasiado gruesa para las diferencias centrales de orden p."""
    pass


# =============================================================================
#  Procedencia (la adjuntan los generadores de contraejemplos)
# =============================================================================

@dataclass(frozen=True)
class Provenance:
    """
    Origen de un operador generado.

    kind:             hom | inhom | punctured-square | rhs
    singular_points:  (t, x, peso a) de cada singularidad tipo Cauchy
    approach:         "left" o "right" (lado del rectángulo del testigo)
    window:           intervalo en x donde se mide el cruce (None = ventana automática)
    """
    kind: str
    singular_points: Tuple[Tuple[float, float, float], ...] = ()
    approach: str = "left"
    window: Optional[Tuple[float, float]] = None
    truncation: Optional[int] = None
    witness: Optional[dict] = None

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "singular_points": [list(p) for p in self.singular_points],
            "approach": self.approach,
            "window": list(self.window) if self.window is not None else None,
            "truncation": self.truncation,
            "witness": self.witness,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Provenance":
        window = data.get("window")
        return cls(
            kind=str(data["kind"]),
            singular_points=tuple(tuple(float(v) for v in p) for p in data.get("singular_points", [])),
            approach=str(data.get("approach", "left")),
            window=tuple(float(v) for v in window) if window is not None else None,
            truncation=data.get("truncation"),
            witness=data.get("witness"),
        )


# =============================================================================
#  Operador escalar y sistema lineal
# =============================================================================

@dataclass(frozen=True)
class ScalarOperator:
    """P u = Σ_{i=0..p} g^i(t,x) u_i = f(t,x) sobre la región."""
    p: int
    g: Tuple[Expr, ...]
    region: Region
    f: Optional[Expr] = None
    provenance: Optional[Provenance] = field(default=None, compare=False)

    def __post_init__(self):
        if self.p < 1:
            raise OperatorError(f"El orden debe ser >= 1 (recibido {self.p})")
        if len(self.g) != self.p + 1:
            raise OperatorError(f"Se esperaban {self.p + 1} coeficientes g^0..g^p, hay {len(self.g)}")
        for i, gi in enumerate(self.g):
            if gi.is_predicate:
                raise OperatorError(f"g^{i} es un predicado, no un coeficiente")
        if self.f is not None and self.f.is_predicate:
            raise OperatorError("f es un predicado, no una función")

    @property
    def leading(self) -> Expr:
        return self.g[self.p]

    @property
    def is_homogeneous(self) -> bool:
        return self.f is None or self.f.constant_value == 0.0

    def with_rhs(self, f: Optional[Expr]) -> "ScalarOperator":
        return ScalarOperator(self.p, self.g, self.region, f, self.provenance)

    def on(self, region: Region) -> "ScalarOperator":
        """Mismo operador sobre otra región (una pieza o componente)."""
        return dataclasses.replace(self, region=region)

    def apply(self, t, x, derivatives: Sequence[np.ndarray]) -> np.ndarray:
        """Σ g^i(t,x) u_i para derivadas ya calculadas (u_0..u_p)."""
        total = np.zeros(np.broadcast(np.asarray(t), np.asarray(x)).shape)
        for gi, ui in zip(self.g, derivatives):
            total = total + gi(t, x) * ui
        return total


@dataclass(frozen=True)
class LinearSystem:
    """v_x = A(t,x) v + F(t,x) con A de p x p y F de dimensión p."""
    p: int
    A: Tuple[Tuple[Expr, ...], ...]
    F: Tuple[Expr, ...]
    region: Region

    def __post_init__(self):
        if self.p < 1 or len(self.A) != self.p or any(len(row) != self.p for row in self.A):
            raise OperatorError(f"A debe ser de {self.p}x{self.p}")
        if len(self.F) != self.p:
            raise OperatorError(f"F debe tener {self.p} componentes")

    @property
    def is_homogeneous(self) -> bool:
        return all(fi.constant_value == 0.0 for fi in self.F)

    def homogeneous(self) -> "LinearSystem":
        return LinearSystem(self.p, self.A, tuple(ex.const(0.0) for _ in range(self.p)), self.region)

    def on(self, region: Region) -> "LinearSystem":
        return dataclasses.replace(self, region=region)

    def matrix(self, t: float, x: float) -> np.ndarray:
        return np.array([[a.scalar(t, x) for a in row] for row in self.A], dtype=float)

    def forcing(self, t: float, x: float) -> np.ndarray:
        return np.array([fi.scalar(t, x) for fi in self.F], dtype=float)

    def trace(self, t: float, x: float) -> float:
        return float(sum(self.A[i][i].scalar(t, x) for i in range(self.p)))

    def rhs(self, t: float, ncols: Optional[int] = None, homogeneous: bool = False,
            log_domain: bool = False) -> Callable[[float, np.ndarray], np.ndarray]:
        """
        Lado derecho para el integrador a t fijo.

        :param ncols: None para estado vector (p,), k para estado matricial (p, k) aplanado.
        :param log_domain: sistema 1x1, integra w = log v (w_x = a(t,x)).
        """
        t = float(t)
        p = self.p
        base = np.zeros((p, p))
        varying: List[Tuple[int, int, Expr]] = []
        for i, row in enumerate(self.A):
            for j, a in enumerate(row):
                c = a.constant_value
                if c is None:
                    varying.append((i, j, a))
                else:
                    base[i, j] = c

        if log_domain:
            if p != 1:
                raise OperatorError("El dominio logarítmico solo aplica a sistemas 1x1")
            a = self.A[0][0]
            c = a.constant_value
            if c is not None:
                return lambda x, w: np.array([c])
            return lambda x, w: np.array([a.scalar(t, x)])

        forcing_base = np.zeros(p)
        forcing_varying: List[Tuple[int, Expr]] = []
        if not homogeneous:
            for i, fi in enumerate(self.F):
                c = fi.constant_value
                if c is None:
                    forcing_varying.append((i, fi))
                else:
                    forcing_base[i] = c
        has_forcing = bool(forcing_varying) or bool(np.any(forcing_base))

        def matrix_at(x: float) -> np.ndarray:
            if not varying:
                return base
            a = base.copy()
            for i, j, e in varying:
                a[i, j] = e.scalar(t, x)
            return a

        def forcing_at(x: float) -> np.ndarray:
            if not forcing_varying:
                return forcing_base
            fv = forcing_base.copy()
            for i, e in forcing_varying:
                fv[i] = e.scalar(t, x)
            return fv

        if ncols is None:
            if has_forcing:
                return lambda x, y: matrix_at(x) @ y + forcing_at(x)
            return lambda x, y: matrix_at(x) @ y

        def matrix_rhs(x: float, y: np.ndarray) -> np.ndarray:
            out = matrix_at(x) @ y.reshape(p, ncols)
            if has_forcing:
                out = out + forcing_at(x)[:, None]
            return out.ravel()

        return matrix_rhs


# =============================================================================
#  Sistema compañero
# =============================================================================

def companion(op: ScalarOperator) -> LinearSystem:
    """
    Reduce P u = f a v_x = A v + F con v = (u, u_1, ..., u_{p-1}):
    unos en la superdiagonal, última fila -g^i/g^p, F = (0, ..., f/g^p).
    """
    p = op.p
    zero, one = ex.const(0.0), ex.const(1.0)
    rows: List[Tuple[Expr, ...]] = []
    for i in range(p - 1):
        rows.append(tuple(one if j == i + 1 else zero for j in range(p)))
    rows.append(tuple(ex.neg(ex.div(op.g[i], op.leading)) for i in range(p)))
    last = zero if op.f is None else ex.div(op.f, op.leading)
    forcing = tuple(zero for _ in range(p - 1)) + (last,)
    return LinearSystem(p, tuple(rows), forcing, op.region)


def liouville_integrand(op: ScalarOperator) -> Expr:
    """Integrando -g^{p-1}/g^p de la fórmula de Liouville-Ostrogradski."""
    return ex.neg(ex.div(op.g[op.p - 1], op.leading))


# =============================================================================
#  Campo muestreado y residuo
# =============================================================================

@dataclass(frozen=True)
class SampledField:
    """
    Valores sobre una malla por rebanadas: para cada t_i, nx nodos x[i, :]
    equiespaciados. values tiene forma (nt, nx, *state); NaN donde no se alcanzó.
    """
    t: np.ndarray
    x: np.ndarray
    values: np.ndarray

    @property
    def scalar_values(self) -> np.ndarray:
        """Primera componente del estado (la función u misma)."""
        v = self.values
        while v.ndim > 2:
            v = v[..., 0]
        return v

    def same_grid(self, other: "SampledField", tol: float = 1e-12) -> bool:
        return (self.t.shape == other.t.shape and self.x.shape == other.x.shape
                and np.allclose(self.t, other.t, atol=tol, rtol=0)
                and np.allclose(self.x, other.x, atol=tol, rtol=0))


def residual(op: ScalarOperator, u: SampledField) -> float:
    """
    Máximo residuo relativo |Σ g^i D^i u - f| / (1 + |f| + Σ |g^i D^i u|)
    en los nodos interiores, con D diferencias centrales.

    :raises ResidualGridError: si alguna rebanada tiene menos nodos de los necesarios.
    """
    p = op.p
    values = u.scalar_values
    nt, nx = values.shape
    if nx < max(p + 2, 2 * p + 1):
        raise ResidualGridError(f"Se necesitan al menos {max(p + 2, 2 * p + 1)} nodos por rebanada, hay {nx}")

    worst = 0.0
    for i in range(nt):
        xs = u.x[i]
        if not np.all(np.isfinite(xs)):
            continue
        dx = float(xs[1] - xs[0])
        if not dx > 0:
            raise ResidualGridError(f"Rebanada t={u.t[i]} sin espaciado positivo")
        derivs = [values[i]]
        for _ in range(p):
            derivs.append(np.gradient(derivs[-1], dx))
        interior = slice(p, nx - p)
        t_row = np.full(nx, u.t[i])
        with np.errstate(all="ignore"):
            terms = [op.g[k](t_row, xs) * derivs[k] for k in range(p + 1)]
            f_vals = op.f(t_row, xs) if op.f is not None else np.zeros(nx)
            num = np.abs(sum(terms) - f_vals)
            den = 1.0 + np.abs(f_vals) + sum(np.abs(term) for term in terms)
            ratio = (num / den)[interior]
        ratio = ratio[np.isfinite(ratio)]
        if ratio.size:
            worst = max(worst, float(ratio.max()))
    return worst


# =============================================================================
#  Coeficiente principal
# =============================================================================

def check_leading_coefficient(op: ScalarOperator) -> Dict[int, int]:
    """
    Verifica g^p != 0 y de signo constante por componente (muestreo denso
    sobre el raster + bisección en los cambios de signo).

    :return: {etiqueta de componente: signo}
    :raises LeadingCoefficientError: con el punto problemático.
    """
    raster = build_raster(op.region)
    tt, xx = np.meshgrid(raster.t_nodes, raster.x_nodes, indexing="ij")
    values = np.asarray(op.leading(tt, xx), dtype=float)
    values = np.broadcast_to(values, tt.shape)

    bad = raster.mask & ~(np.isfinite(values) & (values != 0.0))
    if bad.any():
        i, j = np.argwhere(bad)[0]
        point = (float(tt[i, j]), float(xx[i, j]))
        raise LeadingCoefficientError(f"g^{op.p} se anula o no es finito en {point}", point)

    signs: Dict[int, int] = {}
    sign = np.sign(values)
    for axis in (0, 1):
        a = [slice(None), slice(None)]
        b = [slice(None), slice(None)]
        a[axis], b[axis] = slice(0, -1), slice(1, None)
        same = (raster.labels[tuple(a)] > 0) & (raster.labels[tuple(a)] == raster.labels[tuple(b)])
        flips = same & (sign[tuple(a)] != sign[tuple(b)])
        if flips.any():
            i, j = np.argwhere(flips)[0]
            i2, j2 = (i + 1, j) if axis == 0 else (i, j + 1)
            point = _bisect_zero(op.leading, (tt[i, j], xx[i, j]), (tt[i2, j2], xx[i2, j2]))
            raise LeadingCoefficientError(f"g^{op.p} cambia de signo cerca de {point}", point)

    for label in range(1, raster.count + 1):
        cells = raster.labels == label
        signs[label] = int(sign[cells][0])
    logger.debug("Coeficiente principal verificado en %d componentes", raster.count)
    return signs


def _bisect_zero(e: Expr, a: Tuple[float, float], b: Tuple[float, float], iterations: int = 60) -> Tuple[float, float]:
    fa = e.scalar(*a)
    for _ in range(iterations):
        mid = (0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1]))
        fm = e.scalar(*mid)
        if fm == 0.0:
            return (float(mid[0]), float(mid[1]))
        if (fm > 0) == (fa > 0):
            a, fa = mid, fm
        else:
            b = mid
    return (float(0.5 * (a[0] + b[0])), float(0.5 * (a[1] + b[1])))
