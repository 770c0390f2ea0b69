from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Iterable, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import quad, quad_vec
from scipy.interpolate import CubicSpline
from scipy.linalg import lu_factor, lu_solve

from src.algorythmes.integrate.integrate_algor import ParamSolution, interior_ts, sweep
from src.algorythmes.topology.topology_algor import Classification, NotXSimpleError, SectionFn, scan
from src.core.config import RunConfig
from src.core.operators import LinearSystem, SampledField

logger = logging.getLogger(__name__)


# =============================================================================
#  Veredictos (compartidos con los conjuntos fundamentales escalares)
# =============================================================================

class Verdict(str, Enum):
    FUNDAMENTAL = "fundamental"
    NONVANISHING_ONLY = "nonvanishing_only"
    NOT_FUNDAMENTAL = "not_fundamental"


@dataclass(frozen=True)
class FundamentalityVerdict:
    kind: Verdict
    explanation: str
    zero_at: Optional[Tuple[float, float]] = None

    def to_dict(self) -> dict:
        return {
            "verdict": self.kind.value,
            "explanation": self.explanation,
            "zero_at": list(self.zero_at) if self.zero_at is not None else None,
        }


def find_zero(det: np.ndarray, scale: np.ndarray, t: np.ndarray, x: np.ndarray,
              zero_tol: float) -> Optional[Tuple[float, float]]:
    """
    Primer nodo donde |det| <= zero_tol * cota de Hadamard, o donde el
    signo cambia entre muestras consecutivas de una rebanada.
    """
    with np.errstate(invalid="ignore"):
        small = np.isfinite(det) & (np.abs(det) <= zero_tol * scale)
    if small.any():
        i, j = np.argwhere(small)[0]
        return float(t[i]), float(x[i, j])
    for i in range(det.shape[0]):
        row = det[i]
        finite = np.flatnonzero(np.isfinite(row))
        signs = np.sign(row[finite])
        flips = np.flatnonzero(signs[1:] != signs[:-1])
        if flips.size:
            j = finite[flips[0]]
            return float(t[i]), float(x[i, j])
    return None


def _overlapping(ranges: Iterable[Tuple[float, float]]) -> bool:
    ranges = sorted(ranges)
    for (a0, a1), (b0, b1) in zip(ranges, ranges[1:]):
        if b0 < a1:
            return True
    return False


def decide_verdict(zero_at: Optional[Tuple[float, float]], classification: Classification,
                   quantity: str) -> FundamentalityVerdict:
    if zero_at is not None:
        return FundamentalityVerdict(
            Verdict.NOT_FUNDAMENTAL, f"El {quantity} se anula (o cambia de signo) cerca de {zero_at}", zero_at
        )
    if classification.x_simple:
        return FundamentalityVerdict(
            Verdict.FUNDAMENTAL,
            f"El {quantity} no se anula y toda rebanada de la región es un único intervalo",
        )
    ranges = [c.t_range for c in classification.components if c.x_simple]
    ranges += [p.t_range for p in classification.pieces]
    if len(ranges) >= 2 and _overlapping(ranges):
        return FundamentalityVerdict(
            Verdict.NONVANISHING_ONLY,
            f"El {quantity} no se anula, pero la región tiene varias componentes o piezas x-simples "
            "con proyecciones en t que se solapan: no admite un sistema fundamental global",
        )
    return FundamentalityVerdict(
        Verdict.NOT_FUNDAMENTAL,
        f"El {quantity} no se anula en las muestras, pero una componente conexa no es x-simple: "
        "ningún operador con coeficientes arbitrarios admite ahí un sistema fundamental",
    )


# =============================================================================
#  Coeficientes ζ muestreados
# =============================================================================

class ZetaSamples:
    """ζ^1..ζ^p muestreadas en t e interpoladas con splines cúbicos."""

    def __init__(self, t: Sequence[float], values: np.ndarray):
        self.t = np.asarray(t, dtype=float)
        self.values = np.atleast_2d(np.asarray(values, dtype=float))
        if self.values.shape[1] != self.t.size:
            raise ValueError("ζ necesita una fila de len(t) valores por cada componente")
        self._spline = CubicSpline(self.t, self.values, axis=1) if self.t.size > 1 else None

    @property
    def p(self) -> int:
        return self.values.shape[0]

    def __call__(self, t) -> np.ndarray:
        if self._spline is None:
            return self.values[:, 0] if np.ndim(t) == 0 else np.repeat(self.values, np.size(t), axis=1)
        return self._spline(t)


# =============================================================================
#  Cuadratura acumulada desde θ
# =============================================================================

def cumulative_quad(fn: Callable[[float], float], theta: float, xs: np.ndarray,
                    tol: float) -> Tuple[np.ndarray, float]:
    """
    ∫_θ^{x_j} fn para cada nodo, con quad adaptativa por segmento entre
    nodos consecutivos. Devuelve (integrales, estimación de error sumada).
    """
    xs = np.asarray(xs, dtype=float)
    finite = np.isfinite(xs)
    out = np.full(xs.shape, np.nan)
    nodes = np.unique(np.concatenate([xs[finite], [theta]]))
    k0 = int(np.searchsorted(nodes, theta))
    acc = {float(theta): 0.0}
    error = 0.0
    total = 0.0
    for k in range(k0, len(nodes) - 1):
        val, err = quad(fn, nodes[k], nodes[k + 1], epsabs=tol, epsrel=tol, limit=200)
        total += val
        error += err
        acc[float(nodes[k + 1])] = total
    total = 0.0
    for k in range(k0, 0, -1):
        val, err = quad(fn, nodes[k], nodes[k - 1], epsabs=tol, epsrel=tol, limit=200)
        total += val
        error += err
        acc[float(nodes[k - 1])] = total
    out[finite] = [acc[float(v)] for v in xs[finite]]
    return out, error


# =============================================================================
#  Matriz fundamental
# =============================================================================

@dataclass(frozen=True)
class FundamentalMatrix:
    """Φ con Φ_x = A Φ por rebanada, Φ(t, θ(t)) = identidad (o el dato dado)."""
    system: LinearSystem
    theta: SectionFn
    solution: ParamSolution

    @property
    def p(self) -> int:
        return self.system.p

    def sample(self, nx: int) -> SampledField:
        return self.solution.sample(nx)

    def det_field(self, nx: int) -> Tuple[SampledField, np.ndarray]:
        field = self.sample(nx)
        with np.errstate(invalid="ignore"):
            det = np.linalg.det(field.values)
        return field, det


def build_fundamental_matrix(system: LinearSystem, theta: SectionFn, t_samples: Optional[Sequence[float]] = None,
                             config: RunConfig = RunConfig(),
                             initial: Optional[Callable[[float], np.ndarray]] = None,
                             log_domain: bool = False) -> FundamentalMatrix:
    """
    Columna s: solución de Φ_x = A Φ con dato e_s en θ(t); las p columnas
    se integran en una sola pasada con estado matricial.
    """
    if t_samples is None:
        t_samples = interior_ts(system.region.t_extent(), config.nt)
    p = system.p
    init = initial if initial is not None else np.eye(p)
    solution = sweep(system.homogeneous(), theta, init, t_samples, config,
                     log_domain=log_domain, tag=system.region.name)
    return FundamentalMatrix(system, theta, solution)


def is_fundamental_matrix(phi: FundamentalMatrix, classification: Classification,
                          config: RunConfig = RunConfig()) -> FundamentalityVerdict:
    field, det = phi.det_field(config.nx)
    with np.errstate(invalid="ignore"):
        scale = np.prod(np.linalg.norm(field.values, axis=-2), axis=-1)
    zero = find_zero(det, scale, field.t, field.x, config.zero_tol)
    return decide_verdict(zero, classification, "determinante")


def abel_deviation(phi: FundamentalMatrix, config: RunConfig = RunConfig()) -> float:
    """
    Máxima desviación relativa entre det Φ muestreado y
    det Φ(θ) · exp(∫_θ^x tr A).
    """
    field, det = phi.det_field(config.nx)
    worst = 0.0
    for i, t in enumerate(field.t):
        s = phi.solution.slices[i]
        if s is None:
            continue
        t = float(t)
        log_pred, _ = cumulative_quad(lambda x: phi.system.trace(t, x), s.x0, field.x[i], config.quad_tol)
        pred = float(np.linalg.det(s.v0)) * np.exp(log_pred)
        with np.errstate(invalid="ignore", divide="ignore"):
            rel = np.abs(det[i] - pred) / np.abs(pred)
        rel = rel[np.isfinite(rel)]
        if rel.size:
            worst = max(worst, float(rel.max()))
    return worst


def expand_system(v: ParamSolution, phi: FundamentalMatrix) -> ZetaSamples:
    """ζ(t) resolviendo Φ(t, θ(t)) ζ = v(t, θ(t)) por muestra."""
    if len(v.ts) != len(phi.solution.ts) or not np.allclose(v.ts, phi.solution.ts, rtol=0, atol=1e-12):
        raise ValueError("v y Φ deben compartir las muestras en t")
    zeta = np.full((phi.p, len(v.ts)), np.nan)
    for i, (sv, sp) in enumerate(zip(v.slices, phi.solution.slices)):
        if sv is None or sp is None:
            continue
        zeta[:, i] = np.linalg.solve(sp(sv.x0), sv(sv.x0).reshape(phi.p))
    keep = np.all(np.isfinite(zeta), axis=0)
    return ZetaSamples(v.ts[keep], zeta[:, keep])


# =============================================================================
#  Sistema inhomogéneo
# =============================================================================

@dataclass(frozen=True)
class SystemParticular:
    solution: ParamSolution
    cross_check_error: float
    quad_error: float


def require_x_simple(region, what: str) -> None:
    if scan(region).max_count > 1:
        raise NotXSimpleError(
            f"{what}: la región '{region.name}' no es x-simple; la ecuación puede no tener solución "
            "continua en toda la región (resolver por piezas)"
        )


def solve_system_inhom(system: LinearSystem, phi: FundamentalMatrix, config: RunConfig = RunConfig(),
                       check_samples: int = 5, check_nodes: int = 9,
                       check_region: bool = True) -> SystemParticular:
    """
    Solución particular con dato nulo en θ(t), integrando v_x = A v + F.
    Verificación en muestras gruesas con v = Φ ∫_θ^x Φ^{-1} F (LU con pivoteo).
    """
    if check_region:
        require_x_simple(system.region, "Sistema inhomogéneo")
    ts = phi.solution.ts
    solution = sweep(system, phi.theta, np.zeros(system.p), ts, config, tag=system.region.name)

    worst, quad_err = 0.0, 0.0
    picks = np.unique(np.linspace(0, len(ts) - 1, min(check_samples, len(ts))).round().astype(int))
    for i in picks:
        sv, sp = solution.slices[i], phi.solution.slices[i]
        if sv is None or sp is None:
            continue
        t = float(ts[i])
        lo = max(sv.reached[0], sp.reached[0])
        hi = min(sv.reached[1], sp.reached[1])
        if not hi > lo:
            continue

        def integrand(s: float) -> np.ndarray:
            return lu_solve(lu_factor(sp(s)), system.forcing(t, s))

        for x in np.linspace(lo, hi, check_nodes):
            integral, err = quad_vec(integrand, sp.x0, x, epsabs=config.quad_tol, epsrel=config.quad_tol)
            literal = sp(x) @ integral
            quad_err += float(err)
            diff = np.max(np.abs(literal - sv(x)))
            if math.isfinite(diff):
                worst = max(worst, float(diff))
    logger.info("Sistema inhomogéneo: error de verificación %.3g", worst)
    return SystemParticular(solution, worst, quad_err)
