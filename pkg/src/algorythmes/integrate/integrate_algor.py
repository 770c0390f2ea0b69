from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.integrate import RK45, OdeSolution

from src.core.config import RunConfig
from src.core.errors import ParamodeError
from src.core.operators import LinearSystem, SampledField

logger = logging.getLogger(__name__)

InitFn = Union[Callable[[float], np.ndarray], np.ndarray, Sequence[float]]


class SliceDomainError(ParamodeError):
    """El punto inicial (t, x0) no está en la región."""
    pass


class SliceStatus(str, Enum):
    OK = "ok"
    LEFT_DOMAIN = "left_domain"
    BLOWUP = "blowup"

    @property
    def severity(self) -> int:
        return {"ok": 0, "left_domain": 1, "blowup": 2}[self.value]


@dataclass(frozen=True)
class Branch:
    """Integración en una dirección desde x0 hasta x_stop (o hasta x_end si se detuvo antes)."""
    x_stop: float
    x_end: float
    status: SliceStatus
    x_star: Optional[float] = None
    sol: Optional[OdeSolution] = field(default=None, repr=False)


@dataclass(frozen=True)
class SliceSolution:
    """Solución densa del PVI a lo largo de la recta t = cte, hacia ambos lados de x0."""
    t: float
    x0: float
    v0: np.ndarray
    left: Branch
    right: Branch
    log_domain: bool = False

    @property
    def status(self) -> SliceStatus:
        return max(self.left.status, self.right.status, key=lambda s: s.severity)

    @property
    def x_span(self) -> Tuple[float, float]:
        """Intervalo planificado (extremos de la rebanada menos márgenes)."""
        return self.left.x_stop, self.right.x_stop

    @property
    def reached(self) -> Tuple[float, float]:
        return self.left.x_end, self.right.x_end

    @property
    def blowup_points(self) -> List[float]:
        return [b.x_star for b in (self.left, self.right) if b.status is SliceStatus.BLOWUP]

    def _raw(self, x) -> np.ndarray:
        xs = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.full((xs.size, self.v0.size), np.nan)
        y0 = np.log(self.v0.ravel()) if self.log_domain else self.v0.ravel()
        out[xs == self.x0] = y0
        for branch, mask in (
            (self.left, (xs < self.x0) & (xs >= self.left.x_end)),
            (self.right, (xs > self.x0) & (xs <= self.right.x_end)),
        ):
            if branch.sol is not None and mask.any():
                out[mask] = np.asarray(branch.sol(xs[mask])).T.reshape(mask.sum(), -1)
        return out

    def log_values(self, x) -> np.ndarray:
        if not self.log_domain:
            raise ValueError("Solución calculada fuera del dominio logarítmico")
        return self._shape(self._raw(x), x)

    def __call__(self, x) -> np.ndarray:
        """Estado en x con forma (*x.shape, *v0.shape); NaN fuera del tramo alcanzado."""
        raw = self._raw(x)
        if self.log_domain:
            raw = np.exp(raw)
        return self._shape(raw, x)

    def _shape(self, raw: np.ndarray, x) -> np.ndarray:
        return raw.reshape(np.shape(x) + self.v0.shape)


@dataclass(frozen=True)
class SliceFailure:
    t: float
    reason: str


# =============================================================================
#  Una rebanada
# =============================================================================

def _integrate(fun: Callable, x0: float, y0: np.ndarray, x_stop: float, config: RunConfig,
               stop_status: SliceStatus) -> Branch:
    if x_stop == x0:
        return Branch(x_stop, x0, stop_status)

    # en el dominio logarítmico el estado es el exponente: se acota igual que v
    bound = config.blowup_bound
    solver = RK45(fun, x0, y0, x_stop, rtol=config.rtol, atol=config.atol, vectorized=False)
    xs = [x0]
    interpolants = []
    status: Optional[SliceStatus] = None
    x_star = None
    while status is None:
        solver.step()
        if solver.status == "failed":
            status, x_star = SliceStatus.BLOWUP, float(solver.t)
            break
        y = solver.y
        too_big = np.max(np.abs(y)) > bound
        if not np.all(np.isfinite(y)) or too_big:
            status, x_star = SliceStatus.BLOWUP, float(solver.t)
            break
        xs.append(solver.t)
        interpolants.append(solver.dense_output())
        if solver.status == "finished":
            status = stop_status

    sol = OdeSolution(np.array(xs), interpolants) if interpolants else None
    return Branch(x_stop, float(xs[-1]), status, x_star, sol)


def solve_slice(system: LinearSystem, t: float, x0: float, v0, target: Optional[Tuple[float, float]] = None,
                config: RunConfig = RunConfig(), log_domain: bool = False,
                homogeneous: bool = False) -> SliceSolution:
    """
    Integra v_x = A(t,x) v + F(t,x) desde (t, x0) con v(x0) = v0 hacia
    ambos extremos del intervalo de la rebanada que contiene x0.

    v0 puede ser un vector (p,) o una matriz (p, k) (k columnas a la vez).
    Cerca de extremos que no son borde del bbox se detiene a
    10 * min_step (estado left_domain). La explosión nunca lanza: se
    reporta como estado blowup con la abscisa x*.

    :raises SliceDomainError: si (t, x0) no está en la región.
    """
    t, x0 = float(t), float(x0)
    v0 = np.array(v0, dtype=float)
    if v0.ndim == 0:
        v0 = v0.reshape(1)
    if v0.shape[0] != system.p or v0.ndim > 2:
        raise SliceDomainError(f"Dato inicial de forma {v0.shape} incompatible con p={system.p}")

    slc = system.region.slice(t) if system.region.bbox[0] < t < system.region.bbox[1] else None
    interval = slc.containing(x0) if slc is not None else None
    if interval is None:
        raise SliceDomainError(f"(t, x0) = ({t}, {x0}) no está en la región")

    margin = config.boundary_margin
    lo = interval.lo if interval.lo_kind == "clip" else interval.lo + margin
    hi = interval.hi if interval.hi_kind == "clip" else interval.hi - margin
    lo_status = SliceStatus.OK if interval.lo_kind == "clip" else SliceStatus.LEFT_DOMAIN
    hi_status = SliceStatus.OK if interval.hi_kind == "clip" else SliceStatus.LEFT_DOMAIN
    if target is not None:
        if target[0] > lo:
            lo, lo_status = float(target[0]), SliceStatus.OK
        if target[1] < hi:
            hi, hi_status = float(target[1]), SliceStatus.OK
    lo, hi = min(lo, x0), max(hi, x0)

    if log_domain:
        if system.p != 1 or v0.size != 1 or not v0.ravel()[0] > 0:
            raise SliceDomainError("El dominio logarítmico requiere un sistema 1x1 con dato positivo")
        fun = system.rhs(t, log_domain=True)
        y0 = np.log(v0.ravel())
    else:
        ncols = v0.shape[1] if v0.ndim == 2 else None
        fun = system.rhs(t, ncols=ncols, homogeneous=homogeneous)
        y0 = v0.ravel()

    left = _integrate(fun, x0, y0, lo, config, lo_status)
    right = _integrate(fun, x0, y0, hi, config, hi_status)
    solution = SliceSolution(t, x0, v0, left, right, log_domain)
    if solution.status is SliceStatus.BLOWUP:
        logger.debug("Explosión en t=%g: x*=%s", t, solution.blowup_points)
    return solution


# =============================================================================
#  Barrido en el parámetro
# =============================================================================

@dataclass(frozen=True)
class ParamSolution:
    """Soluciones por rebanada a lo largo de una sección θ(t); None donde la rebanada falló."""
    ts: np.ndarray
    slices: Tuple[Optional[SliceSolution], ...]
    failures: Tuple[SliceFailure, ...] = ()
    tag: str = ""

    @property
    def state_shape(self) -> Tuple[int, ...]:
        for s in self.slices:
            if s is not None:
                return s.v0.shape
        return (1,)

    @property
    def blowups(self) -> List[float]:
        return [s.t for s in self.slices if s is not None and s.status is SliceStatus.BLOWUP]

    def sample(self, nx: int) -> SampledField:
        """nx nodos equiespaciados sobre el intervalo planificado de cada rebanada."""
        nt = len(self.ts)
        x = np.full((nt, nx), np.nan)
        values = np.full((nt, nx) + self.state_shape, np.nan)
        for i, s in enumerate(self.slices):
            if s is None:
                continue
            lo, hi = s.x_span
            x[i] = np.linspace(lo, hi, nx)
            values[i] = s(x[i])
        return SampledField(self.ts.copy(), x, values)

    def at_section(self) -> np.ndarray:
        """Estado en x = θ(t) para cada muestra (el dato inicial)."""
        out = np.full((len(self.ts),) + self.state_shape, np.nan)
        for i, s in enumerate(self.slices):
            if s is not None:
                out[i] = s.v0
        return out

    def evaluate(self, x_fn: Callable[[float], float]) -> np.ndarray:
        """Estado en x = x_fn(t) para cada muestra."""
        out = np.full((len(self.ts),) + self.state_shape, np.nan)
        for i, s in enumerate(self.slices):
            if s is not None:
                out[i] = s(float(x_fn(float(s.t))))
        return out


def interior_ts(t_range: Tuple[float, float], n: int) -> np.ndarray:
    """n muestras centradas en celdas de (t0, t1): nunca tocan los extremos."""
    t0, t1 = t_range
    return t0 + (t1 - t0) * (np.arange(n) + 0.5) / n


def _init_at(init: InitFn, t: float) -> np.ndarray:
    if callable(init):
        return np.asarray(init(t), dtype=float)
    return np.asarray(init, dtype=float)


def sweep(system: LinearSystem, theta: Callable[[float], float], init: InitFn, t_samples: Sequence[float],
          config: RunConfig = RunConfig(), log_domain: bool = False, homogeneous: bool = False,
          tag: str = "") -> ParamSolution:
    """
    Resuelve una rebanada por cada t partiendo de x = θ(t) con v = init(t).
    Las rebanadas que fallan se registran sin abortar el barrido.
    """
    ts = np.asarray(t_samples, dtype=float)
    slices: List[Optional[SliceSolution]] = []
    failures: List[SliceFailure] = []
    for t in ts:
        try:
            slices.append(solve_slice(system, float(t), float(theta(float(t))), _init_at(init, float(t)),
                                      config=config, log_domain=log_domain, homogeneous=homogeneous))
        except SliceDomainError as e:
            slices.append(None)
            failures.append(SliceFailure(float(t), str(e)))
            logger.warning("Rebanada t=%g omitida: %s", t, e)
    solution = ParamSolution(ts, tuple(slices), tuple(failures), tag)
    logger.info("Barrido %s: %d muestras, %d explosiones, %d fallos",
                tag or "", len(ts), len(solution.blowups), len(failures))
    return solution
