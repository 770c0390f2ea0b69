from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence

import numpy as np

from src.algorythmes.integrate.integrate_algor import ParamSolution
from src.algorythmes.systems.systems_algor import (
    FundamentalityVerdict,
    FundamentalMatrix,
    ZetaSamples,
    build_fundamental_matrix,
    cumulative_quad,
    decide_verdict,
    expand_system,
    find_zero,
)
from src.algorythmes.topology.topology_algor import Classification, SectionFn, smooth_section
from src.core.config import RunConfig
from src.core.operators import (
    SampledField,
    ScalarOperator,
    check_leading_coefficient,
    companion,
    liouville_integrand,
)
from src.core.region import Region

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FundamentalSet:
    """
    φ^1..φ^p como columnas de la matriz fundamental del sistema compañero:
    Φ[s', s] = φ^s_{s'} (derivadas en x hasta p-1 llevadas en el estado).
    """
    operator: ScalarOperator
    matrix: FundamentalMatrix

    @property
    def p(self) -> int:
        return self.operator.p

    @property
    def theta(self) -> SectionFn:
        return self.matrix.theta

    @property
    def ts(self) -> np.ndarray:
        return self.matrix.solution.ts

    @property
    def region(self) -> Region:
        return self.operator.region

    def sample(self, nx: int) -> SampledField:
        return self.matrix.sample(nx)

    def solutions(self, nx: int) -> np.ndarray:
        """φ^s(t, x) con forma (nt, nx, p)."""
        return self.sample(nx).values[..., 0, :]


@dataclass(frozen=True)
class WronskianField:
    t: np.ndarray
    x: np.ndarray
    sampled: np.ndarray
    predicted: np.ndarray
    max_deviation: float
    section_deviation: float
    quad_error: float


def build_fundamental(op: ScalarOperator, piece: Optional[Region] = None, theta: Optional[SectionFn] = None,
                      t_samples: Optional[Sequence[float]] = None, config: RunConfig = RunConfig(),
                      initial: Optional[Callable[[float], np.ndarray]] = None,
                      log_domain: bool = False, check_leading: bool = True) -> FundamentalSet:
    """
    p barridos del sistema compañero con dato δ_{ss'} en θ(t) (o las columnas
    de initial(t)). La región (o pieza) debe ser x-simple.
    """
    region = piece if piece is not None else op.region
    op = op.on(region)
    if check_leading:
        check_leading_coefficient(op)
    if theta is None:
        theta = smooth_section(region)
    matrix = build_fundamental_matrix(companion(op), theta, t_samples, config, initial, log_domain)
    logger.info("Conjunto fundamental sobre '%s': p=%d, %d muestras", region.name, op.p, len(matrix.solution.ts))
    return FundamentalSet(op, matrix)


def build_componentwise(op: ScalarOperator, classification: Classification,
                        config: RunConfig = RunConfig()) -> List[FundamentalSet]:
    """Un conjunto por región x-simple: la región entera si lo es, o cada pieza."""
    if classification.x_simple:
        return [build_fundamental(op, config=config)]
    return [build_fundamental(op, piece.region, config=config) for piece in classification.pieces]


def wronskian(fset: FundamentalSet, config: RunConfig = RunConfig()) -> WronskianField:
    """
    W = det(φ^s_{s'-1}) en la malla y la predicción de Liouville-Ostrogradski
    W(θ) exp(-∫_θ^x g^{p-1}/g^p), comparadas en escala logarítmica.
    """
    field, det = fset.matrix.det_field(config.nx)
    integrand = liouville_integrand(fset.operator)
    predicted = np.full(det.shape, np.nan)
    deviation = np.full(det.shape, np.nan)
    section_dev = 0.0
    quad_error = 0.0
    for i, t in enumerate(field.t):
        s = fset.matrix.solution.slices[i]
        if s is None:
            continue
        t = float(t)
        w0 = float(np.linalg.det(s.v0))
        section_dev = max(section_dev, abs(float(np.linalg.det(s(s.x0))) - w0))
        log_growth, err = cumulative_quad(lambda x: integrand.scalar(t, x), s.x0, field.x[i], config.quad_tol)
        quad_error += err
        predicted[i] = w0 * np.exp(log_growth)
        with np.errstate(invalid="ignore", divide="ignore"):
            same_sign = np.sign(det[i]) == np.sign(w0)
            gap = np.log(np.abs(det[i])) - (np.log(abs(w0)) + log_growth)
            deviation[i] = np.where(same_sign, np.abs(np.expm1(gap)), np.inf)
    finite = np.isfinite(det) & np.isfinite(predicted)
    max_dev = float(np.max(deviation[finite])) if finite.any() else float("nan")
    return WronskianField(field.t, field.x, det, predicted, max_dev, section_dev, quad_error)


def is_fundamental(fset: FundamentalSet, classification: Classification,
                   config: RunConfig = RunConfig()) -> FundamentalityVerdict:
    field, det = fset.matrix.det_field(config.nx)
    with np.errstate(invalid="ignore"):
        scale = np.prod(np.linalg.norm(field.values, axis=-2), axis=-1)
    zero = find_zero(det, scale, field.t, field.x, config.zero_tol)
    return decide_verdict(zero, classification, "Wronskiano")


def expand(u: ParamSolution, fset: FundamentalSet) -> ZetaSamples:
    """ζ^s(t) con u = ζ^s φ^s; u lleva (u, u_1, ..., u_{p-1}) en su estado."""
    return expand_system(u, fset.matrix)


def reconstruct(fset: FundamentalSet, zeta: ZetaSamples, nx: int) -> SampledField:
    """Σ ζ^s(t) φ^s en la malla, con sus derivadas: forma (nt, nx, p)."""
    field = fset.sample(nx)
    z = zeta(field.t)
    values = np.einsum("tnij,jt->tni", field.values, z)
    return SampledField(field.t, field.x, values)
