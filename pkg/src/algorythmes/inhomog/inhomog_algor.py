"""
Soluciones particular y general de P u = f sobre regiones x-simples
(variación de constantes) y veredicto de resolubilidad por componente.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
from scipy.integrate import quad_vec

from src.algorythmes.fundamental.fundamental_algor import FundamentalSet, reconstruct
from src.algorythmes.integrate.integrate_algor import ParamSolution, sweep
from src.algorythmes.pathology.pathology_algor import (
    PathologyReport,
    gen_inhom_counterexample,
    verify_no_global_solution,
)
from src.algorythmes.systems.systems_algor import ZetaSamples, require_x_simple
from src.algorythmes.topology.topology_algor import NonSimplicityWitness, classify
from src.core.config import RunConfig
from src.core.errors import ParamodeError
from src.core.operators import OperatorError, SampledField, ScalarOperator, companion
from src.core.region import Region

logger = logging.getLogger(__name__)


class GridMismatchError(ParamodeError):
    """Particular, conjunto fundamental y ζ no comparten la malla."""
    pass


def _minors(phi: np.ndarray) -> np.ndarray:
    """
    Sub-Wronskianos: det de las filas 0..p-2 de Φ sin la columna s.
    phi tiene forma (..., p, p); devuelve (..., p).
    """
    p = phi.shape[-1]
    if p == 1:
        return np.ones(phi.shape[:-2] + (1,))
    rows = phi[..., : p - 1, :]
    out = np.empty(phi.shape[:-2] + (p,))
    for s in range(p):
        out[..., s] = np.linalg.det(np.delete(rows, s, axis=-1))
    return out


def integrands(op: ScalarOperator, phi: np.ndarray, t, x) -> np.ndarray:
    """ψ^s = (-1)^{p-s} (f/g^p) · sub-Wronskiano_s / W, s = 1..p (último eje)."""
    p = op.p
    with np.errstate(all="ignore"):
        ratio = np.asarray(op.f(t, x) / op.leading(t, x)) / np.linalg.det(phi)
        signs = np.array([(-1.0) ** (p - s) for s in range(1, p + 1)])
        return signs * _minors(phi) * ratio[..., None]


@dataclass(frozen=True)
class ParticularSolution:
    """
    ψ con dato nulo en θ(t) (estado (ψ, ψ_1, ..., ψ_{p-1})), los integrandos
    ψ^s en la malla y el error de la verificación por cuadratura literal.
    """
    operator: ScalarOperator
    fset: FundamentalSet
    solution: ParamSolution
    psi_s: SampledField
    cross_check_error: float
    quad_error: float

    def sample(self, nx: int) -> SampledField:
        return self.solution.sample(nx)


def particular(op: ScalarOperator, fset: FundamentalSet, config: RunConfig = RunConfig(),
               check_samples: int = 5, check_nodes: int = 9) -> ParticularSolution:
    """
    Integra el sistema compañero con F = (0, ..., 0, f/g^p) y dato nulo en
    θ(t). En unas pocas muestras compara con
    ψ = Σ_s φ^s ∫_θ^x ψ^s por cuadratura adaptativa.

    :raises NotXSimpleError: la región (o pieza) no es x-simple.
    """
    if op.f is None:
        raise OperatorError("La solución particular necesita un lado derecho f")
    region = fset.region
    require_x_simple(region, "Ecuación inhomogénea")
    op = op.on(region)
    p = op.p
    ts = fset.ts
    solution = sweep(companion(op), fset.theta, np.zeros(p), ts, config, tag=region.name)

    basis = fset.sample(config.nx)
    grid_t = np.broadcast_to(basis.t[:, None], basis.x.shape)
    psi_s = SampledField(basis.t, basis.x, integrands(op, basis.values, grid_t, basis.x))

    worst, quad_err = 0.0, 0.0
    picks = np.unique(np.linspace(0, len(ts) - 1, min(check_samples, len(ts))).round().astype(int))
    for i in picks:
        sv, sp = solution.slices[i], fset.matrix.solution.slices[i]
        if sv is None or sp is None:
            continue
        t = float(ts[i])
        lo = max(sv.reached[0], sp.reached[0])
        hi = min(sv.reached[1], sp.reached[1])
        if not hi > lo:
            continue

        def integrand(s: float) -> np.ndarray:
            return integrands(op, sp(s), t, s)

        for x in np.linspace(lo, hi, check_nodes):
            coeffs, err = quad_vec(integrand, sp.x0, x, epsabs=config.quad_tol, epsrel=config.quad_tol)
            quad_err += float(err)
            literal = sp(x) @ coeffs
            diff = np.max(np.abs(literal - sv(x)))
            if math.isfinite(diff):
                worst = max(worst, float(diff))
    logger.info("Solución particular sobre '%s': verificación literal %.3g", region.name, worst)
    return ParticularSolution(op, fset, solution, psi_s, worst, quad_err)


def general(op: ScalarOperator, fset: FundamentalSet, zeta: ZetaSamples, nx: Optional[int] = None,
            psi: Optional[ParticularSolution] = None, config: RunConfig = RunConfig()) -> SampledField:
    """
    u = ψ + Σ ζ^s φ^s en la malla compartida; forma (nt, nx, p).

    :raises GridMismatchError: si ψ y φ no comparten la malla o ζ no cubre las muestras en t.
    """
    nx = nx if nx is not None else config.nx
    if zeta.p != fset.p:
        raise GridMismatchError(f"ζ tiene {zeta.p} componentes, el conjunto fundamental {fset.p}")
    ts = fset.ts
    if zeta.t.size > 1 and (ts.min() < zeta.t.min() - 1e-12 or ts.max() > zeta.t.max() + 1e-12):
        raise GridMismatchError(
            f"ζ está muestreada en [{zeta.t.min():g}, {zeta.t.max():g}], se necesita [{ts.min():g}, {ts.max():g}]"
        )
    if psi is None:
        psi = particular(op, fset, config)
    psi_field = psi.sample(nx)
    combo = reconstruct(fset, zeta, nx)
    if not psi_field.same_grid(combo):
        raise GridMismatchError("La solución particular y el conjunto fundamental no comparten la malla")
    return SampledField(combo.t, combo.x, psi_field.values + combo.values)


# =============================================================================
#  Resolubilidad
# =============================================================================

@dataclass(frozen=True)
class ComponentSolvability:
    label: int
    x_simple: bool
    t_range: Tuple[float, float]
    witness: Optional[NonSimplicityWitness] = None
    instance: Optional[ScalarOperator] = None
    defect: Optional[PathologyReport] = None

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "x_simple": self.x_simple,
            "t_range": list(self.t_range),
            "witness": self.witness.to_dict() if self.witness is not None else None,
            "instance": self.instance.provenance.to_dict() if self.instance is not None else None,
            "defect": self.defect.to_dict() if self.defect is not None else None,
        }


@dataclass(frozen=True)
class SolvabilityVerdict:
    solvable: bool
    components: Tuple[ComponentSolvability, ...]
    explanation: str

    def to_dict(self) -> dict:
        return {
            "solvable": self.solvable,
            "explanation": self.explanation,
            "components": [c.to_dict() for c in self.components],
        }


def solvability(region: Region, config: RunConfig = RunConfig(), defect_samples: int = 10) -> SolvabilityVerdict:
    """
    P u = f tiene solución continua en toda la región para todo f si y solo
    si cada componente conexa es x-simple. La componente del testigo lleva
    la instancia u_x = 1/((x-x1)^2 + (t-t0)^2) y su defecto medido.
    """
    classification = classify(region)
    w = classification.witness
    entries: List[ComponentSolvability] = []
    for comp in classification.components:
        if comp.x_simple:
            entries.append(ComponentSolvability(comp.label, True, comp.t_range))
            continue
        if w is None or w.label != comp.label:
            entries.append(ComponentSolvability(comp.label, False, comp.t_range))
            continue
        instance = gen_inhom_counterexample(w, region)
        report = verify_no_global_solution(instance, w, n=defect_samples, config=config)
        entries.append(ComponentSolvability(comp.label, False, comp.t_range, w, instance, report))

    solvable = all(e.x_simple for e in entries)
    if solvable:
        explanation = "Toda componente conexa es x-simple: existe solución continua para cualquier f continuo"
    else:
        bad = [e.label for e in entries if not e.x_simple]
        explanation = (f"Las componentes {bad} no son x-simples: hay lados derechos continuos "
                       "sin solución continua en toda la región")
    logger.info("Resolubilidad de '%s': %s", region.name, solvable)
    return SolvabilityVerdict(solvable, tuple(entries), explanation)
