"""
Generadores de contraejemplos sobre regiones no x-simples y sus
verificaciones numéricas.

Todos los coeficientes se construyen como texto fuente (floats con repr)
y luego se analizan, de modo que un problema generado se guarda y se
vuelve a leer bit a bit.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from src.algorythmes.integrate.integrate_algor import SliceDomainError, SliceStatus, solve_slice
from src.algorythmes.systems.systems_algor import cumulative_quad
from src.algorythmes.topology.topology_algor import NonSimplicityWitness
from src.core import expr as ex
from src.core.config import RunConfig
from src.core.errors import ParamodeError
from src.core.expr import Expr, parse
from src.core.operators import LinearSystem, Provenance, ScalarOperator, companion, liouville_integrand
from src.core.region import RectShape, Region, punctured_square

logger = logging.getLogger(__name__)


class PathologyError(ParamodeError):
    """Operador o testigo incompatible con la construcción pedida."""
    pass


class TruncationError(PathologyError):
    """La profundidad de truncamiento K no cubre la línea pedida."""
    pass


class ReportKind(str, Enum):
    WRONSKIAN_VANISHING = "wronskian_vanishing"
    NO_GLOBAL_SOLUTION = "no_global_solution"
    ONLY_ZERO_SOLUTION = "only_zero_solution"
    NONSOLVABLE_RHS = "nonsolvable_rhs"


@dataclass(frozen=True)
class PathologyReport:
    kind: ReportKind
    passed: bool
    measurements: Dict[str, Any]
    notes: Tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "pass": self.passed,
            "measurements": self.measurements,
            "notes": list(self.notes),
        }


def _kernel(weight: float, tp: float, xp: float) -> str:
    """weight / ((x - xp)^2 + (t - tp)^2) como texto fuente."""
    return f"{weight!r}/((x - {xp!r})^2 + (t - {tp!r})^2)"


def _one_sided_log_integral(system: LinearSystem, t: float, x_from: float, x_to: float,
                            config: RunConfig) -> float:
    """∫_{x_from}^{x_to} a(t, x) dx integrando w' = a en el dominio logarítmico."""
    lo, hi = min(x_from, x_to), max(x_from, x_to)
    sol = solve_slice(system, t, x_from, [1.0], target=(lo, hi), config=config, log_domain=True)
    if sol.status is SliceStatus.BLOWUP:
        return math.inf
    return float(sol.log_values(x_to).ravel()[0])


# =============================================================================
#  Contraejemplo homogéneo: Wronskiano forzado a anularse
# =============================================================================

def gen_hom_counterexample(w: NonSimplicityWitness, region: Region, p: int = 1, c: float = 1.0) -> ScalarOperator:
    """
    g^p = 1, g^{p-1} = -c / ((x - x1)^2 + (t - t0)^2), resto nulo.
    Con p = 1 y el testigo en el origen es u_x = u/(x^2 + t^2).
    """
    if p < 1 or not c > 0:
        raise PathologyError("Se necesita p >= 1 y c > 0")
    zero = ex.const(0.0)
    singular = parse("-" + _kernel(float(c), w.t0, w.x1))
    g = [zero] * (p + 1)
    g[p] = ex.const(1.0)
    g[p - 1] = singular
    provenance = Provenance(
        kind="hom",
        singular_points=((w.t0, w.x1, float(c)),),
        approach="right" if w.reflected_t else "left",
        window=w.x_window,
        witness=w.to_dict(),
    )
    return ScalarOperator(p, tuple(g), region, None, provenance)


def predicted_G(w: NonSimplicityWitness, c: float, t: float) -> float:
    """G(t) = -c ∫_{x1-eps}^{x2+eps} dx / ((x - x1)^2 + d^2), d = |t - t0|."""
    d = abs(t - w.t0)
    return -(c / d) * (math.atan((w.x2 - w.x1 + w.eps) / d) + math.atan(w.eps / d))


def wronskian_decay(op: ScalarOperator, w: NonSimplicityWitness, n: int = 10,
                    config: RunConfig = RunConfig()) -> PathologyReport:
    """
    |W(t, x1-eps)| con W normalizado a 1 en x2+eps, para t a distancia
    d = eps 2^-k de t0 (k = 0..n-1). En p = 1 se integra en el dominio
    logarítmico; en p >= 2 por la traza más el determinante directo
    mientras sea representable.
    """
    x_near, x_far = w.x_window
    ds = [w.eps * 2.0 ** -k for k in range(n)]
    ts = [w.approach(d) for d in ds]
    integrand = liouville_integrand(op)
    system = companion(op).homogeneous()
    G: List[float] = []
    direct: List[Optional[float]] = []
    for t in ts:
        if op.p == 1:
            G.append(_one_sided_log_integral(system, t, x_far, x_near, config))
            direct.append(None)
            continue
        log_w, _ = cumulative_quad(lambda x: integrand.scalar(t, x), x_far, np.array([x_near]), config.quad_tol)
        G.append(float(log_w[0]))
        try:
            sol = solve_slice(system, t, x_far, np.eye(op.p), target=(x_near, x_far), config=config)
            det = float(np.linalg.det(sol(x_near)))
            direct.append(det if math.isfinite(det) else None)
        except SliceDomainError:
            direct.append(None)

    G_arr = np.array(G)
    W = np.exp(G_arr)
    decreasing = bool(np.all(np.diff(G_arr) < 0))
    below = bool(W[-1] < 1e-8)
    measurements: Dict[str, Any] = {
        "t": ts,
        "d": ds,
        "G": G,
        "W_near": W.tolist(),
        "W_direct": direct,
    }
    notes = []
    passed = decreasing and below
    prov = op.provenance
    if prov is not None and prov.kind == "hom" and prov.singular_points:
        c = prov.singular_points[0][2]
        pred = [predicted_G(w, c, t) for t in ts]
        rel = max(abs(g - q) / abs(q) for g, q in zip(G, pred))
        measurements["G_predicted"] = pred
        measurements["G_relative_error"] = rel
        passed = passed and rel <= 1e-4
    if not decreasing:
        notes.append("G(t) no decrece estrictamente al acercarse a t0")
    if not below:
        notes.append("|W(t, x1-eps)| no baja de 1e-8 en la última muestra")
    return PathologyReport(ReportKind.WRONSKIAN_VANISHING, passed, measurements, tuple(notes))


# =============================================================================
#  Contraejemplo inhomogéneo: sin solución global continua
# =============================================================================

def gen_inhom_counterexample(w: NonSimplicityWitness, region: Region) -> ScalarOperator:
    """u_x = 1 / ((x - x1)^2 + (t - t0)^2)."""
    f = parse(_kernel(1.0, w.t0, w.x1))
    provenance = Provenance(
        kind="inhom",
        singular_points=((w.t0, w.x1, 1.0),),
        approach="right" if w.reflected_t else "left",
        window=w.x_window,
        witness=w.to_dict(),
    )
    return ScalarOperator(1, (ex.const(0.0), ex.const(1.0)), region, f, provenance)


def continuation_defect(op: ScalarOperator, t: float, x_lo: float, x_hi: float,
                        config: RunConfig = RunConfig()) -> float:
    """Δ(t) = u(t, x_hi) - u(t, x_lo) para la solución con u(t, x_lo) = 0."""
    sol = solve_slice(companion(op), t, x_lo, np.zeros(op.p), target=(x_lo, x_hi), config=config)
    return float(np.asarray(sol(x_hi)).ravel()[0])


def verify_no_global_solution(op: ScalarOperator, w: NonSimplicityWitness, n: int = 10,
                              delta: Optional[float] = None,
                              config: RunConfig = RunConfig()) -> PathologyReport:
    """
    Defecto Δ(t) a través de la ventana [x1-eps, x2+eps] al acercarse a t0.
    Para la instancia canónica se compara con la forma cerrada; con delta
    (cota inferior del lado derecho cerca de la perforación) se comprueba
    Δ >= delta (pi/d - (2/d) atan(d/eps)).
    """
    x_lo, x_hi = w.x_window
    ds = [w.eps * 2.0 ** -k for k in range(n)]
    ts = [w.approach(d) for d in ds]
    defects = [continuation_defect(op, t, x_lo, x_hi, config) for t in ts]
    growing = bool(np.all(np.diff(defects) > 0))
    measurements: Dict[str, Any] = {"t": ts, "d": ds, "defect": defects,
                                    "d_times_defect": [d * v for d, v in zip(ds, defects)]}
    passed = growing
    notes = [] if growing else ["Δ(t) no crece al acercarse a t0"]

    prov = op.provenance
    if prov is not None and prov.kind == "inhom":
        closed = [-predicted_G(w, 1.0, t) for t in ts]
        rel = max(abs(v - q) / q for v, q in zip(defects, closed))
        measurements["closed_form"] = closed
        measurements["relative_error"] = rel
        passed = passed and rel <= 1e-6
    if delta is not None:
        bound = [delta * (math.pi / d - (2.0 / d) * math.atan(d / w.eps)) for d in ds]
        ok = all(v >= b * (1 - 1e-9) for v, b in zip(defects, bound))
        measurements["lower_bound"] = bound
        passed = passed and ok
        if not ok:
            notes.append("Δ(t) por debajo de la cota inferior de la familia")
    return PathologyReport(ReportKind.NO_GLOBAL_SOLUTION, passed, measurements, tuple(notes))


# =============================================================================
#  Cuadrado perforado: H como serie truncada
# =============================================================================

@dataclass(frozen=True)
class PuncturedSquareField:
    """
    H(t,x) = Σ_{k<=K} Σ_l 4^-k c_kl / ((x - 1 + 2^-k)^2 + (t - 2^-k l)^2).
    """
    K: int
    c: Dict[Tuple[int, int], float] = field(default_factory=dict)

    @property
    def C(self) -> float:
        return max(self.c.get(kl, 1.0) for kl in self._indices())

    def _indices(self) -> List[Tuple[int, int]]:
        return [(k, l) for k in range(1, self.K + 1) for l in range(1, 2 ** k)]

    @property
    def punctures(self) -> Tuple[Tuple[float, float, float], ...]:
        """(t, x, peso) de cada término."""
        return tuple(
            (l / 2 ** k, 1.0 - 1.0 / 2 ** k, self.c.get((k, l), 1.0) / 4 ** k) for k, l in self._indices()
        )

    def __call__(self, t, x):
        t = np.asarray(t, dtype=float)
        x = np.asarray(x, dtype=float)
        total = np.zeros(np.broadcast(t, x).shape)
        with np.errstate(divide="ignore", invalid="ignore"):
            for tp, xp, a in self.punctures:
                total = total + a / ((x - xp) ** 2 + (t - tp) ** 2)
        return total if total.ndim else float(total)

    def to_source(self) -> str:
        if self.K > 7:
            raise TruncationError("La expresión de H se genera hasta K = 7")
        return " + ".join(_kernel(a, tp, xp) for tp, xp, a in self.punctures)

    def to_expr(self) -> Expr:
        return parse(self.to_source())

    def derivative_source(self) -> str:
        """H_x como texto fuente."""
        terms = [
            f"{-2.0 * a!r}*(x - {xp!r})/((x - {xp!r})^2 + (t - {tp!r})^2)^2"
            for tp, xp, a in self.punctures
        ]
        return " + ".join(terms)

    def tail_bound(self, delta: float) -> float:
        """Cota del resto Σ_{k>K} sobre bolas a distancia >= delta de las perforaciones."""
        return self.C / delta ** 2 * (2.0 ** -self.K - 4.0 ** -self.K / 3.0)

    def domination_bound(self, delta: float) -> float:
        """Cota de la serie completa por Σ_k (2^k - 1) 4^-k C/δ^2 = (2/3) C/δ^2."""
        return self.C / delta ** 2 * (2.0 / 3.0)

    def operator(self, region: Optional[Region] = None, order: int = 1) -> ScalarOperator:
        """
        order 1: u_x = H u.  order 2: (∂_x - H)^2 u = u_xx - 2H u_x + (H^2 - H_x) u.
        Los pesos de la procedencia son los del integrando -g^{p-1}/g^p.
        """
        region = region if region is not None else punctured_square(self.K)
        H = self.to_source()
        if order == 1:
            g = (parse(f"-({H})"), ex.const(1.0))
            weights = self.punctures
        elif order == 2:
            g0 = parse(f"({H})^2 - ({self.derivative_source()})")
            g = (g0, parse(f"-2.0*({H})"), ex.const(1.0))
            weights = tuple((tp, xp, 2.0 * a) for tp, xp, a in self.punctures)
        else:
            raise PathologyError("El operador del cuadrado perforado se genera con orden 1 o 2")
        provenance = Provenance(kind="punctured-square", singular_points=weights, approach="left",
                                truncation=self.K)
        return ScalarOperator(order, g, region, None, provenance)


def punctured_square_H(K: int, c: Optional[Dict[Tuple[int, int], float]] = None) -> PuncturedSquareField:
    if K < 1:
        raise TruncationError("K debe ser >= 1")
    c = dict(c or {})
    for key, value in c.items():
        if not value > 0:
            raise PathologyError(f"c_{key} debe ser positivo")
    return PuncturedSquareField(K, c)


def dyadic_depth(t: float, max_depth: int = 30) -> Optional[int]:
    """Menor k con t 2^k entero; None si hace falta k > max_depth."""
    depth = Fraction(t).denominator.bit_length() - 1
    return depth if depth <= max_depth else None


def verify_forced_vanishing(op: ScalarOperator, lines: Optional[Sequence[float]] = None,
                            distances: Sequence[float] = (1e-2, 1e-3, 1e-4),
                            config: RunConfig = RunConfig()) -> PathologyReport:
    """
    Ley de crecimiento del factor exp(∫ -g^{p-1}/g^p dx) al cruzar cada
    perforación de la línea t = t_p desde t_p ∓ d. Pasa si el incremento
    L(d/2) - L(d) está dentro del 15% de a pi/d y el cociente de
    incrementos sucesivos (L(d/4) - L(d/2)) / (L(d/2) - L(d)) a menos de
    0.3 de 2. Certificación truncada: solo se comprueban los términos
    presentes en el operador.
    """
    prov = op.provenance
    if prov is None or not prov.singular_points:
        raise PathologyError("El operador no tiene singularidades registradas (generar con este módulo)")
    integrand = liouville_integrand(op)
    system = LinearSystem(1, ((integrand,),), (ex.const(0.0),), op.region)
    sign = 1.0 if prov.approach == "right" else -1.0

    by_line: Dict[float, List[Tuple[float, float, float]]] = {}
    for tp, xp, a in prov.singular_points:
        by_line.setdefault(tp, []).append((tp, xp, a))
    requested = sorted(by_line) if lines is None else [float(t) for t in lines]
    if prov.kind == "punctured-square" and prov.truncation is not None:
        for t in requested:
            depth = dyadic_depth(t)
            if depth is not None and depth > prov.truncation:
                raise TruncationError(
                    f"La línea t={t} tiene profundidad diádica {depth} > K={prov.truncation}"
                )

    results = []
    passed = True
    for t_line in requested:
        punctures = by_line.get(t_line, [])
        if not punctures:
            results.append(_unconstrained_line(system, op.region, t_line, distances, sign, config))
            continue
        for tp, xp, a in punctures:
            entry = _crossing(system, op.region, tp, xp, a, punctures, distances, sign, config)
            passed = passed and entry["pass"]
            results.append(entry)
    if not any(r.get("status") == "constrained" for r in results):
        passed = False
    notes = ("certificación truncada: solo términos hasta la profundidad del operador",)
    return PathologyReport(ReportKind.ONLY_ZERO_SOLUTION, passed, {"lines": results}, notes)


def _crossing(system: LinearSystem, region: Region, tp: float, xp: float, a: float,
              same_line: Sequence[Tuple[float, float, float]], distances: Sequence[float],
              sign: float, config: RunConfig) -> dict:
    others = [abs(xq - xp) for _, xq, _ in same_line if xq != xp]
    r = 0.5 * min(others) if others else math.inf
    neighbor = region.slice(tp + sign * max(distances)).containing(xp)
    if neighbor is None:
        raise PathologyError(f"La perforación ({tp}, {xp}) no es accesible desde el lado pedido")
    r = min(r, 0.9 * (xp - neighbor.lo), 0.9 * (neighbor.hi - xp), 1.0)

    def growth(d: float) -> float:
        return _one_sided_log_integral(system, tp + sign * d, xp - r, xp + r, config)

    rows = []
    ok = True
    for d in distances:
        L, L_half, L_quarter = growth(d), growth(d / 2), growth(d / 4)
        increment = (L_half - L) * d / (a * math.pi)
        # L = a pi/d + parte regular: el cociente de incrementos sucesivos la cancela
        doubling = (L_quarter - L_half) / (L_half - L) if L_half != L else math.inf
        row_ok = abs(increment - 1.0) <= 0.15 and abs(doubling - 2.0) <= 0.3
        ok = ok and row_ok
        rows.append({"d": d, "log_growth": L, "log_growth_half": L_half, "predicted": a * math.pi / d,
                     "increment_ratio": increment, "doubling_ratio": doubling,
                     "raw_ratio": L_half / L if L else math.inf, "pass": row_ok})
    return {"t": tp, "x": xp, "weight": a, "window": r, "status": "constrained", "pass": ok, "rows": rows}


def _unconstrained_line(system: LinearSystem, region: Region, t_line: float, distances: Sequence[float],
                        sign: float, config: RunConfig) -> dict:
    rows = []
    for d in distances:
        s = region.slice(t_line + sign * d)
        if not s.count:
            continue
        iv = s.intervals[0]
        margin = 0.01 * iv.width
        L = _one_sided_log_integral(system, s.t, iv.lo + margin, iv.hi - margin, config)
        rows.append({"d": d, "log_growth": L})
    growth = [row["log_growth"] for row in rows]
    bounded = bool(growth) and max(growth) - min(growth) <= 1.0
    return {"t": t_line, "status": "unconstrained", "bounded": bounded, "rows": rows}


# =============================================================================
#  Región Ξ (escalera a la derecha de t0)
# =============================================================================

def xi_region(w: NonSimplicityWitness, delta1: float, K: int, resolution: Optional[float] = None) -> Region:
    """
    Rectángulo principal (t0-eps-delta1, t0) x (x1-eps-delta1, x2+eps+delta1)
    más K rectángulos R_k que empiezan un poco antes de t0 y llegan a
    t0 + delta1/k, con x en (x1 - eps/k - solape, x1 - eps/(k+1))
    (R_1 baja hasta x1-eps-delta1). La sección θ ≡ x1-eps es admisible.
    """
    if K < 1 or not delta1 > 0:
        raise PathologyError("Ξ necesita K >= 1 y delta1 > 0")
    t0, eps, x1, x2 = w.t0, w.eps, w.x1, w.x2
    x_lo, x_hi = x1 - eps - delta1, x2 + eps + delta1
    lead = 0.25 * delta1 / K

    def span(a: float, b: float) -> Tuple[float, float]:
        # reflejo en t alrededor de t0
        return (2 * t0 - b, 2 * t0 - a) if w.reflected_t else (a, b)

    shapes = [RectShape(*span(t0 - eps - delta1, t0), x_lo, x_hi)]
    for k in range(1, K + 1):
        overlap = 0.25 * (eps / k - eps / (k + 1))
        lo = x_lo if k == 1 else x1 - eps / k - overlap
        shapes.append(RectShape(*span(t0 - lead, t0 + delta1 / k), lo, x1 - eps / (k + 1)))
    t_a, t_b = span(t0 - eps - delta1, t0 + delta1)
    return Region((t_a, t_b, x_lo, x_hi), tuple(shapes), resolution=resolution, name=f"xi_K{K}")


# =============================================================================
#  Lado derecho no resoluble (orden 1)
# =============================================================================

def _pos(y: str) -> str:
    return f"(({y}) + abs({y}))/2"


def _bump(center: float, radius: float, var: str) -> str:
    """pos(1 - ((var - center)/radius)^2)^3 como texto fuente."""
    inner = f"1 - (({var} - {center!r})/{radius!r})^2"
    return f"({_pos(inner)})^3"


@dataclass(frozen=True)
class RhsConstruction:
    operator: ScalarOperator
    t_star: Tuple[float, ...]
    b: Tuple[float, ...]
    mass: Tuple[float, ...]
    phi_far: Tuple[float, ...]
    xi: Region


def _phi(op: ScalarOperator, t: float, x_start: float, x_window: Tuple[float, float],
         config: RunConfig) -> Any:
    """Solución positiva φ de P φ = 0 con φ(x_start) = 1 (dominio logarítmico)."""
    system = companion(op.with_rhs(None))
    return solve_slice(system, t, x_start, [1.0], target=x_window, config=config, log_domain=True)


def gen_nonsolvable_rhs_first_order(op: ScalarOperator, w: NonSimplicityWitness, k_max: int = 10,
                                    config: RunConfig = RunConfig()) -> RhsConstruction:
    """
    f = Σ_k f^k(x) χ^k(t) con f^k un pulso cúbico centrado en x1 de masa
    k b_k (1 + 1/φ(t*_k, x2+eps)) y χ^k un pulso en t centrado en
    t*_k = t0 ∓ eps/k que vale 1 en t*_k y 0 en los demás t*_j.
    """
    if op.p != 1:
        raise PathologyError("La construcción del lado derecho es de primer orden")
    x_near, x_far = w.x_window
    eps_k = w.eps / 2
    t_star = [w.approach(w.eps / k) for k in range(1, k_max + 1)]
    h1 = op.g[1]

    bumps, b_vals, masses, phi_far = [], [], [], []
    for k, t in enumerate(t_star, start=1):
        phi = _phi(op, t, x_near, (x_near, x_far), config)
        xs = np.linspace(w.x1 - eps_k, w.x1 + eps_k, 201)
        weight = np.abs(np.asarray(h1(np.full_like(xs, t), xs))) * phi(xs).ravel()
        b_k = float(np.max(weight)) * (1 + 1e-3)
        phi2 = float(phi(x_far).ravel()[0])
        m_k = k * b_k * (1 + 1 / phi2)
        amplitude = 35.0 * m_k / (32.0 * eps_k) * math.copysign(1.0, h1.scalar(t, w.x1))
        neighbours = [abs(t - s) for s in t_star if s != t]
        rho = min(neighbours) if neighbours else w.eps / 2
        bumps.append(f"{amplitude!r}*{_bump(w.x1, eps_k, 'x')}*{_bump(t, rho, 't')}")
        b_vals.append(b_k)
        masses.append(m_k)
        phi_far.append(phi2)

    f = parse(" + ".join(bumps))
    provenance = Provenance(kind="rhs", singular_points=(), approach="right" if w.reflected_t else "left",
                            window=w.x_window, truncation=k_max, witness=w.to_dict())
    generated = ScalarOperator(1, op.g, op.region, f, provenance)
    xi = xi_region(w, w.eps / 2, k_max)
    return RhsConstruction(generated, tuple(t_star), tuple(b_vals), tuple(masses), tuple(phi_far), xi)


def verify_nonsolvable_rhs(construction: RhsConstruction, w: NonSimplicityWitness,
                           config: RunConfig = RunConfig()) -> PathologyReport:
    """
    Para cada k, la solución de P u = f en t*_k con u(x1-eps) = c0 φ(x1-eps),
    |c0| <= C = k - 1, cumple |u(t*_k, x2+eps)| > k.
    """
    op = construction.operator
    x_near, x_far = w.x_window
    rows = []
    passed = True
    for k, t in enumerate(construction.t_star, start=1):
        C = k - 1
        values = []
        for c0 in sorted({-float(C), 0.0, float(C)}):
            sol = solve_slice(companion(op), t, x_near, [c0], target=(x_near, x_far), config=config)
            values.append(float(np.asarray(sol(x_far)).ravel()[0]))
        ok = all(abs(v) > k for v in values)
        passed = passed and ok
        rows.append({"k": k, "t_star": t, "b": construction.b[k - 1], "mass": construction.mass[k - 1],
                     "phi_far": construction.phi_far[k - 1], "values": values, "pass": ok})
    return PathologyReport(ReportKind.NONSOLVABLE_RHS, passed, {"rows": rows})
