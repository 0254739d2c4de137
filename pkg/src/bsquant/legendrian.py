"""Horizontal loops, their closure/holonomy checks, and the quantizer.

A loop is a finite union of parametrized components in the circle bundle,
each carrying a complex weight function; the quantizer pairs the loop
against the level-k projector kernel,

    u_k(x') = sum_c integral  weight_c(t) * K_k(x', loop_c(t)) * speed_c(t) dt,

by trapezoidal quadrature (spectrally accurate for the smooth periodic
integrands that arise here).  Circle components must close in the bundle
-- that is the quantization condition, verified independently by
`bohr_sommerfeld_check` through the parallel-transport phase ODE.

`find_branches` locates the loop passages over the base point of an
evaluation center x, and extracts, per passage, the data the prediction
layer consumes: the fiber offset h_j carrying x onto the loop, the loop
tangent frame, and Taylor expansions (in the adapted chart coordinate q
along the loop) of the fiber-phase residual, the density Jacobian, the
weight, and the transverse chart residual.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial import polynomial as npoly
from scipy.integrate import solve_ivp
from scipy.optimize import minimize_scalar

from bsquant.geometry import LagrangianFrame
from bsquant.models import (
    BARGMANN_FOCK,
    PROJECTIVE_LINE,
    CircleBundlePoint,
    HeisenbergChart,
    ModelSpace,
    _wrap_angle,
    base_closure_defect,
    base_distance,
    bf_kernel_many,
    bf_point,
    bundle_distance,
    circle_act,
    cp1_point,
    fiber_phase_between,
)

__all__ = [
    "QuadratureSpec",
    "LoopComponent",
    "LegendrianLoop",
    "Branch",
    "BranchSet",
    "BSResult",
    "EmptyBranchError",
    "make_loop",
    "loop_presets",
    "horizontality_residual",
    "bohr_sommerfeld_check",
    "horizontal_lift",
    "find_branches",
    "quantize",
    "QuantizedSection",
]


class EmptyBranchError(ValueError):
    """No loop passage over the requested base point within the cutoff."""


@dataclass(frozen=True)
class QuadratureSpec:
    """Loop-quadrature request: node count (None = level floor) and the
    truncation half-width, in weight standard deviations, for noncompact
    components."""

    nodes: Optional[int] = None
    truncation_sigmas: float = 8.0

    def node_count(self, k: int) -> int:
        floor = max(64, 8 * k)
        n = self.nodes if self.nodes is not None else floor
        if n < floor:
            raise ValueError(
                f"under-resolved loop quadrature: level {k} needs >= {floor} "
                f"nodes (oscillations up to ~{k} modes), got {n}")
        return int(n)


def _ones_weight(t: np.ndarray) -> np.ndarray:
    return np.ones_like(np.asarray(t, dtype=float), dtype=complex)


@dataclass(frozen=True)
class LoopComponent:
    """One parametrized piece of a loop.

    `domain` is "circle" (parameter modulo `period`, must close in the
    bundle) or "line" (noncompact; the weight must decay and quadrature is
    truncated at `line_center` +- sigmas * `line_sigma`).  `speed` is the
    base-metric velocity magnitude; None falls back to finite differences.
    """

    model: ModelSpace
    point: Callable[[float], CircleBundlePoint]
    weight: Callable[[np.ndarray], np.ndarray] = _ones_weight
    speed: Optional[Callable[[np.ndarray], np.ndarray]] = None
    domain: str = "circle"
    period: float = 2.0 * math.pi
    line_center: float = 0.0
    line_sigma: float = 1.0

    def __post_init__(self):
        if self.domain not in ("circle", "line"):
            raise ValueError("component domain must be 'circle' or 'line'")

    def speed_at(self, ts: np.ndarray) -> np.ndarray:
        if self.speed is not None:
            return np.asarray(self.speed(ts), dtype=float)
        h = 1e-6
        return np.array([
            base_distance(self.point(t + h), self.point(t - h)) / (2 * h)
            for t in np.atleast_1d(ts)], dtype=float)

    def sample_interval(self, sigmas: float) -> Tuple[float, float]:
        if self.domain == "circle":
            return 0.0, self.period
        half = sigmas * self.line_sigma
        return (min(self.line_center - half, -4.0),
                max(self.line_center + half, 4.0))


@dataclass(frozen=True)
class LegendrianLoop:
    """A weighted horizontal loop: components plus an identifying label."""

    model: ModelSpace
    components: Tuple[LoopComponent, ...]
    label: str = "loop"

    def __post_init__(self):
        if not self.components:
            raise ValueError("loop needs at least one component")
        for c in self.components:
            if c.model != self.model:
                raise ValueError("component model mismatch")

    def basepoint(self) -> CircleBundlePoint:
        """Canonical on-loop evaluation center: component 0 at t = 0."""
        return self.components[0].point(0.0)

    def rotated(self, g) -> "LegendrianLoop":
        """The loop moved by the circle action, weights transported."""
        comps = tuple(
            replace(c, point=(lambda t, _p=c.point: circle_act(g, _p(t))))
            for c in self.components)
        return LegendrianLoop(model=self.model, components=comps,
                              label=f"{self.label}|rotated")

    def validate(self, samples: int = 256) -> dict:
        """Closure, immersion, and horizontality residuals (diagnostics)."""
        out = {"closure": 0.0, "min_speed": math.inf,
               "horizontality": horizontality_residual(self, samples)}
        for c in self.components:
            lo, hi = c.sample_interval(4.0)
            ts = np.linspace(lo, hi, 64)
            out["min_speed"] = min(out["min_speed"],
                                   float(np.min(c.speed_at(ts))))
            if c.domain == "circle":
                out["closure"] = max(
                    out["closure"],
                    bundle_distance(c.point(0.0), c.point(c.period)))
        return out


# ----------------------------------------------------------------------
# Connection pairing along a curve, horizontality, holonomy.
# ----------------------------------------------------------------------

def _connection_pairing(comp: LoopComponent, t: float, h: float = 1e-5) -> float:
    """alpha(velocity) at parameter t by central finite differences."""
    m = comp.model
    if m.kind == BARGMANN_FOCK:
        xp, xm = comp.point(t + h), comp.point(t - h)
        x0 = comp.point(t)
        dth = _wrap_angle(xp.theta - xm.theta) / (2 * h)
        dz = (xp.z - xm.z) / (2 * h)
        return dth + float(np.sum(np.conj(x0.z) * dz).imag)
    xp, xm = comp.point(t + h), comp.point(t - h)
    x0 = comp.point(t)
    dv = (xp.v - xm.v) / (2 * h)
    return m.degree * float(np.sum(dv * np.conj(x0.v)).imag)


def horizontality_residual(loop: LegendrianLoop, samples: int = 256) -> float:
    """Max |alpha(velocity)| over parameter samples (finite differences)."""
    if samples < 16:
        raise ValueError("horizontality check needs at least 16 samples")
    worst = 0.0
    for comp in loop.components:
        lo, hi = comp.sample_interval(4.0)
        ts = np.linspace(lo, hi, samples, endpoint=False)
        for t in ts:
            worst = max(worst, abs(_connection_pairing(comp, float(t))))
    return worst


@dataclass(frozen=True)
class BSResult:
    """Holonomy of the horizontal lift of a base loop and the quantization
    verdict |holonomy - 1| <= tol."""

    holonomy: complex
    is_bs: bool
    lift: Optional[LegendrianLoop] = None


def _phase_ode_solution(model: ModelSpace,
                        base_loop: Callable[[float], CircleBundlePoint],
                        period: float):
    """Parallel-transport phase gamma(t) with gamma(0) = 0, dense output."""
    h = 1e-6

    if model.kind == BARGMANN_FOCK:
        def rhs(t, _y):
            zp, zm = base_loop(t + h).z, base_loop(t - h).z
            z0 = base_loop(t).z
            dz = (zp - zm) / (2 * h)
            return [-float(np.sum(np.conj(z0) * dz).imag)]
    else:
        def rhs(t, _y):
            vp, vm = base_loop(t + h).v, base_loop(t - h).v
            v0 = base_loop(t).v
            dv = (vp - vm) / (2 * h)
            return [-float(np.sum(dv * np.conj(v0)).imag)]

    sol = solve_ivp(rhs, (0.0, period), [0.0], method="DOP853",
                    rtol=1e-12, atol=1e-12, dense_output=True)
    if not sol.success:
        raise RuntimeError(f"phase transport failed: {sol.message}")
    return sol


def bohr_sommerfeld_check(model: ModelSpace,
                          base_loop: Callable[[float], CircleBundlePoint],
                          period: float = 2.0 * math.pi,
                          tol: float = 1e-6,
                          with_lift: bool = True) -> BSResult:
    """Holonomy of the horizontal lift of a closed base loop.

    The fiber content of `base_loop` values is irrelevant; only the base
    projection is transported.  The verdict is |holonomy - 1| <= tol, and
    for quantizable loops the horizontal lift is returned as a loop object
    (weight 1).
    """
    if base_closure_defect(base_loop(0.0), base_loop(period)) > 1e-10:
        raise ValueError("base loop is not closed")
    sol = _phase_ode_solution(model, base_loop, period)
    gamma_T = float(sol.y[0, -1])
    if model.kind == BARGMANN_FOCK:
        start = base_loop(0.0)
        end = CircleBundlePoint(model=model, z=base_loop(period).z,
                                theta=base_loop(period).theta + gamma_T)
        # base closure makes start/end share a fiber; compare phases there
        hol = complex(np.exp(1j * _wrap_angle(end.theta - start.theta)))
    else:
        v_end = np.exp(1j * gamma_T) * base_loop(period).v
        end = CircleBundlePoint(model=model, v=v_end)
        hol = fiber_phase_between(base_loop(0.0), end, tol=1e-8)
    is_bs = abs(hol - 1.0) <= tol
    lift = None
    if with_lift and is_bs:
        lift = horizontal_lift(model, base_loop, period, _sol=sol)
    return BSResult(holonomy=hol, is_bs=is_bs, lift=lift)


def horizontal_lift(model: ModelSpace,
                    base_loop: Callable[[float], CircleBundlePoint],
                    period: float = 2.0 * math.pi,
                    _sol=None) -> LegendrianLoop:
    """Horizontal lift through base_loop(0), as a weight-1 loop object."""
    sol = _sol or _phase_ode_solution(model, base_loop, period)

    if model.kind == BARGMANN_FOCK:
        def point(t):
            x = base_loop(t)
            return CircleBundlePoint(model=model, z=x.z,
                                     theta=x.theta + float(sol.sol(t)[0]))
    else:
        def point(t):
            x = base_loop(t)
            return CircleBundlePoint(
                model=model, v=np.exp(1j * float(sol.sol(t)[0])) * x.v)

    comp = LoopComponent(model=model, point=point, period=period)
    return LegendrianLoop(model=model, components=(comp,),
                          label="horizontal-lift")


# ----------------------------------------------------------------------
# Loop presets.
# ----------------------------------------------------------------------

def _perp(v: np.ndarray) -> np.ndarray:
    """The standard symplectic-orthogonal completion of a unit C^2 vector."""
    return np.array([-np.conj(v[1]), np.conj(v[0])], dtype=complex)


def _great_circle_component(model: ModelSpace, start: np.ndarray,
                            transverse: np.ndarray) -> LoopComponent:
    """Horizontal great circle v(t) = cos(t/2) start + sin(t/2) transverse.

    `transverse` must be Hermitian-orthogonal to `start`; the curve is
    then horizontal for every t, closes in the bundle when the degree is
    even, and has constant base speed sqrt(D)/2.
    """
    start = np.asarray(start, dtype=complex)
    transverse = np.asarray(transverse, dtype=complex)
    if abs(np.sum(transverse * np.conj(start))) > 1e-12:
        raise ValueError("transverse direction must be orthogonal to start")
    sqD = math.sqrt(model.degree)

    def point(t):
        return cp1_point(model, math.cos(t / 2) * start
                         + math.sin(t / 2) * transverse)

    def speed(ts):
        return np.full_like(np.asarray(ts, dtype=float), sqD / 2.0)

    return LoopComponent(model=model, point=point, speed=speed)


_EQUATOR_START = np.array([1.0, 1.0], dtype=complex) / math.sqrt(2.0)


def _equator_loop(model: ModelSpace) -> LegendrianLoop:
    if model.kind != PROJECTIVE_LINE:
        raise ValueError("equator preset needs the curved model")
    if model.degree % 2 != 0:
        raise ValueError(
            "the equator closes in the bundle only for even degree "
            "(holonomy quantization)")
    comp = _great_circle_component(model, _EQUATOR_START,
                                   1j * _perp(_EQUATOR_START))
    return LegendrianLoop(model=model, components=(comp,), label="cp1-equator")


def _double_branch_loop(model: ModelSpace, angle: float) -> LegendrianLoop:
    """Equator plus its fiber rotate by e^{i angle}: two passages over every
    base point of the equator, with fiber offsets 1 and e^{i angle}."""
    eq = _equator_loop(model)
    rot = eq.rotated(complex(np.exp(1j * angle)))
    return LegendrianLoop(model=model,
                          components=eq.components + rot.components,
                          label=f"cp1-double-branch:angle={angle!r}")


def _latitude_loop(model: ModelSpace, frac: float) -> LegendrianLoop:
    """Horizontal lift over the latitude circle enclosing `frac` of the
    base area.  Closes in the bundle only when frac * degree is an
    integer; intended for quantization-condition studies."""
    if model.kind != PROJECTIVE_LINE:
        raise ValueError("latitude preset needs the curved model")
    if not 0.0 < frac < 1.0:
        raise ValueError("area fraction must lie strictly between 0 and 1")
    c, s = math.sqrt(1.0 - frac), math.sqrt(frac)
    sqD = math.sqrt(model.degree)

    def point(t):
        return cp1_point(model, np.exp(-1j * frac * t)
                         * np.array([c, s * np.exp(1j * t)], dtype=complex))

    def speed(ts):
        return np.full_like(np.asarray(ts, dtype=float), sqD * c * s)

    comp = LoopComponent(model=model, point=point, speed=speed)
    return LegendrianLoop(model=model, components=(comp,),
                          label=f"cp1-latitude:frac={frac!r}")


def _bf_plane_loop(model: ModelSpace, a: float, y0: float) -> LegendrianLoop:
    """The horizontal line {(i t, theta = 0)} in the flat model with the
    Gaussian weight exp(-a (t - y0)^2 / 2)."""
    if model.kind != BARGMANN_FOCK or model.dim != 1:
        raise ValueError("plane preset needs the flat model with d = 1")
    if a <= 0:
        raise ValueError("weight decay rate must be positive")

    def point(t):
        return bf_point(model, [1j * t], 0.0)

    def weight(ts):
        ts = np.asarray(ts, dtype=float)
        return np.exp(-a * (ts - y0) ** 2 / 2.0).astype(complex)

    def speed(ts):
        return np.ones_like(np.asarray(ts, dtype=float))

    comp = LoopComponent(model=model, point=point, weight=weight, speed=speed,
                         domain="line", line_center=y0,
                         line_sigma=1.0 / math.sqrt(a))
    return LegendrianLoop(model=model, components=(comp,),
                          label=f"bf-plane:a={a!r},y0={y0!r}")


_PRESET_DEFAULTS = {
    "cp1-equator": {},
    "cp1-double-branch": {"angle": 2.0 * math.pi / 3.0},
    "cp1-latitude": {"frac": 0.25},
    "bf-plane": {"a": 1.0, "y0": 0.6},
}


def loop_presets() -> Tuple[str, ...]:
    """Names accepted by make_loop."""
    return tuple(_PRESET_DEFAULTS)


def make_loop(spec: str, model: Optional[ModelSpace] = None) -> LegendrianLoop:
    """Build a preset loop from "name" or "name:key=val,key=val".

    The model defaults to cp1:2 for curved presets and bf:1 for flat ones;
    pass one explicitly to override (e.g. other even degrees).
    """
    name, _, paramstr = spec.partition(":")
    name = name.strip()
    if name not in _PRESET_DEFAULTS:
        raise ValueError(f"unknown loop preset {name!r}; "
                         f"known: {', '.join(loop_presets())}")
    params = dict(_PRESET_DEFAULTS[name])
    if paramstr:
        for item in paramstr.split(","):
            key, _, val = item.partition("=")
            key = key.strip()
            if key not in params:
                raise ValueError(f"preset {name!r} has no parameter {key!r}")
            params[key] = float(val)
    if name == "bf-plane":
        model = model or ModelSpace(kind=BARGMANN_FOCK, dim=1)
        return _bf_plane_loop(model, **params)
    model = model or ModelSpace(kind=PROJECTIVE_LINE, degree=2)
    if name == "cp1-equator":
        return _equator_loop(model)
    if name == "cp1-double-branch":
        return _double_branch_loop(model, **params)
    return _latitude_loop(model, **params)


# ----------------------------------------------------------------------
# Branch detection and adapted-chart Taylor data.
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class Branch:
    """One loop passage over the base point of the evaluation center.

    Taylor arrays are coefficients in the adapted chart coordinate q along
    the loop (ascending powers).  `fiber_taylor` is the fiber-phase
    residual after removing arg(fiber_phase) (vanishes to third order),
    `density_taylor` the density Jacobian normalized to constant term 1,
    `weight_taylor` the weight along the loop (constant term = the weight
    at the passage), and `chart_taylor` the transverse chart residual
    (vanishes to second order; identically zero for straight passages).
    `tangent_rotation` is the unit u with u * w the adapted offset
    coordinates, so the loop tangent maps to the imaginary axis.
    """

    component: int
    t: float
    point: CircleBundlePoint
    fiber_phase: complex
    frame: LagrangianFrame
    tangent_rotation: complex
    weight_value: complex
    fiber_taylor: np.ndarray
    density_taylor: np.ndarray
    weight_taylor: np.ndarray
    chart_taylor: np.ndarray


@dataclass(frozen=True)
class BranchSet:
    """All passages of a loop over base(x), with extraction order."""

    base: CircleBundlePoint
    chart: HeisenbergChart
    loop: LegendrianLoop
    branches: Tuple[Branch, ...]
    order: int

    @property
    def count(self) -> int:
        return len(self.branches)


def _local_minima(ts: np.ndarray, ds: np.ndarray, circular: bool) -> list:
    """Indices of strict-ish local minima of ds over the sample grid."""
    n = len(ds)
    out = []
    for i in range(n):
        if circular:
            prev_d, next_d = ds[(i - 1) % n], ds[(i + 1) % n]
        else:
            prev_d = ds[i - 1] if i > 0 else math.inf
            next_d = ds[i + 1] if i < n - 1 else math.inf
        if ds[i] <= prev_d and ds[i] <= next_d:
            out.append(i)
    return out


def _refine_minimum(comp: LoopComponent, x: CircleBundlePoint,
                    t0: float, dt: float) -> Tuple[float, float]:
    res = minimize_scalar(
        lambda t: base_distance(comp.point(float(t)), x) ** 2,
        bounds=(t0 - dt, t0 + dt), method="bounded",
        options={"xatol": 1e-13})
    t = float(res.x)
    return t, base_distance(comp.point(t), x)


def _taylor_fit(deltas: np.ndarray, values: np.ndarray, deg: int) -> np.ndarray:
    return npoly.polyfit(deltas, values, deg)


def _series_invert(coeffs: np.ndarray, order: int) -> np.ndarray:
    """Compositional inverse of a series with zero constant term and
    nonzero linear coefficient, to the requested order."""
    a = np.asarray(coeffs, dtype=complex)
    if abs(a[1]) < 1e-12:
        raise ValueError("series has vanishing linear term; cannot invert")
    inv = np.zeros(order + 1, dtype=complex)
    inv[1] = 1.0 / a[1]
    # fixed-point refinement: delta = (q - (a o delta)_{>=2}) / a1
    for _ in range(order):
        comp = _poly_compose(a[:order + 1], inv, order)
        corr = -comp
        corr[1] += 1.0
        update = npoly.polyadd(inv, corr / a[1])[:order + 1]
        inv = np.zeros(order + 1, dtype=complex)
        inv[:len(update)] = update
        inv[0] = 0.0
    return inv


def _poly_compose(outer: np.ndarray, inner: np.ndarray, order: int) -> np.ndarray:
    """Coefficients of outer(inner(q)) truncated at the given order."""
    out = np.zeros(order + 1, dtype=complex)
    out[0] = outer[0]
    power = np.array([1.0 + 0.0j])
    for m in range(1, len(outer)):
        power = npoly.polymul(power, inner)[:order + 1]
        if m < len(outer):
            out[:len(power)] += outer[m] * power
    return out


def find_branches(loop: LegendrianLoop, x: CircleBundlePoint,
                  cutoff: float = 1e-6, order: int = 4,
                  coarse: int = 4096) -> BranchSet:
    """Locate loop passages over base(x) and extract adapted Taylor data.

    Passages are minima of the base distance along each component, refined
    by bounded scalar minimization and accepted below `cutoff`.  Raises
    EmptyBranchError when no passage qualifies (the rapid-decay regime).
    """
    chart = HeisenbergChart(center=x)
    found = []
    for ci, comp in enumerate(loop.components):
        lo, hi = comp.sample_interval(6.0)
        circular = comp.domain == "circle"
        ts = np.linspace(lo, hi, coarse, endpoint=not circular)
        ds = np.array([base_distance(comp.point(float(t)), x) for t in ts])
        dt = (hi - lo) / coarse
        seen = []
        for i in _local_minima(ts, ds, circular):
            if ds[i] > max(10 * cutoff, 1e-3):
                continue
            t_j, d_j = _refine_minimum(comp, x, float(ts[i]), 2 * dt)
            if d_j > cutoff:
                continue
            if circular:
                t_j = t_j % comp.period
            if any(abs(t_j - s) < 4 * dt or
                   (circular and abs(abs(t_j - s) - comp.period) < 4 * dt)
                   for s in seen):
                continue
            seen.append(t_j)
            found.append((ci, t_j))
    if not found:
        raise EmptyBranchError(
            f"no passage of {loop.label!r} within {cutoff} of the base point")
    branches = tuple(_extract_branch(loop, chart, ci, t_j, order)
                     for ci, t_j in sorted(found))
    return BranchSet(base=x, chart=chart, loop=loop, branches=branches,
                     order=order)


def _extract_branch(loop: LegendrianLoop, chart: HeisenbergChart,
                    ci: int, t_j: float, order: int) -> Branch:
    comp = loop.components[ci]
    x_j = comp.point(t_j)
    h_j = fiber_phase_between(chart.center, x_j, tol=1e-7)
    theta_j = math.atan2(h_j.imag, h_j.real)

    # window in parameter units sized so the adapted coordinate spans ~0.35
    speed0 = float(comp.speed_at(np.array([t_j]))[0])
    if speed0 <= 1e-6:
        raise ValueError("loop fails the immersion bound at a passage")
    half = 0.35 / speed0
    if comp.domain == "circle":
        half = min(half, comp.period / 8.0)
    deg = order + 4
    nodes = 4 * (deg + 2) + 1
    deltas = half * np.cos(np.linspace(0.0, math.pi, nodes))

    ws = np.empty(nodes, dtype=complex)
    thetas = np.empty(nodes)
    for i, d in enumerate(deltas):
        w_i, th_i = chart.invert(comp.point(t_j + float(d)))
        ws[i] = complex(w_i[0]) if np.ndim(w_i) else complex(w_i)
        thetas[i] = theta_j + _wrap_angle(th_i - theta_j)

    w_of_t = _taylor_fit(deltas, ws, deg)
    V = complex(w_of_t[1])
    if abs(V) < 1e-9:
        raise ValueError("degenerate passage: chart velocity vanishes")
    u_j = 1j * abs(V) / V
    frame = LagrangianFrame(basis=np.array([[V / abs(V)]], dtype=complex))

    adapted = u_j * ws
    q_of_t = _taylor_fit(deltas, adapted.imag.astype(complex), deg)
    xi_of_t = _taylor_fit(deltas, adapted.real.astype(complex), deg)
    th_of_t = _taylor_fit(deltas, thetas.astype(complex), deg)
    amp_w = _taylor_fit(deltas, np.asarray(
        comp.weight(t_j + deltas), dtype=complex), deg)
    spd = _taylor_fit(deltas, np.asarray(
        comp.speed_at(t_j + deltas), dtype=complex), deg)

    t_of_q = _series_invert(q_of_t, order + 2)
    xi = _poly_compose(xi_of_t[:order + 3], t_of_q, order + 2)
    fib = _poly_compose(th_of_t[:order + 3], t_of_q, order + 2)
    fib[0] -= theta_j
    wgt = _poly_compose(amp_w[:order + 3], t_of_q, order + 2)
    # density Jacobian: speed(t(q)) * t'(q), normalized to 1 at the passage
    dt_dq = npoly.polyder(t_of_q)
    dens = npoly.polymul(_poly_compose(spd[:order + 3], t_of_q, order + 2),
                         dt_dq)[:order + 3]

    for arr, upto, tol, what in ((xi, 2, 1e-5, "transverse residual"),
                                 (fib, 3, 1e-5, "fiber residual")):
        bad = np.max(np.abs(arr[:upto]))
        if bad > tol:
            raise ValueError(
                f"passage data violates the adapted-chart normal form: "
                f"{what} low-order coefficient {bad:.2e}")
        arr[:upto] = 0.0

    d0 = complex(dens[0])
    if abs(d0 - 1.0) > 1e-6:
        raise ValueError(
            f"density Jacobian fails its unit normalization: {d0!r}")
    dens = dens / d0
    weight_value = complex(wgt[0]) * d0

    return Branch(component=ci, t=float(t_j), point=x_j, fiber_phase=h_j,
                  frame=frame, tangent_rotation=u_j,
                  weight_value=weight_value,
                  fiber_taylor=fib[:order + 3],
                  density_taylor=dens[:order + 3],
                  weight_taylor=wgt[:order + 3],
                  chart_taylor=xi[:order + 3])


# ----------------------------------------------------------------------
# The quantizer.
# ----------------------------------------------------------------------

class QuantizedSection:
    """u_k for one (kernel, loop) pair, reusable across evaluation points.

    For the curved model the loop quadrature is folded once into basis
    coefficients, making each evaluation a single basis sum; the flat
    model keeps the weighted nodes and pairs them with the closed-form
    kernel per evaluation.
    """

    def __init__(self, kern, loop: LegendrianLoop,
                 quadrature: Optional[QuadratureSpec] = None):
        from bsquant.hardy import ProjectorKernel, evaluate_sections_many
        if not isinstance(kern, ProjectorKernel):
            raise TypeError("quantize needs a ProjectorKernel")
        if loop.model != kern.model:
            raise ValueError("loop and kernel live on different models")
        self.kern = kern
        self.loop = loop
        self.quadrature = quadrature or QuadratureSpec()
        n = self.quadrature.node_count(kern.k)

        node_ts, node_wts, node_pts = [], [], []
        for comp in loop.components:
            if comp.domain == "circle":
                gap = bundle_distance(comp.point(0.0), comp.point(comp.period))
                if gap > 1e-8:
                    raise ValueError(
                        f"component does not close in the bundle (gap "
                        f"{gap:.2e}); it fails the quantization condition")
                ts = np.linspace(0.0, comp.period, n, endpoint=False)
                wts = np.full(n, comp.period / n)
            else:
                lo, hi = comp.sample_interval(self.quadrature.truncation_sigmas)
                ts = np.linspace(lo, hi, n)
                wts = np.full(n, (hi - lo) / (n - 1))
                wts[0] *= 0.5
                wts[-1] *= 0.5
            amp = (np.asarray(comp.weight(ts), dtype=complex)
                   * comp.speed_at(ts) * wts)
            node_ts.append(ts)
            node_wts.append(amp)
            node_pts.append([comp.point(float(t)) for t in ts])

        m = kern.model
        if m.kind == PROJECTIVE_LINE:
            coeff = np.zeros(kern.basis.dim, dtype=complex)
            for amp, pts in zip(node_wts, node_pts):
                reps = np.stack([p.v for p in pts])
                S = evaluate_sections_many(kern.basis, reps)
                coeff += np.conj(S).T @ amp
            self._coeff = coeff
        else:
            self._bf_nodes = [
                (np.stack([p.z for p in pts]),
                 np.array([p.theta for p in pts]), amp)
                for amp, pts in zip(node_wts, node_pts)]

    def at(self, x: CircleBundlePoint) -> complex:
        m = self.kern.model
        if m.kind == PROJECTIVE_LINE:
            from bsquant.hardy import evaluate_sections
            return complex(np.sum(evaluate_sections(self.kern.basis, x)
                                  * self._coeff))
        total = 0.0 + 0.0j
        for zs, ths, amp in self._bf_nodes:
            vals = bf_kernel_many(m, self.kern.k, x, zs, ths)
            total += complex(np.sum(amp * vals))
        return total

    def at_many(self, pts: Sequence[CircleBundlePoint]) -> np.ndarray:
        return np.array([self.at(p) for p in pts], dtype=complex)


def quantize(kern, loop: LegendrianLoop, x_eval: CircleBundlePoint,
             quadrature: Optional[QuadratureSpec] = None) -> complex:
    """u_k(x_eval): the loop paired against the level-k kernel."""
    return QuantizedSection(kern, loop, quadrature).at(x_eval)
