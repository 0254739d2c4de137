"""Model spaces, circle-bundle points, and preferred charts.

Two model geometries are implemented, both with positive curvature
normalized so the chart-level symplectic form is the standard one:

``bf:d`` (flat model)
    Base C^d, unit circle bundle C^d x S^1 with connection form
    alpha = d(theta) + Im(conj(z) . dz).  Level-k sections are entire
    functions against the weight exp(-k|z|^2); the projector kernel has
    the closed form (k/pi)^d exp(ik(th_x - th_y) + k(z_x.conj(z_y)
    - |z_x|^2/2 - |z_y|^2/2)).

``cp1:D`` (curved model)
    Base the projective line carrying the D-th power of the hyperplane
    class, so the base area is D*pi.  Bundle points are stored as unit
    vectors v in C^2; v and zeta*v with zeta^D = 1 name the same point,
    and every evaluated quantity is invariant under that identification.
    Level-k sections are homogeneous polynomials of degree D*k evaluated
    on the stored representative.

Charts ("preferred" charts) trivialize the complex and symplectic
structures at their center and carry the fiber phase horizontally:

* flat model at (z0, th0):    (w, th) -> (z0 + w, th0 + th - Im(w.conj(z0)))
* curved model at v0:         (w, th) -> U(v0) . e^{i th/D} (1, w/sqrt(D)) / norm
  where U(v0) in SU(2) has first column v0.

Both choices make the two-point kernel at rescaled offsets match the
Gaussian law used by the prediction layer (exactly for the flat model,
to O(1/k) for the curved one).

Section inner products use the base volume form omega^d/d! with the
circle fiber normalized to unit mass; this is the unique scaling for
which the diagonal kernel value is (k/pi)^d + O(k^{d-1}) and the kernel
trace equals the section-space dimension.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

__all__ = [
    "ModelSpace",
    "CircleBundlePoint",
    "HeisenbergChart",
    "parse_model",
    "circle_act",
    "heisenberg_eval",
    "chart_invert",
    "base_distance",
    "bundle_distance",
    "szego_kernel",
]

BARGMANN_FOCK = "bargmann_fock"
PROJECTIVE_LINE = "projective_line"


def _wrap_angle(t: float) -> float:
    """Reduce an angle to (-pi, pi]."""
    t = math.fmod(t, 2.0 * math.pi)
    if t <= -math.pi:
        t += 2.0 * math.pi
    elif t > math.pi:
        t -= 2.0 * math.pi
    return t


@dataclass(frozen=True)
class ModelSpace:
    """A model geometry: flat (``bf:d``) or curved (``cp1:D``, base dim 1)."""

    kind: str
    dim: int = 1
    degree: int = 1

    def __post_init__(self):
        if self.kind not in (BARGMANN_FOCK, PROJECTIVE_LINE):
            raise ValueError(f"unknown model kind {self.kind!r}")
        if self.kind == BARGMANN_FOCK and not 1 <= self.dim <= 4:
            raise ValueError("flat model supports base dimension 1..4")
        if self.kind == PROJECTIVE_LINE:
            if self.dim != 1:
                raise ValueError("projective-line model has base dimension 1")
            if self.degree < 1:
                raise ValueError("bundle degree must be >= 1")

    @property
    def name(self) -> str:
        if self.kind == BARGMANN_FOCK:
            return f"bf:{self.dim}"
        return f"cp1:{self.degree}"

    def section_dim(self, k: int) -> Optional[int]:
        """Dimension of the level-k section space (None when infinite)."""
        if self.kind == PROJECTIVE_LINE:
            return self.degree * k + 1
        return None


def parse_model(spec: str) -> ModelSpace:
    """Parse a model string such as ``bf:1`` or ``cp1:2``."""
    parts = spec.strip().lower().split(":")
    if len(parts) != 2 or not parts[1].isdigit():
        raise ValueError(f"bad model spec {spec!r}; expected bf:<d> or cp1:<D>")
    tag, num = parts[0], int(parts[1])
    if tag == "bf":
        return ModelSpace(kind=BARGMANN_FOCK, dim=num)
    if tag == "cp1":
        return ModelSpace(kind=PROJECTIVE_LINE, dim=1, degree=num)
    raise ValueError(f"bad model spec {spec!r}; expected bf:<d> or cp1:<D>")


@dataclass(frozen=True)
class CircleBundlePoint:
    """A point of the unit circle bundle of the model.

    Flat model: base coordinates ``z`` (complex, length d) and fiber angle
    ``theta`` in (-pi, pi].  Curved model: a unit representative ``v`` in
    C^2 (the D-fold cover; deck-equivalent representatives name the same
    point).
    """

    model: ModelSpace
    z: Optional[np.ndarray] = None
    theta: Optional[float] = None
    v: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.model.kind == BARGMANN_FOCK:
            if self.z is None or self.theta is None:
                raise ValueError("flat-model point needs z and theta")
            zz = np.atleast_1d(np.asarray(self.z, dtype=complex))
            if zz.shape != (self.model.dim,):
                raise ValueError(f"z must have shape ({self.model.dim},)")
            object.__setattr__(self, "z", zz)
            object.__setattr__(self, "theta", _wrap_angle(float(self.theta)))
        else:
            if self.v is None:
                raise ValueError("curved-model point needs a C^2 representative")
            vv = np.asarray(self.v, dtype=complex)
            if vv.shape != (2,):
                raise ValueError("v must have shape (2,)")
            nrm = float(np.linalg.norm(vv))
            if not math.isclose(nrm, 1.0, rel_tol=0, abs_tol=1e-12):
                if nrm == 0.0:
                    raise ValueError("zero representative")
                vv = vv / nrm
            object.__setattr__(self, "v", vv)


def bf_point(model: ModelSpace, z, theta: float = 0.0) -> CircleBundlePoint:
    return CircleBundlePoint(model=model, z=np.asarray(z, dtype=complex),
                             theta=theta)


def cp1_point(model: ModelSpace, v) -> CircleBundlePoint:
    return CircleBundlePoint(model=model, v=np.asarray(v, dtype=complex))


def circle_act(g, x: CircleBundlePoint) -> CircleBundlePoint:
    """Rotate the fiber of x by the unit complex number g (or by angle g)."""
    if isinstance(g, (int, float)):
        ang = float(g)
    else:
        gc = complex(g)
        if not math.isclose(abs(gc), 1.0, rel_tol=0, abs_tol=1e-12):
            raise ValueError("circle action requires a unit complex number")
        ang = math.atan2(gc.imag, gc.real)
    m = x.model
    if m.kind == BARGMANN_FOCK:
        return CircleBundlePoint(model=m, z=x.z, theta=x.theta + ang)
    phase = np.exp(1j * ang / m.degree)
    return CircleBundlePoint(model=m, v=x.v * phase)


@dataclass(frozen=True)
class HeisenbergChart:
    """Preferred chart centered at a bundle point.

    ``eval`` / ``invert`` convert between chart data (w, theta) and bundle
    points; w = 0, theta = 0 is the center.  The chart identification of
    the base tangent space with C^d is unitary, the loop of constant w is
    the fiber circle, and theta = 0 slices are horizontal at the center.
    """

    center: CircleBundlePoint

    @property
    def model(self) -> ModelSpace:
        return self.center.model

    @property
    def radius(self) -> float:
        """Chart radius: half the injectivity radius (infinite for flat)."""
        m = self.model
        if m.kind == BARGMANN_FOCK:
            return math.inf
        return 0.25 * math.pi * math.sqrt(m.degree)

    # -- curved-model frame: SU(2) matrix with first column the center rep
    def _su2(self) -> np.ndarray:
        v = self.center.v
        return np.array([[v[0], -np.conj(v[1])],
                         [v[1], np.conj(v[0])]], dtype=complex)

    def eval(self, w, theta: float = 0.0) -> CircleBundlePoint:
        m = self.model
        if m.kind == BARGMANN_FOCK:
            wv = np.atleast_1d(np.asarray(w, dtype=complex))
            z0 = self.center.z
            twist = float(np.sum(wv * np.conj(z0)).imag)
            return CircleBundlePoint(model=m, z=z0 + wv,
                                     theta=self.center.theta + theta - twist)
        wc = complex(w) if np.isscalar(w) else complex(np.asarray(w).reshape(()))
        if abs(wc) >= self.radius:
            raise ValueError(
                f"offset |w| = {abs(wc):.4f} outside the chart radius "
                f"{self.radius:.4f}")
        D = m.degree
        u = np.array([1.0, wc / math.sqrt(D)], dtype=complex)
        u = u / math.sqrt(1.0 + abs(wc) ** 2 / D)
        u = u * np.exp(1j * theta / D)
        return CircleBundlePoint(model=m, v=self._su2() @ u)

    def invert(self, x: CircleBundlePoint) -> Tuple[np.ndarray, float]:
        """Chart data (w, theta) of a bundle point near the center.

        theta is reduced to (-pi, pi]; for the curved model the point must
        not sit over the chart's antipodal base point.
        """
        m = self.model
        if x.model != m:
            raise ValueError("point belongs to a different model")
        if m.kind == BARGMANN_FOCK:
            w = x.z - self.center.z
            twist = float(np.sum(w * np.conj(self.center.z)).imag)
            th = _wrap_angle(x.theta - self.center.theta + twist)
            return w, th
        u = np.conj(self._su2().T) @ x.v
        if abs(u[0]) < 1e-12:
            raise ValueError("point over the antipodal base point; chart invalid")
        D = m.degree
        w = math.sqrt(D) * u[1] / u[0]
        th = _wrap_angle(D * math.atan2(u[0].imag, u[0].real))
        return np.atleast_1d(w), th


def heisenberg_eval(chart: HeisenbergChart, w, theta: float = 0.0) -> CircleBundlePoint:
    """Evaluate a preferred chart (free-function form of ``chart.eval``)."""
    return chart.eval(w, theta)


def chart_invert(chart: HeisenbergChart, x: CircleBundlePoint) -> Tuple[np.ndarray, float]:
    """Chart data of x (free-function form of ``chart.invert``)."""
    return chart.invert(x)


def base_distance(x: CircleBundlePoint, y: CircleBundlePoint) -> float:
    """Geodesic distance between the base projections of two bundle points."""
    m = x.model
    if y.model != m:
        raise ValueError("points belong to different models")
    if m.kind == BARGMANN_FOCK:
        return float(np.linalg.norm(x.z - y.z))
    ip = abs(np.sum(x.v * np.conj(y.v)))
    return math.sqrt(m.degree) * math.acos(min(1.0, max(-1.0, ip)))


def base_closure_defect(x: CircleBundlePoint, y: CircleBundlePoint) -> float:
    """How far x and y are from sharing a base point, linear in the gap.

    The geodesic base distance goes through arccos and so cannot resolve
    gaps below ~1e-8; this phase-aligned representative difference is
    accurate down to machine precision and is the right quantity for
    closure checks.
    """
    m = x.model
    if m.kind == BARGMANN_FOCK:
        return float(np.linalg.norm(x.z - y.z))
    ip = complex(np.sum(y.v * np.conj(x.v)))
    if abs(ip) < 0.5:
        return base_distance(x, y)
    return float(np.linalg.norm(y.v - (ip / abs(ip)) * x.v))


def bundle_distance(x: CircleBundlePoint, y: CircleBundlePoint) -> float:
    """A metric on bundle points themselves (base offset plus fiber offset).

    Used by closure and reinsertion checks; zero iff the points coincide
    as bundle points (deck-equivalent curved-model representatives give 0).
    """
    m = x.model
    if m.kind == BARGMANN_FOCK:
        return float(np.linalg.norm(x.z - y.z)) + abs(_wrap_angle(x.theta - y.theta))
    D = m.degree
    roots = np.exp(2j * math.pi * np.arange(D) / D)
    return float(min(np.linalg.norm(x.v - r * y.v) for r in roots))


def fiber_phase_between(x: CircleBundlePoint, y: CircleBundlePoint,
                        tol: float = 1e-9) -> complex:
    """Unit g with circle_act(g, x) == y, for x, y over the same base point."""
    m = x.model
    if base_closure_defect(x, y) > tol:
        raise ValueError("points do not share a base point")
    if m.kind == BARGMANN_FOCK:
        return complex(np.exp(1j * (y.theta - x.theta)))
    ip = complex(np.sum(y.v * np.conj(x.v)))
    ph = ip / abs(ip)
    return ph ** m.degree


# ----------------------------------------------------------------------
# Projector kernel entry point.  The flat model has a closed form; the
# curved model delegates to the polynomial basis (built lazily and cached
# in the hardy layer).
# ----------------------------------------------------------------------

def _bf_kernel(model: ModelSpace, k: int, x: CircleBundlePoint,
               y: CircleBundlePoint) -> complex:
    zx, zy = x.z, y.z
    expo = (1j * k * (x.theta - y.theta)
            + k * (np.sum(zx * np.conj(zy))
                   - 0.5 * np.sum(zx * np.conj(zx))
                   - 0.5 * np.sum(zy * np.conj(zy))))
    return complex((k / math.pi) ** model.dim * np.exp(expo))


def bf_kernel_many(model: ModelSpace, k: int, x: CircleBundlePoint,
                   zs: np.ndarray, thetas: np.ndarray) -> np.ndarray:
    """Vectorized flat-model kernel against many points (zs: (N, d))."""
    zx = x.z
    dots = zs.conj() @ zx                      # (N,)
    n2 = np.sum(np.abs(zs) ** 2, axis=1)
    expo = (1j * k * (x.theta - thetas)
            + k * (dots - 0.5 * float(np.sum(np.abs(zx) ** 2)) - 0.5 * n2))
    return (k / math.pi) ** model.dim * np.exp(expo)


def szego_kernel(model: ModelSpace, k: int, x: CircleBundlePoint,
                 y: CircleBundlePoint) -> complex:
    """Level-k projector kernel of the model, evaluated at two bundle points."""
    if k < 1:
        raise ValueError("level k must be a positive integer")
    if x.model != model or y.model != model:
        raise ValueError("points do not belong to the given model")
    if model.kind == BARGMANN_FOCK:
        return _bf_kernel(model, k, x, y)
    from bsquant import hardy                       # lazy: avoids import cycle
    return hardy.kernel_eval(hardy.cached_kernel(model, k), x, y)
