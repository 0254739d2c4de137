"""Polynomial section bases and projector kernels.

For the curved model the level-k section space is the span of the
monomials v0^a v1^(n-a), n = D*k, evaluated on unit representatives.
Their Gram matrix in the fiber-normalized bundle measure has the exact
Beta-function form

    <v0^a v1^b, v0^c v1^d> = delta * D*pi * a! b! / (n+1)!

and an orthonormal basis is produced by a Cholesky factorization of that
Gram matrix (which is diagonal here, but the code does not assume it).
The projector kernel is the basis sum  sum_r s_r(x) conj(s_r(y)); for the
flat model the closed form lives in :mod:`bsquant.models` and this module
only wraps it.

Bundle quadrature uses Gauss-Legendre nodes in the latitude coordinate
u = sin^2(chi) and uniform nodes in the azimuth angle.  Integrands built
from same-level kernel products are invariant under the fiber rotation
(the equivariant phases cancel), so the fiber average is evaluated
analytically; explicit fiber nodes are kept for generic integrands.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.special import gammaln, roots_legendre

from bsquant.models import (
    BARGMANN_FOCK,
    PROJECTIVE_LINE,
    CircleBundlePoint,
    ModelSpace,
    _bf_kernel,
)

__all__ = [
    "HardyBasis",
    "ProjectorKernel",
    "XQuadrature",
    "build_basis",
    "cached_kernel",
    "kernel_eval",
    "kernel_eval_many",
    "evaluate_sections",
    "evaluate_sections_many",
    "reproducing_residual",
    "kernel_trace",
    "orthonormality_residual",
    "quadrature_gram",
]

# switch to log-space section evaluation beyond this degree: the linear
# Gram diagonal underflows (and its inverse square root overflows) once
# the central binomial factor passes the double-precision range
_DENSE_DEGREE = 900

_CHUNK = 8192


@dataclass(frozen=True)
class HardyBasis:
    """Orthonormal polynomial basis of the level-k section space (curved model).

    At moderate degree, coeffs[a, r] is the monomial-a coefficient of
    section r, with coeffs^H @ gram @ coeffs = I to machine precision.
    Past _DENSE_DEGREE the Gram diagonal leaves double-precision range,
    gram/coeffs stay None, and sections are evaluated purely through
    log_normalizers = -0.5*log(Gram diagonal).
    """

    model: ModelSpace
    k: int
    degree: int                          # total monomial degree n = D*k
    log_normalizers: np.ndarray          # (n+1,)
    gram: Optional[np.ndarray] = None    # (n+1, n+1) or None at high degree
    coeffs: Optional[np.ndarray] = None  # (n+1, n+1) or None at high degree

    @property
    def dim(self) -> int:
        return self.degree + 1


def _log_gram_diagonal(D: int, n: int) -> np.ndarray:
    a = np.arange(n + 1)
    return (math.log(D * math.pi)
            + gammaln(a + 1) + gammaln(n - a + 1) - gammaln(n + 2))


def build_basis(model: ModelSpace, k: int) -> HardyBasis:
    """Orthonormalize the monomial basis of the level-k section space.

    Only the curved model carries a finite basis; the flat model's kernel
    is closed-form and needs none.
    """
    if model.kind != PROJECTIVE_LINE:
        raise ValueError("polynomial bases exist only for the curved model")
    if k < 1:
        raise ValueError("level k must be a positive integer")
    n = model.degree * k
    logdiag = _log_gram_diagonal(model.degree, n)
    lognorm = -0.5 * logdiag
    if n > _DENSE_DEGREE:
        return HardyBasis(model=model, k=k, degree=n, log_normalizers=lognorm)
    gram = np.diag(np.exp(logdiag)).astype(complex)
    low = np.linalg.cholesky(gram)
    # sections s_r = sum_a coeffs[a, r] * monomial_a with coeffs = inv(L)^H
    coeffs = np.linalg.inv(low).conj().T
    return HardyBasis(model=model, k=k, degree=n, log_normalizers=lognorm,
                      gram=gram, coeffs=coeffs)


def _power_matrix(vs: np.ndarray, n: int) -> np.ndarray:
    """Rows of v0^a * v1^(n-a), a = 0..n, for unit representatives vs (N, 2)."""
    N = vs.shape[0]
    p0 = np.ones((N, n + 1), dtype=complex)
    p1 = np.ones((N, n + 1), dtype=complex)
    np.cumprod(np.repeat(vs[:, :1], n, axis=1), axis=1, out=p0[:, 1:])
    np.cumprod(np.repeat(vs[:, 1:], n, axis=1), axis=1, out=p1[:, 1:])
    return p0 * p1[:, ::-1]


def _log_section_matrix(vs: np.ndarray, n: int, lognorm: np.ndarray) -> np.ndarray:
    """exp(a*log v0 + (n-a)*log v1 + lognorm_a): stable at high degree.

    Zero components are handled by clamping log|.| to a large negative
    value, which exponentiates cleanly to zero.
    """
    a = np.arange(n + 1)
    logv = np.log(np.maximum(np.abs(vs), 1e-300)) + 1j * np.angle(vs)
    logv = np.where(np.abs(vs) == 0.0, -1e12 + 0j, logv)
    expo = (a[None, :] * logv[:, :1] + (n - a)[None, :] * logv[:, 1:]
            + lognorm[None, :])
    return np.exp(expo)


def _diagonal_scales(basis: HardyBasis) -> Optional[np.ndarray]:
    """Section scales when the coefficient matrix is diagonal, else None."""
    c = basis.coeffs
    if np.count_nonzero(c - np.diag(np.diag(c))) == 0:
        return np.diag(c)
    return None


def evaluate_sections_many(basis: HardyBasis, vs: np.ndarray) -> np.ndarray:
    """Matrix S[i, r] = s_r(v_i) for representatives vs of shape (N, 2)."""
    vs = np.asarray(vs, dtype=complex)
    out = np.empty((vs.shape[0], basis.dim), dtype=complex)
    diag = None if basis.coeffs is None else _diagonal_scales(basis)
    for lo in range(0, vs.shape[0], _CHUNK):
        hi = min(lo + _CHUNK, vs.shape[0])
        if basis.coeffs is None:
            out[lo:hi] = _log_section_matrix(vs[lo:hi], basis.degree,
                                             basis.log_normalizers)
        elif diag is not None:
            out[lo:hi] = _power_matrix(vs[lo:hi], basis.degree) * diag[None, :]
        else:
            out[lo:hi] = _power_matrix(vs[lo:hi], basis.degree) @ basis.coeffs
    return out


def evaluate_sections(basis: HardyBasis, x: CircleBundlePoint) -> np.ndarray:
    """Values s_r(x) of the orthonormal sections at one bundle point."""
    return evaluate_sections_many(basis, x.v[None, :])[0]


@dataclass(frozen=True)
class ProjectorKernel:
    """Level-k projector kernel: closed form (flat) or basis sum (curved)."""

    model: ModelSpace
    k: int
    basis: Optional[HardyBasis] = None

    def __post_init__(self):
        if self.model.kind == PROJECTIVE_LINE and self.basis is None:
            object.__setattr__(self, "basis", build_basis(self.model, self.k))


_KERNEL_CACHE: dict = {}


def cached_kernel(model: ModelSpace, k: int) -> ProjectorKernel:
    """Shared per-(model, k) kernel; curved-model bases are built once."""
    key = (model.kind, model.dim, model.degree, k)
    pk = _KERNEL_CACHE.get(key)
    if pk is None:
        pk = ProjectorKernel(model=model, k=k)
        _KERNEL_CACHE[key] = pk
    return pk


def kernel_eval(kernel: ProjectorKernel, x: CircleBundlePoint,
                y: CircleBundlePoint) -> complex:
    """Kernel value at a pair of bundle points."""
    if kernel.model.kind == BARGMANN_FOCK:
        return _bf_kernel(kernel.model, kernel.k, x, y)
    sx = evaluate_sections(kernel.basis, x)
    sy = evaluate_sections(kernel.basis, y)
    return complex(np.sum(sx * np.conj(sy)))


def kernel_eval_many(kernel: ProjectorKernel, x: CircleBundlePoint,
                     vs: np.ndarray) -> np.ndarray:
    """Values K(x, y_i) against many curved-model representatives (N, 2)."""
    sx = evaluate_sections(kernel.basis, x)
    out = np.empty(vs.shape[0], dtype=complex)
    for lo in range(0, vs.shape[0], _CHUNK):
        hi = min(lo + _CHUNK, vs.shape[0])
        out[lo:hi] = np.conj(evaluate_sections_many(kernel.basis, vs[lo:hi])) @ sx
    return out


# ----------------------------------------------------------------------
# Bundle quadrature (curved model).
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class XQuadrature:
    """Product quadrature on the unit circle bundle of the curved model.

    Gauss-Legendre in the latitude coordinate u = sin^2(chi), uniform in
    the azimuth; node counts default to 4*D*k + 16 per direction, enough
    for exact integration of level-k section products.  The fiber
    dimension is averaged analytically for fiber-invariant integrands
    (every same-level kernel product is) and sampled with n_fiber uniform
    nodes otherwise.
    """

    model: ModelSpace
    k: int
    n_lat: int = 0
    n_az: int = 0
    n_fiber: int = 0
    reps: np.ndarray = field(default=None, repr=False)
    weights: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.model.kind != PROJECTIVE_LINE:
            raise ValueError("bundle quadrature is defined for the curved model")
        default = 4 * self.model.degree * self.k + 16
        n_lat = self.n_lat or default
        n_az = self.n_az or default
        n_fiber = self.n_fiber or default
        object.__setattr__(self, "n_lat", n_lat)
        object.__setattr__(self, "n_az", n_az)
        object.__setattr__(self, "n_fiber", n_fiber)
        xg, wg = roots_legendre(n_lat)
        u = 0.5 * (xg + 1.0)                       # latitude, mapped to [0, 1]
        wu = 0.5 * wg
        phi = 2.0 * math.pi * np.arange(n_az) / n_az
        uu, pp = np.meshgrid(u, phi, indexing="ij")
        reps = np.stack([np.sqrt(1.0 - uu).ravel(),
                         (np.sqrt(uu) * np.exp(1j * pp)).ravel()], axis=1)
        D = self.model.degree
        wts = (D / 2.0) * np.outer(wu, np.full(n_az, 2.0 * math.pi / n_az)).ravel()
        object.__setattr__(self, "reps", reps)
        object.__setattr__(self, "weights", wts)

    def integrate(self, func: Callable[[np.ndarray], np.ndarray],
                  fiber_invariant: bool = True) -> complex:
        """Integrate func(reps (N,2)) -> values (N,) against the bundle measure.

        With fiber_invariant=False the integrand is additionally averaged
        over n_fiber uniform fiber rotations of the representatives.
        """
        if fiber_invariant:
            return complex(np.sum(self.weights * func(self.reps)))
        total = 0.0 + 0.0j
        D = self.model.degree
        for m in range(self.n_fiber):
            phase = np.exp(1j * (2.0 * math.pi * m / self.n_fiber) / D)
            total += complex(np.sum(self.weights * func(self.reps * phase)))
        return total / self.n_fiber


def kernel_trace(kernel: ProjectorKernel, quad: Optional[XQuadrature] = None) -> float:
    """Quadrature value of the kernel diagonal over the bundle (curved model)."""
    if kernel.model.kind != PROJECTIVE_LINE:
        raise ValueError("kernel trace requires the compact (curved) model")
    quad = quad or XQuadrature(model=kernel.model, k=kernel.k)
    total = 0.0
    for lo in range(0, quad.reps.shape[0], _CHUNK):
        hi = min(lo + _CHUNK, quad.reps.shape[0])
        s = evaluate_sections_many(kernel.basis, quad.reps[lo:hi])
        total += float(np.sum(quad.weights[lo:hi] * np.sum(np.abs(s) ** 2, axis=1)))
    return total


def _bf_reproducing_integral(kernel: ProjectorKernel, x: CircleBundlePoint,
                             y: CircleBundlePoint, nodes: int) -> complex:
    """Truncated Gaussian quadrature of K(x,.)K(.,y) over the flat base."""
    from bsquant.models import bf_kernel_many
    k = kernel.k
    cx = 0.5 * (x.z[0] + y.z[0])
    half = max(abs(x.z[0] - cx), abs(y.z[0] - cx)) + 10.0 / math.sqrt(k)
    xg, wg = roots_legendre(nodes)
    re = cx.real + half * xg
    im = cx.imag + half * xg
    ww = np.outer(wg, wg) * half * half
    zz = re[:, None] + 1j * im[None, :]
    zs = zz.ravel()[:, None]
    zero = np.zeros(zs.shape[0])
    kx = bf_kernel_many(kernel.model, k, x, zs, zero)    # K(x, y_i)
    ky = bf_kernel_many(kernel.model, k, y, zs, zero)    # K(y, y_i)
    return complex(np.sum(ww.ravel() * kx * np.conj(ky)))


def reproducing_residual(kernel: ProjectorKernel, x: CircleBundlePoint,
                         y: CircleBundlePoint,
                         quad: Optional[XQuadrature] = None) -> float:
    """Self-reproducing defect of the kernel under its own quadrature.

    Returns |integral of K(x,.)K(.,y) minus K(x,y)| divided by |K(x,y)|
    when |K(x,y)| exceeds 1e-6, else the absolute residual.  For the
    curved model the integrand is invariant under fiber rotation of the
    middle point (the level-k phases of the two factors cancel), so the
    fiber average is analytic and the quadrature runs over latitude x
    azimuth nodes; the flat model (base dimension 1 only) integrates over
    a truncated base square with Gauss-Legendre nodes.
    """
    if kernel.model.kind == BARGMANN_FOCK:
        if kernel.model.dim != 1:
            raise ValueError("flat-model reproducing check supports d = 1 only")
        integral = _bf_reproducing_integral(kernel, x, y, nodes=96)
        kxy = _bf_kernel(kernel.model, kernel.k, x, y)
    else:
        quad = quad or XQuadrature(model=kernel.model, k=kernel.k)
        floor = 4 * kernel.model.degree * kernel.k
        if quad.n_lat < floor or quad.n_az < floor:
            raise ValueError(
                f"under-resolved bundle quadrature: need >= {floor} nodes per "
                f"direction for level {kernel.k}, got "
                f"({quad.n_lat}, {quad.n_az})")
        kx = kernel_eval_many(kernel, x, quad.reps)      # K(x, y_i)
        ky = kernel_eval_many(kernel, y, quad.reps)      # K(y, y_i)
        integral = complex(np.sum(quad.weights * kx * np.conj(ky)))
        kxy = kernel_eval(kernel, x, y)
    resid = abs(integral - kxy)
    return resid / abs(kxy) if abs(kxy) > 1e-6 else resid


def orthonormality_residual(basis: HardyBasis) -> float:
    """Max-entry defect of coeffs^H gram coeffs = identity."""
    if basis.coeffs is None:
        raise ValueError("dense Gram data is not materialized at this degree")
    g = basis.coeffs.conj().T @ basis.gram @ basis.coeffs
    return float(np.max(np.abs(g - np.eye(basis.dim))))


def quadrature_gram(basis: HardyBasis, quad: Optional[XQuadrature] = None) -> np.ndarray:
    """Monomial Gram recomputed by bundle quadrature (cross-check path)."""
    quad = quad or XQuadrature(model=basis.model, k=basis.k)
    n = basis.degree
    out = np.zeros((n + 1, n + 1), dtype=complex)
    for lo in range(0, quad.reps.shape[0], _CHUNK):
        hi = min(lo + _CHUNK, quad.reps.shape[0])
        powers = _power_matrix(quad.reps[lo:hi], n)
        # out[a, b] = sum_i w_i * powers[i, a] * conj(powers[i, b])
        out += (powers * quad.weights[lo:hi, None]).T @ powers.conj()
    return out
