"""Tangent-space pairings and Lagrangian frame decompositions.

A model tangent space is C^d (d <= 4 in practice).  The Riemannian inner
product is the real part of the Hermitian pairing and the symplectic form
is its imaginary part, oriented so that pairing a real direction against
the corresponding imaginary direction gives +1:

    riemannian_inner(v, u)  = Re sum_i v_i conj(u_i)
    symplectic_pairing(v, u) = Im sum_i u_i conj(v_i)

With this orientation ``symplectic_pairing(v, i*v) == riemannian_inner(v, v)``
(compatibility with the complex structure), and for w = p + i q in one
dimension the pair (p, q) plays the transverse/parallel role used by the
prediction layer: ``symplectic_pairing(p, i q) == p*q``.

A :class:`LagrangianFrame` is a tuple of real-orthonormal tangent vectors
spanning a totally real (Lagrangian) subspace; :func:`decompose` splits a
tangent vector into its component along the frame and the orthogonal rest.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "TangentVector",
    "LagrangianFrame",
    "TangentDecomposition",
    "riemannian_inner",
    "symplectic_pairing",
    "decompose",
]

_RTOL_FRAME = 1e-9


def _as_components(v) -> np.ndarray:
    """Coerce a TangentVector, scalar, or array-like to a complex 1-d array."""
    if isinstance(v, TangentVector):
        return v.components
    arr = np.atleast_1d(np.asarray(v, dtype=complex))
    if arr.ndim != 1:
        raise ValueError(f"tangent vector must be one-dimensional, got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class TangentVector:
    """A tangent vector of the model space in chart coordinates (complex, length d)."""

    components: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "components",
                           np.atleast_1d(np.asarray(self.components, dtype=complex)))

    @property
    def dim(self) -> int:
        return self.components.shape[0]


@dataclass(frozen=True)
class LagrangianFrame:
    """Real-orthonormal tangent vectors spanning a totally real subspace.

    ``basis`` has shape (m, d): m frame vectors in a d-dimensional chart.
    For a loop m = 1 and the single vector is the unit tangent of the loop.
    """

    basis: np.ndarray

    def __post_init__(self):
        b = np.atleast_2d(np.asarray(self.basis, dtype=complex))
        object.__setattr__(self, "basis", b)

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    @property
    def rank(self) -> int:
        return self.basis.shape[0]

    def validate(self, rtol: float = _RTOL_FRAME) -> None:
        """Raise ValueError unless the frame is orthonormal and Lagrangian."""
        b = self.basis
        for i in range(self.rank):
            for j in range(self.rank):
                g = riemannian_inner(b[i], b[j])
                want = 1.0 if i == j else 0.0
                if abs(g - want) > rtol:
                    raise ValueError(
                        f"frame vectors {i},{j} not orthonormal: inner={g!r}")
                om = symplectic_pairing(b[i], b[j])
                if abs(om) > rtol:
                    raise ValueError(
                        f"frame vectors {i},{j} not Lagrangian: pairing={om!r}")


@dataclass(frozen=True)
class TangentDecomposition:
    """Split of a tangent vector into frame-parallel and perpendicular parts."""

    parallel: np.ndarray
    perpendicular: np.ndarray

    @property
    def vector(self) -> np.ndarray:
        return self.parallel + self.perpendicular


def riemannian_inner(v, u) -> float:
    """Real inner product Re <v, u> on the model tangent space."""
    vc, uc = _as_components(v), _as_components(u)
    if vc.shape != uc.shape:
        raise ValueError("dimension mismatch in riemannian_inner")
    return float(np.sum(vc * np.conj(uc)).real)


def symplectic_pairing(v, u) -> float:
    """Symplectic area of the (v, u) parallelogram, Im <u, v>.

    Antisymmetric; normalized so that pairing(1, i) == 1 in each coordinate,
    i.e. the real axis against the imaginary axis is positively oriented.
    """
    vc, uc = _as_components(v), _as_components(u)
    if vc.shape != uc.shape:
        raise ValueError("dimension mismatch in symplectic_pairing")
    return float(np.sum(uc * np.conj(vc)).imag)


def decompose(w, frame: LagrangianFrame, validate: bool = False) -> TangentDecomposition:
    """Project w onto the real span of the frame vectors.

    The parallel part is sum_i riemannian_inner(w, u_i) * u_i (real
    coefficients); the perpendicular part is the remainder.  For the frames
    produced by branch location the parallel part points along the loop and
    the perpendicular part carries the Gaussian decay of the quantized
    section.
    """
    wc = _as_components(w)
    if validate:
        frame.validate()
    if frame.dim != wc.shape[0]:
        raise ValueError("dimension mismatch between vector and frame")
    par = np.zeros_like(wc)
    for i in range(frame.rank):
        par = par + riemannian_inner(wc, frame.basis[i]) * frame.basis[i]
    return TangentDecomposition(parallel=par, perpendicular=wc - par)
