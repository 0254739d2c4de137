"""Scaling-limit predictions for quantized loops near a passage.

At a passage the quantizer integral localizes: writing the evaluation
offset in the passage-adapted chart as w = p + i q (p transverse to the
loop, q along it) and rescaling the loop parameter by 1/sqrt(k), the
integrand is a Gaussian in the along-loop variable times a half-power
series in 1/sqrt(k).  Integrating term by term gives

    u_k  ~  (2k/pi)^{d/2} * sum_j  phase_j^{-k}
            * exp(-p_j^2 - i p_j q_j) * amp_j
            * sum_{l <= ell} k^{-l/2} a_{l,j}(w_j),

with a_{0,j} = 1.  The a_l are polynomials in the adapted offset w_j,
assembled here from the branch Taylor data (fiber residual, density
Jacobian, weight) by an exponential-series recursion followed by Gaussian
moment substitution.  Corrections intrinsic to the curved kernel itself
are deliberately not modeled: flat-model predictions are exact to all
computed orders, curved-model corrections beyond the leading term are
meant to be measured, not asserted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial import polynomial as npoly

from bsquant.geometry import decompose
from bsquant.legendrian import Branch, BranchSet

__all__ = [
    "MomentTable",
    "gaussian_moment",
    "BranchExpansion",
    "compose_expansion",
    "Prediction",
    "PredictionTerm",
    "predict",
    "remainder_bound",
    "szego_remainder_bound",
]

_MAX_ORDER = 2          # half-power corrections implemented through k^{-1}


# ----------------------------------------------------------------------
# Gaussian moments.
# ----------------------------------------------------------------------

class MomentTable:
    """Moments of s^m against exp(-i w s - s^2/2), as polynomials.

    With z = -i w the integral equals sqrt(2 pi) exp(w_im^2/2 - i w_re w_im
    - w_re^2/2) mu_m(z), where mu_0 = 1, mu_1 = z and

        mu_{m+1}(z) = z mu_m(z) + m mu_{m-1}(z).

    The table stores the mu_m as coefficient arrays in the adapted offset
    w directly (z = -i w substituted), up to `max_degree`.
    """

    def __init__(self, max_degree: int = 8):
        if max_degree < 2:
            raise ValueError("moment table needs max_degree >= 2")
        self.max_degree = max_degree
        mus = [np.array([1.0 + 0.0j]), np.array([0.0, 1.0 + 0.0j])]
        for m in range(1, max_degree):
            nxt = np.zeros(m + 2, dtype=complex)
            nxt[1:] += mus[m]
            nxt[:m] += m * mus[m - 1]
            mus.append(nxt)
        # substitute z = -i w: coefficient t picks up (-i)^t
        self._mu_in_w = tuple(
            mu * (-1j) ** np.arange(len(mu)) for mu in mus)

    def mu_poly(self, m: int) -> np.ndarray:
        """mu_m as ascending coefficients in the adapted offset w."""
        if m > self.max_degree:
            raise ValueError(
                f"moment degree {m} exceeds table bound {self.max_degree}")
        return self._mu_in_w[m]

    def mu_value(self, m: int, w: complex) -> complex:
        return complex(npoly.polyval(w, self.mu_poly(m)))


_TABLE = MomentTable()


def gaussian_moment(beta: Sequence[int], p: Sequence[float],
                    q: Sequence[float],
                    table: Optional[MomentTable] = None) -> complex:
    """integral of s^beta exp(-i p.s - ||q - s||^2 / 2) over R^d.

    Product structure over axes; each axis contributes
    sqrt(2 pi) exp(-i p q - p^2/2) mu_beta(q - i p).
    """
    table = table or _TABLE
    beta = tuple(int(b) for b in beta)
    p = np.atleast_1d(np.asarray(p, dtype=float))
    q = np.atleast_1d(np.asarray(q, dtype=float))
    if not len(beta) == len(p) == len(q):
        raise ValueError("beta, p, q must share a length")
    out = 1.0 + 0.0j
    for b, pi, qi in zip(beta, p, q):
        w = pi + 1j * qi
        out *= (math.sqrt(2.0 * math.pi)
                * np.exp(-1j * pi * qi - pi ** 2 / 2.0)
                * table.mu_value(b, w))
    return complex(out)


# ----------------------------------------------------------------------
# Composed half-power expansion of one passage.
# ----------------------------------------------------------------------

def _poly_w_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return npoly.polymul(a, b)


def _series_mul(A: Dict[int, Dict[int, np.ndarray]],
                B: Dict[int, Dict[int, np.ndarray]],
                ell: int) -> Dict[int, Dict[int, np.ndarray]]:
    """Multiply two half-power series of {grade: {s_degree: poly_in_w}}."""
    out: Dict[int, Dict[int, np.ndarray]] = {r: {} for r in range(ell + 1)}
    for r1, terms1 in A.items():
        for r2, terms2 in B.items():
            if r1 + r2 > ell:
                continue
            dst = out[r1 + r2]
            for s1, c1 in terms1.items():
                for s2, c2 in terms2.items():
                    key = s1 + s2
                    prod = _poly_w_mul(c1, c2)
                    dst[key] = (npoly.polyadd(dst[key], prod)
                                if key in dst else prod)
    return out


def _series_exp(G: Dict[int, Dict[int, np.ndarray]],
                ell: int) -> Dict[int, Dict[int, np.ndarray]]:
    """exp of a half-power series with zero grade-0 part, via
    r E_r = sum_m m G_m E_{r-m}."""
    E: Dict[int, Dict[int, np.ndarray]] = {0: {0: np.array([1.0 + 0.0j])}}
    for r in range(1, ell + 1):
        acc: Dict[int, np.ndarray] = {}
        for m in range(1, r + 1):
            if m not in G or not G[m]:
                continue
            single = _series_mul({0: G[m]}, {0: E[r - m]}, 0)[0]
            for s, c in single.items():
                c = m * c
                acc[s] = npoly.polyadd(acc[s], c) if s in acc else c
        E[r] = {s: c / r for s, c in acc.items()}
    return E


@dataclass(frozen=True)
class BranchExpansion:
    """Correction polynomials a_l (ascending coefficients in the adapted
    offset w_j) for one passage, l = 0..order."""

    branch: Branch
    order: int
    coefficient_polys: Tuple[np.ndarray, ...]

    def correction(self, w_adapted: complex, k: float) -> complex:
        """sum over l of k^{-l/2} a_l(w_j)."""
        return complex(sum(
            k ** (-l / 2.0) * npoly.polyval(w_adapted, poly)
            for l, poly in enumerate(self.coefficient_polys)))


def compose_expansion(branch: Branch, ell: int = 2,
                      include_chart_change: bool = False,
                      table: Optional[MomentTable] = None) -> BranchExpansion:
    """Assemble the a_l polynomials from one passage's Taylor data.

    Multiplies the fiber-residual exponential against the weight-density
    amplitude series, then substitutes Gaussian moments for the powers of
    the rescaled along-loop variable.  `include_chart_change` additionally
    couples the transverse chart residual into the exponent (a variant;
    the residual vanishes identically for straight passages, where both
    settings agree).
    """
    if not 0 <= ell <= _MAX_ORDER:
        raise ValueError(
            f"correction order {ell} outside the implemented range "
            f"0..{_MAX_ORDER}")
    table = table or _TABLE
    fib = branch.fiber_taylor
    xi = branch.chart_taylor
    amp = npoly.polymul(branch.weight_taylor, branch.density_taylor)
    if len(amp) < ell + 1 or len(fib) < ell + 3:
        raise ValueError(
            "branch Taylor data has insufficient order for the requested "
            f"correction order {ell}; re-extract with a higher order")

    # exponent corrections by half-power grade r:
    #   -i f_{r+2} s^{r+2}   (fiber residual, rescaled)
    #   w xi_{r+1} s^{r+1} and -1/2 sum xi_m xi_{m'} s^{m+m'}  (optional)
    G: Dict[int, Dict[int, np.ndarray]] = {}
    for r in range(1, ell + 1):
        terms: Dict[int, np.ndarray] = {}
        if r + 2 < len(fib) and fib[r + 2] != 0:
            terms[r + 2] = np.array([-1j * fib[r + 2]])
        if include_chart_change:
            if r + 1 < len(xi) and xi[r + 1] != 0:
                terms[r + 1] = np.array([0.0, xi[r + 1]])
            acc = 0.0 + 0.0j
            for m in range(2, r + 1):
                mp = r + 2 - m
                if m < len(xi) and mp < len(xi):
                    acc += xi[m] * xi[mp]
            if acc != 0:
                terms[r + 2] = npoly.polyadd(
                    terms.get(r + 2, np.zeros(1, dtype=complex)),
                    np.array([-0.5 * acc]))
        if terms:
            G[r] = terms

    P = _series_exp(G, ell)
    amp_series: Dict[int, Dict[int, np.ndarray]] = {
        r: {r: np.array([complex(amp[r] / amp[0])])}
        for r in range(ell + 1) if r < len(amp)}
    P = _series_mul(amp_series, P, ell)

    polys = []
    for l in range(ell + 1):
        total = np.zeros(1, dtype=complex)
        for s_deg, c in P.get(l, {}).items():
            if s_deg > table.max_degree:
                raise ValueError(
                    f"moment degree {s_deg} exceeds the table bound "
                    f"{table.max_degree}")
            total = npoly.polyadd(total, _poly_w_mul(c, table.mu_poly(s_deg)))
        polys.append(total)
    return BranchExpansion(branch=branch, order=ell,
                           coefficient_polys=tuple(polys))


# ----------------------------------------------------------------------
# The prediction and its error envelopes.
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class PredictionTerm:
    """One passage's contribution (before the common (2k/pi)^{d/2})."""

    branch_index: int
    p: float
    q: float
    fiber_power: complex
    gaussian: complex
    amplitude: complex
    correction: complex

    @property
    def value(self) -> complex:
        return self.fiber_power * self.gaussian * self.amplitude \
            * self.correction


@dataclass(frozen=True)
class Prediction:
    """Scaling-limit value at one offset, with the validity flag."""

    value: complex
    k: int
    ell: int
    w: complex
    in_window: bool
    terms: Tuple[PredictionTerm, ...]


def _adapted_offset(branch: Branch, w: complex) -> complex:
    return branch.tangent_rotation * w


def predict(branchset: BranchSet, w: complex, k: int, ell: int = 2,
            window_const: float = 1.0,
            include_chart_change: bool = False,
            expansions: Optional[Sequence[BranchExpansion]] = None
            ) -> Prediction:
    """Predicted u_k at chart offset w/sqrt(k) from the evaluation center.

    `w` is the order-one offset in the center's chart (complex, base
    dimension 1).  Offsets beyond window_const * k^{1/6} fall outside the
    regime the expansion covers; the value is still computed but flagged.
    Pass precomputed `expansions` (one per branch, same order) to amortize
    composition across many offsets.
    """
    model = branchset.base.model
    if model.dim != 1:
        raise ValueError("predictions are implemented for base dimension 1")
    w = complex(w)
    if expansions is None:
        expansions = [compose_expansion(b, ell, include_chart_change)
                      for b in branchset.branches]
    elif len(expansions) != len(branchset.branches):
        raise ValueError("one expansion per branch required")

    in_window = abs(w) <= window_const * k ** (1.0 / 6.0)
    terms = []
    for idx, (br, ex) in enumerate(zip(branchset.branches, expansions)):
        if ex.order < ell:
            raise ValueError("expansion order below the requested order")
        wj = _adapted_offset(br, w)
        p, q = wj.real, wj.imag
        phi = math.atan2(br.fiber_phase.imag, br.fiber_phase.real)
        fiber_power = complex(np.exp(-1j * k * phi))
        gaussian = complex(np.exp(-p * p - 1j * p * q))
        corr = complex(sum(
            k ** (-l / 2.0) * npoly.polyval(wj, ex.coefficient_polys[l])
            for l in range(ell + 1)))
        terms.append(PredictionTerm(
            branch_index=idx, p=p, q=q, fiber_power=fiber_power,
            gaussian=gaussian, amplitude=br.weight_value, correction=corr))
    scale = (2.0 * k / math.pi) ** (model.dim / 2.0)
    value = scale * sum(t.value for t in terms)
    return Prediction(value=complex(value), k=k, ell=ell, w=w,
                      in_window=in_window, terms=tuple(terms))


def transverse_norm(branchset: BranchSet, w: complex) -> float:
    """||w_perp|| for the branch nearest in angle: the transverse part of
    the offset against the first branch frame (all passages of the preset
    loops share their tangent direction up to sign)."""
    br = branchset.branches[0]
    dec = decompose(np.array([w], dtype=complex), br.frame)
    return float(np.linalg.norm(dec.perpendicular))


def remainder_bound(branchset: BranchSet, w: complex, k: int, ell: int,
                    c_const: float = 1.0, eps: float = 0.1) -> float:
    """Envelope for |u_k - prediction(ell)| after removing (2k/pi)^{d/2}:

        C k^{(d - ell - 1)/2} sum_j exp(-(1 - eps)/2 ||w_perp_j||^2).

    The constant is a calibration input (fit on small k, then tested on
    held-out larger k); eps trades sharpness near the loop for validity
    of the envelope across the window.
    """
    if eps <= 0 or eps >= 1:
        raise ValueError("eps must lie in (0, 1)")
    d = branchset.base.model.dim
    acc = 0.0
    for br in branchset.branches:
        p = (_adapted_offset(br, w)).real
        acc += math.exp(-(1.0 - eps) / 2.0 * p * p)
    return c_const * k ** ((d - ell - 1) / 2.0) * acc


def szego_remainder_bound(k: int, R: int, p: float, q: float, q_j: float,
                          c_const: float = 1.0, eps: float = 0.1,
                          dim: int = 1) -> float:
    """Envelope for the kernel's own deviation from its Gaussian limit at
    scaled offsets (p + i q_j, i q)/sqrt(k):

        C k^{d - (R+1)} exp(-(1 - eps)/2 (p^2 + (q - q_j)^2)).
    """
    if eps <= 0 or eps >= 1:
        raise ValueError("eps must lie in (0, 1)")
    gap = (q - q_j)
    return (c_const * k ** (dim - (R + 1))
            * math.exp(-(1.0 - eps) / 2.0 * (p * p + gap * gap)))
