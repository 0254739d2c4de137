import math

import numpy as np
import pytest

from bsquant.hardy import (
    ProjectorKernel,
    XQuadrature,
    build_basis,
    cached_kernel,
    evaluate_sections,
    evaluate_sections_many,
    kernel_eval,
    kernel_trace,
    orthonormality_residual,
    reproducing_residual,
)
from bsquant.models import (
    BARGMANN_FOCK,
    PROJECTIVE_LINE,
    ModelSpace,
    bf_point,
    circle_act,
    cp1_point,
)

CP = ModelSpace(kind=PROJECTIVE_LINE, degree=2)
CP1 = ModelSpace(kind=PROJECTIVE_LINE, degree=1)
BF = ModelSpace(kind=BARGMANN_FOCK, dim=1)


@pytest.mark.parametrize("k", [4, 8, 16, 32])
def test_basis_dimension(k):
    basis = build_basis(CP, k)
    assert basis.dim == CP.section_dim(k) == 2 * k + 1


@pytest.mark.parametrize("k", [4, 16])
def test_orthonormality(k):
    assert orthonormality_residual(build_basis(CP, k)) < 1e-12


@pytest.mark.parametrize("k", [4, 8, 32])
def test_reproducing_property(k):
    kern = cached_kernel(CP, k)
    x = cp1_point(CP, [1.0, 0.3 + 0.1j])
    y = cp1_point(CP, [0.9, -0.2 + 0.5j])
    assert reproducing_residual(kern, x, y) < 1e-9


def test_reproducing_refuses_thin_quadrature():
    kern = cached_kernel(CP, 8)
    x = cp1_point(CP, [1.0, 0.0])
    with pytest.raises(ValueError, match="under-resolved"):
        reproducing_residual(kern, x, x,
                             quad=XQuadrature(model=CP, k=8, n_lat=8, n_az=8))


def test_flat_reproducing_property():
    kern = ProjectorKernel(model=BF, k=16)
    x = bf_point(BF, [0.3 + 0.2j], 0.1)
    y = bf_point(BF, [0.1 - 0.4j], -0.3)
    assert reproducing_residual(kern, x, y) < 1e-6


@pytest.mark.parametrize("k", [4, 8, 16])
def test_trace_counts_dimension(k):
    kern = cached_kernel(CP, k)
    tr = kernel_trace(kern)
    assert tr == pytest.approx(2 * k + 1, rel=1e-10)


@pytest.mark.parametrize("model,k", [(CP, 6), (CP1, 9)])
def test_kernel_closed_form(model, k):
    # the curved projector collapses to a power of the Hermitian pairing
    D = model.degree
    kern = cached_kernel(model, k)
    x = cp1_point(model, [1.0, 0.4 - 0.3j])
    y = cp1_point(model, [0.8 + 0.1j, 0.5])
    ip = complex(np.sum(x.v * np.conj(y.v)))
    want = (D * k + 1) / (D * math.pi) * ip ** (D * k)
    assert kernel_eval(kern, x, y) == pytest.approx(want, rel=1e-12)


def test_kernel_equivariance_and_hermitian():
    kern = cached_kernel(CP, 12)
    x = cp1_point(CP, [1.0, 0.2 + 0.7j])
    y = cp1_point(CP, [0.3, 1.0 - 0.4j])
    kxy = kernel_eval(kern, x, y)
    assert np.conj(kernel_eval(kern, y, x)) == pytest.approx(kxy, rel=1e-12)
    th = 1.234
    assert kernel_eval(kern, circle_act(th, x), y) == pytest.approx(
        np.exp(1j * 12 * th) * kxy, rel=1e-12)


def test_quadrature_mass():
    quad = XQuadrature(model=CP, k=4)
    assert float(np.sum(quad.weights)) == pytest.approx(2 * math.pi)


def test_fiber_average_matches_explicit():
    quad = XQuadrature(model=CP, k=4, n_fiber=8)

    def f(reps):
        return np.abs(reps[:, 0]) ** 2

    implicit = quad.integrate(f, fiber_invariant=True)
    explicit = quad.integrate(f, fiber_invariant=False)
    assert implicit == pytest.approx(explicit, rel=1e-12)


class TestLargeDegreeEvaluation:
    """Past the dense-Gram regime sections evaluate through logs; the two
    paths must agree where both exist and stay accurate where only the
    log path does."""

    def test_paths_agree_at_moderate_degree(self):
        basis_dense = build_basis(CP, 64)
        x = cp1_point(CP, [0.8, 0.6 * np.exp(0.4j)])
        dense = evaluate_sections(basis_dense, x)
        reps = np.stack([x.v])
        many = evaluate_sections_many(basis_dense, reps)[0]
        assert np.max(np.abs(dense - many)) < 1e-12 * np.max(np.abs(dense))

    def test_log_path_kernel_at_large_level(self):
        # D k = 1024 exceeds the dense-Gram degree bound
        kern = cached_kernel(CP, 512)
        x = cp1_point(CP, [1.0, 1.0])
        y = cp1_point(CP, [1.0, 1.001])
        ip = complex(np.sum(x.v * np.conj(y.v)))
        want = (2 * 512 + 1) / (2 * math.pi) * ip ** 1024
        assert kernel_eval(kern, x, y) == pytest.approx(want, rel=1e-11)

    def test_orthonormality_requires_dense_data(self):
        basis = build_basis(CP, 512)
        with pytest.raises(ValueError, match="dense Gram"):
            orthonormality_residual(basis)
