import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import unitary_group

from bsquant.geometry import (
    LagrangianFrame,
    TangentVector,
    decompose,
    riemannian_inner,
    symplectic_pairing,
)


def _cvec(draw, dim):
    parts = draw(st.lists(
        st.floats(-10, 10, allow_nan=False, allow_infinity=False),
        min_size=2 * dim, max_size=2 * dim))
    return np.array(parts[:dim]) + 1j * np.array(parts[dim:])


@st.composite
def complex_vectors(draw, dim=2):
    return _cvec(draw, dim)


@given(complex_vectors(), complex_vectors())
def test_riemannian_symmetry(v, u):
    assert riemannian_inner(v, u) == pytest.approx(riemannian_inner(u, v))


@given(complex_vectors(), complex_vectors())
def test_symplectic_antisymmetry(v, u):
    assert symplectic_pairing(v, u) == pytest.approx(
        -symplectic_pairing(u, v), abs=1e-9)


@given(complex_vectors())
def test_compatibility_with_complex_structure(v):
    # pairing v against i v recovers the squared length
    assert symplectic_pairing(v, 1j * v) == pytest.approx(
        riemannian_inner(v, v), rel=1e-12, abs=1e-12)


def test_orientation_convention():
    # real axis against imaginary axis is +1 per coordinate
    assert symplectic_pairing([1.0 + 0j], [1j]) == pytest.approx(1.0)
    assert symplectic_pairing([2.0 + 0j], [3j]) == pytest.approx(6.0)


def test_decompose_documented_example():
    frame = LagrangianFrame(basis=np.array([[1j]]))
    dec = decompose(np.array([1.0 + 2.0j]), frame)
    assert dec.parallel == pytest.approx(np.array([2j]))
    assert dec.perpendicular == pytest.approx(np.array([1.0 + 0j]))


def test_decompose_reassembles():
    frame = LagrangianFrame(basis=np.array([[1.0 + 0j, 0j]]))
    w = np.array([0.3 - 0.7j, 1.1 + 0.2j])
    dec = decompose(w, frame)
    assert dec.vector == pytest.approx(w)
    # parallel part has real frame coefficients only
    assert riemannian_inner(dec.perpendicular, frame.basis[0]) == \
        pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("dim", [1, 2, 3, 4])
def test_random_unitary_frames(dim):
    rng = np.random.default_rng(100 + dim)
    for _ in range(5):
        if dim == 1:
            U = np.array([[np.exp(1j * rng.uniform(0, 2 * np.pi))]])
        else:
            U = unitary_group.rvs(dim, random_state=rng)
        frame = LagrangianFrame(basis=U.T.copy())
        frame.validate()
        w = rng.normal(size=dim) + 1j * rng.normal(size=dim)
        dec = decompose(w, frame)
        assert dec.parallel + dec.perpendicular == pytest.approx(w)
        again = decompose(dec.parallel, frame)
        assert again.perpendicular == pytest.approx(
            np.zeros(dim), abs=1e-10)


def test_frame_rejects_non_orthonormal():
    with pytest.raises(ValueError):
        LagrangianFrame(basis=np.array([[1.0 + 0j, 1.0 + 0j]]) * 2).validate()


def test_frame_rejects_symplectic_pair():
    # the span {e, i e} is not totally real
    bad = np.array([[1.0 + 0j, 0j], [1j, 0j]])
    with pytest.raises(ValueError):
        LagrangianFrame(basis=bad).validate()


def test_tangent_vector_wrapper():
    tv = TangentVector(components=np.array([1.0 + 1j]))
    assert tv.dim == 1
    assert riemannian_inner(tv, tv) == pytest.approx(2.0)
