import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bsquant.models import (
    BARGMANN_FOCK,
    PROJECTIVE_LINE,
    CircleBundlePoint,
    HeisenbergChart,
    ModelSpace,
    base_closure_defect,
    base_distance,
    bf_point,
    bundle_distance,
    chart_invert,
    circle_act,
    cp1_point,
    fiber_phase_between,
    heisenberg_eval,
    parse_model,
    szego_kernel,
)

BF = ModelSpace(kind=BARGMANN_FOCK, dim=1)
CP = ModelSpace(kind=PROJECTIVE_LINE, degree=2)


class TestParse:
    def test_flat(self):
        m = parse_model("bf:1")
        assert m.kind == BARGMANN_FOCK and m.dim == 1

    def test_curved(self):
        m = parse_model("cp1:2")
        assert m.kind == PROJECTIVE_LINE and m.degree == 2
        assert m.section_dim(8) == 17

    def test_rejects_garbage(self):
        for bad in ("torus:1", "cp1:0", "bf:-2", "cp1"):
            with pytest.raises(ValueError):
                parse_model(bad)


@given(st.floats(-10, 10, allow_nan=False), st.floats(-10, 10, allow_nan=False))
def test_circle_action_is_a_group_action(a, b):
    x = cp1_point(CP, [1.0, 0.5 + 0.25j])
    one_step = circle_act(a + b, x)
    two_step = circle_act(a, circle_act(b, x))
    assert bundle_distance(one_step, two_step) < 1e-9


def test_circle_action_rejects_nonunit():
    with pytest.raises(ValueError):
        circle_act(0.5 + 0j, bf_point(BF, [0.0]))


def test_fiber_phase_roundtrip():
    x = cp1_point(CP, [0.6, 0.8j])
    g = np.exp(0.77j)
    y = circle_act(g, x)
    assert fiber_phase_between(x, y) == pytest.approx(g, abs=1e-12)
    assert base_distance(x, y) == pytest.approx(0.0, abs=1e-7)


class TestChart:
    @pytest.mark.parametrize("model,center", [
        (BF, bf_point(BF, [0.4 - 0.2j], 0.3)),
        (CP, cp1_point(CP, [1.0, 0.3 + 0.5j])),
    ])
    def test_roundtrip(self, model, center):
        chart = HeisenbergChart(center=center)
        w = np.array([0.21 - 0.13j])
        x = heisenberg_eval(chart, w, 0.37)
        w2, th2 = chart_invert(chart, x)
        assert w2 == pytest.approx(w, abs=1e-12)
        assert th2 == pytest.approx(0.37, abs=1e-12)

    def test_center_maps_to_origin(self):
        chart = HeisenbergChart(center=cp1_point(CP, [1.0, 1.0]))
        w, th = chart_invert(chart, chart.center)
        assert np.allclose(w, 0) and th == pytest.approx(0.0)

    def test_curved_radius_refusal(self):
        chart = HeisenbergChart(center=cp1_point(CP, [1.0, 0.0]))
        assert chart.radius == pytest.approx(math.pi * math.sqrt(2) / 4)
        with pytest.raises(ValueError, match="chart radius"):
            heisenberg_eval(chart, np.array([5.0 + 0j]), 0.0)

    def test_flat_chart_is_global(self):
        chart = HeisenbergChart(center=bf_point(BF, [0.0]))
        assert chart.radius == math.inf
        heisenberg_eval(chart, np.array([50.0 + 0j]), 0.0)

    def test_isometric_at_center(self):
        # distance to an offset point is |w| + O(|w|^2)
        chart = HeisenbergChart(center=cp1_point(CP, [1.0, 1.0]))
        for r in (1e-3, 1e-2):
            x = heisenberg_eval(chart, np.array([r + 0j]), 0.0)
            assert base_distance(chart.center, x) == pytest.approx(
                r, rel=1e-3)


def test_base_distance_curved_scale():
    # antipodal points sit at half the great-circle length pi*sqrt(D)/2
    north = cp1_point(CP, [1.0, 0.0])
    south = cp1_point(CP, [0.0, 1.0])
    assert base_distance(north, south) == pytest.approx(
        math.sqrt(2) * math.pi / 2)


def test_closure_defect_resolves_below_arccos_noise():
    # representatives differing at machine precision: the geodesic
    # distance saturates near 1e-8 but the defect stays at the gap scale
    v = np.array([math.sqrt(0.75), 0.5], dtype=complex)
    x = cp1_point(CP, v)
    y = cp1_point(CP, v * np.exp(1j * math.pi))
    assert base_closure_defect(x, y) < 1e-12
    assert bundle_distance(x, y) < 1e-12    # -1 is a deck root at D=2


class TestFlatKernel:
    def test_documented_value(self):
        # scaled offsets p=1 transverse, q=1 along at level 4:
        # value is (4/pi) exp(-1 - i)
        k = 4
        x = bf_point(BF, [1.0 / math.sqrt(k)], 0.0)
        y = bf_point(BF, [1j / math.sqrt(k)], 0.0)
        got = szego_kernel(BF, k, x, y)
        want = (4 / math.pi) * np.exp(-1 - 1j)
        assert got == pytest.approx(want, rel=1e-14)

    def test_hermitian(self):
        x = bf_point(BF, [0.3 + 0.1j], 0.2)
        y = bf_point(BF, [-0.2 + 0.4j], -0.5)
        assert szego_kernel(BF, 8, x, y) == pytest.approx(
            np.conj(szego_kernel(BF, 8, y, x)), rel=1e-14)

    def test_equivariance(self):
        x = bf_point(BF, [0.3 + 0.1j], 0.2)
        y = bf_point(BF, [-0.2 + 0.4j], -0.5)
        k, th = 8, 0.9
        assert szego_kernel(BF, k, circle_act(th, x), y) == pytest.approx(
            np.exp(1j * k * th) * szego_kernel(BF, k, x, y), rel=1e-12)

    def test_rejects_bad_level(self):
        x = bf_point(BF, [0.0])
        with pytest.raises(ValueError):
            szego_kernel(BF, 0, x, x)


def test_point_model_mismatch_guard():
    x = bf_point(BF, [0.0])
    y = cp1_point(CP, [1.0, 0.0])
    with pytest.raises(ValueError):
        szego_kernel(BF, 4, x, y)


def test_cp1_point_normalizes():
    x = cp1_point(CP, [3.0, 4.0])
    assert np.linalg.norm(x.v) == pytest.approx(1.0, abs=1e-15)
