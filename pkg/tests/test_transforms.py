import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cxlegendre import (
    Box,
    Constant,
    Euclidean,
    FubiniStudy,
    GaussianBump,
    LegendreTransform,
    QuadraticField,
    SampledFunction,
    admissibility,
    complex_legendre_flat,
    diastasis_legendre,
    double_transform_defect,
    real_legendre,
    transform_field,
)
from cxlegendre.errors import ConcavityError, NeighborhoodViolation
from cxlegendre.potentials import NeighborhoodEstimate
from cxlegendre.transforms import brute_force_transform

coord = st.floats(-0.6, 0.6)
queries = st.tuples(coord, coord).map(lambda t: np.array([complex(*t)]))


def test_real_legendre_quartic(oracle):
    ref = oracle["real_legendre_quartic"]
    res = real_legendre(
        lambda x: x[:, 0] ** 4, [1.0], -2.0, 2.0,
        gradient=lambda x: 4 * x**3, hessian=lambda x: (12 * x**2)[:, :, None],
    )
    assert res.value == pytest.approx(ref["value"], abs=1e-12)
    assert res.argmax[0] == pytest.approx(ref["argmax"], abs=1e-9)
    assert not res.on_boundary
    grid_only = real_legendre(lambda x: x[:, 0] ** 4, [1.0], -2.0, 2.0, points=100_001)
    assert grid_only.value == pytest.approx(ref["brute"], abs=1e-12)


def test_real_legendre_flags_boundary_maximum():
    res = real_legendre(lambda x: 0.0 * x[:, 0], [1.0], -1.0, 1.0, points=101)
    assert res.on_boundary and res.value == pytest.approx(1.0)


def test_flat_transform_of_quadratic(oracle, euclid_nb):
    ref = oracle["flat_quadratic"]
    v, z = complex_legendre_flat(QuadraticField(2.0, [0j]), Euclidean(), euclid_nb, np.array([1.0 + 0j]))
    assert float(v) == pytest.approx(ref["value"], abs=1e-12)
    assert np.allclose([z[0].real, z[0].imag], ref["argmax"], atol=1e-10)


def test_quadratic_conjugate(oracle, euclid_nb):
    eta = QuadraticField(0.1, [0.2 + 0.1j])
    for case in oracle["quadratic_conjugate"]:
        q = np.array([complex(*case["q"])])
        v, z = diastasis_legendre(eta, Euclidean(), euclid_nb, q)
        assert float(v) == pytest.approx(case["value"], abs=1e-12)
        assert z[0] == pytest.approx(complex(*case["argmax"]), abs=1e-10)


def test_constant_perturbation(euclid_nb, fs_nb):
    q = Box.cube(1, 0.8, 9).grid()
    for pot, nb in ((Euclidean(), euclid_nb), (FubiniStudy(), fs_nb)):
        v, z = diastasis_legendre(Constant(0.3), pot, nb, q)
        assert np.allclose(v, -0.3, atol=1e-14)
        assert np.allclose(z, q, atol=1e-12)


def test_zero_is_fixed(euclid_nb, unit_box):
    res = transform_field(Constant(0.0), Euclidean(), euclid_nb, unit_box)
    assert np.max(np.abs(res.transform.values)) < 1e-15
    assert np.allclose(res.argmax, unit_box.grid(), atol=1e-14)
    assert res.report.worst_grad_norm < 1e-10


@given(q=queries, c=st.floats(-1, 1))
def test_shift_by_constant(fs_nb, q, c):
    eta = GaussianBump(0.02, [0.1j], 0.5)
    v0, z0 = diastasis_legendre(eta, FubiniStudy(), fs_nb, q)
    v1, z1 = diastasis_legendre(eta + c, FubiniStudy(), fs_nb, q)
    assert float(v1) == pytest.approx(float(v0) - c, abs=1e-12)
    assert np.allclose(z0, z1, atol=1e-10)


@given(q=queries, a=st.floats(0, 0.05), b=st.floats(0, 0.05))
def test_order_reversing(fs_nb, q, a, b):
    lo = GaussianBump(0.01, [0j], 0.5)
    hi = lo + GaussianBump(a, [0.2 + 0j], 0.4) + b
    v_lo, _ = diastasis_legendre(lo, FubiniStudy(), fs_nb, q)
    v_hi, _ = diastasis_legendre(hi, FubiniStudy(), fs_nb, q)
    assert float(v_hi) <= float(v_lo) + 1e-13


@given(q=queries)
def test_envelope_bound(fs_nb, q):
    # taking p = q in the sup gives L(eta)(q) >= -eta(q)
    eta = GaussianBump(0.03, [0.1 - 0.2j], 0.5)
    v, _ = diastasis_legendre(eta, FubiniStudy(), fs_nb, q)
    assert float(v) >= -float(eta.value(q)) - 1e-14


def test_involution_on_bump(euclid_nb):
    box = Box.cube(1, 1.0, 17)
    eta = GaussianBump(0.05, [0.1 + 0.05j], 0.5)
    worst, defect = double_transform_defect(eta, Euclidean(), euclid_nb, box)
    assert np.max(np.abs(defect)) < 1e-12


@given(st.lists(st.floats(-0.2, 0.2), min_size=81, max_size=81))
def test_brute_force_double_transform_is_below(vals):
    # For arbitrary grid data the double transform is an envelope from below.
    box = Box.cube(1, 1.0, 9)
    nb = NeighborhoodEstimate(0.6, 0.5, 2.0)
    sampled = SampledFunction(box, np.reshape(vals, box.shape))
    worst, _ = double_transform_defect(sampled, Euclidean(), nb, box, method="brute")
    assert worst <= 1e-14


def test_brute_force_agrees_with_newton(euclid_nb):
    box = Box.cube(1, 1.0, 81)
    eta = GaussianBump(0.05, [0.1 + 0.05j], 0.5)
    q = np.array([[0.0j], [0.2 - 0.1j], [-0.3 + 0.3j]])
    bf = brute_force_transform(SampledFunction.from_field(eta, box), Euclidean(), euclid_nb, queries=q)
    v, _ = diastasis_legendre(eta, Euclidean(), euclid_nb, q)
    # grid maximization loses at most O(h^2) of the quadratic peak
    assert np.all(bf <= v + 1e-14)
    assert np.max(v - bf) < box.steps[0] ** 2


def test_lazy_transform_derivatives(fs_nb):
    from conftest import fd_gradient, fd_hessian
    from cxlegendre.coords import to_complex, to_real

    eta = GaussianBump(0.04, [0.2 + 0.1j], 0.5)
    L = LegendreTransform(eta, FubiniStudy(), fs_nb)
    q = np.array([0.15 - 0.25j])
    x0 = to_real(q)
    g = fd_gradient(lambda x: float(L.value(to_complex(x))), x0, h=1e-4)
    H = fd_hessian(lambda x: L.gradient(to_complex(x)), x0, h=1e-4)
    assert np.allclose(L.gradient(q), g, atol=1e-7)
    assert np.allclose(L.hessian(q), H, atol=1e-7)
    Jfd = np.stack([
        (to_real(L.argmax(to_complex(x0 + e))) - to_real(L.argmax(to_complex(x0 - e)))) / 2e-4
        for e in 1e-4 * np.eye(2)
    ], axis=-1)
    assert np.allclose(L.map_jacobian(q), Jfd, atol=1e-7)


def test_admissibility_reports(euclid_nb, unit_box):
    small = admissibility(GaussianBump(0.01, [0j], 0.5), Euclidean(), euclid_nb, unit_box)
    assert small.a_priori and small.admissible
    big = admissibility(GaussianBump(3.0, [0j], 0.2), Euclidean(), euclid_nb, unit_box)
    assert not big.admissible
    assert set(big.to_dict()) >= {"c2_norm", "epsilon", "admissible"}


def test_large_bump_is_rejected(euclid_nb):
    with pytest.raises((ConcavityError, NeighborhoodViolation)):
        diastasis_legendre(GaussianBump(3.0, [0j], 0.2), Euclidean(), euclid_nb,
                           Box.cube(1, 0.5, 9).grid())
