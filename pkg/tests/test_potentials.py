import json

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from conftest import fd_gradient, fd_hessian
from cxlegendre import (
    Box,
    Euclidean,
    FubiniStudy,
    HermitianSeries,
    SeriesPotential,
    check_strong_psh,
    estimate_neighborhood,
    load_potential,
    potential_from_dict,
)
from cxlegendre.coords import (
    form_to_hermitian,
    hermitian_part,
    hermitian_to_form,
    holomorphic_jacobian,
    real_hessian,
    to_complex,
    to_real,
)
from cxlegendre.errors import ConfigError, PolarizationDomainError
from cxlegendre.potentials import ScaledSum

coord = st.floats(-0.9, 0.9)
points = st.tuples(coord, coord).map(lambda t: np.array([complex(*t)]))


def _series():
    # 2|z|^2 + 0.1 (z^2 zbar + z zbar^2) + 0.05 |z|^4
    c = {((1,), (1,)): 2.0, ((2,), (1,)): 0.1, ((1,), (2,)): 0.1, ((2,), (2,)): 0.05}
    return SeriesPotential(HermitianSeries(1, c, 4))


POTENTIALS = [Euclidean(), FubiniStudy(), _series(), ScaledSum(((1.0, Euclidean()), (0.5, FubiniStudy())))]
IDS = ["euclid", "fs", "series", "sum"]


# -- coordinates ---------------------------------------------------------------

@given(st.lists(st.floats(-5, 5), min_size=4, max_size=4))
def test_real_complex_round_trip(xs):
    x = np.array(xs)
    assert np.array_equal(to_real(to_complex(x)), x)


@given(st.lists(st.floats(-3, 3), min_size=4, max_size=4))
def test_form_hermitian_round_trip(xs):
    a, b, c, d = xs
    H = np.array([[a, b + 1j * c], [b - 1j * c, d]])
    W = hermitian_to_form(H)
    assert np.allclose(W, -W.T)
    assert np.allclose(form_to_hermitian(W), H)


def test_holomorphic_jacobian_of_multiplication():
    J = holomorphic_jacobian(np.array([[2j]]))
    assert np.allclose(J, [[0, -2], [2, 0]])


# -- examples ------------------------------------------------------------------

def test_series_single_pair(oracle):
    pot = SeriesPotential(HermitianSeries(1, {((1,), (1,)): 2.0}, 2))
    assert float(pot.evaluate(np.array([1.0 + 0j]))) == pytest.approx(oracle["series_single_pair"], abs=1e-14)


def test_fs_polarization_and_diastasis(oracle):
    fs = FubiniStudy()
    one, zero = np.array([1.0 + 0j]), np.array([0j])
    assert fs.polarize(one, one) == pytest.approx(oracle["fs_polarization_diagonal"], abs=1e-14)
    assert fs.diastasis(one, zero) == pytest.approx(oracle["fs_diastasis_1_0"], abs=1e-14)
    assert fs.mixed_hessian(zero)[0, 0].real == pytest.approx(oracle["fs_mixed_hessian_0"], abs=1e-14)


def test_fs_antipodal_pair_rejected():
    fs = FubiniStudy()
    with pytest.raises(PolarizationDomainError):
        fs.polarize(np.array([1.0 + 0j]), np.array([-1.0 + 0j]))
    assert not fs.polar_valid(np.array([2.0 + 0j]), np.array([-0.5 + 0j]))


def test_strong_psh_constants(oracle):
    assert check_strong_psh(Euclidean(), Box.cube(1, 1.0, 33)) == pytest.approx(1.0)
    box = Box.cube(1, 1 / np.sqrt(2), 33)
    assert check_strong_psh(FubiniStudy(), box) == pytest.approx(oracle["fs_min_hessian_unit_disk_box"], rel=1e-12)
    assert check_strong_psh(_series(), Box.cube(1, 0.5, 33)) >= 0.9


def test_neighborhood_estimates(euclid_nb, fs_nb, unit_box):
    assert euclid_nb.radius_delta == pytest.approx(unit_box.diameter)
    assert euclid_nb.convexity_constant == pytest.approx(0.5, rel=1e-9)
    assert fs_nb.radius_delta > 0.5
    assert 0 < fs_nb.convexity_constant < 0.5


def test_fs_in_two_dimensions():
    fs = FubiniStudy(2)
    z = np.array([0.3 + 0.1j, -0.2 + 0.4j])
    s = 1 + np.vdot(z, z).real
    H = fs.mixed_hessian(z)
    expected = np.eye(2) / s - np.outer(np.conj(z), z) / s**2
    assert np.allclose(H, expected)
    assert np.all(np.linalg.eigvalsh(H) > 0)


# -- loading -------------------------------------------------------------------

def test_loader_round_trip(tmp_path):
    for pot in POTENTIALS:
        path = tmp_path / "p.json"
        path.write_text(json.dumps(pot.to_dict()))
        again = load_potential(path)
        z = np.array([[0.3 + 0.2j], [-0.5 + 0.1j]])
        assert np.allclose(again.evaluate(z), pot.evaluate(z))


def test_non_hermitian_coefficients_reported():
    spec = {"variant": "series", "dimension": 1, "coefficients": [
        {"alpha": [2], "beta": [1], "re": 1.0, "im": 0.0},
        {"alpha": [1], "beta": [2], "re": 0.5, "im": 0.0},
    ]}
    with pytest.raises(ConfigError, match=r"c\[\(2,\),\(1,\)\]"):
        potential_from_dict(spec)


def test_unknown_variant_and_bad_json(tmp_path):
    with pytest.raises(ConfigError):
        potential_from_dict({"variant": "kummer"})
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError):
        load_potential(bad)


def test_degree_bound_enforced():
    with pytest.raises(ConfigError):
        HermitianSeries(1, {((3,), (3,)): 1.0}, 4)


# -- properties ----------------------------------------------------------------

@pytest.mark.parametrize("pot", POTENTIALS, ids=IDS)
@given(z=points)
def test_polarization_restricts_to_potential(pot, z):
    assert pot.polarize(z, z).real == pytest.approx(pot.evaluate(z)[()], abs=1e-12)
    assert abs(pot.polarize(z, z).imag) < 1e-12


@pytest.mark.parametrize("pot", POTENTIALS, ids=IDS)
@given(z=points, w=points)
def test_polarization_conjugate_symmetry(pot, z, w):
    assert np.allclose(pot.polarize(z, w), np.conj(pot.polarize(w, z)), atol=1e-12)


@pytest.mark.parametrize("pot", POTENTIALS, ids=IDS)
@given(z=points, w=points)
def test_polarization_is_holomorphic_in_first_slot(pot, z, w):
    # Cauchy-Riemann: d/dx = -i d/dy for a holomorphic function of z.  The
    # log in Fubini-Study has a singular set at 1 + z.conj(w) = 0; stay a
    # unit-size distance from it so the O(h^2) truncation error is small.
    assume(abs(1 + z[0] * np.conj(w[0])) > 0.5)
    h = 1e-4
    dx = (pot.polarize(z + h, w) - pot.polarize(z - h, w)) / (2 * h)
    dy = (pot.polarize(z + 1j * h, w) - pot.polarize(z - 1j * h, w)) / (2 * h)
    assert abs(dx + 1j * dy) < 1e-6
    # and antiholomorphic in w
    dx = (pot.polarize(z, w + h) - pot.polarize(z, w - h)) / (2 * h)
    dy = (pot.polarize(z, w + 1j * h) - pot.polarize(z, w - 1j * h)) / (2 * h)
    assert abs(dx - 1j * dy) < 1e-6


@pytest.mark.parametrize("pot", POTENTIALS, ids=IDS)
@given(z=points, w=points)
def test_diastasis_symmetric_and_nonnegative(pot, z, w):
    d1, d2 = pot.diastasis(z, w), pot.diastasis(w, z)
    assert d1 == pytest.approx(d2, abs=1e-12)
    assert d1 >= -1e-12
    assert abs(pot.diastasis(z, z)) < 1e-12


@pytest.mark.parametrize("pot", POTENTIALS, ids=IDS)
@given(z=points, w=points)
def test_derivatives_match_finite_differences(pot, z, w):
    x0 = to_real(z)
    f = lambda x: pot.evaluate(to_complex(x))[()]
    g = lambda x: pot.gradient(to_complex(x))
    assert np.allclose(pot.gradient(z), fd_gradient(f, x0), atol=1e-6)
    assert np.allclose(pot.hessian(z), fd_hessian(g, x0), atol=1e-6)
    D = lambda x: pot.diastasis(to_complex(x), w)[()]
    Dg = lambda x: pot.diastasis_gradient(to_complex(x), w)
    assert np.allclose(pot.diastasis_gradient(z, w), fd_gradient(D, x0), atol=1e-6)
    assert np.allclose(pot.diastasis_hessian(z, w), fd_hessian(Dg, x0), atol=1e-6)


@pytest.mark.parametrize("pot", POTENTIALS, ids=IDS)
@given(z=points)
def test_mixed_hessian_is_quarter_laplacian_block(pot, z):
    H = pot.mixed_hessian(z)
    assert np.allclose(hermitian_part(pot.hessian(z)), H, atol=1e-12)


@given(z=points)
def test_real_hessian_dictionary(z):
    # f = Re(z^2) + |z|^2: A = 1 (from Re z^2 / 2 twice), H = 1
    A = np.array([[1.0 + 0j]])
    H = np.array([[1.0 + 0j]])
    assert np.allclose(real_hessian(A, H), [[4, 0], [0, 0]])


def test_series_potential_realness():
    pot = _series()
    z = Box.cube(1, 0.9, 17).grid().reshape(-1, 1)
    raw = pot.polarize(z, z)
    assert np.max(np.abs(raw.imag)) < 1e-13


def test_neighborhood_for_series():
    nb = estimate_neighborhood(_series(), Box.cube(1, 0.5, 17))
    assert nb.radius_delta > 0 and nb.convexity_constant > 0


def test_closed_form_examples():
    e, fs = Euclidean(), FubiniStudy()
    z = np.array([1 + 1j])
    assert float(e.evaluate(z)) == 2.0
    assert float(fs.evaluate(np.array([0j]))) == 0.0
    assert e.polarize(z, np.array([1 + 0j])) == 1 + 1j
    w = np.array([-0.3 + 0.2j])
    assert float(e.diastasis(z, w)) == pytest.approx(abs(z[0] - w[0]) ** 2)
    a, abar, H = e.complex_derivatives(z)
    assert np.allclose(abar, z) and np.allclose(H, 1.0)


def test_unit_series_matches_euclidean(unit_box):
    series = SeriesPotential(HermitianSeries(1, {((1,), (1,)): 1.0}, 2))
    z = unit_box.grid()[::7, ::7]
    e = Euclidean()
    assert np.allclose(series.gradient(z), e.gradient(z))
    assert np.allclose(series.hessian(z), e.hessian(z))
    box = Box.cube(1, 1.0, 33)
    a, b = estimate_neighborhood(series, box), estimate_neighborhood(e, box)
    assert a.radius_delta == pytest.approx(b.radius_delta)
    assert a.convexity_constant == pytest.approx(b.convexity_constant, rel=1e-9)


def test_pluriharmonic_term_leaves_hessian_alone():
    # |z|^2 + 0.1 Re(z^2), with Re(z^2) = (z^2 + zbar^2) / 2
    c = {((1,), (1,)): 1.0, ((2,), (0,)): 0.05, ((0,), (2,)): 0.05}
    pot = SeriesPotential(HermitianSeries(1, c, 2))
    assert check_strong_psh(pot, Box.cube(1, 1.0, 33)) >= 0.9


def test_series_realness_on_random_points():
    rng = np.random.default_rng(0)
    z = (rng.uniform(-1, 1, 1000) + 1j * rng.uniform(-1, 1, 1000))[:, None]
    raw = _series().polarize(z, z)
    assert np.all(np.abs(raw.imag) < 1e-10 * (1 + np.abs(raw)))
