"""The generalized gradient map G(eta): argmax locations as a map of the grid."""

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .coords import to_complex, to_real
from .errors import DiffeomorphismError
from .fields import SampledFunction
from .transforms import LegendreTransform, _as_field, diastasis_legendre, transform_field

HOMOTOPY_TIMES = (0.0, 0.25, 0.5, 0.75, 1.0)


@dataclass
class GradientMapField:
    domain: object
    map_values: np.ndarray
    jacobians: np.ndarray
    transform: object = None

    @property
    def determinants(self):
        return np.linalg.det(self.jacobians)

    def displacement(self):
        return np.linalg.norm(self.map_values - self.domain.grid(), axis=-1)


def map_jacobians(map_values, box):
    """Real Jacobians dG_a/dx_b by central differences (second-order one-sided
    differences on the boundary layer)."""
    g = to_real(map_values)
    d = g.shape[-1]
    cols = []
    for a in range(d):
        grads = np.gradient(g[..., a], *box.axes, edge_order=2)
        cols.append(np.stack(grads, axis=-1))
    return np.stack(cols, axis=-2)


def gradient_map(eta, potential, neighborhood, box, check=True):
    result = transform_field(eta, potential, neighborhood, box)
    jac = map_jacobians(result.argmax, box)
    gmap = GradientMapField(box, result.argmax, jac, result)
    if check:
        det = gmap.determinants
        if np.any(det <= 0):
            k = np.unravel_index(int(np.argmin(det)), det.shape)
            q = box.grid()[k]
            raise DiffeomorphismError(f"gradient map Jacobian is not positive at q={q}", q)
    return gmap


def compose_check(eta, potential, neighborhood, box, gmap=None):
    """Worst |G(L eta)(G(eta)(q)) - q| over the grid.

    G(L eta) is evaluated by fresh nested solves at the off-grid points
    G(eta)(q); the map is never interpolated.
    """
    eta = _as_field(eta)
    gmap = gmap or gradient_map(eta, potential, neighborhood, box, check=False)
    lazy = LegendreTransform(eta, potential, neighborhood)
    back = diastasis_legendre(lazy, potential, neighborhood, gmap.map_values)[1]
    defect = np.linalg.norm(back - box.grid(), axis=-1)
    return float(np.max(defect)), defect


@dataclass
class PositivitySweep:
    min_determinant: float
    min_symmetric_eig: float
    per_time: list
    implicit_mismatch: float

    def to_dict(self):
        return {
            "min_determinant": self.min_determinant,
            "min_symmetric_eig": self.min_symmetric_eig,
            "per_time": self.per_time,
            "implicit_mismatch": self.implicit_mismatch,
        }


def jacobian_positivity_sweep(eta, potential, neighborhood, box, times=HOMOTOPY_TIMES,
                              check_points=10, seed=0):
    """Jacobian positivity of G(t eta) along the homotopy t in ``times``.

    Finite-difference Jacobians at t = 1 are also compared with the implicit
    function formula at ``check_points`` random interior nodes.
    """
    eta = _as_field(eta)
    per_time = []
    gmap = None
    interior = box.interior_mask()
    for t in times:
        gmap = gradient_map(t * eta, potential, neighborhood, box, check=False)
        J = gmap.jacobians[interior]
        det = np.linalg.det(J)
        sym = np.linalg.eigvalsh(0.5 * (J + np.swapaxes(J, -1, -2)))[..., 0]
        per_time.append({"t": t, "min_det": float(np.min(det)), "min_sym_eig": float(np.min(sym))})

    rng = np.random.default_rng(seed)
    idx = np.argwhere(interior)
    pick = idx[rng.choice(len(idx), size=min(check_points, len(idx)), replace=False)]
    q = box.grid()[tuple(pick.T)]
    lazy = LegendreTransform(eta, potential, neighborhood)
    J_ift = lazy.map_jacobian(q)
    J_fd = gmap.jacobians[tuple(pick.T)]
    mismatch = float(np.max(np.abs(J_ift - J_fd)))
    return PositivitySweep(
        min(p["min_det"] for p in per_time),
        min(p["min_sym_eig"] for p in per_time),
        per_time,
        mismatch,
    )


def transform_gradient_identity(eta, potential, neighborhood, box, result=None):
    """Max over interior nodes of |grad L(eta)(q) + grad_q D(G(q), q)|, with the
    left side from central differences of the sampled transform."""
    result = result or transform_field(eta, potential, neighborhood, box)
    vals = result.transform.values
    grads = np.gradient(vals, *box.axes, edge_order=2)
    if vals.ndim == 1:
        grads = [grads]
    fd = np.stack(grads, axis=-1)
    q = box.grid()
    exact = -potential.diastasis_gradient(q, result.argmax)
    err = np.linalg.norm(fd - exact, axis=-1)[box.interior_mask()]
    return float(np.max(err))


def injectivity_violations(gmap, factor=1e-3):
    """Pairs of distinct nodes whose images are closer than factor * step."""
    pts = to_real(gmap.map_values).reshape(-1, 2 * gmap.domain.dimension)
    radius = factor * float(np.min(gmap.domain.steps))
    return len(cKDTree(pts).query_pairs(radius))


def translation_map(box, shift):
    """Closed-form G for Euclidean omega and eta = Re(conj(b) z) scaled: the
    stationarity condition gives a rigid translation."""
    return box.grid() + shift
