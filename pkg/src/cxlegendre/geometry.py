"""Kahler forms, Monge-Ampere densities, pullbacks and the Mabuchi metric."""

from dataclasses import dataclass
from itertools import combinations
from math import factorial

import numpy as np
from scipy.integrate import trapezoid

from .coords import form_to_hermitian, hermitian_part, hermitian_to_form, to_complex, to_real
from .errors import AdmissibilityError, BoundaryError
from .fields import SampledFunction, SmoothCutoff, SphereFunction
from .gradient_map import map_jacobians
from .transforms import _as_field, diastasis_legendre, transform_field

CHART_BLEND = (1.2, 1.4)
FORM_TOL = 1e-12


@dataclass
class TwoFormField:
    """Hermitian (1,1) coefficients on a grid together with the real 2-form."""

    domain: object
    hermitian: np.ndarray

    @property
    def real(self):
        return hermitian_to_form(self.hermitian)

    @classmethod
    def from_real(cls, domain, W):
        return cls(domain, form_to_hermitian(W))

    def consistency(self):
        """Worst violation of Hermitian symmetry, antisymmetry and the
        round trip between the two representations."""
        H = self.hermitian
        W = self.real
        herm = np.max(np.abs(H - np.conj(np.swapaxes(H, -1, -2))), initial=0.0)
        anti = np.max(np.abs(W + np.swapaxes(W, -1, -2)), initial=0.0)
        back = np.max(np.abs(form_to_hermitian(W) - H), initial=0.0)
        return float(max(herm, anti, back))

    def min_eigenvalue(self):
        return float(np.min(np.linalg.eigvalsh(self.hermitian)))


# -- finite-difference stencils --------------------------------------------------

def _stencil_offsets(d):
    offs = [np.zeros(d)]
    for a in range(d):
        for s in (1, -1):
            e = np.zeros(d)
            e[a] = s
            offs.append(e)
    for a, b in combinations(range(d), 2):
        for sa in (1, -1):
            for sb in (1, -1):
                e = np.zeros(d)
                e[a], e[b] = sa, sb
                offs.append(e)
    return offs


def stencil_hessian(f, z, steps):
    """Real Hessian of a callable by compact central differences.

    ``steps`` holds one step per real coordinate.  Uses 1 + 2d + 2d(d-1)
    evaluations of ``f`` on arrays shaped like ``z``.
    """
    z = np.asarray(z, dtype=complex)
    x = to_real(z)
    h = np.asarray(steps, dtype=float)
    d = x.shape[-1]
    vals = {}
    for off in _stencil_offsets(d):
        vals[tuple(off)] = f(to_complex(x + off * h))
    f0 = vals[tuple(np.zeros(d))]
    R = np.empty(x.shape[:-1] + (d, d))
    for a in range(d):
        e = np.zeros(d)
        e[a] = 1
        R[..., a, a] = (vals[tuple(e)] - 2 * f0 + vals[tuple(-e)]) / h[a] ** 2
    for a, b in combinations(range(d), 2):
        def v(sa, sb):
            e = np.zeros(d)
            e[a], e[b] = sa, sb
            return vals[tuple(e)]
        mixed = (v(1, 1) - v(1, -1) - v(-1, 1) + v(-1, -1)) / (4 * h[a] * h[b])
        R[..., a, b] = R[..., b, a] = mixed
    return R


def grid_hessian(values, box):
    """Real Hessian of grid data: compact central stencils at interior nodes,
    second-order one-sided differences on the boundary layer."""
    axes = box.axes
    d = values.ndim
    grads = np.gradient(values, *axes, edge_order=2)
    if d == 1:
        grads = [grads]
    R = np.empty(values.shape + (d, d))
    for a in range(d):
        for b in range(d):
            R[..., a, b] = np.gradient(grads[a], axes[b], axis=b, edge_order=2)
    R = 0.5 * (R + np.swapaxes(R, -1, -2))

    h = box.steps
    inner = tuple(slice(1, -1) for _ in range(d))

    def shifted(offsets):
        return values[tuple(slice(1 + o, values.shape[k] - 1 + o) for k, o in enumerate(offsets))]

    f0 = values[inner]
    for a in range(d):
        e = [0] * d
        e[a] = 1
        m = [0] * d
        m[a] = -1
        R[inner + (a, a)] = (shifted(e) - 2 * f0 + shifted(m)) / h[a] ** 2
    for a, b in combinations(range(d), 2):
        def v(sa, sb):
            e = [0] * d
            e[a], e[b] = sa, sb
            return shifted(e)
        mixed = (v(1, 1) - v(1, -1) - v(-1, 1) + v(-1, -1)) / (4 * h[a] * h[b])
        R[inner + (a, b)] = mixed
        R[inner + (b, a)] = mixed
    return R


# -- Kahler forms and Monge-Ampere -------------------------------------------------

def kahler_form(psi, potential, point):
    """Hermitian coefficients of omega_psi at ``point``: the exact complex
    Hessian of the reference potential plus central differences of psi with
    the grid step."""
    box = psi.domain
    point = np.asarray(point, dtype=complex)
    steps = np.asarray(box.steps)
    reach = to_real(point)
    if np.any(reach - steps < box.lower - 1e-12) or np.any(reach + steps > box.upper + 1e-12):
        raise BoundaryError("finite-difference stencil leaves the grid")
    R = stencil_hessian(psi.field().value, point, steps)
    return potential.mixed_hessian(point) + hermitian_part(R)


def field_kahler_form(eta, potential, point, steps=None):
    """omega_eta at arbitrary points for a smooth field: exact Hessian when
    ``steps`` is None, otherwise central differences with those steps."""
    eta = _as_field(eta)
    point = np.asarray(point, dtype=complex)
    R = eta.hessian(point) if steps is None else stencil_hessian(eta.value, point, steps)
    return potential.mixed_hessian(point) + hermitian_part(R)


def kahler_form_field(psi, potential):
    """omega_psi at every node of the grid of a SampledFunction."""
    box = psi.domain
    H = potential.mixed_hessian(box.grid()) + hermitian_part(grid_hessian(psi.values, box))
    return TwoFormField(box, H)


def monge_ampere(psi, potential, point):
    """det(omega_psi) / n! at ``point``."""
    H = kahler_form(psi, potential, point)
    det = np.linalg.det(H).real
    if np.any(det <= 0):
        raise AdmissibilityError("Monge-Ampere density is not positive")
    return det / factorial(H.shape[-1])


def pullback_form(jacobian, form):
    """J^T W J for real Jacobians and real antisymmetric forms."""
    return np.swapaxes(jacobian, -1, -2) @ form @ jacobian


@dataclass
class PullbackResult:
    max_defect: float
    mean_defect: float
    defect: np.ndarray
    transform: object

    def to_dict(self):
        return {"max_defect": self.max_defect, "mean_defect": self.mean_defect}


def pullback_defect(eta, potential, neighborhood, box, result=None, mask=None):
    """max |G(eta)^* omega_eta - omega_{L eta}| over interior nodes.

    omega_eta is evaluated at the off-grid points G(q) with the grid step;
    omega_{L eta} uses compact stencils on the sampled transform; the map
    Jacobian comes from central differences of the sampled map.
    """
    eta = _as_field(eta)
    result = result or transform_field(eta, potential, neighborhood, box)
    interior = box.interior_mask()
    if mask is not None:
        interior = interior & mask
    G = result.argmax[interior]
    J = map_jacobians(result.argmax, box)[interior]
    W_eta = hermitian_to_form(field_kahler_form(eta, potential, G, box.steps))
    W_L = kahler_form_field(result.transform, potential).real[interior]
    err = np.max(np.abs(pullback_form(J, W_eta) - W_L), axis=(-1, -2))
    return PullbackResult(float(np.max(err)), float(np.mean(err)), err, result)


def chart_overlap_consistency(eta, neighborhood, sphere, results=None, potential=None):
    """Largest mismatch of L(eta) and G(eta) between the two charts.

    For nodes q of the first chart inside the overlap annulus, the second
    chart is solved afresh at w = 1/q; agreement means L_w(1/q) = L_z(q) and
    G_w(1/q) = 1/G_z(q).
    """
    from .potentials import FubiniStudy

    potential = potential or FubiniStudy()
    eta = eta if isinstance(eta, SphereFunction) else SphereFunction(eta)
    box = sphere.chart
    if results is None:
        results = (transform_field(eta.chart(0), potential, neighborhood, box),)
    q = box.grid()
    sel = sphere.overlap_mask(q)
    qs = q[sel]
    vz = results[0].transform.values[sel]
    gz = results[0].argmax[sel]
    vw, gw = diastasis_legendre(eta.chart(1), potential, neighborhood, 1.0 / qs)
    return float(max(np.max(np.abs(vw - vz)), np.max(np.abs(gw - 1.0 / gz))))


# -- Mabuchi metric ----------------------------------------------------------------

def _integrate(values, box):
    out = values
    for axis in reversed(box.axes):
        out = trapezoid(out, axis, axis=-1)
    return float(out)


def _values(f, box):
    if isinstance(f, SampledFunction):
        return f.values
    if np.isscalar(f):
        return np.full(box.shape, float(f))
    return _as_field(f).value(box.grid())


def volume_density(psi, potential, box):
    """det(omega_psi) at each node (Lebesgue density, no n! factor)."""
    values = _values(psi, box)
    psi = SampledFunction(box, values)
    det = np.linalg.det(kahler_form_field(psi, potential).hermitian).real
    if np.any(det <= 0):
        raise AdmissibilityError("Monge-Ampere density is not positive")
    return det


def mabuchi_inner(nu, chi, psi, potential, box=None, density=None):
    """Trapezoid quadrature of nu * chi * det(omega_psi) over a box.

    ``nu``, ``chi`` and ``psi`` may be SampledFunctions, fields or scalars.
    """
    box = box or next(f.domain for f in (nu, chi, psi) if isinstance(f, SampledFunction))
    if density is None:
        density = volume_density(psi, potential, box)
    return _integrate(_values(nu, box) * _values(chi, box) * density, box)


def chart_weights(sphere, blend=CHART_BLEND):
    """Partition of unity on the two charts: a smooth radial step in |z|
    for the first chart and its complement, read through w = 1/z, for the
    second."""
    step = SmoothCutoff(0.0, *blend)
    q = sphere.chart.grid()
    wz = step.value(q)
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = np.where(np.abs(q) > 0, 1.0 / np.where(np.abs(q) > 0, q, 1.0), np.inf)
    far = ~np.isfinite(inv[..., 0])
    ww = np.where(far, 1.0, 1.0 - step.value(np.where(np.isfinite(inv), inv, 0.0)))
    return wz, ww


def sphere_mabuchi_inner(nu, chi, psi, sphere, potential=None, densities=None):
    """Mabuchi inner product on the sphere by chart quadrature.

    Each argument is a pair of per-chart values (arrays, SampledFunctions,
    fields or scalars) or a SphereFunction.
    """
    from .potentials import FubiniStudy

    potential = potential or FubiniStudy()
    box = sphere.chart
    weights = chart_weights(sphere)
    total = 0.0
    for i in range(2):
        views = [_chart_view(f, i) for f in (nu, chi, psi)]
        dens = densities[i] if densities is not None else volume_density(views[2], potential, box)
        total += _integrate(weights[i] * _values(views[0], box) * _values(views[1], box) * dens, box)
    return total


def _chart_view(f, i):
    if isinstance(f, SphereFunction):
        return f.chart(i)
    if isinstance(f, (tuple, list)):
        return f[i]
    return f


def sphere_volume(sphere, potential=None):
    return sphere_mabuchi_inner(1.0, 1.0, 0.0, sphere, potential)


# -- the differential of the transform --------------------------------------------------

def differential_L(chi, map_values, box=None, interpolate=True):
    """-chi o G(eta): the derivative of the transform at eta in direction chi.

    ``chi`` is a SampledFunction evaluated at the off-grid points G(q) by
    multilinear interpolation (or through its source field when
    ``interpolate`` is false).  Images that leave the grid are allowed only
    when chi vanishes on the boundary layer, where it is extended by zero.
    """
    box = box or chi.domain
    G = np.asarray(map_values, dtype=complex)
    inside = chi.domain.contains(G)
    if interpolate or chi.source is None:
        vals = np.zeros(G.shape[:-1])
        vals[inside] = chi.interpolate(G[inside])
        if not np.all(inside):
            edge = ~chi.domain.interior_mask()
            if np.max(np.abs(chi.values[edge]), initial=0.0) > 1e-14:
                raise BoundaryError("gradient map leaves the grid of the tangent field")
    else:
        vals = chi.source.value(G)
    return SampledFunction(box, -vals)


def directional_difference(eta, chi, potential, neighborhood, q, t):
    """(L(eta + t chi) - L(eta)) / t at the points q (fresh solves)."""
    eta, chi = _as_field(eta), _as_field(chi)
    base = diastasis_legendre(eta, potential, neighborhood, q)[0]
    moved = diastasis_legendre(eta + t * chi, potential, neighborhood, q)[0]
    return (moved - base) / t


@dataclass
class DifferentialStudy:
    steps: tuple
    errors: tuple

    @property
    def ratios(self):
        return tuple(a / b for a, b in zip(self.errors, self.errors[1:]))

    def to_dict(self):
        return {"steps": list(self.steps), "errors": list(self.errors), "ratios": list(self.ratios)}


def differential_study(eta, chi, potential, neighborhood, q, steps=(1e-2, 1e-3, 1e-4)):
    """Errors of the difference quotient against -chi o G(eta) at q."""
    eta, chi = _as_field(eta), _as_field(chi)
    G = diastasis_legendre(eta, potential, neighborhood, q)[1]
    target = -chi.value(G)
    errors = tuple(
        float(np.max(np.abs(directional_difference(eta, chi, potential, neighborhood, q, t) - target)))
        for t in steps
    )
    return DifferentialStudy(tuple(steps), errors)


# -- isometry ----------------------------------------------------------------------

@dataclass
class IsometryResult:
    lhs: float
    rhs: float

    @property
    def relative_defect(self):
        return abs(self.lhs - self.rhs) / (abs(self.rhs) + 1e-12)

    def to_dict(self):
        return {"lhs": self.lhs, "rhs": self.rhs, "relative_defect": self.relative_defect}


def verify_isometry(eta, chi, nu, potential, neighborhood, box, result=None, interpolate=True):
    """Compare g(dL chi, dL nu) at L(eta) with g(chi, nu) at eta.

    Both sides are separate quadratures on the same grid; no change of
    variables is used.
    """
    eta = _as_field(eta)
    chi = chi if isinstance(chi, SampledFunction) else SampledFunction.from_field(_as_field(chi), box)
    nu = nu if isinstance(nu, SampledFunction) else SampledFunction.from_field(_as_field(nu), box)
    result = result or transform_field(eta, potential, neighborhood, box)
    d_chi = differential_L(chi, result.argmax, box, interpolate)
    d_nu = differential_L(nu, result.argmax, box, interpolate)
    lhs = mabuchi_inner(d_chi, d_nu, result.transform, potential, box)
    rhs = mabuchi_inner(chi, nu, SampledFunction.from_field(eta, box), potential, box)
    return IsometryResult(lhs, rhs)


def smooth_tangent(box, seed, margin, modes=3):
    """A seeded random smooth tangent field supported a distance ``margin``
    inside the box: a cutoff times 1 + a small random Fourier sum."""
    from .fields import Fourier, Product

    rng = np.random.default_rng(seed)
    n = box.dimension
    k = rng.normal(scale=1.5, size=(modes, 2 * n))
    amps = rng.uniform(0.1, 0.5, size=modes) / modes
    phases = rng.uniform(0, 2 * np.pi, size=modes)
    half = float(np.min(box.upper - box.lower)) / 2
    outer = half - margin
    cutoff = SmoothCutoff(box.center, 0.4 * outer, outer)
    return Product(cutoff, Fourier(k, amps, phases, 1.0))

