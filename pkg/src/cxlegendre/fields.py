"""Smooth real functions on chart coordinates, and grid-sampled functions.

A field evaluates at complex points z of shape (..., n) and returns values
(...), real gradients (..., 2n) and real Hessians (..., 2n, 2n) in the blocked
coordinates of :mod:`cxlegendre.coords`.  Perturbations, tangent vectors and
potentials all go through this interface so the solvers never care where a
function came from.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .coords import holomorphic_jacobian, to_real
from .errors import ConfigError, DomainError


class Field:
    dimension = 1

    def value(self, z):
        raise NotImplementedError

    def gradient(self, z):
        raise NotImplementedError

    def hessian(self, z):
        raise NotImplementedError

    def derivatives(self, z):
        return self.value(z), self.gradient(z), self.hessian(z)

    def __call__(self, z):
        return self.value(z)

    def __add__(self, other):
        if np.isscalar(other):
            other = Constant(float(other), self.dimension)
        return FieldSum(((1.0, self), (1.0, other)))

    __radd__ = __add__

    def __mul__(self, scale):
        return FieldSum(((float(scale), self),))

    __rmul__ = __mul__

    def __neg__(self):
        return FieldSum(((-1.0, self),))

    def __sub__(self, other):
        return self + (-other)

    def c2_norm(self, z):
        """max(sup |f|, sup |grad f|, sup ||Hess f||_2) over the given points."""
        v, g, H = self.derivatives(z)
        return max(
            float(np.max(np.abs(v))),
            float(np.max(np.linalg.norm(g, axis=-1))),
            float(np.max(np.abs(np.linalg.eigvalsh(H)))),
        )


def _z(z, n):
    z = np.asarray(z, dtype=complex)
    if z.ndim == 0:
        z = z[None]
    if z.shape[-1] != n:
        raise DomainError(f"expected points with last axis {n}, got shape {z.shape}")
    return z


@dataclass(frozen=True, eq=False)
class Constant(Field):
    constant: float = 0.0
    dimension: int = 1

    def value(self, z):
        z = _z(z, self.dimension)
        return np.full(z.shape[:-1], float(self.constant))

    def gradient(self, z):
        z = _z(z, self.dimension)
        return np.zeros(z.shape[:-1] + (2 * self.dimension,))

    def hessian(self, z):
        z = _z(z, self.dimension)
        d = 2 * self.dimension
        return np.zeros(z.shape[:-1] + (d, d))


@dataclass(frozen=True, eq=False)
class GaussianBump(Field):
    """amplitude * exp(-|z - center|^2 / width^2)."""

    amplitude: float
    center: np.ndarray
    width: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "center", np.atleast_1d(np.asarray(self.center, dtype=complex)))
        if self.width <= 0:
            raise ConfigError("bump width must be positive")

    @property
    def dimension(self):
        return self.center.shape[0]

    def _parts(self, z):
        z = _z(z, self.dimension)
        d = to_real(z - self.center)
        e = self.amplitude * np.exp(-np.sum(d**2, axis=-1) / self.width**2)
        return d, e

    def value(self, z):
        return self._parts(z)[1]

    def gradient(self, z):
        d, e = self._parts(z)
        return -2.0 / self.width**2 * e[..., None] * d

    def hessian(self, z):
        d, e = self._parts(z)
        s2 = self.width**2
        eye = np.eye(d.shape[-1])
        outer = d[..., :, None] * d[..., None, :]
        return e[..., None, None] * (4.0 / s2**2 * outer - 2.0 / s2 * eye)

    def derivative_bounds(self):
        """Closed-form sup norms of the value, gradient and Hessian."""
        a, s = abs(self.amplitude), self.width
        return a, a * np.sqrt(2.0) / s * np.exp(-0.5), 2.0 * a / s**2


@dataclass(frozen=True, eq=False)
class LinearField(Field):
    """amplitude * Re(conj(b) . z)."""

    amplitude: float
    direction: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "direction", np.atleast_1d(np.asarray(self.direction, dtype=complex)))

    @property
    def dimension(self):
        return self.direction.shape[0]

    def value(self, z):
        z = _z(z, self.dimension)
        return self.amplitude * np.sum(np.conj(self.direction) * z, axis=-1).real

    def gradient(self, z):
        z = _z(z, self.dimension)
        g = self.amplitude * to_real(self.direction)
        return np.broadcast_to(g, z.shape[:-1] + g.shape).copy()

    def hessian(self, z):
        z = _z(z, self.dimension)
        d = 2 * self.dimension
        return np.zeros(z.shape[:-1] + (d, d))

    def derivative_bounds(self):
        return None, abs(self.amplitude) * float(np.linalg.norm(self.direction)), 0.0


@dataclass(frozen=True, eq=False)
class QuadraticField(Field):
    """amplitude * |z - center|^2."""

    amplitude: float
    center: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "center", np.atleast_1d(np.asarray(self.center, dtype=complex)))

    @property
    def dimension(self):
        return self.center.shape[0]

    def value(self, z):
        z = _z(z, self.dimension)
        return self.amplitude * np.sum(np.abs(z - self.center) ** 2, axis=-1)

    def gradient(self, z):
        z = _z(z, self.dimension)
        return 2.0 * self.amplitude * to_real(z - self.center)

    def hessian(self, z):
        z = _z(z, self.dimension)
        d = 2 * self.dimension
        return np.broadcast_to(2.0 * self.amplitude * np.eye(d), z.shape[:-1] + (d, d)).copy()

    def derivative_bounds(self):
        return None, None, 2.0 * abs(self.amplitude)


def _h(t):
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        out = np.where(t > 0, np.exp(-1.0 / np.where(t > 0, t, 1.0)), 0.0)
    return out


def _h_derivs(t):
    tt = np.where(t > 0, t, 1.0)
    h = _h(t)
    return h, h / tt**2, h * (1.0 / tt**4 - 2.0 / tt**3)


def smooth_step(t):
    """C-infinity step: 1 for t <= 0, 0 for t >= 1.  Returns (s, s', s'')."""
    t = np.asarray(t, dtype=float)
    a, a1, a2 = _h_derivs(1.0 - t)
    b, b1, b2 = _h_derivs(t)
    da, dda = -a1, a2
    den = a + b
    num = da * b - a * b1
    s = a / den
    s1 = num / den**2
    s2 = (dda * b - a * b2) / den**2 - 2.0 * num * (da + b1) / den**3
    return s, s1, s2


@dataclass(frozen=True, eq=False)
class SmoothCutoff(Field):
    """Radial C-infinity bump: 1 inside ``inner``, 0 outside ``outer``."""

    center: np.ndarray
    inner: float
    outer: float

    def __post_init__(self):
        object.__setattr__(self, "center", np.atleast_1d(np.asarray(self.center, dtype=complex)))
        if not 0 <= self.inner < self.outer:
            raise ConfigError("cutoff radii must satisfy 0 <= inner < outer")

    @property
    def dimension(self):
        return self.center.shape[0]

    def _radial(self, z):
        z = _z(z, self.dimension)
        d = to_real(z - self.center)
        r = np.linalg.norm(d, axis=-1)
        width = self.outer - self.inner
        s, s1, s2 = smooth_step((r - self.inner) / width)
        return d, r, s, s1 / width, s2 / width**2

    def value(self, z):
        return self._radial(z)[2]

    def gradient(self, z):
        d, r, _, s1, _ = self._radial(z)
        safe = np.where(r > 0, r, 1.0)
        return (s1 / safe)[..., None] * d

    def hessian(self, z):
        d, r, _, s1, s2 = self._radial(z)
        safe = np.where(r > 0, r, 1.0)
        u = d / safe[..., None]
        uu = u[..., :, None] * u[..., None, :]
        eye = np.eye(d.shape[-1])
        return s2[..., None, None] * uu + (s1 / safe)[..., None, None] * (eye - uu)


@dataclass(frozen=True, eq=False)
class Fourier(Field):
    """offset + sum_k a_k cos(k . x + phase_k) in real coordinates x."""

    wavevectors: np.ndarray
    amplitudes: np.ndarray
    phases: np.ndarray
    offset: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "wavevectors", np.atleast_2d(np.asarray(self.wavevectors, dtype=float)))
        object.__setattr__(self, "amplitudes", np.atleast_1d(np.asarray(self.amplitudes, dtype=float)))
        object.__setattr__(self, "phases", np.atleast_1d(np.asarray(self.phases, dtype=float)))

    @property
    def dimension(self):
        return self.wavevectors.shape[1] // 2

    def _arg(self, z):
        x = to_real(_z(z, self.dimension))
        return x @ self.wavevectors.T + self.phases

    def value(self, z):
        return self.offset + np.cos(self._arg(z)) @ self.amplitudes

    def gradient(self, z):
        return -(np.sin(self._arg(z)) * self.amplitudes) @ self.wavevectors

    def hessian(self, z):
        c = np.cos(self._arg(z)) * self.amplitudes
        kk = self.wavevectors[:, :, None] * self.wavevectors[:, None, :]
        return -np.tensordot(c, kk, axes=(-1, 0))


@dataclass(frozen=True, eq=False)
class Product(Field):
    first: Field
    second: Field

    @property
    def dimension(self):
        return self.first.dimension

    def value(self, z):
        return self.first.value(z) * self.second.value(z)

    def gradient(self, z):
        f, g = self.first, self.second
        return f.value(z)[..., None] * g.gradient(z) + g.value(z)[..., None] * f.gradient(z)

    def hessian(self, z):
        fv, fg, fH = self.first.derivatives(z)
        gv, gg, gH = self.second.derivatives(z)
        cross = fg[..., :, None] * gg[..., None, :]
        return fv[..., None, None] * gH + gv[..., None, None] * fH + cross + np.swapaxes(cross, -1, -2)


@dataclass(frozen=True, eq=False)
class FieldSum(Field):
    terms: tuple

    @property
    def dimension(self):
        return self.terms[0][1].dimension

    def value(self, z):
        return sum(w * f.value(z) for w, f in self.terms)

    def gradient(self, z):
        return sum(w * f.gradient(z) for w, f in self.terms)

    def hessian(self, z):
        return sum(w * f.hessian(z) for w, f in self.terms)


@dataclass(frozen=True, eq=False)
class PotentialField(Field):
    """A potential viewed as a field, e.g. to form psi = phi + eta."""

    potential: object

    @property
    def dimension(self):
        return self.potential.dimension

    def value(self, z):
        return self.potential.evaluate(z)

    def gradient(self, z):
        return self.potential.gradient(z)

    def hessian(self, z):
        return self.potential.hessian(z)


@dataclass(frozen=True, eq=False)
class ChartPullback(Field):
    """f(1/w): a z-chart field seen from the w = 1/z chart of the sphere.

    At w = 0 the field is taken to vanish with its derivatives, which is the
    limit for the decaying perturbations used on the sphere.
    """

    base: Field
    dimension: int = 1

    def _map(self, w):
        w = _z(w, 1)
        small = np.abs(w[..., 0]) < 1e-12
        safe = np.where(small[..., None], 1.0, w)
        return safe, 1.0 / safe, small

    def value(self, w):
        _, z, small = self._map(w)
        return np.where(small, 0.0, self.base.value(z))

    def _jac(self, w):
        d1 = -1.0 / w**2
        return holomorphic_jacobian(d1[..., None])

    def gradient(self, w):
        safe, z, small = self._map(w)
        J = self._jac(safe)
        g = np.einsum("...ab,...a->...b", J, self.base.gradient(z))
        return np.where(small[..., None], 0.0, g)

    def hessian(self, w):
        safe, z, small = self._map(w)
        J = self._jac(safe)
        g = self.base.gradient(z)
        H = np.einsum("...ab,...ac,...cd->...bd", J, self.base.hessian(z), J)
        t2 = 2.0 / safe[..., 0] ** 3
        hre = np.stack([np.stack([t2.real, -t2.imag], -1), np.stack([-t2.imag, -t2.real], -1)], -2)
        him = np.stack([np.stack([t2.imag, t2.real], -1), np.stack([t2.real, -t2.imag], -1)], -2)
        H = H + g[..., 0, None, None] * hre + g[..., 1, None, None] * him
        return np.where(small[..., None, None], 0.0, H)


@dataclass(frozen=True, eq=False)
class SphereFunction:
    """A function on the Riemann sphere given by its two chart views."""

    z_view: Field
    w_view: Field = None

    def __post_init__(self):
        if self.w_view is None:
            object.__setattr__(self, "w_view", ChartPullback(self.z_view))

    def chart(self, index):
        return self.z_view if index == 0 else self.w_view


# -- sampled functions -------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SampledFunction:
    """Grid values over a box, optionally backed by the smooth field they
    were sampled from.  Off-grid evaluation uses the source when present and
    multilinear interpolation otherwise."""

    domain: object
    values: np.ndarray
    source: Field = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != self.domain.shape:
            raise DomainError(f"values shape {values.shape} does not match grid {self.domain.shape}")
        if not np.all(np.isfinite(values)):
            raise DomainError("sampled values must be finite")
        object.__setattr__(self, "values", values)

    @classmethod
    def from_field(cls, f, box):
        return cls(box, f.value(box.grid()), f)

    def field(self):
        return self.source if self.source is not None else GridField(self)

    def interpolate(self, z):
        return GridField(self).value(z)

    def __call__(self, z):
        return self.field().value(z)


@dataclass(frozen=True, eq=False)
class GridField(Field):
    """Multilinear interpolation of grid data; derivatives by central
    differences on the grid, interpolated the same way.  Points outside the
    box are clamped to it."""

    sampled: SampledFunction

    def __post_init__(self):
        box = self.sampled.domain
        vals = self.sampled.values
        axes = box.axes
        grads = np.gradient(vals, *axes, edge_order=2)
        if vals.ndim == 1:
            grads = [grads]
        hess = [[np.gradient(g, axes[b], axis=b, edge_order=2) for b in range(vals.ndim)] for g in grads]
        grad_arr = np.stack(grads, axis=-1)
        hess_arr = np.stack([np.stack(row, axis=-1) for row in hess], axis=-2)
        hess_arr = 0.5 * (hess_arr + np.swapaxes(hess_arr, -1, -2))
        object.__setattr__(self, "_value", RegularGridInterpolator(axes, vals))
        object.__setattr__(self, "_grad", RegularGridInterpolator(axes, grad_arr))
        object.__setattr__(self, "_hess", RegularGridInterpolator(axes, hess_arr))

    @property
    def dimension(self):
        return self.sampled.domain.dimension

    def _x(self, z):
        box = self.sampled.domain
        x = to_real(_z(z, self.dimension))
        return np.clip(x, box.lower, box.upper)

    def value(self, z):
        x = self._x(z)
        return self._value(x.reshape(-1, x.shape[-1])).reshape(x.shape[:-1])

    def gradient(self, z):
        x = self._x(z)
        return self._grad(x.reshape(-1, x.shape[-1])).reshape(x.shape)

    def hessian(self, z):
        x = self._x(z)
        d = x.shape[-1]
        return self._hess(x.reshape(-1, d)).reshape(x.shape + (d,))
