"""Computational domains: tensor-product boxes in C^n and a two-chart sphere."""

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import ConfigError


def _complex_vector(values):
    arr = np.atleast_1d(np.asarray(values))
    if arr.dtype.kind in "iuf" and arr.ndim == 2 and arr.shape[-1] == 2:
        arr = arr[:, 0] + 1j * arr[:, 1]
    return arr.astype(complex)


@dataclass(frozen=True, eq=False)
class Box:
    """Uniform grid on a box in C^n.

    The grid has ``points`` nodes on each of the 2n real axes, ordered
    (Re z_1..Re z_n, Im z_1..Im z_n); ``half_widths`` applies to both the
    real and imaginary axis of each complex coordinate.
    """

    center: np.ndarray
    half_widths: np.ndarray
    points: int
    kind: str = field(default="box", init=False)

    def __post_init__(self):
        center = _complex_vector(self.center)
        half = np.atleast_1d(np.asarray(self.half_widths, dtype=float))
        if half.shape == (1,) and center.shape[0] > 1:
            half = np.full(center.shape[0], half[0])
        if half.shape != center.shape:
            raise ConfigError("center and half_widths must have the same length")
        if np.any(half <= 0):
            raise ConfigError("half_widths must be positive")
        if int(self.points) < 3:
            raise ConfigError("a box grid needs at least 3 points per axis")
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "half_widths", half)
        object.__setattr__(self, "points", int(self.points))

    @classmethod
    def cube(cls, n=1, half_width=1.0, points=64, center=None):
        center = np.zeros(n, dtype=complex) if center is None else center
        return cls(center, np.full(n, float(half_width)), points)

    @property
    def dimension(self):
        return self.center.shape[0]

    @property
    def shape(self):
        return (self.points,) * (2 * self.dimension)

    @property
    def lower(self):
        c = np.concatenate([self.center.real, self.center.imag])
        return c - np.concatenate([self.half_widths, self.half_widths])

    @property
    def upper(self):
        c = np.concatenate([self.center.real, self.center.imag])
        return c + np.concatenate([self.half_widths, self.half_widths])

    @property
    def steps(self):
        return (self.upper - self.lower) / (self.points - 1)

    @property
    def diameter(self):
        return float(np.linalg.norm(self.upper - self.lower))

    @cached_property
    def axes(self):
        return [np.linspace(lo, hi, self.points) for lo, hi in zip(self.lower, self.upper)]

    def real_grid(self):
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.stack(mesh, axis=-1)

    def grid(self):
        x = self.real_grid()
        n = self.dimension
        return x[..., :n] + 1j * x[..., n:]

    def contains(self, z, margin=0.0):
        z = np.asarray(z, dtype=complex)
        x = np.concatenate([z.real, z.imag], axis=-1)
        return np.all((x >= self.lower - margin) & (x <= self.upper + margin), axis=-1)

    def boundary_distance(self, z):
        z = np.asarray(z, dtype=complex)
        x = np.concatenate([z.real, z.imag], axis=-1)
        return np.min(np.minimum(x - self.lower, self.upper - x), axis=-1)

    def interior_mask(self, layers=1):
        mask = np.zeros(self.shape, dtype=bool)
        inner = tuple(slice(layers, self.points - layers) for _ in self.shape)
        mask[inner] = True
        return mask

    def with_points(self, points):
        return Box(self.center, self.half_widths, points)

    def to_dict(self):
        return {
            "kind": "box",
            "center": [[float(c.real), float(c.imag)] for c in self.center],
            "half_widths": [float(h) for h in self.half_widths],
            "points": self.points,
        }


@dataclass(frozen=True, eq=False)
class Sphere:
    """Riemann sphere as two square charts z and w = 1/z."""

    points: int = 64
    half_width: float = 1.5
    kind: str = field(default="sphere", init=False)

    def __post_init__(self):
        if self.half_width <= 1.0:
            raise ConfigError("sphere charts need half-width > 1 to overlap")
        if int(self.points) < 3:
            raise ConfigError("a chart grid needs at least 3 points per axis")

    dimension = 1

    @cached_property
    def chart(self):
        return Box.cube(1, self.half_width, self.points)

    @property
    def charts(self):
        # Both charts use the same coordinate box; they differ by the glue map.
        return (self.chart, self.chart)

    @staticmethod
    def transition(z):
        return 1.0 / np.asarray(z, dtype=complex)

    def overlap_mask(self, z):
        r = np.abs(np.asarray(z, dtype=complex)[..., 0])
        return (r >= 1.0 / self.half_width) & (r <= self.half_width)

    def own_mask(self, z):
        """Points this chart is responsible for: |coordinate| <= half-width."""
        return np.abs(np.asarray(z, dtype=complex)[..., 0]) <= self.half_width

    def with_points(self, points):
        return Sphere(points, self.half_width)

    def to_dict(self):
        return {"kind": "sphere", "points": self.points, "half_width": self.half_width}


def domain_from_dict(spec):
    try:
        kind = spec.get("kind", "box")
        if kind == "sphere":
            return Sphere(int(spec.get("points", 64)), float(spec.get("half_width", 1.5)))
        if kind == "box":
            center = spec.get("center", [[0.0, 0.0]])
            half = spec.get("half_widths", [1.0] * len(center))
            return Box(center, half, int(spec.get("points", 64)))
    except (TypeError, ValueError, KeyError) as exc:
        raise ConfigError(f"bad domain descriptor {spec!r}: {exc}") from exc
    raise ConfigError(f"unknown domain kind {kind!r}")
