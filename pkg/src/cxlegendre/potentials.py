"""Real-analytic Kähler potentials, their polarizations and Calabi's diastasis.

Every potential is described through its polarization phi_C(z, w), which is
holomorphic in z and antiholomorphic in w.  The potential itself, its complex
derivatives and the diastasis

    D(z, w) = phi(z) + phi(w) - 2 Re phi_C(z, w)

are all derived from four primitives: ``polarize`` and the derivatives
``polar_dz`` (d/dz), ``polar_dzz`` (d2/dz dz) and ``polar_dzdw`` (d2/dz dwbar).
Arrays of points have shape (..., n) and broadcast against each other.
"""

import json
from dataclasses import dataclass, field
import numpy as np

from .coords import mixed_real_block, real_gradient, real_hessian
from .errors import (
    ConfigError,
    ConsistencyError,
    DegeneratePotentialError,
    DomainError,
    PolarizationDomainError,
)

REALNESS_TOL = 1e-12


def _points(z, n):
    z = np.asarray(z, dtype=complex)
    if z.ndim == 0:
        z = z[None]
    if z.shape[-1] != n:
        raise DomainError(f"expected points with last axis {n}, got shape {z.shape}")
    return z


class Potential:
    """Base class; subclasses provide the polarization primitives."""

    dimension = 1

    def polar_valid(self, z, w):
        z, w = self._pair(z, w)
        return np.ones(np.broadcast_shapes(z.shape[:-1], w.shape[:-1]), dtype=bool)

    def _pair(self, z, w):
        return _points(z, self.dimension), _points(w, self.dimension)

    def _check_domain(self, z, w):
        ok = self.polar_valid(z, w)
        if not np.all(ok):
            raise PolarizationDomainError(
                f"{type(self).__name__}: pair outside the polarization domain "
                "(antipodal or on the branch cut)"
            )

    # -- values ---------------------------------------------------------
    def evaluate(self, z):
        z = _points(z, self.dimension)
        raw = self.polarize(z, z)
        scale = 1.0 + np.abs(raw)
        if np.any(np.abs(raw.imag) > REALNESS_TOL * scale):
            raise ConsistencyError("potential has a non-negligible imaginary part")
        value = raw.real
        if not np.all(np.isfinite(value)):
            raise DomainError("potential evaluation overflowed")
        return value

    def diastasis(self, z, w):
        z, w = self._pair(z, w)
        return self.evaluate(z) + self.evaluate(w) - 2.0 * self.polarize(z, w).real

    def complex_derivatives(self, z):
        """Return (d phi/dz, d phi/dzbar, d2 phi/dz dzbar) at z."""
        z = _points(z, self.dimension)
        a = self.polar_dz(z, z)
        H = self.polar_dzdw(z, z)
        if np.any(np.abs(H - np.conj(np.swapaxes(H, -1, -2))) > 1e-10 * (1 + np.abs(H))):
            raise ConsistencyError("mixed Hessian is not Hermitian")
        return a, np.conj(a), 0.5 * (H + np.conj(np.swapaxes(H, -1, -2)))

    def mixed_hessian(self, z):
        return self.complex_derivatives(z)[2]

    # -- real-coordinate derivatives used by the solvers ------------------
    def gradient(self, z):
        z = _points(z, self.dimension)
        return real_gradient(self.polar_dz(z, z))

    def hessian(self, z):
        z = _points(z, self.dimension)
        return real_hessian(self.polar_dzz(z, z), self.polar_dzdw(z, z))

    def diastasis_gradient(self, z, w):
        """Real gradient of z -> D(z, w)."""
        z, w = self._pair(z, w)
        return real_gradient(self.polar_dz(z, z) - self.polar_dz(z, w))

    def diastasis_hessian(self, z, w):
        """Real Hessian of z -> D(z, w)."""
        z, w = self._pair(z, w)
        A = self.polar_dzz(z, z) - self.polar_dzz(z, w)
        H = self.polar_dzdw(z, z)
        return real_hessian(A, np.broadcast_to(H, A.shape))

    def diastasis_mixed(self, z, w):
        """Real mixed Hessian d2 D / dz dw (rows: z coordinates)."""
        z, w = self._pair(z, w)
        return mixed_real_block(self.polar_dzdw(z, w))

    def polar_real_gradient(self, z, w):
        """Real gradient in z of 2 Re phi_C(z, w)."""
        z, w = self._pair(z, w)
        return real_gradient(self.polar_dz(z, w))

    def polar_real_hessian(self, z, w):
        z, w = self._pair(z, w)
        A = self.polar_dzz(z, w)
        return real_hessian(A, np.zeros_like(A))

    def to_dict(self):
        raise NotImplementedError


@dataclass(frozen=True, eq=False)
class Euclidean(Potential):
    dimension: int = 1

    def polarize(self, z, w):
        z, w = self._pair(z, w)
        return np.sum(z * np.conj(w), axis=-1)

    def polar_dz(self, z, w):
        z, w = self._pair(z, w)
        return np.broadcast_to(np.conj(w), np.broadcast_shapes(z.shape, w.shape)).copy()

    def polar_dzz(self, z, w):
        z, w = self._pair(z, w)
        lead = np.broadcast_shapes(z.shape[:-1], w.shape[:-1])
        return np.zeros(lead + (self.dimension, self.dimension), dtype=complex)

    def polar_dzdw(self, z, w):
        z, w = self._pair(z, w)
        lead = np.broadcast_shapes(z.shape[:-1], w.shape[:-1])
        return np.broadcast_to(np.eye(self.dimension, dtype=complex), lead + (self.dimension,) * 2).copy()

    def diastasis(self, z, w):
        z, w = self._pair(z, w)
        return np.sum(np.abs(z - w) ** 2, axis=-1)

    def to_dict(self):
        return {"variant": "euclidean", "dimension": self.dimension}


@dataclass(frozen=True, eq=False)
class FubiniStudy(Potential):
    """log(1 + |z|^2), polarized with the principal branch of log(1 + z.wbar)."""

    dimension: int = 1

    def _s(self, z, w):
        return 1.0 + np.sum(z * np.conj(w), axis=-1)

    def polar_valid(self, z, w):
        z, w = self._pair(z, w)
        s = self._s(z, w)
        tiny = 1e-14
        on_cut = (np.abs(s.imag) <= tiny * (1 + np.abs(s.real))) & (s.real <= tiny)
        return ~on_cut

    def polarize(self, z, w):
        z, w = self._pair(z, w)
        self._check_domain(z, w)
        return np.log(self._s(z, w))

    def polar_dz(self, z, w):
        z, w = self._pair(z, w)
        s = self._s(z, w)
        return np.conj(w) / s[..., None]

    def polar_dzz(self, z, w):
        z, w = self._pair(z, w)
        s = self._s(z, w)
        wb = np.conj(w)
        return -(wb[..., :, None] * wb[..., None, :]) / (s**2)[..., None, None]

    def polar_dzdw(self, z, w):
        z, w = self._pair(z, w)
        s = self._s(z, w)
        eye = np.eye(self.dimension, dtype=complex)
        outer = np.conj(w)[..., :, None] * z[..., None, :]
        return eye / s[..., None, None] - outer / (s**2)[..., None, None]

    def evaluate(self, z):
        z = _points(z, self.dimension)
        return np.log1p(np.sum(np.abs(z) ** 2, axis=-1))

    def diastasis(self, z, w):
        z, w = self._pair(z, w)
        self._check_domain(z, w)
        s = self._s(z, w)
        return self.evaluate(z) + self.evaluate(w) - np.log(np.abs(s) ** 2)

    def to_dict(self):
        return {"variant": "fubini-study", "dimension": self.dimension}


@dataclass(frozen=True, eq=False)
class HermitianSeries:
    """Truncated series sum c[a, b] z^a zbar^b with c[a, b] = conj(c[b, a])."""

    dimension: int
    coefficients: dict
    degree_bound: int

    def __post_init__(self):
        n = self.dimension
        if n < 1:
            raise ConfigError("dimension must be positive")
        clean = {}
        for (alpha, beta), c in self.coefficients.items():
            alpha, beta = tuple(int(a) for a in alpha), tuple(int(b) for b in beta)
            if len(alpha) != n or len(beta) != n:
                raise ConfigError(f"multi-index pair {alpha},{beta} has wrong length for n={n}")
            if min(alpha + beta) < 0:
                raise ConfigError(f"multi-index pair {alpha},{beta} has a negative entry")
            if sum(alpha) + sum(beta) > self.degree_bound:
                raise ConfigError(f"pair {alpha},{beta} exceeds degree bound {self.degree_bound}")
            clean[(alpha, beta)] = complex(c)
        scale = max((abs(c) for c in clean.values()), default=1.0)
        for (alpha, beta), c in clean.items():
            partner = clean.get((beta, alpha), 0.0)
            if abs(c - np.conj(partner)) > 1e-12 * max(scale, 1.0):
                raise ConfigError(
                    f"coefficients are not Hermitian: c[{alpha},{beta}] = {c} but "
                    f"c[{beta},{alpha}] = {partner}"
                )
        object.__setattr__(self, "coefficients", clean)
        keys = list(clean)
        object.__setattr__(self, "_alphas", np.array([k[0] for k in keys], dtype=int).reshape(-1, n))
        object.__setattr__(self, "_betas", np.array([k[1] for k in keys], dtype=int).reshape(-1, n))
        object.__setattr__(self, "_coeffs", np.array([clean[k] for k in keys], dtype=complex))


def _monomials(z, exps):
    # z (..., n), exps (T, n) -> (..., T); negative exponents only occur with
    # a zero prefactor, so they are clipped.
    return np.prod(np.power(z[..., None, :], np.maximum(exps, 0)), axis=-1)


@dataclass(frozen=True, eq=False)
class SeriesPotential(Potential):
    series: HermitianSeries
    dimension: int = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "dimension", self.series.dimension)

    def polarize(self, z, w):
        z, w = self._pair(z, w)
        s = self.series
        return np.sum(s._coeffs * _monomials(z, s._alphas) * _monomials(np.conj(w), s._betas), axis=-1)

    def polar_dz(self, z, w):
        z, w = self._pair(z, w)
        s = self.series
        n = self.dimension
        wpart = s._coeffs * _monomials(np.conj(w), s._betas)
        out = []
        for j in range(n):
            e = np.eye(n, dtype=int)[j]
            out.append(np.sum(wpart * s._alphas[:, j] * _monomials(z, s._alphas - e), axis=-1))
        return np.stack(out, axis=-1)

    def polar_dzz(self, z, w):
        z, w = self._pair(z, w)
        s = self.series
        n = self.dimension
        wpart = s._coeffs * _monomials(np.conj(w), s._betas)
        eye = np.eye(n, dtype=int)
        rows = []
        for j in range(n):
            row = []
            for k in range(n):
                fac = s._alphas[:, j] * (s._alphas[:, k] - (j == k))
                row.append(np.sum(wpart * fac * _monomials(z, s._alphas - eye[j] - eye[k]), axis=-1))
            rows.append(np.stack(row, axis=-1))
        return np.stack(rows, axis=-2)

    def polar_dzdw(self, z, w):
        z, w = self._pair(z, w)
        s = self.series
        n = self.dimension
        eye = np.eye(n, dtype=int)
        wb = np.conj(w)
        rows = []
        for j in range(n):
            zpart = s._coeffs * s._alphas[:, j] * _monomials(z, s._alphas - eye[j])
            row = [np.sum(zpart * s._betas[:, k] * _monomials(wb, s._betas - eye[k]), axis=-1) for k in range(n)]
            rows.append(np.stack(row, axis=-1))
        return np.stack(rows, axis=-2)

    def to_dict(self):
        return {
            "variant": "series",
            "dimension": self.dimension,
            "degree_bound": self.series.degree_bound,
            "coefficients": [
                {"alpha": list(a), "beta": list(b), "re": c.real, "im": c.imag}
                for (a, b), c in self.series.coefficients.items()
            ],
        }


@dataclass(frozen=True, eq=False)
class ScaledSum(Potential):
    terms: tuple
    dimension: int = field(init=False)

    def __post_init__(self):
        terms = tuple((float(w), p) for w, p in self.terms)
        if not terms:
            raise ConfigError("ScaledSum needs at least one term")
        dims = {p.dimension for _, p in terms}
        if len(dims) != 1:
            raise ConfigError("ScaledSum terms must share a dimension")
        object.__setattr__(self, "terms", terms)
        object.__setattr__(self, "dimension", dims.pop())

    def _sum(self, name, z, w):
        return sum(wt * getattr(p, name)(z, w) for wt, p in self.terms)

    def polar_valid(self, z, w):
        ok = True
        for _, p in self.terms:
            ok = ok & p.polar_valid(z, w)
        return ok

    def polarize(self, z, w):
        return self._sum("polarize", z, w)

    def polar_dz(self, z, w):
        return self._sum("polar_dz", z, w)

    def polar_dzz(self, z, w):
        return self._sum("polar_dzz", z, w)

    def polar_dzdw(self, z, w):
        return self._sum("polar_dzdw", z, w)

    def evaluate(self, z):
        return sum(wt * p.evaluate(z) for wt, p in self.terms)

    def diastasis(self, z, w):
        return sum(wt * p.diastasis(z, w) for wt, p in self.terms)

    def to_dict(self):
        return {
            "variant": "scaled-sum",
            "dimension": self.dimension,
            "terms": [{"weight": w, "potential": p.to_dict()} for w, p in self.terms],
        }


# -- loading ---------------------------------------------------------------

def potential_from_dict(spec):
    variant = spec.get("variant")
    dim = int(spec.get("dimension", 1))
    if variant == "euclidean":
        return Euclidean(dim)
    if variant in ("fubini-study", "fubinistudy", "fubini_study"):
        return FubiniStudy(dim)
    if variant == "series":
        coeffs = {}
        for entry in spec.get("coefficients", []):
            key = (tuple(entry["alpha"]), tuple(entry["beta"]))
            coeffs[key] = complex(entry.get("re", 0.0), entry.get("im", 0.0))
        bound = int(spec.get("degree_bound", max((sum(a) + sum(b) for a, b in coeffs), default=2)))
        return SeriesPotential(HermitianSeries(dim, coeffs, bound))
    if variant in ("scaled-sum", "scaledsum"):
        return ScaledSum(tuple((t["weight"], potential_from_dict(t["potential"])) for t in spec["terms"]))
    raise ConfigError(f"unknown potential variant {variant!r}")


def load_potential(path):
    with open(path) as fh:
        try:
            spec = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    return potential_from_dict(spec)


# -- strong plurisubharmonicity and the convexity neighborhood -------------

def _chart_box(domain):
    return domain.chart if domain.kind == "sphere" else domain


def check_strong_psh(potential, domain):
    """Smallest eigenvalue of the complex Hessian over the domain grid."""
    box = _chart_box(domain)
    z = box.grid().reshape(-1, box.dimension)
    H = potential.polar_dzdw(z, z)
    if np.max(np.abs(H - np.conj(np.swapaxes(H, -1, -2)))) > 1e-10:
        raise ConsistencyError("mixed Hessian is not Hermitian on the grid")
    return float(np.min(np.linalg.eigvalsh(H)))


@dataclass(frozen=True)
class NeighborhoodEstimate:
    """Tube |z - q| <= radius_delta on which D(z, q) >= C |z - q|^2 held.

    ``hessian_floor`` is the smallest eigenvalue of the real Hessian of
    z -> D(z, q) seen on the inner half of the tube, |z - q| <= delta / 2,
    where maximizers are confined.
    """

    radius_delta: float
    convexity_constant: float
    hessian_floor: float = 0.0

    def to_dict(self):
        return {
            "radius_delta": self.radius_delta,
            "convexity_constant": self.convexity_constant,
            "hessian_floor": self.hessian_floor,
        }


def _sample_pairs(box, samples_per_axis, directions, seed):
    rng = np.random.default_rng(seed)
    d = 2 * box.dimension
    stride = max(1, int(np.ceil((box.points - 1) / (samples_per_axis - 1))))
    grid = box.real_grid()[tuple(slice(None, None, stride) for _ in range(d))]
    base = grid.reshape(-1, d)
    fixed = np.concatenate([np.eye(d), -np.eye(d)])
    rand = rng.normal(size=(directions, d))
    dirs = np.concatenate([fixed, rand / np.linalg.norm(rand, axis=1, keepdims=True)])
    return base, dirs


def _tube_stats(potential, box, base, dirs, delta, radii):
    n = box.dimension
    ratio_min, eig_min, inner_eig, ok = np.inf, np.inf, np.inf, True
    q = base[:, None, :]
    for frac in radii:
        p = q + frac * delta * dirs[None, :, :]
        inside = np.all((p >= box.lower) & (p <= box.upper), axis=-1)
        if not np.any(inside):
            continue
        qq = np.broadcast_to(q, p.shape)[inside]
        pp = p[inside]
        zq = qq[:, :n] + 1j * qq[:, n:]
        zp = pp[:, :n] + 1j * pp[:, n:]
        valid = potential.polar_valid(zp, zq)
        if not np.all(valid):
            return False, 0.0, 0.0
        D = potential.diastasis(zp, zq)
        dist2 = np.sum((pp - qq) ** 2, axis=-1)
        ratio = D / dist2
        eig = np.linalg.eigvalsh(potential.diastasis_hessian(zp, zq))[:, 0]
        ratio_min = min(ratio_min, float(np.min(ratio)))
        eig_min = min(eig_min, float(np.min(eig)))
        if frac <= 0.5:
            inner_eig = min(inner_eig, float(np.min(eig)))
        if not (np.all(np.isfinite(ratio)) and ratio_min > 0 and eig_min > 0):
            ok = False
    return ok, ratio_min, inner_eig


def estimate_neighborhood(potential, domain, samples_per_axis=None, directions=12,
                          bisection_steps=14, seed=0):
    """Empirical (delta, C) for the convexity tube around the diagonal.

    Bisection on delta starts from the box diameter; a radius is accepted
    when every sampled pair within it has D > 0 and a positive-definite real
    Hessian of z -> D(z, q).  C is half the smallest ratio D / |z - q|^2.
    """
    box = _chart_box(domain)
    if check_strong_psh(potential, domain) <= 0:
        raise DegeneratePotentialError("potential is not strongly psh on the domain")
    if samples_per_axis is None:
        samples_per_axis = 17 if box.dimension == 1 else 5
    base, dirs = _sample_pairs(box, samples_per_axis, directions, seed)
    radii = np.linspace(1.0, 0.0, 9)[:-1]

    hi = box.diameter
    ok, ratio, eig = _tube_stats(potential, box, base, dirs, hi, radii)
    if ok:
        return NeighborhoodEstimate(hi, 0.5 * ratio, eig)
    lo, best = 0.0, None
    for _ in range(bisection_steps):
        mid = 0.5 * (lo + hi)
        ok, ratio, eig = _tube_stats(potential, box, base, dirs, mid, radii)
        if ok:
            lo, best = mid, (ratio, eig)
        else:
            hi = mid
    if best is None:
        raise DegeneratePotentialError("no admissible tube radius found on this grid")
    return NeighborhoodEstimate(lo, 0.5 * best[0], best[1])

