"""Legendre transforms: classical, flat complex, and diastasis-based.

The diastasis transform of a perturbation eta is

    L(eta)(q) = max over |p - q| <= delta of  -D(p, q) - eta(p),

and its maximizer is the gradient map G(eta)(q).  Inputs are continuous and
maxima are attained inside the ball, so no upper semicontinuous
regularization is applied.
"""

from dataclasses import dataclass, field

import numpy as np

from .coords import to_complex, to_real
from .errors import ConcavityError, DomainError, NeighborhoodViolation
from .fields import Field, FieldSum, PotentialField, SampledFunction, SphereFunction
from .solver import GRAD_TOL, MAX_ITER, newton_maximize

CHUNK = 1 << 15


def _as_field(f):
    return f.field() if isinstance(f, SampledFunction) else f


# -- classical transform ------------------------------------------------------

@dataclass
class RealLegendreResult:
    value: float
    argmax: np.ndarray
    on_boundary: bool


def real_legendre(psi, y, lower, upper, points=2001, gradient=None, hessian=None):
    """sup over the box [lower, upper] of x.y - psi(x).

    ``psi`` maps arrays of shape (m, N) to (m,).  The grid maximum is refined
    by Newton's method when ``gradient`` and ``hessian`` are supplied.
    """
    y = np.atleast_1d(np.asarray(y, dtype=float))
    lower = np.broadcast_to(np.asarray(lower, dtype=float), y.shape)
    upper = np.broadcast_to(np.asarray(upper, dtype=float), y.shape)
    axes = [np.linspace(lo, hi, points) for lo, hi in zip(lower, upper)]
    x = np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, y.size)
    obj = x @ y - psi(x)
    k = int(np.argmax(obj))
    best, value = x[k], float(obj[k])
    multi = np.unravel_index(k, (points,) * y.size)
    on_boundary = any(i in (0, points - 1) for i in multi)

    if gradient is not None and hessian is not None and not on_boundary:
        def fun(xs, idx, order):
            v = xs @ y - psi(xs)
            if order == 0:
                return v
            return v, y - gradient(xs), -hessian(xs)

        res = newton_maximize(fun, best[None, :])
        cand = res.x[0]
        if np.all(cand >= lower) and np.all(cand <= upper) and res.value[0] >= value:
            best, value = cand, float(res.value[0])
    return RealLegendreResult(value, best, on_boundary)


# -- solver plumbing --------------------------------------------------------------

@dataclass
class SolverReport:
    iterations: np.ndarray
    grad_norm: np.ndarray
    degraded: np.ndarray
    near_boundary: np.ndarray = None

    @property
    def worst_grad_norm(self):
        return float(np.max(self.grad_norm)) if self.grad_norm.size else 0.0

    def to_dict(self):
        out = {
            "points": int(self.grad_norm.size),
            "max_iterations": int(np.max(self.iterations)) if self.iterations.size else 0,
            "mean_iterations": float(np.mean(self.iterations)) if self.iterations.size else 0.0,
            "worst_grad_norm": self.worst_grad_norm,
            "degraded_points": int(np.sum(self.degraded)),
        }
        if self.near_boundary is not None:
            out["near_boundary_points"] = int(np.sum(self.near_boundary))
        return out


def _diastasis_objective(potential, eta, q):
    n = potential.dimension

    def fun(x, idx, order):
        z = to_complex(x)
        qq = q[idx]
        if order == 0:
            return -potential.diastasis(z, qq) - eta.value(z)
        v, g, H = eta.derivatives(z)
        f = -potential.diastasis(z, qq) - v
        return f, -potential.diastasis_gradient(z, qq) - g, -potential.diastasis_hessian(z, qq) - H

    assert q.shape[-1] == n
    return fun


def _flat_objective(potential, psi, w):
    def fun(x, idx, order):
        z = to_complex(x)
        ww = w[idx]
        if order == 0:
            return 2.0 * potential.polarize(z, ww).real - psi.value(z)
        v, g, H = psi.derivatives(z)
        f = 2.0 * potential.polarize(z, ww).real - v
        return f, potential.polar_real_gradient(z, ww) - g, potential.polar_real_hessian(z, ww) - H

    return fun


def _brute_force_ball(fun, q, delta, n, per_axis):
    """Grid maximization of ``fun`` over the delta-ball around each q."""
    d = 2 * n
    offs = np.stack(np.meshgrid(*[np.linspace(-delta, delta, per_axis)] * d, indexing="ij"), -1)
    offs = offs.reshape(-1, d)
    offs = offs[np.linalg.norm(offs, axis=1) <= delta]
    step = 2 * delta / (per_axis - 1)
    xq = to_real(q)
    best = np.empty_like(xq)
    for i in range(len(xq)):
        pts = xq[i] + offs
        vals = fun(pts, np.full(len(pts), i), 0)
        k = int(np.argmax(vals))
        # Uniqueness: a second near-tie far from the winner means the
        # objective is not concave on the ball.
        ties = np.flatnonzero(vals >= vals[k] - 1e-6)
        if ties.size > 1 and np.max(np.linalg.norm(pts[ties] - pts[k], axis=1)) > 10 * step:
            raise ConcavityError("two separated maxima found by the brute-force fallback", q[i])
        best[i] = pts[k]
    return best


def maximize(fun, q, neighborhood, z0=None, tol=GRAD_TOL, max_iter=MAX_ITER, strict=True):
    """Run the batched solver for query points q (m, n); returns
    (argmax (m, n), values (m,), SolverReport)."""
    q = np.asarray(q, dtype=complex)
    m, n = q.shape
    x0 = to_real(q if z0 is None else z0)
    res = newton_maximize(fun, x0, tol=tol, max_iter=max_iter)
    x = res.x
    degraded = ~res.converged
    if np.any(degraded):
        bad = np.flatnonzero(degraded)

        def sub(xs, idx, order):
            return fun(xs, bad[idx], order)

        x[bad] = _brute_force_ball(sub, q[bad], neighborhood.radius_delta, n, 41 if n == 1 else 11)
        res.value[bad] = fun(x[bad], bad, 0)
    z = to_complex(x)
    if strict:
        nonconcave = (~degraded) & (res.max_hessian_eig >= 0)
        if np.any(nonconcave):
            i = int(np.flatnonzero(nonconcave)[0])
            raise ConcavityError(f"objective not concave at the maximizer for q={q[i]}", q[i])
        dist = np.linalg.norm(z - q, axis=-1)
        outside = dist >= neighborhood.radius_delta
        if np.any(outside):
            i = int(np.flatnonzero(outside)[0])
            raise NeighborhoodViolation(
                f"maximizer for q={q[i]} left the delta-ball (|z-q|={dist[i]:.3g})", q[i]
            )
    report = SolverReport(res.iterations, res.grad_norm, degraded)
    return z, res.value, report


def _chunked(q, solve):
    q = np.asarray(q, dtype=complex)
    outs = [solve(q[i:i + CHUNK], slice(i, i + CHUNK)) for i in range(0, len(q), CHUNK)]
    z = np.concatenate([o[0] for o in outs])
    v = np.concatenate([o[1] for o in outs])
    rep = SolverReport(
        np.concatenate([o[2].iterations for o in outs]),
        np.concatenate([o[2].grad_norm for o in outs]),
        np.concatenate([o[2].degraded for o in outs]),
    )
    return z, v, rep


def _flatten(points, n):
    points = np.asarray(points, dtype=complex)
    if points.ndim == 0:
        points = points[None]
    if points.shape[-1] != n:
        raise DomainError(f"expected points with last axis {n}")
    return points.reshape(-1, n), points.shape[:-1]


# -- complex transforms -------------------------------------------------------------

def complex_legendre_flat(psi, potential, neighborhood, w, tol=GRAD_TOL, strict=True):
    """max over |z - w| <= delta of 2 Re phi_C(z, w) - psi(z).

    Returns (values, argmax) with the leading shape of ``w``.
    """
    psi = _as_field(psi)
    n = potential.dimension
    flat, lead = _flatten(w, n)

    def solve(wc, _):
        fun = _flat_objective(potential, psi, wc)
        return maximize(fun, wc, neighborhood, tol=tol, strict=strict)

    z, v, _ = _chunked(flat, solve)
    return v.reshape(lead), z.reshape(lead + (n,))


def diastasis_legendre(eta, potential, neighborhood, q, tol=GRAD_TOL, strict=True, z0=None,
                       with_report=False):
    """max over |p - q| <= delta of -D(p, q) - eta(p).

    Returns (values, argmax) with the leading shape of ``q``; the argmax is
    the gradient map G(eta)(q).
    """
    eta = _as_field(eta)
    n = potential.dimension
    flat, lead = _flatten(q, n)
    z0flat = None if z0 is None else _flatten(z0, n)[0]

    def solve(qc, sl):
        fun = _diastasis_objective(potential, eta, qc)
        start = None if z0flat is None else z0flat[sl]
        return maximize(fun, qc, neighborhood, z0=start, tol=tol, strict=strict)

    z, v, rep = _chunked(flat, solve)
    out = (v.reshape(lead), z.reshape(lead + (n,)))
    return out + (rep,) if with_report else out


@dataclass(frozen=True, eq=False)
class LegendreTransform(Field):
    """L(eta) as a smooth field, evaluated by a fresh solve at every point.

    The gradient is -grad_q D(G(q), q) and the Hessian follows from the
    implicit function theorem applied to the first-order condition.
    """

    eta: Field
    potential: object
    neighborhood: object
    tol: float = 1e-12

    @property
    def dimension(self):
        return self.potential.dimension

    def argmax(self, q):
        return diastasis_legendre(self.eta, self.potential, self.neighborhood, q, tol=self.tol)[1]

    def value(self, q):
        return diastasis_legendre(self.eta, self.potential, self.neighborhood, q, tol=self.tol)[0]

    def gradient(self, q):
        return self.derivatives(q)[1]

    def hessian(self, q):
        return self.derivatives(q)[2]

    def derivatives(self, q):
        q = np.asarray(q, dtype=complex)
        v, z = diastasis_legendre(self.eta, self.potential, self.neighborhood, q, tol=self.tol)
        pot = self.potential
        grad = -pot.diastasis_gradient(q, z)
        Mzz = -pot.diastasis_hessian(z, q) - self.eta.hessian(z)
        Mzq = -pot.diastasis_mixed(z, q)
        Mqq = -pot.diastasis_hessian(q, z)
        sol = np.linalg.solve(Mzz, Mzq)
        hess = Mqq - np.swapaxes(Mzq, -1, -2) @ sol
        return v, grad, 0.5 * (hess + np.swapaxes(hess, -1, -2))

    def map_jacobian(self, q):
        """Real Jacobian of G(eta) at q from the implicit function theorem."""
        q = np.asarray(q, dtype=complex)
        z = self.argmax(q)
        Mzz = -self.potential.diastasis_hessian(z, q) - self.eta.hessian(z)
        Mzq = -self.potential.diastasis_mixed(z, q)
        return -np.linalg.solve(Mzz, Mzq)


@dataclass
class TransformResult:
    transform: SampledFunction
    argmax: np.ndarray
    report: SolverReport

    def to_dict(self):
        return {"solver": self.report.to_dict()}


def transform_field(eta, potential, neighborhood, box, tol=GRAD_TOL):
    """L(eta) and G(eta) at every node of ``box``.

    Every point starts Newton at z = q; the solves are vectorized instead of
    being warm-started along grid rows.
    """
    eta = _as_field(eta)
    q = box.grid().reshape(-1, box.dimension)
    v, z, rep = diastasis_legendre(eta, potential, neighborhood, q, tol=tol, with_report=True)
    rep.near_boundary = box.boundary_distance(q) < neighborhood.radius_delta
    lazy = LegendreTransform(eta, potential, neighborhood)
    sampled = SampledFunction(box, v.reshape(box.shape), lazy)
    return TransformResult(sampled, z.reshape(box.shape + (box.dimension,)), rep)


def sphere_transform_fields(eta, neighborhood, sphere, potential=None, tol=GRAD_TOL):
    """transform_field on both charts of the sphere (Fubini-Study form)."""
    from .potentials import FubiniStudy

    potential = potential or FubiniStudy()
    if not isinstance(eta, SphereFunction):
        eta = SphereFunction(eta)
    return tuple(
        transform_field(eta.chart(i), potential, neighborhood, box, tol=tol)
        for i, box in enumerate(sphere.charts)
    )


def double_transform(eta, potential, neighborhood, box, tol=GRAD_TOL):
    """Sampled L(L(eta)) over ``box`` (nested Newton solves)."""
    lazy = LegendreTransform(_as_field(eta), potential, neighborhood)
    return transform_field(lazy, potential, neighborhood, box, tol=tol)


def double_transform_defect(eta, potential, neighborhood, box, method="newton"):
    """Signed defect L^2(eta) - eta on the grid; returns (max defect, array).

    ``method="brute"`` uses only the grid samples of eta and is valid for
    any continuous input, including non-concave objectives.
    """
    if method == "brute":
        sampled = eta if isinstance(eta, SampledFunction) else SampledFunction.from_field(eta, box)
        once = brute_force_transform(sampled, potential, neighborhood)
        twice = brute_force_transform(SampledFunction(box, once), potential, neighborhood)
        defect = twice - sampled.values
    else:
        eta = _as_field(eta)
        twice = double_transform(eta, potential, neighborhood, box)
        defect = twice.transform.values - eta.value(box.grid())
    return float(np.max(defect)), defect


def brute_force_transform(sampled, potential, neighborhood, queries=None, block=256):
    """Max of -D(p, q) - eta(p) over grid nodes p with |p - q| <= delta."""
    box = sampled.domain
    n = box.dimension
    p = box.grid().reshape(-1, n)
    eta = sampled.values.reshape(-1)
    q = p if queries is None else np.asarray(queries, dtype=complex).reshape(-1, n)
    out = np.empty(len(q))
    delta2 = neighborhood.radius_delta**2
    for i in range(0, len(q), block):
        qb = q[i:i + block, None, :]
        dist2 = np.sum(np.abs(p[None, :, :] - qb) ** 2, axis=-1)
        inside = dist2 <= delta2
        ok = inside & potential.polar_valid(p[None, :, :], qb)
        pp = np.broadcast_to(p[None], ok.shape + (n,))
        qq = np.broadcast_to(qb, ok.shape + (n,))
        vals = np.full(ok.shape, -np.inf)
        vals[ok] = -potential.diastasis(pp[ok], qq[ok]) - np.broadcast_to(eta, ok.shape)[ok]
        out[i:i + block] = np.max(vals, axis=1)
    return out.reshape(box.shape) if queries is None else out


# -- admissibility ----------------------------------------------------------------

@dataclass
class AdmissibilityReport:
    """C^2 smallness of a perturbation relative to the reference form.

    ``epsilon`` is the a priori bound min(C delta^2 / 8, hessian_floor / 2).
    The pointwise certificate checks, on sampled pairs, that the objective is
    uniformly concave on the half-ball and that every point of the outer
    annulus loses to p = q; it is the sharper of the two tests.
    """

    c2_norm: float
    epsilon: float
    concavity_margin: float
    separation_margin: float

    @property
    def a_priori(self):
        return self.c2_norm < self.epsilon

    @property
    def certified(self):
        return self.concavity_margin > 0 and self.separation_margin > 0

    @property
    def admissible(self):
        return self.a_priori or self.certified

    def to_dict(self):
        return {
            "c2_norm": self.c2_norm,
            "epsilon": self.epsilon,
            "concavity_margin": self.concavity_margin,
            "separation_margin": self.separation_margin,
            "a_priori": self.a_priori,
            "certified": self.certified,
            "admissible": self.admissible,
        }


def admissibility_radius(neighborhood):
    nb = neighborhood
    return min(nb.convexity_constant * nb.radius_delta**2 / 8.0, nb.hessian_floor / 2.0)


def _certificate(eta, potential, nb, base, directions=16, seed=0):
    n = potential.dimension
    d = 2 * n
    rng = np.random.default_rng(seed)
    rand = rng.normal(size=(directions, d))
    dirs = np.concatenate([np.eye(d), -np.eye(d), rand / np.linalg.norm(rand, axis=1, keepdims=True)])
    eta_q = eta.value(base)
    conc, sep = np.inf, np.inf
    for frac in np.linspace(0.0625, 1.0, 16):
        p = to_real(base)[:, None, :] + frac * nb.radius_delta * dirs[None]
        zp = to_complex(p)
        qq = np.broadcast_to(base[:, None, :], zp.shape)
        if frac <= 0.5:
            lam = np.linalg.eigvalsh(potential.diastasis_hessian(zp, qq))[..., 0]
            heta = np.max(np.abs(np.linalg.eigvalsh(eta.hessian(zp))), axis=-1)
            conc = min(conc, float(np.min((lam - heta) / lam)))
        else:
            D = potential.diastasis(zp, qq)
            sep = min(sep, float(np.min((D + eta.value(zp) - eta_q[:, None]) / D)))
    return conc, sep


def admissibility(eta, potential, neighborhood, domain, samples_per_axis=17):
    """Check whether eta is a small enough perturbation for the transform."""
    if domain.kind == "sphere":
        eta = eta if isinstance(eta, SphereFunction) else SphereFunction(eta)
        views = [(eta.chart(i), box) for i, box in enumerate(domain.charts)]
    else:
        views = [(_as_field(eta), domain)]
    norm, conc, sep = 0.0, np.inf, np.inf
    for f, box in views:
        z = box.grid().reshape(-1, box.dimension)
        if domain.kind == "sphere":
            z = z[domain.own_mask(z)]
        norm = max(norm, f.c2_norm(z))
        n_axes = 2 * box.dimension
        per_axis = samples_per_axis if n_axes == 2 else 5
        stride = max(1, (box.points - 1) // (per_axis - 1))
        sub = box.grid()[tuple(slice(None, None, stride) for _ in range(n_axes))].reshape(-1, box.dimension)
        if domain.kind == "sphere":
            sub = sub[domain.own_mask(sub)]
        c, s = _certificate(f, potential, neighborhood, sub)
        conc, sep = min(conc, c), min(sep, s)
    return AdmissibilityReport(norm, admissibility_radius(neighborhood), conc, sep)


def flat_transform_field(psi, potential, neighborhood, box, tol=GRAD_TOL):
    """The flat transform of psi on every node of ``box``: (values, argmax)."""
    return complex_legendre_flat(psi, potential, neighborhood, box.grid(), tol=tol)


def perturbed_potential_field(potential, eta):
    """phi + eta as a single field."""
    return FieldSum(((1.0, PotentialField(potential)), (1.0, _as_field(eta))))
