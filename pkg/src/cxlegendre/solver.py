"""Batched damped Newton ascent for many small, independent maximizations."""

from dataclasses import dataclass

import numpy as np

ARMIJO_SLOPE = 1e-4
BACKTRACK = 0.5
GRAD_TOL = 1e-10
MAX_ITER = 50
ROUNDING_SLACK = 1e-11


@dataclass
class NewtonResult:
    x: np.ndarray
    value: np.ndarray
    grad_norm: np.ndarray
    iterations: np.ndarray
    converged: np.ndarray
    max_hessian_eig: np.ndarray


def _ascent_direction(H, g):
    # Solve (-H + shift I) p = g; the shift only kicks in where -H is not
    # safely positive definite.
    negH = -H
    eig = np.linalg.eigvalsh(negH)
    scale = 1.0 + np.abs(eig[:, -1])
    floor = 1e-8 * scale
    shift = np.where(eig[:, 0] > floor, 0.0, floor - eig[:, 0])
    d = H.shape[-1]
    return np.linalg.solve(negH + shift[:, None, None] * np.eye(d), g[..., None])[..., 0]


def newton_maximize(fun, x0, tol=GRAD_TOL, max_iter=MAX_ITER, slope=ARMIJO_SLOPE,
                    shrink=BACKTRACK, max_backtracks=40):
    """Maximize m independent objectives in d real variables.

    ``fun(x, idx, order)`` evaluates the objectives numbered ``idx`` at the
    rows of ``x``; order 0 returns values, order 2 returns (values, gradients,
    Hessians).  Each step is a Newton step with Armijo backtracking; a
    Hessian that is not negative definite is shifted first.
    """
    x = np.array(x0, dtype=float, copy=True)
    m, d = x.shape
    idx_all = np.arange(m)
    f, g, H = fun(x, idx_all, 2)
    f, g, H = np.array(f, dtype=float), np.array(g, dtype=float), np.array(H, dtype=float)
    iterations = np.zeros(m, dtype=int)
    stalled = np.zeros(m, dtype=bool)

    for _ in range(max_iter):
        gnorm = np.linalg.norm(g, axis=-1)
        active = np.flatnonzero((gnorm >= tol) & ~stalled)
        if active.size == 0:
            break
        p = _ascent_direction(H[active], g[active])
        gp = np.sum(g[active] * p, axis=-1)
        alpha = np.ones(active.size)
        accepted = np.zeros(active.size, dtype=bool)
        for _ in range(max_backtracks):
            pend = np.flatnonzero(~accepted)
            if pend.size == 0:
                break
            trial = x[active[pend]] + alpha[pend, None] * p[pend]
            ft = np.asarray(fun(trial, active[pend], 0), dtype=float)
            f0 = f[active[pend]]
            # Objective values carry O(1) cancelling terms; the slack keeps
            # quadratically convergent final steps from being rejected on rounding.
            ok = ft >= f0 + slope * alpha[pend] * gp[pend] - ROUNDING_SLACK * (1.0 + np.abs(f0))
            accepted[pend[ok]] = True
            alpha[pend[~ok]] *= shrink
        stalled[active[~accepted]] = True
        moved = active[accepted]
        if moved.size:
            x[moved] = x[moved] + alpha[accepted, None] * p[accepted]
            fm, gm, Hm = fun(x[moved], moved, 2)
            f[moved], g[moved], H[moved] = fm, gm, Hm
            iterations[moved] += 1

    gnorm = np.linalg.norm(g, axis=-1)
    return NewtonResult(
        x=x,
        value=f,
        grad_norm=gnorm,
        iterations=iterations,
        converged=gnorm < tol,
        max_hessian_eig=np.linalg.eigvalsh(H)[:, -1],
    )
