"""Real/complex coordinate conventions.

A point of C^n is stored as a complex array of shape (..., n).  Real
coordinates are blocked: x = (Re z_1, ..., Re z_n, Im z_1, ..., Im z_n), and
every real gradient, Hessian or Jacobian in the package uses this ordering.

Wirtinger dictionary for a real-valued f with a = df/dz, A = d2f/dz dz and
H = d2f/dz dzbar (H Hermitian):

    grad f = (2 Re a, -2 Im a)
    f_xx = 2 Re A + 2 Re H      f_xy = -2 Im A + 2 Im H
    f_yx = -2 Im A - 2 Im H     f_yy = -2 Re A + 2 Re H

so the real gradient is twice the vector df/dzbar, written in real form.
"""

import numpy as np


def to_real(z):
    z = np.asarray(z, dtype=complex)
    return np.concatenate([z.real, z.imag], axis=-1)


def to_complex(x):
    x = np.asarray(x, dtype=float)
    n = x.shape[-1] // 2
    return x[..., :n] + 1j * x[..., n:]


def real_gradient(a):
    """Real gradient of a real function from its holomorphic derivative df/dz."""
    return np.concatenate([2.0 * a.real, -2.0 * a.imag], axis=-1)


def real_hessian(A, H):
    """Real 2n x 2n Hessian from d2f/dzdz (A) and d2f/dzdzbar (H)."""
    xx = 2.0 * (A.real + H.real)
    yy = 2.0 * (H.real - A.real)
    xy = 2.0 * (H.imag - A.imag)
    yx = -2.0 * (A.imag + H.imag)
    top = np.concatenate([xx, xy], axis=-1)
    bottom = np.concatenate([yx, yy], axis=-1)
    return np.concatenate([top, bottom], axis=-2)


def mixed_real_block(B):
    """Real mixed Hessian d2/dz dw of -2 Re g(z, w), g holomorphic in z and
    antiholomorphic in w, from B = d2g/dz dwbar.  Rows index z, columns w."""
    top = np.concatenate([-2.0 * B.real, -2.0 * B.imag], axis=-1)
    bottom = np.concatenate([2.0 * B.imag, -2.0 * B.real], axis=-1)
    return np.concatenate([top, bottom], axis=-2)


def hermitian_part(R):
    """Complex Hessian d2f/dz_j dzbar_k recovered from a real Hessian."""
    n = R.shape[-1] // 2
    xx, xy = R[..., :n, :n], R[..., :n, n:]
    yx, yy = R[..., n:, :n], R[..., n:, n:]
    return 0.25 * ((xx + yy) + 1j * (xy - yx))


def hermitian_to_form(H):
    """Antisymmetric real matrix of the 2-form i * sum H_jk dz_j ^ dzbar_k.

    With the form written as 1/2 sum W_ab dx_a ^ dx_b, the blocks are
    W = 2 [[-Im H, Re H], [-Re H, -Im H]].
    """
    top = np.concatenate([-2.0 * H.imag, 2.0 * H.real], axis=-1)
    bottom = np.concatenate([-2.0 * H.real, -2.0 * H.imag], axis=-1)
    return np.concatenate([top, bottom], axis=-2)


def form_to_hermitian(W):
    n = W.shape[-1] // 2
    return 0.5 * W[..., :n, n:] - 0.5j * W[..., :n, :n]


def holomorphic_jacobian(d):
    """Real Jacobian of a holomorphic map with complex derivative matrix d."""
    top = np.concatenate([d.real, -d.imag], axis=-1)
    bottom = np.concatenate([d.imag, d.real], axis=-1)
    return np.concatenate([top, bottom], axis=-2)
