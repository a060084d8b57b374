"""Dense complex linear algebra for small MIMO matrices.

Thin validating wrappers over the kernel backend plus the real<->complex
reshaping helpers used by the optimizers.  Solves are factorization based
throughout; explicit matrix inverses are never formed.
"""

import numpy as np

from beamopt._backend import kernels as _kern


def _cmat(a, name="matrix"):
    m = np.ascontiguousarray(a, dtype=np.complex128)
    if m.ndim != 2:
        raise ValueError("%s must be 2-D, got shape %r" % (name, m.shape))
    return m


def hermitian_transpose(m):
    """Conjugate transpose, returned as a new contiguous matrix."""
    return np.ascontiguousarray(_cmat(m).conj().T)


def received_covariance(h, v_list, sigma2, exclude=None):
    """sigma2*I + sum_r (H v_r)(H v_r)^H, optionally excluding one user.

    h is one (n_rx, n_tx) channel; v_list is a (k, n_tx, d) stack or a
    sequence of (n_tx, d) matrices.  The result is Hermitian-symmetrized,
    so its smallest eigenvalue is sigma2 up to rounding.
    """
    h = _cmat(h, "channel")
    v = np.ascontiguousarray(v_list, dtype=np.complex128)
    if v.ndim != 3:
        raise ValueError("beamformer stack must be 3-D, got shape %r" % (v.shape,))
    if v.shape[1] != h.shape[1]:
        raise ValueError(
            "beamformer rows (%d) must match channel columns (%d)"
            % (v.shape[1], h.shape[1])
        )
    exc = -1 if exclude is None else int(exclude)
    return _kern.received_covariance(h, v, float(sigma2), exc)


def solve_hpd(a, b):
    """Solve A X = B for Hermitian positive definite A via Cholesky.

    Raises SingularMatrixError when a pivot falls below tolerance.
    """
    a = _cmat(a)
    b = np.ascontiguousarray(b, dtype=np.complex128)
    squeeze = b.ndim == 1
    if squeeze:
        b = b[:, None]
    if b.ndim != 2 or b.shape[0] != a.shape[0]:
        raise ValueError("right-hand side rows must match matrix order")
    x = _kern.solve_hpd(a, b)
    return x[:, 0] if squeeze else x


def logdet2_hpd(a):
    """log2 det(A) for Hermitian positive definite A, via Cholesky."""
    return float(_kern.logdet2_hpd(_cmat(a)))


def frob2(v):
    """Total squared Frobenius norm of a matrix, stack, or sequence."""
    if isinstance(v, np.ndarray):
        flat = v.reshape(-1)
        return float(np.vdot(flat, flat).real)
    return float(sum(frob2(np.asarray(m)) for m in v))


def reim_flatten(a):
    """Flatten a complex array to [real parts, imag parts], row-major."""
    a = np.asarray(a)
    return np.concatenate((a.real.ravel(), a.imag.ravel()))


def reim_unflatten(x, shape):
    """Inverse of reim_flatten for the given complex array shape."""
    x = np.asarray(x, dtype=np.float64)
    n = int(np.prod(shape))
    if x.size != 2 * n:
        raise ValueError("expected %d reals for shape %r, got %d" % (2 * n, shape, x.size))
    return (x[:n] + 1j * x[n:]).reshape(shape)
