"""NumPy implementations of the numerical kernels.

`beamopt._backend` exposes either this module or the compiled extension
`beamopt._kernels`; both implement the same signatures with the same
operation order, so they agree to floating-point rounding.  The compiled
module is the fast path, this one is the readable reference and the
fallback when the extension was not built.

All kernels take C-contiguous complex128/float64 arrays (callers in the
wrapper modules coerce) and never form an explicit matrix inverse: every
solve goes through a Cholesky factorization of a Hermitian positive
definite matrix.
"""

import numpy as np
from scipy.linalg import solve_triangular

from beamopt.errors import BracketingError, SingularMatrixError

# A squared Cholesky pivot at or below this is treated as numerically
# indefinite rather than silently producing infinities downstream.
PIVOT_TOL = 1e-300

_LN2 = float(np.log(2.0))


def chol_factor(a):
    """Lower Cholesky factor of a Hermitian positive definite matrix."""
    try:
        ell = np.linalg.cholesky(a)
    except np.linalg.LinAlgError:
        raise SingularMatrixError("matrix is not positive definite") from None
    d = ell.diagonal().real
    if (d * d <= PIVOT_TOL).any():
        raise SingularMatrixError("Cholesky pivot below tolerance")
    return ell


def chol_solve(ell, b):
    """Solve A X = B for X given the lower Cholesky factor of A."""
    y = solve_triangular(ell, b, lower=True, check_finite=False)
    return solve_triangular(ell.conj().T, y, lower=False, check_finite=False)


def solve_hpd(a, b):
    """Solve A X = B for Hermitian positive definite A."""
    return chol_solve(chol_factor(a), b)


def logdet2_hpd(a):
    """log2 det(A) for Hermitian positive definite A, via Cholesky."""
    ell = chol_factor(a)
    return 2.0 * float(np.log2(ell.diagonal().real).sum())


def received_covariance(h, v, sigma2, exclude=-1):
    """sigma2*I + sum_r (H v_r)(H v_r)^H over users r, optionally skipping one.

    h is a single (n_rx, n_tx) channel, v a (k, n_tx, d) beamformer stack;
    exclude < 0 keeps every user.  Result is Hermitian-symmetrized.
    """
    t = h @ v  # (k, n_rx, d)
    if exclude >= 0:
        keep = np.arange(t.shape[0]) != exclude
        t = t[keep]
    a = np.einsum("kij,klj->il", t, t.conj())
    a = a + sigma2 * np.eye(h.shape[0], dtype=np.complex128)
    return 0.5 * (a + a.conj().T)


def _rate_from_factors(la, lb):
    # log2 det A - log2 det B from the two Cholesky diagonals, clamped at 0
    r = 2.0 * (
        np.log2(la.diagonal().real).sum() - np.log2(lb.diagonal().real).sum()
    )
    return max(float(r), 0.0)


def wsr_rates(h, v, sigma2):
    """Per-user rates in bits plus the cached (A_k, B_k) covariance stacks.

    A_k = sigma2 I + H_k (sum_r v_r v_r^H) H_k^H is the full received
    covariance, B_k the same with user k's own signal removed; the rate is
    log2 det A_k - log2 det B_k.
    """
    k_users, n_rx, _ = h.shape
    eye = sigma2 * np.eye(n_rx, dtype=np.complex128)
    s = np.einsum("kij,klj->il", v, v.conj())
    s = 0.5 * (s + s.conj().T)
    a_all = np.empty((k_users, n_rx, n_rx), dtype=np.complex128)
    b_all = np.empty_like(a_all)
    rates = np.empty(k_users)
    for k in range(k_users):
        hk = h[k]
        a = (hk @ s) @ hk.conj().T + eye
        a = 0.5 * (a + a.conj().T)
        t = hk @ v[k]
        b = a - t @ t.conj().T
        b = 0.5 * (b + b.conj().T)
        rates[k] = _rate_from_factors(chol_factor(a), chol_factor(b))
        a_all[k] = a
        b_all[k] = b
    return rates, a_all, b_all


def wsr_value_grad(h, v, sigma2, alpha):
    """Per-user rates and the conjugate (Wirtinger) gradient of the WSR.

    grad[j] = (1/ln 2) * (S_P - S_Q + alpha_j Q_j) @ v[j] with
    P_k = H_k^H A_k^{-1} H_k, Q_k = H_k^H B_k^{-1} H_k and S_P, S_Q their
    alpha-weighted sums over users.  Factors A_k and B_k once per user
    (2k factorizations) and performs 8 complex matrix products per user.
    """
    k_users, n_rx, n_tx = h.shape
    eye = sigma2 * np.eye(n_rx, dtype=np.complex128)
    s = np.einsum("kij,klj->il", v, v.conj())
    s = 0.5 * (s + s.conj().T)
    sp = np.zeros((n_tx, n_tx), dtype=np.complex128)
    sq = np.zeros((n_tx, n_tx), dtype=np.complex128)
    q_all = np.empty((k_users, n_tx, n_tx), dtype=np.complex128)
    rates = np.empty(k_users)
    for k in range(k_users):
        hk = h[k]
        hs = hk @ s
        a = hs @ hk.conj().T + eye
        a = 0.5 * (a + a.conj().T)
        t = hk @ v[k]
        b = a - t @ t.conj().T
        b = 0.5 * (b + b.conj().T)
        la = chol_factor(a)
        lb = chol_factor(b)
        rates[k] = _rate_from_factors(la, lb)
        x = chol_solve(la, hk)  # A_k^{-1} H_k
        y = chol_solve(lb, hk)  # B_k^{-1} H_k
        hy = hk.conj().T @ y
        sp += alpha[k] * (hk.conj().T @ x)
        sq += alpha[k] * hy
        q_all[k] = hy
    grad = np.empty_like(v)
    for j in range(k_users):
        grad[j] = ((sp - sq + alpha[j] * q_all[j]) @ v[j]) / _LN2
    return rates, grad


def mmse_receivers(h, v, sigma2):
    """MMSE receive filters U_k = A_k^{-1} H_k V_k (one solve per user)."""
    k_users, n_rx, _ = h.shape
    d = v.shape[2]
    eye = sigma2 * np.eye(n_rx, dtype=np.complex128)
    s = np.einsum("kij,klj->il", v, v.conj())
    s = 0.5 * (s + s.conj().T)
    u = np.empty((k_users, n_rx, d), dtype=np.complex128)
    for k in range(k_users):
        hk = h[k]
        a = (hk @ s) @ hk.conj().T + eye
        a = 0.5 * (a + a.conj().T)
        t = hk @ v[k]
        u[k] = chol_solve(chol_factor(a), t)
    return u


def mmse_weights(h, v, u, sigma2):
    """W_k = E_k^{-1} from the full per-user MSE matrix.

    E_k = I - U_k^H T_k - T_k^H U_k + U_k^H A_k U_k with T_k = H_k V_k; the
    full form stays correct for receivers that are not the exact MMSE ones.
    """
    k_users = h.shape[0]
    d = v.shape[2]
    n_rx = h.shape[1]
    eye_r = sigma2 * np.eye(n_rx, dtype=np.complex128)
    eye_d = np.eye(d, dtype=np.complex128)
    s = np.einsum("kij,klj->il", v, v.conj())
    s = 0.5 * (s + s.conj().T)
    w = np.empty((k_users, d, d), dtype=np.complex128)
    for k in range(k_users):
        hk = h[k]
        a = (hk @ s) @ hk.conj().T + eye_r
        a = 0.5 * (a + a.conj().T)
        t = hk @ v[k]
        ut = u[k].conj().T @ t
        uau = u[k].conj().T @ (a @ u[k])
        e = eye_d - ut - ut.conj().T + uau
        e = 0.5 * (e + e.conj().T)
        try:
            le = chol_factor(e)
        except SingularMatrixError:
            raise SingularMatrixError(
                "MSE matrix of user %d is numerically singular" % k
            ) from None
        wk = chol_solve(le, eye_d)
        w[k] = 0.5 * (wk + wk.conj().T)
    return w


def wmmse_beamformers(h, u, w, alpha, total_power,
                      power_tol=1e-10, max_doublings=60, max_bisect=200):
    """Beamformers maximizing the weighted-MSE surrogate under the power cap.

    V_k(mu) = alpha_k (J + mu I)^{-1} H_k^H U_k W_k with
    J = sum_r alpha_r (H_r^H U_r) W_r (H_r^H U_r)^H.  mu = 0 when that
    already meets the budget, otherwise the unique mu > 0 with total power
    equal to the budget, found by doubling then bisection (total power is
    strictly decreasing in mu).  A cap that only binds below the numerical
    resolution of mu (rank-deficient J at float64 limits) is reported as
    inactive: the returned V fits the budget and mu = 0.

    Returns (V, mu, n_factorizations, n_bisection_evals).
    """
    k_users, _, n_tx = h.shape
    d = u.shape[2]
    j_mat = np.zeros((n_tx, n_tx), dtype=np.complex128)
    rhs = np.empty((n_tx, k_users * d), dtype=np.complex128)
    for k in range(k_users):
        hu = h[k].conj().T @ u[k]
        huw = hu @ w[k]
        j_mat += alpha[k] * (huw @ hu.conj().T)
        rhs[:, k * d:(k + 1) * d] = alpha[k] * huw
    j_mat = 0.5 * (j_mat + j_mat.conj().T)
    eye = np.eye(n_tx, dtype=np.complex128)

    def unstack(x):
        out = np.empty((k_users, n_tx, d), dtype=np.complex128)
        for k in range(k_users):
            out[k] = x[:, k * d:(k + 1) * d]
        return out

    if not rhs.any():
        # all receivers/weights vanished: V = 0 is the surrogate maximizer
        return unstack(np.zeros_like(rhs)), 0.0, 0, 0

    def solve_at(mu):
        m = j_mat if mu == 0.0 else j_mat + mu * eye
        x = chol_solve(chol_factor(m), rhs)
        return x, float(np.vdot(x, x).real)

    # Shifts below ~1e-12 of the mean diagonal are indistinguishable from
    # factorization roundoff; used both as the singular-J probe shift and
    # as the smallest multiplier the bisection is allowed to resolve.
    mu_floor = 1e-12 * float(np.trace(j_mat).real) / n_tx

    nfact = 0
    try:
        nfact += 1
        x, p = solve_at(0.0)
        if p <= total_power:
            return unstack(x), 0.0, nfact, 0
    except SingularMatrixError:
        # J singular.  When the data sits in range(J) the mu -> 0 limit is
        # still finite (the least-norm solution); probe it through a tiny
        # relative Tikhonov shift.  Within budget means the power cap is
        # inactive and that limit is the answer; otherwise bisect as usual.
        try:
            nfact += 1
            x, p = solve_at(mu_floor)
            if p <= total_power:
                return unstack(x), 0.0, nfact, 0
        except SingularMatrixError:
            pass

    nbis = 0
    lo = 0.0
    hi = 1.0
    for _ in range(max_doublings):
        nfact += 1
        nbis += 1
        x, p = solve_at(hi)
        if p < total_power:
            break
        lo = hi
        hi *= 2.0
    else:
        raise BracketingError(
            "no upper bracket for the power multiplier after %d doublings"
            % max_doublings
        )
    for _ in range(max_bisect):
        mid = 0.5 * (lo + hi)
        if hi <= mu_floor or mid <= lo or mid >= hi:
            # Interval exhausted: either hi sank below the roundoff floor
            # (a spurious over-budget solve at mu = 0 sent the search
            # chasing a limit that fits the budget) or lo and hi meet at
            # float resolution.  Both mean the multiplier is numerically
            # indistinguishable from the unconstrained limit, so treat the
            # cap as inactive.  Solve at the within-budget endpoint (never
            # below the floor) and clip the stray case where roundoff
            # pushes the power just over the budget.
            nfact += 1
            nbis += 1
            x, p = solve_at(max(hi, mu_floor))
            if p > total_power:
                x = x * np.sqrt(total_power / p)
            return unstack(x), 0.0, nfact, nbis
        nfact += 1
        nbis += 1
        x, p = solve_at(mid)
        if abs(p - total_power) <= power_tol * total_power:
            return unstack(x), mid, nfact, nbis
        if p > total_power:
            lo = mid
        else:
            hi = mid
    raise BracketingError("power bisection did not reach tolerance")


def net_forward(w1, b1, w2, b2, w3, b3, slope, x):
    """Two-hidden-layer leaky-ReLU MLP; returns output plus activations."""
    z1 = w1 @ x + b1
    a1 = np.where(z1 > 0.0, z1, slope * z1)
    z2 = w2 @ a1 + b2
    a2 = np.where(z2 > 0.0, z2, slope * z2)
    y = w3 @ a2 + b3
    return y, z1, a1, z2, a2


def net_backward(w1, w2, w3, slope, x, z1, a1, z2, a2, dy):
    """Backward pass matching net_forward; returns grads and dL/dx."""
    dw3 = np.outer(dy, a2)
    db3 = dy.copy()
    da2 = w3.T @ dy
    dz2 = np.where(z2 > 0.0, da2, slope * da2)
    dw2 = np.outer(dz2, a1)
    db2 = dz2
    da1 = w2.T @ dz2
    dz1 = np.where(z1 > 0.0, da1, slope * da1)
    dw1 = np.outer(dz1, x)
    db1 = dz1
    dx = w1.T @ dz1
    return dw1, db1, dw2, db2, dw3, db3, dx
