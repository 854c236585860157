"""Time-varying LQR backward recursion with Levenberg regularization.

The control-block factorization test uses a hand-rolled Cholesky when numba
is active; the numpy fallback path swaps in the LAPACK factorization with a
try/except, selected once at import.
"""

import numpy as np

from ..accel import NUMBA_ENABLED, njit

REG_INIT = 1e-8
REG_CAP = 1e6


def _chol_flag_py(a, lower):
    n = a.shape[0]
    for i in range(n):
        for j in range(i + 1):
            s = a[i, j]
            for k in range(j):
                s -= lower[i, k] * lower[j, k]
            if i == j:
                if s <= 0.0:
                    return False
                lower[i, i] = np.sqrt(s)
            else:
                lower[i, j] = s / lower[j, j]
    return True


if NUMBA_ENABLED:
    _chol_flag = njit(_chol_flag_py)
else:

    def _chol_flag(a, lower):
        try:
            lower[:, :] = np.linalg.cholesky(a)
            return True
        except np.linalg.LinAlgError:
            return False


@njit
def _smallest_reg(quu, reg_init, reg_cap):
    """Smallest identity shift (0 or reg_init*10^k) making Cholesky succeed."""
    n = quu.shape[0]
    lower = np.zeros((n, n))
    if _chol_flag(quu, lower):
        return 0.0
    lam = reg_init
    while lam <= reg_cap:
        shifted = quu + lam * np.eye(n)
        if _chol_flag(shifted, lower):
            return lam
        lam *= 10.0
    return -1.0


@njit
def backward_pass(a_seq, b_seq, gx, gu, hxx, hxu, huu, g_term, h_term, reg_init, reg_cap):
    """LQR recursion over the stage quadratic model.

    Returns (K, kff, dv1, dv2, max_reg, status); status 1 means the
    regularization cap was exceeded. ``dv1``/``dv2`` are the first and second
    order expected-decrease coefficients of the step size.
    """
    n_steps, nx, nu = b_seq.shape
    gains = np.zeros((n_steps, nu, nx))
    kff = np.zeros((n_steps, nu))
    vx = g_term.copy()
    vxx = h_term.copy()
    dv1 = 0.0
    dv2 = 0.0
    max_reg = 0.0
    for k in range(n_steps - 1, -1, -1):
        a_k = a_seq[k]
        b_k = b_seq[k]
        qx = gx[k] + a_k.T @ vx
        qu = gu[k] + b_k.T @ vx
        vxx_a = vxx @ a_k
        qxx = hxx[k] + a_k.T @ vxx_a
        qux = hxu[k].T + b_k.T @ vxx_a
        quu = huu[k] + b_k.T @ (vxx @ b_k)
        quu = 0.5 * (quu + quu.T)
        lam = _smallest_reg(quu, reg_init, reg_cap)
        if lam < 0.0:
            return gains, kff, dv1, dv2, max_reg, 1
        if lam > max_reg:
            max_reg = lam
        quu_reg = quu + lam * np.eye(nu)
        rhs = np.empty((nu, nx + 1))
        rhs[:, :nx] = qux
        rhs[:, nx] = qu
        sol = np.linalg.solve(quu_reg, rhs)
        k_mat = -sol[:, :nx]
        k_vec = -sol[:, nx]
        gains[k] = k_mat
        kff[k] = k_vec

        dv1 += k_vec @ qu
        dv2 += 0.5 * k_vec @ (quu_reg @ k_vec)

        vx = qx + k_mat.T @ (quu_reg @ k_vec) + k_mat.T @ qu + qux.T @ k_vec
        vxx = qxx + k_mat.T @ (quu_reg @ k_mat) + k_mat.T @ qux + qux.T @ k_mat
        vxx = 0.5 * (vxx + vxx.T)
    return gains, kff, dv1, dv2, max_reg, 0
