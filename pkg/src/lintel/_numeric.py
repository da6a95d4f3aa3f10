"""Compiled small-matrix routines shared by the state-space code paths.

Everything here works on float64 arrays of state dimension d <= ~10, where
BLAS/LAPACK call overhead dwarfs the arithmetic. Products, solves and the
PSD test are therefore written as plain loops and jitted with numba, so a
full Kalman step costs a few microseconds.
"""

import math

import numba
import numpy as np

# Pade [6/6] numerator coefficients; the denominator alternates signs.
_PADE6 = (1.0, 1.0 / 2.0, 5.0 / 44.0, 1.0 / 66.0, 1.0 / 792.0, 1.0 / 15840.0, 1.0 / 665280.0)


@numba.njit(cache=True)
def matmul(A, B):
    n, k = A.shape
    m = B.shape[1]
    out = np.zeros((n, m))
    for i in range(n):
        for p in range(k):
            a = A[i, p]
            if a != 0.0:
                for j in range(m):
                    out[i, j] += a * B[p, j]
    return out


@numba.njit(cache=True)
def matvec(A, x):
    n, k = A.shape
    out = np.zeros(n)
    for i in range(n):
        acc = 0.0
        for p in range(k):
            acc += A[i, p] * x[p]
        out[i] = acc
    return out


@numba.njit(cache=True)
def sandwich(A, P):
    """``A P A^T``."""
    AP = matmul(A, P)
    n = A.shape[0]
    out = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            acc = 0.0
            for p in range(n):
                acc += AP[i, p] * A[j, p]
            out[i, j] = acc
    return out


@numba.njit(cache=True)
def solve(A, B):
    """``A^{-1} B`` by Gaussian elimination with partial pivoting."""
    n = A.shape[0]
    m = B.shape[1]
    A = A.copy()
    X = B.copy()
    for c in range(n):
        piv = c
        best = abs(A[c, c])
        for r in range(c + 1, n):
            if abs(A[r, c]) > best:
                best = abs(A[r, c])
                piv = r
        if piv != c:
            for j in range(n):
                A[c, j], A[piv, j] = A[piv, j], A[c, j]
            for j in range(m):
                X[c, j], X[piv, j] = X[piv, j], X[c, j]
        inv = 1.0 / A[c, c]
        for r in range(c + 1, n):
            f = A[r, c] * inv
            if f != 0.0:
                for j in range(c, n):
                    A[r, j] -= f * A[c, j]
                for j in range(m):
                    X[r, j] -= f * X[c, j]
    for c in range(n - 1, -1, -1):
        inv = 1.0 / A[c, c]
        for j in range(m):
            acc = X[c, j]
            for k in range(c + 1, n):
                acc -= A[c, k] * X[k, j]
            X[c, j] = acc * inv
    return X


@numba.njit(cache=True)
def expm_pade(M):
    """Matrix exponential by scaling and squaring with a [6/6] Pade approximant.

    The scaled matrix has infinity norm <= 1/2, where the [6/6] truncation
    error is below 4e-16 relative.
    """
    d = M.shape[0]
    if d == 1:
        out = np.empty((1, 1))
        out[0, 0] = math.exp(M[0, 0])
        return out
    norm = 0.0
    for i in range(d):
        row = 0.0
        for j in range(d):
            row += abs(M[i, j])
        if row > norm:
            norm = row
    s = 0
    if norm > 0.5:
        s = int(math.ceil(math.log2(norm / 0.5)))
    X = M / (2.0**s)
    X2 = matmul(X, X)
    X4 = matmul(X2, X2)
    X6 = matmul(X4, X2)
    even = _PADE6[2] * X2 + _PADE6[4] * X4 + _PADE6[6] * X6
    inner = _PADE6[3] * X2 + _PADE6[5] * X4
    for i in range(d):
        even[i, i] += _PADE6[0]
        inner[i, i] += _PADE6[1]
    odd = matmul(X, inner)
    E = solve(even - odd, even + odd)
    for _ in range(s):
        E = matmul(E, E)
    return E


@numba.njit(cache=True)
def is_psd(S):
    """Cholesky-based PSD test (strict pivots, so singular matrices report False)."""
    n = S.shape[0]
    L = np.zeros((n, n))
    for j in range(n):
        acc = S[j, j]
        for k in range(j):
            acc -= L[j, k] * L[j, k]
        if not acc > 0.0:
            return False
        L[j, j] = math.sqrt(acc)
        for i in range(j + 1, n):
            acc = S[i, j]
            for k in range(j):
                acc -= L[i, k] * L[j, k]
            L[i, j] = acc / L[j, j]
    return True


@numba.njit(cache=True)
def symmetrize(S):
    return 0.5 * (S + S.T)


@numba.njit(cache=True)
def psd_clip(S):
    """Symmetrize and zero out negative eigenvalues."""
    S = symmetrize(S)
    d = S.shape[0]
    if d == 1:
        if S[0, 0] < 0.0:
            S[0, 0] = 0.0
        return S
    if is_psd(S):
        return S
    w, V = np.linalg.eigh(S)
    if w[0] >= 0.0:
        return S
    for i in range(d):
        if w[i] < 0.0:
            w[i] = 0.0
    return symmetrize(matmul(V * w, np.ascontiguousarray(V.T)))


@numba.njit(cache=True)
def transition(F, Pinf, dt):
    """Discrete transition ``A = exp(F dt)`` and noise ``Pinf - A Pinf A^T``."""
    d = F.shape[0]
    if dt == 0.0:
        return np.eye(d), np.zeros((d, d))
    A = expm_pade(F * dt)
    return A, psd_clip(Pinf - sandwich(A, Pinf))


@numba.njit(cache=True)
def propagate(m, P, F, Pinf, dt):
    if dt == 0.0:
        return m.copy(), P.copy()
    A, Sigma = transition(F, Pinf, dt)
    return matvec(A, m), symmetrize(sandwich(A, P) + Sigma)


@numba.njit(cache=True)
def propagate_predictive(m, P, F, Pinf, h, dt, noise_var, mean):
    """Propagate by ``dt`` (skipped when negative) and form the observation predictive."""
    if dt >= 0.0:
        m, P = propagate(m, P, F, Pinf, dt)
    return m, P, h @ m + mean, h @ matvec(P, h) + noise_var


@numba.njit(cache=True)
def kalman_update(m, P, h, noise_var, mean, y):
    """One scalar-observation Kalman update.

    Returns the posterior mean and covariance along with the innovation
    mean and variance (observation space) used to form it.
    """
    Ph = matvec(P, h)
    pred_mean = h @ m + mean
    pred_var = h @ Ph + noise_var
    gain = Ph / pred_var
    m_new = m + gain * (y - pred_mean)
    P_new = P - np.outer(gain, gain) * pred_var
    return m_new, symmetrize(P_new), pred_mean, pred_var


@numba.njit(cache=True)
def filter_stream(F, Pinf, h, noise_var, mean, times, values, m, P, t_last, has_last, store_cov):
    """Run predict/update over a whole series.

    Returns per-step predictive means and variances, the final filtered
    mean and covariance, and (if ``store_cov``) every filtered covariance.
    """
    n = times.shape[0]
    d = m.shape[0]
    means = np.empty(n)
    variances = np.empty(n)
    covs = np.empty((n if store_cov else 0, d, d))
    for i in range(n):
        if has_last:
            m, P = propagate(m, P, F, Pinf, times[i] - t_last)
        m, P, means[i], variances[i] = kalman_update(m, P, h, noise_var, mean, values[i])
        t_last = times[i]
        has_last = True
        if store_cov:
            covs[i] = P
    return means, variances, m, P, covs


@numba.njit(cache=True)
def gaussian_loglik_sum(values, means, variances):
    total = 0.0
    for i in range(values.shape[0]):
        r = values[i] - means[i]
        total += -0.5 * (math.log(2.0 * math.pi * variances[i]) + r * r / variances[i])
    return total
