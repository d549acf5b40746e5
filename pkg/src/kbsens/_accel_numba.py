"""Numba implementations of the numeric hot loops.

Importing this module requires numba; ``_accel`` falls back to the numpy
twin when the import fails.  Loops are written out so the compiler can fuse
them and skip the temporaries the numpy path allocates.  Accumulation order
is fixed left-to-right, so values are deterministic for this backend but can
differ from the numpy path in the last few ulps.
"""

import numpy as np
from numba import njit

_OPTS = {"cache": True, "nogil": True}


@njit(**_OPTS)
def quadratic_pair(A, B, w):
    m, n = A.shape
    out = np.empty(m)
    for i in range(m):
        s = 0.0
        for j in range(n):
            s += w[j] * A[i, j] * B[i, j]
        out[i] = s * s
    return out


@njit(**_OPTS)
def power_pair(A, B, w, p):
    m, n = A.shape
    e = 2 * p
    out = np.empty(m)
    for i in range(m):
        s = 0.0
        for j in range(n):
            s += w[j] * A[i, j] * B[i, j]
        out[i] = s**e
    return out


@njit(**_OPTS)
def l1_product_pair(A, B):
    m, n = A.shape
    out = np.empty(m)
    for i in range(m):
        sa = 0.0
        sb = 0.0
        for j in range(n):
            sa += abs(A[i, j])
            sb += abs(B[i, j])
        out[i] = sa * sb
    return out


@njit(**_OPTS)
def abs_quadratic_pair(A, B, w):
    m, n = A.shape
    out = np.empty(m)
    for i in range(m):
        sa = 0.0
        sb = 0.0
        for j in range(n):
            sa += w[j] * A[i, j] * A[i, j]
            sb += w[j] * B[i, j] * B[i, j]
        out[i] = sa * sb
    return out


@njit(**_OPTS)
def dot_pair(A, B):
    m, n = A.shape
    out = np.empty(m)
    for i in range(m):
        s = 0.0
        for j in range(n):
            s += A[i, j] * B[i, j]
        out[i] = s
    return out


@njit(**_OPTS)
def gaussian_pair(A, B, alpha):
    m, n = A.shape
    out = np.empty(m)
    for i in range(m):
        s = 0.0
        for j in range(n):
            d = A[i, j] - B[i, j]
            s += d * d
        out[i] = np.exp(-alpha * s)
    return out


@njit(**_OPTS)
def laplacian_pair(A, B, alpha):
    m, n = A.shape
    out = np.empty(m)
    for i in range(m):
        s = 0.0
        for j in range(n):
            s += abs(A[i, j] - B[i, j])
        out[i] = np.exp(-alpha * s)
    return out


@njit(**_OPTS)
def distance_pair(A, B, alpha):
    m, n = A.shape
    half = 0.5 * alpha
    out = np.empty(m)
    for i in range(m):
        sa = 0.0
        sb = 0.0
        sd = 0.0
        for j in range(n):
            a = A[i, j]
            b = B[i, j]
            d = a - b
            sa += a * a
            sb += b * b
            sd += d * d
        out[i] = 0.5 * (sa**half + sb**half - sd**half)
    return out


@njit(**_OPTS)
def g_function_values(X, a):
    m, d = X.shape
    out = np.empty(m)
    for i in range(m):
        acc = 1.0
        for j in range(d):
            acc *= (abs(4.0 * X[i, j] - 2.0) + a[j]) / (1.0 + a[j])
        out[i] = acc
    return out


@njit(**_OPTS)
def vector2_values(X, interaction):
    m = X.shape[0]
    r2 = np.sqrt(2.0)
    out = np.empty((m, 2))
    for i in range(m):
        x1 = X[i, 0]
        x2 = X[i, 1]
        out[i, 0] = x1 + x2 + interaction * x1 * x2
        out[i, 1] = x1 * x1 + r2 * x2
    return out
