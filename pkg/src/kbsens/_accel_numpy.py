"""Pure-numpy implementations of the numeric hot loops.

Each function has a twin with the same name and signature in
``_accel_numba``; ``_accel`` wires one of the two modules in at import time.
Pair functions map two (m, n) float64 blocks to the m row-wise kernel values
k(a_i, b_i).  Inputs are assumed contiguous float64; callers normalize.
"""

import numpy as np


def quadratic_pair(A, B, w):
    s = (A * B) @ w
    return s * s


def power_pair(A, B, w, p):
    s = (A * B) @ w
    return s ** (2 * p)


def l1_product_pair(A, B):
    return np.abs(A).sum(axis=1) * np.abs(B).sum(axis=1)


def abs_quadratic_pair(A, B, w):
    return ((A * A) @ w) * ((B * B) @ w)


def dot_pair(A, B):
    # exponential-family kernels apply exp() outside, after an overflow check
    return np.einsum("ij,ij->i", A, B)


def gaussian_pair(A, B, alpha):
    D = A - B
    return np.exp(-alpha * np.einsum("ij,ij->i", D, D))


def laplacian_pair(A, B, alpha):
    return np.exp(-alpha * np.abs(A - B).sum(axis=1))


def distance_pair(A, B, alpha):
    half = 0.5 * alpha
    na = np.einsum("ij,ij->i", A, A) ** half
    nb = np.einsum("ij,ij->i", B, B) ** half
    D = A - B
    nd = np.einsum("ij,ij->i", D, D) ** half
    return 0.5 * (na + nb - nd)


def g_function_values(X, a):
    return np.prod((np.abs(4.0 * X - 2.0) + a) / (1.0 + a), axis=1)


def vector2_values(X, interaction):
    x1 = X[:, 0]
    x2 = X[:, 1]
    out = np.empty((X.shape[0], 2))
    out[:, 0] = x1 + x2 + interaction * x1 * x2
    out[:, 1] = x1 * x1 + np.sqrt(2.0) * x2
    return out
