"""Kernel catalog for sensitivity embeddings.

Eight symmetric positive semidefinite kernel families on output space, with
the capability flags the downstream theory cares about:

* ``imk``: the kernel keeps a strictly positive discrepancy for every
  non-degenerate effect distribution, so a zero index certifies a null
  effect.  Convex-in-one-argument families qualify; the squared-exponential
  families qualify for small enough decay rates (see the ``*_alpha`` bounds).
* ``characteristic``: the kernel mean embedding separates all probability
  distributions, not just the null from the rest.
* ``centered_at_zero``: k(r, 0) = 0 for every r, so the discrepancy needs no
  re-centering term.

Families whose value at the origin is 0 (``quadratic``, ``power2p``,
``l1_product``, ``absolute_diag_quadratic``, ``distance_induced``) have
k(0,0) = 0; the exponential-type families have k(0,0) = 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._accel import impl
from .errors import KernelOverflowError

FAMILIES = (
    "quadratic",
    "power2p",
    "l1_product",
    "absolute_diag_quadratic",
    "exponential",
    "gaussian",
    "laplacian",
    "distance_induced",
)

# family -> (imk, characteristic, centered_at_zero)
_CAPS = {
    "quadratic": (True, False, True),
    "power2p": (True, False, True),
    "l1_product": (True, False, True),
    "absolute_diag_quadratic": (True, False, True),
    "exponential": (True, False, False),
    "gaussian": (True, True, False),
    "laplacian": (True, True, False),
    "distance_induced": (False, True, True),
}

_NEEDS_ALPHA = {"exponential", "gaussian", "laplacian", "distance_induced"}
_TAKES_WEIGHTS = {"quadratic", "power2p", "absolute_diag_quadratic"}

_DEFAULT_ALPHA = {
    "exponential": math.sqrt(2.0),
    "gaussian": 1.0,
    "laplacian": 1.0,
    "distance_induced": 1.0,
}

DEFAULT_EXPONENT_CAP = 700.0


@dataclass(frozen=True)
class KernelSpec:
    """One kernel family plus its parameters.

    Args:
        family: one of :data:`FAMILIES`.
        alpha: decay/exponent rate for the exponential, gaussian, laplacian
            and distance_induced families.  Defaults: sqrt(2) for
            exponential, 1.0 for the others.  Must lie in (0, 2) for
            distance_induced.
        p: half-degree for power2p; the kernel is the 2p-th power of the
            weighted inner product.  quadratic is the p=1 special case kept
            as its own family.
        diag_weights: positive diagonal weights for the inner-product
            families (quadratic, power2p, absolute_diag_quadratic).
            ``None`` means identity weights.
        exponent_cap: exponential-family evaluations whose exponent exceeds
            this raise :class:`KernelOverflowError` instead of overflowing.
    """

    family: str
    alpha: float | None = None
    p: int = 1
    diag_weights: tuple[float, ...] | None = None
    exponent_cap: float = DEFAULT_EXPONENT_CAP

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown kernel family {self.family!r}")
        if self.family in _NEEDS_ALPHA:
            alpha = self.alpha
            if alpha is None:
                alpha = _DEFAULT_ALPHA[self.family]
                object.__setattr__(self, "alpha", alpha)
            alpha = float(alpha)
            if not math.isfinite(alpha) or alpha <= 0.0:
                raise ValueError(f"{self.family}: alpha must be finite and > 0")
            if self.family == "distance_induced" and not alpha < 2.0:
                raise ValueError("distance_induced: alpha must lie in (0, 2)")
            object.__setattr__(self, "alpha", alpha)
        elif self.alpha is not None:
            raise ValueError(f"{self.family}: family takes no alpha parameter")
        if self.family == "power2p":
            if not isinstance(self.p, int) or self.p < 1:
                raise ValueError("power2p: p must be an integer >= 1")
        elif self.p != 1:
            raise ValueError(f"{self.family}: family takes no p parameter")
        if self.diag_weights is not None:
            if self.family not in _TAKES_WEIGHTS:
                raise ValueError(f"{self.family}: family takes no diag_weights")
            w = tuple(float(v) for v in self.diag_weights)
            if len(w) == 0 or any(not math.isfinite(v) or v <= 0.0 for v in w):
                raise ValueError("diag_weights must be positive and finite")
            object.__setattr__(self, "diag_weights", w)
        if not math.isfinite(self.exponent_cap) or self.exponent_cap <= 0.0:
            raise ValueError("exponent_cap must be finite and > 0")

    @property
    def imk(self) -> bool:
        return _CAPS[self.family][0]

    @property
    def characteristic(self) -> bool:
        return _CAPS[self.family][1]

    @property
    def centered_at_zero(self) -> bool:
        return _CAPS[self.family][2]

    def label(self) -> str:
        """Short human-readable identifier used in reports."""
        if self.family in _NEEDS_ALPHA:
            return f"{self.family}(alpha={self.alpha:g})"
        if self.family == "power2p":
            return f"power2p(p={self.p})"
        return self.family


@dataclass(frozen=True)
class CenteredKernel:
    """A base kernel shifted so the new kernel vanishes at ``r0``.

    k_c(r, r') = k(r, r') + k(r0, r0) - k(r, r0) - k(r0, r').  Positive
    semidefinite whenever the base kernel is, and k_c(r0, r0) = 0.
    """

    base: KernelSpec
    r0: tuple[float, ...] = field(default=())

    def __post_init__(self):
        r0 = tuple(float(v) for v in self.r0)
        if len(r0) == 0:
            raise ValueError("r0 must be a non-empty vector")
        if any(not math.isfinite(v) for v in r0):
            raise ValueError("r0 must be finite")
        object.__setattr__(self, "r0", r0)

    @property
    def imk(self) -> bool:
        return self.base.imk

    @property
    def characteristic(self) -> bool:
        return self.base.characteristic

    @property
    def centered_at_zero(self) -> bool:
        # only claimed when centering at the origin itself
        return all(v == 0.0 for v in self.r0)

    def label(self) -> str:
        return f"centered[{self.base.label()}]"


def center_at(kernel: KernelSpec, r0) -> KernelSpec | CenteredKernel:
    """Shift ``kernel`` so it vanishes at the reference point ``r0``.

    Centering at the origin is a no-op for families that already satisfy
    k(r, 0) = 0; the original spec is returned unchanged in that case.
    """
    r0 = np.atleast_1d(np.asarray(r0, dtype=float))
    if r0.ndim != 1:
        raise ValueError("r0 must be a vector")
    if not np.all(np.isfinite(r0)):
        raise ValueError("r0 must be finite")
    if kernel.centered_at_zero and not np.any(r0):
        return kernel
    return CenteredKernel(base=kernel, r0=tuple(float(v) for v in r0))


def k_at_origin(kernel: KernelSpec | CenteredKernel) -> float:
    """Kernel value k(0, 0); the reference level of every test statistic."""
    if isinstance(kernel, CenteredKernel):
        n = len(kernel.r0)
        zero = np.zeros(n)
        r0 = np.asarray(kernel.r0)
        base = kernel.base
        return (
            _base_eval(base, zero, zero)
            + _base_eval(base, r0, r0)
            - 2.0 * _base_eval(base, zero, r0)
        )
    if kernel.family in ("exponential", "gaussian", "laplacian"):
        return 1.0
    return 0.0


def _weights(kernel: KernelSpec, n: int) -> np.ndarray:
    if kernel.diag_weights is None:
        return np.ones(n)
    w = np.asarray(kernel.diag_weights, dtype=float)
    if w.shape[0] != n:
        raise ValueError(
            f"diag_weights has length {w.shape[0]} but vectors have length {n}"
        )
    return w


def _as_block(A) -> np.ndarray:
    A = np.ascontiguousarray(A, dtype=float)
    if A.ndim != 2:
        raise ValueError("expected a 2-D block of row vectors")
    return A


def _base_pair(kernel: KernelSpec, A: np.ndarray, B: np.ndarray) -> np.ndarray:
    fam = kernel.family
    if fam == "quadratic":
        return impl.quadratic_pair(A, B, _weights(kernel, A.shape[1]))
    if fam == "power2p":
        return impl.power_pair(A, B, _weights(kernel, A.shape[1]), kernel.p)
    if fam == "l1_product":
        return impl.l1_product_pair(A, B)
    if fam == "absolute_diag_quadratic":
        return impl.abs_quadratic_pair(A, B, _weights(kernel, A.shape[1]))
    if fam == "exponential":
        ex = kernel.alpha * impl.dot_pair(A, B)
        worst = np.max(ex) if ex.size else 0.0
        if worst > kernel.exponent_cap:
            raise KernelOverflowError(
                f"exponential kernel exponent {worst:.6g} exceeds the cap "
                f"{kernel.exponent_cap:g}"
            )
        return np.exp(ex)
    if fam == "gaussian":
        return impl.gaussian_pair(A, B, kernel.alpha)
    if fam == "laplacian":
        return impl.laplacian_pair(A, B, kernel.alpha)
    if fam == "distance_induced":
        return impl.distance_pair(A, B, kernel.alpha)
    raise ValueError(f"unknown kernel family {fam!r}")


def _base_eval(kernel: KernelSpec, r: np.ndarray, r2: np.ndarray) -> float:
    return float(_base_pair(kernel, r.reshape(1, -1), r2.reshape(1, -1))[0])


def pair_values(kernel: KernelSpec | CenteredKernel, A, B) -> np.ndarray:
    """Row-wise kernel values k(a_i, b_i) for two stacked vector blocks.

    Args:
        kernel: the kernel to evaluate, plain or centered.
        A, B: (m, n) array-likes with matching shapes.

    Returns:
        (m,) float64 array of kernel values.
    """
    A = _as_block(A)
    B = _as_block(B)
    if A.shape != B.shape:
        raise ValueError(f"shape mismatch: {A.shape} vs {B.shape}")
    if not (np.all(np.isfinite(A)) and np.all(np.isfinite(B))):
        raise ValueError("kernel arguments must be finite")
    if isinstance(kernel, CenteredKernel):
        r0 = np.asarray(kernel.r0, dtype=float)
        if r0.shape[0] != A.shape[1]:
            raise ValueError(
                f"r0 has length {r0.shape[0]} but vectors have length {A.shape[1]}"
            )
        R0 = np.ascontiguousarray(np.broadcast_to(r0, A.shape))
        base = kernel.base
        k_rr = _base_eval(base, r0, r0)
        return (
            _base_pair(base, A, B)
            + k_rr
            - _base_pair(base, A, R0)
            - _base_pair(base, R0, B)
        )
    return _base_pair(kernel, A, B)


def eval(kernel: KernelSpec | CenteredKernel, r, r2) -> float:
    """Kernel value at a single pair of output vectors."""
    r = np.atleast_1d(np.asarray(r, dtype=float))
    r2 = np.atleast_1d(np.asarray(r2, dtype=float))
    if r.ndim != 1 or r2.ndim != 1:
        raise ValueError("r and r2 must be vectors")
    return float(pair_values(kernel, r.reshape(1, -1), r2.reshape(1, -1))[0])


def bounded_support_alpha(
    family: str, support_radius: float, n_outputs: int, eps: float
) -> float:
    """Largest decay rate keeping the kernel concave on a bounded output set.

    For outputs confined to a ball of the given radius (sup norm of effect
    values), rates at or below the returned bound make the gaussian or
    laplacian family usable as a null-certifying kernel.

    Args:
        family: "gaussian" or "laplacian".
        support_radius: bound C on the magnitude of effect values, > 0.
        n_outputs: output dimension, >= 1.
        eps: slack in (0, 1].
    """
    if family not in ("gaussian", "laplacian"):
        raise ValueError("alpha bounds exist for gaussian and laplacian only")
    if not (math.isfinite(support_radius) and support_radius > 0.0):
        raise ValueError("support_radius must be finite and > 0")
    if n_outputs < 1:
        raise ValueError("n_outputs must be >= 1")
    if not (0.0 < eps <= 1.0):
        raise ValueError("eps must lie in (0, 1]")
    if family == "laplacian":
        return eps / (2.0 * support_radius * math.sqrt(n_outputs))
    return eps / (8.0 * support_radius**2)


def unbounded_alpha(
    family: str, trace_var: float, n_outputs: int, tau: float = 0.05
) -> float:
    """Decay-rate bound for unbounded outputs with finite variance.

    Derived from a tail bound at confidence level ``tau``: the slack that
    appears in the bounded-support rule is spent on the tail, which makes
    the resulting rate depend only on the total output variance (tau cancels
    once the slack is substituted).

    Args:
        family: "gaussian" or "laplacian".
        trace_var: trace of the output covariance matrix, > 0.
        n_outputs: output dimension, >= 1.
        tau: tail probability in (0, 0.05].

    Returns:
        laplacian: 1 / sqrt(2 * n_outputs * trace_var);
        gaussian: 1 / (4 * trace_var).
    """
    if family not in ("gaussian", "laplacian"):
        raise ValueError("alpha bounds exist for gaussian and laplacian only")
    if not (math.isfinite(trace_var) and trace_var > 0.0):
        raise ValueError("trace_var must be finite and > 0")
    if n_outputs < 1:
        raise ValueError("n_outputs must be >= 1")
    if not (0.0 < tau <= 0.05):
        raise ValueError("tau must lie in (0, 0.05]")
    if family == "laplacian":
        return 1.0 / math.sqrt(2.0 * n_outputs * trace_var)
    return 1.0 / (4.0 * trace_var)
