"""Built-in benchmark models with known effect structure.

Two families:

* a multiplicative benchmark on the unit cube whose variance decomposition
  is available in closed form, handy for checking estimators against exact
  variance-based indices;
* a two-input vector-valued polynomial with correlated standard normal
  inputs, whose first-order and total effect functions are available in
  closed form for every correlation level.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from ._accel import impl
from .sampling import (
    InputModel,
    ModelSpec,
    gaussian_pair_dependency,
    normal_marginal,
    uniform_marginal,
)

# two strong inputs, eight weak ones
DEFAULT_G_COEFFS = (0.0, 0.0) + (6.52,) * 8


def g_function(x, coeffs=DEFAULT_G_COEFFS) -> np.ndarray | float:
    """Multiplicative benchmark on [0,1]^d.

    Each input contributes a factor (|4x_j - 2| + c_j) / (1 + c_j); small
    coefficients mean influential inputs.  Accepts a single point (d,) or a
    batch (N, d); returns a float or an (N,) array accordingly.
    """
    a = np.asarray(coeffs, dtype=float)
    if a.ndim != 1 or a.size == 0:
        raise ValueError("coeffs must be a non-empty vector")
    if np.any(a < 0.0) or not np.all(np.isfinite(a)):
        raise ValueError("coeffs must be finite and >= 0")
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = np.ascontiguousarray(np.atleast_2d(x))
    if X.shape[1] != a.size:
        raise ValueError(f"expected {a.size} inputs, got {X.shape[1]}")
    if np.any(X < 0.0) or np.any(X > 1.0):
        raise ValueError("inputs must lie in [0, 1]")
    vals = impl.g_function_values(X, a)
    return float(vals[0]) if single else vals


@dataclass(frozen=True)
class GFunctionDecomposition:
    """Exact variance decomposition of the multiplicative benchmark."""

    variances: np.ndarray      # per-input first-order variance contributions
    variance: float            # total output variance
    first_order: np.ndarray    # variance-based first-order indices
    total: np.ndarray          # variance-based total indices


def g_function_variance_decomposition(coeffs=DEFAULT_G_COEFFS) -> GFunctionDecomposition:
    """Closed-form variance decomposition.

    Per input, the factor variance is (1/3) / (1 + c_j)^2; the product
    structure gives the total variance prod(1 + V_j) - 1 and total indices
    V_j * prod_{i != j}(1 + V_i) / variance.
    """
    a = np.asarray(coeffs, dtype=float)
    if a.ndim != 1 or a.size == 0:
        raise ValueError("coeffs must be a non-empty vector")
    if np.any(a < 0.0) or not np.all(np.isfinite(a)):
        raise ValueError("coeffs must be finite and >= 0")
    v = (1.0 / 3.0) / (1.0 + a) ** 2
    variance = float(np.prod(1.0 + v) - 1.0)
    first = v / variance
    total = np.empty_like(v)
    for j in range(v.size):
        others = np.prod(1.0 + np.delete(v, j))
        total[j] = v[j] * others / variance
    return GFunctionDecomposition(
        variances=v, variance=variance, first_order=first, total=total
    )


@dataclass(frozen=True)
class GFunctionSpec:
    """Multiplicative benchmark plus an optional block of inert inputs.

    ``dummy_inputs`` appends coordinates the model never reads; useful for
    studying test behavior on provably irrelevant inputs.
    """

    coeffs: tuple[float, ...] = DEFAULT_G_COEFFS
    dummy_inputs: int = 0

    def __post_init__(self):
        c = tuple(float(v) for v in self.coeffs)
        if len(c) == 0 or any(not math.isfinite(v) or v < 0.0 for v in c):
            raise ValueError("coeffs must be non-empty, finite and >= 0")
        object.__setattr__(self, "coeffs", c)
        if self.dummy_inputs < 0:
            raise ValueError("dummy_inputs must be >= 0")

    @property
    def dimension(self) -> int:
        return len(self.coeffs) + self.dummy_inputs

    def model(self) -> ModelSpec:
        a = np.asarray(self.coeffs, dtype=float)
        k = a.size

        def evaluate(X: np.ndarray) -> np.ndarray:
            return impl.g_function_values(np.ascontiguousarray(X[:, :k]), a)

        return ModelSpec(
            name="gfunction", dim_in=self.dimension, dim_out=1, evaluate=evaluate
        )

    def input_model(self) -> InputModel:
        return InputModel(marginals=(uniform_marginal(),) * self.dimension)


def vector_model(x, interaction: float = 2.0) -> np.ndarray:
    """Two-output polynomial in two inputs.

    Outputs: (x1 + x2 + interaction * x1 * x2, x1^2 + sqrt(2) * x2).
    Accepts (2,) or (N, 2); returns (2,) or (N, 2).
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = np.ascontiguousarray(np.atleast_2d(x))
    if X.shape[1] != 2:
        raise ValueError("vector model takes exactly 2 inputs")
    out = impl.vector2_values(X, float(interaction))
    return out[0] if single else out


@dataclass(frozen=True)
class VectorModelSpec:
    """Vector-valued benchmark with correlated standard normal inputs.

    The two inputs are jointly gaussian with correlation ``rho``; testing
    either one uses the conditional-gaussian dependency map.  Closed-form
    effect functions below cover every (interaction, rho) pair.
    """

    interaction: float = 2.0
    rho: float = 0.0

    def __post_init__(self):
        if not math.isfinite(self.interaction):
            raise ValueError("interaction must be finite")
        if not (-1.0 <= self.rho <= 1.0):
            raise ValueError("rho must lie in [-1, 1]")

    def model(self) -> ModelSpec:
        a = float(self.interaction)

        def evaluate(X: np.ndarray) -> np.ndarray:
            return impl.vector2_values(np.ascontiguousarray(X), a)

        return ModelSpec(name="vector2d", dim_in=2, dim_out=2, evaluate=evaluate)

    def input_model(self) -> InputModel:
        dep = gaussian_pair_dependency(self.rho)
        return InputModel(
            marginals=(normal_marginal(), normal_marginal()),
            dependencies={(0,): dep, (1,): dep},
        )


def vector_model_analytic_af(
    spec: VectorModelSpec, u, kind: str
) -> Callable[[np.ndarray, np.ndarray], np.ndarray]:
    """Closed-form effect functions of the vector benchmark.

    Args:
        spec: model parameters.
        u: tested subset, (0,) or (1,).
        kind: "first_order" (a function of x_u alone; the innovation block
            is accepted and ignored) or "total" (a function of both).

    Returns:
        callable (x_u (N,1), z (N,1)) -> (N, 2) effect values, exactly
        zero-mean under the sampling scheme of :func:`sample_paired`.
    """
    u = tuple(int(i) for i in u)
    if u not in ((0,), (1,)):
        raise ValueError("analytic effects exist for single-input subsets only")
    if kind not in ("first_order", "total"):
        raise ValueError('kind must be "first_order" or "total"')
    a = float(spec.interaction)
    rho = float(spec.rho)
    comp = math.sqrt(max(0.0, 1.0 - rho * rho))
    r2 = math.sqrt(2.0)

    def af(x_u: np.ndarray, z: np.ndarray) -> np.ndarray:
        x = np.asarray(x_u, dtype=float).reshape(-1)
        w = np.asarray(z, dtype=float).reshape(-1)
        out = np.empty((x.size, 2))
        if u == (0,):
            out[:, 0] = (1.0 + rho) * x + a * rho * x * x - a * rho
            out[:, 1] = x * x + r2 * rho * x - 1.0
            if kind == "total":
                out[:, 0] += a * comp * w * x
        else:
            out[:, 0] = (1.0 + rho) * x + a * rho * x * x - a * rho
            out[:, 1] = rho * rho * x * x + r2 * x - rho * rho
            if kind == "total":
                out[:, 0] += a * comp * w * x
                out[:, 1] += 2.0 * rho * comp * w * x
        return out

    return af


def vector_model_af_sampler(
    spec: VectorModelSpec, u, kind: str
) -> Callable[[np.random.Generator, int], tuple[np.ndarray, np.ndarray]]:
    """I.i.d. sampler of paired analytic effect values, for oracle averages.

    Returns a callable (rng, size) -> (G, G') with independent (N, 2)
    blocks, each distributed as the requested effect function.
    """
    af = vector_model_analytic_af(spec, u, kind)

    def draw(rng: np.random.Generator, size: int):
        x = rng.standard_normal((size, 1))
        z = rng.standard_normal((size, 1))
        xp = rng.standard_normal((size, 1))
        zp = rng.standard_normal((size, 1))
        return af(x, z), af(xp, zp)

    return draw
