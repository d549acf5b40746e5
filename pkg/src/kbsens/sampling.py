"""Input models, dependency maps and paired Monte Carlo samples.

The estimators never sample the complementary inputs directly.  For a tested
subset u they draw the subset block X_u from its marginals and an innovation
block Z, then push both through a dependency map that reconstructs the
complementary inputs X_~u in distribution.  Independent inputs use the
passthrough map (the innovations are drawn from the complementary marginals
and used as-is), so the same machinery covers both the independent and the
dependent case.

Seed discipline: every random block comes from its own counter-based
substream, derived from (seed, tag) through numpy's SeedSequence/Philox.
Identical seeds give identical samples regardless of which other blocks were
drawn before.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np


def substream(seed: int, *tags: int) -> np.random.Generator:
    """Independent generator for the substream labeled by ``tags``."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(t) for t in tags))
    return np.random.Generator(np.random.Philox(ss))


def child_seed(seed: int, *tags: int) -> int:
    """Stable integer seed derived from (seed, tags); feeds nested runs."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(t) for t in tags))
    return int(ss.generate_state(2, dtype=np.uint64)[0])


@dataclass(frozen=True)
class Marginal:
    """A univariate input distribution, wrapped as a named sampler.

    ``sample(rng, size)`` must return a (size,) float array of i.i.d. draws.
    """

    name: str
    sample: Callable[[np.random.Generator, int], np.ndarray]


def uniform_marginal(low: float = 0.0, high: float = 1.0) -> Marginal:
    if not high > low:
        raise ValueError("uniform marginal needs high > low")
    return Marginal(
        name=f"uniform({low:g},{high:g})",
        sample=lambda rng, size: rng.uniform(low, high, size),
    )


def normal_marginal(mean: float = 0.0, sd: float = 1.0) -> Marginal:
    if not sd > 0:
        raise ValueError("normal marginal needs sd > 0")
    return Marginal(
        name=f"normal({mean:g},{sd:g})",
        sample=lambda rng, size: rng.normal(mean, sd, size),
    )


@dataclass(frozen=True)
class DependencyModel:
    """Reconstruction of the complementary inputs from (X_u, Z).

    ``transform(x_u, z)`` receives the subset block (N, |u|) and the
    innovation block (N, d-|u|) and must return the complementary block
    (N, d-|u|).  The map must be deterministic; all randomness enters
    through the innovations.
    """

    name: str
    transform: Callable[[np.ndarray, np.ndarray], np.ndarray]


PASSTHROUGH = DependencyModel(name="independent", transform=lambda x_u, z: z)


def gaussian_pair_dependency(rho: float) -> DependencyModel:
    """Gaussian coupling for a pair of standard normal inputs.

    Conditional on the tested coordinate x, the other coordinate is
    distributed as rho * x + sqrt(1 - rho^2) * Z with Z standard normal.
    ``rho`` in [-1, 1]; the endpoints give an a.s. linear relation.
    """
    rho = float(rho)
    if not (-1.0 <= rho <= 1.0):
        raise ValueError("rho must lie in [-1, 1]")
    comp = np.sqrt(max(0.0, 1.0 - rho * rho))

    def transform(x_u: np.ndarray, z: np.ndarray) -> np.ndarray:
        if x_u.shape[1] != 1 or z.shape[1] != 1:
            raise ValueError("gaussian pair dependency couples exactly 2 inputs")
        return rho * x_u + comp * z

    return DependencyModel(name=f"gaussian_pair(rho={rho:g})", transform=transform)


@dataclass(frozen=True)
class InputModel:
    """Joint input description: marginals plus per-subset dependency maps.

    ``dependencies`` maps a sorted 0-based subset tuple to the dependency
    model used when that subset is tested.  Subsets without an entry are
    treated as independent of the rest (passthrough innovations drawn from
    the complementary marginals).
    """

    marginals: tuple[Marginal, ...]
    dependencies: dict[tuple[int, ...], DependencyModel] = field(default_factory=dict)

    def __post_init__(self):
        if len(self.marginals) == 0:
            raise ValueError("input model needs at least one marginal")
        object.__setattr__(self, "marginals", tuple(self.marginals))
        d = len(self.marginals)
        for u in self.dependencies:
            _check_subset(u, d)

    @property
    def dimension(self) -> int:
        return len(self.marginals)

    def dependency_for(self, u: tuple[int, ...]) -> DependencyModel:
        return self.dependencies.get(tuple(u), PASSTHROUGH)


@dataclass(frozen=True)
class ModelSpec:
    """A computer model as a batched vector-valued function.

    ``evaluate`` receives an (N, dim_in) block and must return (N, dim_out)
    values, or a flat (N,) array when dim_out == 1.  Set ``vectorized=False``
    for per-row callables; they get looped (slow, meant for prototyping).
    """

    name: str
    dim_in: int
    dim_out: int
    evaluate: Callable[[np.ndarray], np.ndarray]
    vectorized: bool = True

    def __post_init__(self):
        if self.dim_in < 1 or self.dim_out < 1:
            raise ValueError("dim_in and dim_out must be >= 1")

    def evaluate_batch(self, X: np.ndarray) -> np.ndarray:
        X = np.ascontiguousarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.dim_in:
            raise ValueError(
                f"model {self.name}: expected (N, {self.dim_in}) inputs, got {X.shape}"
            )
        if self.vectorized:
            out = np.asarray(self.evaluate(X), dtype=float)
        else:
            out = np.asarray([self.evaluate(row) for row in X], dtype=float)
        if out.ndim == 1:
            if self.dim_out != 1:
                raise ValueError(
                    f"model {self.name}: flat output but dim_out={self.dim_out}"
                )
            out = out.reshape(-1, 1)
        if out.shape != (X.shape[0], self.dim_out):
            raise ValueError(
                f"model {self.name}: expected output shape "
                f"{(X.shape[0], self.dim_out)}, got {out.shape}"
            )
        return out


@dataclass(frozen=True)
class PairedSample:
    """Two independent (X_u, Z) draws per row, for the product-kernel terms.

    Blocks: ``x_u``/``z`` and the primed pair, each (size, .) with columns in
    ascending coordinate order.  The four blocks come from four mutually
    independent substreams of ``seed``.
    """

    u: tuple[int, ...]
    x_u: np.ndarray
    z: np.ndarray
    x_u_prime: np.ndarray
    z_prime: np.ndarray
    seed: int

    @property
    def size(self) -> int:
        return self.x_u.shape[0]


def _check_subset(u, d: int) -> tuple[int, ...]:
    u = tuple(int(i) for i in u)
    if len(u) == 0:
        raise ValueError("subset must be non-empty")
    if list(u) != sorted(set(u)):
        raise ValueError("subset must be sorted and duplicate-free")
    if u[0] < 0 or u[-1] >= d:
        raise ValueError(f"subset {u} out of range for dimension {d}")
    return u


def complement(u: tuple[int, ...], d: int) -> tuple[int, ...]:
    """Ascending coordinates not in u."""
    inu = set(u)
    return tuple(i for i in range(d) if i not in inu)


def _draw_block(
    input_model: InputModel, coords: tuple[int, ...], size: int, rng: np.random.Generator
) -> np.ndarray:
    if len(coords) == 0:
        return np.empty((size, 0))
    cols = [np.asarray(input_model.marginals[c].sample(rng, size), dtype=float) for c in coords]
    for c, col in zip(coords, cols):
        if col.shape != (size,):
            raise ValueError(f"marginal {c} returned shape {col.shape}, wanted ({size},)")
    return np.column_stack(cols)


def sample_paired(
    input_model: InputModel, u, size: int, seed: int
) -> PairedSample:
    """Draw a paired sample for subset ``u``.

    Block substream tags: 0 = x_u, 1 = z, 2 = x_u', 3 = z'.  Innovations are
    drawn from the complementary coordinates' marginals; the dependency map
    is applied later, at evaluation time.
    """
    d = input_model.dimension
    u = _check_subset(u, d)
    if size < 1:
        raise ValueError("size must be >= 1")
    notu = complement(u, d)
    x_u = _draw_block(input_model, u, size, substream(seed, 0))
    z = _draw_block(input_model, notu, size, substream(seed, 1))
    x_u_p = _draw_block(input_model, u, size, substream(seed, 2))
    z_p = _draw_block(input_model, notu, size, substream(seed, 3))
    return PairedSample(u=u, x_u=x_u, z=z, x_u_prime=x_u_p, z_prime=z_p, seed=int(seed))


def evaluate_g(
    model: ModelSpec,
    input_model: InputModel,
    u,
    x_u: np.ndarray,
    z: np.ndarray,
) -> np.ndarray:
    """Evaluate the composed function g(x_u, z) = M(x_u, r_u(x_u, z)).

    Assembles the full input vector by placing ``x_u`` at the subset
    coordinates and the dependency-map output at the complementary ones,
    then runs the model batch.

    Returns:
        (N, dim_out) model outputs.

    Raises:
        ValueError: on shape mismatches or non-finite model output.
    """
    d = input_model.dimension
    if model.dim_in != d:
        raise ValueError(
            f"model {model.name} takes {model.dim_in} inputs, input model has {d}"
        )
    u = _check_subset(u, d)
    notu = complement(u, d)
    x_u = np.asarray(x_u, dtype=float)
    z = np.asarray(z, dtype=float)
    if x_u.ndim != 2 or x_u.shape[1] != len(u):
        raise ValueError(f"x_u must be (N, {len(u)}), got {x_u.shape}")
    if z.ndim != 2 or z.shape[1] != len(notu):
        raise ValueError(f"z must be (N, {len(notu)}), got {z.shape}")
    if x_u.shape[0] != z.shape[0]:
        raise ValueError("x_u and z must have the same number of rows")
    n = x_u.shape[0]
    dep = input_model.dependency_for(u)
    x_notu = np.asarray(dep.transform(x_u, z), dtype=float)
    if x_notu.shape != (n, len(notu)):
        raise ValueError(
            f"dependency {dep.name} returned shape {x_notu.shape}, "
            f"wanted {(n, len(notu))}"
        )
    X = np.empty((n, d))
    X[:, list(u)] = x_u
    if notu:
        X[:, list(notu)] = x_notu
    out = model.evaluate_batch(X)
    if not np.all(np.isfinite(out)):
        raise ValueError(f"model {model.name} returned non-finite values")
    return out
