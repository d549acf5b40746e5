"""Plug-in moment estimators for kernel sensitivity indices.

Given a paired sample and a frozen inner sample, these estimators build
Monte Carlo versions of the kernel moments that every index and test
statistic downstream is made of:

* total-effect residuals  g(x_u, z) - mean_X[g(X_u, z)],
* first-order effects     mean_Z[g(x_u, Z)] - global mean,
* centered outputs        g(x_u, z) - global mean,

then average row-wise kernel values of independent copies.  The inner
conditional means reuse one frozen inner sample across all outer rows by
default (a large constant-factor saving); a ``fresh_inner`` switch draws
fresh inner blocks instead for bias diagnostics.

All heavy work is a flat grid of model evaluations, chunked to bound peak
memory and vectorized through the model's batch interface.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kernels import CenteredKernel, KernelSpec, k_at_origin, pair_values
from .sampling import (
    InputModel,
    ModelSpec,
    PairedSample,
    _check_subset,
    _draw_block,
    complement,
    evaluate_g,
    substream,
)

# peak grid size in array elements; keeps chunks around tens of megabytes
_CHUNK_ELEMS = 1 << 22

# substream tags for the inner (plan) blocks; paired blocks use 0..3
_TAG_INNER_X = 10
_TAG_INNER_Z = 11
_TAG_FRESH = 20


@dataclass(frozen=True)
class ConditionalMeanPlan:
    """Frozen inner sample shared by every conditional-mean query.

    Holds m1 draws of the subset block and of the innovation block, plus the
    global mean of g over the row-paired inner blocks.  The same plan serves
    both conditioning directions.
    """

    u: tuple[int, ...]
    inner_x: np.ndarray
    inner_z: np.ndarray
    global_mean: np.ndarray
    seed: int
    fresh_inner: bool = False

    @property
    def m1(self) -> int:
        return self.inner_x.shape[0]


@dataclass(frozen=True)
class MomentEstimates:
    """All kernel moments of one (subset, kernel) cell.

    ``sigma_tot`` centers at the estimated mean (divisor m - 1);
    ``sigma_tot_h0`` centers at the kernel's origin value (divisor m), the
    scale the null statistic divides by.  ``mu_c`` is the normalizing moment
    over the larger centered-output sample of size ``n_norm``.
    """

    u: tuple[int, ...]
    kernel: KernelSpec | CenteredKernel
    m: int
    m1: int
    n_norm: int
    k_origin: float
    mu_tot: float
    sigma_tot: float
    sigma_tot_h0: float
    mu_fo: float
    sigma_fo: float
    mu_c: float


def build_conditional_mean_plan(
    model: ModelSpec,
    input_model: InputModel,
    u,
    m1: int,
    seed: int,
    fresh_inner: bool = False,
) -> ConditionalMeanPlan:
    """Draw the frozen inner sample and precompute the global mean."""
    u = _check_subset(u, input_model.dimension)
    if m1 < 1:
        raise ValueError("m1 must be >= 1")
    notu = complement(u, input_model.dimension)
    inner_x = _draw_block(input_model, u, m1, substream(seed, _TAG_INNER_X))
    inner_z = _draw_block(input_model, notu, m1, substream(seed, _TAG_INNER_Z))
    gm = evaluate_g(model, input_model, u, inner_x, inner_z).mean(axis=0)
    return ConditionalMeanPlan(
        u=u,
        inner_x=inner_x,
        inner_z=inner_z,
        global_mean=gm,
        seed=int(seed),
        fresh_inner=bool(fresh_inner),
    )


def _grid_means(
    model: ModelSpec,
    input_model: InputModel,
    u: tuple[int, ...],
    plan: ConditionalMeanPlan,
    outer: np.ndarray,
    vary: str,
    rng: np.random.Generator | None,
) -> np.ndarray:
    """Mean of g over the inner block, at each outer row.

    ``vary`` says which argument the inner block supplies: "x" averages over
    inner subset draws at fixed innovations (total-effect direction), "z"
    averages over inner innovations at fixed subset values (first-order
    direction).
    """
    m1 = plan.m1
    d = input_model.dimension
    n_out = model.dim_out
    n_outer = outer.shape[0]
    out = np.empty((n_outer, n_out))
    chunk = max(1, _CHUNK_ELEMS // max(1, m1 * max(d, n_out)))
    notu = complement(u, d)
    if plan.fresh_inner and rng is None:
        rng = substream(plan.seed, _TAG_FRESH, 0 if vary == "x" else 1)
    for lo in range(0, n_outer, chunk):
        hi = min(n_outer, lo + chunk)
        c = hi - lo
        if vary == "x":
            if plan.fresh_inner:
                x_blk = _draw_block(input_model, u, c * m1, rng)
            else:
                x_blk = np.tile(plan.inner_x, (c, 1))
            z_blk = np.repeat(outer[lo:hi], m1, axis=0)
        else:
            x_blk = np.repeat(outer[lo:hi], m1, axis=0)
            if plan.fresh_inner:
                z_blk = _draw_block(input_model, notu, c * m1, rng)
            else:
                z_blk = np.tile(plan.inner_z, (c, 1))
        vals = evaluate_g(model, input_model, u, x_blk, z_blk)
        out[lo:hi] = vals.reshape(c, m1, n_out).mean(axis=1)
    return out


def cond_mean_given_z(
    model: ModelSpec,
    input_model: InputModel,
    u,
    plan: ConditionalMeanPlan,
    z_rows: np.ndarray,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Estimated mean of g(X_u, z) at each innovation row ``z_rows[i]``.

    Returns an (m, dim_out) block; subtracting it from g(x_u_i, z_i) gives
    the plug-in total-effect residual.
    """
    u = _check_subset(u, input_model.dimension)
    z_rows = np.asarray(z_rows, dtype=float)
    if z_rows.ndim != 2:
        raise ValueError("z_rows must be 2-D")
    return _grid_means(model, input_model, u, plan, z_rows, "x", rng)


def cond_mean_given_xu(
    model: ModelSpec,
    input_model: InputModel,
    u,
    plan: ConditionalMeanPlan,
    xu_rows: np.ndarray,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Estimated mean of g(x_u, Z) at each subset row ``xu_rows[i]``.

    Subtracting the plan's global mean gives the plug-in first-order effect.
    """
    u = _check_subset(u, input_model.dimension)
    xu_rows = np.asarray(xu_rows, dtype=float)
    if xu_rows.ndim != 2:
        raise ValueError("xu_rows must be 2-D")
    return _grid_means(model, input_model, u, plan, xu_rows, "z", rng)


@dataclass(frozen=True)
class AfArrays:
    """Plug-in effect samples shared by every kernel on one subset.

    ``tot_*`` and ``fo_*`` hold the first m rows; ``c_*`` hold all rows of
    the larger normalizing sample.
    """

    u: tuple[int, ...]
    m: int
    m1: int
    tot_left: np.ndarray
    tot_right: np.ndarray
    fo_left: np.ndarray
    fo_right: np.ndarray
    c_left: np.ndarray
    c_right: np.ndarray


def compute_af_arrays(
    model: ModelSpec,
    input_model: InputModel,
    u,
    sample: PairedSample,
    plan: ConditionalMeanPlan,
    m: int | None = None,
) -> AfArrays:
    """Evaluate every plug-in effect block once, for reuse across kernels."""
    u = _check_subset(u, input_model.dimension)
    big = sample.size
    m = big if m is None else int(m)
    if not 1 <= m <= big:
        raise ValueError("m must lie in [1, sample.size]")
    gy = evaluate_g(model, input_model, u, sample.x_u, sample.z)
    gyp = evaluate_g(model, input_model, u, sample.x_u_prime, sample.z_prime)
    cmz = cond_mean_given_z(
        model, input_model, u, plan, sample.z[:m], substream(sample.seed, _TAG_FRESH, 2)
    )
    cmzp = cond_mean_given_z(
        model, input_model, u, plan, sample.z_prime[:m], substream(sample.seed, _TAG_FRESH, 3)
    )
    cmx = cond_mean_given_xu(
        model, input_model, u, plan, sample.x_u[:m], substream(sample.seed, _TAG_FRESH, 4)
    )
    cmxp = cond_mean_given_xu(
        model, input_model, u, plan, sample.x_u_prime[:m], substream(sample.seed, _TAG_FRESH, 5)
    )
    gm = plan.global_mean
    return AfArrays(
        u=u,
        m=m,
        m1=plan.m1,
        tot_left=gy[:m] - cmz,
        tot_right=gyp[:m] - cmzp,
        fo_left=cmx - gm,
        fo_right=cmxp - gm,
        c_left=gy - gm,
        c_right=gyp - gm,
    )


def moments_from_arrays(
    kernel: KernelSpec | CenteredKernel, arrays: AfArrays
) -> MomentEstimates:
    """Kernel moments of precomputed effect blocks."""
    k00 = k_at_origin(kernel)
    t_tot = pair_values(kernel, arrays.tot_left, arrays.tot_right)
    t_fo = pair_values(kernel, arrays.fo_left, arrays.fo_right)
    t_c = pair_values(kernel, arrays.c_left, arrays.c_right)
    m = arrays.m
    mu_tot = float(t_tot.mean())
    sigma_tot = float(t_tot.var(ddof=1)) if m > 1 else 0.0
    sigma_tot_h0 = float(np.mean((t_tot - k00) ** 2))
    mu_fo = float(t_fo.mean())
    sigma_fo = float(t_fo.var(ddof=1)) if m > 1 else 0.0
    mu_c = float(t_c.mean())
    return MomentEstimates(
        u=arrays.u,
        kernel=kernel,
        m=m,
        m1=arrays.m1,
        n_norm=arrays.c_left.shape[0],
        k_origin=k00,
        mu_tot=mu_tot,
        sigma_tot=sigma_tot,
        sigma_tot_h0=sigma_tot_h0,
        mu_fo=mu_fo,
        sigma_fo=sigma_fo,
        mu_c=mu_c,
    )


def compute_moments(
    model: ModelSpec,
    input_model: InputModel,
    u,
    kernel: KernelSpec | CenteredKernel,
    sample: PairedSample,
    plan: ConditionalMeanPlan,
    m: int | None = None,
) -> MomentEstimates:
    """One-call pipeline from sample to all moments of a single kernel."""
    arrays = compute_af_arrays(model, input_model, u, sample, plan, m)
    return moments_from_arrays(kernel, arrays)


def _tot_terms(model, input_model, u, kernel, sample, plan, m):
    u = _check_subset(u, input_model.dimension)
    m = sample.size if m is None else int(m)
    if not 1 <= m <= sample.size:
        raise ValueError("m must lie in [1, sample.size]")
    gy = evaluate_g(model, input_model, u, sample.x_u[:m], sample.z[:m])
    gyp = evaluate_g(model, input_model, u, sample.x_u_prime[:m], sample.z_prime[:m])
    cmz = cond_mean_given_z(
        model, input_model, u, plan, sample.z[:m], substream(sample.seed, _TAG_FRESH, 2)
    )
    cmzp = cond_mean_given_z(
        model, input_model, u, plan, sample.z_prime[:m], substream(sample.seed, _TAG_FRESH, 3)
    )
    return pair_values(kernel, gy - cmz, gyp - cmzp)


def estimate_mu_tot(
    model: ModelSpec,
    input_model: InputModel,
    u,
    kernel: KernelSpec | CenteredKernel,
    sample: PairedSample,
    plan: ConditionalMeanPlan,
    m: int | None = None,
) -> float:
    """Mean kernel value of paired total-effect residuals."""
    return float(_tot_terms(model, input_model, u, kernel, sample, plan, m).mean())


def estimate_sigma_tot(
    model: ModelSpec,
    input_model: InputModel,
    u,
    kernel: KernelSpec | CenteredKernel,
    sample: PairedSample,
    plan: ConditionalMeanPlan,
    m: int | None = None,
) -> float:
    """Sample variance (divisor m - 1) of the total-effect kernel terms."""
    t = _tot_terms(model, input_model, u, kernel, sample, plan, m)
    return float(t.var(ddof=1)) if t.size > 1 else 0.0


def estimate_sigma_tot_h0(
    model: ModelSpec,
    input_model: InputModel,
    u,
    kernel: KernelSpec | CenteredKernel,
    sample: PairedSample,
    plan: ConditionalMeanPlan,
    m: int | None = None,
) -> float:
    """Second moment of the terms around k(0,0) (divisor m); the null scale."""
    t = _tot_terms(model, input_model, u, kernel, sample, plan, m)
    return float(np.mean((t - k_at_origin(kernel)) ** 2))


def estimate_mu_fo(
    model: ModelSpec,
    input_model: InputModel,
    u,
    kernel: KernelSpec | CenteredKernel,
    sample: PairedSample,
    plan: ConditionalMeanPlan,
    m: int | None = None,
) -> float:
    """Mean kernel value of paired first-order effects."""
    u = _check_subset(u, input_model.dimension)
    m = sample.size if m is None else int(m)
    if not 1 <= m <= sample.size:
        raise ValueError("m must lie in [1, sample.size]")
    cmx = cond_mean_given_xu(
        model, input_model, u, plan, sample.x_u[:m], substream(sample.seed, _TAG_FRESH, 4)
    )
    cmxp = cond_mean_given_xu(
        model, input_model, u, plan, sample.x_u_prime[:m], substream(sample.seed, _TAG_FRESH, 5)
    )
    gm = plan.global_mean
    return float(pair_values(kernel, cmx - gm, cmxp - gm).mean())


def estimate_mu_c(
    model: ModelSpec,
    input_model: InputModel,
    u,
    kernel: KernelSpec | CenteredKernel,
    sample: PairedSample,
    plan: ConditionalMeanPlan,
) -> float:
    """Mean kernel value of paired centered outputs; the index denominator.

    Uses every row of the sample (the normalizing moment may use a larger
    sample than the per-subset estimators).
    """
    u = _check_subset(u, input_model.dimension)
    gy = evaluate_g(model, input_model, u, sample.x_u, sample.z)
    gyp = evaluate_g(model, input_model, u, sample.x_u_prime, sample.z_prime)
    gm = plan.global_mean
    return float(pair_values(kernel, gy - gm, gyp - gm).mean())
