"""Sensitivity indices and asymptotic independence tests.

An index is a normalized kernel discrepancy raised to a user exponent q:
|mean kernel moment - k(0,0)| of the effect blocks, divided by the same
quantity for the centered output, then |ratio|^q.  A subset with no effect
gives 0, a subset carrying the whole output gives 1.

The independence test studentizes the total-effect moment with its
null-variance estimate; under the null hypothesis the statistic converges
to |N(0,1)|^q, so the critical value has the closed form
(standard normal quantile at 1 - alpha/2)^q.  Two algebraically identical
arrangements of the statistic are provided and cross-checked in the tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .errors import DegenerateOutputError, DegenerateStatisticError
from .estimators import (
    MomentEstimates,
    build_conditional_mean_plan,
    compute_af_arrays,
    moments_from_arrays,
)
from .kernels import CenteredKernel, KernelSpec
from .sampling import InputModel, ModelSpec, child_seed, sample_paired

# relative floor under which a denominator counts as numerically zero
DEGENERATE_RTOL = 1e-12

VARIANTS = ("studentized", "index_scaled")


@dataclass(frozen=True)
class KbSiEstimate:
    """Point estimates of one (subset, kernel, q) cell.

    ``s_fo``/``s_tot`` are clamped into [0, 1]; the raw ratios (which Monte
    Carlo noise can push past 1) are kept alongside, as are the
    pre-normalization discrepancies (``numerator_fo``, ``numerator_tot``,
    ``denominator``).  The standard errors are the asymptotic-theory values,
    which hold for q = 1; they are reported as-is for other q rather than
    extrapolated, since no limit theorem covers that case.
    """

    u: tuple[int, ...]
    kernel_label: str
    q: float
    s_fo: float
    s_tot: float
    s_fo_raw: float
    s_tot_raw: float
    numerator_fo: float
    numerator_tot: float
    denominator: float
    se_fo: float
    se_tot: float
    clamped: bool
    m1: int
    m: int
    n_norm: int
    seed: int | None = None


@dataclass(frozen=True)
class TestReport:
    """Outcome of the asymptotic independence test for one cell.

    ``degenerate`` marks cells whose null-variance estimate vanished at
    working precision (output numerically constant in the subset); the
    statistic is NaN and the decision is "no rejection" there.
    """

    u: tuple[int, ...]
    kernel_label: str
    q: float
    statistic: float
    critical: float
    alpha_level: float
    reject: bool
    variant: str
    degenerate: bool = False


def _denominator(moments: MomentEstimates) -> float:
    d = moments.mu_c - moments.k_origin
    scale = max(1.0, abs(moments.k_origin))
    if abs(d) <= DEGENERATE_RTOL * scale:
        raise DegenerateOutputError(
            "normalizing moment coincides with the origin value: "
            "the output is constant at working precision"
        )
    return d


def first_order_index(moments: MomentEstimates, q: float = 0.5) -> float:
    """Normalized first-order index |ratio|^q, unclamped."""
    _check_q(q)
    return abs((moments.mu_fo - moments.k_origin) / _denominator(moments)) ** q


def total_index(moments: MomentEstimates, q: float = 0.5) -> float:
    """Normalized total index |ratio|^q, unclamped."""
    _check_q(q)
    return abs((moments.mu_tot - moments.k_origin) / _denominator(moments)) ** q


def index_std_error(moments: MomentEstimates, which: str) -> float:
    """Asymptotic standard error of an index estimate.

    Computes sqrt(sigma / m) / |denominator|, the limit-theorem expression,
    which is exact for q = 1.  No limit theorem covers other q, so this
    same value is reported there too, labeled a q = 1 standard error.

    Args:
        which: "fo" or "tot".
    """
    if which == "fo":
        sigma = moments.sigma_fo
    elif which == "tot":
        sigma = moments.sigma_tot
    else:
        raise ValueError('which must be "fo" or "tot"')
    den = _denominator(moments)
    return math.sqrt(max(0.0, sigma) / moments.m) / abs(den)


def critical_value(q: float, alpha_level: float) -> float:
    """Quantile at 1 - alpha of |N(0,1)|^q, the null law of the statistic."""
    _check_q(q)
    if not (0.0 < alpha_level < 1.0):
        raise ValueError("alpha_level must lie in (0, 1)")
    return float(norm.ppf(1.0 - alpha_level / 2.0) ** q)


def test_statistic(
    moments: MomentEstimates,
    q: float = 0.5,
    variant: str = "index_scaled",
    total_index_value: float | None = None,
) -> float:
    """Studentized total-effect statistic; large values refute independence.

    Variants:
        "studentized":   |(mu_tot - k00) / sqrt(sigma_tot_h0 / m)|^q
        "index_scaled":  the (unclamped) total index rescaled by m^(q/2)
                         and the inverse null-variance-to-denominator ratio.

    Both arrangements are algebraically equal; the second is the form the
    reporting pipeline quotes because it factors through the index.  Pass
    ``total_index_value`` (the raw index) to make the index_scaled variant
    reuse an already-computed index instead of recomputing it.

    Raises:
        DegenerateStatisticError: the null-variance estimate is zero at
            working precision (output numerically constant in the subset).
    """
    _check_q(q)
    if variant not in VARIANTS:
        raise ValueError(f"variant must be one of {VARIANTS}")
    scale = max(abs(moments.k_origin), abs(moments.mu_c - moments.k_origin), 1e-300)
    if moments.sigma_tot_h0 <= (DEGENERATE_RTOL * scale) ** 2:
        raise DegenerateStatisticError(
            "null-variance estimate vanished: the output is numerically "
            "constant in the tested subset, no statistic scale exists"
        )
    m = moments.m
    if variant == "studentized":
        z = (moments.mu_tot - moments.k_origin) / math.sqrt(moments.sigma_tot_h0 / m)
        return abs(z) ** q
    den = _denominator(moments)
    s_tot = (
        abs((moments.mu_tot - moments.k_origin) / den) ** q
        if total_index_value is None
        else float(total_index_value)
    )
    factor = (moments.sigma_tot_h0 / den**2) ** (-q / 2.0)
    return m ** (q / 2.0) * factor * s_tot


def _check_q(q: float) -> None:
    if not (isinstance(q, (int, float)) and math.isfinite(q) and q > 0.0):
        raise ValueError("q must be finite and > 0")


def cell_from_moments(
    moments: MomentEstimates,
    *,
    q: float = 0.5,
    alpha_level: float = 0.05,
    variant: str = "index_scaled",
    seed: int | None = None,
) -> tuple[KbSiEstimate, TestReport]:
    """Assemble the index estimate and test report from computed moments.

    A degenerate null variance (output numerically constant in the subset)
    is reported, not raised: the statistic is NaN, ``reject`` is False and
    the report carries ``degenerate=True``.  A constant output overall still
    raises :class:`DegenerateOutputError` since no index is defined then.
    """
    kernel = moments.kernel
    s_fo_raw = first_order_index(moments, q)
    s_tot_raw = total_index(moments, q)
    se_fo = index_std_error(moments, "fo")
    se_tot = index_std_error(moments, "tot")
    clamped = s_fo_raw > 1.0 or s_tot_raw > 1.0
    estimate = KbSiEstimate(
        u=moments.u,
        kernel_label=kernel.label(),
        q=q,
        s_fo=min(s_fo_raw, 1.0),
        s_tot=min(s_tot_raw, 1.0),
        s_fo_raw=s_fo_raw,
        s_tot_raw=s_tot_raw,
        numerator_fo=moments.mu_fo - moments.k_origin,
        numerator_tot=moments.mu_tot - moments.k_origin,
        denominator=moments.mu_c - moments.k_origin,
        se_fo=se_fo,
        se_tot=se_tot,
        clamped=clamped,
        m1=moments.m1,
        m=moments.m,
        n_norm=moments.n_norm,
        seed=None if seed is None else int(seed),
    )
    crit = critical_value(q, alpha_level)
    try:
        stat = test_statistic(moments, q, variant, total_index_value=s_tot_raw)
        degenerate = False
    except DegenerateStatisticError:
        stat = float("nan")
        degenerate = True
    report = TestReport(
        u=moments.u,
        kernel_label=kernel.label(),
        q=q,
        statistic=stat,
        critical=crit,
        alpha_level=alpha_level,
        reject=bool(stat > crit) if not degenerate else False,
        variant=variant,
        degenerate=degenerate,
    )
    return estimate, report


def run_independence_test(
    model: ModelSpec,
    input_model: InputModel,
    u,
    kernel: KernelSpec | CenteredKernel,
    *,
    q: float = 0.5,
    m1: int = 1000,
    m: int = 2000,
    n_norm: int | None = None,
    alpha_level: float = 0.05,
    seed: int = 0,
    variant: str = "index_scaled",
    fresh_inner: bool = False,
) -> tuple[KbSiEstimate, TestReport]:
    """Full single-cell pipeline: sample, estimate, index, test.

    Draws a paired sample of size ``n_norm`` (default m) whose first m rows
    feed the per-subset estimators while all rows feed the normalizing
    moment, builds the inner plan of size ``m1``, computes every kernel
    moment, and assembles the index estimate plus the test report through
    :func:`cell_from_moments`.
    """
    if m < 2:
        raise ValueError("m must be >= 2")
    big = m if n_norm is None else int(n_norm)
    if big < m:
        raise ValueError("n_norm must be >= m")
    sample = sample_paired(input_model, u, big, child_seed(seed, 1))
    plan = build_conditional_mean_plan(
        model, input_model, u, m1, child_seed(seed, 2), fresh_inner
    )
    arrays = compute_af_arrays(model, input_model, u, sample, plan, m)
    moments = moments_from_arrays(kernel, arrays)
    return cell_from_moments(
        moments, q=q, alpha_level=alpha_level, variant=variant, seed=seed
    )
