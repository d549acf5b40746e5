"""Study configuration, grid runner and report emission.

A study is a JSON document naming a built-in model, the input subsets to
test (1-based, matching the usual X_1..X_d labeling), the kernels, the
exponent q and the Monte Carlo sizes.  ``run_study`` executes the
(subset, kernel) grid, optionally sweeping the input correlation of the
vector benchmark, and ``emit`` writes CSV, JSON or an aligned text table.

Subcommands::

    kbsens run CONFIG [--seed N] [--workers N] [--output PATH] [--format F]
    kbsens validate CONFIG
    kbsens oracle CONFIG [--seed N] [--output PATH]

Worker count resolution: --workers flag, else the KBSENS_WORKERS
environment variable, else 1.  Results are independent of the worker count;
every subset draws its sample from seeds derived by stable tags.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from ._accel import active_backend
from .errors import ConfigError, DegenerateOutputError, KernelOverflowError
from .estimators import (
    build_conditional_mean_plan,
    compute_af_arrays,
    moments_from_arrays,
)
from .kernels import FAMILIES, KernelSpec, unbounded_alpha
from .models import DEFAULT_G_COEFFS, GFunctionSpec, VectorModelSpec
from .sampling import (
    InputModel,
    ModelSpec,
    _draw_block,
    child_seed,
    complement,
    evaluate_g,
    sample_paired,
    substream,
)
from .sensitivity import VARIANTS, KbSiEstimate, TestReport, cell_from_moments
from .validation import mmd_equivalence_check, sobol_equivalence_check

_MODEL_NAMES = ("gfunction", "vector2d")
_FORMATS = ("csv", "json", "table")
_AUTO_FAMILIES = ("gaussian", "laplacian")
_PILOT_SIZE = 4096

CSV_HEADER = "subset,kernel,q,s_fo,s_tot,se_fo,se_tot,statistic,critical,reject"
SWEEP_CSV_HEADER = "rho,subset,kernel,s_fo,s_tot"


@dataclass(frozen=True)
class KernelConfig:
    """A kernel entry as configured; alpha may still be the string "auto"."""

    family: str
    alpha: float | str | None = None
    p: int = 1
    diag_weights: tuple[float, ...] | None = None

    def resolve(self, trace_var: float | None, n_outputs: int) -> KernelSpec:
        alpha = self.alpha
        if alpha == "auto":
            if trace_var is None:
                raise ConfigError(
                    f"kernels: {self.family} alpha=auto needs a pilot variance"
                )
            alpha = unbounded_alpha(self.family, trace_var, n_outputs)
        return KernelSpec(
            family=self.family,
            alpha=alpha,
            p=self.p,
            diag_weights=self.diag_weights,
        )


@dataclass(frozen=True)
class StudyConfig:
    """Validated study description; every field has a concrete value."""

    model_name: str
    model_params: dict[str, Any]
    subsets: tuple[tuple[int, ...], ...]          # 1-based, as configured
    kernels: tuple[KernelConfig, ...]
    q: float = 0.5
    alpha_level: float = 0.05
    m1: int = 1000
    m: int = 2000
    n_norm: int = 2000
    seed: int = 0
    variant: str = "index_scaled"
    fresh_inner: bool = False
    share_samples_across_kernels: bool = True
    sweep_rho: tuple[float, ...] | None = None
    output_format: str = "table"
    output_path: str | None = None

    def dimension(self) -> int:
        if self.model_name == "gfunction":
            coeffs = self.model_params.get("coefficients", DEFAULT_G_COEFFS)
            return len(coeffs) + int(self.model_params.get("dummy_inputs", 0))
        return 2


@dataclass(frozen=True)
class StudyRow:
    """One grid cell: estimates plus test outcome, or an error message."""

    rho: float | None
    subset: tuple[int, ...]                       # 1-based
    kernel_label: str
    family: str
    estimate: KbSiEstimate | None
    report: TestReport | None
    error: str | None = None


@dataclass
class StudyResult:
    """All grid rows plus run metadata, ready for :func:`emit`."""

    rows: list[StudyRow]
    metadata: dict[str, Any] = field(default_factory=dict)

    @property
    def has_sweep(self) -> bool:
        return any(r.rho is not None for r in self.rows)

    def to_dict(self) -> dict[str, Any]:
        rows = []
        for r in self.rows:
            entry: dict[str, Any] = {
                "rho": r.rho,
                "subset": list(r.subset),
                "kernel": r.kernel_label,
                "family": r.family,
                "error": r.error,
            }
            if r.estimate is not None:
                e = r.estimate
                entry.update(
                    q=e.q,
                    s_fo=e.s_fo,
                    s_tot=e.s_tot,
                    s_fo_raw=e.s_fo_raw,
                    s_tot_raw=e.s_tot_raw,
                    se_fo=e.se_fo,
                    se_tot=e.se_tot,
                    clamped=e.clamped,
                )
            if r.report is not None:
                t = r.report
                entry.update(
                    statistic=None if math.isnan(t.statistic) else t.statistic,
                    critical=t.critical,
                    alpha_level=t.alpha_level,
                    reject=t.reject,
                    variant=t.variant,
                    degenerate=t.degenerate,
                )
            rows.append(entry)
        return {"metadata": self.metadata, "rows": rows}


def _cfg_int(path: str, value, minimum: int) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{path}: must be an integer >= {minimum}")
    if value < minimum:
        raise ConfigError(f"{path}: must be an integer >= {minimum}")
    return value


def _cfg_float(path: str, value, lo=None, hi=None) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{path}: must be a number")
    v = float(value)
    if not math.isfinite(v):
        raise ConfigError(f"{path}: must be finite")
    if lo is not None and v <= lo[0] and not lo[1]:
        raise ConfigError(f"{path}: must be > {lo[0]}")
    if lo is not None and v < lo[0]:
        raise ConfigError(f"{path}: must be >= {lo[0]}")
    if hi is not None and v >= hi[0] and not hi[1]:
        raise ConfigError(f"{path}: must be < {hi[0]}")
    if hi is not None and v > hi[0]:
        raise ConfigError(f"{path}: must be <= {hi[0]}")
    return v


_DEFAULT_KERNELS = (
    KernelConfig(family="l1_product"),
    KernelConfig(family="quadratic"),
    KernelConfig(family="exponential"),
    KernelConfig(family="gaussian", alpha="auto"),
    KernelConfig(family="laplacian", alpha="auto"),
)


def _parse_kernel(path: str, raw) -> KernelConfig:
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: must be an object with a family field")
    unknown = set(raw) - {"family", "alpha", "p", "diag_weights"}
    if unknown:
        raise ConfigError(f"{path}: unknown keys {sorted(unknown)}")
    family = raw.get("family")
    if family not in FAMILIES:
        raise ConfigError(f"{path}.family: must be one of {list(FAMILIES)}")
    alpha = raw.get("alpha")
    if alpha is not None and alpha != "auto":
        alpha = _cfg_float(f"{path}.alpha", alpha, lo=(0.0, False))
    if alpha == "auto" and family not in _AUTO_FAMILIES:
        raise ConfigError(f"{path}.alpha: auto is defined for {_AUTO_FAMILIES} only")
    p = raw.get("p", 1)
    p = _cfg_int(f"{path}.p", p, 1)
    weights = raw.get("diag_weights")
    if weights is not None:
        if not isinstance(weights, list) or not weights:
            raise ConfigError(f"{path}.diag_weights: must be a non-empty list")
        weights = tuple(
            _cfg_float(f"{path}.diag_weights[{i}]", w, lo=(0.0, False))
            for i, w in enumerate(weights)
        )
    kc = KernelConfig(family=family, alpha=alpha, p=p, diag_weights=weights)
    if alpha != "auto":
        try:
            kc.resolve(None, 1)
        except (ValueError, ConfigError) as exc:
            raise ConfigError(f"{path}: {exc}") from None
    return kc


def parse_config(raw: str | dict) -> StudyConfig:
    """Validate a JSON study document and fill in defaults.

    Accepts the JSON text or an already-decoded dict.  Error messages are
    prefixed with the dotted path of the offending field.
    """
    if isinstance(raw, str):
        try:
            doc = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"document: not valid JSON ({exc})") from None
    elif isinstance(raw, dict):
        doc = raw
    else:
        raise ConfigError("document: must be JSON text or an object")
    if not isinstance(doc, dict):
        raise ConfigError("document: top level must be an object")
    known = {
        "model", "subsets", "kernels", "q", "alpha_level", "sizes", "seed",
        "variant", "fresh_inner", "share_samples_across_kernels", "sweep",
        "output",
    }
    unknown = set(doc) - known
    if unknown:
        raise ConfigError(f"document: unknown keys {sorted(unknown)}")

    model = doc.get("model")
    if not isinstance(model, dict) or "name" not in model:
        raise ConfigError("model: must be an object with a name field")
    name = model["name"]
    if name not in _MODEL_NAMES:
        raise ConfigError(f"model.name: must be one of {list(_MODEL_NAMES)}")
    params: dict[str, Any] = {}
    if name == "gfunction":
        unknown = set(model) - {"name", "coefficients", "dummy_inputs"}
        if unknown:
            raise ConfigError(f"model: unknown keys {sorted(unknown)}")
        coeffs = model.get("coefficients", list(DEFAULT_G_COEFFS))
        if not isinstance(coeffs, list) or not coeffs:
            raise ConfigError("model.coefficients: must be a non-empty list")
        coeffs = tuple(
            _cfg_float(f"model.coefficients[{i}]", c, lo=(0.0, True))
            for i, c in enumerate(coeffs)
        )
        params["coefficients"] = coeffs
        params["dummy_inputs"] = _cfg_int(
            "model.dummy_inputs", model.get("dummy_inputs", 0), 0
        )
    else:
        unknown = set(model) - {"name", "interaction", "rho"}
        if unknown:
            raise ConfigError(f"model: unknown keys {sorted(unknown)}")
        params["interaction"] = _cfg_float(
            "model.interaction", model.get("interaction", 2.0)
        )
        params["rho"] = _cfg_float(
            "model.rho", model.get("rho", 0.0), lo=(-1.0, True), hi=(1.0, True)
        )

    if name == "gfunction":
        d = len(params["coefficients"]) + params["dummy_inputs"]
    else:
        d = 2

    subsets_raw = doc.get("subsets")
    if subsets_raw is None:
        subsets = tuple((i,) for i in range(1, d + 1))
    else:
        if not isinstance(subsets_raw, list) or not subsets_raw:
            raise ConfigError("subsets: must be a non-empty list of index lists")
        subsets = []
        for i, s in enumerate(subsets_raw):
            if not isinstance(s, list) or not s:
                raise ConfigError(f"subsets[{i}]: must be a non-empty list")
            idx = tuple(sorted(_cfg_int(f"subsets[{i}][{j}]", v, 1) for j, v in enumerate(s)))
            if len(set(idx)) != len(idx):
                raise ConfigError(f"subsets[{i}]: duplicate indices")
            if idx[-1] > d:
                raise ConfigError(
                    f"subsets[{i}]: index {idx[-1]} out of range for {d} inputs"
                )
            subsets.append(idx)
        subsets = tuple(subsets)

    kernels_raw = doc.get("kernels")
    if kernels_raw is None:
        kernels = _DEFAULT_KERNELS
    else:
        if not isinstance(kernels_raw, list) or not kernels_raw:
            raise ConfigError("kernels: must be a non-empty list")
        kernels = tuple(
            _parse_kernel(f"kernels[{i}]", k) for i, k in enumerate(kernels_raw)
        )

    q = _cfg_float("q", doc.get("q", 0.5), lo=(0.0, False))
    alpha_level = _cfg_float(
        "alpha_level", doc.get("alpha_level", 0.05), lo=(0.0, False), hi=(1.0, False)
    )

    sizes = doc.get("sizes", {})
    if not isinstance(sizes, dict):
        raise ConfigError("sizes: must be an object")
    unknown = set(sizes) - {"m1", "m", "M", "n_norm"}
    if unknown:
        raise ConfigError(f"sizes: unknown keys {sorted(unknown)}")
    if "M" in sizes and "n_norm" in sizes:
        raise ConfigError("sizes: give M or n_norm, not both")
    m1 = _cfg_int("sizes.m1", sizes.get("m1", 1000), 2)
    m = _cfg_int("sizes.m", sizes.get("m", 2000), 2)
    n_norm = sizes.get("M", sizes.get("n_norm", m))
    n_norm = _cfg_int("sizes.M", n_norm, 2)
    if n_norm < m:
        raise ConfigError("sizes.M: must be >= sizes.m")

    seed = doc.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        raise ConfigError("seed: must be a non-negative integer")

    variant = doc.get("variant", "index_scaled")
    if variant not in VARIANTS:
        raise ConfigError(f"variant: must be one of {list(VARIANTS)}")

    fresh_inner = doc.get("fresh_inner", False)
    if not isinstance(fresh_inner, bool):
        raise ConfigError("fresh_inner: must be a boolean")
    share = doc.get("share_samples_across_kernels", True)
    if not isinstance(share, bool):
        raise ConfigError("share_samples_across_kernels: must be a boolean")

    sweep_rho = None
    if "sweep" in doc:
        sweep = doc["sweep"]
        if not isinstance(sweep, dict) or set(sweep) != {"rho"}:
            raise ConfigError('sweep: must be an object with exactly the key "rho"')
        if name != "vector2d":
            raise ConfigError("sweep.rho: only the vector2d model sweeps rho")
        values = sweep["rho"]
        if not isinstance(values, list) or not values:
            raise ConfigError("sweep.rho: must be a non-empty list")
        sweep_rho = tuple(
            _cfg_float(f"sweep.rho[{i}]", v, lo=(-1.0, True), hi=(1.0, True))
            for i, v in enumerate(values)
        )

    output = doc.get("output", {})
    if not isinstance(output, dict):
        raise ConfigError("output: must be an object")
    unknown = set(output) - {"format", "path"}
    if unknown:
        raise ConfigError(f"output: unknown keys {sorted(unknown)}")
    fmt = output.get("format", "table")
    if fmt not in _FORMATS:
        raise ConfigError(f"output.format: must be one of {list(_FORMATS)}")
    path = output.get("path")
    if path is not None and not isinstance(path, str):
        raise ConfigError("output.path: must be a string")

    return StudyConfig(
        model_name=name,
        model_params=params,
        subsets=subsets,
        kernels=kernels,
        q=q,
        alpha_level=alpha_level,
        m1=m1,
        m=m,
        n_norm=n_norm,
        seed=seed,
        variant=variant,
        fresh_inner=fresh_inner,
        share_samples_across_kernels=share,
        sweep_rho=sweep_rho,
        output_format=fmt,
        output_path=path,
    )


def _build_model(
    config: StudyConfig, rho: float | None
) -> tuple[ModelSpec, InputModel]:
    if config.model_name == "gfunction":
        spec = GFunctionSpec(
            coeffs=config.model_params["coefficients"],
            dummy_inputs=config.model_params["dummy_inputs"],
        )
        return spec.model(), spec.input_model()
    vrho = config.model_params["rho"] if rho is None else rho
    vspec = VectorModelSpec(
        interaction=config.model_params["interaction"], rho=vrho
    )
    return vspec.model(), vspec.input_model()


def _counting(model: ModelSpec) -> tuple[ModelSpec, list[int]]:
    counter = [0]
    inner = model.evaluate
    vectorized = model.vectorized

    def evaluate(X):
        counter[0] += X.shape[0] if vectorized else 1
        return inner(X)

    wrapped = ModelSpec(
        name=model.name,
        dim_in=model.dim_in,
        dim_out=model.dim_out,
        evaluate=evaluate,
        vectorized=vectorized,
    )
    return wrapped, counter


def _pilot_trace_var(model: ModelSpec, input_model: InputModel, seed: int) -> float:
    """Trace of the output covariance from a joint pilot sample.

    Samples the joint law through the first coordinate's dependency map, so
    coupled inputs keep their coupling.
    """
    u = (0,)
    notu = complement(u, input_model.dimension)
    x = _draw_block(input_model, u, _PILOT_SIZE, substream(seed, 70))
    z = _draw_block(input_model, notu, _PILOT_SIZE, substream(seed, 71))
    y = evaluate_g(model, input_model, u, x, z)
    return float(np.sum(np.var(y, axis=0, ddof=1)))


def _resolve_kernels(
    config: StudyConfig,
    model: ModelSpec,
    input_model: InputModel,
) -> list[KernelSpec]:
    """Resolve "auto" rates once, from the base model, before the main run.

    A rho sweep keeps the rates fixed across all sweep points so that a
    configured kernel stays one comparable kernel for the whole study.
    """
    trace_var = None
    if any(kc.alpha == "auto" for kc in config.kernels):
        trace_var = _pilot_trace_var(model, input_model, child_seed(config.seed, 7))
    return [kc.resolve(trace_var, model.dim_out) for kc in config.kernels]


def _subset_rows(
    config: StudyConfig,
    model: ModelSpec,
    input_model: InputModel,
    kernels: list[KernelSpec],
    rho: float | None,
    i_rho: int,
    i_sub: int,
    subset: tuple[int, ...],
) -> tuple[list[StudyRow], int]:
    """All kernel rows of one subset; shares the sample across kernels."""
    model, counter = _counting(model)
    u0 = tuple(i - 1 for i in subset)
    rows: list[StudyRow] = []

    def error_rows(message: str) -> list[StudyRow]:
        return [
            StudyRow(
                rho=rho,
                subset=subset,
                kernel_label=k.label(),
                family=k.family,
                estimate=None,
                report=None,
                error=message,
            )
            for k in kernels
        ]

    if config.share_samples_across_kernels:
        seed_u = child_seed(config.seed, 100 + i_rho, i_sub)
        try:
            sample = sample_paired(
                input_model, u0, config.n_norm, child_seed(seed_u, 1)
            )
            plan = build_conditional_mean_plan(
                model, input_model, u0, config.m1, child_seed(seed_u, 2),
                config.fresh_inner,
            )
            arrays = compute_af_arrays(
                model, input_model, u0, sample, plan, config.m
            )
        except (ValueError, FloatingPointError) as exc:
            return error_rows(str(exc)), counter[0]
        for kernel in kernels:
            try:
                moments = moments_from_arrays(kernel, arrays)
                estimate, report = cell_from_moments(
                    moments,
                    q=config.q,
                    alpha_level=config.alpha_level,
                    variant=config.variant,
                    seed=seed_u,
                )
                rows.append(
                    StudyRow(
                        rho=rho,
                        subset=subset,
                        kernel_label=kernel.label(),
                        family=kernel.family,
                        estimate=estimate,
                        report=report,
                    )
                )
            except (DegenerateOutputError, KernelOverflowError, ValueError) as exc:
                rows.append(
                    StudyRow(
                        rho=rho,
                        subset=subset,
                        kernel_label=kernel.label(),
                        family=kernel.family,
                        estimate=None,
                        report=None,
                        error=str(exc),
                    )
                )
        return rows, counter[0]

    from .sensitivity import run_independence_test

    for i_k, kernel in enumerate(kernels):
        seed_cell = child_seed(config.seed, 100 + i_rho, i_sub, i_k)
        try:
            estimate, report = run_independence_test(
                model,
                input_model,
                u0,
                kernel,
                q=config.q,
                m1=config.m1,
                m=config.m,
                n_norm=config.n_norm,
                alpha_level=config.alpha_level,
                seed=seed_cell,
                variant=config.variant,
                fresh_inner=config.fresh_inner,
            )
            rows.append(
                StudyRow(
                    rho=rho,
                    subset=subset,
                    kernel_label=kernel.label(),
                    family=kernel.family,
                    estimate=estimate,
                    report=report,
                )
            )
        except (ValueError, FloatingPointError) as exc:
            rows.append(
                StudyRow(
                    rho=rho,
                    subset=subset,
                    kernel_label=kernel.label(),
                    family=kernel.family,
                    estimate=None,
                    report=None,
                    error=str(exc),
                )
            )
    return rows, counter[0]


def _resolve_workers(workers: int | None) -> int:
    if workers is not None:
        return max(1, int(workers))
    env = os.environ.get("KBSENS_WORKERS", "").strip()
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError("KBSENS_WORKERS: must be an integer") from None
    return 1


def run_study(config: StudyConfig, workers: int | None = None) -> StudyResult:
    """Execute the full (subset, kernel) grid described by ``config``.

    Per-cell failures (degenerate outputs, kernel overflow) are recorded on
    their rows; the run always completes.  Each subset draws from seeds
    derived by stable tags, so results do not depend on scheduling.
    """
    workers = _resolve_workers(workers)
    started = time.perf_counter()
    rho_values: tuple[float | None, ...] = (
        config.sweep_rho if config.sweep_rho is not None else (None,)
    )
    base_model, base_input_model = _build_model(config, None)
    kernels = _resolve_kernels(config, base_model, base_input_model)
    kernel_labels = [k.label() for k in kernels]
    tasks = []
    for i_rho, rho in enumerate(rho_values):
        model, input_model = (
            (base_model, base_input_model) if rho is None
            else _build_model(config, rho)
        )
        for i_sub, subset in enumerate(config.subsets):
            tasks.append(
                (config, model, input_model, kernels, rho, i_rho, i_sub, subset)
            )

    if workers > 1 and len(tasks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(lambda t: _subset_rows(*t), tasks))
    else:
        outcomes = [_subset_rows(*t) for t in tasks]

    rows = [row for rows_i, _ in outcomes for row in rows_i]
    evals = sum(count for _, count in outcomes)
    metadata = {
        "model": config.model_name,
        "model_params": {
            k: list(v) if isinstance(v, tuple) else v
            for k, v in config.model_params.items()
        },
        "kernels": kernel_labels,
        "q": config.q,
        "alpha_level": config.alpha_level,
        "sizes": {"m1": config.m1, "m": config.m, "M": config.n_norm},
        "seed": config.seed,
        "variant": config.variant,
        "fresh_inner": config.fresh_inner,
        "share_samples_across_kernels": config.share_samples_across_kernels,
        "sweep_rho": list(config.sweep_rho) if config.sweep_rho else None,
        "workers": workers,
        "backend": active_backend(),
        "model_evaluations": evals,
        "wall_time_s": round(time.perf_counter() - started, 3),
        "errors": sum(1 for r in rows if r.error is not None),
    }
    return StudyResult(rows=rows, metadata=metadata)


def _fmt_subset(subset: tuple[int, ...]) -> str:
    return "+".join(str(i) for i in subset)


def _fmt_float(value: float | None) -> str:
    if value is None:
        return ""
    return repr(float(value))


def _emit_csv(result: StudyResult, out) -> None:
    writer = csv.writer(out, lineterminator="\n")
    if result.has_sweep:
        writer.writerow(SWEEP_CSV_HEADER.split(","))
        for r in result.rows:
            if r.error is not None:
                continue
            writer.writerow(
                [
                    _fmt_float(r.rho),
                    _fmt_subset(r.subset),
                    r.kernel_label,
                    _fmt_float(r.estimate.s_fo),
                    _fmt_float(r.estimate.s_tot),
                ]
            )
        return
    writer.writerow(CSV_HEADER.split(","))
    for r in result.rows:
        if r.error is not None:
            continue
        e, t = r.estimate, r.report
        writer.writerow(
            [
                _fmt_subset(r.subset),
                r.kernel_label,
                _fmt_float(e.q),
                _fmt_float(e.s_fo),
                _fmt_float(e.s_tot),
                _fmt_float(e.se_fo),
                _fmt_float(e.se_tot),
                _fmt_float(t.statistic),
                _fmt_float(t.critical),
                "Yes" if t.reject else "No",
            ]
        )


def _emit_table(result: StudyResult, out) -> None:
    headers = [
        "rho", "subset", "kernel", "s_fo", "s_tot", "se_fo", "se_tot",
        "statistic", "critical", "reject", "notes",
    ]
    if not result.has_sweep:
        headers = headers[1:]
    table: list[list[str]] = []
    for r in result.rows:
        notes = ""
        if r.error is not None:
            row = [_fmt_subset(r.subset), r.kernel_label] + ["ERROR"] * 7 + [r.error]
            if result.has_sweep:
                row = [f"{r.rho:g}" if r.rho is not None else ""] + row
            table.append(row)
            continue
        e, t = r.estimate, r.report
        if t.degenerate:
            notes = "degenerate"
        elif e.clamped:
            notes = "clamped"
        row = [
            _fmt_subset(r.subset),
            r.kernel_label,
            f"{e.s_fo:.4f}",
            f"{e.s_tot:.4f}",
            f"{e.se_fo:.4f}",
            f"{e.se_tot:.4f}",
            "nan" if math.isnan(t.statistic) else f"{t.statistic:.4f}",
            f"{t.critical:.4f}",
            "Yes" if t.reject else "No",
            notes,
        ]
        if result.has_sweep:
            row = [f"{r.rho:g}" if r.rho is not None else ""] + row
        table.append(row)
    widths = [
        max(len(h), *(len(row[i]) for row in table)) if table else len(h)
        for i, h in enumerate(headers)
    ]
    out.write("  ".join(h.ljust(w) for h, w in zip(headers, widths)).rstrip() + "\n")
    out.write("  ".join("-" * w for w in widths) + "\n")
    for row in table:
        out.write("  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip() + "\n")
    md = result.metadata
    if md:
        out.write(
            f"\nseed={md.get('seed')} sizes={md.get('sizes')} "
            f"q={md.get('q')} backend={md.get('backend')} "
            f"evals={md.get('model_evaluations')} "
            f"wall={md.get('wall_time_s')}s errors={md.get('errors')}\n"
        )


def emit(
    result: StudyResult,
    fmt: str | None = None,
    path: str | None = None,
    stream=None,
) -> str:
    """Serialize a study result; returns what was written.

    ``fmt`` defaults to the table view.  With ``path`` the text goes to that
    file; with ``stream`` to the stream; otherwise to stdout.  CSV carries
    the successful cells (errors live in the JSON/table views); the JSON
    document round-trips every number exactly and encodes NaN statistics of
    degenerate cells as null.
    """
    fmt = fmt or "table"
    if fmt not in _FORMATS:
        raise ConfigError(f"output.format: must be one of {list(_FORMATS)}")
    buf = io.StringIO()
    if fmt == "csv":
        _emit_csv(result, buf)
    elif fmt == "json":
        json.dump(result.to_dict(), buf, indent=2, allow_nan=False)
        buf.write("\n")
    else:
        _emit_table(result, buf)
    text = buf.getvalue()
    if path is not None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    elif stream is not None:
        stream.write(text)
    else:
        sys.stdout.write(text)
    return text


def _load_config_file(path: str) -> StudyConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"document: cannot read {path} ({exc})") from None
    return parse_config(text)


def _cmd_run(args) -> int:
    config = _load_config_file(args.config)
    if args.seed is not None:
        config = replace_config(config, seed=args.seed)
    result = run_study(config, workers=args.workers)
    fmt = args.format or config.output_format
    path = args.output or config.output_path
    emit(result, fmt=fmt, path=path)
    if path:
        print(f"wrote {fmt} to {path}")
    return 0


def _cmd_validate(args) -> int:
    config = _load_config_file(args.config)
    n_cells = len(config.subsets) * len(config.kernels)
    mult = len(config.sweep_rho) if config.sweep_rho else 1
    print(
        f"OK: {config.model_name}, {len(config.subsets)} subsets x "
        f"{len(config.kernels)} kernels"
        + (f" x {mult} rho values" if mult > 1 else "")
        + f" = {n_cells * mult} cells"
    )
    return 0


def _cmd_oracle(args) -> int:
    config = _load_config_file(args.config)
    if args.seed is not None:
        config = replace_config(config, seed=args.seed)
    model, input_model = _build_model(config, None)
    kernels = _resolve_kernels(config, model, input_model)
    lines: list[str] = []
    report: dict[str, Any] = {"sobol_equivalence": [], "mmd_identity": []}
    ok = True

    m1 = min(config.m1, 500)
    m = min(config.m, 2000)
    for subset in config.subsets:
        u0 = tuple(i - 1 for i in subset)
        if tuple(u0) in input_model.dependencies:
            lines.append(
                f"sobol-equivalence subset {_fmt_subset(subset)}: SKIP (coupled inputs)"
            )
            report["sobol_equivalence"].append(
                {"subset": list(subset), "skipped": "coupled inputs"}
            )
            continue
        eq = sobol_equivalence_check(
            model, input_model, u0, m1=m1, m=m,
            seed=child_seed(config.seed, 8, *u0),
        )
        status = "PASS" if eq.passed else ("DEGENERATE" if eq.degenerate else "FAIL")
        ok = ok and (eq.passed or eq.degenerate)
        lines.append(
            f"sobol-equivalence subset {_fmt_subset(subset)}: {status} "
            f"(kb fo {eq.kb_first_order:.4f} vs direct {eq.direct_first_order:.4f}, "
            f"kb tot {eq.kb_total:.4f} vs direct {eq.direct_total:.4f})"
        )
        report["sobol_equivalence"].append(
            {
                "subset": list(subset),
                "kb_first_order": eq.kb_first_order,
                "direct_first_order": eq.direct_first_order,
                "kb_total": eq.kb_total,
                "direct_total": eq.direct_total,
                "passed": eq.passed,
            }
        )

    sampler = _centered_output_sampler(model, input_model)
    for kernel in kernels:
        centered, raw, gap = mmd_equivalence_check(
            kernel, sampler, seed=child_seed(config.seed, 9)
        )
        passed = gap <= 1e-10
        ok = ok and passed
        lines.append(
            f"mmd-identity {kernel.label()}: {'PASS' if passed else 'FAIL'} "
            f"(relative gap {gap:.3e})"
        )
        report["mmd_identity"].append(
            {
                "kernel": kernel.label(),
                "centered": centered,
                "raw": raw,
                "relative_gap": gap,
                "passed": passed,
            }
        )

    text = "\n".join(lines) + "\n"
    sys.stdout.write(text)
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            json.dump(report, fh, indent=2, allow_nan=False)
            fh.write("\n")
    return 0 if ok else 1


def _centered_output_sampler(model: ModelSpec, input_model: InputModel):
    """Paired sampler of centered model outputs under the joint input law."""
    u = (0,)
    pilot = sample_paired(input_model, u, _PILOT_SIZE, 12345)
    mean = evaluate_g(model, input_model, u, pilot.x_u, pilot.z).mean(axis=0)

    def draw(rng: np.random.Generator, size: int):
        seed = int(rng.integers(0, 2**63 - 1))
        s = sample_paired(input_model, u, size, seed)
        left = evaluate_g(model, input_model, u, s.x_u, s.z) - mean
        right = evaluate_g(model, input_model, u, s.x_u_prime, s.z_prime) - mean
        return left, right

    return draw


def replace_config(config: StudyConfig, **updates) -> StudyConfig:
    """Frozen-dataclass replace with the same validation assumptions."""
    from dataclasses import replace

    return replace(config, **updates)


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="kbsens",
        description="Kernel-based sensitivity indices and independence tests",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run the configured study grid")
    p_run.add_argument("config", help="path to the JSON study document")
    p_run.add_argument("--seed", type=int, default=None, help="override config seed")
    p_run.add_argument(
        "--workers", type=int, default=None,
        help="worker threads (default: KBSENS_WORKERS or 1)",
    )
    p_run.add_argument("--output", default=None, help="write to this path")
    p_run.add_argument(
        "--format", default=None, choices=_FORMATS, help="override output format"
    )

    p_val = sub.add_parser("validate", help="validate a study document")
    p_val.add_argument("config")

    p_or = sub.add_parser("oracle", help="run independent estimator audits")
    p_or.add_argument("config")
    p_or.add_argument("--seed", type=int, default=None)
    p_or.add_argument("--output", default=None, help="write a JSON audit report")

    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "validate":
            return _cmd_validate(args)
        return _cmd_oracle(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, FloatingPointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
