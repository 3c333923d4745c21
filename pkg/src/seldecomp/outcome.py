"""Stage 2: wage-stage estimation over the trimmed selected sample.

Two objects are fitted on the same design w(X, V): a weighted least-squares
regression of log wages (whose fitted function is the conditional-mean
structural function at (x, v)) and a distribution regression over a grid of
log-wage thresholds (the conditional-distribution counterpart).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .control import ControlFit
from .data import (DesignSpec, MicroSample, TrimRule, build_design,
                   design_columns)
from .distreg import (DRFit, GridPolicy, OUTCOME_GRID,
                      fit_distribution_regression, make_threshold_grid)
from .errors import (CollinearDesignError, ConfigError, DataError,
                     EmptyTrimmedSampleError)

__all__ = ["OutcomeFit", "trim_indices", "fit_outcome", "lasf_value"]


def trim_indices(sample: MicroSample, control: ControlFit, rule: TrimRule) -> np.ndarray:
    """Indices entering the wage stage: h_min < H <= h_max with observed wage."""
    if control.v_hat.shape[0] != sample.n:
        raise DataError("control fit is not aligned with the sample")
    keep = ((sample.hours > rule.h_min_wage_sample)
            & (sample.hours <= rule.h_max)
            & sample.wage_observed_mask)
    idx = np.flatnonzero(keep)
    if idx.size == 0:
        raise EmptyTrimmedSampleError(
            f"trim rule ({rule.h_min_wage_sample}, {rule.h_max}] leaves no "
            "wage observations")
    return idx


@dataclass(frozen=True)
class OutcomeFit:
    """Wage-stage fits for one group over its trimmed sample."""

    ldsf: DRFit
    lasf_coefficients: np.ndarray
    w_spec: DesignSpec
    trim: TrimRule
    trimmed_indices: np.ndarray
    n_trimmed_in: int
    n_dropped_missing_wage: int

    def lasf_rows(self, design_rows) -> np.ndarray:
        rows = np.atleast_2d(np.asarray(design_rows, dtype=float))
        if rows.shape[1] != self.lasf_coefficients.shape[0]:
            raise DataError(f"row dimension {rows.shape[1]} != fit dimension "
                            f"{self.lasf_coefficients.shape[0]}")
        return rows @ self.lasf_coefficients

    def to_dict(self):
        return {"ldsf": self.ldsf.to_dict(),
                "lasf_coefficients": self.lasf_coefficients.tolist(),
                "w_spec": self.w_spec.to_dict(),
                "trim": self.trim.to_dict(),
                "trimmed_indices": self.trimmed_indices.tolist(),
                "n_trimmed_in": self.n_trimmed_in,
                "n_dropped_missing_wage": self.n_dropped_missing_wage}

    @classmethod
    def from_dict(cls, d):
        return cls(DRFit.from_dict(d["ldsf"]),
                   np.asarray(d["lasf_coefficients"], dtype=float),
                   DesignSpec.from_dict(d["w_spec"]),
                   TrimRule.from_dict(d["trim"]),
                   np.asarray(d["trimmed_indices"], dtype=np.int64),
                   int(d["n_trimmed_in"]),
                   int(d["n_dropped_missing_wage"]))


def fit_outcome(sample: MicroSample, control: ControlFit, w_spec: DesignSpec,
                rule: TrimRule = TrimRule(),
                grid_policy: GridPolicy = OUTCOME_GRID) -> OutcomeFit:
    """Fit the wage stage: weighted least squares plus distribution regression.

    The design w(X, V) uses the control values from stage 1 (smoothed values
    when smoothing was enabled there). Workers with missing wages are dropped
    with a counted warning; the trim rule further restricts the sample.
    """
    if not w_spec.includes_control:
        raise ConfigError("the wage-stage design must include control terms")
    idx = trim_indices(sample, control, rule)
    n_missing = int(np.sum((sample.hours > rule.h_min_wage_sample)
                           & (sample.hours <= rule.h_max)
                           & ~sample.wage_observed_mask))
    if n_missing:
        warnings.warn(f"group {sample.group_id!r}: {n_missing} workers in the "
                      "trim window lack log_wage and are dropped from the wage stage",
                      stacklevel=2)
    sub = sample.subset(idx)
    v = control.v_hat[idx]
    if np.any(np.isnan(v)):
        raise DataError("control values missing for trimmed observations")
    W = build_design(sub, w_spec, control_values=v)
    cols = design_columns(w_spec)

    sw = np.sqrt(sub.weights)
    beta, _, rank, _ = np.linalg.lstsq(W * sw[:, None], sub.log_wage * sw, rcond=None)
    if rank < W.shape[1]:
        from .distreg import _collinear_columns
        bad = _collinear_columns(W, cols)
        raise CollinearDesignError(
            f"wage-stage design is rank deficient; collinear columns: {bad}",
            columns=bad)

    grid = make_threshold_grid(sub.log_wage, grid_policy)
    ldsf = fit_distribution_regression(sub.log_wage, W, grid, sub.weights,
                                       spec=w_spec, rearranged=True)
    return OutcomeFit(ldsf, beta, w_spec, rule, idx, int(idx.size), n_missing)


def lasf_value(fit: OutcomeFit, covariates: Mapping[str, float], v: float) -> float:
    """Conditional-mean structural value w(x, v)'beta at one covariate point.

    This is the average outcome that individuals with control value v would
    have if their observables were set to x.
    """
    if not 0 < v < 1:
        raise ValueError(f"v must lie in (0,1), got {v}")
    one = MicroSample("_", np.array([1.0]), np.array([np.nan]),
                      np.array([[covariates[k] for k in sorted(covariates)]]),
                      tuple(sorted(covariates)))
    row = build_design(one, fit.w_spec, control_values=np.array([float(v)]))
    return float(fit.lasf_rows(row)[0])
