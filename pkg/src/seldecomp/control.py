"""Stage 1: control function from a distribution regression of annual hours.

The hours distribution regression is fitted on the full sample, workers and
nonworkers alike, with lower indicator 1{H <= h}. That makes the fitted
value at threshold 0 an estimate of P(H = 0 | Z) - the per-observation
selection threshold - and makes each worker's fitted CDF value at their own
hours a total-population conditional CDF, which is the control function.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import DesignSpec, MicroSample, build_design
from .distreg import DRFit, GridPolicy, HOURS_GRID, fit_distribution_regression, \
    make_threshold_grid
from .errors import ConfigError, DataError

__all__ = ["ControlFit", "estimate_control"]


@dataclass(frozen=True)
class ControlFit:
    """Estimated control function for one group.

    `v_hat` is NaN for nonworkers. When noise smoothing is on, `v_hat` holds
    the smoothed values (used downstream by default) and `v_hat_presmooth`
    the raw rearranged-CDF values; otherwise `v_hat_presmooth` is None.
    `p0_hat` is the rearranged CDF value at hours 0 for every observation
    (or the pinned constant when the sample has no nonworkers).
    """

    hours_fit: DRFit
    v_hat: np.ndarray
    v_hat_presmooth: np.ndarray | None
    p0_hat: np.ndarray
    worker_mask: np.ndarray
    noise_smoothed: bool
    pinned_p0: float | None = None

    @property
    def spec(self) -> DesignSpec:
        return self.hours_fit.spec

    def p0_on(self, sample: MicroSample) -> np.ndarray:
        """Selection threshold P(H=0|Z) under this fit, evaluated on any sample."""
        if self.pinned_p0 is not None:
            return np.full(sample.n, self.pinned_p0)
        rows = build_design(sample, self.spec)
        curves = self.hours_fit.curves(rows)
        i0 = int(np.searchsorted(self.hours_fit.thresholds, 0.0, side="right")) - 1
        if i0 < 0:
            return np.zeros(sample.n)
        return curves[:, i0]

    def to_dict(self):
        return {"hours_fit": self.hours_fit.to_dict(),
                "v_hat": self.v_hat.tolist(),
                "v_hat_presmooth": None if self.v_hat_presmooth is None
                else self.v_hat_presmooth.tolist(),
                "p0_hat": self.p0_hat.tolist(),
                "worker_mask": self.worker_mask.astype(int).tolist(),
                "noise_smoothed": self.noise_smoothed,
                "pinned_p0": self.pinned_p0}

    @classmethod
    def from_dict(cls, d):
        vp = d.get("v_hat_presmooth")
        pin = d.get("pinned_p0")
        return cls(DRFit.from_dict(d["hours_fit"]),
                   np.asarray(d["v_hat"], dtype=float),
                   None if vp is None else np.asarray(vp, dtype=float),
                   np.asarray(d["p0_hat"], dtype=float),
                   np.asarray(d["worker_mask"], dtype=bool),
                   bool(d["noise_smoothed"]),
                   None if pin is None else float(pin))


def estimate_control(sample: MicroSample, r_spec: DesignSpec, *,
                     grid_policy: GridPolicy = HOURS_GRID,
                     smoothing_seed=None, pinned_p0=None) -> ControlFit:
    """Estimate the control function and selection thresholds for one group.

    For worker i, v_hat is the rearranged fitted CDF evaluated at the largest
    grid threshold <= H_i; the policy forces hours 0 and the most frequent
    hour values into the grid so that mass points evaluate exactly.

    When `smoothing_seed` is given, each worker's v_hat is redrawn uniformly
    between the CDF value at the grid point just below their hours and their
    v_hat, which spreads the control-function mass created by hour mass
    points (e.g. 2080) without breaking the within-row hours ordering.

    `pinned_p0` replaces the estimated selection threshold with a constant;
    it is required when the sample contains no nonworkers.
    """
    if r_spec.includes_control:
        raise ConfigError("the hours-stage design cannot include control terms")
    hours = sample.hours
    if np.any(hours < 0) or not np.all(np.isfinite(hours)):
        raise DataError("hours must be finite and nonnegative")
    workers = hours > 0
    if not np.any(workers):
        raise DataError("sample has no workers; nothing to estimate")
    has_nonworkers = bool(np.any(hours == 0))
    if not has_nonworkers and pinned_p0 is None:
        raise DataError("sample has no nonworkers and no pinned p0; the "
                        "selection threshold at h=0 is unidentified")
    if has_nonworkers and pinned_p0 is not None:
        raise ConfigError("pinned_p0 is only allowed when the sample has no nonworkers")
    if pinned_p0 is not None and not 0 <= pinned_p0 < 1:
        raise ConfigError(f"pinned_p0 must lie in [0,1), got {pinned_p0}")

    rows = build_design(sample, r_spec)
    grid = make_threshold_grid(hours, grid_policy)
    hours_fit = fit_distribution_regression(hours, rows, grid, sample.weights,
                                            spec=r_spec, rearranged=True)
    curves = hours_fit.curves(rows)  # (n, m), rearranged
    pos = np.searchsorted(grid, hours, side="right") - 1  # >= 0: hours >= grid[0]
    n = sample.n
    v_hat = np.full(n, np.nan)
    widx = np.flatnonzero(workers)
    v_hat[widx] = curves[widx, pos[widx]]

    if pinned_p0 is not None:
        p0_hat = np.full(n, float(pinned_p0))
    else:
        i0 = int(np.searchsorted(grid, 0.0, side="right")) - 1
        p0_hat = curves[:, i0]

    v_pre = None
    smoothed = smoothing_seed is not None
    if smoothed:
        v_pre = v_hat.copy()
        rng = np.random.default_rng(smoothing_seed)
        lo = np.where(pos[widx] >= 1, curves[widx, np.maximum(pos[widx] - 1, 0)], 0.0)
        v_hat[widx] = lo + rng.uniform(size=widx.size) * (v_hat[widx] - lo)

    return ControlFit(hours_fit, v_hat, v_pre, p0_hat, workers, smoothed,
                      None if pinned_p0 is None else float(pinned_p0))
