"""Binary logit maximum likelihood and distribution regression.

A distribution regression fits one weighted logit per threshold c of a grid,
with outcome 1{value <= c}. Thresholds where that indicator is constant are
stored as analytic 0/1 evaluators (the MLE does not exist there). Because
per-threshold fits carry no monotonicity constraint, conditional CDF curves
are repaired by monotone rearrangement (sorting) per evaluation row.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.special import expit, log_expit

from .data import DesignSpec, design_columns
from .errors import (CollinearDesignError, ConvergenceError, DataError,
                     EstimationError, PerfectSeparationError)

__all__ = [
    "LogitFit",
    "DRFit",
    "GridPolicy",
    "fit_logit",
    "fit_distribution_regression",
    "evaluate_cdf",
    "rearrange_monotone",
    "quantile_from_curve",
    "GridQuantile",
    "make_threshold_grid",
]

SCORE_TOL = 1e-8
MAX_ITER = 100
RIDGE = 1e-10
SEPARATION_PROB_TOL = 1e-6


@dataclass(frozen=True)
class LogitFit:
    """Weighted Bernoulli MLE under the logistic link.

    `score_norm` is the max-abs entry of the log-likelihood gradient at the
    returned coefficients; `loglik_path` records the log likelihood at the
    start and after each accepted step.
    """

    coefficients: np.ndarray
    converged: bool
    score_norm: float
    iterations: int
    loglik_path: np.ndarray


def _collinear_columns(X, names):
    """Names of columns past the numerical rank, via pivoted QR."""
    from scipy.linalg import qr

    _, R, piv = qr(X, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    tol = diag.max() * max(X.shape) * np.finfo(float).eps if diag.size else 0.0
    rank = int(np.sum(diag > tol))
    extra = piv[rank:]
    if names is None:
        names = [f"col{j}" for j in range(X.shape[1])]
    return [names[j] for j in sorted(extra)]


def fit_logit(outcome, design, weights=None, *, tol=SCORE_TOL,
              max_iter=MAX_ITER, start=None, column_names=None) -> LogitFit:
    """Maximize the weighted Bernoulli log likelihood with logistic link.

    Damped Newton with step halving; if the information matrix stays singular
    after a ridge jitter the step falls back to scaled gradient ascent.
    Near the optimum the likelihood improvement drops below float resolution
    while the score still contracts quadratically, so the line search accepts
    any step that does not decrease the likelihood beyond that resolution.

    Raises
    ------
    PerfectSeparationError
        If the likelihood is unbounded (fitted probabilities all within 1e-6
        of {0,1} with diverging coefficient norm, or a one-class outcome).
    CollinearDesignError
        If the design is rank deficient, naming the offending columns.
    ConvergenceError
        If the score tolerance is not met within `max_iter`, carrying the
        best iterate.
    """
    y = np.asarray(outcome, dtype=float).ravel()
    X = np.asarray(design, dtype=float)
    n, d = X.shape
    if y.shape[0] != n:
        raise DataError(f"outcome length {y.shape[0]} != design rows {n}")
    if not np.all(np.isfinite(X)):
        raise DataError("design matrix contains non-finite values")
    if not np.all((y == 0) | (y == 1)):
        raise DataError("outcome must be binary 0/1")
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=float)

    ones = float(y.sum())
    if ones == 0 or ones == n:
        label = "0" if ones == 0 else "1"
        sign = -1.0 if ones == 0 else 1.0
        direction, *_ = np.linalg.lstsq(X, sign * np.ones(n), rcond=None)
        nrm = np.linalg.norm(direction)
        raise PerfectSeparationError(
            f"outcome is constant ({label}); likelihood supremum not attained",
            direction=direction / nrm if nrm > 0 else direction)

    beta = np.zeros(d) if start is None else np.asarray(start, dtype=float).copy()

    def loglik(eta):
        return float(np.sum(w * (y * log_expit(eta) + (1 - y) * log_expit(-eta))))

    eta = X @ beta
    ll = loglik(eta)
    path = [ll]
    prev_norm = np.linalg.norm(beta)
    rank_checked = False
    it = 0
    score_norm = np.inf
    for it in range(1, max_iter + 1):
        p = expit(eta)
        g = X.T @ (w * (y - p))
        score_norm = float(np.max(np.abs(g)))
        if score_norm <= tol:
            return LogitFit(beta, True, score_norm, it - 1, np.asarray(path))

        # separation: all probabilities at the poles and a growing iterate
        norm = np.linalg.norm(beta)
        if it > 1 and norm > prev_norm and float(np.minimum(p, 1 - p).max()) < SEPARATION_PROB_TOL:
            raise PerfectSeparationError(
                "perfect separation: fitted probabilities within "
                f"{SEPARATION_PROB_TOL:g} of 0/1 with diverging coefficients",
                direction=beta / norm)
        prev_norm = norm

        wdiag = w * p * (1 - p)
        hess = (X * wdiag[:, None]).T @ X
        try:
            step = np.linalg.solve(hess, g)
        except np.linalg.LinAlgError:
            if not rank_checked:
                rank_checked = True
                bad = _collinear_columns(X, column_names)
                if bad:
                    raise CollinearDesignError(
                        f"singular information matrix; collinear columns: {bad}",
                        columns=bad) from None
            try:
                step = np.linalg.solve(hess + RIDGE * np.eye(d), g)
            except np.linalg.LinAlgError:
                # scaled gradient ascent keeps making progress
                step = g / max(1.0, float(np.max(np.abs(wdiag @ (X * X)))))

        # step halving; accept non-decrease within float resolution of ll
        ll_slack = 8 * np.finfo(float).eps * (1 + abs(ll))
        t = 1.0
        accepted = False
        for _ in range(40):
            cand = beta + t * step
            eta_c = X @ cand
            ll_c = loglik(eta_c)
            if ll_c >= ll - ll_slack:
                accepted = True
                break
            t *= 0.5
        if not accepted:
            break
        beta, eta, ll = cand, eta_c, ll_c
        path.append(ll)

    g = X.T @ (w * (y - expit(X @ beta)))
    score_norm = float(np.max(np.abs(g)))
    if score_norm <= tol:
        return LogitFit(beta, True, score_norm, it, np.asarray(path))
    best = LogitFit(beta, False, score_norm, it, np.asarray(path))
    raise ConvergenceError(
        f"no convergence after {it} iterations (score {score_norm:.3e} > {tol:g})",
        best=best)


# ---------------------------------------------------------------------------
# threshold grids


@dataclass(frozen=True)
class GridPolicy:
    """How to build a threshold grid from a regressand.

    If the regressand has at most `max_points` distinct values the grid is
    all of them; otherwise `max_points` quantile-spaced points (endpoints
    included). `force_points` and the `top_frequency` most frequent values
    are added when they fall inside the observed range.

    `min_tail_count` drops thresholds whose split leaves fewer observations
    than that on either side, because a handful of extreme points in a
    multi-column design is routinely perfectly separable and the logit MLE
    then fails to exist. Fully degenerate endpoints (indicator all 0 or all
    1, evaluated analytically) and forced points are exempt. Counts are
    unweighted, so grids are invariant under bootstrap reweighting.
    """

    max_points: int = 200
    force_points: tuple = ()
    top_frequency: int = 0
    min_tail_count: int = 5

    def to_dict(self):
        return {"max_points": self.max_points,
                "force_points": list(self.force_points),
                "top_frequency": self.top_frequency,
                "min_tail_count": self.min_tail_count}

    @classmethod
    def from_dict(cls, d):
        return cls(int(d.get("max_points", 200)),
                   tuple(float(x) for x in d.get("force_points", ())),
                   int(d.get("top_frequency", 0)),
                   int(d.get("min_tail_count", 5)))


HOURS_GRID = GridPolicy(max_points=200, force_points=(0.0,), top_frequency=50)
OUTCOME_GRID = GridPolicy(max_points=150)


def make_threshold_grid(values, policy: GridPolicy = GridPolicy()) -> np.ndarray:
    """Strictly increasing grid over the observed support of `values`."""
    vals = np.asarray(values, dtype=float)
    if vals.size == 0:
        raise DataError("cannot build a grid from an empty vector")
    n = vals.size
    uniq, counts = np.unique(vals, return_counts=True)
    if uniq.size <= policy.max_points:
        grid = uniq
    else:
        qs = np.quantile(vals, np.linspace(0.0, 1.0, policy.max_points))
        grid = np.unique(qs)
    if policy.top_frequency > 0 and uniq.size > grid.size:
        order = np.lexsort((uniq, -counts))  # most frequent first, ties by value
        grid = np.unique(np.concatenate([grid, uniq[order[:policy.top_frequency]]]))
    if policy.min_tail_count > 0:
        cum = np.cumsum(counts)
        below = cum[np.searchsorted(uniq, grid, side="right") - 1]
        tail = np.minimum(below, n - below)
        keep = (tail >= policy.min_tail_count) | (below == 0) | (below == n)
        grid = grid[keep]
    if policy.force_points:
        e = np.asarray(policy.force_points, dtype=float)
        e = e[(e >= uniq[0]) & (e <= uniq[-1])]
        grid = np.unique(np.concatenate([grid, e]))
    if grid.size == 0:
        raise DataError("grid policy removed every threshold; lower min_tail_count")
    return grid


# ---------------------------------------------------------------------------
# distribution regression


@dataclass(frozen=True)
class DRFit:
    """A fitted distribution regression: one coefficient vector per threshold.

    `degenerate[j]` is -1 where the indicator was all zero (CDF value 0), +1
    where all one (CDF value 1), and 0 for fitted thresholds. When
    `rearranged` is set, evaluation sorts each row's per-threshold
    probability curve ascending before lookup.
    """

    thresholds: np.ndarray
    coefficients: np.ndarray  # (m, d)
    degenerate: np.ndarray    # (m,) int8
    spec: DesignSpec | None
    rearranged: bool = True
    column_names: tuple | None = None

    @property
    def n_thresholds(self):
        return self.thresholds.shape[0]

    @property
    def dim(self):
        return self.coefficients.shape[1]

    def curves(self, rows) -> np.ndarray:
        """Per-row probability curves over the grid, shape (n_rows, m).

        Applies the analytic 0/1 values at degenerate thresholds and, when
        `rearranged`, sorts each row ascending.
        """
        rows = np.atleast_2d(np.asarray(rows, dtype=float))
        if rows.shape[1] != self.dim:
            raise DataError(f"row dimension {rows.shape[1]} != fit dimension {self.dim}")
        probs = expit(rows @ self.coefficients.T)
        if np.any(self.degenerate != 0):
            probs[:, self.degenerate == -1] = 0.0
            probs[:, self.degenerate == 1] = 1.0
        if self.rearranged:
            probs.sort(axis=1)
        return probs

    def to_dict(self):
        return {"thresholds": self.thresholds.tolist(),
                "coefficients": self.coefficients.tolist(),
                "degenerate": self.degenerate.tolist(),
                "spec": None if self.spec is None else self.spec.to_dict(),
                "rearranged": self.rearranged,
                "column_names": None if self.column_names is None
                else list(self.column_names)}

    @classmethod
    def from_dict(cls, d):
        spec = d.get("spec")
        cols = d.get("column_names")
        return cls(np.asarray(d["thresholds"], dtype=float),
                   np.asarray(d["coefficients"], dtype=float),
                   np.asarray(d["degenerate"], dtype=np.int8),
                   None if spec is None else DesignSpec.from_dict(spec),
                   bool(d["rearranged"]),
                   None if cols is None else tuple(cols))


def fit_distribution_regression(values, design, grid, weights=None, *,
                                spec: DesignSpec | None = None,
                                rearranged: bool = True,
                                column_names=None) -> DRFit:
    """Fit one weighted logit of 1{value <= c} per grid threshold c.

    The grid must be strictly increasing and lie within the closed range of
    `values`. Adjacent thresholds are warm-started from each other. Logit
    errors are re-raised with the offending threshold attached.
    """
    vals = np.asarray(values, dtype=float).ravel()
    X = np.asarray(design, dtype=float)
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise DataError("threshold grid must be a nonempty 1-d vector")
    if np.any(np.diff(grid) <= 0):
        raise DataError("threshold grid must be strictly increasing")
    if grid[0] < vals.min() or grid[-1] > vals.max():
        raise DataError("threshold grid extends beyond the observed range "
                        f"[{vals.min()}, {vals.max()}]")
    if column_names is None and spec is not None:
        column_names = design_columns(spec)
    m = grid.shape[0]
    n, d = X.shape
    coefs = np.zeros((m, d))
    flags = np.zeros(m, dtype=np.int8)
    start = None
    for j, c in enumerate(grid):
        y = vals <= c
        ones = int(y.sum())
        if ones == 0:
            flags[j] = -1
            continue
        if ones == n:
            flags[j] = 1
            continue
        try:
            fit = fit_logit(y.astype(float), X, weights, start=start,
                            column_names=column_names)
        except EstimationError as e:
            e.threshold = float(c)
            e.args = (f"threshold {c:g}: {e.args[0]}",) + e.args[1:]
            raise
        coefs[j] = fit.coefficients
        start = fit.coefficients
    return DRFit(grid, coefs, flags, spec, rearranged,
                 None if column_names is None else tuple(column_names))


def rearrange_monotone(fit: DRFit, row) -> np.ndarray:
    """Sorted (ascending) per-threshold probabilities for one row.

    Preserves the multiset of values and is idempotent.
    """
    rearranged = fit if fit.rearranged else DRFit(
        fit.thresholds, fit.coefficients, fit.degenerate, fit.spec, True,
        fit.column_names)
    return rearranged.curves(np.atleast_2d(row))[0]


def evaluate_cdf(fit: DRFit, row, c) -> float:
    """Conditional CDF value at threshold argument `c` for one regressor row.

    Step-function convention: the value at the largest grid threshold <= c;
    0 below the grid. At or above the top threshold this is 1 exactly when
    that threshold is the regressand maximum (its indicator is degenerate).
    """
    idx = int(np.searchsorted(fit.thresholds, c, side="right")) - 1
    if idx < 0:
        return 0.0
    curve = fit.curves(np.atleast_2d(row))[0]
    return float(curve[idx])


class GridQuantile(NamedTuple):
    value: float
    saturated: bool


def quantile_from_curve(grid, probs, tau) -> GridQuantile:
    """Left-inverse of a monotone curve on a grid.

    Returns the smallest grid point whose probability is >= tau; when tau
    exceeds the top probability, the top grid point with `saturated` set.
    """
    if not 0 < tau < 1:
        raise ValueError(f"tau must lie in (0,1), got {tau}")
    grid = np.asarray(grid, dtype=float)
    probs = np.asarray(probs, dtype=float)
    if grid.shape != probs.shape:
        raise DataError("grid and probs must have equal length")
    idx = int(np.searchsorted(probs, tau, side="left"))
    if idx >= probs.shape[0]:
        return GridQuantile(float(grid[-1]), True)
    return GridQuantile(float(grid[idx]), False)
