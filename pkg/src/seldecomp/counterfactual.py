"""Stage 3: counterfactual distributions and the three-term decomposition.

A counterfactual combines three groups: group t contributes the conditional
outcome distribution, group k the joint distribution of covariates and
control function, and group r the selection rule. The curve averages group
t's conditional-CDF model over group k's trimmed wage sample, keeping only
rows whose control value exceeds group r's fitted probability of working
zero hours at their covariates. Differencing quantiles across the four
triples <1,1,1>, <1,1,0>, <1,0,0>, <0,0,0> splits a change between two
groups into selection, composition and structural effects that telescope to
the total by construction.

The composition average runs over group k's selected sample, so the
counterfactual is the intended estimand when group r's selection rule is
(weakly) more restrictive than group k's; choose the lowest-participation
group as the base.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .control import ControlFit
from .data import DesignSpec, MicroSample, TrimRule, build_design
from .distreg import GridPolicy, GridQuantile, HOURS_GRID, OUTCOME_GRID, \
    quantile_from_curve
from .errors import ConfigError, DataError, EmptySelectionError
from .outcome import OutcomeFit, fit_outcome
from .control import estimate_control

__all__ = [
    "GroupFit",
    "fit_group",
    "CounterfactualCurve",
    "counterfactual_cdf",
    "counterfactual_lasf_mean",
    "DecompResult",
    "MeanDecomposition",
    "decompose",
    "decompose_mean",
    "RatioDecompResult",
    "decompose_ratio",
    "decompose_between",
    "ate_education",
    "support_coverage",
]

COMPONENTS = ("selection", "composition", "structural", "total")


@dataclass(frozen=True)
class GroupFit:
    """Everything estimated for one group, plus the sample it came from."""

    group_id: str
    sample: MicroSample
    control: ControlFit
    outcome: OutcomeFit


def fit_group(sample: MicroSample, r_spec: DesignSpec, w_spec: DesignSpec,
              trim: TrimRule = TrimRule(), *,
              hours_grid: GridPolicy = HOURS_GRID,
              outcome_grid: GridPolicy = OUTCOME_GRID,
              smoothing_seed=None, pinned_p0=None) -> GroupFit:
    """Run stages 1 and 2 for one group."""
    control = estimate_control(sample, r_spec, grid_policy=hours_grid,
                               smoothing_seed=smoothing_seed, pinned_p0=pinned_p0)
    out = fit_outcome(sample, control, w_spec, trim, outcome_grid)
    return GroupFit(sample.group_id, sample, control, out)


@dataclass(frozen=True)
class CounterfactualCurve:
    """Monotone counterfactual distribution over an outcome grid."""

    triple: tuple
    grid: np.ndarray
    probs: np.ndarray
    n_selected: int

    def quantile(self, tau) -> GridQuantile:
        return quantile_from_curve(self.grid, self.probs, tau)


def support_coverage(k_rows: np.ndarray, r_sample: MicroSample,
                     names: Sequence[str]) -> int:
    """Count k rows outside the per-covariate range observed in group r.

    A box check, not a convex hull: cheap and sufficient to flag obvious
    extrapolation of group r's selection rule.
    """
    out = np.zeros(k_rows.shape[0], dtype=bool)
    for j, name in enumerate(names):
        col = r_sample.covariate(name)
        out |= (k_rows[:, j] < col.min()) | (k_rows[:, j] > col.max())
    return int(out.sum())


def _composition_block(t: GroupFit, k: GroupFit, r: GroupFit):
    """Shared assembly: k's trimmed rows under t's wage design, r's rule."""
    idx = k.outcome.trimmed_indices
    sub = k.sample.subset(idx)
    v = k.control.v_hat[idx]
    try:
        rows_w = build_design(sub, t.outcome.w_spec, control_values=v)
    except DataError as e:
        raise DataError(f"group {k.group_id!r} rows are incompatible with group "
                        f"{t.group_id!r}'s wage design: {e}") from e
    if rows_w.shape[1] != t.outcome.lasf_coefficients.shape[0]:
        raise DataError("wage-design dimension mismatch between groups "
                        f"{t.group_id!r} and {k.group_id!r}")
    if r is not k:
        names = r.control.spec.covariate_names_used()
        n_out = support_coverage(
            np.column_stack([sub.covariate(nm) for nm in names]) if names
            else np.empty((sub.n, 0)), r.sample, names)
        if n_out:
            warnings.warn(
                f"{n_out} of {sub.n} group-{k.group_id!r} rows fall outside "
                f"group-{r.group_id!r}'s observed covariate ranges; the "
                "counterfactual selection rule extrapolates there", stacklevel=3)
    p0_r = r.control.p0_hat[idx] if r is k else r.control.p0_on(sub)
    passing = v > p0_r
    if not np.any(passing):
        raise EmptySelectionError(
            f"no group-{k.group_id!r} row passes group-{r.group_id!r}'s selection rule")
    return sub, rows_w, passing


def counterfactual_cdf(t: GroupFit, k: GroupFit, r: GroupFit,
                       y_grid=None) -> CounterfactualCurve:
    """Counterfactual outcome distribution for the triple (t, k, r).

    Weighted average of group t's rearranged conditional CDF curves over
    group k's trimmed rows that pass group r's selection rule, evaluated on
    `y_grid` (default: group t's fitted thresholds) by the step-function
    convention. Assumes the caller has checked the support conditions; a
    box-coverage diagnostic warns about obvious violations.
    """
    sub, rows_w, passing = _composition_block(t, k, r)
    curves = t.outcome.ldsf.curves(rows_w[passing])       # (np, m_t), rearranged
    w = sub.weights[passing]
    own = (w[:, None] * curves).sum(axis=0) / w.sum()     # monotone: avg of sorted
    thresholds = t.outcome.ldsf.thresholds
    if y_grid is None:
        grid = thresholds
        probs = own
    else:
        grid = np.asarray(y_grid, dtype=float)
        pos = np.searchsorted(thresholds, grid, side="right") - 1
        probs = np.where(pos < 0, 0.0, own[np.maximum(pos, 0)])
    probs = np.maximum.accumulate(probs)  # guard against float ripples
    return CounterfactualCurve((t.group_id, k.group_id, r.group_id),
                               grid, probs, int(passing.sum()))


def counterfactual_lasf_mean(t: GroupFit, k: GroupFit, r: GroupFit) -> float:
    """Mean-level counterfactual: group t's fitted conditional mean averaged
    over group k's selected rows passing group r's rule."""
    sub, rows_w, passing = _composition_block(t, k, r)
    w = sub.weights[passing]
    return float(np.sum(w * (rows_w[passing] @ t.outcome.lasf_coefficients)) / w.sum())


# ---------------------------------------------------------------------------
# decompositions


@dataclass(frozen=True)
class DecompResult:
    """Per-percentile effects in log-outcome units.

    selection + composition + structural equals total up to float rounding;
    group0 is both the comparison group and the base selection rule.
    """

    tau: float
    selection: float
    composition: float
    structural: float
    total: float
    group1: str
    group0: str

    def component(self, name):
        return getattr(self, name)

    def as_tuple(self):
        return (self.selection, self.composition, self.structural, self.total)


@dataclass(frozen=True)
class MeanDecomposition:
    selection: float
    composition: float
    structural: float
    total: float
    group1: str
    group0: str


def _union_grid(g1: GroupFit, g0: GroupFit) -> np.ndarray:
    return np.union1d(g1.outcome.ldsf.thresholds, g0.outcome.ldsf.thresholds)


def decompose(g1: GroupFit, g0: GroupFit, taus) -> list[DecompResult]:
    """Three-term decomposition of quantile changes from g0 to g1.

    All four counterfactual curves are evaluated on the union of the two
    groups' outcome grids so that quantiles difference on a common grid.
    """
    taus = [float(t) for t in taus]
    for t in taus:
        if not 0 < t < 1:
            raise ConfigError(f"tau must lie in (0,1), got {t}")
    grid = _union_grid(g1, g0)
    c111 = counterfactual_cdf(g1, g1, g1, grid)
    c110 = counterfactual_cdf(g1, g1, g0, grid)
    c100 = counterfactual_cdf(g1, g0, g0, grid)
    c000 = counterfactual_cdf(g0, g0, g0, grid)
    out = []
    for tau in taus:
        q111 = c111.quantile(tau).value
        q110 = c110.quantile(tau).value
        q100 = c100.quantile(tau).value
        q000 = c000.quantile(tau).value
        out.append(DecompResult(tau,
                                selection=q111 - q110,
                                composition=q110 - q100,
                                structural=q100 - q000,
                                total=q111 - q000,
                                group1=g1.group_id, group0=g0.group_id))
    return out


def decompose_mean(g1: GroupFit, g0: GroupFit) -> MeanDecomposition:
    """Same decomposition at the mean, via the fitted conditional means."""
    m111 = counterfactual_lasf_mean(g1, g1, g1)
    m110 = counterfactual_lasf_mean(g1, g1, g0)
    m100 = counterfactual_lasf_mean(g1, g0, g0)
    m000 = counterfactual_lasf_mean(g0, g0, g0)
    return MeanDecomposition(m111 - m110, m110 - m100, m100 - m000,
                             m111 - m000, g1.group_id, g0.group_id)


@dataclass(frozen=True)
class RatioDecompResult:
    """Decomposition of the log quantile ratio between two percentiles."""

    tau_hi: float
    tau_lo: float
    selection: float
    composition: float
    structural: float
    total: float
    group1: str
    group0: str

    def as_tuple(self):
        return (self.selection, self.composition, self.structural, self.total)


def decompose_ratio(g1: GroupFit, g0: GroupFit, tau_hi=0.9,
                    tau_lo=0.1) -> RatioDecompResult:
    """Decompose the change in the log decile-type ratio q(tau_hi)/q(tau_lo).

    In log-outcome units the ratio is a difference of quantiles, so each
    component is the difference of its values at the two percentiles and the
    telescoping identity is inherited.
    """
    if not tau_lo < tau_hi:
        raise ConfigError(f"need tau_lo < tau_hi, got ({tau_lo}, {tau_hi})")
    lo, hi = decompose(g1, g0, [tau_lo, tau_hi])
    return RatioDecompResult(tau_hi, tau_lo,
                             hi.selection - lo.selection,
                             hi.composition - lo.composition,
                             hi.structural - lo.structural,
                             hi.total - lo.total,
                             g1.group_id, g0.group_id)


def decompose_between(family1: Sequence[GroupFit], family0: Sequence[GroupFit],
                      taus, base1: GroupFit, base0: GroupFit) -> list[list[DecompResult]]:
    """Per-period differences between two group families' decompositions.

    Families are paired by position; each family's periods are decomposed
    against that family's own base. The result per period and tau is the
    component-wise family-1 minus family-0 difference.
    """
    if len(family1) != len(family0):
        raise ConfigError(f"mismatched period coverage: {len(family1)} vs "
                          f"{len(family0)} periods")
    out = []
    for ga, gb in zip(family1, family0):
        da = decompose(ga, base1, taus)
        db = decompose(gb, base0, taus)
        rows = [DecompResult(a.tau,
                             a.selection - b.selection,
                             a.composition - b.composition,
                             a.structural - b.structural,
                             a.total - b.total,
                             group1=ga.group_id, group0=gb.group_id)
                for a, b in zip(da, db)]
        out.append(rows)
    return out


def ate_education(fit: GroupFit, educ_var: str, e0, e) -> float:
    """Average effect of moving the education level from e0 to e.

    Averages the fitted conditional mean with the education indicators set to
    level e over the subsample at level e, minus the same at e0 over the
    subsample at e0 - two different evaluation subsamples, each holding the
    other covariates and the control value at the individual's own values.
    """
    spec = fit.outcome.w_spec
    term = next((t for t in spec.terms
                 if t.kind == "indicator" and t.names[0] == educ_var), None)
    if term is None:
        raise ConfigError(f"wage design has no indicator expansion of {educ_var!r}")
    e0, e = float(e0), float(e)
    for lv in (e0, e):
        if lv not in term.levels:
            raise DataError(f"unknown education level {lv:g}; design levels are "
                            f"{term.levels}")
    idx = fit.outcome.trimmed_indices
    sub = fit.sample.subset(idx)
    v = fit.control.v_hat[idx]
    levels_col = sub.covariate(educ_var)

    def level_mean(level):
        mask = levels_col == level
        if not np.any(mask):
            raise DataError(f"no trimmed observations with {educ_var}=={level:g}")
        forced = sub.with_covariate(educ_var, np.full(sub.n, level))
        rows = build_design(forced, spec, control_values=v)
        preds = fit.outcome.lasf_rows(rows)
        w = sub.weights[mask]
        return float(np.sum(w * preds[mask]) / w.sum())

    return level_mean(e) - level_mean(e0)
