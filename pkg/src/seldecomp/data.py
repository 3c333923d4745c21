"""Samples, covariate schemas, design specifications and design-matrix construction.

A :class:`MicroSample` holds one group's observations in columnar form:
annual hours (0 for nonworkers), log hourly wage (NaN when unobserved),
named covariates, and sampling weights. A :class:`DesignSpec` is a
declarative recipe that turns named covariates (plus, optionally, a
control-function value) into a fixed-dimension regressor row.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np
import pandas as pd
from scipy.special import ndtri

from .errors import ConfigError, DataError

__all__ = [
    "Observation",
    "MicroSample",
    "TrimRule",
    "Term",
    "ControlSpec",
    "DesignSpec",
    "intercept",
    "linear",
    "square",
    "interaction",
    "indicator",
    "build_design",
    "design_columns",
    "validate_sample",
    "ValidationIssue",
    "ValidationReport",
    "read_sample_csv",
    "write_sample_csv",
]

# clip for the normal-quantile control transform; the top worker in each
# group has control value exactly 1 and ndtri(1) is infinite
_V_CLIP = 1e-10


@dataclass(frozen=True)
class Observation:
    """One person: annual hours, log wage (None if unobserved), named covariates.

    Invariants: hours >= 0, and a present log_wage requires hours > 0.
    Violations are representable (so that :func:`validate_sample` can report
    them) but rejected by every estimator.
    """

    hours: float
    log_wage: float | None
    covariates: Mapping[str, float]


class MicroSample:
    """One group's observations in columnar form, immutable after construction.

    Parameters
    ----------
    group_id : str
        Label for the group (e.g. year or year x gender).
    hours : array_like, shape (n,)
        Annual hours; 0 marks a nonworker.
    log_wage : array_like, shape (n,)
        Log hourly wage; NaN where unobserved.
    covariates : array_like, shape (n, k)
        Covariate matrix, one column per name in `covariate_names`.
    covariate_names : sequence of str
    weights : array_like, shape (n,), optional
        Positive sampling weights, default 1.
    require_both_masses : bool
        When True, reject samples that contain only workers or only
        nonworkers (selection-rule estimation needs both).
    """

    __slots__ = ("group_id", "hours", "log_wage", "covariates",
                 "covariate_names", "weights")

    def __init__(self, group_id, hours, log_wage, covariates, covariate_names,
                 weights=None, require_both_masses=False):
        hours = np.ascontiguousarray(hours, dtype=float)
        log_wage = np.ascontiguousarray(log_wage, dtype=float)
        covariates = np.ascontiguousarray(covariates, dtype=float)
        if covariates.ndim != 2:
            covariates = covariates.reshape(len(hours), -1)
        n = hours.shape[0]
        names = tuple(str(c) for c in covariate_names)
        if len(set(names)) != len(names):
            raise DataError(f"duplicate covariate names: {names}")
        if log_wage.shape != (n,) or covariates.shape != (n, len(names)):
            raise DataError("hours, log_wage and covariates must have matching lengths")
        if weights is None:
            weights = np.ones(n)
        else:
            weights = np.ascontiguousarray(weights, dtype=float)
            if weights.shape != (n,):
                raise DataError("weights must have one entry per observation")
            if not np.all(np.isfinite(weights)) or np.any(weights <= 0):
                raise DataError("weights must be finite and strictly positive")
        if require_both_masses and n:
            if not np.any(hours > 0):
                raise DataError(f"group {group_id!r}: no workers (all hours are 0)")
            if not np.any(hours == 0):
                raise DataError(f"group {group_id!r}: no nonworkers (no hours equal to 0); "
                                "pass require_both_masses=False to override")
        for arr in (hours, log_wage, covariates, weights):
            arr.setflags(write=False)
        object.__setattr__(self, "group_id", str(group_id))
        object.__setattr__(self, "hours", hours)
        object.__setattr__(self, "log_wage", log_wage)
        object.__setattr__(self, "covariates", covariates)
        object.__setattr__(self, "covariate_names", names)
        object.__setattr__(self, "weights", weights)

    def __setattr__(self, name, value):
        raise AttributeError("MicroSample is immutable")

    # -- basic views ------------------------------------------------------

    @property
    def n(self):
        return self.hours.shape[0]

    @property
    def worker_mask(self):
        return self.hours > 0

    @property
    def wage_observed_mask(self):
        return ~np.isnan(self.log_wage)

    def covariate(self, name):
        """Column for one covariate name."""
        try:
            j = self.covariate_names.index(name)
        except ValueError:
            raise DataError(f"unknown covariate {name!r}; sample has "
                            f"{self.covariate_names}") from None
        return self.covariates[:, j]

    # -- functional updates -----------------------------------------------

    def subset(self, indices):
        """New sample restricted to `indices` (order preserved)."""
        idx = np.asarray(indices)
        return MicroSample(self.group_id, self.hours[idx], self.log_wage[idx],
                           self.covariates[idx], self.covariate_names,
                           self.weights[idx])

    def with_weights(self, weights):
        return MicroSample(self.group_id, self.hours, self.log_wage,
                           self.covariates, self.covariate_names, weights)

    def with_covariate(self, name, values):
        """New sample with one covariate column replaced."""
        j = self.covariate_names.index(name)
        cov = self.covariates.copy()
        cov[:, j] = np.broadcast_to(values, (self.n,))
        return MicroSample(self.group_id, self.hours, self.log_wage, cov,
                           self.covariate_names, self.weights)

    @classmethod
    def from_observations(cls, group_id, observations: Iterable[Observation],
                          weights=None, require_both_masses=True):
        obs = list(observations)
        if not obs:
            raise DataError("empty observation list")
        names = tuple(sorted(obs[0].covariates))
        for i, o in enumerate(obs):
            if tuple(sorted(o.covariates)) != names:
                raise DataError(f"observation {i} has covariates "
                                f"{sorted(o.covariates)}, expected {list(names)}")
        hours = np.array([o.hours for o in obs], dtype=float)
        lw = np.array([np.nan if o.log_wage is None else o.log_wage for o in obs])
        cov = np.array([[o.covariates[c] for c in names] for o in obs], dtype=float)
        return cls(group_id, hours, lw, cov, names, weights,
                   require_both_masses=require_both_masses)


@dataclass(frozen=True)
class TrimRule:
    """Hours window for the wage-stage sample: keep h_min < H <= h_max.

    h_max defaults to +inf (no upper trimming); h_min_wage_sample lower-censors
    the wage sample while the hours stage keeps everyone.
    """

    h_max: float = math.inf
    h_min_wage_sample: float = 0.0

    def __post_init__(self):
        if not (self.h_max > 0):
            raise ConfigError(f"h_max must be positive, got {self.h_max}")
        if not (0 <= self.h_min_wage_sample < self.h_max):
            raise ConfigError("require 0 <= h_min_wage_sample < h_max, got "
                              f"({self.h_min_wage_sample}, {self.h_max})")

    def to_dict(self):
        h = None if math.isinf(self.h_max) else self.h_max
        return {"h_max": h, "h_min_wage_sample": self.h_min_wage_sample}

    @classmethod
    def from_dict(cls, d):
        h = d.get("h_max")
        return cls(h_max=math.inf if h is None else float(h),
                   h_min_wage_sample=float(d.get("h_min_wage_sample", 0.0)))


# ---------------------------------------------------------------------------
# design specifications


@dataclass(frozen=True)
class Term:
    """One design term. Use the module-level constructors below."""

    kind: str
    names: tuple = ()
    levels: tuple | None = None

    def to_dict(self):
        if self.kind == "intercept":
            return "intercept"
        if self.kind == "linear":
            return {"linear": self.names[0]}
        if self.kind == "square":
            return {"square": self.names[0]}
        if self.kind == "interaction":
            return {"interaction": list(self.names)}
        if self.kind == "indicator":
            return {"indicator": {"name": self.names[0], "levels": list(self.levels)}}
        raise ConfigError(f"unknown term kind {self.kind!r}")


def intercept():
    return Term("intercept")


def linear(name):
    return Term("linear", (str(name),))


def square(name):
    return Term("square", (str(name),))


def interaction(a, b):
    return Term("interaction", (str(a), str(b)))


def indicator(name, levels):
    """Indicator expansion of a categorical covariate.

    Produces one 0/1 column per level after the first; the first listed
    level is the reference category. Matching is exact, so categorical
    variables must be stored with exactly representable codes.
    """
    lv = tuple(float(x) for x in levels)
    if len(lv) < 2:
        raise ConfigError(f"indicator({name!r}) needs at least two levels")
    if len(set(lv)) != len(lv):
        raise ConfigError(f"indicator({name!r}) has duplicate levels {lv}")
    return Term("indicator", (str(name),), lv)


def _term_from_dict(d):
    if d == "intercept" or d == {"intercept": True}:
        return intercept()
    if not isinstance(d, dict) or len(d) != 1:
        raise ConfigError(f"malformed term {d!r}")
    (kind, arg), = d.items()
    if kind == "linear":
        return linear(arg)
    if kind == "square":
        return square(arg)
    if kind == "interaction":
        if not isinstance(arg, (list, tuple)) or len(arg) != 2:
            raise ConfigError(f"interaction term needs two names, got {arg!r}")
        return interaction(*arg)
    if kind == "indicator":
        return indicator(arg["name"], arg["levels"])
    raise ConfigError(f"unknown term kind {kind!r}")


@dataclass(frozen=True)
class ControlSpec:
    """Control-function block of a design: V, V^2, covariate x V interactions,
    and optionally the normal quantile of V."""

    linear: bool = True
    square: bool = True
    interactions: bool = True
    normal_quantile: bool = False

    def to_dict(self):
        return {"linear": self.linear, "square": self.square,
                "interactions": self.interactions,
                "normal_quantile": self.normal_quantile}

    @classmethod
    def from_dict(cls, d):
        return cls(bool(d.get("linear", True)), bool(d.get("square", True)),
                   bool(d.get("interactions", True)),
                   bool(d.get("normal_quantile", False)))


@dataclass(frozen=True)
class DesignSpec:
    """Ordered term list plus an optional control-function block.

    Column order is: base terms in declaration order (indicator terms expand
    in level order, reference level dropped), then V, V^2, the normal
    quantile of V, then one interaction column per non-intercept base column.
    """

    terms: tuple
    control: ControlSpec | None = None

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        kinds = [t.kind for t in self.terms]
        if kinds.count("intercept") > 1:
            raise ConfigError("at most one intercept term")

    @property
    def includes_control(self):
        return self.control is not None

    def covariate_names_used(self):
        out = []
        for t in self.terms:
            out.extend(t.names)
        return tuple(dict.fromkeys(out))

    def to_dict(self):
        return {"terms": [t.to_dict() for t in self.terms],
                "control": None if self.control is None else self.control.to_dict()}

    @classmethod
    def from_dict(cls, d):
        terms = tuple(_term_from_dict(t) for t in d["terms"])
        ctrl = d.get("control")
        return cls(terms, None if ctrl is None else ControlSpec.from_dict(ctrl))


def _base_columns(spec: DesignSpec):
    """Labels of the base (non-control) columns."""
    cols = []
    for t in spec.terms:
        if t.kind == "intercept":
            cols.append("const")
        elif t.kind == "linear":
            cols.append(t.names[0])
        elif t.kind == "square":
            cols.append(f"{t.names[0]}^2")
        elif t.kind == "interaction":
            cols.append(f"{t.names[0]}:{t.names[1]}")
        elif t.kind == "indicator":
            cols.extend(f"{t.names[0]}=={lv:g}" for lv in t.levels[1:])
        else:
            raise ConfigError(f"unknown term kind {t.kind!r}")
    return cols


def design_columns(spec: DesignSpec):
    """Column labels of the design matrix produced by `build_design`."""
    cols = _base_columns(spec)
    if spec.control is not None:
        c = spec.control
        inter_base = [lbl for t, lbls in zip(spec.terms, _labels_per_term(spec))
                      for lbl in lbls if t.kind != "intercept"]
        if c.linear:
            cols.append("v")
        if c.square:
            cols.append("v^2")
        if c.normal_quantile:
            cols.append("qnorm_v")
        if c.interactions:
            cols.extend(f"{lbl}:v" for lbl in inter_base)
    return tuple(cols)


def _labels_per_term(spec):
    per = []
    for t in spec.terms:
        if t.kind == "intercept":
            per.append(["const"])
        elif t.kind == "linear":
            per.append([t.names[0]])
        elif t.kind == "square":
            per.append([f"{t.names[0]}^2"])
        elif t.kind == "interaction":
            per.append([f"{t.names[0]}:{t.names[1]}"])
        elif t.kind == "indicator":
            per.append([f"{t.names[0]}=={lv:g}" for lv in t.levels[1:]])
    return per


def build_design(sample: MicroSample, spec: DesignSpec, control_values=None):
    """Build the (n, d) regressor matrix for `sample` under `spec`.

    `control_values` must be given iff the design includes control terms; it is
    the per-observation control-function value in (0, 1].
    """
    n = sample.n
    for name in spec.covariate_names_used():
        if name not in sample.covariate_names:
            raise DataError(f"design uses unknown covariate {name!r}; sample has "
                            f"{sample.covariate_names}")
    if spec.includes_control and control_values is None:
        raise DataError("spec includes control terms but no control values supplied")
    if not spec.includes_control and control_values is not None:
        raise DataError("control values supplied but spec has no control terms")

    blocks = []
    inter_blocks = []  # non-intercept base columns, for control interactions
    for t in spec.terms:
        if t.kind == "intercept":
            blocks.append(np.ones((n, 1)))
            continue
        if t.kind == "linear":
            col = sample.covariate(t.names[0])[:, None]
        elif t.kind == "square":
            v = sample.covariate(t.names[0])
            col = (v * v)[:, None]
        elif t.kind == "interaction":
            col = (sample.covariate(t.names[0]) * sample.covariate(t.names[1]))[:, None]
        elif t.kind == "indicator":
            v = sample.covariate(t.names[0])
            col = np.column_stack([(v == lv).astype(float) for lv in t.levels[1:]])
        else:
            raise ConfigError(f"unknown term kind {t.kind!r}")
        blocks.append(col)
        inter_blocks.append(col)

    if spec.control is not None:
        v = np.ascontiguousarray(control_values, dtype=float)
        if v.shape != (n,):
            raise DataError(f"control values have shape {v.shape}, expected ({n},)")
        if not np.all(np.isfinite(v)):
            raise DataError("control values contain non-finite entries")
        c = spec.control
        if c.linear:
            blocks.append(v[:, None])
        if c.square:
            blocks.append((v * v)[:, None])
        if c.normal_quantile:
            blocks.append(ndtri(np.clip(v, _V_CLIP, 1 - _V_CLIP))[:, None])
        if c.interactions and inter_blocks:
            base = np.hstack(inter_blocks)
            blocks.append(base * v[:, None])

    X = np.hstack(blocks) if blocks else np.empty((n, 0))
    if not np.all(np.isfinite(X)):
        bad = np.argwhere(~np.isfinite(X))
        i, j = bad[0]
        cols = design_columns(spec)
        raise DataError(f"non-finite design value at row {i}, column {cols[j]!r}")
    return X


# ---------------------------------------------------------------------------
# validation


@dataclass(frozen=True)
class ValidationIssue:
    code: str
    index: int | None
    message: str


@dataclass(frozen=True)
class ValidationReport:
    issues: tuple
    warnings: tuple

    @property
    def ok(self):
        return not self.issues

    def lines(self):
        out = [f"ERROR   [{i.code}] {i.message}" for i in self.issues]
        out += [f"WARNING [{w.code}] {w.message}" for w in self.warnings]
        if not out:
            out = ["ok"]
        return out


def validate_sample(sample: MicroSample) -> ValidationReport:
    """Report-only integrity checks; the sample is never modified.

    Errors: negative hours, wage recorded at zero hours, non-finite
    covariates, no workers. Warnings: no nonworkers (the selection threshold
    at h=0 is then unidentified) and workers with missing wages (kept in the
    hours stage, dropped from the wage stage).
    """
    issues = []
    warns = []
    neg = np.flatnonzero(sample.hours < 0)
    for i in neg[:20]:
        issues.append(ValidationIssue("negative_hours", int(i),
                                      f"observation {i}: negative hours {sample.hours[i]}"))
    bad_wage = np.flatnonzero((sample.hours == 0) & sample.wage_observed_mask)
    for i in bad_wage[:20]:
        issues.append(ValidationIssue("wage_at_zero_hours", int(i),
                                      f"observation {i}: log_wage present with hours=0"))
    if not np.all(np.isfinite(sample.covariates)):
        rows = np.flatnonzero(~np.isfinite(sample.covariates).all(axis=1))
        for i in rows[:20]:
            issues.append(ValidationIssue("nonfinite_covariate", int(i),
                                          f"observation {i}: non-finite covariate value"))
    nonneg = sample.hours[sample.hours >= 0]
    if nonneg.size and not np.any(nonneg > 0):
        issues.append(ValidationIssue("no_workers", None, "no observations with hours > 0"))
    if nonneg.size and not np.any(nonneg == 0):
        warns.append(ValidationIssue(
            "no_nonworkers", None,
            "no nonworkers; selection threshold at h=0 unidentified"))
    n_missing = int(np.sum(sample.worker_mask & ~sample.wage_observed_mask))
    if n_missing:
        warns.append(ValidationIssue(
            "missing_wage_workers", None,
            f"{n_missing} workers lack log_wage; they enter the hours stage only"))
    return ValidationReport(tuple(issues), tuple(warns))


# ---------------------------------------------------------------------------
# CSV interface: required column `hours`, optional `log_wage` (empty =
# unobserved), every other column a covariate. Header row mandatory, UTF-8,
# '.' decimal separator.


def read_sample_csv(path, group_id=None, weight_column=None,
                    require_both_masses=True) -> MicroSample:
    """Load one group from CSV.

    `weight_column`, when given, names the sampling-weight column; it is then
    excluded from the covariates.
    """
    try:
        df = pd.read_csv(path, encoding="utf-8")
    except (OSError, pd.errors.ParserError, UnicodeDecodeError) as e:
        raise DataError(f"cannot read {path}: {e}") from e
    if "hours" not in df.columns:
        raise DataError(f"{path}: required column 'hours' missing")
    if group_id is None:
        group_id = str(path)
    cov_cols = [c for c in df.columns if c not in ("hours", "log_wage")
                and c != weight_column]
    try:
        hours = df["hours"].astype(float).to_numpy()
        if "log_wage" in df.columns:
            lw = pd.to_numeric(df["log_wage"], errors="raise").astype(float).to_numpy()
        else:
            lw = np.full(len(df), np.nan)
        cov = df[cov_cols].astype(float).to_numpy() if cov_cols else np.empty((len(df), 0))
        weights = None
        if weight_column is not None:
            if weight_column not in df.columns:
                raise DataError(f"{path}: weight column {weight_column!r} missing")
            weights = df[weight_column].astype(float).to_numpy()
    except (ValueError, TypeError) as e:
        raise DataError(f"{path}: non-numeric value: {e}") from e
    if np.any(np.isnan(hours)):
        raise DataError(f"{path}: missing values in 'hours'")
    return MicroSample(group_id, hours, lw, cov, cov_cols, weights,
                       require_both_masses=require_both_masses)


def write_sample_csv(sample: MicroSample, path):
    """Write a sample in the ingestion layout; deterministic byte-for-byte."""
    with open(path, "w", newline="\n", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(["hours", "log_wage", *sample.covariate_names])
        for i in range(sample.n):
            lw = sample.log_wage[i]
            w.writerow([repr(float(sample.hours[i])),
                        "" if np.isnan(lw) else repr(float(lw)),
                        *(repr(float(x)) for x in sample.covariates[i])])
