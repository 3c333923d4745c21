"""Weighted-bootstrap uncertainty bands for decomposition outputs.

Each replicate draws i.i.d. positive mean-one weights per observation and
per group, multiplies them into the sampling weights, and repeats every
estimation stage - control function, wage stage, counterfactuals - before
recomputing the decomposition rows. Confidence intervals are empirical
percentile intervals whose endpoints are order statistics of the replicates.

Replicate b is reproducible from (seed, b) alone, so doubling the number of
replications leaves the first half bit-identical and replicates can run
concurrently in any order.
"""

from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from .counterfactual import COMPONENTS, decompose, fit_group
from .data import DesignSpec, MicroSample, TrimRule
from .distreg import GridPolicy, HOURS_GRID, OUTCOME_GRID
from .errors import ConfigError, EstimationError

__all__ = ["BootstrapConfig", "BootstrapResult", "bootstrap_decomposition",
           "two_group_bootstrap", "draw_bootstrap_weights"]

WEIGHT_LAWS = ("exponential", "unit")
MAX_FAILURE_SHARE = 0.10


@dataclass(frozen=True)
class BootstrapConfig:
    """Replication count, seed, weight law and CI level.

    The default weight law is the standard exponential, a positive mean-one
    choice satisfying the usual exchangeable-weights conditions; "unit"
    (all weights 1) degenerates every replicate to the point estimate and is
    useful for plumbing tests.
    """

    replications: int
    seed: int
    weight_law: str = "exponential"
    ci_level: float = 0.95

    def __post_init__(self):
        if self.replications < 2:
            raise ConfigError(f"need at least 2 replications, got {self.replications}")
        if not 0 < self.ci_level < 1:
            raise ConfigError(f"ci_level must lie in (0,1), got {self.ci_level}")
        if self.weight_law not in WEIGHT_LAWS:
            raise ConfigError(f"unknown weight law {self.weight_law!r}; "
                              f"choose from {WEIGHT_LAWS}")

    def to_dict(self):
        return {"replications": self.replications, "seed": self.seed,
                "weight_law": self.weight_law, "ci_level": self.ci_level}

    @classmethod
    def from_dict(cls, d):
        return cls(int(d["replications"]), int(d["seed"]),
                   str(d.get("weight_law", "exponential")),
                   float(d.get("ci_level", 0.95)))


def draw_bootstrap_weights(law: str, n: int, rng) -> np.ndarray:
    if law == "exponential":
        return rng.standard_exponential(n)
    if law == "unit":
        return np.ones(n)
    raise ConfigError(f"unknown weight law {law!r}")


@dataclass(frozen=True)
class BootstrapResult:
    """Point rows, replicate matrix and percentile bands.

    `point` and `replicates` are (n_rows, n_components) arrays over the
    row labels in `row_labels` (arbitrary study layout) and the component
    order in `components`. `replicates` stacks successful replicates in
    replicate-index order; `replicate_ids` records which b they came from.
    """

    row_labels: tuple
    components: tuple
    point: np.ndarray
    replicates: np.ndarray
    replicate_ids: tuple
    ci_lo: np.ndarray
    ci_hi: np.ndarray
    n_fail: int
    config: BootstrapConfig

    @property
    def se(self) -> np.ndarray:
        return self.replicates.std(axis=0, ddof=1)


def bootstrap_decomposition(estimator: Callable[[Mapping[str, np.ndarray] | None], np.ndarray],
                            group_sizes: Mapping[str, int],
                            row_labels: Sequence,
                            cfg: BootstrapConfig,
                            n_threads: int = 1,
                            components: Sequence[str] = COMPONENTS) -> BootstrapResult:
    """Run the weighted bootstrap around an arbitrary study estimator.

    `estimator(None)` must return the point-estimate matrix with one row per
    label in `row_labels` and one column per component; `estimator(wmap)`
    must recompute it with the given per-group bootstrap weight draws
    multiplied into each group's sampling weights. Replicates that raise
    EstimationError are recorded and skipped; more than 10% failures aborts.
    """
    point = np.asarray(estimator(None), dtype=float)
    if point.shape != (len(row_labels), len(components)):
        raise ConfigError(f"estimator returned shape {point.shape}, expected "
                          f"({len(row_labels)}, {len(components)})")
    gids = list(group_sizes)

    def replicate(b):
        rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, b]))
        wmap = {gid: draw_bootstrap_weights(cfg.weight_law, group_sizes[gid], rng)
                for gid in gids}
        return estimator(wmap)

    results = [None] * cfg.replications
    failures = []

    def run(b):
        try:
            results[b] = np.asarray(replicate(b), dtype=float)
        except EstimationError as e:
            failures.append((b, str(e)))

    if n_threads > 1:
        with ThreadPoolExecutor(max_workers=n_threads) as ex:
            list(ex.map(run, range(cfg.replications)))
    else:
        for b in range(cfg.replications):
            run(b)

    ok_ids = tuple(b for b in range(cfg.replications) if results[b] is not None)
    n_fail = cfg.replications - len(ok_ids)
    if n_fail > MAX_FAILURE_SHARE * cfg.replications:
        detail = "; ".join(msg for _, msg in sorted(failures)[:3])
        raise EstimationError(f"{n_fail}/{cfg.replications} bootstrap replicates "
                              f"failed: {detail}")
    if n_fail:
        warnings.warn(f"{n_fail}/{cfg.replications} bootstrap replicates failed "
                      "and were skipped", stacklevel=2)
    reps = np.stack([results[b] for b in ok_ids], axis=0)

    a = 1 - cfg.ci_level
    lo = np.quantile(reps, a / 2, axis=0, method="lower")
    hi = np.quantile(reps, 1 - a / 2, axis=0, method="higher")
    outside = (point < lo) | (point > hi)
    if np.any(outside):
        warnings.warn(f"{int(outside.sum())} point estimates fall outside their "
                      "bootstrap interval (diagnostic only)", stacklevel=2)
    return BootstrapResult(tuple(row_labels), tuple(components), point, reps,
                           ok_ids, lo, hi, n_fail, cfg)


def two_group_bootstrap(sample1: MicroSample, sample0: MicroSample, *,
                        r_spec: DesignSpec, w_spec: DesignSpec,
                        trim: TrimRule = TrimRule(),
                        taus: Sequence[float] = (0.1, 0.25, 0.5, 0.75, 0.9),
                        hours_grid: GridPolicy = HOURS_GRID,
                        outcome_grid: GridPolicy = OUTCOME_GRID,
                        smoothing_seed=None,
                        cfg: BootstrapConfig,
                        n_threads: int = 1) -> BootstrapResult:
    """Weighted bootstrap of the two-group decomposition at the given taus.

    Row labels are the taus; columns follow COMPONENTS order.
    """
    if sample1.group_id == sample0.group_id:
        raise ConfigError("the two groups must have distinct group ids")
    samples = {sample0.group_id: sample0, sample1.group_id: sample1}

    def estimator(wmap):
        fits = {}
        for gid, s in samples.items():
            if wmap is not None:
                s = s.with_weights(s.weights * wmap[gid])
            fits[gid] = fit_group(s, r_spec, w_spec, trim,
                                  hours_grid=hours_grid, outcome_grid=outcome_grid,
                                  smoothing_seed=smoothing_seed)
        rows = decompose(fits[sample1.group_id], fits[sample0.group_id], taus)
        return np.array([r.as_tuple() for r in rows])

    sizes = {gid: s.n for gid, s in samples.items()}
    return bootstrap_decomposition(estimator, sizes, tuple(taus), cfg, n_threads)
