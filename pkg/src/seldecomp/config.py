"""Study configuration: JSON schema parsing and validation.

A study names its groups (CSV files or simulator specs), the two design
specifications, the trim rule, the base group per family, the percentile
list, grid policies and optional bootstrap settings. The JSON layout is
documented in the repository README.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .bootstrap import BootstrapConfig
from .data import DesignSpec, TrimRule
from .distreg import GridPolicy, HOURS_GRID, OUTCOME_GRID
from .errors import ConfigError
from .oracle import HSMParams

__all__ = ["SimulateSpec", "GroupSource", "StudyConfig", "load_config"]

DEFAULT_TAUS = (0.1, 0.25, 0.5, 0.75, 0.9)
DEFAULT_FAMILY = "all"


@dataclass(frozen=True)
class SimulateSpec:
    params: HSMParams
    n: int
    seed: int

    def to_dict(self):
        return {"params": self.params.to_dict(), "n": self.n, "seed": self.seed}

    @classmethod
    def from_dict(cls, d):
        try:
            return cls(HSMParams.from_dict(d["params"]), int(d["n"]), int(d["seed"]))
        except KeyError as e:
            raise ConfigError(f"simulate spec missing key {e}") from e


@dataclass(frozen=True)
class GroupSource:
    """One group: an id, a family label, and exactly one data source."""

    group_id: str
    family: str = DEFAULT_FAMILY
    csv: str | None = None
    simulate: SimulateSpec | None = None

    def __post_init__(self):
        if (self.csv is None) == (self.simulate is None):
            raise ConfigError(f"group {self.group_id!r}: give exactly one of "
                              "'csv' or 'simulate'")

    def to_dict(self):
        d = {"group_id": self.group_id, "family": self.family}
        if self.csv is not None:
            d["csv"] = self.csv
        else:
            d["simulate"] = self.simulate.to_dict()
        return d

    @classmethod
    def from_dict(cls, d):
        sim = d.get("simulate")
        return cls(str(d["group_id"]), str(d.get("family", DEFAULT_FAMILY)),
                   d.get("csv"), None if sim is None else SimulateSpec.from_dict(sim))


@dataclass(frozen=True)
class StudyConfig:
    groups: tuple
    r_spec: DesignSpec
    w_spec: DesignSpec
    trim: TrimRule = TrimRule()
    base_group: object = None          # group id, or {family: group id}
    taus: tuple = DEFAULT_TAUS
    hours_grid: GridPolicy = HOURS_GRID
    outcome_grid: GridPolicy = OUTCOME_GRID
    smoothing_seed: int | None = None
    bootstrap: BootstrapConfig | None = None
    weight_column: str | None = None
    output_dir: str = "out"

    def __post_init__(self):
        if not self.groups:
            raise ConfigError("study needs at least one group")
        ids = [g.group_id for g in self.groups]
        if len(set(ids)) != len(ids):
            raise ConfigError(f"duplicate group ids: {ids}")
        taus = tuple(float(t) for t in self.taus)
        if any(not 0 < t < 1 for t in taus):
            raise ConfigError(f"taus must lie in (0,1): {taus}")
        if any(b <= a for a, b in zip(taus, taus[1:])):
            raise ConfigError(f"taus must be strictly increasing: {taus}")
        object.__setattr__(self, "taus", taus)
        object.__setattr__(self, "groups", tuple(self.groups))
        if not self.w_spec.includes_control:
            raise ConfigError("w_spec must include control-function terms")
        if self.r_spec.includes_control:
            raise ConfigError("r_spec cannot include control-function terms")
        # resolve and check the base group of every family
        for fam in self.families():
            self.base_for(fam)

    def families(self):
        return tuple(dict.fromkeys(g.family for g in self.groups))

    def family_groups(self, family):
        return tuple(g for g in self.groups if g.family == family)

    def base_for(self, family) -> str:
        members = [g.group_id for g in self.family_groups(family)]
        if self.base_group is None:
            return members[0]
        if isinstance(self.base_group, dict):
            try:
                base = str(self.base_group[family])
            except KeyError:
                raise ConfigError(f"no base group configured for family {family!r}") \
                    from None
        else:
            base = str(self.base_group)
        if base not in members:
            raise ConfigError(f"base group {base!r} is not a member of family "
                              f"{family!r} ({members})")
        return base

    def to_dict(self):
        base = self.base_group
        return {
            "groups": [g.to_dict() for g in self.groups],
            "r_spec": self.r_spec.to_dict(),
            "w_spec": self.w_spec.to_dict(),
            "trim": self.trim.to_dict(),
            "base_group": base,
            "taus": list(self.taus),
            "grids": {"hours": self.hours_grid.to_dict(),
                      "outcome": self.outcome_grid.to_dict()},
            "smoothing_seed": self.smoothing_seed,
            "bootstrap": None if self.bootstrap is None else self.bootstrap.to_dict(),
            "weight_column": self.weight_column,
            "output_dir": self.output_dir,
        }

    @classmethod
    def from_dict(cls, d):
        try:
            groups = tuple(GroupSource.from_dict(g) for g in d["groups"])
            r_spec = DesignSpec.from_dict(d["r_spec"])
            w_spec = DesignSpec.from_dict(d["w_spec"])
        except KeyError as e:
            raise ConfigError(f"config missing required key {e}") from e
        grids = d.get("grids", {})
        boot = d.get("bootstrap")
        smoothing = d.get("smoothing_seed")
        return cls(
            groups=groups, r_spec=r_spec, w_spec=w_spec,
            trim=TrimRule.from_dict(d.get("trim", {})),
            base_group=d.get("base_group"),
            taus=tuple(d.get("taus", DEFAULT_TAUS)),
            hours_grid=GridPolicy.from_dict(grids["hours"]) if "hours" in grids
            else HOURS_GRID,
            outcome_grid=GridPolicy.from_dict(grids["outcome"]) if "outcome" in grids
            else OUTCOME_GRID,
            smoothing_seed=None if smoothing is None else int(smoothing),
            bootstrap=None if boot is None else BootstrapConfig.from_dict(boot),
            weight_column=d.get("weight_column"),
            output_dir=str(d.get("output_dir", "out")),
        )

    def canonical_json(self) -> str:
        """Stable serialization used for config hashing and the manifest."""
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))


def load_config(path) -> StudyConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"config {path} is not valid JSON: {e}") from e
    if not isinstance(raw, dict):
        raise ConfigError(f"config {path} must hold a JSON object")
    cfg = StudyConfig.from_dict(raw)
    # CSV paths are resolved relative to the config file
    groups = []
    for g in cfg.groups:
        if g.csv is not None and not Path(g.csv).is_absolute():
            groups.append(GroupSource(g.group_id, g.family,
                                      str((path.parent / g.csv)), None))
        else:
            groups.append(g)
    return StudyConfig(tuple(groups), cfg.r_spec, cfg.w_spec, cfg.trim,
                       cfg.base_group, cfg.taus, cfg.hours_grid,
                       cfg.outcome_grid, cfg.smoothing_seed, cfg.bootstrap,
                       cfg.weight_column, cfg.output_dir)
