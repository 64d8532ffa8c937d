"""Probabilistic daily scenario generation.

A day is (month, demand forecast, wind forecast, topology).  The month
is uniform; demand and wind are drawn per hour and unit from normals
whose mean is a 24-hour profile scaled by that month's multiplier and
whose standard deviation is a fixed fraction of the mean, then clamped
(wind to [0, capacity], demand below at 0).  Topology outages are a
uniform subset of the candidate lines, optionally restricted to one
maintenance zone at a time plus the shared interconnection candidates.

Every sample id owns four spawned RNG substreams (month, wind, demand,
topology), so components are conditionally independent by construction
and any sample can be regenerated alone from (seed, id).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from ucproxy.grid import GridCase

SAMPLER_SCHEMA_VERSION = 1


class ConfigError(ValueError):
    """Raised for malformed or inconsistent sampler configuration."""


@dataclass(frozen=True)
class UcInput:
    """One day's conditions: the input of a commitment solve."""

    demand: np.ndarray          # (24, n_buses) MW
    wind: np.ndarray            # (24, n_wind) MW
    topology: np.ndarray        # (n_lines,) int8, 1 = in service
    month: int
    sample_id: int = 0


@dataclass(frozen=True)
class SamplerConfig:
    demand_profile: np.ndarray      # (24, n_b) peak-month hourly means, MW
    wind_profile: np.ndarray        # (24, n_w)
    demand_monthly: np.ndarray      # (12,) multipliers in [0, 1]
    wind_monthly: np.ndarray        # (12,)
    demand_sigma: float = 0.02      # std as fraction of the mean
    wind_sigma: float = 0.15
    zone_exclusive: bool = True
    months: tuple[int, ...] = tuple(range(1, 13))
    outage_zones: dict[str, tuple[int, ...]] = field(default_factory=dict)
    shared_candidates: tuple[int, ...] = ()


def check_input(case: GridCase, x: UcInput) -> None:
    if x.demand.shape != (24, case.n_buses):
        raise ConfigError(f"demand shape {x.demand.shape} mismatches case")
    if x.wind.shape != (24, case.n_wind):
        raise ConfigError(f"wind shape {x.wind.shape} mismatches case")
    if x.topology.shape != (case.n_lines,):
        raise ConfigError("topology length mismatches case")
    if not 1 <= x.month <= 12:
        raise ConfigError(f"month {x.month} out of range")
    caps = np.array([w.capacity_mw for w in case.wind])
    if x.wind.size and ((x.wind < -1e-9).any() or (x.wind > caps + 1e-9).any()):
        raise ConfigError("wind outside [0, capacity]")
    if (x.demand < -1e-9).any():
        raise ConfigError("negative demand")


def load_sampler_config(source, case: GridCase) -> SamplerConfig:
    """Read a JSON sampler config and cross-validate it against the case."""
    if isinstance(source, dict):
        raw = source
    elif hasattr(source, "read"):
        raw = json.load(source)
    else:
        with open(source) as fh:
            raw = json.load(fh)
    if raw.get("schema_version") != SAMPLER_SCHEMA_VERSION:
        raise ConfigError(
            f"unsupported sampler schema_version {raw.get('schema_version')!r}")
    try:
        cfg = SamplerConfig(
            demand_profile=np.asarray(raw["demand_profile"], dtype=float),
            wind_profile=np.asarray(raw["wind_profile"], dtype=float),
            demand_monthly=np.asarray(raw["demand_monthly"], dtype=float),
            wind_monthly=np.asarray(raw["wind_monthly"], dtype=float),
            demand_sigma=float(raw.get("demand_sigma", 0.02)),
            wind_sigma=float(raw.get("wind_sigma", 0.15)),
            zone_exclusive=bool(raw.get("zone_exclusive", True)),
            months=tuple(raw.get("months", range(1, 13))),
            outage_zones={},
            shared_candidates=(),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"malformed sampler config: {exc}") from exc
    cfg = with_case_outages(cfg, case)
    validate_config(cfg, case)
    return cfg


def save_sampler_config(cfg: SamplerConfig, destination) -> None:
    raw = {
        "schema_version": SAMPLER_SCHEMA_VERSION,
        "demand_profile": cfg.demand_profile.tolist(),
        "wind_profile": cfg.wind_profile.tolist(),
        "demand_monthly": cfg.demand_monthly.tolist(),
        "wind_monthly": cfg.wind_monthly.tolist(),
        "demand_sigma": cfg.demand_sigma,
        "wind_sigma": cfg.wind_sigma,
        "zone_exclusive": cfg.zone_exclusive,
        "months": list(cfg.months),
    }
    own = not hasattr(destination, "write")
    fh = open(destination, "w") if own else destination
    try:
        json.dump(raw, fh, indent=1, sort_keys=True)
    finally:
        if own:
            fh.close()


def with_case_outages(cfg: SamplerConfig, case: GridCase) -> SamplerConfig:
    """Fill the outage-candidate grouping from the case's line flags."""
    zones: dict[str, list[int]] = {}
    shared: list[int] = []
    for ln in case.outage_candidates():
        if ln.zone is None:
            shared.append(ln.id)
        else:
            zones.setdefault(str(ln.zone), []).append(ln.id)
    return SamplerConfig(
        demand_profile=cfg.demand_profile,
        wind_profile=cfg.wind_profile,
        demand_monthly=cfg.demand_monthly,
        wind_monthly=cfg.wind_monthly,
        demand_sigma=cfg.demand_sigma,
        wind_sigma=cfg.wind_sigma,
        zone_exclusive=cfg.zone_exclusive,
        months=cfg.months,
        outage_zones={z: tuple(ids) for z, ids in sorted(zones.items())},
        shared_candidates=tuple(shared),
    )


def validate_config(cfg: SamplerConfig, case: GridCase) -> None:
    if cfg.demand_profile.shape != (24, case.n_buses):
        raise ConfigError(
            f"demand profile shape {cfg.demand_profile.shape} "
            f"!= (24, {case.n_buses})")
    if cfg.wind_profile.shape != (24, case.n_wind):
        raise ConfigError(
            f"wind profile shape {cfg.wind_profile.shape} "
            f"!= (24, {case.n_wind})")
    if (cfg.demand_profile < 0).any() or (cfg.wind_profile < 0).any():
        raise ConfigError("profiles must be non-negative")
    for name, mult in (("demand", cfg.demand_monthly),
                       ("wind", cfg.wind_monthly)):
        if mult.shape != (12,):
            raise ConfigError(f"{name} monthly multipliers must have 12 entries")
        if (mult < 0).any() or (mult > 1).any():
            raise ConfigError(f"{name} monthly multipliers must lie in [0, 1]")
    for name, s in (("demand", cfg.demand_sigma), ("wind", cfg.wind_sigma)):
        if not 0 <= s < 1:
            raise ConfigError(f"{name} sigma fraction must lie in [0, 1)")
    if not cfg.months or not set(cfg.months) <= set(range(1, 13)):
        raise ConfigError("months must be a non-empty subset of 1..12")


# ---------------------------------------------------------------------------
# Component draws


def sample_month(cfg: SamplerConfig, rng: np.random.Generator) -> int:
    return int(cfg.months[rng.integers(len(cfg.months))])


def sample_wind(case: GridCase, cfg: SamplerConfig, month: int,
                rng: np.random.Generator) -> np.ndarray:
    """Hourly wind per generator, clamped to [0, capacity]."""
    mean = cfg.wind_profile * cfg.wind_monthly[month - 1]
    if cfg.wind_sigma == 0.0:
        draw = mean.copy()
    else:
        draw = rng.normal(mean, cfg.wind_sigma * mean)
    caps = np.array([w.capacity_mw for w in case.wind])
    return np.clip(draw, 0.0, caps[None, :]) if caps.size else draw


def sample_demand(case: GridCase, cfg: SamplerConfig, month: int,
                  rng: np.random.Generator) -> np.ndarray:
    """Hourly demand per bus, clamped below at 0 (no upper clamp)."""
    mean = cfg.demand_profile * cfg.demand_monthly[month - 1]
    if cfg.demand_sigma == 0.0:
        draw = mean.copy()
    else:
        draw = rng.normal(mean, cfg.demand_sigma * mean)
    return np.maximum(draw, 0.0)


def sample_topology(case: GridCase, cfg: SamplerConfig,
                    rng: np.random.Generator) -> np.ndarray:
    """Uniform outage subset; non-candidate lines stay in service.

    With zone exclusivity, one zone is drawn uniformly and the subset is
    taken over that zone's candidates plus the shared interconnection
    candidates (which may co-occur with zone outages).
    """
    top = np.ones(case.n_lines, dtype=np.int8)
    if cfg.zone_exclusive and cfg.outage_zones:
        zones = list(cfg.outage_zones)
        zone = zones[rng.integers(len(zones))]
        pool = list(cfg.outage_zones[zone]) + list(cfg.shared_candidates)
    else:
        pool = [ln.id for ln in case.outage_candidates()]
    if not pool:
        return top
    out = rng.integers(0, 2, size=len(pool)).astype(bool)
    line_pos = {ln.id: k for k, ln in enumerate(case.lines)}
    for line_id, is_out in zip(pool, out):
        if is_out:
            top[line_pos[line_id]] = 0
    return top


class ScenarioSampler:
    """Seeded scenario source with per-sample spawned substreams."""

    def __init__(self, case: GridCase, cfg: SamplerConfig, seed: int):
        validate_config(cfg, case)
        self.case = case
        self.cfg = cfg
        self.seed = int(seed)
        self._next_id = 0

    def streams(self, sample_id: int) -> tuple[np.random.Generator, ...]:
        root = np.random.SeedSequence(
            entropy=self.seed, spawn_key=(int(sample_id),))
        return tuple(np.random.default_rng(s) for s in root.spawn(4))

    def sample(self, sample_id: int | None = None) -> UcInput:
        """Draw one scenario: month first, the rest conditionally on it."""
        if sample_id is None:
            sample_id = self._next_id
        self._next_id = max(self._next_id, sample_id + 1)
        m_rng, w_rng, d_rng, t_rng = self.streams(sample_id)
        month = sample_month(self.cfg, m_rng)
        wind = sample_wind(self.case, self.cfg, month, w_rng)
        demand = sample_demand(self.case, self.cfg, month, d_rng)
        top = sample_topology(self.case, self.cfg, t_rng)
        x = UcInput(demand=demand, wind=wind, topology=top,
                    month=month, sample_id=int(sample_id))
        check_input(self.case, x)
        return x

    def batch(self, count: int, start_id: int = 0) -> list[UcInput]:
        return [self.sample(start_id + k) for k in range(count)]
