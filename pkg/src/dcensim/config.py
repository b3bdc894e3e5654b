"""Experiment configuration: YAML schema, validation, and object assembly."""

from __future__ import annotations

from dataclasses import dataclass, field

import yaml

from .engine import SimConfig
from .policies import PLACEMENTS, ROUTINGS, make_placement, make_routing
from .topology import build_fat_tree
from .workload import (
    JobStream,
    MmppArrivals,
    PoissonArrivals,
    ingest_trace,
    lambda_for_utilization,
)

TEMPLATE_SHAPE = {
    # template -> (mean task service seconds, tasks per job)
    "web_service": (0.5, 2),
    "web_search": (0.1, 6),
}


class ConfigError(ValueError):
    """Raised with every detected violation listed, one per line."""

    def __init__(self, errors: list[str]):
        self.errors = errors
        super().__init__("invalid configuration:\n" + "\n".join(f"- {e}" for e in errors))


@dataclass
class ExperimentConfig:
    # topology
    k: int = 4
    cores_per_server: int = 20
    capacity_by_level: dict = field(
        default_factory=lambda: {"edge": 1e9, "agg": 10e9, "core": 10e9}
    )
    # workload
    template: str = "web_service"
    arrivals: str = "poisson"  # poisson | mmpp | trace
    lam: float | None = None
    utilization: float | None = None
    burst_multiplier: float = 1.5
    normal_duration: float = 20.0
    burst_duration: float = 10.0
    trace_path: str | None = None
    trace_scale: float = 1.0
    flow_bytes: float = 100_000.0
    width_frac: float = 0.2
    # policy
    placement: str = "popcorns"
    routing: str = "popcorns"
    popcorns_mode: str = "pruned"
    max_candidates: int = 8
    max_paths: int = 2
    # timers & thresholds
    card_delay_timers: dict = field(
        default_factory=lambda: {"lp1": 0.1, "lp2": 0.1, "lp3": 0.1, "deep": 0.1}
    )
    server_delay_timers: dict = field(
        default_factory=lambda: {"sleep_g1": 0.1, "sleep_g2": 0.1}
    )
    port_lpi_delay: float = 1e-3
    port_wake_delay: float = 0.0
    card_wake_extra_delay: float = 0.0
    port_wake_threshold: int = 1
    server_queue_threshold: int = 10
    server_queue_hard_cap: int = 1000
    max_card_state: str = "deep"
    single_deep_state: bool = False
    agg_core_power_scale: float = 1.5
    # run control
    stop_jobs: int | None = 1000
    stop_time: float | None = None
    seed: int = 0
    record_event_log: bool = False
    record_power_trace: bool = False

    def __post_init__(self):
        self.validate()

    # -------------------------------------------------------------- assembly

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        flat = {}
        sections = {
            "topology": ("k", "cores_per_server", "capacity_by_level"),
            "workload": (
                "template",
                "arrivals",
                "lam",
                "utilization",
                "burst_multiplier",
                "normal_duration",
                "burst_duration",
                "trace_path",
                "trace_scale",
                "flow_bytes",
                "width_frac",
            ),
            "policy": ("placement", "routing", "popcorns_mode", "max_candidates", "max_paths"),
            "timers": (
                "card_delay_timers",
                "server_delay_timers",
                "port_lpi_delay",
                "port_wake_delay",
                "card_wake_extra_delay",
                "port_wake_threshold",
                "server_queue_threshold",
                "server_queue_hard_cap",
                "max_card_state",
                "single_deep_state",
                "agg_core_power_scale",
            ),
            "run": ("stop_jobs", "stop_time", "seed", "record_event_log", "record_power_trace"),
        }
        errors = []
        known_keys = {k for keys in sections.values() for k in keys}
        for section, keys in sections.items():
            sub = raw.get(section, {})
            if not isinstance(sub, dict):
                errors.append(f"section {section!r} must be a mapping")
                continue
            for key, value in sub.items():
                name = "lam" if key == "lambda" else key
                if name not in keys:
                    errors.append(f"unknown key {key!r} in section {section!r}")
                    continue
                flat[name] = value
        for key in raw:
            if key not in sections:
                errors.append(f"unknown top-level section {key!r}")
        if errors:
            raise ConfigError(errors)
        cfg = cls(**flat)
        cfg.validate()
        return cfg

    @classmethod
    def from_yaml(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            raw = yaml.safe_load(fh) or {}
        if not isinstance(raw, dict):
            raise ConfigError(["configuration root must be a mapping"])
        return cls.from_dict(raw)

    def to_dict(self) -> dict:
        return {
            "topology": {
                "k": self.k,
                "cores_per_server": self.cores_per_server,
                "capacity_by_level": dict(self.capacity_by_level),
            },
            "workload": {
                "template": self.template,
                "arrivals": self.arrivals,
                "lambda": self.lam,
                "utilization": self.utilization,
                "burst_multiplier": self.burst_multiplier,
                "normal_duration": self.normal_duration,
                "burst_duration": self.burst_duration,
                "trace_path": self.trace_path,
                "trace_scale": self.trace_scale,
                "flow_bytes": self.flow_bytes,
                "width_frac": self.width_frac,
            },
            "policy": {
                "placement": self.placement,
                "routing": self.routing,
                "popcorns_mode": self.popcorns_mode,
                "max_candidates": self.max_candidates,
                "max_paths": self.max_paths,
            },
            "timers": {
                "card_delay_timers": dict(self.card_delay_timers),
                "server_delay_timers": dict(self.server_delay_timers),
                "port_lpi_delay": self.port_lpi_delay,
                "port_wake_delay": self.port_wake_delay,
                "card_wake_extra_delay": self.card_wake_extra_delay,
                "port_wake_threshold": self.port_wake_threshold,
                "server_queue_threshold": self.server_queue_threshold,
                "server_queue_hard_cap": self.server_queue_hard_cap,
                "max_card_state": self.max_card_state,
                "single_deep_state": self.single_deep_state,
                "agg_core_power_scale": self.agg_core_power_scale,
            },
            "run": {
                "stop_jobs": self.stop_jobs,
                "stop_time": self.stop_time,
                "seed": self.seed,
                "record_event_log": self.record_event_log,
                "record_power_trace": self.record_power_trace,
            },
        }

    # ------------------------------------------------------------ validation

    def validate(self):
        errors = []
        if not (isinstance(self.k, int) and self.k >= 2 and self.k % 2 == 0):
            errors.append(f"topology.k must be an even integer >= 2, got {self.k!r}")
        if not (isinstance(self.cores_per_server, int) and self.cores_per_server >= 1):
            errors.append("topology.cores_per_server must be a positive integer")
        for level in ("edge", "agg", "core"):
            cap = self.capacity_by_level.get(level)
            if not isinstance(cap, (int, float)) or cap <= 0:
                errors.append(f"topology.capacity_by_level.{level} must be positive")
        if self.template not in TEMPLATE_SHAPE:
            errors.append(
                f"workload.template must be one of {sorted(TEMPLATE_SHAPE)}, got {self.template!r}"
            )
        if self.arrivals not in ("poisson", "mmpp", "trace"):
            errors.append(f"workload.arrivals must be poisson, mmpp, or trace, got {self.arrivals!r}")
        if self.arrivals in ("poisson", "mmpp"):
            have_lam = self.lam is not None
            have_rho = self.utilization is not None
            if have_lam == have_rho:
                errors.append("workload requires exactly one of lambda or utilization")
            if have_lam and self.lam <= 0:
                errors.append("workload.lambda must be positive")
            if have_rho and not (0 < self.utilization <= 1):
                errors.append("workload.utilization must be in (0, 1]")
        if self.arrivals == "trace" and not self.trace_path:
            errors.append("workload.arrivals=trace requires workload.trace_path")
        if self.trace_scale <= 0:
            errors.append("workload.trace_scale must be positive")
        if self.flow_bytes < 0:
            errors.append("workload.flow_bytes must be nonnegative")
        if not (0 <= self.width_frac < 1):
            errors.append("workload.width_frac must be in [0, 1)")
        if self.placement not in PLACEMENTS:
            errors.append(f"policy.placement must be one of {sorted(PLACEMENTS)}")
        if self.routing not in ROUTINGS:
            errors.append(f"policy.routing must be one of {sorted(ROUTINGS)}")
        if self.placement == "popcorns" and self.routing != "popcorns":
            errors.append("policy.placement=popcorns requires policy.routing=popcorns")
        if self.placement != "popcorns" and self.routing == "popcorns":
            errors.append("policy.routing=popcorns requires policy.placement=popcorns")
        if self.popcorns_mode not in ("exhaustive", "pruned"):
            errors.append("policy.popcorns_mode must be exhaustive or pruned")
        if self.max_candidates < 1 or self.max_paths < 1:
            errors.append("policy.max_candidates and policy.max_paths must be >= 1")
        for state, timer in self.card_delay_timers.items():
            if state not in ("lp1", "lp2", "lp3", "deep"):
                errors.append(f"timers.card_delay_timers has unknown state {state!r}")
            elif timer < 0:
                errors.append(f"timers.card_delay_timers.{state} must be nonnegative")
        for state, timer in self.server_delay_timers.items():
            if state not in ("sleep_g1", "sleep_g2"):
                errors.append(f"timers.server_delay_timers has unknown state {state!r}")
            elif timer < 0:
                errors.append(f"timers.server_delay_timers.{state} must be nonnegative")
        if self.max_card_state not in ("lp1", "lp2", "lp3", "deep"):
            errors.append("timers.max_card_state must be one of lp1, lp2, lp3, deep")
        for name in ("port_lpi_delay", "port_wake_delay", "card_wake_extra_delay"):
            if getattr(self, name) < 0:
                errors.append(f"timers.{name} must be nonnegative")
        if self.server_queue_hard_cap < self.server_queue_threshold:
            errors.append("timers.server_queue_hard_cap must be >= server_queue_threshold")
        if self.agg_core_power_scale <= 0:
            errors.append("timers.agg_core_power_scale must be positive")
        if (self.stop_jobs is None) == (self.stop_time is None):
            errors.append("run requires exactly one of stop_jobs or stop_time")
        if self.stop_jobs is not None and self.stop_jobs < 1:
            errors.append("run.stop_jobs must be >= 1")
        if self.stop_time is not None and self.stop_time <= 0:
            errors.append("run.stop_time must be positive")
        if errors:
            raise ConfigError(errors)

    # --------------------------------------------------------------- builders

    @property
    def num_servers(self) -> int:
        return self.k ** 3 // 4

    def arrival_rate(self) -> float:
        if self.lam is not None:
            return self.lam
        mean_service, tasks = TEMPLATE_SHAPE[self.template]
        return lambda_for_utilization(
            self.utilization, self.num_servers, self.cores_per_server, mean_service, tasks
        )

    def build_topology(self):
        return build_fat_tree(
            self.k,
            capacity_by_level=dict(self.capacity_by_level),
            cores_per_server=self.cores_per_server,
        )

    def build_arrivals(self):
        if self.arrivals == "poisson":
            return PoissonArrivals(self.arrival_rate(), seed=self.seed)
        if self.arrivals == "mmpp":
            return MmppArrivals(
                self.arrival_rate(),
                burst_multiplier=self.burst_multiplier,
                normal_duration=self.normal_duration,
                burst_duration=self.burst_duration,
                seed=self.seed,
            )
        return ingest_trace(self.trace_path, scale=self.trace_scale)

    def build_job_stream(self):
        max_cap = max(self.capacity_by_level.values())
        return JobStream(
            self.build_arrivals(),
            self.template,
            seed=self.seed,
            flow_bytes=self.flow_bytes,
            width_frac=self.width_frac,
            qos_capacity=max_cap,
        )

    def build_policies(self):
        # policy randomness is seeded separately from the workload stream so
        # all policy combos see the identical job realization
        placement_kwargs = {}
        if self.placement == "popcorns":
            placement_kwargs = {
                "mode": self.popcorns_mode,
                "max_candidates": self.max_candidates,
                "max_paths": self.max_paths,
            }
        placement = make_placement(self.placement, seed=self.seed + 7919, **placement_kwargs)
        routing = make_routing(self.routing)
        return placement, routing

    def build_sim_config(self) -> SimConfig:
        return SimConfig(
            port_wake_threshold=self.port_wake_threshold,
            server_queue_threshold=self.server_queue_threshold,
            server_queue_hard_cap=self.server_queue_hard_cap,
            card_delay_timers=dict(self.card_delay_timers),
            server_delay_timers=dict(self.server_delay_timers),
            port_lpi_delay=self.port_lpi_delay,
            port_wake_delay=self.port_wake_delay,
            card_wake_extra_delay=self.card_wake_extra_delay,
            max_card_state=self.max_card_state,
            single_deep_state=self.single_deep_state,
            agg_core_power_scale=self.agg_core_power_scale,
            seed=self.seed,
            record_event_log=self.record_event_log,
            record_power_trace=self.record_power_trace,
        )

    def replaced(self, **changes) -> "ExperimentConfig":
        import dataclasses

        cfg = dataclasses.replace(self, **changes)
        cfg.validate()
        return cfg
