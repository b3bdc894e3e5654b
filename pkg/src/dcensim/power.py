"""Power profiles, sleep-state machines, and time-integrated energy accounting.

Profiles default to the representative multi-socket server and the 1 Gb/s
edge line card; aggregation/core cards scale the edge card by a configurable
multiplier. All values are config-overridable.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

# Line-card ladder, shallow to deep.
LC_STATES = ("active", "lp1", "lp2", "lp3", "deep")
# Server ladder. "active" means >= 1 busy core; idle_g0 is the 0-core resting state.
SERVER_STATES = ("active", "idle_g0", "sleep_g1", "sleep_g2")

LC_COMPONENTS = (
    "forwarding_engine",
    "voq",
    "tcam",
    "interconnect",
    "host_processor",
    "ports",
)


@dataclass(frozen=True)
class LineCardPowerProfile:
    forwarding_engine: dict[str, float]
    voq_static: dict[str, float]
    voq_per_mb: dict[str, float]
    tcam_static: dict[str, float]
    tcam_per_mb: dict[str, float]
    interconnect: dict[str, float]
    host_processor: dict[str, float]
    ports_all_active: float  # W for all port_count ports active
    ports_lpi: float  # W for all port_count ports in LPI
    port_count: int
    entry_delay: dict[str, float]  # seconds, keyed by target state
    wakeup_latency: dict[str, float]  # seconds, keyed by origin state

    def scaled(self, factor: float) -> "LineCardPowerProfile":
        def sc(d):
            return {k: v * factor for k, v in d.items()}

        return replace(
            self,
            forwarding_engine=sc(self.forwarding_engine),
            voq_static=sc(self.voq_static),
            voq_per_mb=sc(self.voq_per_mb),
            tcam_static=sc(self.tcam_static),
            tcam_per_mb=sc(self.tcam_per_mb),
            interconnect=sc(self.interconnect),
            host_processor=sc(self.host_processor),
            ports_all_active=self.ports_all_active * factor,
            ports_lpi=self.ports_lpi * factor,
        )

    def static_components(self, state: str) -> dict[str, float]:
        return {
            "forwarding_engine": self.forwarding_engine[state],
            "voq": self.voq_static[state],
            "tcam": self.tcam_static[state],
            "interconnect": self.interconnect[state],
            "host_processor": self.host_processor[state],
        }

    def active_power(self) -> float:
        """Full active draw with every port active and no buffered flow data."""
        return sum(self.static_components("active").values()) + self.ports_all_active


def default_linecard_profile() -> LineCardPowerProfile:
    st = LC_STATES
    return LineCardPowerProfile(
        forwarding_engine=dict(zip(st, (165.0, 132.0, 66.0, 33.0, 0.0))),
        voq_static=dict(zip(st, (15.5, 15.5, 4.0, 0.0, 0.0))),
        voq_per_mb=dict(zip(st, (0.006, 0.006, 0.0, 0.0, 0.0))),
        tcam_static=dict(zip(st, (12.0, 12.0, 12.0, 12.0, 0.0))),
        tcam_per_mb=dict(zip(st, (0.0026, 0.0026, 0.0026, 0.0, 0.0))),
        interconnect=dict(zip(st, (23.0, 23.0, 23.0, 0.0, 0.0))),
        host_processor=dict(zip(st, (24.0, 22.0, 9.0, 9.0, 3.0))),
        ports_all_active=29.0,
        ports_lpi=4.0,
        port_count=24,
        entry_delay={"lp1": 10e-6, "lp2": 100e-6, "lp3": 1e-3, "deep": 10e-3},
        wakeup_latency={
            "active": 0.0,
            "lp1": 100e-6,
            "lp2": 1e-3,
            "lp3": 10e-3,
            "deep": 100e-3,
        },
    )


@dataclass(frozen=True)
class ChassisPowerProfile:
    active_overhead: float  # W while >= 1 line card is not in the deepest state
    all_off_overhead: float  # W while every line card is in the deepest state
    base_on: float  # constant baseline while the switch is on


def default_chassis_profile() -> ChassisPowerProfile:
    # Route processing 24+32.5+10, interconnect card 85+24, controller 24+12,
    # proportional supply/cooling losses 93+77; all-off keeps controller 24+12
    # plus residual losses 5+4.
    return ChassisPowerProfile(active_overhead=381.5, all_off_overhead=45.0, base_on=120.0)


@dataclass(frozen=True)
class ServerPowerProfile:
    total_power: dict[str, float]  # W per state; "active" is the all-cores total
    per_active_core: float
    core_count: int
    entry_delay: dict[str, float]
    wakeup_latency: dict[str, float]

    def power_for(self, state: str, active_cores: int) -> float:
        if state == "active":
            return self.total_power["idle_g0"] + active_cores * self.per_active_core
        return self.total_power[state]


def default_server_profile(core_count: int = 20) -> ServerPowerProfile:
    return ServerPowerProfile(
        total_power={"active": 385.0, "idle_g0": 308.0, "sleep_g1": 73.0, "sleep_g2": 51.0},
        per_active_core=(385.0 - 308.0) / core_count,
        core_count=core_count,
        entry_delay={"active": 0.0, "idle_g0": 10e-6, "sleep_g1": 100e-6, "sleep_g2": 0.5},
        wakeup_latency={"active": 0.0, "idle_g0": 100e-6, "sleep_g1": 100e-3, "sleep_g2": 1.0},
    )


@dataclass
class StateMachine:
    """Shared shape for line-card and server sleep ladders."""

    current: str
    since: float = 0.0
    pending_timer: tuple[str, float] | None = None  # (target state, fire time)
    waking_until: float | None = None
    wake_origin: str | None = None

    @property
    def waking(self) -> bool:
        return self.waking_until is not None


@dataclass
class ServerStateMachine(StateMachine):
    active_cores: int = 0


def linecard_power(
    profile: LineCardPowerProfile,
    state: str,
    buffered_mb: float,
    active_ports: int,
    lpi_ports: int,
) -> float:
    return sum(
        linecard_power_components(profile, state, buffered_mb, active_ports, lpi_ports).values()
    )


def linecard_power_components(
    profile: LineCardPowerProfile,
    state: str,
    buffered_mb: float,
    active_ports: int,
    lpi_ports: int,
) -> dict[str, float]:
    """Per-component watts for one line card in the given state."""
    if buffered_mb < 0 or active_ports < 0 or lpi_ports < 0:
        raise ValueError("buffered_mb and port counts must be nonnegative")
    if active_ports + lpi_ports > profile.port_count:
        raise ValueError(
            f"{active_ports}+{lpi_ports} ports exceeds card port count {profile.port_count}"
        )
    comps = profile.static_components(state)
    comps["voq"] += buffered_mb * profile.voq_per_mb[state]
    comps["tcam"] += buffered_mb * profile.tcam_per_mb[state]
    per_port_active = profile.ports_all_active / profile.port_count
    per_port_lpi = profile.ports_lpi / profile.port_count
    comps["ports"] = active_ports * per_port_active + lpi_ports * per_port_lpi
    return comps


def switch_power(chassis: ChassisPowerProfile, card_powers: list[float], any_card_up: bool) -> float:
    overhead = chassis.active_overhead if any_card_up else chassis.all_off_overhead
    return chassis.base_on + overhead + sum(card_powers)


def server_power(profile: ServerPowerProfile, machine: ServerStateMachine) -> float:
    if machine.waking:
        return profile.total_power["active"]
    return profile.power_for(machine.current, machine.active_cores)


class EnergyLedger:
    """Joules per (device, component, state), integrated lazily per device.

    Power is piecewise constant between events, so accruing watts x elapsed
    at every state change is exact.
    """

    def __init__(self, start_time: float = 0.0):
        self.entries: dict[tuple, float] = {}
        self.last: dict = {}
        self.start_time = start_time

    def register(self, device, t: float):
        self.last[device] = t

    def accrue(self, device, components: dict[tuple[str, str], float], t_to: float):
        """Add components (watts keyed by (component, state)) x elapsed time."""
        t_from = self.last.get(device, self.start_time)
        if t_to < t_from - 1e-12:
            raise RuntimeError(
                f"time regression for {device}: {t_to} < {t_from} (event ordering bug)"
            )
        dt = max(t_to - t_from, 0.0)
        self.last[device] = t_to
        if dt == 0.0:
            return
        for key, watts in components.items():
            entry = (device,) + key
            self.entries[entry] = self.entries.get(entry, 0.0) + watts * dt

    def device_total(self, device) -> float:
        return sum(v for k, v in self.entries.items() if k[0] == device)

    def total(self) -> float:
        return sum(self.entries.values())

    def total_for(self, predicate) -> float:
        return sum(v for k, v in self.entries.items() if predicate(k[0]))

    def by_group(self, group_by: str) -> dict[str, float]:
        """Sum joules grouped by 'component', 'state', or 'device_kind'."""
        out: dict[str, float] = {}
        for (device, component, state), joules in self.entries.items():
            if group_by == "component":
                key = component
            elif group_by == "state":
                key = state
            elif group_by == "device_kind":
                key = device[0]
            else:
                raise ValueError(f"unknown grouping {group_by!r}")
            out[key] = out.get(key, 0.0) + joules
        return out

    def snapshot(self) -> "EnergyLedger":
        copy = EnergyLedger(self.start_time)
        copy.entries = dict(self.entries)
        copy.last = dict(self.last)
        return copy

    def rows(self):
        """Stable (device_kind, device_id, component, state, joules) rows."""
        for (device, component, state), joules in sorted(
            self.entries.items(), key=lambda kv: (str(kv[0][0]), kv[0][1], kv[0][2])
        ):
            kind = device[0]
            ident = ":".join(str(p) for p in device[1:])
            yield kind, ident, component, state, joules
