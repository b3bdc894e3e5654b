"""Result records, latency statistics, energy breakdowns, and exports."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field


@dataclass(frozen=True)
class JobRecord:
    job_id: int
    arrival: float
    completion: float
    latency: float
    deadline: float
    met_qos: bool
    servers_used: frozenset
    switches_used: frozenset


def nearest_rank_quantile(values: list[float], q: float) -> float:
    """Nearest-rank quantile: the ceil(q*n)-th smallest sample."""
    if not values:
        raise ValueError("quantile of an empty sample")
    if not 0 < q <= 1:
        raise ValueError("q must be in (0, 1]")
    ordered = sorted(values)
    rank = math.ceil(q * len(ordered))
    return ordered[rank - 1]


def latency_cdf(latencies: list[float]) -> list[tuple[float, float]]:
    """(latency, cumulative fraction) points, one per sample."""
    ordered = sorted(latencies)
    n = len(ordered)
    return [(v, (i + 1) / n) for i, v in enumerate(ordered)]


@dataclass
class SimulationResult:
    duration: float
    jobs_completed: int
    jobs_dropped: int
    records: list[JobRecord]
    ledger: object  # EnergyLedger
    event_log: list[str] = field(default_factory=list)
    power_trace: list[tuple[float, float]] = field(default_factory=list)
    workload_trace: list[str] = field(default_factory=list)
    label: str = ""

    @classmethod
    def from_simulation(cls, sim) -> "SimulationResult":
        return cls(
            duration=sim.now,
            jobs_completed=len(sim.records),
            jobs_dropped=sim.dropped,
            records=list(sim.records),
            ledger=sim.ledger.snapshot(),
            event_log=list(sim.event_log),
            power_trace=list(sim.power_trace),
            workload_trace=list(sim.workload_trace),
        )

    # ------------------------------------------------------------- statistics

    def latencies(self, warmup_frac: float = 0.05) -> list[float]:
        """Latency samples with arrivals inside the warm-up window excluded."""
        cutoff = self.duration * warmup_frac
        out = [r.latency for r in self.records if r.arrival >= cutoff]
        return out if out else [r.latency for r in self.records]

    def latency_quantile(self, q: float, warmup_frac: float = 0.05) -> float:
        return nearest_rank_quantile(self.latencies(warmup_frac), q)

    @property
    def energy_total(self) -> float:
        return self.ledger.total()

    @property
    def energy_per_job(self) -> float:
        if self.jobs_completed == 0:
            return math.inf
        return self.energy_total / self.jobs_completed

    def network_energy(self) -> float:
        return self.ledger.total_for(lambda dev: dev[0] in ("card", "chassis"))

    def server_energy(self) -> float:
        return self.ledger.total_for(lambda dev: dev[0] == "server")

    def qos_met_fraction(self) -> float:
        if not self.records:
            return 1.0
        return sum(1 for r in self.records if r.met_qos) / len(self.records)

    def qos_ratio_quantile(self, q: float, warmup_frac: float = 0.05) -> float:
        """Quantile of latency/deadline; <= 1 means within QoS."""
        cutoff = self.duration * warmup_frac
        ratios = [r.latency / r.deadline for r in self.records if r.arrival >= cutoff]
        if not ratios:
            ratios = [r.latency / r.deadline for r in self.records]
        return nearest_rank_quantile(ratios, q)

    # ---------------------------------------------------------------- exports

    def summary(self) -> dict:
        out = {
            "label": self.label,
            "duration_s": self.duration,
            "jobs_completed": self.jobs_completed,
            "jobs_dropped": self.jobs_dropped,
            "energy_total_j": self.energy_total,
            "energy_per_job_j": self.energy_per_job if self.jobs_completed else None,
            "server_energy_j": self.server_energy(),
            "network_energy_j": self.network_energy(),
            "energy_by_device_kind": self.ledger.by_group("device_kind"),
            "energy_by_state": self.ledger.by_group("state"),
            "qos_met_fraction": self.qos_met_fraction(),
        }
        if self.records:
            out["latency_p50_s"] = self.latency_quantile(0.50)
            out["latency_p90_s"] = self.latency_quantile(0.90)
            out["latency_p99_s"] = self.latency_quantile(0.99)
            out["qos_ratio_p90"] = self.qos_ratio_quantile(0.90)
        return out

    def write_summary_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.summary(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    def write_jobs_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(
                [
                    "job_id",
                    "arrival_s",
                    "completion_s",
                    "latency_s",
                    "deadline_s",
                    "met_qos",
                    "servers_used",
                    "switches_used",
                ]
            )
            for r in sorted(self.records, key=lambda r: r.job_id):
                w.writerow(
                    [
                        r.job_id,
                        f"{r.arrival:.9f}",
                        f"{r.completion:.9f}",
                        f"{r.latency:.9f}",
                        f"{r.deadline:.9f}",
                        int(r.met_qos),
                        "+".join(str(s) for s in sorted(r.servers_used)),
                        "+".join(sorted(r.switches_used)),
                    ]
                )

    def write_energy_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["device_kind", "device_id", "component", "state", "joules"])
            for kind, ident, component, state, joules in self.ledger.rows():
                w.writerow([kind, ident, component, state, f"{joules:.9f}"])

    def write_power_trace_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["time_s", "total_watts"])
            for t, watts in self.power_trace:
                w.writerow([f"{t:.9f}", f"{watts:.9f}"])


def comparison_rows(results: dict[str, SimulationResult]) -> list[dict]:
    rows = []
    for label, res in results.items():
        row = {"combo": label}
        row.update(res.summary())
        rows.append(row)
    return rows


def write_comparison_csv(results: dict[str, SimulationResult], path):
    rows = comparison_rows(results)
    fields = [
        "combo",
        "jobs_completed",
        "jobs_dropped",
        "duration_s",
        "energy_total_j",
        "energy_per_job_j",
        "server_energy_j",
        "network_energy_j",
        "latency_p50_s",
        "latency_p90_s",
        "latency_p99_s",
        "qos_ratio_p90",
        "qos_met_fraction",
    ]
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=fields, extrasaction="ignore")
        w.writeheader()
        for row in rows:
            w.writerow(row)
