"""Job generation: DAG templates, arrival processes, traces, QoS deadlines."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class TaskSpec:
    task_id: int
    service_time: float  # seconds

    def __post_init__(self):
        if self.service_time <= 0:
            raise ValueError("service_time must be positive")


@dataclass(frozen=True)
class FlowEdge:
    parent: int
    child: int
    size: float  # bytes

    def __post_init__(self):
        if self.size < 0:
            raise ValueError("flow size must be nonnegative")


@dataclass
class JobDag:
    job_id: int
    arrival_time: float
    tasks: list[TaskSpec]
    edges: list[FlowEdge]
    qos_deadline: float = 0.0  # duration; set via qos_deadline()

    def parents_of(self, task_id: int) -> list[FlowEdge]:
        return [e for e in self.edges if e.child == task_id]

    def children_of(self, task_id: int) -> list[FlowEdge]:
        return [e for e in self.edges if e.parent == task_id]

    def validate(self):
        ids = [t.task_id for t in self.tasks]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate task ids")
        order = topological_order(self)
        if len(order) != len(self.tasks):
            raise ValueError("job DAG contains a cycle")
        roots = {t.task_id for t in self.tasks if not self.parents_of(t.task_id)}
        reachable = set(roots)
        # edges are re-walked until fixpoint; DAGs here are tiny
        changed = True
        while changed:
            changed = False
            for e in self.edges:
                if e.parent in reachable and e.child not in reachable:
                    reachable.add(e.child)
                    changed = True
        if reachable != set(ids):
            raise ValueError("every task must be reachable from some root")


def topological_order(job: JobDag) -> list[int]:
    indeg = {t.task_id: 0 for t in job.tasks}
    for e in job.edges:
        indeg[e.child] += 1
    ready = sorted(tid for tid, d in indeg.items() if d == 0)
    order = []
    while ready:
        tid = ready.pop(0)
        order.append(tid)
        for e in job.edges:
            if e.parent == tid:
                indeg[e.child] -= 1
                if indeg[e.child] == 0:
                    ready.append(e.child)
        ready.sort()
    return order


def lambda_for_utilization(
    rho: float,
    num_servers: int,
    cores_per_server: int,
    avg_task_size: float,
    tasks_per_job: float,
) -> float:
    """Job arrival rate that targets core utilization rho."""
    if not 0 < rho <= 1:
        raise ValueError("rho must be in (0, 1]")
    if min(num_servers, cores_per_server, avg_task_size, tasks_per_job) <= 0:
        raise ValueError("all workload parameters must be positive")
    return (num_servers * cores_per_server * rho) / (avg_task_size * tasks_per_job)


class PoissonArrivals:
    def __init__(self, lam: float, seed: int = 0):
        if lam <= 0:
            raise ValueError("arrival rate must be positive")
        self.lam = lam
        self.rng = np.random.default_rng(seed)

    def next_arrival(self, now: float) -> float | None:
        return now + self.rng.exponential(1.0 / self.lam)


class MmppArrivals:
    """Two-phase modulated Poisson: normal rate, then a burst at 1.5x.

    Phases alternate deterministically from t=0: `normal_duration` seconds of
    normal phase followed by `burst_duration` seconds of burst. A sampled gap
    that crosses a phase boundary is resampled from the boundary at the new
    phase's rate (exact for exponential gaps).
    """

    def __init__(
        self,
        lam: float,
        burst_multiplier: float = 1.5,
        normal_duration: float = 20.0,
        burst_duration: float = 10.0,
        seed: int = 0,
    ):
        if lam <= 0:
            raise ValueError("arrival rate must be positive")
        if burst_multiplier < 1:
            raise ValueError("burst_multiplier must be >= 1")
        self.lam = lam
        self.burst_multiplier = burst_multiplier
        self.normal_duration = normal_duration
        self.burst_duration = burst_duration
        self.period = normal_duration + burst_duration
        self.rng = np.random.default_rng(seed)

    def rate_at(self, t: float) -> float:
        phase_t = t % self.period
        if phase_t < self.normal_duration:
            return self.lam
        return self.lam * self.burst_multiplier

    def _next_boundary(self, t: float) -> float:
        cycle = math.floor(t / self.period) * self.period
        phase_t = t - cycle
        if phase_t < self.normal_duration:
            return cycle + self.normal_duration
        return cycle + self.period

    def next_arrival(self, now: float) -> float | None:
        t = now
        while True:
            rate = self.rate_at(t)
            candidate = t + self.rng.exponential(1.0 / rate)
            boundary = self._next_boundary(t)
            if candidate <= boundary:
                return candidate
            t = boundary


class TraceArrivals:
    def __init__(self, timestamps: list[float], scale: float = 1.0):
        for i in range(1, len(timestamps)):
            if timestamps[i] < timestamps[i - 1]:
                raise ValueError("trace timestamps must be nondecreasing")
        t0 = timestamps[0] if timestamps else 0.0
        self.arrivals = [t0 + (t - t0) * scale for t in timestamps]
        self._idx = 0

    def next_arrival(self, now: float) -> float | None:
        if self._idx >= len(self.arrivals):
            return None
        t = self.arrivals[self._idx]
        self._idx += 1
        return t


def ingest_trace(path, scale: float = 1.0) -> TraceArrivals:
    """Read one arrival timestamp per line; '#' comments and blanks ignored."""
    timestamps = []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            try:
                t = float(line)
            except ValueError:
                raise ValueError(f"{path}:{lineno}: cannot parse timestamp {line!r}") from None
            if timestamps and t < timestamps[-1]:
                raise ValueError(f"{path}:{lineno}: timestamps must be nondecreasing")
            timestamps.append(t)
    return TraceArrivals(timestamps, scale)


TEMPLATES = ("web_service", "web_search")


def _uniform_around(rng: np.random.Generator, mean: float, width_frac: float) -> float:
    if width_frac == 0:
        return mean
    return rng.uniform(mean * (1 - width_frac), mean * (1 + width_frac))


def make_job(
    template: str,
    rng: np.random.Generator,
    job_id: int = 0,
    arrival_time: float = 0.0,
    flow_bytes: float = 100_000.0,
    width_frac: float = 0.2,
) -> JobDag:
    """Instantiate one of the two job templates.

    web_service: two parent-child tasks around 500 ms each, one flow.
    web_search: a master task fanning out to five indexer tasks around 100 ms.
    """
    if template == "web_service":
        tasks = [TaskSpec(i, _uniform_around(rng, 0.5, width_frac)) for i in (1, 2)]
        edges = [FlowEdge(1, 2, flow_bytes)]
    elif template == "web_search":
        tasks = [TaskSpec(i, _uniform_around(rng, 0.1, width_frac)) for i in range(1, 7)]
        edges = [FlowEdge(1, i, flow_bytes) for i in range(2, 7)]
    else:
        raise ValueError(f"unknown job template {template!r}")
    job = JobDag(job_id=job_id, arrival_time=arrival_time, tasks=tasks, edges=edges)
    job.validate()
    return job


class JobStream:
    """Lazily pairs an arrival process with instantiated template jobs.

    Consuming the stream identically (same seed, same count) reproduces the
    exact workload realization, which is what lets policy comparisons share
    one workload.
    """

    def __init__(
        self,
        arrivals,
        template: str,
        seed: int = 0,
        flow_bytes: float = 100_000.0,
        width_frac: float = 0.2,
        qos_capacity: float = 10e9,
    ):
        self.arrivals = arrivals
        self.template = template
        self.rng = np.random.default_rng(seed)
        self.flow_bytes = flow_bytes
        self.width_frac = width_frac
        self.qos_capacity = qos_capacity

    def __iter__(self):
        now = 0.0
        job_id = 0
        while True:
            t = self.arrivals.next_arrival(now)
            if t is None:
                return
            now = t
            job = make_job(
                self.template,
                self.rng,
                job_id=job_id,
                arrival_time=t,
                flow_bytes=self.flow_bytes,
                width_frac=self.width_frac,
            )
            job.qos_deadline = qos_deadline(job, self.qos_capacity)
            job_id += 1
            yield job


def qos_deadline(job: JobDag, max_link_capacity: float) -> float:
    """10x the critical-path completion time at full link rate."""
    if max_link_capacity <= 0:
        raise ValueError("max_link_capacity must be positive")
    finish: dict[int, float] = {}
    by_id = {t.task_id: t for t in job.tasks}
    for tid in topological_order(job):
        start = 0.0
        for e in job.parents_of(tid):
            transfer = e.size * 8.0 / max_link_capacity
            start = max(start, finish[e.parent] + transfer)
        finish[tid] = start + by_id[tid].service_time
    return 10.0 * max(finish.values())
