"""Deterministic event-driven core: event queue, flow-level max-min bandwidth
sharing, task execution on cores, and the sleep/wake ladders for line cards
and servers.

Power is piecewise constant between events; every mutation that changes a
device's draw is preceded by an energy accrual for that device, so the
ledger integral is exact.
"""

from __future__ import annotations

import heapq
from collections import deque
from dataclasses import dataclass, field

from .power import (
    ChassisPowerProfile,
    EnergyLedger,
    LineCardPowerProfile,
    ServerPowerProfile,
    ServerStateMachine,
    StateMachine,
    default_chassis_profile,
    default_linecard_profile,
    default_server_profile,
    linecard_power_components,
    server_power,
)
from .topology import FatTree, NodeId, NodeKind, Path

LC_DESCENT = ("lp1", "lp2", "lp3", "deep")
SERVER_DESCENT = ("sleep_g1", "sleep_g2")


@dataclass
class SimConfig:
    # Algorithm thresholds
    port_wake_threshold: int = 1  # pending flows above which a card wakes with no delay
    port_lpi_threshold: int = 1  # exposed for completeness; default policy ignores it
    server_queue_threshold: int = 10  # queue length at or under which a server is "available"
    server_queue_hard_cap: int = 1000
    # Delay timers (idle dwell before descending one ladder step)
    card_delay_timers: dict[str, float] = field(
        default_factory=lambda: {"lp1": 0.1, "lp2": 0.1, "lp3": 0.1, "deep": 0.1}
    )
    server_delay_timers: dict[str, float] = field(
        default_factory=lambda: {"sleep_g1": 0.1, "sleep_g2": 0.1}
    )
    port_lpi_delay: float = 1e-3  # dwell before an idle port enters LPI
    port_wake_delay: float = 0.0
    card_wake_extra_delay: float = 0.0  # wake-start delay when pending queue <= threshold
    max_card_state: str = "deep"  # deepest reachable line-card state
    single_deep_state: bool = False  # collapse the ladder to active<->deep
    agg_core_power_scale: float = 1.5
    seed: int = 0
    record_event_log: bool = False
    record_power_trace: bool = False

    def card_descent_sequence(self) -> tuple[str, ...]:
        if self.single_deep_state:
            return ("deep",)
        seq = []
        for s in LC_DESCENT:
            seq.append(s)
            if s == self.max_card_state:
                break
        return tuple(seq)


@dataclass
class FlowRt:
    fid: int
    job_id: int
    src_task: int
    dst_task: int
    size: float  # bytes
    path: Path
    bytes_remaining: float
    min_rate_for_qos: float
    rate: float = 0.0
    last_update: float = 0.0
    started: bool = False
    waiting_cards: set = field(default_factory=set)
    complete_token: int | None = None
    start_token: int | None = None


@dataclass
class TaskRt:
    job_id: int
    task_id: int
    service_time: float
    server: int
    pending_inbound: int
    compute_done: bool = False
    outstanding_flows: int = 0
    started: bool = False
    start_time: float | None = None


@dataclass
class JobRt:
    job: object  # JobDag
    tasks: dict[int, TaskRt]
    remaining: int
    servers_used: set = field(default_factory=set)
    switches_used: set = field(default_factory=set)
    dropped: bool = False
    decision: object = None


class ServerRt:
    def __init__(self, index: int, profile: ServerPowerProfile):
        self.index = index
        self.profile = profile
        self.key = ("server", index)
        self.machine = ServerStateMachine(current="idle_g0")
        self.queue: deque[TaskRt] = deque()
        self.sleep_token: int | None = None
        self.wake_token: int | None = None

    @property
    def free_cores(self) -> int:
        return self.profile.core_count - self.machine.active_cores

    def power_components(self) -> dict[tuple[str, str], float]:
        m = self.machine
        if m.waking:
            return {("platform", "wakeup"): self.profile.total_power["active"]}
        if m.current == "active":
            return {
                ("platform", "active"): self.profile.total_power["idle_g0"],
                ("cores", "active"): m.active_cores * self.profile.per_active_core,
            }
        return {("platform", m.current): self.profile.total_power[m.current]}

    def watts(self) -> float:
        return server_power(self.profile, self.machine)


class CardRt:
    def __init__(self, switch_id: NodeId, card_idx: int, ports: list[int | None],
                 profile: LineCardPowerProfile, initial_state: str):
        self.switch_id = switch_id
        self.card_idx = card_idx
        self.key = ("card", str(switch_id), card_idx)
        self.profile = profile
        self.machine = StateMachine(current=initial_state)
        self.port_links = ports  # link_id per connected port slot
        n = len(ports)
        self.port_active = [False] * n  # False = LPI
        self.port_flows = [0] * n
        self.port_pending = [0] * n
        self.port_lpi_tokens: list[int | None] = [None] * n
        self.buffered_bytes = 0.0
        self.sleep_token: int | None = None
        self.wake_token: int | None = None
        self.wake_start_token: int | None = None

    @property
    def connected_ports(self) -> int:
        return len(self.port_links)

    def counts(self) -> tuple[int, int]:
        active = sum(self.port_active)
        return active, self.connected_ports - active

    def power_components(self) -> dict[tuple[str, str], float]:
        m = self.machine
        state_for_power = "active" if m.waking else m.current
        label = "wakeup" if m.waking else m.current
        active, lpi = self.counts()
        comps = linecard_power_components(
            self.profile, state_for_power, self.buffered_bytes / 1e6, active, lpi
        )
        return {(c, label): w for c, w in comps.items()}

    def watts(self) -> float:
        return sum(self.power_components().values())


class ChassisRt:
    def __init__(self, switch_id: NodeId, profile: ChassisPowerProfile, cards: list[CardRt]):
        self.switch_id = switch_id
        self.key = ("chassis", str(switch_id))
        self.profile = profile
        self.cards = cards

    def power_components(self) -> dict[tuple[str, str], float]:
        any_up = any(c.machine.waking or c.machine.current != "deep" for c in self.cards)
        label = "active" if any_up else "all_off"
        overhead = self.profile.active_overhead if any_up else self.profile.all_off_overhead
        return {("chassis_overhead", label): overhead, ("chassis_base", "on"): self.profile.base_on}

    def watts(self) -> float:
        return sum(self.power_components().values())


def max_min_rates(link_capacity: dict[int, float], flow_links: dict[int, tuple[int, ...]]) -> dict[int, float]:
    """Progressive-filling max-min fair rates.

    link_capacity: link id -> bits/s; flow_links: flow id -> link ids on its path.
    Every flow must traverse at least one link.
    """
    residual = dict(link_capacity)
    members: dict[int, set[int]] = {lid: set() for lid in link_capacity}
    for fid, lids in flow_links.items():
        for lid in set(lids):
            members[lid].add(fid)
    unfrozen = set(flow_links)
    rates: dict[int, float] = {}
    while unfrozen:
        best = None
        for lid in sorted(members):
            live = members[lid] & unfrozen
            if not live:
                continue
            share = residual[lid] / len(live)
            if best is None or share < best[0]:
                best = (share, lid)
        if best is None:
            raise RuntimeError("flow without a constraining link")
        share, lid = best
        for fid in sorted(members[lid] & unfrozen):
            rates[fid] = share
            unfrozen.discard(fid)
            for l2 in set(flow_links[fid]):
                residual[l2] -= share
                if residual[l2] < 0:
                    residual[l2] = 0.0
    return rates


class Simulation:
    """One single-threaded simulation instance."""

    def __init__(self, topo: FatTree, job_stream, placement, routing, config: SimConfig,
                 server_profile: ServerPowerProfile | None = None,
                 edge_card_profile: LineCardPowerProfile | None = None,
                 chassis_profile: ChassisPowerProfile | None = None):
        self.topo = topo
        self.job_stream = iter(job_stream)
        self.placement = placement
        self.routing = routing
        self.cfg = config
        self.now = 0.0
        self._seq = 0
        self._heap: list = []
        self._cancelled: set[int] = set()
        self._next_token = 0
        self.event_log: list[str] = []
        self.power_trace: list[tuple[float, float]] = []
        self.workload_trace: list[str] = []

        srv_profile = server_profile or default_server_profile(topo.core_count_per_server)
        edge_profile = edge_card_profile or default_linecard_profile()
        upper_profile = edge_profile.scaled(config.agg_core_power_scale)
        self.chassis_profile = chassis_profile or default_chassis_profile()

        self.servers = [ServerRt(i, srv_profile) for i in range(topo.num_servers)]
        initial_card_state = config.card_descent_sequence()[-1]
        self.cards: dict[tuple[str, int], CardRt] = {}
        self.chassis: dict[str, ChassisRt] = {}
        for sw in topo.all_switches():
            profile = edge_profile if sw.level is NodeKind.EDGE else upper_profile
            cards = []
            for ci, lc in enumerate(sw.line_cards):
                connected = [lid for lid in lc.ports if lid is not None]
                card = CardRt(sw.id, ci, connected, profile, initial_card_state)
                self.cards[(str(sw.id), ci)] = card
                cards.append(card)
            self.chassis[str(sw.id)] = ChassisRt(sw.id, self.chassis_profile, cards)
        # port lookup: link_id -> list of (card, port slot index)
        self._link_ports: dict[int, list[tuple[CardRt, int]]] = {}
        for card in self.cards.values():
            for slot, lid in enumerate(card.port_links):
                self._link_ports.setdefault(lid, []).append((card, slot))

        self.ledger = EnergyLedger()
        for dev in self._all_devices():
            self.ledger.register(dev.key, 0.0)
        self._device_watts = {dev.key: dev.watts() for dev in self._all_devices()}
        self._dev_by_key = {dev.key: dev for dev in self._all_devices()}
        self.total_watts = sum(self._device_watts.values())
        if config.record_power_trace:
            self.power_trace.append((0.0, self.total_watts))
        self._touched: set = set()

        self.active_flows: dict[int, FlowRt] = {}
        self.blocked_flows: dict[int, FlowRt] = {}
        self._flow_seq = 0
        self.jobs: dict[int, JobRt] = {}
        self.records: list = []  # metrics.JobRecord
        self.dropped = 0
        self.qos_risk_flags = 0
        self._jobs_injected = 0
        self._jobs_open = 0  # injected jobs not yet completed or dropped
        self._jobs_to_inject: int | None = None
        self._stop_time: float | None = None
        self._card_waiters: dict[tuple, list[FlowRt]] = {}
        self.link_rates: dict[int, float] = {}

    def _all_devices(self):
        yield from self.servers
        yield from self.cards.values()
        yield from self.chassis.values()

    # ------------------------------------------------------------------ events

    def _schedule(self, time: float, kind: str, payload) -> int:
        if time < self.now - 1e-12:
            raise RuntimeError(f"event scheduled in the past: {time} < {self.now}")
        token = self._next_token
        self._next_token += 1
        heapq.heappush(self._heap, (time, self._seq, kind, payload, token))
        self._seq += 1
        return token

    def _cancel(self, token: int | None):
        if token is not None:
            self._cancelled.add(token)

    def _log(self, kind: str, seq: int, device: str, detail: str):
        if self.cfg.record_event_log:
            self.event_log.append(f"{self.now:.9f},{seq},{kind},{device},{detail}")

    # ------------------------------------------------------------- integration

    def _touch(self, dev):
        """Accrue the device's energy at its current draw up to `now`.

        Must be called before any mutation that changes the device's power.
        """
        self.ledger.accrue(dev.key, dev.power_components(), self.now)
        self._touched.add(dev.key)

    def _touch_card(self, card: CardRt):
        self._touch(card)
        self._touch(self.chassis[str(card.switch_id)])

    def _refresh_touched(self):
        changed = False
        for key in self._touched:
            dev = self._dev_by_key[key]
            w = dev.watts()
            old = self._device_watts[key]
            if w != old:
                self.total_watts += w - old
                self._device_watts[key] = w
                changed = True
        self._touched.clear()
        if changed and self.cfg.record_power_trace:
            self.power_trace.append((self.now, self.total_watts))

    def _flush_all(self):
        for dev in self._all_devices():
            self._touch(dev)
        self._refresh_touched()

    # ------------------------------------------------------------------- main

    def run(self, stop_jobs: int | None = None, stop_time: float | None = None):
        from .metrics import SimulationResult

        if stop_jobs is None and stop_time is None:
            raise ValueError("provide stop_jobs or stop_time")
        self._jobs_to_inject = stop_jobs
        self._stop_time = stop_time
        for srv in self.servers:
            self._arm_server_descent(srv)
        self._pull_next_arrival()

        while self._heap:
            time, seq, kind, payload, token = heapq.heappop(self._heap)
            if token in self._cancelled:
                self._cancelled.discard(token)
                continue
            if stop_time is not None and time > stop_time:
                break
            if time < self.now - 1e-12:
                raise RuntimeError("event time regression")
            self.now = time
            self._dispatch(kind, seq, payload)
            self._refresh_touched()
            if stop_jobs is not None and self._all_jobs_settled():
                break

        if stop_time is not None:
            self.now = stop_time
        self._flush_all()
        return SimulationResult.from_simulation(self)

    def _all_jobs_settled(self) -> bool:
        return self._jobs_injected >= (self._jobs_to_inject or 0) and self._jobs_open == 0

    def _dispatch(self, kind: str, seq: int, payload):
        handler = getattr(self, "_on_" + kind)
        handler(seq, payload)

    # --------------------------------------------------------------- arrivals

    def _pull_next_arrival(self):
        if self._jobs_to_inject is not None and self._jobs_injected >= self._jobs_to_inject:
            return
        try:
            job = next(self.job_stream)
        except StopIteration:
            return
        if self._stop_time is not None and job.arrival_time > self._stop_time:
            return
        self._jobs_injected += 1
        self._jobs_open += 1
        self._schedule(job.arrival_time, "JobArrival", job)

    def _on_JobArrival(self, seq: int, job):
        self._log("JobArrival", seq, "-", f"job{job.job_id}")
        self.workload_trace.append(
            f"{job.arrival_time:.9f},{job.job_id},{len(job.tasks)},"
            f"{sum(t.service_time for t in job.tasks):.9f},"
            f"{'+'.join(str(int(e.size)) for e in job.edges)}"
        )
        self._pull_next_arrival()

        observe = getattr(self.placement, "observe", None)
        if observe is not None:
            observe(self, job)
        decision = self.placement.place(self, job)
        if decision is None:
            self.dropped += 1
            self._jobs_open -= 1
            self._log("JobArrival", seq, "-", f"job{job.job_id} dropped")
            return
        tasks = {}
        for t in job.tasks:
            tasks[t.task_id] = TaskRt(
                job_id=job.job_id,
                task_id=t.task_id,
                service_time=t.service_time,
                server=decision.assignment[t.task_id],
                pending_inbound=len(job.parents_of(t.task_id)),
            )
        jr = JobRt(job=job, tasks=tasks, remaining=len(tasks))
        jr.decision = decision
        self.jobs[job.job_id] = jr
        for t in job.tasks:
            if tasks[t.task_id].pending_inbound == 0:
                self._assign_task(tasks[t.task_id])

    # ------------------------------------------------------------------ tasks

    def _assign_task(self, task: TaskRt):
        srv = self.servers[task.server]
        srv.queue.append(task)
        self.jobs[task.job_id].servers_used.add(task.server)
        self._try_start_tasks(srv)

    def _try_start_tasks(self, srv: ServerRt):
        m = srv.machine
        if m.waking:
            return
        if m.current != "active":
            if srv.queue:
                self._server_begin_wake(srv)
            return
        while srv.queue and m.active_cores < srv.profile.core_count:
            task = srv.queue.popleft()
            self._touch(srv)
            m.active_cores += 1
            task.started = True
            task.start_time = self.now
            self._schedule(self.now + task.service_time, "TaskComplete", task)
        if m.active_cores == 0 and not srv.queue:
            self._server_go_idle(srv)

    def _server_begin_wake(self, srv: ServerRt):
        m = srv.machine
        if m.waking:
            return
        self._touch(srv)
        self._cancel(srv.sleep_token)
        srv.sleep_token = None
        latency = srv.profile.wakeup_latency[m.current]
        m.wake_origin = m.current
        m.waking_until = self.now + latency
        srv.wake_token = self._schedule(m.waking_until, "WakeComplete", ("server", srv.index))

    def _server_go_idle(self, srv: ServerRt):
        m = srv.machine
        if m.current == "active" and m.active_cores == 0 and not srv.queue:
            self._touch(srv)
            m.current = "idle_g0"
            m.since = self.now
            self._arm_server_descent(srv)

    def _arm_server_descent(self, srv: ServerRt):
        m = srv.machine
        order = ("idle_g0",) + SERVER_DESCENT
        idx = order.index(m.current)
        if idx + 1 >= len(order):
            return
        target = order[idx + 1]
        timer = self.cfg.server_delay_timers.get(target)
        if timer is None:
            return
        fire = self.now + timer + srv.profile.entry_delay[target]
        srv.sleep_token = self._schedule(fire, "SleepTimerFire", ("server", srv.index, target))

    def _on_TaskComplete(self, seq: int, task: TaskRt):
        srv = self.servers[task.server]
        self._log("TaskComplete", seq, f"server{task.server}", f"job{task.job_id}/t{task.task_id}")
        task.compute_done = True
        jr = self.jobs[task.job_id]
        job = jr.job
        launched = 0
        for edge in job.children_of(task.task_id):
            child = jr.tasks[edge.child]
            if child.server == task.server or edge.size == 0:
                self._deliver_edge(child)
            else:
                self._launch_flow(task, child, edge, jr)
                launched += 1
        task.outstanding_flows = launched
        if launched == 0:
            self._release_core(srv)
        jr.remaining -= 1
        if jr.remaining == 0:
            self._complete_job(jr)

    def _deliver_edge(self, child: TaskRt):
        child.pending_inbound -= 1
        if child.pending_inbound == 0:
            self._assign_task(child)

    def _release_core(self, srv: ServerRt):
        self._touch(srv)
        srv.machine.active_cores -= 1
        self._try_start_tasks(srv)

    def _complete_job(self, jr: JobRt):
        from .metrics import JobRecord

        job = jr.job
        self._jobs_open -= 1
        latency = self.now - job.arrival_time
        self.records.append(
            JobRecord(
                job_id=job.job_id,
                arrival=job.arrival_time,
                completion=self.now,
                latency=latency,
                deadline=job.qos_deadline,
                met_qos=latency <= job.qos_deadline,
                servers_used=frozenset(jr.servers_used),
                switches_used=frozenset(jr.switches_used),
            )
        )

    # ------------------------------------------------------------------ flows

    def _launch_flow(self, parent: TaskRt, child: TaskRt, edge, jr: JobRt):
        path = jr.decision.paths[(edge.parent, edge.child)]
        qos_remaining = (jr.job.arrival_time + jr.job.qos_deadline) - self.now
        min_rate = float("inf") if qos_remaining <= 0 else edge.size * 8.0 / qos_remaining
        flow = FlowRt(
            fid=self._flow_seq,
            job_id=jr.job.job_id,
            src_task=edge.parent,
            dst_task=edge.child,
            size=edge.size,
            path=path,
            bytes_remaining=edge.size,
            min_rate_for_qos=min_rate,
            last_update=self.now,
        )
        self._flow_seq += 1
        for node in path.nodes:
            if node.kind is not NodeKind.SERVER:
                jr.switches_used.add(str(node))
        self._admit_flow(flow)

    def _path_cards(self, path: Path):
        seen = []
        seen_keys = set()
        for lid in path.links:
            for card, slot in self._link_ports.get(lid, ()):
                key = (str(card.switch_id), card.card_idx)
                if key not in seen_keys:
                    seen_keys.add(key)
                    seen.append(card)
        return seen

    def _path_port_slots(self, path: Path):
        for lid in path.links:
            for card, slot in self._link_ports.get(lid, ()):
                yield card, slot

    def _admit_flow(self, flow: FlowRt):
        self.blocked_flows[flow.fid] = flow
        for card, slot in self._path_port_slots(flow.path):
            card.port_flows[slot] += 1
            card.port_pending[slot] += 1
        sleeping = []
        for card in self._path_cards(flow.path):
            m = card.machine
            if m.waking or m.current != "active":
                sleeping.append(card)
        if not sleeping:
            self._start_flow(flow)
            return
        flow.waiting_cards = {(str(c.switch_id), c.card_idx) for c in sleeping}
        for card in sleeping:
            self._card_waiters.setdefault((str(card.switch_id), card.card_idx), []).append(flow)
            self._card_request_wake(card, flow.path)
        self._buffer_accounting(flow.path)

    def _card_request_wake(self, card: CardRt, path: Path):
        m = card.machine
        if m.waking:
            return
        # pending queue at the flow's entry port on this card
        q = 0
        for lid in path.links:
            for c, slot in self._link_ports.get(lid, ()):
                if c is card:
                    q = max(q, c.port_pending[slot])
        if q > self.cfg.port_wake_threshold or self.cfg.card_wake_extra_delay == 0:
            self._card_begin_wake(card)
        elif card.wake_start_token is None:
            card.wake_start_token = self._schedule(
                self.now + self.cfg.card_wake_extra_delay,
                "WakeStart",
                ("card", str(card.switch_id), card.card_idx),
            )

    def _card_begin_wake(self, card: CardRt):
        m = card.machine
        if m.waking:
            return
        self._touch_card(card)
        self._cancel(card.sleep_token)
        card.sleep_token = None
        self._cancel(card.wake_start_token)
        card.wake_start_token = None
        latency = card.profile.wakeup_latency[m.current]
        m.wake_origin = m.current
        m.waking_until = self.now + latency
        card.wake_token = self._schedule(
            m.waking_until, "WakeComplete", ("card", str(card.switch_id), card.card_idx)
        )

    def _on_WakeStart(self, seq: int, payload):
        _, sw, ci = payload
        card = self.cards[(sw, ci)]
        card.wake_start_token = None
        if not card.machine.waking and card.machine.current != "active":
            self._log("WakeStart", seq, f"{sw}/card{ci}", card.machine.current)
            self._card_begin_wake(card)

    def _on_WakeComplete(self, seq: int, payload):
        if payload[0] == "server":
            srv = self.servers[payload[1]]
            self._log("WakeComplete", seq, f"server{srv.index}", srv.machine.wake_origin or "")
            self._touch(srv)
            srv.machine.current = "active"
            srv.machine.waking_until = None
            srv.machine.wake_origin = None
            srv.machine.since = self.now
            srv.wake_token = None
            self._try_start_tasks(srv)
            return
        _, sw, ci = payload
        card = self.cards[(sw, ci)]
        self._log("WakeComplete", seq, f"{sw}/card{ci}", card.machine.wake_origin or "")
        self._touch_card(card)
        card.machine.current = "active"
        card.machine.waking_until = None
        card.machine.wake_origin = None
        card.machine.since = self.now
        card.wake_token = None
        waiters = self._card_waiters.pop((sw, ci), [])
        for flow in waiters:
            flow.waiting_cards.discard((sw, ci))
            if not flow.waiting_cards and not flow.started:
                self._start_flow(flow)

    def _start_flow(self, flow: FlowRt):
        if self.cfg.port_wake_delay > 0 and flow.start_token is None:
            lpi_somewhere = any(
                not card.port_active[slot] for card, slot in self._path_port_slots(flow.path)
            )
            if lpi_somewhere:
                flow.start_token = self._schedule(
                    self.now + self.cfg.port_wake_delay, "FlowStart", flow
                )
                return
        flow.start_token = None
        flow.started = True
        flow.last_update = self.now
        self.blocked_flows.pop(flow.fid, None)
        self.active_flows[flow.fid] = flow
        for card, slot in self._path_port_slots(flow.path):
            if card.port_pending[slot] > 0:
                card.port_pending[slot] -= 1
            if not card.port_active[slot]:
                self._touch_card(card)
                card.port_active[slot] = True
            self._cancel(card.port_lpi_tokens[slot])
            card.port_lpi_tokens[slot] = None
            self._cancel(card.sleep_token)
            card.sleep_token = None
        self._recompute_rates()

    def _on_FlowStart(self, seq: int, flow: FlowRt):
        flow.start_token = None
        self._start_flow(flow)

    def _on_FlowComplete(self, seq: int, flow: FlowRt):
        self._log("FlowComplete", seq, "-", f"job{flow.job_id}/f{flow.fid}")
        flow.complete_token = None
        flow.bytes_remaining = 0.0
        del self.active_flows[flow.fid]
        for card, slot in self._path_port_slots(flow.path):
            card.port_flows[slot] -= 1
            if card.port_flows[slot] == 0 and card.port_pending[slot] < self.cfg.port_wake_threshold:
                self._cancel(card.port_lpi_tokens[slot])
                card.port_lpi_tokens[slot] = self._schedule(
                    self.now + self.cfg.port_lpi_delay,
                    "PortLpiTimerFire",
                    ("card", str(card.switch_id), card.card_idx, slot),
                )
        self._recompute_rates()
        jr = self.jobs[flow.job_id]
        src = jr.tasks[flow.src_task]
        src.outstanding_flows -= 1
        if src.outstanding_flows == 0:
            self._release_core(self.servers[src.server])
        self._deliver_edge(jr.tasks[flow.dst_task])

    def _on_PortLpiTimerFire(self, seq: int, payload):
        _, sw, ci, slot = payload
        card = self.cards[(sw, ci)]
        card.port_lpi_tokens[slot] = None
        if card.port_flows[slot] > 0 or card.port_pending[slot] > 0:
            return
        if card.port_active[slot]:
            self._log("PortLpiTimerFire", seq, f"{sw}/card{ci}", f"port{slot}")
            self._touch_card(card)
            card.port_active[slot] = False
        if (
            not any(card.port_active)
            and not any(card.port_flows)
            and card.machine.current == "active"
            and not card.machine.waking
        ):
            self._arm_card_descent(card)

    def _arm_card_descent(self, card: CardRt):
        seq_states = self.cfg.card_descent_sequence()
        cur = card.machine.current
        if cur == "active":
            nxt = seq_states[0]
        elif cur in seq_states:
            idx = seq_states.index(cur)
            if idx + 1 >= len(seq_states):
                return
            nxt = seq_states[idx + 1]
        else:
            return
        timer = self.cfg.card_delay_timers.get(nxt, self.cfg.card_delay_timers.get("deep", 0.1))
        fire = self.now + timer + card.profile.entry_delay.get(nxt, 0.0)
        self._cancel(card.sleep_token)
        card.sleep_token = self._schedule(
            fire, "SleepTimerFire", ("card", str(card.switch_id), card.card_idx, nxt)
        )

    def _on_SleepTimerFire(self, seq: int, payload):
        if payload[0] == "server":
            _, idx, target = payload
            srv = self.servers[idx]
            srv.sleep_token = None
            m = srv.machine
            if m.waking or m.active_cores > 0 or srv.queue or m.current == "active":
                return
            self._log("SleepTimerFire", seq, f"server{idx}", target)
            self._touch(srv)
            m.current = target
            m.since = self.now
            self._arm_server_descent(srv)
            return
        _, sw, ci, target = payload
        card = self.cards[(sw, ci)]
        card.sleep_token = None
        m = card.machine
        if m.waking or any(card.port_active) or any(card.port_flows) or any(card.port_pending):
            return
        self._log("SleepTimerFire", seq, f"{sw}/card{ci}", target)
        self._touch_card(card)
        m.current = target
        m.since = self.now
        self._arm_card_descent(card)

    # -------------------------------------------------------------- bandwidth

    def _recompute_rates(self):
        """Globally re-share link bandwidth among started flows (max-min)."""
        flows = self.active_flows
        affected_cards = set()
        for flow in flows.values():
            for card in self._path_cards(flow.path):
                affected_cards.add((str(card.switch_id), card.card_idx))
        for flow in self.blocked_flows.values():
            for card in self._path_cards(flow.path):
                affected_cards.add((str(card.switch_id), card.card_idx))
        for key in affected_cards:
            self._touch_card(self.cards[key])

        for flow in flows.values():
            elapsed = self.now - flow.last_update
            if elapsed > 0:
                flow.bytes_remaining = max(
                    flow.bytes_remaining - flow.rate * elapsed / 8.0, 0.0
                )
            flow.last_update = self.now

        if flows:
            link_ids = sorted({lid for f in flows.values() for lid in f.path.links})
            caps = {lid: self.topo.links[lid].capacity for lid in link_ids}
            flow_links = {fid: f.path.links for fid, f in sorted(flows.items())}
            rates = max_min_rates(caps, flow_links)
        else:
            rates = {}

        self.link_rates = {}
        for fid, flow in flows.items():
            for lid in set(flow.path.links):
                self.link_rates[lid] = self.link_rates.get(lid, 0.0) + rates[fid]

        for fid, flow in flows.items():
            flow.rate = rates[fid]
            self._cancel(flow.complete_token)
            if flow.bytes_remaining <= 0:
                flow.complete_token = self._schedule(self.now, "FlowComplete", flow)
            elif flow.rate > 0:
                eta = self.now + flow.bytes_remaining * 8.0 / flow.rate
                flow.complete_token = self._schedule(eta, "FlowComplete", flow)
            else:
                flow.complete_token = None

        # buffered bytes per card, for the VoQ/TCAM per-MB power terms
        buffered: dict[tuple, float] = {}
        for flow in flows.values():
            for card in self._path_cards(flow.path):
                k = (str(card.switch_id), card.card_idx)
                buffered[k] = buffered.get(k, 0.0) + flow.bytes_remaining
        for flow in self.blocked_flows.values():
            for card in self._path_cards(flow.path):
                k = (str(card.switch_id), card.card_idx)
                buffered[k] = buffered.get(k, 0.0) + flow.bytes_remaining
        for key in affected_cards:
            self.cards[key].buffered_bytes = buffered.get(key, 0.0)

    def _buffer_accounting(self, path: Path):
        for card in self._path_cards(path):
            self._touch_card(card)
        self._recompute_rates()

    # ------------------------------------------------------------------ views

    def flows_on_link(self, link_id: int) -> list[FlowRt]:
        return [f for f in self.active_flows.values() if link_id in f.path.links]

    def server_available(self, index: int) -> bool:
        srv = self.servers[index]
        return len(srv.queue) <= self.cfg.server_queue_threshold

    def server_has_room(self, index: int) -> bool:
        srv = self.servers[index]
        return len(srv.queue) < self.cfg.server_queue_hard_cap


def run(topology, job_stream, placement, routing, config: SimConfig,
        stop_jobs: int | None = None, stop_time: float | None = None, **profiles):
    """Build a Simulation and run it to the stop condition."""
    sim = Simulation(topology, job_stream, placement, routing, config, **profiles)
    return sim.run(stop_jobs=stop_jobs, stop_time=stop_time)
