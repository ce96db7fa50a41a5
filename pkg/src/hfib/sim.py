"""Discrete-event convergence simulation.

A run replays the scenario's route feed into the control plane, starts
fixed-interval probe flows toward a sample of prefixes, injects one peer
failure, and measures per-flow convergence at the sink.

Probe packets are not individually simulated: between state-change events
the forwarding outcome of a flow is constant, so each flow keeps a list of
(time, outcome) transitions and per-tick behaviour is recovered exactly by
arithmetic (see metrics.ProbeLog). The events that do get simulated are
the ones that change forwarding state: the failure itself, failure
detection, switch rule installs, flat-FIB entry rewrites, control-plane
reconvergence, and group garbage collection.

All simulated time is integer microseconds.
"""

import heapq
import time
from typing import NamedTuple

from .dataplane import FLAT, HIER, ArpResolver, Dataplane, flat_failover_schedule
from .failover import apply_plan, control_plane_reconverge, detect, on_peer_down
from .groups import GroupEngine, VnhAllocator
from .metrics import (
    Flow,
    MetricsReport,
    ProbeLog,
    flow_result,
    latency_stats,
    summarize,
)
from .net import ip_to_int, mac_to_int
from .routes import ANNOUNCE, Rib
from .scenario import probe_destinations, scenario_feed


class _Event(NamedTuple):
    time_us: int
    seq: int
    kind: str
    payload: object


class Simulation:
    """One scenario run. Build, then call run() once."""

    def __init__(self, scenario):
        scenario.validate()
        self.scenario = scenario
        self.peers = scenario.peer_table()
        self.engine = None
        self.flat_rib = None
        if scenario.mode == HIER:
            allocator = VnhAllocator(
                ip_to_int(scenario.vnh_base),
                mac_to_int(scenario.vmac_base),
                scenario.vnh_pool,
            )
            self.engine = GroupEngine(self.peers, allocator, scenario.quarantine_us)
        else:
            self.flat_rib = Rib()
        resolver = ArpResolver(self.peers, self.engine)
        self.dataplane = Dataplane(scenario.mode, self.peers, resolver)
        self.flows = []
        self._flow_by_prefix = {}
        self._heap = []
        self._seq = 0
        self._flat_schedule = []
        self._flat_idx = 0
        self._gc_scheduled = None
        self._last_event_time = 0
        self.replay_samples_us = []
        self.plan = None
        self.detection = None
        self.last_rule_time_us = None
        self._prepared = False

    # -- setup -----------------------------------------------------------

    def prepare(self):
        if self._prepared:
            return self
        self._replay_feed()
        for i, (prefix, dst_ip) in enumerate(probe_destinations(self.scenario)):
            flow = Flow(i, prefix, dst_ip)
            self.flows.append(flow)
            self._flow_by_prefix[prefix] = flow
        for flow in self.flows:
            flow.record(0, self.dataplane.forward(flow.dst_ip))
        if self.scenario.fail_peer is not None:
            self._push(self.scenario.fail_at_us, "fail", self.scenario.fail_peer)
        self._schedule_gc()
        self._prepared = True
        return self

    def _replay_feed(self):
        """Load the control plane before traffic starts (simulated t = 0)."""
        samples = self.replay_samples_us
        clock = time.perf_counter_ns
        if self.scenario.mode == HIER:
            engine = self.engine
            plane = self.dataplane
            for update in scenario_feed(self.scenario):
                t0 = clock()
                actions = engine.process_update(update)
                ops = engine.drain_ops()
                samples.append((clock() - t0) / 1000.0)
                for op in ops:
                    plane.apply_switch_op(op, 0)
                for action in actions:
                    if action.kind == ANNOUNCE:
                        plane.install_route(action.prefix, action.nh, 0)
                    else:
                        plane.withdraw_route(action.prefix, 0)
        else:
            rib = self.flat_rib
            plane = self.dataplane
            peers = self.peers
            for update in scenario_feed(self.scenario):
                t0 = clock()
                delta = rib.apply(update)
                old, new = delta.old, delta.new
                if not new:
                    if old:
                        plane.withdraw_route(delta.prefix, 0)
                elif not old or new[0].peer != old[0].peer:
                    plane.install_route(delta.prefix, peers[new[0].peer].router_ip, 0)
                samples.append((clock() - t0) / 1000.0)

    # -- event machinery --------------------------------------------------

    def _push(self, time_us, kind, payload=None):
        self._seq += 1
        heapq.heappush(self._heap, _Event(time_us, self._seq, kind, payload))

    def _schedule_gc(self):
        if self.engine is None:
            return
        due = self.engine.next_gc_due()
        if due is not None and due != self._gc_scheduled:
            self._gc_scheduled = due
            self._push(due, "gc")

    def events_pending(self):
        return bool(self._heap) or self._flat_idx < len(self._flat_schedule)

    def next_event(self):
        """Pop the earliest event, merging the flat rewrite stream."""
        flat_ready = self._flat_idx < len(self._flat_schedule)
        if flat_ready:
            flat_time = self._flat_schedule[self._flat_idx][0]
            if not self._heap or flat_time < self._heap[0].time_us:
                entry = self._flat_schedule[self._flat_idx]
                self._flat_idx += 1
                return _Event(entry[0], 0, "flat_rewrite", entry)
        return heapq.heappop(self._heap)

    def apply_event(self, event):
        t = event.time_us
        self._last_event_time = max(self._last_event_time, t)
        kind = event.kind
        if kind == "fail":
            self._on_fail(event.payload, t)
        elif kind == "detect":
            self._on_detect(event.payload, t)
        elif kind == "rule":
            self.dataplane.switch.apply(event.payload, t)
            self._reeval_all(t)
        elif kind == "reconverge":
            self._on_reconverge(event.payload, t)
        elif kind == "gc":
            self._gc_scheduled = None
            self.engine.run_gc(t)
            for op in self.engine.drain_ops():
                self.dataplane.apply_switch_op(op, t)
            self._reeval_all(t)
            self._schedule_gc()
        elif kind == "flat_rewrite":
            self._on_flat_rewrite(event.payload, t)
        else:
            raise ValueError("unknown event kind %r" % kind)

    def _on_fail(self, peer_id, t):
        self.dataplane.peer_down(peer_id)
        if self.scenario.mode == HIER:
            self.detection = detect(peer_id, t, self.scenario.detect_us)
            self._push(self.detection.detect_time_us, "detect", peer_id)
        else:
            # The standalone router repairs its own table entry by entry;
            # its detection latency is folded into the first-entry offset.
            schedule = flat_failover_schedule(
                self.dataplane.fib,
                self.flat_rib,
                self.peers[peer_id],
                self.scenario.entry_step_us,
                self.scenario.first_entry_us,
            )
            self._flat_schedule = [(t + item.offset_us, item) for item in schedule]
            self._flat_idx = 0
        self._reeval_all(t)

    def _on_detect(self, peer_id, t):
        engine = self.engine
        engine.clock_us = max(engine.clock_us, t)
        self.plan = on_peer_down(engine, peer_id)
        schedule = apply_plan(
            self.dataplane.switch, self.plan, t, self.scenario.rule_install_us
        )
        for install_time, rule in schedule:
            self._push(install_time, "rule", rule)
        self.last_rule_time_us = schedule[-1][0] if schedule else t
        if self.scenario.reconverge_us is not None:
            self._push(t + self.scenario.reconverge_us, "reconverge", peer_id)

    def _on_reconverge(self, peer_id, t):
        engine = self.engine
        engine.clock_us = max(engine.clock_us, t)
        actions = control_plane_reconverge(engine, peer_id)
        for op in engine.drain_ops():
            self.dataplane.apply_switch_op(op, t)
        for action in actions:
            if action.kind == ANNOUNCE:
                self.dataplane.install_route(action.prefix, action.nh, t)
            else:
                self.dataplane.withdraw_route(action.prefix, t)
        self._reeval_all(t)
        self._schedule_gc()

    def _on_flat_rewrite(self, entry, t):
        _, item = entry
        if item.backup_peer is None:
            self.dataplane.withdraw_route(item.prefix, t)
        else:
            self.dataplane.install_route(
                item.prefix, self.peers[item.backup_peer].router_ip, t
            )
        flow = self._flow_by_prefix.get(item.prefix)
        if flow is not None:
            flow.record(t, self.dataplane.forward(flow.dst_ip, t))

    def _reeval_all(self, t):
        forward = self.dataplane.forward
        for flow in self.flows:
            flow.record(t, forward(flow.dst_ip, t))

    # -- run and report ----------------------------------------------------

    def run(self):
        self.prepare()
        while self.events_pending():
            self.apply_event(self.next_event())
        return self._report()

    def horizon_us(self):
        if self.scenario.horizon_us is not None:
            return self.scenario.horizon_us
        tail = 4 * self.scenario.probe_interval_us
        return max(self._last_event_time, self.scenario.probe_start_us) + tail

    def probe_log(self):
        return ProbeLog(
            self.flows,
            self.scenario.probe_start_us,
            self.scenario.probe_interval_us,
            self.horizon_us(),
        )

    def _changes_in(self, change_times, lo, hi):
        from bisect import bisect_left, bisect_right

        if hi is None:
            return len(change_times) - bisect_left(change_times, lo)
        return bisect_right(change_times, hi) - bisect_left(change_times, lo)

    def _report(self):
        scenario = self.scenario
        log = self.probe_log()
        tallies = [log.tally(flow) for flow in self.flows]
        outage_ends = [t.outage_end_us for t in tallies if t.outage_end_us is not None]
        recovery_us = max(outage_ends) if outage_ends else None
        report = MetricsReport(
            mode=scenario.mode,
            prefix_count=scenario.prefix_count,
            probe_count=scenario.probe_count,
            interval_us=scenario.probe_interval_us,
            seed=scenario.seed,
            recovery_us=recovery_us,
            control_plane=latency_stats(self.replay_samples_us),
            rib_noop_withdrawals=(
                self.engine.rib if self.engine else self.flat_rib
            ).noop_withdrawals,
        )
        for flow, tally in zip(self.flows, tallies):
            result = flow_result(scenario.probe_interval_us, tally, flow.dst_ip)
            report.flows.append(result)
            if not result.recovered:
                report.unrecovered.append(flow.flow_id)
        report.summary = summarize([fr.convergence_us for fr in report.flows])
        if scenario.fail_peer is not None:
            fail_at = scenario.fail_at_us
            fib_times = self.dataplane.fib.change_times
            switch_times = self.dataplane.switch.change_times
            report.fib_changes_total = self._changes_in(fib_times, fail_at, None)
            report.switch_changes_total = self._changes_in(switch_times, fail_at, None)
            report.fib_changes_to_recover = self._changes_in(fib_times, fail_at, recovery_us)
            report.switch_changes_to_recover = self._changes_in(
                switch_times, fail_at, recovery_us
            )
        return report


def run(scenario):
    """Run one scenario to completion and return its MetricsReport."""
    return Simulation(scenario).run()


def run_sweep(scenario, prefix_counts, modes=(FLAT, HIER)):
    """Fixed scenario swept over prefix counts and modes; one report each."""
    reports = []
    for count in prefix_counts:
        for mode in modes:
            variant = scenario.with_overrides(
                prefix_count=count,
                probe_count=min(scenario.probe_count, count),
                mode=mode,
            )
            reports.append(run(variant))
    return reports


def bench_control_plane(updates, peers, vnh_base=None, vmac_base=None, limit=None):
    """Wall-clock latency of the engine's per-update processing.

    Feeds updates through a fresh engine and times each process_update
    call (drain included, since a real controller must also hand off the
    switch ops). Returns {count, p50_us, p99_us, max_us}.
    """
    from .scenario import DEFAULT_VMAC_BASE, DEFAULT_VNH_BASE

    allocator = VnhAllocator(
        ip_to_int(vnh_base or DEFAULT_VNH_BASE),
        mac_to_int(vmac_base or DEFAULT_VMAC_BASE),
    )
    engine = GroupEngine(peers, allocator)
    samples = []
    clock = time.perf_counter_ns
    for n, update in enumerate(updates):
        if limit is not None and n >= limit:
            break
        t0 = clock()
        engine.process_update(update)
        engine.drain_ops()
        samples.append((clock() - t0) / 1000.0)
    return latency_stats(samples)
