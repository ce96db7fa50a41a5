"""Probe measurement and reporting.

Probe flows send one packet per interval at a fixed phase. The simulator
records, per flow, only the instants where the forwarding outcome changes;
everything here is derived from those transition lists with exact integer
arithmetic. Convergence per flow is the classic sink-side measure: the
largest inter-delivery gap minus the nominal interval, clamped at zero.
"""

from dataclasses import dataclass, field
from typing import List, NamedTuple, Optional

from .net import int_to_ip

CSV_HEADER = "flow_id,dst_ip,mode,prefix_count,convergence_us,dropped,recovered"
SUMMARY_KEYS = ("p5", "p50", "p95", "max")


class Flow:
    """One probed destination and its outcome-transition history."""

    __slots__ = ("flow_id", "prefix", "dst_ip", "transitions")

    def __init__(self, flow_id, prefix, dst_ip):
        self.flow_id = flow_id
        self.prefix = prefix
        self.dst_ip = dst_ip
        self.transitions = []  # (t_us, Outcome), strictly increasing t

    def record(self, t_us, outcome):
        if self.transitions and self.transitions[-1][0] == t_us:
            # Several state changes at one instant: only the final state is
            # ever observable, so collapse them.
            self.transitions[-1] = (t_us, outcome)
            if len(self.transitions) >= 2 and self.transitions[-2][1] == outcome:
                self.transitions.pop()
            return
        if self.transitions and self.transitions[-1][1] == outcome:
            return
        self.transitions.append((t_us, outcome))

    def current(self):
        return self.transitions[-1][1] if self.transitions else None


class FlowTally(NamedTuple):
    flow_id: int
    dst_ip: int
    generated: int
    delivered: int
    dropped: int
    max_gap_us: Optional[int]
    last_delivery_us: Optional[int]
    outage_end_us: Optional[int]  # end of the last observed loss window
    final_delivered: bool


class ProbeLog:
    """Per-flow delivery history over [start_us, horizon_us], inclusive."""

    def __init__(self, flows, start_us, interval_us, horizon_us):
        self.flows = flows
        self.start_us = start_us
        self.interval_us = interval_us
        self.horizon_us = horizon_us

    def _segments(self, flow):
        """(seg_start, seg_end_exclusive, outcome) covering the probe window."""
        transitions = flow.transitions
        end = self.horizon_us + 1
        for i, (t, outcome) in enumerate(transitions):
            seg_end = transitions[i + 1][0] if i + 1 < len(transitions) else end
            if seg_end > t:
                yield t, seg_end, outcome

    def _ticks_in(self, seg_start, seg_end):
        """(first_tick, count) for probe instants in [seg_start, seg_end)."""
        phase = self.start_us
        step = self.interval_us
        if seg_end <= phase:
            return None, 0
        k = max(0, -((phase - seg_start) // step))
        first = phase + k * step
        if first >= seg_end:
            return None, 0
        count = (seg_end - 1 - first) // step + 1
        return first, count

    def tally(self, flow):
        delivered = 0
        dropped = 0
        max_gap = None
        last_delivery = None
        outage_end = None
        final_delivered = False
        for seg_start, seg_end, outcome in self._segments(flow):
            first, count = self._ticks_in(seg_start, seg_end)
            if count == 0:
                continue
            if outcome.delivered:
                if last_delivery is not None:
                    gap = first - last_delivery
                    if max_gap is None or gap > max_gap:
                        max_gap = gap
                delivered += count
                last_delivery = first + (count - 1) * self.interval_us
                final_delivered = True
            else:
                dropped += count
                outage_end = seg_end
                final_delivered = False
        return FlowTally(
            flow_id=flow.flow_id,
            dst_ip=flow.dst_ip,
            generated=delivered + dropped,
            delivered=delivered,
            dropped=dropped,
            max_gap_us=max_gap,
            last_delivery_us=last_delivery,
            outage_end_us=outage_end,
            final_delivered=final_delivered,
        )

    def generated_ticks(self):
        """Independent count of probe instants in the window, per flow."""
        if self.horizon_us < self.start_us:
            return 0
        return (self.horizon_us - self.start_us) // self.interval_us + 1

    def delivery_times(self, flow):
        """Materialized delivery timestamps; for tests and small runs only."""
        times = []
        for seg_start, seg_end, outcome in self._segments(flow):
            if not outcome.delivered:
                continue
            first, count = self._ticks_in(seg_start, seg_end)
            for i in range(count):
                times.append(first + i * self.interval_us)
        return times

    def drops_at_or_after(self, flow, t_us):
        """Dropped probe instants at or after t_us; the blackhole check."""
        total = 0
        for seg_start, seg_end, outcome in self._segments(flow):
            if outcome.delivered or seg_end <= t_us:
                continue
            first, count = self._ticks_in(max(seg_start, t_us), seg_end)
            total += count
        return total


def measure_convergence(log, probe_interval_us=None):
    """Per-flow convergence in us: (max inter-delivery gap) - interval,
    clamped at zero. Flows with fewer than two deliveries come back as
    None: they never recovered (or never started) and must be flagged.
    """
    interval = probe_interval_us if probe_interval_us is not None else log.interval_us
    out = {}
    for flow in log.flows:
        tally = log.tally(flow)
        if tally.delivered < 2 or not tally.final_delivered:
            out[flow.flow_id] = None
        elif tally.max_gap_us is None:
            out[flow.flow_id] = 0
        else:
            out[flow.flow_id] = max(0, tally.max_gap_us - interval)
    return out


def percentile(values, pct):
    """Nearest-rank percentile over a non-empty list."""
    ordered = sorted(values)
    rank = max(1, -(-pct * len(ordered) // 100))
    return ordered[rank - 1]


class FlowResult(NamedTuple):
    flow_id: int
    dst_ip: str
    convergence_us: Optional[int]
    generated: int
    delivered: int
    dropped: int
    recovered: bool


@dataclass
class MetricsReport:
    mode: str
    prefix_count: int
    probe_count: int
    interval_us: int
    seed: int
    flows: List[FlowResult] = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    fib_changes_total: int = 0
    switch_changes_total: int = 0
    fib_changes_to_recover: int = 0
    switch_changes_to_recover: int = 0
    recovery_us: Optional[int] = None
    control_plane: Optional[dict] = None  # wall-clock; never in the CSV
    unrecovered: List[int] = field(default_factory=list)
    rib_noop_withdrawals: int = 0

    @property
    def ok(self):
        return not self.unrecovered

    def max_convergence_us(self):
        return self.summary.get("max")


def summarize(convergences):
    """Distribution stats over measured flows; None-safe."""
    measured = [c for c in convergences if c is not None]
    if not measured:
        return {key: None for key in SUMMARY_KEYS}
    return {
        "p5": percentile(measured, 5),
        "p50": percentile(measured, 50),
        "p95": percentile(measured, 95),
        "max": max(measured),
    }


def _csv_value(value):
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    return str(value)


def report_rows(report):
    """Data + summary rows in the fixed CSV column order.

    A report with no flows produces no rows at all, so an empty run comes
    out as a header-only file.
    """
    rows = []
    if not report.flows:
        return rows
    for fr in report.flows:
        rows.append(
            (
                str(fr.flow_id),
                fr.dst_ip,
                report.mode,
                str(report.prefix_count),
                _csv_value(fr.convergence_us),
                str(fr.dropped),
                _csv_value(fr.recovered),
            )
        )
    for key in SUMMARY_KEYS:
        rows.append(
            (
                key,
                "",
                report.mode,
                str(report.prefix_count),
                _csv_value(report.summary.get(key)),
                "",
                "",
            )
        )
    return rows


def render_csv(reports):
    """CSV text for one or more reports; byte-stable across identical runs."""
    lines = [CSV_HEADER]
    for report in reports:
        for row in report_rows(report):
            lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def emit_report(report, out_path):
    """Write a run's CSV; identical inputs produce identical bytes."""
    with open(out_path, "w", encoding="utf-8", newline="") as handle:
        handle.write(render_csv([report]))


def emit_sweep(reports, out_path):
    with open(out_path, "w", encoding="utf-8", newline="") as handle:
        handle.write(render_csv(reports))


def flow_result(report_interval_us, tally, dst_ip_int):
    convergence = None
    if tally.delivered >= 2 and tally.final_delivered:
        convergence = max(0, (tally.max_gap_us or report_interval_us) - report_interval_us)
    recovered = tally.delivered >= 2 and tally.final_delivered
    return FlowResult(
        flow_id=tally.flow_id,
        dst_ip=int_to_ip(dst_ip_int),
        convergence_us=convergence,
        generated=tally.generated,
        delivered=tally.delivered,
        dropped=tally.dropped,
        recovered=recovered,
    )


def latency_stats(samples_us):
    """p50/p99/max over wall-clock latency samples (microseconds)."""
    if not samples_us:
        return {"count": 0, "p50_us": None, "p99_us": None, "max_us": None}
    return {
        "count": len(samples_us),
        "p50_us": percentile(samples_us, 50),
        "p99_us": percentile(samples_us, 99),
        "max_us": max(samples_us),
    }
