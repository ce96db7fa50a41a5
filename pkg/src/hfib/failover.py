"""Data-plane failover: peer-down detection to switch rewrite rules.

A peer failure is repaired by one rule per backup group whose primary is
the failed peer: match the group's virtual MAC, rewrite to the backup's
physical MAC, output the backup's port. The rule count is bounded by the
number of peers, never by the number of prefixes, which is the whole
point of the two-stage table. Control-plane reconvergence (the withdrawals
that eventually follow the failure) is handled separately and can land at
its own leisurely pace because failover rules keep shadowing the stale
groups until garbage collection.
"""

from typing import NamedTuple

from .dataplane import FAILOVER_PRIORITY, FlowRule
from .routes import withdraw


class DetectionEvent(NamedTuple):
    peer: str
    fail_time_us: int
    detect_time_us: int


def detect(peer, fail_time_us, detect_delay_us):
    if detect_delay_us < 0:
        raise ValueError("detection delay must be >= 0")
    return DetectionEvent(peer, fail_time_us, fail_time_us + detect_delay_us)


class FailoverPlan(NamedTuple):
    rules: tuple
    affected_groups: tuple  # (primary, backup) pairs, in group creation order


def on_peer_down(engine, peer_id):
    """Rewrite rules for every live group whose primary is the failed peer.

    Groups where the peer is only the backup are left alone; their traffic
    still flows through the primary.
    """
    if peer_id not in engine.peers:
        raise KeyError("unknown peer %r" % peer_id)
    engine.down_peers.add(peer_id)
    rules = []
    affected = []
    for pair, group in engine.groups.items():
        if pair[0] != peer_id:
            continue
        backup = engine.peers[pair[1]]
        rules.append(FlowRule(group.vmac, backup.mac, backup.port, FAILOVER_PRIORITY))
        affected.append(pair)
    return FailoverPlan(tuple(rules), tuple(affected))


def apply_plan(table, plan, detect_time_us, rule_delay_us):
    """Activation schedule for a plan: rule i lands at detect + (i+1)*delay.

    Returns (install_time_us, rule) pairs; the caller installs each rule
    into the table at its time (the simulator does this via events). Until
    a rule's install time, lookups keep seeing the group's default rule.
    """
    return [
        (detect_time_us + (i + 1) * rule_delay_us, rule)
        for i, rule in enumerate(plan.rules)
    ]


def install_plan(table, plan, now_us=0):
    """Install every plan rule immediately; idempotent."""
    for rule in plan.rules:
        table.apply(rule, now_us)


def control_plane_reconverge(engine, peer_id):
    """Synthesize the failed peer's withdrawals and run them through the
    group engine; returns the resulting egress actions in order.

    Prefixes whose best surviving pair changes get rebound (new or reused
    groups, or a real next hop when only one candidate remains). Forwarding
    stays intact throughout: failover rules are not touched here, so a
    prefix keeps its detour until its rebinding announcement lands.
    """
    if peer_id not in engine.down_peers:
        raise ValueError("peer %r is not marked down" % peer_id)
    affected = engine.rib.prefixes_via(peer_id)
    actions = []
    for prefix in affected:
        actions.extend(engine.process_update(withdraw(peer_id, prefix)))
    return actions
