"""Feed-level tooling shared by the CLI and the service: replaying a feed
through the engine, verifying the online computation against the oracle,
synthetic random feeds, and peer registries for feeds that come without
one.
"""

import random
from typing import NamedTuple

from .groups import GroupEngine, OracleTracker, VnhAllocator, brute_force_groups, format_action
from .net import ip_to_int, mac_to_int
from .routes import Peer, PeerTable, Prefix, announce, withdraw
from .scenario import DEFAULT_VMAC_BASE, DEFAULT_VNH_BASE

MAX_AUTO_PEERS = 200


def numbered_peers(count):
    """p1..pN with deterministic addresses, for feeds replayed standalone."""
    if not 1 <= count <= MAX_AUTO_PEERS:
        raise ValueError("peer count must be in 1..%d" % MAX_AUTO_PEERS)
    table = PeerTable()
    for k in range(1, count + 1):
        table.add(Peer("p%d" % k, ip_to_int("10.0.%d.1" % k), 0x020000000000 + k, k))
    return table


def auto_peers(updates):
    """Peer registry inferred from a feed, in first-appearance order."""
    table = PeerTable()
    seen = {}
    for update in updates:
        if update.peer in seen:
            continue
        k = len(seen) + 1
        if k > MAX_AUTO_PEERS:
            raise ValueError("feed references more than %d peers" % MAX_AUTO_PEERS)
        seen[update.peer] = k
        table.add(Peer(update.peer, ip_to_int("10.0.%d.1" % k), 0x020000000000 + k, k))
    return table


def build_engine(peers, vnh_base=None, vmac_base=None, pool=65536, quarantine_us=5_000_000):
    allocator = VnhAllocator(
        ip_to_int(vnh_base or DEFAULT_VNH_BASE),
        mac_to_int(vmac_base or DEFAULT_VMAC_BASE),
        pool,
    )
    return GroupEngine(peers, allocator, quarantine_us)


class ReplayResult(NamedTuple):
    actions: list  # canonical one-line strings, in emission order
    updates: int
    live_groups: int
    noop_withdrawals: int


def replay_feed(updates, peers, vnh_base=None, vmac_base=None):
    """Run a feed through a fresh engine; returns the egress action lines."""
    engine = build_engine(peers, vnh_base, vmac_base)
    lines = []
    count = 0
    for update in updates:
        count += 1
        for action in engine.process_update(update):
            lines.append(format_action(action))
        engine.drain_ops()
    return ReplayResult(lines, count, engine.live_group_count(), engine.rib.noop_withdrawals)


class VerifyMismatch(NamedTuple):
    update_index: int
    prefix: str
    online: object
    oracle: object


class VerifyResult(NamedTuple):
    ok: bool
    updates: int
    prefixes: int
    live_groups: int
    mismatches: list


def random_updates(count, peers, prefix_count, seed=0, announce_ratio=0.7, base_prefix="30.0.0.0"):
    """Seeded random announce/withdraw stream; withdrawals target routes
    that are actually live so they exercise real removals."""
    rng = random.Random(seed)
    base = ip_to_int(base_prefix)
    peer_ids = [p.id for p in peers]
    live = []
    live_pos = {}
    for _ in range(count):
        if live and rng.random() > announce_ratio:
            j = rng.randrange(len(live))
            key = live[j]
            last = live.pop()
            if j < len(live):
                live[j] = last
                live_pos[last] = j
            del live_pos[key]
            peer_id, idx = key
            yield withdraw(peer_id, Prefix(base + (idx << 8), 24))
        else:
            peer_id = rng.choice(peer_ids)
            idx = rng.randrange(prefix_count)
            key = (peer_id, idx)
            if key not in live_pos:
                live_pos[key] = len(live)
                live.append(key)
            yield announce(
                peer_id,
                Prefix(base + (idx << 8), 24),
                rng.randrange(100, 300),
                rng.randrange(1, 6),
            )


def verify_feed(updates, peers, max_mismatches=10):
    """Replay a feed with the online engine and the independent oracle in
    lockstep, comparing the full prefix-binding map after every update.

    The final state is additionally cross-checked against a from-scratch
    recomputation off the RIB.
    """
    engine = build_engine(peers)
    oracle = OracleTracker()
    mismatches = []
    count = 0
    for update in updates:
        count += 1
        engine.process_update(update)
        engine.drain_ops()
        oracle.feed(update)
        if engine.binding != oracle.binding:
            for prefix in set(engine.binding) | set(oracle.binding):
                online = engine.binding.get(prefix)
                expected = oracle.binding.get(prefix)
                if online != expected:
                    mismatches.append(VerifyMismatch(count, str(prefix), online, expected))
                    if len(mismatches) >= max_mismatches:
                        break
            if len(mismatches) >= max_mismatches:
                break
    if not mismatches and engine.binding != brute_force_groups(engine.rib):
        mismatches.append(VerifyMismatch(count, "*", "binding", "brute-force recomputation"))
    return VerifyResult(
        ok=not mismatches,
        updates=count,
        prefixes=len(engine.rib),
        live_groups=engine.live_group_count(),
        mismatches=mismatches,
    )
