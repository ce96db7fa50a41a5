"""Online backup-group computation over a BGP-style update stream.

Every prefix is bound either to a single real next hop or to an ordered
(primary, backup) peer pair. Each distinct pair in use gets a stable
(virtual next-hop IP, virtual MAC) allocation; announcements toward the
protected router carry the virtual next hop, so the router's FIB entries
become pointers that the switch resolves to a physical port. A routing
change only produces output when it moves a prefix's first or second
choice, which keeps churn toward the router proportional to real
topology change, not to update volume.

The engine is strictly deterministic: replicas fed the same update
sequence emit identical announcements and identical virtual allocations,
so standby instances need no state synchronisation.
"""

import heapq
from typing import NamedTuple, Optional

from .dataplane import DEFAULT_PRIORITY, FAILOVER_PRIORITY, FlowRule
from .net import IP_MAX, MAC_MAX
from .routes import ANNOUNCE, WITHDRAW, Rib, decision_rank

REAL = "nh"
GROUP = "grp"


class AllocatorExhausted(RuntimeError):
    """Virtual next-hop pool ran out; a configuration error, not a runtime one."""


class InvariantViolation(RuntimeError):
    """Internal bookkeeping disagrees with itself; always a bug, never input."""


class VnhAllocator:
    """Counter-based allocator over configured base values.

    Allocation k hands out (base_vnh + k, base_vmac + k). The counter never
    rewinds, so a (vnh, vmac) pair is never reissued even after its group
    is reclaimed; replicas allocating in the same order produce the same
    addresses.
    """

    def __init__(self, base_vnh, base_vmac, pool_size=65536):
        if base_vnh + pool_size - 1 > IP_MAX:
            raise ValueError("vnh pool overflows IPv4 space")
        if base_vmac + pool_size - 1 > MAC_MAX:
            raise ValueError("vmac pool overflows MAC space")
        self.base_vnh = base_vnh
        self.base_vmac = base_vmac
        self.pool_size = pool_size
        self.counter = 0

    def allocate(self):
        if self.counter >= self.pool_size:
            raise AllocatorExhausted(
                "virtual next-hop pool exhausted after %d allocations" % self.counter
            )
        k = self.counter
        self.counter += 1
        return self.base_vnh + k, self.base_vmac + k


class BackupGroup:
    __slots__ = ("primary", "backup", "vnh", "vmac", "refcount", "seq", "release_due")

    def __init__(self, primary, backup, vnh, vmac, seq):
        self.primary = primary
        self.backup = backup
        self.vnh = vnh
        self.vmac = vmac
        self.refcount = 0
        self.seq = seq
        self.release_due = None  # simulated us when GC may reclaim, if idle

    def pair(self):
        return (self.primary, self.backup)


class EgressAction(NamedTuple):
    kind: str
    prefix: object
    nh: Optional[int]  # announce only: real router_ip or a vnh


def format_action(action):
    """Canonical one-line form, used for replica comparison and the CLI."""
    from .net import int_to_ip

    if action.kind == ANNOUNCE:
        return "announce %s nh %s" % (action.prefix, int_to_ip(action.nh))
    return "withdraw %s" % (action.prefix,)


class GroupEngine:
    """State machine behind process_update; one logical writer per instance."""

    def __init__(self, peers, allocator, quarantine_us=5_000_000):
        self.peers = peers
        self.allocator = allocator
        self.quarantine_us = quarantine_us
        self.rib = Rib()
        self.groups = {}  # (primary, backup) -> BackupGroup, creation order
        self.binding = {}  # Prefix -> (REAL, peer) | (GROUP, primary, backup)
        self.vnh_to_vmac = {}  # live allocations, answered by the ARP resolver
        self.pending_ops = []  # switch ops not yet drained by the dataplane
        self.down_peers = set()
        self.clock_us = 0
        self._gc_heap = []  # (due_us, seq, pair)
        self._gc_seq = 0
        self._binding_cache = {}  # pair -> shared binding tuple
        self.updates_processed = 0

    # -- update path ---------------------------------------------------

    def process_update(self, update):
        """Apply one update; returns the announcements/withdrawals to emit.

        Output cases, driven by the prefix's ordered candidate list before
        (old) and after (new) the update:
          new empty            -> withdraw the prefix
          single candidate     -> announce its real next hop
          (1st, 2nd) changed   -> announce the pair's virtual next hop,
                                  allocating the pair on first use
          otherwise            -> silence
        A shrink from two candidates to one announces the survivor's real
        next hop rather than forwarding the withdraw, so the router never
        loses a destination that still has a route.
        """
        if update.kind == ANNOUNCE and update.peer not in self.peers:
            raise KeyError("unknown peer %r" % update.peer)
        self.updates_processed += 1
        delta = self.rib.apply(update)
        old, new = delta.old, delta.new
        if new == old:
            return []
        prefix = delta.prefix
        if not new:
            self._rebind(prefix, None)
            return [EgressAction(WITHDRAW, prefix, None)]
        if not old or len(new) == 1:
            best = new[0]
            self._rebind(prefix, (REAL, best.peer))
            return [EgressAction(ANNOUNCE, prefix, self.peers[best.peer].router_ip)]
        pair = (new[0].peer, new[1].peer)
        if len(old) >= 2 and pair == (old[0].peer, old[1].peer):
            return []
        group = self._ensure_group(pair)
        self._rebind(prefix, self._group_binding(pair))
        return [EgressAction(ANNOUNCE, prefix, group.vnh)]

    def _group_binding(self, pair):
        # One shared tuple per pair keeps the binding map small at 512k prefixes.
        binding = self._binding_cache.get(pair)
        if binding is None:
            binding = self._binding_cache[pair] = (GROUP, pair[0], pair[1])
        return binding

    def _ensure_group(self, pair):
        group = self.groups.get(pair)
        if group is not None:
            return group
        if pair[0] == pair[1]:
            raise InvariantViolation("degenerate pair %r" % (pair,))
        vnh, vmac = self.allocator.allocate()
        group = BackupGroup(pair[0], pair[1], vnh, vmac, len(self.groups))
        self.groups[pair] = group
        self.vnh_to_vmac[vnh] = vmac
        primary = self.peers[pair[0]]
        self.pending_ops.append(
            ("install", FlowRule(vmac, primary.mac, primary.port, DEFAULT_PRIORITY))
        )
        return group

    def _rebind(self, prefix, binding):
        old = self.binding.get(prefix)
        if old == binding:
            return
        if old is not None and old[0] == GROUP:
            self.release((old[1], old[2]))
        if binding is None:
            self.binding.pop(prefix, None)
        else:
            self.binding[prefix] = binding
            if binding[0] == GROUP:
                self.retain((binding[1], binding[2]))

    # -- group lifecycle -----------------------------------------------

    def retain(self, pair):
        group = self.groups[pair]
        group.refcount += 1
        group.release_due = None  # cancels any pending quarantine

    def release(self, pair):
        """Drop one prefix reference; schedules reclamation when idle."""
        group = self.groups[pair]
        group.refcount -= 1
        if group.refcount < 0:
            raise InvariantViolation("refcount below zero for %r" % (pair,))
        if group.refcount == 0:
            due = self.clock_us + self.quarantine_us
            group.release_due = due
            self._gc_seq += 1
            heapq.heappush(self._gc_heap, (due, self._gc_seq, pair))

    def next_gc_due(self):
        while self._gc_heap:
            due, _, pair = self._gc_heap[0]
            group = self.groups.get(pair)
            if group is None or group.release_due != due:
                heapq.heappop(self._gc_heap)  # cancelled or superseded
                continue
            return due
        return None

    def run_gc(self, now_us):
        """Reclaim groups whose quarantine has expired; returns switch ops."""
        self.clock_us = max(self.clock_us, now_us)
        ops = []
        while self._gc_heap and self._gc_heap[0][0] <= now_us:
            due, _, pair = heapq.heappop(self._gc_heap)
            group = self.groups.get(pair)
            if group is None or group.release_due != due or group.refcount != 0:
                continue
            del self.groups[pair]
            del self.vnh_to_vmac[group.vnh]
            ops.append(("remove", group.vmac, DEFAULT_PRIORITY))
            ops.append(("remove", group.vmac, FAILOVER_PRIORITY))
        self.pending_ops.extend(ops)
        return ops

    def drain_ops(self):
        ops = self.pending_ops
        self.pending_ops = []
        return ops

    # -- inspection ----------------------------------------------------

    def live_group_count(self):
        return len(self.groups)

    def groups_with_primary(self, peer_id):
        return [g for pair, g in self.groups.items() if pair[0] == peer_id]

    def check_consistency(self):
        """Full cross-check of binding vs RIB vs refcounts; raises on drift."""
        expected = brute_force_groups(self.rib)
        if expected != self.binding:
            raise InvariantViolation("binding diverged from RIB contents")
        counts = {}
        for binding in self.binding.values():
            if binding[0] == GROUP:
                pair = (binding[1], binding[2])
                counts[pair] = counts.get(pair, 0) + 1
        for pair, group in self.groups.items():
            if group.refcount != counts.get(pair, 0):
                raise InvariantViolation("refcount drift for %r" % (pair,))
        for pair, count in counts.items():
            if pair not in self.groups:
                raise InvariantViolation("bound pair %r has no group" % (pair,))


def max_group_count(peer_count):
    """Upper bound on live groups: one per ordered peer pair."""
    return peer_count * (peer_count - 1)


def brute_force_groups(rib):
    """Recompute each prefix's binding from scratch, straight off the RIB.

    Independent of the online path: re-ranks every candidate set and takes
    the first one or two entries. This is the oracle the engine is checked
    against.
    """
    result = {}
    for prefix, entry in rib.entries():
        ranked = decision_rank(entry)
        if len(ranked) == 1:
            result[prefix] = (REAL, ranked[0].peer)
        else:
            result[prefix] = (GROUP, ranked[0].peer, ranked[1].peer)
    return result


class OracleTracker:
    """Shadow computation for per-update verification.

    Keeps its own raw (prefix, peer) -> attributes store, updated with
    plain dict operations, and recomputes the touched prefix's binding
    from scratch on every update. Comparing its full binding map against
    the engine's after each update costs one C-speed dict comparison.
    """

    def __init__(self):
        self.routes = {}  # Prefix -> {peer: (local_pref, as_path_len)}
        self.binding = {}

    def feed(self, update):
        prefix = update.prefix
        per_peer = self.routes.get(prefix)
        if update.kind == ANNOUNCE:
            if per_peer is None:
                per_peer = self.routes[prefix] = {}
            per_peer[update.peer] = (update.local_pref, update.as_path_len)
        else:
            if per_peer is None or update.peer not in per_peer:
                return
            del per_peer[update.peer]
            if not per_peer:
                del self.routes[prefix]
                self.binding.pop(prefix, None)
                return
        ranked = sorted(
            per_peer.items(), key=lambda item: (-item[1][0], item[1][1], item[0])
        )
        if len(ranked) == 1:
            self.binding[prefix] = (REAL, ranked[0][0])
        else:
            self.binding[prefix] = (GROUP, ranked[0][0], ranked[1][0])
