"""Two-stage forwarding model.

Stage one is a router FIB: longest-prefix match to a next-hop IP, resolved
to a destination MAC through an ARP cache. Stage two is an SDN switch:
exact-match rules on destination MAC (rewrite + output port) shadowing a
plain L2 table. A flat mode collapses the pipeline to the classic design
where every FIB entry carries the physical next hop directly, so that the
two failover behaviours can be compared on the same traffic.
"""

from typing import NamedTuple

from .net import prefix_mask

FLAT = "flat"
HIER = "hier"
MODES = (FLAT, HIER)

DEFAULT_PRIORITY = 5
FAILOVER_PRIORITY = 10


class FlowRule(NamedTuple):
    match_mac: int
    rewrite_mac: int
    out_port: int
    priority: int


class Outcome(NamedTuple):
    delivered: bool
    where: str  # peer id when delivered, drop reason otherwise


DROP_NO_ROUTE = "no_route"
DROP_UNRESOLVED = "unresolved"
DROP_NO_FLOW = "no_flow"
DROP_PEER_DOWN = "peer_down"


class ArpResolver:
    """Answers address resolution for real peers and live virtual next hops.

    Real peer router addresses map to the peer's physical MAC. Virtual
    next-hop addresses are answered on behalf of the group engine, which
    owns the live vnh -> vmac mapping.
    """

    def __init__(self, peers, engine=None):
        self.peers = peers
        self.engine = engine

    def resolve(self, ip):
        if self.engine is not None:
            vmac = self.engine.vnh_to_vmac.get(ip)
            if vmac is not None:
                return vmac
        peer = self.peers.by_ip(ip)
        if peer is not None:
            return peer.mac
        return None


class RouterFib:
    """Longest-prefix-match table with an attached ARP cache.

    Installing an entry resolves its next hop immediately; entries whose
    next hop does not resolve stay installed but blackhole traffic, and the
    drops are counted by the forwarding path.
    """

    def __init__(self, mode):
        if mode not in MODES:
            raise ValueError("unknown FIB mode %r" % mode)
        self.mode = mode
        self._entries = {}  # Prefix -> nh_ip
        self._by_len = {}  # length -> {masked_ip: nh_ip}
        self._lengths = []  # descending lengths present
        self.arp_cache = {}  # nh_ip -> mac or None when unresolved
        self.change_count = 0
        self.change_times = []  # simulated us of each change, for audits
        self.unresolved_installs = 0

    def install(self, prefix, nh_ip, resolver, now_us=0):
        """Insert or rewrite one entry; resolves nh_ip through the resolver."""
        if self._entries.get(prefix) == nh_ip:
            self._touch_arp(nh_ip, resolver)
            return False
        self._entries[prefix] = nh_ip
        bucket = self._by_len.get(prefix.length)
        if bucket is None:
            bucket = self._by_len[prefix.length] = {}
            self._lengths = sorted(self._by_len, reverse=True)
        bucket[prefix.ip] = nh_ip
        self._touch_arp(nh_ip, resolver)
        self.change_count += 1
        self.change_times.append(now_us)
        return True

    def remove(self, prefix, now_us=0):
        if prefix not in self._entries:
            return False
        del self._entries[prefix]
        bucket = self._by_len[prefix.length]
        del bucket[prefix.ip]
        if not bucket:
            del self._by_len[prefix.length]
            self._lengths = sorted(self._by_len, reverse=True)
        self.change_count += 1
        self.change_times.append(now_us)
        return True

    def _touch_arp(self, nh_ip, resolver):
        mac = resolver.resolve(nh_ip)
        if mac is None:
            self.unresolved_installs += 1
        self.arp_cache[nh_ip] = mac

    def lookup(self, dst_ip):
        """Longest-prefix match; returns the next-hop IP or None."""
        for length in self._lengths:
            nh = self._by_len[length].get(dst_ip & prefix_mask(length))
            if nh is not None:
                return nh
        return None

    def entries(self):
        return self._entries.items()

    def nexthop_of(self, prefix):
        return self._entries.get(prefix)

    def __len__(self):
        return len(self._entries)


class SwitchTable:
    """Rules matched on destination MAC, highest priority wins; real MACs
    that no rule claims fall through to the plain L2 table."""

    def __init__(self):
        self._rules = {}  # match_mac -> {priority: FlowRule}
        self.l2 = {}  # mac -> port
        self.change_count = 0
        self.change_times = []

    def apply(self, rule, now_us=0):
        """Install a rule; re-installing an identical rule is a no-op."""
        bucket = self._rules.setdefault(rule.match_mac, {})
        if bucket.get(rule.priority) == rule:
            return False
        bucket[rule.priority] = rule
        self.change_count += 1
        self.change_times.append(now_us)
        return True

    def remove(self, match_mac, priority, now_us=0):
        bucket = self._rules.get(match_mac)
        if not bucket or priority not in bucket:
            return False
        del bucket[priority]
        if not bucket:
            del self._rules[match_mac]
        self.change_count += 1
        self.change_times.append(now_us)
        return True

    def lookup(self, dst_mac):
        """Returns (out_mac, out_port) or None."""
        bucket = self._rules.get(dst_mac)
        if bucket:
            rule = bucket[max(bucket)]
            return rule.rewrite_mac, rule.out_port
        port = self.l2.get(dst_mac)
        if port is not None:
            return dst_mac, port
        return None

    def rules(self):
        for bucket in self._rules.values():
            yield from bucket.values()

    def rule_count(self):
        return sum(len(b) for b in self._rules.values())


class Packet(NamedTuple):
    dst_ip: int
    dst_mac: int  # 0 until the router stage fills it in
    ts_us: int


class Dataplane:
    """Router FIB in front of a switch, plus peer liveness.

    This is the unit the simulator forwards probe traffic through; it also
    applies the rule install/remove stream coming out of the group engine.
    """

    def __init__(self, mode, peers, resolver):
        self.mode = mode
        self.peers = peers
        self.resolver = resolver
        self.fib = RouterFib(mode)
        self.switch = SwitchTable()
        self.port_owner = {}
        for peer in peers:
            self.switch.l2[peer.mac] = peer.port
            self.port_owner[peer.port] = peer.id
        self.down = set()
        self.drop_counts = {}

    def install_route(self, prefix, nh_ip, now_us=0):
        return self.fib.install(prefix, nh_ip, self.resolver, now_us)

    def withdraw_route(self, prefix, now_us=0):
        return self.fib.remove(prefix, now_us)

    def apply_switch_op(self, op, now_us=0):
        """One engine-emitted op: ("install", FlowRule) or ("remove", mac, prio)."""
        if op[0] == "install":
            self.switch.apply(op[1], now_us)
        elif op[0] == "remove":
            self.switch.remove(op[1], op[2], now_us)
        else:
            raise ValueError("unknown switch op %r" % (op[0],))

    def peer_down(self, peer_id):
        self.down.add(peer_id)

    def forward(self, dst_ip, ts_us=0):
        """Run one packet through both stages."""
        nh = self.fib.lookup(dst_ip)
        if nh is None:
            return self._drop(DROP_NO_ROUTE)
        dst_mac = self.fib.arp_cache.get(nh)
        if dst_mac is None:
            return self._drop(DROP_UNRESOLVED)
        hit = self.switch.lookup(dst_mac)
        if hit is None:
            return self._drop(DROP_NO_FLOW)
        _, port = hit
        peer_id = self.port_owner.get(port)
        if peer_id is None or peer_id in self.down:
            return self._drop(DROP_PEER_DOWN)
        return Outcome(True, peer_id)

    def forward_packet(self, packet):
        """Packet-level wrapper: returns (outcome, packet with dst_mac set)."""
        nh = self.fib.lookup(packet.dst_ip)
        mac = self.fib.arp_cache.get(nh) if nh is not None else None
        staged = packet._replace(dst_mac=mac if mac is not None else 0)
        return self.forward(packet.dst_ip, packet.ts_us), staged

    def _drop(self, reason):
        self.drop_counts[reason] = self.drop_counts.get(reason, 0) + 1
        return Outcome(False, reason)


class FibRewrite(NamedTuple):
    offset_us: int
    prefix: object
    backup_peer: object  # peer id, or None when no surviving route exists


def flat_failover_schedule(fib, rib, failed_peer, entry_step_us, first_entry_us):
    """Entry-by-entry repair plan for a flat FIB after a peer failure.

    Entry i (1-based, ascending prefix order) is rewritten to its best
    surviving route at offset first_entry_us + i * entry_step_us from the
    failure instant; the first-entry latency models the standalone
    router's own detection plus initial table write.
    """
    if fib.mode != FLAT:
        raise ValueError("flat failover schedule requires a flat FIB")
    affected = sorted(
        prefix for prefix, nh in fib.entries() if nh == failed_peer.router_ip
    )
    schedule = []
    for i, prefix in enumerate(affected, start=1):
        offset = first_entry_us + round(i * entry_step_us)
        backup = None
        for route in rib.routes(prefix):
            if route.peer != failed_peer.id:
                backup = route.peer
                break
        schedule.append(FibRewrite(offset, prefix, backup))
    return schedule
