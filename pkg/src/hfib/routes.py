"""Route model: peers, prefixes, update messages and the per-prefix
ordered candidate list maintained by the decision process.

The decision process ranks candidate routes by (higher local_pref, shorter
AS path, lower peer id). The last step is a total tie-break so that any
two replicas fed the same updates agree bit-for-bit on route order.
"""

from bisect import insort
from typing import NamedTuple, Optional

from .net import int_to_ip, ip_to_int, mac_to_int, prefix_mask

ANNOUNCE = "announce"
WITHDRAW = "withdraw"


class FeedError(ValueError):
    """Malformed feed line; carries the line number when known."""

    def __init__(self, message, lineno=None):
        if lineno is not None:
            message = "line %d: %s" % (lineno, message)
        super().__init__(message)
        self.lineno = lineno


class Prefix(NamedTuple):
    ip: int
    length: int

    @classmethod
    def parse(cls, text, lineno=None):
        addr, sep, length = text.partition("/")
        if not sep:
            raise FeedError("prefix %r missing /length" % text, lineno)
        try:
            ip = ip_to_int(addr)
            length = int(length)
        except ValueError as exc:
            raise FeedError("prefix %r: %s" % (text, exc), lineno) from None
        if not 0 <= length <= 32:
            raise FeedError("prefix %r: length out of range" % text, lineno)
        if ip & ~prefix_mask(length):
            raise FeedError("prefix %r: host bits set" % text, lineno)
        return cls(ip, length)

    def __str__(self):
        return "%s/%d" % (int_to_ip(self.ip), self.length)


class Peer(NamedTuple):
    id: str
    router_ip: int
    mac: int
    port: int


class PeerTable:
    """Peer registry keyed by id; enforces unique ids and (mac, port) pairs."""

    def __init__(self, peers=()):
        self._by_id = {}
        self._by_ip = {}
        for peer in peers:
            self.add(peer)

    def add(self, peer):
        if peer.id in self._by_id:
            raise ValueError("duplicate peer id %r" % peer.id)
        for other in self._by_id.values():
            if (other.mac, other.port) == (peer.mac, peer.port):
                raise ValueError("peers %r and %r share (mac, port)" % (other.id, peer.id))
        self._by_id[peer.id] = peer
        self._by_ip[peer.router_ip] = peer
        return peer

    def __getitem__(self, peer_id):
        return self._by_id[peer_id]

    def __contains__(self, peer_id):
        return peer_id in self._by_id

    def __iter__(self):
        return iter(self._by_id.values())

    def __len__(self):
        return len(self._by_id)

    def get(self, peer_id):
        return self._by_id.get(peer_id)

    def by_ip(self, router_ip):
        return self._by_ip.get(router_ip)

    def ids(self):
        return list(self._by_id)


def make_peer(peer_id, router_ip, mac, port):
    """Peer from text fields, for config parsing."""
    return Peer(peer_id, ip_to_int(router_ip), mac_to_int(mac), int(port))


class BgpUpdate(NamedTuple):
    kind: str
    peer: str
    prefix: Prefix
    local_pref: Optional[int]
    as_path_len: Optional[int]


def announce(peer, prefix, local_pref, as_path_len):
    return BgpUpdate(ANNOUNCE, peer, prefix, local_pref, as_path_len)


def withdraw(peer, prefix):
    return BgpUpdate(WITHDRAW, peer, prefix, None, None)


class Route(NamedTuple):
    peer: str
    local_pref: int
    as_path_len: int


def rank_key(route):
    # Higher local_pref first, then shorter AS path, then lowest peer id.
    return (-route.local_pref, route.as_path_len, route.peer)


def decision_rank(routes):
    """Best-first ordering of candidate routes. Total and deterministic."""
    return sorted(routes, key=rank_key)


class RibDelta(NamedTuple):
    prefix: Prefix
    old: tuple
    new: tuple


class Rib:
    """Per-prefix ordered candidate routes, at most one per peer.

    Announce for an existing (peer, prefix) replaces the stored attributes
    (implicit withdraw). Emptied entries are removed rather than stored.
    """

    def __init__(self):
        self._table = {}
        self.noop_withdrawals = 0

    def apply(self, update):
        """Mutate and return the (old, new) ordered lists for the prefix."""
        prefix = update.prefix
        entry = self._table.get(prefix)
        old = tuple(entry) if entry else ()
        if update.kind == WITHDRAW:
            if entry is None:
                self.noop_withdrawals += 1
                return RibDelta(prefix, old, old)
            kept = [r for r in entry if r.peer != update.peer]
            if len(kept) == len(entry):
                self.noop_withdrawals += 1
                return RibDelta(prefix, old, old)
            if kept:
                self._table[prefix] = kept
            else:
                del self._table[prefix]
            return RibDelta(prefix, old, tuple(kept))
        route = Route(update.peer, update.local_pref, update.as_path_len)
        if entry is None:
            self._table[prefix] = [route]
            return RibDelta(prefix, old, (route,))
        kept = [r for r in entry if r.peer != update.peer]
        insort(kept, route, key=rank_key)
        self._table[prefix] = kept
        return RibDelta(prefix, old, tuple(kept))

    def routes(self, prefix):
        entry = self._table.get(prefix)
        return tuple(entry) if entry else ()

    def entries(self):
        return self._table.items()

    def prefixes_via(self, peer_id):
        """All prefixes for which this peer currently holds a route."""
        return [p for p, entry in self._table.items() if any(r.peer == peer_id for r in entry)]

    def __len__(self):
        return len(self._table)

    def __contains__(self, prefix):
        return prefix in self._table


def parse_update(line, lineno=None):
    """Decode one feed line.

    Grammar: ``A <peer> <prefix>/<len> <local_pref> <as_path_len>`` or
    ``W <peer> <prefix>/<len>``.
    """
    fields = line.split()
    if not fields:
        raise FeedError("empty line", lineno)
    kind = fields[0]
    if kind == "A":
        if len(fields) != 5:
            raise FeedError("announce needs 5 fields, got %d" % len(fields), lineno)
        prefix = Prefix.parse(fields[2], lineno)
        try:
            local_pref = int(fields[3])
        except ValueError:
            raise FeedError("bad local_pref %r" % fields[3], lineno) from None
        try:
            as_path_len = int(fields[4])
        except ValueError:
            raise FeedError("bad as_path_len %r" % fields[4], lineno) from None
        if as_path_len < 0:
            raise FeedError("as_path_len must be >= 0", lineno)
        return announce(fields[1], prefix, local_pref, as_path_len)
    if kind == "W":
        if len(fields) != 3:
            raise FeedError("withdraw needs 3 fields, got %d" % len(fields), lineno)
        return withdraw(fields[1], Prefix.parse(fields[2], lineno))
    raise FeedError("unknown message kind %r" % kind, lineno)


def iter_feed(lines):
    """Updates from an iterable of text lines; skips comments and blanks."""
    for lineno, line in enumerate(lines, start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        yield parse_update(stripped, lineno)


def read_feed(path):
    with open(path, "r", encoding="utf-8") as handle:
        yield from iter_feed(handle)
