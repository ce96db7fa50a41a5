"""Scenario definition and loading.

Scenarios are human-editable key = value text with one ``[peer <id>]``
section per peer. Everything has a default except the peer list, so a
minimal file is just two peer sections. When no feed file is given, a
synthetic full-table feed is generated: every peer announces every
prefix, with per-peer local_pref/as_path_len deciding preference.
"""

import random
from dataclasses import dataclass, replace
from typing import List, Optional

from .dataplane import HIER, MODES
from .net import ip_to_int, mac_to_int
from .routes import Peer, PeerTable, Prefix, announce, iter_feed

# Flat-FIB repair calibration: the first entry lands 375 ms after the
# failure and the full 512k-entry table takes 150 s, so each further entry
# costs (150e6 - 375e3) / 512000 microseconds.
FLAT_FIRST_ENTRY_US = 375_000
FLAT_ENTRY_STEP_US = (150_000_000 - FLAT_FIRST_ENTRY_US) / 512_000

DEFAULT_VNH_BASE = "10.200.0.1"
DEFAULT_VMAC_BASE = "0a:53:43:00:00:01"


class ScenarioError(ValueError):
    """Invalid scenario content; message names the offending field."""


@dataclass(frozen=True)
class PeerSpec:
    id: str
    router_ip: str
    mac: str
    port: int
    local_pref: int = 100
    as_path_len: int = 3


@dataclass(frozen=True)
class Scenario:
    peers: List[PeerSpec]
    mode: str = HIER
    prefix_count: int = 1000
    probe_count: int = 100
    probe_interval_us: int = 1000
    probe_start_us: int = 0
    fail_peer: Optional[str] = None
    fail_at_us: int = 1_000_000
    detect_us: int = 100_000
    rule_install_us: int = 5_000
    entry_step_us: float = FLAT_ENTRY_STEP_US
    first_entry_us: int = FLAT_FIRST_ENTRY_US
    reconverge_us: Optional[int] = 1_000_000  # after detection; None disables
    quarantine_us: int = 5_000_000
    vnh_base: str = DEFAULT_VNH_BASE
    vmac_base: str = DEFAULT_VMAC_BASE
    vnh_pool: int = 65536
    base_prefix: str = "20.0.0.0"
    seed: int = 0
    feed_path: Optional[str] = None
    feed_text: Optional[str] = None
    horizon_us: Optional[int] = None

    def validate(self):
        if self.mode not in MODES:
            raise ScenarioError("mode must be one of %s, got %r" % ("/".join(MODES), self.mode))
        if not self.peers:
            raise ScenarioError("at least one [peer] section is required")
        ids = [p.id for p in self.peers]
        if len(set(ids)) != len(ids):
            raise ScenarioError("duplicate peer id in peers")
        if self.fail_peer is not None and self.fail_peer not in ids:
            raise ScenarioError("fail_peer %r is not a defined peer" % self.fail_peer)
        if self.prefix_count < 1:
            raise ScenarioError("prefix_count must be >= 1")
        if self.probe_count < 1:
            raise ScenarioError("probe_count must be >= 1")
        if self.probe_count > self.prefix_count:
            raise ScenarioError("probe_count exceeds prefix_count")
        for name in (
            "probe_interval_us",
            "probe_start_us",
            "fail_at_us",
            "detect_us",
            "rule_install_us",
            "first_entry_us",
            "quarantine_us",
        ):
            if getattr(self, name) < 0:
                raise ScenarioError("%s must be >= 0" % name)
        if self.probe_interval_us == 0:
            raise ScenarioError("probe_interval_us must be > 0")
        if self.entry_step_us < 0:
            raise ScenarioError("entry_step_us must be >= 0")
        if self.reconverge_us is not None and self.reconverge_us < 0:
            raise ScenarioError("reconverge_us must be >= 0")
        if self.vnh_pool < 1:
            raise ScenarioError("vnh_pool must be >= 1")
        try:
            ip_to_int(self.vnh_base)
            ip_to_int(self.base_prefix)
        except ValueError as exc:
            raise ScenarioError(str(exc)) from None
        try:
            mac_to_int(self.vmac_base)
        except ValueError as exc:
            raise ScenarioError(str(exc)) from None
        for spec in self.peers:
            try:
                ip_to_int(spec.router_ip)
                mac_to_int(spec.mac)
            except ValueError as exc:
                raise ScenarioError("peer %s: %s" % (spec.id, exc)) from None
        return self

    def peer_table(self):
        table = PeerTable()
        for spec in self.peers:
            table.add(Peer(spec.id, ip_to_int(spec.router_ip), mac_to_int(spec.mac), spec.port))
        return table

    def with_overrides(self, **kwargs):
        return replace(self, **kwargs).validate()


_GLOBAL_KEYS = {
    "mode": str,
    "prefixes": int,
    "probes": int,
    "probe_interval_us": int,
    "probe_start_us": int,
    "fail_peer": str,
    "fail_at_us": int,
    "detect_us": int,
    "rule_install_us": int,
    "entry_step_us": float,
    "first_entry_us": int,
    "reconverge_us": str,  # integer or "off"
    "quarantine_us": int,
    "vnh_base": str,
    "vmac_base": str,
    "vnh_pool": int,
    "base_prefix": str,
    "seed": int,
    "feed": str,
    "horizon_us": int,
}

_KEY_TO_FIELD = {
    "prefixes": "prefix_count",
    "probes": "probe_count",
    "feed": "feed_path",
}

_PEER_KEYS = {
    "ip": str,
    "mac": str,
    "port": int,
    "local_pref": int,
    "as_path_len": int,
}


def parse_scenario(text):
    """Scenario from file content; raises ScenarioError naming the field."""
    globals_found = {}
    peers = []
    current_peer = None

    def close_peer():
        nonlocal current_peer
        if current_peer is None:
            return
        peer_id, values = current_peer
        for required in ("ip", "mac", "port"):
            if required not in values:
                raise ScenarioError("peer %s: missing %s" % (peer_id, required))
        peers.append(
            PeerSpec(
                id=peer_id,
                router_ip=values["ip"],
                mac=values["mac"],
                port=values["port"],
                local_pref=values.get("local_pref", 100),
                as_path_len=values.get("as_path_len", 3),
            )
        )
        current_peer = None

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ScenarioError("line %d: unterminated section header" % lineno)
            parts = line[1:-1].split()
            if len(parts) != 2 or parts[0] != "peer":
                raise ScenarioError("line %d: expected [peer <id>]" % lineno)
            close_peer()
            current_peer = (parts[1], {})
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ScenarioError("line %d: expected key = value" % lineno)
        key = key.strip()
        value = value.strip()
        if current_peer is not None:
            if key not in _PEER_KEYS:
                raise ScenarioError("line %d: unknown peer key %r" % (lineno, key))
            try:
                current_peer[1][key] = _PEER_KEYS[key](value)
            except ValueError:
                raise ScenarioError("line %d: bad value for %s" % (lineno, key)) from None
        else:
            if key not in _GLOBAL_KEYS:
                raise ScenarioError("line %d: unknown key %r" % (lineno, key))
            try:
                globals_found[key] = _GLOBAL_KEYS[key](value)
            except ValueError:
                raise ScenarioError("line %d: bad value for %s" % (lineno, key)) from None
    close_peer()

    kwargs = {}
    for key, value in globals_found.items():
        field_name = _KEY_TO_FIELD.get(key, key)
        if key == "reconverge_us":
            kwargs[field_name] = None if value.lower() in ("off", "none") else int(value)
        else:
            kwargs[field_name] = value
    return Scenario(peers=peers, **kwargs).validate()


def load_scenario(path):
    with open(path, "r", encoding="utf-8") as handle:
        text = handle.read()
    return parse_scenario(text)


def scenario_prefix(scenario, index):
    """index-th /24 of the synthetic table, counted from base_prefix."""
    return Prefix(ip_to_int(scenario.base_prefix) + (index << 8), 24)


def synthetic_feed(scenario):
    """Full-table feed: each prefix announced by every peer in turn."""
    base = ip_to_int(scenario.base_prefix)
    specs = scenario.peers
    for index in range(scenario.prefix_count):
        prefix = Prefix(base + (index << 8), 24)
        for spec in specs:
            yield announce(spec.id, prefix, spec.local_pref, spec.as_path_len)


def scenario_feed(scenario):
    """The scenario's update stream: inline text, then file, then synthetic."""
    if scenario.feed_text is not None:
        return iter_feed(scenario.feed_text.splitlines())
    if scenario.feed_path is not None:
        from .routes import read_feed

        return read_feed(scenario.feed_path)
    return synthetic_feed(scenario)


def probe_prefix_indices(scenario):
    """Which synthetic prefixes get probe flows.

    Always includes the first and the last prefix (the last is the one a
    flat table repairs last, so it carries the worst case); the remainder
    is a seeded random sample. Sorted ascending so flow ids follow prefix
    order.
    """
    count = scenario.probe_count
    total = scenario.prefix_count
    picked = {0, total - 1}
    middle = range(1, total - 1)
    need = count - len(picked)
    if need > 0:
        rng = random.Random(scenario.seed)
        picked.update(rng.sample(middle, need))
    return sorted(picked)[:count]


def probe_destinations(scenario):
    """(prefix, dst_ip) per probe flow; dst is the first host of the prefix."""
    out = []
    for index in probe_prefix_indices(scenario):
        prefix = scenario_prefix(scenario, index)
        out.append((prefix, prefix.ip + 1))
    return out


def scenario_to_text(scenario):
    """Serialize back to the file format (used by the service and tests)."""
    lines = [
        "mode = %s" % scenario.mode,
        "prefixes = %d" % scenario.prefix_count,
        "probes = %d" % scenario.probe_count,
        "probe_interval_us = %d" % scenario.probe_interval_us,
        "probe_start_us = %d" % scenario.probe_start_us,
    ]
    if scenario.fail_peer is not None:
        lines.append("fail_peer = %s" % scenario.fail_peer)
        lines.append("fail_at_us = %d" % scenario.fail_at_us)
    lines.extend(
        [
            "detect_us = %d" % scenario.detect_us,
            "rule_install_us = %d" % scenario.rule_install_us,
            "entry_step_us = %r" % scenario.entry_step_us,
            "first_entry_us = %d" % scenario.first_entry_us,
            "reconverge_us = %s"
            % ("off" if scenario.reconverge_us is None else scenario.reconverge_us),
            "quarantine_us = %d" % scenario.quarantine_us,
            "vnh_base = %s" % scenario.vnh_base,
            "vmac_base = %s" % scenario.vmac_base,
            "vnh_pool = %d" % scenario.vnh_pool,
            "base_prefix = %s" % scenario.base_prefix,
            "seed = %d" % scenario.seed,
        ]
    )
    if scenario.feed_path is not None:
        lines.append("feed = %s" % scenario.feed_path)
    for spec in scenario.peers:
        lines.append("")
        lines.append("[peer %s]" % spec.id)
        lines.append("ip = %s" % spec.router_ip)
        lines.append("mac = %s" % spec.mac)
        lines.append("port = %d" % spec.port)
        lines.append("local_pref = %d" % spec.local_pref)
        lines.append("as_path_len = %d" % spec.as_path_len)
    return "\n".join(lines) + "\n"


def two_peer_scenario(**overrides):
    """The canonical two-peer setup: one preferred provider, one backup."""
    peers = [
        PeerSpec(id="r2", router_ip="10.0.2.1", mac="00:00:00:00:00:aa", port=1, local_pref=200),
        PeerSpec(id="r3", router_ip="10.0.3.1", mac="00:00:00:00:02:bb", port=2, local_pref=100),
    ]
    scenario = Scenario(peers=peers, fail_peer="r2")
    if overrides:
        scenario = replace(scenario, **overrides)
    return scenario.validate()
