"""Request/response models for the HTTP service."""

from typing import List, Optional

from pydantic import BaseModel, Field

from ..dataplane import HIER
from ..scenario import (
    DEFAULT_VMAC_BASE,
    DEFAULT_VNH_BASE,
    FLAT_ENTRY_STEP_US,
    FLAT_FIRST_ENTRY_US,
    PeerSpec,
    Scenario,
)


class PeerModel(BaseModel):
    id: str
    router_ip: str
    mac: str
    port: int
    local_pref: int = 100
    as_path_len: int = 3


class ScenarioModel(BaseModel):
    peers: List[PeerModel]
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
    reconverge_us: Optional[int] = 1_000_000
    quarantine_us: int = 5_000_000
    vnh_base: str = DEFAULT_VNH_BASE
    vmac_base: str = DEFAULT_VMAC_BASE
    vnh_pool: int = 65536
    base_prefix: str = "20.0.0.0"
    seed: int = 0
    feed_text: Optional[str] = None
    horizon_us: Optional[int] = None

    def to_scenario(self):
        peers = [PeerSpec(**p.model_dump()) for p in self.peers]
        fields = self.model_dump(exclude={"peers"})
        return Scenario(peers=peers, **fields).validate()


class RunRequest(BaseModel):
    scenario: ScenarioModel
    include_csv: bool = True


class FlowRow(BaseModel):
    flow_id: int
    dst_ip: str
    convergence_us: Optional[int]
    generated: int
    delivered: int
    dropped: int
    recovered: bool


class ControlPlaneStats(BaseModel):
    count: int
    p50_us: Optional[float]
    p99_us: Optional[float]
    max_us: Optional[float]


class RunSummary(BaseModel):
    mode: str
    prefix_count: int
    probe_count: int
    seed: int
    ok: bool
    summary: dict
    recovery_us: Optional[int]
    fib_changes_total: int
    switch_changes_total: int
    fib_changes_to_recover: int
    switch_changes_to_recover: int
    unrecovered: List[int]


class RunResponse(BaseModel):
    result: RunSummary
    flows: List[FlowRow]
    control_plane: Optional[ControlPlaneStats]
    csv: Optional[str] = None


class SweepRequest(BaseModel):
    scenario: ScenarioModel
    prefix_counts: List[int]
    modes: List[str] = Field(default_factory=lambda: ["flat", "hier"])
    include_csv: bool = True


class SweepResponse(BaseModel):
    runs: List[RunSummary]
    csv: Optional[str] = None


class ReplayRequest(BaseModel):
    feed_text: str
    peer_count: Optional[int] = None  # None: infer peers from the feed
    vnh_base: Optional[str] = None
    vmac_base: Optional[str] = None


class ReplayResponse(BaseModel):
    actions: List[str]
    updates: int
    live_groups: int
    noop_withdrawals: int


class VerifyRequest(BaseModel):
    feed_text: str


class MismatchRow(BaseModel):
    update_index: int
    prefix: str
    online: Optional[str]
    oracle: Optional[str]


class VerifyResponse(BaseModel):
    ok: bool
    updates: int
    prefixes: int
    live_groups: int
    mismatches: List[MismatchRow]


class SyntheticFeed(BaseModel):
    updates: int = 100_000
    peers: int = 10
    prefixes: int = 100_000
    seed: int = 0
    announce_ratio: float = 0.7


class BenchRequest(BaseModel):
    feed_text: Optional[str] = None
    synthetic: Optional[SyntheticFeed] = None
    limit: Optional[int] = None


class BenchResponse(BaseModel):
    count: int
    p50_us: Optional[float]
    p99_us: Optional[float]
    max_us: Optional[float]


class EngineCreateRequest(BaseModel):
    peers: List[PeerModel]
    vnh_base: str = DEFAULT_VNH_BASE
    vmac_base: str = DEFAULT_VMAC_BASE
    vnh_pool: int = 65536
    quarantine_us: int = 5_000_000


class EngineCreateResponse(BaseModel):
    engine_id: str


class EngineUpdatesRequest(BaseModel):
    lines: List[str]


class EngineUpdatesResponse(BaseModel):
    actions: List[str]
    switch_ops: List[str]


class GroupRow(BaseModel):
    primary: str
    backup: str
    vnh: str
    vmac: str
    refcount: int


class EngineStateResponse(BaseModel):
    engine_id: str
    peers: List[str]
    updates_processed: int
    prefixes: int
    live_groups: int
    groups: List[GroupRow]
    noop_withdrawals: int
    down_peers: List[str]


class PeerDownRequest(BaseModel):
    peer: str


class RuleRow(BaseModel):
    match_mac: str
    rewrite_mac: str
    out_port: int
    priority: int


class PeerDownResponse(BaseModel):
    rules: List[RuleRow]
    affected_groups: List[List[str]]


class HealthResponse(BaseModel):
    status: str
    version: str
