"""HTTP service wrapping the engine and the simulator.

Simulation runs execute synchronously in the request (the biggest spec'd
sweep finishes in minutes; clients should not set aggressive timeouts).
Engine sessions are held in process memory, one independent engine per
session, which is also how replicated deployments of the real controller
work: same input stream, no shared state.
"""

import itertools

from fastapi import FastAPI, HTTPException

from .. import __version__
from ..dataplane import MODES
from ..harness import (
    auto_peers,
    build_engine,
    numbered_peers,
    random_updates,
    replay_feed,
    verify_feed,
)
from ..groups import AllocatorExhausted, format_action
from ..failover import on_peer_down
from ..metrics import render_csv
from ..net import int_to_ip, int_to_mac
from ..routes import FeedError, PeerTable, iter_feed, make_peer
from ..scenario import ScenarioError
from ..sim import bench_control_plane, run, run_sweep
from . import schemas

app = FastAPI(title="hfib", version=__version__)

_engines = {}
_engine_ids = itertools.count(1)


def _bad_request(exc):
    raise HTTPException(status_code=400, detail=str(exc))


@app.get("/health", response_model=schemas.HealthResponse)
def health():
    return schemas.HealthResponse(status="ok", version=__version__)


def _run_summary(report):
    return schemas.RunSummary(
        mode=report.mode,
        prefix_count=report.prefix_count,
        probe_count=report.probe_count,
        seed=report.seed,
        ok=report.ok,
        summary=report.summary,
        recovery_us=report.recovery_us,
        fib_changes_total=report.fib_changes_total,
        switch_changes_total=report.switch_changes_total,
        fib_changes_to_recover=report.fib_changes_to_recover,
        switch_changes_to_recover=report.switch_changes_to_recover,
        unrecovered=report.unrecovered,
    )


@app.post("/runs", response_model=schemas.RunResponse)
def post_run(request: schemas.RunRequest):
    try:
        scenario = request.scenario.to_scenario()
    except (ScenarioError, ValueError) as exc:
        _bad_request(exc)
    try:
        report = run(scenario)
    except (FeedError, AllocatorExhausted) as exc:
        _bad_request(exc)
    return schemas.RunResponse(
        result=_run_summary(report),
        flows=[schemas.FlowRow(**fr._asdict()) for fr in report.flows],
        control_plane=schemas.ControlPlaneStats(**report.control_plane),
        csv=render_csv([report]) if request.include_csv else None,
    )


@app.post("/sweeps", response_model=schemas.SweepResponse)
def post_sweep(request: schemas.SweepRequest):
    for mode in request.modes:
        if mode not in MODES:
            _bad_request("unknown mode %r" % mode)
    if not request.prefix_counts:
        _bad_request("prefix_counts must not be empty")
    try:
        scenario = request.scenario.to_scenario()
        reports = run_sweep(scenario, request.prefix_counts, request.modes)
    except (ScenarioError, FeedError, ValueError) as exc:
        _bad_request(exc)
    return schemas.SweepResponse(
        runs=[_run_summary(r) for r in reports],
        csv=render_csv(reports) if request.include_csv else None,
    )


def _parse_feed(feed_text):
    try:
        return list(iter_feed(feed_text.splitlines()))
    except FeedError as exc:
        _bad_request(exc)


@app.post("/replays", response_model=schemas.ReplayResponse)
def post_replay(request: schemas.ReplayRequest):
    updates = _parse_feed(request.feed_text)
    try:
        if request.peer_count is not None:
            peers = numbered_peers(request.peer_count)
        else:
            peers = auto_peers(updates)
        result = replay_feed(updates, peers, request.vnh_base, request.vmac_base)
    except (KeyError, ValueError) as exc:
        _bad_request(exc)
    return schemas.ReplayResponse(**result._asdict())


@app.post("/verify", response_model=schemas.VerifyResponse)
def post_verify(request: schemas.VerifyRequest):
    updates = _parse_feed(request.feed_text)
    result = verify_feed(updates, auto_peers(updates))
    rows = [
        schemas.MismatchRow(
            update_index=m.update_index,
            prefix=m.prefix,
            online=repr(m.online),
            oracle=repr(m.oracle),
        )
        for m in result.mismatches
    ]
    return schemas.VerifyResponse(
        ok=result.ok,
        updates=result.updates,
        prefixes=result.prefixes,
        live_groups=result.live_groups,
        mismatches=rows,
    )


@app.post("/bench", response_model=schemas.BenchResponse)
def post_bench(request: schemas.BenchRequest):
    if request.feed_text is not None:
        updates = _parse_feed(request.feed_text)
        peers = auto_peers(updates)
    elif request.synthetic is not None:
        spec = request.synthetic
        try:
            peers = numbered_peers(spec.peers)
        except ValueError as exc:
            _bad_request(exc)
        updates = random_updates(
            spec.updates, peers, spec.prefixes, spec.seed, spec.announce_ratio
        )
    else:
        _bad_request("either feed_text or synthetic is required")
    stats = bench_control_plane(updates, peers, limit=request.limit)
    return schemas.BenchResponse(**stats)


@app.post("/engines", response_model=schemas.EngineCreateResponse, status_code=201)
def create_engine(request: schemas.EngineCreateRequest):
    try:
        table = PeerTable()
        for p in request.peers:
            table.add(make_peer(p.id, p.router_ip, p.mac, p.port))
        engine = build_engine(
            table, request.vnh_base, request.vmac_base, request.vnh_pool, request.quarantine_us
        )
    except ValueError as exc:
        _bad_request(exc)
    engine_id = "eng-%d" % next(_engine_ids)
    _engines[engine_id] = engine
    return schemas.EngineCreateResponse(engine_id=engine_id)


def _engine_or_404(engine_id):
    engine = _engines.get(engine_id)
    if engine is None:
        raise HTTPException(status_code=404, detail="no such engine %r" % engine_id)
    return engine


@app.post("/engines/{engine_id}/updates", response_model=schemas.EngineUpdatesResponse)
def engine_updates(engine_id: str, request: schemas.EngineUpdatesRequest):
    engine = _engine_or_404(engine_id)
    try:
        updates = list(iter_feed(request.lines))
    except FeedError as exc:
        _bad_request(exc)
    actions = []
    try:
        for update in updates:
            actions.extend(engine.process_update(update))
    except KeyError as exc:
        _bad_request("feed references unknown peer: %s" % exc)
    ops = engine.drain_ops()
    return schemas.EngineUpdatesResponse(
        actions=[format_action(a) for a in actions],
        switch_ops=[_format_op(op) for op in ops],
    )


def _format_op(op):
    if op[0] == "install":
        rule = op[1]
        return "install match=%s rewrite=%s port=%d prio=%d" % (
            int_to_mac(rule.match_mac),
            int_to_mac(rule.rewrite_mac),
            rule.out_port,
            rule.priority,
        )
    return "remove match=%s prio=%d" % (int_to_mac(op[1]), op[2])


@app.post("/engines/{engine_id}/peer-down", response_model=schemas.PeerDownResponse)
def engine_peer_down(engine_id: str, request: schemas.PeerDownRequest):
    engine = _engine_or_404(engine_id)
    try:
        plan = on_peer_down(engine, request.peer)
    except KeyError as exc:
        _bad_request(exc)
    return schemas.PeerDownResponse(
        rules=[
            schemas.RuleRow(
                match_mac=int_to_mac(r.match_mac),
                rewrite_mac=int_to_mac(r.rewrite_mac),
                out_port=r.out_port,
                priority=r.priority,
            )
            for r in plan.rules
        ],
        affected_groups=[list(pair) for pair in plan.affected_groups],
    )


@app.get("/engines/{engine_id}", response_model=schemas.EngineStateResponse)
def engine_state(engine_id: str):
    engine = _engine_or_404(engine_id)
    groups = [
        schemas.GroupRow(
            primary=g.primary,
            backup=g.backup,
            vnh=int_to_ip(g.vnh),
            vmac=int_to_mac(g.vmac),
            refcount=g.refcount,
        )
        for g in engine.groups.values()
    ]
    return schemas.EngineStateResponse(
        engine_id=engine_id,
        peers=engine.peers.ids(),
        updates_processed=engine.updates_processed,
        prefixes=len(engine.rib),
        live_groups=engine.live_group_count(),
        groups=groups,
        noop_withdrawals=engine.rib.noop_withdrawals,
        down_peers=sorted(engine.down_peers),
    )


@app.delete("/engines/{engine_id}", status_code=204)
def delete_engine(engine_id: str):
    _engine_or_404(engine_id)
    del _engines[engine_id]
