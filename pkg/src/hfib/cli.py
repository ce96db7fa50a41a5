"""Command-line client.

Every subcommand is a thin wrapper over the HTTP service: the CLI reads
local files, ships their content to the service, and formats the response.
By default the service runs in-process (no daemon needed); point --server
at a running `hfib serve` instance to use a remote one.

Exit codes: 0 success, 1 invariant or acceptance failure, 2 input error.
"""

import argparse
import os
import sys
from dataclasses import asdict

import httpx

from .scenario import ScenarioError, load_scenario

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_INPUT = 2


class ClientError(Exception):
    def __init__(self, message, exit_code=EXIT_INPUT):
        super().__init__(message)
        self.exit_code = exit_code


class ServiceClient:
    """HTTP client; in-process ASGI transport unless a server URL is given."""

    def __init__(self, server=None):
        self._server = server
        self._client = httpx.Client(base_url=server, timeout=None) if server else None

    def _request_local(self, method, path, payload):
        # ASGITransport is async-only; drive the app through a short-lived
        # event loop per request. App state (engine sessions) is process
        # global, so it survives across requests.
        import asyncio

        from .service import app

        async def go():
            transport = httpx.ASGITransport(app=app)
            async with httpx.AsyncClient(
                transport=transport, base_url="http://hfib.local", timeout=None
            ) as client:
                return await client.request(method, path, json=payload)

        return asyncio.run(go())

    def request(self, method, path, payload=None):
        try:
            if self._client is not None:
                response = self._client.request(method, path, json=payload)
            else:
                response = self._request_local(method, path, payload)
        except httpx.HTTPError as exc:
            raise ClientError("cannot reach service: %s" % exc) from None
        if response.status_code >= 400:
            try:
                detail = response.json().get("detail", response.text)
            except ValueError:
                detail = response.text
            raise ClientError("service error (%d): %s" % (response.status_code, detail))
        if response.status_code == 204:
            return None
        return response.json()

    def close(self):
        if self._client is not None:
            self._client.close()


def _read_text(path, what):
    try:
        with open(path, "r", encoding="utf-8") as handle:
            return handle.read()
    except OSError as exc:
        raise ClientError("cannot read %s %r: %s" % (what, path, exc)) from None


def _scenario_payload(path, seed=None):
    """Parse a scenario file and inline its feed for transport."""
    try:
        scenario = load_scenario(path)
    except OSError as exc:
        raise ClientError("cannot read scenario %r: %s" % (path, exc)) from None
    except ScenarioError as exc:
        raise ClientError("scenario %r: %s" % (path, exc)) from None
    if seed is not None:
        scenario = scenario.with_overrides(seed=seed)
    feed_text = scenario.feed_text
    if scenario.feed_path is not None and feed_text is None:
        feed_file = scenario.feed_path
        if not os.path.isabs(feed_file):
            feed_file = os.path.join(os.path.dirname(os.path.abspath(path)), feed_file)
        feed_text = _read_text(feed_file, "feed")
    payload = asdict(scenario)
    payload.pop("feed_path")
    payload["feed_text"] = feed_text
    payload["peers"] = [asdict(spec) for spec in scenario.peers]
    return payload


def _write_text(path, text):
    try:
        with open(path, "w", encoding="utf-8", newline="") as handle:
            handle.write(text)
    except OSError as exc:
        raise ClientError("cannot write %r: %s" % (path, exc)) from None


def _print_summary(result):
    summary = result["summary"]
    print(
        "%s prefixes=%d probes=%d: convergence p50=%s p95=%s max=%s us"
        % (
            result["mode"],
            result["prefix_count"],
            result["probe_count"],
            summary.get("p50"),
            summary.get("p95"),
            summary.get("max"),
        )
    )
    print(
        "  fib changes to recover=%d switch changes to recover=%d recovery=%s us"
        % (
            result["fib_changes_to_recover"],
            result["switch_changes_to_recover"],
            result["recovery_us"],
        )
    )
    if not result["ok"]:
        print("  UNRECOVERED flows: %s" % result["unrecovered"])


def cmd_run(client, args):
    payload = _scenario_payload(args.scenario, args.seed)
    data = client.request("POST", "/runs", {"scenario": payload, "include_csv": True})
    _write_text(args.out, data["csv"])
    _print_summary(data["result"])
    print("report written to %s" % args.out)
    return EXIT_OK if data["result"]["ok"] else EXIT_FAIL


def _parse_counts(text):
    counts = []
    for token in text.split(","):
        token = token.strip().lower()
        if not token:
            continue
        factor = 1
        if token.endswith("k"):
            factor, token = 1000, token[:-1]
        elif token.endswith("m"):
            factor, token = 1_000_000, token[:-1]
        try:
            counts.append(int(float(token) * factor))
        except ValueError:
            raise ClientError("bad prefix count %r" % token) from None
    if not counts:
        raise ClientError("no prefix counts given")
    return counts


def cmd_sweep(client, args):
    payload = _scenario_payload(args.scenario, args.seed)
    request = {
        "scenario": payload,
        "prefix_counts": _parse_counts(args.prefixes),
        "modes": [m.strip() for m in args.modes.split(",") if m.strip()],
        "include_csv": True,
    }
    data = client.request("POST", "/sweeps", request)
    _write_text(args.out, data["csv"])
    ok = True
    for result in data["runs"]:
        _print_summary(result)
        ok = ok and result["ok"]
    print("sweep written to %s" % args.out)
    return EXIT_OK if ok else EXIT_FAIL


def cmd_replay(client, args):
    request = {"feed_text": _read_text(args.feed, "feed"), "peer_count": args.peers}
    data = client.request("POST", "/replays", request)
    for line in data["actions"]:
        print(line)
    print(
        "# %d updates -> %d actions, %d live groups"
        % (data["updates"], len(data["actions"]), data["live_groups"]),
        file=sys.stderr,
    )
    return EXIT_OK


def cmd_verify(client, args):
    request = {"feed_text": _read_text(args.feed, "feed")}
    data = client.request("POST", "/verify", request)
    if data["ok"]:
        print(
            "ok: %d updates, %d prefixes, %d live groups, online matches oracle"
            % (data["updates"], data["prefixes"], data["live_groups"])
        )
        return EXIT_OK
    print("MISMATCH after %d updates:" % data["updates"])
    for row in data["mismatches"]:
        print(
            "  update %d prefix %s: online=%s oracle=%s"
            % (row["update_index"], row["prefix"], row["online"], row["oracle"])
        )
    return EXIT_FAIL


def cmd_bench(client, args):
    request = {"feed_text": _read_text(args.feed, "feed"), "limit": args.updates}
    data = client.request("POST", "/bench", request)
    if data["count"] == 0:
        print("0 updates: empty distribution")
        return EXIT_OK
    print(
        "%d updates: p50=%.1f us p99=%.1f us max=%.1f us"
        % (data["count"], data["p50_us"], data["p99_us"], data["max_us"])
    )
    return EXIT_OK


def cmd_serve(args):
    import uvicorn

    from .service import app

    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="hfib",
        description="Backup-group failover engine and FIB convergence simulator",
    )
    parser.add_argument(
        "--server",
        default=os.environ.get("HFIB_SERVER"),
        help="base URL of a running service; default runs the service in-process",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one scenario and write its report CSV")
    p_run.add_argument("scenario")
    p_run.add_argument("--out", default="report.csv")
    p_run.add_argument("--seed", type=int, default=None)
    p_run.set_defaults(func=cmd_run)

    p_sweep = sub.add_parser("sweep", help="run a scenario over several prefix counts")
    p_sweep.add_argument("scenario")
    p_sweep.add_argument("--prefixes", required=True, help="e.g. 1k,10k,100k,512k")
    p_sweep.add_argument("--modes", default="flat,hier")
    p_sweep.add_argument("--out", default="sweep.csv")
    p_sweep.add_argument("--seed", type=int, default=None)
    p_sweep.set_defaults(func=cmd_sweep)

    p_replay = sub.add_parser("replay", help="print the egress actions for a feed")
    p_replay.add_argument("feed")
    p_replay.add_argument("--peers", type=int, default=None, help="use p1..pN peers")
    p_replay.set_defaults(func=cmd_replay)

    p_verify = sub.add_parser("verify", help="check the online engine against the oracle")
    p_verify.add_argument("feed")
    p_verify.set_defaults(func=cmd_verify)

    p_bench = sub.add_parser("bench", help="per-update processing latency over a feed")
    p_bench.add_argument("feed")
    p_bench.add_argument("--updates", type=int, default=None)
    p_bench.set_defaults(func=cmd_bench)

    p_serve = sub.add_parser("serve", help="run the HTTP service")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8000)
    p_serve.set_defaults(func=cmd_serve)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "serve":
        return cmd_serve(args)
    client = ServiceClient(args.server)
    try:
        return args.func(client, args)
    except ClientError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return exc.exit_code
    finally:
        client.close()


if __name__ == "__main__":
    sys.exit(main())
