import pytest

from hfib.routes import ANNOUNCE
from hfib.scenario import (
    FLAT_ENTRY_STEP_US,
    ScenarioError,
    load_scenario,
    parse_scenario,
    probe_destinations,
    probe_prefix_indices,
    scenario_prefix,
    scenario_to_text,
    synthetic_feed,
    two_peer_scenario,
)

MINIMAL = """
# two providers, r2 preferred
fail_peer = r2

[peer r2]
ip = 10.0.2.1
mac = 00:00:00:00:00:aa
port = 1
local_pref = 200

[peer r3]
ip = 10.0.3.1
mac = 00:00:00:00:02:bb
port = 2
"""


class TestParse:
    def test_minimal_fills_defaults(self):
        scenario = parse_scenario(MINIMAL)
        assert scenario.probe_count == 100
        assert scenario.detect_us == 100_000
        assert scenario.rule_install_us == 5_000
        assert scenario.entry_step_us == FLAT_ENTRY_STEP_US
        assert scenario.first_entry_us == 375_000
        assert scenario.mode == "hier"
        assert [p.id for p in scenario.peers] == ["r2", "r3"]
        assert scenario.peers[1].local_pref == 100  # default

    def test_fail_peer_must_exist(self):
        with pytest.raises(ScenarioError, match="fail_peer"):
            parse_scenario(MINIMAL.replace("fail_peer = r2", "fail_peer = r9"))

    def test_probe_count_bounded_by_prefixes(self):
        text = "prefixes = 10\nprobes = 11\n" + MINIMAL
        with pytest.raises(ScenarioError, match="probe_count"):
            parse_scenario(text)

    def test_unknown_key_names_line(self):
        with pytest.raises(ScenarioError, match="line 2.*wibble"):
            parse_scenario("\nwibble = 3\n" + MINIMAL)

    def test_bad_value_names_key(self):
        with pytest.raises(ScenarioError, match="prefixes"):
            parse_scenario("prefixes = lots\n" + MINIMAL)

    def test_missing_peer_field(self):
        text = "[peer r2]\nip = 10.0.2.1\nmac = 00:00:00:00:00:aa\n"
        with pytest.raises(ScenarioError, match="r2.*port"):
            parse_scenario(text)

    def test_bad_mode(self):
        with pytest.raises(ScenarioError, match="mode"):
            parse_scenario("mode = warp\n" + MINIMAL)

    def test_reconverge_off(self):
        scenario = parse_scenario("reconverge_us = off\n" + MINIMAL)
        assert scenario.reconverge_us is None

    def test_no_peers(self):
        with pytest.raises(ScenarioError, match="peer"):
            parse_scenario("mode = hier\n")

    def test_roundtrip_through_text(self):
        scenario = two_peer_scenario(prefix_count=5000, probe_count=20, seed=9)
        again = parse_scenario(scenario_to_text(scenario))
        assert again == scenario

    def test_load_scenario_reads_file(self, tmp_path):
        path = tmp_path / "s.scn"
        path.write_text(MINIMAL)
        assert load_scenario(str(path)).fail_peer == "r2"

    def test_duplicate_peer_rejected(self):
        text = MINIMAL + "\n[peer r2]\nip = 10.0.9.1\nmac = 00:00:00:00:09:aa\nport = 9\n"
        with pytest.raises(ScenarioError, match="duplicate"):
            parse_scenario(text)


class TestSyntheticFeed:
    def test_every_peer_announces_every_prefix(self):
        scenario = two_peer_scenario(prefix_count=3, probe_count=2)
        updates = list(synthetic_feed(scenario))
        assert len(updates) == 6
        assert all(u.kind == ANNOUNCE for u in updates)
        # prefix-major interleave: both peers announce a prefix back to back
        assert updates[0].prefix == updates[1].prefix
        assert updates[0].peer == "r2" and updates[1].peer == "r3"
        assert updates[0].local_pref == 200 and updates[1].local_pref == 100

    def test_prefixes_are_distinct_slash_24(self):
        scenario = two_peer_scenario(prefix_count=10, probe_count=2)
        prefixes = {u.prefix for u in synthetic_feed(scenario)}
        assert len(prefixes) == 10
        assert all(p.length == 24 for p in prefixes)

    def test_scenario_prefix_indexing(self):
        scenario = two_peer_scenario()
        assert str(scenario_prefix(scenario, 0)) == "20.0.0.0/24"
        assert str(scenario_prefix(scenario, 1)) == "20.0.1.0/24"
        # 20.0.0.0 + 511999 * 256 = 0x1BCFFF00
        assert str(scenario_prefix(scenario, 512_000 - 1)) == "27.207.255.0/24"


class TestProbeSelection:
    def test_first_and_last_always_probed(self):
        scenario = two_peer_scenario(prefix_count=1000, probe_count=10, seed=4)
        indices = probe_prefix_indices(scenario)
        assert len(indices) == 10
        assert indices[0] == 0
        assert indices[-1] == 999

    def test_deterministic_per_seed(self):
        a = probe_prefix_indices(two_peer_scenario(prefix_count=1000, probe_count=50, seed=1))
        b = probe_prefix_indices(two_peer_scenario(prefix_count=1000, probe_count=50, seed=1))
        c = probe_prefix_indices(two_peer_scenario(prefix_count=1000, probe_count=50, seed=2))
        assert a == b
        assert a != c

    def test_probe_all(self):
        scenario = two_peer_scenario(prefix_count=7, probe_count=7)
        assert probe_prefix_indices(scenario) == list(range(7))

    def test_destinations_inside_prefix(self):
        scenario = two_peer_scenario(prefix_count=50, probe_count=5)
        for prefix, dst in probe_destinations(scenario):
            assert dst == prefix.ip + 1

    def test_single_probe(self):
        scenario = two_peer_scenario(prefix_count=50, probe_count=1)
        assert probe_prefix_indices(scenario) == [0]


class TestValidation:
    def test_negative_timer_rejected(self):
        with pytest.raises(ScenarioError, match="detect_us"):
            two_peer_scenario(detect_us=-1)

    def test_zero_interval_rejected(self):
        with pytest.raises(ScenarioError, match="probe_interval"):
            two_peer_scenario(probe_interval_us=0)

    def test_bad_vnh_base(self):
        with pytest.raises(ScenarioError):
            two_peer_scenario(vnh_base="not-an-ip")

    def test_peer_table_construction(self):
        table = two_peer_scenario().peer_table()
        assert "r2" in table and "r3" in table
        assert table["r2"].port == 1
