import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hfib.net import int_to_ip, ip_to_int
from hfib.routes import (
    ANNOUNCE,
    WITHDRAW,
    FeedError,
    Prefix,
    Rib,
    Route,
    announce,
    decision_rank,
    iter_feed,
    parse_update,
    rank_key,
    withdraw,
)


class TestParseUpdate:
    def test_announce_line(self):
        upd = parse_update("A p1 1.0.0.0/24 100 3")
        assert upd.kind == ANNOUNCE
        assert upd.peer == "p1"
        assert upd.prefix == Prefix(ip_to_int("1.0.0.0"), 24)
        assert upd.local_pref == 100
        assert upd.as_path_len == 3

    def test_withdraw_line(self):
        upd = parse_update("W p1 1.0.0.0/24")
        assert upd.kind == WITHDRAW
        assert upd.peer == "p1"
        assert upd.prefix == Prefix(ip_to_int("1.0.0.0"), 24)
        assert upd.local_pref is None and upd.as_path_len is None

    def test_host_bits_rejected(self):
        with pytest.raises(FeedError, match="host bits"):
            parse_update("A p1 1.0.0.1/24 100 3")

    def test_error_names_line_number(self):
        with pytest.raises(FeedError, match="line 3"):
            list(iter_feed(["# comment", "A p1 1.0.0.0/24 100 3", "A p1 nonsense 100 3"]))

    def test_error_names_field(self):
        with pytest.raises(FeedError, match="local_pref"):
            parse_update("A p1 1.0.0.0/24 xx 3")
        with pytest.raises(FeedError, match="as_path_len"):
            parse_update("A p1 1.0.0.0/24 100 xx")
        with pytest.raises(FeedError, match="kind"):
            parse_update("X p1 1.0.0.0/24")
        with pytest.raises(FeedError, match="5 fields"):
            parse_update("A p1 1.0.0.0/24 100")

    def test_comments_and_blanks_skipped(self):
        updates = list(iter_feed(["", "# header", "A p1 2.0.0.0/16 100 2", "  "]))
        assert len(updates) == 1

    def test_prefix_length_range(self):
        with pytest.raises(FeedError, match="length"):
            parse_update("A p1 1.0.0.0/33 100 3")
        assert parse_update("A p1 0.0.0.0/0 100 3").prefix == Prefix(0, 0)

    def test_prefix_str_roundtrip(self):
        prefix = Prefix.parse("192.168.4.0/22")
        assert str(prefix) == "192.168.4.0/22"


class TestDecisionRank:
    def test_local_pref_dominates(self):
        routes = {Route("pA", 100, 2), Route("pB", 200, 5)}
        assert [r.peer for r in decision_rank(routes)] == ["pB", "pA"]

    def test_shorter_as_path_wins(self):
        routes = {Route("pA", 100, 1), Route("pB", 100, 3)}
        assert [r.peer for r in decision_rank(routes)] == ["pA", "pB"]

    def test_peer_id_tie_break(self):
        routes = {Route("pA", 100, 3), Route("pB", 100, 3)}
        assert [r.peer for r in decision_rank(routes)] == ["pA", "pB"]

    def test_empty(self):
        assert decision_rank([]) == []

    @given(
        st.lists(
            st.tuples(
                st.integers(0, 30),
                st.integers(0, 500),
                st.integers(0, 40),
            ),
            max_size=12,
        )
    )
    def test_total_deterministic_order(self, raw):
        # one route per peer, as the precondition requires
        routes = {Route("p%02d" % p, lp, aspl) for p, lp, aspl in raw}
        first = decision_rank(routes)
        again = decision_rank(sorted(routes))
        assert first == again
        # order is exactly the documented key
        assert first == sorted(routes, key=rank_key)


def P(text):
    return Prefix.parse(text)


class TestRibApply:
    def test_first_route(self):
        rib = Rib()
        delta = rib.apply(announce("p1", P("5.0.0.0/24"), 100, 3))
        assert delta.old == ()
        assert [r.peer for r in delta.new] == ["p1"]

    def test_second_route_ranked(self):
        # expected order computed through decision_rank, not assumed
        rib = Rib()
        rib.apply(announce("p1", P("5.0.0.0/24"), 200, 3))
        delta = rib.apply(announce("p2", P("5.0.0.0/24"), 100, 3))
        expected = decision_rank({Route("p1", 200, 3), Route("p2", 100, 3)})
        assert [r.peer for r in delta.old] == ["p1"]
        assert list(delta.new) == expected
        assert [r.peer for r in delta.new] == ["p1", "p2"]

    def test_withdraw_removes(self):
        rib = Rib()
        rib.apply(announce("p1", P("5.0.0.0/24"), 200, 3))
        rib.apply(announce("p2", P("5.0.0.0/24"), 100, 3))
        delta = rib.apply(withdraw("p1", P("5.0.0.0/24")))
        assert [r.peer for r in delta.old] == ["p1", "p2"]
        assert [r.peer for r in delta.new] == ["p2"]

    def test_withdraw_of_absent_is_noop_and_counted(self):
        rib = Rib()
        delta = rib.apply(withdraw("p1", P("5.0.0.0/24")))
        assert delta.old == delta.new == ()
        rib.apply(announce("p2", P("5.0.0.0/24"), 100, 3))
        delta = rib.apply(withdraw("p9", P("5.0.0.0/24")))
        assert delta.old == delta.new
        assert rib.noop_withdrawals == 2

    def test_implicit_withdraw_replaces_attributes(self):
        rib = Rib()
        rib.apply(announce("p1", P("5.0.0.0/24"), 100, 3))
        delta = rib.apply(announce("p1", P("5.0.0.0/24"), 100, 7))
        assert len(delta.new) == 1
        assert delta.new[0] == Route("p1", 100, 7)

    def test_empty_entries_are_removed(self):
        rib = Rib()
        rib.apply(announce("p1", P("5.0.0.0/24"), 100, 3))
        rib.apply(withdraw("p1", P("5.0.0.0/24")))
        assert P("5.0.0.0/24") not in rib
        assert len(rib) == 0


@st.composite
def update_sequences(draw):
    peers = ["p1", "p2", "p3", "p4"]
    prefixes = [P("9.0.%d.0/24" % i) for i in range(4)]
    events = draw(
        st.lists(
            st.tuples(
                st.booleans(),
                st.sampled_from(peers),
                st.sampled_from(prefixes),
                st.integers(50, 250),
                st.integers(1, 6),
            ),
            max_size=40,
        )
    )
    out = []
    for is_announce, peer, prefix, lp, aspl in events:
        if is_announce:
            out.append(announce(peer, prefix, lp, aspl))
        else:
            out.append(withdraw(peer, prefix))
    return out


class TestRibProperties:
    @given(update_sequences())
    @settings(max_examples=150)
    def test_stored_order_is_decision_rank(self, updates):
        rib = Rib()
        for update in updates:
            rib.apply(update)
            for _, entry in rib.entries():
                assert list(entry) == decision_rank(entry)
                peers_seen = [r.peer for r in entry]
                assert len(peers_seen) == len(set(peers_seen))

    @given(update_sequences())
    @settings(max_examples=60)
    def test_replay_determinism(self, updates):
        rib_a, rib_b = Rib(), Rib()
        deltas_a = [rib_a.apply(u) for u in updates]
        deltas_b = [rib_b.apply(u) for u in updates]
        assert deltas_a == deltas_b
        assert dict(rib_a.entries()) == dict(rib_b.entries())


def test_ip_roundtrip():
    for text in ("0.0.0.0", "255.255.255.255", "10.200.0.1", "1.2.3.4"):
        assert int_to_ip(ip_to_int(text)) == text
