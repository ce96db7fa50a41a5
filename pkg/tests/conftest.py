import pytest

from hfib.groups import GroupEngine, VnhAllocator
from hfib.net import ip_to_int, mac_to_int
from hfib.routes import Peer, PeerTable

# PASS/FAIL lines collected by the acceptance module, replayed in the
# terminal summary so they are visible without -s.
ACCEPTANCE_RESULTS = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_RESULTS:
            terminalreporter.line(line)

# The canonical two-provider edge setup: r2 preferred, r3 backup, with the
# literal MAC/port values used throughout the dataplane tests.
R2 = Peer("r2", ip_to_int("10.0.2.1"), mac_to_int("00:00:00:00:00:aa"), 1)
R3 = Peer("r3", ip_to_int("10.0.3.1"), mac_to_int("00:00:00:00:02:bb"), 2)


@pytest.fixture
def two_peers():
    return PeerTable([R2, R3])


@pytest.fixture
def five_peers():
    table = PeerTable()
    for k in range(1, 6):
        table.add(Peer("p%d" % k, ip_to_int("10.0.%d.1" % k), 0x020000000000 + k, k))
    return table


def engine_for(peers, vnh_base="10.200.0.1", vmac_base="0a:53:43:00:00:01", **kwargs):
    allocator = VnhAllocator(ip_to_int(vnh_base), mac_to_int(vmac_base), kwargs.pop("pool", 65536))
    return GroupEngine(peers, allocator, **kwargs)


@pytest.fixture
def make_engine():
    return engine_for
