import io
import warnings

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wardrop_cycles import tntp_io as tio

NET_HEADER = """<NUMBER OF ZONES> 1
<NUMBER OF NODES> 2
<FIRST THRU NODE> 1
<NUMBER OF LINKS> {n}
<END OF METADATA>

~ init term capacity length fft b power speed toll type ;
"""


def one_link_net(n_declared=1):
    return NET_HEADER.format(n=n_declared) + "\t1\t2\t25900.2\t6\t6\t0.15\t4\t0\t0\t1\t;\n"


def test_single_link_echo():
    raw = tio.parse_network(one_link_net())
    assert raw.node_count == 2
    (link,) = raw.links
    assert (link.init_node, link.term_node) == (1, 2)
    assert link.capacity == 25900.2
    assert link.free_flow_time == 6
    assert link.b == 0.15
    assert link.power == 4


def test_declared_link_count_must_match():
    with pytest.raises(tio.LinkCountMismatch):
        tio.parse_network(one_link_net(n_declared=10))


@pytest.mark.parametrize("bad, exc", [
    ("\t1\t3\t100\t1\t1\t0.15\t4\t0\t0\t1\t;\n", tio.NodeIdOutOfRange),
    ("\t1\t2\t0\t1\t1\t0.15\t4\t0\t0\t1\t;\n", tio.InvalidLinkParameter),
    ("\t1\t2\tabc\t1\t1\t0.15\t4\t0\t0\t1\t;\n", tio.NonNumericField),
])
def test_bad_link_records(bad, exc):
    with pytest.raises(exc):
        tio.parse_network(NET_HEADER.format(n=1) + bad)


def test_missing_header_tag():
    with pytest.raises(tio.MalformedHeader):
        tio.parse_network("<NUMBER OF NODES> 2\n<END OF METADATA>\n")


def test_sioux_falls_network(sioux_falls_files):
    raw = tio.read_network(sioux_falls_files[0])
    assert raw.node_count == 24
    assert len(raw.links) == 76


TRIPS = """<NUMBER OF ZONES> 3
<TOTAL OD FLOW> 150.5
<END OF METADATA>

Origin 1
    2 : 100.0;    3 : 50.5;
"""


def test_origin_block_echo():
    table = tio.parse_trips(TRIPS)
    assert table.entries == {(1, 2): 100.0, (1, 3): 50.5}
    assert not table.total_mismatch


def test_negative_demand_rejected():
    with pytest.raises(tio.NegativeDemand):
        tio.parse_trips("<END OF METADATA>\nOrigin 1\n 2 : -5;\n")


def test_entry_before_origin():
    with pytest.raises(tio.MalformedOriginBlock):
        tio.parse_trips("<END OF METADATA>\n 2 : 5;\n")


def test_declared_total_mismatch_warns():
    with pytest.warns(tio.TotalFlowMismatch):
        t = tio.parse_trips(TRIPS.replace("150.5", "151"))
    assert t.total_mismatch


def test_intrazonal_kept_but_not_assignable():
    t = tio.parse_trips("<END OF METADATA>\nOrigin 1\n 1 : 7; 2 : 3; 3 : 0;\n")
    assert t.total == 10
    assert t.assignable() == {(1, 2): 3.0}


def test_sioux_falls_trips(sioux_falls_files):
    table = tio.read_trips(sioux_falls_files[1])
    assert len(table.assignable()) == 528
    assert table.total == pytest.approx(360_600)


# -- round trips ---------------------------------------------------------------

finite = st.floats(min_value=0.01, max_value=1e5, allow_nan=False, allow_infinity=False)


@st.composite
def networks(draw):
    n = draw(st.integers(2, 6))
    z = draw(st.integers(1, n))
    links = []
    for _ in range(draw(st.integers(1, 8))):
        a, b = draw(st.integers(1, n)), draw(st.integers(1, n))
        links.append(tio.RawLink(a, b, draw(finite), draw(finite), draw(finite), draw(st.floats(0, 1)),
                                 draw(st.sampled_from([0.0, 1.0, 4.0]))))
    return tio.RawNetworkFile(n, z, draw(st.integers(1, n)), tuple(links))


@settings(max_examples=60, deadline=None)
@given(networks())
def test_network_round_trip(raw):
    assert tio.parse_network(tio.format_network(raw)) == raw


@settings(max_examples=60, deadline=None)
@given(st.dictionaries(st.tuples(st.integers(1, 5), st.integers(1, 5)), st.floats(0, 1e4, allow_nan=False), max_size=12))
def test_trips_round_trip(entries):
    table = tio.DemandTable(entries, 5, None)
    back = tio.parse_trips(tio.format_trips(table))
    assert back.entries == entries


# -- report tables -----------------------------------------------------------------


def test_poa_csv_header(tmp_path):
    row = {"city": "X", "total_ue_minutes": 2.0, "total_so_minutes": 1.0, "poa": 2.0}
    tio.write_report([tio.ReportTable("poa_summary", [row])], tmp_path)
    lines = (tmp_path / "poa_summary.csv").read_text().splitlines()
    assert lines[0] == "city,total_ue_minutes,total_so_minutes,poa"
    assert lines[1] == "X,2,1,2"


def test_empty_report(tmp_path):
    manifest = tio.write_report([], tmp_path / "r")
    assert manifest == {}
    assert [p.name for p in (tmp_path / "r").iterdir()] == ["manifest.json"]


def test_report_is_byte_stable(tmp_path):
    rows = [{"method": "gcd", "count": 3, "max": 9, "mean": 1 / 3, "median": 2.0, "std": None, "p75": 1e-7, "p95": float("nan")}]
    t = tio.ReportTable("cycle_length_stats", rows)
    tio.write_report([t], tmp_path / "a", {"seed": 1})
    tio.write_report([t], tmp_path / "b", {"seed": 1})
    for name in ("cycle_length_stats.csv", "manifest.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_unknown_kind_and_missing_column():
    with pytest.raises(ValueError):
        tio.ReportTable("nope")
    with pytest.raises(KeyError):
        tio.table_to_csv(tio.ReportTable("rota", [{"day": 1}]))


def test_unwritable_sink(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(tio.SinkWriteFailure):
        tio.write_report([tio.ReportTable("rota", [])], blocker / "sub")
