import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blockgraph.errors import (
    BadMagicError,
    ParseError,
    RangeError,
    TruncatedFileError,
    UnsupportedVersionError,
)
from blockgraph.io import (
    degree_relabel,
    is_binary_file,
    load_graph,
    parse_edge_list,
    read_binary,
    write_binary,
    write_edge_list,
)
from blockgraph.generators import erdos_renyi
from conftest import complete, graph_of, star


def _write(tmp_path, text, name="g.txt"):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_parse_basic(tmp_path):
    g = parse_edge_list(_write(tmp_path, "0 1\n1 2\n2 0\n"))
    assert g == complete(3)


def test_parse_comments_blank_lines_and_weights(tmp_path):
    text = "# comment\n% other\n\n0\t1 0.5\r\n  1 2 -3e2\n\n2 0 7\n"
    assert parse_edge_list(_write(tmp_path, text)) == complete(3)


def test_parse_matrix_market_header_is_skipped(tmp_path):
    text = "%%MatrixMarket matrix coordinate pattern general\n3 3 3\n1 2\n2 3\n3 1\n"
    g = parse_edge_list(_write(tmp_path, text), one_indexed=True)
    assert g == complete(3)


def test_header_lookalike_is_kept_as_edge(tmp_path):
    # "5 5 1" cannot be a size line for two records
    g = parse_edge_list(_write(tmp_path, "5 5 1\n0 1\n1 2\n"))
    assert g.n == 6
    assert g.m == 4


def test_parse_error_reports_line(tmp_path):
    with pytest.raises(ParseError, match="line 3"):
        parse_edge_list(_write(tmp_path, "0 1\n1 2\n1 x\n"))
    with pytest.raises(ParseError):
        parse_edge_list(_write(tmp_path, "0\n"))
    with pytest.raises(ParseError):
        parse_edge_list(_write(tmp_path, "0 1 2 3\n"))


def test_parse_overflow_and_one_indexed_zero(tmp_path):
    with pytest.raises(RangeError):
        parse_edge_list(_write(tmp_path, "0 99999999999999999999\n"))
    with pytest.raises(RangeError):
        parse_edge_list(_write(tmp_path, "0 1\n"), one_indexed=True)


def test_parse_empty_file(tmp_path):
    g = parse_edge_list(_write(tmp_path, "# nothing\n"))
    assert g.n == 0 and g.m == 0


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 9))
def test_chunk_count_does_not_change_result(tmp_path_factory, chunks):
    path = tmp_path_factory.mktemp("chunks") / "g.txt"
    if not path.exists():
        write_edge_list(erdos_renyi(80, 0.1, seed=5), path)
    base = parse_edge_list(path, chunks=1)
    assert parse_edge_list(path, chunks=chunks) == base


def test_binary_round_trip(tmp_path):
    g = erdos_renyi(50, 0.1, seed=2)
    path = tmp_path / "g.bin"
    write_binary(g, path)
    assert is_binary_file(path)
    back = read_binary(path)
    assert back == g and back.is_symmetrized
    assert load_graph(path) == g


def test_binary_empty_graph_size(tmp_path):
    g = graph_of([], n=0)
    path = tmp_path / "e.bin"
    write_binary(g, path)
    assert path.stat().st_size == 37
    assert read_binary(path).n == 0


def test_binary_errors(tmp_path):
    g = complete(4)
    path = tmp_path / "g.bin"
    write_binary(g, path)
    raw = path.read_bytes()
    (tmp_path / "magic.bin").write_bytes(b"XXXX" + raw[4:])
    with pytest.raises(BadMagicError):
        read_binary(tmp_path / "magic.bin")
    (tmp_path / "ver.bin").write_bytes(raw[:4] + struct.pack("<Q", 9) + raw[12:])
    with pytest.raises(UnsupportedVersionError):
        read_binary(tmp_path / "ver.bin")
    (tmp_path / "short.bin").write_bytes(raw[:-3])
    with pytest.raises(TruncatedFileError):
        read_binary(tmp_path / "short.bin")


def test_text_round_trip(tmp_path):
    g = erdos_renyi(40, 0.15, seed=9)
    path = tmp_path / "g.tsv"
    write_edge_list(g, path)
    assert parse_edge_list(path) == g


def test_degree_relabel_orders_by_degree():
    g = star(5)
    relabeled, perm = degree_relabel(g)
    assert perm[0] == 4
    assert np.all(np.diff(relabeled.degrees) >= 0)
    src, dst = g.edge_arrays()
    rs, rd = relabeled.edge_arrays()
    assert sorted(zip(perm[src].tolist(), perm[dst].tolist())) == sorted(zip(rs.tolist(), rd.tolist()))
