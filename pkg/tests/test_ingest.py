import itertools
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from privfunnel.dist import dump_distribution, load_distribution
from privfunnel.errors import EmptyFile, InputError, MissingColumn
from privfunnel.ingest import IngestSpec, SingleValueAlphabet, ingest, perturb_and_normalize, split_joint


def write_csv(path, header, rows, delimiter=","):
    path.write_text("\n".join(delimiter.join(map(str, r)) for r in [header, *rows]) + "\n")
    return str(path)


@pytest.fixture
def binary_table(tmp_path):
    rng = np.random.default_rng(0)
    header = ["sex", "income", "a", "b", "c", "d"]
    rows = rng.integers(0, 2, size=(300, 6)).tolist()
    return write_csv(tmp_path / "t.csv", header, rows), rows


def test_alphabet_sizes(binary_table):
    path, _ = binary_table
    got = ingest(IngestSpec(path, ["sex", "income"], ["a", "b", "c", "d"]))
    assert (got.channel.k, got.prior.m) == (4, 16)
    assert got.s_alphabet == [("0", "0"), ("0", "1"), ("1", "0"), ("1", "1")]
    assert got.x_index[("1", "1", "1", "1")] == 15


def test_counts_and_perturbation(binary_table):
    path, rows = binary_table
    got = ingest(IngestSpec(path, ["sex"], ["a"], perturbation=1e-3))
    counts = np.zeros((2, 2))
    for r in rows:
        counts[r[0], r[2]] += 1
    np.testing.assert_array_equal(got.counts, counts)
    joint = counts / counts.sum() + 1e-3
    joint /= joint.sum()
    np.testing.assert_allclose(got.prior.p, joint.sum(axis=0), atol=1e-15)
    np.testing.assert_allclose(got.channel.s, joint / joint.sum(axis=0), atol=1e-15)


def test_single_row_point_mass(tmp_path):
    path = write_csv(tmp_path / "one.csv", ["s", "x"], [[1, 2], [0, 3]][:1])
    with pytest.warns(SingleValueAlphabet):
        got = ingest(IngestSpec(path, ["s"], ["x"], perturbation=0.0))
    np.testing.assert_array_equal(got.prior.p, [1.0])
    np.testing.assert_allclose(got.channel.s.sum(axis=0), 1.0)


def test_all_zero_grid_becomes_uniform():
    np.testing.assert_allclose(perturb_and_normalize(np.zeros((2, 2)), 1e-3), 0.25, atol=1e-15)
    with pytest.raises(InputError):
        perturb_and_normalize(np.zeros((2, 2)), 0.0)


def test_split_joint_zero_column():
    p, s = split_joint([[0.5, 0.0], [0.5, 0.0]])
    np.testing.assert_array_equal(p, [1.0, 0.0])
    np.testing.assert_array_equal(s[:, 1], [0.5, 0.5])


def test_numeric_values_sort_numerically(tmp_path):
    path = write_csv(tmp_path / "n.csv", ["s", "x"], [[1, 10], [0, 9], [1, 2], [0, 10]])
    got = ingest(IngestSpec(path, ["s"], ["x"]))
    assert got.x_alphabet == [("2",), ("9",), ("10",)]


def test_delimiter_and_whitespace(tmp_path):
    path = write_csv(tmp_path / "d.tsv", ["s ", " x"], [["a", " u"], ["b", "v "]], delimiter="\t")
    got = ingest(IngestSpec(path, ["s"], ["x"], delimiter="\t"))
    assert got.x_alphabet == [("u",), ("v",)]


class TestErrors:
    def test_missing_column(self, binary_table):
        with pytest.raises(MissingColumn, match="zzz"):
            ingest(IngestSpec(binary_table[0], ["zzz"], ["a"]))

    def test_empty(self, tmp_path):
        empty = tmp_path / "e.csv"
        empty.write_text("")
        with pytest.raises(EmptyFile):
            ingest(IngestSpec(str(empty), ["s"], ["x"]))
        empty.write_text("s,x\n")
        with pytest.raises(EmptyFile):
            ingest(IngestSpec(str(empty), ["s"], ["x"]))

    def test_overlap(self):
        with pytest.raises(InputError):
            IngestSpec("f", ["a"], ["a", "b"])

    def test_short_row(self, tmp_path):
        path = tmp_path / "s.csv"
        path.write_text("s,x\n1\n")
        with pytest.raises(InputError):
            ingest(IngestSpec(str(path), ["s"], ["x"]))


@pytest.mark.filterwarnings("ignore::privfunnel.ingest.SingleValueAlphabet")
@settings(max_examples=25, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 2), st.integers(0, 3)), min_size=2, max_size=40), st.randoms())
def test_order_insensitive(tmp_path_factory, rows, rnd):
    d = tmp_path_factory.mktemp("perm")
    shuffled = list(rows)
    rnd.shuffle(shuffled)
    a = ingest(IngestSpec(write_csv(d / "a.csv", ["s", "x"], rows), ["s"], ["x"]))
    b = ingest(IngestSpec(write_csv(d / "b.csv", ["s", "x"], shuffled), ["s"], ["x"]))
    np.testing.assert_array_equal(a.prior.p, b.prior.p)
    np.testing.assert_array_equal(a.channel.s, b.channel.s)
    assert a.x_alphabet == b.x_alphabet


def test_json_round_trip(binary_table, tmp_path):
    got = ingest(IngestSpec(binary_table[0], ["sex", "income"], ["a", "b", "c", "d"]))
    out = tmp_path / "dist.json"
    dump_distribution(got.prior, got.channel, out, x_alphabet=[list(v) for v in got.x_alphabet])
    prior, channel = load_distribution(out)
    assert np.max(np.abs(prior.p - got.prior.p)) <= 1e-15
    assert np.max(np.abs(channel.s - got.channel.s)) <= 1e-15
    assert json.loads(out.read_text())["x_alphabet"][1] == ["0", "0", "0", "1"]


def test_all_combinations_present(tmp_path):
    rows = [list(t) for t in itertools.product([0, 1], repeat=3)]
    got = ingest(IngestSpec(write_csv(tmp_path / "c.csv", ["s", "x1", "x2"], rows), ["s"], ["x1", "x2"],
                            perturbation=0.0))
    np.testing.assert_allclose(got.prior.p, 0.25)
    np.testing.assert_allclose(got.channel.s, 0.5)
