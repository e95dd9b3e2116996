from __future__ import annotations

import numpy as np
import pytest

from wordmirror.data import (AttributeDataset, load_pairs, read_pairs, read_words,
                             resolve_triplets, sample_non_attribute, split_pairs, write_pairs,
                             write_words)
from wordmirror.embeddings import EmbeddingTable
from wordmirror.errors import DatasetError

from conftest import write_text


@pytest.fixture
def mf53(tmp_path):
    pairs = [(f"m{i}", f"f{i}") for i in range(53)]
    write_pairs(tmp_path / "mf.tsv", pairs)
    return tmp_path / "mf.tsv", pairs


def test_counted_split_of_53_pairs(mf53):
    path, pairs = mf53
    ds = load_pairs(path, {"train": 29, "val": 12, "test": 12, "seed": 0}, attribute="MF")
    assert ds.sizes() == {"train": 29, "val": 12, "test": 12}
    got = set(ds.train_pairs) | set(ds.val_pairs) | set(ds.test_pairs)
    assert got == set(pairs)
    again = load_pairs(path, {"train": 29, "val": 12, "test": 12, "seed": 0}, attribute="MF")
    assert again == ds
    other = load_pairs(path, {"train": 29, "val": 12, "test": 12, "seed": 1}, attribute="MF")
    assert other.train_pairs != ds.train_pairs


def test_single_pair_expansion(tmp_path):
    write_text(tmp_path / "p.tsv", "# header comment\na\tb\n\n")
    ds = load_pairs(tmp_path / "p.tsv", {"train": 1, "val": 0, "test": 0}, attribute="g")
    assert ds.triplets("train") == [("a", "b", "g"), ("b", "a", "g")]


def test_counts_exceeding_available(mf53):
    with pytest.raises(DatasetError):
        load_pairs(mf53[0], {"train": 60, "val": 0, "test": 0})


def test_malformed_line_number(tmp_path):
    write_text(tmp_path / "p.tsv", "a\tb\n# c\nbad line\n")
    with pytest.raises(DatasetError) as exc:
        read_pairs(tmp_path / "p.tsv")
    assert exc.value.line == 3 and "line 3" in str(exc.value)


def test_explicit_split_files(tmp_path):
    write_pairs(tmp_path / "tr.tsv", [("a", "b"), ("c", "d")])
    write_pairs(tmp_path / "te.tsv", [("e", "f")])
    ds = load_pairs(None, {"files": {"train": "tr.tsv", "test": "te.tsv"}}, attribute="x",
                    base_dir=tmp_path)
    assert ds.sizes() == {"train": 2, "val": 0, "test": 1}


def test_duplicates_dropped(tmp_path):
    write_text(tmp_path / "p.tsv", "a\tb\nb\ta\nc\td\n")
    ds = load_pairs(tmp_path / "p.tsv", {"train": 2})
    assert len(ds.train_pairs) == 2


def test_directed_symmetry_and_disjointness():
    ds = AttributeDataset("g", (("a", "b"), ("c", "d")), (("e", "f"),), (("g", "h"),))
    for split in ("train", "val", "test"):
        trip = ds.triplets(split)
        assert len(trip) == 2 * len(ds.pairs(split))
        for x, t, _ in trip:
            assert (t, x, "g") in trip
    with pytest.raises(DatasetError):
        AttributeDataset("g", (("a", "b"),), (("b", "a"),))


def test_split_pairs_validation():
    with pytest.raises(DatasetError):
        split_pairs([("a", "b")], -1, 0, 0, 0)


@pytest.fixture
def vocab():
    n = 50_000
    toks = tuple(f"w{i}" for i in range(n))
    return EmbeddingTable(toks, np.ones((n, 1)))


def test_sample_non_attribute(vocab):
    ds = AttributeDataset("g", tuple((f"w{2 * i}", f"w{2 * i + 1}") for i in range(50)))
    s = sample_non_attribute(vocab, ds, 4, 1000, seed=3)
    assert len(s.train) == 4 and len(s.test) == 1000
    assert not set(s.train) & set(s.test)
    assert not (set(s.train) | set(s.test)) & ds.tokens()
    assert s == sample_non_attribute(vocab, ds, 4, 1000, seed=3)
    assert sample_non_attribute(vocab, ds, 0, 10, seed=3).train == ()


def test_sample_non_attribute_insufficient():
    t = EmbeddingTable(("a", "b", "c"), np.ones((3, 1)))
    ds = AttributeDataset("g", (("a", "b"),))
    with pytest.raises(DatasetError):
        sample_non_attribute(t, ds, 1, 1, 0)


def test_word_files_round_trip(tmp_path):
    write_words(tmp_path / "w.txt", ["x", "y"])
    assert read_words(tmp_path / "w.txt") == ["x", "y"]


def test_resolve_triplets():
    t = EmbeddingTable(("a", "b"), np.eye(2))
    ok, skipped = resolve_triplets([("a", "b", "g"), ("a", "zz", "g")], t)
    assert ok == [("a", "b", "g")] and skipped == 1
    with pytest.raises(DatasetError):
        resolve_triplets([("a", "zz", "g")], t, strict=True)
