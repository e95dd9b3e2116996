from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wordmirror.baselines import (AnalogyModel, DifferenceVector, KnowledgeTable, MlpTransferModel,
                                  analogy_transfer, analogy_transfer_fixed, fit_analogy, mean_diff,
                                  mlp_transfer, select_diff)
from wordmirror.embeddings import EmbeddingTable, nearest_token
from wordmirror.errors import DatasetError, KnowledgeRequiredError
from wordmirror.nn import DenseLayer, MlpParams, adam_init, adam_step, grad_check
from wordmirror.training import loss_arrays

from conftest import attr


@pytest.fixture
def royal():
    # king - man + woman lands on queen in this toy space
    toks = ("man", "woman", "king", "queen", "boy", "girl", "person")
    vecs = np.array([
        [1.0, 0.0, 0.0, 0.1],
        [0.0, 1.0, 0.0, 0.1],
        [1.0, 0.0, 1.0, 0.0],
        [0.0, 1.0, 1.0, 0.0],
        [1.0, 0.0, 0.0, 1.0],
        [0.0, 1.0, 0.0, 1.0],
        [0.5, 0.5, 0.3, 0.3],
    ])
    return EmbeddingTable(toks, vecs)


def test_analogy_transfer_knowledge(royal):
    v = royal.vectors
    d = DifferenceVector(v[0] - v[1], ("man", "woman"))
    np.testing.assert_array_equal(analogy_transfer(v[0], d, "M"), v[1])
    np.testing.assert_array_equal(analogy_transfer(v[1], d, "F"), v[0])
    assert nearest_token(royal, analogy_transfer(v[2], d, "M"))[0] == "queen"
    with pytest.raises(KnowledgeRequiredError):
        analogy_transfer(v[6], d, None)


def test_analogy_transfer_fixed(royal):
    v = royal.vectors
    d = v[0] - v[1]
    np.testing.assert_array_equal(analogy_transfer_fixed(v[2], np.zeros(4), "+"), v[2])
    np.testing.assert_array_equal(analogy_transfer_fixed(v[0], d, "-"), v[1])
    wrong = analogy_transfer_fixed(v[1], d, "-")
    np.testing.assert_allclose(wrong, 2 * v[1] - v[0])
    assert nearest_token(royal, wrong)[0] != "man"
    with pytest.raises(ValueError):
        analogy_transfer_fixed(v[0], d, "*")


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_exact_recovery_and_composition(seed):
    rng = np.random.default_rng(seed)
    vm, vw, x = rng.standard_normal((3, 10)) * rng.uniform(0.1, 10)
    d = vm - vw
    np.testing.assert_allclose(analogy_transfer(vm, d, "M"), vw, rtol=0,
                               atol=1e-12 * max(1.0, np.linalg.norm(vw)) * 10)
    np.testing.assert_allclose(analogy_transfer(analogy_transfer(x, d, "M"), d, "F"), x,
                               rtol=0, atol=1e-12 * max(1.0, np.linalg.norm(x)) * 10)
    np.testing.assert_allclose(analogy_transfer_fixed(analogy_transfer_fixed(x, d, "+"), d, "-"),
                               x, rtol=0, atol=1e-12 * max(1.0, np.linalg.norm(x)) * 10)


def _table(vecs):
    return EmbeddingTable(tuple(vecs), np.array(list(vecs.values()), dtype=float))


def test_mean_diff_examples():
    t = _table({"a": [3.0, 1.0], "b": [1.0, 1.0], "c": [0.0, 3.0], "d": [0.0, 1.0]})
    np.testing.assert_array_equal(mean_diff([("a", "b")], t).d, [2.0, 0.0])
    np.testing.assert_array_equal(mean_diff([("a", "b"), ("c", "d")], t).d, [1.0, 1.0])
    np.testing.assert_array_equal(mean_diff([("a", "b"), ("b", "a")], t).d, [0.0, 0.0])


def test_mean_diff_three_pairs_by_hand():
    t = _table({"a": [1.0, 2.0, 3.0], "b": [0.0, 0.0, 1.0], "c": [5.0, 5.0, 5.0],
                "d": [4.0, 6.0, 5.0], "e": [-1.0, 0.5, 2.0], "f": [1.0, 0.5, 0.0]})
    # diffs: (1,2,2), (1,-1,0), (-2,0,2) -> mean (0, 1/3, 4/3)
    d = mean_diff([("a", "b"), ("c", "d"), ("e", "f")], t).d
    np.testing.assert_allclose(d, [0.0, 1 / 3, 4 / 3], rtol=0, atol=1e-15)


def test_mean_diff_skips_oov_and_errors_when_empty():
    t = _table({"a": [1.0, 0.0], "b": [0.0, 1.0]})
    np.testing.assert_array_equal(mean_diff([("a", "b"), ("a", "zz")], t).d, [1.0, -1.0])
    with pytest.raises(DatasetError):
        mean_diff([("x", "y")], t)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_mean_diff_permutation_invariant(seed):
    rng = np.random.default_rng(seed)
    n = 12
    t = EmbeddingTable(tuple(f"w{i}" for i in range(2 * n)), rng.standard_normal((2 * n, 5)) * 1e3)
    pairs = [(f"w{2 * i}", f"w{2 * i + 1}") for i in range(n)]
    perm = [pairs[i] for i in rng.permutation(n)]
    assert np.max(np.abs(mean_diff(pairs, t).d - mean_diff(perm, t).d)) <= 1e-12


def test_select_diff_single_candidate():
    t = _table({"a": [1.0, 0.0], "b": [0.0, 1.0]})
    d = select_diff([("a", "b")], [], t, KnowledgeTable.from_pairs([("a", "b")]))
    np.testing.assert_array_equal(d.d, [1.0, -1.0])
    assert d.source_pair == ("a", "b")


def test_select_diff_picks_transferring_candidate():
    # (p,q) shifts by a large wrong offset; (r,s) moves the val pair exactly
    t = _table({"p": [0.0, 5.0, 1.0], "q": [0.0, 0.0, 1.0],
                "r": [0.0, 1.0, 0.0], "s": [0.0, 1.0, 1.0],
                "u": [3.0, 0.0, 0.0], "w": [3.0, 0.0, 1.0]})
    pairs = [("p", "q"), ("r", "s")]
    val = [("u", "w")]
    k = KnowledgeTable.from_pairs(pairs + val)

    def brute_score(d):
        hits = 0
        for x, tgt in (("u", "w"), ("w", "u")):
            v = t.vectors[t.index(x)]
            y = v - d if k[x] == "M" else v + d
            cos = [y @ row / (np.linalg.norm(y) * np.linalg.norm(row)) for row in t.vectors]
            hits += t.tokens[int(np.argmax(cos))] == tgt
        return hits

    diffs = [t.vectors[t.index(m)] - t.vectors[t.index(w)] for m, w in pairs]
    assert [brute_score(d) for d in diffs] == [0, 2]
    d = select_diff(pairs, val, t, k)
    assert d.source_pair == ("r", "s")
    np.testing.assert_array_equal(d.d, diffs[1])


def test_select_diff_tie_keeps_first():
    t = _table({"a": [1.0, 0.0], "b": [0.9, 0.1], "c": [0.0, 1.0], "d": [0.1, 0.9],
                "x": [5.0, 5.0], "y": [-5.0, 5.0]})
    pairs = [("a", "b"), ("c", "d")]
    val = [("x", "y")]
    d = select_diff(pairs, val, t, KnowledgeTable.from_pairs(pairs + val))
    assert d.source_pair == ("a", "b")
    with pytest.raises(DatasetError):
        select_diff([("nope", "zip")], val, t, {})


def test_knowledge_table():
    k = KnowledgeTable.from_pairs([("man", "woman"), ("king", "queen")])
    assert k.side("man") == "M" and k.side("queen") == "F" and k.side("person") is None
    with pytest.raises(DatasetError):
        KnowledgeTable.from_pairs([("a", "b"), ("b", "c")])


def test_fit_analogy_kinds(royal):
    pairs = [("man", "woman"), ("king", "queen")]
    val = [("boy", "girl")]
    m = fit_analogy("diff", pairs, val, royal)
    assert m.requires_knowledge
    y = m.transfer_rows(royal.vectors[[4, 5, 6]], ["boy", "girl", "person"])
    assert nearest_token(royal, y[0])[0] == "girl" and nearest_token(royal, y[1])[0] == "boy"
    assert np.all(np.isnan(y[2]))
    plus = fit_analogy("meandiff+", pairs, val, royal)
    assert not plus.requires_knowledge and plus.mode == "+"
    with pytest.raises(ValueError):
        fit_analogy("cosmul", pairs, val, royal)
    with pytest.raises(KnowledgeRequiredError):
        AnalogyModel("diff", m.diff, "knowledge").transfer_rows(royal.vectors[:1])


def test_mlp_transfer_zero_net():
    a = attr(3)
    mlp = MlpParams([DenseLayer(np.zeros((4, 6)), np.zeros(4), "relu"),
                     DenseLayer(np.zeros((3, 4)), np.zeros(3), "identity")])
    np.testing.assert_array_equal(mlp_transfer(MlpTransferModel(a, mlp), np.ones(3)), np.zeros(3))
    with pytest.raises(ValueError):
        MlpTransferModel(a, MlpParams([DenseLayer(np.zeros((3, 3)), np.zeros(3), "identity")]))


def test_mlp_overfits_single_pair(rng):
    model = MlpTransferModel.create(attr(4), 0, hidden=(16, 16))
    src, tgt = rng.standard_normal((1, 4)), rng.standard_normal((1, 4))
    params = model.parameters()
    state = adam_init(params, alpha=1e-2)
    for _ in range(3000):
        value, grads = loss_arrays(model, src, tgt, np.zeros((0, 4)))
        params, state = adam_step(state, params, grads)
        model = model.with_parameters(params)
    value, _ = loss_arrays(model, src, tgt, np.zeros((0, 4)))
    assert value < 1e-6
    np.testing.assert_allclose(mlp_transfer(model, src[0]), tgt[0], atol=1e-3)


def test_mlp_gradient_check(rng):
    model = MlpTransferModel.create(attr(4), 1, hidden=(6, 5))
    src, tgt, non = rng.standard_normal((3, 4)), rng.standard_normal((3, 4)), rng.standard_normal((2, 4))

    def fn(params):
        return loss_arrays(model.with_parameters(params), src, tgt, non)

    assert grad_check(fn, model.parameters()) < 1e-4
