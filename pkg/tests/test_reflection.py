from __future__ import annotations

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from wordmirror.errors import DegenerateMirrorError
from wordmirror.nn import DenseLayer, MlpParams
from wordmirror.reflection import (AttributeVector, Mirror, RefModel, constant_mirror_model,
                                   distance_to_mirror, mirror_for, reflect, reflect_rows,
                                   transfer)

from conftest import attr


def _draw(seed, dim):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal(dim) * rng.uniform(0.1, 10)
    c = rng.standard_normal(dim) * rng.uniform(0.1, 10)
    v = rng.standard_normal(dim) * rng.uniform(0.1, 100)
    return Mirror(a, c), v


cases = st.tuples(st.integers(0, 2**32 - 1), st.sampled_from([2, 3, 7, 50, 300]))


def test_reflect_examples():
    m = Mirror([1.0, 0.0], [0.0, 0.0])
    np.testing.assert_array_equal(reflect(m, [3.0, 2.0]), [-3.0, 2.0])
    np.testing.assert_array_equal(reflect(m, [0.0, 5.0]), [0.0, 5.0])
    assert distance_to_mirror(m, [3.0, 2.0]) == 3.0
    assert distance_to_mirror(m, [0.0, 5.0]) == 0.0


def test_reflect_involution_d7(rng):
    m = Mirror(rng.standard_normal(7), rng.standard_normal(7))
    v = rng.standard_normal(7)
    assert np.linalg.norm(reflect(m, reflect(m, v)) - v) / np.linalg.norm(v) < 1e-10


def test_degenerate_mirror():
    m = Mirror([1e-9, 0.0], [0.0, 0.0])
    with pytest.raises(DegenerateMirrorError):
        reflect(m, [1.0, 1.0])
    with pytest.raises(DegenerateMirrorError):
        distance_to_mirror(m, [1.0, 1.0])


def test_mirror_validation():
    with pytest.raises(ValueError):
        Mirror([1.0, 0.0], [0.0])
    with pytest.raises(ValueError):
        Mirror([np.nan, 0.0], [0.0, 0.0])


@settings(max_examples=300, deadline=None)
@given(cases)
def test_involution(case):
    m, v = _draw(*case)
    assert np.linalg.norm(reflect(m, reflect(m, v)) - v) / max(1.0, np.linalg.norm(v)) < 1e-10


@settings(max_examples=300, deadline=None)
@given(cases)
def test_isometry(case):
    m, u = _draw(*case)
    v = np.random.default_rng(case[0] + 1).standard_normal(len(u))
    d0 = np.linalg.norm(u - v)
    d1 = np.linalg.norm(reflect(m, u) - reflect(m, v))
    assert abs(d1 - d0) <= 1e-10 * max(1.0, d0)


@settings(max_examples=300, deadline=None)
@given(cases)
def test_fixed_points(case):
    m, v = _draw(*case)
    a = m.normal
    on = v - (np.dot(v - m.point, a) / np.dot(a, a)) * a
    assert np.linalg.norm(reflect(m, on) - on) <= 1e-12 * max(1.0, np.linalg.norm(on),
                                                              np.linalg.norm(m.point))


@settings(max_examples=300, deadline=None)
@given(cases)
def test_midpoint_on_mirror(case):
    m, v = _draw(*case)
    mid = (v + reflect(m, v)) / 2.0
    scale = np.linalg.norm(m.normal) * max(1.0, np.linalg.norm(v), np.linalg.norm(m.point))
    assert abs(np.dot(mid - m.point, m.normal)) <= 1e-10 * scale


@settings(max_examples=300, deadline=None)
@given(cases)
def test_normal_scale_invariance(case):
    m, v = _draw(*case)
    np.testing.assert_allclose(reflect(Mirror(2 * m.normal, m.point), v), reflect(m, v),
                               rtol=0, atol=1e-12 * max(1.0, np.linalg.norm(v)))


@settings(max_examples=200, deadline=None)
@given(cases)
def test_distance_symmetric_under_reflection(case):
    m, v = _draw(*case)
    d1, d2 = distance_to_mirror(m, v), distance_to_mirror(m, reflect(m, v))
    assert abs(d1 - d2) <= 1e-10 * max(1.0, d1)


def test_reflect_rows_matches_reflect(rng):
    v, a, c = (rng.standard_normal((6, 5)) for _ in range(3))
    y = reflect_rows(v, a, c)
    for i in range(6):
        np.testing.assert_allclose(y[i], reflect(Mirror(a[i], c[i]), v[i]), atol=1e-13)


def test_ref_mirror_ignores_input(rng):
    model = RefModel.create(attr(6), False, 0, hidden=(8,))
    m1 = mirror_for(model, rng.standard_normal(6))
    m2 = mirror_for(model, rng.standard_normal(6))
    np.testing.assert_array_equal(m1.normal, m2.normal)
    np.testing.assert_array_equal(m1.point, m2.point)


def test_refpm_mirror_deterministic_and_input_dependent(rng):
    model = RefModel.create(attr(6), True, 0, hidden=(8,))
    v = rng.standard_normal(6)
    m1, m2 = mirror_for(model, v), mirror_for(model, v.copy())
    np.testing.assert_array_equal(m1.normal, m2.normal)
    assert not np.allclose(mirror_for(model, rng.standard_normal(6)).normal, m1.normal)
    with pytest.raises(ValueError):
        mirror_for(model, None)


def test_refpm_zero_weights_give_bias(rng):
    b = np.array([0.5, -1.0, 2.0])
    model = constant_mirror_model(attr(3), b, np.zeros(3), parameterized=True)
    for _ in range(3):
        np.testing.assert_array_equal(mirror_for(model, rng.standard_normal(3)).normal, b)


def test_model_shape_validation():
    a = attr(4)
    bad = MlpParams([DenseLayer(np.zeros((4, 4)), np.zeros(4), "identity")])
    with pytest.raises(ValueError):
        RefModel(a, bad, bad, parameterized=True)


def test_degenerate_mirror_names_word():
    model = constant_mirror_model(attr(3), np.zeros(3), np.zeros(3))
    with pytest.raises(DegenerateMirrorError) as exc:
        transfer(model, np.ones(3), word="king")
    assert "king" in str(exc.value)
    assert np.all(np.isnan(model.transfer_rows(np.ones((2, 3)))))


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000))
def test_ref_transfer_involution(seed):
    model = RefModel.create(attr(5, seed), False, seed, hidden=(6,))
    v = np.random.default_rng(seed).standard_normal(5)
    assume(np.linalg.norm(model.mirrors(v)[0]) > 1e-3)  # all-dead relus give a = 0
    assert np.linalg.norm(transfer(model, transfer(model, v)) - v) / max(1.0, np.linalg.norm(v)) < 1e-8


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000))
def test_refpm_individual_mirrors_are_involutions(seed):
    # only the per-word mirror is an involution; the whole Ref+PM map need not be
    model = RefModel.create(attr(5, seed), True, seed, hidden=(6,))
    v = np.random.default_rng(seed).standard_normal(5)
    assume(np.linalg.norm(model.mirrors(v)[0]) > 1e-3)  # all-dead relus give a = 0
    m = mirror_for(model, v)
    assert np.linalg.norm(reflect(m, reflect(m, v)) - v) / max(1.0, np.linalg.norm(v)) < 1e-10


def test_transfer_of_on_mirror_vector(rng):
    a, c = rng.standard_normal(4), rng.standard_normal(4)
    model = constant_mirror_model(attr(4), a, c)
    v = rng.standard_normal(4)
    v = v - (np.dot(v - c, a) / np.dot(a, a)) * a
    assert np.linalg.norm(transfer(model, v) - v) <= 1e-10 * max(1.0, np.linalg.norm(v))


def test_planted_refpm_reproduces_pairs(rng):
    # one hyperplane planted in both Ref and Ref+PM form; transfer equals direct reflection
    a, c = rng.standard_normal(6), rng.standard_normal(6)
    m = Mirror(a, c)
    pm = constant_mirror_model(attr(6), a, c, parameterized=True)
    noise = 1e-3
    for _ in range(20):
        v_m = rng.standard_normal(6)
        v_w = reflect(m, v_m) + noise * rng.standard_normal(6)
        assert np.linalg.norm(transfer(pm, v_m) - v_w) < noise * 6
        np.testing.assert_allclose(transfer(pm, v_m), reflect(m, v_m), atol=1e-12)


def test_batch_transfer_matches_single(rng):
    model = RefModel.create(attr(4), True, 1, hidden=(5,))
    v = rng.standard_normal((7, 4))
    y = model.transfer_rows(v)
    for i in range(7):
        np.testing.assert_allclose(y[i], transfer(model, v[i]), atol=1e-12)


def test_attribute_vector():
    z = AttributeVector.draw("g", 300, 0)
    assert z.z.shape == (300,) and z.trainable
    assert abs(np.std(z.z) - 1 / np.sqrt(300)) < 0.2 / np.sqrt(300)
    np.testing.assert_array_equal(z.z, AttributeVector.draw("g", 300, 0).z)
    with pytest.raises(ValueError):
        AttributeVector("g", np.array([np.inf]))
