"""Projection, quantization, offset encoding and bit-slicing tests."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cimrag.codec import (
    ProjectionHead,
    QuantSpec,
    bit_slice,
    bit_slice_matrix,
    dequantize,
    hash_embed,
    l2_normalize,
    offset_decode,
    offset_encode,
    project,
    project_batch,
    quantize,
    recombine,
    slice_count,
)
from cimrag.devices import DeviceProfile, builtin_devices, device_by_name


def test_quant_spec_constants():
    spec = QuantSpec()
    assert spec.precision_bits == 8
    assert spec.qmax == 127
    assert spec.scale == pytest.approx(1 / 127)
    assert spec.offset == 128
    with pytest.raises(ValueError):
        QuantSpec(precision_bits=0)


def test_orthonormal_head_columns():
    head = ProjectionHead.orthonormal(384, 64, seed=0)
    gram = head.w.T @ head.w
    np.testing.assert_allclose(gram, np.eye(64), atol=1e-10)
    again = ProjectionHead.orthonormal(384, 64, seed=0)
    np.testing.assert_array_equal(head.w, again.w)
    other = ProjectionHead.orthonormal(384, 64, seed=1)
    assert not np.array_equal(head.w, other.w)


def test_head_copy_is_independent():
    head = ProjectionHead.orthonormal(16, 8, seed=0)
    dup = head.copy()
    dup.w[0, 0] += 1.0
    assert head.w[0, 0] != dup.w[0, 0]


def test_project_first_column_is_one_hot():
    head = ProjectionHead.orthonormal(32, 8, seed=2)
    out = project(head, head.w[:, 0])
    expected = np.zeros(8)
    expected[0] = 1.0
    np.testing.assert_allclose(out, expected, atol=1e-10)
    assert np.linalg.norm(out) == pytest.approx(1.0)


def test_project_output_shape_and_norm():
    head = ProjectionHead.orthonormal(48, 16, seed=3)
    rng = np.random.default_rng(0)
    for _ in range(5):
        out = project(head, rng.standard_normal(48))
        assert out.shape == (16,)
        assert np.linalg.norm(out) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        project(head, np.zeros(48))


def test_project_batch_matches_project():
    head = ProjectionHead.orthonormal(40, 12, seed=4)
    rng = np.random.default_rng(1)
    bases = rng.standard_normal((7, 40))
    batch = project_batch(head, bases)
    for i, base in enumerate(bases):
        np.testing.assert_allclose(batch[i], project(head, base), atol=1e-12)


def test_projection_preserves_cosine_sign_structure():
    rng = np.random.default_rng(9)
    head = ProjectionHead.orthonormal(384, 64, seed=9)
    vecs = rng.standard_normal((100, 384))
    vecs /= np.linalg.norm(vecs, axis=1, keepdims=True)
    proj = project_batch(head, vecs)
    gram_in = vecs @ vecs.T
    gram_out = proj @ proj.T
    iu = np.triu_indices(100, k=1)
    agree = np.mean(np.sign(gram_in[iu]) == np.sign(gram_out[iu]))
    assert agree >= 0.60


def test_l2_normalize():
    v = np.array([3.0, 4.0])
    np.testing.assert_allclose(l2_normalize(v), [0.6, 0.8])
    with pytest.raises(ValueError):
        l2_normalize(np.zeros(4))


def test_quantize_zeros_and_bounds():
    spec = QuantSpec()
    np.testing.assert_array_equal(quantize(np.zeros(16), spec), np.zeros(16))
    q = quantize(np.array([1.0, -1.0, 2.0, -2.0]), spec)
    np.testing.assert_array_equal(q, [127, -127, 127, -127])


def test_dequantize_round_trip_bound():
    spec = QuantSpec()
    rng = np.random.default_rng(2)
    vecs = rng.standard_normal((1000, 32))
    vecs /= np.linalg.norm(vecs, axis=1, keepdims=True)
    err = np.abs(dequantize(quantize(vecs, spec), spec) - vecs)
    assert err.max() <= spec.scale / 2 + 1e-12


def test_offset_encode_values():
    spec = QuantSpec()
    assert offset_encode(np.array([0]), spec)[0] == 128
    assert offset_encode(np.array([-127]), spec)[0] == 1
    assert offset_encode(np.array([127]), spec)[0] == 255
    np.testing.assert_array_equal(
        offset_decode(offset_encode(np.array([-5, 0, 99]), spec), spec), [-5, 0, 99]
    )


def test_offset_correction_identity_exact():
    spec = QuantSpec()
    rng = np.random.default_rng(3)
    for _ in range(1000):
        x = rng.integers(0, 256, 16)
        q = rng.integers(-127, 128, 16)
        u = offset_encode(q, spec)
        assert int(x @ q) == int(x @ u) - spec.offset * int(x.sum())


def test_slice_count_per_device():
    spec = QuantSpec()
    assert slice_count(device_by_name("Device-1"), spec) == 8
    for name in ("Device-2", "Device-3", "Device-4", "Device-5"):
        assert slice_count(device_by_name(name), spec) == 4
    odd = DeviceProfile(name="3bit", bits_per_cell=3, sigma_per_level=(0.01,) * 8)
    with pytest.raises(ValueError):
        slice_count(odd, spec)


def test_bit_slice_examples():
    spec = QuantSpec()
    dev = device_by_name("Device-2")
    np.testing.assert_array_equal(bit_slice(np.array([0]), dev, spec).slices[0], [0, 0, 0, 0])
    # LSB-first base-4 digits of 181 are [1, 1, 3, 2].
    assert recombine(np.array([1, 1, 3, 2]), dev) == 181
    assert recombine(np.zeros(4), dev) == 0


def test_bit_slice_recombine_round_trip_all_values():
    spec = QuantSpec()
    u = np.arange(256)
    for dev in builtin_devices():
        slices = bit_slice_matrix(u, dev, spec)
        assert slices.shape == (256, slice_count(dev, spec))
        assert slices.max() < dev.levels
        back = np.array([recombine(s, dev) for s in slices])
        np.testing.assert_array_equal(back, u)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(min_value=0, max_value=255), min_size=1, max_size=64))
def test_bit_slice_round_trip_property(values):
    spec = QuantSpec()
    u = np.array(values)
    for dev in builtin_devices():
        slices = bit_slice_matrix(u, dev, spec)
        back = np.array([recombine(s, dev) for s in slices])
        np.testing.assert_array_equal(back, u)


@settings(max_examples=60, deadline=None)
@given(
    st.lists(
        st.floats(min_value=-1.0, max_value=1.0, allow_nan=False),
        min_size=1,
        max_size=64,
    )
)
def test_quantize_range_property(values):
    spec = QuantSpec()
    q = quantize(np.array(values), spec)
    assert q.min() >= -spec.qmax
    assert q.max() <= spec.qmax
    u = offset_encode(q, spec)
    assert u.min() >= 1
    assert u.max() <= 255


def test_hash_embed_deterministic_unit_norm():
    a = hash_embed("the quick brown fox", 384, seed=0)
    b = hash_embed("the quick brown fox", 384, seed=0)
    np.testing.assert_array_equal(a, b)
    assert a.shape == (384,)
    assert np.linalg.norm(a) == pytest.approx(1.0)
    c = hash_embed("the quick brown fox", 384, seed=1)
    assert not np.array_equal(a, c)


def test_hash_embed_unrelated_strings_near_orthogonal():
    rng = np.random.default_rng(13)
    alphabet = np.array(list("abcdefghijklmnopqrstuvwxyz "))
    worst = 0.0
    for _ in range(200):
        s1 = "".join(rng.choice(alphabet, 100))
        s2 = "".join(rng.choice(alphabet, 100))
        v1 = hash_embed(s1, 384, seed=0)
        v2 = hash_embed(s2, 384, seed=0)
        worst = max(worst, abs(float(v1 @ v2)))
    assert worst < 0.3
