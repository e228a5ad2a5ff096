import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from multirate.codec import CodecConfig, block_mean, decode_segment, encode_segment, reconstruct_at_rate, upsample
from multirate.metrics import psnr
from multirate.tensor import LatentSegment, VideoSegment

F1 = CodecConfig(spatial_factor=1)


def ramp(T=17, h=4, w=4, c=3):
    vals = np.arange(T) / (T - 1)
    return VideoSegment(np.broadcast_to(vals[:, None, None, None], (T, h, w, c)).copy())


def noise(seed=0, T=17, h=16, w=16, c=3):
    return VideoSegment(np.random.default_rng(seed).uniform(size=(T, h, w, c)))


@pytest.mark.parametrize("rate, kept", [(4, [0, 4, 8, 12, 16]), (16, [0, 16]), (2, list(range(0, 17, 2)))])
def test_kept_indices(rate, kept):
    x = VideoSegment(np.arange(17, dtype=float)[:, None, None, None] / 16 * np.ones((17, 2, 2, 1)))
    z = encode_segment(x, rate, F1)
    assert len(z) == 1 + 16 // rate
    np.testing.assert_array_equal(z.frames[:, 0, 0, 0], np.array(kept) / 16)


def test_block_mean_example():
    x = np.array([[0.0, 0.0], [1.0, 1.0]])[None, :, :, None]
    assert block_mean(x, 2).item() == 0.5


def test_encode_rejects_bad_rate_and_factor():
    x = noise(h=16, w=16)
    with pytest.raises(ValueError):
        encode_segment(x, 3, F1)
    with pytest.raises(ValueError):
        encode_segment(x, 4, CodecConfig(spatial_factor=5))
    with pytest.raises(ValueError):
        encode_segment(VideoSegment(np.zeros((16, 8, 8, 1))), 4, F1)


@pytest.mark.parametrize("rate", [2, 4, 8, 16])
def test_linear_ramp_is_fixed_point(rate):
    x = ramp()
    y = reconstruct_at_rate(x, rate, F1)
    np.testing.assert_array_equal(y.frames, x.frames)
    assert psnr(x, y) == 100.0


def test_length_mismatch():
    z = np.zeros((3, 1, 1, 3))
    with pytest.raises(ValueError, match="rate/length mismatch"):
        decode_segment(z, 16, CodecConfig())


@pytest.mark.parametrize("factor", [1, 2, 4, 8])
@pytest.mark.parametrize("rate", [2, 4, 8, 16])
def test_static_block_constant_exact(factor, rate):
    cfg = CodecConfig(spatial_factor=factor)
    x = VideoSegment(np.full((17, 16, 16, 3), 0.3))
    y = reconstruct_at_rate(x, rate, cfg)
    # block mean of a constant equals it up to float summation
    assert np.max(np.abs(y.frames - x.frames)) < 1e-15
    assert psnr(x, y) == 100.0


def test_constant_video_rate8_caps_psnr():
    x = VideoSegment(np.full((17, 64, 64, 3), 0.7))
    assert psnr(x, reconstruct_at_rate(x, 8)) == 100.0


@pytest.mark.parametrize("cfg", [F1, CodecConfig(spatial_factor=8)])
def test_noise_psnr_strictly_decreasing(cfg):
    x = noise(seed=11, h=64, w=64)
    values = [psnr(x, reconstruct_at_rate(x, r, cfg)) for r in (2, 4, 8, 16)]
    assert all(a > b for a, b in zip(values, values[1:])), values


def test_kept_frames_equal_upsampled_latent():
    x = noise(seed=2, h=16, w=16)
    cfg = CodecConfig(spatial_factor=4)
    z = encode_segment(x, 4, cfg)
    y = decode_segment(z, 4, cfg)
    up = np.clip(upsample(z.frames, 4), 0, 1)
    np.testing.assert_array_equal(y.frames[::4], up)


def test_determinism_bit_identical():
    x = noise(seed=5, h=16, w=16)
    a = encode_segment(x, 8, CodecConfig(spatial_factor=4))
    b = encode_segment(x, 8, CodecConfig(spatial_factor=4))
    assert a.frames.tobytes() == b.frames.tobytes()


def test_causality():
    x = noise(seed=6, h=16, w=16)
    cfg = CodecConfig(spatial_factor=4)
    rate = 4
    z = encode_segment(x, rate, cfg)
    for k in range(len(z)):
        later = x.frames.copy()
        later[k * rate + 1:] = 0.0
        z2 = encode_segment(VideoSegment(later), rate, cfg)
        np.testing.assert_array_equal(z2.frames[k], z.frames[k])


@given(arrays(np.float64, (3, 8, 8, 2), elements=st.integers(0, 256).map(lambda v: v / 256)))
@settings(max_examples=30, deadline=None)
def test_block_mean_preserves_energy(x):
    # dyadic inputs make the sums exact
    assert block_mean(x, 4).sum() * 16 == x.sum()


def test_hold_interpolation():
    x = ramp()
    y = reconstruct_at_rate(x, 4, CodecConfig(spatial_factor=1, temporal="hold"))
    np.testing.assert_array_equal(y.frames[1:4], np.repeat(x.frames[:1], 3, axis=0))
    np.testing.assert_array_equal(y.frames[16], x.frames[16])


def test_nearest_upsample_exact_on_blocks():
    lat = np.random.default_rng(0).uniform(size=(2, 2, 2, 1))
    up = upsample(lat, 4, "nearest")
    np.testing.assert_array_equal(block_mean(up, 4), lat)


def test_output_clamped():
    lat = LatentSegment(np.array([0.0, 1.0])[:, None, None, None] * np.ones((2, 2, 2, 1)) + [[[[0.5]]]], 16, 17)
    y = decode_segment(lat, 16, CodecConfig(spatial_factor=2))
    assert y.frames.max() <= 1.0


def test_config_validation():
    with pytest.raises(ValueError):
        CodecConfig(planner_rates=(4, 8, 32))
    with pytest.raises(ValueError):
        CodecConfig(analysis_rates=(3,), planner_rates=(3,))
    assert CodecConfig().valid_lengths() == {9: 2, 5: 4, 3: 8, 2: 16}
