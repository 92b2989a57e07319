# tests/test_channel.py

import numpy as np
import pytest
from scipy import stats

from dcda.core.channel import (
    QuantizerState,
    dither_at,
    dither_vector,
    link_noise,
    quantize_delta,
    transmit_noisy,
    transmit_perfect,
)
from dcda.models.domain import NoisyChannel, QuantizedChannel, ZoomSchedule


def test_perfect_channel_is_identity():
    z = np.array([1.0, 2.0])
    assert transmit_perfect(z) is z


def test_noiseless_noisy_channel():
    z = np.array([1.0, -2.0, 3.0])
    np.testing.assert_array_equal(transmit_noisy(z, (0, 1), 5, NoisyChannel(gamma2=0.0)), z)


def test_noise_is_keyed_by_link_and_time():
    model = NoisyChannel(gamma2=0.3, seed=11)
    a = link_noise(model, (0, 1), 4, 6)
    np.testing.assert_array_equal(a, link_noise(model, (0, 1), 4, 6))
    assert not np.allclose(a, link_noise(model, (1, 0), 4, 6))
    assert not np.allclose(a, link_noise(model, (0, 1), 5, 6))


def test_noise_power():
    model = NoisyChannel(gamma2=0.5, seed=2)
    d = 20
    draws = np.concatenate([link_noise(model, (0, 1), t, d) for t in range(2000)])
    assert draws.var() == pytest.approx(0.5 / d, rel=0.05)


def test_dither_scalar_matches_vector():
    v = dither_vector(7, 2, 13, 9)
    for k in range(9):
        assert dither_at(7, 2, k, 13) == v[k]


def test_dither_is_uniform():
    draws = np.concatenate([dither_vector(3, 0, t, 100) for t in range(1000)])
    assert draws.min() >= -0.5 and draws.max() < 0.5
    result = stats.kstest(draws + 0.5, "uniform")
    assert result.statistic < 0.01


class TestQuantizer:
    def test_floor_of_dithered_argument(self):
        zoom = ZoomSchedule(s0=1.0, beta=0.5)
        # s(0) = 1: floor(2.5 + 0.3)
        assert quantize_delta(2.5, 0, 0.3, zoom) == 2
        assert quantize_delta(2.5, 0, 0.5, zoom) == 3
        assert quantize_delta(2.5, 0, -0.3, zoom) == 2
        assert quantize_delta(0.0, 0, 0.0, zoom) == 0
        assert quantize_delta(0.0, 0, -0.1, zoom) == -1

    def test_scale_follows_zoom(self):
        zoom = ZoomSchedule(s0=2.0, beta=0.5)
        # s(1) = 1, s(2) = 0.5
        assert quantize_delta(1.2, 1, 0.0, zoom) == 1
        assert quantize_delta(1.2, 2, 0.0, zoom) == 2

    def test_reconstruction_error_against_dithered_value(self, rng):
        zoom = ZoomSchedule(s0=0.7, beta=0.99)
        for t in range(0, 300, 7):
            s = zoom(t)
            deltas = rng.normal(scale=5.0, size=200)
            dithers = rng.uniform(-0.5, 0.5, size=200)
            err = s * quantize_delta(deltas, t, dithers, zoom) - deltas
            assert np.all(np.abs(err - s * dithers) < s)
            assert np.all(np.abs(err) < 1.5 * s)

    def test_mean_symbol_is_half_a_step_low(self):
        zoom = ZoomSchedule(s0=1.0, beta=0.9)
        delta = 0.37
        dithers = dither_vector(5, 0, 1, 200_000)
        u = quantize_delta(np.full(dithers.shape, delta), 0, dithers, zoom)
        assert u.mean() == pytest.approx(delta - 0.5, abs=5e-3)

    def test_state_encode_decode_and_audit(self):
        model = QuantizedChannel(zoom=ZoomSchedule(1.0, 0.9), seed=4)
        state = QuantizerState(model=model, audit=True)
        deltas = np.array([[0.4, -1.2], [2.0, 0.0]])
        symbols = state.encode(deltas, 3)
        recon = state.decode(symbols, 3)
        dithers = np.stack([dither_vector(4, j, 3, 2) for j in range(2)])
        assert np.all(np.abs(recon - deltas - model.zoom(3) * dithers) < model.zoom(3))
        state.log(3, symbols, deltas, np.array([0, 1]), [(1,), (0,)])
        assert len(state.records) == 4
        assert state.links[0] == (1,)
        t, sender, k, symbol, delta, scale = state.records[1]
        assert (t, sender, k) == (3, 0, 1)
        assert symbol == symbols[0, 1] and delta == -1.2 and scale == pytest.approx(model.zoom(3))
