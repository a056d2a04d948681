import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mimocs.model import (RadarConfig, Scene, Spacing, Stream, complex_normal, draw_noise,
                          draw_scene, gen_waveforms, rng_for, rx_manifold, sgn, sigma_from_snr,
                          tx_manifold)

dims = st.integers(1, 5)


def test_config_derived_quantities():
    cfg = RadarConfig(3, 4, 32, 20)
    assert cfg.n_beta == 12
    assert cfg.dbeta == pytest.approx(2 / 12)
    assert cfg.grid_shape == (20, 12)
    assert cfg.grid_size == 240
    assert cfg.n_meas == 128
    assert RadarConfig(2, 2, 8).n_delay == 8


def test_config_doppler_shape():
    cfg = RadarConfig(2, 2, 8, 8, n_doppler=8)
    assert cfg.grid_shape == (8, 8, 4)
    assert cfg.grid_size == 256


@pytest.mark.parametrize("kwargs, match", [
    ({"n_tx": 0, "n_rx": 2, "n_time": 8}, "n_tx"),
    ({"n_tx": 2, "n_rx": 2, "n_time": 8, "n_delay": 9}, "n_delay"),
    ({"n_tx": 2, "n_rx": 2, "n_time": 8, "n_doppler": 4}, "n_doppler"),
    ({"n_tx": 2, "n_rx": 2, "n_time": 8, "seed": -1}, "seed"),
    ({"n_tx": 2, "n_rx": 2, "n_time": 8, "spacing": "diagonal"}, "diagonal"),
])
def test_config_rejects_invalid(kwargs, match):
    with pytest.raises(ValueError, match=match):
        RadarConfig(**kwargs)


@pytest.mark.parametrize("mode, d_t, d_r", [("tx_half", 0.5, 3 / 2), ("rx_half", 4 / 2, 0.5)])
def test_spacing_modes(mode, d_t, d_r):
    cfg = RadarConfig(3, 4, 8, spacing=mode)
    assert cfg.spacing is Spacing(mode)
    assert (cfg.d_tx, cfg.d_rx) == (d_t, d_r)


def test_beta_grid_covers_unit_interval():
    cfg = RadarConfig(4, 2, 8)
    b = cfg.beta_grid()
    assert len(b) == 8
    assert b[0] == -1.0 and b.max() < 1.0
    assert np.allclose(np.diff(b), cfg.dbeta)
    assert 0.0 in b


def test_manifolds_at_broadside_are_ones():
    cfg = RadarConfig(3, 5, 8)
    assert np.array_equal(tx_manifold(cfg, 0.0), np.ones(3))
    assert np.array_equal(rx_manifold(cfg, 0.0), np.ones(5))


def test_tx_manifold_endfire():
    cfg = RadarConfig(2, 2, 8)  # d_T = 1/2
    assert np.allclose(tx_manifold(cfg, 1.0), [1, -1])


@given(beta=st.floats(-1, 1), n_tx=dims, n_rx=dims)
def test_manifolds_unit_modulus(beta, n_tx, n_rx):
    cfg = RadarConfig(n_tx, n_rx, 4)
    assert np.allclose(np.abs(tx_manifold(cfg, beta)), 1)
    assert np.allclose(np.abs(rx_manifold(cfg, beta)), 1)


def test_manifold_vectorized_shape():
    cfg = RadarConfig(3, 2, 8)
    assert tx_manifold(cfg, np.zeros(5)).shape == (5, 3)


def test_rx_orthogonality_small_example():
    cfg = RadarConfig(2, 2, 8)  # d_R = 1, dbeta = 1/2
    b = lambda n: n * cfg.dbeta
    assert abs(np.vdot(rx_manifold(cfg, b(1)), rx_manifold(cfg, b(0)))) < 1e-12
    assert np.vdot(rx_manifold(cfg, b(2)), rx_manifold(cfg, b(0))) == pytest.approx(2)


@given(n_tx=dims, n_rx=dims)
def test_rx_orthogonality_on_grid(n_tx, n_rx):
    cfg = RadarConfig(n_tx, n_rx, 4)
    a = rx_manifold(cfg, cfg.beta_grid())
    gram = a.conj() @ a.T
    n = np.arange(cfg.n_beta)
    diff = (n[:, None] - n[None, :]) % cfg.n_beta
    expected = np.where(diff % n_rx == 0, n_rx, 0)
    assert np.allclose(gram, expected, atol=1e-10)


@given(n_tx=st.integers(2, 5), n_rx=dims)
def test_tx_orthogonality_on_grid(n_tx, n_rx):
    cfg = RadarConfig(n_tx, n_rx, 4)
    betas = cfg.beta_grid()
    a = tx_manifold(cfg, betas)
    for k in range(1, n_tx):
        for n in range(cfg.n_beta - k * n_rx):
            assert abs(np.vdot(a[n + k * n_rx], a[n])) < 1e-10


def test_rng_streams_independent_and_reproducible():
    a = rng_for(7, Stream.NOISE, 3).standard_normal(4)
    assert np.array_equal(a, rng_for(7, Stream.NOISE, 3).standard_normal(4))
    assert not np.array_equal(a, rng_for(7, Stream.NOISE, 4).standard_normal(4))
    assert not np.array_equal(a, rng_for(7, Stream.SCENE, 3).standard_normal(4))
    assert not np.array_equal(a, rng_for(8, Stream.NOISE, 3).standard_normal(4))


def test_complex_normal_convention():
    z = complex_normal(rng_for(0, Stream.NOISE), 200000, var=4.0)
    assert np.mean(np.abs(z) ** 2) == pytest.approx(4.0, rel=0.02)
    assert np.var(z.real) == pytest.approx(2.0, rel=0.02)
    assert np.var(z.imag) == pytest.approx(2.0, rel=0.02)


def test_waveforms_deterministic_and_readonly():
    cfg = RadarConfig(3, 2, 16, seed=5)
    a, b = gen_waveforms(cfg), gen_waveforms(cfg)
    assert a.samples.shape == (16, 3)
    assert np.array_equal(a.samples, b.samples)
    assert not np.array_equal(a.samples, gen_waveforms(cfg.with_seed(6)).samples)
    with pytest.raises(ValueError):
        a.samples[0, 0] = 0


def test_waveform_variance():
    s = gen_waveforms(RadarConfig(1, 1, 100000)).samples
    assert np.mean(np.abs(s) ** 2) == pytest.approx(1.0, rel=0.03)


def test_waveform_column_energy():
    w = gen_waveforms(RadarConfig(4, 1, 10000, seed=1))
    assert np.all((w.energies > 2300) & (w.energies < 2700))


def test_scene_empty():
    cfg = RadarConfig(2, 2, 8)
    s = draw_scene(cfg, 0)
    assert s.k == 0
    assert np.array_equal(s.dense(), np.zeros(cfg.grid_size))


@given(k=st.integers(0, 32), amp=st.floats(0.1, 10), seed=st.integers(0, 2**32))
@settings(max_examples=50)
def test_scene_properties(k, amp, seed):
    cfg = RadarConfig(2, 2, 8)
    s = draw_scene(cfg, k, amp, seed)
    assert s.k == k
    assert np.all(np.diff(s.support) > 0)
    assert np.all(s.support < cfg.grid_size)
    assert np.allclose(np.abs(s.amplitudes), amp)
    x = s.dense()
    assert np.count_nonzero(x) == k
    sg = sgn(x)
    assert np.allclose(np.abs(sg[s.support]), 1)
    assert np.count_nonzero(sg) == k


def test_scene_rejects_too_many():
    with pytest.raises(ValueError):
        draw_scene(RadarConfig(2, 2, 8), 33)


def test_scene_validation():
    with pytest.raises(ValueError):
        Scene(np.array([1, 1]), np.ones(2), 4)
    with pytest.raises(ValueError):
        Scene(np.array([4]), np.ones(1), 4)


def test_scene_uniformity():
    cfg = RadarConfig(2, 2, 16)  # 64 cells
    hits = np.bincount([draw_scene(cfg, 1, seed=3, index=i).support[0] for i in range(10000)],
                       minlength=64)
    assert np.all(np.abs(hits / 10000 - 1 / 64) <= 0.01)


def test_sigma_from_snr():
    cfg = RadarConfig(8, 8, 64)
    assert sigma_from_snr(cfg, 15.0) == pytest.approx(4.0238, abs=1e-4)
    assert sigma_from_snr(cfg, 10 * math.log10(512)) == pytest.approx(1.0)
    assert sigma_from_snr(cfg, 15.0, 2.0) == pytest.approx(2 * sigma_from_snr(cfg, 15.0))
    with pytest.raises(ValueError):
        sigma_from_snr(cfg, 10, 0.0)


def test_draw_noise_variance_and_determinism():
    cfg = RadarConfig(4, 4, 4096)
    v = draw_noise(cfg, 3.0, seed=1)
    assert np.array_equal(v, draw_noise(cfg, 3.0, seed=1))
    assert np.mean(np.abs(v) ** 2) == pytest.approx(9.0, rel=0.05)


def test_unravel():
    cfg = RadarConfig(2, 2, 8, 8, n_doppler=8)
    tau, f, b = cfg.unravel(3 * 32 + 2 * 4 + 1)
    assert (tau, f, b) == (3, 2, 1)
