import math
from types import SimpleNamespace

import numpy as np
import pytest

from risbackscatter import SystemConfig
from risbackscatter.channel import (CompositeSignature, StChannel, TrChannel, TrTap,
                                    assemble_composite, beamformer_matrix, channel_csv,
                                    direct_path, draw_noise, draw_st_channel,
                                    draw_tr_channel, interference_vector,
                                    noise_variance_from_snr, stream, synthesize_frame,
                                    tap_samples)
from risbackscatter.codebook import MessageSubset, build_codebook, msequence_pulse
from risbackscatter.ris import (Direction, RisGeometry, SpaceTimeCode, matched_beamformers,
                                space_time_code, square_partition, steering_vector)


@pytest.fixture(scope="module")
def cfg():
    return SystemConfig()


# -- random streams -------------------------------------------------------
def test_streams_are_reproducible_and_distinct():
    a = stream(7, 3, "noise").standard_normal(4)
    np.testing.assert_array_equal(a, stream(7, 3, "noise").standard_normal(4))
    assert not np.array_equal(a, stream(7, 4, "noise").standard_normal(4))
    assert not np.array_equal(a, stream(7, 3, "tr").standard_normal(4))
    assert not np.array_equal(a, stream(8, 3, "noise").standard_normal(4))


# -- ST channel -----------------------------------------------------------
def test_st_channel(cfg):
    st1 = draw_st_channel(cfg, stream(1, 0, "st"))
    st2 = draw_st_channel(cfg, stream(1, 0, "st"))
    assert st1.phase == st2.phase and 0 <= st1.phase < 2 * math.pi
    np.testing.assert_allclose(np.abs(st1.vector), cfg.sigma_st, rtol=1e-12)
    expected = cfg.sigma_st * np.exp(1j * st1.phase) * steering_vector(cfg.geometry, Direction(-45, 0))
    np.testing.assert_array_equal(st1.vector, expected)


def test_st_phase_is_uniform(cfg):
    rng = np.random.default_rng(5)
    z = np.array([np.exp(1j * draw_st_channel(cfg, rng).phase) for _ in range(100_000)])
    # E e^{j phi} = 0 with per-component std 1/sqrt(2 n)
    assert abs(z.mean()) <= 3 * math.sqrt(1 / 100_000)


# -- TR channel -----------------------------------------------------------
def test_tr_specular_limit(cfg):
    c = cfg.replace(kappa_tr_db=120.0, q_tr=50)
    tr = draw_tr_channel(c, stream(2, 0, "tr"))
    np.testing.assert_allclose(np.abs(tr.amplitudes), c.sigma_tr, rtol=1e-5)


def test_tr_power_normalization(cfg):
    c = cfg.replace(q_tr=1000, sigma_tr=1.7)
    rng = np.random.default_rng(9)
    p = np.concatenate([np.abs(draw_tr_channel(c, rng).amplitudes) ** 2 for _ in range(1000)])
    assert p.size == 10 ** 6
    assert p.mean() == pytest.approx(1.7 ** 2, rel=0.01)


def test_tr_angles_and_delays_in_range(cfg):
    rng = np.random.default_rng(1)
    for _ in range(200):
        tr = draw_tr_channel(cfg, rng)
        assert len(tr.taps) == 3
        for t in tr.taps:
            assert 33 <= t.direction.azimuth <= 57
            assert -12 <= t.direction.elevation <= 12
            assert 0 <= t.delay <= 15 / 50e6


def test_samples_per_pri(cfg):
    assert cfg.samples_per_pri == 30
    assert cfg.processing_gain == 15 and cfg.pulse.n_chips == 15


# -- composite signature --------------------------------------------------
def test_single_broadside_tap_gives_padded_chips(cfg):
    st = StChannel(1.0, 0.0, Direction(-45, 0), steering_vector(cfg.geometry, Direction(-45, 0)))
    tr = TrChannel((TrTap(1 + 0j, Direction(0, 0), 0.0),), 10.0, 1.0)
    sig = assemble_composite(cfg.pulse, st, tr, cfg.geometry, cfg.partition, cfg.beamformers, 30)
    padded = np.concatenate([cfg.pulse.chips, np.zeros(15)])
    np.testing.assert_allclose(sig.a_str, np.outer(padded, st.vector), atol=1e-15)


def _oracle_a_str(chips, W, st_vec, amps, az, el, delays_fine, R, rows, cols, K):
    """Fine-grid convolution of the chip waveform with delta taps, sampled every R."""
    fine = np.repeat(chips, R)
    M = rows * cols
    out = np.zeros((K, M), dtype=complex)
    for m in range(M):
        r, c = divmod(m, cols)
        h = np.zeros(K * R, dtype=complex)
        for q in range(len(amps)):
            a, e = math.radians(az[q]), math.radians(el[q])
            psi = complex(math.cos(math.pi * (c * math.sin(a) * math.cos(e) + r * math.sin(e))),
                          math.sin(math.pi * (c * math.sin(a) * math.cos(e) + r * math.sin(e))))
            h[delays_fine[q]] += amps[q] * psi
        y = np.convolve(fine, h)[:K * R]
        out[:, m] = st_vec[m] * y[::R]
    return out


def test_composite_matches_time_domain_oracle():
    rng = np.random.default_rng(21)
    W, R, K = 1e6, 64, 6
    g = RisGeometry(2, 2)
    part = square_partition(g, 2)
    bf = matched_beamformers(part, g, Direction(-30, 10), Direction(20, -5))
    pulse = msequence_pulse(2, (2, 1), chip_rate=W)
    st_vec = 0.8 * np.exp(1.1j) * steering_vector(g, Direction(-30, 10))
    st = StChannel(0.8, 1.1, Direction(-30, 10), st_vec)
    amps = rng.standard_normal(2) + 1j * rng.standard_normal(2)
    az, el = rng.uniform(-60, 60, 2), rng.uniform(-30, 30, 2)
    dfine = rng.integers(0, 3 * R, 2)  # off the chip grid, on the oracle's fine grid
    tr = TrChannel(tuple(TrTap(complex(a), Direction(float(z), float(e)), float(d / (R * W)))
                         for a, z, e, d in zip(amps, az, el, dfine)), 10.0, 1.0)
    sig = assemble_composite(pulse, st, tr, g, part, bf, K)
    ref = _oracle_a_str(pulse.chips, W, st_vec, amps, az, el, dfine, R, 2, 2, K)
    assert np.max(np.abs(sig.a_str - ref)) <= 1e-12 * np.max(np.abs(ref))


def test_betas_consistent_with_a_str(cfg):
    st = draw_st_channel(cfg, stream(4, 0, "st"))
    tr = draw_tr_channel(cfg, stream(4, 0, "tr"))
    sig = assemble_composite(cfg.pulse, st, tr, cfg.geometry, cfg.partition, cfg.beamformers, 30)
    for n, (members, b) in enumerate(zip(cfg.partition.members, cfg.beamformers.vectors)):
        ref = sig.a_str[:, members] @ b
        assert np.max(np.abs(sig.betas[:, n] - ref)) <= 1e-12 * np.max(np.abs(ref))
    np.testing.assert_allclose(sig.beta_norms_sq, np.sum(np.abs(sig.betas) ** 2, axis=0))


def test_energy_consistency(cfg):
    st = draw_st_channel(cfg, stream(4, 1, "st"))
    tr = draw_tr_channel(cfg, stream(4, 1, "tr"))
    sig = assemble_composite(cfg.pulse, st, tr, cfg.geometry, cfg.partition, cfg.beamformers, 30)
    code = space_time_code(build_codebook(21), MessageSubset(tuple(range(3, 12))),
                           cfg.partition, cfg.beamformers)
    lhs = np.linalg.norm(code.matrix @ sig.a_str.conj().T) ** 2
    assert lhs == pytest.approx(21 * sig.beta_norms_sq.sum(), rel=1e-9)


def test_composite_dimension_checks(cfg):
    st = StChannel(1.0, 0.0, Direction(0, 0), np.ones(4))
    tr = draw_tr_channel(cfg, stream(4, 0, "tr"))
    with pytest.raises(ValueError):
        assemble_composite(cfg.pulse, st, tr, cfg.geometry, cfg.partition, cfg.beamformers, 30)
    st = draw_st_channel(cfg, stream(4, 0, "st"))
    with pytest.raises(ValueError):
        assemble_composite(cfg.pulse, st, tr, cfg.geometry, cfg.partition, cfg.beamformers, 30,
                           i_sr=np.zeros(29))


# -- direct path ----------------------------------------------------------
def test_direct_path(cfg):
    np.testing.assert_array_equal(direct_path(cfg.pulse, 0.0, 0.0, 30), np.zeros(30))
    np.testing.assert_allclose(direct_path(cfg.pulse, 1.0, 0.0, 30),
                               np.concatenate([cfg.pulse.chips, np.zeros(15)]))
    tau = 2.4 / 50e6  # 2.4 chips: sample k sees chip floor(k - 2.4)
    v = direct_path(cfg.pulse, 2j, tau, 30)
    for k in range(30):
        idx = math.floor(k - 2.4)
        assert v[k] == (2j * cfg.pulse.chips[idx] if 0 <= idx < 15 else 0)
    with pytest.raises(ValueError):
        direct_path(cfg.pulse, 1.0, 30 / 50e6, 30)
    with pytest.raises(ValueError):
        direct_path(cfg.pulse, 1.0, -1e-9, 30)


def test_interference_vector_from_config(cfg):
    c = cfg.replace(interference_amplitude=3.0, interference_delay_samples=4)
    v = interference_vector(c)
    np.testing.assert_allclose(v[4:19], 3.0 * c.pulse.chips)
    assert np.all(v[:4] == 0) and np.all(v[19:] == 0)


def test_tap_samples_handle_exact_chip_edges(cfg):
    s = tap_samples(cfg.pulse, [1 / 50e6], 3)[:, 0]
    np.testing.assert_array_equal(s, [0, cfg.pulse.chips[0], cfg.pulse.chips[1]])


# -- noise calibration and frames -----------------------------------------
def test_noise_variance_unit_case():
    ones = SimpleNamespace(pulse_power=1.0, processing_gain=1, sigma_tr=1.0,
                           codeword_length=1, n_subarrays=1)
    assert noise_variance_from_snr(1.0, ones, beampattern_at_target=1.0) == 1.0


def test_noise_variance_paper_config(cfg):
    assert noise_variance_from_snr(1.0, cfg) == pytest.approx(9375.0, rel=1e-12)
    assert noise_variance_from_snr(2.0, cfg) == pytest.approx(9375.0 / 2, rel=1e-12)
    # independent of L because B(theta_bar) grows with L
    assert noise_variance_from_snr(1.0, cfg.replace(codeword_length=31)) == pytest.approx(9375.0)
    with pytest.raises(ValueError):
        noise_variance_from_snr(0.0, cfg)


def _tiny_setup(L=3, K=2):
    g = RisGeometry(1, 1)
    part = square_partition(g, 1)
    bf = matched_beamformers(part, g, Direction(0, 0), Direction(0, 0))
    code = space_time_code(build_codebook(L), MessageSubset((1,)), part, bf)
    beta = np.array([[0.5 + 1j], [-2.0]])[:K]
    return code, CompositeSignature(beta, beta.copy(), np.zeros(K, dtype=complex))


def test_noiseless_rank_one_frame():
    code, sig = _tiny_setup()
    frame = synthesize_frame(code, sig, 0.0)
    np.testing.assert_allclose(frame.y, np.outer(build_codebook(3).codeword(1), sig.betas[:, 0].conj()))


def test_interference_adds_constant_row(cfg):
    st = draw_st_channel(cfg, stream(1, 0, "st"))
    tr = draw_tr_channel(cfg, stream(1, 0, "tr"))
    i_sr = 5.0 * np.exp(0.7j) * tap_samples(cfg.pulse, [0.0], 30)[:, 0]
    sig = assemble_composite(cfg.pulse, st, tr, cfg.geometry, cfg.partition, cfg.beamformers, 30, i_sr)
    code = space_time_code(build_codebook(21), MessageSubset(tuple(range(1, 10))),
                           cfg.partition, cfg.beamformers)
    y = synthesize_frame(code, sig, 0.0).y
    diff = y - code.matrix @ sig.a_str.conj().T
    np.testing.assert_allclose(diff, np.tile(i_sr.conj(), (21, 1)), atol=1e-12)


def test_noise_variance_of_frames():
    code, sig = _tiny_setup()
    s2 = 2.5
    ys = np.array([synthesize_frame(code, sig, s2, stream(3, t, "noise")).y for t in range(100_000)])
    var = np.mean(np.abs(ys - ys.mean(axis=0)) ** 2, axis=0)
    np.testing.assert_allclose(var, s2, rtol=0.02)
    # circular symmetry: real and imaginary halves share the power
    np.testing.assert_allclose(np.var(ys.real, axis=0), s2 / 2, rtol=0.02)


def test_frame_argument_checks():
    code, sig = _tiny_setup()
    with pytest.raises(ValueError):
        synthesize_frame(code, sig, -1.0)
    with pytest.raises(ValueError):
        synthesize_frame(code, sig, 1.0)  # no generator
    bad = SpaceTimeCode(np.ones((3, 2)), (1, 2))
    with pytest.raises(ValueError):
        synthesize_frame(bad, sig, 0.0)


def test_draw_noise_shape_and_scale():
    z = draw_noise(np.random.default_rng(0), (400, 500))
    assert z.shape == (400, 500)
    assert np.mean(np.abs(z) ** 2) == pytest.approx(1.0, rel=0.01)


def test_channel_csv(cfg):
    tr = draw_tr_channel(cfg, stream(1, 0, "tr"))
    lines = channel_csv(tr).splitlines()
    assert lines[0] == "tap,re,im,az_deg,el_deg,delay_s"
    assert len(lines) == 4
    fields = lines[1].split(",")
    assert complex(float(fields[1]), float(fields[2])) == tr.taps[0].amplitude
    assert float(fields[5]) == tr.taps[0].delay


def test_beamformer_matrix(cfg):
    B = beamformer_matrix(cfg.partition, cfg.beamformers)
    assert B.shape == (225, 9)
    assert np.count_nonzero(B) == 225
