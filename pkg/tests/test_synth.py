"""Scene synthesis: spec validation, determinism, truth accuracy, power
calibration, hop patterns, noise injection."""

import numpy as np
import pytest

from droneprint import (
    CannotRaiseSnrError,
    FhssSpec,
    SceneTruth,
    VideoSpec,
    add_noise_at_snr,
    combine_scenes,
    plan_hop_frequencies,
    synth_fhss,
    synth_video,
    truth_from_dict,
    truth_to_dict,
)

FS = 1e6


def fhss_spec(**overrides):
    kw = dict(
        hop_bw_hz=100e3,
        hop_duration_s=0.5e-3,
        duty_interval_s=2e-3,
        hop_freqs_hz=(-200e3, 0.0, 200e3),
        pattern_period_s=6e-3,
        start_offset_s=1e-3,
    )
    kw.update(overrides)
    return FhssSpec(**kw)


def video_spec(**overrides):
    kw = dict(
        bw_hz=200e3,
        center_freq_hz=100e3,
        duration_set_s=(1e-3, 2e-3),
        inter_burst_s=3e-3,
    )
    kw.update(overrides)
    return VideoSpec(**kw)


def burst_centroid_hz(x, seg, fs):
    """Power-weighted spectral centroid of one burst."""
    spec = np.fft.fft(x[seg.start_idx : seg.end_idx])
    freqs = np.fft.fftfreq(seg.n_samples, d=1.0 / fs)
    p = np.abs(spec) ** 2
    return float(np.sum(freqs * p) / np.sum(p))


# ------------------------------------------------------------ spec checks


def test_fhss_spec_validation():
    with pytest.raises(ValueError):
        fhss_spec(hop_bw_hz=0.0)
    with pytest.raises(ValueError):
        fhss_spec(hop_freqs_hz=())
    with pytest.raises(ValueError):
        fhss_spec(pattern_period_s=1e-3)  # below one duty interval
    with pytest.raises(ValueError):
        fhss_spec(start_offset_s=-1e-3)
    with pytest.raises(ValueError):
        fhss_spec(amplitude=-1.0)


def test_fhss_spec_rejects_duration_beyond_duty_interval():
    # a hop lasting longer than the interval between hop starts would
    # overlap itself; the flagged reference row is unrealizable
    with pytest.raises(ValueError):
        fhss_spec(hop_duration_s=3.13e-3, duty_interval_s=1.86e-3)


def test_video_spec_validation():
    with pytest.raises(ValueError):
        video_spec(duration_set_s=())
    with pytest.raises(ValueError):
        video_spec(duration_set_s=(1e-3,), jitter_s=1e-3)
    with pytest.raises(ValueError):
        video_spec(inter_burst_s=0.0)
    with pytest.raises(ValueError):
        video_spec(jitter_s=-1e-6)
    with pytest.raises(ValueError):
        video_spec(start_offset_s=-1.0)


# ------------------------------------------------------------------- fhss


def test_synth_fhss_deterministic():
    spec = fhss_spec()
    x1, t1 = synth_fhss(spec, FS, 20e-3, seed=5)
    x2, t2 = synth_fhss(spec, FS, 20e-3, seed=5)
    assert np.array_equal(x1, x2)
    assert truth_to_dict(t1) == truth_to_dict(t2)
    x3, _ = synth_fhss(spec, FS, 20e-3, seed=6)
    assert not np.array_equal(x1, x3)


def test_synth_fhss_burst_grid():
    # offset 1000, duty 2000, dur 500, total 20000 -> starts k=0..9
    x, truth = synth_fhss(fhss_spec(), FS, 20e-3, seed=0)
    assert len(truth.segments) == 10
    assert x.dtype == np.complex64
    for k, seg in enumerate(truth.segments):
        assert seg.start_idx == 1000 + 2000 * k
        assert seg.n_samples == 500
        assert seg.class_label == "fhss"
        assert seg.duration_s == pytest.approx(0.5e-3)


def test_synth_fhss_silent_outside_segments():
    x, truth = synth_fhss(fhss_spec(), FS, 20e-3, seed=1)
    mask = np.zeros(len(x), dtype=bool)
    for seg in truth.segments:
        mask[seg.start_idx : seg.end_idx] = True
    assert np.all(x[~mask] == 0)
    assert np.all(np.abs(x[mask]) > 0)


def test_synth_fhss_per_burst_power_calibration():
    amp = 2.0
    x, truth = synth_fhss(fhss_spec(amplitude=amp), FS, 20e-3, seed=2)
    for seg in truth.segments:
        p = np.mean(np.abs(x[seg.start_idx : seg.end_idx]) ** 2)
        assert p == pytest.approx(amp**2, rel=1e-5)


def test_synth_fhss_zero_amplitude():
    x, truth = synth_fhss(fhss_spec(amplitude=0.0), FS, 20e-3, seed=3)
    assert np.all(x == 0)
    assert len(truth.segments) == 10


def test_synth_fhss_periodic_pattern_cycles():
    # pattern period 6 ms over 2 ms duty -> 3 slots, one per hop frequency
    x, truth = synth_fhss(fhss_spec(), FS, 26e-3, seed=4)
    centers = [burst_centroid_hz(x, s, FS) for s in truth.segments]
    expected = (-200e3, 0.0, 200e3)
    for k, c in enumerate(centers):
        assert c == pytest.approx(expected[k % 3], abs=25e3)


def test_synth_fhss_pattern_longer_than_frequency_list():
    # 5 slots from 3 frequencies: slot sequence f0 f1 f2 f0 f1, then repeat
    spec = fhss_spec(pattern_period_s=10e-3)
    x, truth = synth_fhss(spec, FS, 42e-3, seed=7)
    centers = [burst_centroid_hz(x, s, FS) for s in truth.segments]
    seq = (-200e3, 0.0, 200e3, -200e3, 0.0)
    for k, c in enumerate(centers):
        assert c == pytest.approx(seq[k % 5], abs=25e3)


def test_synth_fhss_aperiodic_uses_all_frequencies():
    spec = fhss_spec(pattern_period_s=None)
    x, truth = synth_fhss(spec, FS, 80e-3, seed=8)
    centers = np.array([burst_centroid_hz(x, s, FS) for s in truth.segments])
    snapped = {min((-200e3, 0.0, 200e3), key=lambda f: abs(f - c)) for c in centers}
    assert snapped == {-200e3, 0.0, 200e3}


def test_synth_fhss_nyquist_and_length_checks():
    with pytest.raises(ValueError):
        synth_fhss(fhss_spec(hop_freqs_hz=(480e3,)), FS, 20e-3)  # band clips
    with pytest.raises(ValueError):
        synth_fhss(fhss_spec(), FS, 7e-3)  # room for only 3 bursts


# ------------------------------------------------------------------ video


def test_synth_video_deterministic_and_draws_from_set():
    spec = video_spec()
    x1, t1 = synth_video(spec, FS, 60e-3, seed=9)
    x2, t2 = synth_video(spec, FS, 60e-3, seed=9)
    assert np.array_equal(x1, x2)
    assert truth_to_dict(t1) == truth_to_dict(t2)
    durations = {s.n_samples for s in t1.segments}
    assert durations <= {1000, 2000}
    assert len(durations) == 2  # both set members appear over 12+ draws
    assert all(s.class_label == "video" for s in t1.segments)


def test_synth_video_spacing_and_default_offset():
    _, truth = synth_video(video_spec(), FS, 60e-3, seed=10)
    assert truth.segments[0].start_idx == 3000  # one inter-burst gap
    for a, b in zip(truth.segments, truth.segments[1:]):
        assert b.start_idx == a.end_idx + 3000


def test_synth_video_explicit_start_offset():
    _, truth = synth_video(video_spec(start_offset_s=0.5e-3), FS, 60e-3, seed=11)
    assert truth.segments[0].start_idx == 500


def test_synth_video_jitter_bounds():
    spec = video_spec(duration_set_s=(2e-3,), jitter_s=0.4e-3)
    _, truth = synth_video(spec, FS, 100e-3, seed=12)
    ns = np.array([s.n_samples for s in truth.segments])
    assert np.all(ns >= 1600) and np.all(ns <= 2400)
    assert ns.std() > 0  # jitter actually applied


def test_synth_video_power_calibration():
    x, truth = synth_video(video_spec(amplitude=0.5), FS, 60e-3, seed=13)
    for seg in truth.segments:
        p = np.mean(np.abs(x[seg.start_idx : seg.end_idx]) ** 2)
        assert p == pytest.approx(0.25, rel=1e-5)


def test_synth_video_band_check():
    with pytest.raises(ValueError):
        synth_video(video_spec(center_freq_hz=450e3), FS, 60e-3)


# ---------------------------------------------------------------- combine


def test_combine_scenes_merges_sorted():
    xf, tf = synth_fhss(fhss_spec(), FS, 20e-3, seed=14)
    xv, tv = synth_video(video_spec(center_freq_hz=-300e3), FS, 20e-3, seed=15)
    x, truth = combine_scenes([(xf, tf), (xv, tv)])
    assert np.allclose(x, xf + xv)
    assert len(truth.segments) == len(tf.segments) + len(tv.segments)
    starts = [s.start_idx for s in truth.segments]
    assert starts == sorted(starts)


def test_combine_scenes_validation():
    xf, tf = synth_fhss(fhss_spec(), FS, 20e-3, seed=16)
    with pytest.raises(ValueError):
        combine_scenes([])
    with pytest.raises(ValueError):
        combine_scenes([(xf, tf), (xf[:100], tf)])
    noisy, nt = add_noise_at_snr(xf, tf, 20.0, seed=17)
    with pytest.raises(ValueError):
        combine_scenes([(noisy, nt)])


# ------------------------------------------------------------------ noise


def test_add_noise_at_snr_calibration():
    x, truth = synth_fhss(fhss_spec(), FS, 40e-3, seed=18)
    target = 12.0
    noisy, nt = add_noise_at_snr(x, truth, target, seed=19)
    # amplitude 1 -> P_S = 1, so the added variance is 10^(-target/10)
    var_expected = 10.0 ** (-target / 10.0)
    assert nt.noise_variance == pytest.approx(var_expected, rel=1e-6)
    assert nt.injected_snr_db == target
    mask = np.zeros(len(x), dtype=bool)
    for seg in truth.segments:
        mask[seg.start_idx : seg.end_idx] = True
    realized = np.mean(np.abs(noisy[~mask]) ** 2)
    assert realized == pytest.approx(var_expected, rel=0.02)


def test_add_noise_twice_cannot_raise_snr():
    x, truth = synth_fhss(fhss_spec(), FS, 40e-3, seed=20)
    noisy, nt = add_noise_at_snr(x, truth, 15.0, seed=21)
    with pytest.raises(CannotRaiseSnrError):
        add_noise_at_snr(noisy, nt, 18.0)
    # lowering further is fine and accumulates variance; the second pass
    # re-measures in-segment power, so the match is to sampling accuracy
    noisier, nt2 = add_noise_at_snr(noisy, nt, 8.0, seed=22)
    assert nt2.noise_variance == pytest.approx(10.0 ** (-0.8), rel=5e-3)
    assert len(noisier) == len(x)


def test_add_noise_requires_signal():
    with pytest.raises(ValueError):
        add_noise_at_snr(np.zeros(100, dtype=np.complex64), SceneTruth(), 10.0)


def test_add_noise_deterministic():
    x, truth = synth_fhss(fhss_spec(), FS, 20e-3, seed=23)
    a, _ = add_noise_at_snr(x, truth, 10.0, seed=24)
    b, _ = add_noise_at_snr(x, truth, 10.0, seed=24)
    assert np.array_equal(a, b)


# ------------------------------------------------------------ hop planning


def test_plan_hop_frequencies_grid():
    centers = plan_hop_frequencies(5, 1e6, 20e6, spacing_hz=2e6)
    assert centers == (-4e6, -2e6, 0.0, 2e6, 4e6)
    assert sum(centers) == pytest.approx(0.0, abs=1e-9)
    assert plan_hop_frequencies(1, 1e6, 10e6) == (0.0,)


def test_plan_hop_frequencies_default_spacing_scales():
    centers = plan_hop_frequencies(4, 10e6, 80e6)
    diffs = np.diff(centers)
    assert np.allclose(diffs, diffs[0])
    assert diffs[0] >= 0.02 * 10e6


def test_plan_hop_frequencies_validation():
    with pytest.raises(ValueError):
        plan_hop_frequencies(0, 1e6, 20e6)
    with pytest.raises(ValueError):
        plan_hop_frequencies(64, 5e6, 20e6)  # cannot fit inside Nyquist


# ------------------------------------------------------------------ truth


def test_truth_dict_roundtrip():
    _, truth = synth_video(video_spec(), FS, 30e-3, seed=25)
    truth.injected_snr_db = 17.5
    truth.noise_variance = 0.02
    back = truth_from_dict(truth_to_dict(truth))
    assert truth_to_dict(back) == truth_to_dict(truth)
    assert back.segments[0].class_label == "video"


def test_truth_from_dict_defaults():
    t = truth_from_dict({"segments": []})
    assert t.injected_snr_db is None
    assert t.noise_variance == 0.0
    assert t.seed == 0
