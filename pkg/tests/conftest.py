"""Shared scene-construction helpers for the test suite."""

import numpy as np

import droneprint as dp

# Candidate sample rates for table-derived scenes, smallest first.  Wide
# emitters (32+ MHz hops) need the top entries.
FS_LADDER = (10e6, 16e6, 20e6, 25e6, 40e6, 56e6, 80e6, 100e6)

DETECTOR_LONG_WIN = 4096


def pick_fs(hop_bw_hz: float, n_slots: int, min_spacing_hz: float = 0.0):
    """Smallest ladder rate whose Nyquist interval fits the hop plan.

    Returns (fs, spacing).  min_spacing_hz widens the slot grid beyond the
    planner default when the caller needs better slot separability.  Rates
    below 2.5x the hop bandwidth are skipped: median-floor spectral
    measurements need noise bins to stay the majority of the interval.
    """
    for fs in FS_LADDER:
        if fs < 2.5 * hop_bw_hz:
            continue
        spacing = max(0.02 * hop_bw_hz, 8.0 * fs / 512.0, min_spacing_hz)
        try:
            dp.plan_hop_frequencies(n_slots, hop_bw_hz, fs, spacing)
        except ValueError:
            continue
        return fs, spacing
    raise ValueError(f"no ladder rate fits {n_slots} hops of {hop_bw_hz} Hz")


def build_row_scene(entry, seed: int, snr_db: float = 18.0,
                    periods: float = 4.3, aperiodic_bursts: int = 64) -> dict:
    """Synthesize a scene realizing one reference-table row.

    Periodic rows get round(fhspp/fhsdc) pattern slots with one distinct
    hop frequency per slot, so the realized pattern period is the nearest
    whole number of duty intervals.  Aperiodic rows hop randomly over 8
    frequencies.  The scene starts with a noise-only lead-in so the
    detector floor can settle.
    """
    duty = entry.fhsdc_ms * 1e-3
    dur = entry.fhsdt_ms * 1e-3
    bw = entry.fhsbw_mhz * 1e6
    if entry.fhspp_ms is not None:
        n_slots = max(1, round(entry.fhspp_ms / entry.fhsdc_ms))
        pp_real = n_slots * duty
        n_bursts = max(int(np.ceil(periods * n_slots)), 8)
    else:
        n_slots = 8
        pp_real = None
        n_bursts = aperiodic_bursts
    # A burst of band-shaped noise has realized spectral centroid scatter
    # of about sqrt(bw / (12 * duration)); slots closer than that cannot
    # be told apart by any per-burst statistic, so keep 8 sigma between.
    sigma_hz = float(np.sqrt(bw / (12.0 * dur)))
    fs, spacing = pick_fs(bw, n_slots, min_spacing_hz=8.0 * sigma_hz)
    offset = max(5 * DETECTOR_LONG_WIN / fs, 0.25 * duty)
    total = offset + n_bursts * duty + dur
    spec = dp.FhssSpec(
        hop_bw_hz=bw,
        hop_duration_s=dur,
        duty_interval_s=duty,
        hop_freqs_hz=dp.plan_hop_frequencies(n_slots, bw, fs, spacing),
        pattern_period_s=pp_real,
        start_offset_s=offset,
    )
    x, truth = dp.synth_fhss(spec, fs, total, seed=seed)
    noisy, truth = dp.add_noise_at_snr(x, truth, snr_db, seed=seed + 1)
    del x
    # class bands bracketing this row's hop duration
    rules = dp.ClassRules(fhss_max_s=1.5 * dur, video_max_s=3.0 * dur)
    return {
        "samples": noisy,
        "fs": fs,
        "truth": truth,
        "spec": spec,
        "rules": rules,
        "pp_real_s": pp_real,
    }


def detect_and_classify(scene: dict) -> list:
    segs = dp.detect_bursts(scene["samples"], scene["fs"], dp.DetectorConfig())
    return dp.classify_bursts(segs, scene["rules"])


def extract_row_fingerprint(scene: dict) -> dp.RfFingerprint:
    rec = dp.IqRecording(samples=scene["samples"], sample_rate_hz=scene["fs"])
    return dp.extract_fingerprint(rec, detect_and_classify(scene))
