"""Burst detection, duration classification, SNR estimation and adjustment.

The detector is a dual sliding-window energy detector: a short window
tracks instantaneous power while a long window tracks the noise floor.
The noise estimate freezes while a burst is open so long transmissions
cannot pull the floor up under themselves.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .dsp import PsdEstimate, add_complex_awgn
from .errors import (
    CannotRaiseSnrError,
    InsufficientDataError,
    InsufficientNoiseError,
    InvalidSampleError,
)
from .iq_io import IqRecording

CLASS_LABELS = ("fhss", "video", "drone_id", "unknown")

_REFINE_SUB_WIN = 8  # samples in the edge-refinement running mean


@dataclass(frozen=True)
class DetectorConfig:
    """Dual sliding-window detector parameters (units: samples)."""

    short_win: int = 64
    long_win: int = 4096
    threshold_ratio: float = 4.0
    min_gap: int = 256
    min_duration: int = 128

    def __post_init__(self) -> None:
        if self.short_win < 1 or self.long_win < 1:
            raise ValueError("window lengths must be >= 1")
        if self.short_win >= self.long_win:
            raise ValueError(
                f"short_win {self.short_win} must be below long_win {self.long_win}"
            )
        if not self.threshold_ratio > 1.0:
            raise ValueError(f"threshold_ratio must be > 1, got {self.threshold_ratio}")
        if self.min_gap < 0 or self.min_duration < 0:
            raise ValueError("min_gap and min_duration must be >= 0")


@dataclass
class BurstSegment:
    """Half-open sample interval [start_idx, end_idx) with a class label."""

    start_idx: int
    end_idx: int
    duration_s: float
    class_label: str = "unknown"

    def __post_init__(self) -> None:
        if not 0 <= self.start_idx < self.end_idx:
            raise ValueError(
                f"need 0 <= start_idx < end_idx, got [{self.start_idx}, {self.end_idx})"
            )
        if self.class_label not in CLASS_LABELS:
            raise ValueError(f"unknown class label {self.class_label!r}")

    @property
    def n_samples(self) -> int:
        return self.end_idx - self.start_idx


@dataclass(frozen=True)
class ClassRules:
    """Duration bands for burst classification, in seconds.

    A duration strictly inside (0, fhss_max_s) is fhss; strictly inside
    (fhss_max_s, video_max_s) is video; anything else, including exact
    boundary hits, is unknown.  An optional drone_id band takes precedence
    when configured.
    """

    fhss_max_s: float = 1.5e-3
    video_max_s: float = 12e-3
    drone_id_min_s: Optional[float] = None
    drone_id_max_s: Optional[float] = None

    def __post_init__(self) -> None:
        if not 0 < self.fhss_max_s < self.video_max_s:
            raise ValueError("need 0 < fhss_max_s < video_max_s")
        if (self.drone_id_min_s is None) != (self.drone_id_max_s is None):
            raise ValueError("drone_id band needs both min and max")
        if self.drone_id_min_s is not None and not (
            0 < self.drone_id_min_s < self.drone_id_max_s
        ):
            raise ValueError("need 0 < drone_id_min_s < drone_id_max_s")


@dataclass
class SnrEstimate:
    """SNR measurement; snr_db is NaN when valid is False."""

    snr_db: float
    p_signal_plus_noise: float
    p_noise: float
    valid: bool


def _sample_power(x: np.ndarray, lo: int, hi: int) -> np.ndarray:
    """Per-sample |x|^2 over [lo, hi) as float64, without touching the rest."""
    mag = np.abs(x[lo:hi]).astype(np.float64)
    return mag * mag


def _running_mean(p: np.ndarray, k: int) -> np.ndarray:
    """Mean of each k-sample window; output index i covers p[i : i + k]."""
    kernel = np.full(k, 1.0 / k)
    return np.convolve(p, kernel, mode="valid")


def _refine_start(x: np.ndarray, coarse: int, gate: float, short_win: int) -> int:
    lo = max(0, coarse - 2 * short_win)
    hi = min(len(x), coarse + 2 * short_win)
    if hi - lo < _REFINE_SUB_WIN:
        return coarse
    means = _running_mean(_sample_power(x, lo, hi), _REFINE_SUB_WIN)
    above = np.flatnonzero(means >= gate)
    if above.size == 0:
        return coarse
    return lo + int(above[0])


def _refine_end(x: np.ndarray, coarse: int, gate: float, short_win: int) -> int:
    lo = max(0, coarse - 2 * short_win)
    hi = min(len(x), coarse + 2 * short_win)
    if hi - lo < _REFINE_SUB_WIN:
        return coarse
    means = _running_mean(_sample_power(x, lo, hi), _REFINE_SUB_WIN)
    above = np.flatnonzero(means >= gate)
    if above.size == 0:
        return coarse
    return lo + int(above[-1]) + _REFINE_SUB_WIN


def detect_bursts(
    signal, sample_rate_hz: float, cfg: Optional[DetectorConfig] = None
) -> List[BurstSegment]:
    """Detect energy bursts against the tracked noise floor.

    The signal is scanned in short_win-sample blocks.  A burst opens when
    block power crosses threshold_ratio times the noise estimate upward
    and closes on the downward crossing; edges are then refined to sample
    resolution inside the opening/closing blocks.  Bursts separated by
    less than min_gap samples merge; bursts shorter than min_duration
    samples are dropped.

    Returns segments sorted by start index, pairwise disjoint.
    """
    if cfg is None:
        cfg = DetectorConfig()
    x = np.asarray(signal)
    if x.ndim != 1:
        raise ValueError("signal must be 1-D")
    if len(x) <= cfg.long_win:
        raise InsufficientDataError(
            f"signal length {len(x)} must exceed long_win {cfg.long_win}"
        )
    if not np.isfinite(x).all():
        raise InvalidSampleError("signal contains NaN or Inf samples")

    short = cfg.short_win
    n_blocks = len(x) // short
    mag = np.abs(x[: n_blocks * short]).reshape(n_blocks, short)
    block_power = np.square(mag).mean(axis=1, dtype=np.float64)
    del mag

    # Initial floor: a low percentile of block powers stays on the noise
    # side even when bursts dominate the timeline (high-duty emitters);
    # the running ring estimate replaces it within one long window.
    noise_est = float(np.percentile(block_power, 10.0))
    if noise_est <= 0.0:
        nonzero = block_power[block_power > 0]
        if nonzero.size == 0:
            return []
        noise_est = float(nonzero.min())

    blocks_long = max(1, cfg.long_win // short)
    ring = np.full(blocks_long, noise_est)
    ring_sum = noise_est * blocks_long
    ring_idx = 0

    events: List[Tuple[int, int, float]] = []  # (open block, close block, floor)
    open_block = -1
    open_floor = noise_est
    for b in range(n_blocks):
        bp = block_power[b]
        if open_block < 0:
            if bp >= cfg.threshold_ratio * noise_est:
                open_block = b
                open_floor = noise_est
            else:
                ring_sum += bp - ring[ring_idx]
                ring[ring_idx] = bp
                ring_idx = (ring_idx + 1) % blocks_long
                noise_est = ring_sum / blocks_long
        else:
            if bp < cfg.threshold_ratio * noise_est:
                events.append((open_block, b, open_floor))
                open_block = -1
                ring_sum += bp - ring[ring_idx]
                ring[ring_idx] = bp
                ring_idx = (ring_idx + 1) % blocks_long
                noise_est = ring_sum / blocks_long
    if open_block >= 0:
        events.append((open_block, n_blocks, open_floor))

    # Sample-resolution edges.  The gate reuses the detection ratio against
    # the floor captured when the burst opened.
    spans: List[Tuple[int, int]] = []
    for b0, b1, floor in events:
        gate = cfg.threshold_ratio * floor
        start = _refine_start(x, b0 * short, gate, short)
        end_coarse = len(x) if b1 >= n_blocks else b1 * short
        end = _refine_end(x, end_coarse, gate, short) if b1 < n_blocks else end_coarse
        if end <= start:
            start, end = b0 * short, end_coarse
        spans.append((start, end))

    merged: List[List[int]] = []
    for start, end in spans:
        if merged and start - merged[-1][1] < cfg.min_gap:
            merged[-1][1] = max(merged[-1][1], end)
        else:
            merged.append([start, end])

    out = []
    for start, end in merged:
        if end - start >= cfg.min_duration:
            out.append(
                BurstSegment(start, end, (end - start) / sample_rate_hz, "unknown")
            )
    return out


def classify_bursts(
    segments: Sequence[BurstSegment], rules: Optional[ClassRules] = None
) -> List[BurstSegment]:
    """Label segments by duration band; returns new segments sorted by start."""
    if rules is None:
        rules = ClassRules()
    out = []
    for seg in sorted(segments, key=lambda s: s.start_idx):
        d = seg.duration_s
        if (
            rules.drone_id_min_s is not None
            and rules.drone_id_min_s < d < rules.drone_id_max_s
        ):
            label = "drone_id"
        elif 0.0 < d < rules.fhss_max_s:
            label = "fhss"
        elif rules.fhss_max_s < d < rules.video_max_s:
            label = "video"
        else:
            label = "unknown"
        out.append(dataclasses.replace(seg, class_label=label))
    return out


def estimate_center_frequency(psd: PsdEstimate, search_bw_hz: float) -> float:
    """Center frequency of the search window maximizing in-window power.

    Slides a search_bw_hz-wide window across the PSD, integrates power,
    and returns the center frequency of the best position.  Near-exact
    ties resolve to the middle tied position, so symmetric spectra land on
    their axis of symmetry.
    """
    power = np.asarray(psd.power, dtype=np.float64)
    freqs = np.asarray(psd.freqs_hz, dtype=np.float64)
    if power.size < 1:
        raise InsufficientDataError("empty PSD")
    bin_w = psd.bin_width_hz
    span = freqs[-1] - freqs[0] + bin_w
    if not 0 < search_bw_hz <= span:
        raise ValueError(
            f"search_bw_hz must be in (0, {span}], got {search_bw_hz}"
        )
    w = max(1, int(round(search_bw_hz / bin_w)))
    w = min(w, power.size)
    sums = np.convolve(power, np.ones(w), mode="valid")
    peak = sums.max()
    ties = np.flatnonzero(sums >= peak - 1e-12 * max(abs(peak), 1.0))
    i = int(ties[ties.size // 2])
    return float(freqs[i : i + w].mean())


def estimate_snr(
    signal, seg: BurstSegment, noise_power: Optional[float] = None
) -> SnrEstimate:
    """SNR of one burst from in-segment vs out-of-segment mean power.

    P_(S+N) is the mean |x|^2 over [start_idx, end_idx); P_N is the mean
    |x|^2 over the complement of the segment, or the supplied noise_power
    override for recordings holding several bursts (where the complement
    of one segment is not noise-only).

    Returns a flagged-invalid estimate (snr_db = NaN) when the in-segment
    power does not exceed the noise power.
    """
    x = np.asarray(signal)
    n = len(x)
    if not 0 <= seg.start_idx < seg.end_idx <= n:
        raise ValueError(
            f"segment [{seg.start_idx}, {seg.end_idx}) outside signal of length {n}"
        )
    p_sn = float(_sample_power(x, seg.start_idx, seg.end_idx).mean())
    if noise_power is None:
        n_noise = seg.start_idx + (n - seg.end_idx)
        if n_noise == 0:
            raise InsufficientNoiseError(
                "segment covers the whole signal; no noise-only region"
            )
        p_n = float(
            (
                _sample_power(x, 0, seg.start_idx).sum()
                + _sample_power(x, seg.end_idx, n).sum()
            )
            / n_noise
        )
    else:
        p_n = float(noise_power)
    if p_n <= 0.0 or p_sn <= p_n:
        return SnrEstimate(math.nan, p_sn, p_n, valid=False)
    return SnrEstimate(
        10.0 * math.log10((p_sn - p_n) / p_n), p_sn, p_n, valid=True
    )


def adjust_snr_awgn(
    rec: IqRecording,
    measured_snr_db: float,
    target_snr_db: float,
    seg: BurstSegment,
    seed: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
) -> IqRecording:
    """Lower a recording's SNR to target_snr_db by adding complex AWGN.

    The added variance solves the power model: with P_S the signal-only
    power implied by measured_snr_db and the in-segment power, the target
    satisfies target = 10*log10(P_S / (P_N + var_add)).  Noise is
    circularly symmetric complex Gaussian, seeded for reproducibility.

    Raises CannotRaiseSnrError when target_snr_db > measured_snr_db.
    A target equal to the measured SNR returns an unmodified copy.
    """
    if target_snr_db > measured_snr_db:
        raise CannotRaiseSnrError(
            f"target {target_snr_db} dB above measured {measured_snr_db} dB"
        )
    x = rec.samples
    if not 0 <= seg.start_idx < seg.end_idx <= len(x):
        raise ValueError("segment outside recording")
    p_sn = float(_sample_power(x, seg.start_idx, seg.end_idx).mean())
    if p_sn <= 0.0:
        raise ValueError("segment has zero power; nothing to scale against")
    rho_m = 10.0 ** (measured_snr_db / 10.0)
    p_n = p_sn / (1.0 + rho_m)
    p_s = p_sn - p_n
    rho_t = 10.0 ** (target_snr_db / 10.0)
    var_add = p_s / rho_t - p_n
    if var_add <= 0.0:
        return IqRecording(
            samples=x.copy(),
            sample_rate_hz=rec.sample_rate_hz,
            center_freq_hz=rec.center_freq_hz,
            metadata=rec.metadata,
        )
    if rng is None:
        rng = np.random.default_rng(seed)
    return IqRecording(
        samples=add_complex_awgn(x, var_add, rng),
        sample_rate_hz=rec.sample_rate_hz,
        center_freq_hz=rec.center_freq_hz,
        metadata=rec.metadata,
    )


def snr_sweep(
    rec: IqRecording,
    seg: BurstSegment,
    lo_db: float,
    hi_db: float,
    step_db: float,
    measured_snr_db: Optional[float] = None,
    seed: Optional[int] = None,
) -> List[Tuple[float, IqRecording]]:
    """Produce one SNR-adjusted copy of rec per target in lo:hi:step.

    Targets are lo_db + k*step_db for every k with the value <= hi_db, each
    adjusted independently from the original recording with its own
    deterministic substream of the given seed.
    """
    if not step_db > 0:
        raise ValueError(f"step_db must be > 0, got {step_db}")
    if hi_db < lo_db:
        raise ValueError(f"hi_db {hi_db} below lo_db {lo_db}")
    if measured_snr_db is None:
        est = estimate_snr(rec.samples, seg)
        if not est.valid:
            raise InsufficientDataError("cannot measure baseline SNR for sweep")
        measured_snr_db = est.snr_db
    n_targets = int(math.floor((hi_db - lo_db) / step_db + 1e-9)) + 1
    seeds = np.random.SeedSequence(seed).spawn(n_targets)
    out = []
    for k in range(n_targets):
        target = lo_db + k * step_db
        adjusted = adjust_snr_awgn(
            rec,
            measured_snr_db,
            target,
            seg,
            rng=np.random.default_rng(seeds[k]),
        )
        out.append((target, adjusted))
    return out


def segments_to_json_lines(
    segments: Sequence[BurstSegment],
    snr_estimates: Optional[Sequence[Optional[SnrEstimate]]] = None,
) -> str:
    """Serialize segments as JSON lines: one object per segment."""
    if snr_estimates is not None and len(snr_estimates) != len(segments):
        raise ValueError("snr_estimates must align with segments")
    lines = []
    for i, seg in enumerate(segments):
        obj = {
            "start_idx": seg.start_idx,
            "end_idx": seg.end_idx,
            "duration_s": seg.duration_s,
            "class_label": seg.class_label,
        }
        est = snr_estimates[i] if snr_estimates is not None else None
        if est is not None:
            obj["snr_db"] = est.snr_db if est.valid else None
            obj["snr_valid"] = est.valid
        lines.append(json.dumps(obj))
    return "\n".join(lines) + ("\n" if lines else "")
