"""Synthetic scene generation with exact ground truth.

Bursts are band-limited complex Gaussian noise with a flat spectral mask,
shaped by raised-cosine amplitude ramps over the first and last 1% of the
burst.  Every burst is normalized after shaping so its in-segment mean
power equals amplitude^2 exactly, which keeps SNR bookkeeping analytic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .dsp import add_complex_awgn
from .errors import CannotRaiseSnrError
from .snr import BurstSegment

EDGE_RAMP_FRACTION = 0.01


@dataclass(frozen=True)
class FhssSpec:
    """Frequency-hopping emitter parameters.

    pattern_period_s, when present, is realized as round(period / duty)
    hop slots: the hop-frequency sequence cycles with exactly that many
    slots.  When absent the hop order is random (aperiodic).
    start_offset_s delays the first hop, leaving a noise-only lead-in
    that lets a detector settle its floor estimate.
    """

    hop_bw_hz: float
    hop_duration_s: float
    duty_interval_s: float
    hop_freqs_hz: Tuple[float, ...]
    pattern_period_s: Optional[float] = None
    amplitude: float = 1.0
    start_offset_s: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "hop_freqs_hz", tuple(self.hop_freqs_hz))
        if not self.hop_bw_hz > 0:
            raise ValueError(f"hop_bw_hz must be > 0, got {self.hop_bw_hz}")
        if not 0 < self.hop_duration_s <= self.duty_interval_s:
            raise ValueError(
                f"hop_duration_s {self.hop_duration_s} must be in "
                f"(0, duty_interval_s = {self.duty_interval_s}]"
            )
        if len(self.hop_freqs_hz) < 1:
            raise ValueError("need at least one hop frequency")
        if self.pattern_period_s is not None and not (
            self.pattern_period_s >= self.duty_interval_s
        ):
            raise ValueError("pattern_period_s must be >= duty_interval_s")
        if self.start_offset_s < 0:
            raise ValueError(f"start_offset_s must be >= 0, got {self.start_offset_s}")
        if self.amplitude < 0:
            raise ValueError(f"amplitude must be >= 0, got {self.amplitude}")


@dataclass(frozen=True)
class VideoSpec:
    """Fixed-frequency video emitter parameters.

    Burst durations are drawn uniformly from duration_set_s, then jittered
    by +-jitter_s (uniform).  inter_burst_s is the gap between the end of
    one burst and the start of the next; the first burst starts at
    start_offset_s when given, else after one inter_burst_s gap.  An
    explicit offset lets combined scenes interleave video bursts into the
    quiet stretches of a hopping emitter.
    """

    bw_hz: float
    center_freq_hz: float
    duration_set_s: Tuple[float, ...]
    inter_burst_s: float
    jitter_s: float = 0.0
    amplitude: float = 1.0
    start_offset_s: Optional[float] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "duration_set_s", tuple(self.duration_set_s))
        if not self.bw_hz > 0:
            raise ValueError(f"bw_hz must be > 0, got {self.bw_hz}")
        if len(self.duration_set_s) < 1:
            raise ValueError("duration_set_s must not be empty")
        if any(d <= 0 for d in self.duration_set_s):
            raise ValueError("all durations must be > 0")
        if self.jitter_s < 0:
            raise ValueError(f"jitter_s must be >= 0, got {self.jitter_s}")
        if min(self.duration_set_s) - self.jitter_s <= 0:
            raise ValueError("jitter_s would allow non-positive durations")
        if not self.inter_burst_s > 0:
            raise ValueError(f"inter_burst_s must be > 0, got {self.inter_burst_s}")
        if self.start_offset_s is not None and self.start_offset_s < 0:
            raise ValueError(f"start_offset_s must be >= 0, got {self.start_offset_s}")
        if self.amplitude < 0:
            raise ValueError(f"amplitude must be >= 0, got {self.amplitude}")


@dataclass
class SceneTruth:
    """Ground truth for a synthetic scene."""

    segments: List[BurstSegment] = field(default_factory=list)
    injected_snr_db: Optional[float] = None
    noise_variance: float = 0.0
    seed: int = 0


def _check_band(center_hz: float, bw_hz: float, fs: float, what: str) -> None:
    if abs(center_hz) + bw_hz / 2.0 > fs / 2.0:
        raise ValueError(
            f"{what}: band [{center_hz - bw_hz / 2:.6g}, {center_hz + bw_hz / 2:.6g}] Hz "
            f"exceeds the Nyquist interval +-{fs / 2:.6g} Hz"
        )


def _flat_band_burst(
    n: int, bw_frac: float, center_frac: float, amplitude: float, rng: np.random.Generator
) -> np.ndarray:
    """Band-limited complex Gaussian burst with raised-cosine edge ramps.

    Spectrum is flat over +-bw_frac/2 (fractions of fs) before modulation
    to center_frac.  Normalized after shaping so mean power == amplitude^2.
    """
    bins = np.fft.fftfreq(n)
    mask = np.abs(bins) <= bw_frac / 2.0
    draws = rng.standard_normal((2, n))
    spectrum = np.where(mask, draws[0] + 1j * draws[1], 0.0)
    x = np.fft.ifft(spectrum)

    ramp_len = max(1, int(round(EDGE_RAMP_FRACTION * n)))
    if 2 * ramp_len > n:
        ramp_len = n // 2
    if ramp_len >= 1:
        k = np.arange(ramp_len, dtype=np.float64)
        ramp = 0.5 * (1.0 - np.cos(np.pi * (k + 0.5) / ramp_len))
        x[:ramp_len] *= ramp
        x[n - ramp_len :] *= ramp[::-1]

    idx = np.arange(n, dtype=np.float64)
    x *= np.exp(2j * np.pi * center_frac * idx)

    rms = math.sqrt(float(np.mean(np.abs(x) ** 2)))
    if rms > 0.0:
        x *= amplitude / rms
    else:
        x = np.zeros(n, dtype=np.complex128)
    if amplitude == 0.0:
        x = np.zeros(n, dtype=np.complex128)
    return x


def _hop_sequence(
    spec: FhssSpec, n_bursts: int, rng: np.random.Generator
) -> np.ndarray:
    """Per-burst hop frequencies; cyclic with the realized pattern length
    when pattern_period_s is set, random draws otherwise."""
    freqs = np.asarray(spec.hop_freqs_hz, dtype=np.float64)
    if spec.pattern_period_s is None:
        return freqs[rng.integers(0, len(freqs), size=n_bursts)]
    n_slots = max(1, int(round(spec.pattern_period_s / spec.duty_interval_s)))
    pattern = freqs[np.arange(n_slots) % len(freqs)]
    return pattern[np.arange(n_bursts) % n_slots]


def synth_fhss(
    spec: FhssSpec, fs: float, total_s: float, seed: int = 0
) -> Tuple[np.ndarray, SceneTruth]:
    """Generate a hopping emitter scene.

    Bursts start every duty_interval_s; the scene must be long enough for
    at least 4 bursts.  Returns complex64 samples and exact truth.
    """
    if not fs > 0:
        raise ValueError(f"fs must be > 0, got {fs}")
    for f in spec.hop_freqs_hz:
        _check_band(f, spec.hop_bw_hz, fs, "hop")
    n_total = int(round(total_s * fs))
    dur_n = max(1, int(round(spec.hop_duration_s * fs)))
    duty_n = max(1, int(round(spec.duty_interval_s * fs)))
    offset_n = int(round(spec.start_offset_s * fs))
    starts = []
    k = 0
    while offset_n + k * duty_n + dur_n <= n_total:
        starts.append(offset_n + k * duty_n)
        k += 1
    if len(starts) < 4:
        raise ValueError(
            f"total_s {total_s} fits only {len(starts)} bursts; need >= 4"
        )
    rng = np.random.default_rng(seed)
    hop_freqs = _hop_sequence(spec, len(starts), rng)

    x = np.zeros(n_total, dtype=np.complex64)
    segments = []
    for start, f_c in zip(starts, hop_freqs):
        burst = _flat_band_burst(dur_n, spec.hop_bw_hz / fs, f_c / fs, spec.amplitude, rng)
        x[start : start + dur_n] = burst
        segments.append(BurstSegment(start, start + dur_n, dur_n / fs, "fhss"))
    truth = SceneTruth(segments=segments, injected_snr_db=None, noise_variance=0.0, seed=seed)
    return x, truth


def synth_video(
    spec: VideoSpec, fs: float, total_s: float, seed: int = 0
) -> Tuple[np.ndarray, SceneTruth]:
    """Generate a fixed-frequency video emitter scene."""
    if not fs > 0:
        raise ValueError(f"fs must be > 0, got {fs}")
    _check_band(spec.center_freq_hz, spec.bw_hz, fs, "video carrier")
    n_total = int(round(total_s * fs))
    inter_n = max(1, int(round(spec.inter_burst_s * fs)))
    rng = np.random.default_rng(seed)
    durations = np.asarray(spec.duration_set_s, dtype=np.float64)

    x = np.zeros(n_total, dtype=np.complex64)
    segments = []
    if spec.start_offset_s is None:
        cursor = inter_n
    else:
        cursor = int(round(spec.start_offset_s * fs))
    while True:
        dur = float(durations[rng.integers(0, len(durations))])
        if spec.jitter_s > 0:
            dur += float(rng.uniform(-spec.jitter_s, spec.jitter_s))
        dur_n = max(1, int(round(dur * fs)))
        if cursor + dur_n > n_total:
            break
        burst = _flat_band_burst(
            dur_n, spec.bw_hz / fs, spec.center_freq_hz / fs, spec.amplitude, rng
        )
        x[cursor : cursor + dur_n] = burst
        segments.append(BurstSegment(cursor, cursor + dur_n, dur_n / fs, "video"))
        cursor += dur_n + inter_n
    truth = SceneTruth(segments=segments, injected_snr_db=None, noise_variance=0.0, seed=seed)
    return x, truth


def combine_scenes(
    parts: Sequence[Tuple[np.ndarray, SceneTruth]]
) -> Tuple[np.ndarray, SceneTruth]:
    """Sum equal-length noiseless scenes and merge their truth segments."""
    if not parts:
        raise ValueError("need at least one scene")
    length = len(parts[0][0])
    for x, truth in parts:
        if len(x) != length:
            raise ValueError("scenes must have equal length")
        if truth.noise_variance != 0.0 or truth.injected_snr_db is not None:
            raise ValueError("combine scenes before adding noise")
    total = np.zeros(length, dtype=np.complex64)
    segments: List[BurstSegment] = []
    for x, truth in parts:
        total += x
        segments.extend(truth.segments)
    segments.sort(key=lambda s: s.start_idx)
    return (
        total,
        SceneTruth(segments=segments, injected_snr_db=None, noise_variance=0.0,
                   seed=parts[0][1].seed),
    )


def add_noise_at_snr(
    signal, truth: SceneTruth, target_snr_db: float, seed: int = 0
) -> Tuple[np.ndarray, SceneTruth]:
    """Add complex AWGN so the in-segment SNR equals target_snr_db.

    The signal power is the mean |x|^2 over the union of truth segments
    minus any noise already injected; the added variance solves
    target = 10*log10(P_S / (existing + added)).
    """
    x = np.asarray(signal)
    if not truth.segments:
        raise ValueError("truth has no segments; SNR is undefined")
    in_seg = np.zeros(len(x), dtype=bool)
    for seg in truth.segments:
        in_seg[seg.start_idx : seg.end_idx] = True
    mag = np.abs(x[in_seg]).astype(np.float64)
    p_seg = float(np.mean(mag * mag))
    p_s = p_seg - truth.noise_variance
    if p_s <= 0.0:
        raise ValueError("truth segments carry no signal power")
    rho_t = 10.0 ** (target_snr_db / 10.0)
    var_add = p_s / rho_t - truth.noise_variance
    if var_add <= 0.0:
        raise CannotRaiseSnrError(
            f"target {target_snr_db} dB not below the scene's current SNR"
        )
    noisy = add_complex_awgn(x, var_add, np.random.default_rng(seed))
    new_truth = SceneTruth(
        segments=list(truth.segments),
        injected_snr_db=target_snr_db,
        noise_variance=truth.noise_variance + var_add,
        seed=truth.seed,
    )
    return noisy, new_truth


def plan_hop_frequencies(
    n_hops: int, hop_bw_hz: float, fs: float, spacing_hz: Optional[float] = None
) -> Tuple[float, ...]:
    """Evenly spaced hop centers straddling 0 Hz that fit inside Nyquist.

    Useful for building table-derived scene specs where each pattern slot
    gets its own distinguishable center frequency.
    """
    if n_hops < 1:
        raise ValueError(f"n_hops must be >= 1, got {n_hops}")
    if spacing_hz is None:
        spacing_hz = max(0.02 * hop_bw_hz, 8.0 * fs / 512.0)
    span = (n_hops - 1) * spacing_hz
    centers = (np.arange(n_hops) - (n_hops - 1) / 2.0) * spacing_hz
    if span / 2.0 + hop_bw_hz / 2.0 > fs / 2.0:
        raise ValueError(
            f"{n_hops} hops spaced {spacing_hz:.6g} Hz with bandwidth "
            f"{hop_bw_hz:.6g} Hz exceed the Nyquist interval of fs={fs:.6g}"
        )
    return tuple(float(c) for c in centers)


def truth_to_dict(truth: SceneTruth) -> dict:
    """JSON-friendly form of a SceneTruth."""
    return {
        "segments": [
            {
                "start_idx": s.start_idx,
                "end_idx": s.end_idx,
                "duration_s": s.duration_s,
                "class_label": s.class_label,
            }
            for s in truth.segments
        ],
        "injected_snr_db": truth.injected_snr_db,
        "noise_variance": truth.noise_variance,
        "seed": truth.seed,
    }


def truth_from_dict(d: dict) -> SceneTruth:
    return SceneTruth(
        segments=[
            BurstSegment(
                s["start_idx"], s["end_idx"], s["duration_s"], s["class_label"]
            )
            for s in d["segments"]
        ],
        injected_snr_db=d.get("injected_snr_db"),
        noise_variance=float(d.get("noise_variance", 0.0)),
        seed=int(d.get("seed", 0)),
    )
