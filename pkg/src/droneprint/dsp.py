"""Windowing, STFT, frequency-resolution arithmetic, Welch PSD estimation.

All spectra are emitted in baseband bin order, i.e. frequencies run from
-fs/2 up to (but excluding) +fs/2 after an explicit half-spectrum rotation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import InsufficientDataError, InvalidSampleError


def hamming_window(n: int) -> np.ndarray:
    """Hamming window w[k] = 0.54 - 0.46*cos(2*pi*k/(n-1)), k = 0..n-1."""
    if n < 2:
        raise ValueError(f"window length must be >= 2, got {n}")
    idx = np.arange(n, dtype=np.float64)
    return 0.54 - 0.46 * np.cos(2.0 * np.pi * (idx / (n - 1)))


_WINDOW_FNS = {"hamming": hamming_window}


@dataclass(frozen=True)
class WindowSpec:
    """Analysis window selection."""

    kind: str = "hamming"
    length: int = 512

    def __post_init__(self) -> None:
        if self.kind not in _WINDOW_FNS:
            raise ValueError(f"unsupported window kind {self.kind!r}")
        if self.length < 2:
            raise ValueError(f"window length must be >= 2, got {self.length}")

    def samples(self) -> np.ndarray:
        return _WINDOW_FNS[self.kind](self.length)


@dataclass(frozen=True)
class StftConfig:
    """Short-time transform geometry.

    hop_len defaults to n_fft // 2 (50% overlap).  The window length must
    equal n_fft; no zero padding is applied.
    """

    n_fft: int = 512
    hop_len: Optional[int] = None
    window: Optional[WindowSpec] = None

    def __post_init__(self) -> None:
        if self.n_fft < 2:
            raise ValueError(f"n_fft must be >= 2, got {self.n_fft}")
        if self.hop_len is None:
            object.__setattr__(self, "hop_len", self.n_fft // 2)
        if not 1 <= self.hop_len <= self.n_fft:
            raise ValueError(f"hop_len must be in [1, n_fft], got {self.hop_len}")
        if self.window is None:
            object.__setattr__(self, "window", WindowSpec("hamming", self.n_fft))
        if self.window.length != self.n_fft:
            raise ValueError(
                f"window length {self.window.length} must equal n_fft {self.n_fft}"
            )


@dataclass
class StftMatrix:
    """STFT frames in baseband bin order.

    frames has shape (n_frames, n_fft); frame m is the windowed transform
    of samples [m*hop_len, m*hop_len + n_fft).  Only full frames are
    produced; a trailing partial window is dropped.
    """

    frames: np.ndarray
    sample_rate_hz: float
    n_fft: int
    hop_len: int

    @property
    def n_frames(self) -> int:
        return int(self.frames.shape[0])

    @property
    def freq_resolution_hz(self) -> float:
        return self.sample_rate_hz / self.n_fft

    @property
    def freqs_hz(self) -> np.ndarray:
        return np.fft.fftshift(np.fft.fftfreq(self.n_fft, d=1.0 / self.sample_rate_hz))

    @property
    def frame_times_s(self) -> np.ndarray:
        return np.arange(self.n_frames) * (self.hop_len / self.sample_rate_hz)


def _frame_signal(x: np.ndarray, n_fft: int, hop: int) -> np.ndarray:
    n_frames = (len(x) - n_fft) // hop + 1
    view = np.lib.stride_tricks.sliding_window_view(x, n_fft)
    return view[: (n_frames - 1) * hop + 1 : hop]


def stft(signal, cfg: StftConfig, sample_rate_hz: float = 1.0) -> StftMatrix:
    """Short-time Fourier transform with full-frame edge policy.

    Args:
        signal: 1-D complex (or real) samples, length >= n_fft, finite.
        cfg: transform geometry.
        sample_rate_hz: used only for the frequency/time bookkeeping on the
            returned matrix; frequencies are sample-normalized when omitted.

    Returns:
        StftMatrix with frames rotated into baseband (-fs/2 .. +fs/2) order.
    """
    x = np.asarray(signal)
    if x.ndim != 1:
        raise ValueError("signal must be 1-D")
    if len(x) < cfg.n_fft:
        raise InsufficientDataError(
            f"signal length {len(x)} shorter than n_fft {cfg.n_fft}"
        )
    if not np.isfinite(x).all():
        raise InvalidSampleError("signal contains NaN or Inf samples")
    win = cfg.window.samples()
    frames = _frame_signal(x, cfg.n_fft, cfg.hop_len) * win
    spec = np.fft.fftshift(np.fft.fft(frames, axis=1), axes=1)
    return StftMatrix(
        frames=spec,
        sample_rate_hz=float(sample_rate_hz),
        n_fft=cfg.n_fft,
        hop_len=cfg.hop_len,
    )


def freq_resolution(sample_rate_hz: float, n_fft: int) -> float:
    """Bin spacing fs / n_fft in Hz."""
    if not sample_rate_hz > 0:
        raise ValueError(f"sample_rate_hz must be > 0, got {sample_rate_hz}")
    if n_fft < 1:
        raise ValueError(f"n_fft must be >= 1, got {n_fft}")
    return sample_rate_hz / n_fft


@dataclass
class PsdEstimate:
    """Welch power spectral density in baseband bin order.

    power is a density: summing power * bin_width over all bins recovers
    the mean-square signal amplitude (up to windowing loss correction,
    which is applied).
    """

    freqs_hz: np.ndarray
    power: np.ndarray
    segment_len: int
    overlap_fraction: float

    @property
    def bin_width_hz(self) -> float:
        return float(self.freqs_hz[1] - self.freqs_hz[0])

    def total_power(self) -> float:
        return float(self.power.sum() * self.bin_width_hz)


_AWGN_CHUNK = 1 << 22  # samples per RNG block; fixed so streams are stable


def add_complex_awgn(
    signal, variance: float, rng: np.random.Generator
) -> np.ndarray:
    """Return signal + circularly-symmetric complex Gaussian noise.

    Total noise variance is `variance` (split evenly between I and Q).
    Output is complex64; generation is chunked with a fixed block size so
    the draw order, and therefore the output, is reproducible for a given
    generator state.
    """
    if variance < 0:
        raise ValueError(f"variance must be >= 0, got {variance}")
    x = np.asarray(signal)
    out = np.empty(len(x), dtype=np.complex64)
    scale = np.sqrt(variance / 2.0)
    for off in range(0, len(x), _AWGN_CHUNK):
        hi = min(len(x), off + _AWGN_CHUNK)
        m = hi - off
        out.real[off:hi] = x.real[off:hi] + scale * rng.standard_normal(m)
        out.imag[off:hi] = x.imag[off:hi] + scale * rng.standard_normal(m)
    return out


def welch_psd(
    signal,
    sample_rate_hz: float = 1.0,
    segment_len: int = 1024,
    overlap_fraction: float = 0.5,
    window: Optional[WindowSpec] = None,
) -> PsdEstimate:
    """Welch PSD: mean of windowed per-segment periodograms.

    Normalization divides each periodogram by fs * sum(w^2) so the
    integrated density equals the mean-square amplitude of the input.
    """
    x = np.asarray(signal)
    if x.ndim != 1:
        raise ValueError("signal must be 1-D")
    if segment_len < 2:
        raise ValueError(f"segment_len must be >= 2, got {segment_len}")
    if not 0.0 <= overlap_fraction < 1.0:
        raise ValueError(f"overlap_fraction must be in [0, 1), got {overlap_fraction}")
    if len(x) < segment_len:
        raise InsufficientDataError(
            f"signal length {len(x)} shorter than segment_len {segment_len}"
        )
    if not np.isfinite(x).all():
        raise InvalidSampleError("signal contains NaN or Inf samples")
    if window is None:
        window = WindowSpec("hamming", segment_len)
    if window.length != segment_len:
        raise ValueError(
            f"window length {window.length} must equal segment_len {segment_len}"
        )
    win = window.samples()
    step = max(1, int(round(segment_len * (1.0 - overlap_fraction))))
    segs = _frame_signal(x, segment_len, step) * win
    spec = np.fft.fftshift(np.fft.fft(segs, axis=1), axes=1)
    scale = sample_rate_hz * float(np.sum(win**2))
    power = np.mean(np.abs(spec) ** 2, axis=0) / scale
    freqs = np.fft.fftshift(np.fft.fftfreq(segment_len, d=1.0 / sample_rate_hz))
    return PsdEstimate(
        freqs_hz=freqs,
        power=power,
        segment_len=segment_len,
        overlap_fraction=overlap_fraction,
    )
