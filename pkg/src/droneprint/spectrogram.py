"""Log-magnitude spectrogram rendering with table-driven colormaps.

Images put time on the horizontal axis (one column per STFT frame) and
frequency on the vertical axis with the lowest frequency at the bottom
row, so height equals n_fft and width equals n_frames.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Optional, Tuple

import numpy as np
from PIL import Image

from .dsp import StftConfig, StftMatrix, stft, _frame_signal
from .errors import InsufficientDataError

LOG_EPSILON = 1e-12  # guards 20*log10 against exact zeros
DEFAULT_DB_SPAN = 80.0  # auto floor sits this far below the per-image peak

Stop = Tuple[float, Tuple[int, int, int]]


@dataclass(frozen=True)
class CmapSpec:
    """Piecewise-linear RGB colormap over t in [0, 1].

    Stops are (position, (r, g, b)) with positions strictly increasing
    from 0.0 to 1.0.  Lookups outside [0, 1] clamp to the endpoints.
    """

    name: str
    stops: Tuple[Stop, ...]

    def __post_init__(self) -> None:
        if len(self.stops) < 2:
            raise ValueError("a colormap needs at least two stops")
        pos = [s[0] for s in self.stops]
        if pos[0] != 0.0 or pos[-1] != 1.0:
            raise ValueError("stop positions must start at 0.0 and end at 1.0")
        if any(b <= a for a, b in zip(pos, pos[1:])):
            raise ValueError("stop positions must be strictly increasing")
        for _, rgb in self.stops:
            if len(rgb) != 3 or any(not 0 <= c <= 255 for c in rgb):
                raise ValueError(f"bad RGB triple in colormap {self.name!r}: {rgb}")


# Stop tables, version 1.  Endpoints are contractual; interior stops are a
# fixed approximation of the conventional maps.
COLORMAPS = {
    "autumn": CmapSpec(
        "autumn",
        (
            (0.0, (255, 0, 0)),
            (1.0, (255, 255, 0)),
        ),
    ),
    "hot": CmapSpec(
        "hot",
        (
            (0.0, (0, 0, 0)),
            (0.375, (255, 0, 0)),
            (0.75, (255, 255, 0)),
            (1.0, (255, 255, 255)),
        ),
    ),
    "hsv": CmapSpec(
        "hsv",
        (
            (0.0, (255, 0, 0)),
            (0.2, (255, 255, 0)),
            (0.4, (0, 255, 0)),
            (0.6, (0, 255, 255)),
            (0.8, (0, 0, 255)),
            (1.0, (255, 0, 255)),
        ),
    ),
    "parula": CmapSpec(
        "parula",
        (
            (0.0, (62, 38, 168)),
            (0.125, (49, 88, 231)),
            (0.25, (30, 130, 222)),
            (0.375, (16, 168, 192)),
            (0.5, (51, 188, 156)),
            (0.625, (124, 195, 114)),
            (0.75, (197, 188, 82)),
            (0.875, (243, 200, 48)),
            (1.0, (255, 255, 0)),
        ),
    ),
}


def get_cmap(name: str) -> CmapSpec:
    try:
        return COLORMAPS[name.lower()]
    except KeyError:
        raise ValueError(
            f"unknown colormap {name!r}; choose from {sorted(COLORMAPS)}"
        ) from None


def _apply_cmap(cmap: CmapSpec, t: np.ndarray) -> np.ndarray:
    """Map an array of t values to uint8 RGB, clamping outside [0, 1]."""
    tc = np.clip(np.asarray(t, dtype=np.float64), 0.0, 1.0)
    xp = np.array([s[0] for s in cmap.stops], dtype=np.float64)
    out = np.empty(tc.shape + (3,), dtype=np.uint8)
    for ch in range(3):
        fp = np.array([s[1][ch] for s in cmap.stops], dtype=np.float64)
        out[..., ch] = np.rint(np.interp(tc, xp, fp)).astype(np.uint8)
    return out


def cmap_lookup(cmap: CmapSpec, t: float) -> Tuple[int, int, int]:
    """Scalar colormap lookup; t outside [0, 1] clamps to the endpoints."""
    rgb = _apply_cmap(cmap, np.array([t]))[0]
    return int(rgb[0]), int(rgb[1]), int(rgb[2])


@dataclass
class SpectrogramImage:
    """Rendered spectrogram pixels plus the dB range that produced them."""

    pixels: np.ndarray  # (height, width, 3) uint8, row 0 = highest frequency
    db_floor: float
    db_ceil: float

    @property
    def height(self) -> int:
        return int(self.pixels.shape[0])

    @property
    def width(self) -> int:
        return int(self.pixels.shape[1])


def magnitude_db(frames: np.ndarray) -> np.ndarray:
    return 20.0 * np.log10(np.abs(frames) + LOG_EPSILON)


def _columns_from_frames(
    spec_frames: np.ndarray, cmap: CmapSpec, db_floor: float, db_ceil: float
) -> np.ndarray:
    """Shared pixel mapping: frames (n_frames, n_fft) -> (n_fft, n_frames, 3)."""
    db = magnitude_db(spec_frames)
    t = (db - db_floor) / (db_ceil - db_floor)
    rgb = _apply_cmap(cmap, t)  # (n_frames, n_fft, 3)
    return rgb.transpose(1, 0, 2)[::-1]  # bin 0 (lowest freq) at bottom row


def render_spectrogram(
    m: StftMatrix,
    cmap: CmapSpec,
    db_floor: Optional[float] = None,
    db_ceil: Optional[float] = None,
) -> SpectrogramImage:
    """Render an STFT matrix to RGB pixels.

    The dB range defaults to [peak - 80, peak] computed over this matrix.
    Passing an explicit range makes renders comparable across inputs.
    """
    if m.n_frames == 0:
        raise InsufficientDataError("cannot render an empty STFT matrix")
    if db_ceil is None:
        db_ceil = float(magnitude_db(m.frames).max())
    if db_floor is None:
        db_floor = db_ceil - DEFAULT_DB_SPAN
    if not db_floor < db_ceil:
        raise ValueError(f"db_floor {db_floor} must be below db_ceil {db_ceil}")
    pixels = _columns_from_frames(m.frames, cmap, db_floor, db_ceil)
    return SpectrogramImage(pixels=np.ascontiguousarray(pixels), db_floor=db_floor, db_ceil=db_ceil)


class StreamingSpectrogram:
    """Chunk-fed spectrogram engine.

    Keeps a carry buffer of samples that have not yet filled a whole
    analysis frame, so arbitrary chunk boundaries produce exactly the
    columns a batch render of the concatenated input would.  The dB range
    must be fixed up front: a streaming consumer never sees the global
    peak.
    """

    def __init__(
        self,
        cfg: StftConfig,
        cmap: CmapSpec,
        db_floor: float,
        db_ceil: float,
        sample_rate_hz: float = 1.0,
    ) -> None:
        if not db_floor < db_ceil:
            raise ValueError(f"db_floor {db_floor} must be below db_ceil {db_ceil}")
        self.cfg = cfg
        self.cmap = cmap
        self.db_floor = float(db_floor)
        self.db_ceil = float(db_ceil)
        self.sample_rate_hz = sample_rate_hz
        self._window = cfg.window.samples()
        self._carry: Optional[np.ndarray] = None
        self._frames_emitted = 0

    @property
    def frames_emitted(self) -> int:
        return self._frames_emitted

    def push(self, chunk) -> np.ndarray:
        """Feed samples; returns pixels (n_fft, k, 3) for k newly completed frames."""
        block = np.asarray(chunk)
        if block.ndim != 1:
            raise ValueError("chunks must be 1-D")
        if self._carry is None or self._carry.size == 0:
            self._carry = block
        elif block.size:
            self._carry = np.concatenate([self._carry, block])
        n_fft, hop = self.cfg.n_fft, self.cfg.hop_len
        if self._carry.size < n_fft:
            return np.empty((n_fft, 0, 3), dtype=np.uint8)
        n_new = (self._carry.size - n_fft) // hop + 1
        frames = _frame_signal(self._carry, n_fft, hop) * self._window
        spec = np.fft.fftshift(np.fft.fft(frames, axis=1), axes=1)
        self._carry = self._carry[n_new * hop :]
        self._frames_emitted += n_new
        return _columns_from_frames(spec, self.cmap, self.db_floor, self.db_ceil)


def streaming_spectrogram(
    chunks: Iterable,
    cfg: StftConfig,
    cmap: CmapSpec,
    db_floor: float,
    db_ceil: float,
    sample_rate_hz: float = 1.0,
) -> Iterator[np.ndarray]:
    """Generator form of StreamingSpectrogram: yields per-chunk column groups."""
    engine = StreamingSpectrogram(cfg, cmap, db_floor, db_ceil, sample_rate_hz)
    for chunk in chunks:
        cols = engine.push(chunk)
        if cols.shape[1]:
            yield cols


def save_png(image: SpectrogramImage, path) -> None:
    """Write 8-bit RGB PNG.  Identical pixels produce identical bytes."""
    Image.fromarray(image.pixels, mode="RGB").save(Path(path), format="PNG")


def save_ppm(image: SpectrogramImage, path) -> None:
    """Write a raw (P6) portable pixmap for byte-exact comparisons."""
    header = f"P6\n{image.width} {image.height}\n255\n".encode("ascii")
    with open(Path(path), "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(image.pixels).tobytes())


def spectrogram_image(
    signal,
    cfg: StftConfig,
    cmap: CmapSpec,
    sample_rate_hz: float = 1.0,
    db_floor: Optional[float] = None,
    db_ceil: Optional[float] = None,
) -> SpectrogramImage:
    """Convenience path: STFT + render in one call."""
    return render_spectrogram(stft(signal, cfg, sample_rate_hz), cmap, db_floor, db_ceil)
