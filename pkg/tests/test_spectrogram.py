"""Colormap tables, pixel geometry, streaming/batch equality, image writers."""

import numpy as np
import pytest
from PIL import Image

from droneprint import (
    COLORMAPS,
    CmapSpec,
    InsufficientDataError,
    SpectrogramImage,
    StftConfig,
    StftMatrix,
    StreamingSpectrogram,
    cmap_lookup,
    get_cmap,
    magnitude_db,
    render_spectrogram,
    save_png,
    save_ppm,
    spectrogram_image,
    stft,
    streaming_spectrogram,
)

# ---------------------------------------------------------------- colormaps

ENDPOINTS = {
    "autumn": ((255, 0, 0), (255, 255, 0)),
    "hot": ((0, 0, 0), (255, 255, 255)),
    "hsv": ((255, 0, 0), (255, 0, 255)),
    "parula": ((62, 38, 168), (255, 255, 0)),
}


@pytest.mark.parametrize("name", sorted(COLORMAPS))
def test_cmap_endpoints(name):
    cmap = get_cmap(name)
    lo, hi = ENDPOINTS[name]
    assert cmap_lookup(cmap, 0.0) == lo
    assert cmap_lookup(cmap, 1.0) == hi


def test_hot_interior_stops():
    hot = get_cmap("hot")
    assert cmap_lookup(hot, 0.375) == (255, 0, 0)
    assert cmap_lookup(hot, 0.75) == (255, 255, 0)
    # halfway up the first ramp only red has risen
    r, g, b = cmap_lookup(hot, 0.1875)
    assert g == 0 and b == 0 and 0 < r < 255


def test_hsv_anchor_stops():
    hsv = get_cmap("hsv")
    anchors = [
        (0.0, (255, 0, 0)),
        (0.2, (255, 255, 0)),
        (0.4, (0, 255, 0)),
        (0.6, (0, 255, 255)),
        (0.8, (0, 0, 255)),
        (1.0, (255, 0, 255)),
    ]
    for t, rgb in anchors:
        assert cmap_lookup(hsv, t) == rgb


def test_autumn_midpoint_interpolates():
    assert cmap_lookup(get_cmap("autumn"), 0.5) == (255, 128, 0)


def test_cmap_clamps_out_of_range():
    for name in COLORMAPS:
        cmap = get_cmap(name)
        assert cmap_lookup(cmap, -0.5) == cmap_lookup(cmap, 0.0)
        assert cmap_lookup(cmap, 1.5) == cmap_lookup(cmap, 1.0)


def test_get_cmap_case_insensitive():
    assert get_cmap("HOT") is COLORMAPS["hot"]
    assert get_cmap("Parula") is COLORMAPS["parula"]


def test_get_cmap_unknown_rejected():
    with pytest.raises(ValueError):
        get_cmap("viridis")


def test_cmap_spec_validation():
    with pytest.raises(ValueError):
        CmapSpec("one", ((0.0, (0, 0, 0)),))
    with pytest.raises(ValueError):
        CmapSpec("bad-span", ((0.1, (0, 0, 0)), (1.0, (1, 1, 1))))
    with pytest.raises(ValueError):
        CmapSpec("bad-order", ((0.0, (0, 0, 0)), (0.5, (1, 1, 1)), (0.5, (2, 2, 2)), (1.0, (3, 3, 3))))
    with pytest.raises(ValueError):
        CmapSpec("bad-rgb", ((0.0, (0, 0, 300)), (1.0, (0, 0, 0))))


# ----------------------------------------------------------- batch geometry


def tone_matrix(k, n_fft=128, n_frames=4, fs=1e6):
    """STFT of a bin-aligned tone at baseband bin k (signed)."""
    n = (n_frames - 1) * (n_fft // 2) + n_fft
    t = np.arange(n)
    x = np.exp(2j * np.pi * (k * fs / n_fft) / fs * t)
    return stft(x, StftConfig(n_fft=n_fft), fs)


def test_tone_row_placement():
    n_fft = 128
    for k in (-40, -1, 0, 17, 63):
        m = tone_matrix(k, n_fft=n_fft)
        img = render_spectrogram(m, get_cmap("hot"))
        # row 0 is the highest frequency; bin (n_fft//2 + k) holds the tone
        expected_row = n_fft - 1 - (n_fft // 2 + k)
        brightness = img.pixels.astype(np.int32).sum(axis=2)
        assert np.all(np.argmax(brightness, axis=0) == expected_row)


def test_image_dimensions_follow_stft():
    rng = np.random.default_rng(0)
    x = rng.standard_normal(5000) + 1j * rng.standard_normal(5000)
    m = stft(x, StftConfig(n_fft=256), 1.0)
    img = render_spectrogram(m, get_cmap("parula"))
    assert img.height == 256
    assert img.width == m.n_frames
    assert img.pixels.shape == (256, m.n_frames, 3)
    assert img.pixels.dtype == np.uint8


def test_auto_db_range_tracks_peak():
    m = tone_matrix(10)
    img = render_spectrogram(m, get_cmap("hot"))
    assert img.db_ceil == pytest.approx(float(magnitude_db(m.frames).max()))
    assert img.db_floor == pytest.approx(img.db_ceil - 80.0)


def test_explicit_db_range_is_kept():
    m = tone_matrix(10)
    img = render_spectrogram(m, get_cmap("hot"), db_floor=-35.0, db_ceil=25.0)
    assert (img.db_floor, img.db_ceil) == (-35.0, 25.0)


def test_render_rejects_inverted_range():
    m = tone_matrix(0)
    with pytest.raises(ValueError):
        render_spectrogram(m, get_cmap("hot"), db_floor=10.0, db_ceil=10.0)


def test_render_rejects_empty_matrix():
    empty = StftMatrix(
        frames=np.empty((0, 64), dtype=np.complex128),
        sample_rate_hz=1.0,
        n_fft=64,
        hop_len=32,
    )
    with pytest.raises(InsufficientDataError):
        render_spectrogram(empty, get_cmap("hot"))


def test_saturation_maps_to_cmap_endpoints():
    # everything at/above ceil renders the top color, at/below floor the bottom
    m = tone_matrix(5, n_fft=64)
    img = render_spectrogram(m, get_cmap("autumn"), db_floor=-3.0, db_ceil=-1.0)
    db = magnitude_db(m.frames)
    hot_rows = 64 - 1 - np.arange(64)[np.any(db >= -1.0, axis=0)]
    cold_rows = 64 - 1 - np.arange(64)[np.all(db <= -3.0, axis=0)]
    assert np.all(img.pixels[hot_rows] == (255, 255, 0))
    assert np.all(img.pixels[cold_rows] == (255, 0, 0))


def test_spectrogram_image_convenience_matches_manual():
    rng = np.random.default_rng(1)
    x = rng.standard_normal(4096) + 1j * rng.standard_normal(4096)
    cfg = StftConfig(n_fft=128)
    a = spectrogram_image(x, cfg, get_cmap("hsv"), 1e6, db_floor=-40, db_ceil=20)
    b = render_spectrogram(stft(x, cfg, 1e6), get_cmap("hsv"), -40, 20)
    assert np.array_equal(a.pixels, b.pixels)


# -------------------------------------------------------------- streaming


def random_chunks(x, rng):
    out, i = [], 0
    while i < len(x):
        step = int(rng.integers(1, 4096))
        out.append(x[i : i + step])
        i += step
    return out


def test_streaming_matches_batch_over_random_chunkings():
    rng = np.random.default_rng(2)
    n = 100_000
    x = (rng.standard_normal(n) + 1j * rng.standard_normal(n)).astype(np.complex64)
    cfg = StftConfig(n_fft=256)
    cmap = get_cmap("hot")
    batch = render_spectrogram(stft(x, cfg, 1e6), cmap, -60.0, 40.0)
    for trial in range(6):
        cols = list(streaming_spectrogram(random_chunks(x, rng), cfg, cmap, -60.0, 40.0))
        pixels = np.concatenate(cols, axis=1)
        assert pixels.shape == batch.pixels.shape
        assert np.array_equal(pixels, batch.pixels)


def test_streaming_single_sample_chunks():
    rng = np.random.default_rng(3)
    x = rng.standard_normal(600) + 1j * rng.standard_normal(600)
    cfg = StftConfig(n_fft=128)
    cmap = get_cmap("autumn")
    batch = render_spectrogram(stft(x, cfg, 1.0), cmap, -50.0, 10.0)
    engine = StreamingSpectrogram(cfg, cmap, -50.0, 10.0)
    cols = [engine.push(x[i : i + 1]) for i in range(len(x))]
    pixels = np.concatenate(cols, axis=1)
    assert np.array_equal(pixels, batch.pixels)
    assert engine.frames_emitted == batch.width


def test_streaming_counts_and_empty_pushes():
    cfg = StftConfig(n_fft=64)
    engine = StreamingSpectrogram(cfg, get_cmap("hot"), -60.0, 0.0)
    assert engine.frames_emitted == 0
    out = engine.push(np.zeros(63, dtype=np.complex64))
    assert out.shape == (64, 0, 3)
    out = engine.push(np.zeros(1, dtype=np.complex64))
    assert out.shape == (64, 1, 3)
    assert engine.frames_emitted == 1
    out = engine.push(np.zeros(0, dtype=np.complex64))
    assert out.shape == (64, 0, 3)


def test_streaming_constructor_validation():
    cfg = StftConfig(n_fft=64)
    with pytest.raises(ValueError):
        StreamingSpectrogram(cfg, get_cmap("hot"), 0.0, 0.0)
    engine = StreamingSpectrogram(cfg, get_cmap("hot"), -10.0, 0.0)
    with pytest.raises(ValueError):
        engine.push(np.zeros((2, 2), dtype=np.complex64))


# ----------------------------------------------------------------- writers


def test_save_png_roundtrip_and_determinism(tmp_path):
    img = render_spectrogram(tone_matrix(9), get_cmap("parula"))
    p1, p2 = tmp_path / "a.png", tmp_path / "b.png"
    save_png(img, p1)
    save_png(img, p2)
    assert p1.read_bytes() == p2.read_bytes()
    back = np.asarray(Image.open(p1).convert("RGB"))
    assert back.shape == img.pixels.shape
    assert np.array_equal(back, img.pixels)


def test_save_ppm_layout(tmp_path):
    img = render_spectrogram(tone_matrix(3, n_fft=32, n_frames=5), get_cmap("hot"))
    path = tmp_path / "out.ppm"
    save_ppm(img, path)
    raw = path.read_bytes()
    header = f"P6\n{img.width} {img.height}\n255\n".encode("ascii")
    assert raw.startswith(header)
    assert raw[len(header) :] == img.pixels.tobytes()
    assert len(raw) == len(header) + img.height * img.width * 3


def test_spectrogram_image_dataclass_fields():
    pixels = np.zeros((4, 7, 3), dtype=np.uint8)
    img = SpectrogramImage(pixels=pixels, db_floor=-80.0, db_ceil=0.0)
    assert img.height == 4 and img.width == 7
