"""Command-line frontend: info, spectrogram, adjust-snr, analyze, synth.

Exit codes: 0 success, 2 usage or validation error, 1 internal error.
Machine-readable output (JSON) goes to stdout; progress goes to stderr.

Settings resolve as: command-line flag, then DRONEPRINT_OUT_DIR (output
directory only), then --config file entries, then built-in defaults.  The
config file is flat ``KEY=VALUE`` text; '#' starts a comment.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, TypeVar

import numpy as np

from .dsp import StftConfig, stft, welch_psd
from .errors import DroneprintError, InsufficientDataError, InsufficientNoiseError
from .fingerprint import (
    FingerprintDb,
    _occupied_span_bins,
    extract_fingerprint,
    match_fingerprint,
)
from .iq_io import (
    IqRecording,
    RecordingMetadata,
    chunk_stream,
    read_iq,
    write_iq,
    write_metadata_xml,
)
from .snr import (
    BurstSegment,
    ClassRules,
    DetectorConfig,
    SnrEstimate,
    classify_bursts,
    detect_bursts,
    estimate_center_frequency,
    estimate_snr,
    segments_to_json_lines,
    snr_sweep,
)
from .spectrogram import (
    COLORMAPS,
    SpectrogramImage,
    StreamingSpectrogram,
    get_cmap,
    render_spectrogram,
    save_png,
    save_ppm,
)
from .synth import (
    FhssSpec,
    SceneTruth,
    VideoSpec,
    add_noise_at_snr,
    combine_scenes,
    synth_fhss,
    synth_video,
    truth_to_dict,
)

ENV_OUT_DIR = "DRONEPRINT_OUT_DIR"

# Keys accepted in --config files; anything else is rejected.
_CONFIG_KEYS = frozenset(
    {
        "out_dir",
        "sample_rate_hz",
        "n_fft",
        "hop",
        "cmap",
        "db_floor",
        "db_ceil",
        "chunk_len",
        "seed",
        "targets",
        "short_win",
        "long_win",
        "threshold_ratio",
        "min_gap",
        "min_duration",
        "fhss_max_ms",
        "video_max_ms",
        "tolerance",
        "top",
    }
)

_T = TypeVar("_T")

_MAX_CENTER_FREQ_SAMPLES = 1 << 22  # cap per-class concatenation for the PSD


def load_config(path) -> Dict[str, str]:
    """Parse a flat KEY=VALUE config file."""
    cfg: Dict[str, str] = {}
    for ln, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{ln}: expected KEY=VALUE, got {line!r}")
        key, _, val = line.partition("=")
        key = key.strip().lower()
        if key not in _CONFIG_KEYS:
            raise ValueError(f"{path}:{ln}: unknown config key {key!r}")
        if key in cfg:
            raise ValueError(f"{path}:{ln}: duplicate config key {key!r}")
        cfg[key] = val.strip()
    return cfg


def _setting(
    flag_value: Optional[_T],
    config: Dict[str, str],
    key: str,
    default: _T,
    cast: Callable[[str], _T],
    env_var: Optional[str] = None,
) -> _T:
    """Resolve one setting: flag > env (when given) > config > default."""
    if flag_value is not None:
        return flag_value
    if env_var is not None:
        env = os.environ.get(env_var)
        if env:
            return cast(env)
    if key in config:
        try:
            return cast(config[key])
        except ValueError as exc:
            raise ValueError(f"config key {key!r}: {exc}") from exc
    return default


def _progress(msg: str) -> None:
    print(msg, file=sys.stderr)


def _parse_targets(text: str) -> tuple:
    """Parse LO:HI:STEP (ASCII or typographic minus)."""
    parts = text.replace("\N{MINUS SIGN}", "-").split(":")
    if len(parts) != 3:
        raise ValueError(f"targets must be LO:HI:STEP, got {text!r}")
    lo, hi, step = (float(p) for p in parts)
    return lo, hi, step


def _parse_segment(text: str) -> BurstSegment:
    parts = text.split(":")
    if len(parts) != 2:
        raise ValueError(f"segment must be START:END in samples, got {text!r}")
    start, end = int(parts[0]), int(parts[1])
    return BurstSegment(start, end, 1.0)  # duration filled downstream


def _config_of(args) -> Dict[str, str]:
    return load_config(args.config) if args.config else {}


def _read_input(args, config: Dict[str, str]) -> IqRecording:
    fs = _setting(args.sample_rate, config, "sample_rate_hz", None, float)
    rec = read_iq(args.input, sample_rate_hz=fs)
    if rec.sample_rate_hz == 1.0 and fs is None and rec.metadata is None:
        _progress(
            "note: no sidecar or --sample-rate; assuming 1 Hz (durations are in samples)"
        )
    return rec


# ---------------------------------------------------------------- info


def cmd_info(args) -> int:
    config = _config_of(args)
    rec = _read_input(args, config)
    md = rec.metadata
    print(f"file:            {args.input}")
    print(f"samples:         {rec.n_samples}")
    print(f"sample rate:     {rec.sample_rate_hz:.6g} Hz")
    print(f"duration:        {rec.duration_s:.9g} s")
    print(f"center freq:     {rec.center_freq_hz:.6g} Hz")
    if md is not None:
        if md.uav_type:
            print(f"uav type:        {md.uav_type}")
        if md.gain_db is not None:
            print(f"gain:            {md.gain_db:.6g} dB")
        if md.source_file:
            print(f"source file:     {md.source_file}")
    return 0


# --------------------------------------------------------- spectrogram


def cmd_spectrogram(args) -> int:
    config = _config_of(args)
    n_fft = _setting(args.n_fft, config, "n_fft", 512, int)
    hop = _setting(args.hop, config, "hop", None, int)
    cmap_name = _setting(args.cmap, config, "cmap", "parula", str)
    db_floor = _setting(args.db_floor, config, "db_floor", None, float)
    db_ceil = _setting(args.db_ceil, config, "db_ceil", None, float)
    cmap = get_cmap(cmap_name)
    cfg = StftConfig(n_fft=n_fft, hop_len=hop)
    out = Path(args.out)

    if args.streaming:
        if db_floor is None or db_ceil is None:
            raise ValueError("--streaming requires explicit --db-floor and --db-ceil")
        chunk_len = _setting(args.chunk_len, config, "chunk_len", 1 << 16, int)
        fs = _setting(args.sample_rate, config, "sample_rate_hz", 1.0, float)
        engine = StreamingSpectrogram(cfg, cmap, db_floor, db_ceil, fs)
        groups = []
        for chunk in chunk_stream(args.input, chunk_len):
            cols = engine.push(chunk)
            if cols.shape[1]:
                groups.append(cols)
        if not groups:
            raise InsufficientDataError("input shorter than one analysis frame")
        pixels = np.concatenate(groups, axis=1)
        image = SpectrogramImage(pixels=pixels, db_floor=db_floor, db_ceil=db_ceil)
        _progress(f"streamed {engine.frames_emitted} frames")
    else:
        rec = _read_input(args, config)
        m = stft(rec.samples, cfg, rec.sample_rate_hz)
        image = render_spectrogram(m, cmap, db_floor, db_ceil)
        _progress(f"rendered {m.n_frames} frames")

    if out.suffix.lower() == ".ppm":
        save_ppm(image, out)
    else:
        save_png(image, out)
    _progress(f"wrote {out}")
    return 0


# ---------------------------------------------------------- adjust-snr


def _auto_segment(rec: IqRecording) -> BurstSegment:
    segs = detect_bursts(rec.samples, rec.sample_rate_hz, DetectorConfig())
    if not segs:
        raise InsufficientDataError("no burst detected; pass --segment START:END")
    return max(segs, key=lambda s: s.n_samples)


def cmd_adjust_snr(args) -> int:
    config = _config_of(args)
    rec = _read_input(args, config)
    out_dir = _setting(
        args.out_dir, config, "out_dir", Path("."), Path, env_var=ENV_OUT_DIR
    )
    seed = _setting(args.seed, config, "seed", 0, int)
    targets = _parse_targets(
        _setting(args.targets, config, "targets", "-20:20:2", str)
    )

    if args.segment is not None:
        seg = _parse_segment(args.segment)
        seg = BurstSegment(
            seg.start_idx,
            seg.end_idx,
            (seg.end_idx - seg.start_idx) / rec.sample_rate_hz,
        )
    else:
        seg = _auto_segment(rec)
        _progress(
            f"auto-detected segment [{seg.start_idx}, {seg.end_idx}) "
            f"({seg.duration_s * 1e3:.3f} ms)"
        )

    measured = args.measured_snr
    if measured is None:
        est = estimate_snr(rec.samples, seg)
        if not est.valid:
            raise InsufficientDataError(
                "baseline SNR estimate invalid; pass --measured-snr"
            )
        measured = est.snr_db
        _progress(f"measured SNR {measured:.2f} dB")

    out_dir.mkdir(parents=True, exist_ok=True)
    stem = Path(args.input).stem
    lo, hi, step = targets
    written = []
    for target, adjusted in snr_sweep(rec, seg, lo, hi, step, measured, seed):
        out_path = out_dir / f"{stem}_{target:+.1f}dB.iq"
        write_iq(adjusted, out_path)
        if rec.metadata is not None:
            write_metadata_xml(rec.metadata, out_path.with_suffix(".xml"))
        written.append(out_path)
        _progress(f"target {target:+.1f} dB -> {out_path.name}")
    for p in written:
        print(p)
    return 0


# ------------------------------------------------------------- analyze


def _complement_noise_power(x: np.ndarray, segments: Sequence[BurstSegment]) -> Optional[float]:
    """Mean |x|^2 over samples outside every segment, or None if empty."""
    total = 0.0
    count = 0
    cursor = 0
    for seg in sorted(segments, key=lambda s: s.start_idx):
        hi = min(seg.start_idx, len(x))
        if cursor < hi:
            blk = x[cursor:hi]
            total += float(np.square(np.abs(blk), dtype=np.float64).sum())
            count += hi - cursor
        cursor = max(cursor, seg.end_idx)
    if cursor < len(x):
        blk = x[cursor:]
        total += float(np.square(np.abs(blk), dtype=np.float64).sum())
        count += len(x) - cursor
    if count == 0:
        return None
    return total / count


def _class_center_freq(
    x: np.ndarray, segments: Sequence[BurstSegment], fs: float
) -> Optional[float]:
    """Center frequency of one class: occupied-band search over a pooled PSD."""
    if not segments:
        return None
    parts = []
    budget = _MAX_CENTER_FREQ_SAMPLES
    for seg in segments:
        take = min(seg.n_samples, budget)
        parts.append(x[seg.start_idx : seg.start_idx + take])
        budget -= take
        if budget <= 0:
            break
    pooled = np.concatenate(parts)
    if pooled.size < 2:
        return None
    seg_len = min(1024, pooled.size)
    psd = welch_psd(pooled, fs, segment_len=seg_len)
    try:
        lo, hi = _occupied_span_bins(psd.power, 0.99)
    except InsufficientDataError:
        return None
    search_bw = (hi - lo + 1) * psd.bin_width_hz
    return estimate_center_frequency(psd, search_bw)


def cmd_analyze(args) -> int:
    config = _config_of(args)
    rec = _read_input(args, config)
    fs = rec.sample_rate_hz
    x = rec.samples

    det_cfg = DetectorConfig(
        short_win=_setting(args.short_win, config, "short_win", 64, int),
        long_win=_setting(args.long_win, config, "long_win", 4096, int),
        threshold_ratio=_setting(
            args.threshold_ratio, config, "threshold_ratio", 4.0, float
        ),
        min_gap=_setting(args.min_gap, config, "min_gap", 256, int),
        min_duration=_setting(args.min_duration, config, "min_duration", 128, int),
    )
    rules = ClassRules(
        fhss_max_s=_setting(args.fhss_max_ms, config, "fhss_max_ms", 1.5, float) * 1e-3,
        video_max_s=_setting(args.video_max_ms, config, "video_max_ms", 12.0, float)
        * 1e-3,
    )
    n_fft = _setting(args.n_fft, config, "n_fft", 512, int)
    tolerance = _setting(args.tolerance, config, "tolerance", 0.10, float)
    top = _setting(args.top, config, "top", 3, int)

    segments = classify_bursts(detect_bursts(x, fs, det_cfg), rules)
    _progress(f"detected {len(segments)} bursts")

    noise_p = _complement_noise_power(x, segments)
    estimates: List[Optional[SnrEstimate]] = []
    for seg in segments:
        try:
            estimates.append(estimate_snr(x, seg, noise_power=noise_p))
        except (InsufficientNoiseError, ValueError):
            estimates.append(None)

    by_class: Dict[str, List[BurstSegment]] = {"fhss": [], "video": []}
    for seg in segments:
        if seg.class_label in by_class:
            by_class[seg.class_label].append(seg)

    center = {
        label: _class_center_freq(x, segs, fs) for label, segs in by_class.items()
    }

    fingerprint = None
    matches: List = []
    if len(by_class["fhss"]) >= 3:
        _progress("extracting fingerprint")
        try:
            fp = extract_fingerprint(rec, segments, StftConfig(n_fft=n_fft))
        except DroneprintError as exc:
            _progress(f"fingerprint extraction failed: {exc}")
        else:
            fingerprint = {
                "fhsbw_mhz": fp.fhsbw_mhz,
                "vtsbw_mhz": fp.vtsbw_mhz,
                "fhsdt_ms": fp.fhsdt_ms,
                "fhsdc_ms": fp.fhsdc_ms,
                "fhspp_ms": fp.fhspp_ms,
            }
            db = FingerprintDb.load(args.db)
            matches = [
                {"drone_type": name, "distance": dist}
                for name, dist in match_fingerprint(fp, db, tolerance)[:top]
            ]

    report = {
        "input": str(args.input),
        "sample_rate_hz": fs,
        "n_samples": rec.n_samples,
        "duration_s": rec.duration_s,
        "noise_power": noise_p,
        "bursts": [
            {
                "start_idx": seg.start_idx,
                "end_idx": seg.end_idx,
                "start_s": seg.start_idx / fs,
                "end_s": seg.end_idx / fs,
                "duration_s": seg.duration_s,
                "class": seg.class_label,
                "snr_db": None
                if est is None or not est.valid
                else est.snr_db,
                "snr_valid": bool(est is not None and est.valid),
            }
            for seg, est in zip(segments, estimates)
        ],
        "class_counts": {
            label: sum(1 for s in segments if s.class_label == label)
            for label in ("fhss", "video", "drone_id", "unknown")
        },
        "center_freq_hz": center,
        "fingerprint": fingerprint,
        "matches": matches,
    }

    if args.segments_out:
        Path(args.segments_out).write_text(
            segments_to_json_lines(segments, estimates), encoding="utf-8"
        )
        _progress(f"wrote segments to {args.segments_out}")

    json.dump(report, sys.stdout, indent=2, sort_keys=True)
    print()
    return 0


# --------------------------------------------------------------- synth


def _fhss_from_spec(d: dict) -> FhssSpec:
    return FhssSpec(
        hop_bw_hz=float(d["hop_bw_hz"]),
        hop_duration_s=float(d["hop_duration_s"]),
        duty_interval_s=float(d["duty_interval_s"]),
        hop_freqs_hz=tuple(float(f) for f in d["hop_freqs_hz"]),
        pattern_period_s=None
        if d.get("pattern_period_s") is None
        else float(d["pattern_period_s"]),
        amplitude=float(d.get("amplitude", 1.0)),
        start_offset_s=float(d.get("start_offset_s", 0.0)),
    )


def _video_from_spec(d: dict) -> VideoSpec:
    return VideoSpec(
        bw_hz=float(d["bw_hz"]),
        center_freq_hz=float(d["center_freq_hz"]),
        duration_set_s=tuple(float(v) for v in d["duration_set_s"]),
        inter_burst_s=float(d["inter_burst_s"]),
        jitter_s=float(d.get("jitter_s", 0.0)),
        amplitude=float(d.get("amplitude", 1.0)),
        start_offset_s=None
        if d.get("start_offset_s") is None
        else float(d["start_offset_s"]),
    )


def cmd_synth(args) -> int:
    config = _config_of(args)
    try:
        spec = json.loads(Path(args.spec).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValueError(f"{args.spec}: invalid JSON: {exc}") from exc

    try:
        fs = float(spec["fs_hz"])
        total_s = float(spec["total_s"])
    except KeyError as exc:
        raise ValueError(f"{args.spec}: missing required key {exc}") from exc
    seed = _setting(args.seed, config, "seed", int(spec.get("seed", 0)), int)

    parts = []
    try:
        if "fhss" in spec:
            parts.append(synth_fhss(_fhss_from_spec(spec["fhss"]), fs, total_s, seed))
        if "video" in spec:
            parts.append(
                synth_video(_video_from_spec(spec["video"]), fs, total_s, seed + 1)
            )
    except (KeyError, TypeError) as exc:
        raise ValueError(f"{args.spec}: bad emitter spec: {exc}") from exc
    if not parts:
        raise ValueError(f"{args.spec}: spec needs an 'fhss' or 'video' section")

    x, truth = combine_scenes(parts)
    truth = SceneTruth(
        segments=truth.segments,
        injected_snr_db=None,
        noise_variance=0.0,
        seed=seed,
    )
    if spec.get("snr_db") is not None:
        x, truth = add_noise_at_snr(x, truth, float(spec["snr_db"]), seed=seed + 2)
        _progress(f"injected noise for {float(spec['snr_db']):.1f} dB in-burst SNR")

    out_dir = _setting(
        args.out_dir, config, "out_dir", Path("."), Path, env_var=ENV_OUT_DIR
    )
    out = Path(args.out) if args.out else out_dir / (Path(args.spec).stem + ".iq")
    out.parent.mkdir(parents=True, exist_ok=True)

    rec = IqRecording(
        samples=x,
        sample_rate_hz=fs,
        center_freq_hz=float(spec.get("center_freq_hz", 0.0)),
    )
    write_iq(rec, out)
    md = RecordingMetadata(
        sample_rate_hz=fs,
        uav_type=str(spec.get("uav_type", "")),
        center_freq_hz=float(spec.get("center_freq_hz", 0.0)),
        source_file=out.name,
    )
    write_metadata_xml(md, out.with_suffix(".xml"))
    truth_path = out.with_suffix(".truth.json")
    truth_path.write_text(
        json.dumps(truth_to_dict(truth), indent=2, sort_keys=True), encoding="utf-8"
    )
    _progress(f"wrote {out}, {out.with_suffix('.xml').name}, {truth_path.name}")
    print(out)
    return 0


# ---------------------------------------------------------------- main


def _add_common(p: argparse.ArgumentParser, with_input: bool = True) -> None:
    if with_input:
        p.add_argument("input", help="IQ file (interleaved fp32 I/Q)")
        p.add_argument(
            "--sample-rate",
            type=float,
            default=None,
            help="sample rate in Hz (overrides any sidecar)",
        )
    p.add_argument("--config", default=None, help="flat KEY=VALUE config file")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="droneprint",
        description="RF burst analysis for drone-link recordings",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("info", help="print a recording summary")
    _add_common(p)
    p.set_defaults(func=cmd_info)

    p = sub.add_parser("spectrogram", help="render a spectrogram image")
    _add_common(p)
    p.add_argument("--out", required=True, help="output image (.png or .ppm)")
    p.add_argument(
        "--n-fft",
        type=int,
        default=None,
        choices=(8, 16, 32, 64, 128, 256, 512, 1024, 2048, 4096),
        help="transform size (default 512)",
    )
    p.add_argument("--hop", type=int, default=None, help="hop length (default n_fft/2)")
    p.add_argument(
        "--cmap",
        type=str.lower,
        default=None,
        choices=sorted(COLORMAPS),
        help="color map (default parula)",
    )
    p.add_argument("--db-floor", type=float, default=None)
    p.add_argument("--db-ceil", type=float, default=None)
    p.add_argument(
        "--streaming",
        action="store_true",
        help="chunked pipeline; requires explicit --db-floor/--db-ceil",
    )
    p.add_argument(
        "--chunk-len", type=int, default=None, help="streaming chunk size in samples"
    )
    p.set_defaults(func=cmd_spectrogram)

    p = sub.add_parser("adjust-snr", help="write SNR-adjusted copies of a recording")
    _add_common(p)
    p.add_argument(
        "--targets", default=None, help="LO:HI:STEP in dB (default -20:20:2)"
    )
    p.add_argument(
        "--segment",
        default=None,
        help="signal segment as START:END samples (default: auto-detect)",
    )
    p.add_argument(
        "--measured-snr",
        type=float,
        default=None,
        help="known in-segment SNR in dB (default: estimate)",
    )
    p.add_argument("--seed", type=int, default=None, help="noise seed (default 0)")
    p.add_argument("--out-dir", type=Path, default=None, help="output directory")
    p.set_defaults(func=cmd_adjust_snr)

    p = sub.add_parser("analyze", help="detect, classify, and fingerprint bursts")
    _add_common(p)
    p.add_argument("--n-fft", type=int, default=None, help="fingerprint STFT size")
    p.add_argument("--short-win", type=int, default=None, help="detector short window")
    p.add_argument("--long-win", type=int, default=None, help="detector long window")
    p.add_argument(
        "--threshold-ratio", type=float, default=None, help="detector power ratio"
    )
    p.add_argument("--min-gap", type=int, default=None, help="merge gap in samples")
    p.add_argument(
        "--min-duration", type=int, default=None, help="min burst length in samples"
    )
    p.add_argument(
        "--fhss-max-ms",
        type=float,
        default=None,
        help="upper duration bound for the hopping class (default 1.5)",
    )
    p.add_argument(
        "--video-max-ms",
        type=float,
        default=None,
        help="upper duration bound for the video class (default 12)",
    )
    p.add_argument(
        "--tolerance",
        type=float,
        default=None,
        help="relative match tolerance (default 0.10)",
    )
    p.add_argument("--top", type=int, default=None, help="matches to report (default 3)")
    p.add_argument(
        "--db", default=None, help="reference fingerprint CSV (default: shipped table)"
    )
    p.add_argument(
        "--segments-out", default=None, help="also write segments as JSON lines"
    )
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("synth", help="generate a scene from a JSON spec")
    p.add_argument("spec", help="scene spec JSON file")
    p.add_argument("--config", default=None, help="flat KEY=VALUE config file")
    p.add_argument("--out", default=None, help="output IQ path (default: spec stem)")
    p.add_argument("--out-dir", type=Path, default=None, help="output directory")
    p.add_argument(
        "--seed", type=int, default=None, help="override the spec's seed"
    )
    p.set_defaults(func=cmd_synth)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (DroneprintError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # unexpected; keep the contract's exit code
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
