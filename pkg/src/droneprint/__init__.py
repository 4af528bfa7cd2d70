"""droneprint: burst detection, SNR tooling, and RF fingerprinting for
complex-baseband recordings of drone control/video links."""

from .dsp import (
    PsdEstimate,
    StftConfig,
    StftMatrix,
    WindowSpec,
    add_complex_awgn,
    freq_resolution,
    hamming_window,
    stft,
    welch_psd,
)
from .errors import (
    AnomalousFingerprintError,
    CannotRaiseSnrError,
    DroneprintError,
    InsufficientDataError,
    InsufficientNoiseError,
    InvalidSampleError,
    MalformedRecordingError,
    MetadataError,
    MetadataParseError,
    MetadataSchemaError,
)
from .fingerprint import (
    DurationCluster,
    FingerprintDb,
    FingerprintEntry,
    RfFingerprint,
    estimate_period,
    extract_fingerprint,
    match_fingerprint,
    measure_video_durations,
    occupied_bandwidth,
)
from .iq_io import (
    BYTES_PER_SAMPLE,
    IqRecording,
    RecordingMetadata,
    chunk_stream,
    parse_metadata_xml,
    read_iq,
    write_iq,
    write_metadata_xml,
)
from .snr import (
    BurstSegment,
    ClassRules,
    DetectorConfig,
    SnrEstimate,
    adjust_snr_awgn,
    classify_bursts,
    detect_bursts,
    estimate_center_frequency,
    estimate_snr,
    segments_to_json_lines,
    snr_sweep,
)
from .spectrogram import (
    COLORMAPS,
    CmapSpec,
    SpectrogramImage,
    StreamingSpectrogram,
    cmap_lookup,
    get_cmap,
    magnitude_db,
    render_spectrogram,
    save_png,
    save_ppm,
    spectrogram_image,
    streaming_spectrogram,
)
from .synth import (
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

__version__ = "0.1.0"

__all__ = [
    "AnomalousFingerprintError",
    "BYTES_PER_SAMPLE",
    "BurstSegment",
    "CannotRaiseSnrError",
    "ClassRules",
    "CmapSpec",
    "COLORMAPS",
    "DetectorConfig",
    "DroneprintError",
    "DurationCluster",
    "FhssSpec",
    "FingerprintDb",
    "FingerprintEntry",
    "InsufficientDataError",
    "InsufficientNoiseError",
    "InvalidSampleError",
    "IqRecording",
    "MalformedRecordingError",
    "MetadataError",
    "MetadataParseError",
    "MetadataSchemaError",
    "PsdEstimate",
    "RecordingMetadata",
    "RfFingerprint",
    "SceneTruth",
    "SnrEstimate",
    "SpectrogramImage",
    "StftConfig",
    "StftMatrix",
    "StreamingSpectrogram",
    "VideoSpec",
    "WindowSpec",
    "add_complex_awgn",
    "add_noise_at_snr",
    "adjust_snr_awgn",
    "chunk_stream",
    "classify_bursts",
    "cmap_lookup",
    "combine_scenes",
    "detect_bursts",
    "estimate_center_frequency",
    "estimate_period",
    "estimate_snr",
    "extract_fingerprint",
    "freq_resolution",
    "get_cmap",
    "hamming_window",
    "magnitude_db",
    "match_fingerprint",
    "measure_video_durations",
    "occupied_bandwidth",
    "parse_metadata_xml",
    "plan_hop_frequencies",
    "read_iq",
    "render_spectrogram",
    "save_png",
    "save_ppm",
    "segments_to_json_lines",
    "snr_sweep",
    "spectrogram_image",
    "stft",
    "streaming_spectrogram",
    "synth_fhss",
    "synth_video",
    "truth_from_dict",
    "truth_to_dict",
    "welch_psd",
    "write_iq",
    "write_metadata_xml",
]
