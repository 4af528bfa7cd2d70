"""Interleaved fp32 IQ file I/O, XML metadata sidecars, chunked streaming.

Recordings are stored as a flat sequence of little-endian float32 words,
interleaved I,Q,I,Q,...  A recording of N complex samples is therefore
exactly 8*N bytes.  An optional XML sidecar named ``<stem>.xml`` next to
``<stem>.iq`` carries acquisition metadata.
"""

from __future__ import annotations

import os
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Optional, Union

import numpy as np

from .errors import (
    MalformedRecordingError,
    MetadataParseError,
    MetadataSchemaError,
)

BYTES_PER_SAMPLE = 8  # one float32 I word plus one float32 Q word

# Documented sidecar schema: a flat <recording> element with these children.
_SIDECAR_TAGS = frozenset(
    {"uav_type", "sample_rate_hz", "center_freq_hz", "gain_db", "source_file"}
)
_SIDECAR_NUMERIC_TAGS = frozenset({"sample_rate_hz", "center_freq_hz", "gain_db"})

PathLike = Union[str, os.PathLike]


@dataclass
class RecordingMetadata:
    """Acquisition metadata carried by an XML sidecar.

    ``sample_rate_hz`` is the only mandatory field when parsing; all other
    fields default to empty/absent.
    """

    sample_rate_hz: float
    uav_type: str = ""
    center_freq_hz: Optional[float] = None
    gain_db: Optional[float] = None
    source_file: str = ""


@dataclass
class IqRecording:
    """A materialized complex-baseband recording.

    Samples are held as complex64 to mirror the on-disk fp32 I/Q layout,
    so write/read round trips are sample-exact.  Treat instances as
    immutable; derived recordings are new objects.
    """

    samples: np.ndarray
    sample_rate_hz: float = 1.0
    center_freq_hz: float = 0.0
    metadata: Optional[RecordingMetadata] = None

    def __post_init__(self) -> None:
        self.samples = np.asarray(self.samples, dtype=np.complex64)
        if self.samples.ndim != 1:
            raise ValueError("samples must be a 1-D complex array")
        if not self.sample_rate_hz > 0:
            raise ValueError(f"sample_rate_hz must be > 0, got {self.sample_rate_hz}")
        if self.center_freq_hz < 0:
            raise ValueError(f"center_freq_hz must be >= 0, got {self.center_freq_hz}")

    @property
    def n_samples(self) -> int:
        return int(self.samples.shape[0])

    @property
    def duration_s(self) -> float:
        return self.n_samples / self.sample_rate_hz


def _sidecar_path(iq_path: Path) -> Path:
    return iq_path.with_suffix(".xml")


def read_iq(
    path: PathLike,
    byte_order: str = "little",
    sample_rate_hz: Optional[float] = None,
    center_freq_hz: Optional[float] = None,
    load_sidecar: bool = True,
) -> IqRecording:
    """Read an interleaved fp32 IQ file into an IqRecording.

    Args:
        path: IQ file to read.
        byte_order: "little" (default) or "big" for foreign captures.
        sample_rate_hz: overrides any sidecar value when given.
        center_freq_hz: overrides any sidecar value when given.
        load_sidecar: look for ``<stem>.xml`` next to the file and attach
            its metadata when present.

    Raises:
        MalformedRecordingError: file size is not a multiple of 8 bytes.
        OSError: the path cannot be read.

    NaN/Inf words are passed through untouched; downstream consumers that
    need finite samples reject them explicitly.
    """
    p = Path(path)
    size = p.stat().st_size
    if size % BYTES_PER_SAMPLE != 0:
        raise MalformedRecordingError(
            f"{p}: size {size} is not a multiple of {BYTES_PER_SAMPLE} bytes"
        )
    if byte_order == "little":
        dtype = "<f4"
    elif byte_order == "big":
        dtype = ">f4"
    else:
        raise ValueError(f"byte_order must be 'little' or 'big', got {byte_order!r}")

    words = np.fromfile(p, dtype=dtype).astype(np.float32)
    samples = np.empty(words.shape[0] // 2, dtype=np.complex64)
    samples.real = words[0::2]
    samples.imag = words[1::2]

    metadata = None
    if load_sidecar:
        sc = _sidecar_path(p)
        if sc.is_file():
            metadata = parse_metadata_xml(sc)

    rate = sample_rate_hz
    if rate is None and metadata is not None:
        rate = metadata.sample_rate_hz
    center = center_freq_hz
    if center is None and metadata is not None and metadata.center_freq_hz is not None:
        center = metadata.center_freq_hz

    return IqRecording(
        samples=samples,
        sample_rate_hz=rate if rate is not None else 1.0,
        center_freq_hz=center if center is not None else 0.0,
        metadata=metadata,
    )


def write_iq(rec: IqRecording, path: PathLike, byte_order: str = "little") -> None:
    """Write a recording as interleaved fp32 words."""
    if byte_order == "little":
        dtype = "<f4"
    elif byte_order == "big":
        dtype = ">f4"
    else:
        raise ValueError(f"byte_order must be 'little' or 'big', got {byte_order!r}")
    words = np.empty(rec.n_samples * 2, dtype=np.float32)
    words[0::2] = rec.samples.real
    words[1::2] = rec.samples.imag
    words.astype(dtype).tofile(Path(path))


def parse_metadata_xml(path: PathLike) -> RecordingMetadata:
    """Parse a metadata sidecar.

    The schema is a flat ``<recording>`` element whose children are drawn
    from {uav_type, sample_rate_hz, center_freq_hz, gain_db, source_file},
    with sample_rate_hz mandatory.  Anything else is rejected.

    Raises:
        MetadataParseError: not well-formed XML.
        MetadataSchemaError: well-formed but off-schema.
    """
    try:
        tree = ET.parse(Path(path))
    except ET.ParseError as e:
        raise MetadataParseError(f"{path}: {e}") from e
    root = tree.getroot()
    if root.tag != "recording":
        raise MetadataSchemaError(
            f"{path}: root element must be <recording>, got <{root.tag}>"
        )
    values: dict[str, str] = {}
    for child in root:
        if child.tag not in _SIDECAR_TAGS:
            raise MetadataSchemaError(f"{path}: unknown element <{child.tag}>")
        if child.tag in values:
            raise MetadataSchemaError(f"{path}: duplicate element <{child.tag}>")
        values[child.tag] = (child.text or "").strip()

    if "sample_rate_hz" not in values:
        raise MetadataSchemaError(f"{path}: missing mandatory <sample_rate_hz>")

    def _num(tag: str) -> Optional[float]:
        raw = values.get(tag)
        if raw is None or raw == "":
            return None
        try:
            return float(raw)
        except ValueError as e:
            raise MetadataSchemaError(f"{path}: <{tag}> is not a number: {raw!r}") from e

    rate = _num("sample_rate_hz")
    if rate is None or not rate > 0:
        raise MetadataSchemaError(f"{path}: <sample_rate_hz> must be a positive number")
    return RecordingMetadata(
        sample_rate_hz=rate,
        uav_type=values.get("uav_type", ""),
        center_freq_hz=_num("center_freq_hz"),
        gain_db=_num("gain_db"),
        source_file=values.get("source_file", ""),
    )


def write_metadata_xml(md: RecordingMetadata, path: PathLike) -> None:
    """Write a metadata sidecar in the documented schema."""
    root = ET.Element("recording")

    def _add(tag: str, value) -> None:
        if value is None or value == "":
            return
        el = ET.SubElement(root, tag)
        el.text = repr(value) if isinstance(value, float) else str(value)

    _add("uav_type", md.uav_type)
    _add("sample_rate_hz", float(md.sample_rate_hz))
    if md.center_freq_hz is not None:
        _add("center_freq_hz", float(md.center_freq_hz))
    if md.gain_db is not None:
        _add("gain_db", float(md.gain_db))
    _add("source_file", md.source_file)
    ET.indent(root)
    ET.ElementTree(root).write(Path(path), encoding="unicode")


def chunk_stream(
    source: Union[IqRecording, np.ndarray, PathLike],
    chunk_len: int,
    byte_order: str = "little",
) -> Iterator[np.ndarray]:
    """Yield consecutive sample blocks of at most chunk_len samples.

    Accepts a materialized recording/array, or a path that is read
    incrementally without loading the whole file (total length is never
    needed up front).  The final block may be shorter.
    """
    if chunk_len < 1:
        raise ValueError(f"chunk_len must be >= 1, got {chunk_len}")
    if isinstance(source, IqRecording):
        data = source.samples
    elif isinstance(source, np.ndarray):
        data = source
    else:
        yield from _chunks_from_file(Path(source), chunk_len, byte_order)
        return
    for off in range(0, len(data), chunk_len):
        yield data[off : off + chunk_len]


def _chunks_from_file(path: Path, chunk_len: int, byte_order: str) -> Iterator[np.ndarray]:
    size = path.stat().st_size
    if size % BYTES_PER_SAMPLE != 0:
        raise MalformedRecordingError(
            f"{path}: size {size} is not a multiple of {BYTES_PER_SAMPLE} bytes"
        )
    dtype = "<f4" if byte_order == "little" else ">f4"
    with open(path, "rb") as fh:
        while True:
            raw = fh.read(chunk_len * BYTES_PER_SAMPLE)
            if not raw:
                return
            words = np.frombuffer(raw, dtype=dtype).astype(np.float32)
            block = np.empty(words.shape[0] // 2, dtype=np.complex64)
            block.real = words[0::2]
            block.imag = words[1::2]
            yield block
