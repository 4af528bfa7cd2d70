"""RF fingerprint extraction and matching against the reference table.

A fingerprint is the quintuple (fhsbw, vtsbw, fhsdt, fhsdc, fhspp):
hopping-burst bandwidth, video bandwidth, hop duration, duty-cycle
interval, and hopping-pattern period.  vtsbw and fhspp are optional;
an absent fhspp means the emitter hops aperiodically.
"""

from __future__ import annotations

import csv
import math
import statistics
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from .dsp import StftConfig, StftMatrix, stft
from .errors import AnomalousFingerprintError, InsufficientDataError
from .iq_io import IqRecording
from .snr import BurstSegment

_REFERENCE_CSV = "reference_fingerprints.csv"

# Column headers of the shipped reference table, in file order.
_CSV_COLUMNS = (
    "Type of UAV",
    "FHSBW (MHz)",
    "VTSBW (MHz)",
    "FHSDT (ms)",
    "FHSDC (ms)",
    "FHSPP (ms)",
    "File Size (GB)",
    "SNR (dB)",
    "MF (GHz)",
)

_MATCH_FIELDS = ("fhsbw_mhz", "vtsbw_mhz", "fhsdt_ms", "fhsdc_ms", "fhspp_ms")
DEFAULT_MATCH_TOLERANCE = 0.10


@dataclass(frozen=True)
class RfFingerprint:
    """A measured fingerprint.

    Raises AnomalousFingerprintError when fhsdt_ms exceeds fhsdc_ms: a hop
    cannot outlast the interval between hop starts.
    """

    fhsbw_mhz: float
    fhsdt_ms: float
    fhsdc_ms: float
    vtsbw_mhz: Optional[float] = None
    fhspp_ms: Optional[float] = None

    def __post_init__(self) -> None:
        for name in ("fhsbw_mhz", "fhsdt_ms", "fhsdc_ms"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        if self.vtsbw_mhz is not None and not self.vtsbw_mhz > 0:
            raise ValueError("vtsbw_mhz must be > 0 when present")
        if self.fhspp_ms is not None and not self.fhspp_ms > 0:
            raise ValueError("fhspp_ms must be > 0 when present")
        if self.fhsdt_ms > self.fhsdc_ms:
            raise AnomalousFingerprintError(
                f"hop duration {self.fhsdt_ms} ms exceeds duty-cycle interval "
                f"{self.fhsdc_ms} ms"
            )


@dataclass(frozen=True)
class FingerprintEntry:
    """One reference-table row.

    flagged marks rows whose tabulated values violate the fhsdt <= fhsdc
    invariant; they load and participate in matching as recorded, but are
    physically inconsistent under the duty-cycle reading of fhsdc.
    """

    drone_type: str
    fhsbw_mhz: float
    vtsbw_mhz: Optional[float]
    fhsdt_ms: float
    fhsdc_ms: float
    fhspp_ms: Optional[float]
    file_size_gb: float
    snr_db: float
    center_freq_ghz: float

    @property
    def flagged(self) -> bool:
        return self.fhsdt_ms > self.fhsdc_ms


class FingerprintDb:
    """Reference fingerprint database keyed by drone type."""

    def __init__(self, entries: Sequence[FingerprintEntry]):
        self._entries: Dict[str, FingerprintEntry] = {}
        for e in entries:
            if e.drone_type in self._entries:
                raise ValueError(f"duplicate drone type {e.drone_type!r}")
            self._entries[e.drone_type] = e

    def __len__(self) -> int:
        return len(self._entries)

    def __getitem__(self, drone_type: str) -> FingerprintEntry:
        return self._entries[drone_type]

    def __contains__(self, drone_type: str) -> bool:
        return drone_type in self._entries

    def __iter__(self):
        return iter(self._entries.values())

    @classmethod
    def load(cls, path: Optional[Union[str, Path]] = None) -> "FingerprintDb":
        """Load the shipped reference CSV, or one in the same format."""
        if path is None:
            ref = resources.files("droneprint").joinpath("data", _REFERENCE_CSV)
            with ref.open("r", encoding="utf-8") as fh:
                return cls._from_csv(fh)
        with open(path, "r", encoding="utf-8") as fh:
            return cls._from_csv(fh)

    @classmethod
    def _from_csv(cls, fh) -> "FingerprintDb":
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(h.strip() for h in header) != _CSV_COLUMNS:
            raise ValueError(f"unexpected reference CSV header: {header}")

        def _opt(cell: str) -> Optional[float]:
            cell = cell.strip()
            return None if cell in ("-", "") else float(cell)

        entries = []
        for row in reader:
            if not row or all(not c.strip() for c in row):
                continue
            entries.append(
                FingerprintEntry(
                    drone_type=row[0].strip(),
                    fhsbw_mhz=float(row[1]),
                    vtsbw_mhz=_opt(row[2]),
                    fhsdt_ms=float(row[3]),
                    fhsdc_ms=float(row[4]),
                    fhspp_ms=_opt(row[5]),
                    file_size_gb=float(row[6]),
                    snr_db=float(row[7]),
                    center_freq_ghz=float(row[8]),
                )
            )
        return cls(entries)


def _segment_spectrum(
    x: np.ndarray, seg: BurstSegment, cfg: StftConfig, fs: float
) -> Tuple[np.ndarray, np.ndarray]:
    """Mean power spectrum over the frames inside a segment.

    Computes a local transform of just the segment's samples, so whole-
    recording STFTs are never materialized.  Returns (freqs_hz, power).
    """
    if seg.n_samples < cfg.n_fft:
        raise InsufficientDataError(
            f"segment of {seg.n_samples} samples shorter than n_fft {cfg.n_fft}"
        )
    m = stft(x[seg.start_idx : seg.end_idx], cfg, fs)
    power = np.mean(np.abs(m.frames) ** 2, axis=0)
    return m.freqs_hz, power


def _occupied_span_bins(power: np.ndarray, power_fraction: float) -> Tuple[int, int]:
    """Smallest contiguous [lo, hi] bin span holding power_fraction of the
    floor-subtracted power."""
    floor = float(np.median(power))
    resid = np.clip(power - floor, 0.0, None)
    total = float(resid.sum())
    if total <= 0.0:
        raise InsufficientDataError("no power above the spectral floor")
    need = power_fraction * total
    csum = np.concatenate(([0.0], np.cumsum(resid)))
    best = (0, len(power) - 1)
    best_len = len(power)
    j = 0
    for i in range(len(power)):
        if j < i + 1:
            j = i + 1
        while j <= len(power) and csum[j] - csum[i] < need:
            j += 1
        if j > len(power):
            break
        if j - i < best_len:
            best_len = j - i
            best = (i, j - 1)
    return best


def occupied_bandwidth(
    seg: BurstSegment,
    m: StftMatrix,
    power_fraction: float = 0.99,
) -> float:
    """Occupied bandwidth of one burst from an STFT of its recording.

    Averages |X|^2 over the frames lying fully inside the segment
    (falling back to overlapping frames for short bursts), subtracts the
    median spectral floor, and returns the width in Hz of the smallest
    contiguous span holding power_fraction of what remains.
    """
    if not 0 < power_fraction <= 1:
        raise ValueError(f"power_fraction must be in (0, 1], got {power_fraction}")
    hop, n_fft = m.hop_len, m.n_fft
    m_lo = math.ceil(seg.start_idx / hop)
    m_hi = (seg.end_idx - n_fft) // hop
    if m_lo > m_hi:
        # fall back to any overlap
        m_lo = max(0, (seg.start_idx - n_fft) // hop + 1)
        m_hi = (seg.end_idx - 1) // hop
    m_lo = max(0, m_lo)
    m_hi = min(m.n_frames - 1, m_hi)
    if m_lo > m_hi:
        raise InsufficientDataError("segment overlaps no STFT frames")
    power = np.mean(np.abs(m.frames[m_lo : m_hi + 1]) ** 2, axis=0)
    lo, hi = _occupied_span_bins(power, power_fraction)
    return (hi - lo + 1) * m.freq_resolution_hz


def estimate_period(
    start_times_s: Sequence[float],
    rel_tol: float = 0.03,
    min_match_fraction: float = 0.75,
    min_matches: int = 3,
) -> Optional[float]:
    """Period of an event train, or None when it is aperiodic.

    Candidate lags are clustered pairwise differences, scanned in
    ascending order.  A lag qualifies when at least min_match_fraction of
    the events that could have a partner one lag later actually do (within
    rel_tol of the lag), with at least min_matches such pairs.  The first
    qualifying lag, refined as the mean of its matched differences, is the
    period; this picks the full pattern period, not an intra-pattern
    spacing, because partial alignments match too few events.

    Raises InsufficientDataError for fewer than 4 events and ValueError
    when start times are not strictly increasing.
    """
    t = np.asarray(list(start_times_s), dtype=np.float64)
    if t.size < 4:
        raise InsufficientDataError(f"need >= 4 start times, got {t.size}")
    if not np.all(np.diff(t) > 0):
        raise ValueError("start times must be strictly increasing")

    diffs = (t[None, :] - t[:, None])[np.triu_indices(t.size, k=1)]
    diffs.sort()

    # Cluster near-equal differences into candidate lags.
    candidates = []
    cluster_start = 0
    for i in range(1, diffs.size + 1):
        if i == diffs.size or diffs[i] > diffs[cluster_start] * (1.0 + 2.0 * rel_tol):
            candidates.append(float(diffs[cluster_start:i].mean()))
            cluster_start = i

    for cand in candidates:
        tol = rel_tol * cand
        eligible = t[t + cand <= t[-1] + tol]
        if eligible.size < min_matches:
            continue
        targets = eligible + cand
        pos = np.searchsorted(t, targets)
        # One-to-one assignment, closest pairs first: a recurrence means
        # each event reappears as a distinct later event, so two eligible
        # events may not claim the same partner.
        proposals = []
        for k, target in enumerate(targets):
            for j in (pos[k] - 1, pos[k]):
                if 0 <= j < t.size and abs(t[j] - target) <= tol:
                    proposals.append((abs(t[j] - target), k, j))
        proposals.sort()
        used_k, used_j = set(), set()
        matched_diffs = []
        for _, k, j in proposals:
            if k in used_k or j in used_j:
                continue
            used_k.add(k)
            used_j.add(j)
            matched_diffs.append(t[j] - eligible[k])
        if (
            len(matched_diffs) >= min_matches
            and len(matched_diffs) / eligible.size >= min_match_fraction
        ):
            return float(np.mean(matched_diffs))
    return None


def _cluster_1d(values: np.ndarray, gap: float) -> List[np.ndarray]:
    """Split sorted positions of `values` into groups separated by > gap."""
    order = np.argsort(values)
    svals = values[order]
    groups = []
    start = 0
    for i in range(1, svals.size + 1):
        if i == svals.size or svals[i] - svals[i - 1] > gap:
            groups.append(order[start:i])
            start = i
    return groups


def extract_fingerprint(
    rec: IqRecording,
    segments: Sequence[BurstSegment],
    stft_cfg: Optional[StftConfig] = None,
    power_fraction: float = 0.99,
    cluster_gap_hz: Optional[float] = None,
) -> RfFingerprint:
    """Measure a fingerprint from classified burst segments.

    fhsdt/fhsdc are medians of fhss-class durations and inter-start
    intervals.  Bandwidths are per-class medians of occupied bandwidth.
    fhspp comes from the recurrence period of bursts grouped by hop
    frequency: each group with enough visits votes a period (or None), and
    the hop-pattern period is the median vote when at least half the
    voting groups found one that agrees; otherwise the pattern is
    aperiodic and fhspp is absent.  Grouping uses the per-burst in-band
    power centroids, split at gaps larger than cluster_gap_hz (default 4
    frequency bins).

    Requires at least 3 fhss-class segments.
    """
    if stft_cfg is None:
        stft_cfg = StftConfig(n_fft=512)
    fs = rec.sample_rate_hz
    x = rec.samples
    fhss = sorted(
        (s for s in segments if s.class_label == "fhss"), key=lambda s: s.start_idx
    )
    video = sorted(
        (s for s in segments if s.class_label == "video"), key=lambda s: s.start_idx
    )
    if len(fhss) < 3:
        raise InsufficientDataError(
            f"need >= 3 fhss-class segments, got {len(fhss)}"
        )

    fhsdt_s = statistics.median(s.duration_s for s in fhss)
    starts_s = np.array([s.start_idx for s in fhss], dtype=np.float64) / fs
    fhsdc_s = float(np.median(np.diff(starts_s)))

    widths = []
    centers = []
    for s in fhss:
        freqs, power = _segment_spectrum(x, s, stft_cfg, fs)
        lo, hi = _occupied_span_bins(power, power_fraction)
        widths.append((hi - lo + 1) * (fs / stft_cfg.n_fft))
        inband = power[lo : hi + 1]
        centers.append(float(np.sum(freqs[lo : hi + 1] * inband) / np.sum(inband)))
    fhsbw_hz = statistics.median(widths)

    vtsbw_hz = None
    if video:
        vwidths = []
        for s in video:
            _, power = _segment_spectrum(x, s, stft_cfg, fs)
            lo, hi = _occupied_span_bins(power, power_fraction)
            vwidths.append((hi - lo + 1) * (fs / stft_cfg.n_fft))
        vtsbw_hz = statistics.median(vwidths)

    if cluster_gap_hz is None:
        cluster_gap_hz = 4.0 * fs / stft_cfg.n_fft
    groups = _cluster_1d(np.asarray(centers), cluster_gap_hz)
    votes: List[Optional[float]] = []
    for g in groups:
        if g.size < 4:
            continue
        g_starts = np.sort(starts_s[g])
        try:
            votes.append(estimate_period(g_starts))
        except (InsufficientDataError, ValueError):
            continue
    fhspp_s = _period_consensus(votes)

    return RfFingerprint(
        fhsbw_mhz=fhsbw_hz / 1e6,
        fhsdt_ms=fhsdt_s * 1e3,
        fhsdc_ms=fhsdc_s * 1e3,
        vtsbw_mhz=None if vtsbw_hz is None else vtsbw_hz / 1e6,
        fhspp_ms=None if fhspp_s is None else fhspp_s * 1e3,
    )


def _period_consensus(votes: Sequence[Optional[float]], spread_tol: float = 0.05) -> Optional[float]:
    """Median of per-group period votes, when a majority found one and the
    found periods agree within spread_tol relative."""
    if not votes:
        return None
    found = [v for v in votes if v is not None]
    if len(found) * 2 < len(votes):
        return None
    med = statistics.median(found)
    if any(abs(v - med) > spread_tol * med for v in found):
        return None
    return float(med)


def match_fingerprint(
    fp: RfFingerprint,
    db: FingerprintDb,
    tolerances: Union[float, Mapping[str, float]] = DEFAULT_MATCH_TOLERANCE,
) -> List[Tuple[str, float]]:
    """Rank reference entries against a measured fingerprint.

    An entry is a candidate when every comparable field deviates from the
    entry by at most its relative tolerance.  fhspp presence must agree on
    both sides (an aperiodic emitter never matches a periodic entry, or
    vice versa); vtsbw compares only when both sides carry it.  Candidates
    come back ordered by the root-mean-square relative deviation over the
    compared fields.
    """
    if isinstance(tolerances, Mapping):
        tol = {f: float(tolerances.get(f, DEFAULT_MATCH_TOLERANCE)) for f in _MATCH_FIELDS}
    else:
        tol = {f: float(tolerances) for f in _MATCH_FIELDS}

    ranked = []
    for entry in db:
        if (fp.fhspp_ms is None) != (entry.fhspp_ms is None):
            continue
        devs = []
        ok = True
        for name in _MATCH_FIELDS:
            q = getattr(fp, name)
            e = getattr(entry, name)
            if q is None or e is None:
                continue
            dev = abs(q - e) / abs(e)
            if dev > tol[name]:
                ok = False
                break
            devs.append(dev)
        if not ok or not devs:
            continue
        ranked.append((entry.drone_type, float(np.sqrt(np.mean(np.square(devs))))))
    ranked.sort(key=lambda pair: (pair[1], pair[0]))
    return ranked


@dataclass
class DurationCluster:
    """One mode of a burst-duration distribution."""

    center_s: float
    spread_s: float
    count: int


def measure_video_durations(
    segments: Sequence[BurstSegment], cluster_gap_s: float = 2e-4
) -> List[DurationCluster]:
    """Cluster video-burst durations into modes.

    Sorts durations and splits wherever neighbors differ by more than
    cluster_gap_s; each cluster reports its mean, standard deviation, and
    member count.  Requires at least 10 video-class segments.
    """
    durations = np.array(
        [s.duration_s for s in segments if s.class_label == "video"], dtype=np.float64
    )
    if durations.size < 10:
        raise InsufficientDataError(
            f"need >= 10 video-class segments, got {durations.size}"
        )
    clusters = []
    for idx in _cluster_1d(durations, cluster_gap_s):
        vals = durations[idx]
        spread = float(vals.std(ddof=0)) if vals.size > 1 else 0.0
        clusters.append(DurationCluster(float(vals.mean()), spread, int(vals.size)))
    clusters.sort(key=lambda c: c.center_s)
    return clusters
