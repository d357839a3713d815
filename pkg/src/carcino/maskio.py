"""Bit-exact raster and manifest I/O.

This is the ingestion boundary between an external segmentation model
and the scoring engine. Confidence maps and label masks travel in a
minimal binary container ("MSK1") instead of an image codec so that
float confidences survive untouched: thresholding at e.g. 0.70 must not
be perturbed by quantization.

MSK1 byte layout (little-endian):

    offset  size  field
    0       4     magic, b"MSK1"
    4       4     width,  uint32
    8       4     height, uint32
    12      1     channels, uint8
    13      1     dtype code, uint8 (0 = uint8 labels, 1 = float32 confidence)
    14      ...   payload, channel-planar, row-major, exactly
                  width * height * channels * itemsize bytes

Confidence payloads must lie in [0, 1]. Label payloads must lie in
{0..8}: 0 is background, 1..8 is the organ code + 1; binary masks use
{0, 1}. Violations are rejected, never clamped.

A video manifest is one JSON document listing the per-frame raster
paths (relative to the manifest's own directory), the per-frame ROI
relevance score, and optionally the clinical ground truth for the video.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import BinaryIO

import numpy as np

from .core import Indication, STATION_SLUGS
from .errors import (
    BadMagicError,
    ChannelCountMismatchError,
    ConfidenceOutOfRangeError,
    DimensionMismatchError,
    GroundTruthInconsistentError,
    LabelOutOfRangeError,
    ManifestError,
    ManifestSyntaxError,
    MaskFormatError,
    MissingFieldError,
    RasterInvariantError,
    TruncatedPayloadError,
    UnknownDtypeError,
)

__all__ = [
    "MAGIC",
    "DTYPE_LABEL",
    "DTYPE_CONFIDENCE",
    "HEADER_SIZE",
    "write_raster",
    "read_raster",
    "encode_raster",
    "decode_raster",
    "ConfidenceFrame",
    "FrameRecord",
    "VideoGroundTruth",
    "VideoManifest",
    "load_manifest",
    "save_manifest",
    "manifest_from_dict",
    "manifest_to_dict",
    "load_frame",
    "canonical_json",
]

MAGIC = b"MSK1"
DTYPE_LABEL = 0
DTYPE_CONFIDENCE = 1
MAX_LABEL = 8

_HEADER = struct.Struct("<4sIIBB")
HEADER_SIZE = _HEADER.size  # 14 bytes

_NUMPY_DTYPES = {DTYPE_LABEL: np.dtype("u1"), DTYPE_CONFIDENCE: np.dtype("<f4")}


def _dtype_code_of(arr: np.ndarray) -> int:
    if arr.dtype == np.uint8:
        return DTYPE_LABEL
    if arr.dtype == np.float32:
        return DTYPE_CONFIDENCE
    raise RasterInvariantError(
        f"raster dtype must be uint8 (labels) or float32 (confidence), got {arr.dtype}"
    )


def _validate_values(arr: np.ndarray, dtype_code: int, context: str = "") -> None:
    where = f" in {context}" if context else ""
    if dtype_code == DTYPE_CONFIDENCE:
        if not np.isfinite(arr).all():
            raise ConfidenceOutOfRangeError(f"non-finite confidence value{where}")
        if (arr < 0.0).any() or (arr > 1.0).any():
            raise ConfidenceOutOfRangeError(f"confidence value outside [0, 1]{where}")
    else:
        if (arr > MAX_LABEL).any():
            raise LabelOutOfRangeError(f"label value above {MAX_LABEL}{where}")


def _validate_array(arr: np.ndarray) -> int:
    if not isinstance(arr, np.ndarray) or arr.ndim != 3:
        raise RasterInvariantError("raster must be a (channels, height, width) array")
    channels, height, width = arr.shape
    if channels < 1 or height < 1 or width < 1:
        raise RasterInvariantError("raster dimensions must all be >= 1")
    if channels > 255:
        raise RasterInvariantError("raster channel count must fit in uint8")
    code = _dtype_code_of(arr)
    _validate_values(arr, code)
    return code


def encode_raster(arr: np.ndarray) -> bytes:
    """Serialize a (channels, height, width) array to MSK1 bytes."""
    code = _validate_array(arr)
    channels, height, width = arr.shape
    header = _HEADER.pack(MAGIC, width, height, channels, code)
    payload = np.ascontiguousarray(arr.astype(_NUMPY_DTYPES[code], copy=False)).tobytes()
    return header + payload


def write_raster(arr: np.ndarray, dest: str | Path | BinaryIO) -> int:
    """Write an array as an MSK1 file; returns the byte count written.

    Invariant violations raise before anything is written.
    """
    blob = encode_raster(arr)
    if hasattr(dest, "write"):
        dest.write(blob)
    else:
        Path(dest).write_bytes(blob)
    return len(blob)


def decode_raster(blob: bytes, context: str = "") -> np.ndarray:
    """Parse MSK1 bytes into a (channels, height, width) array."""
    where = f" in {context}" if context else ""
    if len(blob) < HEADER_SIZE:
        raise TruncatedPayloadError(f"file shorter than the {HEADER_SIZE}-byte header{where}")
    magic, width, height, channels, code = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise BadMagicError(f"bad magic {magic!r}{where}")
    if code not in _NUMPY_DTYPES:
        raise UnknownDtypeError(f"unknown dtype code {code}{where}")
    if width < 1 or height < 1 or channels < 1:
        raise MaskFormatError(f"zero-sized raster dimension{where}")
    expected = width * height * channels * _NUMPY_DTYPES[code].itemsize
    payload = blob[HEADER_SIZE:]
    if len(payload) < expected:
        raise TruncatedPayloadError(
            f"payload is {len(payload)} bytes, expected {expected}{where}"
        )
    if len(payload) > expected:
        raise MaskFormatError(
            f"{len(payload) - expected} trailing bytes after payload{where}"
        )
    arr = np.frombuffer(payload, dtype=_NUMPY_DTYPES[code]).reshape(channels, height, width)
    arr = arr.copy()  # frombuffer yields a read-only view
    _validate_values(arr, code, context)
    return arr


def read_raster(source: str | Path | bytes | BinaryIO) -> np.ndarray:
    """Read an MSK1 raster from a path, bytes, or binary stream."""
    if isinstance(source, bytes):
        return decode_raster(source)
    if hasattr(source, "read"):
        return decode_raster(source.read())
    path = Path(source)
    return decode_raster(path.read_bytes(), context=str(path))


# --- frames and manifests ------------------------------------------------


@dataclass(frozen=True, eq=False)
class ConfidenceFrame:
    """Per-frame model output: 8 organ confidence planes, one
    carcinomatosis confidence plane, and the frame relevance score.

    Ground-truth rasters ride along when available (label map with organ
    code + 1, binary carcinomatosis mask, frame relevance flag).
    """

    frame_index: int
    time_s: float
    organ_conf: np.ndarray  # (8, H, W) float32
    pc_conf: np.ndarray  # (H, W) float32
    roi_score: float
    gt_labels: np.ndarray | None = None  # (H, W) uint8, 0 = background
    gt_pc: np.ndarray | None = None  # (H, W) uint8, values {0, 1}
    gt_roi: bool | None = None

    @property
    def height(self) -> int:
        return self.pc_conf.shape[0]

    @property
    def width(self) -> int:
        return self.pc_conf.shape[1]


@dataclass(frozen=True)
class FrameRecord:
    """Manifest entry for one frame; raster paths are manifest-relative."""

    frame_index: int
    time_s: float
    organ_conf: str
    pc_conf: str
    roi_score: float
    gt_labels: str | None = None
    gt_pc: str | None = None
    gt_roi: bool | None = None


@dataclass(frozen=True)
class VideoGroundTruth:
    """Clinical reference for one video: six station flags, the total
    score, and the derived indication. Always stored consistently
    (fs = 2 x positive stations; contraindicated iff fs >= 8)."""

    stations: tuple[bool, ...]
    fs: int
    its: Indication

    def __post_init__(self) -> None:
        if len(self.stations) != 6:
            raise GroundTruthInconsistentError("ground truth needs exactly 6 station flags")
        expected_fs = 2 * sum(bool(s) for s in self.stations)
        if self.fs != expected_fs:
            raise GroundTruthInconsistentError(
                f"fs is {self.fs} but {expected_fs} station points are flagged"
            )
        expected_its = (
            Indication.SURGERY_CONTRAINDICATED
            if self.fs >= 8
            else Indication.SURGERY_INDICATED
        )
        if self.its is not expected_its:
            raise GroundTruthInconsistentError(
                f"its is {self.its.value} but fs {self.fs} implies {expected_its.value}"
            )


@dataclass(frozen=True)
class VideoManifest:
    video_id: str
    frames: tuple[FrameRecord, ...]
    ground_truth: VideoGroundTruth | None = None
    roi_segments: tuple[tuple[float, float], ...] | None = None
    base_dir: Path | None = None  # directory the raster paths are relative to


def _require(mapping: dict, field: str, context: str):
    if field not in mapping:
        raise MissingFieldError(f"{context}: missing field {field!r}")
    return mapping[field]


def _as_number(value, field: str, context: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ManifestError(f"{context}: field {field!r} must be a number")
    return float(value)


def _parse_ground_truth(data: dict, context: str) -> VideoGroundTruth:
    stations_map = _require(data, "stations", context)
    if not isinstance(stations_map, dict):
        raise ManifestError(f"{context}: 'stations' must be an object")
    extra = set(stations_map) - set(STATION_SLUGS)
    if extra:
        raise ManifestError(f"{context}: unknown station key(s) {sorted(extra)}")
    flags = []
    for slug in STATION_SLUGS:
        value = _require(stations_map, slug, f"{context}.stations")
        if not isinstance(value, bool):
            raise ManifestError(f"{context}: station {slug!r} must be a boolean")
        flags.append(value)
    fs = _require(data, "fs", context)
    if isinstance(fs, bool) or not isinstance(fs, int):
        raise ManifestError(f"{context}: 'fs' must be an integer")
    its_raw = _require(data, "its", context)
    try:
        its = Indication(its_raw)
    except ValueError:
        raise ManifestError(f"{context}: unknown indication {its_raw!r}") from None
    return VideoGroundTruth(stations=tuple(flags), fs=fs, its=its)


def _parse_frame(data: dict, context: str) -> FrameRecord:
    frame_index = _require(data, "frame_index", context)
    if isinstance(frame_index, bool) or not isinstance(frame_index, int):
        raise ManifestError(f"{context}: 'frame_index' must be an integer")
    time_s = _as_number(_require(data, "time_s", context), "time_s", context)
    organ_conf = _require(data, "organ_conf", context)
    pc_conf = _require(data, "pc_conf", context)
    for name, value in (("organ_conf", organ_conf), ("pc_conf", pc_conf)):
        if not isinstance(value, str):
            raise ManifestError(f"{context}: {name!r} must be a path string")
    roi_score = _as_number(_require(data, "roi_score", context), "roi_score", context)
    if not 0.0 <= roi_score <= 1.0:
        raise ManifestError(f"{context}: roi_score {roi_score} outside [0, 1]")
    gt_labels = data.get("gt_labels")
    gt_pc = data.get("gt_pc")
    for name, value in (("gt_labels", gt_labels), ("gt_pc", gt_pc)):
        if value is not None and not isinstance(value, str):
            raise ManifestError(f"{context}: {name!r} must be a path string")
    gt_roi = data.get("gt_roi")
    if gt_roi is not None and not isinstance(gt_roi, bool):
        raise ManifestError(f"{context}: 'gt_roi' must be a boolean")
    return FrameRecord(
        frame_index=frame_index,
        time_s=time_s,
        organ_conf=organ_conf,
        pc_conf=pc_conf,
        roi_score=roi_score,
        gt_labels=gt_labels,
        gt_pc=gt_pc,
        gt_roi=gt_roi,
    )


def manifest_from_dict(data: dict, base_dir: Path | None = None) -> VideoManifest:
    if not isinstance(data, dict):
        raise ManifestError("manifest must be a JSON object")
    video_id = _require(data, "video_id", "manifest")
    if not isinstance(video_id, str) or not video_id:
        raise ManifestError("manifest: 'video_id' must be a non-empty string")
    context = f"manifest {video_id!r}"
    frames_raw = _require(data, "frames", context)
    if not isinstance(frames_raw, list):
        raise ManifestError(f"{context}: 'frames' must be a list")
    frames = []
    for i, frame_data in enumerate(frames_raw):
        if not isinstance(frame_data, dict):
            raise ManifestError(f"{context}: frame {i} must be an object")
        frames.append(_parse_frame(frame_data, f"{context} frame {i}"))
    for prev, cur in zip(frames, frames[1:]):
        if cur.frame_index <= prev.frame_index:
            raise ManifestError(
                f"{context}: frame_index must be strictly increasing "
                f"({prev.frame_index} then {cur.frame_index})"
            )
        if cur.time_s < prev.time_s:
            raise ManifestError(
                f"{context}: time_s must be non-decreasing "
                f"({prev.time_s} then {cur.time_s})"
            )
    ground_truth = None
    if data.get("ground_truth") is not None:
        gt_raw = data["ground_truth"]
        if not isinstance(gt_raw, dict):
            raise ManifestError(f"{context}: 'ground_truth' must be an object")
        ground_truth = _parse_ground_truth(gt_raw, f"{context} ground_truth")
    roi_segments = None
    if data.get("roi_segments") is not None:
        segments_raw = data["roi_segments"]
        if not isinstance(segments_raw, list):
            raise ManifestError(f"{context}: 'roi_segments' must be a list")
        segments = []
        for seg in segments_raw:
            if not isinstance(seg, (list, tuple)) or len(seg) != 2:
                raise ManifestError(f"{context}: each ROI segment must be [start_s, end_s]")
            start_s = _as_number(seg[0], "roi_segments", context)
            end_s = _as_number(seg[1], "roi_segments", context)
            if end_s < start_s:
                raise ManifestError(f"{context}: ROI segment ends before it starts")
            segments.append((start_s, end_s))
        roi_segments = tuple(segments)
    return VideoManifest(
        video_id=video_id,
        frames=tuple(frames),
        ground_truth=ground_truth,
        roi_segments=roi_segments,
        base_dir=base_dir,
    )


def manifest_to_dict(manifest: VideoManifest) -> dict:
    frames = []
    for rec in manifest.frames:
        entry = {
            "frame_index": rec.frame_index,
            "time_s": rec.time_s,
            "organ_conf": rec.organ_conf,
            "pc_conf": rec.pc_conf,
            "roi_score": rec.roi_score,
        }
        if rec.gt_labels is not None:
            entry["gt_labels"] = rec.gt_labels
        if rec.gt_pc is not None:
            entry["gt_pc"] = rec.gt_pc
        if rec.gt_roi is not None:
            entry["gt_roi"] = rec.gt_roi
        frames.append(entry)
    data: dict = {"video_id": manifest.video_id, "frames": frames}
    if manifest.ground_truth is not None:
        gt = manifest.ground_truth
        data["ground_truth"] = {
            "stations": {slug: flag for slug, flag in zip(STATION_SLUGS, gt.stations)},
            "fs": gt.fs,
            "its": gt.its.value,
        }
    if manifest.roi_segments is not None:
        data["roi_segments"] = [[s, e] for s, e in manifest.roi_segments]
    return data


def canonical_json(data) -> str:
    """Stable, human-readable JSON used for every artifact this package
    writes; byte-identical output for equal input is a hard requirement."""
    return json.dumps(data, indent=2, sort_keys=True, allow_nan=False) + "\n"


def load_manifest(path: str | Path) -> VideoManifest:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError:
        raise
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ManifestSyntaxError(f"{path}: invalid JSON ({exc})") from exc
    return manifest_from_dict(data, base_dir=path.parent)


def save_manifest(manifest: VideoManifest, path: str | Path) -> None:
    Path(path).write_text(canonical_json(manifest_to_dict(manifest)), encoding="utf-8")


def load_frame(record: FrameRecord, base_dir: str | Path) -> ConfidenceFrame:
    """Load one frame's rasters, enforcing the frame invariants:
    8 organ channels, single carcinomatosis channel, equal dimensions."""
    base = Path(base_dir)
    organ = read_raster(base / record.organ_conf)
    if organ.dtype != np.float32:
        raise RasterInvariantError(
            f"{base / record.organ_conf}: organ raster must hold confidences"
        )
    if organ.shape[0] != 8:
        raise ChannelCountMismatchError(
            f"{base / record.organ_conf}: expected 8 organ channels, got {organ.shape[0]}"
        )
    pc = read_raster(base / record.pc_conf)
    if pc.dtype != np.float32:
        raise RasterInvariantError(
            f"{base / record.pc_conf}: carcinomatosis raster must hold confidences"
        )
    if pc.shape[0] != 1:
        raise ChannelCountMismatchError(
            f"{base / record.pc_conf}: expected 1 channel, got {pc.shape[0]}"
        )
    shape = organ.shape[1:]
    if pc.shape[1:] != shape:
        raise DimensionMismatchError(
            f"frame {record.frame_index}: organ raster is {shape}, "
            f"carcinomatosis raster is {pc.shape[1:]}"
        )
    gt_labels = None
    if record.gt_labels is not None:
        gt_labels_arr = read_raster(base / record.gt_labels)
        if gt_labels_arr.dtype != np.uint8 or gt_labels_arr.shape[0] != 1:
            raise RasterInvariantError(
                f"{base / record.gt_labels}: label raster must be single-channel uint8"
            )
        if gt_labels_arr.shape[1:] != shape:
            raise DimensionMismatchError(
                f"frame {record.frame_index}: label raster is {gt_labels_arr.shape[1:]}, "
                f"expected {shape}"
            )
        gt_labels = gt_labels_arr[0]
    gt_pc = None
    if record.gt_pc is not None:
        gt_pc_arr = read_raster(base / record.gt_pc)
        if gt_pc_arr.dtype != np.uint8 or gt_pc_arr.shape[0] != 1:
            raise RasterInvariantError(
                f"{base / record.gt_pc}: binary raster must be single-channel uint8"
            )
        if (gt_pc_arr > 1).any():
            raise LabelOutOfRangeError(
                f"{base / record.gt_pc}: binary ground truth must hold only 0/1"
            )
        if gt_pc_arr.shape[1:] != shape:
            raise DimensionMismatchError(
                f"frame {record.frame_index}: binary raster is {gt_pc_arr.shape[1:]}, "
                f"expected {shape}"
            )
        gt_pc = gt_pc_arr[0]
    return ConfidenceFrame(
        frame_index=record.frame_index,
        time_s=record.time_s,
        organ_conf=organ,
        pc_conf=pc[0],
        roi_score=record.roi_score,
        gt_labels=gt_labels,
        gt_pc=gt_pc,
        gt_roi=record.gt_roi,
    )
