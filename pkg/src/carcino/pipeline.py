"""Video scoring pipeline.

The chain per video: keep frames the relevance (ROI) score accepts,
threshold the organ and carcinomatosis confidence maps, split the
carcinomatosis mask into nodules by connected components, assign every
nodule to the organ it overlaps most, mark the organ's station positive
when at least one nodule sits on it, OR the station vectors over all
frames, and convert the positive-station count into the total score and
the surgery indication.

All thresholds use >= semantics. Thresholds are compared at float32
precision, matching the raster payload, so a pixel stored as the
nearest float32 to the threshold value is included.

Everything here is pure per frame; frames may be processed on any
number of workers and the video-level OR is order-independent.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import maskio
from .core import Indication, OrganClass, ScoringConstants, Station, station_of
from .errors import (
    ChannelCountMismatchError,
    DimensionMismatchError,
    InvalidSegmentError,
    NegativeIntervalError,
    NoAssessableFramesError,
    OverlappingSegmentsError,
)
from .maskio import ConfidenceFrame, VideoManifest

__all__ = [
    "Nodule",
    "FrameAssessment",
    "VideoAssessment",
    "sample_frame_times",
    "filter_roi_frames",
    "threshold_organ_masks",
    "threshold_pc_mask",
    "connected_components",
    "assign_nodules",
    "classify_frame",
    "aggregate_video",
    "compute_fs",
    "compute_its",
    "score_video",
]


@dataclass(eq=False)
class Nodule:
    """One connected component of the thresholded carcinomatosis mask.

    pixels is an (n, 2) array of (row, col) coordinates in row-major
    order; assignment fields are filled by assign_nodules.
    """

    id: int
    pixels: np.ndarray
    assigned_organ: OrganClass | None = None
    overlap_counts: np.ndarray | None = None  # (8,) pixel overlap per organ

    @property
    def size(self) -> int:
        return int(self.pixels.shape[0])

    @property
    def pixel_set(self) -> frozenset[tuple[int, int]]:
        return frozenset((int(r), int(c)) for r, c in self.pixels)


@dataclass(eq=False)
class FrameAssessment:
    frame_index: int
    time_s: float
    station_positive: tuple[bool, ...]
    nodules: list[Nodule] = field(default_factory=list)


@dataclass(eq=False)
class VideoAssessment:
    """Video-level result: station vector, total score, indication."""

    video_id: str
    station_positive: tuple[bool, ...]
    fs: int
    its: Indication
    frames_used: int
    frames: list[FrameAssessment] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "video_id": self.video_id,
            "station_positive": {
                s.slug: flag for s, flag in zip(Station, self.station_positive)
            },
            "fs": self.fs,
            "its": self.its.value,
            "frames_used": self.frames_used,
            "frames": [
                {
                    "frame_index": fa.frame_index,
                    "time_s": fa.time_s,
                    "stations_positive": [
                        s.slug for s, flag in zip(Station, fa.station_positive) if flag
                    ],
                    "nodules": [
                        {
                            "id": n.id,
                            "size": n.size,
                            "organ": n.assigned_organ.slug if n.assigned_organ is not None else None,
                        }
                        for n in fa.nodules
                    ],
                }
                for fa in self.frames
            ],
        }


def sample_frame_times(
    roi_segments: list[tuple[float, float]] | tuple[tuple[float, float], ...],
    interval: float,
) -> list[float]:
    """Frame timestamps at a fixed interval inside each ROI segment.

    Each segment contributes start, start + interval, ... up to and
    including its end; segments are emitted in the given order. Times
    are computed multiplicatively so long segments do not drift.
    """
    if interval <= 0:
        raise NegativeIntervalError(f"sampling interval must be > 0, got {interval}")
    for start_s, end_s in roi_segments:
        if end_s < start_s:
            raise InvalidSegmentError(f"segment ({start_s}, {end_s}) ends before it starts")
    ordered = sorted(roi_segments)
    for (_, prev_end), (next_start, _) in zip(ordered, ordered[1:]):
        if next_start <= prev_end:
            raise OverlappingSegmentsError(
                f"segments overlap near t={next_start}; ROIs must be disjoint"
            )
    times: list[float] = []
    for start_s, end_s in roi_segments:
        k = 0
        while True:
            t = start_s + k * interval
            if t > end_s:
                break
            times.append(t)
            k += 1
    return times


def filter_roi_frames(frames: list, roi_threshold: float) -> list:
    """Keep frames whose relevance score reaches the threshold
    (>= semantics), preserving order. Works on any records exposing a
    roi_score attribute (manifest entries or loaded frames)."""
    return [f for f in frames if f.roi_score >= roi_threshold]


def threshold_organ_masks(frame: ConfidenceFrame, constants: ScoringConstants) -> np.ndarray:
    """Binary organ masks, one plane per organ channel: (8, H, W) bool."""
    if frame.organ_conf.ndim != 3 or frame.organ_conf.shape[0] != 8:
        raise ChannelCountMismatchError(
            f"frame {frame.frame_index}: expected 8 organ channels, "
            f"got shape {frame.organ_conf.shape}"
        )
    return frame.organ_conf >= np.float32(constants.organ_confidence_threshold)


def threshold_pc_mask(frame: ConfidenceFrame, constants: ScoringConstants) -> np.ndarray:
    """Binary carcinomatosis mask: (H, W) bool."""
    return frame.pc_conf >= np.float32(constants.pc_confidence_threshold)


def connected_components(mask: np.ndarray, connectivity: int = 8) -> list[Nodule]:
    """Partition the true pixels of a binary mask into maximal connected
    components (nodules).

    Row runs are extracted per scan line and merged across adjacent rows
    with a union-find, so the cost is linear in the number of runs.
    Components are ordered by their first pixel in row-major order and
    ids are assigned in that order. Connectivity is 8 (default, diagonal
    neighbours connect) or 4.
    """
    if connectivity not in (4, 8):
        raise ValueError(f"connectivity must be 4 or 8, got {connectivity}")
    mask = np.asarray(mask, dtype=bool)
    if mask.ndim != 2:
        raise ValueError("mask must be 2-D")
    height, width = mask.shape

    runs: list[tuple[int, int, int]] = []  # (row, col_start, col_end) half-open
    parent: list[int] = []

    def find(x: int) -> int:
        root = x
        while parent[root] != root:
            root = parent[root]
        while parent[x] != root:  # path compression
            parent[x], x = root, parent[x]
        return root

    def union(a: int, b: int) -> None:
        ra, rb = find(a), find(b)
        if ra != rb:
            # keep the smaller run index as root so roots stay in scan order
            if ra < rb:
                parent[rb] = ra
            else:
                parent[ra] = rb

    prev_row: list[int] = []
    diagonal = connectivity == 8
    for r in range(height):
        row = mask[r]
        if not row.any():
            prev_row = []
            continue
        padded = np.zeros(width + 2, dtype=bool)
        padded[1:-1] = row
        edges = np.flatnonzero(padded[1:] != padded[:-1])
        cur_row: list[int] = []
        for s, e in zip(edges[0::2], edges[1::2]):
            idx = len(runs)
            runs.append((r, int(s), int(e)))
            parent.append(idx)
            cur_row.append(idx)
        i = j = 0
        while i < len(prev_row) and j < len(cur_row):
            _, ps, pe = runs[prev_row[i]]
            _, cs, ce = runs[cur_row[j]]
            touches = (ps <= ce and cs <= pe) if diagonal else (ps < ce and cs < pe)
            if touches:
                union(prev_row[i], cur_row[j])
            if pe <= ce:
                i += 1
            else:
                j += 1
        prev_row = cur_row

    groups: dict[int, list[int]] = {}
    for idx in range(len(runs)):
        groups.setdefault(find(idx), []).append(idx)

    components: list[np.ndarray] = []
    for idxs in groups.values():
        parts = []
        for idx in idxs:  # ascending, so pixels come out row-major sorted
            r, s, e = runs[idx]
            cols = np.arange(s, e, dtype=np.int32)
            parts.append(np.stack([np.full_like(cols, r), cols], axis=1))
        components.append(np.concatenate(parts, axis=0))
    components.sort(key=lambda px: (int(px[0, 0]), int(px[0, 1])))
    return [Nodule(id=i, pixels=px) for i, px in enumerate(components)]


def assign_nodules(
    nodules: list[Nodule],
    organ_masks: np.ndarray,
    organ_conf: np.ndarray,
) -> list[Nodule]:
    """Assign each nodule to an organ by overlap with the organ masks.

    Winner selection, in order: greatest pixel overlap; then greatest
    summed confidence of the organ over its overlapping pixels; then
    lowest organ code. Nodules overlapping no organ stay unassigned and
    contribute to no station.
    """
    if organ_masks.shape != organ_conf.shape:
        raise DimensionMismatchError(
            f"organ masks {organ_masks.shape} vs confidences {organ_conf.shape}"
        )
    if organ_masks.ndim != 3 or organ_masks.shape[0] != 8:
        raise ChannelCountMismatchError(f"expected 8 organ planes, got {organ_masks.shape}")
    height, width = organ_masks.shape[1:]
    masks_flat = organ_masks.reshape(8, -1)
    conf_flat = organ_conf.reshape(8, -1).astype(np.float64)
    for nodule in nodules:
        px = nodule.pixels
        if (px[:, 0] >= height).any() or (px[:, 1] >= width).any():
            raise DimensionMismatchError(
                f"nodule {nodule.id} has pixels outside the {height}x{width} frame"
            )
        flat = px[:, 0].astype(np.int64) * width + px[:, 1]
        overlap = masks_flat[:, flat]
        counts = overlap.sum(axis=1)
        conf_sums = (conf_flat[:, flat] * overlap).sum(axis=1)
        best: int | None = None
        for code in range(8):
            if counts[code] == 0:
                continue
            if best is None or counts[code] > counts[best] or (
                counts[code] == counts[best] and conf_sums[code] > conf_sums[best]
            ):
                best = code
        nodule.overlap_counts = counts.astype(np.int64)
        nodule.assigned_organ = OrganClass(best) if best is not None else None
    return nodules


def classify_frame(frame: ConfidenceFrame, constants: ScoringConstants) -> FrameAssessment:
    """Frame-level station classification.

    Threshold, extract nodules, assign them to organs; a station is
    positive iff at least one nodule was assigned to one of its organs.
    """
    organ_masks = threshold_organ_masks(frame, constants)
    pc_mask = threshold_pc_mask(frame, constants)
    if pc_mask.shape != organ_masks.shape[1:]:
        raise DimensionMismatchError(
            f"frame {frame.frame_index}: organ planes {organ_masks.shape[1:]} "
            f"vs carcinomatosis plane {pc_mask.shape}"
        )
    nodules = connected_components(pc_mask, connectivity=8)
    if constants.min_nodule_pixels > 1:
        nodules = [n for n in nodules if n.size >= constants.min_nodule_pixels]
    assign_nodules(nodules, organ_masks, frame.organ_conf)
    stations = [False] * 6
    for nodule in nodules:
        if nodule.assigned_organ is not None:
            stations[station_of(nodule.assigned_organ)] = True
    return FrameAssessment(
        frame_index=frame.frame_index,
        time_s=frame.time_s,
        station_positive=tuple(stations),
        nodules=nodules,
    )


def aggregate_video(frame_assessments: list[FrameAssessment]) -> tuple[bool, ...]:
    """Per-station OR over frames: a station is video-positive if it was
    ever positive in any assessed frame."""
    if not frame_assessments:
        raise NoAssessableFramesError("no frames to aggregate")
    stations = [False] * 6
    for fa in frame_assessments:
        for s, flag in enumerate(fa.station_positive):
            stations[s] = stations[s] or flag
    return tuple(stations)


def compute_fs(station_positive: tuple[bool, ...], constants: ScoringConstants) -> int:
    """Total score: points per positive station times the positive count
    (0, 2, ..., 12 at the default 2 points per station)."""
    return constants.points_per_positive_station * sum(bool(s) for s in station_positive)


def compute_its(fs: int, constants: ScoringConstants) -> Indication:
    """Surgery contraindicated iff the score reaches the cutoff."""
    if fs >= constants.its_cutoff:
        return Indication.SURGERY_CONTRAINDICATED
    return Indication.SURGERY_INDICATED


def score_video(
    manifest: VideoManifest,
    constants: ScoringConstants | None = None,
    base_dir: str | Path | None = None,
) -> VideoAssessment:
    """Run the full chain over one video manifest.

    Frames are ROI-filtered on the manifest's relevance scores before
    any raster is read; remaining frames must share one raster size
    (no silent resampling). Deterministic for fixed inputs and constants.
    """
    constants = constants or ScoringConstants()
    base = Path(base_dir) if base_dir is not None else manifest.base_dir
    if base is None:
        raise ValueError("manifest has no base_dir; pass base_dir explicitly")
    kept = filter_roi_frames(list(manifest.frames), constants.roi_threshold)
    if not kept:
        raise NoAssessableFramesError(
            f"video {manifest.video_id!r}: no frame reached the ROI threshold "
            f"{constants.roi_threshold}"
        )
    assessments: list[FrameAssessment] = []
    shape: tuple[int, int] | None = None
    for record in kept:
        frame = maskio.load_frame(record, base)
        if shape is None:
            shape = (frame.height, frame.width)
        elif (frame.height, frame.width) != shape:
            raise DimensionMismatchError(
                f"video {manifest.video_id!r} frame {record.frame_index}: "
                f"raster size {(frame.height, frame.width)} differs from {shape}"
            )
        assessments.append(classify_frame(frame, constants))
    stations = aggregate_video(assessments)
    fs = compute_fs(stations, constants)
    its = compute_its(fs, constants)
    return VideoAssessment(
        video_id=manifest.video_id,
        station_positive=stations,
        fs=fs,
        its=its,
        frames_used=len(assessments),
        frames=assessments,
    )
