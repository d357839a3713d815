"""Seeded synthetic cohorts with a known-ground-truth oracle.

Stands in for a clinical dataset at desk scale: organs are laid out as
non-overlapping ellipses/rectangles on a 3x3 grid, carcinomatosis
nodules are planted strictly inside the organs of truly involved
stations, and prediction rasters are derived from that truth through a
configurable noise model. With all noise at zero the prediction rasters
reproduce the truth exactly, so the scoring pipeline must recover the
planted score for every video.

All randomness is counter-based: every video and frame derives its own
generator from (seed, video index, frame index), so generation is
reproducible byte-for-byte under any scheduling.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import maskio
from .cohort import CohortVideo, EvalRun, evaluate_cohort, load_cohort, save_cohort_index
from .core import (
    Indication,
    ScoringConstants,
    Station,
    STATION_SLUGS,
    organs_of,
)
from .errors import InvalidSpecError
from .maskio import FrameRecord, VideoGroundTruth, VideoManifest, canonical_json
from .metrics import summarize_runs
from .pipeline import sample_frame_times

__all__ = [
    "NoiseSpec",
    "SynthSpec",
    "generate_cohort",
    "oracle_fs",
    "oracle_stations",
    "monte_carlo_sweep",
    "render_sweep_text",
    "render_sweep_csv",
]

# confidence plateaus used for prediction rasters derived from truth
HI_ORGAN, LO_ORGAN = 0.95, 0.05
HI_PC, LO_PC = 0.97, 0.02
ROI_HI, ROI_LO = 0.95, 0.05

SWEEP_SCHEMA = "carcino.sweep.v1"


@dataclass(frozen=True)
class NoiseSpec:
    """Noise applied to prediction rasters only; truth stays exact.

    confidence_jitter: std-dev of additive Gaussian noise on every
        confidence map (result clamped to [0, 1]).
    boundary_morph: maximum magnitude, in pixels, of a random dilation
        or erosion applied to each predicted mask.
    false_blob_rate: expected number of spurious carcinomatosis blobs
        per frame (Poisson).
    miss_rate: probability that a planted nodule is suppressed in a
        given frame.
    """

    confidence_jitter: float = 0.0
    boundary_morph: int = 0
    false_blob_rate: float = 0.0
    miss_rate: float = 0.0

    def __post_init__(self) -> None:
        if self.confidence_jitter < 0:
            raise InvalidSpecError("confidence_jitter must be >= 0")
        if self.boundary_morph < 0:
            raise InvalidSpecError("boundary_morph must be >= 0")
        if self.false_blob_rate < 0:
            raise InvalidSpecError("false_blob_rate must be >= 0")
        if not 0.0 <= self.miss_rate <= 1.0:
            raise InvalidSpecError("miss_rate must lie in [0, 1]")

    @property
    def is_zero(self) -> bool:
        return (
            self.confidence_jitter == 0
            and self.boundary_morph == 0
            and self.false_blob_rate == 0
            and self.miss_rate == 0
        )


@dataclass(frozen=True)
class SynthSpec:
    """Recipe for one synthetic cohort; equal specs yield equal bytes."""

    seed: int
    n_videos: int = 20
    frame_size: tuple[int, int] = (64, 64)  # (width, height)
    frames_per_video: int = 8
    station_prevalence: tuple[float, ...] = (0.5, 0.5, 0.5, 0.5, 0.5, 0.5)
    nodules_per_positive_station: tuple[int, int] = (1, 3)
    nonroi_frames_per_video: int = 0
    noise: NoiseSpec = field(default_factory=NoiseSpec)

    def __post_init__(self) -> None:
        if self.n_videos < 1:
            raise InvalidSpecError("n_videos must be >= 1")
        width, height = self.frame_size
        if width < 16 or height < 16:
            raise InvalidSpecError("frame_size must be at least 16x16")
        if self.frames_per_video < 1:
            raise InvalidSpecError("frames_per_video must be >= 1")
        if len(self.station_prevalence) != 6:
            raise InvalidSpecError("station_prevalence needs 6 entries")
        if any(not 0.0 <= p <= 1.0 for p in self.station_prevalence):
            raise InvalidSpecError("station prevalences must lie in [0, 1]")
        lo, hi = self.nodules_per_positive_station
        if not 1 <= lo <= hi:
            raise InvalidSpecError("nodules_per_positive_station must satisfy 1 <= lo <= hi")
        if self.nonroi_frames_per_video < 0:
            raise InvalidSpecError("nonroi_frames_per_video must be >= 0")

    def to_dict(self) -> dict:
        data = asdict(self)
        data["frame_size"] = list(self.frame_size)
        data["station_prevalence"] = list(self.station_prevalence)
        data["nodules_per_positive_station"] = list(self.nodules_per_positive_station)
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "SynthSpec":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise InvalidSpecError(f"unknown spec field(s): {sorted(unknown)}")
        if "seed" not in data:
            raise InvalidSpecError("spec needs a 'seed'")
        kwargs = dict(data)
        if "frame_size" in kwargs:
            kwargs["frame_size"] = tuple(kwargs["frame_size"])
        if "station_prevalence" in kwargs:
            kwargs["station_prevalence"] = tuple(kwargs["station_prevalence"])
        if "nodules_per_positive_station" in kwargs:
            kwargs["nodules_per_positive_station"] = tuple(
                kwargs["nodules_per_positive_station"]
            )
        if isinstance(kwargs.get("noise"), dict):
            kwargs["noise"] = NoiseSpec(**kwargs["noise"])
        return cls(**kwargs)

    @classmethod
    def from_json_file(cls, path: str | Path) -> "SynthSpec":
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise InvalidSpecError(f"{path}: invalid JSON ({exc})") from exc
        if not isinstance(data, dict):
            raise InvalidSpecError(f"{path}: expected a JSON object")
        try:
            return cls.from_dict(data)
        except TypeError as exc:
            raise InvalidSpecError(f"{path}: {exc}") from exc


def _mask64(seed: int) -> int:
    return int(seed) & 0xFFFF_FFFF_FFFF_FFFF


def _rng(seed: int, *counters: int) -> np.random.Generator:
    return np.random.Generator(
        np.random.Philox(np.random.SeedSequence([_mask64(seed), *counters]))
    )


def _shift(mask: np.ndarray, dr: int, dc: int) -> np.ndarray:
    out = np.zeros_like(mask)
    h, w = mask.shape
    rs_src = slice(max(0, -dr), min(h, h - dr))
    cs_src = slice(max(0, -dc), min(w, w - dc))
    rs_dst = slice(max(0, dr), min(h, h + dr))
    cs_dst = slice(max(0, dc), min(w, w + dc))
    out[rs_dst, cs_dst] = mask[rs_src, cs_src]
    return out


def binary_dilate(mask: np.ndarray, amount: int) -> np.ndarray:
    """Chebyshev dilation: amount iterations of the 8-neighbourhood."""
    result = mask.copy()
    for _ in range(amount):
        grown = result.copy()
        for dr in (-1, 0, 1):
            for dc in (-1, 0, 1):
                if dr or dc:
                    grown |= _shift(result, dr, dc)
        result = grown
    return result


def binary_erode(mask: np.ndarray, amount: int) -> np.ndarray:
    result = mask.copy()
    for _ in range(amount):
        shrunk = result.copy()
        for dr in (-1, 0, 1):
            for dc in (-1, 0, 1):
                if dr or dc:
                    shrunk &= _shift(result, dr, dc)
        result = shrunk
    return result


def _organ_cell(organ: int, width: int, height: int) -> tuple[int, int, int, int]:
    """Bounding cell of an organ on the 3x3 grid: (r0, r1, c0, c1)."""
    cell_w, cell_h = width // 3, height // 3
    col, row = organ % 3, organ // 3
    return row * cell_h, (row + 1) * cell_h, col * cell_w, (col + 1) * cell_w


def _organ_layout(rng: np.random.Generator, width: int, height: int) -> np.ndarray:
    """True masks for all 8 organs, (8, H, W) bool, pairwise disjoint.

    Each organ fills one grid cell (inset by one pixel) with either a
    rectangle or an inscribed ellipse; the ninth cell stays background.
    """
    masks = np.zeros((8, height, width), dtype=bool)
    for organ in range(8):
        r0, r1, c0, c1 = _organ_cell(organ, width, height)
        r0, r1, c0, c1 = r0 + 1, r1 - 1, c0 + 1, c1 - 1
        use_ellipse = bool(rng.integers(0, 2))
        if use_ellipse:
            cy, cx = (r0 + r1 - 1) / 2.0, (c0 + c1 - 1) / 2.0
            ry, rx = max((r1 - r0) / 2.0, 0.5), max((c1 - c0) / 2.0, 0.5)
            rows = np.arange(height)[:, None]
            cols = np.arange(width)[None, :]
            masks[organ] = ((rows - cy) / ry) ** 2 + ((cols - cx) / rx) ** 2 <= 1.0
        else:
            masks[organ, r0:r1, c0:c1] = True
    return masks


def _disc(center: tuple[int, int], radius: int, height: int, width: int) -> np.ndarray:
    rows = np.arange(height)[:, None]
    cols = np.arange(width)[None, :]
    return (rows - center[0]) ** 2 + (cols - center[1]) ** 2 <= radius * radius


def _plant_nodule(
    rng: np.random.Generator, organ_mask: np.ndarray
) -> np.ndarray | None:
    """A small disc strictly inside the organ mask, or None if the organ
    is too small to host one."""
    height, width = organ_mask.shape
    for radius in (2, 1, 0):
        # a disc of this radius fits wherever the mask eroded by radius+1
        # is still true (the +1 keeps one clear pixel to the boundary)
        candidates = np.flatnonzero(binary_erode(organ_mask, radius + 1))
        if candidates.size:
            position = int(candidates[rng.integers(0, candidates.size)])
            center = (position // width, position % width)
            return _disc(center, radius, height, width)
    inside = np.flatnonzero(organ_mask)
    if inside.size:
        position = int(inside[rng.integers(0, inside.size)])
        return _disc((position // width, position % width), 0, height, width)
    return None


def _morph(rng: np.random.Generator, mask: np.ndarray, max_amount: int) -> np.ndarray:
    amount = int(rng.integers(0, max_amount + 1))
    if amount == 0:
        return mask
    if rng.integers(0, 2):
        return binary_dilate(mask, amount)
    return binary_erode(mask, amount)


def _confidence_map(
    rng: np.random.Generator,
    mask: np.ndarray,
    hi: float,
    lo: float,
    jitter: float,
) -> np.ndarray:
    conf = np.where(mask, hi, lo)
    if jitter > 0:
        conf = conf + rng.normal(0.0, jitter, size=mask.shape)
    return np.clip(conf, 0.0, 1.0).astype(np.float32)


def _generate_frame(
    spec: SynthSpec,
    video_index: int,
    frame_index: int,
    planted_stations: Sequence[bool],
    is_roi: bool,
) -> dict:
    """Truth and prediction rasters for one frame.

    Draw order from the frame generator is fixed: layout, planting,
    prediction noise. Returns organ/pc confidence maps, ground-truth
    rasters, the relevance score, and the planted nodule mask pairs
    (for generation-time containment checks).
    """
    width, height = spec.frame_size
    noise = spec.noise
    rng = _rng(spec.seed, 2, video_index, frame_index)

    organ_masks = _organ_layout(rng, width, height)
    gt_labels = np.zeros((height, width), dtype=np.uint8)
    for organ in range(8):
        gt_labels[organ_masks[organ]] = organ + 1

    planted: list[tuple[int, np.ndarray]] = []  # (organ code, nodule mask)
    gt_pc = np.zeros((height, width), dtype=bool)
    if is_roi:
        for station, involved in zip(Station, planted_stations):
            if not involved:
                continue
            lo_n, hi_n = spec.nodules_per_positive_station
            count = int(rng.integers(lo_n, hi_n + 1))
            organs = organs_of(station)
            for _ in range(count):
                organ = organs[int(rng.integers(0, len(organs)))]
                nodule = _plant_nodule(rng, organ_masks[organ])
                if nodule is None:
                    continue
                if (nodule & ~organ_masks[organ]).any():
                    raise AssertionError("planted nodule escaped its organ mask")
                planted.append((int(organ), nodule))
                gt_pc |= nodule

    # prediction rasters, derived from truth through the noise model
    pred_organ_masks = organ_masks
    if noise.boundary_morph > 0:
        pred_organ_masks = np.stack(
            [_morph(rng, organ_masks[o], noise.boundary_morph) for o in range(8)]
        )
    organ_conf = np.stack(
        [
            _confidence_map(rng, pred_organ_masks[o], HI_ORGAN, LO_ORGAN, noise.confidence_jitter)
            for o in range(8)
        ]
    )

    pred_pc = np.zeros((height, width), dtype=bool)
    for _, nodule in planted:
        if noise.miss_rate > 0 and rng.random() < noise.miss_rate:
            continue
        pred_pc |= nodule
    if noise.boundary_morph > 0 and pred_pc.any():
        pred_pc = _morph(rng, pred_pc, noise.boundary_morph)
    if noise.false_blob_rate > 0:
        for _ in range(int(rng.poisson(noise.false_blob_rate))):
            radius = int(rng.integers(1, 3))
            center = (int(rng.integers(0, height)), int(rng.integers(0, width)))
            pred_pc |= _disc(center, radius, height, width)
    pc_conf = _confidence_map(rng, pred_pc, HI_PC, LO_PC, noise.confidence_jitter)

    roi_base = ROI_HI if is_roi else ROI_LO
    roi_score = roi_base
    if noise.confidence_jitter > 0:
        roi_score = float(np.clip(roi_base + rng.normal(0.0, noise.confidence_jitter), 0.0, 1.0))

    return {
        "organ_conf": organ_conf,
        "pc_conf": pc_conf[np.newaxis, :, :],
        "gt_labels": gt_labels[np.newaxis, :, :],
        "gt_pc": gt_pc.astype(np.uint8)[np.newaxis, :, :],
        "roi_score": roi_score,
        "planted": planted,
    }


def _planted_stations(spec: SynthSpec, video_index: int) -> tuple[bool, ...]:
    rng = _rng(spec.seed, 1, video_index)
    draws = rng.random(6)
    return tuple(bool(draws[s] < spec.station_prevalence[s]) for s in range(6))


def _video_ground_truth(stations: tuple[bool, ...]) -> VideoGroundTruth:
    fs = 2 * sum(stations)
    its = Indication.SURGERY_CONTRAINDICATED if fs >= 8 else Indication.SURGERY_INDICATED
    return VideoGroundTruth(stations=stations, fs=fs, its=its)


def _generate_video(spec: SynthSpec, video_index: int, video_dir: Path) -> VideoManifest:
    video_id = f"v{video_index:04d}"
    frames_dir = video_dir / "frames"
    frames_dir.mkdir(parents=True, exist_ok=True)
    stations = _planted_stations(spec, video_index)

    constants = ScoringConstants()
    segment_end = constants.frame_sampling_interval * (spec.frames_per_video - 1)
    roi_times = sample_frame_times([(0.0, segment_end)], constants.frame_sampling_interval)

    records: list[FrameRecord] = []
    n_total = spec.frames_per_video + spec.nonroi_frames_per_video
    for frame_index in range(n_total):
        is_roi = frame_index < spec.frames_per_video
        if is_roi:
            time_s = roi_times[frame_index]
        else:
            extra = frame_index - spec.frames_per_video + 1
            time_s = segment_end + extra * constants.frame_sampling_interval
        frame = _generate_frame(spec, video_index, frame_index, stations, is_roi)
        stem = f"f{frame_index:04d}"
        paths = {
            "organ_conf": f"frames/{stem}.organ.msk",
            "pc_conf": f"frames/{stem}.pc.msk",
            "gt_labels": f"frames/{stem}.gtlab.msk",
            "gt_pc": f"frames/{stem}.gtpc.msk",
        }
        maskio.write_raster(frame["organ_conf"], video_dir / paths["organ_conf"])
        maskio.write_raster(frame["pc_conf"], video_dir / paths["pc_conf"])
        maskio.write_raster(frame["gt_labels"], video_dir / paths["gt_labels"])
        maskio.write_raster(frame["gt_pc"], video_dir / paths["gt_pc"])
        records.append(
            FrameRecord(
                frame_index=frame_index,
                time_s=float(time_s),
                organ_conf=paths["organ_conf"],
                pc_conf=paths["pc_conf"],
                roi_score=frame["roi_score"],
                gt_labels=paths["gt_labels"],
                gt_pc=paths["gt_pc"],
                gt_roi=is_roi,
            )
        )

    manifest = VideoManifest(
        video_id=video_id,
        frames=tuple(records),
        ground_truth=_video_ground_truth(stations),
        roi_segments=((0.0, float(segment_end)),),
        base_dir=video_dir,
    )
    maskio.save_manifest(manifest, video_dir / "manifest.json")
    return manifest


def generate_cohort(spec: SynthSpec, out_dir: str | Path) -> Path:
    """Write a full synthetic cohort under out_dir; returns the index path.

    Identical specs produce byte-identical directory trees.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    for video_index in range(spec.n_videos):
        video_id = f"v{video_index:04d}"
        video_dir = out_dir / "videos" / video_id
        _generate_video(spec, video_index, video_dir)
        entries.append((video_id, f"videos/{video_id}/manifest.json"))
    index_path = out_dir / "index.json"
    save_cohort_index(f"synth-{_mask64(spec.seed)}", entries, index_path)
    (out_dir / "spec.json").write_text(canonical_json(spec.to_dict()), encoding="utf-8")
    return index_path


def oracle_stations(video: CohortVideo | VideoManifest) -> tuple[bool, ...]:
    """Planted station involvement, straight from the generation log."""
    gt = video.ground_truth
    if gt is None:
        raise InvalidSpecError("video carries no planted ground truth")
    return gt.stations


def oracle_fs(video: CohortVideo | VideoManifest) -> int:
    """Recompute the planted score from the station log (2 points per
    involved station), independently of any raster; cross-checked
    against the stored total."""
    stations = oracle_stations(video)
    fs = 2 * sum(bool(s) for s in stations)
    stored = video.ground_truth.fs
    if fs != stored:
        raise InvalidSpecError(f"stored fs {stored} disagrees with planted stations ({fs})")
    return fs


# --- Monte Carlo noise sweep -----------------------------------------------


def _replicate_seed(seed: int, level_index: int, replicate: int) -> int:
    return int(
        np.random.SeedSequence([_mask64(seed), 3, level_index, replicate]).generate_state(
            1, np.uint64
        )[0]
    )


def monte_carlo_sweep(
    base_spec: SynthSpec,
    param: str,
    levels: Sequence[float],
    replicates: int,
    workdir: str | Path,
    constants: ScoringConstants | None = None,
    jobs: int = 1,
) -> dict:
    """Propagate frame-level noise to video-level error.

    For every noise level and replicate: derive a fresh seed, generate a
    cohort with the noise parameter set to the level, score and evaluate
    it (single run over all videos), and collect normalized RMSE,
    per-station F1, and indication F1. Returns per-level summaries plus
    the raw replicate values.
    """
    noise_fields = {f.name for f in fields(NoiseSpec)}
    if param not in noise_fields:
        raise InvalidSpecError(f"unknown noise parameter {param!r}; one of {sorted(noise_fields)}")
    if replicates < 1:
        raise InvalidSpecError("replicates must be >= 1")
    if not levels:
        raise InvalidSpecError("need at least one noise level")
    constants = constants or ScoringConstants()
    workdir = Path(workdir)

    def summary_of(vals: list) -> dict | None:
        try:
            return summarize_runs(vals).to_dict()
        except Exception:
            return None

    level_entries = []
    for level_index, level in enumerate(levels):
        values: dict[str, list] = {
            "fs_rmse": [],
            "fs_rmse_normalized": [],
            "station_f1_average": [],
            "its_f1_average": [],
        }
        station_values: dict[str, list] = {slug: [] for slug in STATION_SLUGS}
        for replicate in range(replicates):
            noise_kwargs = {param: type(getattr(base_spec.noise, param))(level)}
            spec = replace(
                base_spec,
                seed=_replicate_seed(base_spec.seed, level_index, replicate),
                noise=replace(base_spec.noise, **noise_kwargs),
            )
            cohort_dir = workdir / f"level{level_index:02d}_rep{replicate:03d}"
            index_path = generate_cohort(spec, cohort_dir)
            cohort = load_cohort(index_path)
            report = evaluate_cohort(
                cohort,
                [EvalRun(label="all", video_ids=tuple(v.video_id for v in cohort.videos))],
                constants,
                jobs=jobs,
                compute_dice=False,
                compute_roi=False,
                mode="sweep",
            )
            run = report["runs"][0]
            values["fs_rmse"].append(run["fs_rmse"])
            values["fs_rmse_normalized"].append(run["fs_rmse_normalized"])
            values["station_f1_average"].append(run["stations_average"]["f1"])
            values["its_f1_average"].append(run["its_average"]["f1"])
            for slug in STATION_SLUGS:
                station_values[slug].append(run["stations"][slug]["f1"])
        level_entries.append(
            {
                "level": float(level),
                "replicates": replicates,
                "values": {**values, "stations_f1": station_values},
                "summary": {
                    "fs_rmse": summary_of(values["fs_rmse"]),
                    "fs_rmse_normalized": summary_of(values["fs_rmse_normalized"]),
                    "station_f1_average": summary_of(values["station_f1_average"]),
                    "its_f1_average": summary_of(values["its_f1_average"]),
                    "stations_f1": {
                        slug: summary_of(station_values[slug]) for slug in STATION_SLUGS
                    },
                },
            }
        )
    return {
        "schema": SWEEP_SCHEMA,
        "kind": "monte_carlo_sweep",
        "param": param,
        "replicates": replicates,
        "base_spec": base_spec.to_dict(),
        "constants": constants.to_dict(),
        "levels": level_entries,
    }


def render_sweep_csv(report: dict) -> str:
    """Per-replicate CSV of the sweep, one row per (level, replicate);
    undefined values become empty cells. Suitable for plotting."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    columns = ["fs_rmse", "fs_rmse_normalized", "station_f1_average", "its_f1_average"]
    writer.writerow(["param", "level", "replicate", *columns])
    for entry in report["levels"]:
        values = entry["values"]
        for i in range(entry["replicates"]):
            row = [report["param"], entry["level"], i]
            for column in columns:
                value = values[column][i]
                row.append("" if value is None else value)
            writer.writerow(row)
    return buf.getvalue()


def render_sweep_text(report: dict) -> str:
    """Plain-text table of the sweep: one row per noise level."""

    def fmt(summary: dict | None) -> str:
        if summary is None:
            return "n/a"
        return f"{summary['mean']:.4f} ± {summary['std']:.4f}"

    lines = [
        f"Noise sweep over {report['param']} "
        f"({report['replicates']} replicate(s) per level)",
        "",
        f"{'level':>10}  {'norm. RMSE':>20}  {'station F1 avg':>20}  {'ItS F1 avg':>20}",
    ]
    for entry in report["levels"]:
        summary = entry["summary"]
        lines.append(
            f"{entry['level']:>10.4g}  {fmt(summary['fs_rmse_normalized']):>20}  "
            f"{fmt(summary['station_f1_average']):>20}  {fmt(summary['its_f1_average']):>20}"
        )
    return "\n".join(lines) + "\n"
