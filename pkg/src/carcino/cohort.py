"""Cohort loading, stratified video-level splitting, and evaluation.

A cohort is a directory with an index file (JSON list of video ids and
manifest paths) plus one manifest per video. Splitting is done at the
video level only, so frames from one case never straddle folds. The
evaluation runner scores every video, compares against the clinical
ground truth at all levels (station involvement, total score,
indication, and optionally frame-level Dice and ROI balanced accuracy
when ground-truth rasters exist), and aggregates mean/std across runs
(folds in cross-validation mode, models in independent-test mode).
"""

from __future__ import annotations

import concurrent.futures
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import maskio, metrics, pipeline
from .core import (
    Indication,
    ORGAN_DISPLAY,
    ORGAN_SLUGS,
    OrganClass,
    ScoringConstants,
    Station,
    STATION_DISPLAY,
    STATION_SLUGS,
)
from .errors import (
    CarcinoError,
    EmptyCohortError,
    ManifestError,
    MissingGroundTruthError,
    TooFewVideosError,
)
from .maskio import VideoGroundTruth, canonical_json
from .metrics import ConfusionCounts

__all__ = [
    "Cohort",
    "CohortVideo",
    "FoldAssignment",
    "EvalRun",
    "VideoPrediction",
    "load_cohort",
    "save_cohort_index",
    "stratified_kfold",
    "save_folds",
    "load_folds",
    "runs_from_folds",
    "independent_runs",
    "evaluate_cohort",
    "render_report_text",
]

PC_DICE_KEY = "peritoneal_carcinomatosis"
ORGAN_AVG_DICE_KEY = "anatomical_structures_average"
REPORT_SCHEMA = "carcino.report.v1"


@dataclass(frozen=True)
class CohortVideo:
    video_id: str
    manifest_path: Path
    ground_truth: VideoGroundTruth | None


@dataclass(frozen=True)
class Cohort:
    name: str
    videos: tuple[CohortVideo, ...]

    def __post_init__(self) -> None:
        ids = [v.video_id for v in self.videos]
        if len(set(ids)) != len(ids):
            dupes = sorted({i for i in ids if ids.count(i) > 1})
            raise CarcinoError(f"duplicate video id(s) in cohort: {dupes}")

    def by_id(self, video_id: str) -> CohortVideo:
        for v in self.videos:
            if v.video_id == video_id:
                return v
        raise KeyError(video_id)


def load_cohort(index_path: str | Path) -> Cohort:
    """Load a cohort index and every referenced manifest's ground truth.

    Manifest paths in the index are relative to the index file's
    directory. Ground-truth consistency is validated per manifest.
    """
    index_path = Path(index_path)
    try:
        data = json.loads(index_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ManifestError(f"{index_path}: invalid JSON ({exc})") from exc
    if not isinstance(data, dict) or "videos" not in data:
        raise ManifestError(f"{index_path}: expected an object with a 'videos' list")
    name = data.get("name", index_path.parent.name)
    videos = []
    for i, entry in enumerate(data["videos"]):
        if not isinstance(entry, dict) or "video_id" not in entry or "manifest" not in entry:
            raise ManifestError(f"{index_path}: videos[{i}] needs 'video_id' and 'manifest'")
        manifest_path = index_path.parent / entry["manifest"]
        manifest = maskio.load_manifest(manifest_path)
        if manifest.video_id != entry["video_id"]:
            raise ManifestError(
                f"{index_path}: videos[{i}] id {entry['video_id']!r} does not match "
                f"manifest id {manifest.video_id!r}"
            )
        videos.append(
            CohortVideo(
                video_id=entry["video_id"],
                manifest_path=manifest_path,
                ground_truth=manifest.ground_truth,
            )
        )
    return Cohort(name=name, videos=tuple(videos))


def save_cohort_index(name: str, entries: Sequence[tuple[str, str]], path: str | Path) -> None:
    """Write a cohort index; entries are (video_id, manifest path
    relative to the index directory)."""
    data = {
        "name": name,
        "videos": [{"video_id": vid, "manifest": rel} for vid, rel in entries],
    }
    Path(path).write_text(canonical_json(data), encoding="utf-8")


# --- stratified splitting -------------------------------------------------


@dataclass(frozen=True)
class FoldAssignment:
    k: int
    seed: int
    assignment: dict[str, int]  # video_id -> fold index in [0, k)

    def fold_ids(self, fold: int) -> list[str]:
        return sorted(vid for vid, f in self.assignment.items() if f == fold)

    def to_dict(self) -> dict:
        return {"k": self.k, "seed": self.seed, "assignment": dict(sorted(self.assignment.items()))}

    @classmethod
    def from_dict(cls, data: dict) -> "FoldAssignment":
        if not isinstance(data, dict) or not {"k", "seed", "assignment"} <= set(data):
            raise CarcinoError("fold file must contain 'k', 'seed' and 'assignment'")
        assignment = {str(k): int(v) for k, v in data["assignment"].items()}
        return cls(k=int(data["k"]), seed=int(data["seed"]), assignment=assignment)


def stratified_kfold(cohort: Cohort, k: int, seed: int = 0) -> FoldAssignment:
    """Split a cohort into k folds with similar score distributions.

    Videos are sorted by ground-truth score (ties broken by id for
    determinism), shuffled only within equal-score groups using the
    seed, then dealt snake-wise (0..k-1, k-1..0, ...) so every fold
    receives a balanced sweep of the score range. Deterministic for a
    fixed (cohort, k, seed).
    """
    if k < 1:
        raise TooFewVideosError(f"fold count must be >= 1, got {k}")
    if len(cohort.videos) < k:
        raise TooFewVideosError(
            f"cohort has {len(cohort.videos)} videos, cannot make {k} folds"
        )
    for v in cohort.videos:
        if v.ground_truth is None:
            raise MissingGroundTruthError(
                f"video {v.video_id!r} has no ground truth; cannot stratify"
            )
    ordered = sorted(cohort.videos, key=lambda v: (v.ground_truth.fs, v.video_id))
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([_mask64(seed), 0xF0])))
    dealt: list[CohortVideo] = []
    start = 0
    while start < len(ordered):
        end = start
        fs = ordered[start].ground_truth.fs
        while end < len(ordered) and ordered[end].ground_truth.fs == fs:
            end += 1
        group = ordered[start:end]
        for i in rng.permutation(len(group)):
            dealt.append(group[int(i)])
        start = end
    assignment: dict[str, int] = {}
    for i, video in enumerate(dealt):
        cycle, pos = divmod(i, k)
        fold = pos if cycle % 2 == 0 else k - 1 - pos
        assignment[video.video_id] = fold
    return FoldAssignment(k=k, seed=seed, assignment=assignment)


def save_folds(folds: FoldAssignment, path: str | Path) -> None:
    Path(path).write_text(canonical_json(folds.to_dict()), encoding="utf-8")


def load_folds(path: str | Path) -> FoldAssignment:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise CarcinoError(f"{path}: invalid JSON ({exc})") from exc
    return FoldAssignment.from_dict(data)


def _mask64(seed: int) -> int:
    return int(seed) & 0xFFFF_FFFF_FFFF_FFFF


# --- evaluation -----------------------------------------------------------


@dataclass(frozen=True)
class EvalRun:
    """One evaluation run: a label and the video ids it covers."""

    label: str
    video_ids: tuple[str, ...]


@dataclass(frozen=True)
class VideoPrediction:
    video_id: str
    stations: tuple[bool, ...] | None
    fs: int | None
    its: Indication | None
    frames_used: int | None = None
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


def runs_from_folds(cohort: Cohort, folds: FoldAssignment) -> list[EvalRun]:
    """One run per fold; each fold's videos serve as that run's test set."""
    cohort_ids = {v.video_id for v in cohort.videos}
    missing = cohort_ids - set(folds.assignment)
    if missing:
        raise CarcinoError(f"fold assignment misses video(s): {sorted(missing)}")
    unknown = set(folds.assignment) - cohort_ids
    if unknown:
        raise CarcinoError(f"fold assignment names unknown video(s): {sorted(unknown)}")
    runs = []
    for fold in range(folds.k):
        ids = tuple(
            v.video_id for v in cohort.videos if folds.assignment[v.video_id] == fold
        )
        runs.append(EvalRun(label=f"fold{fold}", video_ids=ids))
    return runs


def independent_runs(cohort: Cohort, n_models: int = 1) -> list[EvalRun]:
    """Independent-test mode: every model is evaluated on the full cohort."""
    if n_models < 1:
        raise CarcinoError(f"model count must be >= 1, got {n_models}")
    ids = tuple(v.video_id for v in cohort.videos)
    return [EvalRun(label=f"model{i}", video_ids=ids) for i in range(n_models)]


def _new_dice_lists() -> dict[str, list]:
    lists: dict[str, list] = {slug: [] for slug in ORGAN_SLUGS}
    lists[PC_DICE_KEY] = []
    return lists


def _assess_video(
    manifest_path: str,
    constants: ScoringConstants,
    want_dice: bool,
    want_roi: bool,
) -> dict:
    """Score one video and collect its frame-level evaluation data.

    Single pass over the manifest's frames: ROI-passing frames feed the
    video-level chain; frames carrying ground-truth rasters (and not
    flagged as non-ROI) feed per-label Dice; frames carrying a relevance
    flag feed the ROI confusion. Any per-video error is recorded, not
    raised, so one broken video cannot sink a run.
    """
    result: dict = {"prediction": None, "dice": None, "roi": None}
    dice_lists = _new_dice_lists() if want_dice else None
    roi_counts = [0, 0, 0, 0]  # tp, fp, tn, fn
    saw_roi_flag = False
    organ_threshold = np.float32(constants.organ_confidence_threshold)
    pc_threshold = np.float32(constants.pc_confidence_threshold)
    try:
        manifest = maskio.load_manifest(manifest_path)
        assessments = []
        shape: tuple[int, int] | None = None
        for record in manifest.frames:
            roi_pass = record.roi_score >= constants.roi_threshold
            if want_roi and record.gt_roi is not None:
                saw_roi_flag = True
                if roi_pass and record.gt_roi:
                    roi_counts[0] += 1
                elif roi_pass:
                    roi_counts[1] += 1
                elif not record.gt_roi:
                    roi_counts[2] += 1
                else:
                    roi_counts[3] += 1
            has_gt_raster = record.gt_labels is not None or record.gt_pc is not None
            need_dice = want_dice and has_gt_raster and record.gt_roi is not False
            if not roi_pass and not need_dice:
                continue
            frame = maskio.load_frame(record, manifest.base_dir)
            if shape is None:
                shape = (frame.height, frame.width)
            elif (frame.height, frame.width) != shape:
                raise CarcinoError(
                    f"frame {record.frame_index}: raster size "
                    f"{(frame.height, frame.width)} differs from {shape}"
                )
            if need_dice:
                if frame.gt_labels is not None:
                    for organ in OrganClass:
                        pred = frame.organ_conf[organ] >= organ_threshold
                        gt = frame.gt_labels == organ + 1
                        dice_lists[organ.slug].append(metrics.dice(gt, pred))
                if frame.gt_pc is not None:
                    pred = frame.pc_conf >= pc_threshold
                    dice_lists[PC_DICE_KEY].append(metrics.dice(frame.gt_pc > 0, pred))
            if roi_pass:
                assessments.append(pipeline.classify_frame(frame, constants))
        if assessments:
            stations = pipeline.aggregate_video(assessments)
            fs = pipeline.compute_fs(stations, constants)
            its = pipeline.compute_its(fs, constants)
            result["prediction"] = {
                "stations": [bool(s) for s in stations],
                "fs": fs,
                "its": its.value,
                "frames_used": len(assessments),
            }
        else:
            result["prediction"] = {
                "error": f"no frame reached the ROI threshold {constants.roi_threshold}"
            }
        if want_dice:
            result["dice"] = dice_lists
        if want_roi and saw_roi_flag:
            result["roi"] = roi_counts
    except (CarcinoError, OSError) as exc:
        # all-or-nothing per video: a broken raster voids its frame metrics
        return {"prediction": {"error": str(exc)}, "dice": None, "roi": None}
    return result


def _assess_video_task(args: tuple[str, dict, bool, bool]) -> dict:
    manifest_path, constants_dict, want_dice, want_roi = args
    constants = ScoringConstants.from_dict(constants_dict)
    return _assess_video(manifest_path, constants, want_dice, want_roi)


def _prediction_from_assess(video_id: str, data: dict) -> VideoPrediction:
    pred = data["prediction"]
    if "error" in pred:
        return VideoPrediction(video_id, None, None, None, error=pred["error"])
    return VideoPrediction(
        video_id=video_id,
        stations=tuple(pred["stations"]),
        fs=pred["fs"],
        its=Indication(pred["its"]),
        frames_used=pred["frames_used"],
    )


def _aggregate_dice(per_video: list[dict[str, list] | None], average: str) -> dict | None:
    """Combine per-video, per-frame Dice lists into run-level values.

    average="frame" pools every frame in the run; average="video" takes
    a per-video mean first. Undefined frames (both masks empty) are
    excluded; a label with no defined frame is undefined for the run.
    """
    collected = [d for d in per_video if d is not None]
    if not collected:
        return None
    keys = list(ORGAN_SLUGS) + [PC_DICE_KEY]
    out: dict[str, float | None] = {}
    for key in keys:
        if average == "frame":
            pooled = [v for d in collected for v in d[key]]
            out[key] = metrics.macro_average(pooled)
        else:
            per_video_means = [metrics.macro_average(d[key]) for d in collected]
            out[key] = metrics.macro_average(per_video_means)
    if all(out[k] is None for k in keys):
        return None
    out[ORGAN_AVG_DICE_KEY] = metrics.macro_average([out[slug] for slug in ORGAN_SLUGS])
    return out


def _prf_dict(counts: ConfusionCounts) -> dict:
    precision, recall, f1 = metrics.precision_recall_f1(counts)
    return {
        "precision": precision,
        "recall": recall,
        "f1": f1,
        "tp": counts.tp,
        "fp": counts.fp,
        "tn": counts.tn,
        "fn": counts.fn,
    }


def _average_prf(rows: list[dict]) -> dict:
    return {
        metric: metrics.macro_average([row[metric] for row in rows])
        for metric in ("precision", "recall", "f1")
    }


def _evaluate_run(
    run: EvalRun,
    predictions: dict[str, VideoPrediction],
    ground_truth: dict[str, VideoGroundTruth],
    frame_data: dict[str, dict],
    constants: ScoringConstants,
    dice_average: str,
) -> dict:
    ok_ids = [vid for vid in run.video_ids if predictions[vid].ok]
    failed = {
        vid: predictions[vid].error for vid in run.video_ids if not predictions[vid].ok
    }
    entry: dict = {
        "label": run.label,
        "n_videos": len(run.video_ids),
        "n_failed": len(failed),
        "failed": failed,
        "error": None,
    }
    if not ok_ids:
        entry["error"] = "all videos failed"
        for key in (
            "stations",
            "stations_average",
            "its",
            "its_average",
            "fs_rmse",
            "fs_rmse_normalized",
            "dice",
            "roi_balanced_accuracy",
            "videos",
        ):
            entry[key] = None
        return entry

    preds = [predictions[vid].stations for vid in ok_ids]
    gts = [ground_truth[vid].stations for vid in ok_ids]
    station_counts = metrics.station_confusions(preds, gts)
    stations = {
        station.slug: _prf_dict(counts)
        for station, counts in zip(Station, station_counts)
    }
    entry["stations"] = stations
    entry["stations_average"] = _average_prf(list(stations.values()))

    pred_fs = [predictions[vid].fs for vid in ok_ids]
    gt_fs = [ground_truth[vid].fs for vid in ok_ids]
    rmse = metrics.fs_rmse(pred_fs, gt_fs)
    entry["fs_rmse"] = rmse
    entry["fs_rmse_normalized"] = metrics.normalized_rmse(rmse, constants)

    pred_its = [predictions[vid].its for vid in ok_ids]
    gt_its = [ground_truth[vid].its for vid in ok_ids]
    its_counts = metrics.its_confusions(pred_its, gt_its)
    its_rows = {ind.value: _prf_dict(counts) for ind, counts in its_counts.items()}
    entry["its"] = its_rows
    entry["its_average"] = _average_prf(list(its_rows.values()))

    entry["dice"] = _aggregate_dice(
        [frame_data.get(vid, {}).get("dice") for vid in ok_ids], dice_average
    )

    roi_total = ConfusionCounts()
    saw_roi = False
    for vid in ok_ids:
        roi = frame_data.get(vid, {}).get("roi")
        if roi is not None:
            saw_roi = True
            roi_total = roi_total + ConfusionCounts(tp=roi[0], fp=roi[1], tn=roi[2], fn=roi[3])
    if saw_roi:
        try:
            entry["roi_balanced_accuracy"] = metrics.balanced_accuracy(roi_total)
        except CarcinoError:
            entry["roi_balanced_accuracy"] = None
    else:
        entry["roi_balanced_accuracy"] = None

    entry["videos"] = {
        vid: {
            "fs": predictions[vid].fs,
            "its": predictions[vid].its.value,
            "stations": list(predictions[vid].stations),
            "gt_fs": ground_truth[vid].fs,
            "gt_its": ground_truth[vid].its.value,
        }
        for vid in ok_ids
    }
    return entry


def _summary_value(values: list[float | None]) -> dict | None:
    try:
        return metrics.summarize_runs(values).to_dict()
    except CarcinoError:
        return None


def _summarize_report(run_entries: list[dict]) -> dict:
    """Mean/std across runs for every metric; failed runs contribute
    undefined values and show up in the excluded counts."""

    def collect(path: Callable[[dict], float | None]) -> dict | None:
        return _summary_value([path(entry) for entry in run_entries])

    def nested(entry: dict, *keys: str) -> float | None:
        node = entry
        for key in keys:
            if node is None:
                return None
            node = node.get(key)
        return node

    summary: dict = {"n_runs": len(run_entries)}
    summary["stations"] = {
        slug: {
            metric: collect(lambda e, s=slug, m=metric: nested(e, "stations", s, m))
            for metric in ("precision", "recall", "f1")
        }
        for slug in STATION_SLUGS
    }
    summary["stations_average"] = {
        metric: collect(lambda e, m=metric: nested(e, "stations_average", m))
        for metric in ("precision", "recall", "f1")
    }
    summary["its"] = {
        ind.value: {
            metric: collect(lambda e, i=ind.value, m=metric: nested(e, "its", i, m))
            for metric in ("precision", "recall", "f1")
        }
        for ind in Indication
    }
    summary["its_average"] = {
        metric: collect(lambda e, m=metric: nested(e, "its_average", m))
        for metric in ("precision", "recall", "f1")
    }
    summary["fs_rmse"] = collect(lambda e: e.get("fs_rmse"))
    summary["fs_rmse_normalized"] = collect(lambda e: e.get("fs_rmse_normalized"))
    dice_keys = list(ORGAN_SLUGS) + [ORGAN_AVG_DICE_KEY, PC_DICE_KEY]
    dice_summary = {
        key: collect(lambda e, k=key: nested(e, "dice", k)) for key in dice_keys
    }
    summary["dice"] = None if all(v is None for v in dice_summary.values()) else dice_summary
    summary["roi_balanced_accuracy"] = collect(lambda e: e.get("roi_balanced_accuracy"))
    summary["failed_videos_total"] = sum(entry["n_failed"] for entry in run_entries)
    return summary


def evaluate_cohort(
    cohort: Cohort,
    runs: FoldAssignment | Sequence[EvalRun],
    constants: ScoringConstants | None = None,
    *,
    predictor: str | Callable[[CohortVideo], VideoPrediction] = "pipeline",
    jobs: int = 1,
    dice_average: str = "frame",
    compute_dice: bool = True,
    compute_roi: bool = True,
    mode: str | None = None,
) -> dict:
    """Evaluate a cohort and return the report as a plain dict.

    runs is either a FoldAssignment (cross-validation: each fold is one
    run's test set) or an explicit run list (e.g. independent_runs).
    predictor is "pipeline" (score each video from its rasters),
    "oracle" (feed the ground truth back, for metric plumbing checks),
    or a callable for custom prediction sources (always sequential).
    Per-video failures are recorded in the report; a run only fails when
    all of its videos do, and evaluation only fails when every run does.
    Deterministic for fixed inputs regardless of the jobs count.
    """
    constants = constants or ScoringConstants()
    if dice_average not in ("frame", "video"):
        raise CarcinoError(f"dice_average must be 'frame' or 'video', got {dice_average!r}")
    if isinstance(runs, FoldAssignment):
        run_list = runs_from_folds(cohort, runs)
        mode = mode or "cross_validation"
    else:
        run_list = list(runs)
        mode = mode or "custom"
    if not run_list:
        raise EmptyCohortError("no runs to evaluate")

    by_id = {v.video_id: v for v in cohort.videos}
    position = {v.video_id: i for i, v in enumerate(cohort.videos)}
    seen = set()
    for run in run_list:
        for vid in run.video_ids:
            if vid not in by_id:
                raise CarcinoError(f"run {run.label!r} references unknown video {vid!r}")
            seen.add(vid)
    for vid in seen:
        if by_id[vid].ground_truth is None:
            raise MissingGroundTruthError(f"video {vid!r} has no ground truth")
    # prediction order follows the cohort ordering, not run order
    unique_ids = sorted(seen, key=position.__getitem__)

    ground_truth = {vid: by_id[vid].ground_truth for vid in unique_ids}
    predictions: dict[str, VideoPrediction] = {}
    frame_data: dict[str, dict] = {}
    predictor_name: str

    if predictor == "oracle":
        predictor_name = "oracle"
        for vid in unique_ids:
            gt = ground_truth[vid]
            predictions[vid] = VideoPrediction(
                video_id=vid, stations=gt.stations, fs=gt.fs, its=gt.its
            )
    elif predictor == "pipeline":
        predictor_name = "pipeline"
        tasks = [
            (str(by_id[vid].manifest_path), constants.to_dict(), compute_dice, compute_roi)
            for vid in unique_ids
        ]
        if jobs > 1 and len(tasks) > 1:
            with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
                results = list(pool.map(_assess_video_task, tasks))
        else:
            results = [_assess_video_task(task) for task in tasks]
        for vid, data in zip(unique_ids, results):
            predictions[vid] = _prediction_from_assess(vid, data)
            frame_data[vid] = data
    elif callable(predictor):
        predictor_name = getattr(predictor, "__name__", "custom")
        for vid in unique_ids:
            predictions[vid] = predictor(by_id[vid])
    else:
        raise CarcinoError(f"unknown predictor {predictor!r}")

    run_entries = [
        _evaluate_run(run, predictions, ground_truth, frame_data, constants, dice_average)
        for run in run_list
    ]
    if all(entry["error"] is not None for entry in run_entries):
        raise EmptyCohortError("every run failed: no video could be scored")

    return {
        "schema": REPORT_SCHEMA,
        "kind": "cohort_evaluation",
        "cohort": cohort.name,
        "n_videos": len(cohort.videos),
        "mode": mode,
        "predictor": predictor_name,
        "dice_average": dice_average,
        "constants": constants.to_dict(),
        "runs": run_entries,
        "summary": _summarize_report(run_entries),
    }


# --- text rendering --------------------------------------------------------


def _fmt_pct(summary: dict | None) -> str:
    if summary is None:
        return "n/a"
    return f"{100 * summary['mean']:.1f} ± {100 * summary['std']:.1f}"


def _fmt_points(summary: dict | None) -> str:
    if summary is None:
        return "n/a"
    return f"{summary['mean']:.3f} ± {summary['std']:.3f}"


def render_report_text(report: dict) -> str:
    """Aligned plain-text tables: station involvement and indication
    rows with precision/recall/F1, score error lines, and the Dice table
    when frame-level ground truth was available."""
    summary = report["summary"]
    constants = report.get("constants", {})
    cutoff = constants.get("its_cutoff", 8)
    lines: list[str] = []
    lines.append(
        f"Cohort evaluation: {report['cohort']} "
        f"({report['n_videos']} videos, {summary['n_runs']} runs, {report['mode']}, "
        f"predictor={report['predictor']})"
    )
    lines.append("")
    name_w = 34
    col_w = 15
    header = (
        f"{'AS Involvement':<{name_w}}"
        f"{'Precision':>{col_w}}{'Recall':>{col_w}}{'F1-score':>{col_w}}"
    )
    lines.append(header)
    lines.append("-" * len(header))
    for station in Station:
        row = summary["stations"][station.slug]
        lines.append(
            f"{STATION_DISPLAY[station]:<{name_w}}"
            f"{_fmt_pct(row['precision']):>{col_w}}"
            f"{_fmt_pct(row['recall']):>{col_w}}"
            f"{_fmt_pct(row['f1']):>{col_w}}"
        )
    avg = summary["stations_average"]
    lines.append(
        f"{'AS Involvement Average':<{name_w}}"
        f"{_fmt_pct(avg['precision']):>{col_w}}"
        f"{_fmt_pct(avg['recall']):>{col_w}}"
        f"{_fmt_pct(avg['f1']):>{col_w}}"
    )
    lines.append("-" * len(header))
    its_display = {
        Indication.SURGERY_INDICATED.value: f"ItS < {cutoff}",
        Indication.SURGERY_CONTRAINDICATED.value: f"ItS >= {cutoff}",
    }
    for key, label in its_display.items():
        row = summary["its"][key]
        lines.append(
            f"{label:<{name_w}}"
            f"{_fmt_pct(row['precision']):>{col_w}}"
            f"{_fmt_pct(row['recall']):>{col_w}}"
            f"{_fmt_pct(row['f1']):>{col_w}}"
        )
    its_avg = summary["its_average"]
    lines.append(
        f"{'ItS Average':<{name_w}}"
        f"{_fmt_pct(its_avg['precision']):>{col_w}}"
        f"{_fmt_pct(its_avg['recall']):>{col_w}}"
        f"{_fmt_pct(its_avg['f1']):>{col_w}}"
    )
    lines.append("")
    lines.append(f"FS RMSE (points):     {_fmt_points(summary['fs_rmse'])}")
    lines.append(f"FS RMSE (normalized): {_fmt_points(summary['fs_rmse_normalized'])}")
    if summary.get("dice") is not None:
        lines.append("")
        lines.append(f"{'Segmentation Dice':<{name_w}}{'Dice (%)':>{col_w}}")
        lines.append("-" * (name_w + col_w))
        dice_summary = summary["dice"]
        for organ in OrganClass:
            lines.append(
                f"{ORGAN_DISPLAY[organ]:<{name_w}}{_fmt_pct(dice_summary[organ.slug]):>{col_w}}"
            )
        lines.append(
            f"{'Average for anatomical structures':<{name_w}}"
            f"{_fmt_pct(dice_summary[ORGAN_AVG_DICE_KEY]):>{col_w}}"
        )
        lines.append(
            f"{'Peritoneal Carcinomatosis':<{name_w}}"
            f"{_fmt_pct(dice_summary[PC_DICE_KEY]):>{col_w}}"
        )
    if summary.get("roi_balanced_accuracy") is not None:
        lines.append("")
        lines.append(
            f"ROI balanced accuracy (%): {_fmt_pct(summary['roi_balanced_accuracy'])}"
        )
    lines.append("")
    failed_total = summary.get("failed_videos_total", 0)
    lines.append(f"Videos failing to score: {failed_total}")
    lines.append("Per-run values:")
    for entry in report["runs"]:
        if entry["error"] is not None:
            lines.append(f"  {entry['label']}: FAILED ({entry['error']})")
            continue
        f1 = entry["stations_average"]["f1"]
        its_f1 = entry["its_average"]["f1"]
        lines.append(
            f"  {entry['label']}: videos={entry['n_videos']} failed={entry['n_failed']} "
            f"rmse={entry['fs_rmse']:.3f} "
            f"stationsF1={'n/a' if f1 is None else format(f1, '.3f')} "
            f"itsF1={'n/a' if its_f1 is None else format(its_f1, '.3f')}"
        )
    return "\n".join(lines) + "\n"
