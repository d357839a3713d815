"""Domain vocabulary and fixed clinical constants.

Eight segmentable anatomical structures map onto six scoring stations.
Each station involved by peritoneal carcinomatosis contributes a fixed
number of points (default 2) to the video-level Fagotti score (FS), and
the total decides the indication to surgery at a fixed cutoff (default
8: below it surgery is indicated, at or above it is contraindicated).

Integer codes for organs (0-7) and stations (0-5) are frozen so that
binary mask files and reports stay portable across implementations.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields, replace
from enum import Enum, IntEnum
from pathlib import Path

from .errors import CarcinoError

__all__ = [
    "OrganClass",
    "Station",
    "Indication",
    "ScoringConstants",
    "station_of",
    "organs_of",
    "ORGAN_SLUGS",
    "STATION_SLUGS",
    "ORGAN_DISPLAY",
    "STATION_DISPLAY",
]


class OrganClass(IntEnum):
    """Segmentable anatomical structures, in frozen channel order."""

    DIAPHRAGM = 0
    LIVER = 1
    STOMACH = 2
    SPLEEN = 3
    LESSER_OMENTUM = 4
    GREATER_OMENTUM = 5
    PARIETAL_PERITONEUM = 6
    BOWEL = 7

    @property
    def slug(self) -> str:
        return self.name.lower()


class Station(IntEnum):
    """The six scoring stations of the video-level assessment."""

    DIAPHRAGM = 0
    LIVER = 1
    STOMACH_SPLEEN_LESSER_OMENTUM = 2
    GREATER_OMENTUM = 3
    PARIETAL_PERITONEUM = 4
    BOWEL = 5

    @property
    def slug(self) -> str:
        return self.name.lower()


class Indication(Enum):
    """Binary surgery indication derived from the total score."""

    SURGERY_INDICATED = "SurgeryIndicated"
    SURGERY_CONTRAINDICATED = "SurgeryContraindicated"


_ORGAN_TO_STATION = {
    OrganClass.DIAPHRAGM: Station.DIAPHRAGM,
    OrganClass.LIVER: Station.LIVER,
    OrganClass.STOMACH: Station.STOMACH_SPLEEN_LESSER_OMENTUM,
    OrganClass.SPLEEN: Station.STOMACH_SPLEEN_LESSER_OMENTUM,
    OrganClass.LESSER_OMENTUM: Station.STOMACH_SPLEEN_LESSER_OMENTUM,
    OrganClass.GREATER_OMENTUM: Station.GREATER_OMENTUM,
    OrganClass.PARIETAL_PERITONEUM: Station.PARIETAL_PERITONEUM,
    OrganClass.BOWEL: Station.BOWEL,
}

ORGAN_SLUGS = tuple(o.slug for o in OrganClass)
STATION_SLUGS = tuple(s.slug for s in Station)

ORGAN_DISPLAY = {
    OrganClass.DIAPHRAGM: "Diaphragm",
    OrganClass.LIVER: "Liver",
    OrganClass.STOMACH: "Stomach",
    OrganClass.SPLEEN: "Spleen",
    OrganClass.LESSER_OMENTUM: "Lesser Omentum",
    OrganClass.GREATER_OMENTUM: "Greater Omentum",
    OrganClass.PARIETAL_PERITONEUM: "Parietal peritoneum",
    OrganClass.BOWEL: "Bowel",
}

STATION_DISPLAY = {
    Station.DIAPHRAGM: "Diaphragm",
    Station.LIVER: "Liver",
    Station.STOMACH_SPLEEN_LESSER_OMENTUM: "Stomach, Spleen, Lesser Omentum",
    Station.GREATER_OMENTUM: "Greater Omentum",
    Station.PARIETAL_PERITONEUM: "Parietal peritoneum",
    Station.BOWEL: "Bowel",
}


def station_of(organ: OrganClass | int) -> Station:
    """Map an anatomical structure to its scoring station.

    Total over all eight organs: stomach, spleen and lesser omentum share
    one station, every other organ is a station of its own.
    """
    return _ORGAN_TO_STATION[OrganClass(organ)]


def organs_of(station: Station | int) -> tuple[OrganClass, ...]:
    """Preimage of ``station_of``: the organs grouped under a station."""
    station = Station(station)
    return tuple(o for o in OrganClass if _ORGAN_TO_STATION[o] is station)


@dataclass(frozen=True)
class ScoringConstants:
    """Pipeline thresholds and scoring rules, threaded explicitly.

    Defaults are the clinical operating point; every field can be
    overridden (e.g. for threshold-sweep experiments) via ``replace_with``
    or a JSON config file.

    organ_confidence_threshold / pc_confidence_threshold: minimum model
        confidence for a pixel to enter an organ / carcinomatosis mask
        (inclusive, >= semantics).
    points_per_positive_station: score contribution of an involved station.
    its_cutoff: total score at or above which surgery is contraindicated.
    frame_sampling_interval: seconds between frames sampled from ROIs.
    fs_step: score step size; divisor for the normalized RMSE.
    roi_threshold: minimum relevance score for a frame to be assessed.
    min_nodule_pixels: speck suppression; nodules smaller than this are
        dropped (1 keeps everything).
    """

    organ_confidence_threshold: float = 0.70
    pc_confidence_threshold: float = 0.90
    points_per_positive_station: int = 2
    its_cutoff: int = 8
    frame_sampling_interval: float = 5.0
    fs_step: int = 2
    roi_threshold: float = 0.5
    min_nodule_pixels: int = 1

    def __post_init__(self) -> None:
        if not 0.0 < self.organ_confidence_threshold <= 1.0:
            raise CarcinoError("organ_confidence_threshold must lie in (0, 1]")
        if not 0.0 < self.pc_confidence_threshold <= 1.0:
            raise CarcinoError("pc_confidence_threshold must lie in (0, 1]")
        if not 0.0 <= self.roi_threshold <= 1.0:
            raise CarcinoError("roi_threshold must lie in [0, 1]")
        if self.points_per_positive_station <= 0:
            raise CarcinoError("points_per_positive_station must be positive")
        if self.its_cutoff <= 0:
            raise CarcinoError("its_cutoff must be positive")
        if self.frame_sampling_interval <= 0:
            raise CarcinoError("frame_sampling_interval must be positive")
        if self.fs_step <= 0:
            raise CarcinoError("fs_step must be positive")
        if self.min_nodule_pixels < 1:
            raise CarcinoError("min_nodule_pixels must be >= 1")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ScoringConstants":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise CarcinoError(f"unknown constants field(s): {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_json_file(cls, path: str | Path) -> "ScoringConstants":
        """Load overrides from a JSON object; absent fields keep defaults."""
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise CarcinoError(f"constants file {path}: invalid JSON ({exc})") from exc
        if not isinstance(data, dict):
            raise CarcinoError(f"constants file {path}: expected a JSON object")
        return cls.from_dict(data)

    def replace_with(self, **changes) -> "ScoringConstants":
        return replace(self, **changes)
