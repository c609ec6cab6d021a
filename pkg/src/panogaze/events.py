"""Velocity-threshold eye-event detection, scanpaths, and gaze statistics.

The detector follows the median-based velocity-threshold scheme: a robust
spread estimate ``sigma_v = sqrt(median(v^2) - median(v)^2)`` sets the
saccade threshold ``theta_v = lambda_vel * sigma_v``, contiguous
supra-threshold runs of at least 2 samples are saccades, and everything
else is fixation.  Events always tile the sample range ``[0, L-1]``.

Scanpaths keep fixations of at least 150 ms (configurable); fixations
separated by a dropped short fixation are not merged.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    DataEmptyError,
    DegenerateMeanError,
    EmptyScanpathError,
    MissingColumnError,
    ParseError,
    SequenceTooShortError,
)
from .geometry import LatLon, angles_to_vectors, angular_velocity, vectors_to_angles
from .sequences import GazeSequence

DEFAULT_VELOCITY_MULTIPLIER = 2.0
DEFAULT_MIN_SACCADE_SAMPLES = 2
DEFAULT_MIN_FIXATION_DURATION = 0.150

SCANPATH_COLUMNS = ("onset_s", "duration_s", "lat_rad", "lon_rad")

__all__ = [
    "EyeEvent",
    "Fixation",
    "Scanpath",
    "EyeStats",
    "detect_events",
    "extract_scanpath",
    "spherical_centroid",
    "compute_stats",
    "read_scanpath_csv",
    "write_scanpath_csv",
]


@dataclass(frozen=True)
class EyeEvent:
    """One fixation or saccade covering samples ``start..end`` inclusive."""

    kind: str  # "fixation" | "saccade"
    start: int
    end: int
    duration: float  # (end - start + 1) / sample_rate

    def __post_init__(self) -> None:
        if self.kind not in ("fixation", "saccade"):
            raise ValueError(f"unknown event kind {self.kind!r}")
        if self.end < self.start:
            raise ValueError("event end before start")

    @property
    def n_samples(self) -> int:
        return self.end - self.start + 1


@dataclass(frozen=True)
class Fixation:
    """A fixation centre on the sphere with onset and duration in seconds."""

    point: LatLon
    onset: float
    duration: float


@dataclass(frozen=True)
class Scanpath:
    """Ordered fixations extracted from one gaze sequence."""

    fixations: tuple[Fixation, ...]
    image_id: str = ""
    observer_id: str = ""

    def __post_init__(self) -> None:
        onsets = [f.onset for f in self.fixations]
        if any(b <= a for a, b in zip(onsets, onsets[1:])):
            raise ValueError("fixation onsets must be strictly increasing")
        object.__setattr__(self, "fixations", tuple(self.fixations))

    def __len__(self) -> int:
        return len(self.fixations)

    def points(self) -> np.ndarray:
        """Fixation centres as unit vectors, shape ``(N, 3)``."""
        if not self.fixations:
            return np.zeros((0, 3), dtype=np.float64)
        phi = np.array([f.point.phi for f in self.fixations])
        lam = np.array([f.point.lam for f in self.fixations])
        return angles_to_vectors(phi, lam)

    def angles(self) -> tuple[np.ndarray, np.ndarray]:
        phi = np.array([f.point.phi for f in self.fixations], dtype=np.float64)
        lam = np.array([f.point.lam for f in self.fixations], dtype=np.float64)
        return phi, lam


@dataclass(frozen=True)
class EyeStats:
    """Across-sequence means and population SDs of per-sequence statistics."""

    mean_saccade_number: tuple[float, float]
    mean_saccade_velocity: tuple[float, float]  # deg/s over saccade samples
    mean_fixation_number: tuple[float, float]
    mean_fixation_duration: tuple[float, float]  # seconds
    n_sequences: int

    def to_dict(self) -> dict:
        def pair(v: tuple[float, float]) -> dict:
            return {"mean": v[0], "sd": v[1]}

        return {
            "mean_saccade_number": pair(self.mean_saccade_number),
            "mean_saccade_velocity_deg_s": pair(self.mean_saccade_velocity),
            "mean_fixation_number": pair(self.mean_fixation_number),
            "mean_fixation_duration_s": pair(self.mean_fixation_duration),
            "n_sequences": self.n_sequences,
        }


def velocity_threshold(v: np.ndarray, lambda_vel: float) -> float:
    """Robust saccade threshold ``lambda_vel * sigma_v`` for a velocity series."""
    med = float(np.median(v))
    med_sq = float(np.median(v**2))
    sigma = math.sqrt(max(med_sq - med**2, 0.0))
    return lambda_vel * sigma


def _runs(mask: np.ndarray) -> list[tuple[int, int, bool]]:
    """Maximal constant runs of a boolean mask as (start, end, value)."""
    runs = []
    start = 0
    for i in range(1, len(mask) + 1):
        if i == len(mask) or mask[i] != mask[start]:
            runs.append((start, i - 1, bool(mask[start])))
            start = i
    return runs


def detect_events(
    seq: GazeSequence,
    lambda_vel: float = DEFAULT_VELOCITY_MULTIPLIER,
    min_saccade_samples: int = DEFAULT_MIN_SACCADE_SAMPLES,
) -> list[EyeEvent]:
    """Segment a sequence into alternating fixation and saccade events.

    Supra-threshold runs shorter than ``min_saccade_samples`` are folded
    back into the surrounding fixation.  The returned events tile
    ``[0, L-1]`` without gaps or overlap.

    Raises
    ------
    SequenceTooShortError
        If the sequence has fewer than 5 samples.
    """
    if len(seq) < 5:
        raise SequenceTooShortError(f"event detection needs >= 5 samples, got {len(seq)}")
    v = angular_velocity(seq)
    theta = velocity_threshold(v, lambda_vel)
    is_saccade = v > theta
    for start, end, value in _runs(is_saccade):
        if value and end - start + 1 < min_saccade_samples:
            is_saccade[start : end + 1] = False
    rate = seq.sample_rate
    return [
        EyeEvent("saccade" if value else "fixation", start, end, (end - start + 1) / rate)
        for start, end, value in _runs(is_saccade)
    ]


def spherical_centroid(points: np.ndarray) -> LatLon:
    """Normalized vector mean of unit vectors, as latitude/longitude.

    Raises
    ------
    DegenerateMeanError
        If the vector mean is shorter than 1e-6 (antipodal spread).
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.size == 0:
        raise DataEmptyError("spherical centroid of an empty point set")
    mean = pts.mean(axis=0)
    norm = float(np.linalg.norm(mean))
    if norm < 1e-6:
        raise DegenerateMeanError(f"mean vector norm {norm:.2e} too small to normalize")
    phi, lam = vectors_to_angles(mean / norm)
    return LatLon(float(phi), float(lam))


def extract_scanpath(
    seq: GazeSequence,
    min_fix_dur: float = DEFAULT_MIN_FIXATION_DURATION,
    lambda_vel: float = DEFAULT_VELOCITY_MULTIPLIER,
) -> Scanpath:
    """Detect events and keep fixations of at least ``min_fix_dur`` seconds.

    Fixation centres are spherical centroids of their member samples;
    onsets are ``start_index / rate``.  Dropping a short fixation never
    merges its neighbours.
    """
    events = detect_events(seq, lambda_vel=lambda_vel)
    fixations = []
    for ev in events:
        if ev.kind != "fixation" or ev.duration < min_fix_dur:
            continue
        centre = spherical_centroid(seq.points[ev.start : ev.end + 1])
        fixations.append(Fixation(centre, onset=ev.start / seq.sample_rate, duration=ev.duration))
    return Scanpath(tuple(fixations), image_id=seq.image_id, observer_id=seq.observer_id)


def compute_stats(
    seqs: list[GazeSequence],
    lambda_vel: float = DEFAULT_VELOCITY_MULTIPLIER,
    min_fix_dur: float = DEFAULT_MIN_FIXATION_DURATION,
) -> EyeStats:
    """Aggregate eye-movement statistics across sequences.

    Per sequence: saccade count, mean angular velocity pooled over saccade
    samples, count of fixations passing the ``min_fix_dur`` filter, and
    their mean duration.  Across sequences: mean and population SD.
    Sequences contributing no saccade samples (or no kept fixations) are
    excluded from the corresponding velocity/duration averages.
    """
    if not seqs:
        raise DataEmptyError("compute_stats needs at least one sequence")
    sacc_counts, sacc_vels, fix_counts, fix_durs = [], [], [], []
    for seq in seqs:
        events = detect_events(seq, lambda_vel=lambda_vel)
        v = angular_velocity(seq)
        saccades = [e for e in events if e.kind == "saccade"]
        kept_fix = [
            e for e in events if e.kind == "fixation" and e.duration >= min_fix_dur
        ]
        sacc_counts.append(len(saccades))
        fix_counts.append(len(kept_fix))
        if saccades:
            samples = np.concatenate([v[e.start : e.end + 1] for e in saccades])
            sacc_vels.append(float(samples.mean()))
        if kept_fix:
            fix_durs.append(float(np.mean([e.duration for e in kept_fix])))

    def mean_sd(values: list[float]) -> tuple[float, float]:
        if not values:
            return float("nan"), float("nan")
        arr = np.asarray(values, dtype=np.float64)
        return float(arr.mean()), float(arr.std())

    return EyeStats(
        mean_saccade_number=mean_sd(sacc_counts),
        mean_saccade_velocity=mean_sd(sacc_vels),
        mean_fixation_number=mean_sd(fix_counts),
        mean_fixation_duration=mean_sd(fix_durs),
        n_sequences=len(seqs),
    )


def write_scanpath_csv(path: str | Path, scanpath: Scanpath) -> None:
    """Write a scanpath as ``onset_s, duration_s, lat_rad, lon_rad``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(",".join(SCANPATH_COLUMNS) + "\n")
        for f in scanpath.fixations:
            fh.write(
                f"{float(f.onset)!r},{float(f.duration)!r},"
                f"{float(f.point.phi)!r},{float(f.point.lam)!r}\n"
            )


def read_scanpath_csv(path: str | Path, image_id: str = "", observer_id: str = "") -> Scanpath:
    """Read a scanpath CSV written by :func:`write_scanpath_csv`.

    Also the ingestion format for third-party scanpaths.  May be empty
    (header only).
    """
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in SCANPATH_COLUMNS if c not in header]
        if missing:
            raise MissingColumnError(f"{path}: missing columns {missing}")
        fixations = []
        for row_num, record in enumerate(reader, start=2):
            values = []
            for column in SCANPATH_COLUMNS:
                raw = record.get(column)
                try:
                    value = float(raw)
                except (TypeError, ValueError) as exc:
                    raise ParseError(
                        f"{path}, row {row_num}: bad value {raw!r} in column {column}"
                    ) from exc
                if not math.isfinite(value):
                    raise ParseError(f"{path}, row {row_num}: non-finite {column}")
                values.append(value)
            onset, duration, phi, lam = values
            fixations.append(Fixation(LatLon(phi, lam), onset=onset, duration=duration))
    return Scanpath(tuple(fixations), image_id=image_id, observer_id=observer_id)


def require_nonempty(scanpath: Scanpath, what: str = "scanpath") -> Scanpath:
    """Raise :class:`EmptyScanpathError` for fixation-free scanpaths."""
    if len(scanpath) == 0:
        raise EmptyScanpathError(f"{what} has no fixations")
    return scanpath
