"""Dataset ingestion and preprocessing.

Raw layout expected under a gaze root directory::

    <gaze_root>/<image_id>/<observer_id>.csv

Each CSV holds one recording with a header row and columns
``timestamp_s, lat_rad, lon_rad`` (angles in radians).  Binocular
recordings may instead provide ``lat_rad_left, lon_rad_left, lat_rad_right,
lon_rad_right``; the loader folds them into a single cyclopean direction by
normalizing the mean of the two eye vectors.

Panoramas live in a separate image root as ``<image_id>.png`` (or .jpg)
equirectangular images with a 2:1 aspect ratio.

The preprocessing pipeline (filter -> downsample -> truncate -> split)
materializes a cache directory with one CSV per retained sequence, resized
panoramas, and a JSON manifest.  Reruns over unchanged inputs produce a
byte-identical cache.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, replace
from pathlib import Path

import cv2
import numpy as np

from .errors import (
    DataEmptyError,
    MissingColumnError,
    NonIntegerDecimationError,
    ParseError,
    ShapeMismatchError,
    TooShortError,
    WrongImageCountError,
)
from .sequences import GazeSequence

MANIFEST_FORMAT_VERSION = 1
IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg")

MONOCULAR_COLUMNS = ("timestamp_s", "lat_rad", "lon_rad")
BINOCULAR_COLUMNS = (
    "timestamp_s",
    "lat_rad_left",
    "lon_rad_left",
    "lat_rad_right",
    "lon_rad_right",
)

__all__ = [
    "Panorama",
    "PreprocessConfig",
    "SITZMANN",
    "SALIENT360",
    "read_sequence_csv",
    "write_sequence_csv",
    "load_recordings",
    "filter_min_samples",
    "downsample",
    "truncate",
    "split_train_test",
    "load_panorama",
    "resize_panorama",
    "preprocess",
    "load_manifest",
    "load_processed",
]


@dataclass(frozen=True)
class Panorama:
    """An equirectangular RGB panorama (H x W x 3, uint8, W = 2H)."""

    pixels: np.ndarray
    image_id: str = ""

    def __post_init__(self) -> None:
        px = np.asarray(self.pixels)
        if px.ndim != 3 or px.shape[2] != 3 or px.dtype != np.uint8:
            raise ShapeMismatchError(f"panorama must be (H, W, 3) uint8, got {px.shape} {px.dtype}")
        h, w = px.shape[:2]
        if w != 2 * h:
            raise ShapeMismatchError(f"equirectangular aspect requires W = 2H, got {h}x{w}")
        object.__setattr__(self, "pixels", px)

    @property
    def size(self) -> tuple[int, int]:
        return self.pixels.shape[0], self.pixels.shape[1]


@dataclass(frozen=True)
class PreprocessConfig:
    """Dataset-specific preprocessing parameters.

    ``target_length`` must be reachable after decimation, i.e. at most
    ``ceil(min_samples * target_rate / native_rate)``.
    """

    dataset: str
    min_samples: int
    target_length: int
    native_rate: float | None = None
    target_rate: float = 30.0
    image_size: tuple[int, int] = (128, 256)
    expected_image_count: int | None = None
    test_image_count: int = 3
    test_images: tuple[str, ...] = ()
    all_test: bool = False
    split_seed: int = 0

    def __post_init__(self) -> None:
        if self.min_samples < 1 or self.target_length < 1:
            raise ValueError("min_samples and target_length must be >= 1")
        if self.native_rate is not None:
            k = self.native_rate / self.target_rate
            reachable = math.ceil(self.min_samples / k)
            if self.target_length > reachable:
                raise ValueError(
                    f"target_length {self.target_length} exceeds the {reachable} samples "
                    f"guaranteed by min_samples {self.min_samples} after {k:g}x decimation"
                )


SITZMANN = PreprocessConfig(
    dataset="sitzmann",
    min_samples=3481,
    target_length=871,
    native_rate=120.0,
    expected_image_count=22,
    test_image_count=3,
)

SALIENT360 = PreprocessConfig(
    dataset="salient360",
    min_samples=1441,
    target_length=721,
    native_rate=60.0,
    all_test=True,
)


def _parse_float(text: str, path: Path, row_num: int, column: str) -> float:
    try:
        value = float(text)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"{path}, row {row_num}: bad value {text!r} in column {column}") from exc
    if not math.isfinite(value):
        raise ParseError(f"{path}, row {row_num}: non-finite value in column {column}")
    return value


def _infer_rate(timestamps: np.ndarray, path: Path) -> float:
    dt = np.diff(timestamps)
    if np.any(dt <= 0):
        bad = int(np.argmax(dt <= 0)) + 2
        raise ParseError(f"{path}, row {bad}: timestamps must be strictly increasing")
    rate = 1.0 / float(np.median(dt))
    # Trackers advertise integer rates; absorb decimal dust from the file.
    if abs(rate - round(rate)) < 1e-3 * max(rate, 1.0):
        rate = float(round(rate))
    return rate


def read_sequence_csv(path: str | Path, image_id: str = "", observer_id: str = "") -> GazeSequence:
    """Parse one recording CSV into a :class:`GazeSequence`.

    Accepts the monocular schema ``timestamp_s, lat_rad, lon_rad`` or the
    binocular left/right variant (folded to a cyclopean mean).  The sample
    rate is inferred from the median timestamp step.

    Raises
    ------
    MissingColumnError
        If the header lacks the required columns.
    ParseError
        On unreadable values, NaNs, out-of-range angles, non-monotonic
        timestamps, or fewer than 2 data rows.
    """
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        if all(c in header for c in MONOCULAR_COLUMNS):
            columns = MONOCULAR_COLUMNS
        elif all(c in header for c in BINOCULAR_COLUMNS):
            columns = BINOCULAR_COLUMNS
        else:
            missing = [c for c in MONOCULAR_COLUMNS if c not in header]
            raise MissingColumnError(f"{path}: missing columns {missing} (header {header})")
        rows: list[list[float]] = []
        for row_num, record in enumerate(reader, start=2):
            rows.append([_parse_float(record.get(c), path, row_num, c) for c in columns])
    if len(rows) < 2:
        raise ParseError(f"{path}: needs at least 2 data rows, found {len(rows)}")

    data = np.asarray(rows, dtype=np.float64)
    timestamps = data[:, 0]
    if columns is MONOCULAR_COLUMNS:
        phi, lam = data[:, 1], data[:, 2]
        points = None
    else:
        from .geometry import angles_to_vectors

        left = angles_to_vectors(data[:, 1], data[:, 2])
        right = angles_to_vectors(data[:, 3], data[:, 4])
        mean = (left + right) / 2.0
        norms = np.linalg.norm(mean, axis=1)
        if np.any(norms < 1e-6):
            bad = int(np.argmax(norms < 1e-6)) + 2
            raise ParseError(f"{path}, row {bad}: left/right gaze directions cancel out")
        points = mean / norms[:, None]
        phi = None
    if phi is not None and np.any(np.abs(phi) > np.pi / 2 + 1e-9):
        bad = int(np.argmax(np.abs(phi) > np.pi / 2 + 1e-9)) + 2
        raise ParseError(f"{path}, row {bad}: latitude outside [-pi/2, pi/2]")

    rate = _infer_rate(timestamps, path)
    if points is None:
        return GazeSequence.from_angles(phi, lam, rate, image_id=image_id, observer_id=observer_id)
    return GazeSequence(points, rate, image_id=image_id, observer_id=observer_id)


def write_sequence_csv(path: str | Path, seq: GazeSequence) -> None:
    """Write a sequence in the exchange schema ``timestamp_s, lat_rad, lon_rad``.

    Floats are written with shortest round-trip formatting, so rewriting an
    unchanged sequence is byte-identical.
    """
    phi, lam = seq.to_angles()
    times = seq.timestamps
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write("timestamp_s,lat_rad,lon_rad\n")
        for t, p, l in zip(times, phi, lam):
            fh.write(f"{float(t)!r},{float(p)!r},{float(l)!r}\n")


def load_recordings(path: str | Path, config: PreprocessConfig | None = None) -> list[GazeSequence]:
    """Load every recording under ``<path>/<image_id>/<observer>.csv``.

    When ``config`` provides a ``native_rate``, each file's inferred rate
    must match it within 2%.

    Returns sequences in sorted (image_id, observer_id) order.
    """
    root = Path(path)
    if not root.is_dir():
        raise ParseError(f"gaze directory not found: {root}")
    sequences = []
    for image_dir in sorted(p for p in root.iterdir() if p.is_dir()):
        for csv_path in sorted(image_dir.glob("*.csv")):
            seq = read_sequence_csv(csv_path, image_id=image_dir.name, observer_id=csv_path.stem)
            if config is not None and config.native_rate is not None:
                if abs(seq.sample_rate - config.native_rate) > 0.02 * config.native_rate:
                    raise ParseError(
                        f"{csv_path}: sample rate {seq.sample_rate:g} Hz does not match "
                        f"the {config.dataset} native rate {config.native_rate:g} Hz"
                    )
            sequences.append(seq)
    return sequences


def filter_min_samples(seqs: list[GazeSequence], min_samples: int) -> list[GazeSequence]:
    """Keep only sequences with at least ``min_samples`` samples."""
    if min_samples < 1:
        raise ValueError("min_samples must be >= 1")
    return [s for s in seqs if len(s) >= min_samples]


def downsample(seq: GazeSequence, target_rate: float) -> GazeSequence:
    """Decimate to ``target_rate`` by keeping every k-th sample from index 0.

    Raises
    ------
    NonIntegerDecimationError
        If the native rate is not an integer multiple of the target rate.
    """
    ratio = seq.sample_rate / target_rate
    k = round(ratio)
    if k < 1 or abs(ratio - k) > 1e-6 * ratio:
        raise NonIntegerDecimationError(
            f"native rate {seq.sample_rate:g} Hz is not an integer multiple of {target_rate:g} Hz"
        )
    if k == 1:
        return seq
    return replace(seq, points=seq.points[::k], sample_rate=seq.sample_rate / k)


def truncate(seq: GazeSequence, target_length: int) -> GazeSequence:
    """Keep the first ``target_length`` samples.

    Raises
    ------
    TooShortError
        If the sequence is shorter than ``target_length``.
    """
    if len(seq) < target_length:
        raise TooShortError(f"sequence has {len(seq)} samples, needs {target_length}")
    if len(seq) == target_length:
        return seq
    return replace(seq, points=seq.points[:target_length])


def split_train_test(
    image_ids: list[str], config: PreprocessConfig
) -> tuple[list[str], list[str]]:
    """Split image ids into (train, test) lists per the dataset config.

    Explicit ``config.test_images`` win; otherwise the test images are a
    seeded deterministic draw of ``test_image_count`` ids.  With
    ``all_test`` every image is test (no training split).

    Raises
    ------
    WrongImageCountError
        If ``expected_image_count`` is set and does not match.
    """
    ids = sorted(image_ids)
    if len(set(ids)) != len(ids):
        raise WrongImageCountError("duplicate image ids in split input")
    if config.all_test:
        return [], ids
    if config.expected_image_count is not None and len(ids) != config.expected_image_count:
        raise WrongImageCountError(
            f"{config.dataset} expects {config.expected_image_count} images, got {len(ids)}"
        )
    if config.test_images:
        unknown = sorted(set(config.test_images) - set(ids))
        if unknown:
            raise WrongImageCountError(f"configured test images not in dataset: {unknown}")
        test = sorted(set(config.test_images))
    else:
        rng = np.random.default_rng(config.split_seed)
        test = sorted(rng.choice(ids, size=config.test_image_count, replace=False).tolist())
    train = [i for i in ids if i not in set(test)]
    return train, test


def load_panorama(path: str | Path, image_id: str = "") -> Panorama:
    """Load a PNG/JPEG equirectangular panorama as RGB uint8."""
    path = Path(path)
    bgr = cv2.imread(str(path), cv2.IMREAD_COLOR)
    if bgr is None:
        raise ParseError(f"unreadable image: {path}")
    rgb = np.ascontiguousarray(bgr[:, :, ::-1])
    return Panorama(rgb, image_id=image_id or path.stem)


def resize_panorama(img: Panorama, size: tuple[int, int] = (128, 256)) -> Panorama:
    """Bilinear resample to ``size`` (H, W); same-size input passes through."""
    h, w = size
    if w != 2 * h:
        raise ShapeMismatchError(f"target size must keep W = 2H, got {h}x{w}")
    if img.size == (h, w):
        return Panorama(img.pixels, image_id=img.image_id)
    resized = cv2.resize(img.pixels, (w, h), interpolation=cv2.INTER_LINEAR)
    return Panorama(resized, image_id=img.image_id)


def _find_images(image_root: Path) -> dict[str, Path]:
    images: dict[str, Path] = {}
    for p in sorted(image_root.iterdir()):
        if p.suffix.lower() in IMAGE_SUFFIXES:
            images[p.stem] = p
    return images


def preprocess(
    gaze_root: str | Path,
    image_root: Path | str,
    cache_root: str | Path,
    config: PreprocessConfig,
) -> dict:
    """Run filter -> downsample -> truncate -> split and write the cache.

    The cache holds ``sequences/<image>__<observer>.csv``,
    ``images/<image>.png`` resized to ``config.image_size``, and
    ``manifest.json``.  Returns the manifest dict.
    """
    gaze_root, image_root, cache_root = Path(gaze_root), Path(image_root), Path(cache_root)
    if not image_root.is_dir():
        raise ParseError(f"image directory not found: {image_root}")
    images = _find_images(image_root)
    if not images:
        raise DataEmptyError(f"no panoramas found under {image_root}")

    raw = load_recordings(gaze_root, config)
    if not raw:
        raise DataEmptyError(f"no recordings found under {gaze_root}")
    missing_images = sorted({s.image_id for s in raw} - set(images))
    if missing_images:
        raise ParseError(f"recordings reference images with no panorama file: {missing_images}")

    kept = filter_min_samples(raw, config.min_samples)
    processed = [
        truncate(downsample(seq, config.target_rate), config.target_length) for seq in kept
    ]

    train, test = split_train_test(sorted(images), config)
    split_of = {i: "train" for i in train}
    split_of.update({i: "test" for i in test})

    seq_dir = cache_root / "sequences"
    img_dir = cache_root / "images"
    seq_dir.mkdir(parents=True, exist_ok=True)
    img_dir.mkdir(parents=True, exist_ok=True)

    records = []
    for seq in processed:
        rel = f"sequences/{seq.image_id}__{seq.observer_id}.csv"
        write_sequence_csv(cache_root / rel, seq)
        records.append(
            {
                "image_id": seq.image_id,
                "observer_id": seq.observer_id,
                "file": rel,
                "length": len(seq),
                "sample_rate": seq.sample_rate,
                "split": split_of[seq.image_id],
            }
        )
    for image_id, src in images.items():
        resized = resize_panorama(load_panorama(src, image_id), config.image_size)
        ok = cv2.imwrite(str(img_dir / f"{image_id}.png"), resized.pixels[:, :, ::-1])
        if not ok:
            raise ParseError(f"failed to write {img_dir / (image_id + '.png')}")

    manifest = {
        "format_version": MANIFEST_FORMAT_VERSION,
        "dataset": config.dataset,
        "target_rate": config.target_rate,
        "target_length": config.target_length,
        "image_size": list(config.image_size),
        "split": {"train": train, "test": test},
        "counts": {
            "raw": len(raw),
            "dropped_too_short": len(raw) - len(kept),
            "retained": len(processed),
        },
        "sequences": records,
    }
    with open(cache_root / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest


def load_manifest(cache_root: str | Path) -> dict:
    path = Path(cache_root) / "manifest.json"
    if not path.is_file():
        raise ParseError(f"manifest not found: {path}")
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def load_processed(
    cache_root: str | Path, split: str | None = None
) -> tuple[list[GazeSequence], dict[str, Panorama]]:
    """Load cached sequences (optionally one split) and their panoramas."""
    cache_root = Path(cache_root)
    manifest = load_manifest(cache_root)
    seqs = []
    image_ids = set()
    for rec in manifest["sequences"]:
        if split is not None and rec["split"] != split:
            continue
        seq = read_sequence_csv(
            cache_root / rec["file"], image_id=rec["image_id"], observer_id=rec["observer_id"]
        )
        seqs.append(seq)
        image_ids.add(rec["image_id"])
    panoramas = {
        image_id: load_panorama(cache_root / "images" / f"{image_id}.png", image_id)
        for image_id in sorted(image_ids)
    }
    return seqs, panoramas
