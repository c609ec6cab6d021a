"""Fixation maps and spherically blurred saliency maps.

Fixation centroids are binned on the equirectangular grid; each occupied
cell then splats a spherical Gaussian ``exp(-d^2 / (2 sigma^2))`` where
``d`` is the great-circle angle in degrees between the cell centre and
each pixel centre.  Kernels are truncated at ``4 sigma``, wrap
horizontally, and the result is sum-normalized.  A planar image-space blur
would misrepresent sigma near the poles; the spherical kernel keeps the
per-fixation mass latitude-independent under the spherical area element.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import cv2
import numpy as np

from .errors import ParseError, ResolutionMismatchError, ZeroMapError
from .events import Scanpath
from .geometry import angles_to_pixels

DEFAULT_SIGMA_DEG = 1.0
KERNEL_TRUNCATE_SIGMAS = 4.0

__all__ = [
    "FixationMap",
    "SaliencyMap",
    "accumulate_fixations",
    "blur_to_saliency",
    "normalize",
    "save_saliency",
    "load_saliency",
]


@dataclass(frozen=True)
class FixationMap:
    """Integer fixation counts per pixel on an H x W grid."""

    counts: np.ndarray

    def __post_init__(self) -> None:
        counts = np.asarray(self.counts)
        if counts.ndim != 2 or not np.issubdtype(counts.dtype, np.integer):
            raise ValueError(f"counts must be a 2-D integer grid, got {counts.shape} {counts.dtype}")
        if np.any(counts < 0):
            raise ValueError("fixation counts must be non-negative")
        object.__setattr__(self, "counts", counts)

    @property
    def total(self) -> int:
        return int(self.counts.sum())


@dataclass(frozen=True)
class SaliencyMap:
    """Non-negative saliency values with a normalization tag."""

    values: np.ndarray
    normalization: str = "none"  # "sum" | "max" | "none"

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise ValueError(f"values must be 2-D, got shape {values.shape}")
        if np.any(~np.isfinite(values)) or np.any(values < 0):
            raise ValueError("saliency values must be finite and non-negative")
        if self.normalization not in ("sum", "max", "none"):
            raise ValueError(f"unknown normalization tag {self.normalization!r}")
        object.__setattr__(self, "values", values)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


def accumulate_fixations(paths: list[Scanpath], size: tuple[int, int]) -> FixationMap:
    """Bin every fixation centroid of every scanpath into pixel counts."""
    height, width = size
    if height < 1 or width < 1:
        raise ValueError("map size must be at least 1x1")
    counts = np.zeros((height, width), dtype=np.int64)
    for path in paths:
        if len(path) == 0:
            continue
        phi, lam = path.angles()
        rows, cols = angles_to_pixels(phi, lam, height, width)
        np.add.at(counts, (rows.astype(np.int64), cols.astype(np.int64)), 1)
    return FixationMap(counts)


def _pixel_centre_angles(height: int, width: int) -> tuple[np.ndarray, np.ndarray]:
    phi = np.pi / 2 - (np.arange(height) + 0.0) * np.pi / height
    lam = -np.pi + np.arange(width) * 2 * np.pi / width
    return phi, lam


def blur_to_saliency(
    fmap: FixationMap,
    sigma_deg: float = DEFAULT_SIGMA_DEG,
    truncate: float = KERNEL_TRUNCATE_SIGMAS,
) -> SaliencyMap:
    """Splat a spherical Gaussian from every occupied cell; sum-normalize.

    Raises
    ------
    ZeroMapError
        If the fixation map is empty.
    """
    if sigma_deg <= 0:
        raise ValueError("sigma_deg must be positive")
    counts = fmap.counts
    height, width = counts.shape
    if fmap.total == 0:
        raise ZeroMapError("fixation map is empty; refusing to emit a silent uniform map")

    phi_rows, lam_cols = _pixel_centre_angles(height, width)
    reach_deg = truncate * sigma_deg
    drows = math.ceil(reach_deg * height / 180.0)
    out = np.zeros((height, width), dtype=np.float64)

    occupied = np.argwhere(counts > 0)
    for r0, c0 in occupied:
        weight = float(counts[r0, c0])
        rows = np.arange(max(r0 - drows, 0), min(r0 + drows, height - 1) + 1)
        # Column reach grows with 1/cos(phi) across the touched rows; cover
        # the worst case, or the full width near the poles.
        min_cos = float(np.min(np.abs(np.cos(phi_rows[rows]))))
        if min_cos < 1e-9:
            dcols = width  # forces the full ring below
        else:
            dcols = math.ceil(reach_deg * width / (360.0 * min_cos))
        if 2 * dcols + 1 >= width:
            offsets = np.arange(width) - width // 2
        else:
            offsets = np.arange(-dcols, dcols + 1)
        cols = np.mod(c0 + offsets, width)
        # Distances come from the haversine form in (phi0, phi, delta-lam)
        # with delta-lam built from integer column offsets, never from
        # absolute longitudes.  The kernel window is then bitwise identical
        # wherever the fixation sits on a row, so whole-column rotations
        # are exact and the truncation boundary cannot flip membership.
        dlam = offsets * (2.0 * np.pi / width)
        phi = phi_rows[rows][:, None]
        phi0 = phi_rows[r0]
        haversine = np.sin((phi - phi0) / 2.0) ** 2 + np.cos(phi) * np.cos(phi0) * np.sin(
            dlam[None, :] / 2.0
        ) ** 2
        d_deg = np.degrees(2.0 * np.arcsin(np.sqrt(np.clip(haversine, 0.0, 1.0))))
        kernel = np.exp(-(d_deg**2) / (2.0 * sigma_deg**2))
        kernel[d_deg > reach_deg] = 0.0
        out[np.ix_(rows, cols)] += weight * kernel

    total = out.sum()
    if total <= 0:
        raise ZeroMapError("blurred map has zero mass")
    return SaliencyMap(out / total, normalization="sum")


def normalize(smap: SaliencyMap, mode: str) -> SaliencyMap:
    """Rescale a map to ``sum`` = 1 or ``max`` = 1.

    Raises
    ------
    ZeroMapError
        If the map total is zero.
    """
    if mode not in ("sum", "max"):
        raise ValueError(f"unknown normalization mode {mode!r}")
    values = smap.values
    scale = values.sum() if mode == "sum" else values.max()
    if scale <= 0:
        raise ZeroMapError("cannot normalize a map with zero mass")
    return SaliencyMap(values / scale, normalization=mode)


def save_saliency(
    stem: str | Path, smap: SaliencyMap, sigma_deg: float, fixation_count: int
) -> list[Path]:
    """Write ``<stem>.png`` (16-bit, max-one), ``<stem>.npy`` (sum-one),
    and ``<stem>.json`` metadata.  Returns the written paths."""
    stem = Path(stem)
    stem.parent.mkdir(parents=True, exist_ok=True)
    max_one = normalize(smap, "max")
    sum_one = normalize(smap, "sum")
    png_path = stem.with_suffix(".png")
    ok = cv2.imwrite(str(png_path), np.round(max_one.values * 65535.0).astype(np.uint16))
    if not ok:
        raise ParseError(f"failed to write {png_path}")
    npy_path = stem.with_suffix(".npy")
    np.save(npy_path, sum_one.values)
    meta = {
        "sigma_deg": sigma_deg,
        "resolution": list(smap.shape),
        "fixation_count": fixation_count,
        "png_normalization": "max",
        "npy_normalization": "sum",
    }
    json_path = stem.with_suffix(".json")
    with open(json_path, "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return [png_path, npy_path, json_path]


def load_saliency(path: str | Path) -> SaliencyMap:
    """Load a map from a ``.npy`` sidecar or a grayscale PNG."""
    path = Path(path)
    if path.suffix == ".npy":
        return SaliencyMap(np.load(path), normalization="none")
    img = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if img is None:
        raise ParseError(f"unreadable saliency map: {path}")
    if img.ndim == 3:
        img = img.mean(axis=2)
    return SaliencyMap(img.astype(np.float64), normalization="none")


def require_same_shape(a: SaliencyMap, b: SaliencyMap) -> None:
    if a.shape != b.shape:
        raise ResolutionMismatchError(f"map shapes differ: {a.shape} vs {b.shape}")
