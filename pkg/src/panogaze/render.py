"""Static overlay figures: gaze polylines, numbered fixations, heat maps.

All functions write a PNG at the panorama's pixel size and return the
path.  Polylines are split wherever they cross the +-180 degree seam so
the drawing never smears across the frame.
"""

from __future__ import annotations

from pathlib import Path

import cv2
import matplotlib

matplotlib.use("Agg")

import numpy as np
from matplotlib import pyplot as plt
from matplotlib.collections import LineCollection

from .dataset import Panorama
from .errors import EmptyScanpathError, ResolutionMismatchError
from .events import Scanpath
from .geometry import angles_to_pixels, vectors_to_angles
from .saliency import SaliencyMap
from .sequences import GazeSequence

__all__ = ["render_sequence", "render_scanpath", "render_saliency"]

_DPI = 100


def _canvas(img: Panorama):
    h, w = img.size
    fig = plt.figure(figsize=(w / _DPI, h / _DPI), dpi=_DPI, frameon=False)
    ax = fig.add_axes([0.0, 0.0, 1.0, 1.0])
    ax.set_axis_off()
    ax.imshow(img.pixels, interpolation="nearest")
    ax.set_xlim(-0.5, w - 0.5)
    ax.set_ylim(h - 0.5, -0.5)
    return fig, ax


def _save(fig, out_path: str | Path) -> Path:
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out_path, dpi=_DPI)
    plt.close(fig)
    return out_path


def _pixel_track(points: np.ndarray, size: tuple[int, int]) -> np.ndarray:
    phi, lam = vectors_to_angles(points)
    rows, cols = angles_to_pixels(phi, lam, *size)
    return np.column_stack([cols, rows])


def _seam_segments(track: np.ndarray, width: int) -> tuple[np.ndarray, np.ndarray]:
    """Consecutive-point segments, dropping any that jump across the seam."""
    a, b = track[:-1], track[1:]
    keep = np.abs(a[:, 0] - b[:, 0]) <= width / 2
    return np.stack([a, b], axis=1)[keep], np.nonzero(keep)[0]


def render_sequence(
    img: Panorama,
    seq: GazeSequence,
    out_path: str | Path,
    colormap: str = "viridis",
    linewidth: float = 1.5,
) -> Path:
    """Polyline of the gaze track, coloured from start (dark) to end (light)."""
    fig, ax = _canvas(img)
    track = _pixel_track(seq.points, img.size)
    if len(track) > 1:
        segments, kept = _seam_segments(track, img.size[1])
        colors = plt.get_cmap(colormap)(kept / max(len(track) - 2, 1))
        ax.add_collection(LineCollection(segments, colors=colors, linewidths=linewidth))
    ax.plot(track[0, 0], track[0, 1], "o", color="white", markersize=5, markeredgecolor="black")
    return _save(fig, out_path)


def render_scanpath(
    img: Panorama,
    path: Scanpath,
    out_path: str | Path,
    color: str = "yellow",
) -> Path:
    """Numbered fixation circles (radius grows with duration) joined in order."""
    if not path.fixations:
        raise EmptyScanpathError("cannot render an empty scanpath")
    fig, ax = _canvas(img)
    track = _pixel_track(path.points(), img.size)
    durations = np.array([f.duration for f in path.fixations])
    radii = 6.0 + 14.0 * durations / durations.max()
    if len(track) > 1:
        segments, _ = _seam_segments(track, img.size[1])
        ax.add_collection(
            LineCollection(segments, colors=color, linewidths=1.0, alpha=0.7)
        )
    for i, ((x, y), r) in enumerate(zip(track, radii), start=1):
        ax.add_patch(plt.Circle((x, y), r, fill=False, color=color, linewidth=1.5))
        ax.text(
            x,
            y,
            str(i),
            color=color,
            fontsize=9,
            ha="center",
            va="center",
            fontweight="bold",
        )
    return _save(fig, out_path)


def render_saliency(
    img: Panorama,
    smap: SaliencyMap,
    out_path: str | Path,
    alpha: float = 0.5,
    colormap: str = "jet",
) -> Path:
    """Heat overlay; the map may be any size with the panorama's 2:1 aspect."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    h, w = img.size
    values = smap.values
    if values.shape != (h, w):
        mh, mw = values.shape
        if mw * h != mh * w:
            raise ResolutionMismatchError(
                f"saliency map {values.shape} does not match panorama aspect {(h, w)}"
            )
        values = cv2.resize(values, (w, h), interpolation=cv2.INTER_LINEAR)
    peak = values.max()
    heat = values / peak if peak > 0 else values
    fig, ax = _canvas(img)
    ax.imshow(heat, cmap=colormap, alpha=alpha * heat, interpolation="bilinear")
    return _save(fig, out_path)
