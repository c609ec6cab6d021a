"""Sequence, scanpath, and saliency metrics plus the best/mean protocol.

Sequence-level metrics (LEV, DTW, MAE, RMSE) operate on pixel coordinates
at the evaluation resolution; scanpath recurrence (REC) operates on the
sphere with a great-circle threshold.  Image-space distances do not wrap
longitudinally by default (a point at column 0 and one at column W-1 are
W-1 px apart); pass ``wrap_width`` to use the wrapped column difference.

The best/mean protocol scores every generated item against all ground
truths and averages the per-item optimum (best) and the per-item average
(mean).  The human baseline applies the same reduction leave-one-out over
the ground truths, never comparing a sequence with itself.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.stats import rankdata

from .errors import (
    DataEmptyError,
    EmptyScanpathError,
    EmptySequenceError,
    LengthMismatchError,
    NoFixationsError,
    ResolutionMismatchError,
    TooFewSequencesError,
    ZeroMapError,
)
from .events import Scanpath
from .geometry import angles_to_pixels, central_angle_deg
from .sequences import GazeSequence

KL_EPSILON = 1e-12

__all__ = [
    "QuantGrid",
    "BestMean",
    "MetricReport",
    "edit_distance",
    "levenshtein",
    "dtw",
    "mae",
    "rmse",
    "recurrence",
    "best_mean",
    "human_baseline",
    "auc_judd",
    "nss",
    "cc",
    "sim",
    "kl_div",
    "saliency_metrics",
    "sequence_to_pixels",
    "scanpath_to_pixels",
    "evaluate_sequences",
    "evaluate_scanpaths",
    "evaluate_saliency",
]


@dataclass(frozen=True)
class QuantGrid:
    """Bin counts partitioning the equirectangular frame for LEV symbols."""

    rows: int = 8
    cols: int = 16

    def __post_init__(self) -> None:
        if self.rows < 1 or self.cols < 1:
            raise ValueError("grid needs rows >= 1 and cols >= 1")

    def cells(self, points_px: np.ndarray, height: int, width: int) -> np.ndarray:
        """Map (row, col) pixel points to flat cell indices."""
        pts = np.asarray(points_px, dtype=np.float64).reshape(-1, 2)
        cell_r = np.clip((pts[:, 0] / height * self.rows).astype(np.int64), 0, self.rows - 1)
        cell_c = np.clip((pts[:, 1] / width * self.cols).astype(np.int64), 0, self.cols - 1)
        return cell_r * self.cols + cell_c


@dataclass(frozen=True)
class BestMean:
    best: float
    mean: float


@dataclass
class MetricReport:
    """Best/mean scores for one image, with the settings that produced them."""

    image_id: str
    n_generated: int
    n_ground_truth: int
    metrics: dict[str, BestMean]
    settings: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "image_id": self.image_id,
            "n_generated": self.n_generated,
            "n_ground_truth": self.n_ground_truth,
            "metrics": {
                name: {"best": bm.best, "mean": bm.mean} for name, bm in self.metrics.items()
            },
            "settings": self.settings,
        }


# ---------------------------------------------------------------------------
# distance kernels
# ---------------------------------------------------------------------------


def edit_distance(a: Sequence, b: Sequence) -> int:
    """Classic unit-cost edit distance between two symbol sequences.

    Row-vectorized DP: the insertion recurrence ``cur[j] =
    min(cand[j], cur[j-1] + 1)`` is the prefix minimum of ``cand[k] - k``
    plus ``j``, so each DP row is a handful of array ops.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    m, n = len(a), len(b)
    if m == 0:
        return n
    if n == 0:
        return m
    offsets = np.arange(n + 1, dtype=np.int64)
    prev = offsets.copy()
    entry = np.empty(n + 1, dtype=np.int64)
    for i in range(1, m + 1):
        entry[0] = i
        np.minimum(prev[:-1] + (a[i - 1] != b), prev[1:] + 1, out=entry[1:])
        prev = offsets + np.minimum.accumulate(entry - offsets)
    return int(prev[-1])


def levenshtein(
    a_px: np.ndarray, b_px: np.ndarray, height: int, width: int, grid: QuantGrid = QuantGrid()
) -> int:
    """Edit distance between two pixel-space paths quantized on ``grid``."""
    return edit_distance(grid.cells(a_px, height, width), grid.cells(b_px, height, width))


def _point_array(points: np.ndarray, name: str) -> np.ndarray:
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError(f"{name} must have shape (N, 2), got {pts.shape}")
    return pts


def _displacements(a: np.ndarray, b: np.ndarray, wrap_width: int | None) -> np.ndarray:
    """Euclidean distances between paired points, optionally wrapping columns."""
    drow = a[..., 0] - b[..., 0]
    dcol = np.abs(a[..., 1] - b[..., 1])
    if wrap_width is not None:
        dcol = np.minimum(dcol, wrap_width - dcol)
    return np.hypot(drow, dcol)


def dtw(a_px: np.ndarray, b_px: np.ndarray, wrap_width: int | None = None) -> float:
    """Dynamic time warping with Euclidean point cost and a full window.

    Returns the sum of point costs along the optimal monotone warp.  The
    inner recurrence is vectorized per DP row: entering row i at column k
    and sliding right to j costs ``entry[k] + S[j] - S[k-1]`` with S the
    running cost sum, a prefix-minimum form.

    Raises
    ------
    EmptySequenceError
        If either input is empty.
    """
    a = _point_array(a_px, "a")
    b = _point_array(b_px, "b")
    if len(a) == 0 or len(b) == 0:
        raise EmptySequenceError("dtw inputs must be non-empty")
    cost = _displacements(a[:, None, :], b[None, :, :], wrap_width)
    m, n = cost.shape
    prev = np.cumsum(cost[0])
    entry = np.empty(n, dtype=np.float64)
    for i in range(1, m):
        row = cost[i]
        entry[0] = prev[0]
        np.minimum(prev[1:], prev[:-1], out=entry[1:])
        running = np.cumsum(row)
        prev = running + np.minimum.accumulate(entry - running + row)
    return float(prev[-1])


def _paired_displacements(
    a_px: np.ndarray, b_px: np.ndarray, wrap_width: int | None
) -> np.ndarray:
    a = _point_array(a_px, "a")
    b = _point_array(b_px, "b")
    if len(a) != len(b):
        raise LengthMismatchError(f"equal lengths required, got {len(a)} and {len(b)}")
    if len(a) == 0:
        raise EmptySequenceError("empty sequences")
    return _displacements(a, b, wrap_width)


def mae(a_px: np.ndarray, b_px: np.ndarray, wrap_width: int | None = None) -> float:
    """Mean per-index Euclidean pixel displacement."""
    return float(_paired_displacements(a_px, b_px, wrap_width).mean())


def rmse(a_px: np.ndarray, b_px: np.ndarray, wrap_width: int | None = None) -> float:
    """Root mean square per-index Euclidean pixel displacement."""
    return float(np.sqrt((_paired_displacements(a_px, b_px, wrap_width) ** 2).mean()))


def recurrence(a: Scanpath, b: Scanpath, threshold_deg: float = 2.0) -> float:
    """Cross-recurrence percentage between two scanpaths.

    Counts fixation pairs closer than ``threshold_deg`` great-circle
    degrees (strictly) and normalizes by the shorter path:
    ``100 * C / min(|a|, |b|)``.

    Raises
    ------
    EmptyScanpathError
        If either scanpath has no fixations.
    """
    if len(a) == 0 or len(b) == 0:
        raise EmptyScanpathError("recurrence needs non-empty scanpaths")
    pa = a.points()
    pb = b.points()
    angles = central_angle_deg(pa[:, None, :], pb[None, :, :])
    count = int(np.count_nonzero(angles < threshold_deg))
    return 100.0 * count / min(len(a), len(b))


# ---------------------------------------------------------------------------
# best/mean protocol
# ---------------------------------------------------------------------------


def _reduce_best_mean(scores: np.ndarray, minimize: bool) -> BestMean:
    per_best = scores.min(axis=1) if minimize else scores.max(axis=1)
    per_mean = scores.mean(axis=1)
    best = float(per_best.mean())
    mean = float(per_mean.mean())
    if minimize:
        assert best <= mean + 1e-12, "per-item optimum exceeded per-item average"
    else:
        assert best >= mean - 1e-12
    return BestMean(best=best, mean=mean)


def best_mean(
    gen: Sequence, gt: Sequence, metric: Callable, minimize: bool = True
) -> BestMean:
    """Score each generated item against all ground truths and aggregate.

    ``best`` averages the per-item optimum (min for distances, max when
    ``minimize=False``, e.g. REC); ``mean`` averages the per-item average.
    """
    if len(gen) == 0 or len(gt) == 0:
        raise DataEmptyError("best_mean needs non-empty generated and ground-truth lists")
    scores = np.array([[metric(g, r) for r in gt] for g in gen], dtype=np.float64)
    return _reduce_best_mean(scores, minimize)


def human_baseline(gt: Sequence, metric: Callable, minimize: bool = True) -> BestMean:
    """Leave-one-out agreement among ground truths (self-pairs excluded)."""
    if len(gt) < 2:
        raise TooFewSequencesError(f"human baseline needs >= 2 sequences, got {len(gt)}")
    scores = np.array(
        [[metric(gt[i], gt[j]) for j in range(len(gt)) if j != i] for i in range(len(gt))],
        dtype=np.float64,
    )
    return _reduce_best_mean(scores, minimize)


# ---------------------------------------------------------------------------
# saliency metrics
# ---------------------------------------------------------------------------


def _map_values(m) -> np.ndarray:
    values = np.asarray(getattr(m, "values", m), dtype=np.float64)
    if values.ndim != 2:
        raise ValueError(f"saliency map must be 2-D, got shape {values.shape}")
    return values


def _sum_normalize(values: np.ndarray) -> np.ndarray:
    total = values.sum()
    if total <= 0:
        raise ZeroMapError("map has zero total mass")
    return values / total


def _fixation_pixels(gt_fixations, shape: tuple[int, int]) -> np.ndarray:
    """Resolve fixations to unique integer (row, col) pixels on ``shape``."""
    height, width = shape
    if isinstance(gt_fixations, Scanpath):
        if len(gt_fixations) == 0:
            raise NoFixationsError("scanpath has no fixations")
        phi, lam = gt_fixations.angles()
        rows, cols = angles_to_pixels(phi, lam, height, width)
        px = np.stack([rows.astype(np.int64), cols.astype(np.int64)], axis=1)
    else:
        px = np.asarray(gt_fixations, dtype=np.int64).reshape(-1, 2)
    if len(px) == 0:
        raise NoFixationsError("no fixation pixels supplied")
    if np.any(px < 0) or np.any(px[:, 0] >= height) or np.any(px[:, 1] >= width):
        raise ValueError("fixation pixels outside the frame")
    return np.unique(px, axis=0)


def auc_judd(pred, gt_fixations) -> float:
    """AUC with fixation pixels positive and all other pixels negative.

    Equivalent to the threshold sweep over predicted values; ties are
    handled by midranks (trapezoidal ROC).
    """
    values = _map_values(pred)
    px = _fixation_pixels(gt_fixations, values.shape)
    flat = values.ravel()
    pos = px[:, 0] * values.shape[1] + px[:, 1]
    n_pos = len(pos)
    n_neg = flat.size - n_pos
    if n_neg == 0:
        raise NoFixationsError("fixations cover every pixel; no negatives left")
    ranks = rankdata(flat)
    return float((ranks[pos].sum() - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg))


def nss(pred, gt_fixations) -> float:
    """Mean standardized prediction at fixation pixels (0 if pred is flat)."""
    values = _map_values(pred)
    px = _fixation_pixels(gt_fixations, values.shape)
    sd = values.std()
    if sd == 0:
        return 0.0
    z = (values - values.mean()) / sd
    return float(z[px[:, 0], px[:, 1]].mean())


def cc(pred, gt_map) -> float:
    """Pearson correlation of two maps (0 if either is constant)."""
    p = _map_values(pred)
    g = _map_values(gt_map)
    if p.shape != g.shape:
        raise ResolutionMismatchError(f"map shapes differ: {p.shape} vs {g.shape}")
    pc = p.ravel() - p.mean()
    gc = g.ravel() - g.mean()
    denom = np.sqrt((pc**2).sum() * (gc**2).sum())
    if denom == 0:
        return 0.0
    return float((pc * gc).sum() / denom)


def sim(pred, gt_map) -> float:
    """Histogram intersection of the sum-normalized maps."""
    p = _map_values(pred)
    g = _map_values(gt_map)
    if p.shape != g.shape:
        raise ResolutionMismatchError(f"map shapes differ: {p.shape} vs {g.shape}")
    return float(np.minimum(_sum_normalize(p), _sum_normalize(g)).sum())


def kl_div(pred, gt_map, eps: float = KL_EPSILON) -> float:
    """KL divergence ``sum(g * log(g / (p + eps)))`` of sum-normalized maps.

    The epsilon regularizer means a self-comparison is not exactly 0 but
    ``-eps * N_nonzero``; the provable lower bound is ``-N * eps``.
    """
    p = _sum_normalize(_map_values(pred))
    g = _sum_normalize(_map_values(gt_map))
    if p.shape != g.shape:
        raise ResolutionMismatchError(f"map shapes differ: {p.shape} vs {g.shape}")
    mask = g > 0
    return float(np.sum(g[mask] * np.log(g[mask] / (p[mask] + eps))))


def saliency_metrics(pred, gt_map, gt_fixations) -> dict[str, float | None]:
    """AUC, NSS, CC, SIM, and KL between a predicted and ground-truth map.

    ``gt_fixations`` may be a Scanpath (mapped through the pixel
    convention) or an integer (N, 2) array of fixation pixels.  Without
    fixation locations (``None``) the fixation-based columns AUC and NSS
    are reported as ``None``; the map-to-map columns never need them.
    """
    p = _map_values(pred)
    g = _map_values(gt_map)
    if p.shape != g.shape:
        raise ResolutionMismatchError(f"map shapes differ: {p.shape} vs {g.shape}")
    have_fixations = gt_fixations is not None
    return {
        "AUC": auc_judd(p, gt_fixations) if have_fixations else None,
        "NSS": nss(p, gt_fixations) if have_fixations else None,
        "CC": cc(p, g),
        "SIM": sim(p, g),
        "KL": kl_div(p, g),
    }


# ---------------------------------------------------------------------------
# evaluation harnesses
# ---------------------------------------------------------------------------


def sequence_to_pixels(seq: GazeSequence, height: int, width: int) -> np.ndarray:
    """Project a gaze sequence to (row, col) pixel points, shape (L, 2)."""
    phi, lam = seq.to_angles()
    rows, cols = angles_to_pixels(phi, lam, height, width)
    return np.stack([rows, cols], axis=1)


def scanpath_to_pixels(path: Scanpath, height: int, width: int) -> np.ndarray:
    """Project fixation centres to (row, col) pixel points, shape (N, 2)."""
    phi, lam = path.angles()
    rows, cols = angles_to_pixels(phi, lam, height, width)
    return np.stack([rows, cols], axis=1)


def _pairwise_reports(
    gen_px: list[np.ndarray],
    gt_px: list[np.ndarray],
    metric_fns: dict[str, tuple[Callable, bool]],
    leave_one_out: bool,
) -> dict[str, BestMean]:
    out = {}
    for name, (fn, minimize) in metric_fns.items():
        if leave_one_out:
            scores = np.array(
                [
                    [fn(gt_px[i], gt_px[j]) for j in range(len(gt_px)) if j != i]
                    for i in range(len(gt_px))
                ],
                dtype=np.float64,
            )
        else:
            scores = np.array([[fn(g, r) for r in gt_px] for g in gen_px], dtype=np.float64)
        out[name] = _reduce_best_mean(scores, minimize)
    return out


def evaluate_sequences(
    gen: list[GazeSequence],
    gt: list[GazeSequence],
    height: int,
    width: int,
    grid: QuantGrid = QuantGrid(),
    wrap_width: int | None = None,
    image_id: str = "",
    human_baseline_mode: bool = False,
) -> MetricReport:
    """Best/mean LEV, DTW, MAE, RMSE between generated and ground truths.

    MAE/RMSE pairs of unequal length are truncated to the shorter length;
    the report's settings record how many pairs were truncated.
    """
    if human_baseline_mode:
        if len(gt) < 2:
            raise TooFewSequencesError("human baseline needs >= 2 ground truths")
    elif len(gen) == 0 or len(gt) == 0:
        raise DataEmptyError("evaluation needs non-empty sequence lists")
    gen_px = [sequence_to_pixels(s, height, width) for s in gen]
    gt_px = [sequence_to_pixels(s, height, width) for s in gt]

    truncated = 0

    def mae_trunc(a, b):
        nonlocal truncated
        n = min(len(a), len(b))
        if len(a) != len(b):
            truncated += 1
        return mae(a[:n], b[:n], wrap_width)

    def rmse_trunc(a, b):
        n = min(len(a), len(b))
        return rmse(a[:n], b[:n], wrap_width)

    metric_fns = {
        "LEV": (lambda a, b: float(levenshtein(a, b, height, width, grid)), True),
        "DTW": (lambda a, b: dtw(a, b, wrap_width), True),
        "MAE": (mae_trunc, True),
        "RMSE": (rmse_trunc, True),
    }
    metrics = _pairwise_reports(gen_px, gt_px, metric_fns, human_baseline_mode)
    return MetricReport(
        image_id=image_id,
        n_generated=0 if human_baseline_mode else len(gen),
        n_ground_truth=len(gt),
        metrics=metrics,
        settings={
            "kind": "sequences",
            "resolution": [height, width],
            "grid": [grid.rows, grid.cols],
            "wrap": wrap_width is not None,
            "mae_rmse_truncated_pairs": truncated,
            "human_baseline": human_baseline_mode,
        },
    )


def evaluate_scanpaths(
    gen: list[Scanpath],
    gt: list[Scanpath],
    height: int,
    width: int,
    grid: QuantGrid = QuantGrid(),
    wrap_width: int | None = None,
    threshold_deg: float = 2.0,
    image_id: str = "",
    human_baseline_mode: bool = False,
) -> MetricReport:
    """Best/mean LEV, DTW, REC between generated and ground-truth scanpaths.

    Fixation-free scanpaths are dropped (and counted in the settings)
    before scoring; an all-empty side raises :class:`DataEmptyError`.
    """
    n_gen_in, n_gt_in = len(gen), len(gt)
    gen = [p for p in gen if len(p) > 0]
    gt = [p for p in gt if len(p) > 0]
    if human_baseline_mode:
        if len(gt) < 2:
            raise TooFewSequencesError("human baseline needs >= 2 non-empty scanpaths")
    elif len(gen) == 0 or len(gt) == 0:
        raise DataEmptyError("evaluation needs non-empty scanpath lists")
    gen_px = [scanpath_to_pixels(p, height, width) for p in gen]
    gt_px = [scanpath_to_pixels(p, height, width) for p in gt]

    metric_fns = {
        "LEV": (lambda a, b: float(levenshtein(a, b, height, width, grid)), True),
        "DTW": (lambda a, b: dtw(a, b, wrap_width), True),
    }
    metrics = _pairwise_reports(gen_px, gt_px, metric_fns, human_baseline_mode)
    # REC is spherical; score on the scanpaths themselves.
    if human_baseline_mode:
        metrics["REC"] = human_baseline(
            gt, lambda a, b: recurrence(a, b, threshold_deg), minimize=False
        )
    else:
        metrics["REC"] = best_mean(
            gen, gt, lambda a, b: recurrence(a, b, threshold_deg), minimize=False
        )
    return MetricReport(
        image_id=image_id,
        n_generated=0 if human_baseline_mode else len(gen),
        n_ground_truth=len(gt),
        metrics=metrics,
        settings={
            "kind": "scanpaths",
            "resolution": [height, width],
            "grid": [grid.rows, grid.cols],
            "wrap": wrap_width is not None,
            "rec_threshold_deg": threshold_deg,
            "dropped_empty_generated": n_gen_in - len(gen),
            "dropped_empty_ground_truth": n_gt_in - len(gt),
            "human_baseline": human_baseline_mode,
        },
    )


def evaluate_saliency(pred, gt_map, gt_fixations, image_id: str = "") -> MetricReport:
    """Wrap :func:`saliency_metrics` in a report (best = mean = value)."""
    values = saliency_metrics(pred, gt_map, gt_fixations)
    return MetricReport(
        image_id=image_id,
        n_generated=1,
        n_ground_truth=1,
        metrics={name: BestMean(best=v, mean=v) for name, v in values.items()},
        settings={"kind": "saliency", "resolution": list(_map_values(pred).shape)},
    )
