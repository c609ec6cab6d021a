"""The core gaze-sequence container shared by every pipeline stage."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import NonUnitVectorError
from .geometry import UNIT_NORM_TOL, angles_to_vectors, vectors_to_angles

__all__ = ["GazeSequence"]


@dataclass(frozen=True)
class GazeSequence:
    """A fixed-rate sequence of on-sphere gaze points.

    Attributes
    ----------
    points : ndarray
        Array of shape ``(L, 3)``, one unit vector per sample.
    sample_rate : float
        Sampling rate in Hz; timestamps are implicit as ``index / rate``.
    image_id, observer_id : str
        Source identifiers; empty for synthetic data.
    """

    points: np.ndarray
    sample_rate: float
    image_id: str = ""
    observer_id: str = ""
    _skip_validation: bool = field(default=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 3 or pts.shape[0] < 1:
            raise ValueError(f"points must have shape (L, 3) with L >= 1, got {pts.shape}")
        if self.sample_rate <= 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")
        if not self._skip_validation:
            norms = np.linalg.norm(pts, axis=1)
            worst = float(np.max(np.abs(norms - 1.0)))
            if worst > UNIT_NORM_TOL:
                raise NonUnitVectorError(
                    f"sequence contains a point with norm error {worst:.3e} > {UNIT_NORM_TOL}"
                )
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @classmethod
    def from_angles(
        cls,
        phi: np.ndarray,
        lam: np.ndarray,
        sample_rate: float,
        image_id: str = "",
        observer_id: str = "",
    ) -> "GazeSequence":
        """Build a sequence from latitude/longitude arrays in radians."""
        pts = angles_to_vectors(np.asarray(phi), np.asarray(lam))
        return cls(pts, sample_rate, image_id, observer_id, _skip_validation=True)

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def duration(self) -> float:
        """Time span between first and last sample in seconds."""
        return (len(self) - 1) / self.sample_rate

    @property
    def timestamps(self) -> np.ndarray:
        """Implicit sample timestamps ``index / sample_rate`` in seconds."""
        return np.arange(len(self), dtype=np.float64) / self.sample_rate

    def to_angles(self) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(phi, lam)`` arrays of shape ``(L,)`` in radians."""
        return vectors_to_angles(self.points)

    def with_points(self, points: np.ndarray) -> "GazeSequence":
        """Copy of this sequence with different points, same metadata."""
        return replace(self, points=points, _skip_validation=False)
