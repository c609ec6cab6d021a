"""Spherical geometry for gaze data on equirectangular panoramas.

Conventions used across the package:

* Latitude ``phi`` in radians, positive north, in [-pi/2, pi/2].
* Longitude ``lam`` in radians, positive east, normalized to [-pi, pi).
* A gaze direction maps to the unit vector
  ``(cos(phi)*cos(lam), cos(phi)*sin(lam), sin(phi))``.
* Pixel (row, col) of an H x W equirectangular frame samples
  ``phi = pi/2 - row*pi/H`` and ``lam = -pi + col*2*pi/W``; there is no
  half-pixel offset, row 0 lies on the north edge, rows clamp at the poles
  and columns wrap longitudinally.

Scalar operations work on the small value types below; the ``*_array``
functions are the vectorized kernels they delegate to.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from .errors import NonUnitVectorError, SequenceTooShortError

if TYPE_CHECKING:
    from .sequences import GazeSequence

UNIT_NORM_TOL = 1e-6

__all__ = [
    "LatLon",
    "UnitVec3",
    "PixelCoord",
    "latlon_to_unit",
    "unit_to_latlon",
    "latlon_to_pixel",
    "great_circle_deg",
    "angular_velocity",
    "angles_to_vectors",
    "vectors_to_angles",
    "angles_to_pixels",
    "central_angle_rad",
    "central_angle_deg",
]


@dataclass(frozen=True)
class LatLon:
    """A point on the sphere as latitude/longitude in radians.

    Longitude is wrapped into [-pi, pi) on construction; latitude must
    already lie in [-pi/2, pi/2] (up to float dust, which is clamped).
    """

    phi: float
    lam: float

    def __post_init__(self) -> None:
        phi = float(self.phi)
        if abs(phi) > np.pi / 2:
            if abs(phi) - np.pi / 2 > 1e-9:
                raise ValueError(f"latitude {phi} outside [-pi/2, pi/2]")
            phi = np.copysign(np.pi / 2, phi)
        lam = float(self.lam)
        if not (-np.pi <= lam < np.pi):
            lam = float(np.mod(lam + np.pi, 2 * np.pi) - np.pi)
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "lam", lam)


@dataclass(frozen=True)
class UnitVec3:
    """A direction on the unit sphere as Cartesian components."""

    x: float
    y: float
    z: float

    def __post_init__(self) -> None:
        norm = float(np.sqrt(self.x**2 + self.y**2 + self.z**2))
        if abs(norm - 1.0) > UNIT_NORM_TOL:
            raise NonUnitVectorError(f"vector norm {norm} deviates from 1 beyond {UNIT_NORM_TOL}")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=np.float64)


@dataclass(frozen=True)
class PixelCoord:
    """Fractional pixel coordinates on an equirectangular frame.

    ``0 <= row < height``; ``col`` is stored wrapped modulo ``width``.
    """

    row: float
    col: float
    height: int
    width: int


def angles_to_vectors(phi: np.ndarray, lam: np.ndarray) -> np.ndarray:
    """Convert latitude/longitude arrays to unit vectors.

    Parameters
    ----------
    phi, lam : ndarray
        Latitude and longitude in radians, broadcastable to a common shape.

    Returns
    -------
    ndarray
        Array of shape ``(..., 3)`` of unit vectors.
    """
    phi, lam = np.broadcast_arrays(
        np.asarray(phi, dtype=np.float64), np.asarray(lam, dtype=np.float64)
    )
    cos_phi = np.cos(phi)
    return np.stack([cos_phi * np.cos(lam), cos_phi * np.sin(lam), np.sin(phi)], axis=-1)


def vectors_to_angles(xyz: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Convert unit vectors of shape ``(..., 3)`` to ``(phi, lam)`` arrays.

    At the exact poles the longitude is 0 by the arctan2(0, 0) convention.
    """
    xyz = np.asarray(xyz, dtype=np.float64)
    x, y, z = xyz[..., 0], xyz[..., 1], xyz[..., 2]
    phi = np.arctan2(z, np.hypot(x, y))
    lam = np.arctan2(y, x)
    return phi, lam


def angles_to_pixels(
    phi: np.ndarray, lam: np.ndarray, height: int, width: int
) -> tuple[np.ndarray, np.ndarray]:
    """Map latitude/longitude to fractional (row, col) pixel coordinates.

    Rows are clamped into [0, height); columns wrap modulo ``width``.
    """
    phi = np.asarray(phi, dtype=np.float64)
    lam = np.asarray(lam, dtype=np.float64)
    row = (np.pi / 2 - phi) / np.pi * height
    row = np.clip(row, 0.0, np.nextafter(float(height), 0.0))
    col = np.mod((lam + np.pi) / (2 * np.pi) * width, width)
    return row, col


def central_angle_rad(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Central angle in radians between unit vectors ``a`` and ``b``.

    Uses the cross/dot arctan2 form, which stays accurate for both nearly
    coincident and nearly antipodal directions.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    cross = np.linalg.norm(np.cross(a, b), axis=-1)
    dot = np.sum(a * b, axis=-1)
    return np.arctan2(cross, dot)


def central_angle_deg(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Central angle in degrees between unit vectors ``a`` and ``b``."""
    return np.degrees(central_angle_rad(a, b))


def latlon_to_unit(p: LatLon) -> UnitVec3:
    """Project a latitude/longitude point onto the unit sphere.

    Examples
    --------
    >>> latlon_to_unit(LatLon(0.0, 0.0))
    UnitVec3(x=1.0, y=0.0, z=0.0)
    """
    vec = angles_to_vectors(p.phi, p.lam)
    return UnitVec3(float(vec[0]), float(vec[1]), float(vec[2]))


def unit_to_latlon(v: UnitVec3) -> LatLon:
    """Project a unit vector back to latitude/longitude.

    Raises
    ------
    NonUnitVectorError
        If the vector norm deviates from 1 by more than ``UNIT_NORM_TOL``.
    """
    arr = v.as_array()
    norm = float(np.linalg.norm(arr))
    if abs(norm - 1.0) > UNIT_NORM_TOL:
        raise NonUnitVectorError(f"vector norm {norm} deviates from 1 beyond {UNIT_NORM_TOL}")
    phi, lam = vectors_to_angles(arr)
    return LatLon(float(phi), float(lam))


def latlon_to_pixel(p: LatLon, height: int, width: int) -> PixelCoord:
    """Map a sphere point to fractional pixel coordinates.

    Examples
    --------
    >>> latlon_to_pixel(LatLon(0.0, 0.0), 1024, 2048)
    PixelCoord(row=512.0, col=1024.0, height=1024, width=2048)
    """
    if height < 1 or width < 1:
        raise ValueError("height and width must be >= 1")
    row, col = angles_to_pixels(p.phi, p.lam, height, width)
    return PixelCoord(float(row), float(col), height, width)


def great_circle_deg(a: LatLon, b: LatLon) -> float:
    """Great-circle (central) angle between two points, in degrees.

    Examples
    --------
    >>> round(great_circle_deg(LatLon(0.0, 0.0), LatLon(0.0, np.pi / 2)), 12)
    90.0
    """
    va = angles_to_vectors(a.phi, a.lam)
    vb = angles_to_vectors(b.phi, b.lam)
    return float(central_angle_deg(va, vb))


def angular_velocity(seq: "GazeSequence") -> np.ndarray:
    """Per-sample angular speed of a gaze sequence in degrees per second.

    Interior samples use central differences of the great-circle
    displacement (span of two sampling intervals); the endpoints fall back
    to one-sided differences.

    Parameters
    ----------
    seq : GazeSequence
        Sequence with at least 3 samples and a fixed sample rate.

    Returns
    -------
    ndarray
        Speeds of shape ``(L,)`` in deg/s.

    Raises
    ------
    SequenceTooShortError
        If the sequence has fewer than 3 samples.
    """
    pts = seq.points
    n = len(pts)
    if n < 3:
        raise SequenceTooShortError(f"angular velocity needs >= 3 samples, got {n}")
    rate = float(seq.sample_rate)
    v = np.empty(n, dtype=np.float64)
    v[1:-1] = central_angle_deg(pts[:-2], pts[2:]) * rate / 2.0
    v[0] = central_angle_deg(pts[0], pts[1]) * rate
    v[-1] = central_angle_deg(pts[-2], pts[-1]) * rate
    return v
