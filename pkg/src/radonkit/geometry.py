"""Parallel-beam and fan-beam acquisition geometries.

Coordinate convention used by every projector:

* The image of size ``s`` covers the square ``[-s/2, s/2]^2``; pixel ``(i, j)``
  (row ``i`` from the top, column ``j``) is centred at
  ``(j - s/2 + 0.5, s/2 - i - 0.5)``.
* For angle ``theta`` the detector axis is ``e_t = (cos theta, sin theta)`` and
  rays travel along ``e_d = (-sin theta, cos theta)``. At ``theta = 0`` rays are
  vertical and the detector is horizontal; increasing ``theta`` rotates the
  source/detector assembly counter-clockwise.
* Detector cell ``k`` is centred at offset ``(k - det_count/2 + 0.5) * det_spacing``
  along ``e_t``.
* Fan-beam: the source sits at ``-source_distance * e_d`` and the flat detector
  is the line ``det_distance * e_d + t * e_t``.
"""
import math
from dataclasses import dataclass

import numpy as np


class GeometryError(ValueError):
    pass


def _check_angles(angles):
    angles = np.asarray(angles, dtype=np.float64).ravel()
    if angles.size == 0:
        raise GeometryError("angles must be non-empty")
    if not np.all(np.isfinite(angles)):
        raise GeometryError("angles must be finite")
    angles.setflags(write=False)
    return angles


def _positive(name, value):
    if not (math.isfinite(value) and value > 0):
        raise GeometryError(f"{name} must be positive and finite, got {value}")


@dataclass(frozen=True, eq=False)
class ParallelGeometry:
    image_size: int
    angles: np.ndarray
    det_count: int
    det_spacing: float = 1.0

    def __post_init__(self):
        if int(self.image_size) != self.image_size or self.image_size < 1:
            raise GeometryError(f"image_size must be a positive integer, got {self.image_size}")
        if int(self.det_count) != self.det_count or self.det_count < 1:
            raise GeometryError(f"det_count must be a positive integer, got {self.det_count}")
        _positive("det_spacing", self.det_spacing)
        object.__setattr__(self, "image_size", int(self.image_size))
        object.__setattr__(self, "det_count", int(self.det_count))
        object.__setattr__(self, "det_spacing", float(self.det_spacing))
        object.__setattr__(self, "angles", _check_angles(self.angles))

    @property
    def n_angles(self):
        return self.angles.size

    @property
    def sinogram_shape(self):
        return (self.n_angles, self.det_count)

    @property
    def image_shape(self):
        return (self.image_size, self.image_size)

    def describe(self):
        return {
            "geometry": "parallel",
            "image_size": self.image_size,
            "n_angles": self.n_angles,
            "det_count": self.det_count,
            "det_spacing": self.det_spacing,
        }


@dataclass(frozen=True, eq=False)
class FanbeamGeometry:
    image_size: int
    angles: np.ndarray
    source_distance: float
    det_distance: float
    det_count: int
    det_spacing: float

    def __post_init__(self):
        if int(self.image_size) != self.image_size or self.image_size < 1:
            raise GeometryError(f"image_size must be a positive integer, got {self.image_size}")
        if int(self.det_count) != self.det_count or self.det_count < 1:
            raise GeometryError(f"det_count must be a positive integer, got {self.det_count}")
        for name in ("source_distance", "det_distance", "det_spacing"):
            _positive(name, getattr(self, name))
            object.__setattr__(self, name, float(getattr(self, name)))
        if self.source_distance <= self.image_size * math.sqrt(2) / 2:
            raise GeometryError(
                f"source_distance {self.source_distance} lies inside the circle circumscribing "
                f"the {self.image_size}x{self.image_size} image (radius {self.image_size * math.sqrt(2) / 2:.3f})"
            )
        object.__setattr__(self, "image_size", int(self.image_size))
        object.__setattr__(self, "det_count", int(self.det_count))
        object.__setattr__(self, "angles", _check_angles(self.angles))

    @property
    def n_angles(self):
        return self.angles.size

    @property
    def sinogram_shape(self):
        return (self.n_angles, self.det_count)

    @property
    def image_shape(self):
        return (self.image_size, self.image_size)

    def describe(self):
        return {
            "geometry": "fanbeam",
            "image_size": self.image_size,
            "n_angles": self.n_angles,
            "source_distance": self.source_distance,
            "det_distance": self.det_distance,
            "det_count": self.det_count,
            "det_spacing": self.det_spacing,
        }


def make_parallel(image_size, angles, det_count=None, det_spacing=None):
    """Parallel-beam geometry; ``det_count`` defaults to ``image_size`` and ``det_spacing`` to 1."""
    if det_count is None:
        det_count = image_size
    if det_spacing is None:
        det_spacing = 1.0
    return ParallelGeometry(image_size, angles, det_count, det_spacing)


def make_fanbeam(image_size, angles, source_distance, det_distance=None, det_count=None, det_spacing=None):
    """Fan-beam geometry with the usual defaults.

    ``det_distance`` defaults to ``source_distance`` and ``det_count`` to
    ``image_size``. The default ``det_spacing`` is the fan magnification
    ``(source_distance + det_distance) / source_distance`` times the image width
    per detector cell, so the detector covers the image width as seen from the
    source.
    """
    _positive("source_distance", source_distance)
    if det_distance is None or det_distance == 0:
        det_distance = source_distance
    if det_count is None:
        det_count = image_size
    if det_spacing is None:
        _positive("det_distance", det_distance)
        det_spacing = (source_distance + det_distance) / source_distance * image_size / det_count
    return FanbeamGeometry(image_size, angles, source_distance, det_distance, det_count, det_spacing)


def angles_linspace(start, stop, n):
    """``n`` equally spaced angles from ``start`` with ``stop`` excluded."""
    if int(n) != n or n < 1:
        raise GeometryError(f"n must be a positive integer, got {n}")
    return np.linspace(start, stop, int(n), endpoint=False)
