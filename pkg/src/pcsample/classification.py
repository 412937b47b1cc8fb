"""Per-point object/background classification.

Both detectors in this package produce the same output shape: a boolean
object mask plus, for object points, the (x-slice, y-slice) region the point
was attributed to. Region indices let the object-aware sampler spread its
budget across object regions instead of treating the object set as one pool.
"""

from dataclasses import dataclass

import numpy as np

from .cloud import PointCloud
from .errors import ClassificationMismatchError
from .labels import SceneLabels, object_mask

_NO_REGION = -1


@dataclass(frozen=True)
class PointClassification:
    """Object/background verdicts for every point of one cloud.

    Attributes
    ----------
    is_object : (n,) bool array
    region_x, region_y : (n,) int arrays
        Region coordinates for object points; -1 for background points.
    """

    is_object: np.ndarray
    region_x: np.ndarray
    region_y: np.ndarray

    def __post_init__(self):
        is_object = np.asarray(self.is_object, dtype=bool)
        region_x = np.asarray(self.region_x, dtype=np.int64)
        region_y = np.asarray(self.region_y, dtype=np.int64)
        if not (is_object.shape == region_x.shape == region_y.shape):
            raise ValueError("is_object, region_x and region_y must share one shape")
        has_region = (region_x >= 0) & (region_y >= 0)
        if not np.array_equal(has_region, is_object):
            raise ValueError("object points must carry a region; background must not")
        for name, arr in (("is_object", is_object), ("region_x", region_x),
                          ("region_y", region_y)):
            arr = np.ascontiguousarray(arr)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def __len__(self) -> int:
        return self.is_object.shape[0]

    @property
    def n_object(self) -> int:
        return int(self.is_object.sum())

    def region_of(self, i: int) -> tuple[int, int] | None:
        """Region of point ``i``, or None for background points."""
        if not self.is_object[i]:
            return None
        return (int(self.region_x[i]), int(self.region_y[i]))

    def check_matches(self, cloud: PointCloud) -> None:
        """Raise unless this classification covers exactly ``cloud``."""
        if len(self) != len(cloud):
            raise ClassificationMismatchError(
                f"classification covers {len(self)} points, cloud has {len(cloud)}"
            )


def background_classification(n: int) -> PointClassification:
    """All-background classification for an n-point cloud."""
    return PointClassification(
        np.zeros(n, dtype=bool),
        np.full(n, _NO_REGION, dtype=np.int64),
        np.full(n, _NO_REGION, dtype=np.int64),
    )


def classification_from_mask(mask: np.ndarray, region_x, region_y) -> PointClassification:
    """Build a classification, forcing -1 regions onto background points."""
    mask = np.asarray(mask, dtype=bool)
    rx = np.where(mask, np.asarray(region_x, dtype=np.int64), _NO_REGION)
    ry = np.where(mask, np.asarray(region_y, dtype=np.int64), _NO_REGION)
    return PointClassification(mask, rx, ry)


def classification_from_labels(
    cloud: PointCloud, labels: SceneLabels, grid=None
) -> PointClassification:
    """Oracle classification straight from ground-truth boxes.

    Useful as a best-case reference for the object-aware sampler: every
    labelled point is marked object and attributed to the region of a
    ``grid`` (defaults to the standard detection grid).
    """
    from .bayes import GridConfig, assign_regions

    if grid is None:
        grid = GridConfig()
    mask = object_mask(cloud, labels)
    rx, ry = assign_regions(cloud, grid)
    # Labelled points outside the grid still need a region; park them in one
    # synthetic out-of-grid region so they stay in the object pool.
    oob = mask & (rx < 0)
    rx = rx.copy()
    ry = ry.copy()
    rx[oob] = grid.m
    ry[oob] = grid.n
    return classification_from_mask(mask, rx, ry)
