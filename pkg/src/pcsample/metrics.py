"""Sampling-quality metrics.

Detector training pipelines are far outside this package's scale, so sampler
quality is scored with two cheap proxies instead of detection mAP:

* object retention - the fraction of ground-truth object points a sampler
  kept;
* instance recall - the fraction of ground-truth boxes that kept at least
  ``min_points`` points, i.e. remained plausibly detectable.
"""

import numpy as np

from .cloud import PointCloud
from .errors import NoBoxesError, NoObjectPointsError
from .labels import SceneLabels, box_contains, object_mask
from .sampling import SampleResult

DEFAULT_RECALL_MIN_POINTS = 5


def object_retention(
    cloud: PointCloud, labels: SceneLabels, result: SampleResult
) -> float:
    """Fraction of in-box points present in the selection.

    Raises
    ------
    NoObjectPointsError
        If no point of the cloud lies in any labelled box; callers should
        report retention as absent for such scenes, not as zero.
    """
    truth = object_mask(cloud, labels)
    total = int(truth.sum())
    if total == 0:
        raise NoObjectPointsError("labels contain no object points; retention undefined")
    kept = int(truth[result.indices].sum())
    return kept / total


def instance_recall(
    cloud: PointCloud,
    labels: SceneLabels,
    result: SampleResult,
    min_points: int = DEFAULT_RECALL_MIN_POINTS,
) -> float:
    """Fraction of boxes that kept at least ``min_points`` selected points.

    Raises
    ------
    NoBoxesError
        If the scene has no boxes at all.
    """
    if len(labels) == 0:
        raise NoBoxesError("labels contain no boxes; instance recall undefined")
    if min_points < 1:
        raise ValueError(f"min_points must be >= 1, got {min_points}")
    selected_xyz = cloud.xyz[result.indices].astype(np.float64)
    hit = 0
    for box in labels.boxes:
        if int(box_contains(box, selected_xyz).sum()) >= min_points:
            hit += 1
    return hit / len(labels)
