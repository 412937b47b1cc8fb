"""Ground-truth boxes and point-in-box tests.

Boxes are upright cuboids in the sensor frame: a centre, full extents along
the box axes, and a yaw rotation about +z. Containment is face-inclusive so
points exactly on a face count as inside.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .cloud import PointCloud
from .errors import InvalidBoxError, LabelParseError

CATEGORIES = ("car", "pedestrian", "cyclist", "other")


def wrap_angle(a: float) -> float:
    """Wrap an angle to the interval (-pi, pi]."""
    a = math.remainder(a, 2.0 * math.pi)
    if a <= -math.pi:
        a += 2.0 * math.pi
    return a


@dataclass(frozen=True)
class BoundingBox:
    """An upright, yawed cuboid.

    Attributes
    ----------
    cx, cy, cz : float
        Centre in the sensor frame, metres.
    dx, dy, dz : float
        Full extents along the box's own axes; must be positive.
    yaw : float
        Rotation about +z, radians, normalised to (-pi, pi].
    """

    cx: float
    cy: float
    cz: float
    dx: float
    dy: float
    dz: float
    yaw: float = 0.0

    def __post_init__(self):
        for name in ("dx", "dy", "dz"):
            v = float(getattr(self, name))
            if not (v > 0.0) or not math.isfinite(v):
                raise InvalidBoxError(f"extent {name} must be positive and finite, got {v}")
        for name in ("cx", "cy", "cz", "yaw"):
            object.__setattr__(self, name, float(getattr(self, name)))
        for name in ("dx", "dy", "dz"):
            object.__setattr__(self, name, float(getattr(self, name)))
        object.__setattr__(self, "yaw", wrap_angle(self.yaw))

    @property
    def center(self) -> tuple[float, float, float]:
        return (self.cx, self.cy, self.cz)

    @property
    def size(self) -> tuple[float, float, float]:
        return (self.dx, self.dy, self.dz)


@dataclass(frozen=True)
class SceneLabels:
    """The set of ground-truth boxes for one cloud."""

    boxes: tuple[BoundingBox, ...] = ()
    categories: tuple[str, ...] = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "boxes", tuple(self.boxes))
        cats = tuple(self.categories)
        if not cats:
            cats = ("other",) * len(self.boxes)
        if len(cats) != len(self.boxes):
            raise InvalidBoxError(
                f"{len(cats)} categories for {len(self.boxes)} boxes"
            )
        cats = tuple(c if c in CATEGORIES else "other" for c in cats)
        object.__setattr__(self, "categories", cats)

    def __len__(self) -> int:
        return len(self.boxes)


# --------------------------------------------------------------------------- #
# containment
# --------------------------------------------------------------------------- #

def box_frame_coords(xyz, box: BoundingBox) -> np.ndarray:
    """Map sensor-frame coordinates into the box frame.

    Translate by -centre, then rotate by -yaw about z. Computed in float64.
    """
    p = np.asarray(xyz, dtype=np.float64)
    scalar = p.ndim == 1
    p = np.atleast_2d(p) - np.array([box.cx, box.cy, box.cz])
    c, s = math.cos(-box.yaw), math.sin(-box.yaw)
    local = np.empty_like(p)
    local[:, 0] = c * p[:, 0] - s * p[:, 1]
    local[:, 1] = s * p[:, 0] + c * p[:, 1]
    local[:, 2] = p[:, 2]
    return local[0] if scalar else local


def box_contains(box: BoundingBox, xyz) -> np.ndarray:
    """Face-inclusive containment test for an (n, 3) coordinate array."""
    local = np.atleast_2d(box_frame_coords(xyz, box))
    half = np.array([box.dx, box.dy, box.dz]) / 2.0
    return (np.abs(local) <= half).all(axis=1)


def point_in_box(point, box: BoundingBox) -> bool:
    """Face-inclusive containment test for a single point.

    ``point`` may be a :class:`~pcsample.cloud.Point` or any (x, y, z) triple;
    extra fields are ignored.
    """
    x, y, z = point[0], point[1], point[2]
    return bool(box_contains(box, np.array([[x, y, z]], dtype=np.float64))[0])


def object_mask(cloud: PointCloud, labels: SceneLabels) -> np.ndarray:
    """Boolean mask of points inside at least one labelled box."""
    mask = np.zeros(len(cloud), dtype=bool)
    if len(cloud) == 0:
        return mask
    xyz = cloud.xyz.astype(np.float64)
    for box in labels.boxes:
        mask |= box_contains(box, xyz)
    return mask


# --------------------------------------------------------------------------- #
# label file I/O
# --------------------------------------------------------------------------- #

def read_labels(data: bytes | str) -> SceneLabels:
    """Parse a UTF-8 label document.

    The document is a JSON array of records, each with ``center`` ([x, y, z]),
    ``size`` ([dx, dy, dz]), ``yaw`` and ``category``. Unknown categories map
    to ``"other"``.

    Raises
    ------
    LabelParseError
        On malformed text or a record missing required fields; the message
        names the record index where possible.
    InvalidBoxError
        On a non-positive extent; the message names the record index.
    """
    if isinstance(data, bytes):
        try:
            data = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise LabelParseError(f"label document is not UTF-8: {exc}") from exc
    try:
        records = json.loads(data)
    except json.JSONDecodeError as exc:
        raise LabelParseError(f"label document is not valid JSON: {exc}") from exc
    if not isinstance(records, list):
        raise LabelParseError(
            f"label document must be an array of records, got {type(records).__name__}"
        )
    boxes = []
    categories = []
    for i, rec in enumerate(records):
        if not isinstance(rec, dict):
            raise LabelParseError(f"record {i}: expected an object, got {type(rec).__name__}")
        try:
            center = rec["center"]
            size = rec["size"]
            yaw = rec.get("yaw", 0.0)
        except KeyError as exc:
            raise LabelParseError(f"record {i}: missing field {exc.args[0]!r}") from exc
        if len(center) != 3 or len(size) != 3:
            raise LabelParseError(f"record {i}: center and size must have 3 components")
        try:
            box = BoundingBox(
                float(center[0]), float(center[1]), float(center[2]),
                float(size[0]), float(size[1]), float(size[2]),
                float(yaw),
            )
        except InvalidBoxError as exc:
            raise InvalidBoxError(f"record {i}: {exc}") from exc
        except (TypeError, ValueError) as exc:
            raise LabelParseError(f"record {i}: {exc}") from exc
        boxes.append(box)
        categories.append(str(rec.get("category", "other")))
    return SceneLabels(tuple(boxes), tuple(categories))


def write_labels(labels: SceneLabels) -> bytes:
    """Serialise labels to the JSON layout accepted by :func:`read_labels`."""
    records = [
        {
            "center": [box.cx, box.cy, box.cz],
            "size": [box.dx, box.dy, box.dz],
            "yaw": box.yaw,
            "category": cat,
        }
        for box, cat in zip(labels.boxes, labels.categories)
    ]
    return json.dumps(records, indent=2).encode("utf-8")


def load_labels(path) -> SceneLabels:
    with open(path, "rb") as fh:
        return read_labels(fh.read())


def save_labels(path, labels: SceneLabels) -> None:
    with open(path, "wb") as fh:
        fh.write(write_labels(labels))
