"""Point cloud container and binary I/O.

Clouds live in the LiDAR sensor frame: x forward, y left, z up, metres.
Two on-disk layouts are supported, both headerless little-endian float32:

============ ======================== ============
format tag   record                   record bytes
============ ======================== ============
``kitti4``   x, y, z, intensity       16
``nuscenes5`` x, y, z, intensity, ring 20
============ ======================== ============

``synthetic`` tags clouds produced by the built-in scene generator; it has no
binary layout of its own and is written out as one of the two above.
"""

from typing import NamedTuple

import numpy as np

from .errors import NonFinitePointError, TruncatedRecordError

FORMAT_TAGS = ("kitti4", "nuscenes5", "synthetic")

# float32 channels per record for the binary formats
_FORMAT_CHANNELS = {"kitti4": 4, "nuscenes5": 5}

RECORD_BYTES = {tag: 4 * n for tag, n in _FORMAT_CHANNELS.items()}


class Point(NamedTuple):
    """A single LiDAR return."""

    x: float
    y: float
    z: float
    intensity: float = 0.0
    ring: int | None = None


class PointCloud:
    """An ordered, immutable collection of points.

    Parameters
    ----------
    xyz : (n, 3) array_like
        Sensor-frame coordinates in metres. Must be finite.
    intensity : (n,) array_like, optional
        Reflectance channel; zeros when omitted.
    ring : (n,) array_like, optional
        Laser ring index (nuScenes). Kept in the raw float32 encoding used on
        disk so write/read round-trips are bit-exact.
    format_tag : str
        One of ``kitti4``, ``nuscenes5``, ``synthetic``.
    """

    __slots__ = ("xyz", "intensity", "ring", "format_tag")

    def __init__(self, xyz, intensity=None, ring=None, format_tag="synthetic"):
        if format_tag not in FORMAT_TAGS:
            raise ValueError(f"unknown format tag {format_tag!r}; expected one of {FORMAT_TAGS}")
        xyz = np.asarray(xyz, dtype=np.float32)
        if xyz.ndim != 2 or xyz.shape[1] != 3:
            raise ValueError(f"xyz must have shape (n, 3), got {xyz.shape}")
        finite = np.isfinite(xyz).all(axis=1)
        if not finite.all():
            raise NonFinitePointError(int(np.flatnonzero(~finite)[0]))
        n = xyz.shape[0]
        if intensity is None:
            intensity = np.zeros(n, dtype=np.float32)
        else:
            intensity = np.asarray(intensity, dtype=np.float32)
            if intensity.shape != (n,):
                raise ValueError(f"intensity must have shape ({n},), got {intensity.shape}")
        if ring is not None:
            ring = np.asarray(ring, dtype=np.float32)
            if ring.shape != (n,):
                raise ValueError(f"ring must have shape ({n},), got {ring.shape}")
            ring = np.ascontiguousarray(ring)
            ring.setflags(write=False)
        xyz = np.ascontiguousarray(xyz)
        intensity = np.ascontiguousarray(intensity)
        xyz.setflags(write=False)
        intensity.setflags(write=False)
        object.__setattr__(self, "xyz", xyz)
        object.__setattr__(self, "intensity", intensity)
        object.__setattr__(self, "ring", ring)
        object.__setattr__(self, "format_tag", format_tag)

    def __setattr__(self, name, value):
        raise AttributeError("PointCloud is immutable")

    def __len__(self) -> int:
        return self.xyz.shape[0]

    def __repr__(self) -> str:
        return f"PointCloud(n={len(self)}, format_tag={self.format_tag!r})"

    def point(self, i: int) -> Point:
        """Return point ``i`` as a named tuple."""
        ring = None if self.ring is None else int(self.ring[i])
        return Point(
            float(self.xyz[i, 0]),
            float(self.xyz[i, 1]),
            float(self.xyz[i, 2]),
            float(self.intensity[i]),
            ring,
        )

    def select(self, indices) -> "PointCloud":
        """Return the sub-cloud at ``indices`` (order preserved, bits preserved)."""
        indices = np.asarray(indices, dtype=np.int64)
        ring = None if self.ring is None else self.ring[indices]
        return PointCloud(
            self.xyz[indices],
            self.intensity[indices],
            ring,
            format_tag=self.format_tag,
        )

    def equals(self, other: "PointCloud") -> bool:
        """Bitwise equality of all channels and the format tag."""
        if self.format_tag != other.format_tag or len(self) != len(other):
            return False
        if not (
            np.array_equal(self.xyz, other.xyz)
            and np.array_equal(self.intensity, other.intensity)
        ):
            return False
        if (self.ring is None) != (other.ring is None):
            return False
        return self.ring is None or np.array_equal(self.ring, other.ring)


def read_point_cloud(data: bytes, format_tag: str) -> PointCloud:
    """Decode a headerless binary payload into a :class:`PointCloud`.

    Parameters
    ----------
    data : bytes
        Raw file contents. May be empty (yields a zero-point cloud).
    format_tag : str
        ``kitti4`` or ``nuscenes5``.

    Raises
    ------
    TruncatedRecordError
        If ``len(data)`` is not a multiple of the record size.
    NonFinitePointError
        If any coordinate is NaN or infinite; the message reports the index.
    """
    channels = _channels_for(format_tag)
    record = 4 * channels
    if len(data) % record != 0:
        raise TruncatedRecordError(
            f"payload of {len(data)} bytes is not a multiple of the "
            f"{record}-byte {format_tag} record"
        )
    flat = np.frombuffer(data, dtype="<f4")
    table = flat.reshape(-1, channels)
    ring = table[:, 4].copy() if channels == 5 else None
    return PointCloud(
        table[:, :3].copy(),
        table[:, 3].copy(),
        ring,
        format_tag=format_tag,
    )


def write_point_cloud(cloud: PointCloud, format_tag: str) -> bytes:
    """Encode a cloud in the given binary layout.

    A cloud without a ring channel written as ``nuscenes5`` gets ring 0 for
    every point; writing a five-channel cloud as ``kitti4`` drops the ring.
    """
    channels = _channels_for(format_tag)
    n = len(cloud)
    table = np.empty((n, channels), dtype="<f4")
    table[:, :3] = cloud.xyz
    table[:, 3] = cloud.intensity
    if channels == 5:
        table[:, 4] = 0.0 if cloud.ring is None else cloud.ring
    return table.tobytes()


def load_point_cloud(path, format_tag: str) -> PointCloud:
    """Read a cloud from a file path."""
    with open(path, "rb") as fh:
        return read_point_cloud(fh.read(), format_tag)


def save_point_cloud(path, cloud: PointCloud, format_tag: str | None = None) -> None:
    """Write a cloud to a file path (defaults to its own binary format)."""
    if format_tag is None:
        format_tag = cloud.format_tag if cloud.format_tag in _FORMAT_CHANNELS else "kitti4"
    with open(path, "wb") as fh:
        fh.write(write_point_cloud(cloud, format_tag))


def _channels_for(format_tag: str) -> int:
    try:
        return _FORMAT_CHANNELS[format_tag]
    except KeyError:
        raise ValueError(
            f"no binary layout for format {format_tag!r}; expected one of "
            f"{tuple(_FORMAT_CHANNELS)}"
        ) from None
