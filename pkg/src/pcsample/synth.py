"""Synthetic desk-scale LiDAR scenes.

Each scene is a flat ground slab plus a handful of compact, box-bounded point
clusters standing clear of the ground. The generator is built for exercising
the detectors and samplers in this package, so it keeps three properties that
real drive data has at much larger scale:

* objects are dense bumps on an otherwise smooth point distribution, so the
  slice histograms show genuine local peaks;
* objects reappear around a fixed set of spawn sites from scene to scene
  (think parked cars along the same kerb), which gives the per-region Bayes
  detector recurring evidence to learn from;
* every cluster is wrapped by a ground-truth box that contains (essentially
  all of) its points.

Spawn sites are laid out once per configuration: site coordinates are a
jittered lattice with the x and y orders permuted independently, which keeps
every pair of sites at least ``site_min_separation`` apart along *both* axes.
Object positions then jitter around their site per scene. Cluster points are
drawn from a centred normal clipped just inside the box, so the box envelope
bounds the cluster.

Scenes are bit-reproducible: the output is a pure function of
(config, seed).
"""

import math
from dataclasses import dataclass

import numpy as np

from .cloud import PointCloud
from .errors import InvalidConfigError
from .labels import BoundingBox, SceneLabels
from .seeding import STREAM_LAYOUT, STREAM_SCENE, derive_rng

_EDGE_MARGIN = 4.0          # keep sites away from the slab edge, metres
_SIZE_TO_STD = 8.0        # cluster point spread: std = extent / this
_CLIP_FRACTION = 0.49       # clip cluster points to +/- this * extent
_CATEGORY_CHOICES = ("car", "pedestrian", "cyclist")


@dataclass(frozen=True)
class SynthConfig:
    """Parameters of the synthetic scene generator.

    Defaults produce an 18,000-point cloud (16,000 ground + 5 clusters of
    ~400 points) on an 80 m square slab.
    """

    extent: float = 80.0                       # side length of the ground square
    ground_points: int = 16000
    ground_z: float = -1.7
    ground_jitter: float = 0.02                # std of the slab's z noise
    n_objects: int = 5
    points_per_object: tuple[int, int] = (300, 500)
    size_xy: tuple[float, float] = (0.35, 0.6)  # range of dx and dy
    size_z: tuple[float, float] = (0.9, 1.7)    # range of dz
    clearance: float = 0.3                     # gap between slab and box bottom
    n_sites: int = 12
    site_min_separation: float = 6.0
    site_jitter: float = 0.8                   # per-scene wobble around a site
    layout_seed: int = 0                       # fixes the spawn-site layout

    def __post_init__(self):
        if self.extent <= 0:
            raise InvalidConfigError(f"extent must be positive, got {self.extent}")
        if self.ground_points < 0:
            raise InvalidConfigError(f"ground_points must be >= 0, got {self.ground_points}")
        if self.ground_jitter < 0:
            raise InvalidConfigError(f"ground_jitter must be >= 0, got {self.ground_jitter}")
        if self.n_objects < 0:
            raise InvalidConfigError(f"n_objects must be >= 0, got {self.n_objects}")
        if self.n_objects > self.n_sites:
            raise InvalidConfigError(
                f"n_objects ({self.n_objects}) exceeds n_sites ({self.n_sites})"
            )
        lo, hi = self.points_per_object
        if lo < 1 or hi < lo:
            raise InvalidConfigError(f"bad points_per_object range {self.points_per_object}")
        for name in ("size_xy", "size_z"):
            lo, hi = getattr(self, name)
            if lo <= 0 or hi < lo:
                raise InvalidConfigError(f"bad {name} range {getattr(self, name)}")
        if self.clearance < 0:
            raise InvalidConfigError(f"clearance must be >= 0, got {self.clearance}")
        if self.site_jitter < 0:
            raise InvalidConfigError(f"site_jitter must be >= 0, got {self.site_jitter}")
        if self.n_objects > 0:
            usable = self.extent - 2.0 * _EDGE_MARGIN
            if self.n_sites * self.site_min_separation > usable:
                raise InvalidConfigError(
                    f"{self.n_sites} sites with separation {self.site_min_separation} "
                    f"do not fit in a usable span of {usable}"
                )


def spawn_sites(config: SynthConfig) -> np.ndarray:
    """Site centres shared by every scene generated under ``config``.

    Returns an (n_sites, 2) array. Sites sit on a jittered lattice whose x
    and y orders are permuted independently, guaranteeing pairwise separation
    of at least ``site_min_separation`` along each axis.
    """
    rng = derive_rng(config.layout_seed, STREAM_LAYOUT)
    usable = config.extent - 2.0 * _EDGE_MARGIN
    pitch = usable / config.n_sites
    slack = max(0.0, (pitch - config.site_min_separation) / 2.0)
    lo = -usable / 2.0 + pitch / 2.0
    lattice = lo + pitch * np.arange(config.n_sites)
    x = lattice + rng.uniform(-slack, slack, config.n_sites)
    y = lattice[rng.permutation(config.n_sites)] + rng.uniform(-slack, slack, config.n_sites)
    return np.column_stack([x, y])


def synth_scene(config: SynthConfig, seed: int) -> tuple[PointCloud, SceneLabels]:
    """Generate one scene.

    Returns
    -------
    (cloud, labels)
        ``cloud`` holds the ground slab first, then each cluster's points in
        site order. ``labels`` holds one box per cluster.
    """
    rng = derive_rng(seed, STREAM_SCENE)
    half = config.extent / 2.0

    chunks = []
    g = config.ground_points
    ground = np.empty((g, 3))
    ground[:, 0] = rng.uniform(-half, half, g)
    ground[:, 1] = rng.uniform(-half, half, g)
    ground[:, 2] = config.ground_z + rng.normal(0.0, config.ground_jitter, g)
    chunks.append(ground)

    boxes = []
    categories = []
    if config.n_objects > 0:
        sites = spawn_sites(config)
        chosen = rng.choice(config.n_sites, size=config.n_objects, replace=False)
        for site_idx in chosen:
            cx, cy = sites[site_idx] + rng.uniform(
                -config.site_jitter, config.site_jitter, 2
            )
            dx = rng.uniform(*config.size_xy)
            dy = rng.uniform(*config.size_xy)
            dz = rng.uniform(*config.size_z)
            yaw = rng.uniform(-math.pi, math.pi)
            cz = config.ground_z + config.clearance + dz / 2.0
            count = int(rng.integers(config.points_per_object[0],
                                     config.points_per_object[1] + 1))
            size = np.array([dx, dy, dz])
            local = rng.normal(0.0, size / _SIZE_TO_STD, (count, 3))
            np.clip(local, -_CLIP_FRACTION * size, _CLIP_FRACTION * size, out=local)
            c, s = math.cos(yaw), math.sin(yaw)
            pts = np.empty_like(local)
            pts[:, 0] = cx + c * local[:, 0] - s * local[:, 1]
            pts[:, 1] = cy + s * local[:, 0] + c * local[:, 1]
            pts[:, 2] = cz + local[:, 2]
            chunks.append(pts)
            boxes.append(BoundingBox(cx, cy, cz, dx, dy, dz, yaw))
            categories.append(_CATEGORY_CHOICES[int(rng.integers(len(_CATEGORY_CHOICES)))])

    xyz = np.concatenate(chunks, axis=0)
    intensity = rng.uniform(0.0, 1.0, xyz.shape[0])
    cloud = PointCloud(xyz, intensity, format_tag="synthetic")
    return cloud, SceneLabels(tuple(boxes), tuple(categories))


def synth_corpus(
    config: SynthConfig, count: int, seed: int
) -> list[tuple[PointCloud, SceneLabels]]:
    """Generate ``count`` scenes with per-scene seeds derived from ``seed``."""
    from .seeding import STREAM_CORPUS, derive_seed

    if count < 0:
        raise InvalidConfigError(f"count must be >= 0, got {count}")
    return [
        synth_scene(config, derive_seed(seed, STREAM_CORPUS, i))
        for i in range(count)
    ]
