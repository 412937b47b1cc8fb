"""Downsampling strategies.

All samplers consume a :class:`~pcsample.cloud.PointCloud` and emit a
:class:`SampleResult` holding exactly ``round(n * rate)`` sorted point
indices (round-half-away-from-zero). Baselines:

``random``
    Uniform without replacement.
``fps``
    Farthest point sampling from a seeded random start, incrementally
    maintaining each point's distance to the nearest selected point.
``grid_fps``
    Budget split over 2-D grid cells by largest-remainder apportionment,
    then farthest point sampling inside each cell with a derived seed.
``octree``
    Budget split over octree leaves; each leaf contributes its quota of
    points closest to the leaf's centroid.

The object-aware sampler splits the budget between object and background
points (``obj_ratio`` of it to objects), spreads the object share across the
classification's object regions by largest remainder, draws uniformly within
each region, and draws the background share uniformly from the rest of the
cloud. Every partition uses its own random stream derived from the base seed,
so results are reproducible and independent of partition evaluation order.
"""

import math
from dataclasses import asdict, dataclass

import numpy as np
from sklearn.base import BaseEstimator

from .classification import PointClassification
from .cloud import PointCloud
from .errors import (
    ConfigError,
    EmptyCloudError,
    InfeasibleTotalError,
    InvalidConfigError,
)
from .peak import DensityPeakDetector, PeakConfig
from .seeding import (
    STREAM_BACKGROUND,
    STREAM_CELL,
    STREAM_REGION,
    STREAM_SAMPLE,
    derive_rng,
)

METHOD_NAMES = ("random", "fps", "grid_fps", "octree", "sta_peak", "sta_bayes")

DEFAULT_CELL = 10.0          # grid_fps cell edge, metres
DEFAULT_LEAF_CAPACITY = 64   # octree split threshold
MAX_OCTREE_DEPTH = 12


def round_half_away(x: float) -> int:
    """Round to the nearest integer, halves away from zero."""
    if x >= 0:
        return int(math.floor(x + 0.5))
    return -int(math.floor(-x + 0.5))


@dataclass(frozen=True)
class SampleSpec:
    """What to sample: a keep-rate, an object-budget share, and a seed."""

    rate: float
    obj_ratio: float = 0.7
    seed: int = 0

    def __post_init__(self):
        if not (0.0 < self.rate <= 1.0):
            raise InvalidConfigError(f"rate must be in (0, 1], got {self.rate}")
        if not (0.0 <= self.obj_ratio <= 1.0):
            raise InvalidConfigError(f"obj_ratio must be in [0, 1], got {self.obj_ratio}")
        object.__setattr__(self, "seed", int(self.seed))

    def budget(self, n_points: int) -> int:
        return round_half_away(n_points * self.rate)


@dataclass(frozen=True)
class SampleResult:
    """Indices kept by one sampler run.

    ``indices`` is strictly increasing and duplicate-free. For object-aware
    methods the two counters split the selection by class; baselines report
    everything as background.
    """

    indices: np.ndarray
    n_object_selected: int
    n_background_selected: int
    method_tag: str

    def __post_init__(self):
        idx = np.ascontiguousarray(np.asarray(self.indices, dtype=np.int64).ravel())
        if idx.size and (np.diff(idx) <= 0).any():
            raise ValueError("indices must be sorted and duplicate-free")
        if idx.size and idx[0] < 0:
            raise ValueError("indices must be non-negative")
        if self.n_object_selected + self.n_background_selected != idx.size:
            raise ValueError(
                f"selection counters ({self.n_object_selected} + "
                f"{self.n_background_selected}) do not sum to {idx.size} indices"
            )
        idx.setflags(write=False)
        object.__setattr__(self, "indices", idx)

    def __len__(self) -> int:
        return int(self.indices.size)


def result_record(result: SampleResult, spec: SampleSpec) -> dict:
    """A structured-text-ready record of one sampler run."""
    return {
        "version": 1,
        "method": result.method_tag,
        "rate": spec.rate,
        "obj_ratio": spec.obj_ratio,
        "seed": spec.seed,
        "n_selected": len(result),
        "n_object_selected": result.n_object_selected,
        "n_background_selected": result.n_background_selected,
        "indices": result.indices.tolist(),
    }


def result_from_record(record: dict) -> tuple[SampleResult, SampleSpec]:
    """Inverse of :func:`result_record`."""
    result = SampleResult(
        np.asarray(record["indices"], dtype=np.int64),
        int(record["n_object_selected"]),
        int(record["n_background_selected"]),
        str(record["method"]),
    )
    spec = SampleSpec(record["rate"], record["obj_ratio"], record["seed"])
    return result, spec


# --------------------------------------------------------------------------- #
# budget arithmetic
# --------------------------------------------------------------------------- #

def allocate_budget(n_total: int, n_obj: int, spec: SampleSpec) -> tuple[int, int]:
    """Split the total budget between object and background pools.

    The object pool receives ``round(obj_ratio * budget)`` capped by the
    object count, the background pool the remainder capped by the background
    count; any residue left by the caps flows back to whichever pool still
    has room, objects first. The two always sum to ``min(budget, n_total)``.
    """
    if n_obj > n_total:
        raise ValueError(f"n_obj {n_obj} exceeds n_total {n_total}")
    n_bg = n_total - n_obj
    budget = spec.budget(n_total)
    b_obj = min(round_half_away(spec.obj_ratio * budget), n_obj)
    b_bg = min(budget - b_obj, n_bg)
    residue = budget - b_obj - b_bg
    if residue > 0:
        take = min(residue, n_obj - b_obj)
        b_obj += take
        residue -= take
        b_bg += min(residue, n_bg - b_bg)
    return b_obj, b_bg


def largest_remainder_quotas(counts, total: int) -> np.ndarray:
    """Apportion ``total`` across groups proportionally to ``counts``.

    Each group gets the floor of its exact share; the remaining units go to
    the groups with the largest fractional remainders, ties to the lower
    group index. Quotas never exceed group counts and sum to ``total``.

    Raises
    ------
    InfeasibleTotalError
        If ``total`` exceeds the sum of counts.
    """
    counts = np.asarray(counts, dtype=np.int64)
    if (counts < 0).any():
        raise ValueError("counts must be non-negative")
    if total < 0:
        raise ValueError(f"total must be >= 0, got {total}")
    available = int(counts.sum())
    if total > available:
        raise InfeasibleTotalError(f"total {total} exceeds {available} available items")
    if total == 0 or counts.size == 0:
        return np.zeros(counts.size, dtype=np.int64)
    # Exact integer arithmetic: share of group g is counts[g] * total / sum.
    share_num = counts * int(total)
    quotas = share_num // available
    remainders = share_num % available
    leftover = int(total - quotas.sum())
    order = sorted(range(counts.size), key=lambda g: (-int(remainders[g]), g))
    for g in order:
        if leftover == 0:
            break
        if quotas[g] < counts[g]:
            quotas[g] += 1
            leftover -= 1
    return quotas


# --------------------------------------------------------------------------- #
# baseline samplers
# --------------------------------------------------------------------------- #

def _require_points(cloud: PointCloud):
    if len(cloud) == 0:
        raise EmptyCloudError("cannot sample an empty cloud")


def sample_random(cloud: PointCloud, spec: SampleSpec) -> SampleResult:
    """Uniform sampling without replacement."""
    _require_points(cloud)
    n = len(cloud)
    k = spec.budget(n)
    rng = derive_rng(spec.seed, STREAM_SAMPLE)
    indices = np.sort(rng.choice(n, size=k, replace=False))
    return SampleResult(indices, 0, k, "random")


def _squared_distances(xyz: np.ndarray, centre: np.ndarray) -> np.ndarray:
    d = xyz - centre
    return d[:, 0] ** 2 + d[:, 1] ** 2 + d[:, 2] ** 2


def _fps_indices(xyz: np.ndarray, k: int, start: int) -> np.ndarray:
    """Incremental farthest point sampling (squared Euclidean, float64).

    Selected points are masked with a negative distance so every argmax tie
    resolves to the lowest unselected index.
    """
    n = xyz.shape[0]
    selected = np.empty(k, dtype=np.int64)
    if k == 0:
        return selected
    selected[0] = start
    nearest = np.full(n, np.inf)
    last = start
    for t in range(1, k):
        np.minimum(nearest, _squared_distances(xyz, xyz[last]), out=nearest)
        nearest[last] = -1.0
        last = int(np.argmax(nearest))
        selected[t] = last
    return selected


def sample_fps(cloud: PointCloud, spec: SampleSpec) -> SampleResult:
    """Farthest point sampling from a seeded uniform start point."""
    _require_points(cloud)
    n = len(cloud)
    k = spec.budget(n)
    rng = derive_rng(spec.seed, STREAM_SAMPLE)
    start = int(rng.integers(n))
    xyz = cloud.xyz.astype(np.float64)
    indices = np.sort(_fps_indices(xyz, k, start))
    return SampleResult(indices, 0, k, "fps")


def sample_grid_fps(
    cloud: PointCloud, spec: SampleSpec, cell: float = DEFAULT_CELL
) -> SampleResult:
    """Farthest point sampling within fixed square ground cells.

    Points are grouped by ``(floor(x / cell), floor(y / cell))``; the budget
    is apportioned over cells by largest remainder in lexicographic cell
    order; each cell runs its own seeded FPS.
    """
    _require_points(cloud)
    if not cell > 0:
        raise InvalidConfigError(f"cell must be positive, got {cell}")
    n = len(cloud)
    k = spec.budget(n)
    xyz = cloud.xyz.astype(np.float64)
    cell_xy = np.floor(xyz[:, :2] / cell).astype(np.int64)
    cells, inverse = np.unique(cell_xy, axis=0, return_inverse=True)
    if cells.shape[0] == 1:
        # Degenerate partition: with a single occupied cell this is plain FPS,
        # including the start-point stream.
        inner = sample_fps(cloud, spec)
        return SampleResult(inner.indices, 0, k, "grid_fps")
    counts = np.bincount(inverse, minlength=cells.shape[0])
    quotas = largest_remainder_quotas(counts, k)
    picks = []
    for g in range(cells.shape[0]):
        q = int(quotas[g])
        if q == 0:
            continue
        members = np.flatnonzero(inverse == g)
        rng = derive_rng(spec.seed, STREAM_CELL, int(cells[g, 0]), int(cells[g, 1]))
        start = int(rng.integers(members.size))
        picks.append(members[_fps_indices(xyz[members], q, start)])
    indices = np.sort(np.concatenate(picks)) if picks else np.empty(0, dtype=np.int64)
    return SampleResult(indices, 0, k, "grid_fps")


def _octree_leaves(
    xyz: np.ndarray, leaf_capacity: int, max_depth: int
) -> list[np.ndarray]:
    """Depth-first leaves of an octree over the cloud's bounding cube.

    A node splits while it exceeds ``leaf_capacity`` and is above
    ``max_depth``; points on a split plane go to the upper child.
    """
    lo = xyz.min(axis=0)
    edge = float((xyz.max(axis=0) - lo).max())
    leaves: list[np.ndarray] = []

    def recurse(indices: np.ndarray, corner: np.ndarray, edge: float, depth: int):
        if indices.size <= leaf_capacity or depth >= max_depth:
            leaves.append(indices)
            return
        centre = corner + edge / 2.0
        pts = xyz[indices]
        child_id = (
            (pts[:, 0] >= centre[0]).astype(np.int8) * 4
            + (pts[:, 1] >= centre[1]).astype(np.int8) * 2
            + (pts[:, 2] >= centre[2]).astype(np.int8)
        )
        for child in range(8):
            sub = indices[child_id == child]
            if sub.size:
                offset = np.array([(child >> 2) & 1, (child >> 1) & 1, child & 1])
                recurse(sub, corner + offset * (edge / 2.0), edge / 2.0, depth + 1)

    recurse(np.arange(xyz.shape[0], dtype=np.int64), lo.copy(), edge, 0)
    return leaves


def sample_octree(
    cloud: PointCloud,
    spec: SampleSpec,
    leaf_capacity: int = DEFAULT_LEAF_CAPACITY,
    max_depth: int = MAX_OCTREE_DEPTH,
) -> SampleResult:
    """Octree-bucketed sampling.

    The budget is apportioned over the octree's leaves by largest remainder;
    each leaf keeps its quota of points closest to the leaf's point centroid
    (ties to the lowest index). Fully deterministic - the seed is unused.
    """
    _require_points(cloud)
    if leaf_capacity < 1:
        raise InvalidConfigError(f"leaf_capacity must be >= 1, got {leaf_capacity}")
    n = len(cloud)
    k = spec.budget(n)
    xyz = cloud.xyz.astype(np.float64)
    leaves = _octree_leaves(xyz, leaf_capacity, max_depth)
    counts = np.array([leaf.size for leaf in leaves], dtype=np.int64)
    quotas = largest_remainder_quotas(counts, k)
    picks = []
    for leaf, q in zip(leaves, quotas):
        q = int(q)
        if q == 0:
            continue
        centroid = xyz[leaf].mean(axis=0)
        order = np.argsort(_squared_distances(xyz[leaf], centroid), kind="stable")
        picks.append(leaf[order[:q]])
    indices = np.sort(np.concatenate(picks)) if picks else np.empty(0, dtype=np.int64)
    return SampleResult(indices, 0, k, "octree")


# --------------------------------------------------------------------------- #
# object-aware sampler
# --------------------------------------------------------------------------- #

def sample_object_aware(
    cloud: PointCloud,
    classification: PointClassification,
    spec: SampleSpec,
    method_tag: str = "object_aware",
) -> SampleResult:
    """Class-imbalanced sampling driven by a per-point classification.

    The object share of the budget is spread across the classification's
    object regions proportionally to their point counts (largest remainder,
    regions in lexicographic order), with a uniform draw inside each region;
    the background share is drawn uniformly from all background points. Each
    region and the background use independent derived streams, so the result
    does not depend on region iteration order.
    """
    _require_points(cloud)
    classification.check_matches(cloud)
    n = len(cloud)
    obj_idx = np.flatnonzero(classification.is_object)
    bg_idx = np.flatnonzero(~classification.is_object)
    b_obj, b_bg = allocate_budget(n, obj_idx.size, spec)
    picks = []
    if obj_idx.size:
        pairs = np.stack(
            [classification.region_x[obj_idx], classification.region_y[obj_idx]], axis=1
        )
        regions, inverse = np.unique(pairs, axis=0, return_inverse=True)
        counts = np.bincount(inverse, minlength=regions.shape[0])
        quotas = largest_remainder_quotas(counts, b_obj)
        for g in range(regions.shape[0]):
            q = int(quotas[g])
            if q == 0:
                continue
            members = obj_idx[inverse == g]
            rng = derive_rng(
                spec.seed, STREAM_REGION, int(regions[g, 0]), int(regions[g, 1])
            )
            picks.append(members[rng.choice(members.size, size=q, replace=False)])
    if b_bg:
        rng = derive_rng(spec.seed, STREAM_BACKGROUND)
        picks.append(bg_idx[rng.choice(bg_idx.size, size=b_bg, replace=False)])
    indices = np.sort(np.concatenate(picks)) if picks else np.empty(0, dtype=np.int64)
    return SampleResult(indices, b_obj, b_bg, method_tag)


# --------------------------------------------------------------------------- #
# estimator-style wrappers
# --------------------------------------------------------------------------- #

class _SamplerBase(BaseEstimator):
    """Common scaffolding: samplers are stateless transformers."""

    def fit(self, X=None, y=None):
        self._spec()  # validates parameters
        return self

    def transform(self, cloud: PointCloud) -> PointCloud:
        """Return the downsampled cloud itself."""
        return cloud.select(self.sample(cloud).indices)

    def _spec(self) -> SampleSpec:
        return SampleSpec(rate=self.rate, seed=self.seed)


class RandomSampler(_SamplerBase):
    method_tag = "random"

    def __init__(self, rate: float = 0.3, seed: int = 0):
        self.rate = rate
        self.seed = seed

    def sample(self, cloud: PointCloud) -> SampleResult:
        return sample_random(cloud, self._spec())


class FarthestPointSampler(_SamplerBase):
    method_tag = "fps"

    def __init__(self, rate: float = 0.3, seed: int = 0):
        self.rate = rate
        self.seed = seed

    def sample(self, cloud: PointCloud) -> SampleResult:
        return sample_fps(cloud, self._spec())


class GridFpsSampler(_SamplerBase):
    method_tag = "grid_fps"

    def __init__(self, rate: float = 0.3, seed: int = 0, cell: float = DEFAULT_CELL):
        self.rate = rate
        self.seed = seed
        self.cell = cell

    def sample(self, cloud: PointCloud) -> SampleResult:
        return sample_grid_fps(cloud, self._spec(), cell=self.cell)


class OctreeSampler(_SamplerBase):
    method_tag = "octree"

    def __init__(
        self,
        rate: float = 0.3,
        seed: int = 0,
        leaf_capacity: int = DEFAULT_LEAF_CAPACITY,
        max_depth: int = MAX_OCTREE_DEPTH,
    ):
        self.rate = rate
        self.seed = seed
        self.leaf_capacity = leaf_capacity
        self.max_depth = max_depth

    def sample(self, cloud: PointCloud) -> SampleResult:
        return sample_octree(
            cloud, self._spec(), leaf_capacity=self.leaf_capacity, max_depth=self.max_depth
        )


class ObjectAwareSampler(_SamplerBase):
    """Detector + imbalanced budget sampling as one deployable step.

    ``detector`` is any object with ``predict(cloud) -> PointClassification``
    (defaults to a :class:`~pcsample.peak.DensityPeakDetector`). A
    pre-computed classification can be passed to :meth:`sample` to skip
    detection.
    """

    def __init__(
        self,
        detector=None,
        rate: float = 0.3,
        obj_ratio: float = 0.7,
        seed: int = 0,
        method_tag: str | None = None,
    ):
        self.detector = detector
        self.rate = rate
        self.obj_ratio = obj_ratio
        self.seed = seed
        self.method_tag = method_tag

    def _spec(self) -> SampleSpec:
        return SampleSpec(rate=self.rate, obj_ratio=self.obj_ratio, seed=self.seed)

    def _tag(self) -> str:
        if self.method_tag is not None:
            return self.method_tag
        from .bayes import RegionBayesDetector

        det = self.detector
        if det is None or isinstance(det, DensityPeakDetector):
            return "sta_peak"
        if isinstance(det, RegionBayesDetector):
            return "sta_bayes"
        return "object_aware"

    def sample(
        self, cloud: PointCloud, classification: PointClassification | None = None
    ) -> SampleResult:
        if classification is None:
            detector = self.detector if self.detector is not None else DensityPeakDetector()
            classification = detector.predict(cloud)
        return sample_object_aware(cloud, classification, self._spec(), self._tag())


def make_method(
    name: str,
    rate: float,
    seed: int,
    *,
    obj_ratio: float = 0.7,
    peak_config: PeakConfig | None = None,
    model=None,
    threshold: float = 0.5,
    cell: float = DEFAULT_CELL,
    leaf_capacity: int = DEFAULT_LEAF_CAPACITY,
):
    """Build a ready-to-run sampler for one of the named methods.

    ``sta_bayes`` requires a trained :class:`~pcsample.bayes.BayesModel`.
    """
    if name == "random":
        return RandomSampler(rate=rate, seed=seed)
    if name == "fps":
        return FarthestPointSampler(rate=rate, seed=seed)
    if name == "grid_fps":
        return GridFpsSampler(rate=rate, seed=seed, cell=cell)
    if name == "octree":
        return OctreeSampler(rate=rate, seed=seed, leaf_capacity=leaf_capacity)
    if name == "sta_peak":
        detector = DensityPeakDetector(**asdict(peak_config or PeakConfig()))
        return ObjectAwareSampler(
            detector=detector, rate=rate, obj_ratio=obj_ratio, seed=seed,
            method_tag="sta_peak",
        )
    if name == "sta_bayes":
        from .bayes import RegionBayesDetector

        if model is None:
            raise ConfigError("method sta_bayes requires a trained model (--model)")
        detector = RegionBayesDetector.from_model(model, threshold=threshold)
        return ObjectAwareSampler(
            detector=detector, rate=rate, obj_ratio=obj_ratio, seed=seed,
            method_tag="sta_bayes",
        )
    raise ConfigError(f"unknown method {name!r}; expected one of {METHOD_NAMES}")
