"""Supervised per-region object detection with a naive Bayes model.

The scene is covered by a fixed m-by-n grid over a configured x/y range.
For one cloud, the model's features are the two marginal density profiles:
``counts_x[i]`` counts the points in x-slice ``i`` and ``counts_y[j]`` the points in
y-slice ``j``. Counts are coarsened into power-of-two buckets so the model
generalises across absolute density levels.

Training counts, for every region, how often it contained a labelled object
(the prior) and which density buckets its x- and y-slices showed for each
class (the likelihoods). At inference the per-region posterior

    P(obj | bx, by) ~ P(obj) * P(bx | obj) * P(by | obj)

is evaluated in log space with Laplace smoothing and normalised over the two
classes. Classification is staged: regions that never trained positive are
skipped outright (coarse stage), the rest are thresholded on the posterior
(fine stage). All points of a region share its verdict.
"""

import json
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .classification import PointClassification, classification_from_mask
from .cloud import PointCloud
from .errors import (
    EmptyCloudError,
    EmptyTrainingSetError,
    InvalidConfigError,
    RegionOutOfRangeError,
    SchemaMismatchError,
)
from .labels import SceneLabels, object_mask

MODEL_SCHEMA_VERSION = 1
_MODEL_KIND = "region-bayes-model"


@dataclass(frozen=True)
class GridConfig:
    """The fixed detection grid: m x n regions over an x/y range."""

    x_min: float = -80.0
    x_max: float = 80.0
    y_min: float = -80.0
    y_max: float = 80.0
    m: int = 160
    n: int = 160

    def __post_init__(self):
        if not self.x_max > self.x_min:
            raise InvalidConfigError(f"x range [{self.x_min}, {self.x_max}] is empty")
        if not self.y_max > self.y_min:
            raise InvalidConfigError(f"y range [{self.y_min}, {self.y_max}] is empty")
        if self.m < 1 or self.n < 1:
            raise InvalidConfigError(f"grid must be at least 1x1, got {self.m}x{self.n}")

    def to_dict(self) -> dict:
        return {
            "x_min": self.x_min, "x_max": self.x_max,
            "y_min": self.y_min, "y_max": self.y_max,
            "m": self.m, "n": self.n,
        }


def default_bucket_edges(n_buckets: int = 12) -> tuple[int, ...]:
    """Power-of-two count edges: bucket b covers [2^b - 1, 2^(b+1) - 1)."""
    return tuple(2 ** b - 1 for b in range(n_buckets))


@dataclass(frozen=True)
class BucketScheme:
    """Coarsens non-negative counts into density buckets.

    ``edges[b]`` is the inclusive lower bound of bucket ``b``; the last
    bucket is open-ended. ``edges`` must start at 0 and increase strictly,
    so every count maps to exactly one bucket.
    """

    edges: tuple[int, ...] = default_bucket_edges()

    def __post_init__(self):
        edges = tuple(int(e) for e in self.edges)
        if not edges or edges[0] != 0:
            raise InvalidConfigError(f"bucket edges must start at 0, got {edges!r}")
        if any(b <= a for a, b in zip(edges, edges[1:])):
            raise InvalidConfigError(f"bucket edges must increase strictly, got {edges!r}")
        object.__setattr__(self, "edges", edges)

    @property
    def n_buckets(self) -> int:
        return len(self.edges)

    def bucket_of(self, counts):
        """Map count(s) to bucket index(es)."""
        counts = np.asarray(counts)
        if (counts < 0).any():
            raise ValueError("counts must be non-negative")
        bucket = np.searchsorted(self.edges, counts, side="right") - 1
        return bucket if bucket.ndim else int(bucket)


@dataclass(frozen=True)
class RegionFeatures:
    """Marginal density profiles of one cloud on a grid."""

    counts_x: np.ndarray  # (m,) in-grid point count per x-slice
    counts_y: np.ndarray  # (n,) in-grid point count per y-slice

    def __post_init__(self):
        for name in ("counts_x", "counts_y"):
            arr = np.ascontiguousarray(np.asarray(getattr(self, name), dtype=np.int64))
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)


@dataclass(frozen=True)
class BayesModel:
    """Trained per-region counts.

    ``prior_pos[i, j]`` / ``prior_neg[i, j]`` count the training clouds in
    which region (i, j) was / was not labelled positive; they sum to
    ``training_clouds`` everywhere. ``lik_x_pos[i, j, b]`` counts how often
    x-slice ``i`` showed density bucket ``b`` while (i, j) was positive, and
    so on; per region and class the bucket counts sum to that class's prior
    count. All counts are exact integers.
    """

    grid: GridConfig
    buckets: BucketScheme
    alpha: float
    training_clouds: int
    prior_pos: np.ndarray
    prior_neg: np.ndarray
    lik_x_pos: np.ndarray
    lik_x_neg: np.ndarray
    lik_y_pos: np.ndarray
    lik_y_neg: np.ndarray

    def __post_init__(self):
        if not self.alpha > 0:
            raise InvalidConfigError(f"laplace alpha must be positive, got {self.alpha}")
        if self.training_clouds < 0:
            raise InvalidConfigError("training cloud count must be >= 0")
        m, n, nb = self.grid.m, self.grid.n, self.buckets.n_buckets
        shapes = {
            "prior_pos": (m, n), "prior_neg": (m, n),
            "lik_x_pos": (m, n, nb), "lik_x_neg": (m, n, nb),
            "lik_y_pos": (m, n, nb), "lik_y_neg": (m, n, nb),
        }
        for name, shape in shapes.items():
            arr = np.ascontiguousarray(np.asarray(getattr(self, name), dtype=np.int64))
            if arr.shape != shape:
                raise InvalidConfigError(f"{name} must have shape {shape}, got {arr.shape}")
            if (arr < 0).any():
                raise InvalidConfigError(f"{name} contains negative counts")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if not np.array_equal(self.prior_pos + self.prior_neg,
                              np.full((m, n), self.training_clouds, dtype=np.int64)):
            raise InvalidConfigError(
                "per-region prior counts must sum to the training cloud count"
            )
        for lik, prior in (
            (self.lik_x_pos, self.prior_pos), (self.lik_y_pos, self.prior_pos),
            (self.lik_x_neg, self.prior_neg), (self.lik_y_neg, self.prior_neg),
        ):
            if not np.array_equal(lik.sum(axis=2), prior):
                raise InvalidConfigError(
                    "per-region bucket counts must sum to the class prior count"
                )

    @property
    def positive_seen(self) -> np.ndarray:
        """(m, n) bool: regions that were positive in at least one cloud."""
        return self.prior_pos > 0


# --------------------------------------------------------------------------- #
# region assignment and features
# --------------------------------------------------------------------------- #

def assign_regions(cloud: PointCloud, grid: GridConfig) -> tuple[np.ndarray, np.ndarray]:
    """Per-point region coordinates on the grid; (-1, -1) when out of range.

    The x slice of an in-range point is ``floor((x - x_min) * m / span)``;
    ``x == x_max`` clamps into the last slice. A point outside the grid on
    either axis is out of range on both.
    """
    x = cloud.xyz[:, 0].astype(np.float64)
    y = cloud.xyz[:, 1].astype(np.float64)
    sx = np.floor((x - grid.x_min) * grid.m / (grid.x_max - grid.x_min)).astype(np.int64)
    sy = np.floor((y - grid.y_min) * grid.n / (grid.y_max - grid.y_min)).astype(np.int64)
    np.minimum(sx, grid.m - 1, out=sx)
    np.minimum(sy, grid.n - 1, out=sy)
    in_grid = (
        (x >= grid.x_min) & (x <= grid.x_max) & (y >= grid.y_min) & (y <= grid.y_max)
    )
    sx[~in_grid] = -1
    sy[~in_grid] = -1
    return sx, sy


def extract_features(cloud: PointCloud, grid: GridConfig) -> RegionFeatures:
    """Marginal in-grid density profiles counts_x (length m) and counts_y (length n)."""
    sx, sy = assign_regions(cloud, grid)
    in_grid = sx >= 0
    return RegionFeatures(
        np.bincount(sx[in_grid], minlength=grid.m),
        np.bincount(sy[in_grid], minlength=grid.n),
    )


def label_regions(
    cloud: PointCloud, labels: SceneLabels, grid: GridConfig, min_object_points: int = 1
) -> np.ndarray:
    """(m, n) bool: regions holding at least ``min_object_points`` labelled object points."""
    if min_object_points < 1:
        raise InvalidConfigError(f"min_object_points must be >= 1, got {min_object_points}")
    sx, sy = assign_regions(cloud, grid)
    sel = object_mask(cloud, labels) & (sx >= 0)
    counts = np.zeros((grid.m, grid.n), dtype=np.int64)
    np.add.at(counts, (sx[sel], sy[sel]), 1)
    return counts >= min_object_points


# --------------------------------------------------------------------------- #
# training
# --------------------------------------------------------------------------- #

def train_bayes(
    pairs,
    grid: GridConfig | None = None,
    buckets: BucketScheme | None = None,
    alpha: float = 1.0,
    min_object_points: int = 1,
) -> BayesModel:
    """Count-based training over (cloud, labels) pairs.

    Every cloud contributes one observation to every region: the region's
    label (positive iff it holds >= ``min_object_points`` object points) and the density
    buckets of its x- and y-slices. Clouds are assumed to share one sensor
    frame; that cannot be checked here, it is the caller's contract.

    Raises
    ------
    EmptyTrainingSetError
        If ``pairs`` is empty.
    """
    if grid is None:
        grid = GridConfig()
    if buckets is None:
        buckets = BucketScheme()
    m, n, nb = grid.m, grid.n, buckets.n_buckets
    prior_pos = np.zeros((m, n), dtype=np.int64)
    lik_x_pos = np.zeros((m, n, nb), dtype=np.int64)
    lik_x_neg = np.zeros((m, n, nb), dtype=np.int64)
    lik_y_pos = np.zeros((m, n, nb), dtype=np.int64)
    lik_y_neg = np.zeros((m, n, nb), dtype=np.int64)
    count = 0
    for cloud, labels in pairs:
        feats = extract_features(cloud, grid)
        bx = buckets.bucket_of(feats.counts_x)   # (m,)
        by = buckets.bucket_of(feats.counts_y)   # (n,)
        pos = label_regions(cloud, labels, grid, min_object_points)
        prior_pos += pos
        ii, jj = np.nonzero(pos)
        lik_x_pos[ii, jj, bx[ii]] += 1
        lik_y_pos[ii, jj, by[jj]] += 1
        ii, jj = np.nonzero(~pos)
        lik_x_neg[ii, jj, bx[ii]] += 1
        lik_y_neg[ii, jj, by[jj]] += 1
        count += 1
    if count == 0:
        raise EmptyTrainingSetError("training requires at least one (cloud, labels) pair")
    return BayesModel(
        grid=grid,
        buckets=buckets,
        alpha=float(alpha),
        training_clouds=count,
        prior_pos=prior_pos,
        prior_neg=count - prior_pos,
        lik_x_pos=lik_x_pos,
        lik_x_neg=lik_x_neg,
        lik_y_pos=lik_y_pos,
        lik_y_neg=lik_y_neg,
    )


# --------------------------------------------------------------------------- #
# inference
# --------------------------------------------------------------------------- #

def _log_posterior_terms(model: BayesModel, ii, jj, bx, by):
    """Smoothed log numerators of both classes for regions (ii, jj)."""
    a = model.alpha
    t = float(model.training_clouds)
    nb = model.buckets.n_buckets
    ppos = model.prior_pos[ii, jj].astype(np.float64)
    pneg = model.prior_neg[ii, jj].astype(np.float64)
    lpos = (
        np.log(ppos + a) - np.log(t + 2.0 * a)
        + np.log(model.lik_x_pos[ii, jj, bx] + a) - np.log(ppos + nb * a)
        + np.log(model.lik_y_pos[ii, jj, by] + a) - np.log(ppos + nb * a)
    )
    lneg = (
        np.log(pneg + a) - np.log(t + 2.0 * a)
        + np.log(model.lik_x_neg[ii, jj, bx] + a) - np.log(pneg + nb * a)
        + np.log(model.lik_y_neg[ii, jj, by] + a) - np.log(pneg + nb * a)
    )
    return lpos, lneg


def _normalise_log_pair(lpos, lneg):
    top = np.maximum(lpos, lneg)
    epos = np.exp(lpos - top)
    eneg = np.exp(lneg - top)
    return epos / (epos + eneg)


def posterior(model: BayesModel, region: tuple[int, int], counts_x: int, counts_y: int) -> float:
    """P(object | density buckets) for one region.

    ``counts_x`` and ``counts_y`` are the raw slice counts of the query cloud at the
    region's x- and y-slice; they are bucketed with the model's scheme. The
    product of prior and the two smoothed likelihoods is accumulated in log
    space and normalised over the two classes at the end.

    Raises
    ------
    RegionOutOfRangeError
        If ``region`` lies outside the model's grid.
    """
    i, j = int(region[0]), int(region[1])
    if not (0 <= i < model.grid.m and 0 <= j < model.grid.n):
        raise RegionOutOfRangeError(
            f"region ({i}, {j}) outside {model.grid.m}x{model.grid.n} grid"
        )
    bx = model.buckets.bucket_of(int(counts_x))
    by = model.buckets.bucket_of(int(counts_y))
    ii = np.array([i])
    jj = np.array([j])
    lpos, lneg = _log_posterior_terms(model, ii, jj, np.array([bx]), np.array([by]))
    return float(_normalise_log_pair(lpos, lneg)[0])


def classify_bayes(
    cloud: PointCloud,
    model: BayesModel,
    threshold: float = 0.5,
    stats: dict | None = None,
) -> PointClassification:
    """Classify every point by its region's staged Bayes verdict.

    Coarse stage: occupied regions that never trained positive are skipped
    without touching the posterior. Fine stage: the remaining occupied
    regions are object regions iff their posterior reaches ``threshold``.
    Out-of-grid points are background.

    ``stats``, when given, is filled in place with ``n_occupied_regions``,
    ``n_posterior_evals`` and ``n_skipped_regions``.
    """
    if len(cloud) == 0:
        raise EmptyCloudError("cannot classify an empty cloud")
    if not (0.0 <= threshold <= 1.0):
        raise InvalidConfigError(f"threshold must be in [0, 1], got {threshold}")
    grid = model.grid
    sx, sy = assign_regions(cloud, grid)
    in_grid = sx >= 0
    feats = extract_features(cloud, grid)
    bx = model.buckets.bucket_of(feats.counts_x)
    by = model.buckets.bucket_of(feats.counts_y)

    keys = sx[in_grid] * np.int64(grid.n) + sy[in_grid]
    occupied = np.unique(keys)
    seen = model.positive_seen.ravel()
    evaluate = occupied[seen[occupied]]

    verdict = np.zeros(grid.m * grid.n, dtype=bool)
    if evaluate.size:
        ii = evaluate // grid.n
        jj = evaluate % grid.n
        lpos, lneg = _log_posterior_terms(model, ii, jj, bx[ii], by[jj])
        verdict[evaluate] = _normalise_log_pair(lpos, lneg) >= threshold

    is_object = np.zeros(len(cloud), dtype=bool)
    is_object[in_grid] = verdict[keys]
    if stats is not None:
        stats["n_occupied_regions"] = int(occupied.size)
        stats["n_posterior_evals"] = int(evaluate.size)
        stats["n_skipped_regions"] = int(occupied.size - evaluate.size)
    return classification_from_mask(is_object, sx, sy)


# --------------------------------------------------------------------------- #
# model persistence
# --------------------------------------------------------------------------- #

def save_model(model: BayesModel, provenance: dict | None = None) -> str:
    """Serialise a model to structured text.

    All count tables are written as exact integers. ``provenance`` may carry
    free-form metadata (e.g. the training configuration); it is stored but
    ignored on load.
    """
    doc = {
        "version": MODEL_SCHEMA_VERSION,
        "kind": _MODEL_KIND,
        "grid": model.grid.to_dict(),
        "bucket_edges": list(model.buckets.edges),
        "laplace_alpha": model.alpha,
        "training_clouds": model.training_clouds,
        "tables": {
            "prior_pos": model.prior_pos.tolist(),
            "prior_neg": model.prior_neg.tolist(),
            "lik_x_pos": model.lik_x_pos.tolist(),
            "lik_x_neg": model.lik_x_neg.tolist(),
            "lik_y_pos": model.lik_y_pos.tolist(),
            "lik_y_neg": model.lik_y_neg.tolist(),
        },
    }
    if provenance is not None:
        doc["provenance"] = provenance
    return json.dumps(doc)


def load_model(text: str) -> BayesModel:
    """Parse a model document produced by :func:`save_model`.

    Raises
    ------
    SchemaMismatchError
        On unparseable text, a missing table, or a version other than
        ``MODEL_SCHEMA_VERSION`` (the message names both versions).
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaMismatchError(f"model document is truncated or unparseable: {exc}") from exc
    if not isinstance(doc, dict):
        raise SchemaMismatchError("model document must be a JSON object")
    version = doc.get("version")
    if version != MODEL_SCHEMA_VERSION:
        raise SchemaMismatchError(
            f"model schema version {version!r} is not supported "
            f"(this build reads version {MODEL_SCHEMA_VERSION})"
        )
    try:
        grid = GridConfig(**doc["grid"])
        buckets = BucketScheme(tuple(doc["bucket_edges"]))
        tables = doc["tables"]
        model = BayesModel(
            grid=grid,
            buckets=buckets,
            alpha=float(doc["laplace_alpha"]),
            training_clouds=int(doc["training_clouds"]),
            prior_pos=np.array(tables["prior_pos"], dtype=np.int64),
            prior_neg=np.array(tables["prior_neg"], dtype=np.int64),
            lik_x_pos=np.array(tables["lik_x_pos"], dtype=np.int64),
            lik_x_neg=np.array(tables["lik_x_neg"], dtype=np.int64),
            lik_y_pos=np.array(tables["lik_y_pos"], dtype=np.int64),
            lik_y_neg=np.array(tables["lik_y_neg"], dtype=np.int64),
        )
    except (KeyError, TypeError, ValueError, InvalidConfigError) as exc:
        raise SchemaMismatchError(f"model document is malformed: {exc}") from exc
    return model


def load_model_file(path) -> BayesModel:
    with open(path, "r", encoding="utf-8") as fh:
        return load_model(fh.read())


# --------------------------------------------------------------------------- #
# estimator wrapper
# --------------------------------------------------------------------------- #

class RegionBayesDetector(BaseEstimator):
    """fit/predict wrapper around the per-region Bayes pipeline.

    Parameters mirror the functional API; ``fit(clouds, labels)`` trains the
    count model and stores it as ``model_``.
    """

    def __init__(
        self,
        grid: GridConfig | None = None,
        buckets: BucketScheme | None = None,
        min_object_points: int = 1,
        alpha: float = 1.0,
        threshold: float = 0.5,
    ):
        self.grid = grid
        self.buckets = buckets
        self.min_object_points = min_object_points
        self.alpha = alpha
        self.threshold = threshold

    def fit(self, clouds, labels) -> "RegionBayesDetector":
        clouds = list(clouds)
        labels = list(labels)
        if len(clouds) != len(labels):
            raise ValueError(f"{len(clouds)} clouds but {len(labels)} label sets")
        self.model_ = train_bayes(
            zip(clouds, labels),
            grid=self.grid,
            buckets=self.buckets,
            alpha=self.alpha,
            min_object_points=self.min_object_points,
        )
        return self

    @classmethod
    def from_model(cls, model: BayesModel, threshold: float = 0.5) -> "RegionBayesDetector":
        det = cls(
            grid=model.grid, buckets=model.buckets, alpha=model.alpha, threshold=threshold
        )
        det.model_ = model
        return det

    def predict(self, cloud: PointCloud) -> PointClassification:
        if not hasattr(self, "model_"):
            raise NotFittedError(
                "this RegionBayesDetector is not fitted yet; call fit() or from_model()"
            )
        stats: dict = {}
        result = classify_bayes(cloud, self.model_, self.threshold, stats)
        self.last_stats_ = stats
        return result
