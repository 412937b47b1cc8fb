"""Unsupervised object detection from density peaks in slice histograms.

The cloud is sliced into equal-width bands along x and along y (never along
z), giving two 1-D density histograms. Slices whose point count stands out
against their local neighbourhood — the maximum of a stride-sized window,
provided it clears both an absolute floor and a multiple of the window mean —
are density peaks. Wherever a peak x-slice crosses a peak y-slice the
intersection cell is treated as containing an object, and every point falling
in such a cell is classified as an object point. Because ground returns pile
up in a narrow band of height, a final optional filter re-labels points in
the cloud's most populated z-bin as background.
"""

import json
from dataclasses import asdict, dataclass

import numpy as np
from sklearn.base import BaseEstimator

from .classification import PointClassification, classification_from_mask
from .cloud import PointCloud
from .errors import EmptyCloudError, InvalidConfigError

AXIS_NAMES = ("x", "y", "z")


@dataclass(frozen=True)
class SliceHistogram:
    """Point counts per equal-width slice along one axis.

    ``origin`` is the minimum coordinate of the cloud along the axis; slice
    ``i`` covers ``[origin + i*width, origin + (i+1)*width)`` except that the
    maximum coordinate belongs to the last slice.
    """

    axis: int
    origin: float
    width: float
    counts: np.ndarray

    def __post_init__(self):
        counts = np.ascontiguousarray(np.asarray(self.counts, dtype=np.int64))
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)

    @property
    def n_slices(self) -> int:
        return self.counts.shape[0]


@dataclass(frozen=True)
class PeakConfig:
    """Knobs of the density-peak detector.

    Attributes
    ----------
    slice_width : float
        Width of the x/y histogram slices, metres.
    stride : int
        Window length (in slices) scanned for one local peak; >= 2.
    peak_ratio : float
        A window's maximum must reach ``peak_ratio`` times the window mean
        to count as a peak; >= 1.
    min_count : int
        Absolute floor a peak must reach.
    z_filter : bool
        Re-label points in the dominant z-bin (the ground) as background.
    z_bin_width : float
        Bin width of the ground-height histogram, metres.
    """

    slice_width: float = 0.5
    stride: int = 8
    peak_ratio: float = 1.5
    min_count: int = 20
    z_filter: bool = True
    z_bin_width: float = 0.2

    def __post_init__(self):
        if not self.slice_width > 0:
            raise InvalidConfigError(f"slice_width must be positive, got {self.slice_width}")
        if self.stride < 2:
            raise InvalidConfigError(f"stride must be >= 2, got {self.stride}")
        if self.peak_ratio < 1.0:
            raise InvalidConfigError(f"peak_ratio must be >= 1, got {self.peak_ratio}")
        if self.min_count < 0:
            raise InvalidConfigError(f"min_count must be >= 0, got {self.min_count}")
        if not self.z_bin_width > 0:
            raise InvalidConfigError(f"z_bin_width must be positive, got {self.z_bin_width}")

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "PeakConfig":
        try:
            fields = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InvalidConfigError(f"bad detector config document: {exc}") from exc
        if not isinstance(fields, dict):
            raise InvalidConfigError("detector config document must be a JSON object")
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(fields) - known
        if unknown:
            raise InvalidConfigError(f"unknown detector config keys: {sorted(unknown)}")
        return cls(**fields)


def _slice_indices(coords: np.ndarray, origin: float, width: float, n_slices: int):
    idx = np.floor((coords - origin) / width).astype(np.int64)
    # The maximum coordinate lands exactly on the upper edge; clamp it (and
    # any float spill) into the last slice.
    np.clip(idx, 0, n_slices - 1, out=idx)
    return idx


def build_histogram(cloud: PointCloud, axis: int, width: float) -> SliceHistogram:
    """Count points per ``width``-wide slice along ``axis`` (0=x, 1=y, 2=z).

    Slicing is anchored at the minimum coordinate, so the histogram covers
    [min, max] exactly and is invariant to translating the cloud.
    """
    if len(cloud) == 0:
        raise EmptyCloudError("cannot build a slice histogram of an empty cloud")
    if axis not in (0, 1, 2):
        raise ValueError(f"axis must be 0, 1 or 2, got {axis}")
    if not width > 0:
        raise InvalidConfigError(f"slice width must be positive, got {width}")
    coords = cloud.xyz[:, axis].astype(np.float64)
    origin = float(coords.min())
    span = float(coords.max()) - origin
    n_slices = int(np.floor(span / width)) + 1
    idx = _slice_indices(coords, origin, width, n_slices)
    counts = np.bincount(idx, minlength=n_slices)
    return SliceHistogram(axis, origin, width, counts)


def find_local_peaks(
    hist: SliceHistogram, stride: int, peak_ratio: float, min_count: int
) -> list[int]:
    """Indices of slices that dominate their local window.

    The histogram is scanned in disjoint consecutive windows of ``stride``
    slices (the last window may be shorter). Each window contributes at most
    one peak: its maximum slice (ties to the lowest index), kept only if the
    count reaches ``min_count`` and ``peak_ratio`` times the window mean.
    Returns a sorted list of distinct slice indices.
    """
    counts = hist.counts
    peaks = []
    for start in range(0, counts.shape[0], stride):
        window = counts[start:start + stride]
        arg = int(np.argmax(window))
        top = int(window[arg])
        if top >= min_count and top >= peak_ratio * float(window.mean()):
            peaks.append(start + arg)
    return peaks


def z_ground_filter(cloud: PointCloud, bin_width: float) -> np.ndarray:
    """Mask of points lying in the most populated height bin.

    LiDAR ground returns concentrate in a narrow band of z, so the globally
    dominant z-bin is taken to be the ground. Ties resolve to the lowest bin.
    """
    hist = build_histogram(cloud, 2, bin_width)
    ground_bin = int(np.argmax(hist.counts))
    idx = _slice_indices(
        cloud.xyz[:, 2].astype(np.float64), hist.origin, hist.width, hist.n_slices
    )
    return idx == ground_bin


def classify_density_peak(
    cloud: PointCloud, config: PeakConfig | None = None
) -> PointClassification:
    """Classify each point as object or background from density peaks.

    A point is an object point iff its x-slice and its y-slice are both
    density peaks; its region is the (x-slice, y-slice) pair. With
    ``config.z_filter`` on, points of the dominant z-bin are re-labelled
    background as a final mask (the histograms themselves are always built
    on the unfiltered cloud).
    """
    if config is None:
        config = PeakConfig()
    if len(cloud) == 0:
        raise EmptyCloudError("cannot classify an empty cloud")
    hist_x = build_histogram(cloud, 0, config.slice_width)
    hist_y = build_histogram(cloud, 1, config.slice_width)
    peaks_x = find_local_peaks(hist_x, config.stride, config.peak_ratio, config.min_count)
    peaks_y = find_local_peaks(hist_y, config.stride, config.peak_ratio, config.min_count)
    return _classify_with_peaks(cloud, config, hist_x, hist_y, peaks_x, peaks_y)


def _classify_with_peaks(
    cloud: PointCloud,
    config: PeakConfig,
    hist_x: SliceHistogram,
    hist_y: SliceHistogram,
    peaks_x,
    peaks_y,
) -> PointClassification:
    """Intersection-and-mask step, split out so peak sets can be injected."""
    idx_x = _slice_indices(
        cloud.xyz[:, 0].astype(np.float64), hist_x.origin, hist_x.width, hist_x.n_slices
    )
    idx_y = _slice_indices(
        cloud.xyz[:, 1].astype(np.float64), hist_y.origin, hist_y.width, hist_y.n_slices
    )
    peak_mask_x = np.zeros(hist_x.n_slices, dtype=bool)
    peak_mask_x[np.asarray(list(peaks_x), dtype=np.int64)] = True
    peak_mask_y = np.zeros(hist_y.n_slices, dtype=bool)
    peak_mask_y[np.asarray(list(peaks_y), dtype=np.int64)] = True
    is_object = peak_mask_x[idx_x] & peak_mask_y[idx_y]
    if config.z_filter:
        is_object &= ~z_ground_filter(cloud, config.z_bin_width)
    return classification_from_mask(is_object, idx_x, idx_y)


class DensityPeakDetector(BaseEstimator):
    """Estimator-style wrapper around :func:`classify_density_peak`.

    The detector is unsupervised; ``fit`` only validates parameters and
    exists so the class slots into fit/predict pipelines.

    Examples
    --------
    >>> det = DensityPeakDetector(z_filter=False)
    >>> cls = det.predict(cloud)                          # doctest: +SKIP
    """

    def __init__(
        self,
        slice_width: float = 0.5,
        stride: int = 8,
        peak_ratio: float = 1.5,
        min_count: int = 20,
        z_filter: bool = True,
        z_bin_width: float = 0.2,
    ):
        self.slice_width = slice_width
        self.stride = stride
        self.peak_ratio = peak_ratio
        self.min_count = min_count
        self.z_filter = z_filter
        self.z_bin_width = z_bin_width

    def config(self) -> PeakConfig:
        return PeakConfig(**self.get_params())

    def fit(self, X=None, y=None) -> "DensityPeakDetector":
        self.config()  # validates parameters
        return self

    def predict(self, cloud: PointCloud) -> PointClassification:
        return classify_density_peak(cloud, self.config())
