"""Object-aware downsampling for LiDAR point clouds.

The package pairs two lightweight object detectors (an unsupervised
density-peak detector and a supervised per-region Bayes detector) with a
budgeted sampler that spends a configurable share of the point budget on
detected objects. Classic baselines (random, farthest-point, grid-stratified
farthest-point, octree-stratified) are included for comparison, together with
retention/recall metrics, a timing benchmark, and a synthetic scene
generator used by the test suite.
"""

__version__ = "0.1.0"

from .errors import (
    ClassificationMismatchError,
    ConfigError,
    EmptyCloudError,
    EmptyInputError,
    EmptyTrainingSetError,
    InfeasibleTotalError,
    InvalidBoxError,
    InvalidConfigError,
    LabelParseError,
    NoBoxesError,
    NoObjectPointsError,
    NonFinitePointError,
    PcSampleError,
    RegionOutOfRangeError,
    SchemaMismatchError,
    TruncatedRecordError,
)
from .cloud import (
    FORMAT_TAGS,
    Point,
    PointCloud,
    load_point_cloud,
    read_point_cloud,
    save_point_cloud,
    write_point_cloud,
)
from .labels import (
    CATEGORIES,
    BoundingBox,
    SceneLabels,
    box_contains,
    box_frame_coords,
    load_labels,
    object_mask,
    point_in_box,
    read_labels,
    save_labels,
    write_labels,
)
from .classification import (
    PointClassification,
    background_classification,
    classification_from_labels,
    classification_from_mask,
)
from .peak import (
    DensityPeakDetector,
    PeakConfig,
    SliceHistogram,
    build_histogram,
    classify_density_peak,
    find_local_peaks,
    z_ground_filter,
)
from .bayes import (
    BayesModel,
    BucketScheme,
    GridConfig,
    RegionBayesDetector,
    assign_regions,
    classify_bayes,
    default_bucket_edges,
    extract_features,
    label_regions,
    load_model,
    load_model_file,
    posterior,
    save_model,
    train_bayes,
)
from .sampling import (
    METHOD_NAMES,
    FarthestPointSampler,
    GridFpsSampler,
    ObjectAwareSampler,
    OctreeSampler,
    RandomSampler,
    SampleResult,
    SampleSpec,
    allocate_budget,
    largest_remainder_quotas,
    make_method,
    result_from_record,
    result_record,
    round_half_away,
    sample_fps,
    sample_grid_fps,
    sample_object_aware,
    sample_octree,
    sample_random,
)
from .metrics import DEFAULT_RECALL_MIN_POINTS, instance_recall, object_retention
from .benchmark import (
    CSV_HEADER,
    PROXY_NOTE,
    MetricsRow,
    bench,
    check_expectations,
    emit_csv,
    emit_summary,
    evaluate,
)
from .synth import SynthConfig, spawn_sites, synth_corpus, synth_scene

__all__ = [
    "__version__",
    # errors
    "PcSampleError", "TruncatedRecordError", "NonFinitePointError",
    "LabelParseError", "InvalidBoxError", "InvalidConfigError",
    "EmptyCloudError", "EmptyTrainingSetError", "RegionOutOfRangeError",
    "SchemaMismatchError", "InfeasibleTotalError",
    "ClassificationMismatchError", "NoObjectPointsError", "NoBoxesError",
    "EmptyInputError", "ConfigError",
    # cloud
    "FORMAT_TAGS", "Point", "PointCloud", "read_point_cloud",
    "write_point_cloud", "load_point_cloud", "save_point_cloud",
    # labels
    "CATEGORIES", "BoundingBox", "SceneLabels", "box_frame_coords",
    "box_contains", "point_in_box", "object_mask", "read_labels",
    "write_labels", "load_labels", "save_labels",
    # classification
    "PointClassification", "background_classification",
    "classification_from_mask", "classification_from_labels",
    # density-peak detector
    "SliceHistogram", "PeakConfig", "build_histogram", "find_local_peaks",
    "z_ground_filter", "classify_density_peak", "DensityPeakDetector",
    # Bayes detector
    "GridConfig", "BucketScheme", "default_bucket_edges", "BayesModel",
    "assign_regions", "extract_features", "label_regions", "train_bayes",
    "posterior", "classify_bayes", "save_model", "load_model",
    "load_model_file", "RegionBayesDetector",
    # sampling
    "METHOD_NAMES", "SampleSpec", "SampleResult", "round_half_away",
    "allocate_budget", "largest_remainder_quotas", "result_record",
    "result_from_record", "sample_random", "sample_fps", "sample_grid_fps",
    "sample_octree", "sample_object_aware", "RandomSampler",
    "FarthestPointSampler", "GridFpsSampler", "OctreeSampler",
    "ObjectAwareSampler", "make_method",
    # metrics / reporting
    "DEFAULT_RECALL_MIN_POINTS", "object_retention", "instance_recall",
    "CSV_HEADER", "PROXY_NOTE", "MetricsRow", "evaluate", "bench",
    "emit_csv", "emit_summary", "check_expectations",
    # synthetic scenes
    "SynthConfig", "spawn_sites", "synth_scene", "synth_corpus",
]
