"""Conditional diffusion generation and analysis of gaze on 360 panoramas.

The package covers the full pipeline: raw-recording preprocessing, a
panorama-conditioned denoising-diffusion model over unit-vector gaze
sequences, velocity-based eye-event detection, scanpath extraction,
spherically blurred saliency maps, and the distance/saliency metric suite
used to compare generated and human data.
"""

from .dataset import (
    SALIENT360,
    SITZMANN,
    Panorama,
    PreprocessConfig,
    downsample,
    filter_min_samples,
    load_manifest,
    load_panorama,
    load_processed,
    load_recordings,
    preprocess,
    read_sequence_csv,
    resize_panorama,
    split_train_test,
    truncate,
    write_sequence_csv,
)
from .denoiser import DenoiserConfig, GazeDenoiser, parameter_count, time_embedding
from .diffusion import (
    DiffusionConfig,
    GazeDiffusion,
    NoiseSchedule,
    forward_sample,
    generate_sequences,
    load_checkpoint,
    make_quadratic_schedule,
    reverse_step,
    save_checkpoint,
    train,
)
from .encoder import EncoderConfig, PanoramaEncoder, build_sphere_grid, encode_panorama
from .errors import PanogazeError
from .events import (
    EyeEvent,
    EyeStats,
    Fixation,
    Scanpath,
    compute_stats,
    detect_events,
    extract_scanpath,
    read_scanpath_csv,
    spherical_centroid,
    velocity_threshold,
    write_scanpath_csv,
)
from .geometry import (
    LatLon,
    PixelCoord,
    UnitVec3,
    angles_to_pixels,
    angles_to_vectors,
    angular_velocity,
    central_angle_deg,
    great_circle_deg,
    latlon_to_pixel,
    latlon_to_unit,
    unit_to_latlon,
    vectors_to_angles,
)
from .metrics import (
    BestMean,
    MetricReport,
    QuantGrid,
    auc_judd,
    best_mean,
    cc,
    dtw,
    edit_distance,
    evaluate_saliency,
    evaluate_scanpaths,
    evaluate_sequences,
    human_baseline,
    kl_div,
    levenshtein,
    mae,
    nss,
    recurrence,
    rmse,
    saliency_metrics,
    sim,
)
from .saliency import (
    FixationMap,
    SaliencyMap,
    accumulate_fixations,
    blur_to_saliency,
    load_saliency,
    save_saliency,
)
from .sequences import GazeSequence

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "PanogazeError",
    # geometry
    "LatLon",
    "UnitVec3",
    "PixelCoord",
    "angles_to_vectors",
    "vectors_to_angles",
    "angles_to_pixels",
    "angular_velocity",
    "central_angle_deg",
    "great_circle_deg",
    "latlon_to_unit",
    "unit_to_latlon",
    "latlon_to_pixel",
    # data
    "GazeSequence",
    "Panorama",
    "PreprocessConfig",
    "SITZMANN",
    "SALIENT360",
    "preprocess",
    "load_recordings",
    "filter_min_samples",
    "downsample",
    "truncate",
    "split_train_test",
    "load_manifest",
    "load_processed",
    "load_panorama",
    "resize_panorama",
    "read_sequence_csv",
    "write_sequence_csv",
    # events
    "EyeEvent",
    "Fixation",
    "Scanpath",
    "EyeStats",
    "detect_events",
    "extract_scanpath",
    "spherical_centroid",
    "velocity_threshold",
    "compute_stats",
    "read_scanpath_csv",
    "write_scanpath_csv",
    # model
    "EncoderConfig",
    "PanoramaEncoder",
    "build_sphere_grid",
    "encode_panorama",
    "DenoiserConfig",
    "GazeDenoiser",
    "time_embedding",
    "parameter_count",
    "NoiseSchedule",
    "make_quadratic_schedule",
    "forward_sample",
    "reverse_step",
    "DiffusionConfig",
    "GazeDiffusion",
    "generate_sequences",
    "train",
    "save_checkpoint",
    "load_checkpoint",
    # saliency
    "FixationMap",
    "SaliencyMap",
    "accumulate_fixations",
    "blur_to_saliency",
    "save_saliency",
    "load_saliency",
    # metrics
    "QuantGrid",
    "BestMean",
    "MetricReport",
    "edit_distance",
    "levenshtein",
    "dtw",
    "mae",
    "rmse",
    "recurrence",
    "best_mean",
    "human_baseline",
    "auc_judd",
    "nss",
    "cc",
    "sim",
    "kl_div",
    "saliency_metrics",
    "evaluate_sequences",
    "evaluate_scanpaths",
    "evaluate_saliency",
]
