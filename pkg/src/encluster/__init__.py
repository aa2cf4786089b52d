"""encluster: extract, compress and cluster two-vehicle driving encounters.

The pipeline turns GPS trip logs into fixed-length encounter features,
compresses them with a small autoencoder, clusters the latent codes with
k-means and scores the clusters against ground-truth categories.
"""

from .autoencoder import (NetworkParams, TrainConfig, decode, encode,
                          encode_batch, gradient, init_params,
                          reconstruction_error, train_sgd)
from .clustering import ClusterModel, assign, inertia, kmeans_fit
from .encounter import (Encounter, NormalizationParams, apply_normalization,
                        detect_encounters, find_encounters, fit_normalization,
                        haversine_m, invert_normalization, to_feature_vector)
from .errors import (DataError, DivergedError, FormatError,
                     InsufficientDataError, ShapeError, ValidationError)
from .evaluation import EvaluationReport, compare_pipelines, eta, map_clusters
from .ingest import (DEFAULT_BBOX, GeoBBox, Trajectory, TrajectoryPoint,
                     filter_bbox, parse_trip_log, resample_uniform, split_gaps,
                     write_trip_log)
from .synthgen import CATEGORIES, ScenarioSpec, generate_dataset, generate_encounter

__version__ = "0.1.0"

__all__ = [
    "CATEGORIES", "ClusterModel", "DEFAULT_BBOX", "DataError", "DivergedError",
    "Encounter", "EvaluationReport", "FormatError", "GeoBBox",
    "InsufficientDataError", "NetworkParams", "NormalizationParams",
    "ScenarioSpec", "ShapeError", "TrainConfig", "Trajectory",
    "TrajectoryPoint", "ValidationError", "apply_normalization", "assign",
    "compare_pipelines", "decode", "detect_encounters", "encode",
    "encode_batch", "eta", "filter_bbox", "find_encounters",
    "fit_normalization", "generate_dataset", "generate_encounter", "gradient",
    "haversine_m", "inertia", "init_params", "invert_normalization",
    "kmeans_fit", "map_clusters", "parse_trip_log", "reconstruction_error",
    "resample_uniform", "split_gaps", "to_feature_vector", "train_sgd",
    "write_trip_log",
]
