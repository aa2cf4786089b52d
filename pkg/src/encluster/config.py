"""Pipeline configuration: defaults, config-file parsing and seed fan-out.

The config file is plain ``key = value`` text with ``[section]`` headers
named after the pipeline stages.  Every key has a default, so all commands
run without a file; ``--set section.key=value`` overrides individual keys
and ``--seed`` replaces the top-level seed.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .autoencoder import validate_layer_dims
from .errors import ValidationError
from .ingest import GeoBBox
from .synthgen import CATEGORIES

DEFAULTS: dict[str, dict[str, str]] = {
    "pipeline": {
        "seed": "1",
    },
    "synthgen": {
        "count_intersection": "200",
        "count_opposite_direction": "200",
        "count_bypass": "200",
        "count_same_road": "200",
        "count_merge": "0",
        "duration_min_s": "8.0",
        "duration_max_s": "15.0",
        "speed_min_mps": "3.0",
        "speed_max_mps": "17.0",
        "gps_noise_m": "2.0",
    },
    "ingest": {
        "lon_min": "-83.82",
        "lon_max": "-83.64",
        "lat_min": "42.22",
        "lat_max": "42.34",
        "rate_hz": "10.0",
        "max_gap_s": "1.0",
        "strict": "false",
    },
    "encounter": {
        "threshold_m": "100.0",
        "min_duration_s": "5.0",
        "gap_tolerance_s": "1.0",
        "window_points": "50",
    },
    "autoencoder": {
        "layer_dims": "200,100,50,25,50,100,200",
        "activation": "tanh",
        "init_scale": "fan_in",
        "learning_rate": "0.01",
        "epochs": "500",
        "stop_tolerance": "1e-5",
        "shuffle": "true",
    },
    "clustering": {
        "k": "10",
        "max_iter": "300",
        "tol": "1e-9",
        "restarts": "1",
        "source": "codes",
    },
    "evaluation": {
        "sample_size": "100",
    },
    "plot": {
        "stroke_a": "#1f77b4",
        "stroke_b": "#d62728",
        "grid_cols": "3",
        "grid_max": "6",
    },
    "paths": {
        "data_dir": "data",
        "out_dir": "out",
        "trip_log": "",
        "labels": "",
        "encounters": "",
        "features": "",
        "normalization": "",
        "checkpoint": "",
        "checkpoint_text": "",
        "loss_curve": "",
        "codes": "",
        "assignments": "",
        "cluster_model": "",
        "report_csv": "",
        "report_text": "",
        "plots_dir": "",
        "figures_dir": "",
    },
}

# Files default to fixed names under data_dir / out_dir unless overridden.
_PATH_DEFAULTS = {
    "trip_log": ("data_dir", "trip_log.csv"),
    "labels": ("data_dir", "labels.csv"),
    "encounters": ("out_dir", "encounters.csv"),
    "features": ("out_dir", "features.csv"),
    "normalization": ("out_dir", "normalization.csv"),
    "checkpoint": ("out_dir", "model.aec"),
    "checkpoint_text": ("out_dir", "model.txt"),
    "loss_curve": ("out_dir", "loss_curve.csv"),
    "codes": ("out_dir", "codes.csv"),
    "assignments": ("out_dir", "assignments.csv"),
    "cluster_model": ("out_dir", "cluster_model.csv"),
    "report_csv": ("out_dir", "report.csv"),
    "report_text": ("out_dir", "report.txt"),
    "plots_dir": ("out_dir", "plots"),
    "figures_dir": ("out_dir", "figures"),
}

# Deterministic stage order for fanning the top seed out to sub-seeds.
_STAGE_ORDER = ("synthgen", "ae_init", "ae_train", "kmeans", "eta", "evaluate")


def _get_float(parser, section, key):
    try:
        return parser.getfloat(section, key)
    except ValueError:
        raise ValidationError(f"{section}.{key}: not a number "
                              f"({parser.get(section, key)!r})") from None


def _get_int(parser, section, key):
    try:
        return parser.getint(section, key)
    except ValueError:
        raise ValidationError(f"{section}.{key}: not an integer "
                              f"({parser.get(section, key)!r})") from None


def _get_bool(parser, section, key):
    try:
        return parser.getboolean(section, key)
    except ValueError:
        raise ValidationError(f"{section}.{key}: not a boolean "
                              f"({parser.get(section, key)!r})") from None


@dataclass
class PipelineConfig:
    seed: int = 1

    counts: dict[str, int] = field(default_factory=dict)
    duration_range: tuple[float, float] = (8.0, 15.0)
    speed_range: tuple[float, float] = (3.0, 17.0)
    gps_noise_m: float = 2.0

    bbox: GeoBBox = field(default_factory=lambda: GeoBBox(-83.82, -83.64, 42.22, 42.34))
    rate_hz: float = 10.0
    max_gap_s: float = 1.0
    strict: bool = False

    threshold_m: float = 100.0
    min_duration_s: float = 5.0
    gap_tolerance_s: float = 1.0
    window_points: int = 50

    layer_dims: tuple[int, ...] = (200, 100, 50, 25, 50, 100, 200)
    activation: str = "tanh"
    init_scale: str = "fan_in"
    learning_rate: float = 0.01
    epochs: int = 500
    stop_tolerance: float = 1e-5
    shuffle: bool = True

    k: int = 10
    kmeans_max_iter: int = 300
    kmeans_tol: float = 1e-9
    restarts: int = 1
    cluster_source: str = "codes"

    sample_size: int = 100

    stroke_a: str = "#1f77b4"
    stroke_b: str = "#d62728"
    grid_cols: int = 3
    grid_max: int = 6

    paths: dict[str, Path] = field(default_factory=dict)

    def validate(self) -> None:
        for cat, cnt in self.counts.items():
            if cat not in CATEGORIES:
                raise ValidationError(f"synthgen: unknown category {cat!r}")
            if cnt < 0:
                raise ValidationError(f"synthgen.count_{cat}: must be >= 0")
        if self.duration_range[0] < 5.0 or self.duration_range[0] > self.duration_range[1]:
            raise ValidationError("synthgen.duration_*: need 5.0 <= min <= max")
        if self.speed_range[0] < 0 or self.speed_range[0] > self.speed_range[1]:
            raise ValidationError("synthgen.speed_*: need 0 <= min <= max")
        if self.gps_noise_m < 0:
            raise ValidationError("synthgen.gps_noise_m: must be >= 0")
        if self.rate_hz <= 0:
            raise ValidationError("ingest.rate_hz: must be positive")
        if self.max_gap_s <= 0:
            raise ValidationError("ingest.max_gap_s: must be positive")
        if self.threshold_m <= 0:
            raise ValidationError("encounter.threshold_m: must be positive")
        if self.min_duration_s <= 0:
            raise ValidationError("encounter.min_duration_s: must be positive")
        if self.gap_tolerance_s < 0:
            raise ValidationError("encounter.gap_tolerance_s: must be >= 0")
        if self.window_points < 2:
            raise ValidationError("encounter.window_points: must be >= 2")
        validate_layer_dims(self.layer_dims)
        if self.layer_dims[0] != 4 * self.window_points:
            raise ValidationError(
                f"autoencoder.layer_dims[0]={self.layer_dims[0]} must equal "
                f"4*window_points={4 * self.window_points}")
        if self.activation not in ("affine", "tanh", "relu"):
            raise ValidationError(f"autoencoder.activation: unknown {self.activation!r}")
        if self.init_scale not in ("full", "fan_in"):
            raise ValidationError(f"autoencoder.init_scale: must be 'full' or "
                                  f"'fan_in', got {self.init_scale!r}")
        if self.learning_rate <= 0:
            raise ValidationError("autoencoder.learning_rate: must be positive")
        if self.epochs < 1:
            raise ValidationError("autoencoder.epochs: must be >= 1")
        if self.stop_tolerance < 0:
            raise ValidationError("autoencoder.stop_tolerance: must be >= 0")
        if self.k < 1:
            raise ValidationError("clustering.k: must be >= 1")
        if self.kmeans_max_iter < 1:
            raise ValidationError("clustering.max_iter: must be >= 1")
        if self.restarts < 1:
            raise ValidationError("clustering.restarts: must be >= 1")
        if self.cluster_source not in ("codes", "features"):
            raise ValidationError("clustering.source: must be 'codes' or 'features'")
        if self.sample_size < 1:
            raise ValidationError("evaluation.sample_size: must be >= 1")
        if self.grid_cols < 1 or self.grid_max < 1:
            raise ValidationError("plot.grid_*: must be >= 1")
        if not 0 <= self.seed < 2 ** 64:
            raise ValidationError("pipeline.seed: must be an unsigned 64-bit integer")

    def stage_seed(self, stage: str) -> int:
        """Deterministic per-stage seed derived from the top-level seed."""
        if stage not in _STAGE_ORDER:
            raise ValidationError(f"unknown stage {stage!r}")
        seeds = np.random.SeedSequence(self.seed).generate_state(
            len(_STAGE_ORDER), dtype=np.uint64)
        return int(seeds[_STAGE_ORDER.index(stage)])

    def path(self, name: str) -> Path:
        return self.paths[name]


def load_config(config_path=None, overrides=(), seed: int | None = None
                ) -> PipelineConfig:
    """Assemble the configuration from defaults, an optional file, ``--set``
    overrides and an optional seed override (applied in that order)."""
    parser = configparser.ConfigParser(interpolation=None)
    parser.read_dict(DEFAULTS)

    if config_path is not None:
        path = Path(config_path)
        if not path.is_file():
            raise ValidationError(f"config file not found: {path}")
        try:
            with open(path, "r", encoding="utf-8") as fh:
                parser.read_file(fh)
        except configparser.Error as exc:
            raise ValidationError(f"config file {path}: {exc}") from None

    for item in overrides:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ValidationError(f"--set expects section.key=value, got {item!r}")
        target, value = item.split("=", 1)
        section, key = target.split(".", 1)
        section, key = section.strip(), key.strip()
        if section not in DEFAULTS or key not in DEFAULTS[section]:
            raise ValidationError(f"--set: unknown option {section}.{key}")
        parser.set(section, key, value.strip())

    if seed is not None:
        parser.set("pipeline", "seed", str(seed))

    for section in parser.sections():
        if section not in DEFAULTS:
            raise ValidationError(f"config: unknown section [{section}]")
        for key in parser[section]:
            if key not in DEFAULTS[section]:
                raise ValidationError(f"config: unknown option {section}.{key}")

    counts = {cat: _get_int(parser, "synthgen", f"count_{cat}") for cat in CATEGORIES}
    try:
        layer_dims = tuple(int(v) for v in
                           parser.get("autoencoder", "layer_dims").split(","))
    except ValueError:
        raise ValidationError("autoencoder.layer_dims: expected comma-separated "
                              "integers") from None

    paths: dict[str, Path] = {}
    data_dir = Path(parser.get("paths", "data_dir"))
    out_dir = Path(parser.get("paths", "out_dir"))
    for name, (base_key, default_name) in _PATH_DEFAULTS.items():
        configured = parser.get("paths", name).strip()
        if configured:
            paths[name] = Path(configured)
        else:
            base = data_dir if base_key == "data_dir" else out_dir
            paths[name] = base / default_name

    cfg = PipelineConfig(
        seed=_get_int(parser, "pipeline", "seed"),
        counts=counts,
        duration_range=(_get_float(parser, "synthgen", "duration_min_s"),
                        _get_float(parser, "synthgen", "duration_max_s")),
        speed_range=(_get_float(parser, "synthgen", "speed_min_mps"),
                     _get_float(parser, "synthgen", "speed_max_mps")),
        gps_noise_m=_get_float(parser, "synthgen", "gps_noise_m"),
        bbox=GeoBBox(_get_float(parser, "ingest", "lon_min"),
                     _get_float(parser, "ingest", "lon_max"),
                     _get_float(parser, "ingest", "lat_min"),
                     _get_float(parser, "ingest", "lat_max")),
        rate_hz=_get_float(parser, "ingest", "rate_hz"),
        max_gap_s=_get_float(parser, "ingest", "max_gap_s"),
        strict=_get_bool(parser, "ingest", "strict"),
        threshold_m=_get_float(parser, "encounter", "threshold_m"),
        min_duration_s=_get_float(parser, "encounter", "min_duration_s"),
        gap_tolerance_s=_get_float(parser, "encounter", "gap_tolerance_s"),
        window_points=_get_int(parser, "encounter", "window_points"),
        layer_dims=layer_dims,
        activation=parser.get("autoencoder", "activation").strip().lower(),
        init_scale=parser.get("autoencoder", "init_scale").strip().lower(),
        learning_rate=_get_float(parser, "autoencoder", "learning_rate"),
        epochs=_get_int(parser, "autoencoder", "epochs"),
        stop_tolerance=_get_float(parser, "autoencoder", "stop_tolerance"),
        shuffle=_get_bool(parser, "autoencoder", "shuffle"),
        k=_get_int(parser, "clustering", "k"),
        kmeans_max_iter=_get_int(parser, "clustering", "max_iter"),
        kmeans_tol=_get_float(parser, "clustering", "tol"),
        restarts=_get_int(parser, "clustering", "restarts"),
        cluster_source=parser.get("clustering", "source").strip().lower(),
        sample_size=_get_int(parser, "evaluation", "sample_size"),
        stroke_a=parser.get("plot", "stroke_a").strip(),
        stroke_b=parser.get("plot", "stroke_b").strip(),
        grid_cols=_get_int(parser, "plot", "grid_cols"),
        grid_max=_get_int(parser, "plot", "grid_max"),
        paths=paths,
    )
    cfg.validate()
    return cfg
