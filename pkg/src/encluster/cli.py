"""Command-line pipeline: generate, extract, train, encode, cluster,
evaluate, plot.

Every stage reads and writes plain files so runs can be resumed or
inspected mid-way, and a single top-level seed makes the whole chain
reproducible byte for byte.  Exit codes: 0 success, 1 validation error,
2 data error, 3 numeric divergence.
"""

from __future__ import annotations

import argparse
import logging
import re
import sys
from pathlib import Path

import numpy as np

from . import autoencoder as ae
from . import clustering as km
from . import encounter as enc_mod
from . import evaluation as ev
from . import ingest, svgplot, synthgen
from .config import PipelineConfig, load_config
from .errors import (DataError, DivergedError, InsufficientDataError,
                     ValidationError)

log = logging.getLogger("encluster")


def _ensure_parent(path: Path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)


def _require(path: Path, what: str) -> Path:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"{what} not found: {path} (run the upstream command first)")
    return path


def cmd_generate(cfg: PipelineConfig) -> int:
    encounters = synthgen.generate_dataset(
        cfg.counts, cfg.stage_seed("synthgen"),
        duration_range=cfg.duration_range, speed_range_mps=cfg.speed_range,
        gps_noise_m=cfg.gps_noise_m, bbox=cfg.bbox)
    trajectories = []
    for enc in encounters:
        trajectories.extend((enc.traj_a, enc.traj_b))
    trip_log = cfg.path("trip_log")
    labels = cfg.path("labels")
    _ensure_parent(trip_log)
    _ensure_parent(labels)
    ingest.write_trip_log(trajectories, trip_log)
    synthgen.write_labels(encounters, labels)
    by_cat = {cat: 0 for cat in synthgen.CATEGORIES}
    for enc in encounters:
        by_cat[enc.label] += 1
    summary = ", ".join(f"{cat}={n}" for cat, n in by_cat.items() if n)
    print(f"generated {len(encounters)} encounters ({summary or 'none'}) "
          f"-> {trip_log}, {labels}")
    return 0


def cmd_extract(cfg: PipelineConfig) -> int:
    trip_log = _require(cfg.path("trip_log"), "trip log")
    trajectories = ingest.parse_trip_log(trip_log, strict=cfg.strict)

    segments = []
    for traj in trajectories:
        clipped = ingest.filter_bbox(traj, cfg.bbox)
        for part in ingest.split_gaps(clipped, cfg.max_gap_s):
            if len(part) >= 2:
                try:
                    segments.append(ingest.resample_uniform(part, cfg.rate_hz,
                                                            align="epoch"))
                except InsufficientDataError as exc:  # span shorter than one tick
                    log.debug("dropping segment %s: %s", part.key, exc)

    encounters = enc_mod.find_encounters(
        segments, threshold_m=cfg.threshold_m, min_duration_s=cfg.min_duration_s,
        gap_tolerance_s=cfg.gap_tolerance_s, rate_hz=cfg.rate_hz)

    labels_path = Path(cfg.path("labels"))
    if labels_path.is_file():
        truth = synthgen.read_labels(labels_path)
        labeled = []
        for enc in encounters:
            la = truth.get(enc.traj_a.trip_id)
            lb = truth.get(enc.traj_b.trip_id)
            label = la if la is not None and la == lb else None
            labeled.append(enc_mod.Encounter(enc.id, enc.traj_a, enc.traj_b, label))
        encounters = labeled

    enc_path = cfg.path("encounters")
    feat_path = cfg.path("features")
    _ensure_parent(enc_path)
    _ensure_parent(feat_path)
    enc_mod.write_encounters(encounters, enc_path)
    if encounters:
        features = np.stack([enc_mod.to_feature_vector(e, T=cfg.window_points)
                             for e in encounters])
        labels = ([e.label or "" for e in encounters]
                  if any(e.label for e in encounters) else None)
    else:
        features = np.empty((0, 4 * cfg.window_points))
        labels = None
    enc_mod.write_features(features, feat_path, labels)
    print(f"extracted {len(encounters)} encounters from {len(trajectories)} "
          f"trajectories -> {enc_path}, {feat_path}")
    return 0


def _load_features(cfg: PipelineConfig):
    feat_path = _require(cfg.path("features"), "feature matrix")
    features, labels = enc_mod.read_features(feat_path)
    if features.size == 0:
        raise DataError(f"feature matrix {feat_path} is empty")
    return features, labels


def cmd_train(cfg: PipelineConfig) -> int:
    features, _ = _load_features(cfg)
    norm = enc_mod.fit_normalization(features)
    normalized = enc_mod.apply_normalization(features, norm)

    params = ae.init_params(cfg.layer_dims, seed=cfg.stage_seed("ae_init"),
                            activation=cfg.activation, init_scale=cfg.init_scale)
    train_cfg = ae.TrainConfig(learning_rate=cfg.learning_rate, epochs=cfg.epochs,
                               seed=cfg.stage_seed("ae_train"), shuffle=cfg.shuffle,
                               stop_tolerance=cfg.stop_tolerance)
    trained, curve = ae.train_sgd(params, normalized, train_cfg)

    for name in ("normalization", "checkpoint", "checkpoint_text", "loss_curve"):
        _ensure_parent(cfg.path(name))
    enc_mod.write_normalization(norm, cfg.path("normalization"))
    ae.save_checkpoint(trained, cfg.path("checkpoint"))
    ae.export_params_text(trained, cfg.path("checkpoint_text"))
    with open(cfg.path("loss_curve"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write("epoch,mean_error\n")
        for i, value in enumerate(curve, start=1):
            fh.write(f"{i},{value!r}\n")

    figures_dir = cfg.path("figures_dir")
    figures_dir.mkdir(parents=True, exist_ok=True)
    from . import figures
    figures.save_loss_curve_figure(curve, figures_dir / "loss_curve.svg")

    print(f"trained {len(curve)} epochs on {features.shape[0]} features: "
          f"loss {curve[0]!r} -> {curve[-1]!r} -> {cfg.path('checkpoint')}")
    return 0


def cmd_encode(cfg: PipelineConfig) -> int:
    features, labels = _load_features(cfg)
    norm = enc_mod.read_normalization(_require(cfg.path("normalization"),
                                               "normalization params"))
    params = ae.load_checkpoint(_require(cfg.path("checkpoint"), "model checkpoint"))
    codes = ae.encode_batch(params, enc_mod.apply_normalization(features, norm))
    codes_path = cfg.path("codes")
    _ensure_parent(codes_path)
    enc_mod.write_features(codes, codes_path, labels)
    print(f"encoded {codes.shape[0]} features to {codes.shape[1]}-d codes "
          f"-> {codes_path}")
    return 0


def _encounter_ids(cfg: PipelineConfig, n: int) -> list[str]:
    enc_path = Path(cfg.path("encounters"))
    if enc_path.is_file():
        ids = [e.id for e in enc_mod.read_encounters(enc_path)]
        if len(ids) == n:
            return ids
        log.warning("encounter file has %d entries but %d rows clustered; "
                    "falling back to row indices", len(ids), n)
    return [f"row{i:05d}" for i in range(n)]


def cmd_cluster(cfg: PipelineConfig) -> int:
    source = cfg.cluster_source
    path = _require(cfg.path(source), f"clustering input ({source})")
    points, _ = enc_mod.read_features(path)
    if points.size == 0:
        raise DataError(f"clustering input {path} is empty")
    model, assignments = km.kmeans_fit(points, cfg.k, seed=cfg.stage_seed("kmeans"),
                                       max_iter=cfg.kmeans_max_iter,
                                       tol=cfg.kmeans_tol, n_restarts=cfg.restarts)
    ids = _encounter_ids(cfg, points.shape[0])
    _ensure_parent(cfg.path("assignments"))
    _ensure_parent(cfg.path("cluster_model"))
    km.write_assignments(ids, assignments, cfg.path("assignments"))
    km.write_cluster_model(model, cfg.path("cluster_model"))
    print(f"clustered {points.shape[0]} points from {source} into k={cfg.k} "
          f"(inertia {model.inertia:.6g}, {model.n_iter} iterations) "
          f"-> {cfg.path('assignments')}")
    return 0


def cmd_evaluate(cfg: PipelineConfig) -> int:
    features, label_names = _load_features(cfg)
    if label_names is None:
        raise DataError("feature matrix has no label column; evaluation needs "
                        "ground-truth labels (generate + extract with labels)")
    try:
        labels = np.asarray([synthgen.CATEGORIES.index(name) for name in label_names])
    except ValueError:
        bad = sorted(set(label_names) - set(synthgen.CATEGORIES))
        raise DataError(f"unknown category labels in feature file: {bad}") from None

    train_cfg = ae.TrainConfig(learning_rate=cfg.learning_rate, epochs=cfg.epochs,
                               shuffle=cfg.shuffle, stop_tolerance=cfg.stop_tolerance)
    report = ev.compare_pipelines(
        features, labels, layer_dims=cfg.layer_dims, activation=cfg.activation,
        init_scale=cfg.init_scale, train_cfg=train_cfg, k=cfg.k,
        kmeans_max_iter=cfg.kmeans_max_iter, kmeans_restarts=cfg.restarts,
        seed=cfg.stage_seed("evaluate"), sample_size=cfg.sample_size)

    names = list(synthgen.CATEGORIES)
    _ensure_parent(cfg.path("report_csv"))
    _ensure_parent(cfg.path("report_text"))
    ev.write_report_csv(report, names, cfg.path("report_csv"))
    ev.write_report_text(report, names, cfg.path("report_text"),
                         reference=ev.FULL_SCALE_REFERENCE)

    figures_dir = cfg.path("figures_dir")
    figures_dir.mkdir(parents=True, exist_ok=True)
    from . import figures
    shown = [names[c] for c in range(report.n_categories)]
    figures.save_eta_comparison_figure(
        shown, [report.eta_aekmc[c] for c in range(report.n_categories)],
        [report.eta_kmeans[c] for c in range(report.n_categories)],
        figures_dir / "eta_comparison.svg")

    print(ev.format_report_table(report, names,
                                 reference=ev.FULL_SCALE_REFERENCE), end="")
    print(f"report -> {cfg.path('report_csv')}, {cfg.path('report_text')}")
    return 0


def _safe_name(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]", "_", name)


def cmd_plot(cfg: PipelineConfig, mode: str = "encounters") -> int:
    enc_path = _require(cfg.path("encounters"), "encounter file")
    encounters = enc_mod.read_encounters(enc_path)
    plots_dir = Path(cfg.path("plots_dir"))
    plots_dir.mkdir(parents=True, exist_ok=True)

    written = 0
    if mode == "encounters":
        for enc in encounters:
            doc = svgplot.encounter_svg(enc, stroke_a=cfg.stroke_a,
                                        stroke_b=cfg.stroke_b)
            out = plots_dir / f"encounter_{_safe_name(enc.id)}.svg"
            out.write_text(doc, encoding="utf-8")
            written += 1
    elif mode == "clusters":
        ids, assignments = km.read_assignments(_require(cfg.path("assignments"),
                                                        "assignments file"))
        by_id = {e.id: e for e in encounters}
        missing = [i for i in ids if i not in by_id]
        if missing:
            raise DataError(f"assignments reference unknown encounters, e.g. "
                            f"{missing[0]!r}")
        model_path = Path(cfg.path("cluster_model"))
        n_clusters = (km.read_cluster_model(model_path).k if model_path.is_file()
                      else int(assignments.max()) + 1)
        for c in range(n_clusters):
            members = [by_id[ids[i]] for i in np.flatnonzero(assignments == c)]
            doc = svgplot.cluster_grid_svg(
                members, title=f"cluster {c} ({len(members)} encounters)",
                cols=cfg.grid_cols, max_cells=cfg.grid_max,
                stroke_a=cfg.stroke_a, stroke_b=cfg.stroke_b)
            out = plots_dir / f"cluster_{c:02d}.svg"
            out.write_text(doc, encoding="utf-8")
            written += 1
    else:
        raise ValidationError(f"plot mode must be 'encounters' or 'clusters', "
                              f"got {mode!r}")
    print(f"wrote {written} SVG file(s) -> {plots_dir}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="encluster",
        description="Extract, compress and cluster two-vehicle driving "
                    "encounters from GPS trip logs.")
    sub = parser.add_subparsers(dest="command", required=True)
    commands = {
        "generate": "synthesize a labeled trip log",
        "extract": "parse the trip log and extract encounter features",
        "train": "train the autoencoder on extracted features",
        "encode": "compress features to latent codes with a trained model",
        "cluster": "k-means on codes (or raw features)",
        "evaluate": "compare AE-kMC against raw k-means",
        "plot": "render encounter/cluster SVG plots",
    }
    for name, help_text in commands.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", metavar="PATH", default=None,
                       help="config file (key = value with [section] headers)")
        p.add_argument("--set", metavar="SECTION.KEY=VALUE", action="append",
                       default=[], dest="overrides",
                       help="override a single config key (repeatable)")
        p.add_argument("--seed", type=int, default=None,
                       help="override the top-level pipeline seed")
        if name == "plot":
            p.add_argument("--mode", choices=("encounters", "clusters"),
                           default="encounters",
                           help="one SVG per encounter, or a sample grid per cluster")
    return parser


_HANDLERS = {
    "generate": cmd_generate,
    "extract": cmd_extract,
    "train": cmd_train,
    "encode": cmd_encode,
    "cluster": cmd_cluster,
    "evaluate": cmd_evaluate,
}


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.overrides, args.seed)
        if args.command == "plot":
            return cmd_plot(cfg, mode=args.mode)
        return _HANDLERS[args.command](cfg)
    except ValidationError as exc:
        print(f"error [{args.command}]: {exc}", file=sys.stderr)
        return 1
    except (DataError, OSError) as exc:
        print(f"error [{args.command}]: {exc}", file=sys.stderr)
        return 2
    except DivergedError as exc:
        print(f"error [{args.command}]: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
