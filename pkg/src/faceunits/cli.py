"""Command-line interface tying the pipeline together for batch use.

Subcommands: learn, encode, rank, wcc, classify, synth, validate.
Exit codes: 0 success, 1 input/config error, 2 numerical/convergence error,
3 partial failure (some videos processed, some skipped).
"""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import formats
from .classify import CvConfig, LabeledDataset, component_weight_summary, \
    nested_loo_evaluate, subsampled_weight_rows
from .coding import CodingConfig, encode_series
from .core import (CoefficientSeries, DeformationSample,
                   synthesize_deformation, validate_dictionary)
from .errors import ConfigError, ConvergenceError, FaceUnitsError, InputError, \
    NumericalError, PartialFailure
from .learning import LearnConfig, learn, mean_abs_activation, rank_by_activation
from .synth import CoefficientDistribution, LabeledSeriesSpec, SynthSpec, \
    generate_labeled_series, generate_planted_corpus
from .topology import ibug51_topology
from .wcc import WccConfig, video_features


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage problems are input errors (exit 1)
        raise InputError(message)


def _common_flags(parser):
    parser.add_argument("--config", metavar="PATH",
                        help="pipeline config JSON providing defaults")
    parser.add_argument("--seed", type=int, default=None, help="run seed")
    parser.add_argument("--output", metavar="DIR", default=None,
                        help="output directory (default: current directory)")
    parser.add_argument("--threads", type=int, default=None,
                        help="worker threads for per-video stages")


def build_parser() -> _Parser:
    parser = _Parser(prog="faceunits",
                     description="Localized facial-expression basis toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("learn", help="learn a basis dictionary from a corpus",
                       description="Learn a localized basis from deformation "
                                   "samples (or expression coefficients plus a model).")
    _common_flags(p)
    p.add_argument("--corpus", metavar="PATH",
                   help="deformation sample matrix (.npy or .csv, N x 3L)")
    p.add_argument("--epsilons", metavar="PATH",
                   help="expression-coefficient matrix (.npy or .csv, N x M)")
    p.add_argument("--model", metavar="PATH",
                   help="expression model .npz (required with --epsilons)")
    p.add_argument("--topology", metavar="PATH", default=None,
                   help="topology JSON (default: builtin ibug51)")
    p.add_argument("--atoms", type=int, default=None, help="atom count K")
    p.add_argument("--lambda", dest="lam", type=float, default=None,
                   help="L1 penalty weight")
    p.add_argument("--iterations", type=int, default=None, help="outer iterations")
    p.add_argument("--init", choices=("masked_data_samples", "masked_gaussian"),
                   default=None)
    p.add_argument("--convergence-tol", type=float, default=None)
    p.add_argument("--payload", choices=("npy", "csv"), default="npy",
                   help="atoms payload encoding (npy is bit-exact)")
    p.add_argument("--name", default="dictionary", help="output file stem")
    p.set_defaults(func=cmd_learn)

    p = sub.add_parser("encode", help="sparse-code videos against a dictionary")
    _common_flags(p)
    p.add_argument("--dictionary", metavar="PATH", required=True)
    p.add_argument("--model", metavar="PATH",
                   help="expression model .npz (required for e0.. inputs)")
    p.add_argument("--lambda", dest="lam", type=float, default=None)
    p.add_argument("--max-iterations", type=int, default=None)
    p.add_argument("--tolerance", type=float, default=None)
    p.add_argument("--frame-rate", type=float, default=None,
                   help="frames/second when the input file has no frame_rate")
    p.add_argument("--no-pose", action="store_true",
                   help="accept inputs without pose columns (zeros are written)")
    p.add_argument("inputs", nargs="+", metavar="VIDEO_CSV")
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("rank", help="order atoms by activation on coefficient files")
    _common_flags(p)
    p.add_argument("--dictionary", metavar="PATH", required=True)
    p.add_argument("--name", default="dictionary_ranked", help="output file stem")
    p.add_argument("--payload", choices=("npy", "csv"), default="npy")
    p.add_argument("inputs", nargs="+", metavar="COEFFS_CSV")
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("wcc", help="windowed cross-correlation features per video")
    _common_flags(p)
    p.add_argument("--window-seconds", type=float, default=None)
    p.add_argument("--stride-seconds", type=float, default=None)
    p.add_argument("--lag-seconds", type=float, default=None)
    p.add_argument("--lag-step", type=int, default=None)
    p.add_argument("--channels", nargs="+", default=None, metavar="NAME",
                   help="restrict to these channel names")
    p.add_argument("--name", default="features", help="output file stem")
    p.add_argument("inputs", nargs="+", metavar="COEFFS_CSV")
    p.set_defaults(func=cmd_wcc)

    p = sub.add_parser("classify", help="nested leave-one-out SVM evaluation")
    _common_flags(p)
    p.add_argument("--features", metavar="PATH", required=True)
    p.add_argument("--labels", metavar="PATH", required=True)
    p.add_argument("--pairs", metavar="PATH", default=None,
                   help="feature-pair sidecar (default: <features>.pairs.csv)")
    p.add_argument("--c-grid", nargs="+", type=float, default=None)
    p.add_argument("--inner-folds", type=int, default=None)
    p.add_argument("--no-standardize", action="store_true")
    p.add_argument("--weight-summary", action="store_true",
                   help="also write per-component weight distributions")
    p.add_argument("--subsamples", type=int, default=100,
                   help="retrainings behind the weight summary")
    p.add_argument("--subsample-fraction", type=float, default=0.9)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("synth", help="write synthetic corpora or labeled series")
    _common_flags(p)
    kind = p.add_subparsers(dest="kind", required=True)

    pc = kind.add_parser("corpus", help="planted-dictionary corpus")
    _common_flags(pc)
    pc.add_argument("--topology", metavar="PATH", default=None)
    pc.add_argument("--atoms", type=int, default=12)
    pc.add_argument("--active", type=int, default=3)
    pc.add_argument("--samples", type=int, default=2000)
    pc.add_argument("--noise", type=float, default=0.01)
    pc.add_argument("--min-coef", type=float, default=0.5)
    pc.add_argument("--max-coef", type=float, default=1.5)
    pc.add_argument("--signs", choices=("random", "positive"), default="random")
    pc.set_defaults(func=cmd_synth_corpus)

    ps = kind.add_parser("series", help="two-class coupled/independent series")
    _common_flags(ps)
    ps.add_argument("--videos-per-class", type=int, default=30)
    ps.add_argument("--bu-channels", type=int, default=4)
    ps.add_argument("--frames", type=int, default=240)
    ps.add_argument("--frame-rate", type=float, default=30.0)
    ps.add_argument("--lag", type=int, default=3)
    ps.add_argument("--coupling-noise", type=float, default=0.05)
    ps.add_argument("--no-coupling", action="store_true",
                    help="negative control: both classes independent")
    ps.set_defaults(func=cmd_synth_series)

    p = sub.add_parser("validate", help="report dictionary invariant violations")
    _common_flags(p)
    p.add_argument("--dictionary", metavar="PATH", required=True)
    p.set_defaults(func=cmd_validate)

    return parser


def _load_run_config(args) -> formats.PipelineConfig:
    if getattr(args, "config", None):
        return formats.load_pipeline_config(args.config)
    return formats.PipelineConfig()


def _out_dir(args, run: formats.PipelineConfig) -> Path:
    out = Path(args.output or run.output or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _threads(args, run: formats.PipelineConfig) -> int:
    threads = args.threads if args.threads is not None else run.threads
    return max(1, int(threads))


def _load_topology(path_or_none, run: formats.PipelineConfig):
    source = path_or_none or run.topology
    if source is None or source == "ibug51":
        return ibug51_topology(), "ibug51"
    # only the file name goes into recorded config, so outputs do not depend
    # on where inputs happen to live
    return formats.load_topology(source), Path(source).name


def _map_ordered(worker, items, threads):
    """Apply worker over items, preserving input order regardless of scheduling."""
    if threads <= 1 or len(items) <= 1:
        return [worker(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(worker, items))


def cmd_learn(args) -> int:
    run = _load_run_config(args)
    out = _out_dir(args, run)
    topology, topo_source = _load_topology(args.topology, run)
    if bool(args.corpus) == bool(args.epsilons):
        raise InputError("provide exactly one of --corpus or --epsilons")
    if args.corpus:
        data = formats.load_matrix(args.corpus)
    else:
        if not args.model and not run.model:
            raise InputError("--epsilons input needs --model for the expression model")
        model = formats.load_expression_model(args.model or run.model)
        eps = formats.load_matrix(args.epsilons)
        if eps.shape[1] != model.component_count:
            raise InputError(
                f"epsilon rows have {eps.shape[1]} entries, model has "
                f"{model.component_count} components")
        data = eps @ model.basis.T
    base = run.learn
    cfg = LearnConfig(
        atom_count=args.atoms if args.atoms is not None else base.atom_count,
        lam=args.lam if args.lam is not None else base.lam,
        group_allocation=base.group_allocation,
        outer_iterations=(args.iterations if args.iterations is not None
                          else base.outer_iterations),
        seed=args.seed if args.seed is not None else base.seed,
        init=args.init if args.init is not None else base.init,
        convergence_tol=(args.convergence_tol if args.convergence_tol is not None
                         else base.convergence_tol))
    dictionary, log = learn(data, topology, cfg)
    cfg_obj = {
        "command": "learn",
        "atom_count": cfg.atom_count,
        "lambda": cfg.lam,
        "group_allocation": None if cfg.group_allocation is None
                            else dict(cfg.group_allocation),
        "outer_iterations": cfg.outer_iterations,
        "seed": cfg.seed,
        "init": cfg.init,
        "convergence_tol": cfg.convergence_tol,
        "topology": topo_source,
    }
    json_path = out / f"{args.name}.json"
    formats.save_dictionary(
        json_path, dictionary, payload=args.payload,
        training={
            "stop_reason": log.stop_reason,
            "iterations": len(log.records),
            "final_objective": log.final_objective,
        },
        config=cfg_obj,
        invocation=list(getattr(args, "_argv", [])))
    formats.save_training_log(out / f"{args.name}.training_log.csv", log,
                              cfg_hash=formats.config_hash(cfg_obj))
    print(f"wrote {json_path} ({dictionary.atom_count} atoms, "
          f"{len(log.records)} iterations, stop: {log.stop_reason})")
    return 0


def cmd_encode(args) -> int:
    run = _load_run_config(args)
    out = _out_dir(args, run)
    dictionary, _ = formats.load_dictionary(args.dictionary)
    if dictionary.atom_names is None:
        raise InputError("dictionary has no atom names; run validate/assign first")
    base = run.coding
    cfg = CodingConfig(
        lam=args.lam if args.lam is not None else base.lam,
        max_iterations=(args.max_iterations if args.max_iterations is not None
                        else base.max_iterations),
        tolerance=args.tolerance if args.tolerance is not None else base.tolerance)
    model = None
    if args.model or run.model:
        model = formats.load_expression_model(args.model or run.model)
    cfg_obj = {"command": "encode", "lambda": cfg.lam,
               "max_iterations": cfg.max_iterations, "tolerance": cfg.tolerance,
               "dictionary": Path(args.dictionary).name}
    cfg_digest = formats.config_hash(cfg_obj)

    def encode_one(path):
        video = formats.load_video_input(path)
        if video.kind == "epsilon":
            if model is None:
                raise InputError(
                    f"{path}: expression-coefficient input needs --model")
            if video.values.shape[1] != model.component_count:
                raise InputError(
                    f"{path}: {video.values.shape[1]} coefficients per frame, model "
                    f"has {model.component_count} components")
            frames = [synthesize_deformation(model, row) for row in video.values]
        else:
            if video.values.shape[1] != dictionary.atoms.shape[0]:
                raise InputError(
                    f"{path}: deformation rows have {video.values.shape[1]} entries, "
                    f"dictionary expects {dictionary.atoms.shape[0]}")
            frames = [DeformationSample(row) for row in video.values]
        if frames and frames[0].coordinate_count != dictionary.atoms.shape[0]:
            raise InputError(
                f"{path}: deformations have {frames[0].coordinate_count} entries, "
                f"dictionary expects {dictionary.atoms.shape[0]}")
        if video.pose is None and not args.no_pose:
            raise InputError(
                f"{path}: missing pitch,yaw,roll columns (pass --no-pose to fill zeros)")
        rate = video.frame_rate if video.frame_rate is not None else args.frame_rate
        if rate is None:
            raise InputError(
                f"{path}: no '# frame_rate=' metadata and no --frame-rate flag")
        codes = encode_series(dictionary, frames, cfg)
        pose = video.pose if video.pose is not None \
            else np.zeros((codes.shape[0], 3))
        series = CoefficientSeries(frame_rate=rate, bu_coefficients=codes,
                                   head_rotation=pose)
        target = out / f"{video.video_id}.coeffs.csv"
        formats.save_coefficient_series(target, series, dictionary.atom_names,
                                        video.video_id, cfg_hash=cfg_digest)
        return target

    written = _map_ordered(encode_one, list(args.inputs), _threads(args, run))
    for target in written:
        print(f"wrote {target}")
    return 0


def cmd_rank(args) -> int:
    run = _load_run_config(args)
    out = _out_dir(args, run)
    dictionary, _ = formats.load_dictionary(args.dictionary)
    files = [formats.load_coefficient_series(path) for path in args.inputs]
    series = [f.series for f in files]
    ranked = rank_by_activation(dictionary, series)
    means = mean_abs_activation(dictionary, series)
    cfg_obj = {"command": "rank", "dictionary": Path(args.dictionary).name,
               "inputs": [Path(p).name for p in args.inputs]}
    json_path = out / f"{args.name}.json"
    formats.save_dictionary(json_path, ranked, payload=args.payload, config=cfg_obj,
                            invocation=list(getattr(args, "_argv", [])))
    formats.save_rank_manifest(out / f"{args.name}.rank_manifest.csv", ranked, means,
                               cfg_hash=formats.config_hash(cfg_obj))
    print(f"wrote {json_path}")
    return 0


def cmd_wcc(args) -> int:
    run = _load_run_config(args)
    out = _out_dir(args, run)
    base = run.wcc
    cfg = WccConfig(
        window_seconds=(args.window_seconds if args.window_seconds is not None
                        else base.window_seconds),
        window_stride_seconds=(args.stride_seconds if args.stride_seconds is not None
                               else base.window_stride_seconds),
        lag_range_seconds=(args.lag_seconds if args.lag_seconds is not None
                           else base.lag_range_seconds),
        lag_step_frames=(args.lag_step if args.lag_step is not None
                         else base.lag_step_frames),
        selected_channels=base.selected_channels)

    def features_one(path):
        coeffs = formats.load_coefficient_series(path)
        names = coeffs.bu_names + ("pitch", "yaw", "roll")
        series_cfg = cfg
        if args.channels is not None:
            missing = [c for c in args.channels if c not in names]
            if missing:
                raise InputError(f"{path}: unknown channel names {missing}")
            series_cfg = WccConfig(
                window_seconds=cfg.window_seconds,
                window_stride_seconds=cfg.window_stride_seconds,
                lag_range_seconds=cfg.lag_range_seconds,
                lag_step_frames=cfg.lag_step_frames,
                selected_channels=tuple(names.index(c) for c in args.channels))
        return coeffs.video_id, video_features(coeffs.series, series_cfg, names)

    entries = []
    skipped = []
    for path in args.inputs:
        try:
            entries.append(features_one(path))
        except InputError as exc:
            skipped.append((path, str(exc)))
            print(f"warning: skipping {path}: {exc}", file=sys.stderr)
    if not entries:
        raise InputError("no video produced features; all inputs failed")
    cfg_obj = {
        "command": "wcc",
        "window_seconds": cfg.window_seconds,
        "window_stride_seconds": cfg.window_stride_seconds,
        "lag_range_seconds": cfg.lag_range_seconds,
        "lag_step_frames": cfg.lag_step_frames,
        "channels": args.channels,
    }
    features_path = out / f"{args.name}.csv"
    formats.save_feature_table(features_path, entries, cfg_obj=cfg_obj,
                               pairs_path=out / f"{args.name}.pairs.csv")
    print(f"wrote {features_path} ({len(entries)} videos, "
          f"{len(entries[0][1].values)} features)")
    if skipped:
        raise PartialFailure(
            f"skipped {len(skipped)} of {len(args.inputs)} videos: "
            + ", ".join(path for path, _ in skipped))
    return 0


def cmd_classify(args) -> int:
    run = _load_run_config(args)
    out = _out_dir(args, run)
    table = formats.load_feature_table(args.features)
    labels = formats.load_labels(args.labels)
    missing = [v for v in table.video_ids if v not in labels]
    unused = [v for v in labels if v not in table.video_ids]
    if missing or unused:
        raise InputError(
            f"video ids do not match between feature and label files: "
            f"{len(missing)} without labels {missing[:5]}, "
            f"{len(unused)} without features {unused[:5]}")
    dataset = LabeledDataset(
        features=table.features,
        labels=tuple(labels[v] for v in table.video_ids),
        video_ids=table.video_ids)
    base = run.cv
    cfg = CvConfig(
        c_grid=tuple(sorted(args.c_grid)) if args.c_grid is not None else base.c_grid,
        inner_folds=(args.inner_folds if args.inner_folds is not None
                     else base.inner_folds),
        seed=args.seed if args.seed is not None else base.seed,
        standardize=False if args.no_standardize else base.standardize)
    report = nested_loo_evaluate(dataset, cfg)
    cfg_obj = {"command": "classify", "c_grid": list(cfg.c_grid),
               "inner_folds": cfg.inner_folds, "seed": cfg.seed,
               "standardize": cfg.standardize,
               "features": Path(args.features).name,
               "labels": Path(args.labels).name}
    report_path = out / "evaluation.json"
    formats.save_evaluation_report(report_path, report, cfg_obj=cfg_obj)
    print(f"wrote {report_path} (accuracy {report.accuracy:.3f})")
    if args.weight_summary:
        pairs_path = args.pairs or str(Path(args.features).with_suffix("")) + ".pairs.csv"
        names = formats.channel_names_from_pairs(formats.load_feature_pairs(pairs_path))
        rows, chosen_c = subsampled_weight_rows(
            dataset, cfg, subsample_count=args.subsamples,
            fraction=args.subsample_fraction)
        summaries = component_weight_summary(rows, names)
        summary_path = out / "weight_summary.csv"
        formats.save_weight_summary(
            summary_path, summaries,
            cfg_hash=formats.config_hash({**cfg_obj, "subsamples": args.subsamples,
                                          "fraction": args.subsample_fraction,
                                          "chosen_c": chosen_c}))
        print(f"wrote {summary_path} (C={chosen_c})")
    return 0


def cmd_synth_corpus(args) -> int:
    run = _load_run_config(args)
    out = _out_dir(args, run)
    topology, topo_source = _load_topology(args.topology, run)
    spec = SynthSpec(
        topology=topology,
        planted_atom_count=args.atoms,
        samples=args.samples,
        active_atoms_per_sample=args.active,
        coefficients=CoefficientDistribution(
            min_magnitude=args.min_coef, max_magnitude=args.max_coef,
            signs=args.signs),
        noise_sigma=args.noise,
        seed=args.seed if args.seed is not None else 0)
    data, truth, codes = generate_planted_corpus(spec)
    formats.save_matrix(out / "corpus.npy", data)
    formats.save_matrix(out / "true_codes.npy", codes)
    cfg_obj = {"command": "synth corpus", "atoms": spec.planted_atom_count,
               "active": spec.active_atoms_per_sample, "samples": spec.samples,
               "noise": spec.noise_sigma, "seed": spec.seed,
               "signs": spec.coefficients.signs,
               "min_coef": spec.coefficients.min_magnitude,
               "max_coef": spec.coefficients.max_magnitude,
               "topology": topo_source}
    formats.save_dictionary(out / "truth.json", truth, config=cfg_obj,
                            invocation=list(getattr(args, "_argv", [])))
    print(f"wrote {out / 'corpus.npy'} ({spec.samples} x "
          f"{topology.coordinate_count}) and truth dictionary")
    return 0


def cmd_synth_series(args) -> int:
    run = _load_run_config(args)
    out = _out_dir(args, run)
    spec = LabeledSeriesSpec(
        videos_per_class=args.videos_per_class,
        bu_channel_count=args.bu_channels,
        frames=args.frames,
        frame_rate=args.frame_rate,
        coupling_lag_frames=args.lag,
        coupling_noise=args.coupling_noise,
        coupling=not args.no_coupling,
        seed=args.seed if args.seed is not None else 0)
    labeled = generate_labeled_series(spec)
    bu_names = tuple(f"bu{k + 1}" for k in range(spec.bu_channel_count))
    cfg_digest = formats.config_hash({"command": "synth series",
                                      "spec": repr(spec)})
    label_rows = []
    counters = {"A": 0, "B": 0}
    for series, label in labeled:
        video_id = f"{label}_{counters[label]:03d}"
        counters[label] += 1
        formats.save_coefficient_series(out / f"{video_id}.coeffs.csv", series,
                                        bu_names, video_id, cfg_hash=cfg_digest)
        label_rows.append((video_id, label))
    formats.save_labels(out / "labels.csv", label_rows)
    print(f"wrote {len(label_rows)} series and {out / 'labels.csv'}")
    return 0


def cmd_validate(args) -> int:
    dictionary, _ = formats.load_dictionary(args.dictionary)
    report = validate_dictionary(dictionary)
    if report.ok:
        print(f"{args.dictionary}: dictionary valid "
              f"({dictionary.atom_count} atoms)")
        return 0
    print(f"{args.dictionary}: {len(report.issues)} violations", file=sys.stderr)
    for issue in report.issues:
        print(f"  [{issue.kind}] {issue.message}", file=sys.stderr)
    return 1


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        args._argv = argv
        return args.func(args)
    except PartialFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (ConvergenceError, NumericalError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FaceUnitsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
