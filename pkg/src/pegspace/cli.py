"""Command-line entry point: ``pegspace <subcommand> [options]``.

Subcommands communicate only through files under ``--out``:

    sweep     simulate the category grid, write sweep_<peg>.csv
    analyze   success rates, binned fits, PCA, clustering, MANOVA tables
    train     fit success predictors, write model_<tag>.nn
    sample    draw predicted-successful parameter sets from models
    predict   print the success probability of one parameter set
    simulate  run and print a single trial
"""
from __future__ import annotations

import argparse
import dataclasses
import os
import sys
from pathlib import Path

import numpy as np

from . import datastore
from .eda import PARAM_NAMES, ImpedanceParams
from .pipeline import DEFAULT_OPTIONS, AnalysisReport, analyze, predicted_histograms, sample_model, \
    train_models
from .predictor import SamplingExhausted, TrainConfig, forward
from .sim import SHAPES, PegSpec, SimConfig, SimulationDiverged, run_trial
from .sweep import CategoryRanges, grid_indices, run_sweep


def _progress(msg):
    print(msg, file=sys.stderr, flush=True)


def _params(text):
    try:
        values = [float(v) for v in text.replace(" ", "").split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError("parameters must be numbers") from None
    if len(values) != 8:
        raise argparse.ArgumentTypeError(f"expected 8 comma-separated values ({','.join(PARAM_NAMES)})")
    return values


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="master seed for all randomness (default 0)")
    common.add_argument("--out", default=os.environ.get("PEGSPACE_OUT", "pegspace_out"),
                        help="output root (default $PEGSPACE_OUT or ./pegspace_out)")

    parser = argparse.ArgumentParser(prog="pegspace", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sweep", parents=[common], help="simulate the impedance category grid")
    p.add_argument("--peg", choices=SHAPES + ("all",), default="all")
    p.add_argument("--jobs", type=_positive_int, default=1)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--grid-subsample", type=_positive_int, metavar="K", help="keep every K-th grid tuple")
    g.add_argument("--trials", type=_positive_int, metavar="N",
                   help="keep N evenly spaced grid tuples (81 gives the 3^4 sub-grid)")
    p.add_argument("--clearance", type=float, help="override the peg's clearance (mm)")
    p.add_argument("--timeout", type=float, help="simulated time budget per trial (s)")
    p.add_argument("--dt", type=float, help="integration step (s)")

    p = sub.add_parser("analyze", parents=[common], help="statistics and report tables")
    p.add_argument("--data", nargs="+", help="dataset CSVs (default: sweep_*.csv under --out)")
    p.add_argument("--lenient", action="store_true", help="quarantine malformed rows instead of failing")
    p.add_argument("--raw", action="store_true", help="PCA on centred raw values, no min-max scaling")
    p.add_argument("--n-bins", type=_positive_int, default=DEFAULT_OPTIONS["n_bins"])
    p.add_argument("--k-min", type=_positive_int, default=DEFAULT_OPTIONS["k_min"])
    p.add_argument("--k-max", type=_positive_int, default=DEFAULT_OPTIONS["k_max"])
    p.add_argument("--slope-pairs", type=_positive_int, default=DEFAULT_OPTIONS["slope_pairs"])
    p.add_argument("--slope-method", choices=("paired_t", "rank"), default=DEFAULT_OPTIONS["slope_method"])
    p.add_argument("--cluster-normalize", action="store_true", help="min-max scale before clustering")

    p = sub.add_parser("train", parents=[common], help="train success predictors")
    p.add_argument("--data", nargs="+", help="dataset CSVs (default: sweep_*.csv under --out)")
    p.add_argument("--lenient", action="store_true")
    p.add_argument("--epochs", type=_positive_int, default=TrainConfig.epochs)
    p.add_argument("--lr", type=float, default=TrainConfig.learning_rate)
    p.add_argument("--split", type=float, default=TrainConfig.split)
    p.add_argument("--threshold", type=float, default=TrainConfig.threshold)

    p = sub.add_parser("sample", parents=[common], help="sample predicted-successful parameter sets")
    p.add_argument("--model", nargs="+", help="model files (default: model_*.nn under --out)")
    p.add_argument("--n", type=_positive_int, default=100_000, help="accepted sets per model")
    p.add_argument("--max-attempts", type=_positive_int)
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--n-bins", type=_positive_int, default=DEFAULT_OPTIONS["n_bins"])

    p = sub.add_parser("predict", help="success probability of one parameter set")
    p.add_argument("--model", required=True)
    p.add_argument("--params", type=_params, required=True, metavar="V1,...,V8",
                   help=",".join(PARAM_NAMES))
    p.add_argument("--threshold", type=float, default=0.5)

    p = sub.add_parser("simulate", help="run a single trial")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--peg", choices=SHAPES, default="square")
    p.add_argument("--params", type=_params, required=True, metavar="V1,...,V8")
    p.add_argument("--clearance", type=float)
    return parser


def _sim_config(args) -> SimConfig:
    overrides = {k: getattr(args, k) for k in ("timeout", "dt") if getattr(args, k, None) is not None}
    return SimConfig(**overrides)


def _load_all(args) -> dict:
    paths = [Path(p) for p in args.data] if args.data else \
        [Path(args.out) / f"sweep_{s}.csv" for s in SHAPES if (Path(args.out) / f"sweep_{s}.csv").exists()]
    if not paths:
        raise FileNotFoundError(f"no datasets found under {args.out}")
    datasets = {}
    for path in paths:
        data = datastore.load_dataset(path, strict=not args.lenient, peg=path.stem.replace("sweep_", ""))
        if data.quarantined:
            _progress(f"{path}: {len(data.quarantined)} rows quarantined")
        for peg in data.pegs:
            part = data.for_peg(peg)
            if peg in datasets:
                datasets[peg].records.extend(part.records)
            else:
                datasets[peg] = part
    return datasets


def cmd_sweep(args) -> int:
    pegs = SHAPES if args.peg == "all" else (args.peg,)
    sim = _sim_config(args)
    indices = grid_indices(args.grid_subsample, args.trials)
    for shape in pegs:
        peg = PegSpec(shape, clearance=args.clearance)
        _progress(f"sweep {shape}: {len(indices)} trials")
        data = run_sweep(peg, CategoryRanges(), sim, args.seed, jobs=args.jobs, indices=indices)
        path = Path(args.out) / f"sweep_{shape}.csv"
        datastore.save_dataset(data, path)
        _progress(f"wrote {path} ({sum(data.y)}/{len(data)} successful)")
    return 0


def cmd_analyze(args) -> int:
    datasets = _load_all(args)
    options = {
        "normalize": not args.raw, "n_bins": args.n_bins, "k_min": args.k_min, "k_max": args.k_max,
        "slope_pairs": args.slope_pairs, "slope_method": args.slope_method,
        "cluster_normalize": args.cluster_normalize,
    }
    if args.k_min < 2 or args.k_max < args.k_min:
        raise ValueError("need 2 <= k-min <= k-max")
    report = analyze(datasets, args.seed, options, log=_progress)
    for path in datastore.export_report(report, args.out):
        _progress(f"wrote {path}")
    return 0


def cmd_train(args) -> int:
    datasets = _load_all(args)
    config = TrainConfig(epochs=args.epochs, learning_rate=args.lr, split=args.split, threshold=args.threshold)
    results = train_models(datasets, args.seed, config, log=_progress)
    if not results:
        raise ValueError("no model trained: every dataset needs both successes and failures")
    out = Path(args.out)
    rows = []
    for tag, (res, cfg) in results.items():
        X = np.vstack([d.X for d in datasets.values()]) if tag == "all" else datasets[tag].X
        y = np.concatenate([d.y for d in datasets.values()]) if tag == "all" else datasets[tag].y
        datastore.save_model(res.model, out / f"model_{tag}.nn", dataclasses.asdict(cfg),
                             datastore.dataset_fingerprint(X, y))
        c = res.confusion
        rows.append([tag, len(res.train_index), len(res.validation_index), res.validation_accuracy,
                     c.tp, c.tn, c.fp, c.fn, res.train_curve[-1]])
        _progress(f"{tag}: validation accuracy {res.validation_accuracy:.4f}")
    datastore.write_csv(out / "train_summary.csv",
                        ["model", "n_train", "n_validation", "validation_accuracy", "tp", "tn", "fp", "fn",
                         "final_loss"], rows, {"master_seed": args.seed})
    return 0


def cmd_sample(args) -> int:
    out = Path(args.out)
    paths = [Path(p) for p in args.model] if args.model else sorted(out.glob("model_*.nn"))
    if not paths:
        raise FileNotFoundError(f"no model files found under {out}")
    report = AnalysisReport(args.seed, {"threshold": args.threshold, "n_target": args.n})
    for path in paths:
        tag = path.stem.replace("model_", "")
        model = datastore.load_model(path)
        try:
            res = sample_model(model, tag, args.n, args.seed, args.threshold, args.max_attempts)
        except SamplingExhausted as exc:
            _progress(f"{tag}: {exc}")
            return 1
        rate = 100.0 * res.acceptance_rate
        datastore.write_csv(out / f"predicted_{tag}.csv", list(PARAM_NAMES), res.samples,
                            {"master_seed": args.seed, "acceptance_rate_percent": rate, "attempts": res.attempts})
        report.predicted[tag] = (predicted_histograms(res.samples, args.n_bins), rate)
        _progress(f"{tag}: {len(res.samples)} sets, predicted success rate {rate:.2f}%")
    datastore.export_report(report, out)
    return 0


def cmd_predict(args) -> int:
    model = datastore.load_model(args.model)
    pred = forward(model, args.params)
    if pred.extrapolated:
        _progress("warning: parameters outside the model's feature ranges")
    verdict = "SUCCESS" if pred.probability >= args.threshold else "FAILURE"
    print(f"{pred.probability:.6f} {verdict}")
    return 0


def cmd_simulate(args) -> int:
    params = ImpedanceParams.from_array(args.params)
    try:
        o = run_trial(PegSpec(args.peg, clearance=args.clearance), params, SimConfig(seed=args.seed))
    except SimulationDiverged as exc:
        print(f"termination=diverged ({exc})")
        return 0
    print(f"success={o.success}")
    print(f"termination={o.termination.value}")
    print(f"depth_mm={o.depth_reached:.4f}")
    print(f"sim_time_s={o.sim_time:.3f}")
    return 0


COMMANDS = {"sweep": cmd_sweep, "analyze": cmd_analyze, "train": cmd_train, "sample": cmd_sample,
            "predict": cmd_predict, "simulate": cmd_simulate}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (OSError, ValueError, RuntimeError) as exc:
        print(f"pegspace {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
