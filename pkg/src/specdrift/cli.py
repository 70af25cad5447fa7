"""Command-line entry point: ``specdrift <command> [options]``.

Exit codes: 0 on success, 1 for invalid input or configuration, 2 for
numerical or other runtime failures. Diagnostics go to standard error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .benchmark import BenchmarkConfig, run_benchmark
from .checks import MODULES, run_gradcheck
from .config import ExperimentConfig, strict
from .dataset import DriftSpec, SplitPlan, generate, read_bts, write_bts
from .errors import NumericError, ValidationError
from .metrics import fbd, subject_probe
from .numcore import Tensor, rfft, swapaxes
from .pce import pce_forward
from .spectral import to_polar
from .trainer import embed, evaluate_model, fit, load_model, save_json

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2


def parse_seeds(text):
    """``"41..45"`` or ``"41,43,45"`` -> list of ints."""
    text = text.strip()
    if ".." in text:
        lo, hi = (int(v) for v in text.split("..", 1))
        if hi < lo:
            raise ValueError(f"empty seed range {text!r}")
        return list(range(lo, hi + 1))
    return [int(v) for v in text.split(",") if v.strip()]


def _emit(payload, out=None):
    text = json.dumps(payload, indent=2, sort_keys=True)
    if out:
        Path(out).write_text(text + "\n")
    else:
        print(text)


def _batch_part(batch, split_path, part):
    if split_path is None:
        return batch
    plan = SplitPlan.from_dict(json.loads(Path(split_path).read_text()))
    return batch.subset(plan.indices(batch)[part])


# --- commands -------------------------------------------------------------------


def cmd_gen_data(args):
    spec = strict(DriftSpec, json.loads(Path(args.spec).read_text()), "spec")
    batch = generate(spec, args.seed)
    write_bts(args.out, batch)
    print(f"wrote {len(batch)} samples to {args.out}", file=sys.stderr)


def run_experiment(config, seed, out_dir):
    data = config.load_data()
    plan = config.split_plan(data)
    enc = config.encoder_config(data)
    result = fit(enc, data, plan, config.train_config(), seed, out_dir=out_dir)
    parts = plan.indices(data)
    report = {"seed": seed, "best_epoch": result.log.best_epoch, "best_val_f1": result.log.best_val_f1}
    report["val"] = evaluate_model(result.model, data.subset(parts["val"])).to_dict()
    if len(parts["test"]):
        report["test"] = evaluate_model(result.model, data.subset(parts["test"])).to_dict()
    report["metadata"] = {"wall_time": result.log.wall_time, "finished": time.strftime("%Y-%m-%dT%H:%M:%S")}
    save_json(os.path.join(out_dir, "split.json"), plan.to_dict())
    save_json(os.path.join(out_dir, f"metrics_seed{seed}.json"), report)
    return report


def cmd_train(args):
    config = ExperimentConfig.load(args.config)
    out_dir = args.out or config.output_dir
    report = run_experiment(config, args.seed, out_dir)
    _emit(report)


def _sweep_worker(payload):
    config_dict, seed, out_dir = payload
    return run_experiment(ExperimentConfig.from_dict(config_dict), seed, out_dir)


def aggregate(runs):
    """Mean and population std of every numeric metric over runs, per split."""
    summary = {}
    for part in ("val", "test"):
        rows = [r[part] for r in runs if part in r]
        if rows:
            summary[part] = {
                k: {"mean": float(np.mean([row[k] for row in rows])), "std": float(np.std([row[k] for row in rows]))}
                for k in rows[0]
            }
    return summary


def cmd_train_sweep(args):
    config = ExperimentConfig.load(args.config)
    seeds = parse_seeds(args.seeds) if args.seeds else list(config.train_config().seeds)
    out_dir = args.out or config.output_dir
    jobs = [(config.to_dict(), seed, out_dir) for seed in seeds]
    workers = max(1, int(os.environ.get("SPECDRIFT_THREADS", "1")))
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
            runs = list(pool.map(_sweep_worker, jobs))
    else:
        runs = [_sweep_worker(job) for job in jobs]
    payload = {"seeds": seeds, "runs": runs, "summary": aggregate(runs)}
    save_json(os.path.join(out_dir, "sweep.json"), payload)
    _emit(payload)


def cmd_eval(args):
    model, _ = load_model(args.checkpoint)
    batch = _batch_part(read_bts(args.data), args.split, args.part)
    _emit(evaluate_model(model, batch).to_dict(), args.out)


def cmd_fbd(args):
    if args.embeddings:
        arrays = np.load(args.embeddings)
        data, y, s = arrays["X"], arrays["y"], arrays["s"]
    else:
        batch = _batch_part(read_bts(args.data), args.split, args.part)
        y, s = batch.y, batch.s
        data = batch.X
        if args.checkpoint:
            model, _ = load_model(args.checkpoint)
            data = embed(model, batch.X, sequence=True)
    band_range = tuple(args.range) if args.range else None
    report = fbd(data, y, s, bin_width=args.bins, fs=args.fs, bin_hz=args.bin_hz, band_range=band_range)
    if args.out:
        Path(args.out + ".json").write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")
        report.to_csv(args.out + ".csv")
    _emit(report.to_dict() if not args.out else {"band_fbd": report.band_fbd, "json": args.out + ".json", "csv": args.out + ".csv"})


def cmd_probe(args):
    model, _ = load_model(args.checkpoint)
    batch = _batch_part(read_bts(args.data), args.split, args.part)
    score = subject_probe(embed(model, batch.X), batch.s, seed=args.seed)
    _emit({"subject_f1": score, "n_samples": len(batch), "n_subjects": int(len(np.unique(batch.s)))}, args.out)


def cmd_gradcheck(args):
    modules = MODULES if args.module == "all" else (args.module,)
    ok = True
    for name in modules:
        report = run_gradcheck(name, seed=args.seed)
        print(f"{name}: {report.summary()}")
        ok &= report.passed
    if not ok:
        raise NumericError("gradient check failed")


def cmd_benchmark(args):
    overrides = json.loads(Path(args.config).read_text()) if args.config else {}
    cfg = strict(BenchmarkConfig, overrides, "benchmark")
    if args.seeds:
        cfg.seeds = parse_seeds(args.seeds)
    _emit(run_benchmark(cfg, verbose=args.verbose).to_dict(), args.out)


def band_spectra(features):
    """Feature-averaged magnitude spectrum per sample, ``[N, T//2+1]``."""
    polar = to_polar(rfft(swapaxes(Tensor(features), 1, 2), axis=-1))
    mag = np.concatenate([np.abs(polar.dc.re.data), polar.magnitude.data], axis=-1)
    return mag.mean(axis=1)


def cmd_align_demo(args):
    model, _ = load_model(args.checkpoint)
    if model.cfg.align_module != "fbam":
        raise ValidationError("align-demo needs a checkpoint with align_module=fbam")
    batch = _batch_part(read_bts(args.data), args.split, args.part)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    before, after = [], []
    for lo in range(0, len(batch), 256):
        scales = pce_forward(Tensor(batch.X[lo:lo + 256]), model.pce)
        attn, align = model.scales[0][0]
        h = attn(scales[0]) if model.cfg.interleave == "attn_align" else scales[0]
        before.append(band_spectra(h.data))
        after.append(band_spectra(model._align(h, align, 0).data))
    before, after = np.concatenate(before), np.concatenate(after)
    for name, values in (("before", before), ("after", after)):
        with open(out_dir / f"spectra_{name}.csv", "w") as fh:
            fh.write("class,subject,bin,magnitude\n")
            for label in np.unique(batch.y):
                for subj in np.unique(batch.s[batch.y == label]):
                    mean = values[(batch.y == label) & (batch.s == subj)].mean(axis=0)
                    for k, v in enumerate(mean):
                        fh.write(f"{label},{subj},{k},{float(v)!r}\n")
    _emit({"out": str(out_dir), "samples": len(batch)})


# --- wiring ---------------------------------------------------------------------------


def build_parser():
    parser = argparse.ArgumentParser(prog="specdrift", description="Frequency-band alignment experiments.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate a synthetic spectral-drift dataset")
    p.add_argument("--spec", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", help="train one seed")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=41)
    p.add_argument("--out")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("train-sweep", help="train several seeds and aggregate")
    p.add_argument("--config", required=True)
    p.add_argument("--seeds", help="e.g. 41..45 or 41,42")
    p.add_argument("--out")
    p.set_defaults(func=cmd_train_sweep)

    def add_data(p, with_split=True):
        p.add_argument("--data", required=True)
        if with_split:
            p.add_argument("--split", help="split plan JSON; defaults to the whole file")
            p.add_argument("--part", default="test", choices=("train", "val", "test"))

    p = sub.add_parser("eval", help="metrics of a checkpoint on a dataset")
    p.add_argument("--checkpoint", required=True)
    add_data(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("fbd", help="frequency-band discriminability")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--data")
    group.add_argument("--embeddings", help=".npz with arrays X [N,T,D], y, s")
    p.add_argument("--checkpoint", help="use the model's temporal embeddings instead of raw data")
    p.add_argument("--split")
    p.add_argument("--part", default="test", choices=("train", "val", "test"))
    p.add_argument("--bins", type=int, default=1, help="FBD bin width in DFT bins")
    p.add_argument("--fs", type=float)
    p.add_argument("--bin-hz", type=float)
    p.add_argument("--range", type=int, nargs=2, metavar=("LO", "HI"))
    p.add_argument("--out", help="path prefix for .json and .csv outputs")
    p.set_defaults(func=cmd_fbd)

    p = sub.add_parser("probe", help="subject-identity probe on frozen embeddings")
    p.add_argument("--checkpoint", required=True)
    add_data(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_probe)

    p = sub.add_parser("gradcheck", help="finite-difference gradient check")
    p.add_argument("--module", default="all", choices=MODULES + ("all",))
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("benchmark", help="cross-subject comparison of alignment modules")
    p.add_argument("--config", help="JSON overrides of the benchmark settings")
    p.add_argument("--seeds", help="e.g. 41..45 or 41,42")
    p.add_argument("--out")
    p.add_argument("--verbose", action="store_true")
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("align-demo", help="dump spectra before/after the first FBAM block")
    p.add_argument("--checkpoint", required=True)
    add_data(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_align_demo)
    return parser


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:  # argparse usage errors count as invalid input
        return EXIT_OK if exc.code == 0 else EXIT_INVALID
    try:
        args.func(args)
    except (ArithmeticError, NumericError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as exc:  # noqa: BLE001 - last-resort mapping to the runtime exit code
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
