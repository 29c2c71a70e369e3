"""Batch experiment driver: decompose tensors, sweep classifiers over
transforms and truncations, score ROI-dependent transforms, and generate
synthetic datasets. Every run is reproducible from its --seed; results land
in CSV files with a rendered figure alongside (disable with --no-plot).

A JSON config given with --config mirrors the long flag names (underscored);
explicit flags override config values.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import classification, data, decomposition, plots
from .core import frobenius_norm
from .transforms import (
    TransformSet,
    build_banded,
    build_dct,
    build_dft,
    build_haar,
    build_random_orthogonal,
    explicit_transform,
    identity_transform,
)

SWEEP_HEADER = ["transform", "k", "accuracy", "train_n", "test_n", "seed"]
ROI_HEADER = ["roi_label", "accuracy"]


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    opts = _merge_config(args)
    try:
        return args.func(opts)
    except (OSError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="starm",
        description="Tensor-transform experiment harness: t-SVDM decomposition and "
                    "projection-based classification sweeps.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config mirroring the flags; flags override")
    common.add_argument("--seed", type=int, help="seed for all randomness (default 0)")
    common.add_argument("--threads", type=int, help="worker threads (default 1)")

    dec = sub.add_parser("decompose", parents=[common],
                         help="t-SVDM a tensor, save factors, report tube norms and errors")
    dec.add_argument("--input", help="input TNSR tensor")
    dec.add_argument("--method", help="uniform transform kind for all modes (default dft)")
    dec.add_argument("--transform", action="append", metavar="MODE:KIND[:PARAM]",
                     help="per-mode transform, repeatable (overrides --method)")
    dec.add_argument("--k", type=int, help="also save factors truncated to this t-rank")
    dec.add_argument("--bandwidth", type=int, help="bandwidth for banded transforms (default 2)")
    dec.add_argument("--out", help="output directory")
    dec.add_argument("--no-plot", action="store_true", default=None)
    dec.set_defaults(func=cmd_decompose, defaults={
        "input": None, "method": "dft", "transform": None, "k": None,
        "bandwidth": 2, "out": None, "seed": 0, "threads": 1, "no_plot": False,
    })

    sw = sub.add_parser("sweep", parents=[common],
                        help="classification accuracy over (transform, k) grid, CSV + figure")
    sw.add_argument("--input", help="dataset TNSR, trials on dimension 2")
    sw.add_argument("--labels", help="trial_index,label CSV")
    sw.add_argument("--methods", help="comma list of dft,dct,haar,banded,random,facewise,data,matrix")
    sw.add_argument("--transform", action="append", metavar="MODE:KIND[:PARAM]",
                    help="adds one custom per-mode combination as an extra method")
    sw.add_argument("--k", type=int, help="single truncation value")
    sw.add_argument("--k-range", help="truncation range a..b (inclusive)")
    sw.add_argument("--split", type=float, help="training fraction (default 0.67)")
    sw.add_argument("--bandwidth", type=int, help="bandwidth for banded transforms (default 2)")
    sw.add_argument("--out", help="output CSV path")
    sw.add_argument("--no-plot", action="store_true", default=None)
    sw.set_defaults(func=cmd_sweep, defaults={
        "input": None, "labels": None, "methods": "dct,matrix", "transform": None,
        "k": None, "k_range": None, "split": 0.67, "bandwidth": 2, "out": None,
        "seed": 0, "threads": 1, "no_plot": False,
    })

    roi = sub.add_parser("roi-sweep", parents=[common],
                         help="accuracy per ROI-dependent transform, CSV + figure")
    roi.add_argument("--input", help="dataset TNSR, trials on dimension 2")
    roi.add_argument("--labels", help="trial_index,label CSV")
    roi.add_argument("--roi", help="ROI label TNSR (single-trial shape)")
    roi.add_argument("--roi-labels", help="comma list of ROI labels to score")
    roi.add_argument("--k", type=int, help="truncation (default 4)")
    roi.add_argument("--split", type=float, help="training fraction (default 0.67)")
    roi.add_argument("--out", help="output CSV path")
    roi.add_argument("--no-plot", action="store_true", default=None)
    roi.set_defaults(func=cmd_roi_sweep, defaults={
        "input": None, "labels": None, "roi": None, "roi_labels": None, "k": 4,
        "split": 0.67, "out": None, "seed": 0, "threads": 1, "no_plot": False,
    })

    syn = sub.add_parser("synth", parents=[common],
                         help="generate a planted-class dataset (TNSR + labels CSV [+ ROI TNSR])")
    syn.add_argument("--classes", type=int, help="number of classes (default 2)")
    syn.add_argument("--trials-per-class", type=int, help="trials per class (default 60)")
    syn.add_argument("--sample-shape", help="per-trial dims n1,n3,...,np e.g. 16,16,4,8")
    syn.add_argument("--rank", type=int, help="planted t-rank per class (default 3)")
    syn.add_argument("--sigma", type=float, help="noise-to-signal scale (default 0.5)")
    syn.add_argument("--roi-regions", type=int, help="cut axis 1 into this many ROI bands")
    syn.add_argument("--roi-signal", type=int, help="band carrying the class signal (default 1)")
    syn.add_argument("--out", help="output path prefix")
    syn.set_defaults(func=cmd_synth, defaults={
        "classes": 2, "trials_per_class": 60, "sample_shape": None, "rank": 3,
        "sigma": 0.5, "roi_regions": 0, "roi_signal": 1, "out": None,
        "seed": 0, "threads": 1,
    })
    return parser


def _merge_config(args: argparse.Namespace) -> dict:
    merged = dict(args.defaults)
    if args.config:
        cfg = json.loads(Path(args.config).read_text())
        unknown = set(cfg) - set(merged)
        if unknown:
            raise SystemExit(f"error: unknown config keys {sorted(unknown)}")
        merged.update(cfg)
    for key in merged:
        value = getattr(args, key, None)
        if value is not None:
            merged[key] = value
    return merged


def _require(opts: dict, *keys: str) -> None:
    missing = [k for k in keys if opts.get(k) is None]
    if missing:
        flags = ", ".join("--" + k.replace("_", "-") for k in missing)
        raise ValueError(f"missing required option(s): {flags}")


def _parse_transform_flags(flags) -> dict[int, tuple[str, str | None]]:
    out = {}
    for flag in flags:
        parts = flag.split(":", 2)
        if len(parts) < 2 or not parts[0].isdigit():
            raise ValueError(f"--transform expects MODE:KIND[:PARAM], got {flag!r}")
        mode = int(parts[0])
        if mode < 3:
            raise ValueError(f"transforms apply to modes 3..p, got mode {mode}")
        out[mode] = (parts[1].lower(), parts[2] if len(parts) > 2 else None)
    return out


def _mode_transform(kind: str, n: int, param: str | None, *, mode: int, seed: int, bandwidth: int):
    if kind == "dft":
        return build_dft(n)
    if kind == "dct":
        return build_dct(n)
    if kind == "haar":
        return build_haar(n)
    if kind == "banded":
        return build_banded(n, int(param) if param else bandwidth)
    if kind in ("random", "random_orthogonal"):
        if param:
            return build_random_orthogonal(n, int(param))
        return build_random_orthogonal(n, np.random.SeedSequence(entropy=seed, spawn_key=(mode,)))
    if kind in ("identity", "facewise"):
        return identity_transform(n)
    if kind == "matrix":
        if not param:
            raise ValueError("matrix transforms need a TNSR path parameter: MODE:matrix:FILE")
        return explicit_transform(data.read_tnsr(param))
    raise ValueError(f"unknown transform kind {kind!r}")


def _custom_transform_set(trailing_shape, specs: dict[int, tuple[str, str | None]],
                          seed: int, bandwidth: int) -> tuple[str, TransformSet]:
    p = len(trailing_shape) + 2
    bad = [m for m in specs if m > p]
    if bad:
        raise ValueError(f"transform modes {bad} exceed tensor order {p}")
    parts = []
    transforms = []
    for i, n in enumerate(trailing_shape):
        mode = i + 3
        kind, param = specs.get(mode, ("identity", None))
        transforms.append(_mode_transform(kind, n, param, mode=mode, seed=seed, bandwidth=bandwidth))
        parts.append(f"{mode}:{kind}" + (f":{param}" if param else ""))
    return "+".join(parts), TransformSet(transforms)


def _parse_ks(opts: dict) -> list[int]:
    if opts.get("k_range"):
        text = str(opts["k_range"])
        if ".." not in text:
            raise ValueError(f"--k-range expects a..b, got {text!r}")
        lo, hi = text.split("..", 1)
        ks = list(range(int(lo), int(hi) + 1))
    elif opts.get("k") is not None:
        ks = [int(opts["k"])]
    else:
        raise ValueError("missing required option(s): --k or --k-range")
    if not ks or any(k < 1 for k in ks):
        raise ValueError(f"truncations must be >= 1, got {ks}")
    return ks


def _write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([row[h] for h in header])


def _load_dataset(opts: dict, with_roi: bool = False) -> data.LabeledDataset:
    samples = data.read_tnsr(opts["input"])
    labels = data.read_labels_csv(opts["labels"])
    roi = data.read_tnsr(opts["roi"]) if with_roi else None
    return data.LabeledDataset(samples, labels, roi)


def cmd_sweep(opts: dict) -> int:
    _require(opts, "input", "labels", "out")
    ds = _load_dataset(opts)
    ks = _parse_ks(opts)
    seed = int(opts["seed"])
    split = data.split(ds, float(opts["split"]), seed)
    trailing = ds.samples.shape[2:]
    train_n = sum(t.shape[1] for t in split.train.values())
    test_n = int(split.test_labels.size)
    class_ids = sorted(split.train)
    bandwidth = int(opts["bandwidth"])
    train_pool = np.concatenate([split.train[cid] for cid in class_ids], axis=1)

    methods: list[tuple[str, object]] = []
    for name in [m.strip().lower() for m in str(opts["methods"]).split(",") if m.strip()]:
        if name == "matrix":
            methods.append(("matrix", None))
        elif name == "data":
            methods.append(("data", TransformSet.data_dependent(train_pool)))
        else:
            methods.append((name, TransformSet.uniform(trailing, name, seed=seed, bandwidth=bandwidth)))
    if opts.get("transform"):
        specs = _parse_transform_flags(opts["transform"])
        methods.append(_custom_transform_set(trailing, specs, seed, bandwidth))
    if not methods:
        raise ValueError("no methods requested")

    def run(method):
        name, transforms = method
        if transforms is None:
            results = classification.matrix_baseline_sweep(split, ks)
        else:
            results = classification.tensor_sweep(split, transforms, ks)
        return [
            {"transform": name, "k": k, "accuracy": f"{results[k].accuracy:.6f}",
             "train_n": train_n, "test_n": test_n, "seed": seed}
            for k in ks
        ]

    rows: list[dict] = []
    failures: list[str] = []
    threads = int(opts["threads"])
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(lambda m: _try_run(run, m), methods))
    else:
        outcomes = [_try_run(run, m) for m in methods]
    for (name, _), outcome in zip(methods, outcomes):
        if isinstance(outcome, Exception):
            failures.append(f"{name}: {outcome}")
        else:
            rows.extend(outcome)

    rows.sort(key=lambda r: (r["transform"], int(r["k"])))
    _write_csv(opts["out"], SWEEP_HEADER, rows)
    if not opts["no_plot"] and rows:
        plots.save_sweep_figure(rows, Path(opts["out"]).with_suffix(".png"))
    for line in failures:
        print(f"failed: {line}", file=sys.stderr)
    return 1 if failures else 0


def _try_run(fn, arg):
    try:
        return fn(arg)
    except Exception as err:  # noqa: BLE001 - partial sweep failures are reported, not fatal
        return err


def cmd_roi_sweep(opts: dict) -> int:
    _require(opts, "input", "labels", "roi", "roi_labels", "out")
    ds = _load_dataset(opts, with_roi=True)
    seed = int(opts["seed"])
    split = data.split(ds, float(opts["split"]), seed)
    class_ids = sorted(split.train)
    train_pool = np.concatenate([split.train[cid] for cid in class_ids], axis=1)
    roi_tiled = data.tile_roi(ds.roi, train_pool.shape[1])
    k = int(opts["k"])
    roi_labels = [int(v) for v in str(opts["roi_labels"]).split(",") if v.strip()]

    def run(label):
        transforms = TransformSet.roi_dependent(train_pool, roi_tiled, label)
        bases = classification.build_local_bases(
            [split.train[cid] for cid in class_ids], k, transforms, class_ids=class_ids)
        return classification.evaluate(split, bases).accuracy

    rows = []
    failures = []
    threads = int(opts["threads"])
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(lambda lb: _try_run(run, lb), roi_labels))
    else:
        outcomes = [_try_run(run, lb) for lb in roi_labels]
    for label, outcome in zip(roi_labels, outcomes):
        if isinstance(outcome, Exception):
            rows.append({"roi_label": label, "accuracy": "error"})
            failures.append(f"roi {label}: {outcome}")
        else:
            rows.append({"roi_label": label, "accuracy": f"{outcome:.6f}"})

    rows.sort(key=lambda r: int(r["roi_label"]))
    _write_csv(opts["out"], ROI_HEADER, rows)
    if not opts["no_plot"] and rows:
        plots.save_roi_figure(rows, Path(opts["out"]).with_suffix(".png"))
    for line in failures:
        print(f"failed: {line}", file=sys.stderr)
    return 1 if failures else 0


def cmd_decompose(opts: dict) -> int:
    _require(opts, "input", "out")
    a = data.read_tnsr(opts["input"])
    if a.ndim < 2:
        raise ValueError("decompose needs a tensor of order >= 2")
    seed = int(opts["seed"])
    bandwidth = int(opts["bandwidth"])
    if opts.get("transform"):
        specs = _parse_transform_flags(opts["transform"])
        name, transforms = _custom_transform_set(a.shape[2:], specs, seed, bandwidth)
    else:
        name = str(opts["method"]).lower()
        transforms = TransformSet.uniform(a.shape[2:], name, seed=seed, bandwidth=bandwidth)

    factors = decomposition.tsvdm(a, transforms, workers=int(opts["threads"]))
    outdir = Path(opts["out"])
    outdir.mkdir(parents=True, exist_ok=True)
    decomposition.save_factors(factors, outdir, prefix="factors")

    norms = decomposition.singular_tube_norms(factors)
    rank = decomposition.t_rank(factors)
    print(f"transform: {name}")
    print(f"t-rank: {rank}")
    print("singular tube norms: " + " ".join(f"{v:.6e}" for v in norms))
    table = []
    print(f"{'k':>4} {'tube-tail error':>18} {'measured error':>18}")
    for k in range(1, norms.size + 1):
        measured = frobenius_norm(a - decomposition.reconstruct(decomposition.truncate(factors, k)))
        formula = None
        if transforms.orthogonal_multiple:
            formula = decomposition.truncation_error(factors, k)
        table.append((k, formula, measured))
        formula_txt = f"{formula:.6e}" if formula is not None else "n/a"
        print(f"{k:>4} {formula_txt:>18} {measured:.6e}")

    if opts.get("k") is not None:
        truncated = decomposition.truncate(factors, int(opts["k"]))
        decomposition.save_factors(truncated, outdir, prefix=f"factors_rank{int(opts['k'])}")
    if not opts["no_plot"]:
        plots.save_decompose_figure(norms, table, outdir / "decompose.png")
    return 0


def cmd_synth(opts: dict) -> int:
    _require(opts, "sample_shape", "out")
    shape = tuple(int(v) for v in str(opts["sample_shape"]).split(",") if v.strip())
    if int(opts["roi_regions"]) > 0:
        ds = data.synth_roi_planted(
            int(opts["classes"]), int(opts["trials_per_class"]), shape, int(opts["rank"]),
            float(opts["sigma"]), int(opts["seed"]), roi_regions=int(opts["roi_regions"]),
            roi_signal_label=int(opts["roi_signal"]),
        )
    else:
        ds = data.synth_planted(
            int(opts["classes"]), int(opts["trials_per_class"]), shape, int(opts["rank"]),
            float(opts["sigma"]), int(opts["seed"]),
        )
    prefix = Path(opts["out"])
    prefix.parent.mkdir(parents=True, exist_ok=True)
    data.write_tnsr(prefix.with_suffix(".tnsr"), ds.samples)
    data.write_labels_csv(prefix.parent / f"{prefix.name}_labels.csv", ds.labels)
    wrote = [str(prefix.with_suffix(".tnsr")), str(prefix.parent / f"{prefix.name}_labels.csv")]
    if ds.roi is not None:
        roi_path = prefix.parent / f"{prefix.name}_roi.tnsr"
        data.write_tnsr(roi_path, ds.roi)
        wrote.append(str(roi_path))
    print(f"dataset shape {ds.samples.shape}, labels {np.bincount(ds.labels).tolist()}")
    for path in wrote:
        print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
