"""Command-line surface: gap measurement, shift construction, benchmark
generation, training/adaptation runs, and the regime report matrix.

Every command writes a manifest.json (merged config, seed, version)
next to its outputs; reports come out as both TSV and JSON with
identical values. Exit codes: 0 success, 2 usage error, 3 data-format
error, 4 training-collapse abort.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace

import numpy as np

from . import __version__, adapt, nn, vqa
from .data import (
    BenchmarkSpec,
    generate_benchmark,
    load_bundle,
    load_features,
    save_bundle,
    train_eval_split,
)
from .errors import FormatError, TrainingCollapseError
from .kernels import KernelConfig, median_bandwidth, mmd_squared_biased, zscore
from .shift import AdainParams, PerturbParams, ShiftSpec, luminance_merge, make_shifted_dataset, read_ppm, write_ppm
from .text import load_questions_jsonl, corpus_syntax_matrix

REGIMES = ("direct", "dann1", "mm", "dann2", "sup10_scratch", "sup10_finetune", "full")
_REGIME_FIELD = {
    "direct": "target_direct",
    "dann1": "target_dann1",
    "mm": "target_mm",
    "dann2": "target_dann2",
    "sup10_scratch": "target_sup10_scratch",
    "sup10_finetune": "target_sup10_finetune",
    "full": "target_full",
}


def _default_seed() -> int:
    return int(os.environ.get("SHIFTLAB_SEED", "0"))


def _load_config_file(path) -> dict:
    if path is None:
        return {}
    with open(path, "r", encoding="utf-8") as fh:
        cfg = json.load(fh)
    if not isinstance(cfg, dict):
        raise ValueError(f"{path}: config file must hold a JSON object")
    return cfg


def _merge(args: argparse.Namespace, file_cfg: dict, defaults: dict) -> dict:
    """defaults < config file < explicit flags."""
    merged = dict(defaults)
    for key, val in file_cfg.items():
        if key not in defaults:
            raise ValueError(f"unknown config key {key!r}")
        merged[key] = val
    for key in defaults:
        flag_val = getattr(args, key, None)
        if flag_val is not None:
            merged[key] = flag_val
    return merged


def _write_manifest(out_dir, command: str, config: dict) -> None:
    os.makedirs(out_dir, exist_ok=True)
    manifest = {"command": command, "version": __version__, "config": config}
    with open(os.path.join(out_dir, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)


def _write_history(path, rows) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row) + "\n")


def _write_table(out_prefix: str, columns, rows) -> None:
    """Identical TSV and JSON forms of one report table."""
    with open(out_prefix + ".tsv", "w", encoding="utf-8") as fh:
        fh.write("\t".join(columns) + "\n")
        for row in rows:
            fh.write("\t".join("" if row[c] is None else _fmt(row[c]) for c in columns) + "\n")
    with open(out_prefix + ".json", "w", encoding="utf-8") as fh:
        json.dump([{c: row[c] for c in columns} for row in rows], fh, indent=1)


def _fmt(val) -> str:
    if isinstance(val, float):
        return repr(val)  # repr round-trips, so TSV and JSON agree exactly
    return str(val)


# ---------------------------------------------------------------- gap measure


def _gap_inputs(args):
    """(label, FeatureMatrix) pairs from feature files and question files."""
    out = []
    for path in args.features or []:
        out.append((os.path.splitext(os.path.basename(path))[0], load_features(path)))
    for path in args.questions or []:
        records, _ = load_questions_jsonl(path)
        out.append((os.path.splitext(os.path.basename(path))[0], corpus_syntax_matrix(records)))
    return out


def cmd_gap_measure(args) -> int:
    config = {
        "features": args.features or [],
        "questions": args.questions or [],
        "cap": args.cap,
        "seed": args.seed if args.seed is not None else _default_seed(),
        "zscore": bool(args.zscore),
        "out_dir": args.out_dir,
    }
    inputs = _gap_inputs(args)
    if len(inputs) < 2:
        raise ValueError("gap measure needs at least two feature or question files")
    rng = np.random.default_rng(config["seed"])
    datasets = []
    for label, fm in inputs:
        if fm.n > config["cap"]:
            idx = rng.permutation(fm.n)[: config["cap"]]
            fm = replace(fm, values=fm.values[np.sort(idx)])
        if config["zscore"]:
            fm = zscore(fm)
        datasets.append((label, fm))

    rows = []
    for i in range(len(datasets)):
        for j in range(i + 1, len(datasets)):
            (la, fa), (lb, fb) = datasets[i], datasets[j]
            if fa.modality != fb.modality:
                continue
            if fa.d != fb.d:
                raise FormatError(
                    f"incompatible dimensions within representation {fa.modality}: "
                    f"{la} is {fa.d}-D, {lb} is {fb.d}-D"
                )
            bw = median_bandwidth(fa, fb)
            val = mmd_squared_biased(fa, fb, KernelConfig(bandwidth=bw))
            rows.append(
                {
                    "dataset_a": la,
                    "dataset_b": lb,
                    "representation": fa.modality,
                    "mmd_squared": val,
                    "bandwidth": bw,
                }
            )
    os.makedirs(args.out_dir, exist_ok=True)
    _write_table(
        os.path.join(args.out_dir, "gaps"),
        ("dataset_a", "dataset_b", "representation", "mmd_squared", "bandwidth"),
        rows,
    )
    _write_manifest(args.out_dir, "gap measure", config)
    print(f"wrote {len(rows)} gap entries to {args.out_dir}/gaps.tsv")
    return 0


# ----------------------------------------------------------------- shift make


def _shift_spec_from(config: dict, image_dim: int) -> ShiftSpec:
    image_shift = None
    question_shift = None
    if config["alpha"] is not None:
        rng = np.random.default_rng(np.random.SeedSequence([config["style_seed"], 97]))
        image_shift = AdainParams(
            style_mean=rng.uniform(1.0, 3.0, size=image_dim),
            style_std=rng.uniform(0.5, 2.0, size=image_dim),
            alpha=config["alpha"],
        )
    if config["question_subs"] or config["swap_prob"] > 0:
        subs = {}
        for pair in config["question_subs"]:
            if "=" not in pair:
                raise ValueError(f"substitution must look like old=new, got {pair!r}")
            old, new = pair.split("=", 1)
            subs[old] = new
        question_shift = PerturbParams(
            substitutions=subs,
            swap_adjacent_prob=config["swap_prob"],
            seed=config["perturb_seed"],
        )
    if image_shift is None and question_shift is None:
        raise ValueError("shift make needs --alpha and/or a question perturbation")
    return ShiftSpec(image_shift=image_shift, question_shift=question_shift)


def cmd_shift_make(args) -> int:
    config = {
        "bundle": args.bundle,
        "out_dir": args.out_dir,
        "alpha": args.alpha,
        "style_seed": args.style_seed if args.style_seed is not None else _default_seed(),
        "question_subs": args.question_sub or [],
        "swap_prob": args.swap_prob,
        "perturb_seed": args.perturb_seed if args.perturb_seed is not None else _default_seed(),
    }
    ds = load_bundle(args.bundle)
    spec = _shift_spec_from(config, ds.dim)
    shifted = make_shifted_dataset(ds, spec)
    save_bundle(args.out_dir, shifted)
    _write_manifest(args.out_dir, "shift make", config)
    print(f"wrote shifted bundle ({shifted.domain_tag}) to {args.out_dir}")
    return 0


def cmd_shift_merge_luma(args) -> int:
    merged = luminance_merge(read_ppm(args.stylized), read_ppm(args.original))
    write_ppm(args.out, merged)
    print(f"wrote {args.out}")
    return 0


# ------------------------------------------------------------------ bench gen


_BENCH_DEFAULTS = {
    "n_train": 2000,
    "n_eval": 500,
    "image_dim": 32,
    "classes": 8,
    "alpha": 1.0,
    "question_subs": [],
    "swap_prob": 0.0,
    "seed": None,
    "out_dir": None,
}


def _bench_spec(config: dict) -> BenchmarkSpec:
    shift = None
    if config["alpha"] is not None or config["question_subs"] or config["swap_prob"] > 0:
        shift_cfg = {
            "alpha": config["alpha"],
            "style_seed": config["seed"],
            "question_subs": config["question_subs"],
            "swap_prob": config["swap_prob"],
            "perturb_seed": config["seed"],
        }
        shift = _shift_spec_from(shift_cfg, config["image_dim"])
    return BenchmarkSpec(
        n_train=config["n_train"],
        n_eval=config["n_eval"],
        image_dim=config["image_dim"],
        classes=config["classes"],
        shift=shift,
        seed=config["seed"],
    )


def default_benchmark_spec(alpha: float | None = 1.0, seed: int = 0, **overrides) -> BenchmarkSpec:
    """The default seeded benchmark used across tests and reports."""
    config = dict(_BENCH_DEFAULTS, alpha=alpha, seed=seed)
    config.update(overrides)
    return _bench_spec(config)


def cmd_bench_gen(args) -> int:
    file_cfg = _load_config_file(args.config)
    defaults = dict(_BENCH_DEFAULTS, seed=_default_seed())
    config = _merge(args, file_cfg, defaults)
    if config["out_dir"] is None:
        raise ValueError("bench gen needs --out-dir")
    spec = _bench_spec(config)
    source, target = generate_benchmark(spec)
    save_bundle(os.path.join(config["out_dir"], "source"), source)
    save_bundle(os.path.join(config["out_dir"], "target"), target)
    _write_manifest(config["out_dir"], "bench gen", config)
    print(f"wrote source ({source.n}) and target ({target.n}) bundles to {config['out_dir']}")
    return 0


# ----------------------------------------------------------------- vqa verbs


_TRAIN_DEFAULTS = {
    "epochs": 30,
    "batch_size": 64,
    "learning_rate": 0.005,
    "momentum": 0.9,
    "seed": None,
    "lambda_fd": None,  # per-method default unless set explicitly
    "lambda_schedule": "dann_ramp",
}

# The moment distance is orders of magnitude larger than a BCE, so its
# weight defaults far smaller.
_LAMBDA_DEFAULTS = {"dann": 0.3, "moment_matching": 0.01}


def _train_config(config: dict, fd_loss: str = "dann") -> nn.TrainConfig:
    lam = config["lambda_fd"]
    return nn.TrainConfig(
        epochs=config["epochs"],
        batch_size=config["batch_size"],
        learning_rate=config["learning_rate"],
        momentum=config["momentum"],
        seed=config["seed"],
        lambda_fd=_LAMBDA_DEFAULTS[fd_loss] if lam is None else lam,
        lambda_schedule=config["lambda_schedule"],
        fd_loss=fd_loss,
    )


def _add_train_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file; explicit flags win")
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int, dest="batch_size")
    p.add_argument("--learning-rate", type=float, dest="learning_rate")
    p.add_argument("--momentum", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--lambda-fd", type=float, dest="lambda_fd")
    p.add_argument("--lambda-schedule", choices=("constant", "dann_ramp"), dest="lambda_schedule")


def cmd_vqa_train(args) -> int:
    file_cfg = _load_config_file(args.config)
    config = _merge(args, file_cfg, dict(_TRAIN_DEFAULTS, seed=_default_seed()))
    src = load_bundle(args.source)
    cfg = _train_config(config)
    out = adapt.train_source_only(src, cfg)
    os.makedirs(args.out_dir, exist_ok=True)
    vqa.save_vqa_model(os.path.join(args.out_dir, "model"), out.model)
    _write_history(os.path.join(args.out_dir, "history.jsonl"), out.history)
    _write_manifest(args.out_dir, "vqa train", dict(config, source=args.source))
    final = out.history[-1]["src_acc"] if out.history else None
    print(f"trained source-only model; final source accuracy {final}")
    return 0


def cmd_vqa_adapt(args) -> int:
    file_cfg = _load_config_file(args.config)
    config = _merge(args, file_cfg, dict(_TRAIN_DEFAULTS, seed=_default_seed()))
    src = load_bundle(args.source)
    tgt = load_bundle(args.target)
    cfg = _train_config(config, fd_loss="moment_matching" if args.method == "mm" else "dann")
    trainers = {
        "direct": lambda: adapt.train_source_only(src, cfg),
        "dann1": lambda: adapt.train_one_stage_dann(src, tgt, cfg),
        "mm": lambda: adapt.train_one_stage_mm(src, tgt, cfg),
        "dann2": lambda: adapt.train_two_stage_dann(src, tgt, cfg),
    }
    out = trainers[args.method]()
    os.makedirs(args.out_dir, exist_ok=True)
    vqa.save_vqa_model(os.path.join(args.out_dir, "model"), out.model)
    if out.extractor is not None:
        nn.save_model(os.path.join(args.out_dir, "extractor.slmdl"), out.extractor)
    _write_history(os.path.join(args.out_dir, "history.jsonl"), out.history)
    if out.stage1_history is not None:
        _write_history(os.path.join(args.out_dir, "stage1_history.jsonl"), out.stage1_history)
    _write_manifest(
        args.out_dir,
        "vqa adapt",
        dict(config, method=args.method, source=args.source, target=args.target),
    )
    print(f"adapted with method {args.method}; artifacts in {args.out_dir}")
    return 0


def cmd_vqa_eval(args) -> int:
    model = vqa.load_vqa_model(args.model_dir)
    ds = load_bundle(args.data)
    if args.extractor:
        model_ext = nn.load_model(args.extractor)
        ds = adapt.apply_extractor(ds, model_ext)
    acc = vqa.evaluate_accuracy(model, ds)
    print(json.dumps({"dataset": ds.name, "accuracy": acc}))
    return 0


# -------------------------------------------------------------- report matrix


def run_regime(name: str, src_train, src_eval, tgt_train, tgt_eval, cfg: nn.TrainConfig,
               mm_cfg: nn.TrainConfig | None = None):
    """One report row; a collapsed run is reported, not raised."""
    if name == "mm":
        cfg = mm_cfg if mm_cfg is not None else replace(
            cfg, fd_loss="moment_matching", lambda_fd=_LAMBDA_DEFAULTS["moment_matching"]
        )
    row = {"regime": name, "status": "ok", "source_acc": None, "target_acc": None}
    try:
        if name == "direct":
            out = adapt.train_source_only(src_train, cfg, src_eval=src_eval, tgt_eval=tgt_eval)
        elif name == "dann1":
            out = adapt.train_one_stage_dann(src_train, tgt_train, cfg, src_eval=src_eval, tgt_eval=tgt_eval)
        elif name == "mm":
            out = adapt.train_one_stage_mm(src_train, tgt_train, cfg, src_eval=src_eval, tgt_eval=tgt_eval)
        elif name == "dann2":
            out = adapt.train_two_stage_dann(src_train, tgt_train, cfg, src_eval=src_eval, tgt_eval=tgt_eval)
        elif name == "sup10_scratch":
            out = adapt.train_supervised_target(
                tgt_train, 0.1, "scratch", cfg, tgt_eval=tgt_eval, result_field="target_sup10_scratch"
            )
        elif name == "sup10_finetune":
            src_out = adapt.train_source_only(src_train, cfg)
            out = adapt.train_supervised_target(
                tgt_train, 0.1, "from_source_model", cfg, source_model=src_out.model,
                tgt_eval=tgt_eval, result_field="target_sup10_finetune",
            )
        elif name == "full":
            out = adapt.train_supervised_target(
                tgt_train, 1.0, "scratch", cfg, tgt_eval=tgt_eval, result_field="target_full"
            )
        else:
            raise ValueError(f"unknown regime {name!r}")
    except TrainingCollapseError as exc:
        row["status"] = f"collapsed: {exc}"
        return row, None
    row["source_acc"] = out.result.source_acc
    row["target_acc"] = getattr(out.result, _REGIME_FIELD[name])
    return row, out


def run_matrix(src_train, src_eval, tgt_train, tgt_eval, cfg: nn.TrainConfig,
               regimes=REGIMES, jobs: int = 1, mm_cfg: nn.TrainConfig | None = None):
    """All requested regimes under a shared seed; rows plus outcomes."""
    regimes = list(regimes)
    for r in regimes:
        if r not in REGIMES:
            raise ValueError(f"unknown regime {r!r}")
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(
                pool.map(
                    lambda r: run_regime(r, src_train, src_eval, tgt_train, tgt_eval, cfg, mm_cfg),
                    regimes,
                )
            )
    else:
        results = [
            run_regime(r, src_train, src_eval, tgt_train, tgt_eval, cfg, mm_cfg) for r in regimes
        ]
    rows = [row for row, _ in results]
    full_acc = next(
        (r["target_acc"] for r in rows if r["regime"] == "full" and r["target_acc"]), None
    )
    for row in rows:
        row["normalized"] = (
            row["target_acc"] / full_acc
            if full_acc and row["target_acc"] is not None
            else None
        )
    return rows, {name: out for name, (_, out) in zip(regimes, results) if out is not None}


def cmd_report_matrix(args) -> int:
    file_cfg = _load_config_file(args.config)
    defaults = {**_BENCH_DEFAULTS, **_TRAIN_DEFAULTS}
    defaults.update(seed=_default_seed(), jobs=1, regimes=None)
    del defaults["out_dir"]
    config = _merge(args, file_cfg, defaults)
    regimes = tuple(config["regimes"].split(",")) if config["regimes"] else REGIMES

    if args.source_bundle and args.target_bundle:
        src = load_bundle(args.source_bundle)
        tgt = load_bundle(args.target_bundle)
        src_train, src_eval = train_eval_split(src, int(src.n * 0.8))
        tgt_train, tgt_eval = train_eval_split(tgt, int(tgt.n * 0.8))
    else:
        spec = _bench_spec(config)
        source, target = generate_benchmark(spec)
        src_train, src_eval = train_eval_split(source, spec.n_train)
        tgt_train, tgt_eval = train_eval_split(target, spec.n_train)

    cfg = _train_config(config)
    rows, outcomes = run_matrix(
        src_train, src_eval, tgt_train, tgt_eval, cfg,
        regimes=regimes, jobs=config["jobs"], mm_cfg=_train_config(config, "moment_matching"),
    )
    os.makedirs(args.out_dir, exist_ok=True)
    _write_table(
        os.path.join(args.out_dir, "report"),
        ("regime", "status", "source_acc", "target_acc", "normalized"),
        rows,
    )
    hist_dir = os.path.join(args.out_dir, "history")
    os.makedirs(hist_dir, exist_ok=True)
    for name, out in outcomes.items():
        _write_history(os.path.join(hist_dir, f"{name}.jsonl"), out.history)
        if out.stage1_history is not None:
            _write_history(os.path.join(hist_dir, f"{name}_stage1.jsonl"), out.stage1_history)
    _write_manifest(args.out_dir, "report matrix", dict(config, regimes=",".join(regimes)))
    for row in rows:
        print(
            f"{row['regime']}\t{row['status']}\ttarget_acc="
            f"{row['target_acc'] if row['target_acc'] is not None else 'n/a'}"
        )
    return 0


# -------------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="shiftlab", description=__doc__)
    parser.add_argument("--version", action="version", version=f"shiftlab {__version__}")
    top = parser.add_subparsers(dest="group", required=True)

    gap = top.add_parser("gap", help="domain-gap measurement").add_subparsers(
        dest="verb", required=True
    )
    p = gap.add_parser("measure", help="pairwise MMD report over feature/question files")
    p.add_argument("--features", nargs="*", help=".fmat feature files, one dataset each")
    p.add_argument("--questions", nargs="*", help="questions.jsonl files, one dataset each")
    p.add_argument("--cap", type=int, default=10000, help="subsample cap per dataset")
    p.add_argument("--seed", type=int)
    p.add_argument("--zscore", action="store_true", help="z-score features before MMD")
    p.add_argument("--out-dir", required=True, dest="out_dir")
    p.set_defaults(func=cmd_gap_measure)

    sh = top.add_parser("shift", help="synthetic shift construction").add_subparsers(
        dest="verb", required=True
    )
    p = sh.add_parser("make", help="shifted copy of a dataset bundle")
    p.add_argument("--bundle", required=True)
    p.add_argument("--out-dir", required=True, dest="out_dir")
    p.add_argument("--alpha", type=float, help="AdaIN strength; omit for no image shift")
    p.add_argument("--style-seed", type=int, dest="style_seed")
    p.add_argument("--question-sub", action="append", dest="question_sub", help="old=new token substitution")
    p.add_argument("--swap-prob", type=float, default=0.0, dest="swap_prob")
    p.add_argument("--perturb-seed", type=int, dest="perturb_seed")
    p.set_defaults(func=cmd_shift_make)
    p = sh.add_parser("merge-luma", help="luminance-only merge of two PPM images")
    p.add_argument("--stylized", required=True)
    p.add_argument("--original", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_shift_merge_luma)

    bench = top.add_parser("bench", help="synthetic benchmark").add_subparsers(
        dest="verb", required=True
    )
    p = bench.add_parser("gen", help="generate source/target bundles")
    p.add_argument("--config", help="JSON config file; explicit flags win")
    p.add_argument("--out-dir", dest="out_dir")
    p.add_argument("--n-train", type=int, dest="n_train")
    p.add_argument("--n-eval", type=int, dest="n_eval")
    p.add_argument("--image-dim", type=int, dest="image_dim")
    p.add_argument("--classes", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--swap-prob", type=float, dest="swap_prob")
    p.add_argument("--question-sub", action="append", dest="question_subs")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_bench_gen)

    vq = top.add_parser("vqa", help="train / adapt / evaluate").add_subparsers(
        dest="verb", required=True
    )
    p = vq.add_parser("train", help="source-only training")
    p.add_argument("--source", required=True, help="source bundle directory")
    p.add_argument("--out-dir", required=True, dest="out_dir")
    _add_train_flags(p)
    p.set_defaults(func=cmd_vqa_train)
    p = vq.add_parser("adapt", help="adaptation run")
    p.add_argument("--method", required=True, choices=("direct", "dann1", "mm", "dann2"))
    p.add_argument("--source", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--out-dir", required=True, dest="out_dir")
    _add_train_flags(p)
    p.set_defaults(func=cmd_vqa_adapt)
    p = vq.add_parser("eval", help="accuracy of a saved model on a bundle")
    p.add_argument("--model-dir", required=True, dest="model_dir")
    p.add_argument("--data", required=True)
    p.add_argument("--extractor", help="optional extractor checkpoint applied to features")
    p.set_defaults(func=cmd_vqa_eval)

    rep = top.add_parser("report", help="experiment reports").add_subparsers(
        dest="verb", required=True
    )
    p = rep.add_parser("matrix", help="all regimes on one benchmark")
    p.add_argument("--out-dir", required=True, dest="out_dir")
    p.add_argument("--source-bundle", dest="source_bundle")
    p.add_argument("--target-bundle", dest="target_bundle")
    p.add_argument("--regimes", help="comma-separated subset of " + ",".join(REGIMES))
    p.add_argument("--jobs", type=int, help="parallel regime workers")
    p.add_argument("--n-train", type=int, dest="n_train")
    p.add_argument("--n-eval", type=int, dest="n_eval")
    p.add_argument("--image-dim", type=int, dest="image_dim")
    p.add_argument("--classes", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--swap-prob", type=float, dest="swap_prob")
    p.add_argument("--question-sub", action="append", dest="question_subs")
    _add_train_flags(p)
    p.set_defaults(func=cmd_report_matrix)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except FormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except TrainingCollapseError as exc:
        print(f"error: training collapsed: {exc}", file=sys.stderr)
        return 4
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
