"""Experiment runner: train/eval/diagnose commands over JSON configs.

Every command is deterministic given config + seed; outputs are
provenance-first (resolved config, partition, and schedule land in the
output directory before training starts). The only rerun-variant bytes
in a metrics file are the wall_seconds timings; canonical_metrics_bytes
strips them for byte-identity comparisons.

Exit codes: 0 success, 2 configuration/data error, 3 numerical-contract
failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import subprocess
import sys
from pathlib import Path

import numpy as np

from . import _kernels, instrumentation, toys
from .datasets import Dataset, SubsetSpec, gen_spirals, gen_tiles, load_skd, stratified_subset, subset_indices
from .errors import CONFIG_ERRORS, ConfigurationError, ContractError, DataError, OracleError
from .gradcheck import TOLERANCE, run_gradcheck
from .instrumentation import FluctuationPreset, HeadDistancePreset, fluctuation_score
from .network import (
    Network,
    clone_architecture,
    init_params,
    insert_projectors,
    load_arch,
    load_checkpoint,
    save_arch,
    save_checkpoint,
)
from .partition import Partition, align_partition, make_partition, validate
from .trainer import OptimConfig, RunResult, StageSchedule, evaluate, run_ce, run_stablekd, run_vanilla_kd

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3

DEFAULT_FRACTIONS = (0.2, 0.4, 0.6, 0.8, 1.0)


# --- config plumbing ---------------------------------------------------------

def _load_config(path) -> dict:
    if path is None:
        raise ConfigurationError("this command requires --config")
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise ConfigurationError(f"config file not found: {path}")
    except json.JSONDecodeError as e:
        raise ConfigurationError(f"config {path} is not valid JSON: {e}")


def _check_keys(cfg: dict, allowed: set, required: set, where: str) -> None:
    for key in required:
        if key not in cfg:
            raise ConfigurationError(f"{where}: missing required key '{key}'")
    for key in cfg:
        if key not in allowed:
            raise ConfigurationError(f"{where}: unknown key '{key}'")


def _num(cfg: dict, key: str, default, where: str, low=None, high=None):
    value = cfg.get(key, default)
    if not isinstance(value, (int, float)) or isinstance(value, bool):
        raise ConfigurationError(f"{where}.{key}: expected a number, got {value!r}")
    if low is not None and value < low:
        raise ConfigurationError(f"{where}.{key}: {value} below minimum {low}")
    if high is not None and value > high:
        raise ConfigurationError(f"{where}.{key}: {value} above maximum {high}")
    return value


def _resolve_dataset(cfg: dict, where: str) -> tuple[Dataset, Dataset]:
    spec = cfg.get("dataset")
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ConfigurationError(f"{where}.dataset: expected an object with a 'kind' key")
    kind = spec["kind"]
    if kind == "skd":
        _check_keys(spec, {"kind", "train", "val"}, {"train", "val"}, f"{where}.dataset")
        train, val = load_skd(spec["train"]), load_skd(spec["val"])
        val.split = "val"
        return train, val
    seed = int(_num(spec, "seed", 0, f"{where}.dataset", low=0))
    classes = int(_num(spec, "classes", 4, f"{where}.dataset", low=2))
    train_pc = int(_num(spec, "train_per_class", 64, f"{where}.dataset", low=1))
    val_pc = int(_num(spec, "val_per_class", 32, f"{where}.dataset", low=1))
    noise = float(_num(spec, "noise", 0.25, f"{where}.dataset", low=0))
    if kind == "tiles":
        _check_keys(spec, {"kind", "classes", "side", "train_per_class", "val_per_class", "noise", "seed"},
                    set(), f"{where}.dataset")
        side = int(_num(spec, "side", 8, f"{where}.dataset"))
        train = gen_tiles(classes, train_pc, side, seed=seed * 2 + 1, noise_sigma=noise)
        val = gen_tiles(classes, val_pc, side, seed=seed * 2 + 2, noise_sigma=noise)
    elif kind == "spirals":
        _check_keys(spec, {"kind", "classes", "train_per_class", "val_per_class", "noise", "seed"},
                    set(), f"{where}.dataset")
        train = gen_spirals(classes, train_pc, noise, seed=seed * 2 + 1)
        val = gen_spirals(classes, val_pc, noise, seed=seed * 2 + 2)
    else:
        raise ConfigurationError(f"{where}.dataset.kind: unknown kind {kind!r}")
    val.split = "val"
    return train, val


def _prepare_out(out, overwrite: bool) -> Path:
    if out is None:
        raise ConfigurationError("this command requires --out")
    out = Path(out)
    if out.parent and not out.parent.exists():
        out.parent.mkdir(parents=True, exist_ok=True)
    try:
        out.mkdir()
    except FileExistsError:
        if any(out.iterdir()) and not overwrite:
            raise ConfigurationError(f"output directory {out} is non-empty; pass --overwrite to reuse it")
    return out


def _git_describe() -> str:
    try:
        r = subprocess.run(["git", "describe", "--always", "--dirty"],
                           capture_output=True, text=True, timeout=10)
        return r.stdout.strip() if r.returncode == 0 else "unknown"
    except OSError:
        return "unknown"


def _write_provenance(out: Path, resolved: dict, **extras) -> None:
    doc = {"config": resolved, "git": _git_describe(), "kernel_backend": _kernels.BACKEND}
    doc.update(extras)
    with open(out / "provenance.json", "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_metrics(records, path) -> None:
    with open(path, "w") as fh:
        for r in records:
            fh.write(json.dumps(r.to_dict()))
            fh.write("\n")


def canonical_metrics_bytes(path) -> bytes:
    """Metrics file content with the (timing-only) wall_seconds field zeroed."""
    lines = []
    with open(path) as fh:
        for line in fh:
            if not line.strip():
                continue
            row = json.loads(line)
            row["wall_seconds"] = 0.0
            lines.append(json.dumps(row, sort_keys=True))
    return ("\n".join(lines) + "\n").encode()


def _write_plot_csv(path, rows) -> None:
    """Plot-data emission: epoch,series,value rows."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "series", "value"])
        for epoch, series, value in rows:
            writer.writerow([epoch, series, repr(float(value))])


def _cap_workers(requested: int) -> int:
    cap = os.environ.get("SKD_THREADS")
    if cap:
        try:
            requested = min(requested, max(1, int(cap)))
        except ValueError:
            raise ConfigurationError(f"SKD_THREADS must be an integer, got {cap!r}")
    return max(1, requested)


def _load_teacher(checkpoint_path) -> Network:
    ckpt = Path(checkpoint_path)
    arch = ckpt.parent / "arch.json"
    if not ckpt.exists():
        raise DataError(f"teacher checkpoint not found: {ckpt}")
    if not arch.exists():
        raise DataError(f"teacher architecture not found next to checkpoint: {arch}")
    teacher = load_arch(arch)
    load_checkpoint(teacher, ckpt)
    teacher.freeze()
    return teacher


# --- commands ----------------------------------------------------------------

_SHARED_KEYS = {"arch_file", "teacher_checkpoint", "k", "n", "epochs", "max_lr", "momentum",
                "weight_decay", "batch_size", "lambda", "alpha", "seed", "workers", "dataset",
                "subset_fraction", "boundaries", "temperature"}


def _optim_from(cfg: dict, where: str, default_lr: float) -> OptimConfig:
    return OptimConfig(
        max_lr=float(_num(cfg, "max_lr", default_lr, where)),
        momentum=float(_num(cfg, "momentum", 0.9, where)),
        weight_decay=float(_num(cfg, "weight_decay", 5e-4, where)),
        batch_size=int(_num(cfg, "batch_size", 128, where, low=1)),
    )


def _subset(train: Dataset, cfg: dict, seed: int, where: str) -> Dataset:
    fraction = cfg.get("subset_fraction")
    if fraction is None:
        return train
    return stratified_subset(train, SubsetSpec(float(_num(cfg, "subset_fraction", 1.0, where)), seed))


def cmd_train_teacher(args) -> int:
    cfg = _load_config(args.config)
    _check_keys(cfg, _SHARED_KEYS, {"arch_file", "epochs", "dataset"}, "train-teacher config")
    out = _prepare_out(args.out, args.overwrite)
    seed = args.seed if args.seed is not None else int(_num(cfg, "seed", 0, "config", low=0))
    train, val = _resolve_dataset(cfg, "config")
    train = _subset(train, cfg, seed, "config")
    net = load_arch(cfg["arch_file"])
    init_params(net, seed)
    optim = _optim_from(cfg, "config", default_lr=0.1)
    epochs = int(_num(cfg, "epochs", 0, "config", low=1))

    resolved = dict(cfg, seed=seed, max_lr=optim.max_lr, momentum=optim.momentum,
                    weight_decay=optim.weight_decay, batch_size=optim.batch_size)
    _write_provenance(out, resolved, command="train-teacher")
    save_arch(net, out / "arch.json")

    result = run_ce(net, optim, epochs, train, seed, val_data=val)
    save_checkpoint(net, out / "teacher.skdw")
    _write_metrics(result.records, out / "metrics.jsonl")
    result.trace.write_csv(out / "trace.csv")
    final = result.records[-1].val_acc
    print(f"val_acc={final:.4f}")
    return EXIT_OK


def _resolve_partition(cfg: dict, teacher: Network) -> Partition:
    bounds = cfg.get("boundaries")
    if bounds is not None:
        if not isinstance(bounds, list) or not all(isinstance(b, int) for b in bounds):
            raise ConfigurationError("config.boundaries: expected a list of layer indices")
        part = Partition(tuple(bounds))
        validate(part, teacher)
        return part
    k = int(_num(cfg, "k", 1, "config", low=1))
    return make_partition(teacher, k)


def _distill_setup(cfg: dict, seed: int):
    teacher = _load_teacher(cfg["teacher_checkpoint"])
    part = _resolve_partition(cfg, teacher)
    student = load_arch(cfg["arch_file"])
    student = insert_projectors(student, teacher, part)
    init_params(student, seed)
    return teacher, student, part


def cmd_distill(args) -> int:
    cfg = _load_config(args.config)
    _check_keys(cfg, _SHARED_KEYS, {"arch_file", "teacher_checkpoint", "k", "n", "epochs", "dataset"},
                "distill config")
    out = _prepare_out(args.out, args.overwrite)
    seed = args.seed if args.seed is not None else int(_num(cfg, "seed", 0, "config", low=0))
    workers = _cap_workers(args.workers if args.workers is not None
                           else int(_num(cfg, "workers", 1, "config", low=1)))
    train, val = _resolve_dataset(cfg, "config")
    train = _subset(train, cfg, seed, "config")

    teacher, student, part = _distill_setup(cfg, seed)
    n = int(_num(cfg, "n", 0, "config", low=0))
    epochs = int(_num(cfg, "epochs", 0, "config", low=1))
    schedule = StageSchedule.split(epochs, n)
    optim = _optim_from(cfg, "config", default_lr=0.5)
    lam = float(_num(cfg, "lambda", 1.0, "config", low=0))
    temperature = float(_num(cfg, "temperature", 1.0, "config"))

    resolved = dict(cfg, seed=seed, workers=workers, max_lr=optim.max_lr, momentum=optim.momentum,
                    weight_decay=optim.weight_decay, batch_size=optim.batch_size,
                    temperature=temperature)
    resolved["lambda"] = lam
    _write_provenance(
        out, resolved, command="distill",
        partition=list(part.boundaries),
        student_partition=list(align_partition(part, student).boundaries),
        stage_epochs=list(schedule.epochs),
        stage_block_counts=_stage_block_counts(part, schedule.n),
    )
    save_arch(student, out / "arch.json")

    result = run_stablekd(teacher, student, part, schedule, optim, lam, train, seed,
                          val_data=val, workers=workers, temperature=temperature)
    save_checkpoint(student, out / "student.skdw")
    _write_metrics(result.records, out / "metrics.jsonl")
    result.trace.write_csv(out / "trace.csv")
    print(f"val_acc={result.records[-1].val_acc:.4f}")
    return EXIT_OK


def _stage_block_counts(part: Partition, n: int) -> list[int]:
    from .partition import recompose

    counts = [part.k]
    cur = part
    for _ in range(n):
        cur = recompose(cur)
        counts.append(cur.k)
    return counts


def cmd_distill_vanilla(args) -> int:
    cfg = _load_config(args.config)
    _check_keys(cfg, _SHARED_KEYS, {"arch_file", "teacher_checkpoint", "epochs", "dataset"},
                "distill-vanilla config")
    out = _prepare_out(args.out, args.overwrite)
    seed = args.seed if args.seed is not None else int(_num(cfg, "seed", 0, "config", low=0))
    train, val = _resolve_dataset(cfg, "config")
    train = _subset(train, cfg, seed, "config")

    teacher = _load_teacher(cfg["teacher_checkpoint"])
    student = load_arch(cfg["arch_file"])
    init_params(student, seed)
    optim = _optim_from(cfg, "config", default_lr=0.1)
    alpha = float(_num(cfg, "alpha", 0.5, "config"))
    temperature = float(_num(cfg, "temperature", 1.0, "config"))
    epochs = int(_num(cfg, "epochs", 0, "config", low=1))

    resolved = dict(cfg, seed=seed, alpha=alpha, max_lr=optim.max_lr, momentum=optim.momentum,
                    weight_decay=optim.weight_decay, batch_size=optim.batch_size,
                    temperature=temperature)
    _write_provenance(out, resolved, command="distill-vanilla")
    save_arch(student, out / "arch.json")

    result = run_vanilla_kd(teacher, student, optim, alpha, epochs, train, seed,
                            val_data=val, temperature=temperature)
    save_checkpoint(student, out / "student.skdw")
    _write_metrics(result.records, out / "metrics.jsonl")
    result.trace.write_csv(out / "trace.csv")
    print(f"val_acc={result.records[-1].val_acc:.4f}")
    return EXIT_OK


def cmd_eval(args) -> int:
    cfg = _load_config(args.config)
    _check_keys(cfg, {"arch_file", "checkpoint", "dataset"}, {"arch_file", "checkpoint", "dataset"},
                "eval config")
    net = load_arch(cfg["arch_file"])
    load_checkpoint(net, cfg["checkpoint"])
    _, val = _resolve_dataset(cfg, "config")
    acc = evaluate(net, val)
    print(f"val_acc={acc:.4f}")
    if args.out:
        out = _prepare_out(args.out, args.overwrite)
        with open(out / "eval.json", "w") as fh:
            json.dump({"val_acc": acc, "checkpoint": str(cfg["checkpoint"])}, fh, indent=2)
            fh.write("\n")
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    seeds = 10
    report = run_gradcheck(seeds=seeds)
    failed = {name: err for name, err in report.items() if err > TOLERANCE}
    for name, err in report.items():
        status = "FAIL" if name in failed else "PASS"
        print(f"{name:18s} max_rel_err={err:.3e} {status}")
    if args.out:
        out = _prepare_out(args.out, args.overwrite)
        with open(out / "gradcheck.json", "w") as fh:
            json.dump({"seeds": seeds, "tolerance": TOLERANCE, "errors": report}, fh, indent=2)
            fh.write("\n")
    if failed:
        raise OracleError(f"gradient checks failed: {sorted(failed)}")
    return EXIT_OK


_STABILITY_KEYS = {"preset", "dataset", "epochs", "teacher_epochs", "pretrain_epochs",
                   "max_lr", "lrs", "alpha", "lambda", "batch_size", "seed",
                   "teacher_checkpoint", "momentum", "weight_decay"}


def _stability_teacher(cfg: dict, train: Dataset, val: Dataset, seed: int, out: Path) -> Network:
    if cfg.get("teacher_checkpoint"):
        return _load_teacher(cfg["teacher_checkpoint"])
    teacher = toys.cnn(classes=train.class_count)
    init_params(teacher, seed + 9000)
    optim = OptimConfig(max_lr=0.1, batch_size=int(_num(cfg, "batch_size", 32, "config", low=1)))
    epochs = int(_num(cfg, "teacher_epochs", 30, "config", low=1))
    result = run_ce(teacher, optim, epochs, train, seed + 9000, val_data=val)
    teacher.freeze()
    save_arch(teacher, out / "arch.json")
    save_checkpoint(teacher, out / "teacher.skdw")
    print(f"teacher val_acc={result.records[-1].val_acc:.4f}")
    return teacher


def cmd_stability(args) -> int:
    cfg = _load_config(args.config)
    _check_keys(cfg, _STABILITY_KEYS, {"preset"}, "stability config")
    preset = cfg["preset"]
    if preset not in ("fluctuation", "head-distance", "k-comparison", "all"):
        raise ConfigurationError(f"config.preset: unknown preset {preset!r}")
    out = _prepare_out(args.out, args.overwrite)
    seed = args.seed if args.seed is not None else int(_num(cfg, "seed", 0, "config", low=0))
    if "dataset" not in cfg:
        cfg = dict(cfg, dataset={"kind": "tiles", "classes": 4, "side": 8,
                                 "train_per_class": 64, "val_per_class": 48,
                                 "noise": 0.25, "seed": seed})
    train, val = _resolve_dataset(cfg, "config")
    batch_size = int(_num(cfg, "batch_size", 32, "config", low=1))
    epochs = int(_num(cfg, "epochs", 40, "config", low=2))
    _write_provenance(out, dict(cfg, seed=seed), command="stability")

    teacher = None
    scores: dict[str, dict] = {}

    if preset in ("fluctuation", "all"):
        teacher = _stability_teacher(cfg, train, val, seed, out)
        lrs = tuple(cfg.get("lrs", (0.005, 0.01, 0.02)))
        fp = FluctuationPreset(
            teacher=teacher, student=toys.cnn(classes=train.class_count), train=train, val=val,
            lrs=lrs, epochs=epochs, alpha=float(_num(cfg, "alpha", 0.5, "config")),
            batch_size=batch_size, seed=seed)
        res = instrumentation.experiment_fluctuation(fp)
        rows = [(e, f"lr={lr}", acc) for lr, curve in res["curves"].items() for e, acc in enumerate(curve)]
        _write_plot_csv(out / "fluctuation_curves.csv", rows)
        scores["fluctuation"] = {f"lr={lr}": s for lr, s in res["scores"].items()}

    if preset in ("head-distance", "all"):
        hp = HeadDistancePreset(
            small=toys.cnn(classes=train.class_count, widths=(8, 8, 16, 16)),
            large=toys.cnn(classes=train.class_count, widths=(8, 16, 24, 16)),
            train=train, val=val,
            pretrain_epochs=int(_num(cfg, "pretrain_epochs", 25, "config", low=1)),
            epochs=max(2, epochs // 2), batch_size=batch_size,
            max_lr=float(_num(cfg, "max_lr", 0.1, "config")), seed=seed)
        conditions = instrumentation.experiment_head_distance(hp)
        summary = {}
        for name, result in conditions.items():
            result.trace.write_csv(out / f"head_distance_{name}.csv")
            summary[name] = {
                "cumulative_total": result.trace.cumulative[-1],
                "cumulative_first_fifth": result.trace.cumulative[max(0, len(result.trace.steps) // 5 - 1)],
            }
        scores["head_distance"] = summary

    if preset in ("k-comparison", "all"):
        if teacher is None:
            teacher = _stability_teacher(cfg, train, val, seed, out)
        lam = float(_num(cfg, "lambda", 1.0, "config", low=0))
        max_lr = float(_num(cfg, "max_lr", 0.5, "config"))
        rows = []
        kscores = {}
        for k in (1, 3, 5):
            student = toys.cnn(classes=train.class_count)
            init_params(student, seed + 77)
            part = make_partition(teacher, k)
            result = run_stablekd(teacher, student, part, StageSchedule(0, (epochs,)),
                                  OptimConfig(max_lr=max_lr, batch_size=batch_size), lam,
                                  train, seed, val_data=val)
            curve = [r.val_acc for r in result.records]
            rows.extend((e, f"k={k}", acc) for e, acc in enumerate(curve))
            kscores[f"k={k}"] = fluctuation_score(curve)
        _write_plot_csv(out / "k_comparison_curves.csv", rows)
        scores["k_comparison"] = kscores

    with open(out / "scores.json", "w") as fh:
        json.dump(scores, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(json.dumps(scores, sort_keys=True))
    return EXIT_OK


def cmd_subset_sweep(args) -> int:
    cfg = _load_config(args.config)
    _check_keys(cfg, _SHARED_KEYS | {"fractions"},
                {"arch_file", "teacher_checkpoint", "k", "n", "epochs", "dataset"}, "subset-sweep config")
    out = _prepare_out(args.out, args.overwrite)
    seed = args.seed if args.seed is not None else int(_num(cfg, "seed", 0, "config", low=0))
    fractions = cfg.get("fractions", list(DEFAULT_FRACTIONS))
    if not isinstance(fractions, list) or not fractions:
        raise ConfigurationError("config.fractions: expected a non-empty list")
    train, val = _resolve_dataset(cfg, "config")

    teacher = _load_teacher(cfg["teacher_checkpoint"])
    part = _resolve_partition(cfg, teacher)
    n = int(_num(cfg, "n", 0, "config", low=0))
    epochs = int(_num(cfg, "epochs", 0, "config", low=1))
    schedule = StageSchedule.split(epochs, n)
    lam = float(_num(cfg, "lambda", 1.0, "config", low=0))
    alpha = float(_num(cfg, "alpha", 0.5, "config"))
    skd_optim = _optim_from(cfg, "config", default_lr=0.5)
    kd_optim = OptimConfig(max_lr=0.1, momentum=skd_optim.momentum,
                           weight_decay=skd_optim.weight_decay, batch_size=skd_optim.batch_size)

    subsets = {}
    rows = []
    for fraction in fractions:
        spec = SubsetSpec(float(fraction), seed)
        subsets[str(fraction)] = [int(i) for i in subset_indices(train, spec)]
        sub = stratified_subset(train, spec)

        student = load_arch(cfg["arch_file"])
        student = insert_projectors(student, teacher, part)
        init_params(student, seed)
        skd = run_stablekd(teacher, student, part, schedule, skd_optim, lam, sub, seed, val_data=val)
        rows.append((fraction, "stablekd", skd.records[-1].val_acc))

        student = load_arch(cfg["arch_file"])
        init_params(student, seed)
        kd = run_vanilla_kd(teacher, student, kd_optim, alpha, epochs, sub, seed, val_data=val)
        rows.append((fraction, "vanilla", kd.records[-1].val_acc))

    _write_provenance(out, dict(cfg, seed=seed, fractions=fractions), command="subset-sweep",
                      partition=list(part.boundaries), stage_epochs=list(schedule.epochs),
                      subsets=subsets)
    with open(out / "summary.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["fraction", "scheme", "val_acc"])
        for fraction, scheme, acc in rows:
            writer.writerow([fraction, scheme, repr(float(acc))])
    for fraction, scheme, acc in rows:
        print(f"fraction={fraction} scheme={scheme} val_acc={acc:.4f}")
    return EXIT_OK


# --- entry point ---------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="skd", description="StableKD experiment runner")
    sub = parser.add_subparsers(dest="command", required=True)
    commands = {
        "train-teacher": cmd_train_teacher,
        "distill": cmd_distill,
        "distill-vanilla": cmd_distill_vanilla,
        "eval": cmd_eval,
        "gradcheck": cmd_gradcheck,
        "stability": cmd_stability,
        "subset-sweep": cmd_subset_sweep,
    }
    for name, fn in commands.items():
        p = sub.add_parser(name)
        p.add_argument("--config", default=None)
        p.add_argument("--out", default=None)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--workers", type=int, default=None)
        p.add_argument("--overwrite", action="store_true")
        p.set_defaults(func=fn)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CONFIG_ERRORS as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (ContractError, OracleError) as e:
        print(f"numerical contract failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
