"""Implementations behind the CLI subcommands.

Each command is a pure function of (config, paths): outputs are fully
determined by the config document and the seeds inside it. Commands
never mutate their input files.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import math
from pathlib import Path

import numpy as np

from . import analysis as ana
from .config import (
    ConfigError,
    build_hidden_specs,
    build_optimizer_config,
    build_synthetic_spec,
    build_train_config,
)
from .data import (
    Dataset,
    apply_normalization,
    corrupt_labels,
    corrupt_labels_uniform,
    generate_synthetic,
    load_csv,
    load_dataset,
    normalize_global,
    permute_columns,
    save_dataset,
    splice_dataset,
    split_train_dev,
)
from .network import (
    Conv,
    Dense,
    FlatInput,
    GridInput,
    SoftmaxOutput,
    Untied,
    init_network,
    load_checkpoint,
    num_params,
    save_checkpoint,
)
from .numerics import Rng
from .optim import accuracy, cross_entropy
from .training import (
    estimate_priors,
    log_summary,
    predict_scores,
    scaled_scores,
    train,
    write_log_csv,
)

DATASET_FILENAME = "dataset.frn"
MODEL_FILENAME = "model.fnw"
META_SUFFIX = ".meta.json"


def read_any_dataset(path) -> Dataset:
    path = Path(path)
    if path.suffix.lower() == ".csv":
        return load_csv(path)
    return load_dataset(path)


def cmd_gen_data(cfg: dict, out_dir: Path, permute: bool = False) -> Path:
    """Generate a synthetic dataset file; prints an N/D/K/G summary."""
    spec = build_synthetic_spec(cfg["data"])
    d = generate_synthetic(spec)
    if permute or cfg["data"]["permute"]:
        d = permute_columns(d, Rng(cfg["data"]["permute_seed"]))
    out_dir.mkdir(parents=True, exist_ok=True)
    out_path = out_dir / DATASET_FILENAME
    save_dataset(d, out_path)
    print(
        f"wrote {out_path}: N={d.num_frames} D={d.dim} "
        f"K={d.num_classes} G={d.num_groups}"
    )
    return out_path


def _prepare_training_data(cfg: dict, dataset: Dataset, dev: Dataset | None):
    """Splice, split, corrupt (train only), and normalize."""
    data_cfg = cfg["data"]
    spliced = splice_dataset(dataset, data_cfg["context"])
    if dev is not None:
        train_d, dev_d = spliced, splice_dataset(dev, data_cfg["context"])
    else:
        train_d, dev_d = split_train_dev(
            spliced, data_cfg["dev_fraction"], data_cfg["split_seed"]
        )
    if data_cfg["corrupt_rate"] > 0:
        rng = Rng(data_cfg["corrupt_seed"])
        if data_cfg["corrupt_scope"] == "within_group":
            train_d = corrupt_labels(train_d, data_cfg["corrupt_rate"], rng)
        elif data_cfg["corrupt_scope"] == "any":
            train_d = corrupt_labels_uniform(train_d, data_cfg["corrupt_rate"], rng)
        else:
            raise ConfigError(
                f"data.corrupt_scope must be 'within_group' or 'any', "
                f"got {data_cfg['corrupt_scope']!r}"
            )
    train_n, mean, std = normalize_global(train_d)
    dev_n = apply_normalization(dev_d, mean, std) if dev_d is not train_d else train_n
    return train_n, dev_n, mean, std


def _build_network(cfg: dict, train_d: Dataset):
    specs = build_hidden_specs(cfg["network"])
    needs_grid = any(isinstance(s, (Conv, Untied)) for s in specs)
    if needs_grid:
        if train_d.grid_dims is None:
            raise ConfigError(
                "network has conv/untied layers but the data has no grid layout "
                "(set data.context > 0 or supply a dataset with grid dims)"
            )
        layout = GridInput(*train_d.grid_dims)
    else:
        layout = FlatInput(train_d.dim)
    specs = specs + [SoftmaxOutput(train_d.num_classes)]
    return init_network(
        layout, specs, Rng(cfg["network"]["init_seed"]), cfg["network"]["init_scale"]
    )


def cmd_train(
    cfg: dict,
    data_path,
    out_dir: Path,
    dev_path=None,
    resume_path=None,
) -> dict:
    """Train (or realign-train) per the config; writes checkpoint,
    metadata sidecar, per-epoch CSV log, and a JSON summary."""
    dataset = read_any_dataset(data_path)
    dev = read_any_dataset(dev_path) if dev_path else None
    train_d, dev_d, mean, std = _prepare_training_data(cfg, dataset, dev)

    start_epoch = 0
    if resume_path:
        net = load_checkpoint(resume_path)
        meta_path = Path(str(resume_path) + META_SUFFIX)
        if meta_path.exists():
            with open(meta_path) as f:
                start_epoch = json.load(f).get("epochs_completed", 0)
    else:
        net = _build_network(cfg, train_d)

    opt_cfg = build_optimizer_config(cfg["optimizer"])
    train_cfg = build_train_config(cfg["training"])
    if start_epoch:
        # Continue the per-epoch shuffle seed sequence where it left off.
        train_cfg = dataclasses.replace(
            train_cfg, shuffle_seed=train_cfg.shuffle_seed + start_epoch
        )

    net, log = train(net, train_d, dev_d, opt_cfg, train_cfg)
    if cfg["training"]["select"] == "best" and log.best_params is not None:
        net.set_params(log.best_params)

    out_dir.mkdir(parents=True, exist_ok=True)
    model_path = out_dir / MODEL_FILENAME
    save_checkpoint(net, model_path, cfg["network"]["checkpoint_float_width"])
    priors = estimate_priors(
        train_d.labels, train_d.num_classes, cfg["analysis"]["prior_smoothing"]
    )
    meta = {
        "context": cfg["data"]["context"],
        "mean": mean.tolist(),
        "std": std.tolist(),
        "num_classes": train_d.num_classes,
        "priors": priors.tolist(),
        "epochs_completed": start_epoch + log.records[-1].epoch,
        "selected": cfg["training"]["select"],
    }
    with open(str(model_path) + META_SUFFIX, "w") as f:
        json.dump(meta, f)
    write_log_csv(log, out_dir / "train_log.csv", start_epoch=start_epoch)
    summary = log_summary(log, start_epoch=start_epoch)
    with open(out_dir / "train_summary.json", "w") as f:
        json.dump(summary, f, indent=2, sort_keys=True)
    print(
        f"trained {summary['epochs']} epochs: "
        f"dev_ce={summary['final']['dev_ce']:.6f} dev_acc={summary['final']['dev_acc']:.4f}"
    )
    return summary


def _load_model_and_prep(model_path, data_path) -> tuple:
    net = load_checkpoint(model_path)
    d = read_any_dataset(data_path)
    meta_path = Path(str(model_path) + META_SUFFIX)
    meta = None
    if meta_path.exists():
        with open(meta_path) as f:
            meta = json.load(f)
        d = splice_dataset(d, meta["context"])
        d = apply_normalization(
            d, np.asarray(meta["mean"], dtype=np.float64), np.asarray(meta["std"])
        )
    return net, d, meta


def cmd_eval(cfg: dict, model_path, data_path, use_priors: bool, out_dir: Path) -> dict:
    """Cross entropy, accuracy, grouped confusion, and optionally
    prior-scaled argmax accuracy of a checkpoint on a dataset."""
    net, d, meta = _load_model_and_prep(model_path, data_path)
    yhat = predict_scores(net, d.frames)
    conf = ana.grouped_confusion(yhat, d.labels, d.group_of)
    metrics = {
        "num_frames": d.num_frames,
        "cross_entropy": cross_entropy(yhat, d.labels),
        "accuracy": accuracy(yhat, d.labels),
        "confusion": {
            "occurrences": conf.occurrences.tolist(),
            "correct": conf.correct.tolist(),
            "within_group_errors": conf.within.tolist(),
            "out_of_group_errors": conf.out.tolist(),
        },
    }
    if use_priors:
        if meta is not None and "priors" in meta:
            priors = np.asarray(meta["priors"], dtype=np.float64)
        else:
            priors = estimate_priors(
                d.labels, d.num_classes, cfg["analysis"]["prior_smoothing"]
            )
        scores = scaled_scores(yhat, priors)
        metrics["scaled_accuracy"] = accuracy(scores, d.labels)
    out_dir.mkdir(parents=True, exist_ok=True)
    text = json.dumps(metrics, indent=2, sort_keys=True)
    with open(out_dir / "metrics.json", "w") as f:
        f.write(text + "\n")
    print(text)
    return metrics


def cmd_analyze(cfg: dict, model_path, data_path, out_dir: Path) -> ana.AnalysisReport:
    """Emit scree / code-length / grouped-confusion CSVs for a model."""
    net, d, _ = _load_model_and_prep(model_path, data_path)
    sample_n = min(cfg["analysis"]["sample_n"], d.num_frames)
    report = ana.analyze_coding(net, d, sample_n, Rng(cfg["analysis"]["seed"]))
    yhat = predict_scores(net, d.frames)
    conf = ana.grouped_confusion(yhat, d.labels, d.group_of)
    out_dir.mkdir(parents=True, exist_ok=True)
    ana.write_scree_csv(report, out_dir / "scree.csv")
    ana.write_code_length_csv(report, out_dir / "code_length.csv")
    ana.write_confusion_csv(conf, out_dir / "confusion.csv")
    print(
        f"analyzed {sample_n} frames over {len(report.layers)} hidden layers -> {out_dir}"
    )
    return report


# ---------------------------------------------------------------------------
# Sweep: dense nets at target parameter counts and depths
# ---------------------------------------------------------------------------


def solve_layer_width(target_params: int, depth: int, input_dim: int, classes: int) -> int:
    """Hidden-layer width whose dense network (depth equal-width hidden
    layers) has at most target_params parameters.

    Total parameters for width w:
        (depth-1) w^2 + (input_dim + depth + classes) w + classes
    Solved exactly in integers, rounding the real root down.
    """
    if depth < 1:
        raise ConfigError(f"sweep depth must be >= 1, got {depth}")
    k = classes
    b = input_dim + 1 + (depth - 1) + k
    if depth == 1:
        w = (target_params - k) // b
    else:
        a = depth - 1
        disc = b * b - 4 * a * (k - target_params)
        if disc < 0:
            return 0
        w = (math.isqrt(disc) - b) // (2 * a)
    return max(w, 0)


def _dense_param_count(w: int, depth: int, input_dim: int, classes: int) -> int:
    return (depth - 1) * w * w + (input_dim + depth + classes) * w + classes


def cmd_sweep(cfg: dict, out_dir: Path, data_path=None) -> list[dict]:
    """One training run per (target size) x (depth) x (optimizer)
    combination; equal-parameter widths come from solve_layer_width.
    Infeasible targets are recorded as error rows and the sweep
    continues. Writes summary.csv plus one subdirectory per run."""
    if data_path:
        dataset = read_any_dataset(data_path)
    else:
        dataset = generate_synthetic(build_synthetic_spec(cfg["data"]))
    train_d, dev_d, _, _ = _prepare_training_data(cfg, dataset, None)

    sweep_cfg = cfg["sweep"]
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    run_idx = 0
    for target in sweep_cfg["target_params"]:
        for depth in sweep_cfg["depths"]:
            for opt_kind in sweep_cfg["optimizers"]:
                run_idx += 1
                row = {
                    "params": "",
                    "layers": depth,
                    "layer_size": "",
                    "optimizer": opt_kind,
                    "dev_ce": "",
                    "dev_acc": "",
                    "error": "",
                }
                width = solve_layer_width(target, depth, train_d.dim, train_d.num_classes)
                if width < 1:
                    row["error"] = f"target {target} infeasible at depth {depth}"
                    rows.append(row)
                    continue
                try:
                    specs = [Dense(width)] * depth + [SoftmaxOutput(train_d.num_classes)]
                    net = init_network(
                        FlatInput(train_d.dim),
                        specs,
                        Rng(cfg["network"]["init_seed"]),
                        cfg["network"]["init_scale"],
                    )
                    opt_cfg = dataclasses.replace(
                        build_optimizer_config(cfg["optimizer"]), kind=opt_kind
                    )
                    train_cfg = build_train_config(cfg["training"])
                    net, log = train(net, train_d, dev_d, opt_cfg, train_cfg)
                    run_dir = out_dir / f"run_{run_idx:03d}_{opt_kind}_d{depth}_w{width}"
                    run_dir.mkdir(parents=True, exist_ok=True)
                    save_checkpoint(
                        net, run_dir / MODEL_FILENAME, cfg["network"]["checkpoint_float_width"]
                    )
                    write_log_csv(log, run_dir / "train_log.csv")
                    final = log.records[-1]
                    row.update(
                        params=num_params(net),
                        layer_size=width,
                        dev_ce=f"{final.dev_ce:.12g}",
                        dev_acc=f"{final.dev_acc:.12g}",
                    )
                except Exception as e:  # record and continue sweeping
                    row["error"] = f"{type(e).__name__}: {e}"
                rows.append(row)
                status = row["error"] or f"dev_acc={row['dev_acc']}"
                print(f"run {run_idx}: depth={depth} width={width} {opt_kind}: {status}")

    header = ["params", "layers", "layer_size", "optimizer", "dev_ce", "dev_acc", "error"]
    with open(out_dir / "summary.csv", "w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=header)
        w.writeheader()
        w.writerows(rows)
    return rows
