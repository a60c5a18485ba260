"""Command-line entry point tying the pipelines together.

Subcommands: ``synth`` (dataset generation), ``train``, ``lr-find``,
``cwt-export`` (scalogram heatmaps), ``eval``, and ``predict``. Flags
can also be given in a config file of ``key = value`` lines (``#``
comments allowed); flags win over the file, the file wins over
defaults, and unknown keys are rejected. Every run echoes its fully
resolved configuration to stderr, and every artifact-producing run
writes a ``manifest`` JSON next to its outputs with the resolved
config and a sha256 per output file, so a run can be reproduced and
checked bit-for-bit on the same platform.

Exit codes: 0 success, 1 usage or configuration error, 2 data or
shape error, 3 numeric failure. Logs go to stderr only; results go
to files.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from dataclasses import dataclass

import numpy as np

from . import ops, synth
from .checkpoint import load_model, save_model
from .data import batches, load_dataset, save_dataset, split, standardize
from .errors import ConfigError, DataError, NumericError, ShapeError
from .pipelines import build_model, run_training, wavelet_images
from .training import (FixedLr, OneCyclePolicy, SlicePolicy, TrainConfig,
                       history_json, lr_find)
from .wavelet import export_heatmaps

__all__ = ["CliConfig", "resolve", "run", "main"]


# key -> (default, type, help); None defaults are filled from the config
# file or flags, and _require() enforces the ones a subcommand cannot
# run without.
_SUBCOMMANDS = {
    "synth": {
        "n": (2400, int, "number of signals (divisible by 8)"),
        "length": (94, int, "data points per signal"),
        "seed": (0, int, "generation seed"),
        "noise": (0.3, float, "noise level relative to signal RMS"),
        "out": (None, str, "output dataset file (required)"),
    },
    "train": {
        "data": (None, str, "dataset file (required)"),
        "out": (None, str, "output directory (required)"),
        "approach": ("direct", str, "direct | wavelet"),
        "epochs": (20, int, "training epochs"),
        "batch-size": (64, int, "signals per batch"),
        "lr": (1e-3, float, "fixed learning rate"),
        "lr-min": (None, float, "lowest rate of a slice policy"),
        "lr-max": (None, float, "peak rate (one-cycle) or slice top"),
        "lr-policy": ("auto", str, "auto | fixed | one-cycle | slice"),
        "seed": (0, int, "run seed (split, init, batch order)"),
        "weight-decay": (0.01, float, "decoupled weight decay"),
        "valid-frac": (0.2, float, "validation fraction"),
    },
    "lr-find": {
        "data": (None, str, "dataset file (required)"),
        "out": (None, str, "JSON output file (optional)"),
        "approach": ("direct", str, "direct | wavelet"),
        "seed": (0, int, "split and init seed"),
        "start": (1e-7, float, "sweep start rate"),
        "end": (10.0, float, "sweep end rate"),
        "n-iter": (100, int, "sweep steps"),
        "batch-size": (64, int, "signals per batch"),
        "valid-frac": (0.2, float, "validation fraction"),
        "weight-decay": (0.0, float, "decay applied during the sweep"),
    },
    "cwt-export": {
        "data": (None, str, "dataset file (required)"),
        "out": (None, str, "output directory (required)"),
        "colormap": ("viridis", str, "heatmap colormap"),
    },
    "eval": {
        "checkpoint": (None, str, "model checkpoint (required)"),
        "data": (None, str, "dataset file (required)"),
        "out": (None, str, "report JSON file (optional)"),
        "batch-size": (64, int, "signals per batch"),
        "seed": (None, int, "split seed (default: from checkpoint)"),
        "valid-frac": (None, float, "validation fraction (default: from "
                                    "checkpoint, else 0.2)"),
    },
    "predict": {
        "checkpoint": (None, str, "model checkpoint (required)"),
        "input": (None, str, "dataset-format file to classify (required)"),
        "out": (None, str, "predictions CSV file (required)"),
        "batch-size": (64, int, "signals per batch"),
    },
}

_HELP = {
    "synth": "generate a synthetic labeled dataset",
    "train": "train a classifier and write history + checkpoint",
    "lr-find": "sweep learning rates and suggest one",
    "cwt-export": "write one scalogram heatmap PNG per signal",
    "eval": "evaluate a checkpoint on a dataset's validation split",
    "predict": "classify signals with a trained checkpoint",
}


@dataclass(frozen=True)
class CliConfig:
    """A subcommand plus its fully resolved key -> value mapping."""
    subcommand: str
    values: dict


def _log(msg: str) -> None:
    print(msg, file=sys.stderr)


def _read_config_file(path):
    """Yield (key, raw value, line number) from a key = value file."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from None
    for line_no, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(
                f"{path} line {line_no}: expected 'key = value', got {line!r}")
        key, _, value = line.partition("=")
        yield key.strip(), value.strip(), line_no


def _convert(raw: str, typ, path, line_no):
    try:
        return typ(raw)
    except ValueError:
        raise ConfigError(
            f"{path} line {line_no}: cannot parse {raw!r} as {typ.__name__}"
        ) from None


def resolve(subcommand: str, flag_values: dict, config_path=None) -> CliConfig:
    """Merge defaults, config file, and flags (last wins)."""
    table = _SUBCOMMANDS[subcommand]
    values = {key: default for key, (default, _, _) in table.items()}
    if config_path is not None:
        for key, raw, line_no in _read_config_file(config_path):
            if key not in table:
                raise ConfigError(
                    f"{config_path} line {line_no}: unknown key {key!r} for "
                    f"{subcommand}")
            values[key] = _convert(raw, table[key][1], config_path, line_no)
    for key in table:
        flag = flag_values.get(key.replace("-", "_"))
        if flag is not None:
            values[key] = flag
    return CliConfig(subcommand=subcommand, values=values)


def _require(cfg: CliConfig, *keys) -> None:
    for key in keys:
        if cfg.values.get(key) is None:
            raise ConfigError(
                f"{cfg.subcommand}: missing required key {key!r} "
                f"(flag --{key} or config file)")


def _echo(cfg: CliConfig) -> None:
    _log(f"[infraclass] {cfg.subcommand} resolved config:")
    for key in sorted(cfg.values):
        value = cfg.values[key]
        _log(f"  {key} = {'none' if value is None else value}")


def _sha256(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _write_manifest(manifest_path, cfg: CliConfig, output_paths) -> None:
    """Resolved config plus a sha256 per output, keyed by relative path."""
    base = os.path.dirname(os.path.abspath(manifest_path))
    outputs = {}
    for path in output_paths:
        rel = os.path.relpath(os.path.abspath(path), base)
        outputs[rel] = _sha256(path)
    doc = {"command": cfg.subcommand, "config": cfg.values,
           "outputs": outputs}
    with open(manifest_path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(doc, sort_keys=True, indent=2))
        fh.write("\n")
    _log(f"[infraclass] wrote {manifest_path}")


def _sidecar_manifest(out_file) -> str:
    return str(out_file) + ".manifest.json"


def _build_policy(values: dict):
    """Pick the lr policy, inferring one from the given flags on auto."""
    name = values["lr-policy"]
    if name == "auto":
        if values["lr-min"] is not None:
            name = "slice"
        elif values["lr-max"] is not None:
            name = "one-cycle"
        else:
            name = "fixed"
        values["lr-policy"] = name
    if name == "fixed":
        return FixedLr(lr=values["lr"])
    if name == "one-cycle":
        if values["lr-max"] is None:
            raise ConfigError("one-cycle policy needs lr-max")
        return OneCyclePolicy(lr_max=values["lr-max"])
    if name == "slice":
        if values["lr-min"] is None or values["lr-max"] is None:
            raise ConfigError("slice policy needs lr-min and lr-max")
        return SlicePolicy(lr_min=values["lr-min"], lr_max=values["lr-max"])
    raise ConfigError(f"unknown lr-policy {name!r}")


def _check_approach(value: str) -> str:
    if value not in ("direct", "wavelet"):
        raise ConfigError(f"approach must be direct or wavelet, got {value!r}")
    return value


def _meta_approach(meta: dict) -> str:
    approach = meta.get("approach")
    if approach is None:
        approach = {"inception_time": "direct",
                    "small_resnet": "wavelet"}.get(meta.get("kind"))
    if approach is None:
        raise DataError("checkpoint meta does not identify an approach")
    return approach


def _network_inputs(approach: str, ds) -> np.ndarray:
    if approach == "wavelet":
        _log("[infraclass] rendering scalogram images")
        return wavelet_images(ds.signals)
    return ds.signals


# ---------------------------------------------------------------------------
# subcommands

def _cmd_synth(cfg: CliConfig) -> int:
    v = cfg.values
    _require(cfg, "out")
    _echo(cfg)
    ds = synth.generate(n=v["n"], length=v["length"], seed=v["seed"],
                        noise=v["noise"])
    save_dataset(ds, v["out"])
    _log(f"[infraclass] wrote {len(ds)} signals to {v['out']}")
    _write_manifest(_sidecar_manifest(v["out"]), cfg, [v["out"]])
    return 0


def _cmd_train(cfg: CliConfig) -> int:
    v = cfg.values
    _require(cfg, "data", "out")
    _check_approach(v["approach"])
    policy = _build_policy(v)
    _echo(cfg)
    tcfg = TrainConfig(approach=v["approach"], epochs=v["epochs"],
                       batch_size=v["batch-size"], lr_policy=policy,
                       seed=v["seed"], weight_decay=v["weight-decay"])
    ds = load_dataset(v["data"])
    result = run_training(ds, tcfg, valid_frac=v["valid-frac"], log=_log)
    tr = result.train
    os.makedirs(v["out"], exist_ok=True)
    history_path = os.path.join(v["out"], "history.json")
    with open(history_path, "w", encoding="utf-8") as fh:
        fh.write(history_json(tr.history, tr.report.confusion))
        fh.write("\n")
    ckpt_path = os.path.join(v["out"], "model.ckpt")
    save_model(ckpt_path, tr.model, approach=v["approach"], seed=v["seed"],
               valid_frac=v["valid-frac"], epochs=v["epochs"],
               best_epoch=tr.best_epoch, best_accuracy=tr.best_accuracy)
    _log(f"[infraclass] best epoch {tr.best_epoch} "
         f"accuracy {tr.best_accuracy:.4f}")
    _write_manifest(os.path.join(v["out"], "manifest.json"), cfg,
                    [history_path, ckpt_path])
    return 0


def _loss_fn(model, batch, tape):
    logits = model.forward(batch.inputs, mode="train", tape=tape)
    loss, _ = ops.softmax_cross_entropy(logits, batch.labels, tape=tape)
    return loss


def _cmd_lr_find(cfg: CliConfig) -> int:
    v = cfg.values
    _require(cfg, "data")
    _check_approach(v["approach"])
    _echo(cfg)
    ds = load_dataset(v["data"])
    split_idx = split(ds, v["valid-frac"], v["seed"])
    inputs = _network_inputs(v["approach"], ds)
    model = build_model(v["approach"], ds.length, seed=v["seed"])
    train_batches = [standardize(b) for b in
                     batches(inputs, ds.labels, split_idx.train,
                             v["batch-size"], shuffle=True, seed=v["seed"],
                             epoch=0)]
    result = lr_find(model, train_batches, _loss_fn, start=v["start"],
                     end=v["end"], n_iter=v["n-iter"],
                     weight_decay=v["weight-decay"])
    if result.suggestion is None:
        _log("[infraclass] no suggestion (loss never fell)")
    else:
        _log(f"[infraclass] suggested learning rate {result.suggestion:.3e}")
    if v["out"] is not None:
        doc = {"suggestion": result.suggestion, "lrs": result.lrs,
               "losses": result.losses, "smoothed": result.smoothed}
        with open(v["out"], "w", encoding="utf-8") as fh:
            fh.write(json.dumps(doc))
            fh.write("\n")
        _write_manifest(_sidecar_manifest(v["out"]), cfg, [v["out"]])
    return 0


def _cmd_cwt_export(cfg: CliConfig) -> int:
    v = cfg.values
    _require(cfg, "data", "out")
    _echo(cfg)
    ds = load_dataset(v["data"])
    name = os.path.splitext(os.path.basename(v["data"]))[0]
    paths = export_heatmaps(ds.signals, ds.labels, v["out"], name,
                            colormap=v["colormap"])
    _log(f"[infraclass] wrote {len(paths)} heatmaps to {v['out']}")
    _write_manifest(os.path.join(v["out"], "manifest.json"), cfg, paths)
    return 0


def _cmd_eval(cfg: CliConfig) -> int:
    from .training import evaluate

    v = cfg.values
    _require(cfg, "checkpoint", "data")
    model, meta = load_model(v["checkpoint"])
    approach = _meta_approach(meta)
    seed = v["seed"] if v["seed"] is not None else meta.get("seed")
    if seed is None:
        raise ConfigError("checkpoint meta has no seed; pass --seed to "
                          "reproduce the validation split")
    frac = v["valid-frac"]
    if frac is None:
        frac = meta.get("valid_frac", 0.2)
    v["seed"], v["valid-frac"] = seed, frac
    _echo(cfg)
    ds = load_dataset(v["data"])
    split_idx = split(ds, frac, seed)
    inputs = _network_inputs(approach, ds)
    report = evaluate(model, inputs, ds.labels, split_idx.valid,
                      v["batch-size"])
    _log(f"[infraclass] accuracy {report.accuracy:.4f} over "
         f"{report.n_samples} signals (loss {report.loss:.4f})")
    if v["out"] is not None:
        doc = {"accuracy": report.accuracy, "loss": report.loss,
               "confusion": report.confusion.tolist(),
               "precision": report.precision.tolist(),
               "recall": report.recall.tolist(),
               "n_samples": report.n_samples}
        with open(v["out"], "w", encoding="utf-8") as fh:
            fh.write(json.dumps(doc))
            fh.write("\n")
        _write_manifest(_sidecar_manifest(v["out"]), cfg, [v["out"]])
    return 0


def _cmd_predict(cfg: CliConfig) -> int:
    v = cfg.values
    _require(cfg, "checkpoint", "input", "out")
    _echo(cfg)
    model, meta = load_model(v["checkpoint"])
    approach = _meta_approach(meta)
    ds = load_dataset(v["input"])
    inputs = _network_inputs(approach, ds)
    lines = []
    index = 0
    for batch in batches(inputs, ds.labels, range(len(ds)), v["batch-size"]):
        batch = standardize(batch)
        logits = model.forward(batch.inputs, mode="eval")
        z = logits.data.astype(np.float64)
        z -= z.max(axis=1, keepdims=True)
        e = np.exp(z)
        probs = e / e.sum(axis=1, keepdims=True)
        pred = np.argmax(probs, axis=1)
        for row in range(probs.shape[0]):
            joined = ",".join("%.9g" % p for p in probs[row])
            lines.append(f"{index},{int(pred[row])},{joined}")
            index += 1
    with open(v["out"], "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines))
        fh.write("\n")
    _log(f"[infraclass] wrote {index} predictions to {v['out']}")
    _write_manifest(_sidecar_manifest(v["out"]), cfg, [v["out"]])
    return 0


_DISPATCH = {
    "synth": _cmd_synth,
    "train": _cmd_train,
    "lr-find": _cmd_lr_find,
    "cwt-export": _cmd_cwt_export,
    "eval": _cmd_eval,
    "predict": _cmd_predict,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="infraclass",
        description="signal classification: synthesis, wavelet transforms, "
                    "training, evaluation")
    subparsers = parser.add_subparsers(dest="subcommand", required=True)
    for name, table in _SUBCOMMANDS.items():
        sp = subparsers.add_parser(name, help=_HELP[name])
        sp.add_argument("--config", default=None, metavar="FILE",
                        help="key = value file; flags override it")
        for key, (default, typ, help_text) in table.items():
            shown = "" if default is None else f" (default {default})"
            sp.add_argument("--" + key, dest=key.replace("-", "_"),
                            type=typ, default=None, help=help_text + shown)
    return parser


def run(argv=None) -> int:
    """Parse argv, dispatch, and map errors to exit codes."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1
    try:
        cfg = resolve(args.subcommand, vars(args), args.config)
        return _DISPATCH[args.subcommand](cfg)
    except ConfigError as exc:
        _log(f"infraclass: config error: {exc}")
        return 1
    except (DataError, ShapeError) as exc:
        _log(f"infraclass: data error: {exc}")
        return 2
    except OSError as exc:
        _log(f"infraclass: data error: {exc}")
        return 2
    except NumericError as exc:
        _log(f"infraclass: numeric failure: {exc}")
        return 3


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
