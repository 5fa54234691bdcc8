"""Command-line entry point.

Subcommands cover the full experiment matrix: ``synth`` (dataset
generation), ``preprocess`` (re-reference + resample), ``single``
(per-channel decoding), ``all`` (all-channel decoding), ``timeresolve``
(sliding-window mapping), and ``stats`` (standalone significance tests).

Configuration comes from an optional JSON file (``--config``), overridden
by explicit flags. A ``manifest.json`` produced by any run is itself a
valid ``--config``, which makes every run reproducible from its output
directory alone. Exit codes: 0 success, 2 config error, 3 data error,
4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .data import class_index, load_recording, save_recording
from .errors import ConfigError, DataError, ErrdecodeError, NumericalError
from .pipeline import (
    BALANCE_MODES,
    CLASSIFIERS,
    DEFAULT_RATE_HZ,
    RunConfig,
    run_all_channel,
    run_single_channel,
    run_synth,
    run_timeresolved,
    write_manifest,
)
from .preprocess import bipolar_rereference, resample
from .stats import permutation_test, spearman, wilcoxon_signed_rank, write_stats
from .synth import SynthConfig, timeresolved_config

PRESETS = ("default", "timeresolved")


def _load_config_file(path, command: str) -> dict:
    """Read a config JSON; a manifest is unwrapped to its config block."""
    try:
        raw = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"config {path} must hold a JSON object")
    if "config" in raw and "command" in raw:
        if raw["command"] != command:
            raise ConfigError(
                f"manifest {path} records command {raw['command']!r}, not {command!r}"
            )
        raw = raw["config"]
    return dict(raw)


def _preset_dict(name: str) -> dict:
    """Named synth config, seed left open so the run seed flows in."""
    if name == "default":
        d = SynthConfig().to_dict()
    elif name == "timeresolved":
        d = timeresolved_config().to_dict()
    else:
        raise ConfigError(f"unknown preset {name!r}; expected one of {PRESETS}")
    d.pop("seed")
    return d


def _run_config(args, command: str) -> RunConfig:
    """Merge config file and flags into a validated RunConfig."""
    cfg = _load_config_file(args.config, command) if args.config else {}
    if getattr(args, "preset", None) is not None:
        cfg["synth"] = _preset_dict(args.preset)
        cfg["data"] = None
    if getattr(args, "synth", None) is not None:
        cfg["synth"] = SynthConfig.from_json(args.synth).to_dict()
        cfg["data"] = None
    if getattr(args, "data", None) is not None:
        cfg["data"] = args.data
        cfg["synth"] = None
    for flag in ("seed", "n_perm", "epochs", "classifier", "balance", "jobs"):
        value = getattr(args, flag, None)
        if value is not None:
            cfg[flag] = value
    if getattr(args, "window", None) is not None:
        cfg["window"] = _parse_window(args.window)
    for flag in ("sliding_window_s", "sliding_step_s"):
        value = getattr(args, flag, None)
        if value is not None:
            cfg[flag] = value
    if getattr(args, "perturb", False):
        cfg["perturb"] = True
    if getattr(args, "model", None) is not None:
        cfg["model_dir"] = args.model
    if getattr(args, "roi_table", None) is not None:
        cfg["roi_table"] = args.roi_table
    return RunConfig.from_dict(cfg)


def _parse_window(text: str) -> tuple:
    parts = text.split(":")
    if len(parts) != 2:
        raise ConfigError(f"window must be START:END in seconds, got {text!r}")
    try:
        return (float(parts[0]), float(parts[1]))
    except ValueError as exc:
        raise ConfigError(f"window must be numeric, got {text!r}") from exc


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_synth(args) -> int:
    cfg = _run_config(args, "synth")
    if cfg.synth is None:
        raise ConfigError("synth needs --preset or --synth (or a config file)")
    run_synth(cfg, _out_dir(args))
    return 0


def cmd_preprocess(args) -> int:
    file_cfg = _load_config_file(args.config, "preprocess") if args.config else {}
    data = args.data if args.data is not None else file_cfg.get("data")
    if not data:
        raise ConfigError("preprocess needs --data pointing at a recording directory")
    rate = args.rate if args.rate is not None else file_cfg.get("target_hz", DEFAULT_RATE_HZ)
    bipolar = bool(file_cfg.get("bipolar", True))
    if args.no_bipolar:
        bipolar = False
    rec = load_recording(data)
    if bipolar:
        rec = bipolar_rereference(rec)
    if rec.rate_hz != rate:
        rec = resample(rec, rate)
    out = _out_dir(args)
    save_recording(rec, out)
    write_manifest(
        out,
        "preprocess",
        {"data": str(data), "target_hz": rate, "bipolar": bipolar},
        derived={
            "n_channels": rec.n_channels,
            "n_samples": rec.n_samples,
            "rate_hz": rec.rate_hz,
        },
        outputs=["signal.bin", "meta.json"],
    )
    return 0


def cmd_single(args) -> int:
    run_single_channel(_run_config(args, "single"), _out_dir(args))
    return 0


def cmd_all(args) -> int:
    run_all_channel(_run_config(args, "all"), _out_dir(args))
    return 0


def cmd_timeresolve(args) -> int:
    run_timeresolved(_run_config(args, "timeresolve"), _out_dir(args))
    return 0


def _read_predictions(path) -> tuple:
    try:
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise DataError(f"cannot read predictions {path}: {exc}") from exc
    if not rows:
        raise DataError(f"predictions file {path} holds no rows")
    try:
        labels = np.array([class_index(r["label"]) for r in rows])
        preds = np.array([class_index(r["pred"]) for r in rows])
    except KeyError as exc:
        raise DataError(f"predictions file {path} lacks column {exc}") from exc
    return preds, labels


def _read_channel_accs(path) -> dict:
    try:
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise DataError(f"cannot read channel table {path}: {exc}") from exc
    try:
        return {r["channel"]: float(r["acc_norm"]) for r in rows}
    except (KeyError, ValueError) as exc:
        raise DataError(f"channel table {path} lacks usable acc_norm: {exc}") from exc


def _paired_accs(path_a, path_b) -> tuple:
    a = _read_channel_accs(path_a)
    b = _read_channel_accs(path_b)
    if set(a) != set(b):
        raise DataError("paired channel tables name different channels")
    names = sorted(a)
    return (
        np.array([a[n] for n in names]),
        np.array([b[n] for n in names]),
        names,
    )


def cmd_stats(args) -> int:
    file_cfg = _load_config_file(args.config, "stats") if args.config else {}
    preds_path = args.preds if args.preds is not None else file_cfg.get("preds")
    paired = args.paired if args.paired is not None else file_cfg.get("paired")
    rank_corr = args.spearman if args.spearman is not None else file_cfg.get("spearman")
    seed = args.seed if args.seed is not None else file_cfg.get("seed", 0)
    n_perm = args.n_perm if args.n_perm is not None else file_cfg.get("n_perm", 10_000)

    analyses = {}
    if preds_path:
        preds, labels = _read_predictions(preds_path)
        res = permutation_test(preds, labels, n_perm=n_perm, seed=seed)
        analyses["permutation"] = {
            "statistic": "acc_norm",
            "observed": res.observed_stat,
            "p_value": res.p_value,
            "n_permutations": res.n_permutations,
            "null_quantiles": res.null_quantiles,
            "seed": seed,
        }
    if paired:
        x, y, names = _paired_accs(*paired)
        w, p = wilcoxon_signed_rank(x, y)
        analyses["wilcoxon"] = {"W": w, "p_value": p, "n": len(names)}
    if rank_corr:
        x, y, names = _paired_accs(*rank_corr)
        r, p = spearman(x, y)
        analyses["spearman"] = {"r": r, "p_value": p, "n": len(names)}
    if not analyses:
        raise ConfigError("stats needs at least one of --preds, --paired, --spearman")

    out = _out_dir(args)
    write_stats(out / "stats.json", analyses)
    write_manifest(
        out,
        "stats",
        {
            "preds": str(preds_path) if preds_path else None,
            "paired": [str(p) for p in paired] if paired else None,
            "spearman": [str(p) for p in rank_corr] if rank_corr else None,
            "seed": seed,
            "n_perm": n_perm,
        },
        derived={"analyses": sorted(analyses)},
        outputs=["stats.json"],
    )
    return 0


def _add_common(p: argparse.ArgumentParser, *, source: bool = True) -> None:
    p.add_argument("--config", help="JSON config file or a prior run's manifest.json")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, help="base random seed (default 0)")
    if source:
        group = p.add_mutually_exclusive_group()
        group.add_argument("--data", help="recording directory to decode")
        group.add_argument("--synth", help="synthetic dataset config JSON")
        group.add_argument(
            "--preset", choices=PRESETS, help="named synthetic dataset config"
        )


def _add_train(p: argparse.ArgumentParser) -> None:
    p.add_argument("--classifier", choices=CLASSIFIERS)
    p.add_argument("--epochs", type=int, help="training epoch budget")
    p.add_argument("--balance", choices=BALANCE_MODES)
    p.add_argument("--window", help="epoch window START:END in seconds")
    p.add_argument("--n-perm", dest="n_perm", type=int, help="permutation count")
    p.add_argument("--jobs", type=int, help="worker processes (default 1)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="errdecode",
        description="Intracranial error-decoding experiments.",
    )
    parser.add_argument("--version", action="version", version=f"errdecode {__version__}")
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("synth", help="generate a synthetic recording")
    _add_common(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("preprocess", help="re-reference and resample a recording")
    p.add_argument("--config", help="JSON config file or a prior run's manifest.json")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--data", help="recording directory to preprocess")
    p.add_argument("--rate", type=float, help="target sampling rate in Hz")
    p.add_argument(
        "--no-bipolar", action="store_true", help="skip bipolar re-referencing"
    )
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("single", help="decode each channel separately")
    _add_common(p)
    _add_train(p)
    p.set_defaults(func=cmd_single)

    p = sub.add_parser("all", help="decode using all channels jointly")
    _add_common(p)
    _add_train(p)
    p.set_defaults(func=cmd_all)

    p = sub.add_parser("timeresolve", help="sliding-window decoding per channel")
    _add_common(p)
    _add_train(p)
    p.add_argument(
        "--sliding-window", dest="sliding_window_s", type=float,
        help="sliding window length in seconds",
    )
    p.add_argument(
        "--sliding-step", dest="sliding_step_s", type=float,
        help="sliding window step in seconds",
    )
    p.add_argument(
        "--perturb", action="store_true",
        help="add input-perturbation correlation (needs --model)",
    )
    p.add_argument("--model", help="trained all-channel network checkpoint directory")
    p.add_argument("--roi-table", dest="roi_table", help="ROI box table JSON")
    p.set_defaults(func=cmd_timeresolve)

    p = sub.add_parser("stats", help="standalone significance tests")
    p.add_argument("--config", help="JSON config file or a prior run's manifest.json")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, help="permutation seed (default 0)")
    p.add_argument("--preds", help="predictions.csv from an all-channel run")
    p.add_argument(
        "--paired", nargs=2, metavar=("A", "B"),
        help="two channels.csv tables for a paired signed-rank test",
    )
    p.add_argument(
        "--spearman", nargs=2, metavar=("A", "B"),
        help="two channels.csv tables for a rank correlation",
    )
    p.add_argument("--n-perm", dest="n_perm", type=int, help="permutation count")
    p.set_defaults(func=cmd_stats)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "func", None) is None:
        parser.print_help(sys.stderr)
        return 2
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except ErrdecodeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
