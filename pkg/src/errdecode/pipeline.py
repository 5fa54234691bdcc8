"""Experiment runners: single-channel, all-channel, and time-resolved runs.

Each runner consumes a ``RunConfig``, writes its result files into an output
directory, and finishes with a ``manifest.json`` that captures the resolved
configuration, the software version, and derived quantities. A run repeated
from its manifest (same config, any output directory) reproduces every output
file byte-identically, so the manifest doubles as the reproduction recipe.
The output directory itself is deliberately not part of the manifest.
"""

from __future__ import annotations

import csv
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from . import __version__
from .data import CLASS_NAMES, EpochSet, load_recording, save_recording, write_json
from .errors import ConfigError
from .mapping import (
    RoiTable,
    assign_roi,
    default_roi_table,
    peak_sort,
    perturbation_correlation,
    roi_pool,
    sliding_window_decode,
    stack_courses,
    write_roi_course_csv,
    write_timecourse_csv,
)
from .metrics import acc_norm, confusion, tpr, write_metrics
from .nn.models import build_deep4, build_shallow, load_model, save_model
from .nn.training import TrainConfig, predict, train
from .preprocess import chronological_split, epoch_extract, resample, subsample_balance
from .rlda import rlda_fit, rlda_predict, save_rlda
from .rng import derive_seedseq
from .stats import permutation_test, write_stats
from .synth import SynthConfig, generate, save_truth

DEFAULT_WINDOW = (-0.5, 1.5)
DEFAULT_RATE_HZ = 250.0
CLASSIFIERS = ("deep4", "shallow", "rlda")
BALANCE_MODES = ("class_balanced_batches", "subsample", "none")
DEFAULT_EPOCHS = {"single": 200, "all": 1000, "timeresolve": 200}


@dataclass
class RunConfig:
    """Resolved options of one experiment run.

    Exactly one of ``data`` (recording directory) and ``synth`` (generator
    config dict) must be set. ``epochs`` of None means the per-command
    default (200 single-channel / 1000 all-channel). The seed is always
    explicit; nothing is ever seeded from the clock.
    """

    data: str = None
    synth: dict = None
    classifier: str = "deep4"
    epochs: int = None
    window: tuple = DEFAULT_WINDOW
    split_frac: float = 0.6
    balance: str = "class_balanced_batches"
    seed: int = 0
    n_perm: int = 10_000
    batch_size: int = 32
    target_hz: float = DEFAULT_RATE_HZ
    sliding_window_s: float = 0.2
    sliding_step_s: float = 0.05
    perturb: bool = False
    model_dir: str = None
    roi_table: str = None
    jobs: int = 1

    def __post_init__(self):
        if (self.data is None) == (self.synth is None):
            raise ConfigError("exactly one of data path and synth config is required")
        if self.classifier not in CLASSIFIERS:
            raise ConfigError(
                f"classifier must be one of {CLASSIFIERS}, got {self.classifier!r}"
            )
        if self.balance not in BALANCE_MODES:
            raise ConfigError(
                f"balance must be one of {BALANCE_MODES}, got {self.balance!r}"
            )
        if self.epochs is not None and self.epochs < 0:
            raise ConfigError(f"epochs must be >= 0, got {self.epochs}")
        self.window = (float(self.window[0]), float(self.window[1]))
        if not self.window[0] < self.window[1]:
            raise ConfigError(f"window start must precede end, got {self.window}")
        if self.synth is not None:
            synth = dict(self.synth)
            synth.setdefault("seed", self.seed)
            self.synth = SynthConfig.from_dict(synth).to_dict()

    def to_dict(self) -> dict:
        """Manifest form; excludes the worker count, which never alters output."""
        return {
            "data": self.data,
            "synth": self.synth,
            "classifier": self.classifier,
            "epochs": self.epochs,
            "window": list(self.window),
            "split_frac": self.split_frac,
            "balance": self.balance,
            "seed": self.seed,
            "n_perm": self.n_perm,
            "batch_size": self.batch_size,
            "target_hz": self.target_hz,
            "sliding_window_s": self.sliding_window_s,
            "sliding_step_s": self.sliding_step_s,
            "perturb": self.perturb,
            "model_dir": self.model_dir,
            "roi_table": self.roi_table,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown run config keys: {sorted(unknown)}")
        return cls(**d)


def _sub_seed(seed: int, *path) -> int:
    return int(derive_seedseq(seed, *path).generate_state(1)[0])


def load_dataset(cfg: RunConfig):
    """Materialize (recording, name) from the configured source."""
    if cfg.synth is not None:
        rec, _ = generate(SynthConfig.from_dict(cfg.synth))
        return rec, "synth"
    path = Path(cfg.data)
    rec = load_recording(path)
    return rec, path.name


def prepare_epochs(cfg: RunConfig) -> tuple:
    """Load, resample to the target rate, and epoch the configured dataset."""
    rec, name = load_dataset(cfg)
    if rec.rate_hz != cfg.target_hz:
        rec = resample(rec, cfg.target_hz)
    ep = epoch_extract(rec, cfg.window)
    return ep, name


def _train_sets(cfg: RunConfig, ep: EpochSet, *seed_path):
    """Chronological split plus the configured balancing of the training half."""
    train_ep, eval_ep = chronological_split(ep, cfg.split_frac)
    if cfg.balance == "subsample":
        train_ep = subsample_balance(train_ep, _sub_seed(cfg.seed, "subsample", *seed_path))
    return train_ep, eval_ep


def _fit_and_predict(cfg: RunConfig, train_ep, eval_ep, n_epochs, seed, out_dir=None):
    """Train the configured classifier; optionally checkpoint it."""
    balanced = cfg.balance == "class_balanced_batches"
    if cfg.classifier == "rlda":
        model = rlda_fit(train_ep)
        preds, _ = rlda_predict(model, eval_ep)
        if out_dir is not None:
            save_rlda(model, Path(out_dir) / "rlda.json")
        return preds
    builder = build_deep4 if cfg.classifier == "deep4" else build_shallow
    model = builder(train_ep.n_channels, train_ep.n_samples, n_classes=2, seed=seed)
    tc = TrainConfig(
        max_epochs=n_epochs,
        batch_size=cfg.batch_size,
        seed=seed,
        balanced_batches=balanced,
    )
    model, _ = train(model, train_ep, tc)
    preds, _ = predict(model, eval_ep)
    if out_dir is not None:
        save_model(model, out_dir)
    return preds


def write_manifest(out_dir, command: str, cfg, derived: dict, outputs: list) -> None:
    """Record the reproduction recipe; ``cfg`` is a RunConfig or a plain dict."""
    manifest = {
        "version": __version__,
        "command": command,
        "config": cfg.to_dict() if hasattr(cfg, "to_dict") else dict(cfg),
        "derived": derived,
        "outputs": sorted(outputs),
    }
    write_json(Path(out_dir) / "manifest.json", manifest)


def run_synth(cfg: RunConfig, out_dir) -> Path:
    """Generate the synthetic recording into the output directory."""
    if cfg.synth is None:
        raise ConfigError("synth run needs a synth config")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    scfg = SynthConfig.from_dict(cfg.synth)
    rec, truth = generate(scfg)
    save_recording(rec, out_dir)
    save_truth(truth, out_dir)
    write_manifest(
        out_dir,
        "synth",
        cfg,
        derived={
            "n_samples": rec.n_samples,
            "n_events": len(rec.events),
            "n_error": truth["n_error"],
            "n_correct": truth["n_correct"],
        },
        outputs=["signal.bin", "meta.json", "truth.json"],
    )
    return out_dir


def _single_channel_job(args):
    cfg, ep_ch, channel, n_epochs = args
    seed = _sub_seed(cfg.seed, "single", channel)
    train_ep, eval_ep = _train_sets(cfg, ep_ch, channel)
    preds = _fit_and_predict(cfg, train_ep, eval_ep, n_epochs, seed)
    cm = confusion(preds, eval_ep.labels)
    perm = permutation_test(
        preds,
        eval_ep.labels,
        n_perm=cfg.n_perm,
        seed=_sub_seed(cfg.seed, "perm", channel),
    )
    return channel, acc_norm(cm), tpr(cm, 0), tpr(cm, 1), perm.p_value


def run_single_channel(cfg: RunConfig, out_dir) -> list:
    """One model per channel; emits the per-channel accuracy table."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    ep, name = prepare_epochs(cfg)
    n_epochs = cfg.epochs if cfg.epochs is not None else DEFAULT_EPOCHS["single"]

    jobs = [(cfg, ep.narrow_channel(c), c, n_epochs) for c in range(ep.n_channels)]
    if cfg.jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            results = list(pool.map(_single_channel_job, jobs))
    else:
        results = [_single_channel_job(j) for j in jobs]
    results.sort(key=lambda r: r[0])

    rows = []
    for channel, acc, acc_c, acc_e, p in results:
        meta = ep.channels[channel] if ep.channels else None
        rows.append(
            {
                "channel": meta.name if meta else f"ch{channel:02d}",
                "roi": (meta.roi or "") if meta else "",
                "mni_x": meta.mni[0] if meta else 0.0,
                "mni_y": meta.mni[1] if meta else 0.0,
                "mni_z": meta.mni[2] if meta else 0.0,
                "acc_norm": acc,
                "acc_correct": acc_c,
                "acc_error": acc_e,
                "p_perm": p,
            }
        )
    with open(out_dir / "channels.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["channel", "roi", "mni_x", "mni_y", "mni_z", "acc_norm", "acc_correct", "acc_error", "p_perm"]
        )
        for r in rows:
            writer.writerow(
                [
                    r["channel"],
                    r["roi"],
                    f"{r['mni_x']:.2f}",
                    f"{r['mni_y']:.2f}",
                    f"{r['mni_z']:.2f}",
                    f"{r['acc_norm']:.6f}",
                    f"{r['acc_correct']:.6f}",
                    f"{r['acc_error']:.6f}",
                    f"{r['p_perm']:.6g}",
                ]
            )
    train_ep, _ = _train_sets(cfg, ep, "counts")
    write_manifest(
        out_dir,
        "single",
        cfg,
        derived={
            "recording": name,
            "n_channels": ep.n_channels,
            "n_trials": ep.n_trials,
            "epochs_budget": n_epochs,
            "train_class_counts": train_ep.class_counts(),
        },
        outputs=["channels.csv"],
    )
    return rows


def run_all_channel(cfg: RunConfig, out_dir) -> dict:
    """One model over all channels; emits the metric report surfaces."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    ep, name = prepare_epochs(cfg)
    n_epochs = cfg.epochs if cfg.epochs is not None else DEFAULT_EPOCHS["all"]
    seed = _sub_seed(cfg.seed, "all")
    train_ep, eval_ep = _train_sets(cfg, ep)
    preds = _fit_and_predict(cfg, train_ep, eval_ep, n_epochs, seed, out_dir=out_dir)

    cm = confusion(preds, eval_ep.labels)
    report = write_metrics(out_dir, {name: cm})
    perm = permutation_test(
        preds, eval_ep.labels, n_perm=cfg.n_perm, seed=_sub_seed(cfg.seed, "perm")
    )
    write_stats(
        out_dir / "stats.json",
        {
            "permutation": {
                "statistic": "acc_norm",
                "observed": perm.observed_stat,
                "p_value": perm.p_value,
                "n_permutations": perm.n_permutations,
                "null_quantiles": perm.null_quantiles,
                "seed": cfg.seed,
            }
        },
    )
    with open(out_dir / "predictions.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["trial", "onset_s", "label", "pred"])
        for i, (onset, label, pred) in enumerate(
            zip(eval_ep.onsets_s, eval_ep.labels, preds)
        ):
            writer.writerow([i, f"{onset:.4f}", CLASS_NAMES[label], CLASS_NAMES[pred]])

    model_files = (
        ["rlda.json"] if cfg.classifier == "rlda" else ["model.json", "weights.bin"]
    )
    write_manifest(
        out_dir,
        "all",
        cfg,
        derived={
            "recording": name,
            "n_channels": ep.n_channels,
            "n_trials": ep.n_trials,
            "epochs_budget": n_epochs,
            "train_class_counts": train_ep.class_counts(),
            "eval_class_counts": eval_ep.class_counts(),
        },
        outputs=["metrics.json", "metrics.csv", "stats.json", "predictions.csv"] + model_files,
    )
    return report


def _load_roi_table(cfg: RunConfig) -> RoiTable:
    if cfg.roi_table is None:
        return default_roi_table()
    import json

    from .mapping import RoiBox

    try:
        entries = json.loads(Path(cfg.roi_table).read_text())
        return RoiTable(
            [
                RoiBox(e["name"], tuple(e["center"]), tuple(e["half_widths"]))
                for e in entries
            ]
        )
    except (OSError, json.JSONDecodeError, KeyError, TypeError) as exc:
        raise ConfigError(f"cannot read ROI table {cfg.roi_table}: {exc}") from exc


def _window_job(args):
    cfg, ep_ch, channel, n_epochs = args
    tc = TrainConfig(
        max_epochs=n_epochs,
        batch_size=cfg.batch_size,
        seed=_sub_seed(cfg.seed, "timeresolve", channel),
        balanced_batches=cfg.balance != "none",
    )
    return channel, sliding_window_decode(
        ep_ch,
        0,
        window_s=cfg.sliding_window_s,
        step_s=cfg.sliding_step_s,
        train_cfg=tc,
        split_frac=cfg.split_frac,
        balance=cfg.balance == "subsample",
        n_perm=cfg.n_perm,
    )


def run_timeresolved(cfg: RunConfig, out_dir) -> dict:
    """Sliding-window decoding per channel, pooled by ROI, optional perturbation."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    ep, name = prepare_epochs(cfg)
    n_epochs = cfg.epochs if cfg.epochs is not None else DEFAULT_EPOCHS["timeresolve"]

    jobs = []
    for c in range(ep.n_channels):
        ep_ch = ep.narrow_channel(c)
        jobs.append((cfg, ep_ch, c, n_epochs))
    if cfg.jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            results = list(pool.map(_window_job, jobs))
    else:
        results = [_window_job(j) for j in jobs]
    results.sort(key=lambda r: r[0])
    course = stack_courses([c for _, c in results])
    # stacked series keep original channel names
    course.series_names = [
        ep.channels[c].name if ep.channels else f"ch{c:02d}" for c in range(ep.n_channels)
    ]

    table = _load_roi_table(cfg)
    roi_of = {}
    for c in range(ep.n_channels):
        meta = ep.channels[c] if ep.channels else None
        cname = meta.name if meta else f"ch{c:02d}"
        if meta is not None and meta.roi:
            roi_of[cname] = meta.roi
        elif meta is not None:
            roi_of[cname] = assign_roi(meta.mni, table)
        else:
            roi_of[cname] = "unassigned"
    pooled = roi_pool(course, roi_of)
    order = peak_sort(pooled)

    write_timecourse_csv(out_dir / "timecourse.csv", course, roi_of)
    write_roi_course_csv(out_dir / "roi_course.csv", pooled, order=order)
    outputs = ["timecourse.csv", "roi_course.csv"]
    write_manifest(
        out_dir,
        "timeresolve",
        cfg,
        derived={
            "recording": name,
            "n_channels": ep.n_channels,
            "n_windows": len(course.window_centers_s),
            "epochs_budget": n_epochs,
            "peak_order": order,
        },
        outputs=outputs,
    )

    if cfg.perturb:
        if not cfg.model_dir or not (Path(cfg.model_dir) / "model.json").is_file():
            raise ConfigError(
                "perturbation analysis needs --model pointing at a trained "
                "network checkpoint; accuracy outputs were still written"
            )
        model = load_model(cfg.model_dir)
        _, eval_ep = _train_sets(cfg, ep)
        corr = perturbation_correlation(
            model, eval_ep, seed=_sub_seed(cfg.seed, "perturb")
        )
        write_timecourse_csv(out_dir / "timecourse.csv", course, roi_of, corr_course=corr)
        write_manifest(
            out_dir,
            "timeresolve",
            cfg,
            derived={
                "recording": name,
                "n_channels": ep.n_channels,
                "n_windows": len(course.window_centers_s),
                "epochs_budget": n_epochs,
                "peak_order": order,
                "perturb_degenerate": corr.degenerate,
            },
            outputs=outputs,
        )
    return {"order": order, "course": course, "pooled": pooled}
