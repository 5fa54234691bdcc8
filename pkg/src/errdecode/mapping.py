"""Spatio-temporal mapping: where and when error information is decodable.

Three analyses work together here:

* per-channel sliding-window decoding (200 ms window, 50 ms steps) with a
  reduced-parameter network suited to 50-sample inputs;
* pooling of channel accuracy courses into regions of interest with SEM and
  Wilcoxon-vs-chance significance marks, sorted by peak time;
* input-perturbation correlation, which correlates injected Gaussian voltage
  noise with the change in the trained network's error-class score to show
  which channels and latencies the network relies on.

Window positions are computed with exact rational arithmetic so the window
count is reproducible for any (epoch length, window, step) combination; a
2 s epoch at 250 Hz with the default window yields 37 positions.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, replace
from fractions import Fraction
from pathlib import Path

import numpy as np

from .data import ERROR, EpochSet
from .errors import ConfigError, DataError
from .metrics import acc_norm, confusion
from .nn.models import build_deep4
from .nn.training import TrainConfig, predict, train
from .preprocess import chronological_split, subsample_balance
from .rng import derive_rng, derive_seedseq
from .stats import permutation_test, wilcoxon_signed_rank

log = logging.getLogger(__name__)

UNASSIGNED = "unassigned"
SIG_THRESHOLDS = (1e-3, 1e-4)  # -> levels 1 ("*") and 2 ("**")


@dataclass(frozen=True)
class RoiBox:
    """Axis-aligned box: center and half-widths in MNI millimetres."""

    name: str
    center: tuple
    half_widths: tuple

    def contains(self, mni) -> bool:
        return all(
            abs(p - c) <= h for p, c, h in zip(mni, self.center, self.half_widths)
        )

    def distance(self, mni) -> float:
        return float(np.linalg.norm(np.asarray(mni, dtype=float) - np.asarray(self.center)))


@dataclass
class RoiTable:
    boxes: list

    def __post_init__(self):
        names = [b.name for b in self.boxes]
        if len(set(names)) != len(names):
            raise ConfigError("ROI names must be unique")
        for b in self.boxes:
            if any(h <= 0 for h in b.half_widths):
                raise ConfigError(f"ROI {b.name!r} has non-positive extent")

    def names(self) -> list:
        return [b.name for b in self.boxes]


def default_roi_table() -> RoiTable:
    """Editable 20-region stand-in atlas (left-hemisphere box estimates)."""
    entries = [
        ("middle frontal gyrus", (-38, 26, 32), (14, 14, 14)),
        ("inferior frontal gyrus", (-50, 24, 8), (14, 14, 14)),
        ("superior frontal gyrus", (-18, 34, 46), (14, 14, 14)),
        ("orbitofrontal cortex", (-24, 40, -14), (14, 14, 12)),
        ("anterior cingulate cortex", (-6, 32, 22), (10, 14, 14)),
        ("precentral gyrus", (-38, -10, 48), (14, 14, 14)),
        ("postcentral gyrus", (-42, -26, 50), (14, 14, 14)),
        ("supplementary motor area", (-6, -2, 56), (10, 14, 12)),
        ("superior parietal lobule", (-26, -60, 56), (14, 14, 14)),
        ("inferior parietal lobule", (-44, -46, 46), (14, 14, 14)),
        ("supramarginal gyrus", (-56, -38, 32), (12, 12, 12)),
        ("angular gyrus", (-46, -60, 34), (12, 12, 12)),
        ("superior temporal gyrus", (-56, -18, 4), (12, 14, 10)),
        ("middle temporal gyrus", (-58, -34, -4), (12, 14, 10)),
        ("inferior temporal gyrus", (-50, -44, -20), (14, 14, 10)),
        ("fusiform gyrus", (-36, -44, -22), (12, 14, 10)),
        ("hippocampus", (-28, -24, -12), (12, 14, 10)),
        ("amygdala", (-24, -4, -18), (10, 10, 10)),
        ("insula", (-38, 2, 2), (10, 14, 14)),
        ("posterior cingulate cortex", (-6, -46, 28), (10, 12, 12)),
    ]
    return RoiTable(
        [RoiBox(name, tuple(map(float, c)), tuple(map(float, h))) for name, c, h in entries]
    )


def assign_roi(mni, table: RoiTable) -> str:
    """Name of the containing box (nearest center on overlap), else fallback."""
    if not table.boxes:
        raise ConfigError("ROI table is empty")
    hits = [b for b in table.boxes if b.contains(mni)]
    if not hits:
        return UNASSIGNED
    if len(hits) == 1:
        return hits[0].name
    return min(hits, key=lambda b: (b.distance(mni), table.names().index(b.name))).name


@dataclass
class TimeCourse:
    """Per-series values on a common time grid relative to the event."""

    window_centers_s: np.ndarray
    values: np.ndarray
    series_names: list
    kind: str = "accuracy"
    sem: np.ndarray = None
    p_perm: np.ndarray = None
    sig_level: np.ndarray = None
    degenerate: bool = False

    def __post_init__(self):
        self.window_centers_s = np.asarray(self.window_centers_s, dtype=np.float64)
        self.values = np.atleast_2d(np.asarray(self.values, dtype=np.float64))
        if np.any(np.diff(self.window_centers_s) <= 0):
            raise DataError("window centers must be strictly increasing")
        if self.values.shape != (len(self.series_names), len(self.window_centers_s)):
            raise DataError(
                f"values shape {self.values.shape} does not match "
                f"{len(self.series_names)} series x {len(self.window_centers_s)} windows"
            )
        lo, hi = (0.0, 1.0) if self.kind == "accuracy" else (-1.0, 1.0)
        if self.values.size and (self.values.min() < lo - 1e-9 or self.values.max() > hi + 1e-9):
            raise DataError(f"{self.kind} values outside [{lo}, {hi}]")
        self.values = np.clip(self.values, lo, hi)
        for name in ("sem", "p_perm", "sig_level"):
            arr = getattr(self, name)
            if arr is not None:
                arr = np.atleast_2d(np.asarray(arr))
                if arr.shape != self.values.shape:
                    raise DataError(f"{name} shape {arr.shape} != values shape")
                setattr(self, name, arr)

    @property
    def n_series(self) -> int:
        return len(self.series_names)

    def series(self, name) -> np.ndarray:
        return self.values[self.series_names.index(name)]


def window_positions(n_samples: int, rate_hz, window_s, step_s):
    """Exact window layout: (start indices, center times, window length).

    Positions advance by step_s * rate_hz samples in rational arithmetic
    (the default 50 ms step at 250 Hz is 12.5 samples); each realized start
    index is the floor of the exact position, so the last window always fits.
    Center times come from the exact positions and are evenly spaced.
    """
    rate = Fraction(str(rate_hz))
    win = Fraction(str(window_s)) * rate
    step = Fraction(str(step_s)) * rate
    if step <= 0:
        raise ConfigError(f"step must be positive, got {step_s}")
    win_len = int(win)
    if win_len < 1:
        raise ConfigError(f"window {window_s}s is shorter than one sample")
    if win_len > n_samples:
        raise DataError(
            f"window of {win_len} samples is longer than the {n_samples}-sample epoch"
        )
    n_windows = int((Fraction(n_samples) - win) // step) + 1
    positions = [step * i for i in range(n_windows)]
    starts = [int(p) for p in positions]
    centers = [float((p + Fraction(win_len, 2)) / rate) for p in positions]
    return starts, centers, win_len


def sliding_window_decode(
    ep: EpochSet,
    channel: int,
    window_s: float = 0.2,
    step_s: float = 0.05,
    net_overrides: dict = None,
    train_cfg: TrainConfig = None,
    split_frac: float = 0.6,
    balance: bool = False,
    n_perm: int = 1000,
) -> TimeCourse:
    """Decode one channel inside each sliding window position.

    Every window runs the full pipeline: chronological train/eval split,
    network training on the windowed samples, evaluation acc_norm, and a
    label-permutation p-value. The network is the reduced-parameter variant
    (filter length 2, pooling 2) unless ``net_overrides`` says otherwise.
    """
    if not 0 <= channel < ep.n_channels:
        raise DataError(f"channel {channel} out of range [0, {ep.n_channels})")
    overrides = {"filter_time_length": 2, "stride": 2}
    overrides.update(net_overrides or {})
    cfg = train_cfg if train_cfg is not None else TrainConfig()
    starts, centers, win_len = window_positions(
        ep.n_samples, ep.rate_hz, window_s, step_s
    )

    accs = np.empty(len(starts))
    ps = np.empty(len(starts))
    for w, start in enumerate(starts):
        sub_seed = int(derive_seedseq(cfg.seed, "window", channel, w).generate_state(1)[0])
        t0 = ep.window_s[0] + start / ep.rate_hz
        win_ep = replace(
            ep,
            tensor=ep.tensor[:, channel : channel + 1, start : start + win_len],
            window_s=(t0, t0 + win_len / ep.rate_hz),
            channels=None,
        )
        train_ep, eval_ep = chronological_split(win_ep, split_frac)
        if balance:
            train_ep = subsample_balance(train_ep, sub_seed)
        model = build_deep4(
            1,
            win_len,
            n_classes=2,
            filter_time_length=overrides["filter_time_length"],
            stride=overrides["stride"],
            seed=sub_seed,
        )
        model, _ = train(model, train_ep, replace(cfg, seed=sub_seed))
        preds, _ = predict(model, eval_ep)
        accs[w] = acc_norm(confusion(preds, eval_ep.labels))
        perm_seed = int(derive_seedseq(cfg.seed, "perm", channel, w).generate_state(1)[0])
        ps[w] = permutation_test(
            preds, eval_ep.labels, n_perm=n_perm, seed=perm_seed
        ).p_value

    name = ep.channels[channel].name if ep.channels else f"ch{channel:02d}"
    # window_positions measures from the epoch start; report event-relative
    return TimeCourse(
        window_centers_s=ep.window_s[0] + np.array(centers),
        values=accs[None, :],
        series_names=[name],
        kind="accuracy",
        p_perm=ps[None, :],
    )


def stack_courses(courses) -> TimeCourse:
    """Combine single-series courses sharing one time grid into one object."""
    courses = list(courses)
    if not courses:
        raise DataError("no courses to stack")
    centers = courses[0].window_centers_s
    for c in courses[1:]:
        if not np.allclose(c.window_centers_s, centers):
            raise DataError("courses have different window grids")
        if c.kind != courses[0].kind:
            raise DataError("courses have different kinds")
    have_p = all(c.p_perm is not None for c in courses)
    return TimeCourse(
        window_centers_s=centers,
        values=np.vstack([c.values for c in courses]),
        series_names=[n for c in courses for n in c.series_names],
        kind=courses[0].kind,
        p_perm=np.vstack([c.p_perm for c in courses]) if have_p else None,
    )


def roi_pool(course: TimeCourse, roi_of: dict, rois: list = None) -> TimeCourse:
    """Pool channel courses into ROI mean +- SEM with significance marks.

    ``roi_of`` maps series name to ROI. SEM uses the sample standard
    deviation over channels (0 for single-channel ROIs); stars mark windows
    where a Wilcoxon test of the per-channel values against chance level 0.5
    clears p < 1e-3 (level 1) or p < 1e-4 (level 2).
    """
    groups = {}
    for i, name in enumerate(course.series_names):
        groups.setdefault(roi_of.get(name, UNASSIGNED), []).append(i)
    order = rois if rois is not None else sorted(groups)

    kept, means, sems, sigs = [], [], [], []
    for roi in order:
        idx = groups.get(roi, [])
        if not idx:
            log.warning("roi_pool: ROI %r has no channels; skipped", roi)
            continue
        block = course.values[idx]
        mean = block.mean(axis=0)
        if len(idx) >= 2:
            sem = block.std(axis=0, ddof=1) / np.sqrt(len(idx))
        else:
            sem = np.zeros_like(mean)
        sig = np.zeros(block.shape[1], dtype=np.int64)
        for w in range(block.shape[1]):
            try:
                _, p = wilcoxon_signed_rank(block[:, w], np.full(len(idx), 0.5))
            except DataError:
                continue
            sig[w] = sum(p < thr for thr in SIG_THRESHOLDS)
        kept.append(roi)
        means.append(mean)
        sems.append(sem)
        sigs.append(sig)
    if not kept:
        raise DataError("no ROI had any channels to pool")
    return TimeCourse(
        window_centers_s=course.window_centers_s,
        values=np.vstack(means),
        series_names=kept,
        kind=course.kind,
        sem=np.vstack(sems),
        sig_level=np.vstack(sigs),
    )


def peak_sort(course: TimeCourse) -> list:
    """Series names ascending by the time of their maximum; ties by name."""
    peaks = course.window_centers_s[np.argmax(course.values, axis=1)]
    return [
        name
        for _, name in sorted(zip(peaks, course.series_names), key=lambda t: (t[0], t[1]))
    ]


def gaussian_smooth(series, window_s: float = 0.2, rate_hz: float = 250.0) -> np.ndarray:
    """Moving average with a unit-sum Gaussian kernel (sigma = window_s / 4).

    The kernel is truncated at +-2 sigma; near the edges the available
    kernel mass is renormalized so a constant series passes unchanged.
    """
    series = np.asarray(series, dtype=np.float64)
    sigma = (window_s / 4.0) * rate_hz
    radius = int(round(2.0 * sigma))
    if radius == 0:
        return series.copy()
    if series.shape[-1] < 2 * radius + 1:
        raise DataError(
            f"series of length {series.shape[-1]} shorter than the "
            f"{2 * radius + 1}-sample kernel"
        )
    k = np.exp(-0.5 * (np.arange(-radius, radius + 1) / sigma) ** 2)
    k /= k.sum()
    flat = np.atleast_2d(series)
    den = np.convolve(np.ones(flat.shape[-1]), k, mode="same")
    out = np.vstack([np.convolve(row, k, mode="same") for row in flat]) / den
    return out.reshape(series.shape)


def perturbation_correlation(
    model,
    epochs,
    n_repeats: int = 10,
    noise_sd=None,
    seed: int = 0,
    smooth_window_s: float = 0.2,
) -> TimeCourse:
    """Correlate injected voltage noise with the error-class score change.

    Each repeat adds per-channel Gaussian noise to every trial, runs the
    network, and records the shift of the error-class log-probability. The
    correlation across (repeat, trial) pairs between the noise value at
    (channel, sample) and that shift shows which inputs drive the decision;
    the course is smoothed over time unless ``smooth_window_s`` is None.

    ``noise_sd`` defaults to 20% of the per-channel standard deviation of
    the provided epochs.
    """
    if n_repeats < 2:
        raise ConfigError(f"need at least 2 repeats, got {n_repeats}")
    if isinstance(epochs, EpochSet):
        X = np.asarray(epochs.tensor, dtype=np.float32)
        rate = epochs.rate_hz
        t0 = epochs.window_s[0]
        names = [c.name for c in epochs.channels] if epochs.channels else None
    else:
        X = np.asarray(epochs, dtype=np.float32)
        rate, t0, names = 1.0, 0.0, None
    n, n_ch, n_samp = X.shape
    if names is None:
        names = [f"ch{c:02d}" for c in range(n_ch)]

    if noise_sd is None:
        sd = 0.2 * X.std(axis=(0, 2), dtype=np.float64)
    else:
        sd = np.broadcast_to(np.asarray(noise_sd, dtype=np.float64), (n_ch,)).copy()
    sd_col = sd.reshape(1, n_ch, 1)

    _, base_logp = predict(model, X)
    base = base_logp[:, ERROR]

    sx = np.zeros((n_ch, n_samp))
    sxx = np.zeros((n_ch, n_samp))
    sxy = np.zeros((n_ch, n_samp))
    sy = 0.0
    syy = 0.0
    count = n_repeats * n
    for r in range(n_repeats):
        rng = derive_rng(seed, "perturb", r)
        noise = (rng.standard_normal(X.shape) * sd_col).astype(np.float64)
        _, logp = predict(model, X + noise.astype(np.float32))
        delta = (logp[:, ERROR] - base).astype(np.float64)
        sx += noise.sum(axis=0)
        sxx += np.square(noise).sum(axis=0)
        sxy += np.einsum("nct,n->ct", noise, delta)
        sy += delta.sum()
        syy += np.square(delta).sum()

    var_y = count * syy - sy**2
    degenerate = var_y <= 0
    var_x = count * sxx - sx**2
    cov = count * sxy - sx * sy
    with np.errstate(divide="ignore", invalid="ignore"):
        corr = np.where(
            (var_x > 0) & (var_y > 0), cov / np.sqrt(var_x * np.maximum(var_y, 1e-300)), 0.0
        )
    corr = np.clip(corr, -1.0, 1.0)
    if smooth_window_s:
        corr = gaussian_smooth(corr, smooth_window_s, rate)
        corr = np.clip(corr, -1.0, 1.0)

    times = t0 + np.arange(n_samp) / rate
    return TimeCourse(
        window_centers_s=times,
        values=corr,
        series_names=names,
        kind="correlation",
        degenerate=bool(degenerate),
    )


def write_timecourse_csv(path, acc_course: TimeCourse, roi_of: dict = None, corr_course: TimeCourse = None) -> None:
    """Flat per-channel table: accuracy, permutation p, and correlation."""
    rows = []
    for i, name in enumerate(acc_course.series_names):
        roi = (roi_of or {}).get(name, "")
        corr_row = None
        if corr_course is not None and name in corr_course.series_names:
            corr_row = corr_course.series(name)
        for w, center in enumerate(acc_course.window_centers_s):
            corr_val = ""
            if corr_row is not None:
                j = int(np.argmin(np.abs(corr_course.window_centers_s - center)))
                corr_val = f"{corr_row[j]:.6f}"
            p_val = (
                f"{acc_course.p_perm[i, w]:.6g}" if acc_course.p_perm is not None else ""
            )
            rows.append(
                (name, roi, f"{center:.4f}", f"{acc_course.values[i, w]:.6f}", p_val, corr_val)
            )
    with open(Path(path), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["channel", "roi", "window_center_s", "acc_norm", "p_perm", "corr"])
        writer.writerows(rows)


def write_roi_course_csv(path, roi_course: TimeCourse, order: list = None) -> None:
    """Per-ROI table (mean, SEM, significance level), peak-sorted by default."""
    names = order if order is not None else peak_sort(roi_course)
    rows = []
    for name in names:
        i = roi_course.series_names.index(name)
        for w, center in enumerate(roi_course.window_centers_s):
            sem = roi_course.sem[i, w] if roi_course.sem is not None else 0.0
            sig = int(roi_course.sig_level[i, w]) if roi_course.sig_level is not None else 0
            rows.append(
                (name, f"{center:.4f}", f"{roi_course.values[i, w]:.6f}", f"{sem:.6f}", sig)
            )
    with open(Path(path), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["roi", "window_center_s", "mean", "sem", "sig_level"])
        writer.writerows(rows)
