"""Deterministic preprocessing: bipolar montage, resampling, epoching, splits.

All functions are pure with respect to their inputs; nothing here touches
global state, so concurrent calls on disjoint recordings are safe.
"""

from __future__ import annotations

import logging
import math
from fractions import Fraction

import numpy as np
from scipy import signal as spsignal

from .data import ChannelMeta, EpochSet, Recording, class_index
from .errors import ConfigError, DataError
from .rng import derive_rng

log = logging.getLogger(__name__)

# Anti-alias FIR design: windowed sinc, Kaiser window, cutoff below the new
# Nyquist. beta 8.6 keeps passband ripple around 1e-4.
_KAISER_BETA = 8.6
_CUTOFF_FRACTION = 0.45  # of the target rate
_HALF_TAPS_PER_PHASE = 10


def bipolar_rereference(rec: Recording) -> Recording:
    """Re-reference each shaft to its neighboring-contact differences.

    Each output channel is contact[k+1] - contact[k] for consecutive contacts
    on one shaft; its metadata carries the midpoint MNI coordinate. Shafts
    with a single contact produce no pairs and are dropped with a warning.
    """
    if rec.n_channels == 0:
        raise DataError("cannot re-reference an empty recording")

    by_shaft: dict[str, list[tuple[int, ChannelMeta]]] = {}
    for row, ch in enumerate(rec.channels):
        by_shaft.setdefault(ch.shaft_id, []).append((row, ch))

    rows = []
    metas = []
    dropped = []
    for shaft_id, members in by_shaft.items():
        members.sort(key=lambda m: m[1].contact_index)
        indices = [ch.contact_index for _, ch in members]
        if len(set(indices)) != len(indices):
            raise DataError(f"duplicate contact_index on shaft {shaft_id!r}")
        n_pairs = 0
        for (row_a, a), (row_b, b) in zip(members, members[1:]):
            if b.contact_index != a.contact_index + 1:
                continue  # gap in the shaft: no pair across it
            rows.append(rec.data[row_b] - rec.data[row_a])
            mni = tuple((x + y) / 2.0 for x, y in zip(a.mni, b.mni))
            metas.append(
                ChannelMeta(
                    name=f"{b.name}-{a.name}",
                    shaft_id=shaft_id,
                    contact_index=a.contact_index,
                    mni=mni,
                    roi=None,
                )
            )
            n_pairs += 1
        if n_pairs == 0:
            dropped.append(shaft_id)

    if dropped:
        log.warning(
            "dropped %d shaft(s) without a bipolar pair: %s",
            len(dropped), ", ".join(sorted(dropped)),
        )
    if not rows:
        raise DataError("no bipolar pairs could be formed")
    return rec.with_data(np.stack(rows), channels=metas)


def design_antialias_fir(rate_hz: float, target_hz: float) -> tuple[np.ndarray, int, int]:
    """Kaiser-windowed sinc low-pass for rational resampling rate->target.

    Returns (taps, up, down) where taps are designed at the upsampled rate
    ``rate_hz * up``.
    """
    ratio = Fraction(target_hz / rate_hz).limit_denominator(1000)
    up, down = ratio.numerator, ratio.denominator
    max_rate = max(up, down)
    half = _HALF_TAPS_PER_PHASE * max_rate
    taps = spsignal.firwin(
        2 * half + 1,
        _CUTOFF_FRACTION * target_hz,
        window=("kaiser", _KAISER_BETA),
        fs=rate_hz * up,
    )
    return taps, up, down


def resample_signal(data: np.ndarray, rate_hz: float, target_hz: float) -> np.ndarray:
    """Resample along the last axis; output length is round(n * target/rate)."""
    if target_hz <= 0:
        raise ConfigError(f"target rate must be positive, got {target_hz}")
    if target_hz > rate_hz:
        raise ConfigError(
            f"upsampling ({rate_hz} -> {target_hz} Hz) is not supported"
        )
    if target_hz == rate_hz:
        return np.array(data, copy=True)
    taps, up, down = design_antialias_fir(rate_hz, target_hz)
    out = spsignal.resample_poly(data, up, down, axis=-1, window=taps)
    n_out = round(data.shape[-1] * target_hz / rate_hz)
    return out[..., :n_out]


def resample(rec: Recording, target_hz: float) -> Recording:
    """Anti-aliased resampling of a recording; event times stay in seconds."""
    out = resample_signal(rec.data, rec.rate_hz, target_hz)
    return Recording(
        data=out,
        rate_hz=float(target_hz),
        channels=list(rec.channels),
        events=list(rec.events),
    )


def epoch_extract(rec: Recording, window_s: tuple[float, float]) -> EpochSet:
    """Cut one trial per event whose full window lies inside the recording.

    Out-of-bounds events are skipped (never zero-padded) and counted in the
    returned set's ``n_skipped``.
    """
    start, end = window_s
    if not start < end:
        raise ConfigError(f"window start must precede end, got {window_s}")
    n_win = round((end - start) * rec.rate_hz)
    trials, labels, onsets = [], [], []
    n_skipped = 0
    for ev in rec.events:
        i0 = round((ev.time_s + start) * rec.rate_hz)
        if i0 < 0 or i0 + n_win > rec.n_samples:
            n_skipped += 1
            continue
        trials.append(rec.data[:, i0 : i0 + n_win])
        labels.append(class_index(ev.label))
        onsets.append(ev.time_s)
    if n_skipped:
        log.info("epoch_extract: skipped %d out-of-bounds event(s)", n_skipped)
    if not trials:
        raise DataError("no event had a full window inside the recording")
    return EpochSet(
        tensor=np.stack(trials),
        labels=np.array(labels),
        onsets_s=np.array(onsets),
        window_s=(float(start), float(end)),
        rate_hz=rec.rate_hz,
        channels=list(rec.channels),
        n_skipped=n_skipped,
    )


def chronological_split(ep: EpochSet, train_frac: float) -> tuple[EpochSet, EpochSet]:
    """First floor(n * train_frac) trials for training, the rest for evaluation."""
    if not 0 < train_frac < 1:
        raise ConfigError(f"train_frac must be in (0, 1), got {train_frac}")
    if np.any(np.diff(ep.onsets_s) < 0):
        raise DataError("trials must be sorted chronologically before splitting")
    # +1e-9 guards against 0.6*n landing just below the exact product
    n_train = int(math.floor(ep.n_trials * train_frac + 1e-9))
    if n_train == 0 or n_train == ep.n_trials:
        raise DataError(
            f"split of {ep.n_trials} trials at {train_frac} leaves one side empty"
        )
    idx = np.arange(ep.n_trials)
    return ep.select(idx[:n_train]), ep.select(idx[n_train:])


def subsample_balance(ep: EpochSet, seed: int) -> EpochSet:
    """Equalize class counts by keeping the nearest majority trial per minority trial.

    Walking the minority class chronologically, each trial claims the
    temporally nearest still-unclaimed majority trial; exact distance ties
    are broken by a seeded coin flip. Output trials keep chronological order.
    """
    counts = np.bincount(ep.labels, minlength=2)
    if counts.min() == 0:
        raise DataError("subsample_balance needs both classes present")
    minority = int(np.argmin(counts))  # error class on a tie-free imbalance
    majority = 1 - minority

    rng = derive_rng(seed, "subsample")
    min_idx = np.flatnonzero(ep.labels == minority)
    maj_idx = np.flatnonzero(ep.labels == majority)
    unclaimed = list(maj_idx)
    kept = list(min_idx)
    for i in min_idx:
        t = ep.onsets_s[i]
        dists = np.abs(ep.onsets_s[unclaimed] - t)
        best = np.min(dists)
        cand = [j for j, d in zip(unclaimed, dists) if d == best]
        choice = cand[0] if len(cand) == 1 else cand[rng.integers(len(cand))]
        kept.append(choice)
        unclaimed.remove(choice)
    kept.sort()
    return ep.select(np.array(kept))
