"""Preprocessing chain on a handmade depth recording.

Builds a two-shaft recording at 500 Hz and walks it through the full
chain: bipolar re-referencing between neighboring contacts, anti-aliased
resampling to 250 Hz, event-locked epoching, the chronological train/eval
split, and subsample balancing of the training half.
"""

import numpy as np

from errdecode.data import ChannelMeta, EventMarker, Recording
from errdecode.preprocess import (
    bipolar_rereference,
    chronological_split,
    epoch_extract,
    resample,
    subsample_balance,
)
from errdecode.rng import derive_rng


def build_recording(rate_hz=500.0, duration_s=120.0):
    """Two shafts (3 + 2 contacts) with a shared artifact and per-contact noise."""
    rng = derive_rng(7)
    n = round(duration_s * rate_hz)
    channels = [
        ChannelMeta("A1", "A", 1), ChannelMeta("A2", "A", 2), ChannelMeta("A3", "A", 3),
        ChannelMeta("B1", "B", 1), ChannelMeta("B2", "B", 2),
    ]
    # common-mode artifact is identical on every contact; bipolar pairs cancel it
    artifact = 50.0 * np.sin(2 * np.pi * 0.7 * np.arange(n) / rate_hz)
    data = artifact + 10.0 * rng.standard_normal((len(channels), n))
    times = np.arange(2.0, duration_s - 2.0, 2.5)
    labels = ["error" if i % 4 == 0 else "correct" for i in range(len(times))]
    events = [EventMarker(float(t), lab) for t, lab in zip(times, labels)]
    return Recording(data.astype(np.float32), rate_hz, channels, events)


def main():
    rec = build_recording()
    print(f"raw: {rec.data.shape[0]} contacts at {rec.rate_hz:g} Hz, "
          f"common-mode std {rec.data.mean(axis=0).std():.1f} uV")

    bp = bipolar_rereference(rec)
    names = [ch.name for ch in bp.channels]
    print(f"bipolar: {bp.data.shape[0]} derivations {names}")
    print(f"  common-mode std after referencing {bp.data.mean(axis=0).std():.1f} uV")

    rs = resample(bp, 250.0)
    print(f"resampled: {rs.rate_hz:g} Hz, {rs.data.shape[1]} samples "
          f"(from {bp.data.shape[1]})")

    ep = epoch_extract(rs, (-0.5, 1.5))
    print(f"epochs: {ep.tensor.shape} (trials, channels, samples), "
          f"{ep.n_skipped} events skipped, counts {ep.class_counts()}")

    train_ep, eval_ep = chronological_split(ep, 0.6)
    print(f"split: {train_ep.n_trials} train / {eval_ep.n_trials} eval, "
          f"last train onset {train_ep.onsets_s[-1]:.1f} s "
          f"< first eval onset {eval_ep.onsets_s[0]:.1f} s")

    balanced = subsample_balance(train_ep, seed=0)
    print(f"balanced train: {balanced.class_counts()} (from {train_ep.class_counts()})")


if __name__ == "__main__":
    main()
