"""Core data containers for recordings and epoched trials, plus disk I/O.

A recording on disk is a directory with two files:

* ``signal.bin`` -- little-endian 32-bit float, channel-major (all samples of
  channel 0 first, then channel 1, ...).
* ``meta.json`` -- sampling rate, channel metadata, and event markers.

Class labels are the strings "correct" and "error"; internally they are the
integer indices 0 and 1 (``CLASS_NAMES`` order). All tie-breaking rules in
this package resolve toward the lower class index, i.e. toward "correct".
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import DataError

CLASS_NAMES = ("correct", "error")
CORRECT, ERROR = 0, 1

SIGNAL_FILE = "signal.bin"
META_FILE = "meta.json"


def class_index(label: str) -> int:
    try:
        return CLASS_NAMES.index(label)
    except ValueError:
        raise DataError(f"unknown class label {label!r}; expected one of {CLASS_NAMES}")


@dataclass
class ChannelMeta:
    """Identity and location of one recording channel.

    ``contact_index`` is the ordinal position of the contact on its shaft;
    bipolar pairing happens only between contacts k and k+1 of one shaft.
    """

    name: str
    shaft_id: str
    contact_index: int
    mni: tuple[float, float, float] = (0.0, 0.0, 0.0)
    roi: str | None = None


@dataclass
class EventMarker:
    """One labeled event, in seconds from recording start."""

    time_s: float
    label: str


@dataclass
class Recording:
    """Continuous multichannel voltage recording.

    Attributes:
        data: voltage in microvolts, shape (n_channels, n_samples).
        rate_hz: sampling rate.
        channels: per-channel metadata, same order as rows of ``data``.
        events: event markers with strictly increasing times.
    """

    data: np.ndarray
    rate_hz: float
    channels: list[ChannelMeta]
    events: list[EventMarker] = field(default_factory=list)

    def __post_init__(self):
        self.data = np.asarray(self.data)
        if self.data.ndim != 2:
            raise DataError(f"recording data must be 2D, got shape {self.data.shape}")
        if self.rate_hz <= 0:
            raise DataError(f"rate_hz must be positive, got {self.rate_hz}")
        if len(self.channels) != self.data.shape[0]:
            raise DataError(
                f"{len(self.channels)} channel metadata entries for "
                f"{self.data.shape[0]} data rows"
            )
        times = [ev.time_s for ev in self.events]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise DataError("event times must be strictly increasing")
        dur = self.duration_s
        if any(not (0 <= t < dur) for t in times):
            raise DataError("event times must lie within [0, duration)")

    @property
    def n_channels(self) -> int:
        return self.data.shape[0]

    @property
    def n_samples(self) -> int:
        return self.data.shape[1]

    @property
    def duration_s(self) -> float:
        return self.data.shape[1] / self.rate_hz

    def with_data(self, data, channels=None) -> "Recording":
        """New recording with replaced signal (and optionally channels)."""
        return Recording(
            data=data,
            rate_hz=self.rate_hz,
            channels=list(self.channels if channels is None else channels),
            events=list(self.events),
        )


@dataclass
class EpochSet:
    """Event-locked trials cut from a recording.

    Attributes:
        tensor: voltage, shape (n_trials, n_channels, n_samples).
        labels: integer class per trial (indices into CLASS_NAMES).
        onsets_s: event time of each trial, chronological order preserved.
        window_s: (start, end) of the cut window relative to the event.
        rate_hz: sampling rate of the trial samples.
        channels: channel metadata carried over from the source recording.
        n_skipped: events whose window fell outside the recording.
    """

    tensor: np.ndarray
    labels: np.ndarray
    onsets_s: np.ndarray
    window_s: tuple[float, float]
    rate_hz: float
    channels: list[ChannelMeta] | None = None
    n_skipped: int = 0

    def __post_init__(self):
        self.tensor = np.asarray(self.tensor)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        self.onsets_s = np.asarray(self.onsets_s, dtype=np.float64)
        if self.tensor.ndim != 3:
            raise DataError(f"epoch tensor must be 3D, got shape {self.tensor.shape}")
        n = self.tensor.shape[0]
        if len(self.labels) != n or len(self.onsets_s) != n:
            raise DataError("labels/onsets length must match trial count")
        start, end = self.window_s
        expect = round((end - start) * self.rate_hz)
        if self.tensor.shape[2] != expect:
            raise DataError(
                f"trial length {self.tensor.shape[2]} does not match window "
                f"{self.window_s} at {self.rate_hz} Hz (expected {expect})"
            )

    @property
    def n_trials(self) -> int:
        return self.tensor.shape[0]

    @property
    def n_channels(self) -> int:
        return self.tensor.shape[1]

    @property
    def n_samples(self) -> int:
        return self.tensor.shape[2]

    def class_counts(self) -> dict[str, int]:
        return {
            name: int(np.sum(self.labels == i)) for i, name in enumerate(CLASS_NAMES)
        }

    def select(self, idx) -> "EpochSet":
        """Subset of trials by index array; chronological order is the caller's duty."""
        idx = np.asarray(idx)
        return replace(
            self,
            tensor=self.tensor[idx],
            labels=self.labels[idx],
            onsets_s=self.onsets_s[idx],
        )

    def narrow_channel(self, channel: int) -> "EpochSet":
        """Single-channel view; keeps the matching metadata entry."""
        if not 0 <= channel < self.n_channels:
            raise DataError(
                f"channel {channel} out of range for {self.n_channels} channels"
            )
        chans = [self.channels[channel]] if self.channels else None
        return replace(
            self, tensor=self.tensor[:, channel : channel + 1, :], channels=chans
        )


def save_recording(rec: Recording, out_dir) -> None:
    """Write a recording in the on-disk directory format."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    np.ascontiguousarray(rec.data, dtype="<f4").tofile(out / SIGNAL_FILE)
    meta = {
        "rate_hz": rec.rate_hz,
        "n_samples": rec.n_samples,
        "channels": [
            {
                "name": ch.name,
                "shaft_id": ch.shaft_id,
                "contact_index": ch.contact_index,
                "mni": list(ch.mni),
                "roi": ch.roi,
            }
            for ch in rec.channels
        ],
        "events": [{"time_s": ev.time_s, "label": ev.label} for ev in rec.events],
    }
    write_json(out / META_FILE, meta)


def load_recording(in_dir) -> Recording:
    """Read a recording from the on-disk directory format."""
    src = Path(in_dir)
    meta_path = src / META_FILE
    sig_path = src / SIGNAL_FILE
    if not meta_path.is_file():
        raise DataError(f"missing {META_FILE} in {src}")
    if not sig_path.is_file():
        raise DataError(f"missing {SIGNAL_FILE} in {src}")
    try:
        meta = json.loads(meta_path.read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"malformed {meta_path}: {exc}") from exc

    channels = [
        ChannelMeta(
            name=c["name"],
            shaft_id=c["shaft_id"],
            contact_index=int(c["contact_index"]),
            mni=tuple(float(v) for v in c["mni"]),
            roi=c.get("roi"),
        )
        for c in meta["channels"]
    ]
    raw = np.fromfile(sig_path, dtype="<f4")
    n_ch = len(channels)
    if n_ch == 0 or raw.size % n_ch != 0:
        raise DataError(
            f"{sig_path} holds {raw.size} samples, not divisible into "
            f"{n_ch} channels"
        )
    data = raw.reshape(n_ch, raw.size // n_ch).astype(np.float64)
    n_samples = meta.get("n_samples")
    if n_samples is not None and data.shape[1] != n_samples:
        raise DataError(
            f"{sig_path}: expected {n_samples} samples per channel, "
            f"found {data.shape[1]}"
        )
    events = [EventMarker(float(e["time_s"]), str(e["label"])) for e in meta["events"]]
    return Recording(data=data, rate_hz=float(meta["rate_hz"]), channels=channels, events=events)


def write_json(path, obj) -> None:
    """Write JSON with a stable byte layout (sorted keys, fixed separators)."""
    text = json.dumps(obj, indent=2, sort_keys=True)
    Path(path).write_text(text + "\n")
