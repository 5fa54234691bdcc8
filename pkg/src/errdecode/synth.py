"""Synthetic intracranial recordings with planted error-related potentials.

The generator lays down 1/f-colored background noise on every channel and adds
a biphasic event-locked deflection on designated channel groups whenever an
"error" event occurs. Each group has its own latency, echoing a
frontal-to-parietal peak progression; the planted parameters come back as
ground truth so downstream decoding and mapping can be tested against a known
answer. Generation is a pure function of the config (byte-identical per seed).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import ChannelMeta, EventMarker, Recording, write_json
from .errors import ConfigError
from .rng import derive_rng

# Background noise amplitude in microvolts (the ERP amplitude is relative to
# this); events closer together than the default 2 s epoch window would make
# trials overlap their neighbors' templates.
NOISE_SD_UV = 10.0
MIN_EVENT_SPACING_S = 2.0

# Pseudo-ROI centers (MNI mm) used to place informative channels. Latencies
# echo an early-frontal / late-parietal progression; these are test fixtures,
# not claims about the brain.
PSEUDO_ROIS = {
    "frontal": ((-38.0, 26.0, 32.0), -0.2),
    "precentral": ((-38.0, -10.0, 48.0), -0.1),
    "parietal": ((-26.0, -60.0, 56.0), 0.3),
    "hippocampus": ((-28.0, -24.0, -12.0), 0.5),
}

DEFAULT_LATENCIES = {name: lat for name, (_, lat) in PSEUDO_ROIS.items()}


@dataclass
class SynthConfig:
    """Parameters of one synthetic recording.

    ``channel_groups`` maps a pseudo-ROI name to the channel indices that
    carry its planted template; channels in no group are pure noise.
    ``erp_latency_s`` gives the per-group peak latency relative to the event.
    ``snr_scale`` multiplies every planted amplitude (0 removes all signal),
    and ``correct_scale`` optionally plants a scaled-down template on correct
    events too.
    """

    n_channels: int = 8
    rate_hz: float = 250.0
    duration_s: float = 627.5
    n_events: int = 250
    error_rate: float = 0.19
    noise_exponent: float = 1.0
    erp_amplitude: float = 40.0
    erp_latency_s: dict = field(default_factory=lambda: dict(DEFAULT_LATENCIES))
    erp_width_s: float = 0.2
    snr_scale: float = 1.0
    correct_scale: float = 0.0
    channel_groups: dict = field(
        default_factory=lambda: {"frontal": [0], "precentral": [1]}
    )
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.error_rate < 1:
            raise ConfigError(f"error_rate must be in (0, 1), got {self.error_rate}")
        if self.erp_width_s <= 0:
            raise ConfigError(f"erp_width_s must be positive, got {self.erp_width_s}")
        if self.n_events < 4:
            raise ConfigError(f"need at least 4 events, got {self.n_events}")
        if self.n_channels < 1 or self.rate_hz <= 0 or self.duration_s <= 0:
            raise ConfigError("n_channels, rate_hz, duration_s must be positive")
        if self.noise_exponent < 0:
            raise ConfigError(f"noise exponent must be >= 0, got {self.noise_exponent}")
        if self.snr_scale < 0:
            raise ConfigError(f"snr_scale must be >= 0, got {self.snr_scale}")
        for group, chans in self.channel_groups.items():
            if group not in self.erp_latency_s:
                raise ConfigError(f"channel group {group!r} has no latency entry")
            bad = [c for c in chans if not 0 <= c < self.n_channels]
            if bad:
                raise ConfigError(f"group {group!r} channel indices out of range: {bad}")

    def to_dict(self) -> dict:
        return {
            "n_channels": self.n_channels,
            "rate_hz": self.rate_hz,
            "duration_s": self.duration_s,
            "n_events": self.n_events,
            "error_rate": self.error_rate,
            "noise_exponent": self.noise_exponent,
            "erp_amplitude": self.erp_amplitude,
            "erp_latency_s": dict(self.erp_latency_s),
            "erp_width_s": self.erp_width_s,
            "snr_scale": self.snr_scale,
            "correct_scale": self.correct_scale,
            "channel_groups": {k: list(v) for k, v in self.channel_groups.items()},
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SynthConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown synth config keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_json(cls, path) -> "SynthConfig":
        try:
            return cls.from_dict(json.loads(Path(path).read_text()))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read synth config {path}: {exc}") from exc


def timeresolved_config(**overrides) -> SynthConfig:
    """Config with all four pseudo-ROI groups planted, for mapping tests."""
    base = dict(
        channel_groups={
            "frontal": [0],
            "precentral": [1],
            "parietal": [2],
            "hippocampus": [3],
        },
    )
    base.update(overrides)
    return SynthConfig(**base)


def colored_noise(n_samples: int, exponent: float, seed) -> np.ndarray:
    """Zero-mean unit-variance noise with a 1/f^exponent power spectrum.

    ``seed`` may be an int or an existing Generator. Shaping happens in the
    frequency domain: white Gaussian noise is scaled per rFFT bin by
    f^(-exponent/2), with the DC bin zeroed.
    """
    if n_samples <= 1:
        raise ConfigError(f"need more than one sample, got {n_samples}")
    if exponent < 0:
        raise ConfigError(f"noise exponent must be >= 0, got {exponent}")
    rng = seed if isinstance(seed, np.random.Generator) else derive_rng(int(seed), "noise")
    white = rng.standard_normal(n_samples)
    spectrum = np.fft.rfft(white)
    freqs = np.fft.rfftfreq(n_samples)
    scale = np.zeros_like(freqs)
    scale[1:] = freqs[1:] ** (-exponent / 2.0)
    shaped = np.fft.irfft(spectrum * scale, n=n_samples)
    sd = shaped.std()
    if sd == 0:
        return shaped
    return (shaped - shaped.mean()) / sd


@dataclass
class Waveform:
    """Sampled template with its sample offset relative to the event."""

    samples: np.ndarray
    start_index: int

    @property
    def peak_index(self) -> int:
        """Sample index of the maximum, relative to the event."""
        return self.start_index + int(np.argmax(self.samples))

    def add_to(self, signal: np.ndarray, event_index: int, scale: float = 1.0) -> None:
        """Add scale * waveform into ``signal`` aligned at ``event_index``."""
        lo = event_index + self.start_index
        hi = lo + len(self.samples)
        src_lo = max(0, -lo)
        src_hi = len(self.samples) - max(0, hi - len(signal))
        if src_lo >= src_hi:
            return
        signal[max(lo, 0) : max(lo, 0) + (src_hi - src_lo)] += (
            scale * self.samples[src_lo:src_hi]
        )


def erp_template(latency_s: float, width_s: float, amplitude: float, rate_hz: float) -> Waveform:
    """Biphasic deflection: positive lobe, then a smaller negative lobe.

    The returned waveform peaks exactly at sample round(latency_s * rate_hz)
    relative to the event, has peak value ``amplitude``, and spans roughly
    three times ``width_s``.
    """
    if width_s <= 0:
        raise ConfigError(f"width_s must be positive, got {width_s}")
    start = round((latency_s - 1.5 * width_s) * rate_hz)
    stop = round((latency_s + 1.5 * width_s) * rate_hz)
    idx = np.arange(start, stop + 1)
    t = idx / rate_hz
    pos = np.exp(-0.5 * ((t - latency_s) / (width_s / 3.0)) ** 2)
    neg = -0.4 * np.exp(-0.5 * ((t - latency_s - 0.75 * width_s) / (0.4 * width_s)) ** 2)
    shape = pos + neg
    # anchor the discrete peak on the requested sample before tapering, so
    # the shift cannot push a zeroed edge back off the support
    target = round(latency_s * rate_hz)
    shift = target - (start + int(np.argmax(shape)))
    if shift > 0:
        shape = np.concatenate([np.zeros(shift), shape[:-shift]])
    elif shift < 0:
        shape = np.concatenate([shape[-shift:], np.zeros(-shift)])
    # taper to exactly zero at the support edges
    edge = max(2, round(0.25 * width_s * rate_hz))
    ramp = 0.5 * (1 - np.cos(np.pi * np.arange(edge) / edge))
    shape[:edge] *= ramp
    shape[-edge:] *= ramp[::-1]
    peak = shape.max()
    samples = shape * (amplitude / peak) if peak > 0 else np.zeros_like(shape)
    return Waveform(samples=samples, start_index=int(start))


def generate(config: SynthConfig) -> tuple[Recording, dict]:
    """Build the synthetic recording and its ground truth.

    Ground truth maps each channel to its planted latency and amplitude
    (zero for pure-noise channels) and records the label sequence.
    """
    n_samples = round(config.duration_s * config.rate_hz)
    spacing = config.duration_s / (config.n_events + 1)
    if spacing < MIN_EVENT_SPACING_S:
        raise ConfigError(
            f"event spacing {spacing:.2f}s is too dense for a "
            f"{MIN_EVENT_SPACING_S}s epoch window"
        )

    jitter_rng = derive_rng(config.seed, "synth", "jitter")
    base_times = spacing * np.arange(1, config.n_events + 1)
    times = base_times + jitter_rng.uniform(-0.1 * spacing, 0.1 * spacing, config.n_events)

    label_rng = derive_rng(config.seed, "synth", "labels")
    is_error = label_rng.random(config.n_events) < config.error_rate
    # degenerate draws would break any downstream split; force both classes
    if not is_error.any():
        is_error[-1] = True
    if is_error.all():
        is_error[0] = False

    group_of = {}
    for group, chans in config.channel_groups.items():
        for c in chans:
            group_of[c] = group

    data = np.empty((config.n_channels, n_samples))
    channels = []
    truth_channels = []
    error_indices = [round(t * config.rate_hz) for t, e in zip(times, is_error) if e]
    correct_indices = [round(t * config.rate_hz) for t, e in zip(times, is_error) if not e]
    for c in range(config.n_channels):
        noise_rng = derive_rng(config.seed, "synth", "noise", c)
        data[c] = NOISE_SD_UV * colored_noise(n_samples, config.noise_exponent, noise_rng)
        group = group_of.get(c)
        if group is None:
            mni = (150.0, 150.0 + c, 150.0)
            latency, amplitude = 0.0, 0.0
        else:
            center = PSEUDO_ROIS.get(group, ((0.0, 0.0, 0.0), 0.0))[0]
            offset = 3.0 * config.channel_groups[group].index(c)
            mni = (center[0] + offset, center[1], center[2])
            latency = float(config.erp_latency_s[group])
            amplitude = config.erp_amplitude * config.snr_scale
            if amplitude > 0:
                wave = erp_template(latency, config.erp_width_s, amplitude, config.rate_hz)
                for i in error_indices:
                    wave.add_to(data[c], i)
                if config.correct_scale > 0:
                    for i in correct_indices:
                        wave.add_to(data[c], i, scale=config.correct_scale)
        channels.append(
            ChannelMeta(
                name=f"ch{c:02d}",
                shaft_id=f"S{c:02d}",
                contact_index=0,
                mni=mni,
                roi=group,
            )
        )
        truth_channels.append(
            {
                "index": c,
                "name": f"ch{c:02d}",
                "group": group,
                "latency_s": latency,
                "amplitude": amplitude,
            }
        )

    events = [
        EventMarker(time_s=float(t), label="error" if e else "correct")
        for t, e in zip(times, is_error)
    ]
    rec = Recording(data=data, rate_hz=config.rate_hz, channels=channels, events=events)
    truth = {
        "channels": truth_channels,
        "latencies_by_group": {g: float(config.erp_latency_s[g]) for g in config.channel_groups},
        "n_error": int(is_error.sum()),
        "n_correct": int((~is_error).sum()),
    }
    return rec, truth


def save_truth(truth: dict, out_dir) -> None:
    write_json(Path(out_dir) / "truth.json", truth)
