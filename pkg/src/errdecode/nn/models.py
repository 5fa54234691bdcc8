"""Architecture manifests, network assembly, and checkpoint I/O.

A network is an ordered list of layer specs; the spec list is the single
source of truth for the architecture and is what gets serialized. Shapes are
propagated at build time so an input too short for the pooling cascade fails
with the offending layer named, not with a cryptic broadcast error deep in a
forward pass.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..data import write_json
from ..errors import ConfigError, DataError
from ..rng import derive_rng
from . import layers as L

LAYER_KINDS = (
    "temporal_conv",
    "spatial_conv",
    "batchnorm",
    "elu",
    "square",
    "log",
    "max_pool",
    "mean_pool",
    "dropout",
    "dense",
    "log_softmax",
)


@dataclass
class LayerSpec:
    """One layer of the architecture manifest."""

    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in LAYER_KINDS:
            raise ConfigError(f"unknown layer kind {self.kind!r}")
        p = self.params
        if p.get("filter_length", 1) < 1:
            raise ConfigError(f"filter_length must be >= 1, got {p['filter_length']}")
        if p.get("stride", 1) < 1:
            raise ConfigError(f"stride must be >= 1, got {p['stride']}")
        if p.get("pool_length", 1) < 1:
            raise ConfigError(f"pool_length must be >= 1, got {p['pool_length']}")
        if not 0 <= p.get("drop_prob", 0.0) < 1:
            raise ConfigError(f"drop_prob must lie in [0, 1), got {p['drop_prob']}")

    def to_dict(self) -> dict:
        return {"kind": self.kind, **self.params}


class NetworkModel:
    """Layer specs plus their parameterized modules and training history."""

    def __init__(self, specs, modules, input_shape, n_classes, init_seed=0):
        self.specs = list(specs)
        self.modules = list(modules)
        self.input_shape = tuple(input_shape)
        self.n_classes = int(n_classes)
        self.init_seed = int(init_seed)
        self.history = []
        self.train_config = None

    def forward(self, x, mode: str = "eval", rng=None):
        x = np.asarray(x)
        if x.ndim == 3:
            x = x[:, None, :, :]
        if x.ndim != 4 or x.shape[2:] != self.input_shape:
            raise DataError(
                f"input shape {x.shape} does not match model input "
                f"(channels, samples) = {self.input_shape}"
            )
        for mod in self.modules:
            x = mod.forward(x, mode=mode, rng=rng)
        return x

    def backward_from(self, grad):
        for mod in reversed(self.modules):
            grad = mod.backward(grad)
        return grad

    def parameters(self):
        """Yield (module_index, name, array) for every trainable tensor."""
        for i, mod in enumerate(self.modules):
            for name in mod.params:
                yield i, name, mod.params[name]

    @property
    def n_parameters(self) -> int:
        return sum(arr.size for _, _, arr in self.parameters())

    def zero_grad(self) -> None:
        for mod in self.modules:
            mod.zero_grad()

    def astype(self, dtype):
        for mod in self.modules:
            mod.astype(dtype)
        return self


def _build_module(spec: LayerSpec, in_filters, plane):
    """Instantiate one module and return it with its output (filters, plane)."""
    kind, p = spec.kind, spec.params
    ch, t = plane
    if kind == "temporal_conv":
        mod = L.Conv2d(
            in_filters,
            p["n_filters"],
            kernel=(1, p["filter_length"]),
            use_bias=p.get("use_bias", True),
        )
        return mod, p["n_filters"], (ch, t - p["filter_length"] + 1)
    if kind == "spatial_conv":
        mod = L.Conv2d(
            in_filters,
            p["n_filters"],
            kernel=(ch, 1),
            use_bias=p.get("use_bias", True),
        )
        return mod, p["n_filters"], (1, t)
    if kind == "batchnorm":
        return L.BatchNorm(in_filters), in_filters, plane
    if kind == "elu":
        return L.ELU(), in_filters, plane
    if kind == "square":
        return L.Square(), in_filters, plane
    if kind == "log":
        return L.SafeLog(), in_filters, plane
    if kind in ("max_pool", "mean_pool"):
        length, stride = p["pool_length"], p.get("stride", p["pool_length"])
        cls = L.MaxPool if kind == "max_pool" else L.MeanPool
        t_out = (t - length) // stride + 1
        return cls(length, stride), in_filters, (ch, t_out)
    if kind == "dropout":
        return L.Dropout(p.get("drop_prob", 0.5)), in_filters, plane
    if kind == "dense":
        n_in = in_filters * ch * t
        return L.Dense(n_in, p["n_units"]), p["n_units"], (1, 1)
    if kind == "log_softmax":
        return L.LogSoftmax(), in_filters, plane
    raise ConfigError(f"unknown layer kind {kind!r}")


def build_network(specs, n_channels, n_samples, n_classes, seed=0) -> NetworkModel:
    """Assemble modules from specs, checking shapes and initializing weights."""
    modules = []
    in_filters, plane = 1, (n_channels, n_samples)
    for i, spec in enumerate(specs):
        try:
            mod, in_filters, plane = _build_module(spec, in_filters, plane)
        except KeyError as exc:
            raise ConfigError(f"layer {i} ({spec.kind}): missing parameter {exc}") from exc
        if plane[0] < 1 or plane[1] < 1:
            raise ConfigError(
                f"layer {i} ({spec.kind}): output plane {plane} has no samples left; "
                "input too short for this architecture"
            )
        if hasattr(mod, "init_params"):
            mod.init_params(derive_rng(seed, "init", i))
        modules.append(mod)
    if in_filters != n_classes and specs and specs[-1].kind == "log_softmax":
        raise ConfigError(
            f"final layer width {in_filters} does not match n_classes={n_classes}"
        )
    return NetworkModel(specs, modules, (n_channels, n_samples), n_classes, seed)


def build_deep4(
    n_channels,
    n_samples,
    n_classes=2,
    filter_time_length=10,
    stride=3,
    drop_prob=0.5,
    seed=0,
) -> NetworkModel:
    """Four convolution-pool blocks with ELU activations.

    ``stride`` sets both the pooling length and the pooling stride of every
    max-pool; the reduced variant for short windows uses
    filter_time_length=2, stride=2.
    """
    specs = [
        LayerSpec("temporal_conv", {"n_filters": 25, "filter_length": filter_time_length, "use_bias": False}),
        LayerSpec("spatial_conv", {"n_filters": 25, "use_bias": False}),
        LayerSpec("batchnorm", {}),
        LayerSpec("elu", {}),
        LayerSpec("max_pool", {"pool_length": stride, "stride": stride}),
    ]
    for n_filters in (50, 100, 200):
        specs += [
            LayerSpec("dropout", {"drop_prob": drop_prob}),
            LayerSpec("temporal_conv", {"n_filters": n_filters, "filter_length": filter_time_length, "use_bias": False}),
            LayerSpec("batchnorm", {}),
            LayerSpec("elu", {}),
            LayerSpec("max_pool", {"pool_length": stride, "stride": stride}),
        ]
    specs += [
        LayerSpec("dense", {"n_units": n_classes}),
        LayerSpec("log_softmax", {}),
    ]
    return build_network(specs, n_channels, n_samples, n_classes, seed)


def build_shallow(
    n_channels,
    n_samples,
    n_classes=2,
    pool_length=75,
    pool_stride=15,
    drop_prob=0.5,
    seed=0,
) -> NetworkModel:
    """Temporal + spatial convolution, squared amplitudes, mean pool, log."""
    specs = [
        LayerSpec("temporal_conv", {"n_filters": 40, "filter_length": 25, "use_bias": False}),
        LayerSpec("spatial_conv", {"n_filters": 40, "use_bias": False}),
        LayerSpec("batchnorm", {}),
        LayerSpec("square", {}),
        LayerSpec("mean_pool", {"pool_length": pool_length, "stride": pool_stride}),
        LayerSpec("log", {}),
        LayerSpec("dropout", {"drop_prob": drop_prob}),
        LayerSpec("dense", {"n_units": n_classes}),
        LayerSpec("log_softmax", {}),
    ]
    return build_network(specs, n_channels, n_samples, n_classes, seed)


def forward(model: NetworkModel, batch, mode: str = "eval", rng=None):
    return model.forward(batch, mode=mode, rng=rng)


def nll_loss(logp, labels):
    """Mean negative log likelihood and its gradient w.r.t. logp."""
    labels = np.asarray(labels)
    n, k = logp.shape
    if labels.shape != (n,):
        raise DataError(f"labels shape {labels.shape} does not match batch {n}")
    if len(labels) and (labels.min() < 0 or labels.max() >= k):
        raise DataError(f"labels outside [0, {k})")
    loss = -float(logp[np.arange(n), labels].mean())
    grad = np.zeros_like(logp)
    grad[np.arange(n), labels] = -1.0 / n
    return loss, grad


def backward(model: NetworkModel, batch, labels, rng=None, mode: str = "train"):
    """Forward in train mode, backprop NLL; grads land in the modules."""
    logp = model.forward(batch, mode=mode, rng=rng)
    loss, grad = nll_loss(logp, labels)
    model.backward_from(grad)
    return loss


def save_model(model: NetworkModel, out_dir) -> None:
    """Write model.json (manifest) and weights.bin (float32 LE, manifest order)."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest_layers = []
    blobs = []
    for spec, mod in zip(model.specs, model.modules):
        entry = spec.to_dict()
        # list, not dict: blob order must survive sorted-key JSON output
        entry["arrays"] = []
        for name, arr in mod.arrays().items():
            entry["arrays"].append({"name": name, "shape": list(arr.shape)})
            blobs.append(arr.astype("<f4").ravel())
        manifest_layers.append(entry)
    manifest = {
        "input_shape": list(model.input_shape),
        "n_classes": model.n_classes,
        "init_seed": model.init_seed,
        "layers": manifest_layers,
        "train_config": model.train_config,
        "history": model.history,
    }
    write_json(out_dir / "model.json", manifest)
    flat = np.concatenate(blobs) if blobs else np.zeros(0, dtype="<f4")
    flat.astype("<f4").tofile(out_dir / "weights.bin")


def load_model(model_dir) -> NetworkModel:
    """Rebuild a network from model.json + weights.bin."""
    model_dir = Path(model_dir)
    try:
        manifest = json.loads((model_dir / "model.json").read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read model manifest in {model_dir}: {exc}") from exc
    specs = []
    for entry in manifest["layers"]:
        params = {k: v for k, v in entry.items() if k not in ("kind", "arrays")}
        specs.append(LayerSpec(entry["kind"], params))
    model = build_network(
        specs,
        manifest["input_shape"][0],
        manifest["input_shape"][1],
        manifest["n_classes"],
        seed=manifest.get("init_seed", 0),
    )
    weights = np.fromfile(model_dir / "weights.bin", dtype="<f4")
    pos = 0
    for entry, mod in zip(manifest["layers"], model.modules):
        for item in entry["arrays"]:
            name, shape = item["name"], item["shape"]
            size = int(np.prod(shape)) if shape else 1
            if pos + size > len(weights):
                raise DataError("weights.bin shorter than the manifest demands")
            arr = weights[pos : pos + size].reshape(shape).astype(np.float32)
            if name in mod.params:
                mod.params[name] = arr
            else:
                mod.buffers[name] = arr
            pos += size
    if pos != len(weights):
        raise DataError(
            f"weights.bin holds {len(weights)} values, manifest expects {pos}"
        )
    model.history = manifest.get("history", [])
    model.train_config = manifest.get("train_config")
    return model
