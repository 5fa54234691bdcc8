"""Training the convolutional decoder on one synthetic channel.

Fits the four-block network to the frontal channel of the default
synthetic dataset and prints the loss/accuracy trajectory plus the final
held-out normalized accuracy. The epoch budget here is a fraction of the
full run, enough to watch convergence without the wait.
"""

import numpy as np

from errdecode.metrics import acc_norm, confusion
from errdecode.nn.models import build_deep4
from errdecode.nn.training import TrainConfig, predict, train
from errdecode.pipeline import RunConfig, prepare_epochs
from errdecode.preprocess import chronological_split


def main():
    cfg = RunConfig(synth={}, seed=0)
    ep, name = prepare_epochs(cfg)
    ep = ep.narrow_channel(0)
    train_ep, eval_ep = chronological_split(ep, 0.6)
    print(f"dataset {name}: {train_ep.n_trials} train / {eval_ep.n_trials} eval trials, "
          f"{ep.n_samples} samples per trial")

    model = build_deep4(1, ep.n_samples, seed=0)
    n_params = sum(arr.size for _, _, arr in model.parameters())
    print(f"network: {len(model.modules)} layers, {n_params} parameters")

    tc = TrainConfig(max_epochs=60, batch_size=32, seed=0, balanced_batches=True)
    model, history = train(model, train_ep, tc)
    for h in history[::10] + [history[-1]]:
        print(f"  epoch {h['epoch']:>3}  loss {h['loss']:.4f}  "
              f"train acc {h['accuracy']:.3f}  lr {h['lr']:.2e}")

    preds, logp = predict(model, eval_ep)
    cm = confusion(preds, eval_ep.labels)
    print(f"eval acc_norm {acc_norm(cm):.3f}")
    print(f"confusion (rows true, cols predicted):\n{cm.counts}")


if __name__ == "__main__":
    main()
