"""Regularized linear discriminant analysis with Ledoit-Wolf shrinkage.

The linear baseline classifier: epochs are flattened to channel x sample
feature vectors, z-scored with training-set statistics, and classified by
sign(w'x + b) where w solves Sigma_hat w = mu_error - mu_correct. The
covariance estimate shrinks the empirical matrix toward a scaled identity,
Sigma_hat = (1 - gamma) S + gamma nu I with nu = trace(S)/p, using the
closed-form optimal shrinkage intensity, which keeps the solve
well-conditioned even with far fewer trials than features.

The bias places the boundary at the midpoint of the class means with no
class-prior term; evaluation is macro-averaged, so a balanced boundary is
the appropriate choice under class imbalance.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.linalg

from .data import CORRECT, ERROR, EpochSet, write_json
from .errors import DataError, NumericalError


def ledoit_wolf_cov(X: np.ndarray) -> tuple:
    """Shrunk covariance estimate and its shrinkage intensity.

    X is trials x features. S is the empirical covariance (biased, centered
    at the grand mean). The intensity gamma minimizes the expected squared
    Frobenius loss to the population covariance and is clipped to [0, 1].
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise DataError(f"X must be trials x features, got shape {X.shape}")
    if not np.isfinite(X).all():
        raise DataError("covariance input contains non-finite values")
    n, p = X.shape
    if n < 2:
        raise DataError(f"need at least 2 trials, got {n}")
    Xc = X - X.mean(axis=0)
    S = Xc.T @ Xc / n
    nu = float(np.trace(S)) / p
    if nu <= 0:
        raise DataError("degenerate data: zero empirical covariance")
    # squared deviations in the normalized Frobenius norm <A,B> = tr(AB')/p
    d2 = float((S * S).sum()) / p - nu**2
    if d2 <= 0:
        # S already proportional to the identity; shrinkage is a no-op
        return S, 0.0
    sq_norms = (Xc**2).sum(axis=1)
    b2_bar = (float((sq_norms**2).sum()) - n * float((S * S).sum())) / (n**2 * p)
    b2 = min(b2_bar, d2)
    gamma = b2 / d2
    sigma = (1.0 - gamma) * S + gamma * nu * np.eye(p)
    return sigma, float(gamma)


@dataclass
class RldaModel:
    """Fitted discriminant: weights, bias, shrinkage, and normalization."""

    w: np.ndarray
    b: float
    gamma: float
    mu_correct: np.ndarray
    mu_error: np.ndarray
    feat_mean: np.ndarray
    feat_sd: np.ndarray

    def __post_init__(self):
        self.w = np.asarray(self.w, dtype=np.float64)
        if self.w.ndim != 1:
            raise DataError("w must be a vector")
        if not 0 <= self.gamma <= 1:
            raise DataError(f"gamma must lie in [0, 1], got {self.gamma}")
        for name in ("mu_correct", "mu_error", "feat_mean", "feat_sd"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            if arr.shape != self.w.shape:
                raise DataError(f"{name} shape {arr.shape} != w shape {self.w.shape}")
            setattr(self, name, arr)

    @property
    def n_features(self) -> int:
        return len(self.w)


def _features(epochs) -> np.ndarray:
    if isinstance(epochs, EpochSet):
        X = epochs.tensor
    else:
        X = np.asarray(epochs)
    if X.ndim == 3:
        X = X.reshape(X.shape[0], -1)
    if X.ndim != 2:
        raise DataError(f"expected trials x features, got shape {X.shape}")
    X = X.astype(np.float64)
    if not np.isfinite(X).all():
        raise DataError("features contain non-finite values")
    return X


def rlda_fit(train: EpochSet, gamma: float = None) -> RldaModel:
    """Fit the discriminant on a training epoch set.

    ``gamma`` overrides the estimated shrinkage intensity when given.
    """
    X = _features(train)
    labels = np.asarray(train.labels)
    if not ((labels == CORRECT).any() and (labels == ERROR).any()):
        raise DataError("training set must contain both classes")

    feat_mean = X.mean(axis=0)
    feat_sd = X.std(axis=0)
    feat_sd = np.where(feat_sd == 0, 1.0, feat_sd)
    Z = (X - feat_mean) / feat_sd

    mu_c = Z[labels == CORRECT].mean(axis=0)
    mu_e = Z[labels == ERROR].mean(axis=0)

    if gamma is None:
        sigma, gamma = ledoit_wolf_cov(Z)
    else:
        if not 0 <= gamma <= 1:
            raise DataError(f"gamma must lie in [0, 1], got {gamma}")
        n, p = Z.shape
        if n < 2:
            raise DataError(f"need at least 2 trials, got {n}")
        Zc = Z - Z.mean(axis=0)
        S = Zc.T @ Zc / n
        nu = float(np.trace(S)) / p
        if nu <= 0:
            raise DataError("degenerate data: zero empirical covariance")
        sigma = (1.0 - gamma) * S + gamma * nu * np.eye(p)

    diff = mu_e - mu_c
    try:
        w = scipy.linalg.solve(sigma, diff, assume_a="pos")
    except (scipy.linalg.LinAlgError, np.linalg.LinAlgError) as exc:
        raise NumericalError(f"shrunk covariance is singular: {exc}") from exc
    if not np.all(np.isfinite(w)):
        raise NumericalError("non-finite discriminant weights")
    b = -0.5 * float(w @ (mu_e + mu_c))
    return RldaModel(
        w=w,
        b=b,
        gamma=float(gamma),
        mu_correct=mu_c,
        mu_error=mu_e,
        feat_mean=feat_mean,
        feat_sd=feat_sd,
    )


def rlda_score(model: RldaModel, epochs) -> np.ndarray:
    """Signed discriminant score per trial (positive favors the error class)."""
    X = _features(epochs)
    if X.shape[1] != model.n_features:
        raise DataError(
            f"feature dimension {X.shape[1]} != model dimension {model.n_features}"
        )
    Z = (X - model.feat_mean) / model.feat_sd
    return Z @ model.w + model.b


def rlda_predict(model: RldaModel, epochs) -> tuple:
    """Predicted labels and scores; a score of exactly 0 maps to correct."""
    scores = rlda_score(model, epochs)
    labels = np.where(scores > 0, ERROR, CORRECT).astype(np.int64)
    return labels, scores


def save_rlda(model: RldaModel, path) -> None:
    """Serialize the model to rlda.json."""
    payload = {
        "w": model.w.tolist(),
        "b": model.b,
        "gamma": model.gamma,
        "mu_correct": model.mu_correct.tolist(),
        "mu_error": model.mu_error.tolist(),
        "feat_mean": model.feat_mean.tolist(),
        "feat_sd": model.feat_sd.tolist(),
    }
    write_json(path, payload)


def load_rlda(path) -> RldaModel:
    try:
        payload = json.loads(Path(path).read_text())
        return RldaModel(
            w=np.array(payload["w"]),
            b=float(payload["b"]),
            gamma=float(payload["gamma"]),
            mu_correct=np.array(payload["mu_correct"]),
            mu_error=np.array(payload["mu_error"]),
            feat_mean=np.array(payload["feat_mean"]),
            feat_sd=np.array(payload["feat_sd"]),
        )
    except (OSError, json.JSONDecodeError, KeyError, ValueError) as exc:
        raise DataError(f"cannot load rLDA model from {path}: {exc}") from exc
