"""Regularized LDA against an independent shrinkage-estimator transcription."""

import numpy as np
import pytest

from errdecode.data import CORRECT, ERROR, EpochSet
from errdecode.errors import DataError, NumericalError
from errdecode.rlda import (
    RldaModel,
    ledoit_wolf_cov,
    load_rlda,
    rlda_fit,
    rlda_predict,
    rlda_score,
    save_rlda,
)


def naive_shrinkage(X):
    """Definitional route: explicit outer products and Frobenius distances.

    Shrinks the biased sample covariance toward nu*I with the closed-form
    optimal intensity; written as the textbook formulas, one sample at a
    time, as an oracle for the vectorized implementation.
    """
    X = np.asarray(X, dtype=np.float64)
    n, p = X.shape
    xc = X - X.mean(axis=0)
    S = np.zeros((p, p))
    for i in range(n):
        S += np.outer(xc[i], xc[i])
    S /= n
    nu = np.trace(S) / p
    d2 = np.sum((S - nu * np.eye(p)) ** 2) / p
    if d2 <= 0:
        return S, 0.0
    b2 = 0.0
    for i in range(n):
        b2 += np.sum((np.outer(xc[i], xc[i]) - S) ** 2)
    b2 /= n**2 * p
    gamma = min(b2, d2) / d2
    return (1 - gamma) * S + gamma * nu * np.eye(p), gamma


def two_blob_epochs(n_per_class=30, n_channels=2, n_samples=10, sep=4.0, seed=0):
    rng = np.random.default_rng(seed)
    n = 2 * n_per_class
    labels = np.arange(n) % 2
    x = rng.standard_normal((n, n_channels, n_samples))
    x[labels == ERROR] += sep
    return EpochSet(
        tensor=x,
        labels=labels,
        onsets_s=np.arange(n, dtype=float),
        window_s=(0.0, n_samples / 250.0),
        rate_hz=250.0,
    )


class TestShrinkageEstimator:
    def test_matches_naive_transcription(self):
        rng = np.random.default_rng(42)
        for _ in range(25):
            n = int(rng.integers(3, 60))
            p = int(rng.integers(2, 20))
            X = rng.standard_normal((n, p)) @ rng.standard_normal((p, p))
            sigma, gamma = ledoit_wolf_cov(X)
            sigma_ref, gamma_ref = naive_shrinkage(X)
            assert abs(gamma - gamma_ref) < 1e-10
            assert np.max(np.abs(sigma - sigma_ref)) < 1e-10

    def test_intensity_in_unit_interval(self):
        rng = np.random.default_rng(0)
        for seed in range(10):
            X = np.random.default_rng(seed).standard_normal((15, 6))
            _, gamma = ledoit_wolf_cov(X)
            assert 0.0 <= gamma <= 1.0

    def test_anisotropic_many_samples_shrink_little(self):
        """With abundant data and a non-spherical truth, shrinkage vanishes."""
        rng = np.random.default_rng(1)
        mix = np.diag([3.0, 1.0, 0.3, 0.1])
        X = rng.standard_normal((5000, 4)) @ mix
        _, gamma = ledoit_wolf_cov(X)
        assert gamma < 0.01

    def test_spherical_truth_shrinks_heavily(self):
        """When the population covariance IS a scaled identity, shrinking
        toward it is optimal even with many samples."""
        X = np.random.default_rng(1).standard_normal((5000, 4))
        _, gamma = ledoit_wolf_cov(X)
        assert gamma > 0.3

    def test_two_points_have_coincident_outer_products(self):
        # centering n=2 makes both deviation outer products equal, so the
        # estimated sample dispersion (and hence gamma) is exactly zero
        X = np.array([[1.0, 0.0, 2.0], [-1.0, 1.0, 0.0]])
        _, gamma = ledoit_wolf_cov(X)
        assert gamma == 0.0

    def test_output_symmetric(self):
        X = np.random.default_rng(3).standard_normal((20, 5))
        sigma, _ = ledoit_wolf_cov(X)
        assert np.array_equal(sigma, sigma.T)

    def test_single_sample_rejected(self):
        with pytest.raises(DataError):
            ledoit_wolf_cov(np.ones((1, 3)))

    def test_zero_data_rejected(self):
        with pytest.raises(DataError):
            ledoit_wolf_cov(np.zeros((5, 3)))


class TestFit:
    def test_separable_blobs_classified(self):
        ep = two_blob_epochs()
        model = rlda_fit(ep)
        preds, scores = rlda_predict(model, ep)
        assert np.array_equal(preds, ep.labels)
        assert np.all(scores[ep.labels == ERROR] > 0)

    def test_single_trial_per_class_full_shrinkage(self):
        """With one trial per class the boundary reduces to the mean difference."""
        ep = two_blob_epochs(n_per_class=1, n_channels=1, n_samples=3)
        model = rlda_fit(ep, gamma=1.0)
        diff = model.mu_error - model.mu_correct
        cos = model.w @ diff / (np.linalg.norm(model.w) * np.linalg.norm(diff))
        assert cos == pytest.approx(1.0, abs=1e-9)

    def test_score_sign_symmetric_at_midpoint(self):
        # class means are stored standardized; map the midpoint back to
        # raw feature space before scoring
        ep = two_blob_epochs()
        model = rlda_fit(ep)
        mid = (model.mu_correct + model.mu_error) / 2
        raw = mid * model.feat_sd + model.feat_mean
        assert rlda_score(model, raw[None, :]) == pytest.approx(0.0, abs=1e-9)

    def test_feature_scaling_invariance(self):
        """Per-feature standardization cancels any per-feature rescaling."""
        ep = two_blob_epochs(seed=5)
        scaled = EpochSet(
            tensor=ep.tensor * np.array([1000.0, 0.01])[None, :, None],
            labels=ep.labels,
            onsets_s=ep.onsets_s,
            window_s=ep.window_s,
            rate_hz=ep.rate_hz,
        )
        pa, sa = rlda_predict(rlda_fit(ep), ep)
        pb, sb = rlda_predict(rlda_fit(scaled), scaled)
        assert np.array_equal(pa, pb)
        assert np.allclose(sa, sb, atol=1e-6)

    def test_constant_feature_survives(self):
        ep = two_blob_epochs(seed=6)
        ep.tensor[:, 0, 0] = 7.0
        model = rlda_fit(ep)
        preds, _ = rlda_predict(model, ep)
        assert np.mean(preds == ep.labels) > 0.9

    def test_forced_gamma_recorded(self):
        model = rlda_fit(two_blob_epochs(), gamma=0.4)
        assert model.gamma == 0.4

    def test_single_class_rejected(self):
        ep = two_blob_epochs()
        ep.labels[:] = CORRECT
        with pytest.raises(DataError):
            rlda_fit(ep)

    def test_nonfinite_data_rejected(self):
        ep = two_blob_epochs()
        ep.tensor[0, 0, 0] = np.nan
        with pytest.raises((DataError, NumericalError)):
            rlda_fit(ep)

    def test_zero_score_predicts_correct(self):
        model = rlda_fit(two_blob_epochs())
        x = np.zeros((1, model.n_features))
        feats = x * model.feat_sd + model.feat_mean
        score = rlda_score(model, feats)
        labels, _ = rlda_predict(model, feats)
        if score[0] == 0.0:
            assert labels[0] == CORRECT


class TestPersistence:
    def test_roundtrip(self, tmp_path):
        model = rlda_fit(two_blob_epochs())
        save_rlda(model, tmp_path / "rlda.json")
        clone = load_rlda(tmp_path / "rlda.json")
        x = np.random.default_rng(0).standard_normal((4, 2, 10))
        pa, sa = rlda_predict(model, x)
        pb, sb = rlda_predict(clone, x)
        assert np.array_equal(pa, pb)
        assert np.allclose(sa, sb, atol=1e-12)

    def test_missing_file_rejected(self, tmp_path):
        with pytest.raises(DataError):
            load_rlda(tmp_path / "nothing.json")
