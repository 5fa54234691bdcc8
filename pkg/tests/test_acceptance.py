"""Acceptance suite: nine go/no-go checks printed one line each.

Each check exercises a guarantee end to end, from gradient exactness through
byte-identical CLI reruns. Slow full-scale training lives in the one check
that needs it; everything else runs on reduced budgets that keep the whole
suite tractable while leaving the tested property intact.
"""

import json
import time
from contextlib import contextmanager

import numpy as np
import pytest
import scipy.stats

from errdecode.cli import main
from errdecode.mapping import peak_sort, roi_pool, stack_courses, sliding_window_decode
from errdecode.metrics import acc_norm, confusion
from errdecode.nn.layers import (
    ELU,
    BatchNorm,
    Conv2d,
    Dense,
    Dropout,
    LogSoftmax,
    MaxPool,
    MeanPool,
    SafeLog,
    Square,
)
from errdecode.nn.models import backward, build_deep4, forward, nll_loss
from errdecode.nn.training import TrainConfig
from errdecode.pipeline import (
    RunConfig,
    _sub_seed,
    prepare_epochs,
    run_all_channel,
    run_single_channel,
)
from errdecode.rlda import ledoit_wolf_cov
from errdecode.rng import derive_rng
from errdecode.stats import permutation_test, spearman, wilcoxon_signed_rank
from errdecode.synth import timeresolved_config

from test_nn_layers import _smooth_input, check_module, fd_scalar, max_rel_err
from test_rlda import naive_shrinkage
from test_stats import enumerate_signed_rank_p

N_CHECKS = 9


@pytest.fixture
def announce(capfd):
    @contextmanager
    def _announce(number, description):
        try:
            yield
        except BaseException:
            with capfd.disabled():
                print(f"acceptance {number}/{N_CHECKS} FAIL: {description}")
            raise
        with capfd.disabled():
            print(f"acceptance {number}/{N_CHECKS} PASS: {description}")

    return _announce


def test_gradients_match_finite_differences(announce):
    with announce(1, "all layer and composed-network gradients match finite differences"):
        start = time.monotonic()

        checks = [
            (Conv2d(2, 3, (1, 4), use_bias=True), (2, 2, 3, 9), None),
            (Conv2d(1, 4, (1, 3), use_bias=False), (3, 1, 2, 8), None),
            (Conv2d(3, 2, (4, 1), use_bias=True), (2, 3, 4, 5), None),
            (Conv2d(2, 2, (1, 3), stride=(1, 2)), (2, 2, 1, 11), None),
            (BatchNorm(3), (4, 3, 2, 6), None),
            (ELU(), (3, 2, 1, 7), None),
            (Square(), (3, 2, 1, 7), None),
            (SafeLog(), (3, 2, 1, 7), None),
            (LogSoftmax(), (5, 4), None),
            (MaxPool(3, 3), (2, 2, 1, 9), None),
            (MaxPool(3, 2), (2, 2, 1, 9), None),
            (MeanPool(3, 3), (2, 2, 1, 9), None),
            (Dropout(0.4), (3, 2, 1, 6), 17),
            (Dense(12, 3), (4, 12), None),
        ]
        for i, (mod, shape, drop_seed) in enumerate(checks):
            if hasattr(mod, "init_params"):
                mod.init_params(derive_rng(100 + i))
            x = _smooth_input(shape, seed=i)
            if isinstance(mod, SafeLog):
                x = np.abs(x) + 0.5
            check_module(mod, x, drop_seed=drop_seed, atol=1e-3)

        model = build_deep4(2, 40, filter_time_length=2, stride=2, seed=0)
        model.astype(np.float64)
        x = np.random.default_rng(0).standard_normal((3, 2, 40))
        labels = np.array([0, 1, 0])

        def loss():
            logp = forward(model, x, mode="train", rng=derive_rng(9))
            return float(nll_loss(logp, labels)[0])

        model.zero_grad()
        backward(model, x, labels, rng=derive_rng(9), mode="train")
        pick = np.random.default_rng(3)
        worst = 0.0
        for i, name, arr in model.parameters():
            grads = model.modules[i].grads[name].reshape(-1)
            idx = pick.choice(arr.size, size=min(4, arr.size), replace=False)
            num = fd_scalar(loss, arr, indices=idx)
            worst = max(worst, max(max_rel_err(grads[j], v) for j, v in num.items()))
        assert worst < 1e-3

        assert time.monotonic() - start < 60.0


def test_chance_level_is_half_under_any_imbalance(announce):
    with announce(2, "fixed predictor scores 0.5 exactly; random predictor averages near 0.5"):
        n = 1000
        for frac in (0.05, 0.20, 0.50):
            labels = (np.arange(n) < frac * n).astype(np.int64)
            for fixed in (0, 1):
                preds = np.full(n, fixed, dtype=np.int64)
                assert acc_norm(confusion(preds, labels)) == 0.5

        labels = (np.arange(n) < 0.2 * n).astype(np.int64)
        scores = [
            acc_norm(confusion(derive_rng(seed, "guess").integers(0, 2, n), labels))
            for seed in range(100)
        ]
        assert 0.48 <= np.mean(scores) <= 0.52


def test_synthetic_recovery_at_full_budget(announce, tmp_path):
    with announce(3, "default synthetic dataset: deep net >= 0.90, shrinkage LDA >= 0.80"):
        start = time.monotonic()
        deep = run_all_channel(
            RunConfig(synth={}, seed=0, classifier="deep4", epochs=1000, n_perm=2000),
            tmp_path / "deep4",
        )
        lda = run_all_channel(
            RunConfig(synth={}, seed=0, classifier="rlda", n_perm=2000),
            tmp_path / "rlda",
        )
        elapsed = time.monotonic() - start
        assert deep["pooled"]["acc_norm"] >= 0.90
        assert lda["pooled"]["acc_norm"] >= 0.80
        assert elapsed < 15 * 60


def test_informative_channels_separate_from_noise(announce, tmp_path):
    with announce(4, "planted channels outscore noise and noise stays non-significant (20 seeds)"):
        successes = 0
        for seed in range(20):
            cfg = RunConfig(synth={}, seed=seed, classifier="rlda", n_perm=2000)
            rows = run_single_channel(cfg, tmp_path / f"s{seed}")
            informative = [r for r in rows if r["roi"]]
            noise = [r for r in rows if not r["roi"]]
            assert len(informative) == 2 and len(noise) == 6
            separated = min(r["acc_norm"] for r in informative) > max(
                r["acc_norm"] for r in noise
            )
            calm = all(r["p_perm"] >= 0.01 for r in noise)
            successes += separated and calm
        assert successes >= 18


def test_sliding_windows_localize_planted_latencies(announce):
    with announce(5, "sliding-window peaks hit planted latencies within one step, in order"):
        cfg = RunConfig(synth=timeresolved_config().to_dict(), seed=0, n_perm=200)
        ep, _ = prepare_epochs(cfg)
        planted = {
            "frontal": -0.2,
            "precentral": -0.1,
            "parietal": 0.3,
            "hippocampus": 0.5,
        }
        courses = []
        for c in range(4):
            tc = TrainConfig(
                max_epochs=10,
                batch_size=64,
                seed=_sub_seed(0, "timeresolve", c),
                balanced_batches=True,
            )
            courses.append(
                sliding_window_decode(ep.narrow_channel(c), 0, train_cfg=tc, n_perm=200)
            )
        course = stack_courses(courses)
        course.series_names = [ep.channels[c].name for c in range(4)]
        pooled = roi_pool(
            course, {ep.channels[c].name: ep.channels[c].roi for c in range(4)}
        )
        for i, name in enumerate(pooled.series_names):
            peak = pooled.window_centers_s[np.argmax(pooled.values[i])]
            assert abs(peak - planted[name]) <= 0.05 + 1e-9, name
        assert peak_sort(pooled) == ["frontal", "precentral", "parietal", "hippocampus"]


def test_rank_statistics_against_oracles(announce):
    with announce(6, "signed-rank matches exhaustive enumeration; permutation false-positive rate calibrated"):
        rng = derive_rng(600)
        for case in range(1000):
            n = int(rng.integers(5, 11))
            if case % 2:
                diffs = rng.standard_normal(n)
            else:
                # integer magnitudes force ties through the midrank path
                diffs = rng.integers(1, 5, n) * np.where(rng.random(n) < 0.5, -1.0, 1.0)
            _, p = wilcoxon_signed_rank(diffs, np.zeros(n))
            assert p == pytest.approx(enumerate_signed_rank_p(diffs), abs=1e-12)

        hits = 0
        for i in range(500):
            null_rng = derive_rng(42, "null", i)
            labels = (null_rng.random(200) < 0.3).astype(np.int64)
            preds = (null_rng.random(200) < 0.5).astype(np.int64)
            hits += permutation_test(preds, labels, n_perm=1000, seed=i).p_value < 0.05
        assert 0.03 <= hits / 500 <= 0.07

        r, _ = spearman(np.array([1.0, 2.0, 3.0, 4.0]), np.array([2.0, 1.0, 4.0, 3.0]))
        assert r == pytest.approx(0.6, abs=1e-12)


def test_shrinkage_covariance_matches_direct_formulas(announce):
    with announce(7, "shrinkage covariance matches its definitional transcription on 100 draws"):
        rng = derive_rng(700)
        for _ in range(100):
            n = int(rng.integers(3, 201))
            p = int(rng.integers(2, 51))
            scales = rng.uniform(0.5, 3.0, p)
            X = rng.standard_normal((n, p)) * scales
            sigma, gamma = ledoit_wolf_cov(X)
            sigma_ref, gamma_ref = naive_shrinkage(X)
            assert abs(gamma - gamma_ref) < 1e-10
            assert np.max(np.abs(sigma - sigma_ref)) < 1e-10


def test_subsampling_equalizes_training_classes(announce, tmp_path):
    with announce(8, "subsample balancing equalizes train counts and the report regenerates"):
        base = dict(synth={}, seed=0, classifier="rlda", n_perm=200)
        run_all_channel(RunConfig(balance="class_balanced_batches", **base), tmp_path / "a")
        run_all_channel(RunConfig(balance="subsample", **base), tmp_path / "b")

        counts_a = json.loads((tmp_path / "a" / "manifest.json").read_text())[
            "derived"
        ]["train_class_counts"]
        counts_b = json.loads((tmp_path / "b" / "manifest.json").read_text())[
            "derived"
        ]["train_class_counts"]
        assert counts_a["correct"] != counts_a["error"]
        assert counts_b["correct"] == counts_b["error"]
        assert counts_b["error"] == counts_a["error"]

        for d in ("a", "b"):
            report = json.loads((tmp_path / d / "metrics.json").read_text())
            assert 0.0 <= report["pooled"]["acc_norm"] <= 1.0


def test_cli_reruns_are_byte_identical(announce, tmp_path):
    with announce(9, "every CLI run repeated from its manifest reproduces outputs byte for byte"):
        synth_cfg = tmp_path / "synth.json"
        synth_cfg.write_text(
            json.dumps(
                {
                    "n_channels": 2,
                    "duration_s": 110.0,
                    "n_events": 44,
                    "error_rate": 0.35,
                    "channel_groups": {"frontal": [0]},
                    "seed": 3,
                }
            )
        )
        runs = [
            ("synth", ["synth", "--synth", str(synth_cfg)]),
            ("single", ["single", "--synth", str(synth_cfg), "--classifier", "rlda",
                        "--n-perm", "200"]),
            ("all", ["all", "--synth", str(synth_cfg), "--classifier", "rlda",
                     "--n-perm", "200"]),
            ("timeresolve", ["timeresolve", "--synth", str(synth_cfg),
                             "--epochs", "2", "--n-perm", "200"]),
        ]
        for name, argv in runs:
            first = tmp_path / name
            again = tmp_path / (name + "_again")
            assert main(argv + ["--out", str(first)]) == 0
            code = main(
                [argv[0], "--config", str(first / "manifest.json"), "--out", str(again)]
            )
            assert code == 0
            produced = sorted(p.name for p in first.iterdir())
            assert produced == sorted(p.name for p in again.iterdir())
            for file in produced:
                assert (first / file).read_bytes() == (again / file).read_bytes(), (
                    f"{name}/{file} differs between runs"
                )
