"""Nonparametric statistics for decoding results.

Significance of a decoding accuracy is assessed by permuting the true labels
of the evaluation set while keeping the predictions fixed; paired comparisons
use the Wilcoxon signed-rank test (exact for small n) and monotone
associations Spearman's rank correlation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import stdtr
from scipy.stats import rankdata

from .data import write_json
from .errors import ConfigError, DataError
from .rng import derive_rng

_PERM_CHUNK = 4096
_EXACT_MAX_N = 12
QUANTILE_LEVELS = (0.01, 0.05, 0.50, 0.95, 0.99)


@dataclass
class PermutationResult:
    observed_stat: float
    n_permutations: int
    p_value: float
    null_quantiles: dict

    def __post_init__(self):
        if not 0 < self.p_value <= 1:
            raise DataError(f"p_value must lie in (0, 1], got {self.p_value}")
        if self.n_permutations < 100:
            raise ConfigError(
                f"need at least 100 permutations, got {self.n_permutations}"
            )


def _binary_acc_norm_null(preds, labels, n_perm, seed):
    """Null acc_norm values for permuted binary labels, chunked and vectorized.

    Permuting labels preserves the class counts, so each per-class TPR is an
    inner product between the fixed predictions and the permuted membership
    mask, divided by a constant.
    """
    # integer masks: boolean matmul would collapse to a logical any
    pred_err = (preds == 1).astype(np.int64)
    pred_cor = 1 - pred_err
    n_err = int((labels == 1).sum())
    n_cor = len(labels) - n_err
    null = np.empty(n_perm)
    done = 0
    chunk_idx = 0
    while done < n_perm:
        k = min(_PERM_CHUNK, n_perm - done)
        rng = derive_rng(seed, "perm", chunk_idx)
        perm = rng.permuted(
            np.tile((labels == 1).astype(np.int64), (k, 1)), axis=1
        )
        tpr_e = perm @ pred_err / n_err
        tpr_c = (1 - perm) @ pred_cor / n_cor
        null[done : done + k] = 0.5 * (tpr_c + tpr_e)
        done += k
        chunk_idx += 1
    return null


def permutation_test(preds, labels, stat=None, n_perm: int = 10_000, seed: int = 0) -> PermutationResult:
    """Label-permutation significance of a decoding statistic.

    ``stat`` is a callable (preds, labels) -> float; the default is the
    normalized accuracy. Predictions are never recomputed; only the labels
    are shuffled. p = (1 + #{permuted >= observed}) / (n_perm + 1).
    """
    from .metrics import acc_norm, confusion

    preds = np.asarray(preds, dtype=np.int64)
    labels = np.asarray(labels, dtype=np.int64)
    if preds.shape != labels.shape or preds.ndim != 1:
        raise DataError("preds and labels must be equal-length 1-D arrays")
    if n_perm < 100:
        raise ConfigError(f"need at least 100 permutations, got {n_perm}")
    classes = np.unique(labels)
    if len(classes) < 2:
        raise DataError("labels contain a single class; nothing to permute")

    if stat is None and set(classes) <= {0, 1}:
        observed = acc_norm(confusion(preds, labels))
        null = _binary_acc_norm_null(preds, labels, n_perm, seed)
    else:
        stat_fn = stat if stat is not None else (lambda p, l: acc_norm(confusion(p, l)))
        observed = float(stat_fn(preds, labels))
        null = np.empty(n_perm)
        done = 0
        chunk_idx = 0
        while done < n_perm:
            k = min(_PERM_CHUNK, n_perm - done)
            rng = derive_rng(seed, "perm", chunk_idx)
            for j in range(k):
                null[done + j] = stat_fn(preds, rng.permutation(labels))
            done += k
            chunk_idx += 1

    n_ge = int((null >= observed - 1e-12).sum())
    p = (1 + n_ge) / (n_perm + 1)
    quants = np.quantile(null, QUANTILE_LEVELS)
    return PermutationResult(
        observed_stat=float(observed),
        n_permutations=int(n_perm),
        p_value=float(p),
        null_quantiles={f"{round(q * 100)}%": float(v) for q, v in zip(QUANTILE_LEVELS, quants)},
    )


def _exact_signed_rank_p(ranks: np.ndarray, w_plus: float) -> float:
    """Two-sided p by enumerating all 2^n sign assignments.

    Midranks are half-integers, so doubling makes every rank an integer and
    the distribution of 2*W+ is a subset-sum count computed by DP.
    """
    r2 = np.rint(2 * ranks).astype(np.int64)
    total = int(r2.sum())
    counts = np.zeros(total + 1, dtype=np.float64)
    counts[0] = 1.0
    for r in r2:
        counts[r:] = counts[r:] + counts[:-r]
    n_assignments = 2.0 ** len(r2)
    w2 = int(np.rint(2 * w_plus))
    lo = min(w2, total - w2)
    hi = total - lo
    p = (counts[: lo + 1].sum() + counts[hi:].sum()) / n_assignments
    return min(1.0, float(p))


def _normal_sf(z: float) -> float:
    return 0.5 * math.erfc(z / math.sqrt(2.0))


def wilcoxon_signed_rank(x, y) -> tuple:
    """Paired two-sided Wilcoxon signed-rank test.

    Zero differences are dropped. Ties in |x - y| get midranks. Returns
    (W, p) with W = min(W+, W-); the p-value is exact (full enumeration of
    sign assignments) for n <= 12 and a tie- and continuity-corrected normal
    approximation above that.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise DataError("x and y must be equal-length 1-D arrays")
    d = x - y
    d = d[d != 0]
    if len(d) == 0:
        raise DataError("degenerate: identical samples (all differences zero)")
    if len(d) < 5:
        raise DataError(f"need at least 5 nonzero differences, got {len(d)}")
    ranks = rankdata(np.abs(d), method="average")
    w_plus = float(ranks[d > 0].sum())
    w_minus = float(ranks[d < 0].sum())
    w = min(w_plus, w_minus)
    n = len(d)
    if n <= _EXACT_MAX_N:
        p = _exact_signed_rank_p(ranks, w_plus)
    else:
        mu = n * (n + 1) / 4.0
        _, tie_counts = np.unique(ranks, return_counts=True)
        tie_term = float(((tie_counts**3 - tie_counts) / 48.0).sum())
        var = n * (n + 1) * (2 * n + 1) / 24.0 - tie_term
        if var <= 0:
            raise DataError("degenerate rank variance")
        z = (w - mu + 0.5) / math.sqrt(var)
        p = min(1.0, 2.0 * _normal_sf(-z))
    return w, p


def spearman(x, y) -> tuple:
    """Spearman rank correlation with a t-approximation p-value.

    The correlation is the Pearson correlation of midrank-transformed values.
    The p-value uses the t distribution with n - 2 degrees of freedom and is
    approximate for small n (< 10).
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1 or len(x) < 3:
        raise DataError("x and y must be equal-length 1-D arrays of length >= 3")
    rx = rankdata(x, method="average")
    ry = rankdata(y, method="average")
    if rx.std() == 0 or ry.std() == 0:
        raise DataError("zero variance in ranks; correlation undefined")
    r = float(np.corrcoef(rx, ry)[0, 1])
    n = len(x)
    if 1.0 - r * r < 1e-15:
        return (1.0 if r > 0 else -1.0), 0.0
    t = r * math.sqrt((n - 2) / (1.0 - r * r))
    p = 2.0 * float(stdtr(n - 2, -abs(t)))
    return r, min(1.0, p)


def write_stats(path, analyses: dict) -> None:
    """Write a stats.json audit record (statistic, p, method, seeds)."""
    write_json(path, analyses)
