import itertools
import math

import numpy as np
import pytest

from lara.errors import DegenerateLabels, DomainError
from lara.metrics import (
    candidate_thresholds,
    confusion_metrics,
    evaluate,
    predicted_score,
    rank_sum_test,
    report_from_counts,
    roc_auc,
    roc_curve,
    write_roc_csv,
    youden_threshold,
)


def pair_auc(s, y):
    pos = [a for a, l in zip(s, y) if l]
    neg = [a for a, l in zip(s, y) if not l]
    total = sum(1.0 if p > n else 0.5 if p == n else 0.0 for p in pos for n in neg)
    return total / (len(pos) * len(neg))


def random_instance(rng, n_max):
    n = int(rng.integers(2, n_max + 1))
    y = rng.integers(0, 2, n)
    y[0], y[1] = 0, 1
    # coarse grid so ties are common
    s = rng.integers(0, 5, n) / 4.0
    return s, y


def test_auc_examples():
    assert roc_auc([0.1, 0.9], [0, 1]) == 1.0
    assert roc_auc([0.9, 0.1], [0, 1]) == 0.0
    assert roc_auc([0.5, 0.5], [0, 1]) == 0.5


def test_auc_matches_pair_counting(rng):
    for _ in range(300):
        s, y = random_instance(rng, 8)
        assert roc_auc(s, y) == pytest.approx(pair_auc(s, y), abs=1e-12)


def test_auc_equals_trapezoid_area(rng):
    s, y = random_instance(rng, 40)
    fpr, tpr, thr = roc_curve(s, y)
    assert np.trapezoid(tpr, fpr) == pytest.approx(roc_auc(s, y), abs=1e-12)
    assert thr[0] == np.inf and fpr[-1] == 1 and tpr[-1] == 1


def brute_youden(s, y):
    best, best_t = None, None
    for t in candidate_thresholds(s):
        pred = s >= t
        sens = np.mean(pred[y == 1])
        spec = np.mean(~pred[y == 0])
        j = sens + spec - 1
        if best is None or j > best + 1e-12:
            best, best_t = j, t
    return best_t


def test_youden_matches_sweep(rng):
    for _ in range(300):
        s, y = random_instance(rng, 50)
        assert youden_threshold(s, y) == brute_youden(s, y)


def test_youden_separable():
    t = youden_threshold([0.1, 0.2, 0.7, 0.9], [0, 0, 1, 1])
    assert t == pytest.approx(0.45)
    r = evaluate([0.1, 0.2, 0.7, 0.9], [0, 0, 1, 1])
    assert r.accuracy == 1 and r.f1 == 1 and r.confusion == (2, 0, 0, 2)


def test_threshold_is_inclusive():
    r = confusion_metrics([0.5, 0.4], [1, 0], 0.5)
    assert r.confusion == (1, 0, 0, 1)


def test_counts_example():
    r = report_from_counts(55, 148, 7, 1478)
    assert r.precision == pytest.approx(0.2709, abs=1e-4)
    assert r.sensitivity == pytest.approx(0.8871, abs=1e-4)
    assert r.specificity == pytest.approx(1478 / 1626)
    assert r.accuracy == pytest.approx(1533 / 1688)


def test_no_positive_predictions():
    r = confusion_metrics([0.1, 0.2], [1, 0], 0.9)
    assert r.precision == 0 and r.precision_undefined
    assert "no positive predictions" in r.format()


def test_degenerate_labels():
    with pytest.raises(DegenerateLabels):
        roc_auc([0.1, 0.2], [1, 1])
    with pytest.raises(DegenerateLabels):
        youden_threshold([0.1, 0.2], [0, 0])


def test_predicted_score():
    assert predicted_score(0.01) == pytest.approx(2.0)
    assert predicted_score(1.0) == 0.0
    assert predicted_score(0.0) == pytest.approx(12.0)
    with pytest.raises(DomainError):
        predicted_score(1.5)


def exact_two_sided(a, b):
    pooled = list(a) + list(b)
    from scipy.stats import rankdata

    r = rankdata(pooled)
    n_a = len(a)
    u_obs = r[:n_a].sum() - n_a * (n_a + 1) / 2
    us = []
    for idx in itertools.combinations(range(len(pooled)), n_a):
        us.append(r[list(idx)].sum() - n_a * (n_a + 1) / 2)
    us = np.array(us)
    lo = np.mean(us <= u_obs + 1e-9)
    hi = np.mean(us >= u_obs - 1e-9)
    return u_obs, min(1.0, 2 * min(lo, hi))


def test_rank_sum_exact(rng):
    for _ in range(200):
        n = int(rng.integers(1, 5))
        a = rng.integers(0, 4, n).astype(float)
        b = rng.integers(0, 4, n).astype(float)
        u, p = rank_sum_test(a, b)
        u_ref, p_ref = exact_two_sided(a, b)
        assert u == u_ref
        assert p == pytest.approx(p_ref, abs=1e-12)


def test_rank_sum_large_samples_agree_with_scipy(rng):
    from scipy.stats import mannwhitneyu

    a, b = rng.normal(0, 1, 40), rng.normal(0.5, 1, 35)
    u, p = rank_sum_test(a, b)
    ref = mannwhitneyu(a, b, alternative="two-sided", method="asymptotic", use_continuity=True)
    assert u == ref.statistic
    assert p == pytest.approx(ref.pvalue, rel=1e-9)


def test_rank_sum_separated():
    u, p = rank_sum_test([1, 2, 3, 4], [5, 6, 7, 8])
    assert u == 0 and p == pytest.approx(2 / math.comb(8, 4))


def test_roc_csv(tmp_path):
    path = tmp_path / "roc.csv"
    write_roc_csv(path, [0.2, 0.8, 0.5], [0, 1, 1])
    lines = path.read_text().splitlines()
    assert lines[0] == "threshold,fpr,tpr" and lines[1].startswith("inf,0.0,0.0")
    assert len(lines) == 5
