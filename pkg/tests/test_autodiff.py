"""Backward pass of every op against central differences in float64."""

import numpy as np
import pytest

from lara.nn import autodiff as ad
from lara.nn.autodiff import Tensor
from lara.nn.gradcheck import check_gradients, relative_error


def numeric_vs_analytic(build, arrays, seed=0, n=25):
    """Max relative error of d(sum(out * probe))/d(array) over random entries."""
    rng = np.random.default_rng(seed)
    leaves = {k: Tensor(v, requires_grad=True) for k, v in arrays.items()}
    out = build(leaves)
    probe = rng.normal(size=out.shape)
    out.backward(probe)
    analytic = {k: t.grad for k, t in leaves.items()}

    def loss():
        plain = {k: Tensor(v) for k, v in arrays.items()}
        return float(np.sum(build(plain).data * probe))

    picks = [(k, int(rng.integers(arrays[k].size))) for k in sorted(arrays) for _ in range(n)]
    return check_gradients(loss, arrays, analytic, picks, h=1e-6)


@pytest.fixture
def rng():
    return np.random.default_rng(7)


@pytest.mark.parametrize("stride,pad", [(1, 0), (1, 1), (2, 1), (2, 3), (3, 0)])
def test_conv1d(rng, stride, pad):
    x = rng.normal(size=(2, 3, 17))
    w = rng.normal(size=(4, 3, 5))
    err = numeric_vs_analytic(lambda t: ad.conv1d(t["x"], t["w"], stride, pad), {"x": x, "w": w})
    assert err < 1e-6


def test_conv1d_matches_direct_correlation(rng):
    x = rng.normal(size=(2, 3, 20))
    w = rng.normal(size=(4, 3, 5))
    out = ad.conv1d(Tensor(x), Tensor(w), stride=2, pad=2).data
    xp = np.pad(x, ((0, 0), (0, 0), (2, 2)))
    ref = np.zeros_like(out)
    for n in range(2):
        for o in range(4):
            full = sum(np.correlate(xp[n, c], w[o, c], mode="valid") for c in range(3))
            ref[n, o] = full[::2]
    assert np.allclose(out, ref, atol=1e-12)


def test_pointwise_and_reductions(rng):
    a = rng.normal(size=(3, 4, 5))
    b = rng.normal(size=(1, 4, 1))
    assert numeric_vs_analytic(lambda t: ad.add(t["a"], t["b"]), {"a": a, "b": b}) < 1e-7
    assert numeric_vs_analytic(lambda t: ad.mul(t["a"], t["b"]), {"a": a, "b": b}) < 1e-7
    assert numeric_vs_analytic(lambda t: ad.swish(t["a"]), {"a": a}) < 1e-7
    assert numeric_vs_analytic(lambda t: ad.sigmoid(t["a"]), {"a": a}) < 1e-7
    assert numeric_vs_analytic(lambda t: ad.mean(t["a"], axis=2), {"a": a}) < 1e-7
    shifted = a + np.sign(a) * 0.1  # keep away from the kink
    assert numeric_vs_analytic(lambda t: ad.relu(t["a"]), {"a": shifted}) < 1e-7


def test_linear(rng):
    x = rng.normal(size=(5, 6))
    w = rng.normal(size=(3, 6))
    b = rng.normal(size=(3,))
    assert numeric_vs_analytic(lambda t: ad.linear(t["x"], t["w"], t["b"]), {"x": x, "w": w, "b": b}) < 1e-7


@pytest.mark.parametrize("training", [True, False])
def test_batch_norm(rng, training):
    x = rng.normal(2.0, 3.0, size=(4, 3, 9))
    g = rng.uniform(0.5, 1.5, size=3)
    be = rng.normal(size=3)
    rm, rv = rng.normal(size=3), rng.uniform(0.5, 2, size=3)

    def build(t):
        return ad.batch_norm(t["x"], t["g"], t["b"], rm.copy(), rv.copy(), training, 0.9, 1e-5)

    assert numeric_vs_analytic(build, {"x": x, "g": g, "b": be}) < 1e-6


def test_batch_norm_running_stats(rng):
    x = rng.normal(5.0, 2.0, size=(4, 2, 10))
    rm, rv = np.zeros(2), np.ones(2)
    ad.batch_norm(Tensor(x), Tensor(np.ones(2)), Tensor(np.zeros(2)), rm, rv, True, 0.9, 1e-5)
    mu = x.mean(axis=(0, 2))
    var = x.var(axis=(0, 2), ddof=1)
    assert np.allclose(rm, 0.1 * mu)
    assert np.allclose(rv, 0.9 + 0.1 * var)
    before = rm.copy()
    ad.batch_norm(Tensor(x), Tensor(np.ones(2)), Tensor(np.zeros(2)), rm, rv, True, 0.9, 1e-5, update_stats=False)
    assert np.array_equal(rm, before)
    out = ad.batch_norm(Tensor(x), Tensor(np.ones(2)), Tensor(np.zeros(2)), np.zeros(2), np.ones(2), False, 0.9, 0.0)
    assert np.allclose(out.data, x)


def test_bce_with_logits(rng):
    z = rng.normal(scale=3, size=7)
    y = (rng.uniform(size=7) > 0.5).astype(float)
    loss = ad.bce_with_logits(Tensor(z), y).data
    p = 1 / (1 + np.exp(-z))
    assert loss == pytest.approx(np.mean(-(y * np.log(p) + (1 - y) * np.log(1 - p))), rel=1e-12)
    assert numeric_vs_analytic(lambda t: ad.bce_with_logits(t["z"], y), {"z": z}) < 1e-7
    # no overflow for extreme logits
    assert np.isfinite(ad.bce_with_logits(Tensor(np.array([1000.0, -1000.0])), np.array([0.0, 1.0])).data)


def test_no_graph_without_grad(rng):
    t = ad.swish(ad.conv1d(Tensor(rng.normal(size=(1, 2, 8))), Tensor(rng.normal(size=(2, 2, 3)))))
    assert t._backward is None and t._prev == ()


def test_gradients_accumulate_across_uses(rng):
    a = Tensor(rng.normal(size=(3,)), requires_grad=True)
    out = ad.add(ad.mul(a, a), a)
    out.backward(np.ones(3))
    assert np.allclose(a.grad, 2 * a.data + 1)


def test_relative_error_floor():
    assert relative_error(0.0, 0.0) == 0.0
    assert relative_error(1e-12, 0.0) == pytest.approx(1e-4)
