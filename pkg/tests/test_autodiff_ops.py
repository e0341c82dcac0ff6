import numpy as np
import pytest

from jmie import autodiff as ad
from conftest import assert_close, check_gradients, finite_difference

FD_RTOL = 1e-6


def leaf(rng, *shape):
    return ad.parameter(rng.uniform(-1.0, 1.0, size=shape))


def scalarizer(rng, shape):
    """Fixed random weights collapsing a tensor of ``shape`` to a scalar."""
    w = ad.constant(rng.uniform(-1.0, 1.0, size=shape))
    return lambda t: ad.tsum(ad.mul(t, w))


# ---------------------------------------------------------------- forward


def test_softmax_of_zeros_is_uniform():
    p = ad.softmax(ad.constant([0.0, 0.0, 0.0]), axis=0)
    np.testing.assert_allclose(p.data, [1 / 3] * 3, atol=1e-15)


def test_softmax_rows_sum_to_one(rng):
    x = ad.constant(rng.uniform(-5, 5, size=(6, 5)))
    p = ad.softmax(x, axis=1)
    assert (p.data >= 0).all()
    np.testing.assert_allclose(p.data.sum(axis=1), 1.0, atol=1e-12)


def test_masked_softmax_zeroes_masked_positions(rng):
    x = ad.constant(rng.uniform(-2, 2, size=(4, 5)))
    mask = (rng.random((4, 5)) > 0.4).astype(float)
    mask[:, 0] = 1.0
    p = ad.softmax(x, axis=1, mask=mask)
    assert (p.data[mask == 0] == 0).all()
    np.testing.assert_allclose(p.data.sum(axis=1), 1.0, atol=1e-12)


def test_logsumexp_of_singleton_is_identity():
    for a in (-3.7, 0.0, 11.25):
        out = ad.logsumexp(ad.constant([a]), axis=0)
        assert out.item() == pytest.approx(a, abs=1e-12)


def test_logsumexp_matches_naive(rng):
    x = rng.uniform(-3, 3, size=(4, 6))
    out = ad.logsumexp(ad.constant(x), axis=1)
    np.testing.assert_allclose(out.data, np.log(np.exp(x).sum(axis=1)), atol=1e-12)


def test_forward_is_deterministic(rng):
    x = rng.uniform(-1, 1, size=(5, 4))
    f = lambda: ad.tanh(ad.matmul(ad.constant(x), ad.constant(x.T))).data
    np.testing.assert_array_equal(f(), f())


def test_shape_mismatches_raise(rng):
    a, b = leaf(rng, 2, 3), leaf(rng, 2, 3)
    with pytest.raises(ad.ShapeMismatch):
        ad.matmul(a, b)
    with pytest.raises(ad.ShapeMismatch):
        ad.add(leaf(rng, 2, 3), leaf(rng, 3, 2))
    with pytest.raises(ad.ShapeMismatch):
        ad.mul(leaf(rng, 2, 3), leaf(rng, 2, 2))


def test_debug_checks_flag_non_finite(rng):
    ad.set_debug_checks(True)
    try:
        with pytest.raises(ad.NonFiniteValue):
            ad.scale(ad.parameter([1e308]), 1e308)
    finally:
        ad.set_debug_checks(False)


# ---------------------------------------------------------------- backward


def test_backward_of_sum_is_ones(rng):
    p = leaf(rng, 3, 4)
    with ad.Tape():
        loss = ad.tsum(p)
        ad.backward(loss)
    np.testing.assert_array_equal(p.grad, np.ones((3, 4)))


def test_backward_of_zero_scaled_loss_is_zero(rng):
    p = leaf(rng, 3)
    with ad.Tape():
        loss = ad.tsum(ad.scale(p, 0.0))
        ad.backward(loss)
    np.testing.assert_array_equal(p.grad, np.zeros(3))


def test_backward_accumulates_without_zeroing(rng):
    p = leaf(rng, 2)
    with ad.Tape():
        loss = ad.tsum(p)
        ad.backward(loss)
        ad.backward(loss)
    np.testing.assert_array_equal(p.grad, 2 * np.ones(2))


def test_non_scalar_loss_rejected(rng):
    p = leaf(rng, 2)
    with ad.Tape():
        with pytest.raises(ad.NonScalarLoss):
            ad.backward(ad.scale(p, 2.0))


def test_matmul_gradients(rng):
    a, b = leaf(rng, 4, 3), leaf(rng, 3, 5)
    s = scalarizer(rng, (4, 5))
    check_gradients(lambda: s(ad.matmul(a, b)), {"a": a, "b": b}, rtol=FD_RTOL)


def test_add_gradients_same_shape(rng):
    a, b = leaf(rng, 4, 3), leaf(rng, 4, 3)
    s = scalarizer(rng, (4, 3))
    check_gradients(lambda: s(ad.add(a, b)), {"a": a, "b": b}, rtol=FD_RTOL)


def test_add_gradients_bias_broadcast(rng):
    a, b = leaf(rng, 4, 3), leaf(rng, 3)
    s = scalarizer(rng, (4, 3))
    check_gradients(lambda: s(ad.add(a, b)), {"a": a, "b": b}, rtol=FD_RTOL)


def test_add_gradients_scalar(rng):
    a, b = leaf(rng, 4, 3), leaf(rng)
    s = scalarizer(rng, (4, 3))
    check_gradients(lambda: s(ad.add(a, b)), {"a": a, "b": b}, rtol=FD_RTOL)


def test_sub_gradients(rng):
    a, b = leaf(rng, 5), leaf(rng, 5)
    s = scalarizer(rng, (5,))
    check_gradients(lambda: s(ad.sub(a, b)), {"a": a, "b": b}, rtol=FD_RTOL)


def test_mul_gradients(rng):
    a, b = leaf(rng, 4, 4), leaf(rng, 4, 4)
    s = scalarizer(rng, (4, 4))
    check_gradients(lambda: s(ad.mul(a, b)), {"a": a, "b": b}, rtol=FD_RTOL)


def test_mul_scalar_gradients(rng):
    a, c = leaf(rng, 3, 2), leaf(rng)
    s = scalarizer(rng, (3, 2))
    check_gradients(lambda: s(ad.mul(a, c)), {"a": a, "c": c}, rtol=FD_RTOL)


def test_scale_gradients(rng):
    a = leaf(rng, 3, 3)
    s = scalarizer(rng, (3, 3))
    check_gradients(lambda: s(ad.scale(a, -1.7)), {"a": a}, rtol=FD_RTOL)


def test_tanh_gradients(rng):
    a = leaf(rng, 5, 5)
    s = scalarizer(rng, (5, 5))
    check_gradients(lambda: s(ad.tanh(a)), {"a": a}, rtol=FD_RTOL)


def test_sigmoid_gradients(rng):
    a = leaf(rng, 5, 5)
    s = scalarizer(rng, (5, 5))
    check_gradients(lambda: s(ad.sigmoid(a)), {"a": a}, rtol=FD_RTOL)


def test_concat_gradients(rng):
    a, b, c = leaf(rng, 2, 3), leaf(rng, 1, 3), leaf(rng, 3, 3)
    s0 = scalarizer(rng, (6, 3))
    check_gradients(
        lambda: s0(ad.concat([a, b, c], axis=0)), {"a": a, "b": b, "c": c}, rtol=FD_RTOL
    )
    d, e = leaf(rng, 2, 3), leaf(rng, 2, 2)
    s1 = scalarizer(rng, (2, 5))
    check_gradients(lambda: s1(ad.concat([d, e], axis=1)), {"d": d, "e": e}, rtol=FD_RTOL)


def test_narrow_gradients(rng):
    a = leaf(rng, 5, 4)
    s0 = scalarizer(rng, (3, 4))
    check_gradients(lambda: s0(ad.narrow(a, 0, 1, 3)), {"a": a}, rtol=FD_RTOL)
    s1 = scalarizer(rng, (5, 2))
    check_gradients(lambda: s1(ad.narrow(a, 1, 2, 2)), {"a": a}, rtol=FD_RTOL)


def test_transpose_gradients(rng):
    a = leaf(rng, 3, 5)
    s = scalarizer(rng, (5, 3))
    check_gradients(lambda: s(ad.transpose(a)), {"a": a}, rtol=FD_RTOL)


def test_reshape_gradients(rng):
    a = leaf(rng, 3, 4)
    s = scalarizer(rng, (12,))
    check_gradients(lambda: s(ad.reshape(a, (12,))), {"a": a}, rtol=FD_RTOL)


def test_flip_gradients(rng):
    a = leaf(rng, 4, 3)
    s = scalarizer(rng, (4, 3))
    check_gradients(lambda: s(ad.flip(a, axis=0)), {"a": a}, rtol=FD_RTOL)


def test_sum_gradients(rng):
    a = leaf(rng, 4, 5)
    check_gradients(lambda: ad.tsum(a), {"a": a}, rtol=FD_RTOL)
    s0 = scalarizer(rng, (5,))
    check_gradients(lambda: s0(ad.tsum(a, axis=0)), {"a": a}, rtol=FD_RTOL)
    s1 = scalarizer(rng, (4,))
    check_gradients(lambda: s1(ad.tsum(a, axis=1)), {"a": a}, rtol=FD_RTOL)


def test_softmax_gradients(rng):
    a = leaf(rng, 4, 5)
    s = scalarizer(rng, (4, 5))
    check_gradients(lambda: s(ad.softmax(a, axis=1)), {"a": a}, rtol=FD_RTOL)


def test_masked_softmax_gradients(rng):
    a = leaf(rng, 4, 5)
    mask = (rng.random((4, 5)) > 0.3).astype(float)
    mask[:, 2] = 1.0
    s = scalarizer(rng, (4, 5))
    check_gradients(lambda: s(ad.softmax(a, axis=1, mask=mask)), {"a": a}, rtol=FD_RTOL)


def test_log_softmax_gradients(rng):
    a = leaf(rng, 3, 5)
    s = scalarizer(rng, (3, 5))
    check_gradients(lambda: s(ad.log_softmax(a, axis=1)), {"a": a}, rtol=FD_RTOL)


def test_logsumexp_gradients(rng):
    a = leaf(rng, 4, 5)
    s0 = scalarizer(rng, (4,))
    check_gradients(lambda: s0(ad.logsumexp(a, axis=1)), {"a": a}, rtol=FD_RTOL)
    s1 = scalarizer(rng, (5,))
    check_gradients(lambda: s1(ad.logsumexp(a, axis=0)), {"a": a}, rtol=FD_RTOL)


def test_embedding_lookup_gradients(rng):
    table = leaf(rng, 5, 4)
    idx = np.array([0, 3, 3, 1])  # repeated row exercises scatter-add
    s = scalarizer(rng, (4, 4))
    check_gradients(
        lambda: s(ad.embedding_lookup(table, idx)), {"table": table}, rtol=FD_RTOL
    )


def test_dropout_gradients_with_fixed_key(rng):
    a = leaf(rng, 5, 5)
    key = (7, 3, 2)
    s = scalarizer(rng, (5, 5))
    check_gradients(
        lambda: s(ad.dropout(a, 0.4, train=True, key=key)), {"a": a}, rtol=FD_RTOL
    )


def test_dropout_mask_reproducible_and_train_flag(rng):
    a = leaf(rng, 6, 6)
    key = (11, 5, 0)
    m1 = ad.dropout(a, 0.5, train=True, key=key).data
    m2 = ad.dropout(a, 0.5, train=True, key=key).data
    np.testing.assert_array_equal(m1, m2)
    assert ad.dropout(a, 0.5, train=False, key=key) is a
    m3 = ad.dropout(a, 0.5, train=True, key=(11, 6, 0)).data
    assert not np.array_equal(m1, m3)


def test_cross_entropy_gradients(rng):
    logits = leaf(rng, 4, 5)
    targets = np.array([1, 0, 4, 2])
    check_gradients(lambda: ad.cross_entropy(logits, targets), {"logits": logits}, rtol=FD_RTOL)


def test_masked_cross_entropy_gradients(rng):
    logits = leaf(rng, 3, 5)
    targets = np.array([1, 0, 4])
    mask = np.ones((3, 5))
    mask[0, 3] = 0
    mask[2, 0] = 0
    check_gradients(
        lambda: ad.cross_entropy(logits, targets, class_mask=mask), {"logits": logits}, rtol=FD_RTOL
    )


def test_cross_entropy_rejects_masked_target(rng):
    logits = leaf(rng, 2, 3)
    mask = np.ones((2, 3))
    mask[1, 2] = 0
    with pytest.raises(ValueError):
        ad.cross_entropy(logits, np.array([0, 2]), class_mask=mask)


def test_bce_with_logits_gradients(rng):
    logits = leaf(rng, 4, 5)
    targets = (rng.random((4, 5)) > 0.5).astype(float)
    check_gradients(lambda: ad.bce_with_logits(logits, targets), {"logits": logits}, rtol=FD_RTOL)


def test_bce_matches_naive_formula(rng):
    x = rng.uniform(-3, 3, size=(6,))
    y = (rng.random(6) > 0.5).astype(float)
    got = ad.bce_with_logits(ad.constant(x), y).item()
    p = 1 / (1 + np.exp(-x))
    want = -(y * np.log(p) + (1 - y) * np.log(1 - p)).mean()
    assert got == pytest.approx(want, rel=1e-12)


def test_chained_graph_matches_finite_differences(rng):
    w1, b1 = leaf(rng, 4, 5), leaf(rng, 5)
    w2 = leaf(rng, 5, 3)
    x = ad.constant(rng.uniform(-1, 1, size=(2, 4)))
    targets = np.array([2, 0])

    def build():
        h = ad.tanh(ad.add(ad.matmul(x, w1), b1))
        return ad.cross_entropy(ad.matmul(h, w2), targets)

    check_gradients(build, {"w1": w1, "b1": b1, "w2": w2}, rtol=FD_RTOL)
