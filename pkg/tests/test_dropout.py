import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from dropoutts.dropout import (DropoutMask, apply_ste_dropout, batch_rate_map, rate_map_backward,
                               sample_mask, sample_masks, ste_backward, ste_surrogate)
from dropoutts.errors import EmptyInputError, InvalidRateError, ShapeMismatchError
from dropoutts.kernels import stream_key
from dropoutts.spectral import ScorerParams
from oracles import central_diff, rel_err, softplus_scalar

P = ScorerParams()


def test_equal_scores_give_p_min():
    b = batch_rate_map([0.3, 0.3, 0.3], P)
    assert np.all(b.normalized == 0) and np.all(b.rates == P.p_min)


def test_min_sample_gets_p_min():
    b = batch_rate_map([0.1, 0.7, 0.4], P)
    assert b.rates[0] == 0.05


def test_max_sample_closed_form():
    b = batch_rate_map([0.0, 1.0], P)
    sp = softplus_scalar(1.0)
    assert sp == pytest.approx(1.3133, abs=1e-4)
    expected = 0.05 + 0.45 * math.tanh(sp * (1.0 / (1.0 + 1e-8)))
    assert b.rates[1] == pytest.approx(expected, abs=1e-12)
    assert b.rates[1] == pytest.approx(0.4393, abs=1e-4)


def test_empty_batch():
    with pytest.raises(EmptyInputError):
        batch_rate_map([], P)


@settings(max_examples=100, deadline=None)
@given(arrays(np.float64, st.integers(1, 40), elements=st.floats(0, 1e3)), st.floats(-5, 10))
def test_rates_bounded_and_monotone(scores, gamma):
    p = ScorerParams(gamma=gamma)
    b = batch_rate_map(scores, p)
    assert np.all(b.rates >= p.p_min) and np.all(b.rates <= p.p_max) and np.all(b.rates < 1)
    assert np.all((b.normalized >= 0) & (b.normalized <= 1))
    order = np.argsort(scores, kind="stable")
    assert np.all(np.diff(b.rates[order]) >= 0)


def test_rate_backward_zero_upstream():
    b = batch_rate_map([0.1, 0.5, 0.9], P)
    dg, ds = rate_map_backward(b, np.zeros(3), P)
    assert dg == 0.0 and np.all(ds == 0)


def _detached_rates(scores, params, lo, hi):
    s_hat = (np.asarray(scores) - lo) / (hi - lo + params.eps)
    return params.p_min + (params.p_max - params.p_min) * np.tanh(s_hat * softplus_scalar(params.gamma))


def test_rate_backward_gamma_fd():
    rng = np.random.default_rng(0)
    for _ in range(10):
        s = rng.uniform(0, 2, 16)
        g = rng.uniform(-2, 4)
        d_p = rng.normal(size=16)
        p = ScorerParams(gamma=g)
        b = batch_rate_map(s, p)
        dg, ds = rate_map_backward(b, d_p, p)
        fd = central_diff(lambda v: float(d_p @ batch_rate_map(s, ScorerParams(gamma=v)).rates), g)
        assert rel_err(dg, fd) < 1e-4
        lo, hi = s.min(), s.max()
        for i in range(16):
            def f(v, i=i):
                q = s.copy()
                q[i] = v
                return float(d_p @ _detached_rates(q, p, lo, hi))
            assert rel_err(ds[i], central_diff(f, s[i], 1e-6), floor=1e-7) < 1e-4


def test_rate_backward_equal_scores_detached():
    s = np.full(5, 0.4)
    b = batch_rate_map(s, P)
    _, ds = rate_map_backward(b, np.ones(5), P)
    # s_hat is 0 everywhere, so (1 - tanh^2) = 1 and the slope is nonzero under detached stats
    np.testing.assert_allclose(ds, 0.45 * softplus_scalar(1.0) / 1e-8)
    # perturbing one score really does move its s_hat (and p) under the detached map
    q = s.copy()
    q[2] += 1e-10
    assert _detached_rates(q, P, 0.4, 0.4)[2] > P.p_min


def test_sample_mask_edge_rates():
    assert np.all(sample_mask((50,), 0.0, 1).keep == 1)
    m = sample_mask((1000,), 0.999999, 1)
    assert m.keep.sum() <= 2
    with pytest.raises(InvalidRateError):
        sample_mask((5,), 1.0, 1)
    with pytest.raises(InvalidRateError):
        sample_mask((5,), -0.1, 1)


def test_sample_mask_binomial_ci():
    n = 10 ** 6
    m = sample_mask((n,), 0.3, 123)
    frac = m.keep.mean()
    assert abs(frac - 0.7) < 3 * math.sqrt(0.3 * 0.7 / n)


def test_sample_mask_deterministic():
    a = sample_mask((7, 9), 0.4, 42, index=3)
    b = sample_mask((7, 9), 0.4, 42, index=3)
    c = sample_mask((7, 9), 0.4, 42, index=4)
    assert a.keep.tobytes() == b.keep.tobytes()
    assert a.keep.tobytes() != c.keep.tobytes()
    assert set(np.unique(a.keep)) <= {0, 1}


def test_sample_masks_order_independent():
    keys = np.array([stream_key(5, i) for i in range(6)], dtype=np.uint64)
    rates = np.linspace(0.05, 0.5, 6)
    full = sample_masks(keys, 32, rates)
    for i in range(6):
        assert np.array_equal(sample_masks(keys[i:i + 1], 32, rates[i:i + 1])[0], full[i])


def test_stream_keys_distinct():
    keys = {stream_key(0, e, s, i) for e in range(5) for s in range(20) for i in range(32)}
    assert len(keys) == 5 * 20 * 32


def test_ste_identity_cases():
    H = np.random.default_rng(0).normal(size=(4, 6))
    ones = np.ones_like(H)
    assert np.array_equal(apply_ste_dropout(H, ones, 0.0), H)
    assert np.array_equal(apply_ste_dropout(H, np.zeros_like(H), 0.7, train=False), H)


def test_ste_shape_mismatch():
    with pytest.raises(ShapeMismatchError):
        apply_ste_dropout(np.ones((2, 3)), np.ones((3, 2)), 0.1)


def test_ste_unbiased_monte_carlo():
    H = np.random.default_rng(1).uniform(0.5, 2.0, 8)
    n = 10 ** 5
    keys = np.arange(n, dtype=np.uint64) * np.uint64(7919) + np.uint64(1)
    keep = sample_masks(keys, H.size, np.full(n, 0.4))
    mean = apply_ste_dropout(np.broadcast_to(H, keep.shape), keep, 0.4).mean(axis=0)
    assert np.all(np.abs(mean - H) < 0.01 * np.abs(H))


def test_ste_backward_exact_dH():
    rng = np.random.default_rng(2)
    H = rng.normal(size=(5, 7))
    p = rng.uniform(0.05, 0.5, 5)
    keep = (rng.random((5, 7)) > 0.3).astype(np.uint8)
    d_out = rng.normal(size=(5, 7))
    d_H, _ = ste_backward(H, keep, p, d_out)
    assert np.array_equal(d_H, d_out * keep / (1.0 - p)[:, None])


def test_ste_backward_dp_matches_surrogate_fd():
    rng = np.random.default_rng(3)
    for _ in range(10):
        H = rng.normal(size=(4, 6))
        p = rng.uniform(0.05, 0.6, 4)
        keep = (rng.random((4, 6)) > p[:, None]).astype(np.uint8)
        d_out = rng.normal(size=(4, 6))
        _, d_p = ste_backward(H, keep, p, d_out)
        for i in range(4):
            def f(v, i=i):
                q = p.copy()
                q[i] = v
                return float(np.sum(d_out * ste_surrogate(H, keep, q, p)))
            assert rel_err(d_p[i], central_diff(f, p[i], 1e-6), floor=1e-7) < 1e-3
    # surrogate forward value equals the real forward
    np.testing.assert_allclose(ste_surrogate(H, keep, p, p), apply_ste_dropout(H, keep, p))


def test_dropout_mask_type():
    m = sample_mask((3,), 0.2, 9)
    assert isinstance(m, DropoutMask) and m.p == 0.2 and m.seed == 9
    out = apply_ste_dropout(np.ones(3), m, m.p)
    assert set(np.round(out, 12)) <= {0.0, 1.25}
