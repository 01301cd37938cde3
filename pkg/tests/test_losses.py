import math

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from mipadmm.losses import (
    LogisticData,
    LogisticLoss,
    QuadraticLoss,
    SeparableLoss,
    logistic_gradient,
    logistic_majorizer,
    logistic_value,
    lowrank_majorizer,
    zero_loss,
)


def _data(rng, N=30, n=6, sparse=False):
    B = rng.standard_normal((N, n))
    b = np.where(rng.random(N) < 0.5, -1.0, 1.0)
    return LogisticData(sp.csr_matrix(B) if sparse else B, b)


def _value_fsum(data, y):
    """Reference value with exact per-sample log1p(exp) and compensated summation."""
    B = data.features.toarray() if sp.issparse(data.features) else data.features
    terms = []
    for Bi, bi in zip(B, data.labels):
        t = -bi * (float(Bi @ y[:-1]) + y[-1])
        terms.append(t + math.log1p(math.exp(-t)) if t > 0 else math.log1p(math.exp(t)))
    return math.fsum(terms) / data.N


def test_value_against_reference_sum():
    rng = np.random.default_rng(0)
    for sparse in (False, True):
        data = _data(rng, sparse=sparse)
        for _ in range(5):
            y = 3 * rng.standard_normal(data.n + 1)
            assert logistic_value(data, y) == pytest.approx(_value_fsum(data, y), rel=1e-13)


def test_value_overflow_safe():
    data = LogisticData(np.array([[1e4], [-1e4]]), np.array([1.0, 1.0]))
    y = np.array([1.0, 0.0])
    assert np.isfinite(logistic_value(data, y))
    assert logistic_value(data, y) == pytest.approx(1e4 / 2, rel=1e-12)
    assert np.all(np.isfinite(logistic_gradient(data, y)))


@given(st.integers(0, 2 ** 31 - 1))
@settings(max_examples=30, deadline=None)
def test_gradient_finite_differences(seed):
    rng = np.random.default_rng(seed)
    data = _data(rng, N=15, n=4)
    y = rng.standard_normal(5)
    g = logistic_gradient(data, y)
    h = 1e-6
    fd = np.array([(logistic_value(data, y + h * e) - logistic_value(data, y - h * e)) / (2 * h) for e in np.eye(5)])
    assert np.allclose(g, fd, atol=1e-8)


@given(st.integers(0, 2 ** 31 - 1))
@settings(max_examples=30, deadline=None)
def test_majorization_inequality(seed):
    rng = np.random.default_rng(seed)
    data = _data(rng, N=int(rng.integers(1, 60)), n=int(rng.integers(1, 10)))
    loss = LogisticLoss(data)
    for _ in range(20):
        y, yp = 3 * rng.standard_normal((2, data.n + 1))
        hi = loss.majorized_value(y, yp)
        assert loss.value(y) <= hi + 1e-10 * max(1.0, abs(hi))


def test_majorizer_is_quarter_gram():
    rng = np.random.default_rng(1)
    data = _data(rng, N=20, n=5)
    M = logistic_majorizer(data).to_dense()
    assert np.allclose(M, data.A @ data.A.T / (4 * data.N))


def test_lowrank_majorizer_full_rank_recovers_exact():
    rng = np.random.default_rng(2)
    data = _data(rng, N=12, n=5)
    full = lowrank_majorizer(data, K=min(data.A.shape)).to_dense()
    assert np.allclose(full, logistic_majorizer(data).to_dense())
    part = lowrank_majorizer(data, K=2).to_dense()
    assert np.linalg.matrix_rank(part) == 2
    with pytest.raises(ValueError):
        lowrank_majorizer(data, K=0)


def test_logistic_data_validation():
    with pytest.raises(ValueError):
        LogisticData(np.ones((2, 2)), np.array([0.0, 1.0]))
    with pytest.raises(ValueError):
        LogisticData(np.ones((2, 2)), np.array([1.0]))
    data = LogisticData(np.array([[2.0, 0.0]]), np.array([-1.0]))
    assert np.allclose(data.A[:, 0], [2.0, 0.0, 1.0])


def test_quadratic_and_separable():
    Q = np.array([[2.0, 0.5], [0.5, 1.0]])
    q = QuadraticLoss(Q, [1.0, -1.0])
    v = np.array([0.3, -0.7])
    assert q.value(v) == pytest.approx(0.5 * v @ Q @ v + v @ [1.0, -1.0])
    assert np.allclose(q.gradient(v), Q @ v + [1.0, -1.0])
    with pytest.raises(ValueError):
        QuadraticLoss(-np.eye(2))
    sep = SeparableLoss([q, zero_loss(3)])
    w = np.arange(5.0)
    assert sep.value(w) == pytest.approx(q.value(w[:2]))
    assert np.allclose(sep.gradient(w), np.concatenate([q.gradient(w[:2]), np.zeros(3)]))
    assert np.allclose(sep.majorizer.to_dense()[:2, :2], Q)
    assert zero_loss(3).is_zero and not sep.is_zero
