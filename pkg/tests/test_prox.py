import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from helpers import fused_qp_oracle
from mipadmm.prox import (
    FusedLassoProx,
    GroupL2BallIndicator,
    L1Prox,
    LinfBallIndicator,
    NonnegIndicator,
    SeparableProx,
    TV1DProx,
    ZeroProx,
    fused_lasso_certificate,
    fused_lasso_prox,
    project_group_l2_ball,
    project_linf_ball,
    project_nonneg,
    soft_threshold,
    tv1d_certificate,
    tv1d_prox,
)

finite = st.floats(-50, 50, allow_nan=False, allow_infinity=False)
vectors = st.integers(1, 40).flatmap(lambda n: arrays(np.float64, n, elements=finite))
lams = st.floats(0.0, 20.0, allow_nan=False)


def _tv_objective(z, v, lam):
    return lam * np.abs(np.diff(z)).sum() + 0.5 * np.sum((z - v) ** 2)


@given(vectors, lams)
@settings(max_examples=200, deadline=None)
def test_tv1d_chain_certificate(v, lam):
    z = tv1d_prox(v, lam)
    scale = max(1.0, np.abs(v).max(), lam)
    assert tv1d_certificate(v, z, lam) <= 1e-10 * scale * v.size


@given(vectors, lams, lams)
@settings(max_examples=200, deadline=None)
def test_fused_certificate_and_composition(v, lam1, lam2):
    z = fused_lasso_prox(v, lam1, lam2)
    assert np.array_equal(z, soft_threshold(tv1d_prox(v, lam2), lam1))
    scale = max(1.0, np.abs(v).max(), lam1, lam2)
    assert fused_lasso_certificate(v, z, lam1, lam2) <= 1e-10 * scale * v.size


def test_certificate_rejects_wrong_answers():
    v = np.array([3.0, -1.0, 2.0, 2.5, 0.0])
    z = tv1d_prox(v, 0.7)
    assert tv1d_certificate(v, z + 0.01, 0.7) > 1e-3
    assert tv1d_certificate(v, v, 0.7) > 1e-3
    zf = fused_lasso_prox(v, 0.3, 0.7)
    assert fused_lasso_certificate(v, zf * 1.01, 0.3, 0.7) > 1e-4


@given(st.integers(0, 2 ** 31 - 1))
@settings(max_examples=60, deadline=None)
def test_fused_prox_matches_qp_oracle(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 13))
    v = 3 * rng.standard_normal(n)
    lam1, lam2 = rng.random(2) * 2
    assert np.allclose(fused_lasso_prox(v, lam1, lam2), fused_qp_oracle(v, lam1, lam2), atol=1e-8)


def test_tv1d_small_cases_by_objective():
    rng = np.random.default_rng(5)
    for _ in range(50):
        v = rng.standard_normal(6)
        lam = rng.random()
        z = tv1d_prox(v, lam)
        best = _tv_objective(z, v, lam)
        for _ in range(30):
            p = z + 1e-3 * rng.standard_normal(6)
            assert _tv_objective(p, v, lam) >= best - 1e-12


def test_tv1d_edge_cases():
    assert np.array_equal(tv1d_prox(np.array([4.0]), 10.0), [4.0])
    assert tv1d_prox(np.zeros(0), 1.0).size == 0
    v = np.array([1.0, 5.0, -2.0])
    assert np.array_equal(tv1d_prox(v, 0.0), v)
    assert np.allclose(tv1d_prox(v, 100.0), np.full(3, v.mean()))
    with pytest.raises(ValueError):
        tv1d_prox(v, -1.0)


@given(vectors, vectors, lams)
@settings(max_examples=100, deadline=None)
def test_nonexpansive(v, w, lam):
    n = min(v.size, w.size)
    v, w = v[:n], w[:n]
    base = np.linalg.norm(v - w)
    ops = [
        lambda a: soft_threshold(a, lam),
        lambda a: tv1d_prox(a, lam),
        lambda a: fused_lasso_prox(a, lam, 0.5 * lam),
        project_nonneg,
        lambda a: project_linf_ball(a, lam + 0.1),
        lambda a: project_group_l2_ball(a, [np.arange(n)], lam + 0.1),
    ]
    for op in ops:
        assert np.linalg.norm(op(v) - op(w)) <= base * (1 + 1e-12) + 1e-10


@given(vectors, lams)
@settings(max_examples=100, deadline=None)
def test_projections_idempotent_and_feasible(v, lam):
    r = lam + 0.1
    groups = [np.arange(0, v.size, 2), np.arange(1, v.size, 2)]
    groups = [g for g in groups if g.size]
    for ind in (NonnegIndicator(), LinfBallIndicator(r), GroupL2BallIndicator(groups, r)):
        p = ind.prox(v)
        assert np.array_equal(ind.prox(p), p)
        assert ind(p) == 0.0


def test_soft_threshold_values():
    assert np.array_equal(soft_threshold(np.array([3.0, -0.5, -2.0]), 1.0), [2.0, -0.0, -1.0])


def test_group_projection_validation():
    with pytest.raises(ValueError):
        project_group_l2_ball(np.ones(3), [[0, 1], [1, 2]], 1.0)
    with pytest.raises(ValueError):
        project_group_l2_ball(np.ones(3), [[0, 1]], 1.0)
    with pytest.raises(ValueError):
        project_linf_ball(np.ones(3), 0.0)


def test_prox_objects_scale_with_step():
    rng = np.random.default_rng(6)
    v = rng.standard_normal(8)
    assert np.allclose(L1Prox(2.0).prox(v, 0.25), soft_threshold(v, 0.5))
    assert np.allclose(TV1DProx(2.0).prox(v, 0.25), tv1d_prox(v, 0.5))
    assert np.allclose(FusedLassoProx(1.0, 2.0).prox(v, 0.5), fused_lasso_prox(v, 0.5, 1.0))
    assert np.array_equal(ZeroProx().prox(v), v)
    sep = SeparableProx([NonnegIndicator(), L1Prox(1.0)], [3, 5])
    out = sep.prox(v, 0.5)
    assert np.array_equal(out[:3], project_nonneg(v[:3]))
    assert np.allclose(out[3:], soft_threshold(v[3:], 0.5))
    assert sep(np.abs(v)) == pytest.approx(np.abs(v[3:]).sum())
    assert not sep.is_zero and SeparableProx([ZeroProx()], [8]).is_zero
