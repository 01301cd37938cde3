from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from helpers import pd_structure_instance, random_composite
from mipadmm import diagnostics as diag
from mipadmm.ipadmm import GOLDEN, solve


def _kkt_point(problem, config):
    res = solve(problem, replace(config, tol=1e-13, max_iter=100000))
    return res.state.u


def test_tau_constants():
    assert diag.tau_constants(1.0) == pytest.approx((0.25, 0.5))
    s, t = diag.tau_constants(1.618)
    assert t > 0 and s > 0
    assert diag.tau_constants(GOLDEN)[1] == pytest.approx(0.0, abs=1e-15)
    with pytest.raises(ValueError):
        diag.tau_constants(0.0)


def test_certificates_shapes_and_symmetry():
    rng = np.random.default_rng(0)
    problem, config = random_composite(rng)
    cert = diag.build_certificates(problem, config)
    for mat in (cert.M, cert.H, cert.H0):
        assert mat.shape == (12, 12)
        assert np.allclose(mat, mat.T)
    assert np.linalg.eigvalsh(cert.M)[0] > 0
    assert np.linalg.eigvalsh(cert.H)[0] > 0


@given(st.integers(0, 2 ** 31 - 1), st.sampled_from([0.8, 1.0, 1.3, 1.618]))
@settings(max_examples=15, deadline=None)
def test_audits_hold_on_random_quadratics(seed, tau):
    rng = np.random.default_rng(seed)
    problem, config = random_composite(rng, tau=tau, sigma=float(rng.uniform(0.5, 2)))
    ubar = _kkt_point(problem, config)
    cert = diag.build_certificates(problem, config)
    res = solve(problem, replace(config, tol=1e-30, max_iter=60), keep_iterates=True)
    audit = diag.audit_descent(cert, ubar, res.iterates)
    assert audit.passed, audit.worst()
    for prev, nxt in zip(res.iterates[:-1], res.iterates[1:]):
        R = np.concatenate(diag.kkt_residual(problem, nxt.y, nxt.z, nxt.x))
        assert diag.audit_residual_bound(cert, prev.u, nxt.u, R)


def test_audit_detects_a_wrong_reference_point():
    rng = np.random.default_rng(1)
    problem, config = random_composite(rng)
    ubar = _kkt_point(problem, config)
    cert = diag.build_certificates(problem, config)
    res = solve(problem, replace(config, tol=1e-30, max_iter=60), keep_iterates=True)
    bad = diag.audit_descent(cert, ubar + 5.0, res.iterates)
    assert not bad.passed
    with pytest.raises(ValueError):
        diag.audit_descent(cert, None, res.iterates)


def test_lyapunov_recorded_in_trace_matches_audit():
    rng = np.random.default_rng(2)
    problem, config = random_composite(rng)
    ubar = _kkt_point(problem, config)
    cert = diag.build_certificates(problem, config)
    res = solve(problem, replace(config, tol=1e-30, max_iter=30), keep_iterates=True,
                lyapunov=diag.lyapunov_function(cert, ubar))
    audit = diag.audit_descent(cert, ubar, res.iterates)
    assert np.allclose([r.lyapunov for r in res.records], audit.values)
    assert np.all(np.diff(audit.values[1:]) <= 1e-10 * max(1.0, audit.values[1]))


def test_rate_estimate_on_geometric_sequence():
    k = np.arange(200)
    est = diag.estimate_linear_rate(3.0 * 0.9 ** k)
    assert est.ratio == pytest.approx(0.9)
    assert est.r_squared == pytest.approx(1.0)
    assert est.linear
    etas = np.concatenate([np.ones(50), np.full(150, 1e-3)])
    assert diag.estimate_linear_rate(3.0 * 0.9 ** k, etas).burn_in == 50
    flat = diag.estimate_linear_rate(np.ones(100) + 1e-3 * np.sin(np.arange(100)))
    assert not flat.linear
    with pytest.raises(ValueError):
        diag.estimate_linear_rate(np.ones(10))


def test_pd_structure_on_random_instances():
    rng = np.random.default_rng(3)
    outcomes = set()
    for _ in range(100):
        problem, config = pd_structure_instance(rng)
        pd_blocks, pd_H, pd_M = diag.check_pd_structure(problem, config)
        assert pd_blocks == pd_H
        assert pd_M or not pd_H
        outcomes.add(pd_blocks)
    assert outcomes == {True, False}
