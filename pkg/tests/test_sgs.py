from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from helpers import random_partition, sgl_dual_example_step
from mipadmm.ipadmm import ConfigurationError, IterateState, MajorizedIPADMM, solve
from mipadmm.problems import (
    build_sparse_group_lasso_dual,
    group_selection,
    sgl_primal_objective,
    sgl_primal_solution,
)
from mipadmm.sgs import (
    SGSIPADMM,
    build_equivalent_two_block,
    equivalent_two_block_config,
    sgs_sweep_y,
    solve_sgs,
)


def _sweep_oracle(part, cfg, state):
    """Dense transcription of one backward/forward sweep over the y-blocks."""
    sizes = part.y_sizes
    offs = np.cumsum([0] + sizes)
    blocks = [state.y[a:b].copy() for a, b in zip(offs[:-1], offs[1:])]
    G = [m.to_dense() for m in part.y_maps]
    Bz = part.z_maps[0].to_dense() @ state.z[:part.z_sizes[0]]
    zo = np.cumsum([0] + part.z_sizes)
    Bz = sum(m.to_dense() @ state.z[a:b] for m, a, b in zip(part.z_maps, zo[:-1], zo[1:]))
    s = cfg.sigma
    y0 = [b.copy() for b in blocks]

    def solve_block(i):
        Q = part.y_losses[i].Q.to_dense()
        Si = part.S_blocks[i].to_dense()
        other = Bz - part.c + sum(G[j] @ blocks[j] for j in range(len(sizes)) if j != i)
        rhs = (Q + Si) @ y0[i] - part.y_losses[i].gradient(y0[i]) - G[i].T @ state.x - s * G[i].T @ other
        blocks[i] = np.linalg.solve(Q + Si + s * G[i].T @ G[i], rhs)

    order = list(range(len(sizes) - 1, 0, -1)) + [0] + list(range(1, len(sizes)))
    for i in order:
        solve_block(i)
    return np.concatenate(blocks)


@given(st.integers(0, 2 ** 31 - 1))
@settings(max_examples=15, deadline=None)
def test_sweep_matches_dense_transcription(seed):
    rng = np.random.default_rng(seed)
    part, cfg = random_partition(rng)
    state = IterateState.initial(part.to_composite(), rng.standard_normal(7), rng.standard_normal(5),
                                 rng.standard_normal(9))
    assert np.allclose(sgs_sweep_y(part, cfg, state), _sweep_oracle(part, cfg, state), atol=1e-11)


@pytest.mark.parametrize("l1", [0.0, 0.5])
def test_sgs_equals_two_block_with_augmented_terms(l1):
    rng = np.random.default_rng(21)
    for _ in range(5):
        part, cfg = random_partition(rng, l1=l1)
        P2, C2 = equivalent_two_block_config(part, cfg)
        a = solve_sgs(part, replace(cfg, tol=1e-30), keep_iterates=True)
        b = solve(P2, replace(C2, tol=1e-30), keep_iterates=True)
        dev = max(np.abs(s.u - t.u).max() for s, t in zip(a.iterates, b.iterates))
        assert len(a.iterates) == 51 and dev <= 1e-12


def test_half_convention_differs_only_with_majorized_tail_blocks():
    rng = np.random.default_rng(22)
    part, cfg = random_partition(rng)
    S_exact, _ = build_equivalent_two_block(part, cfg, "exact")
    S_half, _ = build_equivalent_two_block(part, cfg, "half")
    assert not np.allclose(S_exact.to_dense(), S_half.to_dense())
    with pytest.raises(ValueError):
        build_equivalent_two_block(part, cfg, "other")


def _sgl(rng, N, n, gsize=4, sigma=1.3):
    D = rng.standard_normal((N, n))
    d = rng.standard_normal(N)
    groups = [list(range(a, min(a + gsize, n))) for a in range(0, n, gsize)]
    part, cfg = build_sparse_group_lasso_dual(D, d, groups, 1.0, 0.2, 0.3, sigma=sigma)
    return D, d, groups, part, cfg


def test_sgl_dual_matches_printed_scheme():
    rng = np.random.default_rng(23)
    D, d, groups, part, cfg = _sgl(rng, 8, 12)
    n, N = 12, 8
    P = group_selection(groups, n).to_dense()
    radii = [(np.arange(a, a + len(g)), 0.3) for a, g in zip(np.cumsum([0] + [len(g) for g in groups]), groups)]
    res = solve_sgs(part, replace(cfg, tol=1e-30, max_iter=50), keep_iterates=True)
    eta, theta, z, x = np.zeros(n), np.zeros(N), np.zeros(n), np.zeros(n)
    dev = 0.0
    for st_ in res.iterates[1:]:
        theta, eta, z, x = sgl_dual_example_step(D, d, P, 0.2, radii, cfg.sigma, cfg.tau, theta, eta, z, x)
        dev = max(dev, np.abs(st_.y - np.concatenate([eta, theta])).max(), np.abs(st_.z - z).max(),
                  np.abs(st_.x - x).max())
    assert dev <= 1e-12


def test_sgl_dual_two_block_twin_and_half_term():
    rng = np.random.default_rng(24)
    D, d, groups, part, cfg = _sgl(rng, 10, 10, gsize=5)
    S_half, _ = build_equivalent_two_block(part, cfg, "half")
    target = np.diag(np.concatenate([np.full(10, cfg.sigma), np.full(10, -0.5)]))
    assert np.abs(S_half.to_dense() - target).max() <= 1e-10
    P2, C2 = equivalent_two_block_config(part, cfg)
    assert MajorizedIPADMM(P2, C2).y_solver.regime == "schur"
    a = solve_sgs(part, replace(cfg, tol=1e-30, max_iter=50), keep_iterates=True)
    b = solve(P2, replace(C2, tol=1e-30, max_iter=50), keep_iterates=True)
    assert max(np.abs(s.u - t.u).max() for s, t in zip(a.iterates, b.iterates)) <= 1e-12


def test_sgl_dual_recovers_primal_solution():
    rng = np.random.default_rng(25)
    D, d, groups, part, cfg = _sgl(rng, 12, 16)
    res = solve_sgs(part, replace(cfg, tol=1e-10, max_iter=20000))
    assert res.converged
    # proximal gradient on the primal as an independent reference
    L = np.linalg.norm(D, 2) ** 2
    w = np.zeros(16)
    for _ in range(20000):
        v = w - D.T @ (D @ w - d) / L
        v = np.sign(v) * np.maximum(np.abs(v) - 0.2 / L, 0.0)
        for g in groups:
            nrm = np.linalg.norm(v[g])
            v[g] = v[g] * max(0.0, 1 - 0.3 / L / nrm) if nrm > 0 else 0.0
        w = v
    x = sgl_primal_solution(res.state.x)
    assert np.allclose(x, w, atol=1e-6)
    ref = sgl_primal_objective(D, d, groups, 1.0, 0.2, 0.3, w)
    assert sgl_primal_objective(D, d, groups, 1.0, 0.2, 0.3, x) == pytest.approx(ref, rel=1e-8)


def test_sgl_dual_validation():
    rng = np.random.default_rng(26)
    D = rng.standard_normal((6, 4))
    with pytest.raises(ConfigurationError):
        build_sparse_group_lasso_dual(D, np.zeros(6), [[0, 1], [2, 3]], 1.0, 0.1, 0.1)
    with pytest.raises(ValueError):
        build_sparse_group_lasso_dual(D.T, np.zeros(4), [[0, 1], [1, 2]], 1.0, 0.1, 0.1)
    with pytest.raises(ValueError):
        build_sparse_group_lasso_dual(D.T, np.zeros(4), [[0, 1, 2, 3, 4, 5]], 1.0, 0.0, 0.1)


def test_sgs_rejects_singular_block():
    rng = np.random.default_rng(27)
    part, cfg = random_partition(rng)
    part.y_maps[1] = part.y_maps[1].__class__(np.zeros((9, 3)))
    part.y_losses[1] = part.y_losses[1].__class__(np.zeros((3, 3)))
    part.S_blocks[1] = part.S_blocks[1].__class__(np.zeros((3, 3)))
    with pytest.raises(ConfigurationError):
        SGSIPADMM(part, cfg)
