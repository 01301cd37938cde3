"""Model builders for regularized logistic regression and the sparse group Lasso dual.

Every logistic model works on ``y_tilde = [y; y0]`` with the intercept as the
last coordinate. The intercept is never penalized and the variant remainder
``sigma*Diag(0, r)`` acts on it alone.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .ipadmm import (
    CompositeProblem,
    ConfigurationError,
    Residual,
    SolverConfig,
    VariantSpec,
)
from .losses import LogisticData, LogisticLoss, QuadraticLoss, zero_loss
from .operators import (
    AdjointMap,
    ComposedMap,
    DiagonalOperator,
    MatrixMap,
    ScaledIdentity,
    SelectionMap,
    StackedMap,
    ZeroOperator,
    identity_map,
)
from .prox import (
    FusedLassoProx,
    GroupL2BallIndicator,
    L1Prox,
    LinfBallIndicator,
    NonnegIndicator,
    SeparableProx,
    ZeroProx,
    project_nonneg,
    soft_threshold,
)

DEFAULT_SIGMA = 1.0
DEFAULT_TAU = 1.618
DEFAULT_R = 1e-6
TOL_FUSED = 1e-6
TOL_CONSTRAINED = 1e-5
MAX_ITER = 50000


def _nrm(v):
    return float(np.linalg.norm(v))


def lambda_from_gamma(data: LogisticData, gamma: float) -> float:
    """``gamma * ||B^T b||_inf / N`` for ``0 < gamma < 1``."""
    gamma = float(gamma)
    if not 0.0 < gamma < 1.0:
        raise ValueError(f"gamma must lie in (0, 1), got {gamma}")
    Btb = np.asarray(data.features.T @ data.labels).ravel()
    return gamma * float(np.abs(Btb).max()) / data.N


def intercept_remainder(n: int, sigma: float, r: float) -> DiagonalOperator:
    """``sigma * Diag(0, r)`` on ``R^{n+1}``."""
    if not r > 0:
        raise ConfigurationError("r must be positive")
    diag = np.zeros(n + 1)
    diag[-1] = sigma * r
    return DiagonalOperator(diag)


def _logistic_block(data, sigma, r, variant, majorizer):
    loss = LogisticLoss(data, majorizer=majorizer)
    spec = variant if isinstance(variant, VariantSpec) else VariantSpec(variant, intercept_remainder(data.n, sigma, r))
    loss, S = spec.apply(loss)
    return loss, S, spec.kind


def _select_weights(n):
    return SelectionMap(np.arange(n), n + 1)


# ---------------------------------------------------------------------------
# Fused Lasso / Lasso logistic regression
# ---------------------------------------------------------------------------


def residual_fused(problem: CompositeProblem, y_tilde, z, x, grad_f=None) -> Residual:
    """Relative KKT residual ``eta_FL = max(eta_P, eta_D, eta_C)``."""
    n = z.shape[0]
    y = y_tilde[:n]
    g = problem.loss_f.gradient(y_tilde) if grad_f is None else grad_f
    eP = _nrm(y - z) / (1.0 + _nrm(y) + _nrm(z))
    gd = g.copy()
    gd[:n] += x
    eD = _nrm(gd) / (1.0 + _nrm(g) + _nrm(x))
    eC = _nrm(z - problem.prox_q.prox(x + z, 1.0)) / (1.0 + _nrm(x) + _nrm(z))
    return Residual(max(eP, eD, eC), eP, eD, eC)


def build_fused_lasso_logistic(data: LogisticData, lam1: float, lam2: float, sigma: float = DEFAULT_SIGMA,
                               r: float = DEFAULT_R, variant="ipadmm", tau: float = DEFAULT_TAU,
                               tol: float = TOL_FUSED, max_iter: int = MAX_ITER, majorizer=None,
                               prox=None, verify: bool = True):
    """Assemble ``min f(y, y0) + phi(z)  s.t.  y - z = 0``.

    Returns ``(CompositeProblem, SolverConfig)``. The y-step is the linear
    system with operator ``Sigma_hat + S + sigma*Diag(I, 0)`` and the z-step
    is the fused Lasso prox with parameters ``lam/sigma``.
    """
    n = data.n
    loss, S, kind = _logistic_block(data, sigma, r, variant, majorizer)
    prox_q = FusedLassoProx(lam1, lam2) if prox is None else prox
    problem = CompositeProblem(
        loss_f=loss, prox_p=ZeroProx(), loss_g=zero_loss(n), prox_q=prox_q,
        Astar=_select_weights(n), Bstar=identity_map(n, -1.0), c=np.zeros(n),
        name="fused" if prox is None else "lasso",
    )
    problem.metric = lambda y, z, x, g=None: residual_fused(problem, y, z, x, g)
    config = SolverConfig(sigma=sigma, tau=tau, S=S, T=ZeroOperator(n), tol=tol, max_iter=max_iter,
                          verify_assumptions=verify, variant=kind)
    return problem, config


def build_lasso_logistic(data: LogisticData, lam: float, **kwargs):
    """Lasso special case of the fused model (``lam2 = 0``) with an l1 prox."""
    return build_fused_lasso_logistic(data, lam, 0.0, prox=L1Prox(lam), **kwargs)


# ---------------------------------------------------------------------------
# Constrained Lasso logistic regression
# ---------------------------------------------------------------------------


def residual_constrained(problem: CompositeProblem, y_tilde, z, x, grad_f=None) -> Residual:
    """Relative KKT residual ``eta_CL`` with z = (u, v) and x = (xi, zeta)."""
    D, d = problem.D, problem.d
    m = d.shape[0]
    n = y_tilde.shape[0] - 1
    y = y_tilde[:n]
    u, v = z[:m], z[m:]
    xi, zeta = x[:m], x[m:]
    g = problem.loss_f.gradient(y_tilde) if grad_f is None else grad_f
    Dy = D @ y if m else np.zeros(0)
    eP = max(_nrm(Dy - u - d) / (1.0 + _nrm(Dy) + _nrm(u) + _nrm(d)),
             _nrm(y - v) / (1.0 + _nrm(y) + _nrm(v)))
    Dtxi = D.T @ xi if m else np.zeros(n)
    gd = g.copy()
    gd[:n] += Dtxi + zeta
    eD = _nrm(gd) / (1.0 + _nrm(g) + _nrm(Dtxi) + _nrm(zeta))
    eC = max(_nrm(v - soft_threshold(zeta + v, problem.lam)) / (1.0 + _nrm(zeta) + _nrm(v)),
             _nrm(u - project_nonneg(xi + u)) / (1.0 + _nrm(xi) + _nrm(u)))
    return Residual(max(eP, eD, eC), eP, eD, eC)


def build_constrained_logistic(data: LogisticData, D, d, lam: float, sigma: float = DEFAULT_SIGMA,
                               r: float = DEFAULT_R, variant="ipadmm", tau: float = DEFAULT_TAU,
                               tol: float = TOL_CONSTRAINED, max_iter: int = MAX_ITER, majorizer=None,
                               verify: bool = True):
    """Assemble ``min f(y, y0) + lam*||v||_1 + I(u >= 0)  s.t.  Dy - u = d, y - v = 0``."""
    n = data.n
    D = np.asarray(D, dtype=float).reshape(-1, n)
    d = np.asarray(d, dtype=float).ravel()
    m = D.shape[0]
    if d.shape[0] != m:
        raise ValueError("D and d disagree on the number of constraints")
    lam = float(lam)
    if not lam >= 0:
        raise ValueError("lam must be nonnegative")
    loss, S, kind = _logistic_block(data, sigma, r, variant, majorizer)
    sel = _select_weights(n)
    Astar = StackedMap([ComposedMap(MatrixMap(D), sel), sel]) if m else sel
    parts = [NonnegIndicator(), L1Prox(lam)] if m else [L1Prox(lam)]
    sizes = [m, n] if m else [n]
    problem = CompositeProblem(
        loss_f=loss, prox_p=ZeroProx(), loss_g=zero_loss(m + n), prox_q=SeparableProx(parts, sizes),
        Astar=Astar, Bstar=identity_map(m + n, -1.0), c=np.concatenate([d, np.zeros(n)]),
        name="constrained",
    )
    problem.D, problem.d, problem.lam = D, d, lam
    problem.metric = lambda y, z, x, g=None: residual_constrained(problem, y, z, x, g)
    config = SolverConfig(sigma=sigma, tau=tau, S=S, T=ZeroOperator(m + n), tol=tol, max_iter=max_iter,
                          verify_assumptions=verify, variant=kind)
    return problem, config


# ---------------------------------------------------------------------------
# Sparse group Lasso dual
# ---------------------------------------------------------------------------


def group_selection(groups: Sequence, n: int) -> SelectionMap:
    """``P`` stacking the group sub-vectors ``x_[l]`` of ``x in R^n``."""
    idx = np.concatenate([np.asarray(g, dtype=int) for g in groups]) if len(groups) else np.zeros(0, int)
    if idx.size != n or np.unique(idx).size != n:
        raise ValueError("groups must partition {0, ..., n-1} without overlap")
    return SelectionMap(idx, n)


def build_sparse_group_lasso_dual(D, d, groups: Sequence, weights, lam1: float, lam2: float,
                                  sigma: float = DEFAULT_SIGMA, tau: float = DEFAULT_TAU, tol: float = TOL_FUSED,
                                  max_iter: int = MAX_ITER, S_theta=None):
    """Dual of ``0.5||Dx - d||^2 + lam1||x||_1 + lam2 sum_l w_l ||x_[l]||`` as a block model.

    With ``D`` of shape ``(N, n)`` the dual variables are ``theta in R^N``,
    ``eta in R^n`` and the stacked group vector ``z``; the constraint is
    ``D^T theta + eta + P^* z = 0``. The prox block ``eta`` is y-block 1 and
    ``theta`` (quadratic loss, proximal term ``S_theta``, default ``-I/2``) is
    y-block 2. Returns ``(BlockPartition, SolverConfig)``.
    """
    from .sgs import BlockPartition

    D = np.atleast_2d(np.asarray(D, dtype=float))
    d = np.asarray(d, dtype=float).ravel()
    N, n = D.shape
    if d.shape[0] != N:
        raise ValueError("D and d disagree on the sample count")
    if N > n or np.linalg.eigvalsh(D @ D.T)[0] <= 1e-10 * max(1.0, np.linalg.norm(D, 2) ** 2):
        raise ConfigurationError("D D^T must be positive definite")
    if not (lam1 > 0 and lam2 > 0):
        raise ValueError("lam1 and lam2 must be positive")
    weights = np.broadcast_to(np.asarray(weights, dtype=float), (len(groups),))
    if np.any(weights <= 0):
        raise ValueError("group weights must be positive")
    P = group_selection(groups, n)
    offs = np.cumsum([0] + [len(g) for g in groups])
    stacked_groups = [np.arange(a, b) for a, b in zip(offs[:-1], offs[1:])]
    S_theta = ScaledIdentity(N, -0.5) if S_theta is None else S_theta
    partition = BlockPartition(
        y_losses=[zero_loss(n), QuadraticLoss(ScaledIdentity(N, 1.0), d)],
        y_maps=[identity_map(n), MatrixMap(D.T)],
        z_losses=[zero_loss(P.out_dim)],
        z_maps=[AdjointMap(P)],
        c=np.zeros(n),
        prox_p=LinfBallIndicator(lam1),
        prox_q=GroupL2BallIndicator(stacked_groups, lam2 * weights),
        S_blocks=[ZeroOperator(n), S_theta],
        T_blocks=[ZeroOperator(P.out_dim)],
        name="sgl-dual",
    )
    config = SolverConfig(sigma=sigma, tau=tau, tol=tol, max_iter=max_iter, variant="sgs-ipadmm")
    return partition, config


def sgl_primal_solution(x):
    """Primal coefficients from the dual multiplier (``x_primal = -x``)."""
    return -np.asarray(x, dtype=float)


def sgl_primal_objective(D, d, groups, weights, lam1, lam2, x):
    x = np.asarray(x, dtype=float)
    res = D @ x - d
    w = np.broadcast_to(np.asarray(weights, dtype=float), (len(groups),))
    return 0.5 * float(res @ res) + lam1 * float(np.abs(x).sum()) + lam2 * sum(
        wl * np.linalg.norm(x[np.asarray(g)]) for wl, g in zip(w, groups))
