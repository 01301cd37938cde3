"""Shared random instance generators and independent oracles for the tests."""

import numpy as np
from scipy.optimize import lsq_linear

from mipadmm.ipadmm import CompositeProblem, SolverConfig
from mipadmm.losses import QuadraticLoss
from mipadmm.operators import DenseSymmetric, MatrixMap
from mipadmm.prox import L1Prox, ZeroProx
from mipadmm.sgs import BlockPartition


def random_psd(rng, n, rank=None, scale=1.0):
    rank = n if rank is None else rank
    F = rng.standard_normal((n, rank))
    return scale * F @ F.T / max(rank, 1)


def random_composite(rng, ny=4, nz=3, m=5, l1=0.0, indefinite=True, sigma=1.0, tau=1.618):
    """Quadratic composite problem with an optional l1 term on y.

    ``S = -Q_f/2 + small PSD`` when ``indefinite`` (else a small PSD term) and
    ``A^*`` has full column rank so every assumption holds.
    """
    Qf = random_psd(rng, ny, scale=2.0)
    Qg = random_psd(rng, nz, scale=1.0)
    A = rng.standard_normal((m, ny))
    B = rng.standard_normal((m, nz))
    c = rng.standard_normal(m)
    problem = CompositeProblem(
        loss_f=QuadraticLoss(Qf, rng.standard_normal(ny)),
        prox_p=L1Prox(l1) if l1 > 0 else ZeroProx(),
        loss_g=QuadraticLoss(Qg, rng.standard_normal(nz)),
        prox_q=ZeroProx(),
        Astar=MatrixMap(A),
        Bstar=MatrixMap(B),
        c=c,
    )
    W = random_psd(rng, ny, scale=0.1)
    S = DenseSymmetric(-0.5 * Qf + W) if indefinite else DenseSymmetric(W)
    T = DenseSymmetric(-0.5 * Qg + random_psd(rng, nz, scale=0.1)) if indefinite else DenseSymmetric(random_psd(rng, nz, scale=0.1))
    return problem, SolverConfig(sigma=sigma, tau=tau, S=S, T=T, max_iter=200)


def random_partition(rng, y_sizes=(2, 3, 2), z_sizes=(2, 3), m=9, l1=0.0, sigma=1.3):
    """Multi-block quadratic model.

    With ``l1 > 0`` block 1 of y carries ``l1*||.||_1`` and has an isometric
    constraint map and no loss, so its sub-step is a plain prox.
    """
    y_losses, y_maps = [], []
    for i, k in enumerate(y_sizes):
        if i == 0 and l1 > 0:
            Qm, _ = np.linalg.qr(rng.standard_normal((m, k)))
            y_losses.append(QuadraticLoss(np.zeros((k, k))))
            y_maps.append(MatrixMap(Qm))
        else:
            y_losses.append(QuadraticLoss(random_psd(rng, k), rng.standard_normal(k)))
            y_maps.append(MatrixMap(rng.standard_normal((m, k))))
    z_losses = [QuadraticLoss(random_psd(rng, k), rng.standard_normal(k)) for k in z_sizes]
    z_maps = [MatrixMap(rng.standard_normal((m, k))) for k in z_sizes]
    S_blocks = [DenseSymmetric(random_psd(rng, k, scale=0.05)) for k in y_sizes]
    if l1 > 0:
        S_blocks[0] = DenseSymmetric(np.zeros((y_sizes[0], y_sizes[0])))
    T_blocks = [DenseSymmetric(-0.5 * l.Q.to_dense() + random_psd(rng, l.dim, scale=0.05)) for l in z_losses]
    part = BlockPartition(
        y_losses=y_losses, y_maps=y_maps, z_losses=z_losses, z_maps=z_maps, c=rng.standard_normal(m),
        prox_p=L1Prox(l1) if l1 > 0 else None, S_blocks=S_blocks, T_blocks=T_blocks,
    )
    return part, SolverConfig(sigma=sigma, tau=1.5, max_iter=50)


def pd_structure_instance(rng):
    """Small dense model with random rank-deficient pieces; assumption checks are off."""
    ny, nz, m = rng.integers(1, 5, size=3)
    m = int(m) + 1
    Qf = random_psd(rng, ny, rank=int(rng.integers(0, ny + 1)))
    Qg = random_psd(rng, nz, rank=int(rng.integers(0, nz + 1)))
    A = rng.standard_normal((m, ny)) * (rng.random(ny) < 0.7)
    B = rng.standard_normal((m, nz)) * (rng.random(nz) < 0.7)
    problem = CompositeProblem(QuadraticLoss(Qf), ZeroProx(), QuadraticLoss(Qg), ZeroProx(), MatrixMap(A), MatrixMap(B),
                               np.zeros(m))
    S = -0.5 * Qf + random_psd(rng, ny, rank=int(rng.integers(0, ny + 1)), scale=0.3)
    T = -0.5 * Qg + random_psd(rng, nz, rank=int(rng.integers(0, nz + 1)), scale=0.3)
    config = SolverConfig(sigma=float(rng.uniform(0.2, 3)), tau=float(rng.uniform(0.1, 1.6)),
                          S=DenseSymmetric(S), T=DenseSymmetric(T), verify_assumptions=False)
    return problem, config


# ---------------------------------------------------------------------------
# Oracles
# ---------------------------------------------------------------------------


def fused_qp_oracle(v, lam1, lam2):
    """Fused-Lasso prox through its box-constrained dual least squares.

    ``z = v - lam1*a - lam2*D^T b`` where ``(a, b)`` minimizes
    ``||lam1*a + lam2*D^T b - v||`` over ``|a|, |b| <= 1`` (bounded-variable LS).
    """
    v = np.asarray(v, float)
    n = v.size
    D = np.diff(np.eye(n), axis=0)
    cols = []
    if lam1 > 0:
        cols.append(lam1 * np.eye(n))
    if lam2 > 0 and n > 1:
        cols.append(lam2 * D.T)
    if not cols:
        return v.copy()
    K = np.hstack(cols)
    sol = lsq_linear(K, v, bounds=(-1.0, 1.0), method="bvls", tol=1e-15, lsmr_tol=None)
    return v - K @ sol.x


def l1_quadratic_oracle(H, rhs, lam, J, sweeps=20000, tol=1e-15):
    """Coordinate descent for ``min 0.5 v'Hv - rhs'v + lam*||v_J||_1``."""
    H = np.asarray(H, float)
    n = H.shape[0]
    v = np.linalg.solve(H, rhs)
    w = np.zeros(n)
    w[J] = lam
    for _ in range(sweeps):
        delta = 0.0
        for i in range(n):
            g = rhs[i] - H[i] @ v + H[i, i] * v[i]
            new = np.sign(g) * max(abs(g) - w[i], 0.0) / H[i, i]
            delta = max(delta, abs(new - v[i]))
            v[i] = new
        if delta < tol:
            break
    return v


def sgl_dual_example_step(D, d, P, lam1, radii_groups, sigma, tau, theta, eta, z, x, S_theta=-0.5):
    """Transcription of the dual sparse-group-Lasso sGS iteration.

    Order: theta (backward), eta, theta (forward), then z and the multiplier.
    ``P`` is the dense group-stacking matrix; ``radii_groups`` is a list of
    ``(indices in the stacked vector, radius)``.
    """
    N = D.shape[0]
    Hth = (1.0 + S_theta) * np.eye(N) + sigma * D @ D.T
    Pz = P.T @ z

    def theta_step(eta_cur):
        rhs = S_theta * theta - d - D @ (x + sigma * (eta_cur + Pz))
        return np.linalg.solve(Hth, rhs)

    th_half = theta_step(eta)
    eta_new = np.clip(-(D.T @ th_half + Pz + x / sigma), -lam1, lam1)
    th_new = theta_step(eta_new)
    w = -P @ (eta_new + D.T @ th_new + x / sigma)
    z_new = w.copy()
    for g, rad in radii_groups:
        nrm = np.linalg.norm(w[g])
        if nrm > rad:
            z_new[g] = rad / nrm * w[g]
    r = D.T @ th_new + eta_new + P.T @ z_new
    return th_new, eta_new, z_new, x + tau * sigma * r
