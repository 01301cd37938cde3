"""Multi-block majorized ADMM with symmetric Gauss-Seidel sweeps.

The y-variable is split into blocks ``y_1, ..., y_s`` with a separable loss
``f = sum_i f_i(y_i)`` and the nonsmooth term ``p`` on ``y_1`` only; likewise
for ``z``. Each iteration runs a backward sweep over blocks ``s, ..., 2``,
solves block 1, then a forward sweep over ``2, ..., s``. All sub-steps use
the gradients taken at the start of the iteration.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, List, Optional

import numpy as np

from .ipadmm import (
    CompositeProblem,
    ConfigurationError,
    IterateState,
    SolverConfig,
    SolveResult,
    _BlockSolver,
    run_iterations,
)
from .losses import SeparableLoss, SmoothLoss
from .operators import (
    BlockDiagonal,
    BlockRowMap,
    DenseSymmetric,
    LinearMap,
    NotPositiveDefiniteError,
    SelfAdjointOperator,
    ZeroOperator,
    is_positive_definite,
    sgs_augmentation,
    split_blocks,
)
from .prox import ProxOperator, SeparableProx, ZeroProx


@dataclass
class BlockPartition:
    """Block structure of a multi-block composite problem.

    ``y_maps[i]`` is ``A_i^*`` (block i of the y-space into the multiplier
    space) and ``z_maps[j]`` is ``B_j^*``.
    """

    y_losses: List[SmoothLoss]
    y_maps: List[LinearMap]
    z_losses: List[SmoothLoss]
    z_maps: List[LinearMap]
    c: np.ndarray
    prox_p: ProxOperator = None
    prox_q: ProxOperator = None
    S_blocks: Optional[List[SelfAdjointOperator]] = None
    T_blocks: Optional[List[SelfAdjointOperator]] = None
    metric: Optional[Callable] = None
    objective: Optional[Callable] = None
    name: str = "multiblock"

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float).ravel()
        self.prox_p = ZeroProx() if self.prox_p is None else self.prox_p
        self.prox_q = ZeroProx() if self.prox_q is None else self.prox_q
        if len(self.y_losses) != len(self.y_maps) or len(self.z_losses) != len(self.z_maps):
            raise ValueError("each block needs exactly one loss and one constraint map")
        if not self.y_losses or not self.z_losses:
            raise ValueError("at least one y-block and one z-block are required")
        for loss, G in zip(self.y_losses + self.z_losses, self.y_maps + self.z_maps):
            if G.in_dim != loss.dim or G.out_dim != self.c.size:
                raise ValueError("block map dimensions do not match the losses or c")
        if self.S_blocks is None:
            self.S_blocks = [ZeroOperator(l.dim) for l in self.y_losses]
        if self.T_blocks is None:
            self.T_blocks = [ZeroOperator(l.dim) for l in self.z_losses]
        for op, loss in zip(self.S_blocks + self.T_blocks, self.y_losses + self.z_losses):
            if op.dim != loss.dim:
                raise ValueError("proximal block dimension mismatch")

    @property
    def y_sizes(self):
        return [l.dim for l in self.y_losses]

    @property
    def z_sizes(self):
        return [l.dim for l in self.z_losses]

    def to_composite(self) -> CompositeProblem:
        """The same model in 2-block form (y and z blocks concatenated)."""

        def first_only(prox, sizes):
            if len(sizes) == 1:
                return prox
            return SeparableProx([prox] + [ZeroProx() for _ in sizes[1:]], sizes)

        ys, zs = self.y_sizes, self.z_sizes
        P = CompositeProblem(
            loss_f=self.y_losses[0] if len(ys) == 1 else SeparableLoss(self.y_losses),
            prox_p=first_only(self.prox_p, ys),
            loss_g=self.z_losses[0] if len(zs) == 1 else SeparableLoss(self.z_losses),
            prox_q=first_only(self.prox_q, zs),
            Astar=self.y_maps[0] if len(ys) == 1 else BlockRowMap(self.y_maps),
            Bstar=self.z_maps[0] if len(zs) == 1 else BlockRowMap(self.z_maps),
            c=self.c,
            metric=self.metric,
            objective=self.objective,
            name=self.name,
        )
        return P


def _coupling_matrix(losses, maps, prox_blocks, sigma, half):
    """Dense ``w*Sigma_hat + Diag(S_i) + sigma*G G^*`` with ``w`` = 1/2 or 1."""
    G = np.hstack([m.to_dense() for m in maps])
    Q = sigma * (G.T @ G)
    w = 0.5 if half else 1.0
    for sl, loss, S in zip(split_blocks([l.dim for l in losses]), losses, prox_blocks):
        Q[sl, sl] += w * loss.majorizer.to_dense() + S.to_dense()
    return Q


def _check_diagonal_blocks(losses, maps, prox_blocks, sigma, label):
    for i, (loss, G, S) in enumerate(zip(losses, maps, prox_blocks)):
        blk = 0.5 * loss.majorizer + S + G.normal(sigma)
        if not is_positive_definite(blk):
            raise ConfigurationError(f"{label}-block {i + 1}: Sigma_hat/2 + S_i + sigma*G_i G_i^* is not positive definite")


def build_equivalent_two_block(partition: BlockPartition, config: SolverConfig, convention: str = "exact"):
    """Proximal terms ``(S, T)`` turning the sGS scheme into a 2-block iteration.

    ``S = Diag(S_i) + sGS(Q)`` where ``Q`` is the y-coupling operator. With
    ``convention="exact"`` ``Q = Sigma_hat_f + Diag(S_i) + sigma*AA^*``, the
    Hessian of the y-subproblem; this makes the sGS sweep and the 2-block step
    coincide. ``convention="half"`` uses ``Sigma_hat_f/2`` in place of
    ``Sigma_hat_f``; both agree whenever blocks 2..s carry no majorizer.
    """
    if convention not in ("exact", "half"):
        raise ValueError("convention must be 'exact' or 'half'")
    half = convention == "half"
    sigma = config.sigma
    out = []
    for losses, maps, blocks, label in (
        (partition.y_losses, partition.y_maps, partition.S_blocks, "y"),
        (partition.z_losses, partition.z_maps, partition.T_blocks, "z"),
    ):
        _check_diagonal_blocks(losses, maps, blocks, sigma, label)
        base = blocks[0] if len(blocks) == 1 else BlockDiagonal(blocks)
        if len(blocks) == 1:
            out.append(base)
            continue
        Q = _coupling_matrix(losses, maps, blocks, sigma, half)
        try:
            term = sgs_augmentation(DenseSymmetric(Q, check=False), [l.dim for l in losses])
        except NotPositiveDefiniteError as exc:
            raise ConfigurationError(f"{label}-coupling: {exc}") from exc
        out.append(base + term)
    return tuple(out)


class _Sweeper:
    """Block solvers and data for one side (y or z) of the sweep."""

    def __init__(self, losses, maps, blocks, prox, sigma, method, label):
        self.losses, self.maps, self.blocks = losses, maps, blocks
        self.sizes = [l.dim for l in losses]
        self.slices = split_blocks(self.sizes)
        self.prox_terms = [l.majorizer + S for l, S in zip(losses, blocks)]
        self.solvers = []
        for i, (pt, G) in enumerate(zip(self.prox_terms, maps)):
            p = prox if i == 0 else ZeroProx()
            self.solvers.append(_BlockSolver(pt + G.normal(sigma), p, method, f"{label}{i + 1}"))

    def sweep(self, v_old, grads, x, other, sigma, c):
        """One symmetric GS pass; ``other`` is the fixed contribution of the other side."""
        s = len(self.sizes)
        w = [v_old[sl].copy() for sl in self.slices]
        images = [G.apply(wi) for G, wi in zip(self.maps, w)]
        lin = [pt.apply(v_old[sl]) - g - G.adjoint(x)
               for pt, sl, g, G in zip(self.prox_terms, self.slices, grads, self.maps)]

        def solve(i):
            coupled = other - c
            for j in range(s):
                if j != i:
                    coupled = coupled + images[j]
            w[i] = self.solvers[i].solve(lin[i] - sigma * self.maps[i].adjoint(coupled))
            images[i] = self.maps[i].apply(w[i])

        for i in range(s - 1, 0, -1):
            solve(i)
        solve(0)
        for i in range(1, s):
            solve(i)
        return np.concatenate(w)


class SGSIPADMM:
    """Majorized sGS-iPADMM on a :class:`BlockPartition`."""

    def __init__(self, partition: BlockPartition, config: SolverConfig):
        self.partition = partition
        self.config = config
        self.problem = partition.to_composite()
        sigma = config.sigma
        _check_diagonal_blocks(partition.y_losses, partition.y_maps, partition.S_blocks, sigma, "y")
        _check_diagonal_blocks(partition.z_losses, partition.z_maps, partition.T_blocks, sigma, "z")
        m = config.linear_solver
        self.ys = _Sweeper(partition.y_losses, partition.y_maps, partition.S_blocks, partition.prox_p, sigma, m, "y")
        self.zs = _Sweeper(partition.z_losses, partition.z_maps, partition.T_blocks, partition.prox_q, sigma, m, "z")

    def _grads(self, sweeper, v):
        return [l.gradient(v[sl]) for l, sl in zip(sweeper.losses, sweeper.slices)]

    def sweep_y(self, state: IterateState):
        Bz = self.problem.Bstar.apply(state.z)
        return self.ys.sweep(state.y, self._grads(self.ys, state.y), state.x, Bz, self.config.sigma, self.partition.c)

    def sweep_z(self, state: IterateState, y_new):
        Ay = self.problem.Astar.apply(y_new)
        return self.zs.sweep(state.z, self._grads(self.zs, state.z), state.x, Ay, self.config.sigma, self.partition.c)

    def step(self, state: IterateState) -> IterateState:
        y = self.sweep_y(state)
        z = self.sweep_z(state, y)
        r = self.problem.residual_vector(y, z)
        x = state.x + self.config.tau * self.config.sigma * r
        return IterateState(y=y, z=z, x=x, r=r, z_prev=state.z, iter=state.iter + 1)

    def run(self, start=None, keep_iterates=False, lyapunov=None, callback=None) -> SolveResult:
        return run_iterations(self.problem, self.config, self.step, start, keep_iterates, lyapunov, callback)


def sgs_sweep_y(partition: BlockPartition, config: SolverConfig, state: IterateState):
    return SGSIPADMM(partition, config).sweep_y(state)


def sgs_sweep_z(partition: BlockPartition, config: SolverConfig, state: IterateState, y_new):
    return SGSIPADMM(partition, config).sweep_z(state, y_new)


def solve_sgs(partition: BlockPartition, config: SolverConfig, start: Optional[IterateState] = None,
              keep_iterates: bool = False, lyapunov=None, callback=None) -> SolveResult:
    return SGSIPADMM(partition, config).run(start, keep_iterates, lyapunov, callback)


def equivalent_two_block_config(partition: BlockPartition, config: SolverConfig, convention: str = "exact"):
    """``(CompositeProblem, SolverConfig)`` for the 2-block twin of the sGS scheme."""
    from dataclasses import replace

    S, T = build_equivalent_two_block(partition, config, convention)
    return partition.to_composite(), replace(config, S=S, T=T)
