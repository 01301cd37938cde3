"""Two-block majorized ADMM with (possibly indefinite) proximal terms.

Solves::

    min  p(y) + f(y) + q(z) + g(z)   s.t.  A^* y + B^* z = c

by the iteration::

    y+ = argmin p(y) + <y, grad f(y) + A x> + sigma/2 ||A^*y + B^*z - c||^2 + 1/2 ||y - y||^2_{Sf + S}
    z+ = argmin q(z) + <z, grad g(z) + B x> + sigma/2 ||A^*y+ + B^*z - c||^2 + 1/2 ||z - z||^2_{Sg + T}
    x+ = x + tau*sigma*(A^*y+ + B^*z+ - c)

where ``Sf``, ``Sg`` are the majorizers of ``f``, ``g``.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional

import numpy as np
import scipy.linalg as sla

from .losses import SmoothLoss
from .operators import (
    LinearMap,
    NotPositiveDefiniteError,
    ScaledIdentity,
    SelfAdjointOperator,
    ZeroOperator,
    factorize,
    is_positive_definite,
    is_positive_semidefinite,
    max_eigenvalue,
)
from .prox import ProxOperator, SeparableProx

log = logging.getLogger(__name__)

GOLDEN = (1.0 + math.sqrt(5.0)) / 2.0
VERIFY_CAP = 2000
STEP_RTOL = 1e-8


class ConfigurationError(ValueError):
    """Invalid parameters or proximal terms violating the convergence conditions."""


class RegimeError(ConfigurationError):
    """A subproblem is neither a linear system nor a scaled prox evaluation."""


class SubproblemError(RuntimeError):
    def __init__(self, msg, iteration):
        super().__init__(f"iteration {iteration}: {msg}")
        self.iteration = iteration


class Residual(NamedTuple):
    eta: float
    eta_P: float
    eta_D: float
    eta_C: float


@dataclass
class CompositeProblem:
    """``min p(y)+f(y)+q(z)+g(z)  s.t.  Astar(y) + Bstar(z) = c``.

    ``metric(y, z, x, grad_f)`` returns a :class:`Residual`; when omitted
    the scaled KKT residual ``||R(u)|| / (1 + ||u||)`` (blockwise) is used.
    """

    loss_f: SmoothLoss
    prox_p: ProxOperator
    loss_g: SmoothLoss
    prox_q: ProxOperator
    Astar: LinearMap
    Bstar: LinearMap
    c: np.ndarray
    metric: Optional[Callable] = None
    objective: Optional[Callable] = None
    name: str = "composite"

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float).ravel()
        if self.Astar.out_dim != self.c.size or self.Bstar.out_dim != self.c.size:
            raise ValueError("codomains of A^*, B^* and the length of c must agree")
        if self.Astar.in_dim != self.loss_f.dim or self.Bstar.in_dim != self.loss_g.dim:
            raise ValueError("loss dimensions do not match the constraint maps")

    @property
    def dims(self):
        return self.Astar.in_dim, self.Bstar.in_dim, self.c.size

    def residual_vector(self, y, z):
        return self.Astar.apply(y) + self.Bstar.apply(z) - self.c

    def evaluate_objective(self, y, z):
        if self.objective is not None:
            return float(self.objective(y, z))
        return float(self.loss_f.value(y) + self.prox_p(y) + self.loss_g.value(z) + self.prox_q(z))

    def evaluate_metric(self, y, z, x, grad_f=None) -> Residual:
        if self.metric is not None:
            return self.metric(y, z, x, grad_f)
        return generic_metric(self, y, z, x, grad_f)


@dataclass
class SolverConfig:
    sigma: float = 1.0
    tau: float = 1.618
    S: Optional[SelfAdjointOperator] = None
    T: Optional[SelfAdjointOperator] = None
    tol: float = 1e-6
    max_iter: int = 50000
    verify_assumptions: bool = True
    linear_solver: str = "auto"
    check_steps: bool = False
    variant: str = "custom"
    strict_tau: bool = True

    def __post_init__(self):
        if not self.sigma > 0:
            raise ConfigurationError("sigma must be positive")
        if not self.tau > 0:
            raise ConfigurationError("tau must be positive")
        if self.strict_tau and not self.tau < GOLDEN:
            raise ConfigurationError(f"tau must lie in (0, {GOLDEN:.6f})")
        if not self.tol > 0:
            raise ConfigurationError("tol must be positive")
        if int(self.max_iter) < 1:
            raise ConfigurationError("max_iter must be a positive integer")
        self.max_iter = int(self.max_iter)


@dataclass
class IterateState:
    y: np.ndarray
    z: np.ndarray
    x: np.ndarray
    r: np.ndarray
    z_prev: np.ndarray
    iter: int = 0
    grad_f: Optional[np.ndarray] = None
    grad_g: Optional[np.ndarray] = None

    @classmethod
    def initial(cls, problem: CompositeProblem, y=None, z=None, x=None) -> "IterateState":
        ny, nz, nx = problem.dims
        y = np.zeros(ny) if y is None else np.array(y, dtype=float)
        z = np.zeros(nz) if z is None else np.array(z, dtype=float)
        x = np.zeros(nx) if x is None else np.array(x, dtype=float)
        return cls(y=y, z=z, x=x, r=problem.residual_vector(y, z), z_prev=z.copy())

    @property
    def u(self):
        return np.concatenate([self.y, self.z, self.x])


@dataclass
class DiagnosticsRecord:
    iter: int
    eta: float
    eta_P: float
    eta_D: float
    eta_C: float
    objective: float
    lyapunov: Optional[float]
    seconds: float
    audits: dict = field(default_factory=dict)


@dataclass
class SolveResult:
    state: IterateState
    records: list
    status: str
    iterates: Optional[list] = None

    @property
    def iterations(self):
        return self.state.iter

    @property
    def converged(self):
        return self.status == "converged"


# ---------------------------------------------------------------------------
# Variants
# ---------------------------------------------------------------------------

VARIANTS = ("ipadmm", "spadmm", "l-ipadmm", "l-spadmm")


@dataclass(frozen=True)
class VariantSpec:
    """Proximal-term recipe.

    ``ipadmm``: ``S = -Sf/2 + R``; ``spadmm``: ``S = R``; the ``l-`` forms
    first replace ``Sf`` by ``lambda_max(Sf) * I``. ``R`` is a PSD remainder.
    """

    kind: str = "ipadmm"
    remainder: Optional[SelfAdjointOperator] = None

    def __post_init__(self):
        if self.kind not in VARIANTS:
            raise ValueError(f"unknown variant {self.kind!r}; expected one of {VARIANTS}")

    def apply(self, loss: SmoothLoss):
        """Return ``(loss with effective majorizer, S)``."""
        R = ZeroOperator(loss.dim) if self.remainder is None else self.remainder
        if self.kind.startswith("l-"):
            L = max_eigenvalue(loss.majorizer)
            loss = loss.with_majorizer(ScaledIdentity(loss.dim, L), heuristic=loss.heuristic_majorizer)
        Sf = loss.majorizer
        S = (-0.5) * Sf + R if self.kind in ("ipadmm", "l-ipadmm") else R
        return loss, S


# ---------------------------------------------------------------------------
# Residuals
# ---------------------------------------------------------------------------


def kkt_residual(problem: CompositeProblem, y, z, x, grad_f=None, grad_g=None):
    """The KKT map ``R(u)`` as a triple of vectors."""
    gf = problem.loss_f.gradient(y) if grad_f is None else grad_f
    gg = problem.loss_g.gradient(z) if grad_g is None else grad_g
    ry = y - problem.prox_p.prox(y - (gf + problem.Astar.adjoint(x)), 1.0)
    rz = z - problem.prox_q.prox(z - (gg + problem.Bstar.adjoint(x)), 1.0)
    rx = problem.c - problem.Astar.apply(y) - problem.Bstar.apply(z)
    return ry, rz, rx


def generic_metric(problem, y, z, x, grad_f=None) -> Residual:
    ry, rz, rx = kkt_residual(problem, y, z, x, grad_f)
    scale = 1.0 + math.sqrt(float(y @ y + z @ z + x @ x))
    eP = float(np.linalg.norm(rx)) / scale
    eD = float(np.linalg.norm(ry)) / scale
    eC = float(np.linalg.norm(rz)) / scale
    return Residual(max(eP, eD, eC), eP, eD, eC)


# ---------------------------------------------------------------------------
# Engine
# ---------------------------------------------------------------------------


class _BlockSolver:
    """Exact solver for one block subproblem ``min p(v) + 0.5<v, H v> - <rhs, v>``.

    Three regimes are recognised:

    * ``p`` is zero: ``H v = rhs`` via a cached factorization;
    * ``H = alpha*I``: a single prox evaluation;
    * ``p`` is separable with zero parts on an index set ``R`` and the Schur
      complement of ``H`` on the remaining coordinates ``J`` is ``alpha*I``:
      a prox step on ``J`` followed by a linear solve on ``R``.
    """

    def __init__(self, H: SelfAdjointOperator, prox: ProxOperator, method: str, label: str):
        self.H = H
        self.prox = prox
        self.label = label
        self.alpha = None
        self.fact = None
        self.schur = None
        if prox.is_zero:
            self.regime = "linear"
            try:
                self.fact = factorize(H, method=method)
            except NotPositiveDefiniteError as exc:
                raise ConfigurationError(f"{label}-subproblem operator: {exc}") from exc
            return
        alpha = H.scalar_value()
        if alpha is None:
            alpha = _numerical_scalar(H)
        if alpha is None:
            self.schur = _schur_split(H, prox)
            if self.schur is None:
                raise RegimeError(
                    f"{label}-subproblem has a nonsmooth term but its quadratic operator is not a multiple of I; "
                    "restructure the blocks (e.g. with the sGS variant)"
                )
            alpha = self.schur[0]
            self.regime = "schur"
        else:
            self.regime = "prox"
        if not alpha > PD_FLOOR:
            raise ConfigurationError(f"{label}-subproblem operator {alpha} is not positive")
        self.alpha = alpha

    def solve(self, rhs):
        if self.regime == "linear":
            return self.fact.solve(rhs)
        if self.regime == "prox":
            return self.prox.prox(rhs / self.alpha, 1.0 / self.alpha)
        alpha, J, R, HJR, HRR = self.schur
        g = rhs[J] - HJR @ sla.cho_solve(HRR, rhs[R])
        v = np.zeros(rhs.shape[0])
        v[J] = g / alpha
        out = self.prox.prox(v, 1.0 / alpha)
        out[R] = sla.cho_solve(HRR, rhs[R] - HJR.T @ out[J])
        return out


PD_FLOOR = 1e-10
SCALAR_RTOL = 1e-12


def _numerical_scalar(H):
    """``alpha`` when the dense form of a small ``H`` equals ``alpha*I`` to rounding."""
    if H.dim > VERIFY_CAP or H.dim == 0:
        return None
    Hd = H.to_dense()
    alpha = float(np.mean(np.diag(Hd)))
    if np.abs(Hd - alpha * np.eye(H.dim)).max() > SCALAR_RTOL * max(1.0, abs(alpha)):
        return None
    return alpha


def _schur_split(H, prox):
    if not isinstance(prox, SeparableProx) or H.dim > VERIFY_CAP:
        return None
    zero = np.zeros(H.dim, dtype=bool)
    for part, sl in zip(prox.parts, prox.slices):
        zero[sl] = part.is_zero
    J, R = np.flatnonzero(~zero), np.flatnonzero(zero)
    if R.size == 0:
        return None
    Hd = H.to_dense()
    try:
        HRR = sla.cho_factor(Hd[np.ix_(R, R)])
    except np.linalg.LinAlgError:
        return None
    HJR = Hd[np.ix_(J, R)]
    K = Hd[np.ix_(J, J)] - HJR @ sla.cho_solve(HRR, HJR.T)
    alpha = float(np.mean(np.diag(K)))
    if np.abs(K - alpha * np.eye(J.size)).max() > 1e-10 * max(1.0, abs(alpha)):
        return None
    return alpha, J, R, HJR, HRR


class MajorizedIPADMM:
    """Precomputes the (iteration independent) subproblem factorizations."""

    def __init__(self, problem: CompositeProblem, config: SolverConfig):
        self.problem = problem
        self.config = config
        ny, nz, nx = problem.dims
        sigma = config.sigma
        self.S = ZeroOperator(ny) if config.S is None else config.S
        self.T = ZeroOperator(nz) if config.T is None else config.T
        if self.S.dim != ny or self.T.dim != nz:
            raise ConfigurationError("proximal term dimensions do not match the blocks")
        Sf = problem.loss_f.majorizer
        Sg = problem.loss_g.majorizer
        self.prox_y = Sf + self.S
        self.prox_z = Sg + self.T
        self.AAt = problem.Astar.normal(sigma)
        self.BBt = problem.Bstar.normal(sigma)
        if config.verify_assumptions:
            verify_assumptions(problem, config, self.S, self.T)
        self.y_solver = _BlockSolver(self.prox_y + self.AAt, problem.prox_p, config.linear_solver, "y")
        self.z_solver = _BlockSolver(self.prox_z + self.BBt, problem.prox_q, config.linear_solver, "z")

    # single steps --------------------------------------------------------
    def y_rhs(self, state: IterateState):
        P, sigma = self.problem, self.config.sigma
        gf = P.loss_f.gradient(state.y) if state.grad_f is None else state.grad_f
        return (
            self.prox_y.apply(state.y)
            - gf
            - P.Astar.adjoint(state.x)
            - sigma * P.Astar.adjoint(P.Bstar.apply(state.z) - P.c)
        )

    def y_step(self, state: IterateState):
        rhs = self.y_rhs(state)
        y = self.y_solver.solve(rhs)
        if self.config.check_steps and self.y_solver.alpha is None:
            self._check(self.y_solver.H, y, rhs, state.iter, "y")
        return y

    def z_rhs(self, state: IterateState, y_new):
        P, sigma = self.problem, self.config.sigma
        gg = P.loss_g.gradient(state.z) if state.grad_g is None else state.grad_g
        return (
            self.prox_z.apply(state.z)
            - gg
            - P.Bstar.adjoint(state.x)
            - sigma * P.Bstar.adjoint(P.Astar.apply(y_new) - P.c)
        )

    def z_step(self, state: IterateState, y_new):
        rhs = self.z_rhs(state, y_new)
        z = self.z_solver.solve(rhs)
        if self.config.check_steps and self.z_solver.alpha is None:
            self._check(self.z_solver.H, z, rhs, state.iter, "z")
        return z

    def x_step(self, state: IterateState, r_new):
        return state.x + self.config.tau * self.config.sigma * r_new

    @staticmethod
    def _check(H, sol, rhs, it, label):
        res = np.linalg.norm(H.apply(sol) - rhs)
        if res > STEP_RTOL * max(1.0, np.linalg.norm(rhs)):
            raise SubproblemError(f"{label}-step first-order residual {res:.3e}", it)

    def step(self, state: IterateState) -> IterateState:
        P = self.problem
        y = self.y_step(state)
        z = self.z_step(state, y)
        r = P.residual_vector(y, z)
        x = self.x_step(state, r)
        return IterateState(y=y, z=z, x=x, r=r, z_prev=state.z, iter=state.iter + 1)

    # main loop -----------------------------------------------------------
    def run(self, start: Optional[IterateState] = None, keep_iterates: bool = False,
            lyapunov: Optional[Callable] = None, callback: Optional[Callable] = None) -> SolveResult:
        return run_iterations(self.problem, self.config, self.step, start, keep_iterates, lyapunov, callback)


def run_iterations(problem: CompositeProblem, config: SolverConfig, step: Callable,
                   start: Optional[IterateState] = None, keep_iterates: bool = False,
                   lyapunov: Optional[Callable] = None, callback: Optional[Callable] = None) -> SolveResult:
    """Drive ``step`` until the stopping metric drops below ``config.tol``.

    A record is emitted for the start point (iteration 0) and after every step.
    """
    P, cfg = problem, config
    state = IterateState.initial(P) if start is None else start
    t0 = time.perf_counter()
    records = []
    iterates = [state] if keep_iterates else None

    def record(st):
        st.grad_f = P.loss_f.gradient(st.y)
        res = P.evaluate_metric(st.y, st.z, st.x, st.grad_f)
        rec = DiagnosticsRecord(
            iter=st.iter, eta=res.eta, eta_P=res.eta_P, eta_D=res.eta_D, eta_C=res.eta_C,
            objective=P.evaluate_objective(st.y, st.z),
            lyapunov=None if lyapunov is None else float(lyapunov(st)),
            seconds=time.perf_counter() - t0,
        )
        records.append(rec)
        if callback is not None:
            callback(st, rec)
        return rec

    rec = record(state)
    status = "converged" if rec.eta < cfg.tol else "max_iter_reached"
    while status != "converged" and state.iter < cfg.max_iter:
        try:
            state = step(state)
        except SubproblemError:
            raise
        except (np.linalg.LinAlgError, FloatingPointError, ValueError) as exc:
            raise SubproblemError(str(exc), state.iter + 1) from exc
        if keep_iterates:
            iterates.append(state)
        rec = record(state)
        if rec.eta < cfg.tol:
            status = "converged"
    log.debug("%s: %s after %d iterations (eta=%.3e)", P.name, status, state.iter, rec.eta)
    return SolveResult(state=state, records=records, status=status, iterates=iterates)


def verify_assumptions(problem: CompositeProblem, config: SolverConfig, S=None, T=None):
    """Dense checks of ``S >= -Sf/2``, ``T >= -Sg/2`` and
    ``Sf/2 + S + sigma AA^* > 0``, ``Sg/2 + T + sigma BB^* > 0``.

    Skipped (with a log message) when a block exceeds ``VERIFY_CAP``.
    """
    ny, nz, _ = problem.dims
    S = config.S if S is None else S
    T = config.T if T is None else T
    S = ZeroOperator(ny) if S is None else S
    T = ZeroOperator(nz) if T is None else T
    sigma = config.sigma
    for label, loss, prox_term, G in (("y", problem.loss_f, S, problem.Astar), ("z", problem.loss_g, T, problem.Bstar)):
        if loss.dim > VERIFY_CAP:
            log.info("skipping dense assumption checks for the %s-block (dim %d)", label, loss.dim)
            continue
        half = 0.5 * loss.majorizer + prox_term
        if not is_positive_semidefinite(half):
            raise ConfigurationError(f"proximal term on the {label}-block violates Sigma_hat/2 + S >= 0")
        if not is_positive_definite(half + G.normal(sigma)):
            raise ConfigurationError(f"{label}-block violates Sigma_hat/2 + S + sigma*GG^* > 0")


# ---------------------------------------------------------------------------
# Functional interface
# ---------------------------------------------------------------------------


def y_step(problem, config, state):
    return MajorizedIPADMM(problem, config).y_step(state)


def z_step(problem, config, state, y_new):
    return MajorizedIPADMM(problem, config).z_step(state, y_new)


def x_step(config, state, r_new):
    return state.x + config.tau * config.sigma * np.asarray(r_new, dtype=float)


def solve(problem: CompositeProblem, config: SolverConfig, start: Optional[IterateState] = None,
          keep_iterates: bool = False, lyapunov: Optional[Callable] = None,
          callback: Optional[Callable] = None) -> SolveResult:
    """Run the majorized iPADMM until ``eta < config.tol`` or ``max_iter``."""
    return MajorizedIPADMM(problem, config).run(start, keep_iterates=keep_iterates, lyapunov=lyapunov, callback=callback)
