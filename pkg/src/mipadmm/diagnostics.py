"""Convergence certificates and per-iteration inequality audits.

Everything here is dense and meant for desk-scale instances (total dimension
at most ``DENSE_CAP``). The audited inequalities are exact in real arithmetic;
each audit accepts a slack of ``-AUDIT_RTOL * scale`` for rounding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.linalg as sla

from .ipadmm import CompositeProblem, IterateState, SolverConfig, kkt_residual
from .operators import DENSE_CAP, DenseSymmetric, DimensionError, ZeroOperator, is_positive_definite

AUDIT_RTOL = 1e-8


def tau_constants(tau: float):
    """``(s_tau, t_tau)``; ``t_tau > 0`` exactly when ``0 < tau < (1+sqrt5)/2``."""
    tau = float(tau)
    if not tau > 0:
        raise ValueError("tau must be positive")
    m = min(tau, 1.0 / tau)
    return (5.0 - tau - 3.0 * m) / 4.0, (1.0 - tau + m) / 2.0


def _lmax(mat):
    return float(sla.eigvalsh(mat)[-1]) if mat.size else 0.0


@dataclass
class CertificateOperators:
    """Dense forms of the operators ``M``, ``H``, ``H_0`` on ``u = (y, z, x)``."""

    s_tau: float
    t_tau: float
    M: np.ndarray
    H: np.ndarray
    H0: np.ndarray
    H_f: np.ndarray
    H_g: np.ndarray
    kappa: tuple
    E: np.ndarray  # E^* as a matrix: u -> A^*y + B^*z
    dims: tuple
    sigma: float
    tau: float
    Sf_S: np.ndarray  # Sigma_hat_f + S
    Sg_T: np.ndarray  # Sigma_hat_g + T
    Sg_T_BB: np.ndarray  # Sigma_hat_g + T + sigma BB^*
    half_f: np.ndarray  # Sigma_hat_f/2 + S
    half_g: np.ndarray  # Sigma_hat_g/2 + T
    Ad: np.ndarray
    Bd: np.ndarray

    def split(self, u):
        ny, nz, _ = self.dims
        return u[:ny], u[ny:ny + nz], u[ny + nz:]


def build_certificates(problem: CompositeProblem, config: SolverConfig) -> CertificateOperators:
    ny, nz, nx = problem.dims
    total = ny + nz + nx
    if total > DENSE_CAP:
        raise DimensionError(f"certificates are assembled densely (dim {total} > {DENSE_CAP})")
    sigma, tau = config.sigma, config.tau
    s_tau, t_tau = tau_constants(tau)
    S = (config.S or ZeroOperator(ny)).to_dense()
    T = (config.T or ZeroOperator(nz)).to_dense()
    Sf = problem.loss_f.majorizer.to_dense()
    Sg = problem.loss_g.majorizer.to_dense()
    Ad = problem.Astar.to_dense()
    Bd = problem.Bstar.to_dense()
    BB = Bd.T @ Bd
    G = np.hstack([Ad, Bd, np.zeros((nx, nx))])
    EE = G.T @ G
    I_x = np.eye(nx)

    M = sla.block_diag(Sf + S, Sg + T + sigma * BB, I_x / (tau * sigma)) + s_tau * sigma * EE
    H_f = 0.5 * Sf + S
    H_g = 0.5 * Sg + T + 2.0 * t_tau * tau * sigma * BB
    H = sla.block_diag(H_f, H_g, t_tau / (tau ** 2 * sigma) * I_x) + 0.25 * t_tau * sigma * EE

    AtA = _lmax(Ad @ Ad.T) if Ad.size else 0.0
    BtB = _lmax(Bd @ Bd.T) if Bd.size else 0.0
    k1 = 3.0 * (_lmax(S + 0.5 * Sf) + 0.5 * _lmax(Sf)) ** 2
    k2 = max(2.0 * (_lmax(T + 0.5 * Sg) + 0.5 * _lmax(Sg)) ** 2, 3.0 * sigma * AtA)
    k3 = 1.0 / sigma + (1.0 - tau) ** 2 * sigma * (3.0 * AtA + 2.0 * BtB)
    H0 = max(k1, k2, k3) * sla.block_diag(np.eye(ny), np.eye(nz) + sigma * BB, I_x / (tau ** 2 * sigma))
    return CertificateOperators(
        s_tau=s_tau, t_tau=t_tau, M=M, H=H, H0=H0, H_f=H_f, H_g=H_g, kappa=(k1, k2, k3), E=G,
        dims=(ny, nz, nx), sigma=sigma, tau=tau, Sf_S=Sf + S, Sg_T=Sg + T, Sg_T_BB=Sg + T + sigma * BB,
        half_f=H_f, half_g=0.5 * Sg + T, Ad=Ad, Bd=Bd,
    )


def _q(mat, v):
    return float(v @ (mat @ v))


# ---------------------------------------------------------------------------
# Inequality audits
# ---------------------------------------------------------------------------


def residual_bound_slack(cert: CertificateOperators, u_prev, u_next, R_next):
    """``(||u_next - u_prev||^2_{H0} - ||R(u_next)||^2, scale)``."""
    du = np.asarray(u_next) - np.asarray(u_prev)
    rhs = _q(cert.H0, du)
    lhs = float(np.dot(R_next, R_next))
    return rhs - lhs, max(1.0, rhs, lhs)


def audit_residual_bound(cert: CertificateOperators, u_prev, u_next, R_next) -> bool:
    """True when ``||R(u_next)||^2 <= ||u_next - u_prev||^2_{H0}`` up to rounding slack."""
    slack, scale = residual_bound_slack(cert, u_prev, u_next, R_next)
    return slack >= -AUDIT_RTOL * scale


def residual_bound_stream(problem: CompositeProblem, cert: CertificateOperators, stream: Sequence[IterateState]):
    """Residual-bound slacks along an iterate stream (one entry per step)."""
    out = []
    for prev, nxt in zip(stream[:-1], stream[1:]):
        R = np.concatenate(kkt_residual(problem, nxt.y, nxt.z, nxt.x))
        out.append(residual_bound_slack(cert, prev.u, nxt.u, R))
    return out


def lyapunov_value(cert: CertificateOperators, ubar, state: IterateState) -> float:
    """``V_k = ||u^k - ubar||^2_M + ||z^k - z^{k-1}||^2_{Sigma_hat_g + T}``."""
    dz = state.z - state.z_prev
    return _q(cert.M, state.u - ubar) + _q(cert.Sg_T, dz)


def lyapunov_function(cert: CertificateOperators, ubar):
    ubar = np.asarray(ubar, dtype=float)
    return lambda state: lyapunov_value(cert, ubar, state)


@dataclass
class DescentAudit:
    """Per-iteration slacks of the descent inequalities.

    ``lyapunov[k]`` is for the transition ``k -> k+1`` (defined for k >= 1),
    ``phi[k]`` for ``k -> k+1`` (k >= 0) and ``combined[k]`` for k >= 1.
    Index 0 of ``lyapunov`` and ``combined`` is ``nan``.
    """

    lyapunov: np.ndarray
    lyapunov_scale: np.ndarray
    phi: np.ndarray
    phi_scale: np.ndarray
    combined: np.ndarray
    combined_scale: np.ndarray
    values: np.ndarray

    @staticmethod
    def _ok(slack, scale):
        mask = ~np.isnan(slack)
        return np.where(mask, slack >= -AUDIT_RTOL * scale, True)

    @property
    def lyapunov_ok(self):
        return self._ok(self.lyapunov, self.lyapunov_scale)

    @property
    def phi_ok(self):
        return self._ok(self.phi, self.phi_scale)

    @property
    def combined_ok(self):
        return self._ok(self.combined, self.combined_scale)

    @property
    def passed(self):
        return bool(self.lyapunov_ok.all() and self.phi_ok.all() and self.combined_ok.all())

    def worst(self):
        def w(s, sc):
            rel = s / sc
            return float(np.nanmin(rel)) if np.any(~np.isnan(rel)) else 0.0

        return {
            "lyapunov": w(self.lyapunov, self.lyapunov_scale),
            "phi": w(self.phi, self.phi_scale),
            "combined": w(self.combined, self.combined_scale),
        }


def audit_descent(cert: CertificateOperators, ubar, stream: Sequence[IterateState]) -> DescentAudit:
    """Audit the Lyapunov descent, the ``phi_k`` descent and the combined inequality.

    ``stream`` holds consecutive iterates starting from the initial point;
    ``ubar`` is a (numerically) exact KKT point.
    """
    if ubar is None:
        raise ValueError("a reference KKT point is required")
    ubar = np.asarray(ubar, dtype=float)
    ybar, zbar, xbar = cert.split(ubar)
    sigma, tau = cert.sigma, cert.tau
    mt = min(tau, 1.0 / tau)
    K = len(stream)

    def phi(st):
        return ((st.x - xbar) @ (st.x - xbar)) / (tau * sigma) + _q(cert.Sf_S, st.y - ybar) + _q(cert.Sg_T_BB, st.z - zbar)

    def hist(st):
        return _q(cert.Sg_T, st.z - st.z_prev)

    phis = np.array([phi(s) for s in stream])
    r2 = np.array([float(s.r @ s.r) for s in stream])
    V = np.array([_q(cert.M, s.u - ubar) + hist(s) for s in stream])
    n = max(K - 1, 0)
    lyap, lyap_sc = np.full(n, np.nan), np.full(n, np.nan)
    ph, ph_sc = np.full(n, np.nan), np.full(n, np.nan)
    comb, comb_sc = np.full(n, np.nan), np.full(n, np.nan)
    for k in range(n):
        a, b = stream[k], stream[k + 1]
        dy, dz = b.y - a.y, b.z - a.z
        mixed = b.r - cert.Bd @ dz  # A^*y^{k+1} + B^*z^k - c
        rhs37 = _q(cert.half_f, dy) + _q(cert.half_g, dz) + (1.0 - tau) * sigma * r2[k + 1] + sigma * float(mixed @ mixed)
        ph[k] = phis[k] - phis[k + 1] - rhs37
        ph_sc[k] = max(1.0, abs(phis[k]))
        if k >= 1:
            du = b.u - a.u
            lyap[k] = V[k] - _q(cert.H, du) - V[k + 1]
            lyap_sc[k] = max(1.0, abs(V[k]))
            left_k = phis[k] + (1.0 - mt) * sigma * r2[k] + hist(a)
            left_k1 = phis[k + 1] + (1.0 - mt) * sigma * r2[k + 1] + hist(b)
            t_next = _q(cert.H_f, dy) + _q(cert.H_g, dz)
            comb[k] = left_k - left_k1 - (t_next + (-tau + min(1.0 + tau, 1.0 + 1.0 / tau)) * sigma * r2[k + 1])
            comb_sc[k] = max(1.0, abs(left_k))
    return DescentAudit(lyap, lyap_sc, ph, ph_sc, comb, comb_sc, V)


# ---------------------------------------------------------------------------
# Rate estimation
# ---------------------------------------------------------------------------


@dataclass
class RateEstimate:
    ratio: float
    r_squared: float
    burn_in: int
    values: np.ndarray = field(repr=False)
    n_points: int = 0

    @property
    def linear(self) -> bool:
        return self.ratio < 1.0 - 1e-12 and self.r_squared >= 0.95


def estimate_linear_rate(values, etas=None, burn_in: Optional[int] = None, eta_threshold: float = 1e-2,
                         min_length: int = 50, floor: float = 0.0) -> RateEstimate:
    """Least-squares fit of ``log V_k`` against ``k`` over the post-burn-in tail.

    The burn-in is the first index with ``eta < eta_threshold`` when ``etas``
    is given, otherwise 0. Values at or below ``floor`` are dropped from the fit.
    """
    V = np.asarray(values, dtype=float)
    if V.size < min_length:
        raise ValueError(f"need at least {min_length} values, got {V.size}")
    if burn_in is None:
        burn_in = 0
        if etas is not None:
            hits = np.flatnonzero(np.asarray(etas, dtype=float) < eta_threshold)
            burn_in = int(hits[0]) if hits.size else 0
    k = np.arange(V.size)[burn_in:]
    tail = V[burn_in:]
    keep = tail > floor
    k, tail = k[keep], tail[keep]
    if k.size < 3:
        raise ValueError("too few positive values after burn-in")
    logs = np.log(tail)
    slope, intercept = np.polyfit(k, logs, 1)
    pred = slope * k + intercept
    ss_tot = float(((logs - logs.mean()) ** 2).sum())
    ss_res = float(((logs - pred) ** 2).sum())
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 0.0
    return RateEstimate(ratio=float(math.exp(slope)), r_squared=r2, burn_in=int(burn_in), values=V, n_points=int(k.size))


# ---------------------------------------------------------------------------
# Positive-definiteness structure
# ---------------------------------------------------------------------------


def check_pd_structure(problem: CompositeProblem, config: SolverConfig):
    """``(pd_blocks, pd_H, pd_M)`` where ``pd_blocks`` is the pair of conditions
    ``Sigma_hat_f/2 + S + sigma AA^* > 0`` and ``Sigma_hat_g/2 + T + sigma BB^* > 0``."""
    cert = build_certificates(problem, config)
    sigma = config.sigma
    blk_y = cert.half_f + sigma * cert.Ad.T @ cert.Ad
    blk_z = cert.half_g + sigma * cert.Bd.T @ cert.Bd
    pd_blocks = is_positive_definite(DenseSymmetric(blk_y, check=False)) and is_positive_definite(
        DenseSymmetric(blk_z, check=False))
    pd_H = is_positive_definite(DenseSymmetric(cert.H, check=False))
    pd_M = is_positive_definite(DenseSymmetric(cert.M, check=False))
    return bool(pd_blocks), bool(pd_H), bool(pd_M)
