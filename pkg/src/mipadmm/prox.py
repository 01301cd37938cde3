"""Proximal mappings and projections.

Every ``prox(v, step)`` method returns ``argmin_z step*theta(z) + 0.5*||z - v||^2``.
Indicator functions ignore ``step``.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np


def _nonneg(name, value):
    value = float(value)
    if not value >= 0:
        raise ValueError(f"{name} must be nonnegative, got {value}")
    return value


def soft_threshold(v, lam):
    """Componentwise ``sign(v) * max(|v| - lam, 0)``."""
    lam = _nonneg("lam", lam)
    v = np.asarray(v, dtype=float)
    return np.sign(v) * np.maximum(np.abs(v) - lam, 0.0)


def tv1d_prox(v, lam):
    """Exact minimizer of ``lam * sum_i |z_i - z_{i-1}| + 0.5*||z - v||^2``.

    Direct (taut-string type) algorithm of Condat: a single forward pass
    that maintains the admissible range of the current segment value and
    backtracks to the last breakpoint when a jump is forced.
    """
    lam = _nonneg("lam", lam)
    y = np.asarray(v, dtype=float).ravel()
    n = y.shape[0]
    x = y.copy()
    if n <= 1 or lam == 0.0:
        return x
    k = k0 = 0
    kplus = kminus = 0
    umin, umax = lam, -lam
    vmin, vmax = y[0] - lam, y[0] + lam
    twolam = 2.0 * lam
    while True:
        while k == n - 1:
            if umin < 0.0:
                while True:
                    x[k0] = vmin
                    k0 += 1
                    if k0 > kminus:
                        break
                k = kminus = k0
                vmin = y[k]
                umin = lam
                umax = vmin + umin - vmax
            elif umax > 0.0:
                while True:
                    x[k0] = vmax
                    k0 += 1
                    if k0 > kplus:
                        break
                k = kplus = k0
                vmax = y[k]
                umax = -lam
                umin = vmax + umax - vmin
            else:
                vmin += umin / (k - k0 + 1)
                x[k0:k + 1] = vmin
                return x
        umin += y[k + 1] - vmin
        if umin < -lam:
            x[k0:kminus + 1] = vmin
            k0 = kminus + 1
            k = kplus = kminus = k0
            vmin = y[k]
            vmax = vmin + twolam
            umin, umax = lam, -lam
            continue
        umax += y[k + 1] - vmax
        if umax > lam:
            x[k0:kplus + 1] = vmax
            k0 = kplus + 1
            k = kplus = kminus = k0
            vmax = y[k]
            vmin = vmax - twolam
            umin, umax = lam, -lam
            continue
        k += 1
        if umin >= lam:
            kminus = k
            vmin += (umin - lam) / (kminus - k0 + 1)
            umin = lam
        if umax <= -lam:
            kplus = k
            vmax += (umax + lam) / (kplus - k0 + 1)
            umax = -lam


def tv1d_certificate(v, z, lam):
    """Worst violation of the dual-chain optimality certificate of ``tv1d_prox``.

    With ``w_i = sum_{j<=i} (v_j - z_j)``, optimality is equivalent to
    ``w_n = 0``, ``|w_i| <= lam`` and ``w_i = -lam*sign(z_{i+1} - z_i)``
    wherever ``z_{i+1} != z_i``. Returns 0 for an exact minimizer.
    """
    v = np.asarray(v, dtype=float)
    z = np.asarray(z, dtype=float)
    if v.size <= 1:
        return float(np.abs(v - z).max(initial=0.0))
    w = np.cumsum(v - z)
    viol = abs(w[-1])
    inner = w[:-1]
    viol = max(viol, float(np.max(np.abs(inner) - lam, initial=0.0)))
    jumps = np.diff(z)
    mask = jumps != 0
    if mask.any():
        viol = max(viol, float(np.abs(inner[mask] + lam * np.sign(jumps[mask])).max()))
    return viol


def fused_lasso_prox(v, lam1, lam2):
    """Prox of ``lam1*||z||_1 + lam2*TV(z)``: soft-threshold of the TV prox."""
    lam1 = _nonneg("lam1", lam1)
    lam2 = _nonneg("lam2", lam2)
    return soft_threshold(tv1d_prox(v, lam2), lam1)


def fused_lasso_certificate(v, z, lam1, lam2, s=None):
    """Worst violation of the fused-Lasso optimality conditions at ``z``.

    ``z`` is optimal iff some ``s`` in the subdifferential of ``||.||_1`` at
    ``z`` makes ``z`` pass the TV chain certificate for ``v - lam1*s``. When
    no witness ``s`` is given it is taken as ``clip(tv1d_prox(v, lam2)/lam1)``.
    """
    v = np.asarray(v, dtype=float)
    z = np.asarray(z, dtype=float)
    if s is None:
        with np.errstate(over="ignore"):
            s = np.clip(tv1d_prox(v, lam2) / lam1, -1.0, 1.0) if lam1 > 0 else np.zeros_like(v)
    s = np.asarray(s, dtype=float)
    viol = float(np.max(np.abs(s) - 1.0, initial=0.0))
    nz = z != 0
    if nz.any() and lam1 > 0:
        viol = max(viol, lam1 * float(np.abs(s[nz] - np.sign(z[nz])).max()))
    return max(viol, tv1d_certificate(v - lam1 * s, z, lam2))


def project_nonneg(v):
    return np.maximum(np.asarray(v, dtype=float), 0.0)


def project_linf_ball(v, radius):
    radius = float(radius)
    if not radius > 0:
        raise ValueError(f"radius must be positive, got {radius}")
    return np.clip(np.asarray(v, dtype=float), -radius, radius)


def _check_partition(groups, n):
    seen = np.zeros(n, dtype=int)
    for g in groups:
        g = np.asarray(g, dtype=int)
        if g.size and (g.min() < 0 or g.max() >= n):
            raise ValueError("group index out of range")
        np.add.at(seen, g, 1)
    if np.any(seen > 1):
        raise ValueError("overlapping groups are not supported")
    if np.any(seen == 0):
        raise ValueError("groups must partition the index range")


_RADIAL_SLACK = 4.0 * np.finfo(float).eps


def project_group_l2_ball(v, groups, radii):
    """Per-group radial projection onto ``{z : ||z_[l]|| <= radius_l}``."""
    v = np.asarray(v, dtype=float)
    radii = np.broadcast_to(np.asarray(radii, dtype=float), (len(groups),))
    if np.any(radii <= 0):
        raise ValueError("radii must be positive")
    _check_partition(groups, v.size)
    out = v.copy()
    for g, rad in zip(groups, radii):
        nrm = np.linalg.norm(v[g])
        if nrm > rad * (1.0 + _RADIAL_SLACK):  # slack keeps projected points fixed
            out[g] = (rad / nrm) * v[g]
    return out


# ---------------------------------------------------------------------------
# Prox objects
# ---------------------------------------------------------------------------


class ProxOperator:
    """A closed proper convex function with an exact proximal mapping."""

    kind = "abstract"

    def __call__(self, v) -> float:
        raise NotImplementedError

    def prox(self, v, step: float = 1.0):
        raise NotImplementedError

    @property
    def is_zero(self):
        return False


class ZeroProx(ProxOperator):
    kind = "zero"

    def __call__(self, v):
        return 0.0

    def prox(self, v, step=1.0):
        return np.array(v, dtype=float, copy=True)

    @property
    def is_zero(self):
        return True


class L1Prox(ProxOperator):
    kind = "l1"

    def __init__(self, lam):
        self.lam = _nonneg("lam", lam)

    def __call__(self, v):
        return self.lam * float(np.abs(v).sum())

    def prox(self, v, step=1.0):
        return soft_threshold(v, self.lam * step)


class TV1DProx(ProxOperator):
    kind = "tv1d"

    def __init__(self, lam):
        self.lam = _nonneg("lam", lam)

    def __call__(self, v):
        return self.lam * float(np.abs(np.diff(v)).sum())

    def prox(self, v, step=1.0):
        return tv1d_prox(v, self.lam * step)


class FusedLassoProx(ProxOperator):
    kind = "fused"

    def __init__(self, lam1, lam2):
        self.lam1 = _nonneg("lam1", lam1)
        self.lam2 = _nonneg("lam2", lam2)

    def __call__(self, v):
        v = np.asarray(v, dtype=float)
        return self.lam1 * float(np.abs(v).sum()) + self.lam2 * float(np.abs(np.diff(v)).sum())

    def prox(self, v, step=1.0):
        return fused_lasso_prox(v, self.lam1 * step, self.lam2 * step)


class _Indicator(ProxOperator):
    feas_tol = 1e-12

    def __call__(self, v):
        return 0.0 if self.contains(v) else np.inf


class NonnegIndicator(_Indicator):
    kind = "nonneg"

    def contains(self, v):
        return bool(np.all(np.asarray(v) >= -self.feas_tol))

    def prox(self, v, step=1.0):
        return project_nonneg(v)


class LinfBallIndicator(_Indicator):
    kind = "linf_ball"

    def __init__(self, radius):
        if not float(radius) > 0:
            raise ValueError("radius must be positive")
        self.radius = float(radius)

    def contains(self, v):
        return bool(np.all(np.abs(v) <= self.radius * (1 + self.feas_tol)))

    def prox(self, v, step=1.0):
        return project_linf_ball(v, self.radius)


class GroupL2BallIndicator(_Indicator):
    kind = "group_l2_ball"

    def __init__(self, groups, radii):
        self.groups = [np.asarray(g, dtype=int) for g in groups]
        self.radii = np.broadcast_to(np.asarray(radii, dtype=float), (len(self.groups),)).copy()
        if np.any(self.radii <= 0):
            raise ValueError("radii must be positive")
        _check_partition(self.groups, sum(g.size for g in self.groups))

    def contains(self, v):
        v = np.asarray(v)
        return all(np.linalg.norm(v[g]) <= r * (1 + self.feas_tol) for g, r in zip(self.groups, self.radii))

    def prox(self, v, step=1.0):
        return project_group_l2_ball(v, self.groups, self.radii)


class SeparableProx(ProxOperator):
    """Sum of prox objects acting on consecutive slices of the vector."""

    kind = "separable"

    def __init__(self, parts: Sequence[ProxOperator], sizes: Sequence[int]):
        self.parts = list(parts)
        self.sizes = list(sizes)
        offs = np.cumsum([0] + self.sizes)
        self.slices = [slice(a, b) for a, b in zip(offs[:-1], offs[1:])]

    def __call__(self, v):
        v = np.asarray(v, dtype=float)
        return sum(p(v[s]) for p, s in zip(self.parts, self.slices))

    def prox(self, v, step=1.0):
        v = np.asarray(v, dtype=float)
        return np.concatenate([p.prox(v[s], step) for p, s in zip(self.parts, self.slices)])

    @property
    def is_zero(self):
        return all(p.is_zero for p in self.parts)
