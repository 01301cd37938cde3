"""Smooth convex losses with quadratic majorizers.

A loss carries a majorizer ``Sigma_hat`` such that
``f(y) <= f(y') + <grad f(y'), y - y'> + 0.5*||y - y'||^2_{Sigma_hat}``
and an optional lower curvature operator ``Sigma`` for the matching
minorization.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.special import expit

from .operators import (
    BlockDiagonal,
    LowRankGram,
    SelfAdjointOperator,
    ZeroOperator,
    as_operator,
    is_positive_semidefinite,
    split_blocks,
)


class SmoothLoss:
    """Base class; subclasses implement ``value`` and ``gradient``."""

    dim: int
    majorizer: SelfAdjointOperator
    lower_curvature: SelfAdjointOperator
    heuristic_majorizer = False

    def value(self, y) -> float:
        raise NotImplementedError

    def gradient(self, y) -> np.ndarray:
        raise NotImplementedError

    def majorized_value(self, y, y_ref) -> float:
        d = np.asarray(y, float) - y_ref
        return self.value(y_ref) + float(self.gradient(y_ref) @ d) + 0.5 * self.majorizer.quadratic_form(d)

    def with_majorizer(self, op: SelfAdjointOperator, heuristic: bool = False) -> "SmoothLoss":
        """Shallow copy using a different majorizer (e.g. ``L*I``)."""
        if op.dim != self.dim:
            raise ValueError("majorizer dimension mismatch")
        new = copy.copy(self)
        new.majorizer = op
        new.heuristic_majorizer = heuristic
        return new

    @property
    def is_zero(self):
        return False


# ---------------------------------------------------------------------------
# Logistic regression
# ---------------------------------------------------------------------------


@dataclass
class LogisticData:
    """Samples ``B_i`` (rows of ``features``) with labels ``b_i`` in {-1, +1}.

    ``A`` is the ``(n+1) x N`` matrix whose columns are ``[-b_i B_i; -b_i]``.
    """

    features: object  # (N, n) ndarray or scipy.sparse matrix
    labels: np.ndarray

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=float).ravel()
        if not np.all(np.isin(self.labels, (-1.0, 1.0))):
            raise ValueError("labels must be -1 or +1")
        if sp.issparse(self.features):
            self.features = sp.csr_matrix(self.features, dtype=float)
        else:
            self.features = np.atleast_2d(np.asarray(self.features, dtype=float))
        if self.features.shape[0] != self.labels.shape[0]:
            raise ValueError("features and labels disagree on the sample count")
        if self.N == 0:
            raise ValueError("dataset must be nonempty")
        ones = np.ones((self.N, 1))
        if sp.issparse(self.features):
            Bt = sp.hstack([self.features, sp.csr_matrix(ones)]).tocsr()
            self.A = sp.csr_matrix(Bt.multiply(-self.labels[:, None]).T)
        else:
            self.A = (-self.labels[:, None] * np.hstack([self.features, ones])).T.copy()

    @property
    def N(self) -> int:
        return self.features.shape[0]

    @property
    def n(self) -> int:
        return self.features.shape[1]

    def margins(self, y_tilde):
        return np.asarray(self.A.T @ y_tilde).ravel()


def logistic_value(data: LogisticData, y_tilde) -> float:
    t = data.margins(y_tilde)
    return float(np.logaddexp(0.0, t).sum() / data.N)


def logistic_gradient(data: LogisticData, y_tilde) -> np.ndarray:
    t = data.margins(y_tilde)
    return np.asarray(data.A @ expit(t)).ravel() / data.N


def logistic_majorizer(data: LogisticData) -> LowRankGram:
    """``(1/4N) A A^T`` as a scaled Gram operator (never densified)."""
    return LowRankGram(data.A, 1.0 / (4.0 * data.N))


def lowrank_majorizer(data: LogisticData, K: int = 40, scale: float | None = None) -> LowRankGram:
    """Truncated ``sum_{i<=K} mu_i P_i P_i^T`` from the top-K singular triplets of A.

    Not guaranteed to majorize the logistic loss. ``scale`` defaults to
    ``1/(4N)`` so that ``K = rank(A)`` reproduces ``logistic_majorizer``.
    """
    A = data.A
    K = int(K)
    if not 1 <= K <= min(A.shape):
        raise ValueError(f"K must lie in [1, {min(A.shape)}]")
    scale = 1.0 / (4.0 * data.N) if scale is None else float(scale)
    if sp.issparse(A) and K < min(A.shape) - 1:
        U, s, _ = spla.svds(A, k=K, v0=np.ones(min(A.shape)) / np.sqrt(min(A.shape)))
        order = np.argsort(s)[::-1]
        U, s = U[:, order], s[order]
    else:
        dense = A.toarray() if sp.issparse(A) else A
        U, s, _ = np.linalg.svd(dense, full_matrices=False)
        U, s = U[:, :K], s[:K]
    return LowRankGram(U * s, scale)


class LogisticLoss(SmoothLoss):
    """``(1/N) sum_i log(1 + exp(A_i^T y))`` on ``y = [w; w0]``."""

    def __init__(self, data: LogisticData, majorizer: SelfAdjointOperator | None = None):
        self.data = data
        self.dim = data.n + 1
        self.majorizer = logistic_majorizer(data) if majorizer is None else majorizer
        self.lower_curvature = ZeroOperator(self.dim)

    def value(self, y):
        return logistic_value(self.data, y)

    def gradient(self, y):
        return logistic_gradient(self.data, y)


# ---------------------------------------------------------------------------
# Quadratic and separable losses
# ---------------------------------------------------------------------------


class QuadraticLoss(SmoothLoss):
    """``0.5*<v, Q v> + <d, v>`` with exact majorizer and minorizer ``Q``."""

    def __init__(self, Q, d=None, check: bool = True):
        Q = as_operator(Q)
        self.dim = Q.dim
        if check and self.dim <= 500 and not is_positive_semidefinite(Q):
            raise ValueError("Q must be positive semidefinite")
        self.Q = Q
        self.d = np.zeros(self.dim) if d is None else np.asarray(d, dtype=float).ravel()
        if self.d.shape[0] != self.dim:
            raise ValueError("linear term has the wrong length")
        self.majorizer = Q
        self.lower_curvature = Q

    def value(self, v):
        v = np.asarray(v, dtype=float)
        return 0.5 * self.Q.quadratic_form(v) + float(self.d @ v)

    def gradient(self, v):
        return self.Q.apply(v) + self.d

    @property
    def is_zero(self):
        return isinstance(self.Q, ZeroOperator) and not np.any(self.d)


def quadratic_loss(Q, d=None) -> QuadraticLoss:
    return QuadraticLoss(Q, d)


def zero_loss(dim: int) -> QuadraticLoss:
    return QuadraticLoss(ZeroOperator(dim), None, check=False)


class SeparableLoss(SmoothLoss):
    """``f(y_1, ..., y_s) = sum_i f_i(y_i)`` with block-diagonal majorizer."""

    def __init__(self, parts: Sequence[SmoothLoss]):
        self.parts = list(parts)
        self.sizes = [p.dim for p in self.parts]
        self.dim = sum(self.sizes)
        self.slices = split_blocks(self.sizes)
        self.majorizer = BlockDiagonal([p.majorizer for p in self.parts])
        self.lower_curvature = BlockDiagonal([p.lower_curvature for p in self.parts])

    def value(self, y):
        y = np.asarray(y, dtype=float)
        return sum(p.value(y[s]) for p, s in zip(self.parts, self.slices))

    def gradient(self, y):
        y = np.asarray(y, dtype=float)
        return np.concatenate([p.gradient(y[s]) for p, s in zip(self.parts, self.slices)])

    @property
    def is_zero(self):
        return all(p.is_zero for p in self.parts)
