"""Structured linear maps and self-adjoint operators.

Operators are kept symbolic (zero, scaled identity, diagonal, dense,
scaled low-rank Gram, block-diagonal, weighted sums, sGS terms) so that
they can be applied without materialization. Dense materialization is
reserved for positive-definiteness checks and diagnostics.
"""

from __future__ import annotations

import warnings
from typing import Sequence

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

DENSE_CAP = 5000
PD_RTOL = 1e-10


class DimensionError(ValueError):
    """Raised when an operand has the wrong length or shape."""


class NotPositiveDefiniteError(ValueError):
    """Raised when an operator required to be positive definite is not."""


class EigenvalueConvergenceWarning(RuntimeWarning):
    pass


def _check_dim(v, dim):
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or v.shape[0] != dim:
        raise DimensionError(f"expected a vector of length {dim}, got shape {v.shape}")
    return v


# ---------------------------------------------------------------------------
# Linear maps  M : R^in_dim -> R^out_dim
# ---------------------------------------------------------------------------


class LinearMap:
    """A linear map ``R^in_dim -> R^out_dim`` with an exact adjoint.

    In a composite problem the constraint maps are stored in the form
    in which they appear in the constraint, e.g. ``Astar`` maps the
    y-space into the multiplier space and ``Astar.adjoint`` is ``A``.
    """

    in_dim: int
    out_dim: int

    def apply(self, v):
        raise NotImplementedError

    def adjoint(self, w):
        raise NotImplementedError

    def to_dense(self) -> np.ndarray:
        eye = np.eye(self.in_dim)
        return np.column_stack([self.apply(e) for e in eye]) if self.in_dim else np.zeros((self.out_dim, 0))

    def normal(self, scale: float = 1.0) -> "SelfAdjointOperator":
        """Return ``scale * M^* M`` as a self-adjoint operator on the domain."""
        return LowRankGram(self.to_dense().T, scale)

    def __matmul__(self, other):
        if isinstance(other, LinearMap):
            return ComposedMap(self, other)
        return self.apply(other)

    @property
    def shape(self):
        return (self.out_dim, self.in_dim)


class MatrixMap(LinearMap):
    """Map given by an explicit dense or sparse matrix."""

    def __init__(self, matrix):
        if sp.issparse(matrix):
            self.matrix = sp.csr_matrix(matrix, dtype=float)
        else:
            self.matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
        self.out_dim, self.in_dim = self.matrix.shape

    def apply(self, v):
        v = _check_dim(v, self.in_dim)
        return np.asarray(self.matrix @ v).ravel()

    def adjoint(self, w):
        w = _check_dim(w, self.out_dim)
        return np.asarray(self.matrix.T @ w).ravel()

    def to_dense(self):
        return self.matrix.toarray() if sp.issparse(self.matrix) else self.matrix.copy()

    def normal(self, scale=1.0):
        return LowRankGram(self.matrix.T, scale)


class SelectionMap(LinearMap):
    """``v -> sign * v[indices]``; covers identity, negated identity and
    coordinate selections such as ``[I 0]``."""

    def __init__(self, indices, in_dim: int, sign: float = 1.0):
        self.indices = np.asarray(indices, dtype=int)
        self.in_dim = int(in_dim)
        self.out_dim = len(self.indices)
        self.sign = float(sign)
        if self.out_dim and (self.indices.min() < 0 or self.indices.max() >= self.in_dim):
            raise DimensionError("selection index out of range")

    def apply(self, v):
        v = _check_dim(v, self.in_dim)
        return self.sign * v[self.indices]

    def adjoint(self, w):
        w = _check_dim(w, self.out_dim)
        out = np.zeros(self.in_dim)
        np.add.at(out, self.indices, self.sign * w)
        return out

    def to_dense(self):
        M = np.zeros((self.out_dim, self.in_dim))
        M[np.arange(self.out_dim), self.indices] = self.sign
        return M

    def normal(self, scale=1.0):
        counts = np.bincount(self.indices, minlength=self.in_dim).astype(float)
        return DiagonalOperator(scale * self.sign ** 2 * counts)


def identity_map(dim: int, sign: float = 1.0) -> SelectionMap:
    return SelectionMap(np.arange(dim), dim, sign)


class StackedMap(LinearMap):
    """Vertical stacking ``v -> [M_1 v; M_2 v; ...]``."""

    def __init__(self, maps: Sequence[LinearMap]):
        self.maps = list(maps)
        dims = {m.in_dim for m in self.maps}
        if len(dims) != 1:
            raise DimensionError("stacked maps must share a domain")
        self.in_dim = dims.pop()
        self.out_dim = sum(m.out_dim for m in self.maps)
        self._offsets = np.cumsum([0] + [m.out_dim for m in self.maps])

    def apply(self, v):
        return np.concatenate([m.apply(v) for m in self.maps])

    def adjoint(self, w):
        w = _check_dim(w, self.out_dim)
        out = np.zeros(self.in_dim)
        for m, a, b in zip(self.maps, self._offsets[:-1], self._offsets[1:]):
            out += m.adjoint(w[a:b])
        return out

    def to_dense(self):
        return np.vstack([m.to_dense() for m in self.maps])

    def normal(self, scale=1.0):
        return sum_operators([m.normal(scale) for m in self.maps])


class BlockRowMap(LinearMap):
    """Horizontal concatenation ``[M_1 M_2 ...]`` acting on a stacked vector."""

    def __init__(self, maps: Sequence[LinearMap]):
        self.maps = list(maps)
        dims = {m.out_dim for m in self.maps}
        if len(dims) != 1:
            raise DimensionError("block-row maps must share a codomain")
        self.out_dim = dims.pop()
        self.in_dim = sum(m.in_dim for m in self.maps)
        self._offsets = np.cumsum([0] + [m.in_dim for m in self.maps])

    def apply(self, v):
        v = _check_dim(v, self.in_dim)
        out = np.zeros(self.out_dim)
        for m, a, b in zip(self.maps, self._offsets[:-1], self._offsets[1:]):
            out += m.apply(v[a:b])
        return out

    def adjoint(self, w):
        return np.concatenate([m.adjoint(w) for m in self.maps])

    def to_dense(self):
        return np.hstack([m.to_dense() for m in self.maps])

    def normal(self, scale=1.0):
        return DenseSymmetric(scale * (lambda M: M.T @ M)(self.to_dense()))


class ComposedMap(LinearMap):
    """``outer o inner``."""

    def __init__(self, outer: LinearMap, inner: LinearMap):
        if outer.in_dim != inner.out_dim:
            raise DimensionError("incompatible composition")
        self.outer, self.inner = outer, inner
        self.in_dim, self.out_dim = inner.in_dim, outer.out_dim

    def apply(self, v):
        return self.outer.apply(self.inner.apply(v))

    def adjoint(self, w):
        return self.inner.adjoint(self.outer.adjoint(w))

    def to_dense(self):
        return self.outer.to_dense() @ self.inner.to_dense()


class AdjointMap(LinearMap):
    """The adjoint ``M^*`` of a map, e.g. ``P^*`` reassembling group blocks."""

    def __init__(self, inner: LinearMap):
        self.inner = inner
        self.in_dim, self.out_dim = inner.out_dim, inner.in_dim

    def apply(self, v):
        return self.inner.adjoint(v)

    def adjoint(self, w):
        return self.inner.apply(w)

    def to_dense(self):
        return self.inner.to_dense().T

    def normal(self, scale=1.0):
        inner = self.inner
        if isinstance(inner, SelectionMap) and np.unique(inner.indices).size == inner.out_dim:
            return ScaledIdentity(self.in_dim, scale * inner.sign ** 2)
        return LowRankGram(inner.to_dense(), scale)


# ---------------------------------------------------------------------------
# Self-adjoint operators
# ---------------------------------------------------------------------------


class SelfAdjointOperator:
    """Base class for self-adjoint (not necessarily semidefinite) operators."""

    dim: int

    def apply(self, v) -> np.ndarray:
        raise NotImplementedError

    def to_dense(self) -> np.ndarray:
        return np.column_stack([self.apply(e) for e in np.eye(self.dim)])

    def quadratic_form(self, v) -> float:
        """``<v, G v>``; negative values are possible for indefinite ``G``."""
        v = _check_dim(v, self.dim)
        return float(v @ self.apply(v))

    def scalar_value(self):
        """Return ``alpha`` if the operator is exactly ``alpha * I``, else None."""
        return None

    def diag_plus_lowrank(self):
        """Return ``(d, U)`` with ``G = diag(d) + U U^T`` or None."""
        return None

    # algebra ---------------------------------------------------------------
    def __add__(self, other):
        if not isinstance(other, SelfAdjointOperator):
            return NotImplemented
        return sum_operators([self, other])

    def __sub__(self, other):
        return self + (-1.0) * other

    def __neg__(self):
        return (-1.0) * self

    def __rmul__(self, alpha):
        alpha = float(alpha)
        if alpha == 0.0:
            return ZeroOperator(self.dim)
        if alpha == 1.0:
            return self
        return WeightedSum([(alpha, self)])

    __mul__ = __rmul__

    def __matmul__(self, v):
        return self.apply(v)


class ZeroOperator(SelfAdjointOperator):
    def __init__(self, dim: int):
        self.dim = int(dim)

    def apply(self, v):
        return np.zeros_like(_check_dim(v, self.dim))

    def to_dense(self):
        return np.zeros((self.dim, self.dim))

    def scalar_value(self):
        return 0.0

    def diag_plus_lowrank(self):
        return np.zeros(self.dim), np.zeros((self.dim, 0))


class ScaledIdentity(SelfAdjointOperator):
    def __init__(self, dim: int, alpha: float = 1.0):
        self.dim = int(dim)
        self.alpha = float(alpha)

    def apply(self, v):
        return self.alpha * _check_dim(v, self.dim)

    def to_dense(self):
        return self.alpha * np.eye(self.dim)

    def scalar_value(self):
        return self.alpha

    def diag_plus_lowrank(self):
        return np.full(self.dim, self.alpha), np.zeros((self.dim, 0))


class DiagonalOperator(SelfAdjointOperator):
    def __init__(self, diagonal):
        self.diagonal = np.asarray(diagonal, dtype=float).ravel()
        self.dim = self.diagonal.shape[0]

    def apply(self, v):
        return self.diagonal * _check_dim(v, self.dim)

    def to_dense(self):
        return np.diag(self.diagonal)

    def scalar_value(self):
        if self.dim and np.all(self.diagonal == self.diagonal[0]):
            return float(self.diagonal[0])
        return None

    def diag_plus_lowrank(self):
        return self.diagonal.copy(), np.zeros((self.dim, 0))


class DenseSymmetric(SelfAdjointOperator):
    def __init__(self, matrix, check: bool = True):
        matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
        if matrix.shape[0] != matrix.shape[1]:
            raise DimensionError("matrix must be square")
        if check and not np.allclose(matrix, matrix.T, rtol=1e-12, atol=1e-12 * max(1.0, np.abs(matrix).max(initial=0.0))):
            raise ValueError("matrix is not symmetric")
        self.matrix = 0.5 * (matrix + matrix.T)
        self.dim = matrix.shape[0]

    def apply(self, v):
        return self.matrix @ _check_dim(v, self.dim)

    def to_dense(self):
        return self.matrix.copy()

    def scalar_value(self):
        d = np.diag(self.matrix)
        if np.array_equal(self.matrix, np.diag(d)) and np.all(d == d[0]):
            return float(d[0])
        return None


class LowRankGram(SelfAdjointOperator):
    """``scale * U U^T`` with ``U`` of shape ``(dim, k)`` (dense or sparse)."""

    def __init__(self, factor, scale: float = 1.0):
        self.factor = sp.csr_matrix(factor, dtype=float) if sp.issparse(factor) else np.atleast_2d(np.asarray(factor, dtype=float))
        self.scale = float(scale)
        self.dim, self.rank = self.factor.shape

    def apply(self, v):
        v = _check_dim(v, self.dim)
        return self.scale * np.asarray(self.factor @ np.asarray(self.factor.T @ v).ravel()).ravel()

    def to_dense(self):
        U = self.factor.toarray() if sp.issparse(self.factor) else self.factor
        return self.scale * (U @ U.T)

    def scalar_value(self):
        return 0.0 if self.scale == 0.0 or self.rank == 0 else None

    def diag_plus_lowrank(self):
        if self.scale < 0:
            return None
        return np.zeros(self.dim), np.sqrt(self.scale) * self.factor


class BlockDiagonal(SelfAdjointOperator):
    def __init__(self, blocks: Sequence[SelfAdjointOperator]):
        self.blocks = list(blocks)
        self.sizes = [b.dim for b in self.blocks]
        self.dim = sum(self.sizes)
        self._offsets = np.cumsum([0] + self.sizes)

    def apply(self, v):
        v = _check_dim(v, self.dim)
        return np.concatenate([b.apply(v[a:c]) for b, a, c in zip(self.blocks, self._offsets[:-1], self._offsets[1:])])

    def to_dense(self):
        return sla.block_diag(*[b.to_dense() for b in self.blocks]) if self.blocks else np.zeros((0, 0))

    def scalar_value(self):
        vals = [b.scalar_value() for b in self.blocks]
        if vals and all(v is not None for v in vals) and len(set(vals)) == 1:
            return vals[0]
        return None

    def diag_plus_lowrank(self):
        parts = [b.diag_plus_lowrank() for b in self.blocks]
        if any(p is None for p in parts):
            return None
        d = np.concatenate([p[0] for p in parts])
        cols = []
        for (_, U), a, c in zip(parts, self._offsets[:-1], self._offsets[1:]):
            if U.shape[1]:
                U = U.toarray() if sp.issparse(U) else U
                pad = np.zeros((self.dim, U.shape[1]))
                pad[a:c] = U
                cols.append(pad)
        U = np.hstack(cols) if cols else np.zeros((self.dim, 0))
        return d, U


class WeightedSum(SelfAdjointOperator):
    """``sum_i w_i G_i``."""

    def __init__(self, terms):
        self.terms = [(float(w), op) for w, op in terms]
        dims = {op.dim for _, op in self.terms}
        if len(dims) != 1:
            raise DimensionError("summands must share a dimension")
        self.dim = dims.pop()

    def apply(self, v):
        v = _check_dim(v, self.dim)
        out = np.zeros(self.dim)
        for w, op in self.terms:
            out += w * op.apply(v)
        return out

    def to_dense(self):
        out = np.zeros((self.dim, self.dim))
        for w, op in self.terms:
            out += w * op.to_dense()
        return out

    def scalar_value(self):
        total = 0.0
        for w, op in self.terms:
            s = op.scalar_value()
            if s is None:
                return None
            total += w * s
        return total

    def diag_plus_lowrank(self):
        d = np.zeros(self.dim)
        grams = {}  # id(factor) -> [factor, accumulated weight]
        for w, op in self.terms:
            if isinstance(op, LowRankGram):
                entry = grams.setdefault(id(op.factor), [op.factor, 0.0])
                entry[1] += w * op.scale
                continue
            part = op.diag_plus_lowrank()
            if part is None:
                return None
            pd_, U = part
            d += w * pd_
            if U.shape[1]:
                if w < 0:
                    return None
                entry = grams.setdefault(id(U), [U, 0.0])
                entry[1] += w
        cols = []
        for factor, weight in grams.values():
            if weight < -1e-15 * max(1.0, abs(weight)):
                return None
            if weight > 0:
                cols.append(np.sqrt(weight) * factor)
        if not cols:
            return d, np.zeros((self.dim, 0))
        if any(sp.issparse(c) for c in cols):
            return d, sp.hstack([sp.csr_matrix(c) for c in cols]).tocsr()
        return d, np.hstack(cols)


def sum_operators(ops: Sequence[SelfAdjointOperator]) -> SelfAdjointOperator:
    """Flattening sum that drops zero operators."""
    terms = []
    dim = None
    for op in ops:
        dim = op.dim if dim is None else dim
        if op.dim != dim:
            raise DimensionError("summands must share a dimension")
        if isinstance(op, ZeroOperator):
            continue
        if isinstance(op, WeightedSum):
            terms.extend(op.terms)
        else:
            terms.append((1.0, op))
    if not terms:
        return ZeroOperator(dim)
    if len(terms) == 1 and terms[0][0] == 1.0:
        return terms[0][1]
    return WeightedSum(terms)


def as_operator(obj) -> SelfAdjointOperator:
    """Wrap an ndarray (or pass through an operator)."""
    if isinstance(obj, SelfAdjointOperator):
        return obj
    return DenseSymmetric(obj)


def quadratic_form(op, v) -> float:
    return as_operator(op).quadratic_form(v)


# ---------------------------------------------------------------------------
# Spectral helpers
# ---------------------------------------------------------------------------


def max_eigenvalue(op, tol: float = 1e-8, which: str = "LA", maxiter: int = 10000) -> float:
    """Largest eigenvalue (``which="LA"``) or largest magnitude (``"LM"``).

    Small operators are handled by a dense symmetric eigensolver; large ones
    by implicitly restarted Lanczos. On non-convergence the best available
    estimate is returned and an ``EigenvalueConvergenceWarning`` is issued.
    """
    op = as_operator(op)
    if op.dim == 0:
        return 0.0
    s = op.scalar_value()
    if s is not None:
        return abs(s) if which == "LM" else s
    if isinstance(op, DiagonalOperator):
        d = op.diagonal
        return float(np.abs(d).max() if which == "LM" else d.max())
    if op.dim <= 400:
        ev = sla.eigvalsh(op.to_dense())
        return float(np.abs(ev).max() if which == "LM" else ev[-1])
    lin = spla.LinearOperator((op.dim, op.dim), matvec=op.apply, dtype=float)
    v0 = np.ones(op.dim) / np.sqrt(op.dim)
    try:
        ev = spla.eigsh(lin, k=1, which=which, tol=tol, maxiter=maxiter, v0=v0, return_eigenvectors=False)
        val = float(ev[0])
    except spla.ArpackNoConvergence as exc:
        warnings.warn("Lanczos iteration did not converge; returning best estimate", EigenvalueConvergenceWarning)
        ev = exc.eigenvalues
        if len(ev) == 0:
            v = v0
            for _ in range(50):
                w = op.apply(v)
                v = w / max(np.linalg.norm(w), 1e-300)
            val = float(v @ op.apply(v))
        else:
            val = float(ev[0])
    return abs(val) if which == "LM" else val


def is_positive_definite(op, tol: float = PD_RTOL) -> bool:
    """True iff ``lambda_min > tol * max(1, lambda_max)`` of the dense form."""
    op = as_operator(op)
    if op.dim > DENSE_CAP:
        raise DimensionError(f"dense PD check limited to dim <= {DENSE_CAP}")
    if op.dim == 0:
        return True
    ev = sla.eigvalsh(op.to_dense())
    return bool(ev[0] > tol * max(1.0, ev[-1]))


def is_positive_semidefinite(op, tol: float = PD_RTOL) -> bool:
    op = as_operator(op)
    if op.dim > DENSE_CAP:
        raise DimensionError(f"dense PSD check limited to dim <= {DENSE_CAP}")
    if op.dim == 0:
        return True
    ev = sla.eigvalsh(op.to_dense())
    return bool(ev[0] >= -tol * max(1.0, abs(ev[-1]), abs(ev[0])))


# ---------------------------------------------------------------------------
# Factorizations
# ---------------------------------------------------------------------------


class SMWFactorization:
    """Solver for ``(D + U U^T) x = b`` with ``D`` positive diagonal.

    Uses the Sherman-Morrison-Woodbury identity with a Cholesky factor of
    the capacitance matrix ``I + U^T D^{-1} U``.
    """

    def __init__(self, diagonal, factor):
        self.diagonal = np.asarray(diagonal, dtype=float).ravel()
        if np.any(self.diagonal <= 0):
            raise NotPositiveDefiniteError("SMW requires a strictly positive diagonal part")
        self.factor = sp.csr_matrix(factor) if sp.issparse(factor) else np.asarray(factor, dtype=float).reshape(len(self.diagonal), -1)
        self.dim, self.rank = self.factor.shape
        self._dinv = 1.0 / self.diagonal
        if self.rank:
            DinvU = self.factor.multiply(self._dinv[:, None]) if sp.issparse(self.factor) else self._dinv[:, None] * self.factor
            cap = np.eye(self.rank) + np.asarray((self.factor.T @ DinvU).toarray() if sp.issparse(DinvU) else self.factor.T @ DinvU)
            try:
                self._cap = sla.cho_factor(0.5 * (cap + cap.T))
            except np.linalg.LinAlgError as exc:
                raise NotPositiveDefiniteError("singular capacitance matrix") from exc
            self._DinvU = DinvU.toarray() if sp.issparse(DinvU) else DinvU

    def solve(self, b):
        b = _check_dim(b, self.dim)
        x = self._dinv * b
        if self.rank:
            t = np.asarray(self.factor.T @ x).ravel()
            x = x - self._DinvU @ sla.cho_solve(self._cap, t)
        return x


def smw_solve(fact: SMWFactorization, b) -> np.ndarray:
    return fact.solve(b)


class DenseFactorization:
    def __init__(self, matrix):
        self.dim = matrix.shape[0]
        try:
            self._chol = sla.cho_factor(matrix)
        except np.linalg.LinAlgError as exc:
            raise NotPositiveDefiniteError("system operator is not positive definite") from exc

    def solve(self, b):
        return sla.cho_solve(self._chol, _check_dim(b, self.dim))


class ScalarFactorization:
    def __init__(self, dim, alpha):
        if alpha <= 0:
            raise NotPositiveDefiniteError(f"scalar system operator {alpha} is not positive")
        self.dim, self.alpha = dim, float(alpha)

    def solve(self, b):
        return _check_dim(b, self.dim) / self.alpha


def factorize(op: SelfAdjointOperator, method: str = "auto", dense_cap: int = 2000, rank_cap: int = 2000):
    """Factor a positive definite operator once for repeated solves.

    ``method`` is one of ``"auto"``, ``"dense"``, ``"smw"``. In auto mode a
    dense Cholesky factorization is used up to ``dense_cap`` and SMW beyond
    that when the operator is a positive diagonal plus a Gram term.
    """
    op = as_operator(op)
    s = op.scalar_value()
    if s is not None and method == "auto":
        return ScalarFactorization(op.dim, s)
    if method == "dense" or (method == "auto" and op.dim <= dense_cap):
        if op.dim > DENSE_CAP and method == "dense":
            raise DimensionError("operator too large for dense factorization")
        M = op.to_dense()
        ev = sla.eigvalsh(M)
        if ev[0] <= PD_RTOL * max(1.0, ev[-1]):
            raise NotPositiveDefiniteError(f"system operator has lambda_min={ev[0]:.3e}")
        return DenseFactorization(M)
    part = op.diag_plus_lowrank()
    if part is None:
        raise NotPositiveDefiniteError("operator has no diagonal-plus-Gram structure for SMW")
    d, U = part
    if U.shape[1] > rank_cap:
        raise DimensionError(f"low-rank part has {U.shape[1]} columns (cap {rank_cap})")
    return SMWFactorization(d, U)


# ---------------------------------------------------------------------------
# Symmetric Gauss-Seidel term
# ---------------------------------------------------------------------------


def split_blocks(sizes: Sequence[int]):
    offs = np.cumsum([0] + list(sizes))
    return [slice(a, b) for a, b in zip(offs[:-1], offs[1:])]


class SGSTerm(SelfAdjointOperator):
    """``M_u M_d^{-1} M_u^*`` for a block-partitioned symmetric matrix.

    ``M_u`` is the strictly upper block-triangular part and ``M_d`` the
    block diagonal; the result is positive semidefinite.
    """

    def __init__(self, matrix, sizes: Sequence[int]):
        M = np.asarray(matrix, dtype=float)
        self.dim = M.shape[0]
        self.sizes = list(sizes)
        if sum(self.sizes) != self.dim:
            raise DimensionError("block sizes do not match operator dimension")
        self.slices = split_blocks(self.sizes)
        upper = np.zeros_like(M)
        self._chol = []
        for i, si in enumerate(self.slices):
            blk = M[si, si]
            if not is_positive_definite(DenseSymmetric(blk, check=False)):
                raise NotPositiveDefiniteError(f"diagonal block {i} is not positive definite")
            self._chol.append(sla.cho_factor(blk))
            for sj in self.slices[i + 1:]:
                upper[si, sj] = M[si, sj]
        self.upper = upper

    def _dinv(self, w):
        return np.concatenate([sla.cho_solve(c, w[s]) for c, s in zip(self._chol, self.slices)])

    def apply(self, v):
        v = _check_dim(v, self.dim)
        return self.upper @ self._dinv(self.upper.T @ v)

    def to_dense(self):
        Ut = self.upper.T
        Dinv_Ut = np.column_stack([self._dinv(Ut[:, j]) for j in range(self.dim)])
        return self.upper @ Dinv_Ut


def sgs_augmentation(op, sizes: Sequence[int]) -> SGSTerm:
    """Return ``sGS(M) = M_u M_d^{-1} M_u^*`` for the partition ``sizes``."""
    M = op.to_dense() if isinstance(op, SelfAdjointOperator) else np.asarray(op, dtype=float)
    return SGSTerm(M, sizes)
