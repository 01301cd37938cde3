"""Data ingestion, reproducible synthetic data, trace/bench output and the CLI.

Random numbers come from a counter-mode SplitMix64 generator so that any
language can regenerate the same synthetic instances from a seed:

* the i-th raw 64-bit output (i = 1, 2, ...) is ``mix(seed + i * 0x9E3779B97F4A7C15)``
  with the standard SplitMix64 finalizer ``mix``;
* a uniform is ``((x >> 11) + 0.5) * 2**-53``, which lies strictly in (0, 1);
* standard normals use Box-Muller on consecutive uniform pairs ``(u1, u2)``,
  emitting ``sqrt(-2 ln u1) cos(2 pi u2)`` then ``sqrt(-2 ln u1) sin(2 pi u2)``.

Matrices are filled in row-major order.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.special import expit

from . import diagnostics as diag
from .ipadmm import VARIANTS, ConfigurationError, SubproblemError, solve
from .losses import LogisticData
from .problems import (
    DEFAULT_R,
    DEFAULT_SIGMA,
    DEFAULT_TAU,
    MAX_ITER,
    TOL_CONSTRAINED,
    TOL_FUSED,
    build_constrained_logistic,
    build_fused_lasso_logistic,
    build_lasso_logistic,
    build_sparse_group_lasso_dual,
    lambda_from_gamma,
)
from .prox import (
    fused_lasso_certificate,
    fused_lasso_prox,
    project_group_l2_ball,
    project_linf_ball,
    project_nonneg,
    soft_threshold,
    tv1d_certificate,
    tv1d_prox,
)

log = logging.getLogger(__name__)

Dataset = LogisticData

TRACE_HEADER = "iter,eta,eta_P,eta_D,eta_C,objective,lyapunov,seconds"
BENCH_HEADER = "scenario,variant,gamma,mean_iters,mean_seconds,failures"

EXIT_OK, EXIT_NONCONVERGED, EXIT_INPUT = 0, 1, 2

# ---------------------------------------------------------------------------
# Random numbers
# ---------------------------------------------------------------------------

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


def _mix(z):
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


class SplitMix64:
    """Counter-mode SplitMix64; ``raw(k)`` returns the next ``k`` outputs."""

    def __init__(self, seed: int):
        self.seed = np.uint64(int(seed) % 2 ** 64)
        self.counter = 0

    def raw(self, k: int) -> np.ndarray:
        i = np.arange(self.counter + 1, self.counter + k + 1, dtype=np.uint64)
        self.counter += k
        with np.errstate(over="ignore"):
            return _mix(self.seed + i * _GOLDEN)

    def uniform(self, k: int) -> np.ndarray:
        return ((self.raw(k) >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0 ** -53

    def normal(self, k: int) -> np.ndarray:
        pairs = (k + 1) // 2
        u = self.uniform(2 * pairs)
        rad = np.sqrt(-2.0 * np.log(u[0::2]))
        ang = 2.0 * np.pi * u[1::2]
        out = np.empty(2 * pairs)
        out[0::2] = rad * np.cos(ang)
        out[1::2] = rad * np.sin(ang)
        return out[:k]

    def integers(self, k: int) -> List[int]:
        """``k`` nonnegative integers below ``2**63`` (for derived seeds)."""
        return [int(v >> np.uint64(1)) for v in self.raw(k)]


def derive_seed(master: int, *keys: int) -> int:
    """Deterministic child seed from a master seed and integer keys."""
    z = np.uint64(int(master) % 2 ** 64)
    with np.errstate(over="ignore"):
        for key in keys:
            z = _mix(z + np.uint64(int(key) + 1) * _GOLDEN)
    return int(z >> np.uint64(1))


# ---------------------------------------------------------------------------
# Synthetic data
# ---------------------------------------------------------------------------


def synth_labels(rng: SplitMix64, B: np.ndarray, density: float = 0.1) -> np.ndarray:
    """Labels from a sparse ground truth ``w`` (10% nonzeros by default).

    The support is the ``k`` smallest of ``n`` uniforms, the values are
    standard normal and ``b_i = +1`` when a uniform falls below ``sigmoid(B_i w)``.
    """
    N, n = B.shape
    k = max(1, int(round(density * n)))
    support = np.argsort(rng.uniform(n), kind="stable")[:k]
    w = np.zeros(n)
    w[support] = rng.normal(k)
    p = expit(B @ w)
    return np.where(rng.uniform(N) < p, 1.0, -1.0)


def synth_logistic(N: int, n: int, seed: int) -> LogisticData:
    """Standard normal features (N x n) with sparse-ground-truth labels."""
    if N < 1 or n < 1:
        raise ValueError("dimensions must be positive")
    rng = SplitMix64(seed)
    B = rng.normal(N * n).reshape(N, n)
    return LogisticData(B, synth_labels(rng, B))


def synth_constrained(N: int, n: int, m: int, seed: int):
    """``(data, D, d)`` with ``B``, ``D``, ``d`` i.i.d. standard normal.

    Draw order: ``B`` (N x n), ``D`` (m x n), ``d`` (m), then the labels.
    """
    if N < 1 or n < 1 or m < 0:
        raise ValueError("dimensions must be positive")
    rng = SplitMix64(seed)
    B = rng.normal(N * n).reshape(N, n)
    D = rng.normal(m * n).reshape(m, n)
    d = rng.normal(m)
    return LogisticData(B, synth_labels(rng, B)), D, d


# ---------------------------------------------------------------------------
# LIBSVM format
# ---------------------------------------------------------------------------


class LibsvmFormatError(ValueError):
    def __init__(self, msg, line, column):
        super().__init__(f"line {line}, column {column}: {msg}")
        self.line, self.column = line, column


def normalize_labels(raw: np.ndarray) -> np.ndarray:
    """Map labels onto {-1, +1}; any other two-valued set maps its smaller value to -1."""
    vals = np.unique(raw)
    if np.all(np.isin(vals, (-1.0, 1.0))):
        return raw.astype(float)
    if vals.size != 2:
        raise ValueError(f"cannot map label set {vals.tolist()} onto {{-1, +1}}")
    return np.where(raw == vals[0], -1.0, 1.0)


def parse_libsvm(stream, n_features: Optional[int] = None) -> LogisticData:
    """Parse ``<label> <index>:<value> ...`` lines (1-based, increasing indices)."""
    text = stream.read() if hasattr(stream, "read") else str(stream)
    labels, data, indices, indptr = [], [], [], [0]
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0]
        if not body.strip():
            continue
        col = 0
        tokens = []
        for tok in body.split():
            col = body.index(tok, col)
            tokens.append((tok, col + 1))
            col += len(tok)
        tok, c = tokens[0]
        try:
            labels.append(float(tok))
        except ValueError:
            raise LibsvmFormatError(f"bad label {tok!r}", lineno, c) from None
        last = 0
        for tok, c in tokens[1:]:
            head, sep, tail = tok.partition(":")
            try:
                if not sep:
                    raise ValueError
                idx, val = int(head), float(tail)
            except ValueError:
                raise LibsvmFormatError(f"malformed token {tok!r}", lineno, c) from None
            if idx < 1:
                raise LibsvmFormatError(f"index {idx} must be >= 1", lineno, c)
            if idx <= last:
                raise LibsvmFormatError(f"indices must be strictly increasing ({idx} after {last})", lineno, c)
            last = idx
            indices.append(idx - 1)
            data.append(val)
        indptr.append(len(indices))
    if not labels:
        raise ValueError("dataset must be nonempty")
    n = (max(indices) + 1) if indices else 0
    if n_features is not None:
        if n_features < n:
            raise ValueError(f"n_features={n_features} is smaller than the largest index {n}")
        n = int(n_features)
    X = sp.csr_matrix((np.asarray(data, float), np.asarray(indices, int), np.asarray(indptr, int)),
                      shape=(len(labels), max(n, 1)))
    return LogisticData(X, normalize_labels(np.asarray(labels, float)))


def serialize_libsvm(data: LogisticData) -> str:
    X = sp.csr_matrix(data.features)
    out = []
    for i in range(X.shape[0]):
        a, b = X.indptr[i], X.indptr[i + 1]
        order = np.argsort(X.indices[a:b], kind="stable")
        toks = ["+1" if data.labels[i] > 0 else "-1"]
        toks += [f"{X.indices[a + j] + 1}:{float(X.data[a + j])!r}" for j in order]
        out.append(" ".join(toks))
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# Trace CSV
# ---------------------------------------------------------------------------


def _fmt(v) -> str:
    if v is None:
        return ""
    return repr(float(v))


def trace_rows(records) -> List[list]:
    return [[r.iter, r.eta, r.eta_P, r.eta_D, r.eta_C, r.objective, r.lyapunov, r.seconds] for r in records]


def write_trace(rows, path) -> None:
    """Write per-iteration rows (records or lists) with the fixed header and LF endings."""
    rows = list(rows)
    if not rows:
        raise ValueError("no trace rows")
    if not isinstance(rows[0], (list, tuple)):
        rows = trace_rows(rows)
    lines = [TRACE_HEADER]
    for r in rows:
        lines.append(",".join([str(int(r[0]))] + [_fmt(v) for v in r[1:]]))
    with open(path, "w", newline="\n", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def read_trace(path) -> List[list]:
    with open(path, newline="", encoding="ascii") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if ",".join(header) != TRACE_HEADER:
            raise ValueError("unexpected trace header")
        return [[int(r[0])] + [None if v == "" else float(v) for v in r[1:]] for r in reader]


# ---------------------------------------------------------------------------
# Benchmarks
# ---------------------------------------------------------------------------


@dataclass
class Scenario:
    name: str
    problem: str = "constrained"
    N: int = 30
    n: int = 50
    m: int = 20
    gamma: float = 1e-2
    sigma: float = DEFAULT_SIGMA
    tau: float = DEFAULT_TAU
    r: float = DEFAULT_R
    tol: Optional[float] = None
    max_iter: int = MAX_ITER

    @classmethod
    def from_dict(cls, d):
        known = {k: d[k] for k in cls.__dataclass_fields__ if k in d}
        extra = set(d) - set(known)
        if extra:
            raise ValueError(f"unknown scenario keys {sorted(extra)}")
        if "name" not in known:
            known["name"] = f"{d.get('N', 30)},{d.get('n', 50)},{d.get('m', 20)}"
        return cls(**known)


DESK_SCENARIO = Scenario(name="30,50,20", problem="constrained", N=30, n=50, m=20, gamma=1e-2, sigma=3e-3)


def build_instance(sc: Scenario, variant: str, seed: int):
    if sc.problem == "constrained":
        data, D, d = synth_constrained(sc.N, sc.n, sc.m, seed)
        lam = lambda_from_gamma(data, sc.gamma)
        tol = TOL_CONSTRAINED if sc.tol is None else sc.tol
        return build_constrained_logistic(data, D, d, lam, sigma=sc.sigma, r=sc.r, variant=variant, tau=sc.tau,
                                          tol=tol, max_iter=sc.max_iter)
    data = synth_logistic(sc.N, sc.n, seed)
    lam = lambda_from_gamma(data, sc.gamma)
    tol = TOL_FUSED if sc.tol is None else sc.tol
    kw = dict(sigma=sc.sigma, r=sc.r, variant=variant, tau=sc.tau, tol=tol, max_iter=sc.max_iter)
    if sc.problem == "lasso":
        return build_lasso_logistic(data, lam, **kw)
    if sc.problem == "fused":
        return build_fused_lasso_logistic(data, lam, lam, **kw)
    raise ValueError(f"unsupported bench problem {sc.problem!r}")


@dataclass
class BenchCell:
    scenario: str
    variant: str
    gamma: float
    iterations: List[int] = field(default_factory=list)
    seconds: List[float] = field(default_factory=list)
    failures: int = 0
    errors: List[str] = field(default_factory=list)

    @property
    def mean_iters(self):
        return float(np.mean(self.iterations)) if self.iterations else float("nan")

    @property
    def mean_seconds(self):
        return float(np.mean(self.seconds)) if self.seconds else float("nan")


def bench(scenarios: Sequence[Scenario], variants: Sequence[str] = VARIANTS, repeats: int = 10,
          seed: int = 0) -> List[BenchCell]:
    """Mean iteration counts and wall times per (scenario, variant).

    Instance ``j`` of scenario ``i`` uses ``derive_seed(seed, i, j)`` for every
    variant, so all variants see the same data. Failed solves count in
    ``failures``; runs hitting the iteration cap also enter the mean.
    """
    if repeats < 1:
        raise ValueError("repeats must be positive")
    cells = []
    for i, sc in enumerate(scenarios):
        for v in variants:
            cell = BenchCell(sc.name, v, sc.gamma)
            for j in range(repeats):
                t0 = time.perf_counter()
                try:
                    problem, config = build_instance(sc, v, derive_seed(seed, i, j))
                    res = solve(problem, config)
                except (ConfigurationError, SubproblemError, ValueError, np.linalg.LinAlgError) as exc:
                    cell.failures += 1
                    cell.errors.append(f"instance {j}: {exc}")
                    continue
                cell.seconds.append(time.perf_counter() - t0)
                cell.iterations.append(res.iterations)
                if not res.converged:
                    cell.failures += 1
            cells.append(cell)
    return cells


def bench_csv(cells: Sequence[BenchCell], timings: bool = True) -> str:
    """CSV text; with ``timings=False`` the wall-time column is left empty."""
    lines = [BENCH_HEADER]
    for c in cells:
        secs = f"{c.mean_seconds:.4f}" if timings else ""
        lines.append(f"{c.scenario},{c.variant},{float(c.gamma)!r},{c.mean_iters:.1f},{secs},{c.failures}")
    return "\n".join(lines) + "\n"


def bench_text(cells: Sequence[BenchCell], timings: bool = True) -> str:
    head = ["scenario", "variant", "gamma", "mean_iters", "mean_seconds", "failures"]
    rows = [[c.scenario, c.variant, f"{c.gamma:g}", f"{c.mean_iters:.1f}",
             f"{c.mean_seconds:.3f}" if timings else "-", str(c.failures)] for c in cells]
    widths = [max(len(h), *(len(r[k]) for r in rows)) if rows else len(h) for k, h in enumerate(head)]
    fmt = lambda r: "  ".join(s.rjust(w) for s, w in zip(r, widths))
    return "\n".join([fmt(head)] + [fmt(r) for r in rows]) + "\n"


def load_scenarios(path) -> tuple:
    """Read ``{"scenarios": [...], "variants": [...], "repeats": R, "seed": S}``."""
    with open(path, encoding="utf-8") as fh:
        spec = json.load(fh)
    if isinstance(spec, list):
        spec = {"scenarios": spec}
    scs = [Scenario.from_dict(d) for d in spec.get("scenarios", [])]
    if not scs:
        raise ValueError("scenario file lists no scenarios")
    variants = spec.get("variants", list(VARIANTS))
    bad = [v for v in variants if v not in VARIANTS]
    if bad:
        raise ValueError(f"unknown variants {bad}")
    return scs, variants, spec.get("repeats"), spec.get("seed")


# ---------------------------------------------------------------------------
# Prox self-test
# ---------------------------------------------------------------------------


def prox_selftest(count: int = 1000, seed: int = 0, tol: float = 1e-8) -> dict:
    """Worst certificate violations over random instances, keyed by check."""
    rng = SplitMix64(seed)
    worst = {"tv1d_chain": 0.0, "fused_certificate": 0.0, "nonexpansive": 0.0, "idempotent": 0.0}
    for _ in range(count):
        n = 1 + int(rng.uniform(1)[0] * 12)
        lam1, lam2 = rng.uniform(2) * 2.0
        v, w = 2.0 * rng.normal(n), 2.0 * rng.normal(n)
        z = tv1d_prox(v, lam2)
        worst["tv1d_chain"] = max(worst["tv1d_chain"], tv1d_certificate(v, z, lam2))
        zf = fused_lasso_prox(v, lam1, lam2)
        worst["fused_certificate"] = max(worst["fused_certificate"], fused_lasso_certificate(v, zf, lam1, lam2))
        ops = [lambda a: soft_threshold(a, lam1), lambda a: tv1d_prox(a, lam2),
               lambda a: fused_lasso_prox(a, lam1, lam2), project_nonneg,
               lambda a: project_linf_ball(a, lam1 + 0.1),
               lambda a: project_group_l2_ball(a, [np.arange(n)], lam2 + 0.1)]
        for op in ops:
            gap = np.linalg.norm(op(v) - op(w)) - np.linalg.norm(v - w)
            worst["nonexpansive"] = max(worst["nonexpansive"], gap)
        for op in ops[3:]:
            p = op(v)
            worst["idempotent"] = max(worst["idempotent"], float(np.abs(op(p) - p).max()))
    return {k: (val, val <= tol) for k, val in worst.items()}


# ---------------------------------------------------------------------------
# Verification of the convergence inequalities
# ---------------------------------------------------------------------------


def reference_point(problem, config, tol: float = 1e-10, max_iter: int = 200000):
    """High-accuracy KKT point by running the same method to ``tol``."""
    from dataclasses import replace

    res = solve(problem, replace(config, tol=tol, max_iter=max_iter))
    return res.state.u, res.records[-1].eta


def verify_run(problem, config, ref_tol: float = 1e-10):
    """Run the solver with iterates kept and audit every inequality.

    Returns a dict ``name -> (passed, worst relative slack)`` plus the result.
    """
    ubar, ref_eta = reference_point(problem, config, tol=ref_tol)
    cert = diag.build_certificates(problem, config)
    res = solve(problem, config, keep_iterates=True, lyapunov=diag.lyapunov_function(cert, ubar))
    rb_slacks = diag.residual_bound_stream(problem, cert, res.iterates)
    worst_rb = min((s / sc for s, sc in rb_slacks), default=0.0)
    audit = diag.audit_descent(cert, ubar, res.iterates)
    w = audit.worst()
    pd_blocks, pd_H, pd_M = diag.check_pd_structure(problem, config)
    out = {
        "residual bound": (worst_rb >= -diag.AUDIT_RTOL, worst_rb),
        "phi descent": (bool(audit.phi_ok.all()), w["phi"]),
        "combined descent": (bool(audit.combined_ok.all()), w["combined"]),
        "lyapunov descent": (bool(audit.lyapunov_ok.all()), w["lyapunov"]),
        "pd structure": ((pd_blocks == pd_H) and (not pd_H or pd_M), float(pd_H)),
    }
    return out, res, ref_eta


# ---------------------------------------------------------------------------
# Command line
# ---------------------------------------------------------------------------


def _dims(text: str, allowed=(2, 3)):
    try:
        dims = [int(t) for t in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma separated integers, got {text!r}") from None
    if len(dims) not in allowed or any(d < 0 for d in dims) or min(dims[:2]) < 1:
        raise argparse.ArgumentTypeError(f"expected N,n or N,n,m with positive sizes, got {text!r}")
    return dims


def _add_model_args(p):
    p.add_argument("--problem", choices=["lasso", "fused", "constrained", "sgl-dual"], default="lasso")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--data", metavar="PATH", help="LIBSVM file")
    src.add_argument("--synth", metavar="N,n[,m]", type=_dims, help="synthetic instance sizes")
    p.add_argument("--constraints", type=int, default=0, metavar="M",
                   help="random constraints D y >= d for --problem constrained with --data")
    reg = p.add_argument_group("regularization")
    reg.add_argument("--gamma", type=float, help="lambda = gamma * ||B^T b||_inf / N")
    reg.add_argument("--lambda1", type=float)
    reg.add_argument("--lambda2", type=float)
    reg.add_argument("--group-size", type=int, default=5, help="group size for --problem sgl-dual")
    p.add_argument("--sigma", type=float, default=DEFAULT_SIGMA)
    p.add_argument("--tau", type=float, default=DEFAULT_TAU)
    p.add_argument("--r", type=float, default=DEFAULT_R)
    p.add_argument("--tol", type=float, default=None, help="default 1e-6 (lasso/fused/sgl-dual), 1e-5 (constrained)")
    p.add_argument("--max-iter", type=int, default=MAX_ITER)
    p.add_argument("--variant", choices=list(VARIANTS), default="ipadmm")
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mipadmm", description="Majorized ADMM with indefinite proximal terms.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve one model")
    _add_model_args(p)
    p.add_argument("--trace", metavar="PATH", help="write the per-iteration trace CSV")

    p = sub.add_parser("bench", help="run a scenario file")
    p.add_argument("scenarios", metavar="SCENARIO_FILE")
    p.add_argument("--repeats", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--variants", default=None, help="comma separated subset of " + ",".join(VARIANTS))
    p.add_argument("--csv", metavar="PATH", help="write CSV here (default: stdout after the table)")
    p.add_argument("--no-timings", action="store_true", help="leave mean_seconds empty (reproducible output)")

    p = sub.add_parser("verify", help="audit the convergence inequalities on a desk instance")
    _add_model_args(p)
    p.set_defaults(synth=None)

    p = sub.add_parser("prox-selftest", help="check prox optimality certificates")
    p.add_argument("--count", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    return parser


def _resolve_lambdas(args, data):
    if args.gamma is not None:
        lam = lambda_from_gamma(data, args.gamma)
        return lam, lam
    if args.lambda1 is None:
        raise ValueError("give --gamma or --lambda1 (and --lambda2 for the fused model)")
    return args.lambda1, (args.lambda2 if args.lambda2 is not None else 0.0)


def model_from_args(args):
    """``(problem, config, kind)`` where kind is "two-block" or "sgs"."""
    if args.problem == "sgl-dual":
        N, n = (args.synth or [20, 20])[:2]
        rng = SplitMix64(args.seed)
        D = rng.normal(N * n).reshape(N, n)
        d = rng.normal(N)
        gs = max(1, args.group_size)
        groups = [list(range(a, min(a + gs, n))) for a in range(0, n, gs)]
        lam1 = 0.1 if args.lambda1 is None else args.lambda1
        lam2 = 0.1 if args.lambda2 is None else args.lambda2
        partition, config = build_sparse_group_lasso_dual(
            D, d, groups, 1.0, lam1, lam2, sigma=args.sigma, tau=args.tau,
            tol=TOL_FUSED if args.tol is None else args.tol, max_iter=args.max_iter)
        return partition, config, "sgs"
    D = d = None
    if args.data:
        with open(args.data, encoding="utf-8") as fh:
            data = parse_libsvm(fh)
        if args.problem == "constrained":
            rng = SplitMix64(args.seed)
            D = rng.normal(args.constraints * data.n).reshape(args.constraints, data.n)
            d = rng.normal(args.constraints)
    elif args.synth:
        if args.problem == "constrained":
            N, n = args.synth[:2]
            m = args.synth[2] if len(args.synth) > 2 else 0
            data, D, d = synth_constrained(N, n, m, args.seed)
        else:
            data = synth_logistic(args.synth[0], args.synth[1], args.seed)
    else:
        raise ValueError("give --data PATH or --synth N,n[,m]")
    lam1, lam2 = _resolve_lambdas(args, data)
    kw = dict(sigma=args.sigma, r=args.r, variant=args.variant, tau=args.tau, max_iter=args.max_iter)
    if args.problem == "constrained":
        problem, config = build_constrained_logistic(data, D, d, lam1, tol=TOL_CONSTRAINED if args.tol is None else args.tol, **kw)
    elif args.problem == "fused":
        problem, config = build_fused_lasso_logistic(data, lam1, lam2, tol=TOL_FUSED if args.tol is None else args.tol, **kw)
    else:
        problem, config = build_lasso_logistic(data, lam1, tol=TOL_FUSED if args.tol is None else args.tol, **kw)
    return problem, config, "two-block"


def _cmd_solve(args, out):
    model, config, kind = model_from_args(args)
    if kind == "sgs":
        from .sgs import solve_sgs

        res = solve_sgs(model, config)
    else:
        res = solve(model, config)
    last = res.records[-1]
    print(f"status: {res.status}", file=out)
    print(f"iterations: {res.iterations}", file=out)
    print(f"eta: {last.eta:.3e} (P {last.eta_P:.3e}, D {last.eta_D:.3e}, C {last.eta_C:.3e})", file=out)
    print(f"objective: {last.objective:.10g}", file=out)
    if args.trace:
        write_trace(res.records, args.trace)
    return EXIT_OK if res.converged else EXIT_NONCONVERGED


def _cmd_bench(args, out):
    scs, variants, repeats, seed = load_scenarios(args.scenarios)
    if args.variants:
        variants = [v.strip() for v in args.variants.split(",") if v.strip()]
        bad = [v for v in variants if v not in VARIANTS]
        if bad:
            raise ValueError(f"unknown variants {bad}")
    repeats = args.repeats or repeats or 10
    seed = args.seed if args.seed is not None else (seed or 0)
    cells = bench(scs, variants, repeats, seed)
    timings = not args.no_timings
    out.write(bench_text(cells, timings))
    text = bench_csv(cells, timings)
    if args.csv:
        with open(args.csv, "w", newline="\n", encoding="ascii") as fh:
            fh.write(text)
    else:
        out.write("\n" + text)
    for c in cells:
        for e in c.errors:
            log.warning("%s/%s %s", c.scenario, c.variant, e)
    return EXIT_OK


def _cmd_verify(args, out):
    if args.problem == "sgl-dual":
        raise ValueError("verify supports the two-block models (lasso, fused, constrained)")
    if args.synth is None and args.data is None:
        args.synth = {"lasso": [200, 50], "fused": [100, 80], "constrained": [30, 50, 20]}[args.problem]
    if args.gamma is None and args.lambda1 is None:
        args.gamma = 1e-2
    problem, config, _ = model_from_args(args)
    results, res, ref_eta = verify_run(problem, config)
    print(f"reference point eta: {ref_eta:.3e}; audited run: {res.status} after {res.iterations} iterations", file=out)
    ok = True
    for name, (passed, worst) in results.items():
        ok &= bool(passed)
        print(f"{'PASS' if passed else 'FAIL'}  {name}  (worst relative slack {worst:.3e})", file=out)
    return EXIT_OK if ok else EXIT_NONCONVERGED


def _cmd_prox(args, out):
    results = prox_selftest(args.count, args.seed)
    ok = True
    for name, (worst, passed) in results.items():
        ok &= bool(passed)
        print(f"{'PASS' if passed else 'FAIL'}  {name}  (worst violation {worst:.3e})", file=out)
    return EXIT_OK if ok else EXIT_NONCONVERGED


def main(argv: Optional[Sequence[str]] = None, out=None) -> int:
    out = sys.stdout if out is None else out
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    handlers = {"solve": _cmd_solve, "bench": _cmd_bench, "verify": _cmd_verify, "prox-selftest": _cmd_prox}
    try:
        return handlers[args.command](args, out)
    except (ValueError, OSError, ConfigurationError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
