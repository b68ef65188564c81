"""Dense primal-dual interior-point solver for small block-PSD problems.

Problems come in the moment form built by :mod:`momopt.relaxation`::

    min c.y   s.t.   A y = b,   F_b(y) = F_b0 + sum_i y_i F_bi >= 0.

The equalities are eliminated first (``y = y_p + N z`` with ``N`` an
orthonormal null-space basis of ``A``), leaving

    min c~.z + const   s.t.   S_b = G_b0 + sum_k z_k G_bk >= 0,

whose conic dual is  max const - <G0, X>  s.t.  <G_k, X> = c~_k, X >= 0.
``X`` are the Gram matrices of the sum-of-squares certificate.
The iteration is an infeasible-start path-following method using the
HKM search direction with Mehrotra predictor-corrector steps.
"""

from __future__ import annotations

import enum
import math
import sys
from dataclasses import dataclass, field, replace
from typing import TextIO

import numpy as np
from scipy import linalg

from .errors import MomoptError
from .moments import MomentVector
from .polyring import Polynomial, from_coefficients
from .relaxation import SDPProblem


class Status(enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"
    MAX_ITERATIONS = "MaxIterations"
    NUMERICAL_FAILURE = "NumericalFailure"


@dataclass(frozen=True)
class SolverOptions:
    gap_tol: float = 1e-8
    feas_tol: float = 1e-9
    max_newton_iters: int = 200
    barrier_decrease: float = 0.2
    infeasibility_margin: float = 1e-6
    eq_rank_tol: float = 1e-10
    log: TextIO | None = None

    def __post_init__(self):
        for name in ("gap_tol", "feas_tol", "infeasibility_margin", "eq_rank_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.max_newton_iters < 1:
            raise ValueError("max_newton_iters must be positive")
        if not 0.0 < self.barrier_decrease < 1.0:
            raise ValueError("barrier_decrease must lie in (0, 1)")


@dataclass
class SolveResult:
    status: Status
    y: np.ndarray
    objective: float
    dual_objective: float
    dual_blocks: list[np.ndarray]
    gap: float
    iterations: int
    primal_infeasibility: float = math.nan
    dual_infeasibility: float = math.nan
    eq_multipliers: np.ndarray | None = None
    min_eig: float = math.nan
    message: str = ""
    problem: SDPProblem | None = field(default=None, repr=False)

    @property
    def ok(self) -> bool:
        return self.status is Status.OPTIMAL

    def moments(self) -> MomentVector:
        if self.problem is None:
            raise ValueError("result is not attached to a problem")
        return MomentVector(self.problem.n, 2 * self.problem.order, self.y)


class NumericalFailure(MomoptError):
    pass


# ----------------------------------------------------------------------------
# equality elimination


@dataclass
class _Reduced:
    y_p: np.ndarray
    N: np.ndarray            # (m, m') orthonormal null-space basis
    G0: list[np.ndarray]     # per block, (k, k)
    G: list[np.ndarray]      # per block, (m', k, k)
    c: np.ndarray            # (m',)
    const: float
    consistent: bool = True
    eq_residual: float = 0.0

    @property
    def dim(self) -> int:
        return self.N.shape[1]

    def lift(self, z: np.ndarray) -> np.ndarray:
        return self.y_p + self.N @ z


def _reduce(problem: SDPProblem, opts: SolverOptions) -> _Reduced:
    A, b = problem.A, problem.b
    m = problem.m
    if A.shape[0]:
        norms = np.linalg.norm(A, axis=1)
        keep = norms > 0
        if np.any(~keep & (np.abs(b) > 0)):
            consistent_rows = False
        else:
            consistent_rows = True
        A = A[keep] / norms[keep, None]
        b = b[keep] / norms[keep]
        U, s, Vt = np.linalg.svd(A, full_matrices=True)
        rank = int(np.sum(s > opts.eq_rank_tol * max(s[0], 1.0))) if s.size else 0
        y_p = Vt[:rank].T @ ((U[:, :rank].T @ b) / s[:rank])
        N = Vt[rank:].T
        resid = float(np.max(np.abs(A @ y_p - b))) if b.size else 0.0
        consistent = consistent_rows and resid <= 1e3 * opts.eq_rank_tol * (1.0 + np.max(np.abs(b)))
    else:
        y_p = np.zeros(m)
        N = np.eye(m)
        resid, consistent = 0.0, True
    G0, G = [], []
    for blk in problem.blocks:
        G0.append(blk.F0 + np.tensordot(y_p, blk.F, axes=1))
        G.append(np.tensordot(N.T, blk.F, axes=1))
    c = N.T @ problem.c
    const = float(problem.c @ y_p)
    return _Reduced(y_p, N, G0, G, c, const, consistent, resid)


# ----------------------------------------------------------------------------
# interior-point core


@dataclass
class _IPMOutput:
    status: Status
    z: np.ndarray
    X: list[np.ndarray]
    S: list[np.ndarray]
    pobj: float
    dobj: float
    pinf: float
    dinf: float
    iterations: int
    message: str = ""


def _inner(A: list[np.ndarray], B: list[np.ndarray]) -> float:
    return float(sum(np.vdot(a, b) for a, b in zip(A, B)))


def _adjoint(G: list[np.ndarray], W: list[np.ndarray], dim: int) -> np.ndarray:
    out = np.zeros(dim)
    for Gb, Wb in zip(G, W):
        out += Gb.reshape(dim, -1) @ Wb.reshape(-1)
    return out


def _apply(G: list[np.ndarray], z: np.ndarray) -> list[np.ndarray]:
    return [np.tensordot(z, Gb, axes=1) for Gb in G]


def _max_step(X: np.ndarray, dX: np.ndarray) -> float:
    """Largest alpha (capped at 1e30) with X + alpha dX still PSD."""
    try:
        L = np.linalg.cholesky(X)
    except np.linalg.LinAlgError:
        return 0.0
    Li = linalg.solve_triangular(L, np.eye(len(X)), lower=True)
    W = Li @ dX @ Li.T
    lam = np.linalg.eigvalsh((W + W.T) / 2)[0]
    if lam >= 0:
        return 1e30
    return -1.0 / lam


def _sym(W: np.ndarray) -> np.ndarray:
    return (W + W.T) / 2


STALL_LIMIT = 30       # iterations without merit improvement
DIVERGENCE_FACTOR = 1e8  # mu growth over its minimum that ends the run


def _ipm(red: _Reduced, opts: SolverOptions, *, label: str = "") -> _IPMOutput:
    dim = red.dim
    G0, G, c = red.G0, red.G, red.c
    sizes = [len(g) for g in G0]
    ntot = sum(sizes)
    norm_G0 = math.sqrt(sum(float(np.sum(g * g)) for g in G0))
    norm_c = float(np.linalg.norm(c))

    # SDPT3-style starting point scaled to the data
    gnorms = np.zeros(dim)
    for Gb in G:
        gnorms += np.sum(Gb.reshape(dim, -1) ** 2, axis=1)
    gnorms = np.sqrt(gnorms)
    X, S = [], []
    for k, g0 in zip(sizes, G0):
        xi = max(10.0, math.sqrt(k), k * float(np.max((1.0 + np.abs(c)) / (1.0 + gnorms))) if dim else 1.0)
        eta = max(10.0, math.sqrt(k), float(np.max(gnorms)) if dim else 1.0, norm_G0)
        X.append(xi * np.eye(k))
        S.append(eta * np.eye(k))
    z = np.zeros(dim)

    log = opts.log
    if log is not None:
        log.write(f"# {label} dim={dim} blocks={sizes}\n")
        log.write(f"{'iter':>4} {'mu':>11} {'primal_obj':>15} {'dual_obj':>15} "
                  f"{'min_eig':>11} {'eq_residual':>11} {'dual_resid':>11}\n")

    best = None
    status = Status.MAX_ITERATIONS
    message = ""
    it = 0
    stall = 0
    prev_merit = math.inf
    mu_min = math.inf
    for it in range(1, opts.max_newton_iters + 1):
        Gz = _apply(G, z)
        Rd = [g0 + gz - s for g0, gz, s in zip(G0, Gz, S)]
        Rp = c - _adjoint(G, X, dim)
        mu = _inner(X, S) / ntot
        pobj = red.const + float(c @ z)
        dobj = red.const - _inner(G0, X)
        pinf = math.sqrt(sum(float(np.sum(r * r)) for r in Rd)) / (1.0 + norm_G0)
        dinf = float(np.linalg.norm(Rp)) / (1.0 + norm_c)
        relgap = abs(pobj - dobj) / (1.0 + abs(pobj) + abs(dobj))
        min_eig = min(float(np.linalg.eigvalsh(g0 + gz)[0]) for g0, gz in zip(G0, Gz))
        if log is not None:
            log.write(f"{it:4d} {mu:11.3e} {pobj:15.8e} {dobj:15.8e} {min_eig:11.3e} "
                      f"{pinf:11.3e} {dinf:11.3e}\n")

        merit = max(relgap, pinf, dinf)
        if best is None or merit < best[0]:
            best = (merit, z.copy(), [x.copy() for x in X], [s.copy() for s in S],
                    pobj, dobj, pinf, dinf, it)
        if relgap <= opts.gap_tol and abs(pobj - dobj) <= max(opts.gap_tol, relgap) \
                and pinf <= opts.feas_tol and dinf <= opts.feas_tol:
            status = Status.OPTIMAL
            break
        if dim and np.max(np.abs(z)) > 1e12:
            status = Status.UNBOUNDED
            message = "moment iterates diverge"
            break
        if merit > 0.999 * prev_merit:
            stall += 1
        else:
            stall = 0
        prev_merit = min(prev_merit, merit)
        mu_min = min(mu_min, mu)
        if mu > DIVERGENCE_FACTOR * mu_min:
            status = Status.NUMERICAL_FAILURE
            message = "iterates diverge"
            break
        if stall >= STALL_LIMIT:
            status = Status.NUMERICAL_FAILURE
            message = "no progress"
            break

        # Schur complement M_kl = <G_k, X G_l S^-1>
        try:
            Sinv = []
            for s in S:
                Ls = np.linalg.cholesky(s)
                Li = linalg.solve_triangular(Ls, np.eye(len(s)), lower=True)
                Sinv.append(Li.T @ Li)
        except np.linalg.LinAlgError:
            status = Status.NUMERICAL_FAILURE
            message = "slack matrix lost definiteness"
            break
        M = np.zeros((dim, dim))
        XGS = []
        for Gb, Xb, Sib in zip(G, X, Sinv):
            W = np.matmul(np.matmul(Xb, Gb), Sib)
            XGS.append(W)
            M += Gb.reshape(dim, -1) @ W.reshape(dim, -1).T
        M = _sym(M)
        factor = None
        reg = 0.0
        scale = max(float(np.trace(M)) / max(dim, 1), 1e-300)
        for attempt in range(4):
            try:
                factor = linalg.cho_factor(M + reg * np.eye(dim), check_finite=False)
                break
            except linalg.LinAlgError:
                reg = 1e-12 * scale if attempt == 0 else reg * 100.0
        if factor is None:
            status = Status.NUMERICAL_FAILURE
            message = "Schur complement singular beyond regularization"
            break

        XRdS = [Xb @ r @ Sib for Xb, r, Sib in zip(X, Rd, Sinv)]
        base_rhs = -Rp - _adjoint(G, XRdS, dim)

        def direction(sigma_mu, corr):
            K = []
            for Xb, Sib, cb in zip(X, Sinv, corr):
                T = sigma_mu * Sib - Xb
                if cb is not None:
                    T = T - cb @ Sib
                K.append(_sym(T))
            rhs = base_rhs + _adjoint(G, K, dim)
            dz = linalg.cho_solve(factor, rhs, check_finite=False)
            dZ = [r + gz for r, gz in zip(Rd, _apply(G, dz))]
            dX = [k - _sym(Xb @ dz_b @ Sib) for k, Xb, dz_b, Sib in zip(K, X, dZ, Sinv)]
            return dz, dX, dZ

        def steps(dX, dZ):
            ap = min(_max_step(Xb, d) for Xb, d in zip(X, dX))
            ad = min(_max_step(Sb, d) for Sb, d in zip(S, dZ))
            return ap, ad

        # predictor
        dz, dX, dZ = direction(0.0, [None] * len(X))
        ap, ad = steps(dX, dZ)
        ap1, ad1 = min(1.0, ap), min(1.0, ad)
        mu_aff = _inner([x + ap1 * d for x, d in zip(X, dX)],
                        [s + ad1 * d for s, d in zip(S, dZ)]) / ntot
        sigma = min(1.0, max(0.0, (mu_aff / mu) ** 3)) if mu > 0 else 0.0
        sigma = max(sigma, 0.0)
        # corrector
        corr = [a @ b for a, b in zip(dX, dZ)]
        dz, dX, dZ = direction(sigma * mu, corr)
        ap, ad = steps(dX, dZ)
        tau = 0.9 + 0.09 * min(ap1, ad1)
        ap = min(1.0, tau * ap)
        ad = min(1.0, tau * ad)
        if ap < 1e-12 and ad < 1e-12:
            status = Status.NUMERICAL_FAILURE
            message = "step length underflow"
            break
        X = [x + ap * d for x, d in zip(X, dX)]
        z = z + ad * dz
        S = [s + ad * d for s, d in zip(S, dZ)]

    if status is not Status.OPTIMAL and best is not None:
        _, z, X, S, pobj, dobj, pinf, dinf, _ = best
    return _IPMOutput(status, z, X, S, pobj, dobj, pinf, dinf, it, message)


# ----------------------------------------------------------------------------
# public API


@dataclass(frozen=True)
class Phase1Result:
    """Outcome of ``min t  s.t.  F_b(y) + t I >= 0, A y = b``."""

    feasibility: str  # "strict", "weak" or "infeasible"
    t: float
    y: np.ndarray | None
    iterations: int = 0


def _result_from(problem: SDPProblem, red: _Reduced, out: _IPMOutput, opts: SolverOptions,
                 status: Status | None = None, message: str = "") -> SolveResult:
    y = red.lift(out.z)
    blocks = problem.block_values(y)
    min_eig = min(float(np.linalg.eigvalsh(B)[0]) for B in blocks)
    # equality multipliers: A^T nu = c - F*(X)
    resid = problem.c.copy()
    for blk, Xb in zip(problem.blocks, out.X):
        resid -= blk.F.reshape(problem.m, -1) @ Xb.reshape(-1)
    nu = np.linalg.lstsq(problem.A.T, resid, rcond=None)[0] if problem.A.shape[0] else None
    objective = float(problem.c @ y)
    return SolveResult(
        status=status or out.status, y=y, objective=objective,
        dual_objective=out.dobj, dual_blocks=out.X,
        gap=abs(objective - out.dobj), iterations=out.iterations,
        primal_infeasibility=out.pinf, dual_infeasibility=out.dinf,
        eq_multipliers=nu, min_eig=min_eig, message=message or out.message,
        problem=problem)


def _infeasible_result(problem: SDPProblem, message: str, iterations: int = 0) -> SolveResult:
    return SolveResult(Status.INFEASIBLE, np.full(problem.m, np.nan), math.inf, math.inf,
                       [], math.nan, iterations, message=message, problem=problem)


def _phase1_reduced(red: _Reduced) -> _Reduced:
    dim = red.dim
    G0 = [g.copy() for g in red.G0] + [np.ones((1, 1))]
    G = []
    for g in red.G:
        k = g.shape[1]
        G.append(np.concatenate([g, np.eye(k)[None]], axis=0))
    G.append(np.concatenate([np.zeros((dim, 1, 1)), np.ones((1, 1, 1))], axis=0))
    c = np.zeros(dim + 1)
    c[-1] = 1.0
    N = np.hstack([red.N, np.zeros((red.N.shape[0], 1))])
    return _Reduced(red.y_p, N, G0, G, c, 0.0)


def phase1(problem: SDPProblem, opts: SolverOptions = SolverOptions()) -> Phase1Result:
    """Measure strict feasibility by minimizing a uniform eigenvalue shift ``t``.

    ``t < -margin/2`` means strictly feasible, ``t > margin`` infeasible; values
    in between are reported as ``"weak"`` (feasible set without interior, up
    to solver accuracy).
    """
    red = _reduce(problem, opts)
    if not red.consistent:
        return Phase1Result("infeasible", math.inf, None)
    p1 = _phase1_reduced(red)
    out = _ipm(p1, replace(opts, gap_tol=min(opts.gap_tol, opts.infeasibility_margin * 1e-2)),
               label="phase1")
    t = float(out.z[-1]) if out.z.size else math.inf
    y = red.lift(out.z[:-1])
    margin = opts.infeasibility_margin
    if t < -margin / 2:
        kind = "strict"
    elif t > margin:
        kind = "infeasible"
    else:
        kind = "weak"
    return Phase1Result(kind, t, y, out.iterations)


def solve(problem: SDPProblem, opts: SolverOptions = SolverOptions()) -> SolveResult:
    """Minimize ``c.y`` over the relaxation; see module docstring."""
    red = _reduce(problem, opts)
    if not red.consistent:
        return _infeasible_result(problem, f"equality constraints inconsistent (residual {red.eq_residual:.2e})")
    if red.dim == 0:
        return _solve_fixed(problem, red, opts)
    out = _ipm(red, opts, label="solve")
    if out.status in (Status.OPTIMAL, Status.UNBOUNDED):
        return _result_from(problem, red, out, opts)
    p1 = phase1(problem, opts)
    if p1.feasibility == "infeasible":
        res = _result_from(problem, red, out, opts, status=Status.INFEASIBLE,
                           message=f"phase-1 shift t = {p1.t:.3e} exceeds margin")
        return res
    return _result_from(problem, red, out, opts,
                        message=f"{out.message}; phase-1 shift t = {p1.t:.3e}")


def _solve_fixed(problem: SDPProblem, red: _Reduced, opts: SolverOptions) -> SolveResult:
    y = red.y_p
    blocks = problem.block_values(y)
    min_eig = min(float(np.linalg.eigvalsh(B)[0]) for B in blocks)
    if min_eig < -opts.infeasibility_margin:
        return _infeasible_result(problem, f"unique affine point has min eigenvalue {min_eig:.2e}")
    obj = float(problem.c @ y)
    X = [np.zeros_like(B) for B in blocks]
    nu = np.linalg.lstsq(problem.A.T, problem.c, rcond=None)[0]
    return SolveResult(Status.OPTIMAL, y, obj, obj, X, 0.0, 0, 0.0, 0.0, nu, min_eig,
                       "feasible set is a single point", problem)


def generic_point(problem: SDPProblem, opts: SolverOptions = SolverOptions()) -> SolveResult:
    """Analytic-center (maximal rank) point of the feasible set.

    The objective is ignored. Interior-point iterates for a zero objective
    follow the central path toward the analytic center of the relative
    interior, which has maximal moment-matrix rank among feasible points.
    """
    return solve(problem.with_objective(np.zeros(problem.m)), opts)


@dataclass
class SOSCertificate:
    lam: float
    squares: list[list[Polynomial]]   # per block
    multipliers: list[Polynomial]     # per block generator
    equality_terms: Polynomial
    residual: float


class CertificateResidualTooLarge(MomoptError):
    def __init__(self, residual: float, certificate: SOSCertificate):
        self.residual = residual
        self.certificate = certificate
        super().__init__(f"certificate coefficient residual {residual:.3e}")


def sos_certificate(result: SolveResult, problem: SDPProblem | None = None,
                    feas_tol: float = 1e-9, residual_tol: float = 1e-5) -> SOSCertificate:
    """Factor the dual blocks into explicit squares and check the identity

    ``f - lam = sum_b g_b * sum_j q_bj^2 + (equality multiples)``.
    """
    problem = problem or result.problem
    if result.status is not Status.OPTIMAL:
        raise ValueError("certificate requires an optimal result")
    n = problem.n
    mons = problem.monomials
    squares, multipliers = [], []
    total = Polynomial.zero(n)
    for blk, Xb in zip(problem.blocks, result.dual_blocks):
        w, V = np.linalg.eigh(_sym(Xb))
        w = np.where(w < -feas_tol, w, np.maximum(w, 0.0))
        w = np.maximum(w, 0.0)
        L = V * np.sqrt(w)
        qs = [from_coefficients(n, blk.rows, L[:, j]) for j in range(L.shape[1]) if w[j] > 0]
        qs = [q for q in qs if not q.is_zero()]
        s = Polynomial.zero(n)
        for q in qs:
            s = s + q * q
        squares.append(qs)
        multipliers.append(blk.generator)
        total = total + blk.generator * s
    nu = result.eq_multipliers if result.eq_multipliers is not None else np.zeros(0)
    lam = float(nu[0]) if nu.size else result.dual_objective
    eq_vec = problem.A[1:].T @ nu[1:] if nu.size > 1 else np.zeros(problem.m)
    eq_terms = from_coefficients(n, mons, eq_vec)
    f = problem.objective_poly if problem.objective_poly is not None \
        else from_coefficients(n, mons, problem.c)
    remainder = f - lam - total - eq_terms
    residual = remainder.max_abs_coefficient()
    cert = SOSCertificate(lam, squares, multipliers, eq_terms, residual)
    if residual > residual_tol:
        raise CertificateResidualTooLarge(residual, cert)
    return cert

