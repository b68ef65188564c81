"""Truncated pseudo-moment sequences and their Hankel/localizing matrices."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from .errors import DegreeTooHigh, LengthMismatch
from .polyring import Monomial, Polynomial, add_monomials, from_coefficients, monomials_up_to


@lru_cache(maxsize=None)
def _basis(n: int, d: int) -> tuple[tuple[Monomial, ...], dict]:
    mons = tuple(monomials_up_to(n, d))
    return mons, {m: i for i, m in enumerate(mons)}


def basis(n: int, d: int) -> tuple[Monomial, ...]:
    return _basis(n, d)[0]


def basis_index(n: int, d: int) -> dict[Monomial, int]:
    return _basis(n, d)[1]


@dataclass(frozen=True)
class MomentVector:
    """Values ``sigma_alpha`` for all ``|alpha| <= max_degree`` in graded-lex order."""

    n: int
    max_degree: int
    values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        expected = len(basis(self.n, self.max_degree))
        if vals.shape != (expected,):
            raise LengthMismatch(
                f"moment vector of degree {self.max_degree} in {self.n} variables "
                f"needs {expected} values, got shape {vals.shape}")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def monomials(self) -> tuple[Monomial, ...]:
        return basis(self.n, self.max_degree)

    @property
    def index(self) -> dict[Monomial, int]:
        return basis_index(self.n, self.max_degree)

    def __getitem__(self, alpha: Sequence[int]) -> float:
        return float(self.values[self.index[tuple(alpha)]])

    def truncate(self, degree: int) -> "MomentVector":
        if degree > self.max_degree:
            raise DegreeTooHigh(f"cannot truncate degree {self.max_degree} sequence to {degree}")
        k = len(basis(self.n, degree))
        return MomentVector(self.n, degree, self.values[:k])

    def to_dict(self) -> dict:
        return {"n": self.n, "max_degree": self.max_degree,
                "monomials": [list(m) for m in self.monomials],
                "values": [float(v) for v in self.values]}


@dataclass(frozen=True)
class HankelMatrix:
    """Symmetric matrix ``M[a, b] = <sigma, X^a X^b g>`` over monomials of degree <= t."""

    matrix: np.ndarray
    rows: tuple[Monomial, ...]
    shift: Polynomial | None = None

    @property
    def t(self) -> int:
        return max(sum(m) for m in self.rows)

    @property
    def n(self) -> int:
        return len(self.rows[0])


@dataclass(frozen=True)
class KernelBasis:
    polynomials: list[Polynomial]
    vectors: np.ndarray  # (basis size, kernel dim), orthonormal columns
    tolerance: float
    singular_values: np.ndarray
    rank: int
    rows: tuple[Monomial, ...] = field(default=())


def hankel_matrix(sigma: MomentVector, t: int) -> HankelMatrix:
    """Moment matrix ``(sigma_{a+b})`` indexed by monomials of degree <= t."""
    if 2 * t > sigma.max_degree:
        raise DegreeTooHigh(f"H^{t} needs moments up to degree {2 * t}, have {sigma.max_degree}")
    rows = basis(sigma.n, t)
    idx = sigma.index
    k = len(rows)
    M = np.empty((k, k))
    vals = sigma.values
    for a in range(k):
        for b in range(a, k):
            M[a, b] = M[b, a] = vals[idx[add_monomials(rows[a], rows[b])]]
    return HankelMatrix(M, rows, None)


def localizing_matrix(sigma: MomentVector, g: Polynomial, t: int) -> HankelMatrix:
    """Hankel matrix of ``g * sigma``: ``M[a, b] = sum_c g_c sigma_{a+b+c}``."""
    if g.n != sigma.n:
        raise ValueError("variable count mismatch")
    dg = max(g.degree, 0)
    if 2 * t + dg > sigma.max_degree:
        raise DegreeTooHigh(
            f"localizing matrix of order {t} for degree-{dg} shift needs degree "
            f"{2 * t + dg}, have {sigma.max_degree}")
    rows = basis(sigma.n, t)
    idx = sigma.index
    vals = sigma.values
    k = len(rows)
    M = np.zeros((k, k))
    terms = list(g.terms.items())
    for a in range(k):
        for b in range(a, k):
            ab = add_monomials(rows[a], rows[b])
            s = 0.0
            for c, gc in terms:
                s += gc * vals[idx[add_monomials(ab, c)]]
            M[a, b] = M[b, a] = s
    return HankelMatrix(M, rows, g)


def convolve(g: Polynomial, sigma: MomentVector) -> MomentVector:
    """The functional ``p -> <sigma, g p>`` truncated to degree ``max_degree - deg g``."""
    dg = max(g.degree, 0)
    if dg > sigma.max_degree:
        raise DegreeTooHigh("shift degree exceeds moment degree")
    out_deg = sigma.max_degree - dg
    mons = basis(sigma.n, out_deg)
    idx = sigma.index
    vals = np.zeros(len(mons))
    for i, a in enumerate(mons):
        vals[i] = sum(gc * sigma.values[idx[add_monomials(a, c)]] for c, gc in g.terms.items())
    return MomentVector(sigma.n, out_deg, vals)


def default_rank_tol(shape) -> float:
    return max(shape) * 1e-8


def numerical_rank(M: np.ndarray, rank_tol: float | None = None) -> int:
    s = np.linalg.svd(M, compute_uv=False)
    if rank_tol is None:
        rank_tol = default_rank_tol(M.shape)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s > rank_tol * s[0]))


def kernel_basis(H: HankelMatrix | np.ndarray, rank_tol: float | None = None) -> KernelBasis:
    """Orthonormal kernel of a (symmetric) Hankel matrix, as polynomials.

    Rank counts singular values above ``rank_tol`` times the largest one.
    """
    if isinstance(H, HankelMatrix):
        M, rows = H.matrix, H.rows
    else:
        M, rows = np.asarray(H, dtype=float), ()
    if rank_tol is None:
        rank_tol = default_rank_tol(M.shape)
    _, s, vt = np.linalg.svd(M)
    r = 0 if s.size == 0 or s[0] == 0.0 else int(np.sum(s > rank_tol * s[0]))
    vecs = vt[r:].T.copy()
    polys = []
    if rows:
        n = len(rows[0])
        polys = [from_coefficients(n, rows, vecs[:, j]) for j in range(vecs.shape[1])]
    return KernelBasis(polys, vecs, rank_tol, s, r, tuple(rows))


def moments_of_points(points, weights, max_degree: int) -> MomentVector:
    """Moments ``sigma_a = sum_i w_i xi_i^a`` of a weighted point set."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    w = np.asarray(weights, dtype=float).ravel()
    if pts.shape[0] != w.shape[0]:
        raise LengthMismatch(f"{pts.shape[0]} points but {w.shape[0]} weights")
    if np.any(w <= 0):
        raise ValueError("weights must be positive")
    n = pts.shape[1]
    exps = np.array(basis(n, max_degree), dtype=int)
    # (points, monomials) Vandermonde-like matrix
    V = np.prod(pts[:, None, :] ** exps[None, :, :], axis=2)
    return MomentVector(n, max_degree, w @ V)


def apply(sigma: MomentVector, p: Polynomial) -> float:
    """``<sigma, p> = sum_a p_a sigma_a``."""
    if p.degree > sigma.max_degree:
        raise DegreeTooHigh(f"polynomial degree {p.degree} exceeds moment degree {sigma.max_degree}")
    idx = sigma.index
    return float(sum(c * sigma.values[idx[m]] for m, c in p.terms.items()))
