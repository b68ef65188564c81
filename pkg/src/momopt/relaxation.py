"""Moment relaxations of polynomial optimization problems as block-PSD SDPs.

The decision vector ``y`` holds one pseudo-moment per monomial of degree
``<= 2d`` (graded-lex order). Each PSD block is an affine map
``F0 + sum_i y_i F[i]``; equalities are rows of ``A y = b``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from itertools import combinations
from math import ceil

import numpy as np

from .errors import DegreeTooHigh, EmptyGeneratorDegree, OrderTooSmall, TooManyGenerators
from .moments import basis, basis_index
from .polyparse import VariableTable
from .polyring import Monomial, Polynomial, add_monomials, coefficient_vector

MAX_PREORDER_GENERATORS = 6


class Mode(enum.Enum):
    QUADRATIC_MODULE = "qm"
    PREORDERING = "preorder"


@dataclass(frozen=True)
class POPInstance:
    """``inf f(x)`` subject to ``g_i(x) >= 0`` and ``h_j(x) = 0``."""

    f: Polynomial
    ineqs: tuple[Polynomial, ...] = ()
    eqs: tuple[Polynomial, ...] = ()
    vars: VariableTable | None = None

    def __post_init__(self):
        object.__setattr__(self, "ineqs", tuple(self.ineqs))
        object.__setattr__(self, "eqs", tuple(self.eqs))
        n = self.f.n
        for p in self.ineqs + self.eqs:
            if p.n != n:
                raise ValueError(f"constraint in {p.n} variables, objective in {n}")
        if self.vars is None:
            names = tuple(f"x{i + 1}" for i in range(n))
            object.__setattr__(self, "vars", VariableTable(names))
        elif len(self.vars) != n:
            raise ValueError("variable table size does not match polynomials")

    @property
    def n(self) -> int:
        return self.f.n

    @property
    def degree(self) -> int:
        return max([max(p.degree, 0) for p in (self.f,) + self.ineqs + self.eqs])

    def min_order(self) -> int:
        return max(1, ceil(self.degree / 2))

    def is_feasible_point(self, x, tol: float = 1e-6) -> bool:
        return (all(g(x) >= -tol for g in self.ineqs)
                and all(abs(h(x)) <= tol for h in self.eqs))


@dataclass(frozen=True, eq=False)
class PSDBlock:
    """One block ``F0 + sum_i y_i F[i] >= 0`` over monomials of degree <= t."""

    tag: str
    generator: Polynomial
    t: int
    rows: tuple[Monomial, ...]
    F0: np.ndarray
    F: np.ndarray  # shape (m, k, k)

    @property
    def size(self) -> int:
        return len(self.rows)

    def evaluate(self, y: np.ndarray) -> np.ndarray:
        return self.F0 + np.tensordot(y, self.F, axes=1)


@dataclass(frozen=True, eq=False)
class SDPProblem:
    """``min c.y  s.t.  A y = b,  F_b(y) >= 0`` for every block."""

    n: int
    order: int
    mode: Mode
    monomials: tuple[Monomial, ...]
    blocks: tuple[PSDBlock, ...]
    A: np.ndarray
    b: np.ndarray
    c: np.ndarray
    row_tags: tuple[str, ...] = ()
    objective_poly: Polynomial | None = None
    level: float | None = None
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def m(self) -> int:
        return len(self.monomials)

    @property
    def total_block_size(self) -> int:
        return sum(blk.size for blk in self.blocks)

    def with_objective(self, c) -> "SDPProblem":
        return replace(self, c=np.asarray(c, dtype=float))

    def block_values(self, y) -> list[np.ndarray]:
        y = np.asarray(y, dtype=float)
        return [blk.evaluate(y) for blk in self.blocks]

    def equality_residual(self, y) -> float:
        if self.A.shape[0] == 0:
            return 0.0
        return float(np.max(np.abs(self.A @ np.asarray(y) - self.b)))


def localizing_order(d: int, g: Polynomial) -> int:
    return d - ceil(max(g.degree, 0) / 2)


def _localizing_block(tag: str, g: Polynomial, t: int, n: int, d: int) -> PSDBlock:
    rows = basis(n, t)
    idx = basis_index(n, 2 * d)
    m = len(idx)
    k = len(rows)
    F = np.zeros((m, k, k))
    terms = list(g.terms.items())
    for a in range(k):
        for b in range(a, k):
            ab = add_monomials(rows[a], rows[b])
            for gam, coef in terms:
                i = idx[add_monomials(ab, gam)]
                F[i, a, b] += coef
                if a != b:
                    F[i, b, a] += coef
    return PSDBlock(tag, g, t, rows, np.zeros((k, k)), F)


def _multiplier_rows(h: Polynomial, n: int, d: int) -> np.ndarray:
    """Rows ``<sigma, X^gamma h>`` for every ``|gamma| + deg h <= 2d``."""
    mons = basis(n, 2 * d)
    idx = basis_index(n, 2 * d)
    dh = max(h.degree, 0)
    shifts = basis(n, 2 * d - dh)
    rows = np.zeros((len(shifts), len(mons)))
    for r, gam in enumerate(shifts):
        for mono, coef in h.terms.items():
            rows[r, idx[add_monomials(gam, mono)]] += coef
    return rows


def expand_preordering(g) -> list[Polynomial]:
    """Products over all nonempty subsets of ``g``, duplicates removed."""
    g = list(g)
    if len(g) > MAX_PREORDER_GENERATORS:
        raise TooManyGenerators(
            f"{len(g)} inequalities give {2 ** len(g) - 1} preordering products; "
            f"the cap is {MAX_PREORDER_GENERATORS} generators")
    out: list[Polynomial] = []
    seen = set()
    for size in range(1, len(g) + 1):
        for subset in combinations(g, size):
            prod = subset[0]
            for p in subset[1:]:
                prod = prod * p
            if prod not in seen:
                seen.add(prod)
                out.append(prod)
    return out


def build_mom_relaxation(pop: POPInstance, d: int, mode: Mode = Mode.QUADRATIC_MODULE) -> SDPProblem:
    """Order-``d`` moment relaxation of ``pop``."""
    mode = Mode(mode)
    if d < pop.min_order() or d < ceil(pop.degree / 2):
        raise OrderTooSmall(f"order {d} is below ceil(deg/2) = {ceil(pop.degree / 2)}")
    n = pop.n
    mons = basis(n, 2 * d)
    m = len(mons)

    blocks = [_localizing_block("moment", Polynomial.constant(n, 1.0), d, n, d)]
    gens = list(pop.ineqs) if mode is Mode.QUADRATIC_MODULE else expand_preordering(pop.ineqs)
    for j, g in enumerate(gens):
        t = localizing_order(d, g)
        if t < 0:
            raise EmptyGeneratorDegree(
                f"generator of degree {g.degree} has no localizing block at order {d}")
        blocks.append(_localizing_block(f"localizing[{j}]", g, t, n, d))

    rows = [np.eye(1, m, 0)]
    tags = ["normalization"]
    rhs = [np.ones(1)]
    for j, h in enumerate(pop.eqs):
        if h.is_zero():
            continue
        R = _multiplier_rows(h, n, d)
        rows.append(R)
        rhs.append(np.zeros(R.shape[0]))
        tags.extend([f"equality[{j}]"] * R.shape[0])

    c = coefficient_vector(pop.f, mons, basis_index(n, 2 * d))
    return SDPProblem(n=n, order=d, mode=mode, monomials=mons, blocks=tuple(blocks),
                      A=np.vstack(rows), b=np.concatenate(rhs), c=c, row_tags=tuple(tags),
                      objective_poly=pop.f, meta={"pop": pop, "generators": tuple(gens)})


def add_level_constraint(problem: SDPProblem, f: Polynomial, v: float) -> SDPProblem:
    """Append ``<sigma, X^gamma (f - v)> = 0`` rows and clear the objective."""
    d = problem.order
    if f.degree > 2 * d:
        raise DegreeTooHigh(f"level polynomial degree {f.degree} exceeds relaxation degree {2 * d}")
    R = _multiplier_rows(f - v, problem.n, d)
    return replace(problem,
                   A=np.vstack([problem.A, R]),
                   b=np.concatenate([problem.b, np.zeros(R.shape[0])]),
                   c=np.zeros(problem.m),
                   row_tags=problem.row_tags + ("level",) * R.shape[0],
                   level=float(v))
