"""KKT systems and polar-ideal generators.

Every minimizer of ``f`` on ``S(g, +-h)`` lies on the real variety of

    J = (h) + prod_{A subset {1..r}} ((g_A) + minors_{s+|A|+1} jac(f, h, g_A))

whether or not the constraints are qualified there. Adding generators of
``J`` as equalities makes the moment relaxation exact when that variety is
finite. The KKT system is the multiplier-based alternative; it can miss
minimizers where constraint qualification fails.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from itertools import combinations, product
from math import comb

from .errors import CapExceeded
from .polyparse import VariableTable
from .polyring import Polynomial, gradient
from .relaxation import POPInstance

DEFAULT_MAX_INEQ = 3
DEFAULT_MAX_GENS = 5000


class PolarMode(enum.Enum):
    KKT = "kkt"
    PRODUCT = "product"
    BRANCH = "branch"


@dataclass(frozen=True)
class PolarCaps:
    max_ineq: int = DEFAULT_MAX_INEQ
    max_gens: int = DEFAULT_MAX_GENS


@dataclass(frozen=True)
class Branch:
    """One active subset ``A`` and the generators ``h, g_A, minors(A)``."""

    active: tuple[int, ...]
    generators: tuple[Polynomial, ...]


@dataclass(frozen=True)
class PolarSystem:
    mode: PolarMode
    generators: tuple[Polynomial, ...]
    vars: VariableTable
    ineqs: tuple[Polynomial, ...] = ()
    branches: tuple[Branch, ...] = ()

    def pop(self, f: Polynomial) -> POPInstance:
        """Problem with the generators appended as equalities."""
        if self.mode is PolarMode.BRANCH:
            raise ValueError("a branch system has one problem per branch")
        n = len(self.vars)
        return POPInstance(f.extend(n), self.ineqs, self.generators, self.vars)


def determinant(M: list[list[Polynomial]]) -> Polynomial:
    """Determinant of a small square polynomial matrix by cofactor expansion."""
    k = len(M)
    if k == 1:
        return M[0][0]
    if k == 2:
        return M[0][0] * M[1][1] - M[0][1] * M[1][0]
    n = M[0][0].n
    det = Polynomial.zero(n)
    for j in range(k):
        if M[0][j].is_zero():
            continue
        minor = [row[:j] + row[j + 1:] for row in M[1:]]
        term = M[0][j] * determinant(minor)
        det = det + term if j % 2 == 0 else det - term
    return det


def jacobian(polys) -> list[list[Polynomial]]:
    return [gradient(p) for p in polys]


def jacobian_minors(polys, size: int) -> list[Polynomial]:
    """All ``size x size`` minors of the Jacobian of ``polys``.

    For an ``m x n`` Jacobian this returns ``C(m, size) * C(n, size)``
    polynomials (zeros included), rows major.
    """
    J = jacobian(polys)
    m = len(J)
    n = len(J[0]) if J else 0
    if size < 1 or size > min(m, n):
        return []
    out = []
    for rows in combinations(range(m), size):
        for cols in combinations(range(n), size):
            out.append(determinant([[J[r][c] for c in cols] for r in rows]))
    assert len(out) == comb(m, size) * comb(n, size)
    return out


def _dedupe(polys) -> list[Polynomial]:
    seen, out = set(), []
    for p in polys:
        if p.is_zero():
            continue
        if p in seen or -p in seen:
            continue
        seen.add(p)
        out.append(p)
    return out


def _has_unit(polys) -> bool:
    return any(p.is_constant() and not p.is_zero() for p in polys)


def factor_generators(pop: POPInstance, active: tuple[int, ...]) -> list[Polynomial]:
    """Generators of ``(g_A) + (rank jac(f, h, g_A) < s + |A| + 1)``.

    When ``s + |A| + 1 > n`` the rank condition holds everywhere and only
    ``g_A`` remain.
    """
    gA = [pop.ineqs[a] for a in active]
    size = len(pop.eqs) + len(active) + 1
    minors = jacobian_minors([pop.f, *pop.eqs, *gA], size) if size <= pop.n else []
    return _dedupe(gA + minors)


def polar_branches(pop: POPInstance) -> list[Branch]:
    """One branch per active subset whose factor is a proper ideal."""
    out = []
    r = len(pop.ineqs)
    for k in range(r + 1):
        for A in combinations(range(r), k):
            gens = factor_generators(pop, A)
            if _has_unit(gens):
                continue
            out.append(Branch(A, tuple(_dedupe(list(pop.eqs) + gens))))
    return out


def polar_generators(pop: POPInstance, mode: PolarMode | str = PolarMode.PRODUCT,
                     caps: PolarCaps = PolarCaps()) -> PolarSystem:
    """Generators of the polar ideal as one product system or as branches."""
    mode = PolarMode(mode)
    if mode is PolarMode.KKT:
        return kkt_system(pop)
    r = len(pop.ineqs)
    n = pop.n
    if mode is PolarMode.BRANCH:
        branches = tuple(polar_branches(pop))
        gens = sum((len(b.generators) for b in branches), 0)
        if gens > caps.max_gens:
            raise CapExceeded(gens, caps.max_gens, "switch to kkt mode")
        return PolarSystem(mode, (), pop.vars, pop.ineqs, branches)

    if r > caps.max_ineq:
        raise CapExceeded(2 ** r, 2 ** caps.max_ineq,
                          f"{r} inequalities exceed max_ineq = {caps.max_ineq}; "
                          "switch to branch or kkt mode")
    factors = []
    for k in range(r + 1):
        for A in combinations(range(r), k):
            gens = factor_generators(pop, A)
            if _has_unit(gens):
                continue
            factors.append(gens)
    count = 1
    for gens in factors:
        count *= len(gens)
    if count > caps.max_gens:
        raise CapExceeded(count, caps.max_gens)
    prods: list[Polynomial] = []
    if not factors:
        prods = [Polynomial.constant(n, 1.0)]   # empty product: the unit ideal
    elif count:
        for choice in product(*factors):
            p = choice[0]
            for q in choice[1:]:
                p = p * q
            prods.append(p)
    # count == 0: some factor is the zero ideal, so the product vanishes
    gens = _dedupe(list(pop.eqs) + prods)
    return PolarSystem(mode, tuple(gens), pop.vars, pop.ineqs)


def _fresh_names(taken, prefix: str, k: int) -> list[str]:
    names = []
    i = 1
    while len(names) < k:
        name = f"{prefix}{i}"
        if name not in taken:
            names.append(name)
        i += 1
    return names


def kkt_system(pop: POPInstance) -> PolarSystem:
    """Stationarity with squared multipliers, complementarity and ``h``.

    Variables are ``X`` followed by ``Lambda_1..r`` and ``Gamma_1..s``.
    """
    n, r, s = pop.n, len(pop.ineqs), len(pop.eqs)
    N = n + r + s
    taken = set(pop.vars.names)
    lam_names = _fresh_names(taken, "lambda", r)
    gam_names = _fresh_names(taken, "gamma", s)
    vars = pop.vars.extended(lam_names + gam_names)
    f = pop.f.extend(N)
    g = [p.extend(N) for p in pop.ineqs]
    h = [p.extend(N) for p in pop.eqs]
    lam = [Polynomial.variable(N, n + k) for k in range(r)]
    gam = [Polynomial.variable(N, n + r + j) for j in range(s)]
    gens = []
    for i in range(n):
        p = f.differentiate(i)
        for lk, gk in zip(lam, g):
            p = p - lk * lk * gk.differentiate(i)
        for gj, hj in zip(gam, h):
            p = p - gj * hj.differentiate(i)
        gens.append(p)
    gens += [lk * gk for lk, gk in zip(lam, g)]
    gens += h
    return PolarSystem(PolarMode.KKT, tuple(gens), vars, tuple(g))
