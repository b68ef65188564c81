"""Sparse multivariate polynomials with float coefficients.

Monomials are exponent tuples. The single canonical monomial order is graded
lexicographic: total degree first, then lexicographic on the exponent vector
with the first variable most significant (``1, x, y, x^2, x*y, y^2, ...``).
"""

from __future__ import annotations

from itertools import combinations_with_replacement
from math import comb
from typing import Iterable, Mapping, Sequence

import numpy as np

Monomial = tuple[int, ...]


def grlex_key(m: Monomial) -> tuple:
    """Sort key realizing graded-lex order (ascending)."""
    return (sum(m), tuple(-e for e in m))


def monomial_degree(m: Monomial) -> int:
    return sum(m)


def monomials_up_to(n: int, d: int) -> list[Monomial]:
    """All monomials in ``n`` variables of degree ``<= d``, in graded-lex order."""
    if n < 1 or d < 0:
        raise ValueError(f"need n >= 1 and d >= 0, got n={n}, d={d}")
    out: list[Monomial] = []
    for deg in range(d + 1):
        # combinations_with_replacement yields variable multisets in lex order
        # of the variable indices, which is exactly descending exponent-lex.
        for combo in combinations_with_replacement(range(n), deg):
            e = [0] * n
            for i in combo:
                e[i] += 1
            out.append(tuple(e))
    return out


def count_monomials(n: int, d: int) -> int:
    return comb(n + d, n)


def add_monomials(a: Monomial, b: Monomial) -> Monomial:
    return tuple(x + y for x, y in zip(a, b))


class Polynomial:
    """Immutable sparse polynomial in ``n`` variables.

    ``terms`` maps exponent tuples to nonzero float coefficients. Arithmetic
    operators return new instances; zero coefficients are never stored.
    """

    __slots__ = ("_n", "_terms", "_degree", "_hash")

    def __init__(self, n: int, terms: Mapping[Monomial, float] | None = None):
        if n < 0:
            raise ValueError("variable count must be non-negative")
        clean: dict[Monomial, float] = {}
        if terms:
            for m, c in terms.items():
                m = tuple(int(e) for e in m)
                if len(m) != n:
                    raise ValueError(f"monomial {m} does not have {n} exponents")
                if any(e < 0 for e in m):
                    raise ValueError(f"negative exponent in {m}")
                c = float(c)
                if c != 0.0:
                    clean[m] = clean.get(m, 0.0) + c
            clean = {m: c for m, c in clean.items() if c != 0.0}
        self._n = n
        self._terms = clean
        self._degree = max((sum(m) for m in clean), default=-1)
        self._hash = None

    @classmethod
    def _raw(cls, n: int, terms: dict[Monomial, float]) -> "Polynomial":
        # trusted constructor: terms already validated and zero-free
        p = object.__new__(cls)
        p._n = n
        p._terms = terms
        p._degree = max((sum(m) for m in terms), default=-1)
        p._hash = None
        return p

    # constructors -----------------------------------------------------

    @classmethod
    def zero(cls, n: int) -> "Polynomial":
        return cls._raw(n, {})

    @classmethod
    def constant(cls, n: int, c: float) -> "Polynomial":
        return cls(n, {(0,) * n: c})

    @classmethod
    def variable(cls, n: int, i: int) -> "Polynomial":
        if not 0 <= i < n:
            raise IndexError(f"variable index {i} out of range for n={n}")
        e = [0] * n
        e[i] = 1
        return cls._raw(n, {tuple(e): 1.0})

    @classmethod
    def monomial(cls, m: Sequence[int], c: float = 1.0) -> "Polynomial":
        return cls(len(m), {tuple(m): c})

    @classmethod
    def gens(cls, n: int) -> list["Polynomial"]:
        return [cls.variable(n, i) for i in range(n)]

    # properties -------------------------------------------------------

    @property
    def n(self) -> int:
        return self._n

    @property
    def terms(self) -> dict[Monomial, float]:
        return dict(self._terms)

    @property
    def degree(self) -> int:
        """Total degree; ``-1`` for the zero polynomial."""
        return self._degree

    def is_zero(self) -> bool:
        return not self._terms

    def is_constant(self) -> bool:
        return self._degree <= 0

    def coefficient(self, m: Monomial) -> float:
        return self._terms.get(tuple(m), 0.0)

    def monomials(self) -> list[Monomial]:
        """Support in ascending graded-lex order."""
        return sorted(self._terms, key=grlex_key)

    def items(self):
        return ((m, self._terms[m]) for m in self.monomials())

    def __len__(self) -> int:
        return len(self._terms)

    # arithmetic -------------------------------------------------------

    def _coerce(self, other) -> "Polynomial":
        if isinstance(other, Polynomial):
            if other._n != self._n:
                raise ValueError(f"variable count mismatch: {self._n} vs {other._n}")
            return other
        if isinstance(other, (int, float, np.integer, np.floating)):
            return Polynomial.constant(self._n, float(other))
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        out = dict(self._terms)
        for m, c in other._terms.items():
            s = out.get(m, 0.0) + c
            if s == 0.0:
                out.pop(m, None)
            else:
                out[m] = s
        return Polynomial._raw(self._n, out)

    __radd__ = __add__

    def __neg__(self):
        return Polynomial._raw(self._n, {m: -c for m, c in self._terms.items()})

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return other - self

    def scale(self, c: float) -> "Polynomial":
        c = float(c)
        if c == 0.0:
            return Polynomial.zero(self._n)
        out = {m: v * c for m, v in self._terms.items()}
        return Polynomial._raw(self._n, {m: v for m, v in out.items() if v != 0.0})

    def __mul__(self, other):
        if isinstance(other, (int, float, np.integer, np.floating)):
            return self.scale(other)
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        out: dict[Monomial, float] = {}
        for ma, ca in self._terms.items():
            for mb, cb in other._terms.items():
                m = tuple(x + y for x, y in zip(ma, mb))
                out[m] = out.get(m, 0.0) + ca * cb
        return Polynomial._raw(self._n, {m: c for m, c in out.items() if c != 0.0})

    __rmul__ = __mul__

    def __pow__(self, k: int):
        if not isinstance(k, (int, np.integer)) or k < 0:
            raise ValueError("exponent must be a non-negative integer")
        result = Polynomial.constant(self._n, 1.0)
        base = self
        while k:
            if k & 1:
                result = result * base
            k >>= 1
            if k:
                base = base * base
        return result

    def __eq__(self, other):
        if isinstance(other, (int, float)):
            other = Polynomial.constant(self._n, float(other))
        if not isinstance(other, Polynomial):
            return NotImplemented
        return self._n == other._n and self._terms == other._terms

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self._n, frozenset(self._terms.items())))
        return self._hash

    def __repr__(self):
        if not self._terms:
            return f"Polynomial({self._n}, 0)"
        body = " + ".join(f"{c!r}*{m}" for m, c in self.items())
        return f"Polynomial({self._n}, {body})"

    # calculus and evaluation -------------------------------------------

    def differentiate(self, i: int) -> "Polynomial":
        return differentiate(self, i)

    def evaluate(self, x):
        return evaluate(self, x)

    def __call__(self, *x):
        if len(x) == 1 and np.ndim(x[0]) >= 1:
            return evaluate(self, x[0])
        return evaluate(self, x)

    def max_abs_coefficient(self) -> float:
        return max((abs(c) for c in self._terms.values()), default=0.0)

    def extend(self, n_new: int) -> "Polynomial":
        """Embed into a ring with ``n_new >= n`` variables (new ones appended)."""
        if n_new < self._n:
            raise ValueError("cannot shrink variable count")
        pad = (0,) * (n_new - self._n)
        return Polynomial._raw(n_new, {m + pad: c for m, c in self._terms.items()})


def differentiate(p: Polynomial, i: int) -> Polynomial:
    """Partial derivative of ``p`` with respect to variable ``i``."""
    if not 0 <= i < p.n:
        raise IndexError(f"variable index {i} out of range for n={p.n}")
    out: dict[Monomial, float] = {}
    for m, c in p._terms.items():
        e = m[i]
        if e == 0:
            continue
        dm = m[:i] + (e - 1,) + m[i + 1:]
        out[dm] = c * e
    return Polynomial._raw(p.n, out)


def gradient(p: Polynomial) -> list[Polynomial]:
    return [differentiate(p, i) for i in range(p.n)]


def evaluate(p: Polynomial, x):
    """Evaluate ``p`` at a point, or at a stack of points of shape ``(..., n)``."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1:] != (p.n,) and not (p.n == 0 and x.ndim == 0):
        raise ValueError(f"point has shape {x.shape}, expected trailing dimension {p.n}")
    if x.ndim == 1:
        total = 0.0
        for m, c in p._terms.items():
            v = c
            for xi, e in zip(x, m):
                if e:
                    v *= float(xi) ** e
            total += v
        return total
    if not p._terms:
        return np.zeros(x.shape[:-1])
    exps = np.array(list(p._terms.keys()), dtype=int)
    coefs = np.array(list(p._terms.values()))
    powers = np.prod(x[..., None, :] ** exps, axis=-1)
    return powers @ coefs


def poly_add(p: Polynomial, q: Polynomial) -> Polynomial:
    return p + q


def poly_mul(p: Polynomial, q: Polynomial) -> Polynomial:
    return p * q


def poly_scale(p: Polynomial, c: float) -> Polynomial:
    return p.scale(c)


def coefficient_vector(p: Polynomial, basis: Sequence[Monomial],
                       index: Mapping[Monomial, int] | None = None) -> np.ndarray:
    """Coefficients of ``p`` in ``basis``; raises if ``p`` has terms outside it."""
    if index is None:
        index = {m: k for k, m in enumerate(basis)}
    v = np.zeros(len(basis))
    for m, c in p._terms.items():
        try:
            v[index[m]] = c
        except KeyError:
            raise ValueError(f"monomial {m} not in basis") from None
    return v


def from_coefficients(n: int, basis: Sequence[Monomial], coeffs: Iterable[float],
                      drop_below: float = 0.0) -> Polynomial:
    terms = {m: float(c) for m, c in zip(basis, coeffs) if abs(c) > drop_below}
    return Polynomial(n, terms)
