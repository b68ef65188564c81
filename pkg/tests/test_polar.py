from math import comb

import numpy as np
import pytest

from momopt.errors import CapExceeded
from momopt.polar import (PolarCaps, PolarMode, determinant, factor_generators,
                          jacobian_minors, kkt_system, polar_branches, polar_generators)
from momopt.polyparse import VariableTable, parse_polynomial
from momopt.polyring import Polynomial, differentiate

from problems import (MOTZKIN_MINIMIZERS, cusp_disk, gradient_variety, motzkin, pop,
                      random_polar_instance, robinson_minimizers, robinson_sphere,
                      vanishes_exactly)

x, y = Polynomial.gens(2)


def same_up_to_sign(ps, qs):
    norm = lambda p: p if p == -p or max(p.terms.items())[1] > 0 else -p
    return {norm(p) for p in ps} == {norm(q) for q in qs}


def test_kkt_examples():
    (g,) = kkt_system(pop("x", "x")).generators
    assert g == Polynomial.constant(1, 1.0)
    assert kkt_system(pop("x", "x^2")).generators == (Polynomial.variable(1, 0) * 2,)
    S = kkt_system(pop("x", "x", ["x^3"]))
    assert S.vars.names == ("x", "lambda1")
    V = S.vars
    expected = [parse_polynomial(s, V) for s in ("1 - 3*lambda1^2*x^2", "lambda1*x^3")]
    assert list(S.generators) == expected
    # x* = 0 satisfies no choice of multiplier
    assert all(S.generators[0](np.array([0.0, lam])) == 1.0 for lam in (-2.0, 0.0, 5.0))


def test_kkt_structure_with_equalities():
    p = pop("x,y", "x + y", ["1 - x^2"], ["x - y^2"])
    S = kkt_system(p)
    assert S.vars.names == ("x", "y", "lambda1", "gamma1")
    n = 4
    lam = Polynomial.variable(n, 2)
    assert lam * p.ineqs[0].extend(n) in S.generators
    assert p.eqs[0].extend(n) in S.generators
    assert len(S.generators) == 2 + 1 + 1


def test_kkt_name_clash():
    S = kkt_system(pop("x,lambda1", "x^2 + lambda1^2", ["x"]))
    assert S.vars.names == ("x", "lambda1", "lambda2")


def test_cusp_factors():
    p = cusp_disk()
    g1, g2 = p.ineqs
    assert any(q.is_constant() and not q.is_zero() for q in factor_generators(p, ()))
    assert same_up_to_sign(factor_generators(p, (0,)), [g1, 2 * y])
    assert same_up_to_sign(factor_generators(p, (1,)), [g2, 2 * y])
    assert same_up_to_sign(factor_generators(p, (0, 1)), [g1, g2])
    assert [b.active for b in polar_branches(p)] == [(0,), (1,), (0, 1)]
    S = polar_generators(p, PolarMode.PRODUCT)
    assert len(S.generators) == 2 * 2 * 2 - 1   # (2y)*(2y)*... duplicates removed
    origin = np.zeros(2)
    assert all(abs(q(origin)) == 0.0 for q in S.generators)


def test_gradient_case():
    S = polar_generators(pop("x,y", "x^2 + y^2"), PolarMode.PRODUCT)
    assert same_up_to_sign(S.generators, [2 * x, 2 * y])


def test_univariate_product():
    p = pop("x", "x^4 - x", ["1 - x^2"])
    S = polar_generators(p)
    fp = differentiate(p.f, 0)
    assert list(S.generators) == [fp * p.ineqs[0]]


def test_jacobian_minor_counts():
    X = Polynomial.gens(3)
    polys = [X[0] * X[1], X[1] ** 2 + X[2], X[0] - X[2] ** 3, X[0] * X[1] * X[2]]
    for size in (1, 2, 3):
        assert len(jacobian_minors(polys, size)) == comb(4, size) * comb(3, size)
    assert jacobian_minors(polys, 4) == []


def test_determinant_matches_numpy():
    rng = np.random.default_rng(0)
    M = rng.normal(size=(4, 4))
    P = [[Polynomial.constant(1, float(v)) for v in row] for row in M]
    assert abs(determinant(P).terms.get((0,), 0.0) - np.linalg.det(M)) <= 1e-12


@pytest.mark.parametrize("make, minimizers", [
    (motzkin, MOTZKIN_MINIMIZERS),
    (robinson_sphere, robinson_minimizers()),
    (gradient_variety, np.zeros((1, 3))),
    (cusp_disk, np.zeros((1, 2))),
])
def test_minimizers_lie_on_polar_variety(make, minimizers):
    S = polar_generators(make(), PolarMode.PRODUCT)
    for xi in minimizers:
        assert max(abs(q(xi)) for q in S.generators) <= 1e-9


def test_union_of_varieties_on_grid():
    rng = np.random.default_rng(7)
    for _ in range(5):
        p = random_polar_instance(rng)
        prod = vanishes_exactly(polar_generators(p, PolarMode.PRODUCT).generators)
        union = np.zeros_like(prod)
        for br in polar_generators(p, PolarMode.BRANCH).branches:
            union |= vanishes_exactly(br.generators)
        assert np.array_equal(prod, union)


def test_caps():
    p = pop("x,y", "x", ["x", "y", "1 - x", "1 - y"])
    with pytest.raises(CapExceeded):
        polar_generators(p, PolarMode.PRODUCT)
    with pytest.raises(CapExceeded):
        polar_generators(cusp_disk(), PolarMode.PRODUCT, PolarCaps(max_gens=3))
    S = polar_generators(p, PolarMode.BRANCH)
    assert len(S.branches) >= 1
    with pytest.raises(ValueError):
        S.pop(p.f)


def test_zero_factor_leaves_equalities():
    # f constant: gradient factor is the zero ideal, so J = (h)
    p = pop("x,y", "3", eqs=["x^2 + y^2 - 1"])
    S = polar_generators(p)
    assert list(S.generators) == list(p.eqs)


def test_pop_extends_objective():
    S = polar_generators(cusp_disk())
    aug = S.pop(cusp_disk().f)
    assert aug.eqs == S.generators and aug.ineqs == cusp_disk().ineqs
    V = VariableTable(("x", "y"))
    assert aug.vars == V or aug.vars.names == V.names
