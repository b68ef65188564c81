import random

import pytest
from hypothesis import given, settings, strategies as st

from momopt.polyparse import (ExponentOverflow, ParseError, PolynomialSyntaxError,
                              UnknownVariable, VariableTable, format_polynomial,
                              parse_polynomial)
from momopt.polyring import Polynomial, monomials_up_to

XY = VariableTable(("x", "y"))
XYZ = VariableTable(("x", "y", "z"))
x, y = Polynomial.gens(2)


def parse(s, v=XY):
    return parse_polynomial(s, v)


def test_motzkin():
    f = parse("x^4*y^2 + x^2*y^4 - 3*x^2*y^2 + 1")
    assert f == x**4 * y**2 + x**2 * y**4 - 3 * x**2 * y**2 + 1


def test_zero_and_square():
    assert parse("0", VariableTable(("x",))).is_zero()
    assert parse("(x+y)^2") == x**2 + 2 * x * y + y**2


@pytest.mark.parametrize("text, expected", [
    ("3x^2", 3 * x**2),
    ("xy", x * y),
    ("3xy", 3 * x * y),
    ("-x", -x),
    ("--x", x),
    ("-(x - y)", y - x),
    ("2.5e-1*x", 0.25 * x),
    ("x - (-1.23437e-10)", x + 1.23437e-10),
    ("(x)^0", Polynomial.constant(2, 1.0)),
    ("2*(x+1)*(x-1)", 2 * x**2 - 2),
])
def test_grammar(text, expected):
    assert parse(text) == expected


@pytest.mark.parametrize("text", ["", "   ", "x +", "x ** 2", "(x", "x)", "x^", "x^y",
                                  "x^-1", "x^1.5", "3 4", "x y", "@", "1e999"])
def test_syntax_errors(text):
    with pytest.raises(PolynomialSyntaxError) as exc:
        parse(text)
    assert exc.value.position >= 0


def test_unknown_variable():
    with pytest.raises(UnknownVariable) as exc:
        parse("x + w")
    assert exc.value.name == "w"
    with pytest.raises(UnknownVariable):
        parse("x*y*zz")


def test_multi_letter_names():
    v = VariableTable(("x1", "x2"))
    assert parse_polynomial("x1*x2 + x2^2", v) == Polynomial(2, {(1, 1): 1.0, (0, 2): 1.0})
    with pytest.raises(UnknownVariable):
        parse_polynomial("x1x2", v)


def test_exponent_overflow():
    with pytest.raises(ExponentOverflow):
        parse("x^64")
    with pytest.raises(ExponentOverflow):
        parse("(x^40)^2")
    assert parse("x^63") == x**63


def test_deep_nesting_is_an_error():
    with pytest.raises(PolynomialSyntaxError):
        parse("(" * 500 + "x" + ")" * 500)
    with pytest.raises(PolynomialSyntaxError):
        parse("-" * 1000 + "x")


def test_variable_table_validation():
    for bad in [(), ("x", "x"), ("1x",), ("a-b",), ("",)]:
        with pytest.raises(ValueError):
            VariableTable(bad)
    assert VariableTable.from_string("x, y ,z").names == ("x", "y", "z")


def test_format_examples():
    assert format_polynomial(Polynomial.zero(2), XY) == "0"
    assert format_polynomial(x**2 - y**2, XY) == "x^2 - y^2"
    f = x**4 * y**2 + x**2 * y**4 - 3 * x**2 * y**2 + 1
    assert format_polynomial(f, XY) == "x^4*y^2 + x^2*y^4 - 3*x^2*y^2 + 1"


def test_format_non_integer_coefficients_round_trip():
    p = Polynomial(2, {(1, 0): 0.1, (0, 0): -1.23437e-10, (2, 1): 1 / 3})
    assert parse(format_polynomial(p, XY)) == p


def test_round_trip_200_random():
    rng = random.Random(7)
    for _ in range(200):
        n = rng.randint(1, 3)
        vars = XYZ if n == 3 else (XY if n == 2 else VariableTable(("x",)))
        mons = monomials_up_to(n, 6)
        terms = {rng.choice(mons): float(rng.randint(-9, 9)) for _ in range(rng.randint(0, 8))}
        p = Polynomial(n, terms)
        assert parse_polynomial(format_polynomial(p, vars), vars) == p


ALPHABET = "xyz0123456789+-*^(). eE\t"


def _fuzz_one(text):
    try:
        out = parse_polynomial(text, XYZ)
    except ParseError:
        return "error"
    assert isinstance(out, Polynomial)
    return "value"


def test_fuzz_random_bytes():
    rng = random.Random(2024)
    outcomes = {"value": 0, "error": 0}
    for i in range(10_000):
        k = rng.randint(0, 30)
        if i % 2:
            raw = bytes(rng.randrange(256) for _ in range(k))
            text = raw.decode("latin-1")
        else:
            text = "".join(rng.choice(ALPHABET) for _ in range(k))
        outcomes[_fuzz_one(text)] += 1
    assert sum(outcomes.values()) == 10_000
    assert outcomes["value"] > 0 and outcomes["error"] > 0


@settings(max_examples=300, deadline=None)
@given(st.text(max_size=40))
def test_fuzz_hypothesis_text(text):
    _fuzz_one(text)
