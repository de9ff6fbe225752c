import cmath
import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from loewner import expr as E
from loewner.expr import DomainError, ExprSyntaxError, UnknownIdentifierError

# --------------------------------------------------------------------------- random expressions

literals = st.sampled_from(["1", "2", "0.5", "3", "i", "0.25", "1.5"])
leaves = st.one_of(st.just("z"), st.just("z"), st.just("t"), literals)


def _extend(children):
    return st.one_of(
        st.tuples(children, st.sampled_from("+-*/"), children).map(lambda x: f"({x[0]}{x[1]}{x[2]})"),
        st.tuples(children, st.integers(0, 4)).map(lambda x: f"({x[0]})^{x[1]}"),
        st.tuples(st.sampled_from(["exp", "log", "sqrt"]), children).map(lambda x: f"{x[0]}({x[1]})"),
        children.map(lambda s: f"-{s}"),
    )


expressions = st.recursive(leaves, _extend, max_leaves=8)
disk_z = st.builds(lambda r, th: r * cmath.exp(1j * th), st.floats(0, 0.9), st.floats(0, 2 * math.pi))


def _near_singular(node, z, t, margin=1e-3):
    """True when z is within ``margin`` of a pole or a branch cut of ``node``."""
    stack = [node]
    while stack:
        n = stack.pop()
        try:
            if isinstance(n, E.BinOp) and n.op == "/":
                if abs(E.evaluate(n.right, z, t)) < margin:
                    return True
            if isinstance(n, E.Call) and n.fn in ("log", "sqrt"):
                a = E.evaluate(n.arg, z, t)
                if abs(a) < margin or (a.real < 0 and abs(a.imag) < margin):
                    return True
        except DomainError:
            return True
        for attr in ("left", "right", "arg", "base"):
            child = getattr(n, attr, None)
            if child is not None:
                stack.append(child)
    return False


@settings(max_examples=100)
@given(expressions, disk_z, st.floats(0, 2))
def test_symbolic_derivative_matches_central_difference(src, z, t):
    e = E.parse(src)
    h = 1e-5
    assume(not any(_near_singular(e, z + dz, t) for dz in (0, h, -h)))
    try:
        exact = E.evaluate(E.differentiate_z(e), z, t)
        fd = (E.evaluate(e, z + h, t) - E.evaluate(e, z - h, t)) / (2 * h)
    except DomainError:
        assume(False)
    assume(abs(exact) < 1e6)
    assert abs(exact - fd) <= 1e-6 * (1 + abs(exact))


@given(expressions)
def test_print_parse_round_trip_is_bit_exact(src):
    e = E.parse(src)
    e2 = E.parse(E.to_source(e))
    assert E.to_source(e2) == E.to_source(e)
    probes = [0.3 * cmath.exp(2j * math.pi * k / 32) + 0.1 * k / 32 for k in range(32)]
    for k, z in enumerate(probes):
        t = k / 16
        try:
            a = E.evaluate(e, z, t)
        except DomainError:
            with pytest.raises(DomainError):
                E.evaluate(e2, z, t)
            continue
        b = E.evaluate(e2, z, t)
        assert a == b or (cmath.isnan(a) and cmath.isnan(b))


# --------------------------------------------------------------------------- examples


@pytest.mark.parametrize(
    "src, z, t, expected",
    [
        ("(1+z)/(1-z)", 0, 0, 1),
        ("exp(-t)*z", 1, 0, 1),
        ("i*z", 2, 0, 2j),
        ("(1+z)/(1-z)", 0.5, 0, 3),
        ("-z^2", 2, 0, -4),
        ("sqrt(z)", -4, 0, 2j),
        ("log(z)", -1, 0, 1j * math.pi),
        ("1e-3*z", 1000, 0, 1),
    ],
)
def test_evaluate_examples(src, z, t, expected):
    assert abs(E.evaluate(E.parse(src), z, t) - expected) < 1e-14


@pytest.mark.parametrize(
    "src, z, expected",
    [
        ("z^2", 3, 6),
        ("exp(z)", 0, 1),
        ("(1+z)/(1-z)", 0, 2),
        ("log(1+z)", 0, 1),
        ("sqrt(1+z)", 0, 0.5),
        ("t*z", 0.3, 0.7),
        ("z^0", 0.4, 0),
    ],
)
def test_derivative_examples(src, z, expected):
    d = E.differentiate_z(E.parse(src))
    assert abs(E.evaluate(d, z, 0.7) - expected) < 1e-14


@pytest.mark.parametrize(
    "src, offset",
    [
        ("z^", 2),
        ("", 0),
        ("1 +", 3),
        ("(1+z", 4),
        ("z)", 1),
        ("z^-1", 2),
        ("z^1.5", 2),
        ("z^2^2", 3),
        ("2*$", 2),
        ("exp z", 4),
        ("z z", 2),
        ("1+*2", 2),
        ("é", 0),
        ("z+é", 2),
    ],
)
def test_syntax_errors_are_positioned(src, offset):
    with pytest.raises(ExprSyntaxError) as info:
        E.parse(src)
    assert info.value.offset == offset
    assert f"offset {offset}" in str(info.value)


def test_syntax_error_reports_expected_tokens():
    with pytest.raises(ExprSyntaxError) as info:
        E.parse("1 + ")
    assert {"z", "t", "(", "number"} <= info.value.expected


@pytest.mark.parametrize("src, offset", [("sin(z)", 0), ("z + foo", 4)])
def test_unknown_identifier(src, offset):
    with pytest.raises(UnknownIdentifierError) as info:
        E.parse(src)
    assert info.value.offset == offset


@pytest.mark.parametrize(
    "src, z",
    [("1/(z-1)", 1), ("log(z)", 0), ("sqrt(z)", 0), ("1/z", 0)],
)
def test_domain_errors(src, z):
    with pytest.raises(DomainError) as info:
        E.evaluate(E.parse(src), z, 0.0)
    assert info.value.subexpr is not None


def test_compiled_evaluator_is_vectorized():
    f = E.compile_expr(E.parse("(1+z)/(1-z) + t"))
    z = np.array([0, 0.5, -0.5j])
    ref = [E.evaluate(E.parse("(1+z)/(1-z) + t"), w, 0.25) for w in z]
    assert np.allclose(f(z, 0.25), ref, rtol=0, atol=1e-15)


def test_compiled_evaluator_names_pole():
    f = E.compile_expr(E.parse("1/(z-1)"))
    with pytest.raises(DomainError):
        f(np.array([0.0, 1.0]), 0.0)


def test_free_variables():
    assert E.free_variables(E.parse("exp(-t)*z + 1")) == {"t", "z"}
    assert E.free_variables(E.parse("i")) == set()


@pytest.mark.parametrize("c", [0, 2.5, -1.5, 1j, -2j, 1 - 3j, -0.5 + 0.25j])
def test_constant_node_round_trip(c):
    assert E.evaluate(E.constant_node(c), 0.3, 0.0) == c
