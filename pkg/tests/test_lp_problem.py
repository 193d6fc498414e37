"""LP container: builder validation, text dumps, exact round trips."""
import numpy as np
import pytest

from peakshaver.errors import DomainError, LpError
from peakshaver.lp import LpBuilder, LpProblem, add_epigraph_max, solve

GOLDEN = (
    "peakshaver-lp 1\n"
    "vars 2\n"
    "x 0.0 3.5 -1.0\n"
    "y -inf inf 0.25\n"
    "rows 2\n"
    "L 4.0 2 x 1.0 y 2.0\n"
    "E 0.5 1 y -1.5\n"
    "end\n"
)


def _sample():
    b = LpBuilder()
    x = b.add_var("x", 0.0, 3.5, -1.0)
    y = b.add_var("y", -np.inf, np.inf, 0.25)
    b.add_le([(x, 1.0), (y, 2.0)], 4.0)
    b.add_eq([(y, -1.5)], 0.5)
    return b.build()


def test_dump_matches_golden():
    assert _sample().dump_text() == GOLDEN


def test_dump_is_deterministic():
    assert _sample().dump_text() == _sample().dump_text()


def test_parse_inverts_dump():
    p = _sample()
    q = LpProblem.parse_text(p.dump_text())
    assert q.dump_text() == p.dump_text()
    assert q.names == p.names
    assert q.senses == p.senses
    assert np.array_equal(q.obj, p.obj)
    assert np.array_equal(q.rhs, p.rhs)
    assert np.array_equal(q.lb, p.lb)
    assert np.array_equal(q.ub, p.ub)
    assert np.array_equal(q.a.toarray(), p.a.toarray())


def test_round_trip_random():
    rng = np.random.default_rng(3)
    b = LpBuilder()
    cols = [b.add_var(f"v{j}", -float(rng.uniform(0, 5)), float(rng.uniform(0, 5)),
                      float(rng.normal())) for j in range(12)]
    for _ in range(20):
        picks = rng.choice(12, size=4, replace=False)
        coeffs = [(cols[int(j)], float(np.round(rng.normal(), 6))) for j in picks]
        if rng.random() < 0.5:
            b.add_le(coeffs, float(rng.normal()))
        else:
            b.add_eq(coeffs, float(rng.normal()))
    p = b.build()
    q = LpProblem.parse_text(p.dump_text())
    assert q.dump_text() == p.dump_text()


def test_negative_zero_normalized():
    b = LpBuilder()
    b.add_var("x", -0.0, 1.0, -0.0)
    text = b.build().dump_text()
    assert "-0.0" not in text


def test_duplicate_coefficients_merge():
    b = LpBuilder()
    x = b.add_var("x", 0.0, 10.0, 1.0)
    b.add_le([(x, 1.0), (x, 2.0)], 6.0)
    p = b.build()
    assert p.a.toarray().tolist() == [[3.0]]


def test_add_ge_flips_sign():
    b = LpBuilder()
    x = b.add_var("x", 0.0, 10.0, 1.0)
    b.add_ge([(x, 2.0)], 4.0)
    p = b.build()
    assert p.senses == ("L",)
    assert p.a.toarray().tolist() == [[-2.0]]
    assert p.rhs.tolist() == [-4.0]
    sol = solve(p)
    assert sol.x[0] == pytest.approx(2.0, abs=1e-9)


def test_builder_rejects_bad_input():
    b = LpBuilder()
    b.add_var("x")
    with pytest.raises(DomainError):
        b.add_var("x")  # duplicate name
    with pytest.raises(DomainError):
        b.add_var("a b")  # whitespace
    with pytest.raises(DomainError):
        b.add_var("y", 2.0, 1.0)  # lb > ub
    with pytest.raises(DomainError):
        b.add_var("z", 0.0, 1.0, np.nan)
    with pytest.raises(DomainError):
        b.add_le([], 1.0)  # empty row
    with pytest.raises(DomainError):
        b.add_le([(5, 1.0)], 1.0)  # unknown column
    with pytest.raises(DomainError):
        b.add_le([(0, np.inf)], 1.0)
    with pytest.raises(DomainError):
        add_epigraph_max(b, 0, [])


def test_parse_rejects_garbage():
    with pytest.raises(LpError):
        LpProblem.parse_text("not-a-dump\n")
    with pytest.raises(LpError):
        LpProblem.parse_text(GOLDEN.replace("rows 2", "rows 3"))


def test_solution_value_lookup():
    p = _sample()
    sol = solve(p)
    assert sol.value(p, "x") == sol.x[p.col("x")]
    with pytest.raises(KeyError):
        sol.value(p, "missing")


def test_meta_not_in_dump_or_equality():
    p = _sample()
    q = p.replace_meta({"crash_basis": [(0, 0)]})
    assert q.dump_text() == p.dump_text()
