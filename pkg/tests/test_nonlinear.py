import math
import random
from fractions import Fraction

import pytest

from pdeseries.linear import IntegrabilityError, LinearSystem, check_integrable, curvature, propagators, solve_linear
from pdeseries.nonlinear import (
    LaurentWindow,
    NonlinearSystem,
    WindowEscapeError,
    check_identities,
    curvature_entry,
    h_tensor,
    is_integrable_nonlinear,
    lift,
    lifted_propagators,
    monomial_closure_check,
    nonlinear_curvature,
    solve_nonlinear,
    unit_vector,
    vadd,
    vsub,
)
from pdeseries.oracle import residual_nonlinear
from pdeseries.samples import random_linear_system, random_nonlinear_system
from pdeseries.series import FLOAT, RATIONAL, PowerSeries, UsageError, multi_indices


def const(c, k, order, field=RATIONAL):
    return PowerSeries.constant(c, k, order, field)


def riccati(order=12, field=RATIONAL):
    # dy/dx + y^2 = 0
    return NonlinearSystem(1, 1, {(0, (2,), 0): const(1, 1, order, field)}, order, field)


def twin_riccati(order=8):
    return NonlinearSystem(1, 2, {(0, (2,), 0): const(1, 2, order), (0, (2,), 1): const(1, 2, order)}, order)


def mixed_pair(order=6):
    # dy/dx1 + y = 0, dy/dx2 + y^2 = 0
    return NonlinearSystem(1, 2, {(0, (1,), 0): const(1, 2, order), (0, (2,), 1): const(1, 2, order)}, order)


def as_nonlinear(sys: LinearSystem) -> NonlinearSystem:
    f = {}
    for r in range(sys.n):
        for s in range(sys.n):
            for u in range(sys.k):
                if not sys.f[r][s][u].is_zero():
                    f[(r, unit_vector(sys.n, s), u)] = sys.f[r][s][u]
    return NonlinearSystem(sys.n, sys.k, f, sys.order, sys.field)


def test_vector_helpers():
    assert unit_vector(3, 1) == (0, 1, 0)
    assert vadd((1, -2), (3, 4)) == (4, 2)
    assert vsub((1, -2), (3, 4)) == (-2, -6)


# --- h tensor ---------------------------------------------------------------


def test_h_riccati():
    H = h_tensor(riccati(order=6))
    for i in range(-2, 8):
        for j in range(-2, 10):
            expect = const(i if j == i + 1 else 0, 1, 6)
            assert H.get((i,), (j,), 0) == expect


def test_h_unit_rows_reproduce_f():
    sys = random_nonlinear_system(random.Random(1), 2, 2, 4)
    H = h_tensor(sys)
    for r in range(2):
        for beta in multi_indices(2, 2):
            for u in range(2):
                f = sys.coeff(r, beta, u)
                expect = f if f is not None else const(0, 2, 4)
                assert H.get(unit_vector(2, r), beta, u) == expect


def test_h_zero_system_and_sparsity():
    zero = NonlinearSystem(2, 2, {}, 4)
    assert not h_tensor(zero).entries
    sys = random_nonlinear_system(random.Random(2), 2, 2, 4)
    H = h_tensor(sys)
    for (alpha, beta, u) in H.entries:
        assert any(alpha[s] and vadd(vsub(beta, alpha), unit_vector(2, s)) in sys.support for s in range(2))


def test_zero_alpha_row_vanishes():
    sys = random_nonlinear_system(random.Random(3), 2, 2, 4)
    lifted = lift(sys)
    for beta in multi_indices(2, 3):
        assert lifted.h((0, 0), beta, 0).is_zero()


# --- curvature --------------------------------------------------------------


def test_twin_riccati_flat():
    R = nonlinear_curvature(twin_riccati())
    assert all(s.is_zero() for s in R.entries.values())
    assert is_integrable_nonlinear(twin_riccati())


def test_mixed_pair_witness():
    lifted = lift(mixed_pair())
    assert curvature_entry(lifted, (1,), (2,), 0, 1) == const(-1, 2, 5)
    verdict = is_integrable_nonlinear(mixed_pair())
    assert not verdict
    w = verdict.witness
    assert (w.t, w.s, w.u, w.v, w.value) == ((1,), (2,), 0, 1, -1)


def test_zero_and_single_axis_systems_integrable():
    assert is_integrable_nonlinear(NonlinearSystem(2, 2, {}, 4))
    assert is_integrable_nonlinear(random_nonlinear_system(random.Random(4), 2, 1, 5))


def test_unit_row_sufficiency():
    sys = random_nonlinear_system(random.Random(5), 2, 2, 4, degree=2, terms=2)
    lifted = lift(sys)
    for alpha in [(1, 1), (2, 0), (2, 1)]:
        for beta in multi_indices(2, 4):
            direct = curvature_entry(lifted, alpha, beta, 0, 1)
            acc = const(0, 2, 3)
            for s in range(2):
                if alpha[s]:
                    e = unit_vector(2, s)
                    acc = acc + curvature_entry(lifted, e, vadd(vsub(beta, alpha), e), 0, 1).scale(alpha[s])
            assert direct == acc


# --- identities ---------------------------------------------------------------


@pytest.mark.parametrize("seed", range(3))
def test_identities_random(seed):
    sys = random_nonlinear_system(random.Random(seed), 2, 2, 4)
    report = check_identities(sys, samples=50, seed=seed)
    assert report.ok, report.violations
    assert all(v > 0 for v in report.checked.values())
    assert all(v > 0 for v in report.nontrivial.values())


def test_identities_detect_corrupted_h(monkeypatch):
    from pdeseries.nonlinear import LiftedSystem

    original = LiftedSystem.h

    def corrupted(self, alpha, beta, u):
        value = original(self, alpha, beta, u)
        if alpha[0] >= 2 and beta == vadd(alpha, (0, 1)):
            value = value + const(1, self.k, self.order)
        return value

    monkeypatch.setattr(LiftedSystem, "h", corrupted)
    report = check_identities(random_nonlinear_system(random.Random(0), 2, 2, 4), samples=100)
    assert not report.ok
    assert {v.identity for v in report.violations} >= {"h-additive", "h-unit-rows"}


def test_identities_deterministic():
    sys = random_nonlinear_system(random.Random(7), 2, 2, 4)
    assert check_identities(sys, samples=20, seed=1) == check_identities(sys, samples=20, seed=1)


# --- lift consistency with the linear module ---------------------------------


def test_linear_support_matches_linear_module():
    lin = random_linear_system(random.Random(8), 2, 2, 4)
    nl = as_nonlinear(lin)
    lifted = lift(nl)
    for r in range(2):
        for u in range(2):
            row = lifted.row(unit_vector(2, r), u)
            assert {t.index(1): s for t, s in row.items()} == lin.row(r, u)
    lin_verdict, nl_verdict = check_integrable(lin), is_integrable_nonlinear(nl)
    assert bool(lin_verdict) == bool(nl_verdict)
    R_lin, R_nl = curvature(lin), nonlinear_curvature(nl)
    for t in range(2):
        for s in range(2):
            assert R_nl.get(unit_vector(2, t), unit_vector(2, s), 0, 1) == R_lin[(t, s, 0, 1)]


def test_linear_support_propagators_and_solution():
    lin = LinearSystem.constant([[[1, 2], [0, Fraction(1, 2)]], [[0, 0], [0, 0]]], 6)
    assert check_integrable(lin)
    nl = as_nonlinear(lin)
    lt = propagators(lin)
    nt = lifted_propagators(nl)
    for w in multi_indices(2, 6):
        for r in range(2):
            row = {beta.index(1): s for beta, s in nt[w].get(unit_vector(2, r), {}).items()}
            assert row == lt[w].get(r, {})
    C = (Fraction(3), Fraction(-1, 2))
    assert solve_nonlinear(nl, None, C).series() == solve_linear(lin, C).series()


# --- propagators and solution -------------------------------------------------


def test_riccati_propagators():
    table = lifted_propagators(riccati(order=10))
    assert all(row == {alpha: const(1, 1, 10)} for alpha, row in table[(0,)].items())
    for w in range(11):
        row = table[(w,)][(1,)]
        assert row == {(1 + w,): const(math.factorial(w), 1, 10 - w)}


def test_riccati_solution():
    sol = solve_nonlinear(riccati(), None, [Fraction(1, 2)])
    for w in range(13):
        assert sol.coefficient_polynomial(0, (w,)) == {(w + 1,): (-1) ** w}
    assert sol.evaluate((0,)) == [Fraction(1, 2)]
    value = sol.evaluate((Fraction(1, 10),))[0]
    assert abs(float(value) - 10 / 21) < 1e-9
    fsol = solve_nonlinear(riccati(field=FLOAT), None, [0.5])
    assert abs(fsol.evaluate((0.1,))[0] - 10 / 21) < 1e-9


def test_twin_riccati_closed_form():
    C = Fraction(2, 3)
    sol = solve_nonlinear(twin_riccati(), None, [C])
    y = sol.series()[0]
    for m in multi_indices(2, 8):
        d = sum(m)
        binom = math.comb(d, m[0])
        assert y.coefficient(m) == (-1) ** d * binom * C ** (d + 1)


def test_zero_system_solution():
    sol = solve_nonlinear(NonlinearSystem(2, 2, {}, 4), None, [2, 5])
    assert [dict(s.terms) for s in sol.series()] == [{(0, 0): 2}, {(0, 0): 5}]


def test_solution_refuses_curved():
    with pytest.raises(IntegrabilityError):
        solve_nonlinear(mixed_pair(), None, [1])


def test_window_escape_named():
    small = LaurentWindow((0,), (3,), 4)
    with pytest.raises(WindowEscapeError) as exc:
        lifted_propagators(riccati(order=4), small)
    assert exc.value.index == (4,)
    assert "(4,)" in str(exc.value)
    with pytest.raises(WindowEscapeError):
        lift(riccati(), LaurentWindow((0,), (1,), 4))


def test_negative_exponents():
    # dy/dx + 1/y = 0, so y^2 = C^2 - 2x
    sys = NonlinearSystem(1, 1, {(0, (-1,), 0): const(1, 1, 6)}, 6)
    with pytest.raises(UsageError):
        solve_nonlinear(sys, "auto", [1])
    window = LaurentWindow((-14,), (2,), 6)
    with pytest.raises(UsageError):
        solve_nonlinear(sys, window, [0])
    sol = solve_nonlinear(sys, window, [2])
    y = sol.series()[0]
    assert y * y == PowerSeries(1, 6, {(0,): 4, (1,): -2}, RATIONAL)
    assert residual_nonlinear(sys, sol).passed


# --- monomial closure ---------------------------------------------------------


def test_closure_riccati():
    report = monomial_closure_check(riccati(order=6), None, [Fraction(1, 2)], 5, alphas=[(0,), (2,), (3,)])
    assert report.ok and report.checked == [(0,), (2,), (3,)]


def test_closure_twin_riccati_sampled():
    report = monomial_closure_check(twin_riccati(), None, [Fraction(3, 2)], 5)
    assert report.ok and len(report.checked) >= 2


@pytest.mark.parametrize("seed", range(3))
def test_closure_random_single_axis(seed):
    sys = random_nonlinear_system(random.Random(seed), 2, 1, 6)
    report = monomial_closure_check(sys, None, [Fraction(1), Fraction(-1, 2)], 5, alphas=[(1, 1), (2, 1)])
    assert report.ok


def test_closure_float_mode():
    report = monomial_closure_check(riccati(order=6, field=FLOAT), None, [0.3], 5, alphas=[(2,), (3,)])
    assert report.ok
