"""Acceptance criteria 1-10, each at its stated tolerance.

Run with ``pytest tests/test_acceptance.py`` (summary lines appear under
"acceptance criteria") or directly with ``python3 tests/test_acceptance.py``.
"""

import io
import math
import random
import subprocess
import sys
import time
from contextlib import redirect_stdout
from fractions import Fraction

import pytest

from pdeseries import cli
from pdeseries.linear import (
    check_integrable,
    iterated_covariant_check,
    propagators,
    solve_linear,
)
from pdeseries.nonlinear import (
    check_identities,
    is_integrable_nonlinear,
    lifted_propagators,
    monomial_closure_check,
    solve_nonlinear,
)
from pdeseries.oracle import path_integrate, residual_linear, taylor_oracle
from pdeseries.samples import (
    gauge_integrable_system,
    random_linear_system,
    random_nonlinear_system,
    random_series,
)
from pdeseries.series import multi_indices
from pdeseries.specfile import BUNDLED, bundled_spec_path, load_spec

INTEGRABLE = [b for b in BUNDLED if b not in ("noncommuting", "mixed_nonintegrable")]


def spec(name, **kw):
    return load_spec(bundled_spec_path(name), **kw)


def criterion_1():
    notes = []
    ok = True
    for name in ("zero", "exponential", "exp_x1x2"):
        s = spec(name, order=10)
        start = time.perf_counter()
        sol = solve_linear(s.system, s.C, 10)
        report = residual_linear(s.system, sol)
        elapsed = time.perf_counter() - start
        exact = report.passed and report.checked_degree == 9 and all(r.is_zero() for r in report.residuals.values())
        ok &= exact and elapsed < 5.0
        notes.append(f"{name} {'zero' if exact else 'NONZERO'} residual {elapsed:.2f}s")
    return ok, "; ".join(notes)


def criterion_2():
    s = spec("exp_x1x2", order=10)
    sol = solve_linear(s.system, [1], 10)
    coeffs_ok = all(sol.coefficient(0, (m, m)) == Fraction((-1) ** m, math.factorial(m)) for m in range(6))
    value = float(sol.evaluate((Fraction(1, 5), Fraction(3, 10)))[0])
    err = abs(value - math.exp(-0.06))
    return coeffs_ok and err <= 1e-9, f"diagonal coefficients {'exact' if coeffs_ok else 'WRONG'}, |y(0.2,0.3) - exp(-0.06)| = {err:.2e}"


def criterion_3():
    s = spec("riccati", order=12)
    table = lifted_propagators(s.system, s.window, 10)
    p_ok = all(
        {beta: dict(p.terms) for beta, p in table[(w,)][(1,)].items()} == {(w + 1,): {(0,): math.factorial(w)}}
        for w in range(11)
    )
    sol = solve_nonlinear(s.system, s.window, [Fraction(1, 2)], 12)
    sym_ok = all(sol.coefficient_polynomial(0, (w,)) == {(w + 1,): (-1) ** w} for w in range(11))
    err = abs(float(sol.evaluate((Fraction(1, 10),))[0]) - 10 / 21)
    ok = p_ok and sym_ok and err <= 1e-9
    return ok, f"P[w]_(1,w+1) = w! {'exact' if p_ok else 'WRONG'}, (-1)^w C^(w+1) {'exact' if sym_ok else 'WRONG'}, |y - 10/21| = {err:.2e}"


def criterion_4():
    lin = check_integrable(spec("noncommuting").system)
    w = lin.witness
    lin_ok = not lin and w.one_based()[:4] == (1, 1, 1, 2) and w.value == 1
    s = spec("mixed_nonintegrable")
    nl = is_integrable_nonlinear(s.system, s.window)
    v = nl.witness
    nl_ok = not nl and (v.t, v.s, v.u, v.v) == ((1,), (2,), 0, 1) and v.value == -1
    return lin_ok and nl_ok, f"linear witness {w}; nonlinear witness {v}"


def criterion_5():
    shapes = [(2, 2), (1, 2), (2, 2), (2, 1), (1, 2)]
    start = time.perf_counter()
    ok = True
    notes = []
    for seed, (n, k) in enumerate(shapes):
        sys_ = random_nonlinear_system(random.Random(100 + seed), n, k, 4, degree=2)
        report = check_identities(sys_, samples=100, seed=seed)
        # every identity family must have been exercised on nonzero values
        live = all(report.nontrivial[name] > 0 for name in report.checked if report.checked[name])
        ok &= report.ok and report.samples == 100 and live
        status = "ok" if report.ok else f"{len(report.violations)} violations"
        notes.append(f"n={n},k={k}:{status},{sum(report.nontrivial.values())} nontrivial")
    elapsed = time.perf_counter() - start
    return ok and elapsed < 30.0, f"{' '.join(notes)}; {elapsed:.2f}s"


def criterion_6():
    ok = True
    checked = 0
    for seed in range(5):
        sys_, _ = gauge_integrable_system(random.Random(200 + seed), 2, 6)
        if not check_integrable(sys_):
            return False, f"gauge system {seed} not flat"
        table = propagators(sys_, 3)
        rng = random.Random(seed)
        y = [random_series(rng, 2, 6, 4) for _ in range(2)]
        for w in multi_indices(2, 3):
            ok &= iterated_covariant_check(sys_, w, y, table).equal
            checked += 1
    return ok, f"{checked} (system, w) pairs compared exactly"


def criterion_7():
    ok = True
    count = 0
    for seed in range(5):
        sys_ = random_linear_system(random.Random(300 + seed), 2, 2, 5)
        if check_integrable(sys_):
            return False, f"random system {seed} unexpectedly flat"
        table = propagators(sys_, 3, diagnostic=True)
        nonzero = any(not x.is_zero() for d in table.defects for row in d.discrepancy.values() for x in row.values())
        ok &= bool(table.defects) and nonzero and all(d.holds for d in table.defects)
        count += len(table.defects)
    return ok, f"{count} defects equal R P exactly"


def criterion_8():
    notes = []
    ok = True
    for name in INTEGRABLE:
        s = spec(name, order=6)
        oracle = taylor_oracle(s.system, s.C, 6)
        if s.kind == "linear":
            series_ = solve_linear(s.system, s.C, 6).series()
        else:
            series_ = solve_nonlinear(s.system, s.window, s.C, 6).series()
        exact = oracle.consistent and list(oracle.values) == [dict(t.terms) for t in series_]

        f = spec(name, field="float")
        x = [0.1 / math.sqrt(f.k)] * f.k
        if f.kind == "linear":
            fsol = solve_linear(f.system, f.C)
        else:
            fsol = solve_nonlinear(f.system, f.window, f.C)
        values = fsol.evaluate(x)
        path = path_integrate(f.system, f.C, x, steps=1000).values
        disc = max(abs(a - b) for a, b in zip(values, path))
        ok &= exact and disc <= 1e-6
        notes.append(f"{name}:{'=' if exact else '!='},{disc:.1e}")
    return ok, " ".join(notes)


def _solve_report(name):
    proc = subprocess.run(
        [sys.executable, "-m", "pdeseries", "solve", f"bundled:{name}", "--output", "json"],
        capture_output=True,
    )
    return proc.stdout


def criterion_9():
    same = []
    for name in INTEGRABLE:
        a, b = _solve_report(name), _solve_report(name)
        buf = io.StringIO()
        with redirect_stdout(buf):
            cli.main(["solve", f"bundled:{name}", "--output", "json"])
        same.append(bool(a) and a == b == buf.getvalue().encode())
    return all(same), f"{sum(same)}/{len(same)} specs byte-identical across runs"


def criterion_10():
    notes = []
    ok = True
    for name in ("riccati", "twin_riccati"):
        s = spec(name)
        report = monomial_closure_check(s.system, None, s.C, 5, samples=5, seed=0)
        ok &= report.ok and len(report.checked) > 1
        notes.append(f"{name}: alpha in {[a[0] for a in report.checked]} {'exact' if report.ok else 'MISMATCH'}")
    return ok, "; ".join(notes)


CRITERIA = {i: globals()[f"criterion_{i}"] for i in range(1, 11)}


@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number, record_acceptance):
    passed, detail = CRITERIA[number]()
    line = f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}"
    print(line)
    record_acceptance((number, passed, detail))
    assert passed, line


if __name__ == "__main__":
    failures = 0
    for number, fn in CRITERIA.items():
        passed, detail = fn()
        failures += not passed
        print(f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}")
    sys.exit(1 if failures else 0)
