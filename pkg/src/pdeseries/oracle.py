"""Independent checks of computed solutions.

* residuals: substitute a solution back into the system;
* :func:`taylor_oracle`: all Taylor coefficients at the origin by successive
  total differentiation of the equations, done in a sympy polynomial ring and
  sharing no code with the propagator solver;
* :func:`path_integrate`: classical RK4 along an axis-aligned path.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np
from sympy import QQ
from sympy.polys.rings import ring

from .linear import LinearSolution, LinearSystem, zero_tolerance
from .nonlinear import NonlinearSolution, NonlinearSystem, monomial_series
from .series import FLOAT, PowerSeries, UsageError, degree_key, factorial_product, multi_indices


# ---------------------------------------------------------------------------
# residuals


@dataclass(frozen=True)
class ResidualReport:
    residuals: dict  # (r, u) -> PowerSeries
    max_abs: dict  # (r, u) -> float
    checked_degree: int
    passed: bool
    failure: tuple | None = None  # (r, u, multi-index, value), 0-based

    def describe(self) -> str:
        if self.passed:
            return f"residual zero through degree {self.checked_degree}"
        r, u, m, value = self.failure
        return f"residual of equation (r={r + 1}, u={u + 1}) has {value} at {m}"


def _finish_residuals(residuals: dict, checked: int, tol: float) -> ResidualReport:
    failure = None
    for (r, u) in sorted(residuals):
        for m, c in residuals[(r, u)].items():
            if abs(c) > tol:
                failure = (r, u, m, c)
                break
        if failure:
            break
    max_abs = {key: s.max_abs() for key, s in residuals.items()}
    return ResidualReport(residuals, max_abs, checked, failure is None, failure)


def _as_series(solution) -> list[PowerSeries]:
    if isinstance(solution, (LinearSolution, NonlinearSolution)):
        return solution.series()
    return list(solution)


def residual_linear(sys: LinearSystem, solution, tol: float | None = None) -> ResidualReport:
    """dy_r/dx_u + sum_s f_rsu y_s for every (r, u), through degree order - 1."""
    ys = _as_series(solution)
    if len(ys) != sys.n:
        raise UsageError("solution has the wrong number of components")
    checked = min(y.order for y in ys) - 1
    res = {}
    for r in range(sys.n):
        for u in range(sys.k):
            acc = ys[r].partial(u)
            for s, c in sys.row(r, u).items():
                acc = acc + c * ys[s]
            res[(r, u)] = acc.truncate(checked)
    tol = zero_tolerance(sys.field, sys.coefficient_scale() + max(y.max_abs() for y in ys), tol)
    return _finish_residuals(res, checked, tol)


def residual_nonlinear(sys: NonlinearSystem, solution, tol: float | None = None) -> ResidualReport:
    """dy_r/dx_u + sum_beta f_{r beta u} y^beta, with y^beta as truncated series products."""
    ys = _as_series(solution)
    if len(ys) != sys.n:
        raise UsageError("solution has the wrong number of components")
    checked = min(y.order for y in ys) - 1
    powers: dict = {}
    res = {}
    for r in range(sys.n):
        for u in range(sys.k):
            acc = ys[r].partial(u)
            for beta, c in sorted(sys.terms(r, u).items()):
                if beta not in powers:
                    powers[beta] = monomial_series(ys, beta)
                acc = acc + c * powers[beta]
            res[(r, u)] = acc.truncate(checked)
    tol = zero_tolerance(sys.field, sys.coefficient_scale() + max(y.max_abs() for y in ys), tol)
    return _finish_residuals(res, checked, tol)


# ---------------------------------------------------------------------------
# Taylor oracle


@dataclass(frozen=True)
class OracleInconsistency:
    """Mixed partial of y_r at the origin that depends on differentiation order."""

    r: int
    multi_index: tuple
    axis_a: int
    axis_b: int
    value_a: dict
    value_b: dict

    def __str__(self):
        return (
            f"d^{self.multi_index} y_{self.r + 1} at 0 differs between last axis "
            f"x{self.axis_a + 1} and x{self.axis_b + 1}"
        )


@dataclass(frozen=True)
class OracleResult:
    """Taylor coefficients of each y_r at 0.

    ``symbolic[r][m]`` maps exponent vectors beta to the coefficient of C^beta;
    ``values[r][m]`` is that polynomial evaluated at the given C (or None).
    """

    order: int
    symbolic: tuple
    values: tuple | None
    consistent: bool
    inconsistency: OracleInconsistency | None = None

    def flat(self, r: int) -> dict:
        """{(m, beta): coefficient}, the layout of NonlinearSolution.coeffs."""
        return {(m, beta): c for m, poly in self.symbolic[r].items() for beta, c in poly.items()}


def _to_fraction(c) -> Fraction:
    return c if isinstance(c, Fraction) else Fraction(c)


class _Differentiator:
    def __init__(self, sys, order: int):
        self.order = order
        self.k = sys.k
        self.n = sys.n
        laurent = isinstance(sys, NonlinearSystem) and sys.has_negative_exponents()
        names = [f"x{i + 1}" for i in range(sys.k)] + [f"y{i + 1}" for i in range(sys.n)]
        if laurent:
            names += [f"z{i + 1}" for i in range(sys.n)]
        self.R, *gens = ring(",".join(names), QQ)
        self.x = gens[: sys.k]
        self.y = gens[sys.k : sys.k + sys.n]
        self.z = gens[sys.k + sys.n :] if laurent else None
        # F[s][u]: right-hand side with dy_s/dx_u = -F[s][u]
        self.F = [[self.R.zero for _ in range(sys.k)] for _ in range(sys.n)]
        if isinstance(sys, LinearSystem):
            for s in range(sys.n):
                for u in range(sys.k):
                    for t, c in sys.row(s, u).items():
                        self.F[s][u] += self._poly(c) * self.y[t]
        else:
            for (s, beta, u), c in sys.f.items():
                self.F[s][u] += self._poly(c) * self._monomial(beta)

    def _poly(self, s: PowerSeries):
        p = self.R.zero
        for m, c in s.terms.items():
            term = self.R(QQ(_to_fraction(c).numerator, _to_fraction(c).denominator))
            for xi, e in zip(self.x, m):
                term *= xi**e
            p += term
        return p

    def _monomial(self, beta):
        term = self.R.one
        for s, e in enumerate(beta):
            if e > 0:
                term *= self.y[s] ** e
            elif e < 0:
                term *= self.z[s] ** (-e)
        return term

    def x_degree(self, monom) -> int:
        return sum(monom[: self.k])

    def truncate_x(self, p, max_deg: int):
        return self.R({mon: c for mon, c in p.items() if self.x_degree(mon) <= max_deg})

    def total_derivative(self, E, u: int, keep: int):
        out = E.diff(self.x[u])
        for s in range(self.n):
            dy = E.diff(self.y[s])
            if dy:
                out -= dy * self.F[s][u]
            if self.z is not None:
                dz = E.diff(self.z[s])
                if dz:
                    out += dz * self.z[s] ** 2 * self.F[s][u]
        return self.truncate_x(out, keep)

    def at_origin(self, E) -> dict:
        """Value at x = 0 as {beta: Fraction}, beta = y-exponents minus z-exponents."""
        out: dict = {}
        for mon, c in E.items():
            if self.x_degree(mon):
                continue
            ye = mon[self.k : self.k + self.n]
            ze = mon[self.k + self.n :] if self.z is not None else (0,) * self.n
            beta = tuple(a - b for a, b in zip(ye, ze))
            out[beta] = out.get(beta, 0) + Fraction(int(c.numerator), int(c.denominator))
        return {b: c for b, c in out.items() if c != 0}


def taylor_oracle(sys, C: Sequence | None = None, order: int | None = None) -> OracleResult:
    """Taylor coefficients of the solution at 0 by successive differentiation.

    Each first partial is known as a function of (x, y) from the equations, so
    d^m y_r is obtained by applying the total derivative
    D_u = d/dx_u - sum_s F_su d/dy_s repeatedly, then setting x = 0, y = C.
    Every alternative last axis is compared; a mismatch is reported as an
    inconsistency (this only happens for non-integrable systems).
    """
    order = sys.order if order is None else order
    if order > sys.order:
        raise UsageError(f"order {order} exceeds system order {sys.order}")
    D = _Differentiator(sys, order)
    k, n = sys.k, sys.n
    E: dict = {}
    symbolic = [dict() for _ in range(n)]
    inconsistency = None
    for m in multi_indices(k, order):
        d = sum(m)
        keep = order - d
        for r in range(n):
            if d == 0:
                E[(r, m)] = D.truncate_x(D.y[r] + D.R.zero, order)
            else:
                axes = [u for u in range(k) if m[u]]
                u = axes[0]
                pred = m[:u] + (m[u] - 1,) + m[u + 1 :]
                E[(r, m)] = D.total_derivative(E[(r, pred)], u, keep)
                if inconsistency is None:
                    base = D.at_origin(E[(r, m)])
                    for v in axes[1:]:
                        pv = m[:v] + (m[v] - 1,) + m[v + 1 :]
                        alt = D.at_origin(D.total_derivative(E[(r, pv)], v, keep))
                        if alt != base:
                            inconsistency = OracleInconsistency(r, m, u, v, base, alt)
                            break
            scale = factorial_product(m)
            symbolic[r][m] = {b: c / scale for b, c in D.at_origin(E[(r, m)]).items()}
    values = None
    if C is not None:
        if len(C) != n:
            raise UsageError(f"expected {n} initial values")
        Cf = [sys.field.coerce(c) for c in C]
        values = []
        for r in range(n):
            row = {}
            for m, poly in symbolic[r].items():
                total = sys.field.zero()
                for beta, c in sorted(poly.items()):
                    term = c if sys.field.exact else float(c)
                    for cs, e in zip(Cf, beta):
                        if e:
                            if cs == 0 and e < 0:
                                raise UsageError("negative power of a zero initial value")
                            term = term * cs**e
                    total = total + term
                if total != 0:
                    row[m] = total
            values.append(row)
        values = tuple(values)
    return OracleResult(order, tuple(symbolic), values, inconsistency is None, inconsistency)


# ---------------------------------------------------------------------------
# numerical path integration


class PathIntegrationError(RuntimeError):
    pass


@dataclass(frozen=True)
class PathIntegrationResult:
    values: tuple
    steps: int
    method_order: int
    error_estimate: float
    axis_order: tuple
    point: tuple


def _float_terms(s: PowerSeries):
    return [(m, float(c)) for m, c in s.items()]


def _poly_eval(terms, x) -> float:
    total = 0.0
    for m, c in terms:
        v = c
        for xi, e in zip(x, m):
            if e:
                v *= xi**e
        total += v
    return total


def _rhs_function(sys):
    """Return F(x, y) -> array of shape (n, k) with dy_r/dx_u = -F[r, u]."""
    n, k = sys.n, sys.k
    if isinstance(sys, LinearSystem):
        entries = [
            (r, s, u, _float_terms(c)) for r in range(n) for u in range(k) for s, c in sys.row(r, u).items()
        ]

        def F(x, y):
            out = np.zeros((n, k))
            for r, s, u, terms in entries:
                out[r, u] += _poly_eval(terms, x) * y[s]
            return out

        return F
    entries = [(r, beta, u, _float_terms(c)) for (r, beta, u), c in sorted(sys.f.items())]

    def F(x, y):
        out = np.zeros((n, k))
        for r, beta, u, terms in entries:
            mono = 1.0
            for ys, e in zip(y, beta):
                if e:
                    mono *= ys**e
            out[r, u] += _poly_eval(terms, x) * mono
        return out

    return F


def _integrate(F, C, x, steps: int, axis_order) -> np.ndarray:
    k = len(x)
    y = np.array([float(c) for c in C])
    pos = [0.0] * k
    for u in axis_order:
        target = float(x[u])
        if target == 0.0:
            continue
        h = target / steps
        start = pos[u]
        for i in range(steps):
            t = start + i * h

            def f(tt, yy):
                p = list(pos)
                p[u] = tt
                return -F(p, yy)[:, u]

            k1 = f(t, y)
            k2 = f(t + h / 2, y + h / 2 * k1)
            k3 = f(t + h / 2, y + h / 2 * k2)
            k4 = f(t + h, y + h * k3)
            y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            if not np.all(np.isfinite(y)):
                raise PathIntegrationError(f"non-finite state on axis x{u + 1} at step {i + 1}")
        pos[u] = target
    return y


def path_integrate(sys, C: Sequence, x: Sequence, steps: int = 1000,
                   axis_order: Sequence[int] | None = None) -> PathIntegrationResult:
    """RK4 along (0,..,0) -> (x1,0,..) -> (x1,x2,0,..) -> ... -> x.

    ``axis_order`` permutes the segments.  The error estimate is the
    Richardson difference against a half-step-count run.
    """
    if steps < 1:
        raise UsageError("steps must be >= 1")
    if len(x) != sys.k or len(C) != sys.n:
        raise UsageError("point or initial value has the wrong dimension")
    axis_order = tuple(range(sys.k)) if axis_order is None else tuple(axis_order)
    if sorted(axis_order) != list(range(sys.k)):
        raise UsageError("axis_order must be a permutation of the axes")
    F = _rhs_function(sys)
    y = _integrate(F, C, x, steps, axis_order)
    if steps >= 2:
        coarse = _integrate(F, C, x, steps // 2, axis_order)
        err = float(np.max(np.abs(y - coarse))) / 15.0
    else:
        err = float("nan")
    return PathIntegrationResult(tuple(float(v) for v in y), steps, 4, err, axis_order,
                                 tuple(float(v) for v in x))


@dataclass(frozen=True)
class CrossValidation:
    series_values: tuple | None
    path_values: tuple
    discrepancy: tuple | None
    path_spread: float
    orderings: dict
    agrees: bool | None

    def max_discrepancy(self) -> float:
        return max(self.discrepancy) if self.discrepancy else float("nan")


def cross_validate(sys, C: Sequence, x: Sequence, order: int | None = None, steps: int = 1000,
                   window=None, tol: float = 1e-6) -> CrossValidation:
    """Series value vs RK4 value at ``x``, plus spread over all k! axis orderings.

    For curved systems the series solver refuses; then only the spread is
    reported (a large spread is the signal of non-integrability).
    """
    from .linear import IntegrabilityError, solve_linear
    from .nonlinear import solve_nonlinear

    order = sys.order if order is None else order
    orderings = {}
    for perm in itertools.permutations(range(sys.k)):
        orderings[perm] = path_integrate(sys, C, x, steps, perm).values
    vals = list(orderings.values())
    spread = max(
        (max(abs(a - b) for a, b in zip(p, q)) for p, q in itertools.combinations(vals, 2)),
        default=0.0,
    )
    path_values = orderings[tuple(range(sys.k))]
    try:
        if isinstance(sys, LinearSystem):
            sol = solve_linear(sys, C, order)
        else:
            sol = solve_nonlinear(sys, window, C, order)
    except IntegrabilityError:
        return CrossValidation(None, path_values, None, spread, orderings, None)
    xs = [float(v) for v in x]
    series_values = tuple(float(s.to_field(FLOAT).evaluate(xs)) for s in sol.series())
    disc = tuple(abs(a - b) for a, b in zip(series_values, path_values))
    return CrossValidation(series_values, path_values, disc, spread, orderings, max(disc) <= tol)
