"""Nonlinear systems with Laurent-polynomial right-hand sides.

    dy_r/dx_u + sum_beta f[r, beta, u](x) * y^beta = 0

The unknowns are lifted to all monomials y_alpha = prod_s y_s^{alpha_s}; these
satisfy a *linear* system with coefficients

    h[alpha, beta, u] = sum_s alpha_s * f[s, beta - alpha + e_s, u]

over exponent vectors in Z^n.  The lifted system is solved with the linear
machinery on a finite, user-declared exponent window; any index shift that
would leave the window raises :class:`WindowEscapeError` instead of being
silently dropped.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from dataclasses import field as dc_field
from itertools import combinations, product
from typing import Iterable, Mapping, Sequence

from .linear import (
    Integrability,
    IntegrabilityError,
    PropagatorTable,
    Witness,
    build_propagators,
    collect_columns,
    curvature_row,
    first_violation,
    reach,
    zero_tolerance,
)
from .series import RATIONAL, Field, MultiIndex, PowerSeries, Scalar, UsageError

Exponent = tuple[int, ...]


class WindowEscapeError(UsageError):
    def __init__(self, index: Exponent, window: "LaurentWindow"):
        self.index = index
        self.window = window
        super().__init__(
            f"exponent vector {index} escapes the window lo={window.lo} hi={window.hi}; widen the window"
        )


def unit_vector(n: int, r: int) -> Exponent:
    return tuple(1 if i == r else 0 for i in range(n))


def vadd(a: Sequence[int], b: Sequence[int]) -> Exponent:
    return tuple(x + y for x, y in zip(a, b))


def vsub(a: Sequence[int], b: Sequence[int]) -> Exponent:
    return tuple(x - y for x, y in zip(a, b))


# ---------------------------------------------------------------------------
# system and window


class NonlinearSystem:
    """Coefficients f[(r, beta, u)] of the nonlinear system (0-based r, u)."""

    def __init__(self, n: int, k: int, f: Mapping[tuple, PowerSeries], order: int | None = None,
                 field: Field | None = None):
        if n < 1 or k < 1:
            raise UsageError("need n >= 1 and k >= 1")
        clean = {}
        for (r, beta, u), s in f.items():
            beta = tuple(int(e) for e in beta)
            if not 0 <= r < n or not 0 <= u < k or len(beta) != n:
                raise UsageError(f"coefficient index ({r}, {beta}, {u}) out of range")
            if s.k != k:
                raise UsageError("coefficient series has the wrong number of variables")
            if order is None:
                order = s.order
            if field is None:
                field = s.field
            if s.order != order or s.field != field:
                raise UsageError("all coefficients must share order and field")
            if not s.is_zero():
                clean[(r, beta, u)] = s
        if order is None:
            raise UsageError("order is required for a system without coefficients")
        if order < 1:
            raise UsageError("system order must be >= 1")
        self.n = n
        self.k = k
        self.order = order
        self.field = field or RATIONAL
        self.f = clean
        self.support = frozenset(beta for (_, beta, _) in clean)
        self._by_su: dict = {}
        for (r, beta, u), s in clean.items():
            self._by_su.setdefault((r, u), {})[beta] = s

    def coeff(self, r: int, beta: Sequence[int], u: int) -> PowerSeries | None:
        return self._by_su.get((r, u), {}).get(tuple(beta))

    def terms(self, r: int, u: int) -> dict:
        return self._by_su.get((r, u), {})

    def max_degree(self) -> int:
        return max((sum(b) for b in self.support), default=0)

    def has_negative_exponents(self) -> bool:
        return any(e < 0 for b in self.support for e in b)

    def coefficient_scale(self) -> float:
        return max((s.max_abs() for s in self.f.values()), default=0.0)

    def __repr__(self):
        return f"NonlinearSystem(n={self.n}, k={self.k}, order={self.order}, support={sorted(self.support)})"


@dataclass(frozen=True)
class LaurentWindow:
    """Box lo <= alpha <= hi (component-wise) of admissible exponent vectors."""

    lo: Exponent
    hi: Exponent
    closure_depth: int

    def __post_init__(self):
        if len(self.lo) != len(self.hi):
            raise UsageError("window bounds have different lengths")
        if any(a > b for a, b in zip(self.lo, self.hi)):
            raise UsageError("window needs lo <= hi component-wise")
        if self.closure_depth < 0:
            raise UsageError("closure_depth must be >= 0")

    def __contains__(self, alpha) -> bool:
        return all(a <= x <= b for a, x, b in zip(self.lo, alpha, self.hi))

    def vectors(self) -> list[Exponent]:
        return list(product(*(range(a, b + 1) for a, b in zip(self.lo, self.hi))))

    @classmethod
    def auto(cls, sys: NonlinearSystem, depth: int, margin: int = 0) -> "LaurentWindow":
        """[0, max(1, deg) * (depth + 1) + margin] per component; polynomial support only."""
        if sys.has_negative_exponents():
            raise UsageError("negative exponents need an explicit window")
        top = max(1, sys.max_degree()) * (depth + 1) + margin
        return cls((0,) * sys.n, (top,) * sys.n, depth)


def _resolve_window(sys: NonlinearSystem, window, depth: int) -> LaurentWindow:
    if window is None or window == "auto":
        return LaurentWindow.auto(sys, depth)
    if len(window.lo) != sys.n:
        raise UsageError(f"window has {len(window.lo)} components, system has {sys.n} unknowns")
    for beta in sys.support:
        if beta not in window:
            raise WindowEscapeError(beta, window)
    return window


# ---------------------------------------------------------------------------
# the lift


class LiftedSystem:
    """Linear system over exponent vectors; coefficients are the h tensor.

    Implements the connection protocol of :mod:`pdeseries.linear`.
    """

    def __init__(self, sys: NonlinearSystem, window: LaurentWindow):
        self.sys = sys
        self.window = window
        self.n = sys.n
        self.k = sys.k
        self.order = sys.order
        self.field = sys.field
        self._rows: dict = {}
        self._zero = PowerSeries.zero(sys.k, sys.order, sys.field)

    def h(self, alpha: Sequence[int], beta: Sequence[int], u: int) -> PowerSeries:
        """h[alpha, beta, u] by the defining sum; valid for any alpha, beta in Z^n."""
        acc = self._zero
        for s in range(self.n):
            if alpha[s] == 0:
                continue
            gamma = tuple(b - a + (i == s) for i, (a, b) in enumerate(zip(alpha, beta)))
            c = self.sys.coeff(s, gamma, u)
            if c is not None:
                acc = acc + c.scale(alpha[s])
        return acc

    def row(self, alpha: Exponent, u: int) -> dict:
        """Nonzero h[alpha, t, u] keyed by t; every t must lie in the window."""
        key = (alpha, u)
        cached = self._rows.get(key)
        if cached is not None:
            return cached
        acc: dict = {}
        for s in range(self.n):
            if alpha[s] == 0:
                continue
            for gamma, c in self.sys.terms(s, u).items():
                t = tuple(a + g - (i == s) for i, (a, g) in enumerate(zip(alpha, gamma)))
                term = c.scale(alpha[s])
                acc[t] = acc[t] + term if t in acc else term
        out = {t: s for t, s in acc.items() if not s.is_zero()}
        for t in out:
            if t not in self.window:
                raise WindowEscapeError(t, self.window)
        self._rows[key] = out
        return out

    def units(self) -> list[Exponent]:
        return [unit_vector(self.n, r) for r in range(self.n)]

    def index_set(self, depth: int | None = None, roots: Iterable[Exponent] | None = None) -> list[Exponent]:
        """Window vectors reachable from ``roots`` (default: unit vectors) in <= depth shifts."""
        depth = self.window.closure_depth if depth is None else depth
        roots = self.units() if roots is None else list(roots)
        for r in roots:
            if r not in self.window:
                raise WindowEscapeError(r, self.window)
        dist = reach(self, roots, depth)
        return sorted(dist, key=lambda a: (dist[a], a))


def lift(sys: NonlinearSystem, window: LaurentWindow | str | None = None) -> LiftedSystem:
    window = _resolve_window(sys, window, sys.order)
    lifted = LiftedSystem(sys, window)
    lifted.index_set()  # fail early on escape
    return lifted


@dataclass(frozen=True)
class HTensor:
    """Nonzero h[alpha, beta, u] for alpha in the lifted index set.

    ``get`` evaluates any entry by the defining sum, including indices
    outside the stored set.
    """

    lifted: LiftedSystem
    index_set: tuple
    entries: dict

    def get(self, alpha, beta, u) -> PowerSeries:
        return self.lifted.h(tuple(alpha), tuple(beta), u)


def h_tensor(sys: NonlinearSystem, window: LaurentWindow | str | None = None) -> HTensor:
    lifted = lift(sys, window)
    idx = lifted.index_set()
    entries = {}
    for alpha in idx:
        for u in range(sys.k):
            for t, s in lifted.row(alpha, u).items():
                entries[(alpha, t, u)] = s
    return HTensor(lifted, tuple(idx), entries)


# ---------------------------------------------------------------------------
# curvature and integrability


def curvature_entry(lifted: LiftedSystem, alpha, beta, u: int, v: int) -> PowerSeries:
    """R[alpha, beta, u, v] with the t-sums running over the (exact) sparse rows of alpha."""
    alpha, beta = tuple(alpha), tuple(beta)
    order = lifted.order - 1
    acc = lifted.h(alpha, beta, v).partial(u) - lifted.h(alpha, beta, u).partial(v)
    for t, c in lifted.row(alpha, u).items():
        acc = acc + lifted.h(t, beta, v) * c
    for t, c in lifted.row(alpha, v).items():
        acc = acc - lifted.h(t, beta, u) * c
    return acc.truncate(order)


@dataclass(frozen=True)
class NonlinearCurvature:
    """R rows for alpha in ``rows``; entries keyed (alpha, beta, u, v) with u < v."""

    lifted: LiftedSystem
    rows: tuple
    entries: dict
    valid_order: int

    def get(self, alpha, beta, u, v) -> PowerSeries:
        if u == v:
            return PowerSeries.zero(self.lifted.k, self.valid_order, self.lifted.field)
        if u > v:
            return -self.get(alpha, beta, v, u)
        key = (tuple(alpha), tuple(beta), u, v)
        if key in self.entries:
            return self.entries[key]
        return curvature_entry(self.lifted, alpha, beta, u, v)


def nonlinear_curvature(sys: NonlinearSystem, window: LaurentWindow | str | None = None,
                        rows: Iterable[Exponent] | None = None) -> NonlinearCurvature:
    """Curvature rows (default: the unit-vector rows, which decide integrability)."""
    lifted = lift(sys, window)
    rows = lifted.units() if rows is None else [tuple(a) for a in rows]
    entries = {}
    for u, v in combinations(range(sys.k), 2):
        for alpha in rows:
            for beta, s in curvature_row(lifted, alpha, u, v).items():
                entries[(alpha, beta, u, v)] = s
    return NonlinearCurvature(lifted, tuple(rows), entries, sys.order - 1)


def is_integrable_nonlinear(sys: NonlinearSystem, window: LaurentWindow | str | None = None,
                            tol: float | None = None) -> Integrability:
    """Flatness of the lift, tested on unit-vector rows only (enough by linearity in alpha)."""
    R = nonlinear_curvature(sys, window)
    tol = zero_tolerance(sys.field, sys.coefficient_scale(), tol)
    keys = sorted(R.entries, key=lambda key: (key[0], key[2], key[3], key[1]))
    witness = first_violation((((a, b, u, v), R.entries[(a, b, u, v)]) for a, b, u, v in keys), tol)
    return Integrability(witness is None, sys.order - 1, witness)


# ---------------------------------------------------------------------------
# identities of h and R


@dataclass(frozen=True)
class IdentityViolation:
    identity: str
    indices: tuple
    detail: str = ""


@dataclass
class IdentityReport:
    samples: int
    checked: dict
    violations: list
    nontrivial: dict = dc_field(default_factory=dict)  # comparisons with a nonzero side

    @property
    def ok(self) -> bool:
        return not self.violations


def _sample_vector(rng: random.Random, window: LaurentWindow) -> Exponent:
    return tuple(rng.randint(a, b) for a, b in zip(window.lo, window.hi))


def _sample_target(rng: random.Random, window: LaurentWindow, origin: Exponent, support: list) -> Exponent:
    """Uniform half the time; otherwise origin + gamma - e_s, where h rows are nonzero."""
    if not support or rng.random() < 0.5:
        return _sample_vector(rng, window)
    gamma = rng.choice(support)
    s = rng.randrange(len(origin))
    return tuple(o + g - (i == s) for i, (o, g) in enumerate(zip(origin, gamma)))


def check_identities(sys: NonlinearSystem, window: LaurentWindow | str | None = None,
                     samples: int = 100, seed: int = 0, tol: float | None = None) -> IdentityReport:
    """Check the additivity and unit-row identities of h and R on random index triples.

      h[a+b, g, u] = h[a, g-b, u] + h[b, g-a, u]
      R[a+b, g, u, v] = R[a, g-b, u, v] + R[b, g-a, u, v]
      h[a, b, u] = sum_s a_s h[e_s, b-a+e_s, u]
      R[a, b, u, v] = sum_s a_s R[e_s, b-a+e_s, u, v]

    Triples whose R evaluations need indices outside the window are redrawn.
    """
    lifted = lift(sys, window)
    window = lifted.window
    rng = random.Random(seed)
    tol = zero_tolerance(sys.field, sys.coefficient_scale(), tol)
    n, k = sys.n, sys.k
    pairs = list(combinations(range(k), 2))
    units = lifted.units()
    support = sorted(sys.support)
    checked = {"h-additive": 0, "R-additive": 0, "h-unit-rows": 0, "R-unit-rows": 0}
    nontrivial = dict.fromkeys(checked, 0)

    def compare(name, lhs, rhs, indices):
        checked[name] += 1
        if not (lhs.is_zero() and rhs.is_zero()):
            nontrivial[name] += 1
        if not same(lhs, rhs):
            violations.append(IdentityViolation(name, indices))
    violations: list[IdentityViolation] = []

    def same(a: PowerSeries, b: PowerSeries) -> bool:
        order = min(a.order, b.order)
        return (a.truncate(order) - b.truncate(order)).is_zero(tol)

    drawn = 0
    attempts = 0
    while drawn < samples:
        attempts += 1
        if attempts > 200 * samples:
            raise UsageError("could not draw samples inside the window; widen it")
        a = _sample_vector(rng, window)
        b = _sample_target(rng, window, a, support)
        ab = vadd(a, b)
        if ab not in window:
            continue
        g = _sample_target(rng, window, ab, support)
        try:
            r_checks = []
            for u, v in pairs:
                lhs = curvature_entry(lifted, ab, g, u, v)
                rhs = curvature_entry(lifted, a, vsub(g, b), u, v) + curvature_entry(lifted, b, vsub(g, a), u, v)
                unit_sum = PowerSeries.zero(k, sys.order - 1, sys.field)
                for s in range(n):
                    if a[s]:
                        shifted = vadd(vsub(b, a), units[s])
                        unit_sum = unit_sum + curvature_entry(lifted, units[s], shifted, u, v).scale(a[s])
                direct = curvature_entry(lifted, a, b, u, v)
                r_checks.append((u, v, lhs, rhs, direct, unit_sum))
        except WindowEscapeError:
            continue
        drawn += 1
        for u in range(k):
            compare("h-additive", lifted.h(ab, g, u),
                    lifted.h(a, vsub(g, b), u) + lifted.h(b, vsub(g, a), u), (a, b, g, u))
            unit_sum = PowerSeries.zero(k, sys.order, sys.field)
            for s in range(n):
                if a[s]:
                    unit_sum = unit_sum + lifted.h(units[s], vadd(vsub(b, a), units[s]), u).scale(a[s])
            compare("h-unit-rows", lifted.h(a, b, u), unit_sum, (a, b, u))
        for u, v, lhs, rhs, direct, unit_sum in r_checks:
            compare("R-additive", lhs, rhs, (a, b, g, u, v))
            compare("R-unit-rows", direct, unit_sum, (a, b, u, v))
    return IdentityReport(drawn, checked, violations, nontrivial)


# ---------------------------------------------------------------------------
# propagators and solution


def lifted_propagators(
    sys: NonlinearSystem,
    window: LaurentWindow | str | None = None,
    max_total: int | None = None,
    *,
    roots: Iterable[Exponent] | None = None,
    diagnostic: bool = False,
    tol: float | None = None,
) -> PropagatorTable:
    """P^<w>_{alpha beta} of the lifted system on rows reachable from ``roots``."""
    max_total = sys.order if max_total is None else max_total
    if max_total > sys.order:
        raise UsageError(f"max_total {max_total} exceeds system order {sys.order}")
    window = _resolve_window(sys, window, max_total)
    if max_total > window.closure_depth:
        raise UsageError(f"window closure_depth {window.closure_depth} < requested levels {max_total}")
    lifted = LiftedSystem(sys, window)
    if not diagnostic:
        verdict = is_integrable_nonlinear(sys, window, tol)
        if not verdict:
            raise IntegrabilityError(verdict.witness)
    roots = lifted.units() if roots is None else [tuple(r) for r in roots]
    for r in roots:
        if r not in window:
            raise WindowEscapeError(r, window)
    return build_propagators(lifted, roots, max_total, diagnostic=diagnostic)


def _c_power(C: Sequence[Scalar], beta: Sequence[int], field: Field) -> Scalar:
    value = field.one()
    for c, e in zip(C, beta):
        if e:
            if c == 0 and e < 0:
                raise UsageError("negative power of a zero initial value")
            value = value * c**e
    return value


@dataclass(frozen=True)
class NonlinearSolution:
    """Solution coefficients keyed (x multi-index, C exponent vector).

    ``coeffs[r][(m, beta)]`` multiplies x^m * C^beta in y_r.  ``C`` is the
    initial value the solution was requested for; other values may be
    substituted through :meth:`series` and :meth:`evaluate`.
    """

    system: NonlinearSystem
    C: tuple
    order: int
    coeffs: tuple
    rows: tuple = ()

    def coefficient_polynomial(self, r: int, m: Sequence[int]) -> dict:
        m = tuple(m)
        return {beta: c for (mm, beta), c in self.coeffs[r].items() if mm == m}

    def series(self, C: Sequence | None = None) -> list[PowerSeries]:
        field = self.system.field
        C = self.C if C is None else tuple(field.coerce(c) for c in C)
        out = []
        for table in self.coeffs:
            acc: dict = {}
            for (m, beta), c in table.items():
                acc[m] = acc.get(m, 0) + c * _c_power(C, beta, field)
            out.append(PowerSeries(self.system.k, self.order, acc, field))
        return out

    def evaluate(self, x: Sequence, C: Sequence | None = None) -> list[Scalar]:
        return [s.evaluate(x) for s in self.series(C)]


def _check_initial_values(sys: NonlinearSystem, C: Sequence) -> tuple:
    if len(C) != sys.n:
        raise UsageError(f"expected {sys.n} initial values, got {len(C)}")
    C = tuple(sys.field.coerce(c) for c in C)
    if sys.has_negative_exponents() and any(c == 0 for c in C):
        raise UsageError("initial values must be nonzero when the support has negative exponents")
    return C


def solve_nonlinear(
    sys: NonlinearSystem,
    window: LaurentWindow | str | None,
    C: Sequence,
    order: int | None = None,
    *,
    table: PropagatorTable | None = None,
    tol: float | None = None,
) -> NonlinearSolution:
    """y_r = sum_w prod (-x_u)^{w_u}/w_u! sum_beta P^<w>_{e_r, beta} C^beta, to degree ``order``."""
    order = sys.order if order is None else order
    C = _check_initial_values(sys, C)
    if table is None:
        table = lifted_propagators(sys, window, order, tol=tol)
    rows = [unit_vector(sys.n, r) for r in range(sys.n)]
    coeffs = tuple(collect_columns(table, row, order) for row in rows)
    return NonlinearSolution(sys, C, order, coeffs, tuple(rows))


@dataclass
class ClosureReport:
    order: int
    checked: list
    mismatches: list

    @property
    def ok(self) -> bool:
        return not self.mismatches


def monomial_series(sol_series: Sequence[PowerSeries], alpha: Sequence[int]) -> PowerSeries:
    """prod_s y_s^{alpha_s} as a truncated series (reciprocals for negative powers)."""
    first = sol_series[0]
    acc = PowerSeries.constant(1, first.k, first.order, first.field)
    for s, e in zip(sol_series, alpha):
        if e:
            acc = acc * s**e
    return acc


def monomial_closure_check(
    sys: NonlinearSystem,
    window: LaurentWindow | str | None,
    C: Sequence,
    order: int,
    alphas: Iterable[Exponent] | None = None,
    samples: int = 5,
    seed: int = 0,
) -> ClosureReport:
    """Solve the lift on extra rows alpha and compare with products of the y_s."""
    C = _check_initial_values(sys, C)
    if window is None or window == "auto":
        window = LaurentWindow.auto(sys, order, margin=max(1, sys.max_degree()) * 2)
    lifted = LiftedSystem(sys, window)
    units = lifted.units()
    if alphas is None:
        near = [a for a in lifted.index_set(depth=2) if a not in units]
        rng = random.Random(seed)
        alphas = sorted(rng.sample(near, min(samples, len(near)))) if near else []
        alphas = [(0,) * sys.n] + alphas
    alphas = [tuple(a) for a in alphas]
    table = lifted_propagators(sys, window, order, roots=units + [a for a in alphas if a not in units])
    ys = [PowerSeries(sys.k, order, _contract(collect_columns(table, u, order), C, sys.field), sys.field)
          for u in units]
    tol = zero_tolerance(sys.field, sys.coefficient_scale() + max(abs(c) for c in C), None)
    checked, mismatches = [], []
    for alpha in alphas:
        lifted_y = PowerSeries(sys.k, order, _contract(collect_columns(table, alpha, order), C, sys.field), sys.field)
        product_y = monomial_series(ys, alpha)
        checked.append(alpha)
        if not (lifted_y - product_y).is_zero(tol):
            mismatches.append((alpha, lifted_y, product_y))
    return ClosureReport(order, checked, mismatches)


def _contract(cols: dict, C: Sequence[Scalar], field: Field) -> dict:
    acc: dict = {}
    for (m, beta), c in cols.items():
        acc[m] = acc.get(m, 0) + c * _c_power(C, beta, field)
    return acc
