"""Homogeneous linear first-order systems  dy_r/dx_u + sum_s f[r][s][u] y_s = 0.

Everything here is written against a small "connection" protocol so that the
monomial lift of a nonlinear system (see :mod:`pdeseries.nonlinear`) can reuse
it.  A connection has ``k``, ``order``, ``field`` and a method
``row(t, u) -> {s: series}`` returning the nonzero coefficients f_{t s u}.
Matrices are sparse ``{row: {col: PowerSeries}}`` dicts.

All indices are 0-based in the Python API.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field as dc_field
from fractions import Fraction
from itertools import combinations
from typing import Hashable, Iterable, Sequence

from .series import (
    RATIONAL,
    Field,
    MultiIndex,
    PowerSeries,
    Scalar,
    UsageError,
    degree_key,
    factorial_product,
    format_scalar,
    multi_indices,
    unit,
)

Index = Hashable
SparseMatrix = dict  # {row: {col: PowerSeries}}

FLOAT_RELATIVE_TOL = 1e-10


class IntegrabilityError(Exception):
    """A computation that requires a flat system was given a curved one."""

    def __init__(self, witness: "Witness"):
        self.witness = witness
        super().__init__(f"system is not integrable: {witness}")


@dataclass(frozen=True)
class Witness:
    """Nonzero curvature coefficient: R[t][s][u][v] has ``value`` at x^``multi_index``."""

    t: Index
    s: Index
    u: int
    v: int
    multi_index: MultiIndex
    value: Scalar

    def one_based(self) -> tuple:
        def shift(i):
            return i + 1 if isinstance(i, int) else i

        return (shift(self.t), shift(self.s), self.u + 1, self.v + 1, self.multi_index, self.value)

    def __str__(self):
        t, s, u, v, m, val = self.one_based()
        return f"R[{t},{s},{u},{v}] coefficient at {m} = {format_scalar(val)}"


# ---------------------------------------------------------------------------
# system container


class LinearSystem:
    """Coefficients f[r][s][u] of the linear system, each a PowerSeries.

    ``f`` is indexed ``f[r][s][u]`` with 0-based r, s (unknowns) and u (axis).
    """

    def __init__(self, f: Sequence[Sequence[Sequence[PowerSeries]]]):
        n = len(f)
        if n < 1:
            raise UsageError("need at least one unknown")
        if any(len(row) != n for row in f):
            raise UsageError("coefficient array must be n x n x k")
        k = len(f[0][0])
        if k < 1:
            raise UsageError("need at least one variable")
        first = f[0][0][0]
        for row in f:
            for entry in row:
                if len(entry) != k:
                    raise UsageError("coefficient array must be n x n x k")
                for s in entry:
                    if s.k != k:
                        raise UsageError(f"coefficient series has {s.k} variables, expected {k}")
                    if s.order != first.order or s.field != first.field:
                        raise UsageError("all coefficients must share order and field")
        if first.order < 1:
            raise UsageError("system order must be >= 1")
        self.n = n
        self.k = k
        self.order = first.order
        self.field = first.field
        self.f = tuple(tuple(tuple(entry) for entry in row) for row in f)
        self._rows = {
            (t, u): {s: self.f[t][s][u] for s in range(n) if not self.f[t][s][u].is_zero()}
            for t in range(n)
            for u in range(k)
        }

    @classmethod
    def zero(cls, n: int, k: int, order: int, field: Field = RATIONAL) -> "LinearSystem":
        z = PowerSeries.zero(k, order, field)
        return cls([[[z] * k for _ in range(n)] for _ in range(n)])

    @classmethod
    def from_matrices(cls, mats: Sequence[Sequence[Sequence[PowerSeries]]]) -> "LinearSystem":
        """Build from k coefficient matrices F_u with F_u[r][s] = f[r][s][u]."""
        k = len(mats)
        n = len(mats[0])
        return cls([[[mats[u][r][s] for u in range(k)] for s in range(n)] for r in range(n)])

    @classmethod
    def constant(cls, mats, order: int, field: Field = RATIONAL) -> "LinearSystem":
        """System with constant coefficient matrices (nested lists of scalars)."""
        k = len(mats)
        return cls.from_matrices(
            [[[PowerSeries.constant(c, k, order, field) for c in row] for row in m] for m in mats]
        )

    @property
    def indices(self) -> range:
        return range(self.n)

    def row(self, t: int, u: int) -> dict[int, PowerSeries]:
        return self._rows[(t, u)]

    def matrix(self, u: int) -> list[list[PowerSeries]]:
        return [[self.f[r][s][u] for s in range(self.n)] for r in range(self.n)]

    def scaled(self, c) -> "LinearSystem":
        return LinearSystem([[[e.scale(c) for e in entry] for entry in row] for row in self.f])

    def coefficient_scale(self) -> float:
        """Largest |coefficient| over all f; used for float zero tests."""
        return max((e.max_abs() for row in self.f for entry in row for e in entry), default=0.0)

    def __repr__(self):
        return f"LinearSystem(n={self.n}, k={self.k}, order={self.order}, field={self.field.name})"


# ---------------------------------------------------------------------------
# sparse helpers shared with the nonlinear lift


def _zero(conn, order: int) -> PowerSeries:
    return PowerSeries.zero(conn.k, order, conn.field)


def _add_into(acc: dict, key, s: PowerSeries):
    if key in acc:
        acc[key] = acc[key] + s
    else:
        acc[key] = s


def sparse_identity(conn, rows: Iterable[Index]) -> SparseMatrix:
    one = PowerSeries.constant(1, conn.k, conn.order, conn.field)
    return {a: {a: one} for a in rows}


def covariant_step(conn, P: SparseMatrix, u: int, rows: Iterable[Index], order_in: int) -> SparseMatrix:
    """(D_u P)[a][b] = dP[a][b]/dx_u + sum_t f_{a t u} P[t][b], for the given rows.

    ``order_in`` is the trusted order of P; the result is trusted one less.
    """
    order = order_in - 1
    if order < 0:
        raise UsageError("series order exhausted")
    out: SparseMatrix = {}
    for a in rows:
        if a not in P:
            raise KeyError(f"row {a!r} missing from propagator")
        acc: dict = {}
        for b, s in P[a].items():
            acc[b] = s.partial(u)
        for t, coeff in conn.row(a, u).items():
            if t not in P:
                raise KeyError(f"row {t!r} missing from propagator")
            for b, s in P[t].items():
                _add_into(acc, b, coeff * s)
        out[a] = {b: x.truncate(order) for b, x in acc.items() if not x.truncate(order).is_zero()}
    return out


def sparse_sub(A: SparseMatrix, B: SparseMatrix) -> SparseMatrix:
    out: SparseMatrix = {}
    for a in set(A) | set(B):
        row = dict(A.get(a, {}))
        for b, s in B.get(a, {}).items():
            row[b] = row[b] - s if b in row else -s
        out[a] = {b: s for b, s in row.items() if not s.is_zero()}
    return out


def sparse_equal(A: SparseMatrix, B: SparseMatrix, order: int, tol: float = 0.0) -> bool:
    """Compare two sparse matrices up to total degree ``order``."""
    for a in set(A) | set(B):
        ra, rb = A.get(a, {}), B.get(a, {})
        for b in set(ra) | set(rb):
            sa, sb = ra.get(b), rb.get(b)
            if sa is None:
                diff = -sb
            elif sb is None:
                diff = sa
            else:
                diff = sa.truncate(min(order, sa.order)) - sb.truncate(min(order, sb.order))
            if not diff.truncate(min(order, diff.order)).is_zero(tol):
                return False
    return True


def reach(conn, roots: Iterable[Index], depth: int, *, axes: Sequence[int] | None = None) -> dict[Index, int]:
    """Indices reachable from ``roots`` in <= depth coefficient shifts, with their distance."""
    axes = range(conn.k) if axes is None else axes
    dist: dict[Index, int] = {}
    queue = deque()
    for r in roots:
        if r not in dist:
            dist[r] = 0
            queue.append(r)
    while queue:
        a = queue.popleft()
        if dist[a] == depth:
            continue
        for u in axes:
            for t in conn.row(a, u):
                if t not in dist:
                    dist[t] = dist[a] + 1
                    queue.append(t)
    return dist


def curvature_row(conn, t: Index, u: int, v: int) -> dict[Index, PowerSeries]:
    """R_{t s u v} for all s with a possibly nonzero entry.

    R_{tsuv} = d_u f_{tsv} - d_v f_{tsu} + sum_p f_{tpu} f_{psv} - sum_p f_{tpv} f_{psu}.
    """
    order = conn.order - 1
    acc: dict = {}
    for s, c in conn.row(t, v).items():
        _add_into(acc, s, c.partial(u))
    for s, c in conn.row(t, u).items():
        _add_into(acc, s, -c.partial(v))
    for p, c in conn.row(t, u).items():
        for s, d in conn.row(p, v).items():
            _add_into(acc, s, c * d)
    for p, c in conn.row(t, v).items():
        for s, d in conn.row(p, u).items():
            _add_into(acc, s, -(c * d))
    return {s: x.truncate(min(order, x.order)) for s, x in acc.items()}


# ---------------------------------------------------------------------------
# curvature and integrability


@dataclass(frozen=True)
class CurvatureTensor:
    """R[t][s][u][v] for u < v; other orderings are derived by antisymmetry."""

    n: int
    k: int
    entries: dict
    valid_order: int
    field: Field
    scale: float = 0.0

    def __getitem__(self, key) -> PowerSeries:
        t, s, u, v = key
        if u == v:
            return PowerSeries.zero(self.k, self.valid_order, self.field)
        if u > v:
            return -self.entries[(t, s, v, u)]
        return self.entries[(t, s, u, v)]

    def matrix(self, u: int, v: int) -> list[list[PowerSeries]]:
        return [[self[(t, s, u, v)] for s in range(self.n)] for t in range(self.n)]


def curvature(sys: LinearSystem) -> CurvatureTensor:
    entries = {}
    for u, v in combinations(range(sys.k), 2):
        for t in range(sys.n):
            row = curvature_row(sys, t, u, v)
            for s in range(sys.n):
                entries[(t, s, u, v)] = row.get(s, _zero(sys, sys.order - 1))
    return CurvatureTensor(sys.n, sys.k, entries, sys.order - 1, sys.field, sys.coefficient_scale())


@dataclass(frozen=True)
class Integrability:
    """Outcome of a flatness test; ``integrable`` means R == 0 through ``order``."""

    integrable: bool
    order: int
    witness: Witness | None = None

    def __bool__(self):
        return self.integrable

    def describe(self) -> str:
        if self.integrable:
            return f"integrable to order {self.order}"
        return f"not integrable: {self.witness}"


def zero_tolerance(field: Field, scale: float, tol: float | None = None) -> float:
    if field.exact:
        return 0.0
    if tol is not None:
        return tol
    return FLOAT_RELATIVE_TOL * (1.0 + scale)


def first_violation(items: Iterable[tuple[tuple, PowerSeries]], tol: float) -> Witness | None:
    for (t, s, u, v), series in items:
        for m, c in series.items():
            if abs(c) > tol:
                return Witness(t, s, u, v, m, c)
    return None


def is_integrable(R: CurvatureTensor, tol: float | None = None) -> Integrability:
    tol = zero_tolerance(R.field, R.scale, tol)
    keys = sorted(R.entries, key=lambda key: (key[0], key[1], key[2], key[3]))
    witness = first_violation(((key, R.entries[key]) for key in keys), tol)
    return Integrability(witness is None, R.valid_order, witness)


def check_integrable(sys: LinearSystem, tol: float | None = None) -> Integrability:
    return is_integrable(curvature(sys), tol)


# ---------------------------------------------------------------------------
# propagators


@dataclass(frozen=True)
class CommutationDefect:
    """Two-path comparison for target ``base + e_u + e_v``.

    ``path_a`` increments v then u, ``path_b`` increments u then v; the
    difference should equal R_uv . P^base.
    """

    target: MultiIndex
    base: MultiIndex
    u: int
    v: int
    discrepancy: SparseMatrix
    expected: SparseMatrix
    order: int

    @property
    def holds(self) -> bool:
        return sparse_equal(self.discrepancy, self.expected, self.order)


@dataclass
class PropagatorTable:
    """P^<w> for all |w| <= max_total along the canonical increment path.

    The canonical path reaches ``w`` from ``w - e_u`` with ``u`` the lowest
    nonzero axis, so P^<w> = D_1^{w_1} ... D_k^{w_k} (identity).
    """

    k: int
    order: int
    field: Field
    max_total: int
    table: dict
    indices: tuple | None = None
    defects: list = dc_field(default_factory=list)

    def __getitem__(self, w) -> SparseMatrix:
        return self.table[tuple(w)]

    def valid_order(self, w) -> int:
        return self.order - sum(w)

    def entry(self, w, t, s) -> PowerSeries:
        return self.table[tuple(w)].get(t, {}).get(s) or PowerSeries.zero(self.k, self.valid_order(w), self.field)

    def matrix(self, w) -> list[list[PowerSeries]]:
        if self.indices is None:
            raise UsageError("dense view needs a finite index list")
        return [[self.entry(w, t, s) for s in self.indices] for t in self.indices]


def canonical_axis(w: Sequence[int]) -> int:
    for u, e in enumerate(w):
        if e:
            return u
    raise ValueError("zero multi-index has no predecessor")


def build_propagators(conn, roots: Iterable[Index], max_total: int, *, diagnostic: bool = False) -> PropagatorTable:
    """Fill P^<w> for |w| <= max_total on the rows reachable from ``roots``.

    Rows needed at level L are those within ``max_total - L`` shifts of the
    roots; the recursion only ever looks one shift ahead, so this is closed.
    """
    if max_total > conn.order:
        raise UsageError(f"max_total {max_total} exceeds series order {conn.order}")
    dist = reach(conn, roots, max_total)
    ordered = sorted(dist, key=lambda a: (dist[a], repr(a)))
    rows_at = {L: [a for a in ordered if dist[a] <= max_total - L] for L in range(max_total + 1)}
    k = conn.k
    table: dict = {(0,) * k: sparse_identity(conn, rows_at[0])}
    for w in multi_indices(k, max_total):
        if sum(w) == 0:
            continue
        u = canonical_axis(w)
        pred = w[:u] + (w[u] - 1,) + w[u + 1 :]
        table[w] = covariant_step(conn, table[pred], u, rows_at[sum(w)], conn.order - sum(w) + 1)
    out = PropagatorTable(k, conn.order, conn.field, max_total, table)
    if diagnostic:
        out.defects = _commutation_defects(conn, table, rows_at, max_total)
    return out


def _commutation_defects(conn, table, rows_at, max_total) -> list[CommutationDefect]:
    defects = []
    for w in multi_indices(conn.k, max_total):
        axes = [u for u, e in enumerate(w) if e]
        if len(axes) < 2:
            continue
        u, v = axes[0], axes[1]
        base = tuple(e - (i == u) - (i == v) for i, e in enumerate(w))
        L = sum(w)
        rows_mid = rows_at[L - 1]
        rows_top = rows_at[L]
        ob = conn.order - sum(base)
        a = covariant_step(conn, covariant_step(conn, table[base], v, rows_mid, ob), u, rows_top, ob - 1)
        b = covariant_step(conn, covariant_step(conn, table[base], u, rows_mid, ob), v, rows_top, ob - 1)
        disc = sparse_sub(a, b)
        expected = {}
        Pb = table[base]
        for t in rows_top:
            acc: dict = {}
            for q, r in curvature_row(conn, t, u, v).items():
                for s, p in Pb.get(q, {}).items():
                    _add_into(acc, s, r * p)
            expected[t] = {s: x for s, x in acc.items() if not x.is_zero()}
        defects.append(CommutationDefect(w, base, u, v, disc, expected, conn.order - L))
    return defects


def propagators(
    sys: LinearSystem,
    max_total: int | None = None,
    *,
    diagnostic: bool = False,
    tol: float | None = None,
) -> PropagatorTable:
    """Propagator table of a linear system.

    Refuses curved systems unless ``diagnostic`` is set, in which case the
    table also records one commutation defect per eligible ``w``.
    """
    max_total = sys.order if max_total is None else max_total
    if max_total > sys.order:
        raise UsageError(f"max_total {max_total} exceeds system order {sys.order}")
    if not diagnostic:
        verdict = check_integrable(sys, tol)
        if not verdict:
            raise IntegrabilityError(verdict.witness)
    table = build_propagators(sys, range(sys.n), max_total, diagnostic=diagnostic)
    table.indices = tuple(range(sys.n))
    return table


def propagator_along(conn, axes: Sequence[int], rows: Iterable[Index] | None = None) -> SparseMatrix:
    """P obtained by applying D_{axes[0]} first, then D_{axes[1]}, ... to the identity."""
    rows = list(range(conn.n) if rows is None else rows)
    if len(axes) > conn.order:
        raise UsageError("path longer than the series order")
    P = sparse_identity(conn, rows)
    order = conn.order
    for u in axes:
        P = covariant_step(conn, P, u, rows, order)
        order -= 1
    return P


# ---------------------------------------------------------------------------
# covariant derivative operator


def covariant_apply(sys: LinearSystem, u: int, y: Sequence[PowerSeries]) -> list[PowerSeries]:
    """(D_u y)_r = dy_r/dx_u + sum_s f_{rsu} y_s."""
    if len(y) != sys.n:
        raise UsageError(f"expected {sys.n} components, got {len(y)}")
    if not 0 <= u < sys.k:
        raise UsageError(f"axis {u} out of range")
    for s in y:
        if s.k != sys.k or s.field != sys.field:
            raise UsageError("y does not match the system's variables/field")
    out = []
    for r in range(sys.n):
        acc = y[r].partial(u)
        for s, c in sys.row(r, u).items():
            acc = acc + c * y[s]
        out.append(acc)
    return out


@dataclass(frozen=True)
class IdentityReport:
    """Both sides of the iterated covariant-derivative expansion for one ``w``."""

    w: MultiIndex
    lhs: tuple
    rhs: tuple
    order: int
    equal: bool


def iterated_covariant_check(
    sys: LinearSystem,
    w: Sequence[int],
    y: Sequence[PowerSeries],
    table: PropagatorTable | None = None,
) -> IdentityReport:
    """Compare (D_1^{w_1} o ... o D_k^{w_k}) y with its propagator expansion.

    RHS_r = sum_{m <= w} sum_s P^<m>_{rs} d^{w-m} y_s * prod_u binom(w_u, m_u).
    """
    w = tuple(w)
    if len(w) != sys.k:
        raise UsageError("multi-index has the wrong length")
    d = sum(w)
    y_order = min(s.order for s in y)
    if d > min(sys.order, y_order):
        raise UsageError(f"total {d} exceeds available series order")
    if table is None or table.max_total < d:
        table = propagators(sys, d)
    lhs = list(y)
    for u in reversed(range(sys.k)):
        for _ in range(w[u]):
            lhs = covariant_apply(sys, u, lhs)
    order = min(s.order for s in lhs)
    rhs = []
    for r in range(sys.n):
        acc = PowerSeries.zero(sys.k, order, sys.field)
        for m in multi_indices(sys.k, d):
            if any(mi > wi for mi, wi in zip(m, w)):
                continue
            weight = math.prod(math.comb(wi, mi) for wi, mi in zip(w, m))
            rest = tuple(wi - mi for wi, mi in zip(w, m))
            for s, p in table[m].get(r, {}).items():
                acc = acc + (p * y[s].partial_multi(rest)).scale(weight)
        rhs.append(acc)
    lhs = tuple(s.truncate(order) for s in lhs)
    rhs = tuple(s.truncate(min(order, s.order)) for s in rhs)
    tol = zero_tolerance(sys.field, sys.coefficient_scale() + max(s.max_abs() for s in y))
    equal = all((a - b).is_zero(tol) for a, b in zip(lhs, rhs))
    return IdentityReport(w, lhs, rhs, order, equal)


# ---------------------------------------------------------------------------
# solution assembly


def _prefactor(w: Sequence[int], field: Field) -> Scalar:
    # prod_u (-1)^{w_u} / w_u!
    value = Fraction((-1) ** sum(w), factorial_product(w))
    return value if field.exact else float(value)


def collect_columns(table: PropagatorTable, row: Index, order: int) -> dict:
    """Coefficients of sum_w prod (-x_u)^{w_u}/w_u! * P^<w>_{row,b}, keyed (m, b).

    The value at (m, b) is the coefficient of x^m multiplying column b; the
    linear solver contracts b against C, the nonlinear one keeps b symbolic.
    """
    field = table.field
    coeffs: dict = {}
    for w in multi_indices(table.k, order):
        pre = _prefactor(w, field)
        for b, p in table[w].get(row, {}).items():
            for m, c in p.items():
                if sum(m) + sum(w) > order:
                    continue
                key = (tuple(a + e for a, e in zip(m, w)), b)
                coeffs[key] = coeffs.get(key, 0) + pre * c
    return {key: c for key, c in coeffs.items() if c != 0}


@dataclass(frozen=True)
class LinearSolution:
    """Taylor coefficients of the solution y_r at the origin, through ``order``."""

    system: LinearSystem
    C: tuple
    order: int
    coeffs: tuple  # per unknown: {multi-index: scalar}

    def coefficient(self, r: int, m: Sequence[int]):
        return self.coeffs[r].get(tuple(m), self.system.field.zero())

    def series(self) -> list[PowerSeries]:
        return [PowerSeries(self.system.k, self.order, c, self.system.field) for c in self.coeffs]

    def evaluate(self, x: Sequence) -> list[Scalar]:
        return [s.evaluate(x) for s in self.series()]


def solve_linear(
    sys: LinearSystem,
    C: Sequence,
    order: int | None = None,
    *,
    table: PropagatorTable | None = None,
    tol: float | None = None,
) -> LinearSolution:
    """Series solution with y(0) = C, truncated to total degree ``order``."""
    order = sys.order if order is None else order
    if order > sys.order:
        raise UsageError(f"requested order {order} exceeds system order {sys.order}")
    if len(C) != sys.n:
        raise UsageError(f"expected {sys.n} initial values, got {len(C)}")
    C = tuple(sys.field.coerce(c) for c in C)
    if table is None or table.max_total < order:
        table = propagators(sys, order, tol=tol)
    coeffs = []
    for r in range(sys.n):
        acc: dict = {}
        for (m, b), c in collect_columns(table, r, order).items():
            if C[b] != 0:
                acc[m] = acc.get(m, 0) + c * C[b]
        coeffs.append({m: c for m, c in acc.items() if c != 0})
    coeffs = tuple(coeffs)
    return LinearSolution(sys, C, order, coeffs)


# ---------------------------------------------------------------------------
# convergence-radius heuristic


@dataclass(frozen=True)
class RadiusEstimate:
    """Heuristic radius rho with n*M*rho^u <= 1 for every u = 1..k.

    Not a proof of convergence: M is a coefficient-sum bound of the
    truncated P^<a>, a in {0,1}^k, on the polydisc of radius ``assumed_rho``.
    """

    rho: float
    M: float
    binding_axis: int
    assumed_rho: float
    notes: str = ""


def coefficient_sum_bound(s: PowerSeries, rho: float) -> float:
    return sum(abs(float(c)) * rho ** sum(m) for m, c in s.items())


def radius_estimate(sys: LinearSystem, assumed_rho: float) -> RadiusEstimate:
    if not assumed_rho > 0:
        raise UsageError("assumed_rho must be positive")
    if sys.order < sys.k:
        raise UsageError("system order must be at least k to form P^<1,...,1>")
    n, k = sys.n, sys.k
    M = 0.0
    for a in multi_indices(k, k):
        if any(e > 1 for e in a):
            continue
        axes = [u for u in reversed(range(k)) if a[u]]
        P = propagator_along(sys, axes)
        for row in P.values():
            for s in row.values():
                M = max(M, coefficient_sum_bound(s, assumed_rho))
    best, axis = assumed_rho, 0
    for u in range(1, k + 1):
        cap = (1.0 / (n * M)) ** (1.0 / u)
        if cap < best:
            best, axis = cap, u
    notes = "bounded by assumed_rho" if axis == 0 else f"binding constraint n*M*rho^{axis} <= 1"
    return RadiusEstimate(best, M, axis, float(assumed_rho), notes)
