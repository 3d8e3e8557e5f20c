"""Deterministic random systems for property checks and experiments."""

from __future__ import annotations

import random
from fractions import Fraction

from .linear import LinearSystem
from .nonlinear import NonlinearSystem
from .series import RATIONAL, Field, PowerSeries, multi_indices


def random_fraction(rng: random.Random, span: int = 3, den: int = 3) -> Fraction:
    return Fraction(rng.randint(-span, span), rng.randint(1, den))


def random_series(rng: random.Random, k: int, order: int, degree: int, density: float = 0.6,
                  field: Field = RATIONAL) -> PowerSeries:
    terms = {}
    for m in multi_indices(k, min(degree, order)):
        if rng.random() < density:
            terms[m] = random_fraction(rng)
    if not field.exact:
        terms = {m: float(c) for m, c in terms.items()}
    return PowerSeries(k, order, terms, field)


def random_linear_system(rng: random.Random, n: int, k: int, order: int, degree: int = 1,
                         field: Field = RATIONAL) -> LinearSystem:
    """Generic coefficients; almost surely not integrable when k >= 2."""
    f = [[[random_series(rng, k, order, degree, field=field) for _ in range(k)] for _ in range(n)] for _ in range(n)]
    return LinearSystem(f)


def _mat_mul(A, B):
    n = len(A)
    return [[sum((A[i][p] * B[p][j] for p in range(1, n)), A[i][0] * B[0][j]) for j in range(n)] for i in range(n)]


def _inverse_2x2(G):
    det = G[0][0] * G[1][1] - G[0][1] * G[1][0]
    inv = det.reciprocal()
    return [[G[1][1] * inv, -G[0][1] * inv], [-G[1][0] * inv, G[0][0] * inv]]


def gauge_integrable_system(rng: random.Random, k: int, order: int, degree: int = 2,
                            field: Field = RATIONAL) -> tuple[LinearSystem, list]:
    """A flat 2x2 system obtained by a polynomial change of unknowns z = G(x) y of dy = 0.

    With G(0) = I, z solves dz/dx_u - (dG/dx_u) G^{-1} z = 0, so
    F_u = -(dG/dx_u) G^{-1}.  Returns the system and G.
    """
    n = 2
    G = []
    for i in range(n):
        row = []
        for j in range(n):
            s = random_series(rng, k, order, degree, field=field)
            s = s - PowerSeries.constant(s.coefficient((0,) * k), k, order, field)
            if i == j:
                s = s + PowerSeries.constant(1, k, order, field)
            row.append(s)
        G.append(row)
    Ginv = _inverse_2x2(G)
    mats = []
    for u in range(k):
        dG = [[G[i][j].partial(u).with_order(order) for j in range(n)] for i in range(n)]
        F = _mat_mul(dG, Ginv)
        mats.append([[-F[i][j] for j in range(n)] for i in range(n)])
    f = [[[mats[u][r][s] for u in range(k)] for s in range(n)] for r in range(n)]
    return LinearSystem(f), G


def random_nonlinear_system(rng: random.Random, n: int, k: int, order: int, degree: int = 2,
                            terms: int = 3, field: Field = RATIONAL) -> NonlinearSystem:
    """Polynomial right-hand sides: a few monomials y^beta (|beta| <= degree) per equation."""
    betas = [b for b in multi_indices(n, degree)]
    f = {}
    for r in range(n):
        for u in range(k):
            for beta in rng.sample(betas, min(terms, len(betas))):
                s = random_series(rng, k, order, degree, field=field)
                if not s.is_zero():
                    f[(r, beta, u)] = s
    return NonlinearSystem(n, k, f, order, field)
