"""Compare the heuristic radius with where the truncated series stops matching RK4.

For each coefficient scale c the system dy/dx1 + c*x2*y = 0, dy/dx2 + c*x1*y = 0
(solution exp(-c x1 x2)) is solved to a fixed order; the series value is
compared with path integration along the diagonal x1 = x2 = t.
"""

import argparse
from dataclasses import dataclass

from pdeseries.linear import LinearSystem, radius_estimate, solve_linear
from pdeseries.oracle import path_integrate
from pdeseries.series import FLOAT, parse_polynomial


@dataclass
class Config:
    order: int = 12
    assumed_rho: float = 1.0
    scales: tuple = (0.25, 1.0, 4.0, 16.0)
    tol: float = 1e-6


def system(c: float, order: int) -> LinearSystem:
    f = [parse_polynomial("x2", 2, order, FLOAT).scale(c), parse_polynomial("x1", 2, order, FLOAT).scale(c)]
    return LinearSystem([[f]])


def agreement_limit(sys_, order: int, tol: float) -> float:
    sol = solve_linear(sys_, [1.0], order)
    t, last_ok = 0.02, 0.0
    while t < 4.0:
        series_value = sol.evaluate((t, t))[0]
        path_value = path_integrate(sys_, [1.0], (t, t), steps=400).values[0]
        if abs(series_value - path_value) > tol:
            break
        last_ok = t
        t *= 1.25
    return last_ok


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--order", type=int, default=Config.order)
    ap.add_argument("--assumed-rho", type=float, default=Config.assumed_rho)
    args = ap.parse_args()
    cfg = Config(order=args.order, assumed_rho=args.assumed_rho)
    print(f"{'scale':>6} {'M':>10} {'rho':>8} {'series ok to':>13}")
    for c in cfg.scales:
        sys_ = system(c, cfg.order)
        est = radius_estimate(sys_, cfg.assumed_rho)
        limit = agreement_limit(sys_, cfg.order, cfg.tol)
        print(f"{c:6.2f} {est.M:10.3f} {est.rho:8.4f} {limit:13.4f}")


if __name__ == "__main__":
    main()
