"""Spread of RK4 endpoints over axis orderings as the step count grows.

For a flat system the spread is pure discretisation error and falls like
steps^-4; for a curved one it levels off at the true path dependence.
"""

import argparse
from dataclasses import dataclass

from pdeseries.linear import LinearSystem
from pdeseries.oracle import cross_validate
from pdeseries.series import FLOAT, parse_polynomial


@dataclass
class Config:
    x: tuple = (0.6, 0.7)
    steps: tuple = (2, 4, 8, 16, 32, 64)


def systems():
    flat = LinearSystem([[[parse_polynomial("x2 + 2*x1", 2, 4, FLOAT), parse_polynomial("x1", 2, 4, FLOAT)]]])
    curved = LinearSystem.constant([[[0.0, 1.0], [0.0, 0.0]], [[0.0, 0.0], [1.0, 0.0]]], 4, FLOAT)
    return {"flat exp(-(x1 x2 + x1^2))": (flat, [1.0]), "non-commuting pair": (curved, [1.0, 1.0])}


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--x", type=float, nargs=2, default=Config.x)
    args = ap.parse_args()
    cfg = Config(x=tuple(args.x))
    for label, (sys_, C) in systems().items():
        print(label)
        prev = None
        for steps in cfg.steps:
            spread = cross_validate(sys_, C, cfg.x, steps=steps).path_spread
            ratio = f"{prev / spread:8.2f}" if prev and spread else "       -"
            print(f"  steps={steps:4d}  spread={spread:.3e}  ratio={ratio}")
            prev = spread


if __name__ == "__main__":
    main()
