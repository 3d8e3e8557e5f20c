"""Run check/verify over every bundled spec and print a one-line summary each."""

import argparse
import io
from contextlib import redirect_stdout
from dataclasses import dataclass
import json

from pdeseries import cli
from pdeseries.specfile import BUNDLED


@dataclass
class Config:
    order: int = 6
    samples: int = 100
    seed: int = 0


def verify(name: str, cfg: Config) -> tuple[int, dict]:
    buf = io.StringIO()
    argv = ["verify", f"bundled:{name}", "--order", str(cfg.order), "--samples", str(cfg.samples),
            "--seed", str(cfg.seed), "--output", "json"]
    with redirect_stdout(buf):
        code = cli.main(argv)
    return code, json.loads(buf.getvalue())


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--order", type=int, default=Config.order)
    ap.add_argument("--samples", type=int, default=Config.samples)
    ap.add_argument("--seed", type=int, default=Config.seed)
    cfg = Config(**vars(ap.parse_args()))
    for name in BUNDLED:
        code, report = verify(name, cfg)
        verdict = report["integrability"]["verdict"]
        checks = " ".join(f"{c['name']}={'ok' if c['passed'] else 'FAIL'}" for c in report["checks"])
        print(f"{name:20s} exit={code} {verdict:20s} {checks}")


if __name__ == "__main__":
    main()
