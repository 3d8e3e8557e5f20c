"""Command-line front end.

    pdeseries check|solve|eval|verify SPEC.json [options]

SPEC may also be ``bundled:NAME`` for one of the shipped example systems.
Exit codes: 0 success / integrable, 1 usage or parse error, 2 integrability
violation, 3 a verification check failed on an integrable system.
"""

from __future__ import annotations

import argparse
import json
import random
import sys
import time
from fractions import Fraction

from .linear import (
    IntegrabilityError,
    check_integrable,
    iterated_covariant_check,
    propagators,
    solve_linear,
)
from .nonlinear import (
    WindowEscapeError,
    check_identities,
    is_integrable_nonlinear,
    lifted_propagators,
    solve_nonlinear,
)
from .oracle import cross_validate, residual_linear, residual_nonlinear, taylor_oracle
from .series import PowerSeries, UsageError, degree_key, get_field, multi_indices
from .specfile import SpecError, bundled_spec_path, load_spec

REPORT_SCHEMA_VERSION = "1"

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_VIOLATION = 2
EXIT_CHECK_FAILED = 3


def scalar_out(c):
    """Rationals as exact strings, floats as JSON numbers."""
    if isinstance(c, Fraction):
        return str(c)
    return float(c)


def index_out(i):
    return i + 1 if isinstance(i, int) else list(i)


# ---------------------------------------------------------------------------
# argument handling


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage; 2 is reserved for integrability violations
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="pdeseries", description=__doc__.split("\n\n")[0])
    p.add_argument("command", choices=("check", "solve", "eval", "verify"))
    p.add_argument("spec", help="path to a JSON spec file, or bundled:NAME")
    p.add_argument("--order", type=int, help="truncation order (default: the spec's)")
    p.add_argument("--field", choices=("rational", "float"))
    p.add_argument("--tol", type=float, help="float-mode zero tolerance")
    p.add_argument("--C", dest="C", help="initial values c1,c2,...")
    p.add_argument("--x", dest="x", help="evaluation point x1,x2,...")
    p.add_argument("--window", help="lo..hi per component, comma separated, or 'auto'")
    p.add_argument("--samples", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--steps", type=int, default=1000)
    p.add_argument("--output", choices=("human", "json"), default="human")
    p.add_argument("--threads", type=int, default=1, help="accepted for compatibility; work is single-threaded")
    return p


def _parse_list(text: str, field, expected: int, what: str) -> tuple:
    parts = [t.strip() for t in text.split(",")]
    if len(parts) != expected:
        raise UsageError(f"{what} needs {expected} values, got {len(parts)}")
    return tuple(field.coerce(t) for t in parts)


def _load(args):
    path = args.spec
    if path.startswith("bundled:"):
        path = bundled_spec_path(path.split(":", 1)[1])
    return load_spec(path, order=args.order, field=args.field, window=args.window)


def _initial_values(args, spec):
    field = get_field(spec.field)
    if args.C is not None:
        return _parse_list(args.C, field, spec.n, "--C")
    if spec.C is None:
        raise UsageError("initial values required: pass --C or add C to the spec")
    return spec.C


# ---------------------------------------------------------------------------
# report pieces


def _witness_out(w) -> dict:
    return {
        "t": index_out(w.t),
        "s": index_out(w.s),
        "u": w.u + 1,
        "v": w.v + 1,
        "multi_index": list(w.multi_index),
        "value": scalar_out(w.value),
    }


def _integrability(spec, args):
    if spec.kind == "linear":
        verdict = check_integrable(spec.system, args.tol)
    else:
        verdict = is_integrable_nonlinear(spec.system, spec.window, args.tol)
    block = {"verdict": "integrable-to-order" if verdict else "violated", "order": verdict.order}
    if verdict.witness is not None:
        block["witness"] = _witness_out(verdict.witness)
    return verdict, block


def _coefficients_out(spec, sol) -> list:
    rows = []
    if spec.kind == "linear":
        for r, table in enumerate(sol.coeffs):
            for m, c in table.items():
                rows.append((degree_key(m), r, {"unknown": r + 1, "multi_index": list(m), "value": scalar_out(c)}))
    else:
        values = [s.terms for s in sol.series()]
        for r, table in enumerate(sol.coeffs):
            polys: dict = {}
            for (m, beta), c in table.items():
                polys.setdefault(m, []).append((beta, c))
            for m in set(polys) | set(values[r]):
                entry = {
                    "unknown": r + 1,
                    "multi_index": list(m),
                    "value": scalar_out(values[r].get(m, get_field(spec.field).zero())),
                    "c_polynomial": [
                        {"exponent": list(beta), "coefficient": scalar_out(c)} for beta, c in sorted(polys.get(m, []))
                    ],
                }
                rows.append((degree_key(m), r, entry))
    rows.sort(key=lambda t: (t[0], t[1]))
    return [entry for _, _, entry in rows]


def _solve(spec, C, order, args):
    if spec.kind == "linear":
        return solve_linear(spec.system, C, order, tol=args.tol)
    return solve_nonlinear(spec.system, spec.window, C, order, tol=args.tol)


def _header(command: str, spec, args, order) -> dict:
    return {
        "schema_version": REPORT_SCHEMA_VERSION,
        "command": command,
        "spec": {
            "name": spec.name,
            "kind": spec.kind,
            "n": spec.n,
            "k": spec.k,
            "order": spec.order,
            "field": spec.field,
        },
        "options": {
            "order": order,
            "tol": None if args.tol is None else repr(args.tol),
            "samples": args.samples,
            "seed": args.seed,
            "steps": args.steps,
            "window": _window_out(spec),
            "threads": args.threads,
        },
        "warnings": [f"equations[{i}] truncated to order {spec.order}" for i in spec.truncated],
    }


def _window_out(spec):
    if spec.kind != "nonlinear":
        return None
    if spec.window == "auto" or spec.window is None:
        return "auto"
    return {"lo": list(spec.window.lo), "hi": list(spec.window.hi), "closure_depth": spec.window.closure_depth}


# ---------------------------------------------------------------------------
# commands


def cmd_check(spec, args) -> tuple[dict, int]:
    report = _header("check", spec, args, spec.order)
    verdict, block = _integrability(spec, args)
    report["integrability"] = block
    return report, EXIT_OK if verdict else EXIT_VIOLATION


def cmd_solve(spec, args) -> tuple[dict, int]:
    order = args.order or spec.order
    report = _header("solve", spec, args, order)
    verdict, block = _integrability(spec, args)
    report["integrability"] = block
    if not verdict:
        return report, EXIT_VIOLATION
    C = _initial_values(args, spec)
    sol = _solve(spec, C, order, args)
    report["solution"] = {
        "C": [scalar_out(c) for c in sol.C],
        "order": order,
        "coefficients": _coefficients_out(spec, sol),
    }
    report["residual"] = _residual_out(spec, sol, args)
    return report, EXIT_OK


def _residual_out(spec, sol, args) -> dict:
    if spec.kind == "linear":
        res = residual_linear(spec.system, sol, args.tol)
    else:
        res = residual_nonlinear(spec.system, sol, args.tol)
    out = {"passed": res.passed, "checked_degree": res.checked_degree}
    if not res.passed:
        r, u, m, value = res.failure
        out["failure"] = {"equation": {"r": r + 1, "u": u + 1}, "multi_index": list(m), "value": scalar_out(value)}
    return out


def cmd_eval(spec, args) -> tuple[dict, int]:
    order = args.order or spec.order
    report = _header("eval", spec, args, order)
    verdict, block = _integrability(spec, args)
    report["integrability"] = block
    if not verdict:
        return report, EXIT_VIOLATION
    if args.x is None:
        raise UsageError("eval needs --x")
    field = get_field(spec.field)
    C = _initial_values(args, spec)
    x = _parse_list(args.x, field, spec.k, "--x")
    sol = _solve(spec, C, order, args)
    values = sol.evaluate(x)
    report["evaluation"] = {
        "C": [scalar_out(c) for c in sol.C],
        "x": [scalar_out(v) for v in x],
        "values": [scalar_out(v) for v in values],
    }
    if not field.exact:
        cv = cross_validate(spec.system, C, x, order, args.steps, window=spec.window)
        report["cross_validation"] = {
            "path_values": list(cv.path_values),
            "discrepancy": list(cv.discrepancy),
            "path_spread": cv.path_spread,
            "steps": args.steps,
        }
    return report, EXIT_OK


def _random_test_vector(spec, seed: int) -> list[PowerSeries]:
    rng = random.Random(seed)
    field = get_field(spec.field)
    out = []
    for _ in range(spec.n):
        terms = {m: Fraction(rng.randint(-3, 3), rng.randint(1, 3)) for m in multi_indices(spec.k, 3)}
        if not field.exact:
            terms = {m: float(c) for m, c in terms.items()}
        out.append(PowerSeries(spec.k, spec.order, terms, field))
    return out


def cmd_verify(spec, args) -> tuple[dict, int]:
    order = args.order or spec.order
    report = _header("verify", spec, args, order)
    verdict, block = _integrability(spec, args)
    report["integrability"] = block
    checks = []
    C = _initial_values(args, spec)
    sysm = spec.system

    if spec.kind == "linear":
        table = propagators(sysm, order, diagnostic=True)
        sol = solve_linear(sysm, C, order, table=table)
    else:
        table = lifted_propagators(sysm, spec.window, order, diagnostic=True)
        sol = solve_nonlinear(sysm, spec.window, C, order, table=table)
    entry = {"name": "residual", **_residual_out(spec, sol, args)}
    checks.append(entry)

    oracle = taylor_oracle(sysm, C, order)
    entry = {"name": "taylor-oracle", "passed": False, "order": order}
    if not oracle.consistent:
        inc = oracle.inconsistency
        entry["inconsistency"] = {
            "unknown": inc.r + 1,
            "multi_index": list(inc.multi_index),
            "axes": [inc.axis_a + 1, inc.axis_b + 1],
        }
    else:
        series_terms = [dict(s.terms) for s in sol.series()]
        if get_field(spec.field).exact:
            entry["passed"] = list(oracle.values) == series_terms
            if spec.kind == "nonlinear":
                entry["passed"] = entry["passed"] and all(oracle.flat(r) == sol.coeffs[r] for r in range(spec.n))
        else:
            entry["passed"] = _close(oracle.values, series_terms)
    checks.append(entry)

    if spec.kind == "linear":
        if verdict:
            y = _random_test_vector(spec, args.seed)
            top = min(2, order)
            ws = [w for w in multi_indices(spec.k, top)]
            results = [iterated_covariant_check(sysm, w, y) for w in ws]
            checks.append({
                "name": "iterated-covariant",
                "passed": all(r.equal for r in results),
                "multi_indices": [list(w) for w in ws],
            })
        else:
            defects = table.defects
            checks.append({
                "name": "commutation-defect",
                "passed": all(d.holds for d in defects),
                "count": len(defects),
            })
    else:
        ident = check_identities(sysm, spec.window, args.samples, args.seed, args.tol)
        checks.append({
            "name": "h-R-identities",
            "passed": ident.ok,
            "samples": ident.samples,
            "checked": ident.checked,
            "nontrivial": ident.nontrivial,
            "violations": len(ident.violations),
        })

    report["checks"] = checks
    report["passed"] = bool(verdict) and all(c["passed"] for c in checks)
    if not verdict:
        return report, EXIT_VIOLATION
    return report, EXIT_OK if report["passed"] else EXIT_CHECK_FAILED


def _close(oracle_values, series_terms, tol=1e-9) -> bool:
    for a, b in zip(oracle_values, series_terms):
        for m in set(a) | set(b):
            if abs(float(a.get(m, 0)) - float(b.get(m, 0))) > tol * (1 + abs(float(a.get(m, 0)))):
                return False
    return True


COMMANDS = {"check": cmd_check, "solve": cmd_solve, "eval": cmd_eval, "verify": cmd_verify}


# ---------------------------------------------------------------------------
# rendering


def render_human(report: dict, elapsed: float) -> str:
    lines = []
    spec = report["spec"]
    lines.append(f"{report['command']} {spec['name']} ({spec['kind']}, n={spec['n']}, k={spec['k']}, "
                 f"order={report['options']['order']}, field={spec['field']})")
    for w in report.get("warnings", []):
        lines.append(f"warning: {w}")
    integ = report.get("integrability")
    if integ:
        if integ["verdict"] == "integrable-to-order":
            lines.append(f"integrable to order {integ['order']}")
        else:
            w = integ["witness"]
            lines.append(
                f"NOT integrable: R[{w['t']},{w['s']},{w['u']},{w['v']}] has {w['value']} at x^{tuple(w['multi_index'])}"
            )
    sol = report.get("solution")
    if sol:
        lines.append(f"solution with C = {sol['C']}:")
        for e in sol["coefficients"]:
            lines.append(f"  y{e['unknown']} x^{tuple(e['multi_index'])}: {e['value']}")
    ev = report.get("evaluation")
    if ev:
        for i, v in enumerate(ev["values"]):
            lines.append(f"y{i + 1}({', '.join(map(str, ev['x']))}) = {v}")
    cv = report.get("cross_validation")
    if cv:
        lines.append(f"RK4 ({cv['steps']} steps/segment): {cv['path_values']}")
        lines.append(f"series vs RK4 discrepancy: {max(cv['discrepancy']):.3e}; path spread {cv['path_spread']:.3e}")
    for c in report.get("checks", []):
        status = "PASS" if c["passed"] else "FAIL"
        extra = ""
        if "failure" in c:
            eq = c["failure"]["equation"]
            extra = f" (equation r={eq['r']}, u={eq['u']} at x^{tuple(c['failure']['multi_index'])})"
        if "inconsistency" in c:
            extra = f" (inconsistent mixed partial {tuple(c['inconsistency']['multi_index'])})"
        lines.append(f"[{status}] {c['name']}{extra}")
    lines.append(f"time: {elapsed:.3f}s")
    return "\n".join(lines) + "\n"


def render_json(report: dict) -> str:
    return json.dumps(report, indent=2) + "\n"


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    start = time.perf_counter()
    try:
        spec = _load(args)
        report, code = COMMANDS[args.command](spec, args)
    except WindowEscapeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SpecError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except IntegrabilityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VIOLATION
    if args.output == "json":
        sys.stdout.write(render_json(report))
    else:
        sys.stdout.write(render_human(report, time.perf_counter() - start))
    return code


if __name__ == "__main__":
    sys.exit(main())
