"""JSON system-specification files.

Example (nonlinear)::

    {
      "schema_version": 1,
      "name": "riccati",
      "kind": "nonlinear",
      "n": 1, "k": 1, "order": 12, "field": "rational",
      "window": "auto",
      "equations": [{"r": 1, "exponent": [2], "u": 1, "f": "1"}],
      "C": ["1/2"]
    }

Linear equations use ``{"r": 1, "s": 1, "u": 1, "f": "x2"}``.  Indices in the
file are 1-based; ``f`` is a polynomial in the grammar of
:func:`pdeseries.series.parse_polynomial`.  ``window`` is ``"auto"`` or
``{"lo": [...], "hi": [...], "closure_depth": d}``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .linear import LinearSystem
from .nonlinear import LaurentWindow, NonlinearSystem
from .series import PolynomialSyntaxError, PowerSeries, UsageError, get_field, parse_polynomial

SPEC_SCHEMA_VERSION = 1
BUNDLED = (
    "zero",
    "exponential",
    "exp_x1x2",
    "noncommuting",
    "riccati",
    "twin_riccati",
    "mixed_nonintegrable",
)


class SpecError(UsageError):
    pass


@dataclass
class SystemSpec:
    name: str
    kind: str
    n: int
    k: int
    order: int
    field: str
    window: object  # None, "auto" or LaurentWindow
    C: tuple | None
    system: object
    truncated: tuple = ()  # equations whose polynomial exceeded the order


def bundled_spec_path(name: str) -> Path:
    if name not in BUNDLED:
        raise SpecError(f"no bundled spec named {name!r}; choose from {', '.join(BUNDLED)}")
    return Path(str(resources.files("pdeseries") / "data" / f"{name}.json"))


def _require(doc: dict, key: str, kind=None):
    if key not in doc:
        raise SpecError(f"missing field {key!r}")
    value = doc[key]
    if isinstance(value, bool) or (kind is not None and not isinstance(value, kind)):
        raise SpecError(f"field {key!r} has the wrong type")
    return value


def parse_window(value, n: int, depth: int):
    if value is None or value == "auto":
        return "auto"
    if isinstance(value, str):
        parts = value.split(",")
        if len(parts) != n:
            raise SpecError(f"window needs {n} 'lo..hi' components")
        lo, hi = [], []
        for p in parts:
            try:
                a, b = p.split("..")
                lo.append(int(a))
                hi.append(int(b))
            except ValueError as exc:
                raise SpecError(f"bad window component {p!r}; expected lo..hi") from exc
        return LaurentWindow(tuple(lo), tuple(hi), depth)
    if isinstance(value, dict):
        lo = tuple(int(v) for v in value.get("lo", ()))
        hi = tuple(int(v) for v in value.get("hi", ()))
        if len(lo) != n or len(hi) != n:
            raise SpecError(f"window lo/hi need {n} entries")
        return LaurentWindow(lo, hi, int(value.get("closure_depth", depth)))
    raise SpecError("window must be 'auto' or an object with lo/hi")


def load_spec(path, *, order: int | None = None, field: str | None = None, window=None) -> SystemSpec:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise SpecError(f"cannot read {path}: {exc}") from exc
    return parse_spec(text, order=order, field=field, window=window)


def parse_spec(text: str, *, order: int | None = None, field: str | None = None, window=None) -> SystemSpec:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecError(f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise SpecError("spec must be a JSON object")
    version = doc.get("schema_version", SPEC_SCHEMA_VERSION)
    if version != SPEC_SCHEMA_VERSION:
        raise SpecError(f"unsupported schema_version {version!r}")
    kind = _require(doc, "kind", str)
    if kind not in ("linear", "nonlinear"):
        raise SpecError("kind must be 'linear' or 'nonlinear'")
    n = _require(doc, "n", int)
    k = _require(doc, "k", int)
    if n < 1 or k < 1:
        raise SpecError("n and k must be >= 1")
    file_order = _require(doc, "order", int)
    order = file_order if order is None else order
    if order < 1:
        raise SpecError("order must be >= 1")
    fld = get_field(field or doc.get("field", "rational"))
    equations = _require(doc, "equations", list)

    seen = set()
    coeffs = {}
    truncated = []
    for i, eq in enumerate(equations):
        where = f"equations[{i}]"
        if not isinstance(eq, dict):
            raise SpecError(f"{where} must be an object")
        try:
            r = int(eq["r"])
            u = int(eq["u"])
            poly = eq["f"]
            if kind == "linear":
                col = int(eq["s"])
            else:
                col = tuple(int(e) for e in eq["exponent"])
        except (KeyError, TypeError, ValueError) as exc:
            raise SpecError(f"{where}: malformed entry ({exc})") from exc
        if not 1 <= r <= n or not 1 <= u <= k:
            raise SpecError(f"{where}: index out of range")
        if kind == "linear" and not 1 <= col <= n:
            raise SpecError(f"{where}: s out of range")
        if kind == "nonlinear" and len(col) != n:
            raise SpecError(f"{where}: exponent needs {n} entries")
        key = (r - 1, col, u - 1)
        if key in seen:
            raise SpecError(f"{where}: duplicate coefficient entry")
        seen.add(key)
        if not isinstance(poly, str):
            raise SpecError(f"{where}: f must be a string")
        try:
            s = parse_polynomial(poly, k, order, fld)
        except PolynomialSyntaxError as exc:
            raise SpecError(f"{where}.f: {exc}") from exc
        if s.truncated:
            truncated.append(i)
        coeffs[key] = s

    if kind == "linear":
        zero = PowerSeries.zero(k, order, fld)
        f = [[[coeffs.get((r, s + 1, u), zero) for u in range(k)] for s in range(n)] for r in range(n)]
        system = LinearSystem(f)
        win = None
    else:
        system = NonlinearSystem(n, k, coeffs, order, fld)
        win = parse_window(window if window is not None else doc.get("window", "auto"), n, order)

    C = doc.get("C")
    if C is not None:
        if not isinstance(C, list) or len(C) != n:
            raise SpecError(f"C must be a list of {n} values")
        C = tuple(fld.coerce(str(c)) for c in C)
    return SystemSpec(str(doc.get("name", "unnamed")), kind, n, k, order, fld.name, win, C, system, tuple(truncated))
