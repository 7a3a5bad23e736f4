"""Invariant reports.

The JSON form is the stable machine interface:

    {"locations": [{"name": ..., "constraints": [{"coeffs": [...], "rhs": ...}],
                    "bounds": {var: {"lo": ..., "hi": ...}}}],
     "loops": [{"name": ..., "N": ..., "exact": ...}]}

All rationals are strings ("3/2"), unbounded ends are null, N is null
when no finite iteration bound exists.  Constraint rows are sorted
canonically and timings are kept out, so equal inputs render to
byte-identical JSON.  The text form adds timings and reads better.
"""

import json

from gmpy2 import mpq

from ..numerics import is_finite
from ..polyhedra import Polyhedron


def report_data(program, result, location=None):
    locations = []
    for name in program.locations:
        if location is not None and name != location:
            continue
        inv = result.invariants[name]
        rows = sorted(inv.minimized_constraints())
        constraints = [
            {"coeffs": [str(c) for c in g], "rhs": str(r)} for g, r in rows
        ]
        bounds = {}
        box = inv.bounding_box()
        if box is not None:
            for var, iv in zip(program.variables, box):
                bounds[var] = {
                    "lo": str(iv.lo) if is_finite(iv.lo) else None,
                    "hi": str(iv.hi) if is_finite(iv.hi) else None,
                }
        locations.append(
            {"name": name, "constraints": constraints, "bounds": bounds}
        )
    loops = []
    for t in program.transitions:
        if not t.accelerate:
            continue
        bound = result.bounds.get(t.name)
        n = None
        if bound is not None and is_finite(bound.count):
            n = int(bound.count)
        loops.append(
            {
                "name": t.name,
                "N": n,
                "exact": bool(result.exact.get(t.name, False)),
            }
        )
    return {"locations": locations, "loops": loops}


def render_json(data):
    return json.dumps(data, indent=2) + "\n"


def _row_str(coeffs, rhs, names):
    terms = []
    for c, n in zip(coeffs, names):
        if c == 0:
            continue
        if c == 1:
            t = n
        elif c == -1:
            t = f"-{n}"
        else:
            t = f"{c}*{n}"
        terms.append(t)
    lhs = "0"
    if terms:
        lhs = terms[0]
        for t in terms[1:]:
            lhs += f" - {t[1:]}" if t.startswith("-") else f" + {t}"
    return f"{lhs} <= {rhs}"


def render_text(program, result, location=None):
    names = program.variables
    out = []
    for name in program.locations:
        if location is not None and name != location:
            continue
        inv = result.invariants[name]
        out.append(f"location {name}")
        if inv.is_empty():
            out.append("  (empty)")
            continue
        for g, r in sorted(inv.minimized_constraints()):
            out.append(f"  {_row_str(g, r, names)}")
        box = inv.bounding_box()
        if box is not None:
            spans = []
            for var, iv in zip(names, box):
                lo = str(iv.lo) if is_finite(iv.lo) else "-inf"
                hi = str(iv.hi) if is_finite(iv.hi) else "inf"
                spans.append(f"{var} in [{lo}, {hi}]")
            out.append("  box: " + ", ".join(spans))
    shown = False
    for t in program.transitions:
        if not t.accelerate:
            continue
        if not shown:
            out.append("loops")
            shown = True
        bound = result.bounds.get(t.name)
        if t.name in result.demoted:
            out.append(f"  {t.name}: demoted to plain iteration")
            continue
        n = "inf"
        if bound is not None and is_finite(bound.count):
            n = str(int(bound.count))
        tag = "exact" if result.exact.get(t.name, False) else "sound"
        out.append(f"  {t.name}: N = {n} ({tag})")
    if result.widened:
        out.append("widened at " + ", ".join(result.widened))
    out.append(f"sweeps {result.sweeps}, {result.seconds:.3f} s")
    return "\n".join(out) + "\n"


def polyhedra_from_report(data, program):
    """Per-location polyhedra from a JSON report; rejects mismatches."""
    dim = len(program.variables)
    named = {}
    for loc in data.get("locations", ()):
        rows, rhs = [], []
        for c in loc["constraints"]:
            if len(c["coeffs"]) != dim:
                raise ValueError(
                    f"report row arity {len(c['coeffs'])} does not match "
                    f"the program's {dim} variables"
                )
            rows.append(tuple(mpq(s) for s in c["coeffs"]))
            rhs.append(mpq(c["rhs"]))
        named[loc["name"]] = Polyhedron.from_constraints(rows, rhs, dim=dim)
    missing = [n for n in program.locations if n not in named]
    if missing:
        raise ValueError(f"report lacks locations: {', '.join(missing)}")
    return named
