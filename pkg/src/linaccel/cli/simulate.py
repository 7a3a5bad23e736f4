"""Exact concrete execution used as a soundness oracle.

States sampled from the initial polyhedron are run through the
structured program in rational arithmetic, recording the state at every
visit of a loop head (before the guard test), after every loop exit,
and at entry and end.  Each record must lie inside the invariant
computed for that location; any miss is a soundness violation worth a
hard stop.  No tolerances anywhere.
"""

import itertools
import random
from dataclasses import dataclass

from gmpy2 import mpq

from ..analyzer import Assign, If, While


@dataclass(frozen=True)
class Violation:
    location: str
    sample: int
    step: int
    state: tuple

    def __str__(self):
        vals = ", ".join(str(v) for v in self.state)
        return (
            f"sample {self.sample}, record {self.step}: state ({vals}) "
            f"outside the invariant at {self.location}"
        )


class _OutOfFuel(Exception):
    pass


def loop_names(body):
    """Head names in the same encounter order normalization uses."""
    names = {}
    counter = itertools.count(1)

    def visit(stmts):
        for s in stmts:
            if isinstance(s, While):
                names[id(s)] = f"loop{next(counter)}"
                visit(s.body)
            elif isinstance(s, If):
                visit(s.then_body)
                visit(s.else_body)

    visit(body)
    return names


def _holds(rows, state):
    return all(
        sum(c * v for c, v in zip(g, state) if c) <= r for g, r in rows
    )


def _exec(stmts, state, names, trace, fuel):
    for s in stmts:
        if isinstance(s, Assign):
            state[s.target] = (
                sum(c * v for c, v in zip(s.coeffs, state) if c) + mpq(s.const)
            )
        elif isinstance(s, If):
            branch = s.then_body if _holds(s.cond, state) else s.else_body
            _exec(branch, state, names, trace, fuel)
        else:
            name = names[id(s)]
            while True:
                trace.append((name, tuple(state)))
                if not _holds(s.guard, state):
                    break
                if fuel[0] <= 0:
                    raise _OutOfFuel
                fuel[0] -= 1
                _exec(s.body, state, names, trace, fuel)
            trace.append((name + "_exit", tuple(state)))


def run_trace(program, start, steps):
    """(location, state) records along one exact run.

    steps budgets the total number of loop iterations across the whole
    run; exhausting it truncates the trace, which only ever removes
    records to check.
    """
    names = loop_names(program.structured)
    trace = [("entry", tuple(start))]
    state = [mpq(v) for v in start]
    try:
        _exec(program.structured, state, names, trace, [steps])
    except _OutOfFuel:
        return trace
    if "end" in program.locations:
        trace.append(("end", tuple(state)))
    return trace


def sample_states(init, samples, seed):
    """Vertices of the initial set plus seeded rational mixtures."""
    verts = [tuple(v) for v in init.vertices]
    rays = [tuple(r) for r in init.rays]
    for line in init.lines:
        rays.append(tuple(line))
        rays.append(tuple(-c for c in line))
    out = list(verts)
    if not verts:
        return out
    rng = random.Random(seed)
    for _ in range(samples):
        weights = [mpq(rng.randrange(1, 101)) for _ in verts]
        total = sum(weights)
        point = [
            sum(w * v[i] for w, v in zip(weights, verts)) / total
            for i in range(len(verts[0]))
        ]
        if rays:
            ray = rng.choice(rays)
            stretch = mpq(rng.randrange(0, 4))
            point = [p + stretch * c for p, c in zip(point, ray)]
        out.append(tuple(point))
    return out


def simulate(program, invariants, *, steps, samples, seed):
    """Run sampled states and collect invariant violations."""
    if program.variables != program.source_variables:
        raise ValueError("cannot simulate a flattened program")
    violations = []
    for s_idx, start in enumerate(sample_states(program.initial, samples, seed)):
        for r_idx, (loc, state) in enumerate(run_trace(program, start, steps)):
            inv = invariants.get(loc)
            if inv is None or not inv.contains_point(state):
                violations.append(Violation(loc, s_idx, r_idx, state))
    return violations
