"""Whole-program invariants for affine programs with linear loops.

Structured statements (assignments, conditionals, while loops) are
normalized into a control-flow graph whose innermost loops appear as
guarded affine self-loops around a head location; a conditional in a
loop body contributes one self-loop per branch path.  The fixpoint
engine interprets each accelerable self-loop as a meta-transition, the
accelerated image of the states entering the loop, so no iteration
happens there.  Kleene iteration with delayed widening is reserved for
cycles that acceleration cannot absorb: outer loops around nested ones
and loops whose spectrum the decomposition refuses.

A head with several self-loops (branch paths) is stabilized by
applying their accelerations round-robin, widening in state space if
the rotation does not settle.
"""

import itertools
from dataclasses import dataclass
from time import perf_counter

from gmpy2 import mpq

from .accel import AccelerationConfig, accelerate_guarded, homogenize
from .jordan import JordanError, assemble_jordan, real_jordan
from .matdom import GeneratorCapError
from .polyhedra import LinearLoop, Polyhedron


class AnalysisError(Exception):
    """Malformed program, unsupported shape, or resource cap."""


# ------------------------------------------------------------------------
# structured statements
#
# Assertions are conjunctions ((coeffs, rhs), ...) meaning
# coeffs . x <= rhs; an empty tuple is true.
# ------------------------------------------------------------------------


@dataclass(frozen=True)
class Assign:
    """variables[target] := coeffs . x + const."""

    target: int
    coeffs: tuple
    const: object = 0


@dataclass(frozen=True)
class If:
    cond: tuple
    then_body: tuple = ()
    else_body: tuple = ()


@dataclass(frozen=True)
class While:
    """jordan optionally carries (blocks, R, R_inv) for the homogenized
    body matrix, verified during analysis."""

    guard: tuple
    body: tuple = ()
    jordan: object = None


@dataclass(frozen=True)
class Transition:
    source: str
    target: str
    guard: tuple
    update: tuple  # (A rows, b)
    accelerate: bool = False
    jordan: object = None
    name: str = ""


@dataclass(frozen=True)
class Program:
    variables: tuple
    initial: Polyhedron
    entry: str
    locations: tuple
    transitions: tuple
    heads: tuple
    exits: tuple
    # source form kept for concrete simulation
    source_variables: tuple = ()
    assume: tuple = ()
    structured: tuple = ()


@dataclass(frozen=True)
class AnalysisConfig:
    widen_delay: int = 2
    descend: bool = True
    accel: AccelerationConfig = None
    max_sweeps: int = 200


@dataclass
class AnalysisResult:
    invariants: dict
    entries: dict
    bounds: dict
    exact: dict
    widened: tuple
    demoted: tuple
    sweeps: int
    seconds: float


# ------------------------------------------------------------------------
# affine bookkeeping
# ------------------------------------------------------------------------


def _identity_affine(dim):
    rows = tuple(
        tuple(mpq(1) if i == j else mpq(0) for j in range(dim))
        for i in range(dim)
    )
    return rows, (mpq(0),) * dim


def _rows(assertion, dim, what):
    out = []
    for item in assertion:
        g, r = item
        if len(g) != dim:
            raise AnalysisError(f"{what} row has arity {len(g)}, expected {dim}")
        out.append((tuple(mpq(c) for c in g), mpq(r)))
    return tuple(out)


def _compose_assign(aff, stmt, dim):
    A, b = aff
    if len(stmt.coeffs) != dim:
        raise AnalysisError(
            f"assignment has arity {len(stmt.coeffs)}, expected {dim}"
        )
    row = [mpq(0)] * dim
    const = mpq(stmt.const)
    for j, c in enumerate(stmt.coeffs):
        if c == 0:
            continue
        c = mpq(c)
        for i in range(dim):
            row[i] += c * A[j][i]
        const += c * b[j]
    A2 = tuple(tuple(row) if i == stmt.target else A[i] for i in range(dim))
    b2 = tuple(const if i == stmt.target else b[i] for i in range(dim))
    return A2, b2


def _transform_row(row, aff):
    # g . x <= r at the current point becomes (g A) . x0 <= r - g . b
    # over the segment's start state
    g, r = row
    A, b = aff
    dim = len(g)
    out = tuple(sum(g[i] * A[i][j] for i in range(dim)) for j in range(dim))
    return out, r - sum(gi * bi for gi, bi in zip(g, b))


def _negate(row):
    g, r = row
    return tuple(-c for c in g), -r


def _tautology(row):
    g, r = row
    return not any(g) and r >= 0


def _contains_while(stmts):
    for s in stmts:
        if isinstance(s, While):
            return True
        if isinstance(s, If) and (
            _contains_while(s.then_body) or _contains_while(s.else_body)
        ):
            return True
    return False


def _paths(stmts, dim, start=None):
    """Branch paths through loop-free code: (condition rows, affine)."""
    acc = [((), start if start is not None else _identity_affine(dim))]
    for s in stmts:
        if isinstance(s, Assign):
            acc = [(rows, _compose_assign(aff, s, dim)) for rows, aff in acc]
        elif isinstance(s, If):
            cond = _rows(s.cond, dim, "condition")
            nxt = []
            for rows, aff in acc:
                here = tuple(_transform_row(r, aff) for r in cond)
                for srows, saff in _paths(s.then_body, dim, aff):
                    nxt.append((rows + here + srows, saff))
                for neg in cond:
                    nrow = _transform_row(_negate(neg), aff)
                    for srows, saff in _paths(s.else_body, dim, aff):
                        nxt.append((rows + (nrow,) + srows, saff))
            acc = nxt
        else:
            raise AnalysisError("loops inside conditionals are not supported")
    return acc


def _lift(stmts):
    """Widen every row and assignment by one trailing zero coefficient."""
    out = []
    for s in stmts:
        if isinstance(s, Assign):
            out.append(Assign(s.target, tuple(s.coeffs) + (0,), s.const))
        elif isinstance(s, If):
            cond = tuple((tuple(g) + (0,), r) for g, r in s.cond)
            out.append(If(cond, _lift(s.then_body), _lift(s.else_body)))
        else:
            guard = tuple((tuple(g) + (0,), r) for g, r in s.guard)
            out.append(While(guard, _lift(s.body), s.jordan))
    return tuple(out)


# ------------------------------------------------------------------------
# normalization
# ------------------------------------------------------------------------


def normalize(variables, assume, body, *, flatten_nested=False):
    """Build the self-loop normal form of a structured program.

    Locations are entry, loopK and loopK_exit per while in encounter
    order, and end when trailing statements need a target.  Innermost
    loop bodies become accelerable self-loops; an outer loop around a
    nested one contributes plain cycle edges instead, unless
    flatten_nested folds the pair into one head over a fresh control
    variable (a precision trade documented on the flag)."""
    source_vars = tuple(variables)
    variables = source_vars
    src_dim = len(source_vars)
    assume_rows = _rows(assume, src_dim, "assume")
    body = tuple(body)
    structured = body
    if flatten_nested:
        mode = "_mode"
        while mode in variables:
            mode += "_"
        variables = variables + (mode,)
        body = _lift(body)
        assume_rows_full = tuple(
            (g + (mpq(0),), r) for g, r in assume_rows
        ) + _mode_rows(len(variables), 0)
    else:
        assume_rows_full = assume_rows
    dim = len(variables)

    if assume_rows_full:
        initial = Polyhedron.from_constraints(
            [g for g, _ in assume_rows_full],
            [r for _, r in assume_rows_full],
            dim=dim,
        )
    else:
        initial = Polyhedron.top(dim)

    locations = ["entry"]
    transitions = []
    heads, exits = [], []
    counter = itertools.count(1)

    def flush(paths, src, dst, gate, accelerate=False, jordan=None, head=None):
        multi = len(paths) > 1
        for i, (rows, aff) in enumerate(paths):
            name = ""
            if head is not None:
                name = f"{head}/{i}" if multi else head
            transitions.append(
                Transition(src, dst, gate + rows, aff, accelerate, jordan, name)
            )

    def emit_exits(headloc, exitloc, guard, extra=()):
        emitted = False
        for row in guard:
            if _tautology(row):
                continue
            transitions.append(
                Transition(
                    headloc,
                    exitloc,
                    (_negate(row),) + extra,
                    _identity_affine(dim),
                )
            )
            emitted = True
        if emitted:
            exits.append((headloc, exitloc))

    def flatten(w, headloc, exitloc, guard):
        lead, trail, inner = [], [], None
        for st in w.body:
            if isinstance(st, While):
                if inner is not None:
                    raise AnalysisError("flattening supports one inner loop")
                if _contains_while(st.body):
                    raise AnalysisError("flattening supports one nesting level")
                inner = st
            elif inner is None:
                lead.append(st)
            else:
                trail.append(st)
        if _contains_while(lead) or _contains_while(trail):
            raise AnalysisError("loops inside conditionals are not supported")
        if w.jordan is not None or inner.jordan is not None:
            raise AnalysisError("decomposition overrides cannot be flattened")
        mode_i = dim - 1
        eq0, eq1 = _mode_rows(dim, 0), _mode_rows(dim, 1)
        inner_guard = _rows(inner.guard, dim, "guard")
        set_mode = lambda v: Assign(mode_i, (0,) * dim, v)
        pieces = []
        for rows, aff in _paths(tuple(lead), dim):
            pieces.append((guard + eq0 + rows, _compose_assign(aff, set_mode(1), dim)))
        for rows, aff in _paths(inner.body, dim):
            pieces.append((inner_guard + eq1 + rows, aff))
        for row in inner_guard:
            if _tautology(row):
                continue
            back = (_negate(row),) + eq1
            for rows, aff in _paths(tuple(trail), dim):
                pieces.append(
                    (back + rows, _compose_assign(aff, set_mode(0), dim))
                )
        for i, (rows, aff) in enumerate(pieces):
            transitions.append(
                Transition(
                    headloc, headloc, rows, aff, True, None, f"{headloc}/{i}"
                )
            )
        emit_exits(headloc, exitloc, guard, extra=eq0)

    def walk(stmts, current, gate):
        paths = [((), _identity_affine(dim))]
        for s in stmts:
            if isinstance(s, Assign):
                paths = [(rows, _compose_assign(aff, s, dim)) for rows, aff in paths]
            elif isinstance(s, If):
                if _contains_while((s,)):
                    raise AnalysisError("loops inside conditionals are not supported")
                paths = _extend_paths(paths, s, dim)
            elif isinstance(s, While):
                k = next(counter)
                headloc, exitloc = f"loop{k}", f"loop{k}_exit"
                flush(paths, current, headloc, gate)
                gate = ()
                locations.extend((headloc, exitloc))
                heads.append(headloc)
                guard = _rows(s.guard, dim, "guard")
                if _contains_while(s.body):
                    if flatten_nested:
                        flatten(s, headloc, exitloc, guard)
                    else:
                        last, lpaths, lgate = walk(s.body, headloc, guard)
                        flush(lpaths, last, headloc, lgate)
                        emit_exits(headloc, exitloc, guard)
                else:
                    flush(
                        _paths(s.body, dim),
                        headloc,
                        headloc,
                        guard,
                        accelerate=True,
                        jordan=s.jordan,
                        head=headloc,
                    )
                    emit_exits(headloc, exitloc, guard)
                current = exitloc
                paths = [((), _identity_affine(dim))]
            else:
                raise AnalysisError(f"unknown statement {s!r}")
        return current, paths, gate

    last, paths, gate = walk(body, "entry", ())
    trivial = (
        len(paths) == 1
        and not paths[0][0]
        and paths[0][1] == _identity_affine(dim)
    )
    if last == "entry" or not trivial:
        locations.append("end")
        flush(paths, last, "end", gate)

    return Program(
        variables=variables,
        initial=initial,
        entry="entry",
        locations=tuple(locations),
        transitions=tuple(transitions),
        heads=tuple(heads),
        exits=tuple(exits),
        source_variables=source_vars,
        assume=assume_rows,
        structured=structured,
    )


def _extend_paths(paths, stmt, dim):
    nxt = []
    cond = _rows(stmt.cond, dim, "condition")
    for rows, aff in paths:
        here = tuple(_transform_row(r, aff) for r in cond)
        for srows, saff in _paths(stmt.then_body, dim, aff):
            nxt.append((rows + here + srows, saff))
        for neg in cond:
            nrow = _transform_row(_negate(neg), aff)
            for srows, saff in _paths(stmt.else_body, dim, aff):
                nxt.append((rows + (nrow,) + srows, saff))
    return nxt


def _mode_rows(dim, value):
    unit = (mpq(0),) * (dim - 1) + (mpq(1),)
    nunit = tuple(-c for c in unit)
    return ((unit, mpq(value)), (nunit, mpq(-value)))


# ------------------------------------------------------------------------
# fixpoint engine
# ------------------------------------------------------------------------


def _loop_of(t):
    A, b = t.update
    G = tuple(g for g, _ in t.guard)
    h = tuple(r for _, r in t.guard)
    return LinearLoop.make(G, h, A, b)


def _form_of(t, loop):
    ah, _ = homogenize(loop)
    if t.jordan is not None:
        blocks, R, R_inv = t.jordan
        return assemble_jordan(ah, blocks, R=R, R_inv=R_inv)
    return real_jordan(ah)


def _post_plain(t, X):
    if X.is_empty():
        return X
    for g, r in t.guard:
        X = X.meet_constraint(g, r)
    A, b = t.update
    return X.image_affine(A, b)


def _widen_targets(program, accel_names):
    adj = {}
    for t in program.transitions:
        if t.source == t.target and t.name in accel_names:
            continue
        adj.setdefault(t.source, []).append(t.target)
    state, targets = {}, set()

    def dfs(u):
        state[u] = 1
        for v in adj.get(u, ()):
            if state.get(v, 0) == 0:
                dfs(v)
            elif state[v] == 1:
                targets.add(v)
        state[u] = 2

    dfs(program.entry)
    for loc in program.locations:
        if state.get(loc, 0) == 0:
            dfs(loc)
    return targets


def _accelerate_head(head, entry, loops, acc_cfg, cfg, bounds, exact, widened):
    current = loops[0][0].name
    try:
        if len(loops) == 1:
            t, loop, form = loops[0]
            acc = accelerate_guarded(loop, entry, acc_cfg, form)
            bounds[t.name] = acc.bound
            exact[t.name] = acc.exact
            return acc.states
        Y = entry
        rounds = 0
        while True:
            prev = Y
            for t, loop, form in loops:
                current = t.name
                acc = accelerate_guarded(loop, Y, acc_cfg, form)
                bounds[t.name] = acc.bound
                exact[t.name] = acc.exact
                Y = acc.states
            if prev.includes(Y):
                return Y
            rounds += 1
            if rounds > cfg.widen_delay + 40:
                raise AnalysisError(f"{head}: branch rotation did not settle")
            if rounds > cfg.widen_delay:
                Y = prev.widen(prev.join(Y))
                widened.add(head)
    except GeneratorCapError as e:
        raise AnalysisError(f"{current}: {e}") from e


def analyze(program, config=None):
    """Solve for one invariant polyhedron per location.

    Accelerable self-loops are applied once to their entry join; plain
    transitions propagate affine images; back-edge targets widen after
    widen_delay growths.  A final descending sweep without widening is
    kept only when it still verifies as a post-fixpoint."""
    cfg = config or AnalysisConfig()
    acc_cfg = cfg.accel or AccelerationConfig()
    start = perf_counter()
    dim = len(program.variables)

    accel_loops = {}
    demoted = []
    accel_names = set()
    for t in program.transitions:
        if not t.accelerate:
            continue
        loop = _loop_of(t)
        try:
            form = _form_of(t, loop)
        except JordanError:
            demoted.append(t.name)
            continue
        accel_loops.setdefault(t.source, []).append((t, loop, form))
        accel_names.add(t.name)

    in_edges = {loc: [] for loc in program.locations}
    for t in program.transitions:
        if t.source == t.target and t.name in accel_names:
            continue
        in_edges[t.target].append(t)
    widen_targets = _widen_targets(program, accel_names)

    values = {loc: Polyhedron.bottom(dim) for loc in program.locations}
    entries, bounds, exact = {}, {}, {}
    grew = {loc: 0 for loc in program.locations}
    widened = set()

    def recompute(loc, current, bounds, exact, widened):
        E = program.initial if loc == program.entry else Polyhedron.bottom(dim)
        for t in in_edges[loc]:
            E = E.join(_post_plain(t, current[t.source]))
        loops = accel_loops.get(loc)
        if not loops:
            return E, E
        return E, _accelerate_head(
            loc, E, loops, acc_cfg, cfg, bounds, exact, widened
        )

    sweeps = 0
    while True:
        sweeps += 1
        if sweeps > cfg.max_sweeps:
            raise AnalysisError(f"no convergence after {cfg.max_sweeps} sweeps")
        changed = False
        for loc in program.locations:
            E, V = recompute(loc, values, bounds, exact, widened)
            if loc in accel_loops:
                entries[loc] = E
            old = values[loc]
            if old.includes(V):
                continue
            cand = old.join(V)
            if loc in widen_targets and not old.is_empty():
                grew[loc] += 1
                if grew[loc] > cfg.widen_delay:
                    cand = old.widen(cand)
                    widened.add(loc)
            values[loc] = cand
            changed = True
        if not changed:
            break

    if cfg.descend:
        desc = dict(values)
        dentries, dbounds, dexact = dict(entries), dict(bounds), dict(exact)
        for loc in program.locations:
            E, V = recompute(loc, desc, dbounds, dexact, set())
            if loc in accel_loops:
                dentries[loc] = E
            desc[loc] = V
        candidate = AnalysisResult(
            desc,
            dentries,
            dbounds,
            dexact,
            tuple(sorted(widened)),
            tuple(demoted),
            sweeps,
            0.0,
        )
        if not check_post_fixpoint(program, candidate, cfg):
            values, entries = desc, dentries
            bounds, exact = dbounds, dexact

    return AnalysisResult(
        invariants=values,
        entries=entries,
        bounds=bounds,
        exact=exact,
        widened=tuple(sorted(widened)),
        demoted=tuple(demoted),
        sweeps=sweeps,
        seconds=perf_counter() - start,
    )


def exit_states(inv, guard_rows):
    """States at the loop exit: the head invariant meets the closed
    negation of some guard row; a true guard never exits."""
    out = Polyhedron.bottom(inv.dim)
    for row in guard_rows:
        if _tautology(row):
            continue
        g, r = _negate(row)
        out = out.join(inv.meet_constraint(g, r))
    return out


def check_post_fixpoint(program, result, config=None):
    """Machine check of the solved equations; returns violation notes.

    Plain transitions must map their source invariant into the target.
    An accelerable self-loop is checked as the meta-transition it was
    interpreted as: acceleration of the recorded entry join for a lone
    loop, of the head invariant itself when branch rotation applies."""
    cfg = config or AnalysisConfig()
    acc_cfg = cfg.accel or AccelerationConfig()
    inv = result.invariants
    out = []
    if not inv[program.entry].includes(program.initial):
        out.append("entry: initial states escape the invariant")
    demoted = set(result.demoted)
    per_head = {}
    for t in program.transitions:
        if t.accelerate and t.name not in demoted and t.source == t.target:
            per_head.setdefault(t.source, []).append(t)
    for t in program.transitions:
        if t.accelerate and t.name not in demoted and t.source == t.target:
            loop = _loop_of(t)
            form = _form_of(t, loop)
            if len(per_head[t.source]) == 1:
                base = result.entries.get(
                    t.source, Polyhedron.bottom(inv[t.source].dim)
                )
            else:
                base = inv[t.source]
            acc = accelerate_guarded(loop, base, acc_cfg, form)
            if not inv[t.source].includes(acc.states):
                out.append(f"{t.name}: accelerated image escapes the head")
        else:
            post = _post_plain(t, inv[t.source])
            if not inv[t.target].includes(post):
                out.append(f"{t.source}->{t.target}: step escapes the target")
    return tuple(out)
