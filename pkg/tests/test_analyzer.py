"""Fixpoint engine tests.

Expected invariants here are derived by hand from the closed-form
dynamics (geometric decay toward an affine fixpoint, polynomial
counters) and cross-checked against exact concrete execution.  The
thermostat numbers: heating t' = 15/16 t + 14/16 + 1 climbs toward 30,
so the last in-guard value t <= 22 steps to at most 360/16 = 22.5 and
the slowest start t = 16 needs n > ln(4/7)/ln(15/16) = 8.67 rounds,
nine iterations.  Cooling t' = 15/16 t + 14/16 decays toward 14; from
22.5 the guard t >= 18 survives while (15/16)^n >= 8/17, eleven rounds,
so the twelfth step exits and the lowest head value is
15/16 * 18 + 14/16 = 17.75.
"""

import itertools

import pytest
from gmpy2 import mpq

from linaccel.accel import AccelerationConfig, accelerate_guarded
from linaccel.analyzer import (
    AnalysisConfig,
    AnalysisError,
    Assign,
    If,
    While,
    analyze,
    check_post_fixpoint,
    exit_states,
    normalize,
)
from linaccel.numerics import INF, is_finite
from linaccel.polyhedra import LinearLoop, Polyhedron


# ------------------------------------------------------------------------
# structured programs used across tests
# ------------------------------------------------------------------------


def exp_program():
    # x in [1,3], y in [0,2]; while (y <= 3) { x := 3/2 x; y := y + 1 }
    return normalize(
        ("x", "y"),
        assume=(
            ((-1, 0), -1),
            ((1, 0), 3),
            ((0, -1), 0),
            ((0, 1), 2),
        ),
        body=(
            While(
                guard=(((0, 1), 3),),
                body=(
                    Assign(0, (mpq(3, 2), 0), 0),
                    Assign(1, (0, 1), 1),
                ),
            ),
        ),
    )


def thermostat_program():
    # Fig-2-style two-mode controller: heating while t <= 22, cooling
    # while t >= 18, outside temperature pinned at 14.
    heat = While(
        guard=(((1, 0, 0), 22),),
        body=(
            Assign(0, (mpq(15, 16), mpq(1, 16), 0), 1),
            Assign(2, (0, 0, 1), 1),
        ),
    )
    cool = While(
        guard=(((-1, 0, 0), -18),),
        body=(
            Assign(0, (mpq(15, 16), mpq(1, 16), 0), 0),
            Assign(2, (0, 0, 1), 1),
        ),
    )
    outer = While(
        guard=(),
        body=(
            Assign(2, (0, 0, 0), 0),
            heat,
            Assign(2, (0, 0, 0), 0),
            cool,
        ),
    )
    return normalize(
        ("t", "te", "time"),
        assume=(
            ((0, 1, 0), 14),
            ((0, -1, 0), -14),
            ((-1, 0, 0), -16),
            ((1, 0, 0), 17),
        ),
        body=(outer,),
    )


def widening_program():
    # outer loop re-seeds y and keeps multiplying x: no finite fixpoint,
    # so the outer head must widen.
    inner = While(
        guard=(((0, 1), 3),),
        body=(
            Assign(1, (0, 1), 1),
            Assign(0, (mpq(3, 2), 0), 0),
        ),
    )
    return normalize(
        ("x", "y"),
        assume=(
            ((-1, 0), -1),
            ((1, 0), 2),
            ((0, 1), 0),
            ((0, -1), 0),
        ),
        body=(While(guard=(), body=(inner, Assign(1, (0, 0), 0))),),
    )


def branching_program():
    # while (y <= 3) { if (x <= 10) x := 2x; y := y + 1 }
    return normalize(
        ("x", "y"),
        assume=(
            ((-1, 0), -1),
            ((1, 0), 2),
            ((0, 1), 0),
            ((0, -1), 0),
        ),
        body=(
            While(
                guard=(((0, 1), 3),),
                body=(
                    If(
                        cond=(((1, 0), 10),),
                        then_body=(Assign(0, (2, 0), 0),),
                        else_body=(),
                    ),
                    Assign(1, (0, 1), 1),
                ),
            ),
        ),
    )


def cubic_spectrum_program():
    # composed body acts as (x,y,z,w) <- (2z, x, y, z); the homogenized
    # matrix has a cube-root eigenvalue, so acceleration must demote the
    # loop to plain iteration with widening.
    return normalize(
        ("x", "y", "z", "w"),
        assume=(
            ((1, 0, 0, 0), 1),
            ((-1, 0, 0, 0), -1),
            ((0, 1, 0, 0), 1),
            ((0, -1, 0, 0), -1),
            ((0, 0, 1, 0), 1),
            ((0, 0, -1, 0), -1),
            ((0, 0, 0, 1), 0),
            ((0, 0, 0, -1), 0),
        ),
        body=(
            While(
                guard=(((1, 0, 0, 0), 100),),
                body=(
                    Assign(3, (0, 0, 1, 0), 0),
                    Assign(2, (0, 1, 0, 0), 0),
                    Assign(1, (1, 0, 0, 0), 0),
                    Assign(0, (0, 0, 0, 2), 0),
                ),
            ),
        ),
    )


# ------------------------------------------------------------------------
# independent concrete interpreter (test-local oracle)
# ------------------------------------------------------------------------


def _static_names(body):
    names = {}
    counter = itertools.count(1)

    def walk(stmts):
        for s in stmts:
            if isinstance(s, While):
                names[id(s)] = f"loop{next(counter)}"
                walk(s.body)
            elif isinstance(s, If):
                walk(s.then_body)
                walk(s.else_body)

    walk(body)
    return names


def _holds(rows, x):
    return all(sum(c * v for c, v in zip(g, x)) <= r for g, r in rows)


def run_structured(body, x0, budget=300):
    """Execute exact semantics, logging (location, state) at loop heads
    and exits.  Returns the log; stops cleanly when the budget runs out."""
    names = _static_names(body)
    x = [mpq(v) for v in x0]
    log = []
    fuel = [budget]

    def exec_stmts(stmts):
        for s in stmts:
            if isinstance(s, Assign):
                x[s.target] = sum(
                    mpq(c) * v for c, v in zip(s.coeffs, x)
                ) + mpq(s.const)
            elif isinstance(s, If):
                if _holds(s.cond, x):
                    if not exec_stmts(s.then_body):
                        return False
                elif not exec_stmts(s.else_body):
                    return False
            else:
                name = names[id(s)]
                while True:
                    log.append((name, tuple(x)))
                    fuel[0] -= 1
                    if fuel[0] <= 0:
                        return False
                    if not _holds(s.guard, x):
                        break
                    if not exec_stmts(s.body):
                        return False
                log.append((f"{name}_exit", tuple(x)))
        return True

    exec_stmts(body)
    return log


def assert_log_contained(result, log):
    for loc, state in log:
        inv = result.invariants[loc]
        assert inv.contains_point(state), (loc, state)


# ------------------------------------------------------------------------
# normalization structure
# ------------------------------------------------------------------------


def test_normalize_single_loop_shape():
    prog = exp_program()
    assert prog.locations == ("entry", "loop1", "loop1_exit")
    assert prog.heads == ("loop1",)
    assert prog.exits == (("loop1", "loop1_exit"),)
    kinds = {}
    for t in prog.transitions:
        kinds.setdefault((t.source, t.target), []).append(t)
    (enter,) = kinds["entry", "loop1"]
    assert enter.guard == () and not enter.accelerate
    (self_t,) = kinds["loop1", "loop1"]
    assert self_t.accelerate and self_t.name == "loop1"
    assert self_t.guard == (((mpq(0), mpq(1)), mpq(3)),)
    A, b = self_t.update
    assert A == ((mpq(3, 2), mpq(0)), (mpq(0), mpq(1)))
    assert b == (mpq(0), mpq(1))
    (leave,) = kinds["loop1", "loop1_exit"]
    assert leave.guard == (((mpq(0), mpq(-1)), mpq(-3)),)


def test_normalize_if_else_two_self_loops():
    prog = branching_program()
    loops = [
        t for t in prog.transitions if t.source == t.target == "loop1"
    ]
    assert len(loops) == 2 and all(t.accelerate for t in loops)
    assert {t.name for t in loops} == {"loop1/0", "loop1/1"}
    by_name = {t.name: t for t in loops}
    then_t = by_name["loop1/0"]
    assert (((mpq(1), mpq(0)), mpq(10))) in then_t.guard
    assert then_t.update[0][0] == (mpq(2), mpq(0))
    else_t = by_name["loop1/1"]
    assert (((mpq(-1), mpq(0)), mpq(-10))) in else_t.guard
    assert else_t.update[0][0] == (mpq(1), mpq(0))
    # the loop guard itself appears on both branches
    for t in loops:
        assert (((mpq(0), mpq(1)), mpq(3))) in t.guard


def test_normalize_prefix_composes_into_entry_edge():
    # t := 0 before the loop lands on the entry edge
    prog = normalize(
        ("x", "t"),
        assume=(((1, 0), 2), ((-1, 0), -1)),
        body=(
            Assign(1, (0, 0), 0),
            While(guard=(((1, 0), 30),), body=(Assign(0, (1, 0), 1),)),
        ),
    )
    (enter,) = [t for t in prog.transitions if t.source == "entry"]
    A, b = enter.update
    assert A == ((mpq(1), mpq(0)), (mpq(0), mpq(0)))
    assert b == (mpq(0), mpq(0))


def test_normalize_sequential_composition_order():
    # y := y + x; x := x + 1  reads the old x in the first assignment
    prog = normalize(
        ("x", "y"),
        assume=(),
        body=(
            Assign(1, (1, 1), 0),
            Assign(0, (1, 0), 1),
        ),
    )
    (edge,) = [t for t in prog.transitions if t.source == "entry"]
    A, b = edge.update
    assert A == ((mpq(1), mpq(0)), (mpq(1), mpq(1)))
    assert b == (mpq(1), mpq(0))
    assert prog.locations == ("entry", "end")


def test_normalize_if_condition_rewritten_through_prefix():
    # x := x + 1; if (x <= 5) ...: the branch test sees the updated x,
    # so over the head state it reads x <= 4.
    prog = normalize(
        ("x",),
        assume=(((1,), 0), ((-1,), 0)),
        body=(
            While(
                guard=(((1,), 100),),
                body=(
                    Assign(0, (1,), 1),
                    If(
                        cond=(((1,), 5),),
                        then_body=(Assign(0, (1,), 1),),
                        else_body=(),
                    ),
                ),
            ),
        ),
    )
    loops = {t.name: t for t in prog.transitions if t.source == t.target}
    assert (((mpq(1),), mpq(4))) in loops["loop1/0"].guard
    assert (((mpq(-1),), mpq(-4))) in loops["loop1/1"].guard
    # then-branch advances twice, else-branch once
    assert loops["loop1/0"].update[1] == (mpq(2),)
    assert loops["loop1/1"].update[1] == (mpq(1),)


def test_normalize_rejects_loop_inside_conditional():
    with pytest.raises(AnalysisError):
        normalize(
            ("x",),
            assume=(),
            body=(
                While(
                    guard=(((1,), 9),),
                    body=(
                        If(
                            cond=(((1,), 5),),
                            then_body=(
                                While(guard=(), body=(Assign(0, (1,), 1),)),
                            ),
                            else_body=(),
                        ),
                    ),
                ),
            ),
        )


def test_normalize_thermostat_shape():
    prog = thermostat_program()
    assert prog.heads == ("loop1", "loop2", "loop3")
    assert prog.exits == (
        ("loop2", "loop2_exit"),
        ("loop3", "loop3_exit"),
    )
    # the outer guard is true: no exit edges leave loop1
    assert not [t for t in prog.transitions if t.source == "loop1_exit"]
    assert not [
        t for t in prog.transitions if t.target == "loop1_exit"
    ]
    back = [t for t in prog.transitions if t.target == "loop1"]
    assert {t.source for t in back} == {"entry", "loop3_exit"}
    accel = [t for t in prog.transitions if t.accelerate]
    assert {t.source for t in accel} == {"loop2", "loop3"}


def test_normalize_flatten_nested_control_encoding():
    inner = While(guard=(((0, 1), 3),), body=(Assign(1, (0, 1), 1),))
    prog = normalize(
        ("x", "y"),
        assume=(((1, 0), 2), ((-1, 0), -1), ((0, 1), 0), ((0, -1), 0)),
        body=(
            While(
                guard=(((1, 0), 50),),
                body=(inner, Assign(0, (1, 0), 1), Assign(1, (0, 0), 0)),
            ),
        ),
        flatten_nested=True,
    )
    assert prog.variables[-1].startswith("_mode")
    assert prog.heads == ("loop1",)
    loops = [t for t in prog.transitions if t.source == t.target == "loop1"]
    assert len(loops) == 3 and all(t.accelerate for t in loops)
    # every self-loop tests the control variable
    for t in loops:
        assert any(g[-1] != 0 for g, _ in t.guard)
    # the initial set pins the mode to 0
    box = prog.initial.bounding_box()
    assert box[-1].lo == 0 and box[-1].hi == 0
    result = analyze(prog)
    assert check_post_fixpoint(prog, result) == ()


# ------------------------------------------------------------------------
# analysis results
# ------------------------------------------------------------------------


def test_analyze_single_loop_matches_direct_acceleration():
    prog = exp_program()
    result = analyze(prog)
    loop = LinearLoop.make(
        ((0, 1),), (3,), ((mpq(3, 2), 0), (0, 1)), (0, 1)
    )
    init = Polyhedron.from_box([(1, 3), (0, 2)])
    direct = accelerate_guarded(loop, init)
    assert result.invariants["entry"].equals(init)
    assert result.invariants["loop1"].equals(direct.states)
    assert result.invariants["loop1_exit"].equals(
        exit_states(direct.states, (((mpq(0), mpq(1)), mpq(3)),))
    )
    assert result.bounds["loop1"].count == direct.bound.count == 4
    assert result.exact["loop1"] is True
    assert result.widened == () and result.demoted == ()
    assert check_post_fixpoint(prog, result) == ()


def test_analyze_stationary_unguarded_loop():
    prog = normalize(
        ("x",),
        assume=(((1,), 5), ((-1,), -4)),
        body=(While(guard=(), body=(Assign(0, (1,), 0),)),),
    )
    result = analyze(prog)
    assert result.invariants["loop1"].equals(Polyhedron.from_box([(4, 5)]))
    assert result.bounds["loop1"].count == INF
    # true guard: the exit location is unreachable
    assert result.invariants["loop1_exit"].is_empty()


def test_analyze_thermostat_exact_head_bounds():
    prog = thermostat_program()
    result = analyze(prog)
    t_h, te_h, time_h = result.invariants["loop2"].bounding_box()
    assert (t_h.lo, t_h.hi) == (mpq(16), mpq(45, 2))
    assert (te_h.lo, te_h.hi) == (mpq(14), mpq(14))
    assert (time_h.lo, time_h.hi) == (mpq(0), mpq(9))
    t_c, te_c, time_c = result.invariants["loop3"].bounding_box()
    assert (t_c.lo, t_c.hi) == (mpq(71, 4), mpq(45, 2))
    assert (te_c.lo, te_c.hi) == (mpq(14), mpq(14))
    assert (time_c.lo, time_c.hi) == (mpq(0), mpq(12))
    assert result.bounds["loop2"].count == 9
    assert result.bounds["loop3"].count == 12
    assert result.exact["loop2"] is True
    assert result.exact["loop3"] is True
    assert result.widened == () and result.demoted == ()
    # the outer head collects both entry and re-entry temperatures
    t_o = result.invariants["loop1"].bounding_box()[0]
    assert (t_o.lo, t_o.hi) == (mpq(16), mpq(18))
    assert check_post_fixpoint(prog, result) == ()


def test_analyze_thermostat_simulation_containment():
    prog = thermostat_program()
    result = analyze(prog)
    for t0 in (mpq(16), mpq(33, 2), mpq(17)):
        log = run_structured(prog.structured, (t0, 14, 0), budget=200)
        assert_log_contained(result, log)


def test_analyze_widening_engages_on_outer_divergence():
    prog = widening_program()
    result = analyze(prog)
    assert result.widened == ("loop1",)
    x_iv, y_iv = result.invariants["loop2"].bounding_box()
    assert (y_iv.lo, y_iv.hi) == (mpq(0), mpq(4))
    assert x_iv.lo == 1 and not is_finite(x_iv.hi)
    assert check_post_fixpoint(prog, result) == ()
    for x0 in (1, 2):
        log = run_structured(prog.structured, (x0, 0), budget=120)
        assert_log_contained(result, log)


def test_analyze_no_widening_on_accelerable_loops():
    result = analyze(exp_program())
    assert result.widened == ()


def test_analyze_branching_round_robin():
    prog = branching_program()
    result = analyze(prog)
    assert check_post_fixpoint(prog, result) == ()
    x_iv, y_iv = result.invariants["loop1"].bounding_box()
    assert (y_iv.lo, y_iv.hi) == (mpq(0), mpq(4))
    assert x_iv.lo >= 1 and is_finite(x_iv.hi)
    for x0 in (1, 2, mpq(3, 2)):
        log = run_structured(prog.structured, (x0, 0), budget=60)
        assert_log_contained(result, log)


def test_analyze_demotes_unsupported_spectrum():
    prog = cubic_spectrum_program()
    result = analyze(prog)
    assert result.demoted == ("loop1",)
    assert "loop1" in result.widened
    assert "loop1" not in result.bounds
    assert check_post_fixpoint(prog, result) == ()
    log = run_structured(prog.structured, (1, 1, 1, 0), budget=60)
    assert_log_contained(result, log)


def test_analyze_generator_cap_names_loop():
    cfg = AnalysisConfig(accel=AccelerationConfig(generator_cap=2))
    with pytest.raises(AnalysisError, match="loop1"):
        analyze(exp_program(), cfg)


def test_descending_pass_keeps_post_fixpoint():
    prog = widening_program()
    kept = analyze(prog)
    raw = analyze(prog, AnalysisConfig(descend=False))
    assert check_post_fixpoint(prog, kept) == ()
    assert check_post_fixpoint(prog, raw) == ()
    for loc in prog.locations:
        assert raw.invariants[loc].includes(kept.invariants[loc])


def test_analyze_straightline_program():
    prog = normalize(
        ("x", "y"),
        assume=(((1, 0), 1), ((-1, 0), -1), ((0, 1), 2), ((0, -1), -2)),
        body=(Assign(0, (1, 1), 3),),
    )
    assert prog.locations == ("entry", "end")
    result = analyze(prog)
    box = result.invariants["end"].bounding_box()
    assert (box[0].lo, box[0].hi) == (mpq(6), mpq(6))
    assert (box[1].lo, box[1].hi) == (mpq(2), mpq(2))


# ------------------------------------------------------------------------
# exit states
# ------------------------------------------------------------------------


def test_exit_states_interval():
    inv = Polyhedron.from_box([(0, 4)])
    out = exit_states(inv, (((mpq(1),), mpq(3)),))
    assert out.equals(Polyhedron.from_box([(3, 4)]))


def test_exit_states_guard_unsatisfied():
    inv = Polyhedron.from_box([(5, 6)])
    out = exit_states(inv, (((mpq(1),), mpq(3)),))
    assert out.equals(inv)


def test_exit_states_true_guard_unreachable():
    inv = Polyhedron.from_box([(0, 4)])
    assert exit_states(inv, ()).is_empty()


def test_exit_states_multirow_guard_union():
    # leaving x <= 3 && y <= 2 means violating either row
    inv = Polyhedron.from_box([(0, 4), (0, 4)])
    out = exit_states(
        inv, (((mpq(1), mpq(0)), mpq(3)), ((mpq(0), mpq(1)), mpq(2)))
    )
    expected = Polyhedron.from_box([(3, 4), (0, 4)]).join(
        Polyhedron.from_box([(0, 4), (2, 4)])
    )
    assert out.equals(expected)
