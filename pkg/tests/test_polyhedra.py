import random
from itertools import combinations

from gmpy2 import mpq

from linaccel.numerics import INF, NINF
from linaccel.polyhedra import (
    LinearLoop,
    Polyhedron,
    TemplatePolyhedron,
    make_logahedra_template,
    octagon_template,
    template_abstraction,
)


# ---------------------------------------------------------------- oracles


def brute_force_vertices(rows, rhs):
    """Independent vertex enumeration: solve every dim-subset of tight
    constraints and keep feasible solutions (only valid for bounded,
    full-rank instances)."""
    dim = len(rows[0])
    verts = set()
    for idx in combinations(range(len(rows)), dim):
        sub = [[mpq(x) for x in rows[i]] for i in idx]
        subr = [mpq(rhs[i]) for i in idx]
        x = _solve_exact(sub, subr)
        if x is None:
            continue
        if all(sum(r[j] * x[j] for j in range(dim)) <= b for r, b in zip(rows, rhs)):
            verts.add(tuple(x))
    return verts


def _solve_exact(m, b):
    n = len(m)
    aug = [row[:] + [bv] for row, bv in zip(m, b)]
    for c in range(n):
        piv = next((i for i in range(c, n) if aug[i][c] != 0), None)
        if piv is None:
            return None
        aug[c], aug[piv] = aug[piv], aug[c]
        d = aug[c][c]
        aug[c] = [x / d for x in aug[c]]
        for i in range(n):
            if i != c and aug[i][c] != 0:
                f = aug[i][c]
                aug[i] = [x - f * y for x, y in zip(aug[i], aug[c])]
    return [aug[i][n] for i in range(n)]


def random_bounded_h_form(rng, dim):
    """A box plus a few random cuts; always bounded and nonempty (contains 0)."""
    rows, rhs = [], []
    for i in range(dim):
        e = [0] * dim
        e[i] = 1
        rows.append(tuple(e))
        rhs.append(mpq(rng.randint(1, 5)))
        e[i] = -1
        rows.append(tuple(e))
        rhs.append(mpq(rng.randint(1, 5)))
    for _ in range(rng.randint(1, 3)):
        row = tuple(mpq(rng.randint(-3, 3)) for _ in range(dim))
        if not any(row):
            continue
        rows.append(row)
        rhs.append(mpq(rng.randint(1, 8)))
    return rows, rhs


# ---------------------------------------------------------------- conversions


def test_unit_square_generators():
    P = Polyhedron.from_constraints(
        [(1, 0), (-1, 0), (0, 1), (0, -1)], [1, 0, 1, 0]
    )
    assert set(P.vertices) == {(0, 0), (1, 0), (0, 1), (1, 1)}
    assert P.rays == () and P.lines == ()


def test_halfplane_generators():
    P = Polyhedron.from_constraints([(-1,)], [0])
    assert P.vertices == ((mpq(0),),)
    assert P.rays == ((1,),)


def test_triangle_constraints():
    P = Polyhedron.from_generators([(0, 0), (1, 0), (0, 1)])
    cons = set(P.constraint_rows())
    assert cons == {((-1, 0), 0), ((0, -1), 0), ((1, 1), 1)}


def test_single_vertex_equalities():
    P = Polyhedron.from_generators([(2, 3)])
    Q = Polyhedron.from_constraints([(1, 0), (-1, 0), (0, 1), (0, -1)], [2, -2, 3, -3])
    assert P.equals(Q)
    # canonical rows pair up as x=2, y=3
    assert set(P.minimized_constraints()) == {
        ((1, 0), 2),
        ((-1, 0), -2),
        ((0, 1), 3),
        ((0, -1), -3),
    }


def test_random_3d_vs_bruteforce():
    rng = random.Random(1234)
    for _ in range(40):
        rows, rhs = random_bounded_h_form(rng, 3)
        P = Polyhedron.from_constraints(rows, rhs)
        expect = brute_force_vertices(rows, rhs)
        got = set(P.vertices)
        assert got == expect, (rows, rhs)
        assert P.rays == ()


def test_roundtrip_h_v_h():
    rng = random.Random(99)
    for _ in range(100):
        dim = rng.randint(1, 4)
        rows, rhs = random_bounded_h_form(rng, dim)
        P = Polyhedron.from_constraints(rows, rhs)
        Q = Polyhedron.from_generators(P.vertices, P.rays, P.lines, dim=dim)
        Q.constraint_rows()
        R = Polyhedron(dim, cons=tuple(Q.constraint_rows()))
        assert P.equals(R)


def test_empty_polyhedron():
    P = Polyhedron.from_constraints([(1,), (-1,)], [0, -1])  # x<=0 and x>=1
    assert P.is_empty()
    assert P.vertices == ()
    B = Polyhedron.bottom(2)
    assert B.is_empty()
    assert not B.includes(Polyhedron.top(2))
    assert Polyhedron.top(2).includes(B)


def test_top_has_lines():
    T = Polyhedron.top(2)
    assert not T.is_empty()
    assert len(T.lines) == 2


# ---------------------------------------------------------------- lattice ops


def test_join_idempotent():
    P = Polyhedron.from_box([(0, 1), (0, 1)])
    assert P.join(P).equals(P)


def test_meet_disjoint_boxes_empty():
    P = Polyhedron.from_box([(0, 1)])
    Q = Polyhedron.from_box([(2, 3)])
    assert P.meet(Q).is_empty()


def test_bounding_box():
    X = Polyhedron.from_box([(1, 3), (0, 2)])
    bb = X.bounding_box()
    assert (bb[0].lo, bb[0].hi) == (1, 3)
    assert (bb[1].lo, bb[1].hi) == (0, 2)


def test_bounding_box_unbounded():
    P = Polyhedron.from_constraints([(-1, 0)], [0], dim=2)
    bb = P.bounding_box()
    assert bb[0].lo == 0 and bb[0].hi == INF
    assert bb[1].lo == NINF and bb[1].hi == INF


def test_lattice_laws_random():
    rng = random.Random(5)
    for _ in range(25):
        ps = []
        for _ in range(3):
            rows, rhs = random_bounded_h_form(rng, 2)
            ps.append(Polyhedron.from_constraints(rows, rhs))
        a, b, c = ps
        assert a.meet(b).equals(b.meet(a))
        assert a.join(b).equals(b.join(a))
        assert a.meet(b.meet(c)).equals(a.meet(b).meet(c))
        assert a.join(b.join(c)).equals(a.join(b).join(c))
        # absorption
        assert a.join(a.meet(b)).equals(a)
        assert a.meet(a.join(b)).equals(a)
        # inclusion consistency
        assert a.includes(a.meet(b))
        assert a.join(b).includes(a)


def test_image_affine_noninvertible():
    P = Polyhedron.from_box([(0, 1), (0, 1)])
    Q = P.image_affine([(1, 1)], [0])  # project onto x+y
    assert Q.dim == 1
    assert set(Q.vertices) == {(mpq(0),), (mpq(2),)}


def test_project_out():
    P = Polyhedron.from_box([(0, 1), (2, 5), (0, 0)])
    Q = P.project_out([1])
    assert Q.dim == 2
    assert set(Q.vertices) == {(mpq(0), mpq(0)), (mpq(1), mpq(0))}


# ---------------------------------------------------------------- widening


def test_widen_self_is_self():
    P = Polyhedron.from_box([(0, 1)])
    W = P.widen(P)
    assert W.equals(P)


def test_widen_drops_unstable_upper_bound():
    P = Polyhedron.from_box([(0, 1)])
    Q = Polyhedron.from_box([(0, 2)])
    W = P.widen(Q)
    assert W.includes(Q)
    assert W.sup_of((1,)) == INF
    assert W.sup_of((-1,)) == 0


def test_widen_chain_stabilizes():
    cur = Polyhedron.from_box([(0, 1)])
    steps = 0
    for k in range(2, 10):
        nxt = cur.join(Polyhedron.from_box([(0, k)]))
        w = cur.widen(nxt)
        steps += 1
        if w.equals(cur):
            break
        cur = w
    assert steps <= 2
    assert cur.sup_of((1,)) == INF


def test_widen_always_covers_argument():
    rng = random.Random(17)
    for _ in range(30):
        rows, rhs = random_bounded_h_form(rng, 2)
        P = Polyhedron.from_constraints(rows, rhs)
        Q = P.join(Polyhedron.from_box([(0, rng.randint(1, 9)), (0, rng.randint(1, 9))]))
        W = P.widen(Q)
        assert W.includes(Q)


# ---------------------------------------------------------------- templates


def test_template_abstraction_box_octagon():
    # derived by vertex enumeration of the box [1,3] x [0,2]
    X = Polyhedron.from_box([(1, 3), (0, 2)])
    T = octagon_template(2)
    tp = template_abstraction(X, T)
    expect = {
        (1, 0): 3,
        (-1, 0): -1,
        (0, 1): 2,
        (0, -1): 0,
        (1, 1): 5,
        (1, -1): 3,
        (-1, 1): 1,
        (-1, -1): -1,
    }
    for row, u in expect.items():
        assert tp.bound_for(row) == u


def test_template_abstraction_contains_input():
    rng = random.Random(31)
    T = octagon_template(2)
    for _ in range(20):
        rows, rhs = random_bounded_h_form(rng, 2)
        P = Polyhedron.from_constraints(rows, rhs)
        tp = template_abstraction(P, T)
        assert tp.to_polyhedron().includes(P)


def test_template_abstraction_ray_gives_inf():
    P = Polyhedron.from_constraints([(-1, 0), (0, 1), (0, -1)], [0, 1, 0])
    tp = template_abstraction(P, [(1, 0)])
    assert tp.bounds[0] == INF


def test_template_abstraction_empty():
    tp = template_abstraction(Polyhedron.bottom(2), [(1, 0), (0, 1)])
    assert all(u == NINF for u in tp.bounds)


def test_template_empty_template_is_top():
    tp = template_abstraction(Polyhedron.from_box([(0, 1)]), [])
    assert tp.rows == () and tp.bounds == ()


def test_logahedra_octagon_rows():
    rows = make_logahedra_template([(0, 1)], 1, 2)
    assert set(rows) == {
        (1, 0), (-1, 0), (0, 1), (0, -1),
        (1, 1), (1, -1), (-1, 1), (-1, -1),
    }


def test_logahedra_level_zero_is_intervals():
    rows = make_logahedra_template([(0, 1)], 0, 2)
    assert set(rows) == {(1, 0), (-1, 0), (0, 1), (0, -1)}


def test_logahedra_level_three_count():
    rows = make_logahedra_template([(0, 1)], 3, 2)
    assert len(rows) == 4 * (2**3 + 1) - 4


def test_logahedra_refinement_inclusion():
    X = Polyhedron.from_generators([(0, 0), (1, 2), (3, 1), (2, -1)])
    t1 = template_abstraction(X, make_logahedra_template([(0, 1)], 1, 2))
    t3 = template_abstraction(X, make_logahedra_template([(0, 1)], 3, 2))
    assert t1.to_polyhedron().includes(t3.to_polyhedron())
    assert t3.to_polyhedron().includes(X)


# ---------------------------------------------------------------- loops


def test_linear_loop_step():
    loop = LinearLoop.make(
        G=[(0, 1)], h=[3],
        A=[("1.5", 0), (0, 1)], b=[0, 1],
    )
    assert loop.step((1, 0)) == (mpq(3, 2), mpq(1))
    assert loop.guard_holds((1, 3))
    assert not loop.guard_holds((1, mpq(7, 2)))
