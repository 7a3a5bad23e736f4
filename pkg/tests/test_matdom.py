import random
from itertools import product as iproduct

import pytest
from gmpy2 import mpq

from linaccel._linalg import identity, mat_add, mat_mul, mat_scale
from linaccel.jordan import real_jordan
from linaccel.matdom import (
    AbstractMatrix,
    GeneratorCapError,
    MatrixShape,
    abstract_matmul,
    apply_to_states,
    conjugate,
    entry_polyhedron,
    full_shape,
    shape_from_jordan,
)
from linaccel.numerics import Interval, scalar_sign
from linaccel.polyhedra import Polyhedron


# ---------------------------------------------------------------- oracles


def _lp_feasible(a, b):
    """Is {x >= 0 : a x = b} nonempty?  Phase-1 simplex with Bland's rule,
    exact mpq tableau.  Independent of the polyhedra engine on purpose."""
    m, n = len(a), len(a[0])
    rows = []
    for i in range(m):
        flip = -1 if b[i] < 0 else 1
        row = [flip * mpq(x) for x in a[i]] + [mpq(0)] * m + [flip * mpq(b[i])]
        rows.append(row)
    for i in range(m):
        rows[i][n + i] = mpq(1)
    cost = [mpq(0)] * n + [mpq(1)] * m + [mpq(0)]
    for r in rows:
        cost = [c - x for c, x in zip(cost, r)]
    basis = [n + i for i in range(m)]
    while True:
        enter = next((j for j in range(n + m) if cost[j] < 0), None)
        if enter is None:
            break
        leave, best = None, None
        for i in range(m):
            if rows[i][enter] > 0:
                ratio = rows[i][-1] / rows[i][enter]
                if (
                    best is None
                    or ratio < best
                    or (ratio == best and basis[i] < basis[leave])
                ):
                    best, leave = ratio, i
        piv = rows[leave][enter]
        rows[leave] = [x / piv for x in rows[leave]]
        for i in range(m):
            if i != leave and rows[i][enter] != 0:
                f = rows[i][enter]
                rows[i] = [x - f * y for x, y in zip(rows[i], rows[leave])]
        f = cost[enter]
        cost = [x - f * y for x, y in zip(cost, rows[leave])]
        basis[leave] = enter
    return cost[-1] == 0


def in_hull(point, pts):
    """Exact membership of point in conv(pts)."""
    if not pts:
        return False
    d = len(point)
    a = [[p[i] for p in pts] for i in range(d)]
    a.append([mpq(1)] * len(pts))
    return _lp_feasible(a, list(point) + [mpq(1)])


def hull_points_equal(points, poly):
    """conv(points) == poly, both directions through the simplex only."""
    if poly.rays or poly.lines:
        return False
    verts = poly.vertices
    if not verts:
        return not points
    return all(in_hull(p, verts) for p in points) and all(
        in_hull(v, points) for v in verts
    )


def flatten(mat):
    return tuple(x for row in mat for x in row)


def unflatten(vec, rows, cols):
    return tuple(tuple(vec[i * cols + j] for j in range(cols)) for i in range(rows))


def random_points(rng, dim, count):
    return [
        tuple(mpq(rng.randint(-6, 6), 2) for _ in range(dim)) for _ in range(count)
    ]


def random_abstract(rng, rows, cols, nverts):
    pts = random_points(rng, rows * cols, nverts)
    return AbstractMatrix(full_shape(rows, cols), Polyhedron.from_generators(pts))


def convex_sample(rng, verts):
    w = [mpq(rng.randint(0, 4)) for _ in verts]
    if not any(w):
        w[0] = mpq(1)
    t = sum(w)
    d = len(verts[0])
    return tuple(sum(wi * v[i] for wi, v in zip(w, verts)) / t for i in range(d))


def test_oracle_simplex_sanity():
    tri = [(mpq(0), mpq(0)), (mpq(1), mpq(0)), (mpq(0), mpq(1))]
    assert in_hull((mpq(1, 4), mpq(1, 4)), tri)
    assert in_hull((mpq(1, 2), mpq(1, 2)), tri)  # boundary
    assert in_hull((mpq(0), mpq(1)), tri)  # vertex
    assert not in_hull((mpq(1), mpq(1)), tri)
    assert not in_hull((mpq(-1, 8), mpq(0)), tri)
    assert in_hull((mpq(2), mpq(3)), [(mpq(2), mpq(3))])
    assert not in_hull((mpq(2), mpq(3)), [(mpq(2), mpq(4))])


# ---------------------------------------------------------------- shapes


def exp_jordan():
    # x' = 1.5x, y' = y + 1 homogenized; already block-triangular
    return real_jordan(
        (
            (mpq(3, 2), mpq(0), mpq(0)),
            (mpq(0), mpq(1), mpq(1)),
            (mpq(0), mpq(0), mpq(1)),
        )
    )


def test_full_shape_roundtrip():
    sh = full_shape(2, 3)
    assert sh.m == 6
    assert all(all(x == 0 for x in row) for row in sh.basis[0])
    mvec = tuple(mpq(k + 1) for k in range(6))
    mat = sh.psi(mvec)
    assert mat == ((1, 2, 3), (4, 5, 6))
    assert sh.psi_inv(mat) == mvec
    assert sh.pivots == ((0, 0), (0, 1), (0, 2), (1, 0), (1, 1), (1, 2))


def test_shape_from_jordan_exponential():
    sh = shape_from_jordan(exp_jordan())
    assert (sh.rows, sh.cols, sh.m) == (3, 3, 2)
    assert sh.basis[0] == ((0, 0, 0), (0, 1, 0), (0, 0, 1))
    assert sh.basis[1] == ((1, 0, 0), (0, 0, 0), (0, 0, 0))
    assert sh.basis[2] == ((0, 0, 0), (0, 0, 1), (0, 0, 0))
    assert sh.pivots == ((0, 0), (1, 2))
    assert sh.psi((mpq(3, 2), mpq(1))) == (
        (mpq(3, 2), 0, 0),
        (0, 1, 1),
        (0, 0, 1),
    )


def test_shape_from_jordan_identity():
    sh = shape_from_jordan(real_jordan(identity(2)))
    assert sh.m == 1
    assert sh.psi((mpq(5),)) == ((5, 0), (0, 5))
    assert sh.psi_inv(identity(2)) == (mpq(1),)


def test_shape_from_jordan_rotation():
    a, b = mpq(69282, 100000), mpq(2, 5)
    rj = real_jordan(
        ((a, -b, mpq(0)), (b, a, mpq(0)), (mpq(0), mpq(0), mpq(1)))
    )
    sh = shape_from_jordan(rj)
    assert sh.m == 2
    assert sh.pivots == ((0, 0), (1, 0))
    assert sh.psi((a, b)) == ((a, -b, 0), (b, a, 0), (0, 0, 1))


def test_psi_affine_law():
    rng = random.Random(7)
    shapes = [full_shape(2, 2), shape_from_jordan(exp_jordan())]
    for sh in shapes:
        for _ in range(20):
            u = tuple(mpq(rng.randint(-8, 8), 4) for _ in range(sh.m))
            v = tuple(mpq(rng.randint(-8, 8), 4) for _ in range(sh.m))
            t = mpq(rng.randint(0, 8), 8)
            mix = tuple(t * a + (1 - t) * b for a, b in zip(u, v))
            lhs = sh.psi(mix)
            rhs = mat_add(mat_scale(t, sh.psi(u)), mat_scale(1 - t, sh.psi(v)))
            assert lhs == rhs


def test_psi_inverse_roundtrip():
    rng = random.Random(8)
    for sh in (full_shape(3, 1), shape_from_jordan(exp_jordan())):
        for _ in range(30):
            m = tuple(mpq(rng.randint(-9, 9), 3) for _ in range(sh.m))
            assert sh.psi_inv(sh.psi(m)) == m


def test_shape_validation():
    with pytest.raises(ValueError):
        MatrixShape(2, 2, (identity(2), identity(2)), ((0, 1),))
    sh = full_shape(2, 2)
    with pytest.raises(ValueError):
        sh.psi((mpq(1),))
    with pytest.raises(ValueError):
        AbstractMatrix(sh, Polyhedron.top(3))


# ---------------------------------------------------------------- products


def test_matmul_stochastic_triangle():
    # {diag(1-m, m)} x {(1-n, n)^T} for m, n in [0,1]: the products
    # ((1-m)(1-n), mn) fill the triangle spanned by the generator products
    m1 = AbstractMatrix(
        full_shape(2, 2),
        Polyhedron.from_generators([(1, 0, 0, 0), (0, 0, 0, 1)]),
    )
    m2 = AbstractMatrix(
        full_shape(2, 1), Polyhedron.from_generators([(1, 0), (0, 1)])
    )
    out = abstract_matmul(m1, m2)
    assert (out.shape.rows, out.shape.cols) == (2, 1)
    assert out.params.equals(
        Polyhedron.from_generators([(0, 0), (1, 0), (0, 1)])
    )


def test_matmul_identity_neutral():
    rng = random.Random(11)
    ident = AbstractMatrix(
        full_shape(2, 2), Polyhedron.from_generators([(1, 0, 0, 1)])
    )
    m = random_abstract(rng, 2, 2, 4)
    assert abstract_matmul(ident, m).params.equals(m.params)
    assert abstract_matmul(m, ident).params.equals(m.params)


def test_matmul_exponential_box():
    # octagon abstraction of {diag-powers} applied to the box [1,3]x[0,2],
    # homogenized; expected set derived by hand from the generator products:
    # 8 products of the two parameter vertices with the box corners, plus
    # rays (1,0,0), (1,1,0), (3,1,0)
    sh = shape_from_jordan(exp_jordan())
    M = AbstractMatrix(
        sh,
        Polyhedron.from_generators(
            [(1, 0), (1, mpq(3, 4))], rays=[(1, 0), (1, 1)]
        ),
    )
    states = Polyhedron.from_generators([(1, 0, 1), (3, 0, 1), (1, 2, 1), (3, 2, 1)])
    out = abstract_matmul(M, AbstractMatrix(full_shape(3, 1), states))
    expected = Polyhedron.from_constraints(
        [
            (-1, 0, 1),  # x >= xi
            (0, -1, 0),  # y >= 0
            (-4, 4, -7),  # x - y >= -7/4 xi
            (0, 0, 1),
            (0, 0, -1),  # xi = 1
        ],
        [0, 0, 0, 1, -1],
    )
    assert out.params.equals(expected)


def test_matmul_halfline_scalars():
    m1 = AbstractMatrix(
        full_shape(1, 1),
        Polyhedron.from_generators([(1,)], rays=[(1,)]),
    )
    m2 = AbstractMatrix(
        full_shape(1, 1), Polyhedron.from_generators([(2,), (3,)])
    )
    out = abstract_matmul(m1, m2)
    assert out.params.equals(Polyhedron.from_constraints([(-1,)], [-2]))


def test_matmul_zero_ray_product_dropped():
    m1 = AbstractMatrix(
        full_shape(1, 2),
        Polyhedron.from_generators([(1, 0)], rays=[(0, 1)]),
    )
    m2 = AbstractMatrix(full_shape(2, 1), Polyhedron.from_generators([(1, 0)]))
    out = abstract_matmul(m1, m2)
    assert out.params.equals(Polyhedron.from_generators([(1,)]))
    assert out.params.rays == ()


def test_matmul_soundness_sampled():
    rng = random.Random(97)
    for _ in range(60):
        r, k, c = rng.randint(1, 3), rng.randint(1, 3), rng.randint(1, 2)
        m1 = random_abstract(rng, r, k, rng.randint(1, 4))
        m2 = random_abstract(rng, k, c, rng.randint(1, 4))
        out = abstract_matmul(m1, m2)
        for _ in range(8):
            u = convex_sample(rng, m1.params.vertices)
            v = convex_sample(rng, m2.params.vertices)
            w = flatten(mat_mul(unflatten(u, r, k), unflatten(v, k, c)))
            assert out.params.contains_point(w)


def test_matmul_exactness_vs_simplex():
    rng = random.Random(101)
    for _ in range(30):
        r, k, c = rng.randint(1, 3), rng.randint(1, 3), rng.randint(1, 2)
        m1 = random_abstract(rng, r, k, rng.randint(1, 4))
        m2 = random_abstract(rng, k, c, rng.randint(1, 4))
        out = abstract_matmul(m1, m2)
        pts = [
            flatten(mat_mul(unflatten(u, r, k), unflatten(v, k, c)))
            for u in m1.params.vertices
            for v in m2.params.vertices
        ]
        assert hull_points_equal(pts, out.params)


def test_matmul_cap_and_mismatch():
    rng = random.Random(3)
    m1 = random_abstract(rng, 2, 2, 3)
    m2 = random_abstract(rng, 2, 2, 3)
    with pytest.raises(GeneratorCapError):
        abstract_matmul(m1, m2, cap=8)
    with pytest.raises(ValueError):
        abstract_matmul(m1, random_abstract(rng, 3, 1, 2))


def test_matmul_empty_propagates():
    empty = AbstractMatrix(full_shape(2, 2), Polyhedron.bottom(4))
    m = AbstractMatrix(full_shape(2, 2), Polyhedron.from_generators([(1, 0, 0, 1)]))
    assert abstract_matmul(empty, m).is_empty()
    assert abstract_matmul(m, empty).is_empty()
    assert not abstract_matmul(m, m).is_empty()


# ---------------------------------------------------------------- states


def test_apply_to_states_refixes_homogeneous_row():
    M = AbstractMatrix(
        full_shape(2, 2),
        Polyhedron.from_generators([(1, 0, 0, 1), (1, 0, 0, 2)]),
    )
    X = Polyhedron.from_generators([(0, 1), (1, 1)])
    loose = apply_to_states(M, X)
    assert loose.equals(Polyhedron.from_box([(0, 1), (1, 2)]))
    fixed = apply_to_states(M, X, xi=1)
    assert fixed.equals(Polyhedron.from_generators([(0, 1), (1, 1)]))


def test_apply_to_states_empty():
    M = AbstractMatrix(full_shape(2, 2), Polyhedron.bottom(4))
    X = Polyhedron.from_generators([(0, 1)])
    assert apply_to_states(M, X, xi=1).is_empty()
    M2 = AbstractMatrix(
        full_shape(2, 2), Polyhedron.from_generators([(1, 0, 0, 1)])
    )
    assert apply_to_states(M2, Polyhedron.bottom(2), xi=1).is_empty()


def test_entry_polyhedron_membership():
    sh = shape_from_jordan(exp_jordan())
    M = AbstractMatrix(sh, Polyhedron.from_box([(0, 1), (0, 1)]))
    E = entry_polyhedron(M)
    assert E.dim == 9
    assert E.contains_point(flatten(sh.psi((mpq(0), mpq(0)))))
    assert E.contains_point(flatten(sh.psi((mpq(1, 2), mpq(1, 3)))))
    bad = [list(row) for row in sh.psi((mpq(1, 2), mpq(1, 2)))]
    bad[1][1] = mpq(2)  # constant band must stay 1
    assert not E.contains_point(flatten(bad))


# ---------------------------------------------------------------- conjugation


def test_conjugate_by_identity():
    sh = shape_from_jordan(exp_jordan())
    M = AbstractMatrix(sh, Polyhedron.from_box([(1, 2), (0, 1)]))
    out = conjugate(M, identity(3), identity(3))
    assert out.params.equals(entry_polyhedron(M))


def test_conjugate_rational_point():
    R = ((mpq(1), mpq(1)), (mpq(0), mpq(1)))
    Rinv = ((mpq(1), mpq(-1)), (mpq(0), mpq(1)))
    M = AbstractMatrix(
        full_shape(2, 2), Polyhedron.from_generators([(2, 0, 0, 3)])
    )
    out = conjugate(M, R, Rinv)
    assert out.params.equals(
        Polyhedron.from_generators([(2, -1, 0, 3)])
    )


def _conj_map(R, Rinv):
    """Flattened matrix of M |-> Rinv M R."""
    p = len(R)
    rows = []
    for i in range(p):
        for j in range(p):
            rows.append(
                tuple(Rinv[i][k] * R[l][j] for k in range(p) for l in range(p))
            )
    return tuple(rows)


def test_conjugate_rational_exactness():
    rng = random.Random(23)
    done = 0
    while done < 12:
        R = tuple(
            tuple(mpq(rng.randint(-3, 3)) for _ in range(2)) for _ in range(2)
        )
        det = R[0][0] * R[1][1] - R[0][1] * R[1][0]
        if det == 0:
            continue
        Rinv = (
            (R[1][1] / det, -R[0][1] / det),
            (-R[1][0] / det, R[0][0] / det),
        )
        M = random_abstract(rng, 2, 2, rng.randint(1, 4))
        if rng.random() < 0.3:
            M = AbstractMatrix(
                M.shape,
                Polyhedron.from_generators(
                    M.params.vertices, rays=[(1, 0, 0, 1)]
                ),
            )
        out = conjugate(M, R, Rinv)
        expected = entry_polyhedron(M).image_affine(_conj_map(R, Rinv))
        assert out.params.equals(expected)
        done += 1


def test_conjugate_preserves_char_poly():
    rng = random.Random(29)
    done = 0
    while done < 50:
        R = tuple(
            tuple(mpq(rng.randint(-3, 3)) for _ in range(2)) for _ in range(2)
        )
        det = R[0][0] * R[1][1] - R[0][1] * R[1][0]
        if det == 0:
            continue
        Rinv = (
            (R[1][1] / det, -R[0][1] / det),
            (-R[1][0] / det, R[0][0] / det),
        )
        pt = tuple(mpq(rng.randint(-4, 4)) for _ in range(4))
        M = AbstractMatrix(full_shape(2, 2), Polyhedron.from_generators([pt]))
        out = conjugate(M, R, Rinv)
        (img,) = out.params.vertices
        a = unflatten(pt, 2, 2)
        b = unflatten(img, 2, 2)
        assert a[0][0] + a[1][1] == b[0][0] + b[1][1]
        assert (
            a[0][0] * a[1][1] - a[0][1] * a[1][0]
            == b[0][0] * b[1][1] - b[0][1] * b[1][0]
        )
        done += 1


def _contains_exact(poly, vec):
    """Constraint check that tolerates QuadExt coordinates."""
    for row, rhs in poly.constraint_rows():
        acc = -mpq(rhs)
        for c, x in zip(row, vec):
            acc = x * mpq(c) + acc
        if scalar_sign(acc) > 0:
            return False
    return True


def test_conjugate_quadratic_basis_sound():
    # eigenvalues (1 +- sqrt(5))/2: R carries quadratic surds, the result
    # relaxes each irrational product entry to an interval corner family
    A = ((mpq(1), mpq(1)), (mpq(1), mpq(0)))
    rj = real_jordan(A)
    sh = shape_from_jordan(rj)
    assert sh.m == 2
    box = Polyhedron.from_box([(1, 2), (1, 2)])
    out = conjugate(AbstractMatrix(sh, box), rj.R, rj.R_inv)
    for mv in box.vertices:
        exact = mat_mul(rj.R_inv, mat_mul(sh.psi(mv), rj.R))
        assert _contains_exact(out.params, flatten(exact))


def test_conjugate_interval_basis_sound():
    w = Interval(mpq(63, 64), mpq(65, 64))
    one, zero = mpq(1), mpq(0)
    R = ((w, zero), (zero, one))
    Rinv = ((w, zero), (zero, one))  # contains the true inverse of some R
    M = AbstractMatrix(
        full_shape(2, 2),
        Polyhedron.from_generators([(2, 0, 0, 3)], rays=[(1, 0, 0, 0)]),
    )
    out = conjugate(M, R, Rinv)
    # R = I is a member of both enclosures, so the untransformed matrices
    # must survive, rays included
    assert out.params.contains_point((2, 0, 0, 3))
    assert out.params.contains_point((7, 0, 0, 3))


def test_conjugate_corner_cap():
    w = Interval(mpq(1, 2), mpq(2))
    R = ((w, w), (w, w))
    M = AbstractMatrix(
        full_shape(2, 2), Polyhedron.from_generators([(1, 2, 3, 4)])
    )
    with pytest.raises(GeneratorCapError):
        conjugate(M, R, R, cap=3)
