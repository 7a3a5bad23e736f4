"""Abstract matrices: polyhedra over the free entries of a matrix family.

A MatrixShape fixes how the entries of a p x q matrix move together: an
offset matrix B0 holds the constant entries and each parameter m_i drives
one basis matrix B_i, so the family is the affine map
psi(m) = B0 + sum_i m_i B_i.  Shapes either give every entry its own
parameter (full_shape) or are read off a real Jordan form, where all
entries sharing one power coefficient function collapse to a single
parameter.  An AbstractMatrix pairs a shape with a parameter polyhedron
and stands for the matrix set {psi(m) | m in P}.

The product of two such sets is over-approximated by the convex hull of
the pairwise products of their generator matrices: vertex x vertex
products become vertices, everything touching a ray becomes a ray.  The
vertex part is exact; the cone part is sound because psi is affine and
matrix multiplication is bilinear.  Applying a set to a polyhedron of
state vectors is the one-column special case.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product as iproduct

from gmpy2 import mpq

from ._linalg import mat_mul
from .jordan import shape_groups
from .numerics import Interval, QuadExt, scalar_to_interval
from .polyhedra import Polyhedron

MATMUL_GENERATOR_CAP = 20000


class GeneratorCapError(RuntimeError):
    """A product would exceed the generator budget."""


@dataclass(frozen=True)
class MatrixShape:
    """Affine family psi(m) = B0 + sum m_i B_i of rows x cols matrices.

    basis holds (B0, B1, ..., Bm) as tuples of row tuples.  Every B_i with
    i >= 1 carries a pivot entry equal to 1 that no other basis matrix
    uses, so psi is injective and psi_inv is plain entry lookup.
    """

    rows: int
    cols: int
    basis: tuple
    pivots: tuple

    def __post_init__(self):
        if len(self.basis) != len(self.pivots) + 1:
            raise ValueError("need one basis matrix per parameter plus the offset")
        for b, (i, j) in zip(self.basis[1:], self.pivots):
            if b[i][j] != 1:
                raise ValueError("pivot entries must equal 1")

    @property
    def m(self):
        return len(self.pivots)

    def _combine(self, mvec, with_offset):
        if len(mvec) != self.m:
            raise ValueError("parameter vector has the wrong length")
        out = [
            [x if with_offset else mpq(0) for x in row] for row in self.basis[0]
        ]
        for c, b in zip(mvec, self.basis[1:]):
            if c == 0:
                continue
            for i in range(self.rows):
                row = b[i]
                for j in range(self.cols):
                    if row[j]:
                        out[i][j] += c * row[j]
        return tuple(tuple(row) for row in out)

    def psi(self, mvec):
        return self._combine(mvec, True)

    def psi_lin(self, mvec):
        """Linear part only; sends parameter-space rays to matrix rays."""
        return self._combine(mvec, False)

    def psi_inv(self, mat):
        return tuple(mat[i][j] - self.basis[0][i][j] for i, j in self.pivots)


def full_shape(rows, cols):
    """Every entry its own parameter, row-major, zero offset."""
    zero = tuple(tuple(mpq(0) for _ in range(cols)) for _ in range(rows))
    basis = [zero]
    pivots = []
    for i in range(rows):
        for j in range(cols):
            b = [[mpq(0)] * cols for _ in range(rows)]
            b[i][j] = mpq(1)
            basis.append(tuple(tuple(r) for r in b))
            pivots.append((i, j))
    return MatrixShape(rows, cols, tuple(basis), tuple(pivots))


def shape_from_jordan(form):
    """Shape of the powers of a real Jordan form.

    Entries whose coefficient functions coincide share one parameter with
    the recorded signs; entries that stay constant across all powers go
    into the offset.  The pivot of each group is its first +1 entry.
    """
    const, groups = shape_groups(form)
    p = form.dim
    b0 = [[mpq(0)] * p for _ in range(p)]
    for (i, j), scale in const:
        b0[i][j] = mpq(scale)
    basis = [tuple(tuple(r) for r in b0)]
    pivots = []
    for _, members in groups:
        b = [[mpq(0)] * p for _ in range(p)]
        for (i, j), sign in members:
            b[i][j] = mpq(sign)
        basis.append(tuple(tuple(r) for r in b))
        pivots.append(next(pos for pos, sign in members if sign == 1))
    return MatrixShape(p, p, tuple(basis), tuple(pivots))


@dataclass(frozen=True)
class AbstractMatrix:
    """The matrix set {psi(m) | m in params}."""

    shape: MatrixShape
    params: Polyhedron

    def __post_init__(self):
        if self.params.dim != self.shape.m:
            raise ValueError("parameter polyhedron dimension mismatch")

    def is_empty(self):
        return self.params.is_empty()

    def generator_matrices(self):
        """(vertex matrices, ray matrices); lines split into +-rays so the
        pair spans the same set under hull-plus-cone."""
        verts = [self.shape.psi(v) for v in self.params.vertices]
        rays = [self.shape.psi_lin(r) for r in self.params.rays]
        for line in self.params.lines:
            rays.append(self.shape.psi_lin(line))
            rays.append(self.shape.psi_lin(tuple(-x for x in line)))
        return verts, rays


def _flat(mat):
    return tuple(x for row in mat for x in row)


def entry_polyhedron(m):
    """The same set written over all rows*cols entries, row-major.  Useful
    for comparing sets that live on different shapes."""
    sh = m.shape
    positions = [(i, j) for i in range(sh.rows) for j in range(sh.cols)]
    lin = tuple(
        tuple(sh.basis[k + 1][i][j] for k in range(sh.m)) for i, j in positions
    )
    offset = tuple(sh.basis[0][i][j] for i, j in positions)
    return m.params.image_affine(lin, offset)


def abstract_matmul(m1, m2, cap=MATMUL_GENERATOR_CAP):
    """Sound product of two abstract matrices on the full result shape.

    Generators multiply pairwise: vertex products span the hull, products
    involving a ray span the recession cone.  Zero ray products vanish
    from the cone and are dropped.
    """
    if m1.shape.cols != m2.shape.rows:
        raise ValueError("inner dimensions differ")
    shape = full_shape(m1.shape.rows, m2.shape.cols)
    if m1.is_empty() or m2.is_empty():
        return AbstractMatrix(shape, Polyhedron.bottom(shape.m))
    v1, r1 = m1.generator_matrices()
    v2, r2 = m2.generator_matrices()
    count = (len(v1) + len(r1)) * (len(v2) + len(r2))
    if count > cap:
        raise GeneratorCapError(f"{count} product generators exceed cap {cap}")
    verts = [_flat(mat_mul(a, b)) for a in v1 for b in v2]
    rays = []
    for pool_a, pool_b in ((v1, r2), (r1, v2), (r1, r2)):
        for a, b in iproduct(pool_a, pool_b):
            f = _flat(mat_mul(a, b))
            if any(f):
                rays.append(f)
    return AbstractMatrix(
        shape, Polyhedron.from_generators(verts, rays=rays, dim=shape.m)
    )


def apply_to_states(m, states, xi=None, cap=MATMUL_GENERATOR_CAP):
    """Image of a state polyhedron under every matrix of the set.

    xi, when given, is the index of the homogenizing coordinate; the
    result is cut back to xi = 1 because a product of generator matrices
    need not preserve that row even when every member matrix does.
    """
    col = AbstractMatrix(full_shape(m.shape.cols, 1), states)
    out = abstract_matmul(m, col, cap=cap).params
    if xi is not None:
        row = tuple(1 if k == xi else 0 for k in range(out.dim))
        out = out.meet_constraint(row, mpq(1))
        out = out.meet_constraint(tuple(-x for x in row), mpq(-1))
    return out


def _basis_mode(a, b):
    """exact | quad | interval, by the scalar kinds present in the basis."""
    fields = set()
    for mat in (a, b):
        for row in mat:
            for x in row:
                if isinstance(x, Interval):
                    return "interval"
                if isinstance(x, QuadExt):
                    fields.add(x.d)
    if not fields:
        return "exact"
    # products across distinct quadratic fields leave both; enclose instead
    return "quad" if len(fields) == 1 else "interval"


def _lift_interval(mat, prec):
    return tuple(
        tuple(scalar_to_interval(x, prec) for x in row) for row in mat
    )


def _corner_points(entries, budget):
    """All corner selections of the enclosed entries; exact entries stay."""
    base, wide = [], []
    for idx, x in enumerate(entries):
        if isinstance(x, Interval):
            if x.lo == x.hi:
                base.append(mpq(x.lo))
            else:
                base.append(None)
                wide.append((idx, x))
        elif isinstance(x, QuadExt):  # b == 0 was lowered earlier
            raise AssertionError("unlowered quadratic entry")
        else:
            base.append(mpq(x))
    if len(wide) >= budget.bit_length() + 32 or (1 << len(wide)) > budget:
        raise GeneratorCapError(
            f"{1 << len(wide)} corner selections exceed the generator budget"
        )
    if not wide:
        return [tuple(base)]
    points = []
    for pick in iproduct(*(((i, iv.lo), (i, iv.hi)) for i, iv in wide)):
        v = list(base)
        for i, val in pick:
            v[i] = mpq(val)
        points.append(tuple(v))
    return points


def conjugate(m, basis, basis_inv, prec=128, cap=MATMUL_GENERATOR_CAP):
    """The set {basis_inv psi(m) basis} on the full square shape.

    Exact over the rationals (a similarity is linear in its argument, so
    generators map to generators).  Quadratic-surd entries multiply out in
    their field first; any product entry that stays irrational, and every
    entry when the basis itself is an enclosure, widens to an interval
    whose corner selections become the generators.  Corners are sound for
    vertices and rays alike: a box is the hull of its corners, so the cone
    of any enclosed ray lies in the cone of the corner rays.
    """
    p = m.shape.rows
    if m.shape.cols != p or len(basis) != p or len(basis_inv) != p:
        raise ValueError("conjugation needs square matrices of one size")
    shape = full_shape(p, p)
    if m.is_empty():
        return AbstractMatrix(shape, Polyhedron.bottom(shape.m))
    mode = _basis_mode(basis, basis_inv)
    if mode == "interval":
        basis = _lift_interval(basis, prec)
        basis_inv = _lift_interval(basis_inv, prec)
    verts, rays = m.generator_matrices()
    out = {"v": [], "r": []}
    budget = cap
    for kind, mats in (("v", verts), ("r", rays)):
        for gen in mats:
            if mode == "interval":
                gen = _lift_interval(gen, prec)
            prod = _flat(mat_mul(basis_inv, mat_mul(gen, basis)))
            if mode == "exact":
                points = [tuple(mpq(x) for x in prod)]
            else:
                if mode == "quad":
                    prod = tuple(
                        x.a
                        if isinstance(x, QuadExt) and x.b == 0
                        else scalar_to_interval(x, prec)
                        if isinstance(x, QuadExt)
                        else x
                        for x in prod
                    )
                points = _corner_points(prod, budget)
            budget -= len(points)
            if budget < 0:
                raise GeneratorCapError(
                    f"conjugated generators exceed cap {cap}"
                )
            out[kind].extend(points)
    rays_out = [r for r in out["r"] if any(r)]
    return AbstractMatrix(
        shape,
        Polyhedron.from_generators(out["v"], rays=rays_out, dim=shape.m),
    )
