"""Convex polyhedra in dual representation over exact rationals.

The conversion engine is a double-description construction on homogeneous
cones: a polyhedron {x | Cx <= d} is lifted to the cone {(x,w) | -Cx + dw >= 0,
w >= 0}; rays with positive homogeneous coordinate are vertices, rays with
w = 0 are recession rays, and surviving lineality directions are lines.
The generator-to-constraint direction runs the same engine on the polar cone.

Everything is exact: cone rows and rays are integer vectors (normalized by
gcd), vertices are rational points.  No floating point enters any geometric
decision.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import gcd

from gmpy2 import mpq

from ._linalg import rref
from .numerics import INF, NINF, Interval, is_finite

# ------------------------------------------------------------------------
# integer vector utilities
# ------------------------------------------------------------------------


def _dot(a, b):
    s = 0
    for x, y in zip(a, b):
        s += x * y
    return s


def _vec_gcd(v):
    g = 0
    for x in v:
        g = gcd(g, abs(int(x)))
        if g == 1:
            return 1
    return g


def _norm_ray(v):
    g = _vec_gcd(v)
    if g > 1:
        return tuple(int(x) // g for x in v)
    return tuple(int(x) for x in v)


def _norm_line(v):
    v = _norm_ray(v)
    for x in v:
        if x != 0:
            return v if x > 0 else tuple(-y for y in v)
    return v


def _to_int_vec(row):
    """Rational row -> primitive integer row (same direction)."""
    row = [mpq(x) for x in row]
    scale = 1
    for x in row:
        d = int(x.denominator)
        scale = scale * d // gcd(scale, d)
    out = [int(x * scale) for x in row]
    g = _vec_gcd(out)
    if g > 1:
        out = [x // g for x in out]
    return tuple(out)


# ------------------------------------------------------------------------
# double description on cones
# ------------------------------------------------------------------------


class _Cone:
    """DD state: cone currently equal to span(lines) + cone(rays), with the
    rays extreme modulo the lineality.  Saturation masks are bitmasks over
    the constraints added so far."""

    __slots__ = ("dim", "nrows", "lines", "rays", "masks")

    def __init__(self, dim):
        self.dim = dim
        self.nrows = 0
        self.lines = [tuple(1 if i == j else 0 for j in range(dim)) for i in range(dim)]
        self.rays = []
        self.masks = []

    def add_constraint(self, a):
        """Intersect with {y | a . y >= 0}."""
        j = self.nrows
        self.nrows += 1
        # lineality break: some line leaves the constraint hyperplane
        for i, l in enumerate(self.lines):
            s = _dot(a, l)
            if s == 0:
                continue
            if s < 0:
                l = tuple(-x for x in l)
                s = -s
            del self.lines[i]
            new_lines = []
            for l2 in self.lines:
                t = _dot(a, l2)
                if t == 0:
                    new_lines.append(l2)
                else:
                    new_lines.append(_norm_line(tuple(s * x - t * y for x, y in zip(l2, l))))
            self.lines = new_lines
            new_rays, new_masks = [], []
            for r, m in zip(self.rays, self.masks):
                t = _dot(a, r)
                if t == 0:
                    new_rays.append(r)
                else:
                    new_rays.append(_norm_ray(tuple(s * x - t * y for x, y in zip(r, l))))
                new_masks.append(m | (1 << j))
            new_rays.append(l)
            new_masks.append((1 << j) - 1)  # saturates all earlier rows, not j
            self.rays, self.masks = new_rays, new_masks
            return
        # all lines stay; split rays by sign
        pos, zero, neg = [], [], []
        for idx, r in enumerate(self.rays):
            s = _dot(a, r)
            if s > 0:
                pos.append((idx, s))
            elif s == 0:
                zero.append(idx)
            else:
                neg.append((idx, s))
        if not neg:
            for idx in zero:
                self.masks[idx] |= 1 << j
            return
        keep_rays = [self.rays[i] for i, _ in pos] + [self.rays[i] for i in zero]
        keep_masks = [self.masks[i] for i, _ in pos] + [
            self.masks[i] | (1 << j) for i in zero
        ]
        all_masks = self.masks
        for ip, sp in pos:
            mp = all_masks[ip]
            for ineg, sn in neg:
                mn = all_masks[ineg]
                common = mp & mn
                if not self._adjacent(ip, ineg, common):
                    continue
                rp, rn = self.rays[ip], self.rays[ineg]
                newray = _norm_ray(tuple(sp * x - sn * y for x, y in zip(rn, rp)))
                # sp * rn - sn * rp: coefficient of rp is -sn > 0, of rn is sp > 0
                keep_rays.append(newray)
                keep_masks.append((common) | (1 << j))
        self.rays, self.masks = keep_rays, keep_masks

    def _adjacent(self, i1, i2, common):
        for i3, m3 in enumerate(self.masks):
            if i3 == i1 or i3 == i2:
                continue
            if common & ~m3 == 0:
                return False
        return True


def dd_cone(dim, rows):
    """Lines and extreme rays of {y | row . y >= 0 for all rows}."""
    cone = _Cone(dim)
    for row in rows:
        cone.add_constraint(row)
    return cone.lines, cone.rays


# ------------------------------------------------------------------------
# polyhedra
# ------------------------------------------------------------------------


def _canonical_basis(lines):
    """Unique lineality basis: rref over the rationals, re-normalized."""
    if not lines:
        return []
    rows, _ = rref([tuple(mpq(x) for x in l) for l in lines])
    return [_norm_line(_to_int_vec(r)) for r in rows]


def _reduce_mod_lines(vec, lines_rref_int):
    """Zero out the pivot coordinates of vec using the rref'd lines."""
    v = [mpq(x) for x in vec]
    for l in lines_rref_int:
        p = next(i for i, x in enumerate(l) if x != 0)
        if v[p] != 0:
            f = v[p] / l[p]
            v = [x - f * y for x, y in zip(v, l)]
    return v


class Polyhedron:
    """Convex polyhedron, dimension `dim`, with lazily completed dual
    representation.  Instances are immutable from the outside; completing a
    missing side mutates only caches.

    Raw generator input (e.g. from joins or affine images) may contain
    redundant members; the public accessors always return the canonical
    minimal side, raw data is used internally where the set alone matters."""

    __slots__ = ("dim", "_cons", "_gens", "_gens_min")

    def __init__(self, dim, cons=None, gens=None):
        if cons is None and gens is None:
            raise ValueError("need at least one representation")
        self.dim = dim
        self._cons = cons
        self._gens = gens
        self._gens_min = None

    # -------------------------------------------------- constructors

    @staticmethod
    def from_constraints(rows, rhs, dim=None):
        rows = [tuple(mpq(x) for x in r) for r in rows]
        rhs = [mpq(b) for b in rhs]
        if dim is None:
            if not rows:
                raise ValueError("dimension required for unconstrained polyhedron")
            dim = len(rows[0])
        cons = []
        for r, b in zip(rows, rhs):
            iv = _to_int_vec(tuple(r) + (b,))
            cons.append((iv[:-1], iv[-1]))
        return Polyhedron(dim, cons=tuple(cons))

    @staticmethod
    def from_generators(vertices, rays=(), lines=(), dim=None):
        vertices = sorted(set(tuple(mpq(x) for x in v) for v in vertices))
        rays = sorted(set(_norm_ray(_to_int_vec(r)) for r in rays))
        lines = sorted(set(_norm_line(_to_int_vec(l)) for l in lines))
        if dim is None:
            for g in (*vertices, *rays, *lines):
                dim = len(g)
                break
            else:
                raise ValueError("dimension required for empty generator list")
        return Polyhedron(dim, gens=(tuple(vertices), tuple(rays), tuple(lines)))

    @staticmethod
    def top(dim):
        return Polyhedron.from_constraints([], [], dim=dim)

    @staticmethod
    def bottom(dim):
        return Polyhedron.from_generators([], dim=dim)

    @staticmethod
    def from_box(bounds):
        """bounds: list of (lo, hi); entries may be -inf/+inf."""
        rows, rhs = [], []
        dim = len(bounds)
        for i, (lo, hi) in enumerate(bounds):
            if lo != NINF:
                rows.append(tuple(mpq(-1 if j == i else 0) for j in range(dim)))
                rhs.append(-mpq(lo))
            if hi != INF:
                rows.append(tuple(mpq(1 if j == i else 0) for j in range(dim)))
                rhs.append(mpq(hi))
        return Polyhedron.from_constraints(rows, rhs, dim=dim)

    # -------------------------------------------------- representation access

    def constraint_rows(self):
        if self._cons is None:
            self._cons = self._gens_to_cons(self._raw_gens())
        return self._cons

    def _raw_gens(self):
        """Some generator set, possibly redundant; cheap when raw input exists."""
        if self._gens is not None:
            return self._gens
        return self.generator_tuple()

    def generator_tuple(self):
        """Canonical minimal generators (vertices, rays, lines)."""
        if self._gens_min is None:
            if self._cons is None:
                self._cons = self._gens_to_cons(self._gens)
            self._gens_min = self._cons_to_gens()
        return self._gens_min

    @property
    def vertices(self):
        return self.generator_tuple()[0]

    @property
    def rays(self):
        return self.generator_tuple()[1]

    @property
    def lines(self):
        return self.generator_tuple()[2]

    def _cons_to_gens(self):
        p = self.dim
        rows = [tuple(-x for x in a) + (b,) for a, b in self._cons]
        rows.append(tuple(0 for _ in range(p)) + (1,))
        lines, rays = dd_cone(p + 1, rows)
        verts, prays = [], []
        for r in rays:
            if r[-1] > 0:
                w = mpq(r[-1])
                verts.append(tuple(mpq(x) / w for x in r[:-1]))
            else:
                prays.append(_norm_ray(r[:-1]))
        plines = [_norm_line(l[:-1]) for l in lines]
        if not verts:
            return ((), (), ())
        lr = _canonical_basis(plines)
        prays = sorted(set(_norm_ray(_to_int_vec(_reduce_mod_lines(r, lr))) for r in prays))
        verts = sorted(set(tuple(_reduce_mod_lines(v, lr)) for v in verts))
        return (tuple(verts), tuple(prays), tuple(lr))

    def _gens_to_cons(self, gens):
        verts, rays, lines = gens
        p = self.dim
        if not verts:
            return (((0,) * p, mpq(-1)),)
        rows = []
        for v in verts:
            rows.append(_to_int_vec(tuple(v) + (mpq(1),)))
        for r in rays:
            rows.append(tuple(r) + (0,))
        for l in lines:
            rows.append(tuple(l) + (0,))
            rows.append(tuple(-x for x in l) + (0,))
        clines, crays = dd_cone(p + 1, rows)
        lr = _canonical_basis(clines)
        cons = []
        for y in crays:
            y = _norm_ray(_to_int_vec(_reduce_mod_lines(y, lr)))
            c, c0 = y[:-1], y[-1]
            if any(c):
                cons.append((tuple(-x for x in c), mpq(c0)))
        for y in lr:
            c, c0 = y[:-1], y[-1]
            if any(c):
                cons.append((tuple(-x for x in c), mpq(c0)))
                cons.append((tuple(x for x in c), mpq(-c0)))
        return tuple(sorted(set((tuple(int(x) for x in a), mpq(b)) for a, b in cons),
                            key=lambda ab: (ab[0], ab[1])))

    # -------------------------------------------------- predicates

    def is_empty(self) -> bool:
        return not self._raw_gens()[0]

    def contains_point(self, x) -> bool:
        x = [mpq(v) for v in x]
        return all(_dot(a, x) <= b for a, b in self.constraint_rows())

    def includes(self, other: "Polyhedron") -> bool:
        """self >= other as sets."""
        if self.dim != other.dim:
            raise ValueError("dimension mismatch")
        verts, rays, lines = other._raw_gens()
        if not verts:
            return True
        cons = self.constraint_rows()
        for a, b in cons:
            for v in verts:
                if _dot(a, v) > b:
                    return False
            for r in rays:
                if _dot(a, r) > 0:
                    return False
            for l in lines:
                if _dot(a, l) != 0:
                    return False
        return True

    def equals(self, other: "Polyhedron") -> bool:
        return self.includes(other) and other.includes(self)

    # -------------------------------------------------- lattice / transformers

    def meet(self, other: "Polyhedron") -> "Polyhedron":
        if self.dim != other.dim:
            raise ValueError("dimension mismatch")
        return Polyhedron(self.dim, cons=tuple(self.constraint_rows()) + tuple(other.constraint_rows()))

    def join(self, other: "Polyhedron") -> "Polyhedron":
        """Convex hull of the union."""
        if self.dim != other.dim:
            raise ValueError("dimension mismatch")
        if self.is_empty():
            return other
        if other.is_empty():
            return self
        v1, r1, l1 = self._raw_gens()
        v2, r2, l2 = other._raw_gens()
        return Polyhedron.from_generators(v1 + v2, r1 + r2, l1 + l2, dim=self.dim)

    def meet_constraint(self, row, rhs) -> "Polyhedron":
        iv = _to_int_vec(tuple(row) + (mpq(rhs),))
        return Polyhedron(self.dim, cons=tuple(self.constraint_rows()) + ((iv[:-1], mpq(iv[-1])),))

    def image_affine(self, A, b=None) -> "Polyhedron":
        """Exact image {Ax + b | x in self}; A may be rectangular."""
        out_dim = len(A)
        if b is None:
            b = [mpq(0)] * out_dim
        A = [tuple(mpq(x) for x in row) for row in A]
        b = [mpq(x) for x in b]
        verts, rays, lines = self._raw_gens()
        if not verts:
            return Polyhedron.bottom(out_dim)
        nv = [tuple(_dot(row, v) + bb for row, bb in zip(A, b)) for v in verts]
        nr = []
        for r in rays:
            img = tuple(_dot(row, r) for row in A)
            if any(img):
                nr.append(img)
        nl = []
        for l in lines:
            img = tuple(_dot(row, l) for row in A)
            if any(img):
                nl.append(img)
        return Polyhedron.from_generators(nv, nr, nl, dim=out_dim)

    def project_out(self, drop) -> "Polyhedron":
        drop = set(drop)
        keep = [i for i in range(self.dim) if i not in drop]
        verts, rays, lines = self._raw_gens()
        if not verts:
            return Polyhedron.bottom(len(keep))
        sel = lambda g: tuple(g[i] for i in keep)
        nr = [sel(r) for r in rays if any(sel(r))]
        nl = [sel(l) for l in lines if any(sel(l))]
        return Polyhedron.from_generators([sel(v) for v in verts], nr, nl, dim=len(keep))

    def bounding_box(self):
        """Componentwise interval hull; None when empty."""
        verts, rays, lines = self._raw_gens()
        if not verts:
            return None
        out = []
        for i in range(self.dim):
            lo = min(v[i] for v in verts)
            hi = max(v[i] for v in verts)
            for r in rays:
                if r[i] > 0:
                    hi = INF
                elif r[i] < 0:
                    lo = NINF
            for l in lines:
                if l[i] != 0:
                    lo, hi = NINF, INF
            out.append(Interval(lo, hi))
        return out

    def sup_of(self, row):
        """sup of row . x over the polyhedron (-inf when empty)."""
        row = [mpq(x) for x in row]
        verts, rays, lines = self._raw_gens()
        if not verts:
            return NINF
        for r in rays:
            if _dot(row, r) > 0:
                return INF
        for l in lines:
            if _dot(row, l) != 0:
                return INF
        return max(_dot(row, v) for v in verts)

    def widen(self, other: "Polyhedron") -> "Polyhedron":
        """Classical widening: keep the constraints of self that other
        satisfies.  Assumes self <= other."""
        if self.is_empty():
            return other
        kept = []
        overts, orays, olines = other._raw_gens()
        for a, b in self.minimized_constraints():
            ok = all(_dot(a, v) <= b for v in overts)
            ok = ok and all(_dot(a, r) <= 0 for r in orays)
            ok = ok and all(_dot(a, l) == 0 for l in olines)
            if ok:
                kept.append((a, b))
        return Polyhedron(self.dim, cons=tuple(kept))

    # -------------------------------------------------- canonical forms

    def minimized_constraints(self):
        """Irredundant constraint system derived from the minimal generators."""
        self._cons = self._gens_to_cons(self.generator_tuple())
        return self._cons

    def canonical(self) -> "Polyhedron":
        """Fresh polyhedron with both sides minimal and sorted."""
        gens = self.generator_tuple()
        q = Polyhedron(self.dim, gens=gens)
        q._gens_min = gens
        q._cons = self._gens_to_cons(gens)
        return q


# ------------------------------------------------------------------------
# template polyhedra
# ------------------------------------------------------------------------


@dataclass(frozen=True)
class TemplatePolyhedron:
    """Fixed template rows T with upper bounds u: {x | T x <= u}.

    Lower bounds are encoded as negated rows; bounds may be +inf."""

    rows: tuple
    bounds: tuple

    def __post_init__(self):
        if len(self.rows) != len(self.bounds):
            raise ValueError("row/bound mismatch")

    @property
    def dim(self):
        return len(self.rows[0]) if self.rows else 0

    def to_polyhedron(self, dim=None) -> Polyhedron:
        dim = self.dim if dim is None else dim
        rows = [r for r, u in zip(self.rows, self.bounds) if is_finite(u)]
        rhs = [u for u in self.bounds if is_finite(u)]
        return Polyhedron.from_constraints(rows, rhs, dim=dim)

    def canonicalize(self) -> "TemplatePolyhedron":
        """Tighten every bound to the sup over the concretization."""
        return template_abstraction(self.to_polyhedron(), self.rows)

    def is_empty(self) -> bool:
        return self.to_polyhedron().is_empty()

    def bound_for(self, row):
        row = tuple(mpq(x) for x in row)
        for r, u in zip(self.rows, self.bounds):
            if tuple(mpq(x) for x in r) == row:
                return u
        raise KeyError(f"row {row} not in template")


def template_abstraction(P: Polyhedron, T) -> TemplatePolyhedron:
    """Componentwise-least template element containing P."""
    rows = tuple(tuple(mpq(x) for x in r) for r in T)
    if P.is_empty():
        return TemplatePolyhedron(rows, tuple(NINF for _ in rows))
    return TemplatePolyhedron(rows, tuple(P.sup_of(r) for r in rows))


def make_logahedra_template(pairs, ell, dim):
    """Rows +-alpha m_i +- (1-alpha) m_j over the given index pairs with
    alpha = k/2^ell, plus all unit rows.  Rows are normalized to primitive
    integer direction and deduplicated."""
    rows = set()
    for i in range(dim):
        e = [0] * dim
        e[i] = 1
        rows.add(tuple(e))
        e[i] = -1
        rows.add(tuple(e))
    denom = 1 << ell
    for (i, j) in pairs:
        for k in range(denom + 1):
            for si in (1, -1):
                for sj in (1, -1):
                    r = [mpq(0)] * dim
                    r[i] = si * mpq(k, denom)
                    r[j] = sj * mpq(denom - k, denom)
                    if r[i] == 0 and r[j] == 0:
                        continue
                    rows.add(_to_int_vec(r))
    return tuple(sorted(rows))


def octagon_template(dim):
    return make_logahedra_template([(i, j) for i in range(dim) for j in range(i + 1, dim)], 1, dim)


# ------------------------------------------------------------------------
# linear loops
# ------------------------------------------------------------------------


@dataclass(frozen=True)
class LinearLoop:
    """while (G x <= h) { x := A x + b }"""

    G: tuple
    h: tuple
    A: tuple
    b: tuple

    def __post_init__(self):
        p = len(self.A)
        if any(len(row) != p for row in self.A) or len(self.b) != p:
            raise ValueError("body dimension mismatch")
        if any(len(row) != p for row in self.G) or len(self.G) != len(self.h):
            raise ValueError("guard dimension mismatch")

    @staticmethod
    def make(G, h, A, b):
        return LinearLoop(
            tuple(tuple(mpq(x) for x in row) for row in G),
            tuple(mpq(x) for x in h),
            tuple(tuple(mpq(x) for x in row) for row in A),
            tuple(mpq(x) for x in b),
        )

    @property
    def dim(self):
        return len(self.A)

    def guard_polyhedron(self) -> Polyhedron:
        if not self.G:
            return Polyhedron.top(self.dim)
        return Polyhedron.from_constraints(self.G, self.h, dim=self.dim)

    def step(self, x):
        """One concrete execution step (exact)."""
        x = [mpq(v) for v in x]
        return tuple(_dot(row, x) + bb for row, bb in zip(self.A, self.b))

    def guard_holds(self, x) -> bool:
        x = [mpq(v) for v in x]
        return all(_dot(g, x) <= hh for g, hh in zip(self.G, self.h))
