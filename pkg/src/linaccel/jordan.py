"""Real Jordan normal form with certified arithmetic.

A rational square matrix is decomposed as A = R^-1 J R where J is block
diagonal with banded blocks for real eigenvalues and 2x2 rotation-scaling
cells for complex conjugate pairs.  The closed form of J^n is then a matrix
of coefficient functions

    phi[lam, theta, r, k](n) = C(n, k) * lam^(n-k) * cos((n-k)theta - r*pi/2)

one per in-block position, which downstream modules bound over ranges of n.

Two certification modes exist.  Exact mode covers spectra whose eigenvalues
are rational or lie in a single real quadratic extension (including complex
pairs a +- b*i with a, b in that extension); everything is verified by exact
reconstruction.  Residual mode covers square-free totally real spectra via
Sturm isolation and interval eigenvectors, certified by entrywise enclosure
of A inside the interval product R^-1 J R.  Anything else is rejected with
an error pointing at the user-supplied decomposition escape hatch.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import gmpy2
from gmpy2 import mpq

from . import _linalg as la
from .numerics import (
    Interval,
    QuadExt,
    binom,
    interval_atan2,
    interval_log,
    interval_sqrt,
    pi_interval,
    quadext,
    scalar_sign,
    scalar_to_interval,
    squarefree_decompose,
)


class JordanError(Exception):
    pass


_DIVISOR_CAP = 20000
_TRIAL_BOUND = 100000


# ------------------------------------------------------------------------
# dense polynomials over mpq, coefficient lists low degree first
# ------------------------------------------------------------------------


def _pstrip(f):
    while f and f[-1] == 0:
        f.pop()
    return f


def _pdeg(f):
    return len(f) - 1


def _pmul(f, g):
    out = [mpq(0)] * (len(f) + len(g) - 1)
    for i, a in enumerate(f):
        if a == 0:
            continue
        for j, b in enumerate(g):
            out[i + j] += a * b
    return _pstrip(out)


def _pdivmod(f, g):
    f = list(f)
    q = [mpq(0)] * max(len(f) - len(g) + 1, 1)
    lead = g[-1]
    while len(f) >= len(g) and any(x != 0 for x in f):
        if f[-1] == 0:
            f.pop()
            continue
        d = len(f) - len(g)
        c = f[-1] / lead
        q[d] = c
        for i, b in enumerate(g):
            f[d + i] -= c * b
        f.pop()
    return _pstrip(q), _pstrip(f)


def _pmonic(f):
    lead = f[-1]
    return [c / lead for c in f]


def _pgcd(f, g):
    a, b = list(f), list(g)
    while b:
        a, b = b, _pdivmod(a, b)[1]
    return _pmonic(a) if a else [mpq(1)]


def _pderiv(f):
    return _pstrip([mpq(i) * c for i, c in enumerate(f)][1:])


def _psub(f, g):
    n = max(len(f), len(g))
    return _pstrip(
        [
            (f[i] if i < len(f) else mpq(0)) - (g[i] if i < len(g) else mpq(0))
            for i in range(n)
        ]
    )


def _peval(f, x):
    acc = mpq(0)
    for c in reversed(f):
        acc = acc * x + c
    return acc


def _yun(f):
    """Square-free decomposition of a monic f: list of (factor, multiplicity)."""
    df = _pderiv(f)
    g = _pgcd(f, df)
    if _pdeg(g) == 0:
        return [(list(f), 1)]
    out = []
    w = _pdivmod(f, g)[0]
    y = _pdivmod(df, g)[0]
    i = 1
    while _pdeg(w) > 0:
        z = _psub(y, _pderiv(w))
        gi = _pgcd(w, z) if z else _pmonic(list(w))
        if _pdeg(gi) > 0:
            out.append((gi, i))
        w = _pdivmod(w, gi)[0]
        y = _pdivmod(z, gi)[0] if z else []
        i += 1
    return out


def char_poly(A):
    """Monic characteristic polynomial det(xI - A), low degree first."""
    p = len(A)
    ident = la.identity(p)
    c = [mpq(0)] * (p + 1)
    c[p] = mpq(1)
    M = A
    c[p - 1] = -_trace(A)
    for k in range(2, p + 1):
        M = la.mat_mul(A, la.mat_add(M, la.mat_scale(c[p - k + 1], ident)))
        c[p - k] = -_trace(M) / k
    return c


def _trace(m):
    return sum((m[i][i] for i in range(1, len(m))), m[0][0])


# ------------------------------------------------------------------------
# Sturm sequences and root isolation
# ------------------------------------------------------------------------


def _sturm_chain(f):
    chain = [list(f), _pderiv(f)]
    while _pdeg(chain[-1]) > 0:
        rem = _pdivmod(chain[-2], chain[-1])[1]
        if not rem:
            break
        chain.append([-c for c in rem])
    return [c for c in chain if c]


def _sign_changes(chain, x):
    signs = []
    for f in chain:
        v = _peval(f, x)
        if v != 0:
            signs.append(1 if v > 0 else -1)
    return sum(1 for a, b in zip(signs, signs[1:]) if a != b)


def _count_roots(chain, a, b):
    return _sign_changes(chain, a) - _sign_changes(chain, b)


def _root_bound(f):
    lead = f[-1]
    return mpq(1) + max(abs(c / lead) for c in f[:-1]) if len(f) > 1 else mpq(1)


def _isolate_roots(f):
    """Exact rational roots hit by bisection midpoints, plus disjoint boxes
    (g, lo, hi) isolating one root of g each, with g(lo)g(hi) < 0.  The box
    polynomial g is f with any exact roots already divided out."""
    chain = _sturm_chain(f)
    bound = _root_bound(f) + 1
    exact, boxes = [], []
    work = [(-bound, bound)]
    while work:
        lo, hi = work.pop()
        n = _count_roots(chain, lo, hi)
        if n == 0:
            continue
        if n == 1 and _peval(f, lo) * _peval(f, hi) < 0:
            boxes.append((f, lo, hi))
            continue
        mid = (lo + hi) / 2
        if _peval(f, mid) == 0:
            f2 = _pdivmod(f, [-mid, mpq(1)])[0]
            sub_exact, sub_boxes = _isolate_roots(f2)
            return [mid] + sub_exact, sub_boxes
        work.append((lo, mid))
        work.append((mid, hi))
    return exact, boxes


def _refine_root(f, lo, hi, width):
    flo = _peval(f, lo)
    while hi - lo > width:
        mid = (lo + hi) / 2
        fm = _peval(f, mid)
        if fm == 0:
            # cannot happen for factors with no rational roots; nudge
            mid = lo + (hi - lo) * mpq(13, 31)
            fm = _peval(f, mid)
        if (fm > 0) == (flo > 0):
            lo = mid
            flo = fm
        else:
            hi = mid
    return lo, hi


def _divisors(n, cap=_DIVISOR_CAP):
    """Divisors of |n| from small-prime factorization; None when n resists."""
    n = abs(int(n))
    if n == 0:
        return None
    fact = {}
    for p in range(2, _TRIAL_BOUND):
        if p * p > n:
            break
        while n % p == 0:
            fact[p] = fact.get(p, 0) + 1
            n //= p
    if n > 1:
        r = gmpy2.isqrt(n)
        if r * r == n and r < _TRIAL_BOUND:
            fact[int(r)] = fact.get(int(r), 0) + 2
        else:
            fact[n] = fact.get(n, 0) + 1
    divs = [1]
    for p, e in fact.items():
        divs = [d * p**i for d in divs for i in range(e + 1)]
        if len(divs) > cap:
            return None
    return sorted(divs)


def _rational_roots(g):
    """All rational roots of square-free monic g plus the deflated remainder."""
    den = 1
    for c in g:
        den = gmpy2.lcm(den, c.denominator)
    lead = int(g[-1] * den)  # integer leading coefficient after clearing
    qs = _divisors(lead)
    exact, boxes = _isolate_roots(g)
    roots = list(exact)
    if qs:
        width = mpq(1, 2 * lead * lead)
        for gb, lo, hi in boxes:
            lo, hi = _refine_root(gb, lo, hi, width)
            for q in qs:
                p = (q * lo).__floor__() + 1
                cand = mpq(p, q)
                if lo < cand < hi and _peval(g, cand) == 0:
                    roots.append(cand)
                    break
    h = list(g)
    for r in roots:
        h = _pdivmod(h, [-r, mpq(1)])[0]
    return sorted(roots), h


def _rat_sqrt(v):
    """Exact square root of a nonnegative mpq, or None."""
    if v < 0:
        return None
    n, d = v.numerator, v.denominator
    t = n * d
    r = gmpy2.isqrt(t)
    return mpq(r, d) if r * r == t else None


def _field_sqrt(v):
    """Exact sqrt of v >= 0 as mpq or QuadExt; None when outside both."""
    if isinstance(v, QuadExt):
        # (x + y sqrt d)^2 = v needs x^2 + y^2 d = a and 2xy = b
        a, b, d = v.a, v.b, v.d
        t = _rat_sqrt(a * a - b * b * d)
        if t is None:
            return None
        for s in (t, -t):
            x = _rat_sqrt((a + s) / 2)
            if x:
                y = b / (2 * x)
                cand = quadext(x, y, d)
                if cand * cand == v and scalar_sign(cand) > 0:
                    return cand
        return None
    r = _rat_sqrt(v)
    if r is not None:
        return r
    n, d = v.numerator, v.denominator
    s, sf = squarefree_decompose(int(n * d))
    return quadext(0, mpq(s, d), sf)


# ------------------------------------------------------------------------
# complex scalars over an exact real field
# ------------------------------------------------------------------------


class _Cx:
    __slots__ = ("re", "im")

    def __init__(self, re, im=mpq(0)):
        self.re = re
        self.im = im

    @staticmethod
    def _lift(x):
        if isinstance(x, _Cx):
            return x
        return _Cx(x if not isinstance(x, int) else mpq(x))

    def __add__(self, o):
        o = self._lift(o)
        return _Cx(self.re + o.re, self.im + o.im)

    __radd__ = __add__

    def __neg__(self):
        return _Cx(-self.re, -self.im)

    def __sub__(self, o):
        return self + (-self._lift(o))

    def __rsub__(self, o):
        return self._lift(o) + (-self)

    def __mul__(self, o):
        o = self._lift(o)
        return _Cx(self.re * o.re - self.im * o.im, self.re * o.im + self.im * o.re)

    __rmul__ = __mul__

    def __truediv__(self, o):
        o = self._lift(o)
        den = o.re * o.re + o.im * o.im
        return _Cx(
            (self.re * o.re + self.im * o.im) / den,
            (self.im * o.re - self.re * o.im) / den,
        )

    def __rtruediv__(self, o):
        return self._lift(o) / self

    def __eq__(self, o):
        o = self._lift(o)
        return self.re == o.re and self.im == o.im

    def __hash__(self):
        return hash((self.re, self.im))

    def __repr__(self):
        return f"({self.re} + {self.im}i)"


# ------------------------------------------------------------------------
# eigenvalue containers
# ------------------------------------------------------------------------


@dataclass(frozen=True)
class RealEigen:
    value: object  # mpq | QuadExt | Interval


class ComplexEigen:
    """Conjugate pair alpha +- beta*i with beta > 0; carries exact powers of
    the rotation-scaling cell [[alpha, -beta], [beta, alpha]]."""

    __slots__ = ("alpha", "beta", "lam", "lam_sq", "_pows")

    def __init__(self, alpha, beta):
        self.alpha = alpha
        self.beta = beta
        self.lam_sq = alpha * alpha + beta * beta
        self.lam = _field_sqrt(self.lam_sq)
        self._pows = [(mpq(1), mpq(0))]

    def cell_power(self, m):
        """(lam^m cos m*theta, lam^m sin m*theta) exactly."""
        while len(self._pows) <= m:
            c, s = self._pows[-1]
            self._pows.append((c * self.alpha - s * self.beta, s * self.alpha + c * self.beta))
        return self._pows[m]

    def theta_interval(self, prec=128):
        y = scalar_to_interval(self.beta, prec + 16)
        x = scalar_to_interval(self.alpha, prec + 16)
        # beta > 0 keeps the box in the upper half plane, so atan2 attains
        # its extrema over the box at corners
        out = None
        for yc in (y.lo, y.hi):
            for xc in (x.lo, x.hi):
                c = interval_atan2(yc, xc, prec)
                out = c if out is None else out.hull(c)
        return out

    def lam_interval(self, prec=128):
        if self.lam is not None:
            return scalar_to_interval(self.lam, prec)
        return interval_sqrt(scalar_to_interval(self.lam_sq, prec + 16), prec)

    def __eq__(self, o):
        return isinstance(o, ComplexEigen) and self.alpha == o.alpha and self.beta == o.beta

    def __hash__(self):
        return hash((self.alpha, self.beta))

    def __repr__(self):
        return f"ComplexEigen({self.alpha}, {self.beta})"


@dataclass(frozen=True)
class JordanBlock:
    eigen: object
    size: int

    @property
    def width(self):
        return 2 * self.size if isinstance(self.eigen, ComplexEigen) else self.size


@dataclass(frozen=True)
class Angle:
    """Angle in [0, pi]: exactly 0, exactly pi, or atan2(beta, alpha) of a cell."""

    kind: str
    cell: object = None

    def enclosure(self, prec=128):
        if self.kind == "zero":
            return Interval.point(mpq(0))
        if self.kind == "pi":
            return pi_interval(prec)
        return self.cell.theta_interval(prec)


ANGLE_ZERO = Angle("zero")
ANGLE_PI = Angle("pi")


class RealJordanForm:
    def __init__(self, blocks, R, R_inv, certification, residual_width=None):
        self.blocks = tuple(blocks)
        self.R = R
        self.R_inv = R_inv
        self.certification = certification
        self.residual_width = residual_width

    @property
    def dim(self):
        return len(self.R)

    def block_offsets(self):
        offs, o = [], 0
        for b in self.blocks:
            offs.append(o)
            o += b.width
        return offs

    def J_matrix(self):
        p = sum(b.width for b in self.blocks)
        M = [[mpq(0)] * p for _ in range(p)]
        o = 0
        for b in self.blocks:
            if isinstance(b.eigen, ComplexEigen):
                a, bb = b.eigen.alpha, b.eigen.beta
                for i in range(b.size):
                    r = o + 2 * i
                    M[r][r] = a
                    M[r][r + 1] = -bb
                    M[r + 1][r] = bb
                    M[r + 1][r + 1] = a
                    if i + 1 < b.size:
                        M[r][r + 2] = mpq(1)
                        M[r + 1][r + 3] = mpq(1)
                o += 2 * b.size
            else:
                v = b.eigen.value
                for i in range(b.size):
                    M[o + i][o + i] = v
                    if i + 1 < b.size:
                        M[o + i][o + i + 1] = mpq(1)
                o += b.size
        return tuple(tuple(r) for r in M)

    def interval_reconstruction(self, prec=128):
        lift = lambda m: tuple(
            tuple(x if isinstance(x, Interval) else scalar_to_interval(x, prec) for x in row)
            for row in m
        )
        prod = _imat_mul(_imat_mul(lift(self.R_inv), lift(self.J_matrix())), lift(self.R))
        return prod


# ------------------------------------------------------------------------
# interval matrix helpers for the residual mode
# ------------------------------------------------------------------------


class _IvFail(Exception):
    pass


def _imat_mul(a, b):
    n, m, k = len(a), len(b[0]), len(b)
    return tuple(
        tuple(
            sum((a[i][t] * b[t][j] for t in range(1, k)), a[i][0] * b[0][j])
            for j in range(m)
        )
        for i in range(n)
    )


def _ipivot(col):
    best, mag = None, -1.0
    for i, iv in enumerate(col):
        if iv.straddles_zero():
            continue
        m = abs(float(iv.mid()))
        if m > mag:
            best, mag = i, m
    if best is None:
        raise _IvFail
    return best


def _interval_solve(M, rhs):
    """Gaussian elimination on interval entries; fails on ambiguous pivots."""
    n = len(M)
    rows = [list(M[i]) + [rhs[i]] for i in range(n)]
    for c in range(n):
        p = c + _ipivot([rows[i][c] for i in range(c, n)])
        rows[c], rows[p] = rows[p], rows[c]
        inv = rows[c][c].inverse()
        rows[c] = [x * inv for x in rows[c]]
        for i in range(n):
            if i != c:
                f = rows[i][c]
                if f.lo == 0 and f.hi == 0:
                    continue
                rows[i] = [x - f * y for x, y in zip(rows[i], rows[c])]
    return [rows[i][n] for i in range(n)]


def _imat_inverse(M):
    n = len(M)
    one = Interval.point(mpq(1))
    zero = Interval.point(mpq(0))
    aug = [list(M[i]) + [one if i == j else zero for j in range(n)] for i in range(n)]
    for c in range(n):
        p = c + _ipivot([aug[i][c] for i in range(c, n)])
        aug[c], aug[p] = aug[p], aug[c]
        inv = aug[c][c].inverse()
        aug[c] = [x * inv for x in aug[c]]
        for i in range(n):
            if i != c:
                f = aug[i][c]
                if f.lo == 0 and f.hi == 0:
                    continue
                aug[i] = [x - f * y for x, y in zip(aug[i], aug[c])]
    return tuple(tuple(row[n:]) for row in aug)


# ------------------------------------------------------------------------
# generalized eigenvector chains
# ------------------------------------------------------------------------


class _Span:
    """Row space with back-eliminated pivots, for quotient independence tests."""

    def __init__(self):
        self.rows = []  # (pivot index, normalized vector)

    def add(self, v):
        v = list(v)
        for piv, row in self.rows:
            c = v[piv]
            if c != 0:
                v = [x - c * y for x, y in zip(v, row)]
        lead = next((i for i, x in enumerate(v) if x != 0), None)
        if lead is None:
            return False
        inv = 1 / v[lead]
        v = [x * inv for x in v]
        for idx, (piv, row) in enumerate(self.rows):
            c = row[lead]
            if c != 0:
                self.rows[idx] = (piv, [x - c * y for x, y in zip(row, v)])
        self.rows.append((lead, v))
        return True


def _eigen_chains(A, lam, mult):
    """Jordan chains for eigenvalue lam of algebraic multiplicity mult.
    Returns a list of chains, each ordered from eigenvector up."""
    p = len(A)
    B = tuple(
        tuple(A[i][j] - lam if i == j else A[i][j] for j in range(p)) for i in range(p)
    )
    kernels = []
    P = B
    while True:
        kernels.append(la.nullspace(P))
        if len(kernels[-1]) >= mult:
            break
        if len(kernels) > p:
            raise JordanError("kernel ladder failed to reach the multiplicity")
        P = la.mat_mul(P, B)
    if len(kernels[-1]) != mult:
        raise JordanError("geometric structure inconsistent with multiplicity")
    h = len(kernels)
    chains = []
    for j in range(h, 0, -1):
        tr = _Span()
        if j >= 2:
            for b in kernels[j - 2]:
                tr.add(b)
        for c in chains:
            tr.add(c[j - 1])
        for cand in kernels[j - 1]:
            if tr.add(cand):
                vec = cand
                chain = [cand]
                for _ in range(j - 1):
                    vec = la.mat_vec(B, vec)
                    chain.append(vec)
                chain.reverse()
                chains.append(chain)
    if sum(len(c) for c in chains) != mult:
        raise JordanError("chain extraction lost multiplicity")
    return chains


# ------------------------------------------------------------------------
# spectrum factorization
# ------------------------------------------------------------------------


def _quadratic_roots(h):
    """Roots of monic x^2 + Bx + C, square-free: two reals or one pair."""
    B, C = h[1], h[0]
    D = B * B - 4 * C
    alpha = -B / 2
    n, d = abs(D).numerator, abs(D).denominator
    t = n * d
    r = gmpy2.isqrt(t)
    if r * r == t:
        half = mpq(r, 2 * d)
        sf = 1
    else:
        s, sf = squarefree_decompose(int(t))
        half = mpq(s, 2 * d)
    if D > 0:
        if sf == 1:
            return [("real", alpha + half), ("real", alpha - half)]
        return [
            ("real", quadext(alpha, half, sf)),
            ("real", quadext(alpha, -half, sf)),
        ]
    beta = half if sf == 1 else quadext(0, half, sf)
    return [("complex", (alpha, beta))]


def _spectrum(f):
    """(resolved eigenvalues with multiplicities, unresolved square-free parts)."""
    out, unresolved = [], []
    for g, m in _yun(f):
        roots, h = _rational_roots(g)
        out += [("real", r, m) for r in roots]
        if _pdeg(h) == 2:
            out += [(kind, v, m) for kind, v in _quadratic_roots(_pmonic(h))]
        elif _pdeg(h) > 2:
            unresolved.append((h, m))
    return out, unresolved


# ------------------------------------------------------------------------
# the decomposition itself
# ------------------------------------------------------------------------


def _exact_jordan(A, eigs):
    p = len(A)
    items = []  # (sort key, JordanBlock, columns)
    for kind, val, mult in eigs:
        if kind == "real":
            for chain in _eigen_chains(A, val, mult):
                cols = [list(v) for v in chain]
                items.append((JordanBlock(RealEigen(val), len(chain)), cols))
        else:
            alpha, beta = val
            eig = ComplexEigen(alpha, beta)
            Acx = tuple(tuple(_Cx(x) for x in row) for row in A)
            for chain in _eigen_chains(Acx, _Cx(alpha, beta), mult):
                cols = []
                for w in chain:
                    cols.append([x.im for x in w])
                    cols.append([x.re for x in w])
                items.append((JordanBlock(eig, len(chain)), cols))

    def lead_index(cols):
        return next(i for i, x in enumerate(cols[0]) if x != 0)

    items.sort(key=lambda it: lead_index(it[1]))
    blocks = [it[0] for it in items]
    columns = [c for it in items for c in it[1]]
    S = tuple(tuple(columns[j][i] for j in range(p)) for i in range(p))
    R = la.mat_inverse(S)
    form = RealJordanForm(blocks, R=R, R_inv=S, certification="exact")
    if la.mat_mul(A, S) != la.mat_mul(S, form.J_matrix()):
        raise JordanError("internal reconstruction mismatch")
    return form


def _residual_jordan(A, rational_roots, parts, eps):
    p = len(A)
    state = []  # (exact mpq | None, poly | None, lo, hi)
    for r in rational_roots:
        state.append([r, None, r, r])
    for h, _ in parts:
        hm = _pmonic(h)
        exact, boxes = _isolate_roots(hm)
        if len(exact) + len(boxes) != _pdeg(hm):
            raise JordanError(
                "spectrum is not totally real; supply a decomposition in the input file"
            )
        for e in exact:
            state.append([e, None, e, e])
        for gb, lo, hi in boxes:
            state.append([None, gb, lo, hi])

    for attempt in range(40):
        width = mpq(1, 2 ** (24 + 8 * attempt))
        for st in state:
            if st[0] is None:
                st[2], st[3] = _refine_root(st[1], st[2], st[3], width)
        if any(st[0] is None and st[2] <= 0 <= st[3] for st in state):
            continue
        state.sort(key=lambda st: st[2] + st[3])
        try:
            lams = [Interval(st[2], st[3]) for st in state]
            cols = [_residual_eigenvector(A, lam) for lam in lams]
            S = tuple(tuple(cols[j][i] for j in range(p)) for i in range(p))
            R = _imat_inverse(S)
            blocks = [JordanBlock(RealEigen(lam), 1) for lam in lams]
            form = RealJordanForm(blocks, R=R, R_inv=S, certification="residual")
            prod = _imat_mul(_imat_mul(S, _ilift(form.J_matrix())), R)
            w = max(iv.width() for row in prod for iv in row)
            ok = all(
                prod[i][j].contains(A[i][j]) for i in range(p) for j in range(p)
            )
            if ok and w <= eps:
                form.residual_width = w
                return form
        except _IvFail:
            pass
    raise JordanError(
        "residual certification failed at maximum precision; "
        "supply a decomposition in the input file"
    )


def _ilift(m):
    return tuple(
        tuple(x if isinstance(x, Interval) else Interval.point(mpq(x)) for x in row)
        for row in m
    )


def _residual_eigenvector(A, lam):
    p = len(A)
    B = [
        [
            (Interval.point(A[i][j]) - lam) if i == j else Interval.point(A[i][j])
            for j in range(p)
        ]
        for i in range(p)
    ]
    best = None
    for j in range(p):
        for i in range(p):
            M = [[B[r][k] for k in range(p) if k != j] for r in range(p) if r != i]
            rhs = [-B[r][j] for r in range(p) if r != i]
            try:
                sol = _interval_solve(M, rhs)
            except _IvFail:
                continue
            vec = sol[:j] + [Interval.point(mpq(1))] + sol[j:]
            w = max(iv.width() for iv in vec)
            if best is None or w < best[0]:
                best = (w, vec)
    if best is None:
        raise _IvFail
    return best[1]


def real_jordan(A, eps=mpq(1, 10**6)):
    """Decompose a rational square matrix; exact when the spectrum allows,
    residual (interval certified to width eps) for square-free totally real
    spectra, JordanError otherwise."""
    A = tuple(tuple(mpq(x) for x in row) for row in A)
    f = char_poly(A)
    eigs, unresolved = _spectrum(f)
    if not unresolved:
        try:
            return _exact_jordan(A, eigs)
        except ValueError:
            pass  # incompatible quadratic extensions; try the enclosure route
    if any(m > 1 for _, m in unresolved) or any(m > 1 for _, _, m in eigs):
        raise JordanError(
            "defective spectrum outside one quadratic extension; "
            "supply a decomposition in the input file"
        )
    if any(kind == "complex" for kind, _, _ in eigs):
        raise JordanError(
            "complex spectrum outside one quadratic extension; "
            "supply a decomposition in the input file"
        )
    rational = [v for kind, v, _ in eigs if kind == "real" and isinstance(v, type(mpq(0)))]
    if len(rational) != sum(1 for k, _, _ in eigs if k == "real"):
        raise JordanError(
            "irrational real spectrum beyond enclosure support; "
            "supply a decomposition in the input file"
        )
    return _residual_jordan(A, rational, unresolved, eps)


def assemble_jordan(A, blocks, R=None, R_inv=None):
    """Build a RealJordanForm from a user-supplied decomposition and verify
    the reconstruction exactly."""
    built = []
    for spec in blocks:
        if spec[0] == "real":
            built.append(JordanBlock(RealEigen(spec[1]), spec[2]))
        elif spec[0] == "complex":
            built.append(JordanBlock(ComplexEigen(spec[1], spec[2]), spec[3]))
        else:
            raise JordanError(f"unknown block kind {spec[0]!r}")
    if R is None and R_inv is None:
        raise JordanError("need R or R_inv")
    if R is None:
        R = la.mat_inverse(R_inv)
    if R_inv is None:
        R_inv = la.mat_inverse(R)
    form = RealJordanForm(built, R=R, R_inv=R_inv, certification="exact")
    p = len(A)
    if sum(b.width for b in built) != p:
        raise JordanError("block widths do not cover the matrix")
    if la.mat_mul(R, R_inv) != la.identity(p):
        raise JordanError("supplied R and R_inv are not inverse")
    if la.mat_mul(A, R_inv) != la.mat_mul(R_inv, form.J_matrix()):
        raise JordanError("supplied decomposition does not reconstruct the matrix")
    return form


# ------------------------------------------------------------------------
# coefficient functions of J^n
# ------------------------------------------------------------------------


@dataclass(frozen=True)
class PhiExpr:
    """scale * C(n,k) * lam^(n-k) * cos((n-k)theta - r*pi/2), zero for n < k."""

    lam: object  # modulus >= 0: mpq | QuadExt | Interval | None (sqrt of lam_sq)
    lam_sq: object
    theta: Angle
    r: int
    k: int
    scale: object

    def eval_exact(self, n):
        if n < self.k:
            return mpq(0)
        m = n - self.k
        c = binom(n, self.k)
        if self.theta.kind == "rot":
            cm, sm = self.theta.cell.cell_power(m)
            base = cm if self.r == 0 else sm
        else:
            if isinstance(self.lam, Interval):
                raise ValueError("enclosed eigenvalue has no exact evaluation")
            if self.r == 1:
                base = mpq(0)
            else:
                base = self.lam**m
                if self.theta.kind == "pi" and m % 2:
                    base = -base
        return self.scale * c * base

    def eval_interval(self, n, prec=128):
        if not isinstance(self.lam, Interval):
            return scalar_to_interval(self.eval_exact(n), prec)
        if n < self.k:
            return Interval.point(mpq(0))
        m = n - self.k
        base = self.lam.int_pow(m)
        if self.theta.kind == "pi" and m % 2:
            base = -base
        return base.scale(self.scale * binom(n, self.k))

    def lam_interval(self, prec=128):
        if isinstance(self.lam, Interval):
            return self.lam
        if self.lam is not None:
            return scalar_to_interval(self.lam, prec)
        return interval_sqrt(scalar_to_interval(self.lam_sq, prec + 16), prec)

    def gamma_interval(self, prec=128):
        """log of the modulus."""
        return interval_log(self.lam_interval(prec + 16), prec)

    def theta_interval(self, prec=128):
        return self.theta.enclosure(prec)

    def is_constant_one(self):
        return (
            self.theta.kind == "zero"
            and self.k == 0
            and not isinstance(self.lam, Interval)
            and self.lam == 1
            and self.scale == 1
        )


@dataclass(frozen=True)
class PhiCombo:
    """mu1*phi1 +/- mu2*phi2, normalized so mu1 > 0 and mu2 >= 0; `negated`
    records a global sign flip applied during normalization."""

    mu1: object
    phi1: PhiExpr
    s: int = 1
    mu2: object = mpq(0)
    phi2: PhiExpr | None = None
    negated: bool = False

    @staticmethod
    def of(c1, phi1, c2=None, phi2=None):
        terms = []
        for c, phi in ((c1, phi1), (c2, phi2)):
            if phi is None or c is None:
                continue
            mu = mpq(c) * phi.scale
            if mu != 0:
                terms.append((mu, replace(phi, scale=mpq(1))))
        if not terms:
            return PhiCombo(mpq(0), replace(phi1, scale=mpq(1)))
        if len(terms) == 1:
            (mu, phi), = terms
            if mu < 0:
                return PhiCombo(-mu, phi, negated=True)
            return PhiCombo(mu, phi)
        (m1, p1), (m2, p2) = terms
        negated = m1 < 0
        if negated:
            m1, m2 = -m1, -m2
        s = 1 if m2 > 0 else -1
        return PhiCombo(m1, p1, s, abs(m2), p2, negated)

    def eval_exact(self, n):
        v = self.mu1 * self.phi1.eval_exact(n)
        if self.phi2 is not None:
            v = v + self.s * self.mu2 * self.phi2.eval_exact(n)
        return -v if self.negated else v

    def eval_interval(self, n, prec=128):
        v = self.phi1.eval_interval(n, prec).scale(self.mu1)
        if self.phi2 is not None:
            v = v + self.phi2.eval_interval(n, prec).scale(self.s * self.mu2)
        return -v if self.negated else v


def _real_phi_params(value):
    """(lam, lam_sq, angle) for a real eigenvalue, folding signs into theta."""
    if isinstance(value, Interval):
        if value.hi < 0:
            lam = -value
            return lam, lam.int_pow(2), ANGLE_PI
        return value, value.int_pow(2), ANGLE_ZERO
    sgn = scalar_sign(value)
    lam = -value if sgn < 0 else value
    return lam, lam * lam, ANGLE_PI if sgn < 0 else ANGLE_ZERO


def jordan_power_entries(J):
    """Map from in-block positions (i, j) to the PhiExpr giving (J^n)[i][j];
    positions outside the block pattern are identically zero."""
    out = {}
    o = 0
    for blk in J.blocks:
        if isinstance(blk.eigen, ComplexEigen):
            eig = blk.eigen
            ang = Angle("rot", eig)
            for k in range(blk.size):
                for i in range(blk.size - k):
                    r0, c0 = o + 2 * i, o + 2 * i + 2 * k
                    out[(r0, c0)] = PhiExpr(eig.lam, eig.lam_sq, ang, 0, k, mpq(1))
                    out[(r0, c0 + 1)] = PhiExpr(eig.lam, eig.lam_sq, ang, 1, k, mpq(-1))
                    out[(r0 + 1, c0)] = PhiExpr(eig.lam, eig.lam_sq, ang, 1, k, mpq(1))
                    out[(r0 + 1, c0 + 1)] = PhiExpr(eig.lam, eig.lam_sq, ang, 0, k, mpq(1))
            o += 2 * blk.size
        else:
            lam, lam_sq, ang = _real_phi_params(blk.eigen.value)
            for k in range(blk.size):
                for i in range(blk.size - k):
                    out[(o + i, o + i + k)] = PhiExpr(lam, lam_sq, ang, 0, k, mpq(1))
            o += blk.size
    return out


def shape_groups(J):
    """Positions grouped by shared coefficient function.

    Returns (constant_positions, groups); groups is a list of
    (pivot PhiExpr with scale +1, [(position, sign)]).  The constant-one
    band is kept out of the parameters unless it is all there is."""
    entries = jordan_power_entries(J)
    const = []
    keyed = {}
    for pos in sorted(entries):
        phi = entries[pos]
        if replace(phi, scale=mpq(1)).is_constant_one():
            const.append((pos, phi.scale))
            continue
        key = (
            phi.theta.kind,
            phi.theta.cell if phi.theta.kind == "rot" else None,
            phi.lam if not isinstance(phi.lam, Interval) else (phi.lam.lo, phi.lam.hi),
            phi.r,
            phi.k,
        )
        keyed.setdefault(key, []).append((pos, phi.scale))
    groups = []
    for key, members in keyed.items():
        pos0 = next(p for p, s in members if s == 1)
        pivot = replace(entries[pos0], scale=mpq(1))
        groups.append((pivot, members))
    if not groups and const:
        pos0 = const[0][0]
        pivot = replace(entries[pos0], scale=mpq(1))
        groups.append((pivot, const))
        const = []
    return const, groups


def shape_coeff_functions(J):
    """Coefficient functions m(n) with Psi(m(n)) = J^n for all n >= 0."""
    return tuple(pivot for pivot, _ in shape_groups(J)[1])
