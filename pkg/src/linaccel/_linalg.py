"""Small exact linear-algebra helpers shared across modules.

Matrices are tuples of row tuples.  Entries may be any exact field scalar
(mpq, QuadExt, or the complex wrapper used by the Jordan computation); the
only requirements are the arithmetic dunders and equality with 0.
"""

from __future__ import annotations

from gmpy2 import mpq


def identity(n, one=None, zero=None):
    one = mpq(1) if one is None else one
    zero = mpq(0) if zero is None else zero
    return tuple(
        tuple(one if i == j else zero for j in range(n)) for i in range(n)
    )


def transpose(m):
    return tuple(zip(*m))


def mat_vec(m, v):
    return tuple(sum((row[j] * v[j] for j in range(1, len(v))), row[0] * v[0]) for row in m)


def vec_dot(u, v):
    return sum((u[j] * v[j] for j in range(1, len(v))), u[0] * v[0])


def mat_mul(a, b):
    bt = transpose(b)
    return tuple(tuple(vec_dot(row, col) for col in bt) for row in a)


def mat_add(a, b):
    return tuple(tuple(x + y for x, y in zip(ra, rb)) for ra, rb in zip(a, b))


def mat_scale(c, a):
    return tuple(tuple(c * x for x in row) for row in a)


def mat_pow(a, n):
    out = identity(len(a))
    base = a
    while n:
        if n & 1:
            out = mat_mul(out, base)
        base = mat_mul(base, base)
        n >>= 1
    return out


def rref(m, ncols=None):
    """Reduced row echelon form; returns (rows, pivot_columns)."""
    rows = [list(r) for r in m]
    if not rows:
        return [], []
    ncols = len(rows[0]) if ncols is None else ncols
    pivots = []
    r = 0
    for c in range(ncols):
        pivot = None
        for i in range(r, len(rows)):
            if rows[i][c] != 0:
                pivot = i
                break
        if pivot is None:
            continue
        rows[r], rows[pivot] = rows[pivot], rows[r]
        inv = 1 / rows[r][c]
        rows[r] = [x * inv for x in rows[r]]
        for i in range(len(rows)):
            if i != r and rows[i][c] != 0:
                f = rows[i][c]
                rows[i] = [x - f * y for x, y in zip(rows[i], rows[r])]
        pivots.append(c)
        r += 1
        if r == len(rows):
            break
    return rows[:r], pivots


def nullspace(m, ncols=None):
    """Basis of {x | m x = 0} from the rref."""
    if not m:
        return []
    ncols = len(m[0]) if ncols is None else ncols
    rows, pivots = rref(m, ncols)
    free = [c for c in range(ncols) if c not in pivots]
    basis = []
    zero = None
    if rows:
        zero = rows[0][0] - rows[0][0]
    else:
        zero = mpq(0)
    one = zero + 1
    for f in free:
        v = [zero] * ncols
        v[f] = one
        for r, p in zip(rows, pivots):
            v[p] = -r[f]
        basis.append(tuple(v))
    return basis


def mat_inverse(m):
    n = len(m)
    # build 0/1 from the matrix itself so generic field entries work
    zero = m[0][0] - m[0][0]
    one = zero + 1
    aug = [list(row) + [one if i == j else zero for j in range(n)] for i, row in enumerate(m)]
    rows, pivots = rref(aug, ncols=None)
    if pivots[:n] != list(range(n)) or len(rows) < n:
        raise ValueError("singular matrix")
    return tuple(tuple(row[n:]) for row in rows[:n])


def solve(m, b):
    """One solution of m x = b, or None if inconsistent."""
    n = len(m)
    ncols = len(m[0])
    zero = m[0][0] - m[0][0]
    aug = [list(row) + [bv] for row, bv in zip(m, b)]
    rows, pivots = rref(aug, ncols=ncols + 1)
    if ncols in pivots:
        return None
    x = [zero] * ncols
    for r, p in zip(rows, pivots):
        x[p] = r[ncols]
    return tuple(x)
