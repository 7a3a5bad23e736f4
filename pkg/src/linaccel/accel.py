"""Acceleration of linear loops over template polyhedra.

The body x := A x + b, iterated while G x <= h holds, is handled through
the powers of the homogenized matrix.  Their coefficient functions are
bounded over a template to give one abstract matrix covering every
power; applying it to the initial states and stepping once more through
the body yields the loop invariant without any fixpoint iteration.

A guard restricts which powers matter.  The restriction is computed in
two independent ways: the guard rows are linearized over the start box
to cut the coefficient polyhedron, and the resulting candidate
iteration count is certified against the exact matrix powers before the
power window is narrowed.  Only the certified count is trusted, so a
coarse linearization costs precision, never soundness.
"""

from __future__ import annotations

from dataclasses import dataclass

from gmpy2 import bincoef, mpq

from . import _linalg as la
from .bounds import bound_combo, even_odd_split, tail_rank
from .jordan import PhiCombo, real_jordan, shape_coeff_functions
from .matdom import (
    AbstractMatrix,
    _basis_mode,
    _corner_points,
    apply_to_states,
    conjugate,
    shape_from_jordan,
)
from .numerics import (
    INF,
    NINF,
    Interval,
    QuadExt,
    ext_neg,
    is_finite,
    scalar_to_interval,
)
from .polyhedra import (
    Polyhedron,
    TemplatePolyhedron,
    make_logahedra_template,
    octagon_template,
)

ENUM_WINDOW = 64
SEARCH_CAP = 4096
GALLOP_SPAN = 1 << 22
_CERT_PERIOD = 64


@dataclass(frozen=True)
class AccelerationConfig:
    """Knobs for the acceleration pipeline.

    template picks the rows bounding the coefficient functions, "oct"
    or ("log", ell).  enum_cap budgets the index searches and small_n
    is the largest certified count re-abstracted by exact enumeration.
    precision drives the interval paths, generator_cap limits blowup in
    the matrix domain, retry is how many candidate counts are checked
    against the exact powers, and refine toggles the guard-based
    restriction of the powers altogether."""

    template: object = "oct"
    enum_cap: int = SEARCH_CAP
    precision: int = 128
    small_n: int = ENUM_WINDOW
    generator_cap: int = 20000
    retry: int = 64
    refine: bool = True


@dataclass(frozen=True)
class IterationBound:
    """Number of iterations the loop cannot exceed; count is int or INF.

    row and threshold record the template expression whose growth
    produced the candidate, when the certified count came from one."""

    count: object
    row: tuple | None = None
    threshold: object = None


@dataclass(frozen=True)
class Acceleration:
    """Result of accelerating a guarded loop."""

    states: Polyhedron
    bound: IterationBound
    exact: bool


# ------------------------------------------------------------------------
# homogenization
# ------------------------------------------------------------------------


def homogenize(loop):
    """Affine body as a linear map in one extra coordinate fixed to 1.

    Returns (A_h, guard_rows); a guard row g holds iff g . x_h <= 0."""
    p = loop.dim
    ah = tuple(row + (bb,) for row, bb in zip(loop.A, loop.b))
    ah += ((mpq(0),) * p + (mpq(1),),)
    guards = tuple(g + (-hh,) for g, hh in zip(loop.G, loop.h))
    return ah, guards


def embed_states(states):
    """Lift a polyhedron into the homogenized space."""
    if states.is_empty():
        return Polyhedron.bottom(states.dim + 1)
    verts, rays, lines = states.generator_tuple()
    one, zero = (mpq(1),), (mpq(0),)
    return Polyhedron.from_generators(
        [v + one for v in verts],
        [r + zero for r in rays],
        [l + zero for l in lines],
        dim=states.dim + 1,
    )


# ------------------------------------------------------------------------
# endpoint pairs
#
# (lo, hi) with lo an mpq or NINF and hi an mpq or INF; the conventions
# below make 0 absorb infinities, which matches closed ranges.
# ------------------------------------------------------------------------


def _xmul(a, b):
    if a == 0 or b == 0:
        return mpq(0)
    if is_finite(a) and is_finite(b):
        return mpq(a) * b
    return INF if (a > 0) == (b > 0) else NINF


def _pair_scale(c, pair):
    if c == 0:
        return (mpq(0), mpq(0))
    lo, hi = _xmul(c, pair[0]), _xmul(c, pair[1])
    return (lo, hi) if c > 0 else (hi, lo)


def _pair_mul(p, q):
    cand = [_xmul(a, b) for a in p for b in q]
    return (min(cand), max(cand))


def _pair_add(p, q):
    lo = NINF if NINF in (p[0], q[0]) else p[0] + q[0]
    hi = INF if INF in (p[1], q[1]) else p[1] + q[1]
    return (lo, hi)


def transformed_box(form, states, prec=128):
    """Componentwise range of R x over the states, as endpoint pairs."""

    def extent(row):
        hi = states.sup_of(row)
        lo = ext_neg(states.sup_of(tuple(-x for x in row)))
        return (lo, hi)

    if all(
        not isinstance(x, (QuadExt, Interval)) for row in form.R for x in row
    ):
        return tuple(extent(row) for row in form.R)
    p = states.dim
    axes = [
        extent(tuple(mpq(1 if j == i else 0) for j in range(p)))
        for i in range(p)
    ]
    out = []
    for row in form.R:
        acc = (mpq(0), mpq(0))
        for c, pair in zip(row, axes):
            iv = scalar_to_interval(c, prec)
            acc = _pair_add(acc, _pair_mul((iv.lo, iv.hi), pair))
        out.append(acc)
    return tuple(out)


# ------------------------------------------------------------------------
# bounding the coefficient functions
# ------------------------------------------------------------------------


def abstract_Jstar(form, rows, nmin=0, nmax=None, prec=128, cap=SEARCH_CAP,
                   window=ENUM_WINDOW):
    """Template abstraction of {J^n | nmin <= n <= nmax} in m-space.

    Bounds are exact row suprema when the index window is small enough
    to enumerate and the spectrum evaluates exactly; otherwise each row
    gets a sound upper bound from the range machinery."""
    if nmax is not None and nmax < nmin:
        raise ValueError("empty power range")
    phis = shape_coeff_functions(form)
    rows = tuple(tuple(r) for r in rows)
    if nmax is not None and nmax - nmin <= window:
        try:
            mvals = [
                tuple(phi.eval_exact(n) for phi in phis)
                for n in range(nmin, nmax + 1)
            ]
        except ValueError:
            mvals = None  # enclosed eigenvalue, fall back to range bounds
        if mvals is not None:
            bounds = []
            for r in rows:
                best = max(
                    sum((mpq(c) * v for c, v in zip(r, mv)), mpq(0))
                    for mv in mvals
                )
                if isinstance(best, QuadExt):
                    best = best.to_interval(prec).hi  # outward, keeps rationals
                bounds.append(best)
            return TemplatePolyhedron(rows, tuple(bounds))
    bounds = []
    for r in rows:
        nz = [(j, mpq(c)) for j, c in enumerate(r) if c != 0]
        if not nz:
            bounds.append(mpq(0))
        elif len(nz) <= 2:
            (j1, c1), *rest = nz
            if rest:
                ((j2, c2),) = rest
                combo = PhiCombo.of(c1, phis[j1], c2, phis[j2])
            else:
                combo = PhiCombo.of(c1, phis[j1])
            bounds.append(bound_combo(combo, nmin, nmax, prec, cap).sup)
        else:
            # decoupled per-term bounds; sound, rarely tight
            total = mpq(0)
            for j, c in nz:
                s = bound_combo(PhiCombo.of(c, phis[j]), nmin, nmax, prec, cap).sup
                if s == INF:
                    total = INF
                    break
                total = total + s
            bounds.append(total)
    return TemplatePolyhedron(rows, tuple(bounds))


# ------------------------------------------------------------------------
# index searches
# ------------------------------------------------------------------------


def _phi_pair(combo):
    return (combo.phi1,) if combo.phi2 is None else (combo.phi1, combo.phi2)


def _is_zero_combo(combo):
    return combo.mu1 == 0 and (combo.phi2 is None or combo.mu2 == 0)


def first_crossing(combo, threshold, start=0, prec=128, cap=SEARCH_CAP):
    """Least integer n >= start with combo(n) > threshold, INF otherwise.

    Exact for real spectra.  Rotations and enclosed eigenvalues are
    searched pointwise with a decay certificate, so a crossing past the
    budget can come back as INF; users of the iteration bound recheck
    candidates against the exact powers, which keeps that sound."""
    if threshold == INF:
        return INF
    if threshold == NINF:
        return int(start)
    start = int(start)
    threshold = mpq(threshold)
    if _is_zero_combo(combo):
        return start if 0 > threshold else INF
    phis = _phi_pair(combo)
    if any(isinstance(phi.lam, Interval) for phi in phis):
        return _eval_scan(combo, threshold, start, prec, cap, exact=False)
    if any(phi.theta.kind == "rot" for phi in phis):
        return _eval_scan(combo, threshold, start, prec, cap, exact=True)
    if any(phi.theta.kind == "pi" for phi in phis):
        halves = even_odd_split(combo)
        starts = (start + start % 2, start + (1 - start % 2))
        return min(
            _grid_crossing(h, threshold, s, 2, prec, cap)
            for h, s in zip(halves, starts)
        )
    return _grid_crossing(combo, threshold, start, 1, prec, cap)


def _decay_certified(combo, beta, kmax, n, threshold):
    """No value from n on exceeds the nonnegative threshold.

    Valid for beta <= 1 an upper bound on the moduli: past n the
    envelope amp(n) beta^(n - kmax) dominates |combo| and shrinks."""
    if n <= kmax:
        return False
    if beta == 0:
        return True
    if (n + 1) * beta > (n + 1 - kmax):
        return False  # polynomial factor still outruns the decay
    amp = abs(combo.mu1) * bincoef(n, combo.phi1.k)
    if combo.phi2 is not None:
        amp += abs(combo.mu2) * bincoef(n, combo.phi2.k)
    return amp * beta ** (n - kmax) <= threshold


def _eval_scan(combo, threshold, start, prec, cap, exact):
    phis = _phi_pair(combo)
    if exact:
        value = combo.eval_exact
    else:
        value = lambda n: combo.eval_interval(n, prec).lo
    beta = max(phi.lam_interval(prec).hi for phi in phis)
    kmax = max(phi.k for phi in phis)
    can_certify = is_finite(beta) and mpq(beta) <= 1 and threshold >= 0
    n, end = start, start + cap
    while n < end:
        for j in range(n, min(n + _CERT_PERIOD, end)):
            if value(j) > threshold:
                return j
        n = min(n + _CERT_PERIOD, end)
        if can_certify and _decay_certified(combo, mpq(beta), kmax, n, threshold):
            return INF
    return INF


def _grid_crossing(combo, threshold, start, step, prec, cap):
    """Exact first crossing on the grid start, start + step, ...

    The prefix before the monotone tail is enumerated; on the tail a
    range certificate settles INF, and galloping plus bisection finds
    the crossing otherwise."""
    if _is_zero_combo(combo):
        return start if 0 > threshold else INF
    rank = tail_rank(combo, prec)
    limit = start + step * cap
    if rank is None:
        stop = limit
    else:
        first = max(rank[0], start)
        stop = start + step * ((first - start + step - 1) // step)
        if stop > limit:
            stop, rank = limit, None
    n = start
    while n < stop:
        if combo.eval_exact(n) > threshold:
            return n
        n += step
    if rank is None:
        return INF  # search budget exhausted before a certified tail
    if combo.eval_exact(n) > threshold:
        return n
    if rank[1] <= 0:
        return INF
    sup = bound_combo(combo, n, None, prec, cap).sup
    if sup != INF and sup <= threshold:
        return INF
    lo, span = n, step
    while combo.eval_exact(lo + span) <= threshold:
        lo += span
        span *= 2
        if span > step * GALLOP_SPAN:
            return INF
    hi = lo + span
    while hi - lo > step:
        mid = lo + (hi - lo) // (2 * step) * step
        if combo.eval_exact(mid) > threshold:
            hi = mid
        else:
            lo = mid
    return hi


def _terms_crossing(terms, threshold, start, prec, cap):
    """Pointwise search for rows touching more than two coefficients."""
    if any(isinstance(phi.lam, Interval) for _, phi in terms):

        def value(n):
            acc = Interval.point(mpq(0))
            for c, phi in terms:
                acc = acc + phi.eval_interval(n, prec).scale(c)
            return acc.lo

    else:

        def value(n):
            return sum((c * phi.eval_exact(n) for c, phi in terms), mpq(0))

    for n in range(int(start), int(start) + cap):
        if value(n) > threshold:
            return n
    return INF


# ------------------------------------------------------------------------
# guard handling
# ------------------------------------------------------------------------


def _matrix_pairs(mat, prec):
    out = []
    for row in mat:
        prow = []
        for x in row:
            iv = scalar_to_interval(x, prec)
            prow.append((iv.lo, iv.hi))
        out.append(tuple(prow))
    return tuple(out)


def _bilinear_pair(w, B, ybox):
    """Range of w . B . y; w entries are pairs, B rational, y in the box."""
    acc = (mpq(0), mpq(0))
    for j, ypair in enumerate(ybox):
        col = (mpq(0), mpq(0))
        for i, wpair in enumerate(w):
            bij = B[i][j]
            if bij != 0:
                col = _pair_add(col, _pair_scale(bij, wpair))
        if col != (0, 0):
            acc = _pair_add(acc, _pair_mul(col, ypair))
    return acc


def guard_Qprime(jstar, guard_rows, form, shape, ybox, prec=128):
    """Coefficient vectors under which some start state passes the guard.

    A continuing iterate satisfies g . R_inv Psi(m) y <= 0 for a start
    vector y, so ranging y over its box gives an interval-linear
    constraint on m per guard row.  An interval coefficient [a, b] of
    m_k is linearized as a m_k with (b - a) lower(m_k) charged to the
    constant, lower(m_k) taken from the template bounds.  The cut only
    sharpens the iteration bound search; certification of the bound
    never relies on it."""
    base = jstar.to_polyhedron()
    mdim = len(shape.pivots)
    if not guard_rows or base.is_empty():
        return base
    lower = []
    for i in range(mdim):
        e = tuple(mpq(-1 if j == i else 0) for j in range(mdim))
        lower.append(ext_neg(base.sup_of(e)))
    rinv = _matrix_pairs(form.R_inv, prec)
    p1 = len(rinv)
    out = base
    for g in guard_rows:
        w = [(mpq(0), mpq(0))] * p1
        for i, gi in enumerate(g):
            if gi != 0:
                w = [
                    _pair_add(acc, _pair_scale(gi, rp))
                    for acc, rp in zip(w, rinv[i])
                ]
        c0 = _bilinear_pair(w, shape.basis[0], ybox)
        if c0[0] == NINF:
            continue
        rhs = -c0[0]
        coeffs, usable = [], True
        for k in range(mdim):
            a, b = _bilinear_pair(w, shape.basis[k + 1], ybox)
            if a == NINF:
                usable = False
                break
            coeffs.append(mpq(a))
            if b != a:
                charge = _xmul(b - a if is_finite(b) else INF, lower[k])
                if not is_finite(charge):
                    usable = False
                    break
                rhs -= charge
        if not usable:
            continue
        if all(c == 0 for c in coeffs):
            if rhs < 0:
                return Polyhedron.bottom(mdim)
            continue
        out = out.meet_constraint(coeffs, rhs)
    return out


def max_iterations(form, shape, template_rows, qprime, prec=128, cap=SEARCH_CAP):
    """Smallest template-derived iteration count, INF when none settles.

    A row T with supremum e over the restricted coefficients rules out
    continuing past the first n with T . m(n) > e; candidate rows come
    from the template and from the restriction's own constraints."""
    phis = shape_coeff_functions(form)
    seen, rows = set(), []
    for row in tuple(template_rows) + tuple(r for r, _ in qprime.constraint_rows()):
        key = tuple(mpq(x) for x in row)
        if key not in seen:
            seen.add(key)
            rows.append(tuple(row))
    best = IterationBound(INF)
    for row in rows:
        nz = [(j, mpq(c)) for j, c in enumerate(row) if c != 0]
        if not nz:
            continue
        e = qprime.sup_of(row)
        if e == INF:
            continue
        if len(nz) == 1:
            combo = PhiCombo.of(nz[0][1], phis[nz[0][0]])
            n = first_crossing(combo, e, 0, prec, cap)
        elif len(nz) == 2:
            combo = PhiCombo.of(nz[0][1], phis[nz[0][0]], nz[1][1], phis[nz[1][0]])
            n = first_crossing(combo, e, 0, prec, cap)
        else:
            n = _terms_crossing([(c, phis[j]) for j, c in nz], e, 0, prec, cap)
        if n != INF and (best.count == INF or n < best.count):
            best = IterationBound(int(n), tuple(row), e)
    return best


# ------------------------------------------------------------------------
# pipelines
# ------------------------------------------------------------------------


def _template_rows(cfg, mdim):
    if cfg.template == "oct":
        return octagon_template(mdim)
    kind, ell = cfg.template
    if kind != "log":
        raise ValueError(f"unknown template {cfg.template!r}")
    pairs = [(i, j) for i in range(mdim) for j in range(i + 1, mdim)]
    return make_logahedra_template(pairs, ell, mdim)


def _iv_chain(riv, mat, rinv_iv, vec):
    """Enclosure of R_inv Psi R applied to a rational vector."""
    w1 = []
    for row in riv:
        acc = Interval.point(mpq(0))
        for c, x in zip(row, vec):
            if x != 0:
                acc = acc + c.scale(mpq(x))
        w1.append(acc)
    w2 = []
    for row in mat:
        acc = Interval.point(mpq(0))
        for c, x in zip(row, w1):
            if c != 0:
                acc = acc + x.scale(mpq(c))
        w2.append(acc)
    out = []
    for row in rinv_iv:
        acc = Interval.point(mpq(0))
        for c, x in zip(row, w2):
            acc = acc + c * x
        out.append(acc)
    return out


def _interval_apply(mpoly, shape, R, R_inv, states_h, prec, cap):
    """States image under the abstracted powers for inexact eigenbases.

    Conjugation and application are fused: every pair of an m-generator
    and a state generator yields one interval vector whose corners go
    into the hull.  That sidesteps cornering whole matrices, which
    costs 2^(p*p) where a vector box costs 2^p."""
    riv = [[scalar_to_interval(x, prec) for x in row] for row in R]
    rinv_iv = [[scalar_to_interval(x, prec) for x in row] for row in R_inv]
    sverts, srays, slines = states_h.generator_tuple()
    mverts, mrays, mlines = mpoly.generator_tuple()
    mats = [shape.psi(v) for v in mverts]
    dirs = [shape.psi_lin(g) for g in mrays]
    for g in mlines:
        dirs.append(shape.psi_lin(g))
        dirs.append(shape.psi_lin(tuple(-x for x in g)))
    sdirs = list(srays)
    for l in slines:
        sdirs.append(l)
        sdirs.append(tuple(-x for x in l))
    point_boxes = [
        _iv_chain(riv, m, rinv_iv, v) for m in mats for v in sverts
    ]
    ray_boxes = (
        [_iv_chain(riv, m, rinv_iv, v) for m in mats for v in sdirs]
        + [_iv_chain(riv, d, rinv_iv, v) for d in dirs for v in sverts]
        + [_iv_chain(riv, d, rinv_iv, v) for d in dirs for v in sdirs]
    )
    if not point_boxes:
        return Polyhedron.bottom(states_h.dim)
    width = states_h.dim
    if (len(point_boxes) + len(ray_boxes)) << width > cap:
        # too many pairs for cornerwise hulls; merge into one box each
        point_boxes = [_hull_boxes(point_boxes)]
        ray_boxes = [_hull_boxes(ray_boxes)] if ray_boxes else []
    points, rays = [], []
    for box in point_boxes:
        points.extend(_corner_points(box, 1 << width))
    for box in ray_boxes:
        rays.extend(c for c in _corner_points(box, 1 << width) if any(c))
    return Polyhedron.from_generators(points, rays, dim=states_h.dim)


def _hull_boxes(boxes):
    merged = list(boxes[0])
    for box in boxes[1:]:
        merged = [acc.hull(cur) for acc, cur in zip(merged, box)]
    return merged


def _stepped_image(states_h, ah, rj, shape, powers, guard_h, cfg):
    """One body step applied to the abstracted powers of the states."""
    xi = states_h.dim - 1
    unit = tuple(mpq(1 if j == xi else 0) for j in range(states_h.dim))
    if _basis_mode(rj.R, rj.R_inv) == "exact":
        mat = AbstractMatrix(shape, powers.to_polyhedron())
        conj = conjugate(mat, rj.R, rj.R_inv, cfg.precision, cfg.generator_cap)
        applied = apply_to_states(conj, states_h, xi=xi, cap=cfg.generator_cap)
    else:
        applied = _interval_apply(
            powers.to_polyhedron(), shape, rj.R, rj.R_inv, states_h,
            cfg.precision, cfg.generator_cap,
        )
        applied = applied.meet_constraint(unit, 1)
        applied = applied.meet_constraint(tuple(-x for x in unit), -1)
    if guard_h is not None:
        applied = applied.meet(guard_h)
    return applied.image_affine(ah).project_out((xi,))


def _certify_count(candidate, states_h, ah, guard_h, retry):
    """First candidate n with A_h^n(states) outside the guard.

    Checked on the exact powers; INF when no candidate certifies."""
    if candidate == INF:
        return INF
    for n in range(int(candidate), int(candidate) + retry + 1):
        if states_h.image_affine(la.mat_pow(ah, n)).meet(guard_h).is_empty():
            return n
    return INF


def accelerate_unguarded(loop, init, config=None, form=None):
    """Hull of every iterate of the body from init, ignoring the guard."""
    cfg = config or AccelerationConfig()
    if init.is_empty():
        return init
    ah, _ = homogenize(loop)
    rj = form if form is not None else real_jordan(ah)
    shape = shape_from_jordan(rj)
    rows = _template_rows(cfg, len(shape.pivots))
    powers = abstract_Jstar(rj, rows, 0, None, cfg.precision, cfg.enum_cap)
    xh = embed_states(init)
    return init.join(_stepped_image(xh, ah, rj, shape, powers, None, cfg))


def accelerate_guarded(loop, init, config=None, form=None):
    """Reachable states of the guarded loop from init, with its bound.

    The result joins init with one body step of the abstracted powers
    applied to the guard-filtered start states.  When a finite count
    certifies against the exact powers, the power window shrinks to it;
    exact reports that the window was enumerated without any outward
    rounding on the way to the states."""
    cfg = config or AccelerationConfig()
    inside = init.meet(loop.guard_polyhedron())
    if inside.is_empty():
        return Acceleration(init, IterationBound(0), True)
    ah, guard_rows = homogenize(loop)
    rj = form if form is not None else real_jordan(ah)
    shape = shape_from_jordan(rj)
    rows = _template_rows(cfg, len(shape.pivots))
    powers = abstract_Jstar(rj, rows, 0, None, cfg.precision, cfg.enum_cap)
    xh = embed_states(inside)
    dim_h = loop.dim + 1
    if guard_rows:
        guard_h = Polyhedron.from_constraints(
            guard_rows, [mpq(0)] * len(guard_rows), dim=dim_h
        )
    else:
        guard_h = Polyhedron.top(dim_h)
    bound = IterationBound(INF)
    if cfg.refine:
        ybox = transformed_box(rj, xh, cfg.precision)
        qprime = guard_Qprime(powers, guard_rows, rj, shape, ybox, cfg.precision)
        bound = max_iterations(rj, shape, rows, qprime, cfg.precision, cfg.enum_cap)
    count = _certify_count(bound.count, xh, ah, guard_h, cfg.retry)
    if count != bound.count:
        bound = IterationBound(count)
    if count != INF and count >= 1:
        powers = abstract_Jstar(
            rj, rows, 0, count - 1, cfg.precision, cfg.enum_cap, cfg.small_n
        )
    stepped = _stepped_image(xh, ah, rj, shape, powers, guard_h, cfg)
    states = init.join(stepped)
    exact = (
        count != INF
        and count - 1 <= cfg.small_n
        and _basis_mode(rj.R, rj.R_inv) == "exact"
        and not any(
            isinstance(phi.lam, Interval) for phi in shape_coeff_functions(rj)
        )
    )
    return Acceleration(states, bound, exact)
