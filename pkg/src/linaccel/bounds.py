"""Certified extrema of eigenvalue coefficient sequences.

The matrix-power abstraction needs, for every row of the accelerated
system, the range of a one- or two-term combination

    n  |->  mu1 * phi1(n) +/- mu2 * phi2(n)

over an integer interval [nmin, nmax] (nmax possibly infinite), where each
phi is a Jordan coefficient C(n,k) lam^(n-k) cos((n-k) theta - r pi/2).
Positive real eigenvalues admit exact answers: the sequence is eventually
monotone, so the extrema sit in a computable finite prefix or at the limit.
Negative reals reduce to the positive case on each parity class.  Complex
pairs are relaxed to a continuous envelope A P_k(t) e^(gamma t)
sin(theta t + psi) whose critical points are trapped in narrow bands; the
reported range is then sound but generally not attained by any integer.

Everything here rounds outward.  A BoundResult carries `exact=False`
whenever any step widened the true range.
"""

import math
from dataclasses import dataclass, replace

from gmpy2 import mpq

from .jordan import ANGLE_ZERO, PhiCombo, PhiExpr
from .numerics import (
    INF,
    NINF,
    Interval,
    ext_add,
    ext_mul_scalar,
    ext_neg,
    falling_product,
    interval_atan,
    interval_exp,
    interval_log,
    interval_pow,
    interval_sin,
    interval_sqrt,
    pi_interval,
    scalar_sign,
    scalar_to_interval,
)

DEFAULT_PREC = 192
PREFIX_CAP = 4096

# exact enumeration is cheap and loses nothing on short finite ranges
_ENUM_CUTOFF = 24


class _NoRank(Exception):
    """No usable monotonicity rank (rank too far out, or not a real combo)."""


class _Imprecise(Exception):
    """Interval computation failed to separate signs at the current precision."""


@dataclass(frozen=True)
class BoundResult:
    """Range of a coefficient sequence over an integer interval.

    inf/sup are rationals or the float infinities.  arg_inf/arg_sup give
    attaining indices when known; a bound reached only in the limit has no
    witness.  `exact` asserts both endpoints equal the true extrema.
    """

    inf: object
    sup: object
    exact: bool
    arg_inf: int | None = None
    arg_sup: int | None = None

    def __post_init__(self):
        if self.inf > self.sup:
            raise ValueError(f"inverted bound [{self.inf}, {self.sup}]")


@dataclass(frozen=True)
class _Part:
    inf: object
    sup: object
    exact: bool
    arg_inf: int | None
    arg_sup: int | None


# ------------------------------------------------------------------------
# scalar utilities
# ------------------------------------------------------------------------


def _floor_q(x):
    x = mpq(x)
    return int(x.numerator // x.denominator)


def _ceil_q(x):
    return -_floor_q(-mpq(x))


def _sign_of(c):
    return 1 if c > 0 else -1


def _cmp_any(a, b):
    """Total order over mpq, QuadExt (any radicand) and the float infinities."""
    if isinstance(a, float) or isinstance(b, float):
        if isinstance(a, float) and isinstance(b, float):
            return 0 if a == b else (1 if a > b else -1)
        if a == INF or b == NINF:
            return 1
        return -1
    try:
        if a == b:
            return 0
        return -1 if a < b else 1
    except (ValueError, TypeError):
        pass
    prec = 128
    while prec <= 1 << 13:
        ia, ib = scalar_to_interval(a, prec), scalar_to_interval(b, prec)
        if ia.hi < ib.lo:
            return -1
        if ib.hi < ia.lo:
            return 1
        prec *= 2
    raise _Imprecise(f"cannot order {a!r} against {b!r}")


def _is_exactish(v):
    return isinstance(v, (int, float, type(mpq(0))))


def _lo_of(v, prec):
    if isinstance(v, Interval):
        return v.lo
    if _is_exactish(v):
        return v if isinstance(v, float) else mpq(v)
    return v.to_interval(prec).lo


def _hi_of(v, prec):
    if isinstance(v, Interval):
        return v.hi
    if _is_exactish(v):
        return v if isinstance(v, float) else mpq(v)
    return v.to_interval(prec).hi


def _key_lo(v):
    return v.lo if isinstance(v, Interval) else v


def _key_hi(v):
    return v.hi if isinstance(v, Interval) else v


def _part_from_candidates(cands, prec):
    """Hull of candidate values; each candidate is (value, witness-or-None)
    with value an exact scalar, an enclosure, or a float infinity.  On ties an
    exact candidate beats an enclosure, so a prefix extremum that an engine
    interval merely touches still reports as attained."""
    blo = bhi = None
    alo = ahi = None
    for v, n in cands:
        if blo is None:
            blo, alo = v, n
        else:
            c = _cmp_any(_key_lo(v), _key_lo(blo))
            if c < 0 or (c == 0 and isinstance(blo, Interval) and not isinstance(v, Interval)):
                blo, alo = v, n
        if bhi is None:
            bhi, ahi = v, n
        else:
            c = _cmp_any(_key_hi(v), _key_hi(bhi))
            if c > 0 or (c == 0 and isinstance(bhi, Interval) and not isinstance(v, Interval)):
                bhi, ahi = v, n
    exact = _is_exactish(blo) and _is_exactish(bhi)
    return _Part(_lo_of(blo, prec), _hi_of(bhi, prec), exact, alo, ahi)


def _merge_parts(parts):
    parts = [p for p in parts if p is not None]
    inf, ai = parts[0].inf, parts[0].arg_inf
    sup, as_ = parts[0].sup, parts[0].arg_sup
    for p in parts[1:]:
        if p.inf < inf:
            inf, ai = p.inf, p.arg_inf
        if p.sup > sup:
            sup, as_ = p.sup, p.arg_sup
    return _Part(inf, sup, all(p.exact for p in parts), ai, as_)


# ------------------------------------------------------------------------
# term lists
# ------------------------------------------------------------------------


def _signed_terms(combo):
    """Combo as [(signed coefficient, unit-scale PhiExpr)], dropping zeros and
    the identically-zero sine rows of real eigenvalues."""
    sgn = -1 if combo.negated else 1
    out = []
    for mu, phi in ((combo.mu1, combo.phi1), (None if combo.phi2 is None else combo.s * combo.mu2, combo.phi2)):
        if phi is None or mu is None:
            continue
        c = sgn * mpq(mu) * phi.scale
        if c == 0:
            continue
        if phi.r == 1 and phi.theta.kind != "rot":
            continue
        out.append((c, replace(phi, scale=mpq(1))))
    return out


def _is_zero_lam(phi):
    return not isinstance(phi.lam, Interval) and phi.lam == 0


def _eval_terms_exact(terms, n):
    v = mpq(0)
    for c, p in terms:
        v = v + c * p.eval_exact(n)
    return v


def _safe_eval(terms, n, prec):
    try:
        return _eval_terms_exact(terms, n)
    except (ValueError, TypeError):
        v = Interval.point(mpq(0))
        for c, p in terms:
            v = v + p.eval_interval(n, prec).scale(c)
        return v


def _merge_terms(terms):
    out = []
    for c, p in terms:
        for i, (c0, p0) in enumerate(out):
            if p0.k == p.k and _cmp_any(p0.lam, p.lam) == 0:
                out[i] = (c0 + c, p0)
                break
        else:
            out.append((c, p))
    return [(c, p) for c, p in out if c != 0]


# ------------------------------------------------------------------------
# integer tails: monotonicity ranks and limits
# ------------------------------------------------------------------------


def _N_gamma_k(lam, k, mult=1):
    """Index past which the envelope factor C(t,k) lam^t of a single term is
    monotone: k + ceil(mult*k / |log lam|), with the degenerate cases 0 and k."""
    if k == 0:
        return 0
    c = _cmp_any(lam, 1)
    if c == 0:
        return k
    prec = 192
    while prec <= 1 << 14:
        g = interval_log(scalar_to_interval(lam, prec + 16), prec)
        a = g.lo if c > 0 else ext_neg(g.hi)
        if a > 0:
            return k + max(0, _ceil_q(mpq(mult * k) / a))
        prec *= 2
    raise _Imprecise(f"log enclosure of {lam!r} straddles zero")


def _gamma_iv(lam, sign, prec):
    if sign == 0:
        return Interval.point(mpq(0))
    g = interval_log(scalar_to_interval(lam, prec + 16), prec)
    ok = g.lo > 0 if sign > 0 else g.hi < 0
    if not ok:
        raise _Imprecise(f"log enclosure of {lam!r} has the wrong sign")
    return g


def _T0(m_iv, g_iv, gsign, k, prec):
    """Least integer T with t^k e^(g t) >= M for all t >= T; a Newton step
    from a point where the function is increasing and convex enough."""
    if m_iv.hi <= 0:
        return 0
    if gsign == 0:
        if m_iv.hi <= 1:
            return 1
        t = interval_pow(m_iv, Interval.point(mpq(1, k)), prec)
        return max(0, _ceil_q(t.hi))
    if g_iv.lo <= 0:
        raise _Imprecise("growth-rate enclosure straddles zero")
    t0 = 1 if k >= 0 else max(1, _ceil_q(mpq(-2 * k) / g_iv.lo))
    tp = mpq(t0) ** k if k >= 0 else 1 / (mpq(t0) ** (-k))
    f0 = interval_exp(g_iv.scale(t0), prec) * Interval.point(tp)
    d0 = f0 * (g_iv + Interval.point(mpq(k, t0)))
    if d0.lo <= 0:
        raise _Imprecise("derivative enclosure straddles zero")
    gap = m_iv.hi - f0.lo
    if gap <= 0:
        return t0
    return t0 + _ceil_q(gap / d0.lo)


def _ratio_floor(s1, s2, g1, g2, k1, k2, nb):
    # lower bound for |phi1'| / |phi2'| growth per unit exponent gap
    if s1 > 0 and s2 >= 0:
        den = g2 + Interval.point(mpq(k2, nb - k2 + 1))
        if den.lo <= 0:
            raise _Imprecise("dominated derivative bound not positive")
        out = g1 / den
    elif s1 == 0 and s2 == 0:
        out = Interval.point(mpq(k1, 2 * k2))
    elif s1 < 0:
        num = (-g1) - Interval.point(mpq(k1, nb - k1 + 1))
        if num.lo <= 0:
            raise _Imprecise("dominant decay bound not positive")
        out = num / (-g2)
    else:
        out = g1 / (-g2)
    if out.lo <= 0:
        raise _Imprecise("derivative ratio floor not positive")
    return out


def _pair_rank(c1, l1, k1, c2, l2, k2, prec):
    """Rank and eventual derivative sign for a dominant/subordinate pair of
    positive real terms, (l1, k1) lexicographically greater."""
    s1, s2 = _cmp_any(l1, 1), _cmp_any(l2, 1)
    sig = _sign_of(c1) if s1 >= 0 else -_sign_of(c1)
    nb = max(_N_gamma_k(l1, k1), _N_gamma_k(l2, k2), 2 * k1 + 1, 2 * k2 + 1)
    g1 = _gamma_iv(l1, s1, prec)
    g2 = _gamma_iv(l2, s2, prec)
    q = abs(c1) / abs(c2) * mpq(math.factorial(k2), math.factorial(k1))
    r_iv = (
        Interval.point(q)
        * scalar_to_interval(l2**k2, prec)
        / scalar_to_interval(l1**k1, prec)
    )
    if r_iv.lo <= 0:
        raise _Imprecise("amplitude ratio enclosure not positive")
    big_m = mpq(2)
    if s1 == 0 and s2 < 0:
        # dominant pure polynomial over a decaying term
        m_iv = (-g2) * Interval.point(mpq(2**k1) * big_m / k1) / r_iv
        n0 = _T0(m_iv, -g2, 1, k1 - k2 - 1, prec)
    else:
        l_iv = _ratio_floor(s1, s2, g1, g2, k1, k2, nb)
        m_iv = Interval.point(mpq(2**k1) * big_m) / (r_iv * l_iv)
        if _cmp_any(l1, l2) == 0:
            gd, gds = Interval.point(mpq(0)), 0
        else:
            gd = g1 - g2
            if gd.lo <= 0:
                raise _Imprecise("exponent gap enclosure straddles zero")
            gds = 1
        n0 = _T0(m_iv, gd, gds, k1 - k2, prec)
    return max(nb, n0), sig


def _tail_rank_terms(terms, prec):
    for c, p in terms:
        if p.theta.kind != "zero" or isinstance(p.lam, Interval) or p.lam == 0:
            return None
    terms = _merge_terms(terms)
    core = [(c, p) for c, p in terms if not (p.k == 0 and _cmp_any(p.lam, 1) == 0)]
    if not core:
        return (0, 0)
    if len(core) == 1:
        ((c, p),) = core
        s = _cmp_any(p.lam, 1)
        try:
            n = _N_gamma_k(p.lam, p.k)
        except _Imprecise:
            return None
        return (n, _sign_of(c) if s >= 0 else -_sign_of(c))
    (c1, p1), (c2, p2) = core
    cl = _cmp_any(p1.lam, p2.lam)
    if cl < 0 or (cl == 0 and p1.k < p2.k):
        (c1, p1), (c2, p2) = (c2, p2), (c1, p1)
    for pr in (prec, 2 * prec, 4 * prec, 8 * prec):
        try:
            return _pair_rank(c1, p1.lam, p1.k, c2, p2.lam, p2.k, pr)
        except _Imprecise:
            continue
    return None


def tail_rank(combo, prec=DEFAULT_PREC):
    """(N, sign) such that the combo is monotone with derivative sign `sign`
    on [N, inf); None when the combo has complex or enclosed eigenvalues.
    Constant tails report sign 0."""
    return _tail_rank_terms(_signed_terms(combo), prec)


def _limit_terms(terms):
    bc, bl, bk = None, None, None
    for c, p in terms:
        if bc is None:
            bc, bl, bk = c, p.lam, p.k
            continue
        cl = _cmp_any(p.lam, bl)
        if cl > 0 or (cl == 0 and p.k > bk):
            bc, bl, bk = c, p.lam, p.k
    s = _cmp_any(bl, 1)
    if s < 0:
        return mpq(0)
    if s == 0 and bk == 0:
        return bc
    return INF if bc > 0 else NINF


def integer_extrema(f, rank, nmin, nmax, limit=None, step=1):
    """(min, max) of f over {nmin, nmin+step, ...} up to nmax, given that f is
    monotone beyond `rank`.  Unbounded ranges take the tail from `limit`."""
    target = max(rank, nmin)
    pe = nmin + -((nmin - target) // step) * step
    if nmax is not None:
        pe = min(pe, nmax)
    vals = [(f(n), n) for n in range(nmin, pe + 1, step)]
    if nmax is None:
        if limit is None:
            raise ValueError("unbounded range needs a limit")
        vals.append((limit, None))
    elif nmax > pe:
        vals.append((f(nmax), nmax))
    lo = hi = vals[0][0]
    for v, _ in vals[1:]:
        if _cmp_any(v, lo) < 0:
            lo = v
        if _cmp_any(v, hi) > 0:
            hi = v
    return lo, hi


# ------------------------------------------------------------------------
# positive real eigenvalues on an arithmetic grid
# ------------------------------------------------------------------------


def _real_case(terms, start, stop, step, prec, cap):
    terms = _merge_terms(terms)
    if not terms:
        z = mpq(0)
        return _Part(z, z, True, start, start)
    rk = _tail_rank_terms(terms, prec)
    if rk is None:
        raise _NoRank
    target = max(rk[0], start)
    pe = start + -((start - target) // step) * step
    if stop is not None:
        pe = min(pe, stop)
    if (pe - start) // step + 1 > cap:
        raise _NoRank
    cands = [(_safe_eval(terms, n, prec), n) for n in range(start, pe + 1, step)]
    if stop is None:
        cands.append((_limit_terms(terms), None))
    elif stop > pe:
        cands.append((_safe_eval(terms, stop, prec), stop))
    return _part_from_candidates(cands, prec)


def _parity_terms(terms, parity):
    out = []
    for c, p in terms:
        if p.theta.kind == "pi":
            flip = (p.k + parity) % 2
            out.append((-c if flip else c, replace(p, theta=ANGLE_ZERO)))
        else:
            out.append((c, p))
    return out


def _parity_case(terms, a, b, prec, cap):
    parts = []
    for parity in (0, 1):
        start = a if a % 2 == parity else a + 1
        if b is not None and start > b:
            continue
        stop = None if b is None else b - ((b - parity) % 2)
        parts.append(_real_case(_parity_terms(terms, parity), start, stop, 2, prec, cap))
    return _merge_parts(parts)


def even_odd_split(combo):
    """Two combos with positive rotation-free eigenvalues that agree with
    `combo` on even and on odd indices respectively."""
    terms = _signed_terms(combo)
    for _, p in terms:
        if p.theta.kind == "rot" or isinstance(p.lam, Interval):
            raise ValueError("parity split needs real eigenvalues")
    if not terms:
        return combo, combo

    def build(ts):
        (c1, p1), *rest = ts
        if rest:
            ((c2, p2),) = rest
            return PhiCombo.of(c1, p1, c2, p2)
        return PhiCombo.of(c1, p1)

    return build(_parity_terms(terms, 0)), build(_parity_terms(terms, 1))


# ------------------------------------------------------------------------
# complex cells: phase-aligned sine form
# ------------------------------------------------------------------------


def _atan2_scalar(y, x, prec):
    """Enclosure of atan2 for exact scalar arguments, QuadExt included."""
    sy, sx = scalar_sign(y), scalar_sign(x)
    pi = pi_interval(prec + 8)
    if sx == 0:
        if sy == 0:
            raise ValueError("atan2(0, 0)")
        half = pi.scale(mpq(1, 2))
        return half if sy > 0 else -half
    if sy == 0:
        return Interval.point(mpq(0)) if sx > 0 else pi
    yiv = scalar_to_interval(y, prec + 16).abs()
    xiv = scalar_to_interval(x, prec + 16).abs()
    base = interval_atan(yiv / xiv, prec)
    if sx > 0:
        return base if sy > 0 else -base
    return (pi - base) if sy > 0 else (base - pi)


@dataclass(frozen=True)
class SineTerm:
    """amp * P_k(t) * e^(gamma t) * sin(theta t + psi) with amplitude
    sqrt(amp_sq / lam_sq^k) / k! and phase atan2(num, den); gamma and theta
    come from the cell.  Continuous relaxation of a same-cell combination."""

    amp_sq: object
    lam_sq: object
    cell: object
    k: int
    num: object
    den: object

    def amp_interval(self, prec=DEFAULT_PREC):
        scaled = scalar_to_interval(self.amp_sq, prec + 16) / scalar_to_interval(
            self.lam_sq**self.k, prec + 16
        )
        return interval_sqrt(scaled, prec).scale(mpq(1, math.factorial(self.k)))

    def gamma_interval(self, prec=DEFAULT_PREC):
        if _cmp_any(self.lam_sq, 1) == 0:
            return Interval.point(mpq(0))
        g = interval_log(scalar_to_interval(self.lam_sq, prec + 16), prec)
        return g.scale(mpq(1, 2))

    def phase_interval(self, prec=DEFAULT_PREC):
        return _atan2_scalar(self.num, self.den, prec)

    def eval_interval(self, t, prec=DEFAULT_PREC):
        t = mpq(t)
        fp = falling_product(Interval.point(t), self.k)
        growth = interval_exp(self.gamma_interval(prec).scale(t), prec)
        ang = self.cell.theta_interval(prec).scale(t) + self.phase_interval(prec)
        return self.amp_interval(prec) * fp * growth * interval_sin(ang, prec)


def combine_same_block(mu1, phi1, s, mu2, phi2):
    """Fold mu1*phi1 + s*mu2*phi2 (same cell, same k, complementary rows)
    into a single SineTerm.  mu2 = 0 or phi2 = None rewrites a lone row."""
    if phi1.theta.kind != "rot":
        raise ValueError("phase recombination needs a rotation cell")
    mu1, mu2 = mpq(mu1), mpq(0) if phi2 is None else mpq(mu2)
    if phi2 is not None and mu2 != 0:
        if phi2.theta.kind != "rot" or phi1.theta.cell != phi2.theta.cell:
            raise ValueError("terms live on different cells")
        if phi1.k != phi2.k or phi1.r == phi2.r:
            raise ValueError("terms are not complementary rows of one block")
    if phi1.r == 0:
        a, b = mu1, s * mu2
    else:
        a, b = s * mu2, mu1
    ck, sk = phi1.theta.cell.cell_power(phi1.k)
    return SineTerm(
        mu1 * mu1 + mu2 * mu2,
        phi1.lam_sq,
        phi1.theta.cell,
        phi1.k,
        a * ck - b * sk,
        b * ck + a * sk,
    )


# ------------------------------------------------------------------------
# continuous extrema of P_k(t) e^(gamma t) sin(theta t + psi)
# ------------------------------------------------------------------------


def _band_eval(band, giv, th_iv, k, psi_iv, amp_iv, prec):
    w = band.width()
    pieces = 1 if w <= mpq(1, 8) else min(16, int(8 * float(w)) + 1)
    step = w / pieces
    out = None
    for i in range(pieces):
        lo = band.lo + step * i
        hi = band.hi if i == pieces - 1 else band.lo + step * (i + 1)
        piece = Interval(lo, hi)
        fp = falling_product(piece, k)
        if not isinstance(fp, Interval):
            fp = scalar_to_interval(fp, prec)
        v = (
            amp_iv
            * fp
            * interval_exp(giv * piece, prec)
            * interval_sin(th_iv * piece + psi_iv, prec)
        )
        out = v if out is None else out.hull(v)
    return out


def _sine_core(giv, gs, th_iv, k, psi_iv, tmin, tmax, prec, amp_iv=None):
    """Candidate bands and certified extrema of amp P_k e^(gamma t) sin on
    [tmin, tmax].  Requires tmin > k - 1 and, for k > 0 with gamma < 0,
    tmin at or past the point where the envelope decreases."""
    if amp_iv is None:
        amp_iv = Interval.point(mpq(1))
    if tmax is None:
        if gs > 0 or (gs == 0 and k > 0):
            return [], NINF, INF
        # nonincreasing envelope: one full period dominates the tail
        period = (pi_interval(prec).scale(2) / th_iv).hi
        tmax = tmin + period
    pi_iv = pi_interval(prec + 8)
    if k == 0 and gs == 0:
        a_iv = pi_iv.scale(mpq(1, 2))
    else:
        s_hi = sum((mpq(1) / (tmin - l) for l in range(k)), mpq(0))
        s_lo = sum((mpq(1) / (tmax - l) for l in range(k)), mpq(0))
        h_iv = giv + Interval(s_lo, s_hi)
        if h_iv.sign() in (1, -1):
            # f' = 0 forces tan(theta t + psi) = -theta / h(t)
            a_iv = interval_atan(-(th_iv / h_iv), prec)
        else:
            half = pi_iv.scale(mpq(1, 2))
            a_iv = Interval((-half).lo, half.hi)
    q_lo = (th_iv.scale(tmin) + psi_iv - a_iv) / pi_iv
    q_hi = (th_iv.scale(tmax) + psi_iv - a_iv) / pi_iv
    l_start = _floor_q(q_lo.lo) - 1
    l_end = _ceil_q(q_hi.hi) + 1
    if l_end - l_start + 1 <= 18:
        ls = range(l_start, l_end + 1)
    else:
        # monotone envelope: extrema cluster at the ends of the range
        ls = [*range(l_start, l_start + 4), *range(l_end - 3, l_end + 1)]
    bands = [Interval.point(tmin), Interval.point(tmax)]
    for l in ls:
        t_iv = (a_iv + pi_iv.scale(l) - psi_iv) / th_iv
        lo, hi = max(t_iv.lo, tmin), min(t_iv.hi, tmax)
        if lo > hi:
            continue
        bands.append(Interval(lo, hi))
    lo = hi = None
    for band in bands:
        v = _band_eval(band, giv, th_iv, k, psi_iv, amp_iv, prec)
        lo = v.lo if lo is None else min(lo, v.lo)
        hi = v.hi if hi is None else max(hi, v.hi)
    bands.sort(key=lambda b: b.lo)
    return bands, lo, hi


def _as_interval(x, prec):
    return x if isinstance(x, Interval) else scalar_to_interval(x, prec)


def _gamma_sign(gamma, prec):
    if isinstance(gamma, Interval):
        s = gamma.sign()
        if s is None:
            raise ValueError("growth-rate enclosure straddles zero")
        return s
    return scalar_sign(gamma)


def extrema_exp_sin(gamma, theta, phase, tmin, tmax, prec=DEFAULT_PREC):
    """Bands and extrema of e^(gamma t) sin(theta t + phase) on [tmin, tmax]
    (tmax None for an unbounded range)."""
    gs = _gamma_sign(gamma, prec)
    return _sine_core(
        _as_interval(gamma, prec),
        gs,
        _as_interval(theta, prec),
        0,
        _as_interval(phase, prec),
        mpq(tmin),
        None if tmax is None else mpq(tmax),
        prec,
    )


def extrema_poly_exp_sin(gamma, theta, k, phase, tmin, tmax, prec=DEFAULT_PREC):
    """Bands and extrema of P_k(t) e^(gamma t) sin(theta t + phase), k >= 1.
    tmin must lie past k + 2k/|gamma| so the envelope is one-directional."""
    if k < 1:
        raise ValueError("polynomial order must be positive")
    gs = _gamma_sign(gamma, prec)
    if gs == 0:
        raise ValueError("zero growth rate: use the pure polynomial form")
    giv = _as_interval(gamma, prec)
    a = giv.lo if gs > 0 else ext_neg(giv.hi)
    if a <= 0:
        raise ValueError("growth-rate enclosure too wide to certify")
    need = k + _ceil_q(mpq(2 * k) / a)
    if mpq(tmin) < need:
        raise ValueError(f"range must start at or after {need}")
    return _sine_core(
        giv,
        gs,
        _as_interval(theta, prec),
        k,
        _as_interval(phase, prec),
        mpq(tmin),
        None if tmax is None else mpq(tmax),
        prec,
    )


def extrema_poly_sin(theta, k, phase, tmin, tmax, prec=DEFAULT_PREC):
    """Bands and extrema of P_k(t) sin(theta t + phase), k >= 1, tmin >= k."""
    if k < 1:
        raise ValueError("polynomial order must be positive")
    if mpq(tmin) < k:
        raise ValueError("range must start at or after k")
    return _sine_core(
        Interval.point(mpq(0)),
        0,
        _as_interval(theta, prec),
        k,
        _as_interval(phase, prec),
        mpq(tmin),
        None if tmax is None else mpq(tmax),
        prec,
    )


# ------------------------------------------------------------------------
# per-term envelopes (fallback and residual eigenvalues)
# ------------------------------------------------------------------------


def _envelope_term_bound(phi, a, b, prec):
    """Sound range of a single unit-coefficient term from its modulus
    envelope C(t,k) u^(t-k); the only route for enclosed eigenvalues."""
    liv = phi.lam_interval(prec)
    u = liv.abs().hi
    k = phi.k
    sided = phi.theta.kind == "zero" and liv.lo >= 0
    if u == 0:
        in_range = a <= k and (b is None or k <= b)
        m = mpq(1) if in_range else mpq(0)
        return (mpq(0), m) if sided else (-m, m)
    cu = _cmp_any(u, 1)
    if b is None and cu >= 0:
        m = mpq(1) if (cu == 0 and k == 0) else INF
    else:
        if b is None:
            g = interval_log(Interval.point(u), prec + 64)
            if g.hi >= 0:
                raise _Imprecise("decay enclosure straddles zero")
            peak = k if k == 0 else k + _ceil_q(mpq(k) / -g.hi)
            t_end = max(a, peak + 1)
        else:
            t_end = b
        if t_end < k:
            return (mpq(0), mpq(0))
        lo_t = mpq(max(a, k))
        guv = Interval.point(mpq(0)) if cu == 0 else interval_log(Interval.point(u), prec)
        span = Interval(lo_t, mpq(t_end))
        w = span.width()
        pieces = 1 if w == 0 else min(32, int(float(w)) + 1)
        step = w / pieces
        m = mpq(0)
        for i in range(pieces):
            plo = span.lo + step * i
            phi_ = span.hi if i == pieces - 1 else span.lo + step * (i + 1)
            piece = Interval(plo, phi_)
            fp = falling_product(piece, k)
            if not isinstance(fp, Interval):
                fp = scalar_to_interval(fp, prec)
            env = fp.scale(mpq(1, math.factorial(k))) * interval_exp(
                guv * piece.shift(-k), prec
            )
            m = max(m, env.hi)
    if m == INF:
        return (mpq(0), INF) if sided else (NINF, INF)
    return (mpq(0), m) if sided else (ext_neg(m), m)


def _single_term_bound(phi, a, b, prec, cap):
    if isinstance(phi.lam, Interval) or _is_zero_lam(phi):
        return _envelope_term_bound(phi, a, b, prec)
    one = mpq(1)
    try:
        if phi.theta.kind == "zero":
            p = _real_case([(one, phi)], a, b, 1, prec, cap)
        elif phi.theta.kind == "pi":
            p = _parity_case([(one, phi)], a, b, prec, cap)
        else:
            p = _rot_bound([(one, phi)], a, b, prec, cap)
        return p.inf, p.sup
    except (_NoRank, _Imprecise):
        return _envelope_term_bound(phi, a, b, prec)


def _per_term_sum(terms, a, b, prec, cap):
    lo = hi = mpq(0)
    for c, p in terms:
        tlo, thi = _single_term_bound(p, a, b, prec, cap)
        if c > 0:
            lo = ext_add(lo, ext_mul_scalar(c, tlo))
            hi = ext_add(hi, ext_mul_scalar(c, thi))
        else:
            lo = ext_add(lo, ext_mul_scalar(c, thi))
            hi = ext_add(hi, ext_mul_scalar(c, tlo))
    if all(not isinstance(p.lam, Interval) and p.lam is not None for _, p in terms):
        # shared magnitude ceiling tightens the independent-term sum
        env = [(abs(c), replace(p, theta=ANGLE_ZERO, r=0)) for c, p in terms]
        try:
            m = _real_case(env, a, b, 1, prec, cap).sup
            lo = max(lo, ext_neg(m))
            hi = min(hi, m)
        except (_NoRank, _Imprecise):
            pass
    return _Part(lo, hi, False, None, None)


# ------------------------------------------------------------------------
# rotation cells
# ------------------------------------------------------------------------


def _rot_bound(terms, a, b, prec, cap):
    (c1, p1) = terms[0]
    g = _sign_of(c1)
    # work on g*f so the leading coefficient is positive; undo at the end
    adj = [(g * c, p) for c, p in terms]
    if len(terms) == 2:
        (c2, p2) = terms[1]
        s, mu2 = g * _sign_of(c2), abs(c2)
    else:
        p2, s, mu2 = None, 1, mpq(0)
    form = combine_same_block(abs(c1), p1, s, mu2, p2)
    k = p1.k
    gs = _cmp_any(p1.lam_sq, 1)

    def envelope_fallback():
        lo = hi = mpq(0)
        for c, p in terms:
            tlo, thi = _envelope_term_bound(p, a, b, prec)
            lo = ext_add(lo, ext_mul_scalar(abs(c), tlo if c > 0 else ext_neg(thi)))
            hi = ext_add(hi, ext_mul_scalar(abs(c), thi if c > 0 else ext_neg(tlo)))
        return _Part(lo, hi, False, None, None)

    try:
        tmin = a if k == 0 else max(a, k if gs == 0 else _N_gamma_k(p1.lam_sq, k, 4))
    except _Imprecise:
        return envelope_fallback()
    pre_end = tmin - 1 if b is None else min(b, tmin - 1)
    if pre_end - a + 1 > cap:
        return envelope_fallback()
    cands = [(_safe_eval(adj, n, prec), n) for n in range(a, pre_end + 1)]
    if b is None or b >= tmin:
        try:
            giv = form.gamma_interval(prec)
        except ValueError:
            return envelope_fallback()
        bands, elo, ehi = _sine_core(
            giv,
            gs,
            form.cell.theta_interval(prec),
            k,
            form.phase_interval(prec),
            mpq(tmin),
            None if b is None else mpq(b),
            prec,
            form.amp_interval(prec),
        )
        cands.append((Interval(elo, ehi), None))
    part = _part_from_candidates(cands, prec)
    if g < 0:
        part = _Part(ext_neg(part.sup), ext_neg(part.inf), part.exact, part.arg_sup, part.arg_inf)
    return part


# ------------------------------------------------------------------------
# dispatch
# ------------------------------------------------------------------------


def _enum_part(terms, a, b, prec):
    return _part_from_candidates([(_safe_eval(terms, n, prec), n) for n in range(a, b + 1)], prec)


def _spike_split(terms, a, b, prec, cap):
    """Zero eigenvalues contribute single spikes at n = k; bound the rest on
    the segments between them."""
    pts = sorted(
        {p.k for _, p in terms if _is_zero_lam(p) and p.k >= a and (b is None or p.k <= b)}
    )
    rest = [(c, p) for c, p in terms if not _is_zero_lam(p)]
    cands, parts = [], []
    cur = a
    for sp in pts:
        if sp > cur:
            parts.append(_dispatch(rest, cur, sp - 1, prec, cap))
        cands.append((_safe_eval(terms, sp, prec), sp))
        cur = sp + 1
    if b is None or cur <= b:
        parts.append(_dispatch(rest, cur, b, prec, cap))
    if cands:
        parts.append(_part_from_candidates(cands, prec))
    return _merge_parts(parts)


def _dispatch(terms, a, b, prec, cap):
    if not terms:
        z = mpq(0)
        return _Part(z, z, True, a, a)
    if b is not None and b - a <= _ENUM_CUTOFF:
        return _enum_part(terms, a, b, prec)
    if any(_is_zero_lam(p) for _, p in terms):
        return _spike_split(terms, a, b, prec, cap)
    if any(isinstance(p.lam, Interval) for _, p in terms):
        return _per_term_sum(terms, a, b, prec, cap)
    kinds = {p.theta.kind for _, p in terms}
    try:
        if kinds == {"zero"}:
            return _real_case(terms, a, b, 1, prec, cap)
        if kinds <= {"zero", "pi"}:
            return _parity_case(terms, a, b, prec, cap)
        if kinds == {"rot"}:
            if len(terms) == 1:
                return _rot_bound(terms, a, b, prec, cap)
            (c1, p1), (c2, p2) = terms
            if p1.theta.cell == p2.theta.cell and p1.k == p2.k and p1.r != p2.r:
                return _rot_bound(terms, a, b, prec, cap)
    except (_NoRank, _Imprecise):
        pass
    return _per_term_sum(terms, a, b, prec, cap)


def bound_combo(combo, nmin, nmax=None, prec=DEFAULT_PREC, cap=PREFIX_CAP):
    """Sound range of the combo over integer indices in [nmin, nmax]; nmax
    None means unbounded.  Exact whenever every contributing extremum was
    pinned to a rational value or a limit."""
    if nmax is not None and nmax < nmin:
        raise ValueError("empty index range")
    nmin = int(nmin)
    nmax = None if nmax is None else int(nmax)
    if combo.negated:
        r = bound_combo(replace(combo, negated=False), nmin, nmax, prec, cap)
        return BoundResult(ext_neg(r.sup), ext_neg(r.inf), r.exact, r.arg_sup, r.arg_inf)
    p = _dispatch(_signed_terms(combo), nmin, nmax, prec, cap)
    return BoundResult(p.inf, p.sup, p.exact, p.arg_inf, p.arg_sup)
