"""Exact scalar arithmetic: rationals, quadratic surds, and outward-rounded
interval arithmetic with certified transcendental functions.

Rationals are gmpy2.mpq throughout (canonical form is maintained by gmpy2).
Infinite bounds are the float infinities, used only in comparisons and
min/max, never in rational arithmetic.

The transcendental evaluators work on dyadic enclosures: a value is bracketed
by integers scaled by a power of two, every rounding is directed outward, and
every series truncation adds an explicit remainder bound.  No floating point
enters any enclosure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import gmpy2
from gmpy2 import mpq, mpz

INF = float("inf")
NINF = float("-inf")

Scalar = object  # mpq | QuadExt | int


def rat(x, y=None):
    """Exact rational from int, string ('3/2', '1.5', '-0.25') or mpq."""
    if y is not None:
        return mpq(x, y)
    if isinstance(x, str):
        return mpq(x)
    return mpq(x)


def is_finite(x) -> bool:
    return x != INF and x != NINF


def ext_neg(x):
    if x == INF:
        return NINF
    if x == NINF:
        return INF
    return -x


def ext_add(x, y):
    # inf + (-inf) is a caller bug, let it raise
    if x == INF or y == INF:
        if x == NINF or y == NINF:
            raise ValueError("inf + -inf")
        return INF
    if x == NINF or y == NINF:
        return NINF
    return x + y


def _ext_ipow(x, n):
    if x == INF:
        return INF
    if x == NINF:
        return NINF if n % 2 else INF
    return x ** n


def ext_mul_scalar(c, x):
    """c exact rational, x possibly infinite."""
    if x == INF or x == NINF:
        if c == 0:
            return mpq(0)
        return x if c > 0 else ext_neg(x)
    return c * x


# ------------------------------------------------------------------------
# square-free decomposition (for QuadExt normalization)
# ------------------------------------------------------------------------

_SMALL_PRIMES = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47]


def squarefree_decompose(n):
    """n >= 0 -> (s, d) with n = s*s*d, d square-free (up to any unfactored
    prime-square cofactor beyond the trial bound, which does not occur for
    inputs of the size this analyzer produces)."""
    n = mpz(n)
    if n == 0:
        return mpz(0), mpz(1)
    s = mpz(1)
    for p in _SMALL_PRIMES:
        while n % (p * p) == 0:
            n //= p * p
            s *= p
    # peel off a remaining perfect-square cofactor, if any
    r = gmpy2.isqrt(n)
    if r * r == n:
        return s * r, mpz(1)
    # trial divide odd candidates beyond the list
    f = mpz(_SMALL_PRIMES[-1])
    while f * f * f * f <= n:
        f += 2
        while n % (f * f) == 0:
            n //= f * f
            s *= f
    r = gmpy2.isqrt(n)
    if r * r == n:
        return s * r, mpz(1)
    return s, n


# ------------------------------------------------------------------------
# quadratic extension field Q(sqrt(d))
# ------------------------------------------------------------------------


class QuadExt:
    """a + b*sqrt(d) with rational a, b and square-free integer d > 1.

    Construction through quadext() collapses to plain mpq whenever b = 0,
    so a QuadExt instance always has an irrational part.  Mixed arithmetic
    with ints and mpq promotes; two QuadExt operands must share d.
    """

    __slots__ = ("a", "b", "d")

    def __init__(self, a, b, d):
        self.a = mpq(a)
        self.b = mpq(b)
        self.d = int(d)

    def __repr__(self):
        return f"({self.a} + {self.b}*sqrt({self.d}))"

    def _coerce(self, other):
        if isinstance(other, QuadExt):
            if other.d != self.d:
                raise ValueError(f"mixed extensions sqrt({self.d}) vs sqrt({other.d})")
            return other
        if isinstance(other, (int, type(mpq(0)))) or type(other).__name__ == "mpz":
            return QuadExt(other, 0, self.d)
        return None

    def __add__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return quadext(self.a + o.a, self.b + o.b, self.d)

    __radd__ = __add__

    def __neg__(self):
        return QuadExt(-self.a, -self.b, self.d)

    def __sub__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return quadext(self.a - o.a, self.b - o.b, self.d)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return quadext(
            self.a * o.a + self.b * o.b * self.d,
            self.a * o.b + self.b * o.a,
            self.d,
        )

    __rmul__ = __mul__

    def inverse(self):
        n = self.a * self.a - self.b * self.b * self.d
        if n == 0:
            raise ZeroDivisionError("quadext zero divide")
        return quadext(self.a / n, -self.b / n, self.d)

    def __truediv__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        if isinstance(o, QuadExt):
            return self * o.inverse()
        return quadext(self.a / o, self.b / o, self.d)

    def __rtruediv__(self, other):
        return self.inverse() * other

    def __pow__(self, e):
        if e < 0:
            return self.inverse() ** (-e)
        out = mpq(1)
        base = self
        while e:
            if e & 1:
                out = base * out
            base = base * base
            e >>= 1
        return out

    def conj(self):
        return QuadExt(self.a, -self.b, self.d)

    def sign(self):
        a, b = self.a, self.b
        if b == 0:
            return -1 if a < 0 else (0 if a == 0 else 1)
        if a == 0:
            return -1 if b < 0 else 1
        if a > 0 and b > 0:
            return 1
        if a < 0 and b < 0:
            return -1
        # opposite signs: compare a^2 with b^2 d
        lhs, rhs = a * a, b * b * self.d
        if a > 0:  # b < 0
            return 1 if lhs > rhs else (0 if lhs == rhs else -1)
        return -1 if lhs > rhs else (0 if lhs == rhs else 1)

    def __eq__(self, other):
        try:
            o = self._coerce(other)
        except ValueError:
            return False
        if o is None:
            return NotImplemented
        if not isinstance(o, QuadExt):
            return False
        return self.a == o.a and self.b == o.b

    def __hash__(self):
        return hash((self.a, self.b, self.d))

    def _cmp(self, other):
        o = self._coerce(other)
        if o is None:
            if other == INF:
                return -1
            if other == NINF:
                return 1
            return NotImplemented
        return scalar_sign(self - o)

    def __lt__(self, other):
        c = self._cmp(other)
        return NotImplemented if c is NotImplemented else c < 0

    def __le__(self, other):
        c = self._cmp(other)
        return NotImplemented if c is NotImplemented else c <= 0

    def __gt__(self, other):
        c = self._cmp(other)
        return NotImplemented if c is NotImplemented else c > 0

    def __ge__(self, other):
        c = self._cmp(other)
        return NotImplemented if c is NotImplemented else c >= 0

    def to_interval(self, prec=128):
        s = interval_sqrt(Interval.point(mpq(self.d)), prec)
        return s.scale(self.b).shift(self.a)


def quadext(a, b, d):
    """Canonical element of Q(sqrt(d)); returns plain mpq when possible."""
    a, b = mpq(a), mpq(b)
    if b == 0:
        return a
    d = mpz(d)
    if d < 0:
        raise ValueError("negative radicand; complex values are handled elsewhere")
    s, d0 = squarefree_decompose(d)
    b = b * s
    if d0 <= 1:
        return a + b * d0
    return QuadExt(a, b, int(d0))


def scalar_sign(x):
    if isinstance(x, QuadExt):
        return x.sign()
    return -1 if x < 0 else (0 if x == 0 else 1)


def scalar_to_interval(x, prec=128):
    if isinstance(x, QuadExt):
        return x.to_interval(prec)
    if isinstance(x, Interval):
        return x
    return Interval.point(mpq(x))


# ------------------------------------------------------------------------
# intervals
# ------------------------------------------------------------------------


@dataclass(frozen=True)
class Interval:
    """Closed interval [lo, hi]; endpoints mpq or the float infinities.

    All arithmetic is exact on rational endpoints (no rounding is needed);
    the transcendental functions below perform their own outward rounding
    before building the result interval.
    """

    lo: object
    hi: object

    def __post_init__(self):
        if self.lo > self.hi:
            raise ValueError(f"malformed interval [{self.lo}, {self.hi}]")

    @staticmethod
    def point(x):
        x = mpq(x)
        return Interval(x, x)

    @staticmethod
    def make(lo, hi):
        lo = lo if lo in (INF, NINF) else mpq(lo)
        hi = hi if hi in (INF, NINF) else mpq(hi)
        return Interval(lo, hi)

    @property
    def is_point(self) -> bool:
        return self.lo == self.hi

    def width(self):
        if not is_finite(self.lo) or not is_finite(self.hi):
            return INF
        return self.hi - self.lo

    def mid(self):
        if not (is_finite(self.lo) and is_finite(self.hi)):
            raise ValueError("mid of unbounded interval")
        return (self.lo + self.hi) / 2

    def contains(self, x) -> bool:
        return self.lo <= x <= self.hi

    def contains_interval(self, other: "Interval") -> bool:
        return self.lo <= other.lo and other.hi <= self.hi

    def hull(self, other: "Interval") -> "Interval":
        return Interval(min(self.lo, other.lo), max(self.hi, other.hi))

    def __add__(self, other):
        if not isinstance(other, Interval):
            other = scalar_to_interval(other)
        return Interval(ext_add(self.lo, other.lo), ext_add(self.hi, other.hi))

    __radd__ = __add__

    def __neg__(self):
        return Interval(ext_neg(self.hi), ext_neg(self.lo))

    def __sub__(self, other):
        if not isinstance(other, Interval):
            other = scalar_to_interval(other)
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def shift(self, c):
        c = mpq(c)
        return Interval(ext_add(self.lo, c), ext_add(self.hi, c))

    def scale(self, c):
        c = mpq(c)
        if c >= 0:
            return Interval(ext_mul_scalar(c, self.lo), ext_mul_scalar(c, self.hi))
        return Interval(ext_mul_scalar(c, self.hi), ext_mul_scalar(c, self.lo))

    def __mul__(self, other):
        if not isinstance(other, Interval):
            return self.scale(other)
        cands = []
        for a in (self.lo, self.hi):
            for b in (other.lo, other.hi):
                if (a in (INF, NINF)) or (b in (INF, NINF)):
                    sa = 0 if a == 0 else (1 if a > 0 else -1)
                    sb = 0 if b == 0 else (1 if b > 0 else -1)
                    if sa == 0 or sb == 0:
                        cands.append(mpq(0))
                    else:
                        cands.append(INF if sa * sb > 0 else NINF)
                else:
                    cands.append(a * b)
        return Interval(min(cands), max(cands))

    __rmul__ = __mul__

    def inverse(self):
        if self.lo <= 0 <= self.hi:
            raise ZeroDivisionError("interval contains zero")
        lo = mpq(0) if self.hi == INF else 1 / self.hi
        hi = mpq(0) if self.lo == NINF else 1 / self.lo
        return Interval(lo, hi)

    def __truediv__(self, other):
        if not isinstance(other, Interval):
            other = scalar_to_interval(other)
        return self * other.inverse()

    def abs(self):
        if self.lo >= 0:
            return self
        if self.hi <= 0:
            return -self
        return Interval(mpq(0), max(ext_neg(self.lo), self.hi))

    def int_pow(self, n: int) -> "Interval":
        """Tight power for integer n >= 0."""
        if n == 0:
            return Interval.point(mpq(1))
        if self.lo >= 0:
            return Interval(_ext_ipow(self.lo, n), _ext_ipow(self.hi, n))
        if self.hi <= 0:
            lo, hi = _ext_ipow(self.lo, n), _ext_ipow(self.hi, n)
            return Interval(lo, hi) if n % 2 else Interval(hi, lo)
        if n % 2:
            return Interval(_ext_ipow(self.lo, n), _ext_ipow(self.hi, n))
        m = max(ext_neg(self.lo), self.hi)
        return Interval(mpq(0), _ext_ipow(m, n))

    def straddles_zero(self) -> bool:
        return self.lo <= 0 <= self.hi

    def sign(self):
        """-1 / 0 / +1 when certain, None when the enclosure straddles zero."""
        if self.lo > 0:
            return 1
        if self.hi < 0:
            return -1
        if self.lo == 0 == self.hi:
            return 0
        return None


# ------------------------------------------------------------------------
# combinatorial helpers
# ------------------------------------------------------------------------


def binom(n, k):
    """Exact binomial coefficient as mpq."""
    return mpq(gmpy2.bincoef(int(n), int(k)))


def falling_product(t, k):
    """prod_{l=0}^{k-1} (t - l); works on mpq, QuadExt and Interval alike."""
    out = Interval.point(mpq(1)) if isinstance(t, Interval) else mpq(1)
    for l in range(k):
        out = out * (t - l)
    return out


# ------------------------------------------------------------------------
# dyadic enclosures for transcendental functions
#
# A point enclosure is a pair of mpq endpoints produced from integer
# computations at a working precision of `w` fractional bits.
# ------------------------------------------------------------------------


def _floor_scaled(x: mpq, w: int):
    """floor(x * 2^w) as mpz."""
    n = x.numerator << w
    return n // x.denominator


def _dyadic_down(x: mpq, w: int) -> mpq:
    return mpq(_floor_scaled(x, w), mpz(1) << w)


def _dyadic_up(x: mpq, w: int) -> mpq:
    n = x.numerator << w
    d = x.denominator
    return mpq(-((-n) // d), mpz(1) << w)


def _round_out(iv: Interval, w: int) -> Interval:
    lo = iv.lo if iv.lo in (INF, NINF) else _dyadic_down(iv.lo, w)
    hi = iv.hi if iv.hi in (INF, NINF) else _dyadic_up(iv.hi, w)
    return Interval(lo, hi)


_atan_cache: dict = {}
_pi_cache: dict = {}
_ln2_cache: dict = {}


def _atan_taylor_point(t: mpq, w: int) -> Interval:
    """Enclosure of atan(t) for |t| <= 1/2 via the alternating series."""
    assert -1 <= 2 * t <= 1
    term = mpq(t)
    total = mpq(0)
    t2 = t * t
    i = 0
    while True:
        total += term / (2 * i + 1)
        term = -term * t2
        i += 1
        bound = abs(term) / (2 * i + 1)
        if bound.numerator.bit_length() + w < bound.denominator.bit_length() or bound == 0:
            break
    return _round_out(Interval(total - bound, total + bound), w)


def pi_interval(prec: int = 128) -> Interval:
    """Machin: pi = 16 atan(1/5) - 4 atan(1/239)."""
    if prec in _pi_cache:
        return _pi_cache[prec]
    w = prec + 16
    a = _atan_taylor_point(mpq(1, 5), w)
    b = _atan_taylor_point(mpq(1, 239), w)
    out = _round_out(a.scale(16) - b.scale(4), prec + 8)
    _pi_cache[prec] = out
    return out


def _ln2_interval(w: int) -> Interval:
    if w in _ln2_cache:
        return _ln2_cache[w]
    # ln 2 = 2 atanh(1/3)
    t = mpq(1, 3)
    term = t
    total = mpq(0)
    i = 0
    while True:
        total += term / (2 * i + 1)
        term *= t * t
        i += 1
        bound = term / (2 * i + 1) * mpq(9, 8)  # geometric tail, ratio 1/9
        if bound.numerator.bit_length() + w < bound.denominator.bit_length():
            break
    out = _round_out(Interval(2 * total, 2 * (total + bound)), w)
    _ln2_cache[w] = out
    return out


def _exp_point(x: mpq, w: int) -> Interval:
    """Enclosure of exp(x) for rational x."""
    if x == 0:
        return Interval.point(mpq(1))
    # scale into |x'| <= 1/2 by k halvings, then square k times
    k = 0
    ax = abs(x)
    while 2 * ax > 1:
        ax /= 2
        k += 1
    ws = w + 2 * k + 8
    xs = _dyadic_down(x / (mpz(1) << k), ws)  # exact-ish; slop covered below
    xs_iv = Interval(xs, _dyadic_up(x / (mpz(1) << k), ws))
    term = mpq(1)
    total = mpq(0)
    i = 0
    while True:
        total += term
        i += 1
        term = term * xs / i
        bound = abs(term) * 2  # sum_{j>=i} |xs|^j/j! <= 2 |xs|^i/i! for |xs|<=1/2
        if bound == 0 or bound.numerator.bit_length() + ws < bound.denominator.bit_length():
            break
    # account for the rounding of xs: exp is 2-Lipschitz-ish on [-1/2,1/2]
    slop = 2 * xs_iv.width() + bound
    iv = Interval(total - slop, total + slop)
    for _ in range(k):
        iv = _round_out(iv * iv, ws)
    if iv.lo < 0:
        iv = Interval(mpq(0), iv.hi)
    return _round_out(iv, w)


def _log_point(x: mpq, w: int) -> Interval:
    if x <= 0:
        raise ValueError("log of non-positive value")
    # x = m * 2^e with m in [3/4, 3/2)
    e = x.numerator.bit_length() - x.denominator.bit_length()
    m = x / (mpz(1) << e) if e >= 0 else x * (mpz(1) << (-e))
    if 2 * m >= 3:
        m /= 2
        e += 1
    if m < mpq(3, 4):
        m *= 2
        e -= 1
    t = (m - 1) / (m + 1)  # |t| <= 1/5
    term = t
    total = mpq(0)
    i = 0
    while True:
        total += term / (2 * i + 1)
        term *= t * t
        i += 1
        bound = abs(term) / (2 * i + 1) * mpq(26, 25)
        if bound == 0 or bound.numerator.bit_length() + w < bound.denominator.bit_length():
            break
    lnm = Interval(2 * (total - bound), 2 * (total + bound))
    out = lnm + _ln2_interval(w + 8).scale(e)
    return _round_out(out, w)


def _sin_taylor_point(c: mpq, w: int) -> Interval:
    """Enclosure of sin(c) for |c| <= 4."""
    term = mpq(c)
    total = mpq(0)
    c2 = c * c
    i = 0
    while True:
        total += term
        i += 1
        term = -term * c2 / ((2 * i) * (2 * i + 1))
        bound = abs(term)
        if bound == 0 or bound.numerator.bit_length() + w < bound.denominator.bit_length():
            break
    iv = Interval(total - bound, total + bound)
    one = Interval(mpq(-1), mpq(1))
    if not one.contains_interval(iv):
        iv = Interval(max(iv.lo, mpq(-1)), min(iv.hi, mpq(1)))
    return _round_out(iv, w)


def _cos_taylor_point(c: mpq, w: int) -> Interval:
    term = mpq(1)
    total = mpq(0)
    c2 = c * c
    i = 0
    while True:
        total += term
        i += 1
        term = -term * c2 / ((2 * i - 1) * (2 * i))
        bound = abs(term)
        if bound == 0 or bound.numerator.bit_length() + w < bound.denominator.bit_length():
            break
    iv = Interval(total - bound, total + bound)
    if iv.lo < -1 or iv.hi > 1:
        iv = Interval(max(iv.lo, mpq(-1)), min(iv.hi, mpq(1)))
    return _round_out(iv, w)


def _reduce_angle(x: mpq, w: int):
    """x - 2 pi q as a small interval, with q = nearest integer to x/(2 pi)."""
    pi = pi_interval(w + max(0, x.numerator.bit_length() - x.denominator.bit_length()) + 16)
    q = int(math.floor(float(x / (2 * pi.mid())) + 0.5))
    red = Interval.point(x) - pi.scale(2 * q)
    return red, q


def _sin_point(x: mpq, w: int) -> Interval:
    if x == 0:
        return Interval.point(mpq(0))
    red = Interval.point(x) if -4 <= x <= 4 else _reduce_angle(x, w)[0]
    c = red.mid()
    base = _sin_taylor_point(_dyadic_down(c, w + 8), w + 8)
    r = red.width() / 2 + mpq(1, mpz(1) << (w + 8))
    return _round_out(Interval(base.lo - r, base.hi + r), w)


def _cos_point(x: mpq, w: int) -> Interval:
    if x == 0:
        return Interval.point(mpq(1))
    red = Interval.point(x) if -4 <= x <= 4 else _reduce_angle(x, w)[0]
    c = red.mid()
    base = _cos_taylor_point(_dyadic_down(c, w + 8), w + 8)
    r = red.width() / 2 + mpq(1, mpz(1) << (w + 8))
    return _round_out(Interval(base.lo - r, base.hi + r), w)


def _atan_point(x: mpq, w: int) -> Interval:
    neg = x < 0
    if neg:
        x = -x
    if x > 1:
        half_pi = pi_interval(w + 8).scale(mpq(1, 2))
        inner = _atan_point(1 / x, w + 4)
        out = half_pi - inner
    else:
        # halve the angle until the series converges fast:
        # atan(x) = 2 atan(x / (1 + sqrt(1 + x^2)))
        doublings = 0
        iv = Interval.point(x)
        while iv.hi > mpq(1, 2) and doublings < 4:
            s = interval_sqrt(Interval.point(mpq(1)) + iv * iv, w + 8)
            iv = _round_out(iv / (s.shift(1)), w + 8)
            doublings += 1
        lo = _atan_taylor_point(iv.lo, w + 8)
        hi = _atan_taylor_point(iv.hi, w + 8)
        out = Interval(lo.lo, hi.hi).scale(mpz(1) << doublings)
    if neg:
        out = -out
    return _round_out(out, w)


def interval_sqrt(x: Interval, prec: int = 128) -> Interval:
    """sqrt on [lo, hi], lo >= 0, outward-rounded dyadic endpoints."""
    if x.lo < 0:
        raise ValueError("sqrt of negative interval")
    w = prec + 8
    if x.lo in (INF, NINF) or x.lo == 0:
        lo = mpq(0)
    else:
        n = _floor_scaled(x.lo, 2 * w)
        lo = mpq(gmpy2.isqrt(n), mpz(1) << w)
    if x.hi == INF:
        return Interval(lo, INF)
    n = x.hi.numerator << (2 * w)
    r = gmpy2.isqrt(-((-n) // x.hi.denominator))
    hi = mpq(r + 1, mpz(1) << w)
    return Interval(lo, hi)


def interval_exp(x: Interval, prec: int = 128) -> Interval:
    w = prec + 8
    lo = mpq(0) if x.lo == NINF else _exp_point(x.lo, w).lo
    if x.hi == INF:
        return Interval(lo, INF)
    return Interval(lo, _exp_point(x.hi, w).hi)


def interval_log(x: Interval, prec: int = 128) -> Interval:
    if x.lo in (NINF,) or x.lo <= 0:
        raise ValueError("log requires a strictly positive lower bound")
    w = prec + 8
    lo = _log_point(x.lo, w).lo
    hi = INF if x.hi == INF else _log_point(x.hi, w).hi
    return Interval(lo, hi)


def _trig_range(x: Interval, prec: int, fn_point, peak_shift: mpq, trough_shift: mpq):
    """Shared sin/cos range logic; peaks at peak_shift*pi + 2 pi k, troughs at
    trough_shift*pi + 2 pi k.  Membership tests err toward inclusion (sound)."""
    if x.lo in (INF, NINF) or x.hi in (INF, NINF):
        return Interval(mpq(-1), mpq(1))
    pi = pi_interval(prec + 16)
    if x.width() >= 2 * pi.hi:
        return Interval(mpq(-1), mpq(1))
    out = fn_point(x.lo, prec + 8).hull(fn_point(x.hi, prec + 8))
    two_pi = pi.scale(2)

    def may_contain(shift_iv: Interval) -> bool:
        # is there possibly an integer k with shift + 2 pi k inside x?
        try:
            approx = (float(x.lo) + float(x.hi)) / 2
            k0 = math.floor((approx - float(shift_iv.lo)) / (2 * math.pi))
        except OverflowError:
            return True
        for k in range(k0 - 2, k0 + 3):
            cand = shift_iv + two_pi.scale(k)
            if cand.hi >= x.lo and cand.lo <= x.hi:
                return True
        return False

    if may_contain(pi.scale(peak_shift)):
        out = Interval(out.lo, mpq(1))
    if may_contain(pi.scale(trough_shift)):
        out = Interval(mpq(-1), out.hi)
    return _round_out(Interval(max(out.lo, mpq(-1)), min(out.hi, mpq(1))), prec)


def interval_sin(x: Interval, prec: int = 128) -> Interval:
    return _trig_range(x, prec, _sin_point, mpq(1, 2), mpq(-1, 2))


def interval_cos(x: Interval, prec: int = 128) -> Interval:
    return _trig_range(x, prec, _cos_point, mpq(0), mpq(1))


def interval_atan(x: Interval, prec: int = 128) -> Interval:
    w = prec + 8
    if x.lo == NINF:
        lo = (-pi_interval(w).scale(mpq(1, 2))).lo
    else:
        lo = _atan_point(x.lo, w).lo
    if x.hi == INF:
        hi = pi_interval(w).scale(mpq(1, 2)).hi
    else:
        hi = _atan_point(x.hi, w).hi
    return _round_out(Interval(lo, hi), prec)


def interval_atan2(y, x, prec: int = 128) -> Interval:
    """Angle of the exact rational point (x, y), in (-pi, pi]."""
    y, x = mpq(y), mpq(x)
    pi = pi_interval(prec + 8)
    if x == 0:
        if y == 0:
            raise ValueError("atan2(0, 0)")
        half = pi.scale(mpq(1, 2))
        return half if y > 0 else -half
    if x > 0:
        return interval_atan(Interval.point(y / x), prec)
    base = interval_atan(Interval.point(y / x), prec + 8)
    if y >= 0:
        return _round_out(base + pi, prec)
    return _round_out(base - pi, prec)


def interval_pow(x: Interval, y: Interval, prec: int = 128) -> Interval:
    """x^y = exp(y log x) for x > 0."""
    return interval_exp(interval_log(x, prec + 8) * y, prec)


_TRANSCENDENTALS = {
    "exp": interval_exp,
    "log": interval_log,
    "sin": interval_sin,
    "cos": interval_cos,
    "arctan": interval_atan,
    "sqrt": interval_sqrt,
}


def interval_transcendental(name: str, x: Interval, prec: int = 128, y: Interval | None = None) -> Interval:
    """Certified enclosure of f over x; 'pow' takes the exponent via y."""
    if name == "pow":
        if y is None:
            raise ValueError("pow needs an exponent interval")
        return interval_pow(x, y, prec)
    try:
        f = _TRANSCENDENTALS[name]
    except KeyError:
        raise ValueError(f"unknown transcendental {name!r}") from None
    return f(x, prec)
