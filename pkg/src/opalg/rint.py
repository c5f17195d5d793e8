"""Real and complex interval scalars over mpfr with directed rounding.

A RealInterval stores lo, hi as mpfr values produced under RoundDown /
RoundUp contexts, so every operation encloses the exact result.  mpfr
values are dyadic rationals, hence convert losslessly to Dyadic for
certificates.  ComplexInterval is the rectangle re + i*im.

Working precision is an explicit argument everywhere; there is no global
mutable precision state.
"""

import gmpy2
from gmpy2 import mpfr, mpq

from .dyadic import Dyadic, DyadicInterval
from .errors import OpalgError

_CTX_CACHE = {}


def ctx_pair(prec):
    """(round-down, round-up) context pair at the given precision."""
    got = _CTX_CACHE.get(prec)
    if got is None:
        got = (
            gmpy2.context(precision=prec, round=gmpy2.RoundDown),
            gmpy2.context(precision=prec, round=gmpy2.RoundUp),
        )
        _CTX_CACHE[prec] = got
    return got


class RealInterval:
    __slots__ = ("lo", "hi", "prec")

    def __init__(self, lo, hi, prec):
        self.lo = lo
        self.hi = hi
        self.prec = prec

    # -- constructors --

    @staticmethod
    def from_mpq(q, prec):
        dn, up = ctx_pair(prec)
        q = mpq(q)
        z = mpfr(0)
        return RealInterval(dn.add(z, q), up.add(z, q), prec)

    @staticmethod
    def from_int(n, prec):
        dn, up = ctx_pair(prec)
        z = mpfr(0)
        return RealInterval(dn.add(z, n), up.add(z, n), prec)

    @staticmethod
    def from_dyadic(d, prec):
        return RealInterval.from_mpq(d.as_mpq(), prec)

    @staticmethod
    def from_bounds(lo, hi, prec):
        dn, up = ctx_pair(prec)
        z = mpfr(0)
        return RealInterval(dn.add(z, lo), up.add(z, hi), prec)

    @staticmethod
    def zero(prec):
        z = mpfr(0)
        return RealInterval(z, z, prec)

    @staticmethod
    def pi(prec):
        dn, up = ctx_pair(prec)
        return RealInterval(dn.const_pi(), up.const_pi(), prec)

    # -- arithmetic --

    def __add__(self, other):
        dn, up = ctx_pair(self.prec)
        o = _ri(other, self.prec)
        return RealInterval(dn.add(self.lo, o.lo), up.add(self.hi, o.hi), self.prec)

    __radd__ = __add__

    def __neg__(self):
        return RealInterval(-self.hi, -self.lo, self.prec)

    def __sub__(self, other):
        return self + (-_ri(other, self.prec))

    def __rsub__(self, other):
        return _ri(other, self.prec) + (-self)

    def __mul__(self, other):
        dn, up = ctx_pair(self.prec)
        o = _ri(other, self.prec)
        a, b, c, d = self.lo, self.hi, o.lo, o.hi
        lo = min(dn.mul(a, c), dn.mul(a, d), dn.mul(b, c), dn.mul(b, d))
        hi = max(up.mul(a, c), up.mul(a, d), up.mul(b, c), up.mul(b, d))
        return RealInterval(lo, hi, self.prec)

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = _ri(other, self.prec)
        if o.lo <= 0 <= o.hi:
            raise OpalgError("interval division by an interval containing 0")
        return self * o.inverse()

    def inverse(self):
        dn, up = ctx_pair(self.prec)
        if self.lo <= 0 <= self.hi:
            raise OpalgError("interval inverse of an interval containing 0")
        return RealInterval(dn.div(1, self.hi), up.div(1, self.lo), self.prec)

    def sqrt(self):
        dn, up = ctx_pair(self.prec)
        if self.lo < 0:
            raise OpalgError(f"sqrt of interval reaching below 0: [{self.lo}, {self.hi}]")
        return RealInterval(dn.sqrt(self.lo), up.sqrt(self.hi), self.prec)

    def intpow(self, k):
        if k == 0:
            return RealInterval.from_int(1, self.prec)
        out = self
        for _ in range(k - 1):
            out = out * self
        return out

    def abs(self):
        if self.lo >= 0:
            return self
        if self.hi <= 0:
            return -self
        return RealInterval(mpfr(0), max(-self.lo, self.hi), self.prec)

    def clamp_nonneg(self):
        """Intersect with [0, inf); valid when the true value is >= 0."""
        if self.lo >= 0:
            return self
        return RealInterval(mpfr(0), max(self.hi, mpfr(0)), self.prec)

    def hull(self, other):
        o = _ri(other, self.prec)
        return RealInterval(min(self.lo, o.lo), max(self.hi, o.hi), self.prec)

    def max_with(self, other):
        o = _ri(other, self.prec)
        return RealInterval(max(self.lo, o.lo), max(self.hi, o.hi), self.prec)

    # -- queries --

    def width(self):
        _, up = ctx_pair(self.prec)
        return up.sub(self.hi, self.lo)

    def mid(self):
        dn, _ = ctx_pair(self.prec + 8)
        return dn.div(dn.add(self.lo, self.hi), 2)

    def contains_zero(self):
        return self.lo <= 0 <= self.hi

    def to_dyadic(self):
        return DyadicInterval(Dyadic.from_mpfr(self.lo), Dyadic.from_mpfr(self.hi))

    def __repr__(self):
        return f"RI[{self.lo}, {self.hi}]"


def _ri(x, prec):
    if isinstance(x, RealInterval):
        return x
    if isinstance(x, int):
        return RealInterval.from_int(x, prec)
    if isinstance(x, type(mpq())):
        return RealInterval.from_mpq(x, prec)
    if isinstance(x, Dyadic):
        return RealInterval.from_dyadic(x, prec)
    raise TypeError(f"cannot coerce {type(x)} to RealInterval")


def cospi2(x, prec):
    """Enclosure of cos(2*pi*x) for a RealInterval x (narrow or not)."""
    return _trig_2pi(x, prec, is_cos=True)


def sinpi2(x, prec):
    """Enclosure of sin(2*pi*x) for a RealInterval x."""
    return _trig_2pi(x, prec, is_cos=False)


def _trig_2pi(x, prec, is_cos):
    # work at padded precision; argument = 2*pi*x
    p = prec + 16
    dn, up = ctx_pair(p)
    two_pi = RealInterval.pi(p) * RealInterval.from_int(2, p)
    arg = two_pi * RealInterval(x.lo, x.hi, p)
    if float(up.sub(arg.hi, arg.lo)) >= 3.0:
        return RealInterval.from_bounds(-1, 1, prec)
    f_dn = dn.cos if is_cos else dn.sin
    f_up = up.cos if is_cos else up.sin
    # endpoint values, outward
    vals_lo = [min(f_dn(arg.lo), f_dn(arg.hi))]
    vals_hi = [max(f_up(arg.lo), f_up(arg.hi))]
    # interior critical points of cos: k*pi; of sin: pi/2 + k*pi
    pi_iv = RealInterval.pi(p)
    shift = 0 if is_cos else mpq(1, 2)
    # candidate k with (k + shift)*pi in [arg.lo, arg.hi]
    approx_lo = float(dn.div(arg.lo, pi_iv.hi)) - 1.5
    approx_hi = float(up.div(arg.hi, pi_iv.lo)) + 1.5
    for k in range(int(approx_lo) - 1, int(approx_hi) + 2):
        crit = pi_iv * RealInterval.from_mpq(mpq(k) + shift, p)
        if crit.hi < arg.lo or crit.lo > arg.hi:
            continue
        if is_cos:
            v = 1 if k % 2 == 0 else -1
        else:
            v = 1 if k % 2 == 0 else -1
        vals_lo.append(mpfr(v))
        vals_hi.append(mpfr(v))
    lo = min(vals_lo)
    hi = max(vals_hi)
    lo = max(lo, mpfr(-1))
    hi = min(hi, mpfr(1))
    return RealInterval.from_bounds(lo, hi, prec)


class ComplexInterval:
    """Rectangle re + i*im of RealIntervals."""

    __slots__ = ("re", "im")

    def __init__(self, re, im):
        self.re = re
        self.im = im

    @property
    def prec(self):
        return self.re.prec

    @staticmethod
    def from_gauss(z, prec):
        return ComplexInterval(
            RealInterval.from_mpq(z.re, prec), RealInterval.from_mpq(z.im, prec)
        )

    @staticmethod
    def zero(prec):
        return ComplexInterval(RealInterval.zero(prec), RealInterval.zero(prec))

    @staticmethod
    def one(prec):
        return ComplexInterval(RealInterval.from_int(1, prec), RealInterval.zero(prec))

    @staticmethod
    def from_real(x):
        return ComplexInterval(x, RealInterval.zero(x.prec))

    def __add__(self, other):
        return ComplexInterval(self.re + other.re, self.im + other.im)

    def __neg__(self):
        return ComplexInterval(-self.re, -self.im)

    def __sub__(self, other):
        return ComplexInterval(self.re - other.re, self.im - other.im)

    def __mul__(self, other):
        if isinstance(other, RealInterval):
            return ComplexInterval(self.re * other, self.im * other)
        return ComplexInterval(
            self.re * other.re - self.im * other.im,
            self.re * other.im + self.im * other.re,
        )

    __rmul__ = __mul__

    def conj(self):
        return ComplexInterval(self.re, -self.im)

    def scale_real(self, x):
        return ComplexInterval(self.re * x, self.im * x)

    def abs_sq(self):
        return self.re * self.re + self.im * self.im

    def abs_upper(self):
        """mpfr upper bound on |z|."""
        _, up = ctx_pair(self.prec)
        m_re = max(abs(self.re.lo), abs(self.re.hi))
        m_im = max(abs(self.im.lo), abs(self.im.hi))
        return up.sqrt(up.add(up.mul(m_re, m_re), up.mul(m_im, m_im)))

    def mag_interval(self):
        """Enclosure of |z|."""
        sq = self.abs_sq()
        lo = max(sq.lo, mpfr(0))
        return RealInterval.from_bounds(lo, sq.hi, sq.prec).sqrt()

    def contains_zero(self):
        return self.re.contains_zero() and self.im.contains_zero()

    def width(self):
        return max(self.re.width(), self.im.width())

    def __repr__(self):
        return f"CI({self.re!r}, {self.im!r})"
