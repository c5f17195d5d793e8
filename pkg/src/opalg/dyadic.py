"""Dyadic rationals and outward-rounded dyadic intervals.

Dyadic numbers m*2^e (m odd or zero) are the currency of every certified
answer: they are exactly representable, order-comparable with integer
arithmetic only, and print losslessly.  DyadicInterval is a closed
interval [lo, hi] of dyadics; every rounding operation moves lo down and
hi up, so a DyadicInterval produced by this module always contains the
exact real it stands for.
"""

import gmpy2
from gmpy2 import mpq, mpfr, mpz

from .errors import OpalgError


class Dyadic:
    """Exact dyadic rational man * 2**exp, normalized (man odd or zero)."""

    __slots__ = ("man", "exp")

    def __init__(self, man=0, exp=0):
        man = int(man)
        exp = int(exp)
        if man == 0:
            exp = 0
        else:
            while man % 2 == 0:
                man //= 2
                exp += 1
        self.man = man
        self.exp = exp

    # -- constructors -------------------------------------------------

    @staticmethod
    def from_int(n):
        return Dyadic(n, 0)

    @staticmethod
    def pow2(e):
        """2**e as an exact dyadic."""
        return Dyadic(1, e)

    @staticmethod
    def from_mpq(q, prec, up):
        """Round an exact rational to a prec-bit dyadic, directed.

        up=True rounds toward +inf, up=False toward -inf.
        """
        q = mpq(q)
        if q.denominator == 1:
            return Dyadic(int(q.numerator), 0)
        num, den = int(q.numerator), int(q.denominator)
        # scale so that the quotient has about `prec` bits
        shift = prec - (abs(num).bit_length() - den.bit_length())
        if shift < 0:
            shift = 0
        scaled = num << shift
        quo, rem = divmod(scaled, den)
        if rem != 0 and up:
            quo += 1
        return Dyadic(quo, -shift)

    @staticmethod
    def from_float(x):
        """Exact conversion of an IEEE double (must be finite)."""
        m, e = gmpy2.mpfr(x).as_mantissa_exp()
        return Dyadic(int(m), int(e))

    @staticmethod
    def from_mpfr(x):
        """Exact conversion of a finite mpfr."""
        if not gmpy2.is_finite(x):
            raise OpalgError(f"cannot convert non-finite mpfr {x}")
        m, e = x.as_mantissa_exp()
        return Dyadic(int(m), int(e))

    # -- exact arithmetic ---------------------------------------------

    def __add__(self, other):
        other = dyadic(other)
        e = min(self.exp, other.exp)
        return Dyadic(
            (self.man << (self.exp - e)) + (other.man << (other.exp - e)), e
        )

    __radd__ = __add__

    def __neg__(self):
        return Dyadic(-self.man, self.exp)

    def __sub__(self, other):
        return self + (-dyadic(other))

    def __rsub__(self, other):
        return dyadic(other) + (-self)

    def __mul__(self, other):
        other = dyadic(other)
        return Dyadic(self.man * other.man, self.exp + other.exp)

    __rmul__ = __mul__

    def __abs__(self):
        return Dyadic(abs(self.man), self.exp)

    # -- comparisons (exact) ------------------------------------------

    def _cmp(self, other):
        other = dyadic(other)
        e = min(self.exp, other.exp)
        a = self.man << (self.exp - e)
        b = other.man << (other.exp - e)
        return (a > b) - (a < b)

    def __lt__(self, other):
        return self._cmp(other) < 0

    def __le__(self, other):
        return self._cmp(other) <= 0

    def __gt__(self, other):
        return self._cmp(other) > 0

    def __ge__(self, other):
        return self._cmp(other) >= 0

    def __eq__(self, other):
        try:
            return self._cmp(other) == 0
        except (TypeError, ValueError):
            return NotImplemented

    def __hash__(self):
        return hash((self.man, self.exp))

    # -- rounding and conversion --------------------------------------

    def round(self, prec, up):
        """Round to at most prec mantissa bits, directed (up toward +inf)."""
        bits = abs(self.man).bit_length()
        if bits <= prec:
            return self
        drop = bits - prec
        mag, rem = divmod(abs(self.man), 1 << drop)
        if self.man > 0:
            if rem and up:
                mag += 1
            return Dyadic(mag, self.exp + drop)
        if rem and not up:
            mag += 1
        return Dyadic(-mag, self.exp + drop)

    def as_mpq(self):
        if self.exp >= 0:
            return mpq(self.man * (mpz(1) << self.exp), 1)
        return mpq(self.man, mpz(1) << (-self.exp))

    def as_mpfr(self, prec=None):
        """Exact mpfr (precision defaults to the mantissa width)."""
        if prec is None:
            prec = max(2, abs(self.man).bit_length())
        with gmpy2.context(precision=prec + 4):
            return mpfr(self.man) * mpfr(2) ** self.exp

    def __float__(self):
        return float(self.as_mpfr(64))

    def bit_length(self):
        return abs(self.man).bit_length()

    def __repr__(self):
        return f"Dyadic({self.man}, {self.exp})"

    def __str__(self):
        if self.exp == 0:
            return str(self.man)
        return f"{self.man}*2^{self.exp}"


def dyadic(x):
    """Coerce int / float / mpfr / Dyadic to Dyadic (exactly)."""
    if isinstance(x, Dyadic):
        return x
    if isinstance(x, (int, type(mpz()))):
        return Dyadic(int(x), 0)
    if isinstance(x, float):
        return Dyadic.from_float(x)
    if isinstance(x, type(mpfr())):
        return Dyadic.from_mpfr(x)
    raise TypeError(f"cannot coerce {type(x)} to Dyadic")


def parse_dyadic(s):
    """Inverse of str(Dyadic): accepts 'm' or 'm*2^e'."""
    s = s.strip()
    if "*2^" in s:
        m, e = s.split("*2^")
        return Dyadic(int(m), int(e))
    return Dyadic(int(s), 0)


D_ZERO = Dyadic(0)
D_ONE = Dyadic(1)


class DyadicInterval:
    """Closed interval [lo, hi] of exact dyadics, lo <= hi.

    Arithmetic is exact where it stays exact (add, sub, mul, neg) and the
    `round(prec)` method rounds outward to bounded mantissas.  Every
    operation preserves containment of the true value.
    """

    __slots__ = ("lo", "hi")

    def __init__(self, lo, hi):
        lo = dyadic(lo)
        hi = dyadic(hi)
        if lo > hi:
            raise OpalgError(f"interval bounds out of order: [{lo}, {hi}]")
        self.lo = lo
        self.hi = hi

    @staticmethod
    def point(x):
        x = dyadic(x)
        return DyadicInterval(x, x)

    @staticmethod
    def from_mpq(q, prec=64):
        """Tight enclosure of an exact rational."""
        q = mpq(q)
        if q.denominator == 1:
            return DyadicInterval.point(Dyadic(int(q.numerator), 0))
        return DyadicInterval(
            Dyadic.from_mpq(q, prec, up=False), Dyadic.from_mpq(q, prec, up=True)
        )

    def width(self):
        return self.hi - self.lo

    def mid(self):
        s = self.lo + self.hi
        return Dyadic(s.man, s.exp - 1)

    def contains(self, x):
        if isinstance(x, DyadicInterval):
            return self.lo <= x.lo and x.hi <= self.hi
        if isinstance(x, type(mpq())):
            return self.lo.as_mpq() <= x <= self.hi.as_mpq()
        x = dyadic(x)
        return self.lo <= x <= self.hi

    def contains_mpq(self, q):
        q = mpq(q)
        return self.lo.as_mpq() <= q <= self.hi.as_mpq()

    def __add__(self, other):
        other = di(other)
        return DyadicInterval(self.lo + other.lo, self.hi + other.hi)

    __radd__ = __add__

    def __neg__(self):
        return DyadicInterval(-self.hi, -self.lo)

    def __sub__(self, other):
        return self + (-di(other))

    def __rsub__(self, other):
        return di(other) + (-self)

    def __mul__(self, other):
        other = di(other)
        cands = [
            self.lo * other.lo,
            self.lo * other.hi,
            self.hi * other.lo,
            self.hi * other.hi,
        ]
        return DyadicInterval(min(cands), max(cands))

    __rmul__ = __mul__

    def round(self, prec):
        """Outward rounding to prec-bit mantissas."""
        return DyadicInterval(
            self.lo.round(prec, up=False), self.hi.round(prec, up=True)
        )

    def hull(self, other):
        other = di(other)
        return DyadicInterval(min(self.lo, other.lo), max(self.hi, other.hi))

    def intersects(self, other):
        other = di(other)
        return self.lo <= other.hi and other.lo <= self.hi

    def widen(self, eps):
        eps = dyadic(eps)
        return DyadicInterval(self.lo - eps, self.hi + eps)

    def __repr__(self):
        return f"DyadicInterval({self.lo}, {self.hi})"

    def __str__(self):
        return f"[{self.lo}, {self.hi}]"


def di(x):
    if isinstance(x, DyadicInterval):
        return x
    return DyadicInterval.point(dyadic(x))
