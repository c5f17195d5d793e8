"""Exact scalar arithmetic: rationals and Gaussian rationals.

Rationals are gmpy2.mpq throughout (arbitrary precision, always reduced,
positive denominator).  GaussianRational is a thin pair of mpq's closed
under the *-algebra operations.  No floating point enters this module.
"""

from gmpy2 import mpq, mpz


def as_mpq(x):
    """Coerce int / mpq / Fraction / 'a/b' string to mpq."""
    if isinstance(x, type(mpq())):
        return x
    return mpq(x)


class GaussianRational:
    """re + im*i with re, im exact rationals."""

    __slots__ = ("re", "im")

    def __init__(self, re=0, im=0):
        self.re = as_mpq(re)
        self.im = as_mpq(im)

    def __repr__(self):
        return f"GaussianRational({self.re!r}, {self.im!r})"

    def __eq__(self, other):
        other = gauss(other)
        return self.re == other.re and self.im == other.im

    def __hash__(self):
        return hash((self.re, self.im))

    def __bool__(self):
        return bool(self.re) or bool(self.im)

    def __add__(self, other):
        other = gauss(other)
        return GaussianRational(self.re + other.re, self.im + other.im)

    __radd__ = __add__

    def __neg__(self):
        return GaussianRational(-self.re, -self.im)

    def __sub__(self, other):
        other = gauss(other)
        return GaussianRational(self.re - other.re, self.im - other.im)

    def __rsub__(self, other):
        return gauss(other) - self

    def __mul__(self, other):
        try:
            other = gauss(other)
        except TypeError:
            return NotImplemented
        return GaussianRational(
            self.re * other.re - self.im * other.im,
            self.re * other.im + self.im * other.re,
        )

    __rmul__ = __mul__

    def conj(self):
        return GaussianRational(self.re, -self.im)

    def inverse(self):
        n = self.re * self.re + self.im * self.im
        if n == 0:
            raise ZeroDivisionError("inverse of 0")
        return GaussianRational(self.re / n, -self.im / n)

    def __truediv__(self, other):
        return self * gauss(other).inverse()

    def abs_sq(self):
        """|z|^2 as an exact rational."""
        return self.re * self.re + self.im * self.im

    def is_real(self):
        return self.im == 0

    def to_complex(self):
        return complex(self.re) + 1j * complex(self.im)


def gauss(x):
    """Coerce int / mpq / complex-free inputs to GaussianRational."""
    if isinstance(x, GaussianRational):
        return x
    if isinstance(x, (int, type(mpq()), type(mpz()))):
        return GaussianRational(x, 0)
    if isinstance(x, tuple) and len(x) == 2:
        return GaussianRational(x[0], x[1])
    raise TypeError(f"cannot coerce {type(x)} to GaussianRational")


GR_ZERO = GaussianRational(0, 0)
GR_ONE = GaussianRational(1, 0)
GR_I = GaussianRational(0, 1)


def mpq_str(q):
    """Render an mpq as 'a/b' (or 'a' when integral)."""
    q = as_mpq(q)
    if q.denominator == 1:
        return str(q.numerator)
    return f"{q.numerator}/{q.denominator}"


def gauss_str(z):
    """Render a GaussianRational as 'a/b+c/d i' (exact token format)."""
    z = gauss(z)
    re, im = mpq_str(z.re), mpq_str(z.im)
    sign = "+" if z.im >= 0 else "-"
    im_abs = mpq_str(abs(z.im))
    return f"{re}{sign}{im_abs}i"


def parse_gauss(tok):
    """Inverse of gauss_str; also accepts bare 'a/b'."""
    tok = tok.strip().replace(" ", "")
    if tok.endswith("i"):
        body = tok[:-1]
        # split at the last +/- that is not leading
        for k in range(len(body) - 1, 0, -1):
            if body[k] in "+-" and body[k - 1] not in "+-/":
                re = mpq(body[:k])
                im = mpq(body[k + 1:]) if body[k + 1:] else mpq(1)
                if body[k] == "-":
                    im = -im
                return GaussianRational(re, im)
        return GaussianRational(0, mpq(body) if body else 1)
    return GaussianRational(mpq(tok), 0)
