"""Interval matrices: mpfr rectangles (any precision, small dims) and
numpy midpoint-radius (float64, large dims).

MidRadMatrix rigor model: IEEE-754 binary64, round-to-nearest, unit
roundoff u = 2^-53.  Dot products of length n evaluated in any order
(including FMA / blocked BLAS) satisfy |fl(x.y) - x.y| <= gamma * |x|.|y|
with gamma ~ n*u; we budget (2n+8)*u for complex accumulation and
multiply every radius formula by INFL = 1 + 2^-38 (covers the rounding
of the radius computation itself for n <= 2^13) and add an absolute pad
2^-960 per entry (covers underflow).  Strassen-type reassociation would
break entrywise bounds; numpy's BLAS does classical matmul.
"""

import numpy as np
from gmpy2 import mpfr

from .dyadic import Dyadic, DyadicInterval
from .errors import OpalgError
from .matrices import RationalMatrix
from .rint import ComplexInterval, RealInterval, ctx_pair

U = 2.0 ** -53
INFL = 1.0 + 2.0 ** -38
PAD = 2.0 ** -960


class IntervalMatrix:
    """n x n matrix of ComplexInterval rectangles (mpfr bounds)."""

    __slots__ = ("n", "rows", "prec")

    def __init__(self, n, rows, prec):
        self.n = n
        self.rows = rows
        self.prec = prec

    @staticmethod
    def zero(n, prec):
        z = ComplexInterval.zero(prec)
        return IntervalMatrix(n, [[z] * n for _ in range(n)], prec)

    @staticmethod
    def identity(n, prec):
        m = IntervalMatrix.zero(n, prec)
        one = ComplexInterval.one(prec)
        rows = [list(r) for r in m.rows]
        for i in range(n):
            rows[i][i] = one
        return IntervalMatrix(n, rows, prec)

    @staticmethod
    def from_rational(m, prec):
        rows = [
            [ComplexInterval.from_gauss(x, prec) for x in r] for r in m.rows
        ]
        return IntervalMatrix(m.n, rows, prec)

    @staticmethod
    def from_scalar_diag(n, scalar, prec):
        m = IntervalMatrix.zero(n, prec)
        rows = [list(r) for r in m.rows]
        for i in range(n):
            rows[i][i] = scalar
        return IntervalMatrix(n, rows, prec)

    def __add__(self, other):
        self._check(other)
        return IntervalMatrix(
            self.n,
            [[a + b for a, b in zip(ra, rb)] for ra, rb in zip(self.rows, other.rows)],
            self.prec,
        )

    def __neg__(self):
        return IntervalMatrix(self.n, [[-x for x in r] for r in self.rows], self.prec)

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other):
        if isinstance(other, IntervalMatrix):
            self._check(other)
            n = self.n
            cols = list(zip(*other.rows))
            out = []
            for ra in self.rows:
                row = []
                for c in cols:
                    acc = None
                    for a, b in zip(ra, c):
                        t = a * b
                        acc = t if acc is None else acc + t
                    row.append(acc)
                out.append(row)
            return IntervalMatrix(n, out, self.prec)
        return self.scale(other)

    def scale(self, scalar):
        if isinstance(scalar, RealInterval):
            scalar = ComplexInterval.from_real(scalar)
        return IntervalMatrix(
            self.n, [[x * scalar for x in r] for r in self.rows], self.prec
        )

    def adjoint(self):
        n = self.n
        return IntervalMatrix(
            n,
            [[self.rows[j][i].conj() for j in range(n)] for i in range(n)],
            self.prec,
        )

    def hermitized(self):
        """Midpoint-symmetric enclosure (x_ij + conj(x_ji))/2; contains the
        true value whenever the true matrix is Hermitian, and is exactly
        self-adjoint as an interval matrix."""
        from gmpy2 import mpq

        n = self.n
        half = RealInterval.from_mpq(mpq(1, 2), self.prec)
        rows = [[None] * n for _ in range(n)]
        for i in range(n):
            for j in range(i, n):
                v = (self.rows[i][j] + self.rows[j][i].conj()) * half
                rows[i][j] = v
                rows[j][i] = v.conj()
            d = rows[i][i]
            rows[i][i] = ComplexInterval.from_real(d.re)
        return IntervalMatrix(n, rows, self.prec)

    # -- bounds --

    def abs_upper_entries(self):
        return [[x.abs_upper() for x in r] for r in self.rows]

    def norm_upper_mpfr(self):
        """Upper bound on the operator norm: min(sqrt(n1*ninf), frobenius)."""
        _, up = ctx_pair(self.prec)
        a = self.abs_upper_entries()
        col = [mpfr(0)] * self.n
        frob2 = mpfr(0)
        rowmax = mpfr(0)
        for i in range(self.n):
            s = mpfr(0)
            for j in range(self.n):
                v = a[i][j]
                s = up.add(s, v)
                col[j] = up.add(col[j], v)
                frob2 = up.add(frob2, up.mul(v, v))
            rowmax = max(rowmax, s)
        n1 = max(col) if col else mpfr(0)
        return min(up.sqrt(up.mul(n1, rowmax)), up.sqrt(frob2))

    def norm_upper(self):
        return Dyadic.from_mpfr(self.norm_upper_mpfr())

    def max_width(self):
        _, up = ctx_pair(self.prec)
        w = mpfr(0)
        for r in self.rows:
            for x in r:
                w = max(w, x.width())
        return w

    def entry(self, i, j):
        return self.rows[i][j]

    def _check(self, other):
        if self.n != other.n:
            raise OpalgError("dimension mismatch")

    def to_midrad(self):
        n = self.n
        mid = np.zeros((n, n), dtype=np.complex128)
        rad = np.zeros((n, n), dtype=np.float64)
        for i in range(n):
            for j in range(n):
                x = self.rows[i][j]
                mr = float(x.re.mid())
                mi = float(x.im.mid())
                mid[i, j] = complex(mr, mi)
                # distance from the float midpoint to the rectangle corners
                rr = max(abs(float(x.re.lo) - mr), abs(float(x.re.hi) - mr))
                ri = max(abs(float(x.im.lo) - mi), abs(float(x.im.hi) - mi))
                rad[i, j] = (rr + ri) * INFL + PAD
        return MidRadMatrix(mid, rad)


class MidRadMatrix:
    """Entrywise enclosure mid +- rad (complex disk bound via |.|_1)."""

    __slots__ = ("mid", "rad")

    def __init__(self, mid, rad):
        self.mid = np.ascontiguousarray(mid, dtype=np.complex128)
        self.rad = np.ascontiguousarray(rad, dtype=np.float64)
        if self.mid.shape != self.rad.shape:
            raise OpalgError("mid/rad shape mismatch")

    @property
    def n(self):
        return self.mid.shape[0]

    @staticmethod
    def exact(mid):
        mid = np.asarray(mid, dtype=np.complex128)
        return MidRadMatrix(mid, np.zeros(mid.shape))

    @staticmethod
    def identity(n):
        return MidRadMatrix.exact(np.eye(n, dtype=np.complex128))

    @staticmethod
    def from_rational(m):
        n = m.n
        mid = np.zeros((n, n), dtype=np.complex128)
        rad = np.zeros((n, n), dtype=np.float64)
        for i in range(n):
            for j in range(n):
                z = m.rows[i][j]
                re, im = float(z.re), float(z.im)
                mid[i, j] = complex(re, im)
                if (
                    int(z.re.denominator) == 1
                    and int(z.im.denominator) == 1
                    and abs(int(z.re.numerator)) < (1 << 52)
                    and abs(int(z.im.numerator)) < (1 << 52)
                ):
                    continue  # exactly representable, radius 0
                # float(mpq) rounds to nearest: error <= u*|value| each part
                rad[i, j] = (abs(re) + abs(im)) * U * INFL + PAD
        return MidRadMatrix(mid, rad)

    @staticmethod
    def from_permutation(perm):
        n = len(perm)
        mid = np.zeros((n, n), dtype=np.complex128)
        mid[np.asarray(perm), np.arange(n)] = 1.0
        return MidRadMatrix(mid, np.zeros((n, n)))

    def _absmid(self):
        return np.abs(self.mid.real) + np.abs(self.mid.imag)

    def __add__(self, other):
        mid = self.mid + other.mid
        am = np.abs(mid.real) + np.abs(mid.imag)
        rad = (self.rad + other.rad + U * am) * INFL + PAD
        return MidRadMatrix(mid, rad)

    def __neg__(self):
        return MidRadMatrix(-self.mid, self.rad.copy())

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other):
        if not isinstance(other, MidRadMatrix):
            raise TypeError("use scale() for scalars")
        n = self.mid.shape[1]
        cm = self.mid @ other.mid
        am, bm = self._absmid(), other._absmid()
        err = (2.0 * n + 8.0) * U * (am @ bm)
        rad = (am @ other.rad + self.rad @ (bm + other.rad) + err) * INFL + PAD * n
        return MidRadMatrix(cm, rad)

    def adjoint(self):
        return MidRadMatrix(self.mid.conj().T.copy(), self.rad.T.copy())

    def scale_complex(self, s, s_rad=0.0):
        mid = self.mid * s
        mag = abs(s.real) + abs(s.imag)
        am = self._absmid()
        rad = (mag * self.rad + s_rad * (am + self.rad) + 2 * U * mag * am) * INFL + PAD
        return MidRadMatrix(mid, rad)

    def norm_upper(self):
        """Dyadic upper bound on the operator norm."""
        am = self._absmid() + self.rad
        n1 = float(np.max(np.sum(am, axis=0), initial=0.0))
        ninf = float(np.max(np.sum(am, axis=1), initial=0.0))
        frob = float(np.sqrt(np.sum(am * am)))
        b = min((n1 * ninf) ** 0.5, frob) * INFL * INFL + PAD
        return Dyadic.from_float(b)

    def entry_interval(self, i, j):
        """Exact DyadicInterval rectangle containing entry (i, j)."""
        m = self.mid[i, j]
        r = Dyadic.from_float(float(self.rad[i, j]))
        re = Dyadic.from_float(m.real)
        im = Dyadic.from_float(m.imag)
        return (
            DyadicInterval(re - r, re + r),
            DyadicInterval(im - r, im + r),
        )

    def norm_enclosure(self):
        """DyadicInterval enclosing the operator norm of every matrix in the
        enclosure.  Upper: midpoint bound + radius bound.  Lower: rigorous
        ||M x|| / ||x|| at a float singular vector (midrad matvec)."""
        from .dyadic import DyadicInterval

        up = self.norm_upper()
        n = self.n
        try:
            _, _, vh = np.linalg.svd(self.mid)
            x = vh[0].conj()
        except np.linalg.LinAlgError:
            x = np.zeros(n, dtype=np.complex128)
            x[0] = 1.0
        nx = float(np.linalg.norm(x))
        if nx == 0.0:
            return DyadicInterval(Dyadic(0), up)
        # ||x|| <= nx * (1 + small); rigorous upper on ||x||
        x_norm_up = nx * (1 + n * 4 * U) + PAD
        y_mid = self.mid @ x
        absx = np.abs(x.real) + np.abs(x.imag)
        y_err = self.rad @ absx + (2.0 * n + 8.0) * U * (
            (np.abs(self.mid.real) + np.abs(self.mid.imag)) @ absx
        )
        y_low = np.maximum(
            np.abs(y_mid) * (1 - 8 * U) - y_err * (1 + 2.0 ** -38) - PAD, 0.0
        )
        lo = float(np.linalg.norm(y_low)) * (1 - n * 4 * U) / x_norm_up
        lo_d = Dyadic.from_float(max(lo, 0.0))
        if lo_d > up:
            lo_d = up
        return DyadicInterval(lo_d, up)

    def to_interval_matrix(self, prec):
        n = self.n
        rows = []
        for i in range(n):
            row = []
            for j in range(n):
                re_iv, im_iv = self.entry_interval(i, j)
                row.append(
                    ComplexInterval(
                        RealInterval.from_bounds(
                            re_iv.lo.as_mpfr(), re_iv.hi.as_mpfr(), prec
                        ),
                        RealInterval.from_bounds(
                            im_iv.lo.as_mpfr(), im_iv.hi.as_mpfr(), prec
                        ),
                    )
                )
            rows.append(row)
        return IntervalMatrix(n, rows, prec)
