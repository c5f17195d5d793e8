"""Exact Gaussian-rational matrices and the standard matrix-unit ordering.

The special points of the standard presentation of M_n are the matrix
units in row-major order e11, e12, ..., enn (frozen in the certificate
format).  All arithmetic here is exact; certified norms live in
normcert.py.
"""

from gmpy2 import mpq

from .exact import GR_ONE, GR_ZERO, GaussianRational, gauss, gauss_str, parse_gauss
from .errors import OpalgError


class RationalMatrix:
    __slots__ = ("n", "rows")

    def __init__(self, n, rows=None):
        self.n = n
        if rows is None:
            z = GR_ZERO
            self.rows = [[z] * n for _ in range(n)]
        else:
            if len(rows) != n or any(len(r) != n for r in rows):
                raise OpalgError("rows do not form an n x n matrix")
            self.rows = [[gauss(x) for x in r] for r in rows]

    # -- constructors --

    @staticmethod
    def zero(n):
        return RationalMatrix(n)

    @staticmethod
    def identity(n):
        m = RationalMatrix(n)
        for i in range(n):
            m.rows[i][i] = GR_ONE
        return m

    @staticmethod
    def matrix_unit(n, i, j):
        m = RationalMatrix(n)
        m.rows[i][j] = GR_ONE
        return m

    @staticmethod
    def from_permutation(perm):
        """Permutation matrix P with P e_j = e_{perm[j]} (columns are basis vectors)."""
        n = len(perm)
        m = RationalMatrix(n)
        for j, i in enumerate(perm):
            m.rows[i][j] = GR_ONE
        return m

    @staticmethod
    def diag(entries):
        n = len(entries)
        m = RationalMatrix(n)
        for i, x in enumerate(entries):
            m.rows[i][i] = gauss(x)
        return m

    # -- algebra --

    def __eq__(self, other):
        return (
            isinstance(other, RationalMatrix)
            and self.n == other.n
            and self.rows == other.rows
        )

    def __add__(self, other):
        self._check(other)
        return RationalMatrix(
            self.n,
            [
                [a + b for a, b in zip(ra, rb)]
                for ra, rb in zip(self.rows, other.rows)
            ],
        )

    def __neg__(self):
        return RationalMatrix(self.n, [[-x for x in r] for r in self.rows])

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other):
        if isinstance(other, RationalMatrix):
            self._check(other)
            n = self.n
            cols = list(zip(*other.rows))
            out = []
            for ra in self.rows:
                row = []
                for c in cols:
                    acc = GR_ZERO
                    for a, b in zip(ra, c):
                        if a and b:
                            acc = acc + a * b
                    row.append(acc)
                out.append(row)
            return RationalMatrix(n, out)
        return self.scale(other)

    def __rmul__(self, other):
        return self.scale(other)

    def scale(self, scalar):
        scalar = gauss(scalar)
        return RationalMatrix(self.n, [[scalar * x for x in r] for r in self.rows])

    def adjoint(self):
        n = self.n
        return RationalMatrix(
            n, [[self.rows[j][i].conj() for j in range(n)] for i in range(n)]
        )

    def transpose(self):
        n = self.n
        return RationalMatrix(n, [[self.rows[j][i] for j in range(n)] for i in range(n)])

    def conj_entries(self):
        return RationalMatrix(self.n, [[x.conj() for x in r] for r in self.rows])

    def trace(self):
        t = GR_ZERO
        for i in range(self.n):
            t = t + self.rows[i][i]
        return t

    def kron(self, other):
        """Kronecker (tensor) product, row-major leg order."""
        n, m = self.n, other.n
        out = RationalMatrix(n * m)
        for i in range(n):
            for j in range(n):
                a = self.rows[i][j]
                if not a:
                    continue
                for k in range(m):
                    for l in range(m):
                        b = other.rows[k][l]
                        if b:
                            out.rows[i * m + k][j * m + l] = a * b
        return out

    def is_zero(self):
        return all(not x for r in self.rows for x in r)

    def is_unitary(self):
        """Exact check u* u == 1 == u u*."""
        ident = RationalMatrix.identity(self.n)
        return (self.adjoint() * self) == ident and (self * self.adjoint()) == ident

    def is_hermitian(self):
        return self == self.adjoint()

    # -- bounds (exact rationals) --

    def frobenius_sq(self):
        return sum((x.abs_sq() for r in self.rows for x in r), mpq(0))

    def entry_l1_bounds(self):
        """|entry| upper bounds as mpq, using |z| <= |re| + |im|."""
        return [[abs(x.re) + abs(x.im) for x in r] for r in self.rows]

    def op_norm_sq_upper(self):
        """Exact rational upper bound on ||M||^2 (min of Frobenius^2 and
        row-sum * column-sum bound)."""
        b = self.entry_l1_bounds()
        r1 = max((sum(col) for col in zip(*b)), default=mpq(0))
        rinf = max((sum(row) for row in b), default=mpq(0))
        return min(self.frobenius_sq(), r1 * rinf)

    # -- misc --

    def _check(self, other):
        if self.n != other.n:
            raise OpalgError(f"dimension mismatch: {self.n} vs {other.n}")

    def apply_vec(self, vec):
        return [
            sum((a * x for a, x in zip(row, vec) if a and x), GR_ZERO)
            for row in self.rows
        ]

    def to_complex_lists(self):
        return [[x.to_complex() for x in r] for r in self.rows]

    def __repr__(self):
        return f"RationalMatrix({self.n})"


def matrix_unit_index(n, i, j):
    """Frozen special-point index of e_ij in M_n (row-major, 0-based)."""
    return i * n + j


def matrix_unit_from_index(n, k):
    if not 0 <= k < n * n:
        raise OpalgError(f"matrix unit index {k} out of range for M_{n}")
    return divmod(k, n)


def write_matrix(m):
    """Matrix file format: first line n, then n^2 lines 'a/b+c/d i' row-major."""
    lines = [str(m.n)]
    for row in m.rows:
        for x in row:
            s = gauss_str(x)
            lines.append(s[:-1] + " i" if s.endswith("i") else s)
    return "\n".join(lines) + "\n"


def read_matrix(text):
    lines = [ln.strip() for ln in text.strip().splitlines() if ln.strip()]
    if not lines:
        raise OpalgError("empty matrix file")
    n = int(lines[0])
    if len(lines) != 1 + n * n:
        raise OpalgError(f"expected {n * n} entries, found {len(lines) - 1}")
    entries = [parse_gauss(ln) for ln in lines[1:]]
    rows = [entries[i * n:(i + 1) * n] for i in range(n)]
    return RationalMatrix(n, rows)


def partial_trace_second(m, dim_a, dim_b):
    """(id (x) tr/dim_b) of m in M_{dim_a} (x) M_{dim_b}: the trace-normalized
    conditional expectation onto the first factor."""
    if m.n != dim_a * dim_b:
        raise OpalgError("partial trace dimension mismatch")
    out = RationalMatrix(dim_a)
    inv = mpq(1, dim_b)
    for i in range(dim_a):
        for j in range(dim_a):
            acc = GR_ZERO
            for k in range(dim_b):
                acc = acc + m.rows[i * dim_b + k][j * dim_b + k]
            out.rows[i][j] = GaussianRational(acc.re * inv, acc.im * inv)
    return out


def partial_trace_first(m, dim_a, dim_b):
    """(tr/dim_a (x) id) of m: conditional expectation onto the second factor."""
    if m.n != dim_a * dim_b:
        raise OpalgError("partial trace dimension mismatch")
    out = RationalMatrix(dim_b)
    inv = mpq(1, dim_a)
    for k in range(dim_b):
        for l in range(dim_b):
            acc = GR_ZERO
            for i in range(dim_a):
                acc = acc + m.rows[i * dim_b + k][i * dim_b + l]
            out.rows[k][l] = GaussianRational(acc.re * inv, acc.im * inv)
    return out
