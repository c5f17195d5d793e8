"""UHF algebras as matrix inductive limits, and the leg-permutation
supplier for the M_{2^infinity} self-absorption demo.

A stage-s element of M_{2^infinity} lives in M_{2^s} (legs 1..s); the
connecting embedding is x |-> x (x) 1.  B = A (x) A is presented
stagewise with leg order (L_1..L_sa, R_1..R_sb): the element at stage
(sa, sb) is a matrix on 2^(sa+sb) basis labels, L-legs most significant.

The half-flip supplier returns the permutation w_N that swaps the leg
blocks L_{N+1..2N} and R_{1..N} inside stage (2N, N).  It commutes
exactly with anything supported on L_{1..N} and conjugates anything
supported on R_{1..N} exactly into the first copy, so the intertwining
margins it produces are exactly zero.
"""

import numpy as np
from gmpy2 import mpq

from .dyadic import Dyadic, DyadicInterval
from .errors import InfeasibleError, OpalgError
from .exact import GR_ONE, GaussianRational, gauss
from .intervalmat import MidRadMatrix
from .matrices import RationalMatrix, matrix_unit_from_index, matrix_unit_index
from .normcert import matrix_norm
from .presentations import Presentation
from .words import StarPoly, pair, poly_apply, unpair

DENSE_NORM_LIMIT = 64


class SparseRational:
    """Sparse exact Gaussian-rational square matrix: dict (i, j) -> value."""

    __slots__ = ("n", "data")

    def __init__(self, n, data=None):
        self.n = n
        self.data = {}
        if data:
            for key, val in data.items():
                val = gauss(val)
                if val:
                    self.data[key] = val

    @staticmethod
    def identity(n):
        one = GR_ONE
        return SparseRational(n, {(i, i): one for i in range(n)})

    @staticmethod
    def unit(n, i, j):
        return SparseRational(n, {(i, j): GR_ONE})

    @staticmethod
    def from_dense(m):
        out = SparseRational(m.n)
        for i in range(m.n):
            for j in range(m.n):
                if m.rows[i][j]:
                    out.data[(i, j)] = m.rows[i][j]
        return out

    def to_dense(self):
        out = RationalMatrix.zero(self.n)
        for (i, j), v in self.data.items():
            out.rows[i][j] = v
        return out

    def __add__(self, other):
        self._check(other)
        out = SparseRational(self.n)
        data = dict(self.data)
        for key, v in other.data.items():
            prev = data.get(key)
            s = v if prev is None else prev + v
            if s:
                data[key] = s
            elif prev is not None:
                del data[key]
        out.data = data
        return out

    def __neg__(self):
        return SparseRational(self.n, {k: -v for k, v in self.data.items()})

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other):
        if isinstance(other, SparseRational):
            self._check(other)
            by_row = {}
            for (i, j), v in other.data.items():
                by_row.setdefault(i, []).append((j, v))
            out = {}
            for (i, j), v in self.data.items():
                for (jj, w) in by_row.get(j, ()):
                    key = (i, jj)
                    prod = v * w
                    prev = out.get(key)
                    out[key] = prod if prev is None else prev + prod
            return SparseRational(self.n, out)
        return self.scale(other)

    def __rmul__(self, other):
        return self.scale(other)

    def scale(self, scalar):
        scalar = gauss(scalar)
        return SparseRational(
            self.n, {k: scalar * v for k, v in self.data.items()}
        )

    def adjoint(self):
        return SparseRational(
            self.n, {(j, i): v.conj() for (i, j), v in self.data.items()}
        )

    def kron(self, other):
        out = SparseRational(self.n * other.n)
        for (i, j), v in self.data.items():
            for (k, l), w in other.data.items():
                out.data[(i * other.n + k, j * other.n + l)] = v * w
        return out

    def conj_by_permutation(self, perm):
        """P* M P for the permutation unitary P e_j = e_{perm[j]}:
        (P* M P)[i, j] = M[perm[i], perm[j]] -- pure index bookkeeping."""
        inv = [0] * self.n
        for j, i in enumerate(perm):
            inv[i] = j
        return SparseRational(
            self.n, {(inv[i], inv[j]): v for (i, j), v in self.data.items()}
        )

    def is_zero(self):
        return not self.data

    def __eq__(self, other):
        return (
            isinstance(other, SparseRational)
            and self.n == other.n
            and self.data == other.data
        )

    def embed_topleft_kron(self, factor):
        """x |-> x (x) 1_factor (append identity legs on the right)."""
        out = SparseRational(self.n * factor)
        for (i, j), v in self.data.items():
            for a in range(factor):
                out.data[(i * factor + a, j * factor + a)] = v
        return out

    def to_midrad(self):
        mid = np.zeros((self.n, self.n), dtype=np.complex128)
        rad = np.zeros((self.n, self.n), dtype=np.float64)
        for (i, j), v in self.data.items():
            re, im = float(v.re), float(v.im)
            mid[i, j] = complex(re, im)
            if not (
                int(v.re.denominator) == 1
                and int(v.im.denominator) == 1
                and abs(int(v.re.numerator)) < (1 << 52)
                and abs(int(v.im.numerator)) < (1 << 52)
            ):
                rad[i, j] = (abs(re) + abs(im)) * 2.0 ** -53 * (1 + 2.0 ** -38) + 2.0 ** -960
        return MidRadMatrix(mid, rad)

    def norm_enclosure(self, k):
        """Certified norm enclosure: exact machinery at small dims, the
        rigorous float midrad route at large dims (InfeasibleError when
        the request is tighter than the float route can certify)."""
        if self.is_zero():
            return DyadicInterval(Dyadic(0), Dyadic(0))
        if self.n <= DENSE_NORM_LIMIT:
            return matrix_norm(self.to_dense(), k)
        enc = self.to_midrad().norm_enclosure()
        if (enc.hi - enc.lo) > Dyadic(1, -k):
            raise InfeasibleError(
                f"norm at dim {self.n} cannot be certified to 2^-{k} with the "
                "large-dimension route"
            )
        return enc

    def _check(self, other):
        if self.n != other.n:
            raise OpalgError("sparse dimension mismatch")


# ---------------------------------------------------------------------------
# supernatural numbers


class SupernaturalNumber:
    """Supernatural number given by its finite truncations d_0 | d_1 | ...

    `truncation(s)` is the matrix size at stage s; `support(i)` enumerates
    the primes of the support (possibly a partial enumeration -- a stall
    surfaces as an InfeasibleError when a deeper stage is requested)."""

    def __init__(self, truncation, support, infinite_type, label):
        self.truncation = truncation
        self.support = support
        self.infinite_type = infinite_type
        self.label = label

    @staticmethod
    def two_infinity():
        return SupernaturalNumber(
            truncation=lambda s: 1 << s,
            support=lambda i: 2 if i == 0 else None,
            infinite_type=True,
            label="2^inf",
        )

    def stage_dim(self, s):
        d = self.truncation(s)
        if d is None:
            raise InfeasibleError(
                f"supernatural number {self.label}: stage {s} enumeration stalled"
            )
        if s > 0:
            prev = self.truncation(s - 1)
            if prev is None or d % prev:
                raise OpalgError("truncations must divide later truncations")
        return d


# ---------------------------------------------------------------------------
# the UHF presentation (matrix inductive limit, exact pushes)


def uhf_presentation(sn=None, stage_budget=12):
    """M_n(C) for a supernatural number (default 2^infinity): special point
    pair(s, i) is the i-th matrix unit of the stage-s matrix algebra."""
    if sn is None:
        sn = SupernaturalNumber.two_infinity()

    def stage_of_letter(g):
        s, i = unpair(g)
        return s

    def letter_element(g, top_stage):
        s, i = unpair(g)
        d = sn.stage_dim(s)
        if i >= d * d:
            raise OpalgError(f"uhf: letter {i} out of range for stage {s}")
        r, c = matrix_unit_from_index(d, i)
        el = SparseRational.unit(d, r, c)
        factor = sn.stage_dim(top_stage) // d
        return el.embed_topleft_kron(factor) if factor > 1 else el

    def eval_poly(poly, top_stage=None):
        stages = [stage_of_letter(g) for w in poly.terms for (g, _) in w]
        top = max(stages, default=0)
        if top_stage is not None:
            top = max(top, top_stage)
        if top > stage_budget:
            raise InfeasibleError(
                f"uhf:{sn.label}: stage {top} beyond budget {stage_budget}"
            )
        d = sn.stage_dim(top)
        return (
            poly_apply(poly, lambda g: letter_element(g, top), SparseRational.identity(d)),
            top,
        )

    def norm_impl(poly, k):
        el, _ = eval_poly(poly)
        return el.norm_enclosure(k)

    pres = Presentation(
        descriptor=f"uhf:{sn.label}",
        kind="uhf",
        special_eval=lambda g: letter_element(g, stage_of_letter(g)),
        one=lambda: SparseRational.identity(1),
        norm_impl=norm_impl,
        unit_expansion=[(GaussianRational(1), pair(0, 0))],
        meta={"sn": sn, "stage_budget": stage_budget},
    )
    pres.meta["eval_poly"] = eval_poly
    pres.meta["stage_of_letter"] = stage_of_letter
    return pres


def uhf_tensor_presentation(pa, pb):
    """A (x) B for UHF presentations, stagewise: special point pair(m, p)
    is a_m (x) b_p realized with leg order (L..., R...)."""
    sn_a, sn_b = pa.meta["sn"], pb.meta["sn"]
    budget = min(pa.meta["stage_budget"], pb.meta["stage_budget"])

    def letter_parts(g):
        m, p = unpair(g)
        sa, ia = unpair(m)
        sb, ib = unpair(p)
        return sa, ia, sb, ib

    def eval_poly(poly, top=None):
        """Realize at the smallest common stage pair; returns
        (SparseRational, (SA, SB))."""
        sa_max, sb_max = 0, 0
        for w in poly.terms:
            for g, _ in w:
                sa, _, sb, _ = letter_parts(g)
                sa_max, sb_max = max(sa_max, sa), max(sb_max, sb)
        if top is not None:
            sa_max, sb_max = max(sa_max, top[0]), max(sb_max, top[1])
        if sa_max + sb_max > 2 * budget:
            raise InfeasibleError(
                f"uhf tensor: stage pair ({sa_max},{sb_max}) beyond budget"
            )
        da, db = sn_a.stage_dim(sa_max), sn_b.stage_dim(sb_max)

        def letter_element(g):
            sa, ia, sb, ib = letter_parts(g)
            ra, ca = matrix_unit_from_index(sn_a.stage_dim(sa), ia)
            rb, cb = matrix_unit_from_index(sn_b.stage_dim(sb), ib)
            left = SparseRational.unit(sn_a.stage_dim(sa), ra, ca).embed_topleft_kron(
                da // sn_a.stage_dim(sa)
            )
            right = SparseRational.unit(sn_b.stage_dim(sb), rb, cb).embed_topleft_kron(
                db // sn_b.stage_dim(sb)
            )
            return left.kron(right)

        return (
            poly_apply(poly, letter_element, SparseRational.identity(da * db)),
            (sa_max, sb_max),
        )

    def norm_impl(poly, k):
        el, _ = eval_poly(poly)
        return el.norm_enclosure(k)

    pres = Presentation(
        descriptor=f"tensor({pa.descriptor},{pb.descriptor})",
        kind="uhf_tensor",
        special_eval=lambda g: eval_poly(StarPoly.gen(g))[0],
        one=lambda: SparseRational.identity(1),
        norm_impl=norm_impl,
        unit_expansion=[(GaussianRational(1), pair(pair(0, 0), pair(0, 0)))],
        meta={"factors": (pa, pb), "eval_poly": eval_poly, "budget": budget},
    )
    return pres


# ---------------------------------------------------------------------------
# the half-flip supplier


def half_flip_permutation(n_legs):
    """Permutation of basis labels of stage (2n, n) of A (x) A swapping the
    leg blocks L_{n+1..2n} and R_{1..n} (bit blocks of width n)."""
    n = n_legs
    total_bits = 3 * n
    size = 1 << total_bits
    perm = [0] * size
    mask = (1 << n) - 1
    for b in range(size):
        top = b >> (2 * n)          # L_1..L_n      (most significant)
        midb = (b >> n) & mask      # L_{n+1}..L_{2n}
        low = b & mask              # R_1..R_n
        perm[b] = (top << (2 * n)) | (low << n) | midb
    return perm


class HalfFlipSupplier:
    """Supplies exact leg-permutation almost-unitaries (actually unitary)
    for the demo A = M_{2^inf}, B = A (x) A, phi = id (x) 1."""

    def __init__(self):
        self.label = "uhf-legs"

    def candidate(self, n_legs):
        """w as (permutation, stage pair (2n, n))."""
        return half_flip_permutation(n_legs), (2 * n_legs, n_legs)


class IdentityOnlySupplier:
    """Sabotage supplier: always proposes the identity (for tests that the
    engine fails honestly on targets needing a genuine flip)."""

    def __init__(self):
        self.label = "identity-only"

    def candidate(self, n_legs):
        size = 1 << (3 * n_legs)
        return list(range(size)), (2 * n_legs, n_legs)
