"""Certified operator norms for exact and interval matrices.

Strategy for ||M|| with M exact (Gaussian-rational):

  H := M* M  (exact Hermitian).  lambda_max(H) = ||M||^2.
  Lower bounds: exact Rayleigh quotients x*Hx / x*x at rational vectors
  (seeded from a float SVD, refined by high-precision power iteration).
  Upper bounds: certify lambda_max(H) < mu^2 by proving mu^2 I - H
  positive definite; first by interval Cholesky (fast), and when that is
  indeterminate by an exact rational LDL* decomposition, which decides
  positive definiteness unconditionally.  A failed exact test proves
  lambda_max >= mu^2, so bisection in sqrt-space always makes rigorous
  progress and terminates at any requested width 2^-k.

Every bound handed back is an exact dyadic; nothing here trusts a float.
"""

import numpy as np
from gmpy2 import isqrt, mpq

from .dyadic import Dyadic, DyadicInterval
from .errors import CertificationError, OpalgError
from .exact import GR_ZERO, GaussianRational
from .intervalmat import IntervalMatrix, MidRadMatrix
from .matrices import RationalMatrix, partial_trace_first, partial_trace_second
from .rint import ComplexInterval, RealInterval, ctx_pair


# ---------------------------------------------------------------------------
# exact square-root bounds


def sqrt_mpq_lower(q, bits):
    """Dyadic lower bound on sqrt(q), q >= 0, within 2^-bits."""
    q = mpq(q)
    if q < 0:
        raise OpalgError("sqrt of negative rational")
    if q == 0:
        return Dyadic(0)
    num, den = int(q.numerator), int(q.denominator)
    s = isqrt((num << (2 * bits)) // den)
    return Dyadic(int(s), -bits)


def sqrt_mpq_upper(q, bits):
    """Dyadic upper bound on sqrt(q), q >= 0, within 2^-bits."""
    q = mpq(q)
    if q < 0:
        raise OpalgError("sqrt of negative rational")
    if q == 0:
        return Dyadic(0)
    num, den = int(q.numerator), int(q.denominator)
    s = isqrt(-((num << (2 * bits)) // -den))  # ceil division
    if mpq(int(s) * int(s), 1 << (2 * bits)) < q:
        s += 1
    return Dyadic(int(s), -bits)


# ---------------------------------------------------------------------------
# positive-definiteness certificates for exact Hermitian matrices


def pd_certify_interval(s, prec):
    """Interval Cholesky of an exact Hermitian RationalMatrix.

    True  -> certified positive definite.
    None  -> indeterminate at this precision.
    """
    n = s.n
    siv = IntervalMatrix.from_rational(s, prec)
    low = [[None] * n for _ in range(n)]
    for j in range(n):
        d = siv.rows[j][j].re
        for k in range(j):
            d = d - low[j][k].abs_sq()
        if not d.lo > 0:
            return None
        piv = d.sqrt()
        low[j][j] = piv
        inv = piv.inverse()
        for i in range(j + 1, n):
            acc = siv.rows[i][j]
            for k in range(j):
                acc = acc - low[i][k] * low[j][k].conj()
            low[i][j] = acc.scale_real(inv)
    return True


def pd_decide_exact(s):
    """Exact LDL* of an exact Hermitian RationalMatrix; decides strict
    positive definiteness unconditionally."""
    n = s.n
    a = [[s.rows[i][j] for j in range(n)] for i in range(n)]
    d = [mpq(0)] * n
    low = [[GR_ZERO] * n for _ in range(n)]
    for j in range(n):
        acc = a[j][j].re
        for k in range(j):
            acc = acc - low[j][k].abs_sq() * d[k]
        if acc <= 0:
            return False
        d[j] = acc
        for i in range(j + 1, n):
            val = a[i][j]
            for k in range(j):
                val = val - GaussianRational(d[k], 0) * low[i][k] * low[j][k].conj()
            low[i][j] = GaussianRational(val.re / acc, val.im / acc)
    return True


def lambda_max_below(h, mu_sq, prec):
    """Decide lambda_max(h) < mu_sq (exact rational threshold).

    Returns True / False, always correct; uses the interval test first.
    """
    n = h.n
    s = RationalMatrix(n, [[-x for x in row] for row in h.rows])
    for i in range(n):
        s.rows[i][i] = s.rows[i][i] + GaussianRational(mu_sq, 0)
    got = pd_certify_interval(s, prec)
    if got:
        return True
    return pd_decide_exact(s)


# ---------------------------------------------------------------------------
# Rayleigh lower bounds


def _rationalize(vec, bits=60):
    """Round a complex float vector to exact Gaussian rationals."""
    out = []
    scale = 1 << bits
    for z in vec:
        out.append(
            GaussianRational(
                mpq(int(round(z.real * scale)), scale),
                mpq(int(round(z.imag * scale)), scale),
            )
        )
    return out


def _rayleigh(h, x):
    """Exact x*Hx / x*x for Hermitian h; lower bound on lambda_max."""
    hx = h.apply_vec(x)
    num = GR_ZERO
    den = mpq(0)
    for xi, yi in zip(x, hx):
        num = num + xi.conj() * yi
        den += xi.abs_sq()
    if den == 0:
        return mpq(0)
    val = num.re / den
    return val if val > 0 else mpq(0)


def _top_vector_float(m):
    arr = np.array(m.to_complex_lists(), dtype=np.complex128)
    if m.n == 1:
        return [complex(1.0)]
    try:
        _, _, vh = np.linalg.svd(arr)
        return list(vh[0].conj())
    except np.linalg.LinAlgError:
        return [complex(1.0)] + [complex(0.0)] * (m.n - 1)


def _power_refine(h, x, steps, bits=120):
    """A few power-iteration sweeps at float precision on exact H to
    improve the Rayleigh vector (soundness never depends on this)."""
    arr = np.array(
        [[complex(e.re, e.im) for e in row] for row in h.rows], dtype=np.complex128
    )
    v = np.array([complex(z.re, z.im) for z in x], dtype=np.complex128)
    for _ in range(steps):
        w = arr @ v
        nw = np.linalg.norm(w)
        if nw == 0:
            break
        v = w / nw
    return _rationalize(v, bits)


def gershgorin_upper(h):
    """Exact rational upper bound on lambda_max of Hermitian h."""
    best = None
    for i in range(h.n):
        row = h.rows[i][i].re + sum(
            (abs(h.rows[i][j].re) + abs(h.rows[i][j].im) for j in range(h.n) if j != i),
            mpq(0),
        )
        best = row if best is None else max(best, row)
    return best if best is not None else mpq(0)


# ---------------------------------------------------------------------------
# the certified norm


def matrix_norm(m, k):
    """Certified enclosure of the operator norm of an exact RationalMatrix,
    width <= 2^-k."""
    if isinstance(m, (IntervalMatrix, MidRadMatrix)):
        return interval_matrix_norm(m, k)
    if m.is_zero():
        return DyadicInterval(Dyadic(0), Dyadic(0))
    h = m.adjoint() * m
    bits = k + 16
    prec = max(96, k + 56)

    lo_sq = _rayleigh(h, _rationalize(_top_vector_float(m)))
    up_sq = min(gershgorin_upper(h), m.op_norm_sq_upper())
    lower = sqrt_mpq_lower(lo_sq, bits)
    upper = sqrt_mpq_upper(up_sq, bits)
    if upper < lower:  # only via rounding of nearly-equal bounds
        upper = lower
    target = Dyadic(1, -k)
    if (upper - lower) <= target:
        return DyadicInterval(lower, upper)

    # fast path: certify just above the Rayleigh bound
    cand = lower + Dyadic(1, -(k + 1))
    if upper > cand and lambda_max_below(h, cand.as_mpq() ** 2, prec):
        return DyadicInterval(lower, cand)

    # refine the Rayleigh vector once, then bisect with exact decisions
    x = _power_refine(h, _rationalize(_top_vector_float(m)), steps=8)
    lo_sq = max(lo_sq, _rayleigh(h, x))
    lower = max(lower, sqrt_mpq_lower(lo_sq, bits))
    if upper < lower:
        upper = lower
    while (upper - lower) > target:
        mid = lower + (upper - lower) * Dyadic(1, -1)
        if lambda_max_below(h, mid.as_mpq() ** 2, prec):
            upper = mid
        else:
            lower = mid
    return DyadicInterval(lower, upper)


def interval_matrix_norm(m, k):
    """Certified enclosure of the norm of an interval matrix: certified
    norm of the (exact dyadic) midpoint widened by a bound on the radius."""
    if isinstance(m, IntervalMatrix):
        m = m.to_midrad()
    n = m.n
    mid = RationalMatrix(
        n,
        [
            [
                GaussianRational(
                    Dyadic.from_float(float(m.mid[i, j].real)).as_mpq(),
                    Dyadic.from_float(float(m.mid[i, j].imag)).as_mpq(),
                )
                for j in range(n)
            ]
            for i in range(n)
        ],
    )
    rad_norm = MidRadMatrix(np.zeros((n, n), dtype=np.complex128), m.rad).norm_upper()
    core = matrix_norm(mid, k + 1)
    lo = core.lo - rad_norm
    if lo < Dyadic(0):
        lo = Dyadic(0)
    return DyadicInterval(lo, core.hi + rad_norm)


def norm_upper_quick(m):
    """Cheap exact upper bound on ||M|| (no bisection)."""
    return sqrt_mpq_upper(m.op_norm_sq_upper(), 48)


# ---------------------------------------------------------------------------
# row-column lower bound for A (x) M_n


def row_column_lower_bound(entries, x, y, k):
    """Certified lower bound on ||a|| for a = sum_ij a_ij (x) e_ij given by
    its entry matrix [a_ij], via ||sum_i,j x_i a_ij y_j*||.

    entries: n x n nested list of RationalMatrix (the a_ij).
    x, y: n-tuples of RationalMatrix with ||sum x_i x_i*||, ||sum y_i y_i*|| < 1
    (checked, certified; violation raises).
    """
    n = len(entries)
    if any(len(r) != n for r in entries) or len(x) != n or len(y) != n:
        raise OpalgError("row_column_lower_bound: shape mismatch")
    dim = entries[0][0].n

    def _constraint(tup):
        s = RationalMatrix.zero(dim)
        for t in tup:
            s = s + t * t.adjoint()
        return matrix_norm(s, 20)

    cx = _constraint(x)
    cy = _constraint(y)
    if not (cx.hi < Dyadic(1) and cy.hi < Dyadic(1)):
        raise OpalgError(
            "tuple constraint violated: ||sum x x*|| or ||sum y y*|| not certified < 1"
        )
    s = RationalMatrix.zero(dim)
    for i in range(n):
        for j in range(n):
            if not entries[i][j].is_zero():
                s = s + x[i] * entries[i][j] * y[j].adjoint()
    return matrix_norm(s, k).lo


# ---------------------------------------------------------------------------
# conditional expectations and distance-to-subalgebra bounds


def expectation_onto_first(b, dim_a, dim_b):
    """E(b) with E = id (x) tr/dim_b, as an element of M_dim_a."""
    return partial_trace_second(b, dim_a, dim_b)


def expectation_onto_second(b, dim_a, dim_b):
    return partial_trace_first(b, dim_a, dim_b)


def distance_to_first_factor_upper(b, dim_a, dim_b, k):
    """Certified upper bound on dist(b, M_dim_a (x) 1): ||b - E(b) (x) 1||."""
    e = expectation_onto_first(b, dim_a, dim_b)
    diff = b - e.kron(RationalMatrix.identity(dim_b))
    return matrix_norm(diff, k).hi


def distance_to_second_factor_upper(b, dim_a, dim_b, k):
    e = expectation_onto_second(b, dim_a, dim_b)
    diff = b - RationalMatrix.identity(dim_a).kron(e)
    return matrix_norm(diff, k).hi
