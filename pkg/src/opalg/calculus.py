"""Effective unitary calculus: Taylor order for x^(-1/2), almost-unitary
polar approximants, and exponential paths between unitaries.

The truncated series s_N(x) = sum_{k<=N} binom(2k,k)/4^k (1-x)^k satisfies
sup_{[1/2,3/2]} |x^(-1/2) - s_N(x)| <= 2^-N because the coefficients are
bounded by 1 and |1-x| <= 1/2 there; the frozen order N(delta) =
ceil(log2(1/delta)) + 1 makes the tail <= delta/2 < delta.

A unitary path u ~> v is t |-> exp(i(1-t)h_u) exp(i t h_v).  Two backends:
the generic one uses certified Schur logarithms; the permutation backend
evaluates exp(i s h) in closed form on each cycle (geometric sums), which
scales to the 1326-dimensional Jiang-Su connecting unitaries.
"""

import numpy as np
from gmpy2 import mpfr, mpq

from .dyadic import Dyadic
from .errors import InfeasibleError, OpalgError
from .expcert import matrix_exp, schur_log
from .intervalmat import IntervalMatrix, MidRadMatrix
from .matrices import RationalMatrix
from .normcert import matrix_norm
from .rint import ComplexInterval, RealInterval, cospi2, ctx_pair, sinpi2


def ceil_log2_mpq(q):
    """Smallest integer e with 2^e >= q, for exact rational q > 0."""
    q = mpq(q)
    if q <= 0:
        raise OpalgError("ceil_log2 of nonpositive rational")
    num, den = int(q.numerator), int(q.denominator)
    e = num.bit_length() - den.bit_length()
    while mpq(2) ** e < q:
        e += 1
    while e > 0 and mpq(2) ** (e - 1) >= q:
        e -= 1
    return e


def taylor_order(delta):
    """Frozen order N(delta) = ceil(log2(1/delta)) + 1 for the x^(-1/2) series."""
    delta = mpq(delta)
    if delta <= 0:
        raise OpalgError("taylor_order requires delta > 0")
    if delta > 1:
        raise OpalgError("taylor_order requires delta <= 1")
    return ceil_log2_mpq(1 / delta) + 1


def sqrt_inv_series_coeffs(order):
    """Exact coefficients c_k = binom(2k,k)/4^k of sum c_k (1-x)^k."""
    coeffs = [mpq(1)]
    c = mpq(1)
    for k in range(1, order + 1):
        c = c * mpq(2 * k - 1, 2 * k)
        coeffs.append(c)
    return coeffs


def sqrt_inv_series_eval(order, x):
    """s_N(x) at an exact rational x (exact rational result)."""
    x = mpq(x)
    coeffs = sqrt_inv_series_coeffs(order)
    y = mpq(1) - x
    acc = mpq(0)
    pw = mpq(1)
    for c in coeffs:
        acc += c * pw
        pw *= y
    return acc


class AlmostUnitary:
    """An exact rational matrix a with certified ||a*a-1||, ||aa*-1|| < eps
    and ||a|| <= 1.  The Taylor domain for the polar part needs eps <= 1/2."""

    def __init__(self, a, eps):
        eps = mpq(eps)
        if eps > mpq(1, 2):
            raise OpalgError(
                "almost-unitary witness eps must be <= 1/2 (Taylor domain)"
            )
        ident = RationalMatrix.identity(a.n)
        d1 = matrix_norm(a.adjoint() * a - ident, 24)
        d2 = matrix_norm(a * a.adjoint() - ident, 24)
        if not (d1.hi.as_mpq() < eps and d2.hi.as_mpq() < eps):
            raise OpalgError("matrix is not certified eps-almost-unitary")
        nrm_sq = a.op_norm_sq_upper()
        if nrm_sq > 1:
            # exact decision: ||a|| <= 1 iff I - a*a is positive semidefinite
            if not _psd_decide(ident - a.adjoint() * a):
                raise OpalgError("||a|| <= 1 violated")
        self.a = a
        self.eps = eps

    @property
    def n(self):
        return self.a.n


def _psd_decide(s):
    """Exact PSD decision by LDL* with zero-pivot handling."""
    n = s.n
    a = [[s.rows[i][j] for j in range(n)] for i in range(n)]
    from .exact import GR_ZERO, GaussianRational

    d = [mpq(0)] * n
    low = [[GR_ZERO] * n for _ in range(n)]
    for j in range(n):
        acc = a[j][j].re
        for k in range(j):
            acc = acc - low[j][k].abs_sq() * d[k]
        if acc < 0:
            return False
        if acc == 0:
            # remaining column must vanish for PSD
            for i in range(j + 1, n):
                val = a[i][j]
                for k in range(j):
                    val = val - GaussianRational(d[k], 0) * low[i][k] * low[j][k].conj()
                if val:
                    return False
            d[j] = mpq(0)
            continue
        d[j] = acc
        for i in range(j + 1, n):
            val = a[i][j]
            for k in range(j):
                val = val - GaussianRational(d[k], 0) * low[i][k] * low[j][k].conj()
            low[i][j] = GaussianRational(val.re / acc, val.im / acc)
    return True


def omega_n(au, n):
    """Exact rational point a * s_N(a*a) within 2^-n of the polar unitary
    omega(a) = a (a*a)^(-1/2); the bound is the certified series tail."""
    order = taylor_order(mpq(1, 1 << n))
    a = au.a
    ident = RationalMatrix.identity(a.n)
    y = ident - a.adjoint() * a
    coeffs = sqrt_inv_series_coeffs(order)
    # Horner on the exact matrix series
    acc = coeffs[-1] * ident
    for c in reversed(coeffs[:-1]):
        acc = acc * y + c * ident
    return a * acc


# ---------------------------------------------------------------------------
# unitary paths


class UnitaryPath:
    """The path t |-> exp(i(1-t)h_u) exp(i t h_v) between certified
    logarithms of two exactly unitary rational matrices."""

    def __init__(self, u, v, k=30):
        if u.n != v.n:
            raise OpalgError("unitary_path: dimension mismatch")
        self.u = u
        self.v = v
        self.n = u.n
        self.base_k = k
        self._logs = {}
        self._tier(k)

    def _tier(self, k):
        tier = 40
        while tier < k + 10:
            tier *= 2
        if tier not in self._logs:
            self._logs[tier] = (
                schur_log(self.u, tier - 8),
                schur_log(self.v, tier - 8),
            )
        return self._logs[tier]

    def log_norm_bound(self):
        slu, slv = self._tier(self.base_k)
        return slu.norm_bound + slv.norm_bound

    def eval(self, t, k):
        """Enclosure of the path at t (mpq or RealInterval), width-targeted
        at 2^-k; endpoints t=0,1 certified against u, v by construction."""
        slu, slv = self._tier(k)
        h_u, h_v = slu.h, slv.h
        prec = h_u.prec
        if isinstance(t, RealInterval):
            t_iv = RealInterval.from_bounds(t.lo, t.hi, prec)
        else:
            t_iv = RealInterval.from_mpq(mpq(t), prec)
        one = RealInterval.from_int(1, prec)
        i_unit = ComplexInterval(RealInterval.zero(prec), RealInterval.from_int(1, prec))
        fu = matrix_exp(h_u.scale(i_unit * (one - t_iv)), k + 8)
        fv = matrix_exp(h_v.scale(i_unit * t_iv), k + 8)
        return fu * fv


def unitary_path(u, v, k=30):
    """Certified path object for exactly unitary rational u, v (same dim)."""
    if _is_permutation(u) and _is_permutation(v):
        return PermutationPath(_perm_of(u), _perm_of(v))
    return UnitaryPath(u, v, k)


def _is_permutation(m):
    from .exact import GR_ONE

    seen = set()
    for j in range(m.n):
        hits = [i for i in range(m.n) if m.rows[i][j]]
        if len(hits) != 1 or m.rows[hits[0]][j] != GR_ONE:
            return False
        if hits[0] in seen:
            return False
        seen.add(hits[0])
    return True


def _perm_of(m):
    perm = []
    for j in range(m.n):
        for i in range(m.n):
            if m.rows[i][j]:
                perm.append(i)
                break
    return perm


class _CycleData:
    __slots__ = ("members", "length")

    def __init__(self, members):
        self.members = members
        self.length = len(members)


def _cycles(perm):
    n = len(perm)
    seen = [False] * n
    out = []
    for start in range(n):
        if seen[start]:
            continue
        cyc = [start]
        seen[start] = True
        cur = perm[start]
        while cur != start:
            cyc.append(cur)
            seen[cur] = True
            cur = perm[cur]
        out.append(_CycleData(cyc))
    return out


class PermutationPath:
    """Path between permutation unitaries, evaluated in closed form.

    On each cycle of length L the log has eigenvalues 2pi k/L for k >= 1
    and 2pi for k = 0 (branch [theta, theta + 2pi) with theta = pi/lcm just
    above zero; the k = 0 angle wraps to 2pi).  exp(i s h) restricted to a
    cycle is E_plain(s) + (e^{2pi i s} - 1)/L * ones, where E_plain has the
    geometric-sum entries (e^{2pi i s}-1) / (L (e^{2pi i (s+d)/L} - 1)) on
    the d-th circulant diagonal.  ||h|| <= 2pi for both logs.
    """

    def __init__(self, perm_u, perm_v):
        if len(perm_u) != len(perm_v):
            raise OpalgError("permutation path: dimension mismatch")
        self.n = len(perm_u)
        self.perm_u = list(perm_u)
        self.perm_v = list(perm_v)
        self.cycles_u = _cycles(self.perm_u)
        self.cycles_v = _cycles(self.perm_v)
        self.u = RationalMatrix.from_permutation(self.perm_u)
        self.v = RationalMatrix.from_permutation(self.perm_v)

    def log_norm_bound(self):
        # each log has norm exactly 2pi; 355/113 > pi makes this rigorous
        return Dyadic.from_mpq(mpq(1420, 113), 20, up=True)

    def _exp_perm(self, cycles, s_iv, prec):
        """MidRadMatrix enclosure of exp(i s h) for the permutation log."""
        n = self.n
        mid = np.zeros((n, n), dtype=np.complex128)
        rad = np.zeros((n, n), dtype=np.float64)
        w_re = cospi2(s_iv, prec) - RealInterval.from_int(1, prec)
        w_im = sinpi2(s_iv, prec)
        w = ComplexInterval(w_re, w_im)  # e^{2pi i s} - 1
        for cyc in cycles:
            parts = self._cycle_values(cyc.length, s_iv, w, prec)
            vals_mid = np.array([p[0] for p in parts], dtype=np.complex128)
            vals_rad = np.array([p[1] for p in parts], dtype=np.float64)
            idx = np.array(cyc.members)
            ar = np.arange(cyc.length)
            # dmat[r, c] = (c - r) mod L
            dmat = np.mod(ar[None, :] - ar[:, None], cyc.length)
            mid[np.ix_(idx, idx)] = vals_mid[dmat]
            rad[np.ix_(idx, idx)] = vals_rad[dmat]
        return MidRadMatrix(mid, rad)

    def _cycle_values(self, length, s_iv, w, prec):
        """(mid, rad) of the entry value for each circulant diagonal d."""
        inv_l = RealInterval.from_mpq(mpq(1, length), prec)
        j_term = w * inv_l
        out = []
        for d in range(length):
            frac = (s_iv + RealInterval.from_int(d, prec)) * inv_l
            q_re = cospi2(frac, prec) - RealInterval.from_int(1, prec)
            q_im = sinpi2(frac, prec)
            qmag = (q_re * q_re + q_im * q_im).clamp_nonneg()
            if float(qmag.lo) < 2.0 ** -16:
                val = self._direct_sum(length, d, s_iv, prec)
            else:
                inv_den = ComplexInterval(q_re, -q_im).scale_real(qmag.inverse())
                val = (w * inv_den) * inv_l
            val = val + j_term
            out.append(_ci_to_midrad_scalar(val))
        return out

    def _direct_sum(self, length, d, s_iv, prec):
        """(1/L) sum_k e^{2pi i k (s+d)/L} termwise (near-singular case)."""
        inv_l = RealInterval.from_mpq(mpq(1, length), prec)
        acc = ComplexInterval.zero(prec)
        base = (s_iv + RealInterval.from_int(d, prec)) * inv_l
        for kk in range(length):
            ang = base * RealInterval.from_int(kk, prec)
            acc = acc + ComplexInterval(cospi2(ang, prec), sinpi2(ang, prec))
        return acc * inv_l

    def eval_midrad(self, t, k=30):
        """MidRadMatrix enclosure of the path at t (mpq or RealInterval)."""
        prec = max(60, k + 24)
        if isinstance(t, RealInterval):
            t_iv = RealInterval.from_bounds(t.lo, t.hi, prec)
        else:
            t_iv = RealInterval.from_mpq(mpq(t), prec)
        lo_q, hi_q = _ri_bounds_mpq(t_iv)
        if lo_q == hi_q:
            if lo_q == 0:
                return MidRadMatrix.from_permutation(self.perm_u)
            if lo_q == 1:
                return MidRadMatrix.from_permutation(self.perm_v)
        one = RealInterval.from_int(1, prec)
        eu = self._exp_perm(self.cycles_u, one - t_iv, prec)
        ev = self._exp_perm(self.cycles_v, t_iv, prec)
        return eu * ev

    def eval(self, t, k=30):
        """IntervalMatrix enclosure (mpfr) of the path at t."""
        prec = max(60, k + 24)
        return self.eval_midrad(t, k).to_interval_matrix(prec)

    def eval_exact_endpoint(self, endpoint):
        return self.u if endpoint == 0 else self.v


def _ci_to_midrad_scalar(ci):
    mre = float(ci.re.mid())
    mim = float(ci.im.mid())
    rr = max(abs(float(ci.re.lo) - mre), abs(float(ci.re.hi) - mre))
    ri = max(abs(float(ci.im.lo) - mim), abs(float(ci.im.hi) - mim))
    return complex(mre, mim), (rr + ri) * (1 + 2.0 ** -38) + 2.0 ** -960


def _ri_bounds_mpq(x):
    from .dyadic import Dyadic

    return Dyadic.from_mpfr(x.lo).as_mpq(), Dyadic.from_mpfr(x.hi).as_mpq()
