"""C([0,1], M_n) machinery: half-power matrix functions, black-box
certified functions, and branch-and-bound sup-norms.

A HalfPowerMatrixFunction is a finite sum  sum t^(r/2) (1-t)^(s/2) C_rs
with exact rational matrix coefficients; this class is closed under +, *
and adjoint (exponents add), evaluates to interval matrices at rational
points or boxes, and is exact at the endpoints t = 0, 1.

sup_norm runs best-first interval branch-and-bound on [0,1]: a box
contributes an enclosure [lo, hi] of ||f(t)|| valid for every t in the
box; the global supremum is pinched between the best lo and the worst
active hi.  Termination is guaranteed by the Hoelder-1/2 modulus of
half-power functions (the interval evaluations shrink with the box).
"""

import heapq

from gmpy2 import mpq

from .dyadic import Dyadic, DyadicInterval
from .errors import InfeasibleError, OpalgError
from .intervalmat import IntervalMatrix, MidRadMatrix
from .matrices import RationalMatrix
from .normcert import interval_matrix_norm, matrix_norm, norm_upper_quick
from .rint import ComplexInterval, RealInterval


def _scalar_half_power(t_iv, r, s, prec):
    """Enclosure of t^(r/2) (1-t)^(s/2) on a t-interval inside [0, 1]."""
    one = RealInterval.from_int(1, prec)
    lo = max(t_iv.lo, RealInterval.zero(prec).lo)
    t_c = RealInterval.from_bounds(lo, min(t_iv.hi, one.hi), prec)
    out = one
    if r:
        base = t_c.intpow(r // 2) if r % 2 == 0 else t_c.intpow(r // 2) * t_c.sqrt()
        out = out * base
    if s:
        u = (one - t_c).clamp_nonneg()
        base = u.intpow(s // 2) if s % 2 == 0 else u.intpow(s // 2) * u.sqrt()
        out = out * base
    return out


class HalfPowerMatrixFunction:
    __slots__ = ("n", "terms")

    def __init__(self, n, terms=None):
        self.n = n
        clean = {}
        if terms:
            for (r, s), c in terms.items():
                if not c.is_zero():
                    prev = clean.get((r, s))
                    clean[(r, s)] = c if prev is None else prev + c
        self.terms = clean

    # -- constructors --

    @staticmethod
    def constant(mat):
        return HalfPowerMatrixFunction(mat.n, {(0, 0): mat})

    @staticmethod
    def unit(n):
        return HalfPowerMatrixFunction.constant(RationalMatrix.identity(n))

    @staticmethod
    def iota(n):
        """t * identity."""
        return HalfPowerMatrixFunction(n, {(2, 0): RationalMatrix.identity(n)})

    @staticmethod
    def iota_sqrt(n):
        return HalfPowerMatrixFunction(n, {(1, 0): RationalMatrix.identity(n)})

    @staticmethod
    def one_minus_iota_sqrt(n):
        return HalfPowerMatrixFunction(n, {(0, 1): RationalMatrix.identity(n)})

    @staticmethod
    def scalar_profile(r, s, mat):
        """t^(r/2) (1-t)^(s/2) times a fixed matrix."""
        return HalfPowerMatrixFunction(mat.n, {(r, s): mat})

    # -- algebra --

    def __add__(self, other):
        self._check(other)
        out = dict(self.terms)
        for key, c in other.terms.items():
            prev = out.get(key)
            out[key] = c if prev is None else prev + c
        return HalfPowerMatrixFunction(self.n, out)

    def __neg__(self):
        return HalfPowerMatrixFunction(
            self.n, {k: -c for k, c in self.terms.items()}
        )

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other):
        if isinstance(other, HalfPowerMatrixFunction):
            self._check(other)
            out = {}
            for (r1, s1), c1 in self.terms.items():
                for (r2, s2), c2 in other.terms.items():
                    key = (r1 + r2, s1 + s2)
                    prod = c1 * c2
                    prev = out.get(key)
                    out[key] = prod if prev is None else prev + prod
            return HalfPowerMatrixFunction(self.n, out)
        return self.scale(other)

    def __rmul__(self, other):
        return self.scale(other)

    def scale(self, scalar):
        return HalfPowerMatrixFunction(
            self.n, {k: c.scale(scalar) for k, c in self.terms.items()}
        )

    def adjoint(self):
        return HalfPowerMatrixFunction(
            self.n, {k: c.adjoint() for k, c in self.terms.items()}
        )

    def is_zero(self):
        return not self.terms

    def _check(self, other):
        if self.n != other.n:
            raise OpalgError("half-power dimension mismatch")

    # -- evaluation --

    def eval_iv(self, t, prec=96):
        """IntervalMatrix enclosure of f(t); t is mpq or RealInterval in [0,1]."""
        if not isinstance(t, RealInterval):
            t = mpq(t)
            if t < 0 or t > 1:
                raise OpalgError("evaluation point outside [0,1]")
            t = RealInterval.from_mpq(t, prec)
        out = IntervalMatrix.zero(self.n, prec)
        for (r, s), c in self.terms.items():
            w = _scalar_half_power(t, r, s, prec)
            out = out + IntervalMatrix.from_rational(c, prec).scale(w)
        return out

    def eval_endpoint(self, endpoint):
        """Exact value at t = 0 or t = 1 (half powers collapse to 0/1)."""
        if endpoint not in (0, 1):
            raise OpalgError("endpoint must be 0 or 1")
        out = RationalMatrix.zero(self.n)
        for (r, s), c in self.terms.items():
            if endpoint == 0 and r == 0:
                out = out + c
            elif endpoint == 1 and s == 0:
                out = out + c
        return out

    # -- analysis --

    def hoelder_half_constant(self):
        """Exact rational L with ||f(a) - f(b)|| <= L |a-b|^(1/2) on [0,1].

        t^(r/2) has Hoelder-1/2 constant 1 for r = 1 and r/2 for r >= 2
        (via the derivative bound and |a-b| <= |a-b|^(1/2) on [0,1]);
        products of two [0,1]-valued profiles add their constants.
        """
        total = mpq(0)
        for (r, s), c in self.terms.items():
            cr = mpq(0) if r == 0 else (mpq(1) if r == 1 else mpq(r, 2))
            cs = mpq(0) if s == 0 else (mpq(1) if s == 1 else mpq(s, 2))
            total += (cr + cs) * norm_upper_quick(c).as_mpq()
        return total

    def norm_box(self, box_lo, box_hi, k):
        """DyadicInterval enclosing ||f(t)|| for every t in [box_lo, box_hi]."""
        prec = max(64, k + 16)
        t = RealInterval.from_bounds(
            RealInterval.from_mpq(box_lo, prec).lo,
            RealInterval.from_mpq(box_hi, prec).hi,
            prec,
        )
        if box_lo == box_hi and box_lo in (0, 1):
            return matrix_norm(self.eval_endpoint(int(box_lo)), k)
        return interval_matrix_norm(self.eval_iv(t, prec), k)


class CertifiedFunction:
    """Black-box certified function [0,1] -> M_n.

    norm_box(box_lo, box_hi, k) must return a DyadicInterval [lo, hi] with
    lo <= ||f(t)|| <= hi for every t in the box; eval_box(t, k) must return
    an interval-matrix enclosure (IntervalMatrix or MidRadMatrix) of f(t)
    for every t in the box.  modulus = (L, alpha) is an a-priori
    ||f(a)-f(b)|| <= L |a-b|^alpha bound used for diagnostics and box
    pre-splitting.
    """

    def __init__(self, n, eval_box, norm_box=None, modulus=None):
        self.n = n
        self._eval_box = eval_box
        self._norm_box = norm_box
        self.modulus = modulus  # (L: mpq, alpha: mpq in {1, 1/2}) or None

    def eval_box(self, t, k):
        return self._eval_box(t, k)

    def norm_box(self, box_lo, box_hi, k):
        if self._norm_box is not None:
            return self._norm_box(box_lo, box_hi, k)
        prec = max(64, k + 16)
        t = RealInterval.from_bounds(
            RealInterval.from_mpq(box_lo, prec).lo,
            RealInterval.from_mpq(box_hi, prec).hi,
            prec,
        )
        enc = self._eval_box(t, k)
        if isinstance(enc, MidRadMatrix):
            enc = enc.to_interval_matrix(prec)
        return interval_matrix_norm(enc, k)


def from_halfpower(f):
    return CertifiedFunction(
        f.n,
        eval_box=lambda t, k: f.eval_iv(t, max(64, k + 16)),
        norm_box=f.norm_box,
        modulus=(f.hoelder_half_constant(), mpq(1, 2)),
    )


# ---------------------------------------------------------------------------
# reparametrizations xi


XI_LEFT = "left"      # t -> t/2
XI_CONST = "const"    # t -> 1/2
XI_RIGHT = "right"    # t -> (t+1)/2


def xi_apply_mpq(which, t):
    t = mpq(t)
    if which == XI_LEFT:
        return t / 2
    if which == XI_CONST:
        return mpq(1, 2)
    if which == XI_RIGHT:
        return (t + 1) / 2
    raise OpalgError(f"unknown reparametrization {which!r}")


def xi_apply_iv(which, t_iv, prec):
    half = RealInterval.from_mpq(mpq(1, 2), prec)
    if which == XI_LEFT:
        return t_iv * half
    if which == XI_CONST:
        return half
    if which == XI_RIGHT:
        return (t_iv + RealInterval.from_int(1, prec)) * half
    raise OpalgError(f"unknown reparametrization {which!r}")


def compose_reparam(f, which):
    """f composed with one of the three stage reparametrizations, as a
    CertifiedFunction (the composite leaves the half-power ring)."""
    if isinstance(f, HalfPowerMatrixFunction):
        base_mod = (f.hoelder_half_constant(), mpq(1, 2))
        n = f.n

        def eval_box(t, k):
            prec = max(64, k + 16)
            return f.eval_iv(xi_apply_iv(which, t, prec), prec)

        def norm_box(lo, hi, k):
            return f.norm_box(xi_apply_mpq(which, lo), xi_apply_mpq(which, hi), k)

    else:
        base_mod = f.modulus
        n = f.n

        def eval_box(t, k):
            prec = max(64, k + 16)
            return f.eval_box(xi_apply_iv(which, t, prec), k)

        def norm_box(lo, hi, k):
            return f.norm_box(xi_apply_mpq(which, lo), xi_apply_mpq(which, hi), k)

    if which == XI_CONST:
        modulus = (mpq(0), mpq(1, 2))
    elif base_mod is not None:
        # |xi(a) - xi(b)| = |a-b| / 2
        lconst, alpha = base_mod
        scale = mpq(1, 2) if alpha == 1 else mpq(1)  # (1/2)^alpha <= 1
        modulus = (lconst * scale, alpha)
    else:
        modulus = None
    return CertifiedFunction(n, eval_box=eval_box, norm_box=norm_box, modulus=modulus)


# ---------------------------------------------------------------------------
# sup-norm by branch and bound


DEFAULT_BOX_BUDGET = 10 ** 5


def sup_norm(f, k, budget=DEFAULT_BOX_BUDGET):
    """Certified enclosure of sup_t ||f(t)||, width <= 2^-k.

    f: HalfPowerMatrixFunction or CertifiedFunction.  Best-first
    subdivision on upper bounds; boxes certified below the running lower
    bound are pruned.  Raises InfeasibleError when the box budget is
    exhausted before the target width is reached.
    """
    # leave headroom for the final outward dyadic rounding
    target = mpq(1, 1 << k) * mpq(31, 32)
    kk = k + 6

    counter = 0
    best_lo = mpq(0)
    heap = []

    def push(lo, hi, prec):
        nonlocal counter, best_lo
        iv = f.norm_box(lo, hi, prec)
        b_lo, b_hi = iv.lo.as_mpq(), iv.hi.as_mpq()
        best_lo = max(best_lo, b_lo)
        counter += 1
        heapq.heappush(heap, (-b_hi, counter, lo, hi, prec))

    # seed with endpoint slivers plus the bulk (half powers are exact at
    # the endpoints, where the sqrt modulus is worst)
    push(mpq(0), mpq(0), kk)
    push(mpq(1), mpq(1), kk)
    push(mpq(0), mpq(1, 2), kk)
    push(mpq(1, 2), mpq(1), kk)

    boxes = 4
    while heap:
        neg_hi, _, lo, hi, prec = heapq.heappop(heap)
        cur_hi = -neg_hi
        if cur_hi - best_lo <= target:
            return DyadicInterval(
                _dyadic_floor(best_lo, k + 8), _dyadic_ceil(cur_hi, k + 8)
            )
        if lo == hi:
            # a point box cannot shrink; escalate evaluation precision
            push(lo, hi, prec + 16)
            boxes += 1
        else:
            mid = (lo + hi) / 2
            push(lo, mid, prec)
            push(mid, hi, prec)
            boxes += 2
        if boxes > budget:
            raise InfeasibleError(
                f"sup_norm: box budget {budget} exhausted at gap "
                f"{float(cur_hi - best_lo):.3e} (target 2^-{k})"
            )
    raise InfeasibleError("sup_norm: empty search state")


def _dyadic_floor(q, bits):
    """Largest multiple of 2^-bits that is <= q (absolute grid)."""
    q = mpq(q)
    scaled = q * (1 << bits)
    return Dyadic(int(scaled.numerator) // int(scaled.denominator), -bits)


def _dyadic_ceil(q, bits):
    q = mpq(q)
    scaled = q * (1 << bits)
    return Dyadic(-(int(scaled.numerator) // -int(scaled.denominator)), -bits)


# ---------------------------------------------------------------------------
# dimension-drop boundary membership


def boundary_distance(f, endpoint, p, q, k):
    """Certified upper bound on dist(f(endpoint), boundary subalgebra):
    M_p (x) 1_q at t = 0, 1_p (x) M_q at t = 1, inside M_{p*q}."""
    from .normcert import (
        distance_to_first_factor_upper,
        distance_to_second_factor_upper,
    )

    if isinstance(f, HalfPowerMatrixFunction):
        if f.n != p * q:
            raise OpalgError("boundary_distance: n != p*q")
        val = f.eval_endpoint(endpoint)
        if endpoint == 0:
            return distance_to_first_factor_upper(val, p, q, k)
        return distance_to_second_factor_upper(val, p, q, k)
    # certified-function route: interval value at the endpoint
    if f.n != p * q:
        raise OpalgError("boundary_distance: n != p*q")
    enc = f.eval_box(RealInterval.from_mpq(mpq(endpoint), max(64, k + 16)), k + 4)
    if isinstance(enc, IntervalMatrix):
        enc = enc.to_midrad()
    return _midrad_boundary_distance(enc, endpoint, p, q)


def _midrad_boundary_distance(enc, endpoint, p, q):
    import numpy as np

    n = p * q
    mid = enc.mid.reshape(p, q, p, q)
    rad = enc.rad.reshape(p, q, p, q)
    if endpoint == 0:
        e_mid = np.trace(mid, axis1=1, axis2=3) / q
        e_rad = np.einsum("iaja->ij", rad) / q
        proj_mid = np.einsum("ij,ab->iajb", e_mid, np.eye(q)).reshape(n, n)
        proj_rad = np.einsum("ij,ab->iajb", e_rad, np.eye(q)).reshape(n, n)
    else:
        e_mid = np.trace(mid, axis1=0, axis2=2) / p
        e_rad = np.einsum("iaib->ab", rad) / p
        proj_mid = np.einsum("ab,ij->iajb", e_mid, np.eye(p)).reshape(n, n)
        proj_rad = np.einsum("ab,ij->iajb", e_rad, np.eye(p)).reshape(n, n)
    diff = MidRadMatrix(
        enc.mid - proj_mid, (enc.rad + proj_rad) * (1 + 2.0 ** -38) + 2.0 ** -960
    )
    return diff.norm_upper()
