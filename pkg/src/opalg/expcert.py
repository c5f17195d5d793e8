"""Certified matrix exponential and the Schur-based unitary logarithm.

matrix_exp returns an interval matrix containing exp(M) for every point
matrix M in the input enclosure: truncated Taylor series on M/2^s with a
rigorous tail bound, then s interval squarings.

schur_log(u, k) takes an exactly unitary rational u and produces an
interval matrix H that is self-adjoint as an enclosure, has certified
spectrum inside [theta, theta + 2pi) for a scanned rational multiple
theta of 2pi with e^{i theta} certifiably off the spectrum of u, and
satisfies a certified bound ||exp(iH) - u|| < 2^-k.  The enclosure is
built around a high-precision diagonalization and certified a
posteriori; the certificates never trust the approximation.
"""

from gmpy2 import mpfr, mpq

import mpmath

from .dyadic import Dyadic
from .errors import CertificationError, OpalgError
from .intervalmat import IntervalMatrix
from .matrices import RationalMatrix
from .rint import ComplexInterval, RealInterval, cospi2, ctx_pair, sinpi2


# ---------------------------------------------------------------------------
# certified exponential


def matrix_exp(m_iv, k, norm_bound=None):
    """Interval enclosure of exp(M) for every M in m_iv, with truncation
    remainder certified <= 2^-k (on top of interval propagation)."""
    prec = m_iv.prec
    n = m_iv.n
    if norm_bound is None:
        norm_bound = m_iv.norm_upper_mpfr()
    b = float(norm_bound)
    s = 0
    while b > 0.5:
        b /= 2.0
        s += 1
    scale = RealInterval.from_mpq(mpq(1, 1 << s), prec)
    ms = m_iv.scale(scale)

    # Taylor tail: sum_{m>N} (1/2)^m / m! <= 2 * (1/2)^(N+1) / (N+1)!
    target_exp = k + 3 * s + 10
    tail = mpq(1)
    nterms = 0
    while tail * (1 << target_exp) > 1:
        nterms += 1
        tail = tail * mpq(1, 2) / nterms
    tail = 2 * tail

    # Horner: I + X(I + X/2 (I + X/3 (...)))
    acc = IntervalMatrix.identity(n, prec)
    for m in range(nterms, 0, -1):
        inv = RealInterval.from_mpq(mpq(1, m), prec)
        acc = IntervalMatrix.identity(n, prec) + (ms * acc).scale(inv)
    # add the certified tail ball entrywise
    tail_iv = RealInterval.from_bounds(-mpq(tail), mpq(tail), prec)
    ball = ComplexInterval(tail_iv, tail_iv)
    rows = [[x + ball for x in r] for r in acc.rows]
    acc = IntervalMatrix(n, rows, prec)

    for _ in range(s):
        acc = acc * acc
    return acc


# ---------------------------------------------------------------------------
# PD certificates for interval Hermitian matrices (spectrum location)


def pd_certify_iv(s_iv):
    """Interval Cholesky on an interval Hermitian matrix; True means every
    point matrix in the enclosure is positive definite."""
    n = s_iv.n
    low = [[None] * n for _ in range(n)]
    for j in range(n):
        d = s_iv.rows[j][j].re
        for kk in range(j):
            d = d - low[j][kk].abs_sq()
        if not d.lo > 0:
            return False
        piv = d.sqrt()
        low[j][j] = piv
        inv = piv.inverse()
        for i in range(j + 1, n):
            acc = s_iv.rows[i][j]
            for kk in range(j):
                acc = acc - low[i][kk] * low[j][kk].conj()
            low[i][j] = acc.scale_real(inv)
    return True


def hermitian_spectrum_inside(h_iv, lo, hi):
    """Certify that the spectrum of every point matrix in the Hermitian
    enclosure h_iv lies strictly inside (lo, hi); lo, hi RealIntervals."""
    n = h_iv.n
    prec = h_iv.prec
    shift_lo = IntervalMatrix.from_scalar_diag(
        n, ComplexInterval.from_real(lo), prec
    )
    shift_hi = IntervalMatrix.from_scalar_diag(
        n, ComplexInterval.from_real(hi), prec
    )
    return pd_certify_iv(h_iv - shift_lo) and pd_certify_iv(shift_hi - h_iv)


# ---------------------------------------------------------------------------
# Schur logarithm


class SchurLog:
    """Certified logarithm data for a rational unitary."""

    __slots__ = ("h", "theta_frac", "exp_defect", "norm_bound")

    def __init__(self, h, theta_frac, exp_defect, norm_bound):
        self.h = h                    # IntervalMatrix, self-adjoint enclosure
        self.theta_frac = theta_frac  # theta = 2*pi*theta_frac, exact mpq
        self.exp_defect = exp_defect  # Dyadic bound on ||exp(iH) - u||
        self.norm_bound = norm_bound  # Dyadic bound on ||H||


def _mp_eig_unitary(u, prec_bits):
    """High-precision approximate diagonalization u ~ Z diag(lam) Z*."""
    n = u.n
    digits = int(prec_bits / 3.32) + 8
    with mpmath.workprec(prec_bits):
        a = mpmath.matrix(n, n)
        for i in range(n):
            for j in range(n):
                z = u.rows[i][j]
                a[i, j] = mpmath.mpc(
                    mpmath.mpf(int(z.re.numerator)) / int(z.re.denominator),
                    mpmath.mpf(int(z.im.numerator)) / int(z.im.denominator),
                )
        lam, zmat = mpmath.eig(a)
        # sort by argument so clusters are adjacent, then orthonormalize
        order = sorted(range(n), key=lambda j: mpmath.arg(lam[j]))
        lam = [lam[j] for j in order]
        zs = mpmath.matrix(n, n)
        for newj, oldj in enumerate(order):
            for i in range(n):
                zs[i, newj] = zmat[i, oldj]
        q, _ = mpmath.qr(zs)
        lam_str = [
            (mpmath.nstr(x.real, digits), mpmath.nstr(x.imag, digits)) for x in lam
        ]
        z_str = [
            [
                (
                    mpmath.nstr(q[i, j].real, digits),
                    mpmath.nstr(q[i, j].imag, digits),
                )
                for j in range(n)
            ]
            for i in range(n)
        ]
    return lam_str, z_str


def _str_to_ci(pair_str, prec):
    re = mpfr(pair_str[0], prec + 8)
    im = mpfr(pair_str[1], prec + 8)
    return ComplexInterval(
        RealInterval.from_bounds(re, re, prec), RealInterval.from_bounds(im, im, prec)
    )


def _angle_of_disk(center_ci, halfwidth, prec):
    """Enclosure of arg(z) over the disk |z - c| <= halfwidth*|c|-ish;
    returns a RealInterval in (-pi, 2pi) before branch shifting."""
    dn, up = ctx_pair(prec)
    y = center_ci.im.mid()
    x = center_ci.re.mid()
    a_lo = dn.atan2(y, x)
    a_hi = up.atan2(y, x)
    w = up.add(up.sub(a_hi, a_lo), halfwidth)
    return RealInterval.from_bounds(dn.sub(a_lo, w), up.add(a_hi, w), prec)


def schur_log(u, k, theta_scan_depth=12):
    """Certified branch logarithm of an exactly unitary rational matrix."""
    if not isinstance(u, RationalMatrix):
        raise OpalgError("schur_log expects an exact RationalMatrix")
    if not u.is_unitary():
        raise OpalgError("schur_log requires an exactly unitary rational point")
    n = u.n
    mp_bits = max(240, 4 * k)
    prec = max(160, 2 * k + 60)
    for _attempt in range(4):
        result = _schur_log_attempt(u, k, mp_bits, prec, theta_scan_depth)
        if result is not None:
            return result
        mp_bits = mp_bits * 2
        prec = prec * 2
    raise CertificationError(
        f"schur_log: could not certify exp(iH) within 2^-{k} for dim {n}"
    )


def _schur_log_attempt(u, k, mp_bits, prec, theta_scan_depth):
    n = u.n
    lam_str, z_str = _mp_eig_unitary(u, mp_bits)
    z_iv = IntervalMatrix(
        n, [[_str_to_ci(z_str[i][j], prec) for j in range(n)] for i in range(n)], prec
    )
    u_iv = IntervalMatrix.from_rational(u, prec)
    lam_iv = [_str_to_ci(s, prec) for s in lam_str]

    # residual disk radius: every eigenvalue of u is within r of some lam_j
    # (u normal: min_j |lambda - lam_j| <= ||uZ - Z Lam|| / sigma_min(Z))
    lam_diag = IntervalMatrix.zero(n, prec)
    rows = [list(r) for r in lam_diag.rows]
    for j in range(n):
        rows[j][j] = lam_iv[j]
    lam_diag = IntervalMatrix(n, rows, prec)
    resid = (u_iv * z_iv) - (z_iv * lam_diag)
    r_num = resid.norm_upper_mpfr()
    gram_defect = (
        (z_iv.adjoint() * z_iv) - IntervalMatrix.identity(n, prec)
    ).norm_upper_mpfr()
    _, up = ctx_pair(prec)
    dn, _ = ctx_pair(prec)
    if not float(gram_defect) < 0.5:
        return None
    sigma_min_sq = dn.sub(mpfr(1), gram_defect)
    disk_r = up.div(r_num, dn.sqrt(sigma_min_sq))

    # scan theta = 2pi * j / 2^t, certifiably off all eigenvalue disks
    theta_frac = None
    for t in range(2, theta_scan_depth):
        for j in range(1, 1 << t, 2):
            frac = mpq(j, 1 << t)
            c = cospi2(RealInterval.from_mpq(frac, prec), prec)
            s = sinpi2(RealInterval.from_mpq(frac, prec), prec)
            ok = True
            for lam in lam_iv:
                d_re = lam.re - c
                d_im = lam.im - s
                dist = (d_re * d_re + d_im * d_im).clamp_nonneg().sqrt()
                if not dn.sub(dist.lo, disk_r) > 0:
                    ok = False
                    break
            if ok:
                theta_frac = frac
                break
        if theta_frac is not None:
            break
    if theta_frac is None:
        return None

    # branch arguments of the eigenvalue disks in [theta, theta + 2pi)
    two_pi = RealInterval.pi(prec) * RealInterval.from_int(2, prec)
    theta_iv = two_pi * RealInterval.from_mpq(theta_frac, prec)
    halfwidth = up.mul(disk_r, mpfr(4))  # angular halfwidth bound, |lam| ~ 1
    args = []
    for lam in lam_iv:
        a = _angle_of_disk(lam, halfwidth, prec)
        # shift into [theta, theta + 2pi): candidate shifts 0, 2pi
        for shift_mult in (0, 1, 2):
            cand = a + two_pi * RealInterval.from_int(shift_mult, prec)
            if cand.lo > theta_iv.hi and cand.hi < (theta_iv + two_pi).lo:
                args.append(cand)
                break
        else:
            return None
    arg_diag = IntervalMatrix.zero(n, prec)
    rows = [list(r) for r in arg_diag.rows]
    for j in range(n):
        rows[j][j] = ComplexInterval.from_real(args[j])
    arg_diag = IntervalMatrix(n, rows, prec)

    h = (z_iv * arg_diag * z_iv.adjoint()).hermitized()

    # certificate 1: ||exp(iH) - u|| < 2^-k
    i_h = h.scale(ComplexInterval(RealInterval.zero(prec), RealInterval.from_int(1, prec)))
    eh = matrix_exp(i_h, k + 6)
    defect = (eh - u_iv).norm_upper_mpfr()
    if not float(defect) < 2.0 ** (-k):
        return None

    # certificate 2: spectrum of H inside (theta, theta + 2pi)
    if not hermitian_spectrum_inside(h, theta_iv, theta_iv + two_pi):
        return None

    return SchurLog(
        h,
        theta_frac,
        Dyadic.from_mpfr(defect),
        h.norm_upper(),
    )
