"""Prime dimension drop algebras and the Jiang-Su inductive system.

Z_{p,q} is realized inside C([0,1], M_p (x) M_q) with generators
a_i = (1-iota)^(1/2) (x) e^(p)_{1i} (x) 1_q and
b_j = iota^(1/2) (x) 1_p (x) e^(q)_{1j}.

Stage data: k_m, l_m are the first two primes above 2 p_m q_m,
p_{m+1} = k_m p_m, q_{m+1} = l_m q_m, r_m = k_m l_m mod q_{m+1},
s_m = k_m l_m mod p_{m+1}.  The divisibility facts r_m q_m = alpha_m
q_{m+1}, k_m l_m - r_m = beta_m q_{m+1} (and the v-side analogues with
s_m, p_{m+1}) are asserted, not assumed.

The connecting map is Phi_m(f) = (u_m ~> v_m)* diag(f o xi_1, ...,
f o xi_K) (u_m ~> v_m) with K = k_m l_m; u_m, v_m are explicit
permutations built by basis-index matching so that the t = 0 diagonal
lands exactly in M_{p_{m+1}} (x) 1 and the t = 1 diagonal in
1 (x) M_{q_{m+1}}.  Since the path is pointwise unitary, ||Phi_m(f)(t)||
equals max_i ||f(xi_i(t))||, which keeps all norm certificates in the
stage-m fiber dimension.
"""

import numpy as np
from gmpy2 import mpq

from .calculus import PermutationPath
from .dyadic import Dyadic, DyadicInterval
from .errors import InfeasibleError, OpalgError
from .exact import GaussianRational
from .funcalg import (
    CertifiedFunction,
    HalfPowerMatrixFunction,
    XI_CONST,
    XI_LEFT,
    XI_RIGHT,
    sup_norm,
    xi_apply_mpq,
)
from .intervalmat import MidRadMatrix
from .matrices import RationalMatrix
from .normcert import norm_upper_quick
from .rint import RealInterval
from .words import StarPoly, poly_apply

DENSE_FIBER_LIMIT = 64       # dense exact coefficients up to this fiber dim
DEFAULT_STAGE_BUDGET = 1     # matrix-level numerics allowed for m <= budget


TRIAL_DIVISION_LIMIT = 1 << 40


def next_prime(n):
    """Smallest prime > n.  Deterministic trial division while feasible;
    beyond 2^40 falls back to gmpy2's BPSW + extra Miller-Rabin rounds
    (no BPSW pseudoprime is known; double-checked with 64 rounds)."""
    if n >= TRIAL_DIVISION_LIMIT:
        import gmpy2

        cand = int(gmpy2.next_prime(n))
        if not gmpy2.is_prime(cand, 64):
            raise OpalgError(f"primality double-check failed at {cand}")
        return cand
    cand = n + 1
    if cand <= 2:
        return 2
    if cand % 2 == 0:
        cand += 1
    while True:
        if _is_prime(cand):
            return cand
        cand += 2


def _is_prime(n):
    if n < 2:
        return False
    if n % 2 == 0:
        return n == 2
    d = 3
    while d * d <= n:
        if n % d == 0:
            return False
        d += 2
    return True


class JiangSuStage:
    """Exact integer data of one inductive step m -> m+1."""

    __slots__ = (
        "m", "p", "q", "k", "l", "p_next", "q_next", "r", "s",
        "alpha", "beta", "alpha_v", "beta_v", "big_k",
    )

    def __init__(self, m, p, q):
        self.m = m
        self.p = p
        self.q = q
        self.k = next_prime(2 * p * q)
        self.l = next_prime(self.k)
        self.p_next = self.k * p
        self.q_next = self.l * q
        self.big_k = self.k * self.l
        self.r = self.big_k % self.q_next
        self.s = self.big_k % self.p_next
        # divisibility facts behind the block multiplicities
        if (self.r * q) % self.q_next:
            raise OpalgError(f"stage {m}: r*q not divisible by q_next")
        if (self.big_k - self.r) % self.q_next:
            raise OpalgError(f"stage {m}: K - r not divisible by q_next")
        if (self.s * p) % self.p_next:
            raise OpalgError(f"stage {m}: s*p not divisible by p_next")
        if (self.big_k - self.s) % self.p_next:
            raise OpalgError(f"stage {m}: K - s not divisible by p_next")
        self.alpha = (self.r * q) // self.q_next
        self.beta = (self.big_k - self.r) // self.q_next
        self.alpha_v = (self.s * p) // self.p_next
        self.beta_v = (self.big_k - self.s) // self.p_next
        if self.alpha + self.beta * q != self.k:
            raise OpalgError(f"stage {m}: u-side block sizes do not tile p_next")
        if self.alpha_v + self.beta_v * p != self.l:
            raise OpalgError(f"stage {m}: v-side block sizes do not tile q_next")
        from math import gcd

        if gcd(self.p_next, self.q_next) != 1:
            raise OpalgError(f"stage {m}: p_next, q_next not coprime")

    def xi_kind(self, i):
        """Reparametrization of diagonal block i (0-based): blocks 0..r-1
        use t/2, blocks r..K-s-1 the constant 1/2, the last s use (t+1)/2."""
        if i < self.r:
            return XI_LEFT
        if i < self.big_k - self.s:
            return XI_CONST
        return XI_RIGHT

    def xi_counts(self):
        return self.r, self.big_k - self.r - self.s, self.s

    def as_record(self):
        return {
            "m": self.m, "p": self.p, "q": self.q, "k": self.k, "l": self.l,
            "p_next": self.p_next, "q_next": self.q_next, "r": self.r,
            "s": self.s, "alpha": self.alpha, "beta": self.beta,
            "alpha_v": self.alpha_v, "beta_v": self.beta_v,
        }


_STAGE_CACHE = {}


def stage_params(m):
    """Exact stage data for step m (p_0 = 2, q_0 = 3)."""
    if m < 0:
        raise OpalgError("stage index must be >= 0")
    if m in _STAGE_CACHE:
        return _STAGE_CACHE[m]
    p, q = 2, 3
    for j in range(m + 1):
        if j not in _STAGE_CACHE:
            _STAGE_CACHE[j] = JiangSuStage(j, p, q)
        st = _STAGE_CACHE[j]
        p, q = st.p_next, st.q_next
    return _STAGE_CACHE[m]


def stage_dims(m):
    """(p_m, q_m) of stage m."""
    if m == 0:
        return 2, 3
    prev = stage_params(m - 1)
    return prev.p_next, prev.q_next


# ---------------------------------------------------------------------------
# stage elements: dense half-power (small fibers) and Kronecker form


class KronHalfPower:
    """Half-power function with coefficients kept as sums of A (x) B
    Kronecker pairs (A in M_p, B in M_q); exact, never materializes the
    p*q-dimensional matrices except at evaluation time (float midrad)."""

    __slots__ = ("p", "q", "terms")

    def __init__(self, p, q, terms=None):
        self.p = p
        self.q = q
        self.terms = {}
        if terms:
            for key, pairs in terms.items():
                merged = self._merge(pairs)
                if merged:
                    self.terms[key] = merged

    @staticmethod
    def _merge(pairs):
        out = []
        for a, b in pairs:
            if a.is_zero() or b.is_zero():
                continue
            for idx, (a0, b0) in enumerate(out):
                if a0 == a:
                    out[idx] = (a0, b0 + b)
                    break
                if b0 == b:
                    out[idx] = (a0 + a, b0)
                    break
            else:
                out.append((a, b))
        return [(a, b) for a, b in out if not (a.is_zero() or b.is_zero())]

    @property
    def n(self):
        return self.p * self.q

    @staticmethod
    def generator_a(p, q, i):
        """(1-iota)^(1/2) (x) e^(p)_{1i} (x) 1_q, i in 1..p."""
        return KronHalfPower(
            p, q,
            {(0, 1): [(RationalMatrix.matrix_unit(p, 0, i - 1),
                       RationalMatrix.identity(q))]},
        )

    @staticmethod
    def generator_b(p, q, j):
        """iota^(1/2) (x) 1_p (x) e^(q)_{1j}, j in 1..q."""
        return KronHalfPower(
            p, q,
            {(1, 0): [(RationalMatrix.identity(p),
                       RationalMatrix.matrix_unit(q, 0, j - 1))]},
        )

    @staticmethod
    def unit(p, q):
        return KronHalfPower(
            p, q,
            {(0, 0): [(RationalMatrix.identity(p), RationalMatrix.identity(q))]},
        )

    def __add__(self, other):
        self._check(other)
        out = {k: list(v) for k, v in self.terms.items()}
        for k, v in other.terms.items():
            out.setdefault(k, []).extend(v)
        return KronHalfPower(self.p, self.q, out)

    def __neg__(self):
        return KronHalfPower(
            self.p, self.q,
            {k: [(-a, b) for a, b in v] for k, v in self.terms.items()},
        )

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other):
        if isinstance(other, KronHalfPower):
            self._check(other)
            out = {}
            for (r1, s1), v1 in self.terms.items():
                for (r2, s2), v2 in other.terms.items():
                    key = (r1 + r2, s1 + s2)
                    lst = out.setdefault(key, [])
                    for a1, b1 in v1:
                        for a2, b2 in v2:
                            lst.append((a1 * a2, b1 * b2))
            return KronHalfPower(self.p, self.q, out)
        return self.scale(other)

    def __rmul__(self, other):
        return self.scale(other)

    def scale(self, scalar):
        return KronHalfPower(
            self.p, self.q,
            {k: [(a.scale(scalar), b) for a, b in v] for k, v in self.terms.items()},
        )

    def adjoint(self):
        return KronHalfPower(
            self.p, self.q,
            {k: [(a.adjoint(), b.adjoint()) for a, b in v]
             for k, v in self.terms.items()},
        )

    def _check(self, other):
        if self.p != other.p or self.q != other.q:
            raise OpalgError("Kron half-power shape mismatch")

    def as_scalar_profile(self):
        """If every coefficient is z * identity, return the scalar
        HalfPowerMatrixFunction (fiber dim 1); else None."""
        out = {}
        ident_p = RationalMatrix.identity(self.p)
        ident_q = RationalMatrix.identity(self.q)
        for key, pairs in self.terms.items():
            scal = GaussianRational(0, 0)
            for a, b in pairs:
                za = _scalar_multiple_of(a, ident_p)
                zb = _scalar_multiple_of(b, ident_q)
                if za is None or zb is None:
                    return None
                scal = scal + za * zb
            if scal:
                out[key] = RationalMatrix(1, [[scal]])
        return HalfPowerMatrixFunction(1, out)

    def to_dense(self):
        """Dense HalfPowerMatrixFunction (small fibers only)."""
        if self.n > DENSE_FIBER_LIMIT:
            raise InfeasibleError(
                f"dense expansion of fiber dim {self.n} exceeds the budget"
            )
        terms = {}
        for key, pairs in self.terms.items():
            acc = RationalMatrix.zero(self.n)
            for a, b in pairs:
                acc = acc + a.kron(b)
            terms[key] = acc
        return HalfPowerMatrixFunction(self.n, terms)

    def eval_midrad(self, t_iv, prec=80):
        """MidRadMatrix enclosure of the value on a t-interval."""
        from .funcalg import _scalar_half_power

        n = self.n
        acc_mid = np.zeros((n, n), dtype=np.complex128)
        acc_rad = np.zeros((n, n), dtype=np.float64)
        for (r, s), pairs in self.terms.items():
            w = _scalar_half_power(t_iv, r, s, prec)
            w_mid = float(w.mid())
            w_rad = max(abs(float(w.lo) - w_mid), abs(float(w.hi) - w_mid))
            for a, b in pairs:
                am = MidRadMatrix.from_rational(a)
                bm = MidRadMatrix.from_rational(b)
                k_mid = np.kron(am.mid, bm.mid)
                k_rad = np.kron(np.abs(am.mid.real) + np.abs(am.mid.imag) + am.rad,
                                bm.rad) + np.kron(am.rad,
                                                  np.abs(bm.mid.real)
                                                  + np.abs(bm.mid.imag))
                k_abs = np.abs(k_mid.real) + np.abs(k_mid.imag) + k_rad
                acc_mid += w_mid * k_mid
                acc_rad += abs(w_mid) * k_rad + w_rad * k_abs + 8 * 2.0 ** -53 * abs(
                    w_mid
                ) * (np.abs(k_mid.real) + np.abs(k_mid.imag))
        acc_rad = acc_rad * (1 + 2.0 ** -36) + 2.0 ** -960
        return MidRadMatrix(acc_mid, acc_rad)

    def norm_box(self, box_lo, box_hi, k):
        prec = max(64, k + 16)
        t = RealInterval.from_bounds(
            RealInterval.from_mpq(mpq(box_lo), prec).lo,
            RealInterval.from_mpq(mpq(box_hi), prec).hi,
            prec,
        )
        return self.eval_midrad(t, prec).norm_enclosure()

    def hoelder_half_constant(self):
        total = mpq(0)
        for (r, s), pairs in self.terms.items():
            cr = mpq(0) if r == 0 else (mpq(1) if r == 1 else mpq(r, 2))
            cs = mpq(0) if s == 0 else (mpq(1) if s == 1 else mpq(s, 2))
            for a, b in pairs:
                total += (cr + cs) * (
                    norm_upper_quick(a).as_mpq() * norm_upper_quick(b).as_mpq()
                )
        return total


def _scalar_multiple_of(mat, ident):
    """z with mat == z * ident, or None."""
    z = mat.rows[0][0]
    probe = ident.scale(z)
    return z if probe == mat else None


def dd_generators(p, q):
    """Stage generators in order a_1..a_p, b_1..b_q (frozen enumeration)."""
    if p * q <= DENSE_FIBER_LIMIT:
        gens = []
        for i in range(1, p + 1):
            mat = RationalMatrix.matrix_unit(p, 0, i - 1).kron(
                RationalMatrix.identity(q)
            )
            gens.append(HalfPowerMatrixFunction.scalar_profile(0, 1, mat))
        for j in range(1, q + 1):
            mat = RationalMatrix.identity(p).kron(
                RationalMatrix.matrix_unit(q, 0, j - 1)
            )
            gens.append(HalfPowerMatrixFunction.scalar_profile(1, 0, mat))
        return gens
    gens = [KronHalfPower.generator_a(p, q, i) for i in range(1, p + 1)]
    gens += [KronHalfPower.generator_b(p, q, j) for j in range(1, q + 1)]
    return gens


def dd_eval_poly(p, q, poly):
    """Realize a StarPoly over the stage generators as a function element."""
    gens = dd_generators(p, q)
    if p * q <= DENSE_FIBER_LIMIT:
        one = HalfPowerMatrixFunction.unit(p * q)
    else:
        one = KronHalfPower.unit(p, q)

    def assign(idx):
        if 0 <= idx < len(gens):
            return gens[idx]
        return None

    return poly_apply(poly, assign, one)


def dd_norm(p, q, poly, k, budget=None):
    """Certified sup-norm of a StarPoly over the Z_{p,q} generators."""
    el = dd_eval_poly(p, q, poly)
    if isinstance(el, KronHalfPower):
        scal = el.as_scalar_profile()
        if scal is not None:
            el = scal
    kwargs = {} if budget is None else {"budget": budget}
    return sup_norm(el, k, **kwargs)


# ---------------------------------------------------------------------------
# the connecting unitaries


def build_u(m, budget=DEFAULT_STAGE_BUDGET):
    """Permutation pi with u = P_pi of size p_{m+1} q_{m+1} such that
    u* diag(f(xi_i(0))) u = [x_0 (alpha times) ; f(1/2) (beta times)] (x) 1."""
    st = stage_params(m)
    if m > budget:
        raise InfeasibleError(
            f"build_u: stage {m} permutation has size {st.p_next * st.q_next}, "
            f"beyond the numeric stage budget {budget}"
        )
    p, q, k_val = st.p, st.q, st.big_k
    p1, q1 = st.p_next, st.q_next
    alpha, beta, r = st.alpha, st.beta, st.r
    pq = p * q
    perm = [0] * (p1 * q1)
    for cap_p in range(p1):
        for cap_q in range(q1):
            amb = cap_p * q1 + cap_q
            if cap_p < alpha * p:
                a_blk, a = divmod(cap_p, p)
                flat = a_blk * q1 + cap_q
                i = flat // q
                b = flat % q
                c = a * q + b
            else:
                g, c = divmod(cap_p - alpha * p, pq)
                flat = g * q1 + cap_q
                i = r + flat
            if i >= k_val:
                raise OpalgError("build_u: block index bookkeeping overflow")
            perm[amb] = i * pq + c
    return perm


def build_v(m, budget=DEFAULT_STAGE_BUDGET):
    """Permutation for the t = 1 side: v* diag(f(xi_i(1))) v =
    1 (x) [y_1 (alpha_v times) ; f(1/2) (beta_v times)]."""
    st = stage_params(m)
    if m > budget:
        raise InfeasibleError(
            f"build_v: stage {m} permutation has size {st.p_next * st.q_next}, "
            f"beyond the numeric stage budget {budget}"
        )
    p, q, k_val = st.p, st.q, st.big_k
    p1, q1 = st.p_next, st.q_next
    alpha_v, s = st.alpha_v, st.s
    pq = p * q
    perm = [0] * (p1 * q1)
    for cap_p in range(p1):
        for cap_q in range(q1):
            amb = cap_p * q1 + cap_q
            if cap_q < alpha_v * q:
                a_blk, b = divmod(cap_q, q)
                flat = a_blk * p1 + cap_p
                i = (k_val - s) + flat // p
                a = flat % p
                c = a * q + b
            else:
                g, c = divmod(cap_q - alpha_v * q, pq)
                flat = g * p1 + cap_p
                i = flat
            if i >= k_val:
                raise OpalgError("build_v: block index bookkeeping overflow")
            perm[amb] = i * pq + c
    return perm


_PATH_CACHE = {}


def connecting_path(m, budget=DEFAULT_STAGE_BUDGET):
    if m not in _PATH_CACHE:
        _PATH_CACHE[m] = PermutationPath(build_u(m, budget), build_v(m, budget))
    return _PATH_CACHE[m]


# ---------------------------------------------------------------------------
# the connecting map Phi_m


def _stage_element(m, f):
    """Coerce a StarPoly or function element to the stage-m fiber."""
    p, q = stage_dims(m)
    if isinstance(f, StarPoly):
        return dd_eval_poly(p, q, f)
    return f


def _xi_values(st, f, t_iv, prec):
    """The three distinct fiber values f(xi(t)) as MidRadMatrix."""
    out = {}
    for kind in (XI_LEFT, XI_CONST, XI_RIGHT):
        from .funcalg import xi_apply_iv

        arg = xi_apply_iv(kind, t_iv, prec)
        if isinstance(f, HalfPowerMatrixFunction):
            out[kind] = f.eval_iv(arg, prec).to_midrad()
        elif isinstance(f, KronHalfPower):
            out[kind] = f.eval_midrad(arg, prec)
        else:
            raise OpalgError(f"unsupported stage element {type(f)}")
    return out


def _diag_midrad(st, vals):
    """Block-diagonal MidRadMatrix diag(f(xi_1), ..., f(xi_K))."""
    pq = st.p * st.q
    n = st.big_k * pq
    mid = np.zeros((n, n), dtype=np.complex128)
    rad = np.zeros((n, n), dtype=np.float64)
    for i in range(st.big_k):
        blk = vals[st.xi_kind(i)]
        sl = slice(i * pq, (i + 1) * pq)
        mid[sl, sl] = blk.mid
        rad[sl, sl] = blk.rad
    return MidRadMatrix(mid, rad)


def phi(m, f, k, budget=DEFAULT_STAGE_BUDGET):
    """Phi_m(f) as a CertifiedFunction on the stage-(m+1) fiber.

    Norm boxes use the pointwise-unitarity of the true connecting path:
    conjugation by (u ~> v)(t) preserves norms, so ||Phi_m(f)(t)|| equals
    max over the three reparametrizations of ||f(xi(t))||; those
    enclosures live in the stage-m fiber.  Full interval evaluations
    (including the path product) are used for entrywise enclosures.
    """
    st = stage_params(m)
    if m > budget:
        raise InfeasibleError(
            f"phi: stage {m} image has fiber dimension "
            f"{st.p_next * st.q_next}, beyond the numeric stage budget {budget}"
        )
    el = _stage_element(m, f)
    path = connecting_path(m, budget)
    n1 = st.p_next * st.q_next

    def eval_box(t_iv, kk):
        prec = max(64, kk + 16)
        w = path.eval_midrad(t_iv, kk + 6)
        vals = _xi_values(st, el, t_iv, prec)
        d = _diag_midrad(st, vals)
        return w.adjoint() * (d * w)

    def norm_box(lo, hi, kk):
        outs = [
            el.norm_box(xi_apply_mpq(kind, lo), xi_apply_mpq(kind, hi), kk)
            for kind in (XI_LEFT, XI_CONST, XI_RIGHT)
        ]
        lo_d = max(iv.lo for iv in outs)
        hi_d = max(iv.hi for iv in outs)
        return DyadicInterval(lo_d, hi_d)

    if isinstance(el, HalfPowerMatrixFunction):
        l_f = el.hoelder_half_constant()
        f_sup = sum(
            (norm_upper_quick(c).as_mpq() for c in el.terms.values()), mpq(0)
        )
    else:
        l_f = el.hoelder_half_constant()
        f_sup = sum(
            (
                norm_upper_quick(a).as_mpq() * norm_upper_quick(b).as_mpq()
                for pairs in el.terms.values()
                for a, b in pairs
            ),
            mpq(0),
        )
    # path Lipschitz 8pi/|s-t| on the conjugation, Hoelder-1/2 from f
    modulus = (l_f + mpq(26) * f_sup, mpq(1, 2))
    return CertifiedFunction(n1, eval_box=eval_box, norm_box=norm_box, modulus=modulus)


class PhiPointCertificates:
    """Shared per-grid-point data for the Phi_m defect certificates.

    With W the enclosure of the (pointwise unitary) path at t, and
    D_f(t) the block diagonal of fiber values, the true defects satisfy

      Phi(x)Phi(y) - Phi(xy) = W* D_x (WW* - 1) D_y W
      Phi(x*) - Phi(x)*      = W* (D_{x*} - D_x*) W
      Phi(1) - 1             = W*W - 1

    so each bound is a product of certified norm bounds; the heavy
    1326-dim work (three matmuls) is shared across all pairs."""

    def __init__(self, m, t, k, budget=DEFAULT_STAGE_BUDGET):
        self.m = m
        self.st = stage_params(m)
        self.t = mpq(t)
        self.k = k
        self.prec = max(64, k + 24)
        path = connecting_path(m, budget)
        w = path.eval_midrad(self.t, k + 16)
        ident = MidRadMatrix.identity(w.n)
        self.inner_defect = (w * w.adjoint() - ident).norm_upper()   # ||WW*-1||
        self.unital_defect = (w.adjoint() * w - ident).norm_upper()  # ||W*W-1||
        # ||W||^2 <= 1 + ||W*W - 1||
        self.w_norm_sq = Dyadic(1) + self.unital_defect

    def _fiber_norm_upper(self, poly):
        p, q = self.st.p, self.st.q
        el = dd_eval_poly(p, q, poly)
        t_iv = RealInterval.from_mpq(self.t, self.prec)
        best = Dyadic(0)
        for kind in (XI_LEFT, XI_CONST, XI_RIGHT):
            from .funcalg import xi_apply_iv

            arg = xi_apply_iv(kind, t_iv, self.prec)
            if isinstance(el, HalfPowerMatrixFunction):
                enc = el.eval_iv(arg, self.prec).to_midrad()
            else:
                enc = el.eval_midrad(arg, self.prec)
            best = max(best, enc.norm_upper())
        return best

    def _fiber_adjoint_defect(self, poly):
        """|| D_{x*}(t) - D_x(t)* || upper (6-dim enclosures)."""
        p, q = self.st.p, self.st.q
        el = dd_eval_poly(p, q, poly)
        el_star = dd_eval_poly(p, q, poly.adjoint())
        t_iv = RealInterval.from_mpq(self.t, self.prec)
        worst = Dyadic(0)
        for kind in (XI_LEFT, XI_CONST, XI_RIGHT):
            from .funcalg import xi_apply_iv

            arg = xi_apply_iv(kind, t_iv, self.prec)
            if isinstance(el, HalfPowerMatrixFunction):
                d = el_star.eval_iv(arg, self.prec).to_midrad() - el.eval_iv(
                    arg, self.prec
                ).to_midrad().adjoint()
            else:
                d = el_star.eval_midrad(arg, self.prec) - el.eval_midrad(
                    arg, self.prec
                ).adjoint()
            worst = max(worst, d.norm_upper())
        return worst

    def mult_defect_bound(self, x_poly, y_poly):
        """Certified bound on ||Phi(x)(t) Phi(y)(t) - Phi(xy)(t)||."""
        nx = self._fiber_norm_upper(x_poly)
        ny = self._fiber_norm_upper(y_poly)
        return (self.w_norm_sq * nx * ny * self.inner_defect).round(60, up=True)

    def adjoint_defect_bound(self, x_poly):
        """Certified bound on ||Phi(x*)(t) - Phi(x)(t)*||."""
        base = self._fiber_adjoint_defect(x_poly)
        return (self.w_norm_sq * base).round(60, up=True)

    def unital_defect_bound(self):
        """Certified bound on ||Phi(1)(t) - 1||."""
        return self.unital_defect


def phi_endpoint_exact(m, f, endpoint, budget=DEFAULT_STAGE_BUDGET):
    """Phi_m(f)(endpoint) by exact permutation conjugation (no path):
    returns a MidRadMatrix whose radii come only from the fiber values."""
    st = stage_params(m)
    el = _stage_element(m, f)
    perm = build_u(m, budget) if endpoint == 0 else build_v(m, budget)
    prec = 96
    t_iv = RealInterval.from_mpq(mpq(endpoint), prec)
    vals = _xi_values(st, el, t_iv, prec)
    d = _diag_midrad(st, vals)
    pi = np.asarray(perm)
    return MidRadMatrix(d.mid[np.ix_(pi, pi)], d.rad[np.ix_(pi, pi)])


# ---------------------------------------------------------------------------
# the limit presentation Z^st and its norm oracle


def _scalar_profile_of(el):
    """Scalar half-power profile c with el = c * 1, or None."""
    if isinstance(el, KronHalfPower):
        return el.as_scalar_profile()
    if isinstance(el, HalfPowerMatrixFunction):
        out = {}
        ident = RationalMatrix.identity(el.n)
        for key, c in el.terms.items():
            z = _scalar_multiple_of(c, ident)
            if z is None:
                return None
            out[key] = RationalMatrix(1, [[z]])
        return HalfPowerMatrixFunction(1, out)
    return None


def _scalar_vs_phi_normfn(m, el0, scal1, k):
    """Certified sup-norm of Phi_m(el0) + scal1 * 1 over [0,1].

    Central (scalar) summands commute with the conjugation, and the true
    path is pointwise unitary, so the norm profile is
    max_i || el0(xi_i(t)) + scal1(t) * 1 ||, computed in the stage-m
    fiber dimension."""
    st = stage_params(m)
    fiber = st.p * st.q

    def norm_box(lo, hi, kk):
        prec = max(64, kk + 16)
        outs = []
        for kind in (XI_LEFT, XI_CONST, XI_RIGHT):
            from .funcalg import xi_apply_iv
            from .normcert import interval_matrix_norm

            t_lo = RealInterval.from_mpq(mpq(lo), prec).lo
            t_hi = RealInterval.from_mpq(mpq(hi), prec).hi
            t_iv = RealInterval.from_bounds(t_lo, t_hi, prec)
            arg = xi_apply_iv(kind, t_iv, prec)
            if isinstance(el0, HalfPowerMatrixFunction):
                enc = el0.eval_iv(arg, prec)
            else:
                enc = el0.eval_midrad(arg, prec).to_interval_matrix(prec)
            sval = scal1.eval_iv(t_iv, prec).rows[0][0]
            enc = enc + IntervalMatrix_from_scalar(fiber, sval, prec)
            outs.append(interval_matrix_norm(enc, kk))
        return DyadicInterval(
            max(iv.lo for iv in outs), max(iv.hi for iv in outs)
        )

    cf = CertifiedFunction(fiber, eval_box=_no_eval, norm_box=norm_box)
    return sup_norm(cf, k)


def IntervalMatrix_from_scalar(n, scalar_ci, prec):
    from .intervalmat import IntervalMatrix
    from .rint import ComplexInterval

    return IntervalMatrix.from_scalar_diag(n, scalar_ci, prec)


def _no_eval(t, k):
    raise InfeasibleError("norm-profile-only certified function")


def jiangsu_b_distance(m, a_poly, b_poly, k, budget=DEFAULT_STAGE_BUDGET):
    """Certified || Phi_m(a) - b || for a over stage-m generators and b
    over stage-(m+1) generators.  Supported when b is central (a scalar
    profile); the general candidate would need interval evaluation of the
    difference at the stage-(m+1) fiber dimension over all of [0,1],
    which is outside the stage budget."""
    if m > budget:
        raise InfeasibleError(f"jiangsu: stage {m} beyond numeric budget {budget}")
    p, q = stage_dims(m)
    p1, q1 = stage_dims(m + 1)
    el0 = dd_eval_poly(p, q, a_poly)
    el1 = dd_eval_poly(p1, q1, b_poly)
    scal = _scalar_profile_of(el1)
    if scal is None:
        raise InfeasibleError(
            "jiangsu b-distance: non-central stage-(m+1) candidates are outside "
            "the numeric budget (no fast certificate)"
        )
    return _scalar_vs_phi_normfn(m, el0, -scal, k)


def jiangsu_presentation(stage_budget=DEFAULT_STAGE_BUDGET):
    """Z^st as the inductive limit of the dimension-drop stages along the
    connecting maps.  Special point pair(m, i): the i-th generator of
    stage m (a_1..a_p then b_1..b_q).  The oracle covers points supported
    in a single stage <= stage_budget directly, and mixed stage-m /
    stage-(m+1) points whose higher-stage part is central via the
    conjugation-invariance fast path; everything else raises
    InfeasibleError (never a wrong answer)."""
    from .presentations import InductiveLimitPresentation
    from .words import unpair

    def stage_pres(m):
        from .presentations import dimdrop_presentation

        p, q = stage_dims(m)
        return dimdrop_presentation(p, q)

    def push_element(m, el):
        return phi(m, el, 12, budget=stage_budget)

    def mixed_norm(poly, k):
        # split letters by stage; words may not mix stages
        by_stage = {}
        for word, coeff in poly.terms.items():
            stages = {unpair(g)[0] for g, _ in word}
            if len(stages) > 1:
                raise InfeasibleError(
                    "jiangsu oracle: words mixing stages are outside the budget"
                )
            s = stages.pop() if stages else None
            by_stage.setdefault(s, {})[word] = coeff
        stages = sorted(s for s in by_stage if s is not None)
        if len(stages) != 2 or stages[1] != stages[0] + 1:
            raise InfeasibleError(
                "jiangsu oracle: only adjacent-stage mixed points are supported"
            )
        m = stages[0]
        if m + 1 > stage_budget:
            raise InfeasibleError(
                f"jiangsu oracle: stage {m + 1} beyond budget {stage_budget}"
            )

        def relabel(terms):
            return StarPoly(terms).map_generators(
                lambda g: StarPoly.gen(unpair(g)[1])
            )

        lower = relabel(by_stage.get(m, {}))
        upper = relabel(by_stage.get(m + 1, {}))
        # fold the unit (stage-free) words into the upper part
        unit_terms = by_stage.get(None, {})
        for word, coeff in unit_terms.items():
            upper = upper + StarPoly({word: coeff})
        p, q = stage_dims(m)
        p1, q1 = stage_dims(m + 1)
        el0 = dd_eval_poly(p, q, lower)
        el1 = dd_eval_poly(p1, q1, upper)
        scal = _scalar_profile_of(el1)
        if scal is None:
            raise InfeasibleError(
                "jiangsu oracle: mixed point's higher-stage part is not central"
            )
        return _scalar_vs_phi_normfn(m, el0, scal, k)

    return InductiveLimitPresentation(
        descriptor="jiangsu",
        stage_presentation=stage_pres,
        push_poly=None,
        push_element=push_element,
        injective=True,
        stage_budget=stage_budget,
        mixed_norm=mixed_norm,
    )


def scalar_calibration_candidate(m=0):
    """The stage-(m+1) scalar candidate g(sum_j b_j* b_j) with the affine
    calibration g(x) = (2x+1)/4: the L-infinity-optimal scalar companion
    of the xi system (any scalar candidate stays at distance >= 1/4 from
    the image of iota*1, since the t=0 diagonal carries both 0 and 1/2)."""
    p1, q1 = stage_dims(m + 1)
    b_sq = StarPoly.zero()
    for j in range(q1):
        g = p1 + j
        b_sq = b_sq + StarPoly.gen(g, star=True) * StarPoly.gen(g)
    return StarPoly.unit(GaussianRational(mpq(1, 4), 0)) + b_sq.scale(
        GaussianRational(mpq(1, 2), 0)
    )
