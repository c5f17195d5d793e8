"""Presentations of C*-algebras: special-point enumeration plus a
certified norm oracle, with tensor-product and inductive-limit
combinators and the first-close-rational-point search b(m, n, k).

A Presentation bundles:
  * an evaluator realizing special points in a concrete backend
    (exact matrices, half-power functions, stage elements),
  * a norm oracle  (StarPoly code, k) -> DyadicInterval of width <= 2^-k
    containing the operator norm of the decoded point,
  * per-generator norm bounds, and
  * an optional exact unit expansion  1 = sum c_u a_u  over self-adjoint
    single letters (used by the tensor embeddings and translations).

Tensor backends provided: matrix (x) matrix, function (x) matrix, and
stagewise UHF (x) UHF (the latter lives in uhf.py and registers itself
here).  Inductive-limit presentations push mixed-stage points to the
highest participating stage; pushes are exact for matrix chains and go
through the certified connecting maps for the Jiang-Su system.
"""

from gmpy2 import mpq

from .dyadic import Dyadic, DyadicInterval
from .errors import BudgetExhaustedError, CertificationError, InfeasibleError, OpalgError
from .exact import GaussianRational
from .funcalg import HalfPowerMatrixFunction, sup_norm
from .matrices import RationalMatrix, matrix_unit_from_index, matrix_unit_index
from .normcert import matrix_norm
from .words import StarPoly, decode_poly, encode_poly, pair, poly_apply, unpair


class Presentation:
    """A presented C*-algebra with a certified norm oracle."""

    def __init__(
        self,
        descriptor,
        kind,
        special_eval,
        one,
        norm_impl,
        gen_bound=None,
        unit_expansion=None,
        num_generators=None,
        meta=None,
    ):
        self.descriptor = descriptor
        self.kind = kind
        self._special_eval = special_eval
        self._one = one
        self._norm_impl = norm_impl
        self._gen_bound = gen_bound or (lambda i: Dyadic(1))
        self.unit_expansion = unit_expansion  # list of (GaussianRational, index)
        self.num_generators = num_generators  # None = infinite family
        self.meta = meta or {}

    # -- special points and evaluation --

    def special_point(self, i):
        if self.num_generators is not None and not 0 <= i < self.num_generators:
            raise OpalgError(
                f"{self.descriptor}: special point {i} out of range"
            )
        return self._special_eval(i)

    def one(self):
        return self._one()

    def eval_poly(self, poly):
        return poly_apply(poly, self.special_point, self.one())

    # -- the oracle --

    def norm_of_poly(self, poly, k):
        return self._norm_impl(poly, k)

    def certified_norm(self, code, k):
        """The paper-shaped oracle: code and precision to a 2^-k enclosure."""
        return self.norm_of_poly(decode_poly(code), k)

    # -- bounds --

    def generator_bound(self, i):
        return self._gen_bound(i)

    def poly_bound(self, poly):
        """Exact rational upper bound on the norm of a rational point,
        from coefficient sizes and generator bounds."""
        total = mpq(0)
        for word, coeff in poly.terms.items():
            mag = abs(coeff.re) + abs(coeff.im)
            for g, _ in word:
                mag *= self.generator_bound(g).as_mpq()
            total += mag
        return total

    # -- unit --

    def unit_poly(self):
        """An exact rational point equal to the unit, if registered."""
        if self.unit_expansion is None:
            return None
        out = StarPoly.zero()
        for coeff, idx in self.unit_expansion:
            out = out + StarPoly.gen(idx, coeff=coeff)
        return out

    @property
    def unit_code(self):
        up = self.unit_poly()
        return None if up is None else encode_poly(up)

    def __repr__(self):
        return f"Presentation({self.descriptor!r})"


def certified_norm(presentation, code, k):
    """Module-level convenience mirroring the oracle contract."""
    return presentation.certified_norm(code, k)


class ComputablePoint:
    """x with approximator(k) returning a code of a 2^-k-close rational point."""

    def __init__(self, presentation, approximator):
        self.presentation = presentation
        self.approximator = approximator

    def code(self, k):
        return self.approximator(k)

    @staticmethod
    def exact(presentation, poly):
        c = encode_poly(poly)
        return ComputablePoint(presentation, lambda k: c)


class ComputableMap:
    """phi with image_approximator(code, k) -> code of a target rational
    point within 2^-k of phi(decoded point); exact maps ignore k."""

    def __init__(self, source, target, image_approximator, exact=False):
        self.source = source
        self.target = target
        self.image_approximator = image_approximator
        self.exact = exact

    def image_code(self, code, k):
        return self.image_approximator(code, k)

    def image_poly(self, poly, k):
        return decode_poly(self.image_approximator(encode_poly(poly), k))


class ComputableSequence:
    """n -> computable point, all served by one procedure (n, k) -> code."""

    def __init__(self, presentation, procedure):
        self.presentation = presentation
        self.procedure = procedure

    def point(self, n):
        return ComputablePoint(self.presentation, lambda k: self.procedure(n, k))


# ---------------------------------------------------------------------------
# concrete factories


def matrix_presentation(n):
    """M_n with matrix units e11, e12, ..., enn as special points (frozen
    row-major order)."""

    def special(i):
        r, c = matrix_unit_from_index(n, i)
        return RationalMatrix.matrix_unit(n, r, c)

    return Presentation(
        descriptor=f"matrix:{n}",
        kind="matrix",
        special_eval=special,
        one=lambda: RationalMatrix.identity(n),
        norm_impl=lambda poly, k: matrix_norm(
            poly_apply(poly, special, RationalMatrix.identity(n)), k
        ),
        unit_expansion=[
            (GaussianRational(1), matrix_unit_index(n, i, i)) for i in range(n)
        ],
        num_generators=n * n,
        meta={"dim": n},
    )


def function_presentation(n):
    """C([0,1], M_n): scalar generators iota, iota^(1/2), (1-iota)^(1/2)
    at indices 0..2, then the constant matrix units (row-major) at 3..."""

    def special(i):
        if i == 0:
            return HalfPowerMatrixFunction.iota(n)
        if i == 1:
            return HalfPowerMatrixFunction.iota_sqrt(n)
        if i == 2:
            return HalfPowerMatrixFunction.one_minus_iota_sqrt(n)
        r, c = matrix_unit_from_index(n, i - 3)
        return HalfPowerMatrixFunction.constant(RationalMatrix.matrix_unit(n, r, c))

    return Presentation(
        descriptor=f"fn:{n}",
        kind="function",
        special_eval=special,
        one=lambda: HalfPowerMatrixFunction.unit(n),
        norm_impl=lambda poly, k: sup_norm(
            poly_apply(
                poly, special, HalfPowerMatrixFunction.unit(n)
            ),
            k,
        ),
        unit_expansion=[
            (GaussianRational(1), 3 + matrix_unit_index(n, i, i)) for i in range(n)
        ],
        num_generators=3 + n * n,
        meta={"dim": n},
    )


def dimdrop_presentation(p, q):
    """Z_{p,q} with generators a_1..a_p then b_1..b_q."""
    from .jiangsu import dd_generators, dd_norm

    gens = dd_generators(p, q)

    def special(i):
        if not 0 <= i < p + q:
            raise OpalgError(f"dimdrop:{p},{q}: generator {i} out of range")
        return gens[i]

    def one():
        g0 = gens[0]
        if isinstance(g0, HalfPowerMatrixFunction):
            return HalfPowerMatrixFunction.unit(p * q)
        from .jiangsu import KronHalfPower

        return KronHalfPower.unit(p, q)

    return Presentation(
        descriptor=f"dimdrop:{p},{q}",
        kind="dimdrop",
        special_eval=special,
        one=one,
        norm_impl=lambda poly, k: dd_norm(p, q, poly, k),
        num_generators=p + q,
        meta={"p": p, "q": q, "dim": p * q},
    )


# ---------------------------------------------------------------------------
# tensor products


def tensor_presentation(pa, pb):
    """Tensor product presentation: special point pair(m, p) is a_m (x) b_p."""
    kinds = (pa.kind, pb.kind)
    if kinds == ("matrix", "matrix"):
        return _tensor_matrix_matrix(pa, pb)
    if kinds == ("function", "matrix"):
        return _tensor_function_matrix(pa, pb)
    if kinds == ("uhf", "uhf"):
        from .uhf import uhf_tensor_presentation

        return uhf_tensor_presentation(pa, pb)
    raise OpalgError(
        f"no tensor backend for ({pa.descriptor}, {pb.descriptor}); "
        "provided pairs: matrix(x)matrix, function(x)matrix, uhf(x)uhf"
    )


def _tensor_matrix_matrix(pa, pb):
    na, nb = pa.meta["dim"], pb.meta["dim"]

    def special(i):
        m, p = unpair(i)
        return pa.special_point(m).kron(pb.special_point(p))

    def one():
        return RationalMatrix.identity(na * nb)

    return Presentation(
        descriptor=f"tensor({pa.descriptor},{pb.descriptor})",
        kind="tensor_matrix",
        special_eval=special,
        one=one,
        norm_impl=lambda poly, k: matrix_norm(poly_apply(poly, special, one()), k),
        unit_expansion=_tensor_unit_expansion(pa, pb),
        meta={"dim": na * nb, "factors": (pa, pb)},
    )


def _tensor_function_matrix(pa, pb):
    na, nb = pa.meta["dim"], pb.meta["dim"]
    dim = na * nb

    def special(i):
        m, p = unpair(i)
        f = pa.special_point(m)
        e = pb.special_point(p)
        return HalfPowerMatrixFunction(
            dim, {key: c.kron(e) for key, c in f.terms.items()}
        )

    def one():
        return HalfPowerMatrixFunction.unit(dim)

    return Presentation(
        descriptor=f"tensor({pa.descriptor},{pb.descriptor})",
        kind="tensor_function",
        special_eval=special,
        one=one,
        norm_impl=lambda poly, k: sup_norm(poly_apply(poly, special, one()), k),
        unit_expansion=_tensor_unit_expansion(pa, pb),
        meta={"dim": dim, "factors": (pa, pb)},
    )


def _tensor_unit_expansion(pa, pb):
    if pa.unit_expansion is None or pb.unit_expansion is None:
        return None
    out = []
    for ca, ia in pa.unit_expansion:
        for cb, ib in pb.unit_expansion:
            out.append((ca * cb, pair(ia, ib)))
    return out


def tensor_poly(poly_a, poly_b, pa, pb):
    """The rational point poly_a (x) poly_b over the tensor generators.

    Words of unequal length are padded with the exact unit expansions
    (self-adjoint single letters), and star-mismatched slots are split as
    x* (x) y = (x (x) 1)* (1 (x) y)."""
    ua, ub = pa.unit_expansion, pb.unit_expansion
    out = StarPoly.zero()
    for wa, ca in poly_a.terms.items():
        for wb, cb in poly_b.terms.items():
            out = out + _tensor_word(wa, wb, ua, ub).scale(ca * cb)
    return out


def _letter_poly_left(letter, ub):
    g, s = letter
    if ub is None:
        raise OpalgError("tensor padding needs a unit expansion on the right factor")
    acc = StarPoly.zero()
    for coeff, u in ub:
        acc = acc + StarPoly({((pair(g, u), s),): coeff})
    return acc


def _letter_poly_right(letter, ua):
    g, s = letter
    if ua is None:
        raise OpalgError("tensor padding needs a unit expansion on the left factor")
    acc = StarPoly.zero()
    for coeff, u in ua:
        acc = acc + StarPoly({((pair(u, g), s),): coeff})
    return acc


def _tensor_word(wa, wb, ua, ub):
    length = max(len(wa), len(wb))
    out = StarPoly.unit()
    for t in range(length):
        has_a = t < len(wa)
        has_b = t < len(wb)
        if has_a and has_b:
            (g1, s1), (g2, s2) = wa[t], wb[t]
            if s1 == s2:
                factor = StarPoly({((pair(g1, g2), s1),): GaussianRational(1)})
            else:
                factor = _letter_poly_left(wa[t], ub) * _letter_poly_right(wb[t], ua)
        elif has_a:
            factor = _letter_poly_left(wa[t], ub)
        else:
            factor = _letter_poly_right(wb[t], ua)
        out = out * factor
    return out


def embed_unit(pa, pb, code, k):
    """Code (in the tensor presentation) of a point within 2^-k of a (x) 1,
    a the decoded point of pa.  Exact (error 0) when pb registers an exact
    unit expansion; otherwise uses pb's computable unit at the budgeted
    precision k + ceil(log2 M) from pa's generator bounds."""
    poly_a = decode_poly(code)
    if pb.unit_expansion is not None:
        b_poly = pb.unit_poly()
    else:
        unit_pt = pb.meta.get("unit_point")
        if unit_pt is None:
            raise OpalgError(f"{pb.descriptor} has no computable unit registered")
        bound = pa.poly_bound(poly_a)
        extra = 0
        while (mpq(1, 1 << (k + extra))) * max(bound, 1) > mpq(1, 1 << k):
            extra += 1
        b_poly = decode_poly(unit_pt.code(k + extra))
    return encode_poly(tensor_poly(poly_a, b_poly, pa, pb))


# -- universal tensor presentation (generators x (x) 1 and 1 (x) y) --


def universal_tensor_presentation(pa, pb, tensor_pres):
    """Generators: even index 2m = a_m (x) 1, odd 2p+1 = 1 (x) b_p."""

    def special(i):
        m, r = divmod(i, 2)
        if r == 0:
            el = pa.special_point(m)
            other = pb.one()
            return _kron_element(el, other, left=True)
        el = pb.special_point(m)
        other = pa.one()
        return _kron_element(el, other, left=False)

    def _kron_element(el, other, left):
        if isinstance(el, RationalMatrix) and isinstance(other, RationalMatrix):
            return el.kron(other) if left else other.kron(el)
        if isinstance(el, HalfPowerMatrixFunction) and isinstance(
            other, RationalMatrix
        ):
            return HalfPowerMatrixFunction(
                el.n * other.n, {key: c.kron(other) for key, c in el.terms.items()}
            )
        if isinstance(other, HalfPowerMatrixFunction) and isinstance(
            el, RationalMatrix
        ):
            return HalfPowerMatrixFunction(
                el.n * other.n, {key: c.kron(el) for key, c in other.terms.items()}
            )
        raise OpalgError("universal tensor: unsupported element pair")

    return Presentation(
        descriptor=f"universal({tensor_pres.descriptor})",
        kind="tensor_universal",
        special_eval=special,
        one=tensor_pres.one,
        norm_impl=lambda poly, k: tensor_pres.norm_of_poly(
            translate_universal_to_tensor(poly, pa, pb), k
        ),
        meta={"tensor": tensor_pres},
    )


def translate_tensor_to_universal(poly):
    """a_m (x) b_p  |->  (a_m (x) 1)(1 (x) b_p) at the word level."""

    def letter_image(i):
        m, p = unpair(i)
        return StarPoly(
            {((2 * m, False), (2 * p + 1, False)): GaussianRational(1)}
        )

    return poly.map_generators(letter_image)


def translate_universal_to_tensor(poly, pa, pb):
    """x_m |-> sum_u c_u a_m (x) b_u ;  y_p |-> sum_v d_v a_v (x) b_p."""

    def letter_image(i):
        m, r = divmod(i, 2)
        if r == 0:
            return _letter_poly_left((m, False), pb.unit_expansion)
        return _letter_poly_right((m, False), pa.unit_expansion)

    return poly.map_generators(letter_image)


def tensor_code_translate(direction, code, pa, pb):
    """Translate codes between the tensor presentation and the universal
    two-family presentation; decoded points are equal algebra elements."""
    poly = decode_poly(code)
    if direction == "to_universal":
        return encode_poly(translate_tensor_to_universal(poly))
    if direction == "to_tensor":
        return encode_poly(translate_universal_to_tensor(poly, pa, pb))
    raise OpalgError("direction must be 'to_universal' or 'to_tensor'")


# ---------------------------------------------------------------------------
# inductive limits


class InductiveLimitPresentation(Presentation):
    """Special point pair(m, i) = i-th generator of stage m.  The norm
    oracle realizes a mixed-stage point at the highest participating
    stage: exact poly-level pushes when the system provides them,
    certified element-level pushes otherwise.  Requires injective
    (isometric) connecting maps, so stage-local norms are limit norms."""

    def __init__(
        self,
        descriptor,
        stage_presentation,
        push_poly,
        push_element,
        injective,
        stage_budget,
        mixed_norm=None,
    ):
        if not injective:
            raise OpalgError(
                "inductive limit oracle requires injective (isometric) maps"
            )
        self.stage_presentation = stage_presentation
        self.push_poly = push_poly          # (m, poly) -> poly at m+1, or None
        self.push_element = push_element    # (m, element) -> element at m+1
        self.stage_budget = stage_budget
        self.mixed_norm = mixed_norm        # optional (poly_by_stage, k) hook
        super().__init__(
            descriptor=descriptor,
            kind="limit",
            special_eval=self._special,
            one=lambda: None,
            norm_impl=self._norm,
            meta={},
        )

    def _special(self, i):
        m, j = unpair(i)
        return (m, j)

    def stage_of_poly(self, poly):
        stages = set()
        for word in poly.terms:
            for g, _ in word:
                m, _j = unpair(g)
                stages.add(m)
        return stages

    def poly_at_stage(self, poly, m):
        """Rewrite a limit poly whose letters all live in stages <= m as a
        stage-m poly, using exact poly-level pushes."""
        if self.push_poly is None:
            raise InfeasibleError(
                f"{self.descriptor}: no exact poly-level push available"
            )

        def letter_image(i):
            mm, j = unpair(i)
            if mm > m:
                raise OpalgError("letter above the target stage")
            img = StarPoly.gen(j)
            for step in range(mm, m):
                img = self.push_poly(step, img)
            return img

        return poly.map_generators(letter_image)

    def _norm(self, poly, k):
        if not poly.terms:
            return DyadicInterval(Dyadic(0), Dyadic(0))
        stages = self.stage_of_poly(poly)
        top = max(stages, default=0)
        if top > self.stage_budget:
            raise InfeasibleError(
                f"{self.descriptor}: stage {top} numerics beyond budget "
                f"{self.stage_budget}"
            )
        if self.push_poly is not None:
            stage_poly = self.poly_at_stage(poly, top)
            return self.stage_presentation(top).norm_of_poly(stage_poly, k)
        if len(stages) <= 1:
            # single-stage point: relabel letters and use the stage oracle
            def letter_image(i):
                _m, j = unpair(i)
                return StarPoly.gen(j)

            stage_poly = poly.map_generators(letter_image)
            return self.stage_presentation(top).norm_of_poly(stage_poly, k)
        if self.mixed_norm is not None:
            return self.mixed_norm(poly, k)
        raise InfeasibleError(
            f"{self.descriptor}: mixed-stage norm not reachable within budget"
        )


def matrix_doubling_limit(n0, stage_budget=8):
    """The chain M_n -> M_2n -> ... with x |-> diag(x, x): exact pushes."""

    def stage_pres(m):
        return matrix_presentation(n0 * (1 << m))

    def push_poly(m, poly):
        n = n0 * (1 << m)

        def letter_image(i):
            r, c = matrix_unit_from_index(n, i)
            return StarPoly.gen(matrix_unit_index(2 * n, r, c)) + StarPoly.gen(
                matrix_unit_index(2 * n, n + r, n + c)
            )

        return poly.map_generators(letter_image)

    def push_element(m, el):
        n = n0 * (1 << m)
        out = RationalMatrix.zero(2 * n)
        for i in range(n):
            for j in range(n):
                out.rows[i][j] = el.rows[i][j]
                out.rows[n + i][n + j] = el.rows[i][j]
        return out

    return InductiveLimitPresentation(
        descriptor=f"limit(diagdouble:{n0})",
        stage_presentation=stage_pres,
        push_poly=push_poly,
        push_element=push_element,
        injective=True,
        stage_budget=stage_budget,
    )


def inductive_limit_presentation(
    stage_presentation, push_poly, push_element, injective, descriptor, stage_budget
):
    return InductiveLimitPresentation(
        descriptor=descriptor,
        stage_presentation=stage_presentation,
        push_poly=push_poly,
        push_element=push_element,
        injective=injective,
        stage_budget=stage_budget,
    )


# ---------------------------------------------------------------------------
# b(m, n, k): first stage-(m+1) rational point close to the pushed image


DEFAULT_ENUM_BUDGET = 10 ** 6


def b_search(
    limit_pres,
    m,
    a_poly,
    k,
    mode="enumerate",
    candidate=None,
    enum_budget=DEFAULT_ENUM_BUDGET,
    distance_fn=None,
):
    """Search or verify b with || Phi_m(a) - b || < 2^-k.

    mode='enumerate': scan codes 0, 1, 2, ... of stage-(m+1) rational
    points in order and return the first whose certified distance is
    strictly below 2^-k (paper-faithful; exponentially slow, budgeted).
    mode='verify': certify the supplied candidate code and return it, or
    raise CertificationError with the certified enclosure.

    distance_fn(a_poly, b_poly, k) may be supplied by systems whose
    mixed-stage norms need structure (Jiang-Su); the default pushes a to
    stage m+1 exactly and uses the stage oracle on the difference.
    """

    def default_distance(a_p, b_p, kk):
        pushed = limit_pres.push_poly(m, a_p)
        return limit_pres.stage_presentation(m + 1).norm_of_poly(pushed - b_p, kk)

    dist = distance_fn or default_distance
    threshold = mpq(1, 1 << k)

    def certify(b_poly):
        enc = dist(a_poly, b_poly, k + 2)
        return enc, enc.hi.as_mpq() < threshold

    if mode == "verify":
        if candidate is None:
            raise OpalgError("verify mode needs a candidate code")
        b_poly = decode_poly(candidate)
        enc, ok = certify(b_poly)
        if not ok:
            raise CertificationError(
                f"b_search verify: candidate rejected at k={k}; certified "
                f"distance in [{enc.lo}, {enc.hi}]"
            )
        return candidate, enc
    if mode != "enumerate":
        raise OpalgError("mode must be 'enumerate' or 'verify(candidate)'")
    for code in range(enum_budget):
        b_poly = decode_poly(code)
        try:
            enc, ok = certify(b_poly)
        except InfeasibleError:
            continue
        if ok:
            return code, enc
    raise BudgetExhaustedError(
        f"b_search: no rational point within 2^-{k} among the first "
        f"{enum_budget} codes"
    )
