"""The staged approximate-intertwining engine.

Stage n searches for an eps_n-almost-unitary rational point v~_n of B
with ||v~_n|| <= 1 and pullback rational points a_{j,n} of A such that
three certified inequality families hold with margin eta_n:

  (1) || v~_n* ( w_{k(n)}(v~_{n-1})* ... w_{k(n)}(v~_1)* b_j
        w_{k(n)}(v~_1) ... w_{k(n)}(v~_{n-1}) ) v~_n - phi(a_{j,n}) ||
  (2) || v~_n phi(a_{k,j}) - phi(a_{k,j}) v~_n ||   for k <= j <= n
  (3) || v~_n phi(a_j) - phi(a_j) v~_n ||           for j <= n

Frozen schedule (certified per stage, never assumed):
  eta_n = 2^-(n+2),  eps_n = 2^-(n+3)/max(1, B_n),
  k(n) = n + 3 + ceil(log2 max(1, B_n)) + ceil(log2(n+1)),
with B_n the largest certified bound among the enumerated points and
found pullbacks.  Candidates come supplier-first (exact leg permutations
for the UHF demo, margins exactly zero), then from code enumeration.

psi_m(a) = w_p(v~_1) ... w_p(v~_{m+1}) phi(a) w_p(v~_{m+1})* ... w_p(v~_1)*
with 2^(p-m) > (m+1) ||a||; for exactly unitary v~'s, w_p(v~) = v~.
"""

import time

from gmpy2 import mpq

from .calculus import AlmostUnitary, ceil_log2_mpq, omega_n
from .dyadic import Dyadic, DyadicInterval
from .errors import BudgetExhaustedError, CertificationError, OpalgError
from .matrices import RationalMatrix, matrix_unit_index
from .normcert import matrix_norm
from .presentations import matrix_presentation, tensor_presentation
from .uhf import (
    HalfFlipSupplier,
    IdentityOnlySupplier,
    SparseRational,
    uhf_presentation,
)
from .words import StarPoly, decode_poly, encode_poly, pair, unpair


def _norm_enc(el, k):
    if isinstance(el, SparseRational):
        return el.norm_enclosure(k)
    return matrix_norm(el, k)


class ScheduleEntry:
    __slots__ = ("n", "eps", "eta", "k")

    def __init__(self, n, eps, eta, k):
        self.n = n
        self.eps = eps
        self.eta = eta
        self.k = k


def make_schedule(n, bound):
    """Frozen schedule entry at stage n for the certified point bound B_n;
    the proof's stage inequalities are certified exactly, not assumed."""
    b = max(mpq(1), mpq(bound))
    eta = mpq(1, 1 << (n + 2))
    eps = mpq(1, 1 << (n + 3)) / b
    k = n + 3 + ceil_log2_mpq(b) + ceil_log2_mpq(n + 1)
    entry = ScheduleEntry(n, eps, eta, k)
    # (2 eps_n + 2^{-k(n)+1}) B_n + eta_n <= 2^-n  and  2 eps_n B_n + eta_n <= 2^-n
    lhs1 = (2 * eps + mpq(1, 1 << (k - 1))) * b + eta
    lhs2 = 2 * eps * b + eta
    if not (lhs1 <= mpq(1, 1 << n) and lhs2 <= mpq(1, 1 << n)):
        raise CertificationError(
            f"schedule invariant failed at stage {n}: {lhs1} / {lhs2} vs 2^-{n}"
        )
    return entry


class Candidate:
    """A stage candidate: rational point of B, optionally an exact unitary
    (permutations), carried both as an element and as a code."""

    def __init__(self, element, poly, exact_unitary=False, label=""):
        self.element = element
        self.poly = poly
        self.exact_unitary = exact_unitary
        self.label = label


class IntertwiningState:
    """Search state after some completed stages."""

    def __init__(self, system):
        self.system = system
        self.entries = []            # ScheduleEntry per stage
        self.v_elements = []         # candidate elements (stage order)
        self.v_polys = []
        self.v_exact_unitary = []
        self.pullbacks = {}          # (k, j) -> StarPoly over A's generators
        self.pullback_elements = {}  # (k, j) -> phi(a_{k,j}) realized in B
        self.margins = []            # per stage: list of (tag, DyadicInterval)
        self.wall_times = []

    @property
    def stage(self):
        return len(self.v_elements)

    def record(self, entry, cand, stage_pullbacks, margins, wall):
        self.entries.append(entry)
        self.v_elements.append(cand.element)
        self.v_polys.append(cand.poly)
        self.v_exact_unitary.append(cand.exact_unitary)
        for (kk, jj), (poly, el) in stage_pullbacks.items():
            self.pullbacks[(kk, jj)] = poly
            self.pullback_elements[(kk, jj)] = el
        self.margins.append(margins)
        self.wall_times.append(wall)


class IntertwiningSystem:
    """Concrete data the engine runs on.

    Subclasses provide: enumerated points a_j (of A) and b_j (of B) as
    StarPolys, phi at poly and element level, realization of B-polys as
    elements, the pullback extraction (element of B near phi(A) -> poly
    of A), and the supplier candidates."""

    def a_point(self, j):
        raise NotImplementedError

    def b_point(self, j):
        raise NotImplementedError

    def enumeration_index(self, a_poly, cap=64):
        """Smallest j with a_point(j) == a_poly, or None."""
        for j in range(1, cap + 1):
            if self.a_point(j) == a_poly:
                return j
        return None

    def a_bound(self, poly):
        raise NotImplementedError

    def b_bound(self, poly):
        raise NotImplementedError

    def phi_poly(self, a_poly):
        raise NotImplementedError

    def realize_b(self, b_poly):
        raise NotImplementedError

    def supplier_candidates(self, state, entry):
        return ()

    def enum_candidates(self, budget):
        for code in range(budget):
            poly = decode_poly(code)
            yield Candidate(self.realize_b(poly), poly, label=f"code:{code}")

    def pullback(self, element, k):
        """Best phi-preimage poly for an element of B; returns (a_poly,
        phi(a_poly) element)."""
        raise NotImplementedError


class UhfSelfAbsorption(IntertwiningSystem):
    """A = M_{2^inf}, B = A (x) A, phi = id (x) 1, half-flip supplier.

    The demo enumerations walk the stage-1 generators of A and the
    elementary tensors of stage-1 generators of B (a documented, dense-in
    -the-limit enumeration; the paper-faithful raw code enumeration is
    available but starts with long runs of zero polynomials)."""

    def __init__(self, a_stage=1, supplier=None, stage_budget=12):
        self.pres_a = uhf_presentation(stage_budget=stage_budget)
        self.pres_b = tensor_presentation(self.pres_a, self.pres_a)
        self.supplier = supplier if supplier is not None else HalfFlipSupplier()
        self.a_stage = a_stage
        d = 1 << a_stage
        self._a_gens = [
            StarPoly.gen(pair(a_stage, i)) for i in range(d * d)
        ]
        self._b_gens = []
        for i in range(d * d):
            for j in range(d * d):
                self._b_gens.append(
                    StarPoly.gen(pair(pair(a_stage, i), pair(a_stage, j)))
                )
        # common realization stage: legs double each engine stage
        self._eval_b = self.pres_b.meta["eval_poly"]
        self.common = None

    def set_common_stage(self, stages):
        n_final = self.a_stage * (1 << max(0, stages - 1))
        self.common = (2 * n_final, n_final)

    def a_point(self, j):
        return self._a_gens[(j - 1) % len(self._a_gens)]

    def b_point(self, j):
        return self._b_gens[(j - 1) % len(self._b_gens)]

    def a_bound(self, poly):
        return self.pres_a.poly_bound(poly)

    def b_bound(self, poly):
        return self.pres_b.poly_bound(poly)

    def phi_poly(self, a_poly):
        unit_b = pair(0, 0)
        return a_poly.map_generators(
            lambda g: StarPoly.gen(pair(g, unit_b))
        )

    def realize_b(self, b_poly):
        el, _ = self._eval_b(b_poly, top=self.common)
        return el

    def supplier_candidates(self, state, entry):
        n_legs = self.a_stage
        for done in state.v_exact_unitary:
            n_legs *= 2
        if 2 * n_legs > self.common[0] or n_legs > self.common[1]:
            return
        perm = self._flip_permutation_at_common(n_legs)
        element = SparseRational(
            1 << (self.common[0] + self.common[1]),
            {(p, i): 1 for i, p in enumerate(perm)},
        )
        poly = self._permutation_poly(perm)
        yield Candidate(element, poly, exact_unitary=True, label=f"halfflip:{n_legs}")

    def _flip_permutation_at_common(self, n_legs):
        sa, sb = self.common
        if isinstance(self.supplier, IdentityOnlySupplier):
            return list(range(1 << (sa + sb)))
        size = 1 << (sa + sb)
        perm = [0] * size
        # label bits: L_1..L_sa then R_1..R_sb, most significant first.
        # swap the bit blocks L_{n+1..2n} and R_{1..n}.
        n = n_legs
        for b in range(size):
            bits = b
            r_part = bits & ((1 << sb) - 1)
            l_part = bits >> sb
            # extract blocks
            l_low = l_part & ((1 << (sa - 2 * n)) - 1) if sa > 2 * n else 0
            l_mid = (l_part >> (sa - 2 * n)) & ((1 << n) - 1)
            l_top = l_part >> (sa - n)
            r_low = r_part & ((1 << (sb - n)) - 1) if sb > n else 0
            r_top = r_part >> (sb - n)
            new_l = (l_top << (sa - n)) | (r_top << (sa - 2 * n)) | l_low
            new_r = (l_mid << (sb - n)) | r_low
            perm[b] = (new_l << sb) | new_r
        return perm

    def _permutation_poly(self, perm):
        """The permutation as a rational point of B at the common stage."""
        from .exact import GR_ONE

        sa, sb = self.common
        da, db = 1 << sa, 1 << sb
        terms = {}
        for col, row in enumerate(perm):
            ra, rb = divmod(row, db)
            ca, cb = divmod(col, db)
            g = pair(
                pair(sa, matrix_unit_index(da, ra, ca)),
                pair(sb, matrix_unit_index(db, rb, cb)),
            )
            terms[((g, False),)] = GR_ONE
        return StarPoly(terms)

    def pullback(self, element, k):
        """Extract x with element ~ x (x) 1 (exact when the supplier did its
        job); returns (poly of A at the common A-stage, phi(x) element)."""
        sa, sb = self.common
        da, db = 1 << sa, 1 << sb
        # partial trace over the R legs

        x = SparseRational(da)
        for (i, j), v in element.data.items():
            ia, ib = divmod(i, db)
            ja, jb = divmod(j, db)
            if ib == jb:
                key = (ia, ja)
                prev = x.data.get(key)
                s = v if prev is None else prev + v
                if s:
                    x.data[key] = s
                elif prev is not None:
                    del x.data[key]
        x = x.scale(mpq(1, db))
        poly = StarPoly(
            {
                ((pair(sa, matrix_unit_index(da, i, j)), False),): v
                for (i, j), v in x.data.items()
            }
        )
        phi_el = x.embed_topleft_kron(db)
        return poly, phi_el


class MatrixPairSystem(IntertwiningSystem):
    """Generic small system A = M_na, B = M_nb with unital phi given at the
    poly level; used by the sabotage tests (dense exact matrices)."""

    def __init__(self, na, nb, phi_poly_fn, supplier=None):
        self.pres_a = matrix_presentation(na)
        self.pres_b = matrix_presentation(nb)
        self._phi_poly_fn = phi_poly_fn
        self.supplier = supplier
        self.na, self.nb = na, nb

    def set_common_stage(self, stages):
        pass

    def a_point(self, j):
        return StarPoly.gen((j - 1) % (self.na * self.na))

    def b_point(self, j):
        return StarPoly.gen((j - 1) % (self.nb * self.nb))

    def a_bound(self, poly):
        return self.pres_a.poly_bound(poly)

    def b_bound(self, poly):
        return self.pres_b.poly_bound(poly)

    def phi_poly(self, a_poly):
        return self._phi_poly_fn(a_poly)

    def realize_b(self, b_poly):
        return self.pres_b.eval_poly(b_poly)

    def supplier_candidates(self, state, entry):
        if self.supplier is None:
            return
        ident = RationalMatrix.identity(self.nb)
        yield Candidate(
            ident,
            self.pres_b.unit_poly(),
            exact_unitary=True,
            label="identity",
        )

    def pullback(self, element, k):
        """Best phi-preimage over the enumeration of A-codes (small dims):
        minimizes the certified distance; returns the first minimizer."""
        best = None
        for code in range(64):
            a_poly = decode_poly(code)
            cand = self.realize_b(self.phi_poly(a_poly))
            d = _norm_enc(element - cand, k)
            if best is None or d.hi < best[0].hi:
                best = (d, a_poly, cand)
        return best[1], best[2]


# ---------------------------------------------------------------------------
# the engine


class EngineResult:
    def __init__(self, system, state):
        self.system = system
        self.state = state

    # -- the isomorphism approximants --

    def omega_p_of_v(self, i, p):
        """w_p(v~_i): exact for permutation candidates, Taylor polar
        approximant otherwise."""
        if self.state.v_exact_unitary[i]:
            return self.state.v_elements[i]
        el = self.state.v_elements[i]
        au = AlmostUnitary(el, self.state.entries[i].eps)
        return omega_n(au, p)

    def psi_approx_element(self, a_poly, m):
        """Element within 2^-m of psi(a) (the proof's omega_p truncation)."""
        if self.state.stage < m + 1:
            raise OpalgError(
                f"psi approximant at m={m} needs {m + 1} completed stages, "
                f"have {self.state.stage}"
            )
        bound = max(mpq(1), self.system.a_bound(a_poly))
        p = m + 1
        while mpq(1 << p, 1 << m) <= (m + 1) * bound:
            p += 1
        el = self.system.realize_b(self.system.phi_poly(a_poly))
        for i in range(m, -1, -1):
            w = self.omega_p_of_v(i, p)
            el = w * el * w.adjoint()
        return el

    def psi_approx_code(self, a_code, m):
        """Code of a rational point of B within 2^-m of psi(a)."""
        a_poly = decode_poly(a_code)
        el = self.psi_approx_element(a_poly, m)
        return encode_poly(self._element_to_poly(el))

    def _element_to_poly(self, el):
        if isinstance(el, SparseRational):
            sa, sb = self.system.common
            da, db = 1 << sa, 1 << sb
            terms = {}
            for (i, j), v in el.data.items():
                ia, ib = divmod(i, db)
                ja, jb = divmod(j, db)
                g = pair(
                    pair(sa, matrix_unit_index(da, ia, ja)),
                    pair(sb, matrix_unit_index(db, ib, jb)),
                )
                terms[((g, False),)] = v
            return StarPoly(terms)
        n = el.n
        return StarPoly(
            {
                ((matrix_unit_index(n, i, j), False),): el.rows[i][j]
                for i in range(n)
                for j in range(n)
                if el.rows[i][j]
            }
        )

    def witness_element(self, a_poly, n):
        """w_n(a) = v_1 ... v_n phi(a) v_n* ... v_1* through the certified
        omega truncations at precision k(n)."""
        el = self.system.realize_b(self.system.phi_poly(a_poly))
        p = self.state.entries[n - 1].k
        for i in range(n - 1, -1, -1):
            w = self.omega_p_of_v(i, p)
            el = w * el * w.adjoint()
        return el

    def verify_cau(self, a_code, m):
        """Stage index n with ||v_1..v_n phi(a) (v..)* - psi(a)|| < 2^-m.

        Certificate: the telescoping sum over certified stage differences
        ||w_i(a) - w_{i+1}(a)|| for the completed stages, plus the
        schedule-guaranteed 2^-i per uncompleted stage i > S (valid for
        enumerated points once every future stage's family 3 covers a,
        i.e. S >= j0 - 1 with j0 the enumeration index of a)."""
        a_poly = decode_poly(a_code)
        s = self.state.stage
        if s < 1:
            raise OpalgError("verify_cau needs at least one completed stage")
        j0 = self.system.enumeration_index(a_poly)
        if j0 is None:
            raise OpalgError(
                "verify_cau: point is not among the enumerated a_j; no tail bound"
            )
        if s < j0 - 1:
            raise OpalgError(
                f"verify_cau: need at least {j0 - 1} stages for the tail bound "
                f"on a_{j0}; have {s}"
            )
        witnesses = [self.witness_element(a_poly, n) for n in range(1, s + 1)]
        diffs = [
            _norm_enc(witnesses[i] - witnesses[i + 1], m + 6).hi.as_mpq()
            for i in range(s - 1)
        ]
        tail = mpq(1, 1 << s)
        target = mpq(1, 1 << m)
        for n in range(1, s + 1):
            total = sum(diffs[n - 1:], mpq(0)) + tail
            if total < target:
                return n
        raise OpalgError(
            f"verify_cau: no stage among 1..{s} certifies 2^-{m}; run more stages"
        )

    def transcript(self, include_timings=True):
        out = []
        for i, entry in enumerate(self.state.entries):
            rec = {
                "n": entry.n,
                "eps": mpq_str_local(entry.eps),
                "eta": mpq_str_local(entry.eta),
                "k": entry.k,
                "v_code": str(encode_poly(self.state.v_polys[i])),
                "a_codes": [
                    str(encode_poly(self.state.pullbacks[(kk, jj)]))
                    for (kk, jj) in sorted(self.state.pullbacks)
                    if jj == entry.n
                ],
                "margins": [
                    {"tag": tag, "lo": str(iv.lo), "hi": str(iv.hi)}
                    for tag, iv in self.state.margins[i]
                ],
            }
            if include_timings:
                rec["wall_time"] = round(self.state.wall_times[i], 6)
            out.append(rec)
        return out


def mpq_str_local(q):
    q = mpq(q)
    return f"{q.numerator}/{q.denominator}" if q.denominator != 1 else str(q.numerator)


def stage_step(system, state, enum_budget=256, norm_k=40):
    """Run one stage: find v~_n and the pullbacks, certify the three
    families below eta_n, append to the state.  Raises
    BudgetExhaustedError (carrying the best margins) when no candidate
    within the budget certifies."""
    t0 = time.monotonic()
    n = state.stage + 1

    # certified bound B_n over enumerated points and found pullbacks
    bound = mpq(1)
    for j in range(1, n + 1):
        bound = max(bound, system.a_bound(system.a_point(j)))
        bound = max(bound, system.b_bound(system.b_point(j)))
    for poly in state.pullbacks.values():
        bound = max(bound, system.a_bound(poly))
    entry = make_schedule(n, bound)

    # the conjugation chain applied to each b_j (omega_{k(n)} truncations)
    result_view = EngineResult(system, state)
    chain = []
    for i in range(n - 1):
        chain.append(result_view.omega_p_of_v(i, entry.k))
    conj_b = []
    for j in range(1, n + 1):
        el = system.realize_b(system.b_point(j))
        for w in chain:
            el = w.adjoint() * el * w
        conj_b.append(el)

    phi_a = [
        system.realize_b(system.phi_poly(system.a_point(j)))
        for j in range(1, n + 1)
    ]
    prior_phi = dict(state.pullback_elements)

    best_fail = None

    def try_candidate(cand):
        """Returns (ok, stage_pullbacks, margins) or None if the candidate
        fails the norm-cap / almost-unitarity precondition."""
        if not cand.exact_unitary:
            try:
                AlmostUnitary(cand.element, entry.eps)
            except OpalgError:
                return None
        margins = []
        stage_pullbacks = {}
        worst = Dyadic(0)
        for j in range(1, n + 1):
            c = cand.element.adjoint() * conj_b[j - 1] * cand.element
            a_poly, phi_el = system.pullback(c, norm_k)
            d = _norm_enc(c - phi_el, norm_k)
            margins.append((f"family1[j={j}]", d))
            stage_pullbacks[(j, n)] = (a_poly, phi_el)
            worst = max(worst, d.hi)
        # family 2 ranges over the pullbacks of completed stages (k <= j,
        # j <= n-1), matching the explicit stage-2 list; the stage-n
        # pullbacks are already pinned by family 1.
        for (kk, jj), phi_el in prior_phi.items():
            d = _norm_enc(cand.element * phi_el - phi_el * cand.element, norm_k)
            margins.append((f"family2[k={kk},j={jj}]", d))
            worst = max(worst, d.hi)
        for j in range(1, n + 1):
            d = _norm_enc(
                cand.element * phi_a[j - 1] - phi_a[j - 1] * cand.element, norm_k
            )
            margins.append((f"family3[j={j}]", d))
            worst = max(worst, d.hi)
        return worst.as_mpq() < entry.eta, stage_pullbacks, margins

    for source in (
        system.supplier_candidates(state, entry),
        system.enum_candidates(enum_budget),
    ):
        for cand in source:
            got = try_candidate(cand)
            if got is None:
                continue
            ok, stage_pullbacks, margins = got
            if ok:
                state.record(
                    entry, cand, stage_pullbacks, margins, time.monotonic() - t0
                )
                return state
            best_fail = margins

    raise BudgetExhaustedError(
        f"stage {n}: no candidate within budget certified below eta={entry.eta}",
        best_margins=None if best_fail is None else [
            (tag, str(iv.lo), str(iv.hi)) for tag, iv in best_fail
        ],
    )


def run_engine(system, stages, enum_budget=256):
    system.set_common_stage(stages)
    state = IntertwiningState(system)
    for _ in range(stages):
        stage_step(system, state, enum_budget=enum_budget)
    return EngineResult(system, state)
