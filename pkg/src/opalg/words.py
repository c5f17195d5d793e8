"""Noncommutative *-polynomials over Gaussian rationals, and their codes.

A Word is a finite product of letters; each letter is a generator index
with an optional adjoint star.  The empty word is the unit.  A StarPoly
is a finite Gaussian-rational combination of words, stored with no zero
coefficients and compared under length-lexicographic word order, which
makes the encoding bit-exact and machine-independent.

Godel numbering (frozen, certificate format "opalg-cert/1"):

  pair(m, p)    = (m+p)(m+p+1)/2 + p                (Cantor)
  zz(n)         = 2n for n >= 0, -2n-1 otherwise    (zigzag)
  rational q    = pair(zz(numerator), denominator - 1)
  coefficient z = pair(code(re z), code(im z))
  letter        = 2*generator + (1 if starred else 0)
  list          = the Elias-gamma codes of (item+1), concatenated
                  MSB-first, read as the binary number '1' + bits, minus 1
                  (so [] = 0 and code size is linear in the item sizes)
  word          = list of letters
  term          = pair(word, coefficient)
  polynomial    = list of terms, words strictly increasing length-lex

decode_poly is total: any natural parses, and any natural that violates
canonical form (a malformed gamma stream, an unreduced fraction, a zero
coefficient, out-of-order or duplicate words) decodes to the zero
polynomial.
"""

from math import isqrt

from gmpy2 import mpq

from .exact import GR_ONE, GaussianRational, gauss, mpq_str


# ---------------------------------------------------------------------------
# pairing


def pair(m, p):
    """Cantor pairing, bijective N^2 -> N."""
    if m < 0 or p < 0:
        raise ValueError("pair expects naturals")
    s = m + p
    return s * (s + 1) // 2 + p


def unpair(n):
    """Exact inverse of pair."""
    if n < 0:
        raise ValueError("unpair expects a natural")
    w = (isqrt(8 * n + 1) - 1) // 2
    t = w * (w + 1) // 2
    p = n - t
    return w - p, p


def _zz(n):
    return 2 * n if n >= 0 else -2 * n - 1


def _unzz(n):
    return n // 2 if n % 2 == 0 else -(n + 1) // 2


def _enc_list(items):
    """Concatenated Elias-gamma codes of item+1, under a leading 1 bit."""
    bits = ["1"]
    for x in items:
        y = x + 1
        payload = bin(y)[2:]
        bits.append("0" * (len(payload) - 1))
        bits.append(payload)
    return int("".join(bits), 2) - 1


class _MalformedList(Exception):
    pass


def _dec_list(code):
    """Inverse of _enc_list; raises _MalformedList on non-canonical bits."""
    s = bin(code + 1)[2:]
    if s[0] != "1":  # cannot happen for naturals, kept for clarity
        raise _MalformedList
    pos = 1
    items = []
    n = len(s)
    while pos < n:
        zeros = 0
        while pos < n and s[pos] == "0":
            zeros += 1
            pos += 1
        if pos + zeros + 1 > n:
            raise _MalformedList
        payload = s[pos:pos + zeros + 1]
        pos += zeros + 1
        items.append(int(payload, 2) - 1)
    return items


# ---------------------------------------------------------------------------
# words


def letter_key(letter):
    g, star = letter
    return 2 * g + (1 if star else 0)


def word_key(word):
    """Length-lexicographic sort key."""
    return (len(word), tuple(letter_key(l) for l in word))


def word_adjoint(word):
    return tuple((g, not star) for (g, star) in reversed(word))


def word_str(word):
    if not word:
        return "1"
    return " ".join(f"g{g}*" if star else f"g{g}" for g, star in word)


# ---------------------------------------------------------------------------
# StarPoly


class StarPoly:
    """Finite map word -> GaussianRational; the universal rational point."""

    __slots__ = ("terms",)

    def __init__(self, terms=None):
        clean = {}
        if terms:
            for word, coeff in terms.items():
                coeff = gauss(coeff)
                if coeff:
                    clean[tuple(word)] = coeff
        self.terms = clean

    # -- constructors --

    @staticmethod
    def zero():
        return StarPoly()

    @staticmethod
    def unit(coeff=GR_ONE):
        return StarPoly({(): coeff})

    @staticmethod
    def gen(index, coeff=GR_ONE, star=False):
        return StarPoly({((index, bool(star)),): coeff})

    # -- algebra --

    def __bool__(self):
        return bool(self.terms)

    def __eq__(self, other):
        return isinstance(other, StarPoly) and self.terms == other.terms

    def __hash__(self):
        return hash(tuple(sorted(self.terms.items(), key=lambda kv: word_key(kv[0]))))

    def __add__(self, other):
        out = dict(self.terms)
        for w, c in other.terms.items():
            out[w] = out.get(w, 0) + c
        return StarPoly(out)

    def __neg__(self):
        return StarPoly({w: -c for w, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other):
        if isinstance(other, StarPoly):
            out = {}
            for w1, c1 in self.terms.items():
                for w2, c2 in other.terms.items():
                    w = w1 + w2
                    prev = out.get(w)
                    out[w] = c1 * c2 if prev is None else prev + c1 * c2
            return StarPoly(out)
        return self.scale(other)

    def __rmul__(self, other):
        # scalars commute with everything here
        return self.scale(other)

    def scale(self, scalar):
        scalar = gauss(scalar)
        return StarPoly({w: scalar * c for w, c in self.terms.items()})

    def adjoint(self):
        return StarPoly(
            {word_adjoint(w): c.conj() for w, c in self.terms.items()}
        )

    # -- queries --

    def generator_indices(self):
        return sorted({g for w in self.terms for (g, _) in w})

    def sorted_terms(self):
        return sorted(self.terms.items(), key=lambda kv: word_key(kv[0]))

    def max_word_length(self):
        return max((len(w) for w in self.terms), default=0)

    def coeff_l1(self):
        """Sum of |coefficient| upper bounds as exact mpq (using |z| <= |re|+|im|)."""
        return sum((abs(c.re) + abs(c.im) for c in self.terms.values()), mpq(0))

    def __repr__(self):
        if not self.terms:
            return "StarPoly(0)"
        bits = [f"({c.re}+{c.im}i)[{word_str(w)}]" for w, c in self.sorted_terms()]
        return "StarPoly(" + " + ".join(bits) + ")"

    def map_generators(self, fn):
        """Substitute each generator g by the StarPoly fn(g); homomorphic on words."""
        out = StarPoly.zero()
        for w, c in self.terms.items():
            prod = StarPoly.unit(c)
            for g, star in w:
                img = fn(g)
                prod = prod * (img.adjoint() if star else img)
            out = out + prod
        return out


# ---------------------------------------------------------------------------
# encode / decode


def _enc_mpq(q):
    q = mpq(q)
    return pair(_zz(int(q.numerator)), int(q.denominator) - 1)


def _dec_mpq(code):
    """Returns (mpq, canonical: bool)."""
    a, b = unpair(code)
    num = _unzz(a)
    den = b + 1
    q = mpq(num, den)
    return q, (int(q.numerator) == num and int(q.denominator) == den)


def encode_poly(p):
    """Bit-exact code of a StarPoly (inverse of decode_poly)."""
    term_codes = []
    for word, coeff in p.sorted_terms():
        wcode = _enc_list([letter_key(l) for l in word])
        ccode = pair(_enc_mpq(coeff.re), _enc_mpq(coeff.im))
        term_codes.append(pair(wcode, ccode))
    return _enc_list(term_codes)


def decode_poly(code):
    """Total decoder; non-canonical codes decode to the zero polynomial."""
    if code < 0:
        raise ValueError("codes are naturals")
    terms = {}
    prev_key = None
    try:
        term_codes = _dec_list(code)
        for tcode in term_codes:
            wcode, ccode = unpair(tcode)
            word = tuple((lk // 2, bool(lk % 2)) for lk in _dec_list(wcode))
            key = word_key(word)
            if prev_key is not None and key <= prev_key:
                return StarPoly.zero()
            prev_key = key
            rc, ic = unpair(ccode)
            re, ok_re = _dec_mpq(rc)
            im, ok_im = _dec_mpq(ic)
            if not (ok_re and ok_im):
                return StarPoly.zero()
            if re == 0 and im == 0:
                return StarPoly.zero()
            terms[word] = GaussianRational(re, im)
    except _MalformedList:
        return StarPoly.zero()
    return StarPoly(terms)


UNIT_POLY_CODE = None  # filled below


# ---------------------------------------------------------------------------
# evaluation


class MissingGeneratorError(KeyError):
    def __init__(self, index):
        super().__init__(f"assignment does not cover generator index {index}")
        self.index = index


def poly_apply(p, assignment, one):
    """Homomorphic evaluation of a StarPoly in a backend.

    assignment: dict or callable index -> backend element.  Backend
    elements must support +, *, .adjoint() and multiplication by
    GaussianRational.  The unit word maps to `one`.
    """
    get = assignment.__getitem__ if hasattr(assignment, "__getitem__") else assignment
    out = None
    for word, coeff in p.terms.items():
        factor = one
        for g, star in word:
            try:
                el = get(g)
            except (KeyError, IndexError):
                raise MissingGeneratorError(g) from None
            if el is None:
                raise MissingGeneratorError(g)
            factor = factor * (el.adjoint() if star else el)
        term = factor.scale(coeff) if hasattr(factor, "scale") else coeff * factor
        out = term if out is None else out + term
    if out is None:
        out = one.scale(0) if hasattr(one, "scale") else 0 * one
    return out


# ---------------------------------------------------------------------------
# textual AST: (unit) | (gen N) | (adj E) | (mul E E ...) | (add E E ...)
#              | (scal RE IM E)   with RE, IM exact fractions 'a/b'


def poly_to_ast(p):
    """Canonical s-expression for a StarPoly; parse_ast round-trips."""
    if not p.terms:
        return "(scal 0 0 (unit))"
    parts = []
    for word, coeff in p.sorted_terms():
        if word:
            factors = " ".join(
                f"(adj (gen {g}))" if star else f"(gen {g})" for g, star in word
            )
            body = f"(mul {factors})" if len(word) > 1 else factors
        else:
            body = "(unit)"
        parts.append(f"(scal {mpq_str(coeff.re)} {mpq_str(coeff.im)} {body})")
    if len(parts) == 1:
        return parts[0]
    return "(add " + " ".join(parts) + ")"


def _tokenize(text):
    return text.replace("(", " ( ").replace(")", " ) ").split()


def _parse_sexp(tokens, pos):
    if tokens[pos] != "(":
        return tokens[pos], pos + 1
    out = []
    pos += 1
    while tokens[pos] != ")":
        node, pos = _parse_sexp(tokens, pos)
        out.append(node)
    return out, pos + 1


class AstError(ValueError):
    pass


def _ast_to_poly(node):
    if not isinstance(node, list) or not node:
        raise AstError(f"expected a node, got {node!r}")
    kind = node[0]
    if kind == "unit":
        return StarPoly.unit()
    if kind == "gen":
        if len(node) != 2:
            raise AstError("(gen N) takes one index")
        return StarPoly.gen(int(node[1]))
    if kind == "adj":
        if len(node) != 2:
            raise AstError("(adj E) takes one argument")
        return _ast_to_poly(node[1]).adjoint()
    if kind == "mul":
        out = StarPoly.unit()
        for sub in node[1:]:
            out = out * _ast_to_poly(sub)
        return out
    if kind == "add":
        out = StarPoly.zero()
        for sub in node[1:]:
            out = out + _ast_to_poly(sub)
        return out
    if kind == "scal":
        if len(node) != 4:
            raise AstError("(scal RE IM E) takes three arguments")
        re, im = mpq(node[1]), mpq(node[2])
        return _ast_to_poly(node[3]).scale(GaussianRational(re, im))
    raise AstError(f"unknown node kind {kind!r}")


def parse_ast(text):
    """Parse the textual StarPoly AST (grammar in the module docstring)."""
    tokens = _tokenize(text)
    if not tokens:
        raise AstError("empty AST")
    node, pos = _parse_sexp(tokens, 0)
    if pos != len(tokens):
        raise AstError("trailing tokens after AST")
    return _ast_to_poly(node)


UNIT_POLY_CODE = encode_poly(StarPoly.unit())
