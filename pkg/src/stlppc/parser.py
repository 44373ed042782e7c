"""Recursive-descent parser for the task grammar.

    task  := phi { "&&" phi } | nest | "true"
    phi   := ("F"|"G") "[" NUM "," NUM "]" psi
    nest  := "F" "[" NUM "," NUM "]" "(" psi "&&" nest ")"   (inner F last)
    psi   := term { "&&" term } | "(" psi ")"
    term  := atom | "!" atom | "true"
    atom  := "dist(" ID "," (ID | point) ")" "<=" NUM
           | "lin(" coeffs ")" ">=" NUM
           | "comp(" ID "," IDX ")" "-" "comp(" ID "," IDX ")" "in" "(" NUM "," NUM ")"
           | "angdeg(" ID ")" "near" NUM "tol" NUM
    coeffs := [NUM "*"] comp-ref { ("+"|"-") [NUM "*"] comp-ref }
    point := "[" NUM { "," NUM } "]"

Whitespace is insignificant.  Component indices in the grammar are 1-based
(stored 0-based); angles are degrees in the grammar.  Eventually-nests are
flattened into a unit sequence with windows accumulated left to right.
"""
from __future__ import annotations

import re

from .errors import FormulaSyntaxError, NonConcaveNegationError, TimeBoundOrderError
from .formulas import (
    AngleBandAtom,
    BallPairAtom,
    BallToPointAtom,
    BandDiffAtom,
    LinearAtom,
    PhiFormula,
    PsiAnd,
    PsiAtom,
    PsiFormula,
    PsiNegAtom,
    PsiTrue,
    TaskFormula,
)

_TOKEN = re.compile(
    r"\s*(?:(?P<num>-?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_]\w*)"
    r"|(?P<op><=|>=|&&|[()\[\],*+!-]))"
)


def _tokenize(text: str) -> list[tuple[str, str]]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            if text[pos:].strip():
                raise FormulaSyntaxError(f"unexpected character at: {text[pos:pos+16]!r}")
            break
        pos = m.end()
        for kind in ("num", "name", "op"):
            v = m.group(kind)
            if v is not None:
                tokens.append((kind, v))
                break
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self, k: int = 0):
        j = self.i + k
        return self.tokens[j] if j < len(self.tokens) else (None, None)

    def next(self):
        tok = self.peek()
        if tok[0] is None:
            raise FormulaSyntaxError("unexpected end of formula")
        self.i += 1
        return tok

    def expect(self, value: str):
        kind, v = self.next()
        if v != value:
            raise FormulaSyntaxError(f"expected {value!r}, got {v!r}")

    def at(self, value: str) -> bool:
        return self.peek()[1] == value

    def number(self) -> float:
        kind, v = self.next()
        if kind != "num":
            # allow a leading '-' split off by the tokenizer as an op
            if v == "-":
                kind2, v2 = self.next()
                if kind2 == "num":
                    return -float(v2)
            raise FormulaSyntaxError(f"expected number, got {v!r}")
        return float(v)

    def ident(self) -> int:
        kind, v = self.next()
        if kind != "num" or "." in v or "e" in v or "E" in v or v.startswith("-"):
            raise FormulaSyntaxError(f"expected agent id, got {v!r}")
        return int(v)

    # -- atoms --------------------------------------------------------------

    def comp_ref(self) -> tuple[int, int]:
        self.expect("comp")
        self.expect("(")
        agent = self.ident()
        self.expect(",")
        idx = self.ident()
        self.expect(")")
        if idx < 1:
            raise FormulaSyntaxError("component indices are 1-based")
        return agent, idx - 1

    def atom(self):
        kind, v = self.peek()
        if v == "dist":
            self.next()
            self.expect("(")
            agent = self.ident()
            self.expect(",")
            if self.at("["):
                self.next()
                pt = [self.number()]
                while self.at(","):
                    self.next()
                    pt.append(self.number())
                self.expect("]")
                self.expect(")")
                self.expect("<=")
                return BallToPointAtom(agent, tuple(pt), self.number())
            other = self.ident()
            self.expect(")")
            self.expect("<=")
            return BallPairAtom(agent, other, self.number())
        if v == "lin":
            self.next()
            self.expect("(")
            terms = []
            sign = 1.0
            if self.at("-"):
                self.next()
                sign = -1.0
            while True:
                coeff = sign
                if self.peek()[0] == "num":
                    coeff = sign * self.number()
                    self.expect("*")
                agent, idx = self.comp_ref()
                terms.append((agent, idx, coeff))
                if self.at("+"):
                    self.next()
                    sign = 1.0
                elif self.at("-"):
                    self.next()
                    sign = -1.0
                else:
                    break
            self.expect(")")
            self.expect(">=")
            return LinearAtom(tuple(terms), self.number())
        if v == "comp":
            ai, ci = self.comp_ref()
            self.expect("-")
            aj, cj = self.comp_ref()
            self.expect("in")
            self.expect("(")
            lo = self.number()
            self.expect(",")
            hi = self.number()
            self.expect(")")
            if not lo < hi:
                raise FormulaSyntaxError(f"band ({lo},{hi}) must have lo < hi")
            return BandDiffAtom(ai, ci, aj, cj, lo, hi)
        if v == "angdeg":
            self.next()
            self.expect("(")
            agent = self.ident()
            self.expect(")")
            self.expect("near")
            target = self.number()
            self.expect("tol")
            tol = self.number()
            if tol <= 0:
                raise FormulaSyntaxError("angle tolerance must be positive")
            return AngleBandAtom(agent, target, tol)
        raise FormulaSyntaxError(f"expected an atom, got {v!r}")

    # -- psi ----------------------------------------------------------------

    def term(self) -> PsiFormula:
        if self.at("true"):
            self.next()
            return PsiTrue()
        if self.at("!"):
            self.next()
            atom = self.atom()
            if not atom.affine:
                raise NonConcaveNegationError(
                    f"cannot negate non-affine atom {atom.text()!r}"
                )
            return PsiNegAtom(atom)
        return PsiAtom(self.atom())

    def psi(self) -> PsiFormula:
        if self.at("("):
            self.next()
            inner = self.psi()
            self.expect(")")
            return inner
        terms = [self.term()]
        while self.at("&&") and not self._temporal_after_and():
            self.next()
            terms.append(self.term())
        return self._conj(terms)

    @staticmethod
    def _conj(terms: list[PsiFormula]) -> PsiFormula:
        terms = [t for t in terms if not isinstance(t, PsiTrue)]
        if not terms:
            return PsiTrue()
        if len(terms) == 1:
            return terms[0]
        return PsiAnd(tuple(terms))

    # -- phi / task ----------------------------------------------------------

    def window(self) -> tuple[float, float]:
        self.expect("[")
        a = self.number()
        self.expect(",")
        b = self.number()
        self.expect("]")
        if not 0.0 <= a:
            raise TimeBoundOrderError(f"window start {a} must be >= 0")
        if a > b:
            raise TimeBoundOrderError(f"window [{a},{b}] has a > b")
        return a, b

    def phi_or_nest(self):
        """Returns either a PhiFormula or a list of nest units."""
        kind, op = self.next()
        if op not in ("F", "G"):
            raise FormulaSyntaxError(f"expected F or G, got {op!r}")
        a, b = self.window()
        if op == "F" and self.at("("):
            # Look inside the parens for a nested F: that makes this a nest.
            mark = self.i
            self.next()
            terms = [self.term()] if not self._next_is_temporal() else []
            while self.at("&&") and not self._temporal_after_and():
                self.next()
                terms.append(self.term())
            if (terms and self.at("&&")) or (not terms and self._next_is_temporal()):
                if terms:
                    self.next()  # consume '&&' before the inner nest
                inner = self.phi_or_nest()
                self.expect(")")
                units = inner if isinstance(inner, list) else [
                    (inner.op, inner.a, inner.b, inner.psi)
                ]
                if any(u[0] != "F" for u in units):
                    raise FormulaSyntaxError("only F units may appear inside a nest")
                return [("F", a, b, self._conj(terms))] + units
            # plain parenthesized psi
            self.i = mark
            return PhiFormula(op, a, b, self.psi())
        return PhiFormula(op, a, b, self.psi())

    def _next_is_temporal(self) -> bool:
        return self.peek()[1] in ("F", "G") and self.peek(1)[1] == "["

    def _temporal_after_and(self) -> bool:
        return self.peek()[1] == "&&" and self.peek(1)[1] in ("F", "G") and self.peek(2)[1] == "["

    def task(self) -> TaskFormula:
        if self.at("true") and self.peek(1)[0] is None:
            self.next()
            return TaskFormula(units=())
        first = self.phi_or_nest()
        if isinstance(first, list):
            if self.peek()[0] is not None:
                raise FormulaSyntaxError("a nest must be the whole task")
            if len(first) == 1:
                op, a, b, psi = first[0]
                return TaskFormula(units=(PhiFormula(op, a, b, psi),))
            units = []
            off_a = off_b = 0.0
            for op, a, b, psi in first:
                off_a += a
                off_b += b
                units.append(PhiFormula("F", off_a, off_b, psi))
            return TaskFormula(units=tuple(units), from_nest=True)
        units = [first]
        while self.at("&&"):
            self.next()
            nxt = self.phi_or_nest()
            if isinstance(nxt, list):
                raise FormulaSyntaxError("a nest cannot be conjoined with other units")
            units.append(nxt)
        if self.peek()[0] is not None:
            raise FormulaSyntaxError(f"trailing input at {self.peek()[1]!r}")
        return TaskFormula(units=tuple(units))


def parse_task(text: str) -> TaskFormula:
    """Parse task text into a normalized TaskFormula.

    Raises FormulaSyntaxError, TimeBoundOrderError, or
    NonConcaveNegationError on malformed input.
    """
    if not text or not text.strip():
        raise FormulaSyntaxError("empty formula")
    return _Parser(text).task()
