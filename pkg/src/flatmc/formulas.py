"""Freeze LTL: syntax, parser, negation normal form, the flat fragment, and
an exact evaluator over ultimately periodic data words.

The freeze quantifier `@r.` stores the current counter value in register r;
register tests `[=r]`, `[<r]`, `[>r]` compare the current value with the
stored one. The flat fragment restricts where the freeze quantifier may occur
relative to until/release and negation; see flat_violation.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass
from typing import Optional, Union


class FormulaError(ValueError):
    """A formula failed a structural requirement (sentence, flatness, ...)."""


class FormulaSyntaxError(FormulaError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at {position})")
        self.position = position


# ---------------------------------------------------------------------------
# Syntax
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Prop:
    name: str


@dataclass(frozen=True)
class Neg:
    body: "Formula"


@dataclass(frozen=True)
class And:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Or:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Next:
    body: "Formula"


@dataclass(frozen=True)
class Until:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Release:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class RegTest:
    rel: str  # '<', '=', '>'
    reg: str


@dataclass(frozen=True)
class Freeze:
    reg: str
    body: "Formula"


Formula = Union[Prop, Neg, And, Or, Next, Until, Release, RegTest, Freeze]

# `true` and `false` are derived forms over a reserved proposition, following
# the textbook definition true = p | !p; they expand at construction time.
TRUE_PROP = "tt"


def true_formula() -> Formula:
    return Or(Prop(TRUE_PROP), Neg(Prop(TRUE_PROP)))


def false_formula() -> Formula:
    return And(Prop(TRUE_PROP), Neg(Prop(TRUE_PROP)))


def finally_(body: Formula) -> Formula:
    return Until(true_formula(), body)


def globally(body: Formula) -> Formula:
    return Neg(Until(true_formula(), Neg(body)))


def implies(left: Formula, right: Formula) -> Formula:
    return Or(Neg(left), right)


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

_TOKEN = re.compile(r"\s*(->|[()&|!@.\[\]<=>]|[A-Za-z0-9_]+)")
_KEYWORDS = {"U", "R", "X", "F", "G", "true", "false"}


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens: list[tuple[str, int]] = []
        pos = 0
        while pos < len(text):
            if not text[pos:].strip():
                break
            m = _TOKEN.match(text, pos)
            if m is None:
                at = pos + len(text[pos:]) - len(text[pos:].lstrip())
                raise FormulaSyntaxError(f"unexpected character {text[at]!r}", at)
            self.tokens.append((m.group(1), m.start(1)))
            pos = m.end()
        self.index = 0

    def peek(self) -> Optional[str]:
        if self.index < len(self.tokens):
            return self.tokens[self.index][0]
        return None

    def here(self) -> int:
        if self.index < len(self.tokens):
            return self.tokens[self.index][1]
        return len(self.text)

    def take(self) -> str:
        tok = self.peek()
        if tok is None:
            raise FormulaSyntaxError("unexpected end of formula", self.here())
        self.index += 1
        return tok

    def expect(self, token: str) -> None:
        at = self.here()
        if self.peek() != token:
            raise FormulaSyntaxError(f"expected {token!r}", at)
        self.index += 1

    def ident(self, what: str) -> str:
        at = self.here()
        tok = self.take()
        if not re.fullmatch(r"[A-Za-z0-9_]+", tok) or tok in _KEYWORDS:
            raise FormulaSyntaxError(f"expected {what}", at)
        return tok

    # Binary operators from loosest to tightest; U/R and -> associate to the
    # right, & and | to the left.
    def formula(self) -> Formula:
        return self.until_level()

    def until_level(self) -> Formula:
        left = self.implies_level()
        tok = self.peek()
        if tok in ("U", "R"):
            self.take()
            right = self.until_level()
            return Until(left, right) if tok == "U" else Release(left, right)
        return left

    def implies_level(self) -> Formula:
        left = self.or_level()
        if self.peek() == "->":
            self.take()
            return implies(left, self.implies_level())
        return left

    def or_level(self) -> Formula:
        left = self.and_level()
        while self.peek() == "|":
            self.take()
            left = Or(left, self.and_level())
        return left

    def and_level(self) -> Formula:
        left = self.unary()
        while self.peek() == "&":
            self.take()
            left = And(left, self.unary())
        return left

    def unary(self) -> Formula:
        tok = self.peek()
        if tok == "!":
            self.take()
            return Neg(self.unary())
        if tok == "X":
            self.take()
            return Next(self.unary())
        if tok == "F":
            self.take()
            return finally_(self.unary())
        if tok == "G":
            self.take()
            return globally(self.unary())
        if tok == "@":
            self.take()
            reg = self.ident("register name")
            self.expect(".")
            return Freeze(reg, self.unary())
        return self.atom()

    def atom(self) -> Formula:
        at = self.here()
        tok = self.take()
        if tok == "true":
            return true_formula()
        if tok == "false":
            return false_formula()
        if tok == "(":
            inner = self.formula()
            self.expect(")")
            return inner
        if tok == "[":
            rel_at = self.here()
            rel = self.take()
            if rel not in ("<", "=", ">"):
                raise FormulaSyntaxError("expected <, =, or > in register test",
                                         rel_at)
            reg = self.ident("register name")
            self.expect("]")
            return RegTest(rel, reg)
        if re.fullmatch(r"[A-Za-z0-9_]+", tok) and tok not in _KEYWORDS:
            return Prop(tok)
        raise FormulaSyntaxError(f"unexpected token {tok!r}", at)


def parse(text: str) -> Formula:
    parser = _Parser(text)
    result = parser.formula()
    if parser.peek() is not None:
        raise FormulaSyntaxError(f"trailing input {parser.peek()!r}",
                                 parser.here())
    return result


_PREC = {Until: 1, Release: 1, Or: 3, And: 4}


def _prec(phi: Formula) -> int:
    return _PREC.get(type(phi), 5)


def render(phi: Formula) -> str:
    """Concrete syntax for `phi`; parse(render(phi)) == phi."""
    if isinstance(phi, Prop):
        return phi.name
    if isinstance(phi, RegTest):
        return f"[{phi.rel}{phi.reg}]"
    if isinstance(phi, Neg):
        return f"!{_wrap(phi.body, 5)}"
    if isinstance(phi, Next):
        return f"X {_wrap(phi.body, 5)}"
    if isinstance(phi, Freeze):
        return f"@{phi.reg}. {_wrap(phi.body, 5)}"
    if isinstance(phi, And):
        return f"{_wrap(phi.left, 4)} & {_wrap(phi.right, 5)}"
    if isinstance(phi, Or):
        return f"{_wrap(phi.left, 3)} | {_wrap(phi.right, 4)}"
    op = "U" if isinstance(phi, Until) else "R"
    return f"{_wrap(phi.left, 2)} {op} {_wrap(phi.right, 1)}"


def _wrap(phi: Formula, minimum: int) -> str:
    text = render(phi)
    return f"({text})" if _prec(phi) < minimum else text


# ---------------------------------------------------------------------------
# Structural analyses
# ---------------------------------------------------------------------------

def subformulas(phi: Formula):
    """All subformula occurrences, outermost first."""
    yield phi
    if isinstance(phi, (Neg, Next, Freeze)):
        yield from subformulas(phi.body)
    elif isinstance(phi, (And, Or, Until, Release)):
        yield from subformulas(phi.left)
        yield from subformulas(phi.right)


def contains_freeze(phi: Formula) -> bool:
    return any(isinstance(f, Freeze) for f in subformulas(phi))


def nnf(phi: Formula) -> Formula:
    """Negation normal form: negations pushed down to propositions. Negated
    register tests are expanded into the disjunction of the two complementary
    comparisons, which is sound over the totally ordered naturals."""
    return _nnf(phi, True)


_REG_COMPLEMENT = {"=": ("<", ">"), "<": ("=", ">"), ">": ("=", "<")}


def _nnf(phi: Formula, positive: bool) -> Formula:
    if isinstance(phi, Prop):
        return phi if positive else Neg(phi)
    if isinstance(phi, RegTest):
        if positive:
            return phi
        a, b = _REG_COMPLEMENT[phi.rel]
        return Or(RegTest(a, phi.reg), RegTest(b, phi.reg))
    if isinstance(phi, Neg):
        return _nnf(phi.body, not positive)
    if isinstance(phi, And):
        parts = (_nnf(phi.left, positive), _nnf(phi.right, positive))
        return And(*parts) if positive else Or(*parts)
    if isinstance(phi, Or):
        parts = (_nnf(phi.left, positive), _nnf(phi.right, positive))
        return Or(*parts) if positive else And(*parts)
    if isinstance(phi, Next):
        return Next(_nnf(phi.body, positive))
    if isinstance(phi, Until):
        parts = (_nnf(phi.left, positive), _nnf(phi.right, positive))
        return Until(*parts) if positive else Release(*parts)
    if isinstance(phi, Release):
        parts = (_nnf(phi.left, positive), _nnf(phi.right, positive))
        return Release(*parts) if positive else Until(*parts)
    # The freeze quantifier binds deterministically, so negation commutes
    # with it.
    return Freeze(phi.reg, _nnf(phi.body, positive))


def flat_violation(phi: Formula, parity: int = 0):
    """The first (subformula, polarity) pair breaking the flat fragment's
    rule, or None. Under an even number of negations the freeze quantifier
    must not occur in the first argument of an until or the second argument
    of a release; under an odd number, in the other argument."""
    if isinstance(phi, (Prop, RegTest)):
        return None
    if isinstance(phi, Neg):
        return flat_violation(phi.body, parity ^ 1)
    if isinstance(phi, (Next, Freeze)):
        return flat_violation(phi.body, parity)
    if isinstance(phi, (Until, Release)):
        if isinstance(phi, Until):
            guarded = phi.left if parity == 0 else phi.right
        else:
            guarded = phi.right if parity == 0 else phi.left
        if contains_freeze(guarded):
            return phi, ("positive" if parity == 0 else "negative")
    return (flat_violation(phi.left, parity)
            or flat_violation(phi.right, parity))


def is_flat(phi: Formula) -> bool:
    return flat_violation(phi) is None


def is_coflat(phi: Formula) -> bool:
    """Whether the negation of `phi` is flat."""
    return flat_violation(phi, parity=1) is None


def free_registers(phi: Formula) -> frozenset[str]:
    if isinstance(phi, Prop):
        return frozenset()
    if isinstance(phi, RegTest):
        return frozenset((phi.reg,))
    if isinstance(phi, (Neg, Next)):
        return free_registers(phi.body)
    if isinstance(phi, Freeze):
        return free_registers(phi.body) - {phi.reg}
    return free_registers(phi.left) | free_registers(phi.right)


def is_sentence(phi: Formula) -> bool:
    """Whether every register test is in the scope of a freeze quantifier for
    its register."""
    return not free_registers(phi)


def all_registers(phi: Formula) -> set[str]:
    regs = set()
    for f in subformulas(phi):
        if isinstance(f, RegTest):
            regs.add(f.reg)
        elif isinstance(f, Freeze):
            regs.add(f.reg)
    return regs


def rename_registers(phi: Formula) -> Formula:
    """Give every freeze occurrence its own register, re-pointing bound tests
    to the innermost enclosing binder of their original name. Requires a
    sentence; evaluation-equivalent to the input."""
    taken = all_registers(phi)
    counter = itertools.count(1)

    def fresh(base: str) -> str:
        while True:
            candidate = f"{base}_{next(counter)}"
            if candidate not in taken:
                taken.add(candidate)
                return candidate

    def walk(f: Formula, env: dict) -> Formula:
        if isinstance(f, Prop):
            return f
        if isinstance(f, RegTest):
            if f.reg not in env:
                raise FormulaError(
                    f"free register test [{f.rel}{f.reg}]: not a sentence")
            return RegTest(f.rel, env[f.reg])
        if isinstance(f, Freeze):
            renamed = fresh(f.reg)
            return Freeze(renamed, walk(f.body, {**env, f.reg: renamed}))
        if isinstance(f, Neg):
            return Neg(walk(f.body, env))
        if isinstance(f, Next):
            return Next(walk(f.body, env))
        return type(f)(walk(f.left, env), walk(f.right, env))

    return walk(phi, {})


# ---------------------------------------------------------------------------
# Data words and evaluation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LassoWord:
    """An ultimately periodic data word: a finite prefix followed by a
    forever-repeated loop of (proposition set, counter value) pairs."""
    prefix: tuple[tuple[frozenset[str], int], ...]
    loop: tuple[tuple[frozenset[str], int], ...]

    def __post_init__(self):
        if not self.loop:
            raise FormulaError("lasso words need a nonempty loop")
        normalize = tuple(
            (frozenset(props), value) for props, value in self.prefix)
        object.__setattr__(self, "prefix", normalize)
        normalize = tuple(
            (frozenset(props), value) for props, value in self.loop)
        object.__setattr__(self, "loop", normalize)
        for props, value in (*self.prefix, *self.loop):
            if value < 0:
                raise FormulaError("counter values must be non-negative")

    def norm(self, i: int) -> int:
        """Canonical representative of position i: positions beyond the
        prefix collapse modulo the loop length."""
        if i < len(self.prefix):
            return i
        return len(self.prefix) + (i - len(self.prefix)) % len(self.loop)

    def at(self, i: int) -> tuple[frozenset[str], int]:
        i = self.norm(i)
        if i < len(self.prefix):
            return self.prefix[i]
        return self.loop[i - len(self.prefix)]

    def span(self) -> int:
        return len(self.prefix) + len(self.loop)


def evaluate(word: LassoWord, position: int, assignment, phi: Formula) -> bool:
    """Exact satisfaction of `phi` at `position` of `word` under the register
    assignment. Until and release walk the finitely many position classes of
    the lasso; results are memoized per (position class, subformula,
    assignment restricted to its free registers)."""
    memo: dict = {}
    free_cache: dict = {}

    def free(f: Formula) -> frozenset[str]:
        got = free_cache.get(f)
        if got is None:
            got = free_cache[f] = free_registers(f)
        return got

    def sat(f: Formula, i: int, nu: dict) -> bool:
        i = word.norm(i)
        key = (f, i, tuple(sorted((r, nu.get(r)) for r in free(f))))
        got = memo.get(key)
        if got is not None:
            return got
        result = _sat(f, i, nu)
        memo[key] = result
        return result

    def _sat(f: Formula, i: int, nu: dict) -> bool:
        if isinstance(f, Prop):
            return f.name in word.at(i)[0]
        if isinstance(f, RegTest):
            if f.reg not in nu:
                raise FormulaError(f"register {f.reg!r} is unassigned")
            value, bound = word.at(i)[1], nu[f.reg]
            if f.rel == "<":
                return value < bound
            if f.rel == "=":
                return value == bound
            return value > bound
        if isinstance(f, Neg):
            return not sat(f.body, i, nu)
        if isinstance(f, And):
            return sat(f.left, i, nu) and sat(f.right, i, nu)
        if isinstance(f, Or):
            return sat(f.left, i, nu) or sat(f.right, i, nu)
        if isinstance(f, Next):
            return sat(f.body, i + 1, nu)
        if isinstance(f, Freeze):
            return sat(f.body, i, {**nu, f.reg: word.at(i)[1]})
        if isinstance(f, Until):
            visited = set()
            j = i
            while True:
                jn = word.norm(j)
                if jn in visited:
                    return False
                visited.add(jn)
                if sat(f.right, j, nu):
                    return True
                if not sat(f.left, j, nu):
                    return False
                j += 1
        # Release: either the right side holds on the whole forward orbit, or
        # the left side releases at some point where the right still holds.
        visited = set()
        j = i
        while True:
            jn = word.norm(j)
            if jn in visited:
                return True
            visited.add(jn)
            if not sat(f.right, j, nu):
                return False
            if sat(f.left, j, nu):
                return True
            j += 1

    return sat(phi, position, dict(assignment))
