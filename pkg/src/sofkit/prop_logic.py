"""Propositional formulas, model enumeration, and constraint distributions.

Assignments over n variables map to canonical indices with x1 as the most
significant bit, so for n=2 the order is (0,0),(0,1),(1,0),(1,1) and the
XOR constraint distribution prints as [0, 0.5, 0.5, 0].
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Tuple, Union

import numpy as np

MAX_VARS = 20


class FormulaSyntaxError(ValueError):
    def __init__(self, message, position):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class UnsatisfiableConstraintError(ValueError):
    """Raised when a constraint has no models, so rho is undefined."""


# --- AST -------------------------------------------------------------------


@dataclass(frozen=True)
class Var:
    index: int


@dataclass(frozen=True)
class Not:
    child: "Expr"


@dataclass(frozen=True)
class And:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Or:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Implies:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Iff:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Const:
    value: bool


Expr = Union[Var, Not, And, Or, Implies, Iff, Const]

CONST_TRUE = Const(True)
CONST_FALSE = Const(False)


@dataclass(frozen=True)
class Formula:
    root: Expr
    num_vars: int

    def __post_init__(self):
        hi = _max_var(self.root)
        if hi >= self.num_vars:
            raise ValueError(
                f"variable x{hi + 1} out of range for num_vars={self.num_vars}"
            )


def _max_var(e: Expr) -> int:
    if isinstance(e, Var):
        return e.index
    if isinstance(e, Not):
        return _max_var(e.child)
    if isinstance(e, (And, Or, Implies, Iff)):
        return max(_max_var(e.left), _max_var(e.right))
    return -1


# --- parser ----------------------------------------------------------------

_TOKENS = ("<->", "->", "!", "&", "|", "(", ")")


def _tokenize(text):
    tokens = []
    i = 0
    while i < len(text):
        c = text[i]
        if c.isspace():
            i += 1
            continue
        matched = False
        for t in _TOKENS:
            if text.startswith(t, i):
                tokens.append((t, i))
                i += len(t)
                matched = True
                break
        if matched:
            continue
        if text.startswith("true", i):
            tokens.append(("true", i))
            i += 4
        elif text.startswith("false", i):
            tokens.append(("false", i))
            i += 5
        elif c == "x":
            j = i + 1
            while j < len(text) and text[j].isdigit():
                j += 1
            if j == i + 1:
                raise FormulaSyntaxError("expected digits after 'x'", i)
            tokens.append((text[i:j], i))
            i = j
        else:
            raise FormulaSyntaxError(f"unexpected character {c!r}", i)
    return tokens


class _Parser:
    def __init__(self, tokens, num_vars, length):
        self.tokens = tokens
        self.num_vars = num_vars
        self.pos = 0
        self.length = length

    def peek(self):
        return self.tokens[self.pos][0] if self.pos < len(self.tokens) else None

    def here(self):
        return self.tokens[self.pos][1] if self.pos < len(self.tokens) else self.length

    def take(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, text):
        if self.peek() != text:
            raise FormulaSyntaxError(f"expected {text!r}", self.here())
        return self.take()

    def parse(self):
        e = self.iff()
        if self.pos != len(self.tokens):
            raise FormulaSyntaxError(f"unexpected token {self.peek()!r}", self.here())
        return e

    def iff(self):
        e = self.impl()
        while self.peek() == "<->":
            self.take()
            e = Iff(e, self.impl())
        return e

    def impl(self):
        e = self.or_()
        while self.peek() == "->":
            self.take()
            e = Implies(e, self.or_())
        return e

    def or_(self):
        e = self.and_()
        while self.peek() == "|":
            self.take()
            e = Or(e, self.and_())
        return e

    def and_(self):
        e = self.unary()
        while self.peek() == "&":
            self.take()
            e = And(e, self.unary())
        return e

    def unary(self):
        tok = self.peek()
        if tok is None:
            raise FormulaSyntaxError("unexpected end of input", self.here())
        if tok == "!":
            self.take()
            return Not(self.unary())
        if tok == "(":
            self.take()
            e = self.iff()
            self.expect(")")
            return e
        if tok == "true":
            self.take()
            return CONST_TRUE
        if tok == "false":
            self.take()
            return CONST_FALSE
        if tok.startswith("x"):
            text, at = self.take()
            idx = int(text[1:]) - 1
            if idx < 0 or idx >= self.num_vars:
                raise FormulaSyntaxError(
                    f"variable {text} out of range for {self.num_vars} variables", at
                )
            return Var(idx)
        raise FormulaSyntaxError(f"unexpected token {tok!r}", self.here())


def parse_formula(text: str, num_vars: int) -> Formula:
    """Parse with precedence ! > & > | > -> > <->; variables are 1-based
    in text (x1..xn) and 0-based internally."""
    tokens = _tokenize(text)
    root = _Parser(tokens, num_vars, len(text)).parse()
    return Formula(root, num_vars)


# --- evaluation and enumeration --------------------------------------------


def eval_formula(f: Formula, assignment) -> bool:
    bits = tuple(int(b) for b in assignment)
    if len(bits) != f.num_vars:
        raise ValueError(f"assignment length {len(bits)} != num_vars {f.num_vars}")

    def go(e):
        if isinstance(e, Var):
            return bool(bits[e.index])
        if isinstance(e, Not):
            return not go(e.child)
        if isinstance(e, And):
            return go(e.left) and go(e.right)
        if isinstance(e, Or):
            return go(e.left) or go(e.right)
        if isinstance(e, Implies):
            return (not go(e.left)) or go(e.right)
        if isinstance(e, Iff):
            return go(e.left) == go(e.right)
        return e.value

    return go(f.root)


def index_of_assignment(assignment) -> int:
    idx = 0
    for b in assignment:
        idx = (idx << 1) | int(b)
    return idx


def assignment_of_index(index: int, num_vars: int) -> Tuple[int, ...]:
    return tuple((index >> (num_vars - 1 - i)) & 1 for i in range(num_vars))


@dataclass(frozen=True)
class ModelSet:
    """Exhaustive, sorted set of satisfying assignments."""

    num_vars: int
    indices: np.ndarray = field(repr=False)

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        if idx.size and (np.any(np.diff(idx) <= 0) or idx[0] < 0 or idx[-1] >= self.space_size):
            raise ValueError("indices must be sorted, unique, and in range")
        object.__setattr__(self, "indices", idx)

    @property
    def space_size(self) -> int:
        return 1 << self.num_vars

    def __len__(self):
        return int(self.indices.size)

    @property
    def models(self):
        return [assignment_of_index(int(i), self.num_vars) for i in self.indices]

    def complement(self) -> "ModelSet":
        mask = np.ones(self.space_size, dtype=bool)
        mask[self.indices] = False
        return ModelSet(self.num_vars, np.nonzero(mask)[0])

    def truth_table(self) -> Tuple[int, ...]:
        mask = np.zeros(self.space_size, dtype=int)
        mask[self.indices] = 1
        return tuple(int(v) for v in mask)


def _eval_vectorized(e: Expr, columns):
    if isinstance(e, Var):
        return columns[e.index]
    if isinstance(e, Not):
        return ~_eval_vectorized(e.child, columns)
    if isinstance(e, And):
        return _eval_vectorized(e.left, columns) & _eval_vectorized(e.right, columns)
    if isinstance(e, Or):
        return _eval_vectorized(e.left, columns) | _eval_vectorized(e.right, columns)
    if isinstance(e, Implies):
        return ~_eval_vectorized(e.left, columns) | _eval_vectorized(e.right, columns)
    if isinstance(e, Iff):
        return _eval_vectorized(e.left, columns) == _eval_vectorized(e.right, columns)
    n = len(columns[0]) if columns else 1
    return np.full(n, e.value, dtype=bool)


def enumerate_models(f: Formula, max_vars: int = MAX_VARS) -> ModelSet:
    """Exhaustive truth-table scan over all 2^n assignments."""
    n = f.num_vars
    if n > max_vars:
        raise ValueError(
            f"refusing exhaustive enumeration for {n} variables (ceiling {max_vars}); "
            "raise max_vars explicitly if you really want 2^n work"
        )
    space = np.arange(1 << n, dtype=np.int64)
    columns = [((space >> (n - 1 - i)) & 1).astype(bool) for i in range(n)]
    sat = _eval_vectorized(f.root, columns)
    if not isinstance(sat, np.ndarray):
        sat = np.full(1 << n, sat, dtype=bool)
    return ModelSet(n, space[sat])


def one_hot_formula(n: int) -> Formula:
    """Disjunction over i of (x_i and not x_j for all j != i)."""
    if n < 1:
        raise ValueError("one_hot_formula requires n >= 1")
    disjuncts = []
    for i in range(n):
        term: Expr = Var(i)
        for j in range(n):
            if j != i:
                term = And(term, Not(Var(j)))
        disjuncts.append(term)
    root = disjuncts[0]
    for d in disjuncts[1:]:
        root = Or(root, d)
    return Formula(root, n)


def constraint_distribution(m: ModelSet) -> np.ndarray:
    """Uniform distribution over the model set: 1/|M| on each model index."""
    if len(m) == 0:
        raise UnsatisfiableConstraintError(
            "constraint has no models; its uniform distribution is undefined"
        )
    probs = np.zeros(m.space_size)
    probs[m.indices] = 1.0 / len(m)
    return probs


def enumerate_two_var_formulas():
    """All 15 satisfiable two-variable Boolean functions as
    (truth-table label, ModelSet) pairs."""
    out = []
    for mask in range(1, 16):
        indices = np.array([i for i in range(4) if (mask >> i) & 1], dtype=np.int64)
        ms = ModelSet(2, indices)
        out.append((ms.truth_table(), ms))
    return out
