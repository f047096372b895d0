"""PCTL formulas: AST, concrete-syntax parser, and quantitative checking.

Concrete syntax (the de-facto explicit-checker style)::

    P=? [ F "crash" ]
    P<0.001 [ !"crash" U ("goal" & (t<=21)) ]
    P>=0.5 [ X ("lane1" | "goal") ]
    P=? [ "a" U<=10 "b" ]

State formulas: ``true``, quoted atomic propositions, threshold predicates
over state variables (``t<=21``, ``x>=500``, ``v>2``), ``!``, ``&``, ``|``,
and the probability operator with a bound (``P<0.5 [...]``) or as a
quantitative query (``P=? [...]``, top level only).  Path formulas (only
inside ``P[...]``): ``X phi``, ``phi U phi``, ``phi U<=k phi``, ``F phi``.
Operator precedence: ``!`` binds tighter than ``&``, which binds tighter
than ``|``.

Quantitative checking uses qualitative graph precomputation (probability
exactly 0 / exactly 1) followed by Gauss-Seidel value iteration sweeping
states in descending index order; that ordering is part of the numeric
contract (abstraction-built models index states in discovery order, which
makes the sweeps近 back-substitution on their acyclic core).
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

from .errors import IterationLimitError, PctlSyntaxError, VerificationError
from .models import MarkovChain, Mdp

DEFAULT_TOL = 1e-10
MAX_SWEEPS = 10 ** 6


# ---------------------------------------------------------------------------
# AST


class StateFormula:
    pass


class PathFormula:
    pass


@dataclass(frozen=True)
class TrueFormula(StateFormula):
    def __str__(self):
        return "true"


@dataclass(frozen=True)
class Atom(StateFormula):
    name: str

    def __str__(self):
        return f'"{self.name}"'


@dataclass(frozen=True)
class Threshold(StateFormula):
    """Parameterized predicate over a per-state variable, e.g. t<=21."""

    var: str
    op: str             # one of <=, <, >=, >, =
    value: float

    def __str__(self):
        return f"({self.var}{self.op}{_fmt_number(self.value)})"


@dataclass(frozen=True)
class Not(StateFormula):
    child: StateFormula

    def __str__(self):
        if isinstance(self.child, (And, Or)):
            return f"!({self.child})"
        return f"!{self.child}"


@dataclass(frozen=True)
class And(StateFormula):
    left: StateFormula
    right: StateFormula

    def __str__(self):
        return f"{_wrap(self.left, (Or,))} & {_wrap(self.right, (Or, And))}"


@dataclass(frozen=True)
class Or(StateFormula):
    left: StateFormula
    right: StateFormula

    def __str__(self):
        return f"{self.left} | {_wrap(self.right, (Or,))}"


@dataclass(frozen=True)
class Prob(StateFormula):
    """Probability operator: bounded (op, bound) or quantitative (op=None)."""

    op: str | None
    bound: float | None
    path: PathFormula

    def __str__(self):
        spec = "=?" if self.op is None else f"{self.op}{_fmt_number(self.bound)}"
        return f"P{spec} [ {self.path} ]"


@dataclass(frozen=True)
class Next(PathFormula):
    child: StateFormula

    def __str__(self):
        return f"X {_wrap_operand(self.child)}"


@dataclass(frozen=True)
class Until(PathFormula):
    """phi1 U phi2, optionally step-bounded; eventually is true U phi."""

    left: StateFormula
    right: StateFormula
    bound: int | None = None
    written_as_eventually: bool = False

    def __str__(self):
        if self.written_as_eventually:
            return f"F {_wrap_operand(self.right)}"
        u = "U" if self.bound is None else f"U<={self.bound}"
        return f"{_wrap_operand(self.left)} {u} {_wrap_operand(self.right)}"


def eventually(phi: StateFormula) -> Until:
    """◇phi normalized to true U phi."""
    return Until(TrueFormula(), phi, None, written_as_eventually=True)


def _fmt_number(x):
    if float(x) == int(x) and abs(x) < 1e15:
        return str(int(x))
    return repr(float(x))


def _wrap(f, kinds):
    return f"({f})" if isinstance(f, kinds) else str(f)


def _wrap_operand(f):
    return f"({f})" if isinstance(f, (And, Or)) else str(f)


def format_formula(f: StateFormula) -> str:
    return str(f)


# ---------------------------------------------------------------------------
# Parser

_TOKEN_RE = re.compile(r"""
    (?P<ws>\s+)
  | (?P<string>"[^"\n]*")
  | (?P<number>\d+(?:\.\d+)?(?:[eE][+-]?\d+)?)
  | (?P<query>=\?)
  | (?P<le><=) | (?P<ge>>=) | (?P<lt><) | (?P<gt>>) | (?P<eq>=)
  | (?P<lparen>\() | (?P<rparen>\))
  | (?P<lbrack>\[) | (?P<rbrack>\])
  | (?P<and>&) | (?P<or>\|) | (?P<not>!)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
""", re.VERBOSE)

_CMP_KINDS = ("le", "ge", "lt", "gt", "eq")
_CMP_TEXT = {"le": "<=", "ge": ">=", "lt": "<", "gt": ">", "eq": "="}


@dataclass
class _Token:
    kind: str
    text: str
    line: int
    column: int


def _tokenize(text: str):
    tokens = []
    line, col = 1, 1
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise PctlSyntaxError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        tok = m.group()
        if kind != "ws":
            tokens.append(_Token(kind, tok, line, col))
        newlines = tok.count("\n")
        if newlines:
            line += newlines
            col = len(tok) - tok.rfind("\n")
        else:
            col += len(tok)
        pos = m.end()
    tokens.append(_Token("eof", "", line, col))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.pos = 0

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def advance(self) -> _Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, kind: str) -> _Token:
        tok = self.peek()
        if tok.kind != kind:
            self.fail({kind})
        return self.advance()

    def fail(self, expected):
        tok = self.peek()
        got = tok.text or "end of input"
        raise PctlSyntaxError(f"unexpected {got!r}", tok.line, tok.column,
                              expected=expected)

    # state formulas ------------------------------------------------------

    def parse_state(self) -> StateFormula:
        f = self.parse_and()
        while self.peek().kind == "or":
            self.advance()
            f = Or(f, self.parse_and())
        return f

    def parse_and(self) -> StateFormula:
        f = self.parse_unary()
        while self.peek().kind == "and":
            self.advance()
            f = And(f, self.parse_unary())
        return f

    def parse_unary(self) -> StateFormula:
        if self.peek().kind == "not":
            self.advance()
            return Not(self.parse_unary())
        return self.parse_primary()

    def parse_primary(self) -> StateFormula:
        tok = self.peek()
        if tok.kind == "lparen":
            self.advance()
            f = self.parse_state()
            self.expect("rparen")
            return f
        if tok.kind == "string":
            self.advance()
            return Atom(tok.text[1:-1])
        if tok.kind == "ident":
            if tok.text == "true":
                self.advance()
                return TrueFormula()
            if tok.text == "P":
                return self.parse_prob()
            return self.parse_threshold()
        self.fail({"(", "true", "P", '"proposition"', "variable"})

    def parse_threshold(self) -> Threshold:
        var = self.expect("ident").text
        tok = self.peek()
        if tok.kind not in _CMP_KINDS:
            self.fail({"<=", "<", ">=", ">", "="})
        self.advance()
        num = self.expect("number")
        return Threshold(var, _CMP_TEXT[tok.kind], float(num.text))

    def parse_prob(self) -> Prob:
        self.expect("ident")  # the P
        tok = self.peek()
        if tok.kind == "query":
            self.advance()
            op, bound = None, None
        elif tok.kind in ("lt", "le", "gt", "ge"):
            self.advance()
            bound = float(self.expect("number").text)
            if not 0.0 <= bound <= 1.0:
                raise PctlSyntaxError(f"probability bound {bound} outside [0, 1]",
                                      tok.line, tok.column)
            op = _CMP_TEXT[tok.kind]
        else:
            self.fail({"=?", "<", "<=", ">", ">="})
        self.expect("lbrack")
        path = self.parse_path()
        self.expect("rbrack")
        return Prob(op, bound, path)

    # path formulas -------------------------------------------------------

    def parse_path(self) -> PathFormula:
        tok = self.peek()
        if tok.kind == "ident" and tok.text == "X":
            self.advance()
            return Next(self.parse_state())
        if tok.kind == "ident" and tok.text == "F":
            self.advance()
            return eventually(self.parse_state())
        left = self.parse_state()
        tok = self.peek()
        if not (tok.kind == "ident" and tok.text == "U"):
            self.fail({"U"})
        self.advance()
        bound = None
        if self.peek().kind == "le":
            self.advance()
            num = self.expect("number")
            if "." in num.text or "e" in num.text or "E" in num.text:
                raise PctlSyntaxError("step bound must be a natural number",
                                      num.line, num.column)
            bound = int(num.text)
        right = self.parse_state()
        return Until(left, right, bound)


def _reject_nested_queries(f, depth=0):
    if isinstance(f, Prob):
        if f.op is None and depth > 0:
            raise VerificationError(
                "quantitative query P=? is only allowed at the top level")
        _reject_nested_queries(f.path, depth + 1)
    elif isinstance(f, Not):
        _reject_nested_queries(f.child, depth + 1)
    elif isinstance(f, (And, Or)):
        _reject_nested_queries(f.left, depth + 1)
        _reject_nested_queries(f.right, depth + 1)
    elif isinstance(f, Next):
        _reject_nested_queries(f.child, depth)
    elif isinstance(f, Until):
        _reject_nested_queries(f.left, depth)
        _reject_nested_queries(f.right, depth)


def parse(text: str) -> StateFormula:
    """Parse a PCTL formula; raises PctlSyntaxError with position on failure."""
    parser = _Parser(text)
    f = parser.parse_state()
    if parser.peek().kind != "eof":
        parser.fail({"end of input"})
    _reject_nested_queries(f)
    return f


# ---------------------------------------------------------------------------
# Results


@dataclass
class VerificationResult:
    """Per-state probabilities plus bookkeeping from the numeric solve."""

    values: np.ndarray
    initial_probability: float
    satisfaction: np.ndarray | None
    iterations: int
    residual: float
    policy: np.ndarray | None = None


# ---------------------------------------------------------------------------
# Proposition resolution


def _sat_atom(model, name):
    vocab = set()
    for labs in model.labels:
        vocab.update(labs)
    if getattr(model, "vocabulary", None):
        vocab.update(model.vocabulary)
    if name not in vocab:
        raise VerificationError(
            f"proposition '{name}' is not labeled on this model")
    return np.fromiter((name in labs for labs in model.labels),
                       dtype=bool, count=model.n)


_CMP_FUN = {
    "<=": lambda a, b: a <= b,
    "<": lambda a, b: a < b,
    ">=": lambda a, b: a >= b,
    ">": lambda a, b: a > b,
    "=": lambda a, b: a == b,
}


def _sat_threshold(model, th: Threshold):
    if model.features is None:
        raise VerificationError(
            f"threshold predicate '{th.var}{th.op}{th.value:g}' needs per-state "
            "features, which this model does not carry")
    if th.var not in model.features:
        raise VerificationError(
            f"state variable '{th.var}' unknown; known: "
            f"{sorted(model.features)}")
    return _CMP_FUN[th.op](model.features[th.var], th.value)


# ---------------------------------------------------------------------------
# Markov chain checking


def _mc_pred_lists(model: MarkovChain):
    preds = [[] for _ in range(model.n)]
    for s, row in enumerate(model.transitions):
        for d, p in row:
            if p > 0.0:
                preds[d].append(s)
    return preds


def _backward_reach(preds, seed, allowed):
    """States from which `seed` is reachable through `allowed` states."""
    reached = seed.copy()
    stack = list(np.flatnonzero(seed))
    while stack:
        s = stack.pop()
        for p in preds[s]:
            if not reached[p] and allowed[p]:
                reached[p] = True
                stack.append(p)
    return reached


def prob0_states(model: MarkovChain, sat1, sat2):
    """States where P(sat1 U sat2) is exactly 0."""
    preds = _mc_pred_lists(model)
    can_reach = _backward_reach(preds, sat2, sat1 & ~sat2)
    return ~can_reach


def prob1_states(model: MarkovChain, sat1, sat2, prob0=None):
    """States where P(sat1 U sat2) is exactly 1."""
    if prob0 is None:
        prob0 = prob0_states(model, sat1, sat2)
    preds = _mc_pred_lists(model)
    lt_one = _backward_reach(preds, prob0, sat1 & ~sat2)
    return ~lt_one


def _gauss_seidel_mc(model, x, unknown, tol, max_sweeps):
    """In-place Gauss-Seidel sweeps (descending state index) on the residual
    system x_s = sum P(s,s') x_s'; returns (iterations, final residual)."""
    order = [s for s in range(model.n - 1, -1, -1) if unknown[s]]
    rows = []
    for s in order:
        dsts, ps, p_self = [], [], 0.0
        for d, p in model.transitions[s]:
            if d == s:
                p_self += p
            else:
                dsts.append(d)
                ps.append(p)
        rows.append((s, dsts, ps, 1.0 - p_self))
    stop = max(tol * 1e-3, 1e-15)
    residual = math.inf
    for sweep in range(1, max_sweeps + 1):
        residual = 0.0
        for s, dsts, ps, denom in rows:
            acc = 0.0
            for d, p in zip(dsts, ps):
                acc += p * x[d]
            new = acc / denom if denom > 1e-300 else x[s]
            diff = abs(new - x[s])
            if diff > residual:
                residual = diff
            x[s] = new
        if residual < stop:
            return sweep, residual
    if residual > tol:
        raise IterationLimitError(
            f"until solve did not converge in {max_sweeps} sweeps", residual)
    return max_sweeps, residual


def prob_until(model: MarkovChain, sat1, sat2, tol: float = DEFAULT_TOL,
               max_sweeps: int = MAX_SWEEPS):
    """Probability vector for sat1 U sat2 (unbounded).

    Qualitative prob0/prob1 sets are fixed by graph analysis; the residual
    linear fixed point is solved by Gauss-Seidel to absolute tolerance `tol`.
    Returns (values, iterations, residual).
    """
    sat1 = np.asarray(sat1, dtype=bool)
    sat2 = np.asarray(sat2, dtype=bool)
    p0 = prob0_states(model, sat1, sat2)
    p1 = prob1_states(model, sat1, sat2, prob0=p0)
    x = np.zeros(model.n)
    x[p1] = 1.0
    unknown = ~p0 & ~p1
    if not unknown.any():
        return x, 0, 0.0
    iters, residual = _gauss_seidel_mc(model, x, unknown, tol, max_sweeps)
    return x, iters, residual


def prob_bounded_until(model: MarkovChain, sat1, sat2, k: int):
    """Probability vector for sat1 U<=k sat2 via the standard recurrence."""
    if k < 0:
        raise ValueError("step bound must be non-negative")
    sat1 = np.asarray(sat1, dtype=bool)
    sat2 = np.asarray(sat2, dtype=bool)
    x = np.where(sat2, 1.0, 0.0)
    transit = sat1 & ~sat2
    transit_rows = [(s, model.transitions[s]) for s in np.flatnonzero(transit)]
    for _ in range(k):
        nxt = np.where(sat2, 1.0, 0.0)
        for s, row in transit_rows:
            acc = 0.0
            for d, p in row:
                acc += p * x[d]
            nxt[s] = acc
        x = nxt
    return x


def prob_next(model: MarkovChain, sat):
    """Probability vector for X sat: one matrix-vector product."""
    sat = np.asarray(sat, dtype=bool)
    ind = np.where(sat, 1.0, 0.0)
    out = np.zeros(model.n)
    for s, row in enumerate(model.transitions):
        acc = 0.0
        for d, p in row:
            acc += p * ind[d]
        out[s] = acc
    return out


# ---------------------------------------------------------------------------
# MDP checking


def _mdp_pred_lists(model: Mdp):
    preds = [[] for _ in range(model.n)]
    for s, choices in enumerate(model.transitions):
        for dist in choices:
            for d, p in dist:
                if p > 0.0:
                    preds[d].append(s)
    for i, lst in enumerate(preds):
        preds[i] = sorted(set(lst))
    return preds


def _mdp_prob0_max(model, sat1, sat2, preds=None):
    """Max probability exactly 0: sat2 unreachable under every policy."""
    if preds is None:
        preds = _mdp_pred_lists(model)
    can_reach = _backward_reach(preds, sat2, sat1 & ~sat2)
    return ~can_reach


def _mdp_prob1_max(model, sat1, sat2, preds=None):
    """Max probability exactly 1 (the standard double fixpoint); also returns
    witness actions that make progress toward sat2 within the winning region."""
    n = model.n
    transit = sat1 & ~sat2
    if preds is None:
        preds = _mdp_pred_lists(model)
    r = np.ones(n, dtype=bool)
    witness = np.zeros(n, dtype=np.int64)

    def qualifies(s, t):
        for c, dist in enumerate(model.transitions[s]):
            stays = all(r[d] for d, p in dist if p > 0.0)
            if stays and any(t[d] for d, p in dist if p > 0.0):
                return c
        return None

    while True:
        # limited reach: stay inside r while moving toward sat2 (worklist)
        t = sat2.copy()
        queue = list(np.flatnonzero(sat2))
        while queue:
            d = queue.pop()
            for s in preds[d]:
                if t[s] or not transit[s]:
                    continue
                c = qualifies(s, t)
                if c is not None:
                    t[s] = True
                    witness[s] = c
                    queue.append(s)
        if np.array_equal(t, r):
            return r, witness
        r = t


def _mdp_prob0_min(model, sat1, sat2, preds=None):
    """Min probability exactly 0: some policy avoids sat2 surely."""
    transit = sat1 & ~sat2
    if preds is None:
        preds = _mdp_pred_lists(model)
    positive = sat2.copy()  # states where every policy has positive probability
    queue = list(np.flatnonzero(sat2))
    while queue:
        d = queue.pop()
        for s in preds[d]:
            if positive[s] or not transit[s]:
                continue
            if all(any(positive[t] for t, p in dist if p > 0.0)
                   for dist in model.transitions[s]):
                positive[s] = True
                queue.append(s)
    return ~positive


def _mdp_prob1_min(model, sat1, sat2, preds=None):
    """Min probability exactly 1: every policy reaches sat2 surely."""
    transit = sat1 & ~sat2
    bad = ~sat1 & ~sat2
    if preds is None:
        preds = _mdp_pred_lists(model)
    # largest sub-MDP closed within transit: some policy can linger forever
    closed = transit.copy()

    def can_stay(s):
        return any(all(closed[d] for d, p in dist if p > 0.0)
                   for dist in model.transitions[s])

    queue = [s for s in np.flatnonzero(transit) if not can_stay(s)]
    for s in queue:
        closed[s] = False
    while queue:
        removed = queue.pop()
        for s in preds[removed]:
            if closed[s] and not can_stay(s):
                closed[s] = False
                queue.append(s)
    escape = _backward_reach(preds, bad | closed, transit)
    return ~escape


def _mdp_value_iteration(model, x, unknown, maximize, tol, max_sweeps):
    order = [s for s in range(model.n - 1, -1, -1) if unknown[s]]
    rows = []
    for s in order:
        choices = []
        for dist in model.transitions[s]:
            dsts, ps, p_self = [], [], 0.0
            for d, p in dist:
                if d == s:
                    p_self += p
                else:
                    dsts.append(d)
                    ps.append(p)
            choices.append((dsts, ps, 1.0 - p_self))
        rows.append((s, choices))
    stop = max(tol * 1e-3, 1e-15)
    residual = math.inf
    better = max if maximize else min
    for sweep in range(1, max_sweeps + 1):
        residual = 0.0
        for s, choices in rows:
            best = None
            for dsts, ps, denom in choices:
                acc = 0.0
                for d, p in zip(dsts, ps):
                    acc += p * x[d]
                q = acc / denom if denom > 1e-12 else (x[s] if maximize else acc)
                best = q if best is None else better(best, q)
            diff = abs(best - x[s])
            if diff > residual:
                residual = diff
            x[s] = best
        if residual < stop:
            return sweep, residual
    if residual > tol:
        raise IterationLimitError(
            f"value iteration did not converge in {max_sweeps} sweeps", residual)
    return max_sweeps, residual


def _q_value(model, s, c, x):
    dist = model.transitions[s][c]
    p_self, acc = 0.0, 0.0
    for d, p in dist:
        if d == s:
            p_self += p
        else:
            acc += p * x[d]
    if 1.0 - p_self > 1e-12:
        return acc / (1.0 - p_self)
    return x[s]


def _extract_policy_max(model, x, sat2, prob1, witness, preds=None):
    """Deterministic memoryless policy achieving the max reach values.

    Among value-optimal actions the extraction prefers ones with positive
    flow toward states already scheduled (an attractor ordering), which rules
    out value-preserving cycles that would stall the induced chain; residual
    ties break toward the lowest action index.  States inside the
    probability-1 region use the qualitative witness actions.
    """
    n = model.n
    if preds is None:
        preds = _mdp_pred_lists(model)
    policy = np.zeros(n, dtype=np.int64)
    for s in range(n):
        if prob1[s] and not sat2[s]:
            policy[s] = witness[s]
    assigned = sat2 | prob1
    queue = list(np.flatnonzero(assigned))
    while queue:
        d = queue.pop()
        for s in preds[d]:
            if assigned[s] or x[s] <= 0.0:
                continue
            for c in range(len(model.transitions[s])):
                if abs(_q_value(model, s, c, x) - x[s]) > 1e-11:
                    continue
                if any(assigned[t] and p > 0.0
                       for t, p in model.transitions[s][c] if t != s):
                    policy[s] = c
                    assigned[s] = True
                    queue.append(s)
                    break
    # zero-value (and any unassigned) states: lowest-index optimal action
    for s in range(n):
        if not assigned[s]:
            qs = [_q_value(model, s, c, x) for c in range(len(model.transitions[s]))]
            best = max(qs)
            for c, q in enumerate(qs):
                if abs(q - best) <= 1e-11:
                    policy[s] = c
                    break
    return policy


def _extract_policy_min(model, x):
    """Lowest-index action among the value-minimal ones, per state."""
    n = model.n
    policy = np.zeros(n, dtype=np.int64)
    for s in range(n):
        qs = [_q_value(model, s, c, x) for c in range(len(model.transitions[s]))]
        best = min(qs)
        for c, q in enumerate(qs):
            if abs(q - best) <= 1e-11:
                policy[s] = c
                break
    return policy


def mdp_prob_until(model: Mdp, sat1, sat2, direction: str,
                   tol: float = DEFAULT_TOL, max_sweeps: int = MAX_SWEEPS):
    """Extremal probability of sat1 U sat2 over all policies.

    Returns (values, iterations, residual, policy) with a deterministic
    memoryless policy attaining the values.
    """
    sat1 = np.asarray(sat1, dtype=bool)
    sat2 = np.asarray(sat2, dtype=bool)
    maximize = _check_direction(direction) == "max"
    preds = _mdp_pred_lists(model)
    if maximize:
        p0 = _mdp_prob0_max(model, sat1, sat2, preds)
        p1, witness = _mdp_prob1_max(model, sat1, sat2, preds)
    else:
        p0 = _mdp_prob0_min(model, sat1, sat2, preds)
        p1 = _mdp_prob1_min(model, sat1, sat2, preds)
        witness = None
    x = np.zeros(model.n)
    x[p1] = 1.0
    unknown = ~p0 & ~p1
    iters, residual = 0, 0.0
    if unknown.any():
        iters, residual = _mdp_value_iteration(model, x, unknown, maximize,
                                               tol, max_sweeps)
    if maximize:
        policy = _extract_policy_max(model, x, sat2, p1, witness, preds)
    else:
        policy = _extract_policy_min(model, x)
    return x, iters, residual, policy


def mdp_prob_bounded_until(model: Mdp, sat1, sat2, k: int, direction: str):
    """Extremal probability of sat1 U<=k sat2 (step-dependent optimum)."""
    if k < 0:
        raise ValueError("step bound must be non-negative")
    sat1 = np.asarray(sat1, dtype=bool)
    sat2 = np.asarray(sat2, dtype=bool)
    maximize = _check_direction(direction) == "max"
    better = max if maximize else min
    x = np.where(sat2, 1.0, 0.0)
    transit = np.flatnonzero(sat1 & ~sat2)
    for _ in range(k):
        nxt = np.where(sat2, 1.0, 0.0)
        for s in transit:
            best = None
            for dist in model.transitions[s]:
                acc = 0.0
                for d, p in dist:
                    acc += p * x[d]
                best = acc if best is None else better(best, acc)
            nxt[s] = best
        x = nxt
    return x


def mdp_prob_next(model: Mdp, sat, direction: str):
    """Extremal one-step probability of entering sat, plus the argopt policy."""
    sat = np.asarray(sat, dtype=bool)
    maximize = _check_direction(direction) == "max"
    ind = np.where(sat, 1.0, 0.0)
    out = np.zeros(model.n)
    policy = np.zeros(model.n, dtype=np.int64)
    for s in range(model.n):
        best, best_c = None, 0
        for c, dist in enumerate(model.transitions[s]):
            acc = 0.0
            for d, p in dist:
                acc += p * ind[d]
            if best is None or (acc > best if maximize else acc < best):
                best, best_c = acc, c
        out[s] = best
        policy[s] = best_c
    return out, policy


def _check_direction(direction: str) -> str:
    if direction not in ("max", "min"):
        raise ValueError(f"direction must be 'max' or 'min', got {direction!r}")
    return direction


# ---------------------------------------------------------------------------
# Formula evaluation


class _Checker:
    """Bottom-up evaluation of state formulas over one model."""

    def __init__(self, model, direction=None, tol=DEFAULT_TOL):
        self.model = model
        self.direction = direction   # None for Markov chains
        self.tol = tol
        self.iterations = 0
        self.residual = 0.0
        self.policy = None

    def sat(self, f: StateFormula) -> np.ndarray:
        if isinstance(f, TrueFormula):
            return np.ones(self.model.n, dtype=bool)
        if isinstance(f, Atom):
            return _sat_atom(self.model, f.name)
        if isinstance(f, Threshold):
            return _sat_threshold(self.model, f)
        if isinstance(f, Not):
            return ~self.sat(f.child)
        if isinstance(f, And):
            return self.sat(f.left) & self.sat(f.right)
        if isinstance(f, Or):
            return self.sat(f.left) | self.sat(f.right)
        if isinstance(f, Prob):
            if f.op is None:
                raise VerificationError(
                    "quantitative query P=? cannot appear in a nested context")
            # nested bound: universal semantics over policies on MDPs
            values = self.path_values(f.path, self._nested_direction(f.op))
            return _CMP_FUN[f.op](values, f.bound)
        raise TypeError(f"not a state formula: {f!r}")

    def _nested_direction(self, op):
        if self.direction is None:
            return None
        return "max" if op in ("<", "<=") else "min"

    def path_values(self, path: PathFormula, direction) -> np.ndarray:
        if isinstance(path, Next):
            target = self.sat(path.child)
            if direction is None:
                return prob_next(self.model, target)
            values, policy = mdp_prob_next(self.model, target, direction)
            self.policy = policy
            return values
        if isinstance(path, Until):
            sat1 = self.sat(path.left)
            sat2 = self.sat(path.right)
            if path.bound is not None:
                if direction is None:
                    return prob_bounded_until(self.model, sat1, sat2, path.bound)
                return mdp_prob_bounded_until(self.model, sat1, sat2,
                                              path.bound, direction)
            if direction is None:
                values, iters, residual = prob_until(self.model, sat1, sat2,
                                                     tol=self.tol)
                self.iterations += iters
                self.residual = residual
                return values
            values, iters, residual, policy = mdp_prob_until(
                self.model, sat1, sat2, direction, tol=self.tol)
            self.iterations += iters
            self.residual = residual
            self.policy = policy
            return values
        raise TypeError(f"not a path formula: {path!r}")

    def run(self, f: StateFormula) -> VerificationResult:
        if isinstance(f, Prob):
            # the explicit direction governs the outermost operator; nested
            # bounded operators use the universal (for-all-policies) reading
            values = self.path_values(f.path, self.direction)
            satisfaction = (None if f.op is None
                            else _CMP_FUN[f.op](values, f.bound))
        else:
            satisfaction = self.sat(f)
            values = satisfaction.astype(float)
        return VerificationResult(
            values=values,
            initial_probability=float(values[self.model.initial]),
            satisfaction=satisfaction,
            iterations=self.iterations,
            residual=self.residual,
            policy=self.policy,
        )


def check_mc(model: MarkovChain, f: StateFormula,
             tol: float = DEFAULT_TOL) -> VerificationResult:
    """Check a PCTL formula on a Markov chain."""
    if isinstance(f, str):
        f = parse(f)
    return _Checker(model, direction=None, tol=tol).run(f)


def check_mdp(model: Mdp, f: StateFormula, direction: str,
              tol: float = DEFAULT_TOL) -> VerificationResult:
    """Check a PCTL formula on an MDP with extremal (max/min) semantics."""
    if isinstance(f, str):
        f = parse(f)
    _check_direction(direction)
    return _Checker(model, direction=direction, tol=tol).run(f)
