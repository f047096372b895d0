"""Explicit-state probabilistic models: Markov chains and MDPs.

States are referenced by dense integer indices.  ``states`` holds opaque
per-state descriptors (tuples for abstraction-built models, anything or None
for synthetic ones), ``labels`` the atomic propositions per state, and
``features`` an optional mapping from state-variable name to a length-n
vector, used to resolve threshold propositions such as ``t<=21`` at
checking time.
"""

from __future__ import annotations

from dataclasses import dataclass, field

ROW_SUM_TOL = 1e-9


def _check_distribution(dist, n, where):
    total = 0.0
    for dst, p in dist:
        if not (0 <= dst < n):
            raise ValueError(f"{where}: target {dst} out of range")
        if not (-1e-15 <= p <= 1.0 + 1e-12):
            raise ValueError(f"{where}: probability {p} outside [0, 1]")
        total += p
    if abs(total - 1.0) > ROW_SUM_TOL:
        raise ValueError(f"{where}: row sums to {total!r}, not 1")


def _reachable(n, initial, successor_lists):
    seen = [False] * n
    seen[initial] = True
    stack = [initial]
    while stack:
        s = stack.pop()
        for d in successor_lists(s):
            if not seen[d]:
                seen[d] = True
                stack.append(d)
    return seen


@dataclass
class MarkovChain:
    """Finite Markov chain with sparse rows ``transitions[s] = [(dst, p), ...]``.

    ``vocabulary`` optionally declares propositions that are meaningful on
    this model even when currently true nowhere (so checking them yields 0
    instead of an unknown-proposition error).
    """

    states: list
    transitions: list
    initial: int
    labels: list
    features: dict | None = None
    vocabulary: frozenset | None = None

    @property
    def n(self) -> int:
        return len(self.transitions)

    def successors(self, s: int):
        return [d for d, _ in self.transitions[s]]

    def validate(self, check_reachable: bool = True):
        if not (0 <= self.initial < self.n):
            raise ValueError("initial state out of range")
        if len(self.labels) != self.n or len(self.states) != self.n:
            raise ValueError("states/labels length mismatch")
        for s, row in enumerate(self.transitions):
            if not row:
                raise ValueError(f"state {s} has no outgoing transition")
            _check_distribution(row, self.n, f"state {s}")
        if check_reachable:
            seen = _reachable(self.n, self.initial, self.successors)
            if not all(seen):
                missing = seen.index(False)
                raise ValueError(f"state {missing} unreachable from initial")
        return self


@dataclass
class Mdp:
    """Finite MDP: ``actions[s]`` lists action labels, ``transitions[s][c]``
    the distribution of the c-th action of state s."""

    states: list
    actions: list
    transitions: list
    initial: int
    labels: list
    features: dict | None = None
    vocabulary: frozenset | None = None

    @property
    def n(self) -> int:
        return len(self.transitions)

    def successors(self, s: int):
        out = []
        for dist in self.transitions[s]:
            out.extend(d for d, _ in dist)
        return out

    def validate(self, check_reachable: bool = True):
        if not (0 <= self.initial < self.n):
            raise ValueError("initial state out of range")
        if len(self.labels) != self.n or len(self.states) != self.n:
            raise ValueError("states/labels length mismatch")
        if len(self.actions) != self.n:
            raise ValueError("actions length mismatch")
        for s, choices in enumerate(self.transitions):
            if not choices:
                raise ValueError(f"state {s} has an empty action set")
            if len(choices) != len(self.actions[s]):
                raise ValueError(f"state {s}: actions/choices mismatch")
            for c, dist in enumerate(choices):
                _check_distribution(dist, self.n, f"state {s} action {c}")
        if check_reachable:
            seen = _reachable(self.n, self.initial, self.successors)
            if not all(seen):
                missing = seen.index(False)
                raise ValueError(f"state {missing} unreachable from initial")
        return self

    def as_chain_if_deterministic(self) -> MarkovChain | None:
        """The induced chain when every state has exactly one action."""
        if any(len(c) != 1 for c in self.transitions):
            return None
        return MarkovChain(
            states=list(self.states),
            transitions=[c[0] for c in self.transitions],
            initial=self.initial,
            labels=list(self.labels),
            features=self.features,
            vocabulary=self.vocabulary,
        )
