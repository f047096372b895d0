"""Brute-force oracles and random model generators for checker tests.

Everything here is deliberately naive: path-definition recursion for bounded
properties, dense linear algebra for unbounded reachability, and exhaustive
memoryless-policy enumeration for MDP extrema.  None of it shares code with
the solvers under test.
"""

import itertools

import numpy as np

from adaskit.models import MarkovChain, Mdp


# ---------------------------------------------------------------------------
# random models (always reachable from state 0)


def _random_distribution(rng, targets):
    weights = rng.random(len(targets)) + 0.05
    probs = weights / weights.sum()
    probs[-1] = 1.0 - probs[:-1].sum()
    return list(zip(targets, probs.tolist()))


def random_mc(rng, n_max=10, props=("g", "h")):
    n = int(rng.integers(2, n_max + 1))
    required = [[] for _ in range(n)]
    for child in range(1, n):
        required[int(rng.integers(0, child))].append(child)
    transitions = []
    for s in range(n):
        extra = rng.choice(n, size=int(rng.integers(1, min(3, n) + 1)),
                           replace=False)
        targets = sorted(set(required[s]) | set(int(e) for e in extra))
        transitions.append(_random_distribution(rng, targets))
    labels = [frozenset(p for p in props if rng.random() < 0.3) for _ in range(n)]
    if not any("g" in l for l in labels):
        labels[n - 1] = labels[n - 1] | {"g"}
    mc = MarkovChain(states=[None] * n, transitions=transitions, initial=0,
                     labels=labels)
    return mc.validate()


def random_mdp(rng, n_max=6, max_actions=2, props=("g", "h")):
    n = int(rng.integers(2, n_max + 1))
    required = [[] for _ in range(n)]
    for child in range(1, n):
        required[int(rng.integers(0, child))].append(child)
    actions, transitions = [], []
    for s in range(n):
        n_act = int(rng.integers(1, max_actions + 1))
        choices = []
        for c in range(n_act):
            extra = rng.choice(n, size=int(rng.integers(1, min(3, n) + 1)),
                               replace=False)
            targets = sorted(set(int(e) for e in extra))
            if c == 0:
                targets = sorted(set(targets) | set(required[s]))
            choices.append(_random_distribution(rng, targets))
        actions.append([f"a{c}" for c in range(n_act)])
        transitions.append(choices)
    labels = [frozenset(p for p in props if rng.random() < 0.3) for _ in range(n)]
    if not any("g" in l for l in labels):
        labels[n - 1] = labels[n - 1] | {"g"}
    mdp = Mdp(states=[None] * n, actions=actions, transitions=transitions,
              initial=0, labels=labels)
    return mdp.validate()


# ---------------------------------------------------------------------------
# Markov chain oracles


def mc_bounded_until_oracle(mc, sat1, sat2, k):
    """P(sat1 U<=k sat2) by direct recursion on the path definition."""

    def rec(s, steps):
        if sat2[s]:
            return 1.0
        if steps == 0 or not sat1[s]:
            return 0.0
        return sum(p * rec(d, steps - 1) for d, p in mc.transitions[s])

    return np.array([rec(s, k) for s in range(mc.n)])


def mc_next_oracle(mc, sat):
    return np.array([sum(p for d, p in mc.transitions[s] if sat[d])
                     for s in range(mc.n)])


def mc_until_oracle(mc, sat1, sat2):
    """P(sat1 U sat2) by dense linear solve after a plain reachability BFS."""
    n = mc.n
    transit = [bool(sat1[s]) and not sat2[s] for s in range(n)]
    # backward reachability of sat2 through transit states
    preds = [[] for _ in range(n)]
    for s in range(n):
        for d, p in mc.transitions[s]:
            if p > 0:
                preds[d].append(s)
    reach = [bool(sat2[s]) for s in range(n)]
    stack = [s for s in range(n) if sat2[s]]
    while stack:
        d = stack.pop()
        for s in preds[d]:
            if transit[s] and not reach[s]:
                reach[s] = True
                stack.append(s)
    x = np.zeros(n)
    for s in range(n):
        if sat2[s]:
            x[s] = 1.0
    unknown = [s for s in range(n) if transit[s] and reach[s]]
    if unknown:
        index = {s: i for i, s in enumerate(unknown)}
        m = len(unknown)
        a = np.eye(m)
        b = np.zeros(m)
        for s in unknown:
            for d, p in mc.transitions[s]:
                if d in index:
                    a[index[s], index[d]] -= p
                elif sat2[d]:
                    b[index[s]] += p
        sol = np.linalg.solve(a, b)
        for s in unknown:
            x[s] = sol[index[s]]
    return x


# ---------------------------------------------------------------------------
# MDP oracles


def induced_chain(mdp, choice):
    return MarkovChain(
        states=list(mdp.states),
        transitions=[mdp.transitions[s][choice[s]] for s in range(mdp.n)],
        initial=mdp.initial,
        labels=list(mdp.labels),
    )


def all_policies(mdp):
    return itertools.product(*[range(len(mdp.actions[s])) for s in range(mdp.n)])


def mdp_reach_oracle(mdp, sat1, sat2, direction):
    """Extremal P(sat1 U sat2) by exhaustive memoryless-policy enumeration."""
    best = None
    for choice in all_policies(mdp):
        vals = mc_until_oracle(induced_chain(mdp, choice), sat1, sat2)
        if best is None:
            best = vals
        else:
            best = np.maximum(best, vals) if direction == "max" else np.minimum(best, vals)
    return best


def mdp_bounded_oracle(mdp, sat1, sat2, k, direction):
    """Extremal P(sat1 U<=k sat2) by recursion on the defining tree
    (step-dependent choices allowed, as the semantics requires)."""
    pick = max if direction == "max" else min

    def rec(s, steps):
        if sat2[s]:
            return 1.0
        if steps == 0 or not sat1[s]:
            return 0.0
        return pick(sum(p * rec(d, steps - 1) for d, p in dist)
                    for dist in mdp.transitions[s])

    return np.array([rec(s, k) for s in range(mdp.n)])


def mdp_next_oracle(mdp, sat, direction):
    pick = max if direction == "max" else min
    return np.array([pick(sum(p for d, p in dist if sat[d])
                          for dist in mdp.transitions[s])
                     for s in range(mdp.n)])


def label_vector(model, name):
    return np.array([name in model.labels[s] for s in range(model.n)])
