"""Optimal intervention policies: extraction from MDP checking results and
induction of the closed-loop Markov chain."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import PolicyDomainError, VerificationError
from .models import MarkovChain, Mdp
from .pctl import (
    Prob,
    StateFormula,
    VerificationResult,
    check_mdp,
    format_formula,
    parse,
)


@dataclass
class Policy:
    """Memoryless deterministic policy: one action index per state."""

    actions: np.ndarray
    formula: str
    direction: str
    value: float

    def action_label(self, model: Mdp, s: int):
        return model.actions[s][int(self.actions[s])]


def synthesize(model: Mdp, f: StateFormula | str, direction: str,
               tol: float = 1e-10) -> tuple[Policy, VerificationResult]:
    """Optimal policy and value for a quantitative query on the MDP.

    The formula's outermost operator must be P=?.  Memoryless deterministic
    policies attain the optimum for the supported path operators (next,
    until, eventually); step-bounded until needs step-dependent choices and
    is rejected rather than answered with a suboptimal stationary policy.
    """
    if isinstance(f, str):
        f = parse(f)
    if not (isinstance(f, Prob) and f.op is None):
        raise VerificationError(
            "synthesis requires a quantitative query (P=? [...]) at the top level")
    result = check_mdp(model, f, direction, tol=tol)
    if result.policy is None:
        raise VerificationError(
            "no memoryless policy attains the optimum of a step-bounded path "
            "formula; use an unbounded until or next")
    policy = Policy(
        actions=result.policy.copy(),
        formula=format_formula(f),
        direction=direction,
        value=result.initial_probability,
    )
    return policy, result


def induce_mc(model: Mdp, pi: Policy) -> MarkovChain:
    """Markov chain obtained by fixing the policy's action in every state."""
    if len(pi.actions) != model.n:
        raise PolicyDomainError(
            f"policy covers {len(pi.actions)} states, model has {model.n}")
    rows = []
    for s in range(model.n):
        c = int(pi.actions[s])
        if not 0 <= c < len(model.transitions[s]):
            raise PolicyDomainError(
                f"policy action {c} undefined at state {s} "
                f"({len(model.transitions[s])} available)")
        rows.append(list(model.transitions[s][c]))
    return MarkovChain(
        states=list(model.states),
        transitions=rows,
        initial=model.initial,
        labels=list(model.labels),
        features=model.features,
        vocabulary=model.vocabulary,
    )


def write_policy_csv(path, model: Mdp, pi: Policy, values=None):
    """Human-auditable policy table.

    Columns: the abstract state tuple (when the model carries tuples),
    the chosen action label, and the state's value under the policy.
    """
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["kind", "mu", "x", "lane", "a", "v", "t",
                         "pending", "pending_gain", "action", "value"])
        for s in range(model.n):
            desc = model.states[s]
            cols = list(desc) if isinstance(desc, tuple) else [desc] + [""] * 8
            cols = cols[:9] + [""] * (9 - len(cols[:9]))
            action = pi.action_label(model, s)
            value = "" if values is None else f"{float(values[s]):.12g}"
            writer.writerow([*cols, _format_action(action), value])


def _format_action(action) -> str:
    if isinstance(action, tuple):
        return ":".join(str(a) for a in action)
    return str(action)
