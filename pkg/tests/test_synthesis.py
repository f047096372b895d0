"""Tests for policy synthesis and closed-loop chain induction."""

import numpy as np
import pytest

from adaskit.errors import PolicyDomainError, VerificationError
from adaskit.models import Mdp
from adaskit.pctl import check_mc, parse
from adaskit.synthesis import Policy, induce_mc, synthesize

from oracles import (
    all_policies,
    induced_chain,
    label_vector,
    mc_until_oracle,
    random_mdp,
)

F_REACH = 'P=? [ F "g" ]'


def forced_choice_mdp():
    return Mdp(
        states=[None] * 3,
        actions=[["a", "b"], ["stay"], ["stay"]],
        transitions=[[[(1, 1.0)], [(2, 1.0)]], [[(1, 1.0)]], [[(2, 1.0)]]],
        initial=0,
        labels=[frozenset(), frozenset({"g"}), frozenset()],
    ).validate()


def hand_built_mdp():
    # 0 --safe--> 1 (goal w.p. 0.9, sink w.p. 0.1)
    # 0 --risky-> goal w.p. 0.5, sink w.p. 0.5
    return Mdp(
        states=[None] * 4,
        actions=[["safe", "risky"], ["go"], ["stay"], ["stay"]],
        transitions=[
            [[(1, 1.0)], [(2, 0.5), (3, 0.5)]],
            [[(2, 0.9), (3, 0.1)]],
            [[(2, 1.0)]],
            [[(3, 1.0)]],
        ],
        initial=0,
        labels=[frozenset(), frozenset(), frozenset({"g"}), frozenset()],
    ).validate()


class TestSynthesize:
    def test_degenerate_mdp_unique_policy(self):
        rng = np.random.default_rng(20)
        mdp = random_mdp(rng, max_actions=1)
        pi, res = synthesize(mdp, F_REACH, "max")
        assert np.all(pi.actions == 0)
        mc = mdp.as_chain_if_deterministic().validate()
        assert res.initial_probability == pytest.approx(
            check_mc(mc, parse(F_REACH)).initial_probability, abs=1e-10)

    def test_forced_choice_picks_goal_action(self):
        mdp = forced_choice_mdp()
        pi, res = synthesize(mdp, F_REACH, "max")
        assert pi.action_label(mdp, 0) == "a"
        assert res.initial_probability == 1.0
        pi_min, res_min = synthesize(mdp, F_REACH, "min")
        assert pi_min.action_label(mdp, 0) == "b"
        assert res_min.initial_probability == 0.0

    def test_hand_built_optimal(self):
        mdp = hand_built_mdp()
        pi, res = synthesize(mdp, F_REACH, "max")
        assert pi.action_label(mdp, 0) == "safe"
        assert res.initial_probability == pytest.approx(0.9, abs=1e-12)
        induced = induce_mc(mdp, pi)
        assert induced.transitions[0] == [(1, 1.0)]

    def test_random_mdps_match_policy_enumeration(self):
        rng = np.random.default_rng(21)
        for _ in range(20):
            mdp = random_mdp(rng)
            g = label_vector(mdp, "g")
            ones = np.ones(mdp.n, dtype=bool)
            for direction in ("max", "min"):
                pi, res = synthesize(mdp, F_REACH, direction)
                best = None
                for choice in all_policies(mdp):
                    v = mc_until_oracle(induced_chain(mdp, choice), ones, g)[mdp.initial]
                    if best is None or (v > best if direction == "max" else v < best):
                        best = v
                assert res.initial_probability == pytest.approx(best, abs=1e-10)

    def test_optimality_sandwich(self):
        rng = np.random.default_rng(22)
        for _ in range(10):
            mdp = random_mdp(rng)
            g = label_vector(mdp, "g")
            ones = np.ones(mdp.n, dtype=bool)
            pi_max, res_max = synthesize(mdp, F_REACH, "max")
            pi_min, res_min = synthesize(mdp, F_REACH, "min")
            for _ in range(10):
                choice = [int(rng.integers(0, len(mdp.actions[s])))
                          for s in range(mdp.n)]
                v = mc_until_oracle(induced_chain(mdp, choice), ones, g)[mdp.initial]
                assert v <= res_max.initial_probability + 1e-9
                assert v >= res_min.initial_probability - 1e-9

    def test_determinism(self):
        rng = np.random.default_rng(23)
        mdp = random_mdp(rng)
        pi1, _ = synthesize(mdp, F_REACH, "max")
        pi2, _ = synthesize(mdp, F_REACH, "max")
        assert np.array_equal(pi1.actions, pi2.actions)

    def test_requires_quantitative_query(self):
        with pytest.raises(VerificationError):
            synthesize(forced_choice_mdp(), 'P>=0.5 [ F "g" ]', "max")

    def test_rejects_bounded_until(self):
        with pytest.raises(VerificationError):
            synthesize(forced_choice_mdp(), 'P=? [ true U<=3 "g" ]', "max")

    def test_next_synthesis(self):
        mdp = forced_choice_mdp()
        pi, res = synthesize(mdp, 'P=? [ X "g" ]', "max")
        assert pi.action_label(mdp, 0) == "a"
        assert res.initial_probability == 1.0


class TestInduceMc:
    def test_closed_loop_consistency(self):
        rng = np.random.default_rng(24)
        f = parse(F_REACH)
        for _ in range(20):
            mdp = random_mdp(rng)
            for direction in ("max", "min"):
                pi, res = synthesize(mdp, f, direction)
                closed = check_mc(induce_mc(mdp, pi), f)
                assert closed.initial_probability == pytest.approx(
                    res.initial_probability, abs=1e-8)

    def test_singleton_mdp_roundtrip(self):
        rng = np.random.default_rng(25)
        mdp = random_mdp(rng, max_actions=1)
        pi = Policy(actions=np.zeros(mdp.n, dtype=np.int64),
                    formula=F_REACH, direction="max", value=0.0)
        mc = induce_mc(mdp, pi)
        assert mc.transitions == [c[0] for c in mdp.transitions]
        assert mc.labels == mdp.labels

    def test_bad_domain_rejected(self):
        mdp = forced_choice_mdp()
        short = Policy(actions=np.zeros(1, dtype=np.int64), formula=F_REACH,
                       direction="max", value=0.0)
        with pytest.raises(PolicyDomainError):
            induce_mc(mdp, short)
        wrong = Policy(actions=np.array([5, 0, 0]), formula=F_REACH,
                       direction="max", value=0.0)
        with pytest.raises(PolicyDomainError):
            induce_mc(mdp, wrong)
