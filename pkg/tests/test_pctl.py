"""Tests for the PCTL parser and the quantitative checkers."""

import numpy as np
import pytest

from adaskit.errors import PctlSyntaxError, VerificationError
from adaskit.models import MarkovChain, Mdp
from adaskit.pctl import (
    And,
    Atom,
    Next,
    Not,
    Or,
    Prob,
    Threshold,
    TrueFormula,
    Until,
    check_mc,
    check_mdp,
    format_formula,
    mdp_prob_until,
    parse,
    prob_bounded_until,
    prob_next,
    prob_until,
)

from oracles import (
    label_vector,
    mc_bounded_until_oracle,
    mc_next_oracle,
    mc_until_oracle,
    mdp_bounded_oracle,
    mdp_next_oracle,
    mdp_reach_oracle,
    random_mc,
    random_mdp,
)


def absorbing(*labels):
    return frozenset(labels)


def chain(rows, labels, initial=0, features=None):
    return MarkovChain(states=[None] * len(rows), transitions=rows,
                       initial=initial, labels=[frozenset(l) for l in labels],
                       features=features).validate()


# ---------------------------------------------------------------------------
# parsing


class TestParser:
    def test_crash_safety_formula(self):
        f = parse('P=? [ F "crash" ]')
        assert f == Prob(None, None, Until(TrueFormula(), Atom("crash"),
                                           written_as_eventually=True))

    def test_liveness_formula_structure(self):
        f = parse('P=? [ !"crash" U ("goal" & (t<=21)) ]')
        assert isinstance(f, Prob) and f.op is None
        path = f.path
        assert isinstance(path, Until) and path.bound is None
        assert path.left == Not(Atom("crash"))
        assert path.right == And(Atom("goal"), Threshold("t", "<=", 21.0))

    def test_true(self):
        assert parse("true") == TrueFormula()

    def test_precedence(self):
        f = parse('!"a" & "b" | "c"')
        assert f == Or(And(Not(Atom("a")), Atom("b")), Atom("c"))

    def test_bounds(self):
        assert parse('P<0.001 [ F "crash" ]').op == "<"
        assert parse('P<=0.5 [ F "g" ]').op == "<="
        assert parse('P>0 [ F "g" ]').bound == 0.0
        assert parse('P>=1 [ F "g" ]').op == ">="

    def test_bounded_until(self):
        f = parse('P=? [ "a" U<=5 "b" ]')
        assert f.path == Until(Atom("a"), Atom("b"), 5)

    def test_next(self):
        assert parse('P=? [ X "a" ]').path == Next(Atom("a"))

    def test_thresholds(self):
        assert parse("x>=500") == Threshold("x", ">=", 500.0)
        assert parse("v>2.5") == Threshold("v", ">", 2.5)
        assert parse("t=4") == Threshold("t", "=", 4.0)

    def test_syntax_error_reports_position(self):
        with pytest.raises(PctlSyntaxError) as err:
            parse('P=? [ F "crash" ')
        assert err.value.line == 1
        assert err.value.column == 17
        assert err.value.expected

    def test_unbalanced_quote(self):
        with pytest.raises(PctlSyntaxError):
            parse('"crash')

    def test_bad_bound(self):
        with pytest.raises(PctlSyntaxError):
            parse('P<1.5 [ F "g" ]')

    def test_fractional_step_bound(self):
        with pytest.raises(PctlSyntaxError):
            parse('P=? [ "a" U<=2.5 "b" ]')

    def test_nested_query_rejected(self):
        with pytest.raises(VerificationError):
            parse('P=? [ F "a" ] & "b"')

    def test_eventually_normalizes_to_until(self):
        f = parse('P=? [ F "g" ]')
        assert isinstance(f.path, Until)
        assert f.path.left == TrueFormula()


ROUND_TRIP_CORPUS = [
    'true',
    '"crash"',
    '!"crash"',
    '(t<=21)',
    '(x>=500)',
    '(v>2.5)',
    '(t=4)',
    '"a" & "b"',
    '"a" | "b"',
    '!"a" & "b" | "c"',
    '!("a" & "b")',
    '"a" & ("b" | "c")',
    '"lane0" & (t<=21) & (v>=20)',
    'P=? [ F "crash" ]',
    'P=? [ !"crash" U ("goal" & (t<=21)) ]',
    'P=? [ X "a" ]',
    'P=? [ X ("a" | "b") ]',
    'P=? [ "a" U "b" ]',
    'P=? [ "a" U<=5 "b" ]',
    'P=? [ ("a" & "b") U<=10 ("c" | "d") ]',
    'P=? [ !"a" U "b" ]',
    'P<0.001 [ F "crash" ]',
    'P<=0.5 [ F "goal" ]',
    'P>0.25 [ "a" U "b" ]',
    'P>=0.999 [ X "safe" ]',
    'P<0.5 [ F ("goal" & (t<=21)) ]',
    'P>=0.5 [ F "g" ] & "h"',
    'P<0.1 [ F "g" ] | P>0.9 [ X "h" ]',
    '!P<0.5 [ F "g" ]',
    'P=? [ F ("a" & !"b") ]',
    'P=? [ F ("lane1" & (x>=250)) ]',
    'P=? [ !"crash" U ("goal" & (t<=30.5)) ]',
    'P=? [ ("lane0" | "lane1") U "goal" ]',
    'P=? [ true U "g" ]',
    'P=? [ true U<=7 "g" ]',
    'P=? [ X (t<=21) ]',
    'P=? [ X !"a" ]',
    'P=? [ F !"a" ]',
    'P=? [ F ("a" | "b" | "c") ]',
    'P=? [ F ("a" & "b" & "c") ]',
    'P>=0 [ F "g" ]',
    'P<=1 [ F "g" ]',
    'P=? [ (v>=20) U (v<10) ]',
    'P=? [ F (x=500) ]',
    'P<0.25 [ "a" U<=3 "b" ]',
    'P=? [ ("a" & !"b") U ("c" & (t<=21)) ]',
    '"a" & "b" & "c"',
    '"a" | "b" | "c"',
    '!!"a"',
    'P=? [ F ("goal" & (t<=21) & (v>=15)) ]',
]


class TestRoundTrip:
    @pytest.mark.parametrize("text", ROUND_TRIP_CORPUS)
    def test_round_trip(self, text):
        first = parse(text)
        printed = format_formula(first)
        assert parse(printed) == first
        # identity modulo whitespace
        assert printed.replace(" ", "") == text.replace(" ", "")

    def test_corpus_size(self):
        assert len(ROUND_TRIP_CORPUS) >= 50


# ---------------------------------------------------------------------------
# Markov chain checking


class TestCheckMc:
    def test_true_everywhere(self):
        mc = chain([[(1, 1.0)], [(1, 1.0)]], [set(), set()])
        res = check_mc(mc, parse("true"))
        assert np.all(res.values == 1.0)
        assert res.initial_probability == 1.0

    def test_three_state_split(self):
        mc = chain(
            [[(1, 0.5), (2, 0.5)], [(1, 1.0)], [(2, 1.0)]],
            [set(), {"g"}, set()])
        res = check_mc(mc, parse('P=? [ F "g" ]'))
        assert res.initial_probability == pytest.approx(0.5, abs=1e-12)

    def test_until_sat2_everywhere(self):
        mc = random_mc(np.random.default_rng(0))
        ones = np.ones(mc.n, dtype=bool)
        values, _, _ = prob_until(mc, ones, ones)
        assert np.all(values == 1.0)

    def test_until_empty_transit(self):
        mc = random_mc(np.random.default_rng(1))
        none = np.zeros(mc.n, dtype=bool)
        g = label_vector(mc, "g")
        values, _, _ = prob_until(mc, none, g)
        assert np.array_equal(values, g.astype(float))

    def test_cycle_matches_dense_solve(self):
        # 4-state chain with a cycle between 0 and 1
        mc = chain(
            [[(1, 0.6), (2, 0.4)], [(0, 0.5), (3, 0.5)], [(2, 1.0)], [(3, 1.0)]],
            [set(), set(), {"g"}, set()])
        sat1 = np.ones(4, dtype=bool)
        g = label_vector(mc, "g")
        values, _, _ = prob_until(mc, sat1, g)
        oracle = mc_until_oracle(mc, sat1, g)
        assert values == pytest.approx(oracle, abs=1e-10)

    def test_bounded_until_base_cases(self):
        mc = chain([[(1, 0.3), (2, 0.7)], [(1, 1.0)], [(2, 1.0)]],
                   [set(), {"g"}, set()])
        g = label_vector(mc, "g")
        ones = np.ones(3, dtype=bool)
        assert np.array_equal(prob_bounded_until(mc, ones, g, 0), g.astype(float))
        k1 = prob_bounded_until(mc, ones, g, 1)
        assert k1[0] == pytest.approx(0.3, abs=1e-15)

    def test_bounded_until_monotone_in_k(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            mc = random_mc(rng)
            g = label_vector(mc, "g")
            ones = np.ones(mc.n, dtype=bool)
            prev = prob_bounded_until(mc, ones, g, 0)
            for k in range(1, 6):
                cur = prob_bounded_until(mc, ones, g, k)
                assert np.all(cur >= prev - 1e-15)
                prev = cur

    def test_next_cases(self):
        mc = chain([[(1, 0.4), (2, 0.6)], [(1, 1.0)], [(2, 1.0)]],
                   [set(), {"g"}, set()])
        ones = np.ones(3, dtype=bool)
        assert np.all(prob_next(mc, ones) == 1.0)
        assert np.all(prob_next(mc, ~ones) == 0.0)
        assert prob_next(mc, label_vector(mc, "g"))[0] == pytest.approx(0.4, abs=1e-15)

    def test_random_models_match_oracles(self):
        rng = np.random.default_rng(3)
        for _ in range(40):
            mc = random_mc(rng)
            g = label_vector(mc, "g")
            h = label_vector(mc, "h")
            sat1 = ~h | g
            until, _, _ = prob_until(mc, sat1, g)
            assert until == pytest.approx(mc_until_oracle(mc, sat1, g), abs=1e-10)
            for k in (0, 1, 3, 5):
                got = prob_bounded_until(mc, sat1, g, k)
                assert got == pytest.approx(
                    mc_bounded_until_oracle(mc, sat1, g, k), abs=1e-10)
            assert prob_next(mc, g) == pytest.approx(mc_next_oracle(mc, g), abs=1e-12)

    def test_unlabeled_proposition_raises(self):
        mc = chain([[(0, 1.0)]], [{"g"}])
        with pytest.raises(VerificationError, match="nosuch"):
            check_mc(mc, parse('P=? [ F "nosuch" ]'))

    def test_vocabulary_allows_unlabeled_but_known(self):
        mc = chain([[(0, 1.0)]], [{"g"}])
        mc.vocabulary = frozenset({"crash"})
        res = check_mc(mc, parse('P=? [ F "crash" ]'))
        assert res.initial_probability == 0.0

    def test_threshold_predicates(self):
        mc = chain([[(1, 1.0)], [(1, 1.0)]], [set(), {"g"}],
                   features={"t": np.array([0.0, 21.0])})
        res = check_mc(mc, parse('P=? [ F ("g" & (t<=21)) ]'))
        assert res.initial_probability == 1.0
        res = check_mc(mc, parse('P=? [ F ("g" & (t<=20)) ]'))
        assert res.initial_probability == 0.0
        with pytest.raises(VerificationError, match="zz"):
            check_mc(mc, parse("zz<=1"))

    def test_threshold_needs_features(self):
        mc = chain([[(0, 1.0)]], [set()])
        with pytest.raises(VerificationError):
            check_mc(mc, parse("t<=21"))

    def test_bound_satisfaction_set(self):
        mc = chain(
            [[(1, 0.5), (2, 0.5)], [(1, 1.0)], [(2, 1.0)]],
            [set(), {"g"}, set()])
        res = check_mc(mc, parse('P>=0.5 [ F "g" ]'))
        assert res.satisfaction is not None
        expected = res.values >= 0.5
        assert np.array_equal(res.satisfaction, expected)
        assert res.satisfaction[0] and res.satisfaction[1] and not res.satisfaction[2]

    def test_boolean_root(self):
        mc = chain([[(1, 1.0)], [(1, 1.0)]], [{"a"}, set()])
        res = check_mc(mc, parse('!"a"'))
        assert res.values[0] == 0.0 and res.values[1] == 1.0

    def test_acyclic_back_substitution(self):
        # on DAGs the sweep count stays small and values are near-exact
        rng = np.random.default_rng(4)
        for _ in range(10):
            n = int(rng.integers(3, 12))
            rows = []
            for s in range(n - 1):
                targets = sorted({s + 1} | set(int(t) for t in
                                               rng.integers(s + 1, n, size=2)))
                w = rng.random(len(targets)) + 0.1
                w /= w.sum()
                w[-1] = 1.0 - w[:-1].sum()
                rows.append(list(zip(targets, w.tolist())))
            rows.append([(n - 1, 1.0)])
            labels = [frozenset() for _ in range(n)]
            labels[n - 1] = frozenset({"g"})
            mc = MarkovChain([None] * n, rows, 0, labels).validate()
            g = label_vector(mc, "g")
            ones = np.ones(n, dtype=bool)
            values, iters, _ = prob_until(mc, ones, g)
            assert values == pytest.approx(mc_until_oracle(mc, ones, g), abs=1e-12)
            assert iters <= n + 2


# ---------------------------------------------------------------------------
# MDP checking


def forced_choice_mdp():
    # state 0: action a -> goal, action b -> sink
    return Mdp(
        states=[None] * 3,
        actions=[["a", "b"], ["stay"], ["stay"]],
        transitions=[[[(1, 1.0)], [(2, 1.0)]], [[(1, 1.0)]], [[(2, 1.0)]]],
        initial=0,
        labels=[frozenset(), frozenset({"g"}), frozenset()],
    ).validate()


class TestCheckMdp:
    def test_forced_choice(self):
        mdp = forced_choice_mdp()
        f = parse('P=? [ F "g" ]')
        assert check_mdp(mdp, f, "max").initial_probability == 1.0
        assert check_mdp(mdp, f, "min").initial_probability == 0.0

    def test_singleton_actions_degenerate_to_mc(self):
        rng = np.random.default_rng(5)
        for _ in range(10):
            mdp = random_mdp(rng, max_actions=1)
            mc = mdp.as_chain_if_deterministic()
            assert mc is not None
            f = parse('P=? [ F "g" ]')
            expected = check_mc(mc.validate(), f).values
            for direction in ("max", "min"):
                got = check_mdp(mdp, f, direction).values
                assert got == pytest.approx(expected, abs=1e-10)

    def test_random_models_match_policy_enumeration(self):
        rng = np.random.default_rng(6)
        for _ in range(25):
            mdp = random_mdp(rng)
            g = label_vector(mdp, "g")
            h = label_vector(mdp, "h")
            sat1 = ~h | g
            for direction in ("max", "min"):
                values, _, _, _ = mdp_prob_until(mdp, sat1, g, direction)
                oracle = mdp_reach_oracle(mdp, sat1, g, direction)
                assert values == pytest.approx(oracle, abs=1e-10)

    def test_bounded_matches_step_dependent_oracle(self):
        rng = np.random.default_rng(7)
        f_template = 'P=? [ "a" U<=%d "g" ]'
        for _ in range(15):
            mdp = random_mdp(rng)
            # label everything "a" so the transit set is rich
            mdp.labels = [l | {"a"} for l in mdp.labels]
            for k in (0, 1, 2, 4):
                for direction in ("max", "min"):
                    res = check_mdp(mdp, parse(f_template % k), direction)
                    g = label_vector(mdp, "g")
                    ones = np.ones(mdp.n, dtype=bool)
                    oracle = mdp_bounded_oracle(mdp, ones, g, k, direction)
                    assert res.values == pytest.approx(oracle, abs=1e-10)

    def test_next_matches_oracle(self):
        rng = np.random.default_rng(8)
        for _ in range(15):
            mdp = random_mdp(rng)
            g = label_vector(mdp, "g")
            for direction in ("max", "min"):
                res = check_mdp(mdp, parse('P=? [ X "g" ]'), direction)
                assert res.values == pytest.approx(
                    mdp_next_oracle(mdp, g, direction), abs=1e-12)

    def test_policy_avoids_value_preserving_cycle(self):
        # state 0: action 0 cycles via state 1, action 1 is the fair coin;
        # both have value 0.5, so naive lowest-index extraction would stall
        mdp = Mdp(
            states=[None] * 4,
            actions=[["cycle", "coin"], ["back"], ["stay"], ["stay"]],
            transitions=[
                [[(1, 1.0)], [(2, 0.5), (3, 0.5)]],
                [[(0, 1.0)]],
                [[(2, 1.0)]],
                [[(3, 1.0)]],
            ],
            initial=0,
            labels=[frozenset(), frozenset(), frozenset({"g"}), frozenset()],
        ).validate()
        g = label_vector(mdp, "g")
        ones = np.ones(4, dtype=bool)
        values, _, _, policy = mdp_prob_until(mdp, ones, g, "max")
        assert values[0] == pytest.approx(0.5, abs=1e-10)
        # induced chain must actually attain the value
        from oracles import induced_chain, mc_until_oracle
        induced = induced_chain(mdp, policy)
        attained = mc_until_oracle(induced, ones, g)
        assert attained[0] == pytest.approx(0.5, abs=1e-10)

    def test_extracted_policies_attain_values(self):
        from oracles import induced_chain
        rng = np.random.default_rng(9)
        for _ in range(25):
            mdp = random_mdp(rng)
            g = label_vector(mdp, "g")
            ones = np.ones(mdp.n, dtype=bool)
            for direction in ("max", "min"):
                values, _, _, policy = mdp_prob_until(mdp, ones, g, direction)
                attained = mc_until_oracle(induced_chain(mdp, policy), ones, g)
                assert attained == pytest.approx(values, abs=1e-8)

    def test_duality_min_reach_vs_max_avoid(self):
        # min P(F T) = 1 - max P(avoiding T forever)
        rng = np.random.default_rng(10)
        for _ in range(15):
            mdp = random_mdp(rng)
            target = label_vector(mdp, "g")
            not_t = ~target
            vmin, _, _, _ = mdp_prob_until(
                mdp, np.ones(mdp.n, dtype=bool), target, "min")
            # largest closed sub-MDP inside ~T: from there some policy
            # avoids T forever
            closed = not_t.copy()
            changed = True
            while changed:
                changed = False
                for s in range(mdp.n):
                    if closed[s] and not any(
                            all(closed[d] for d, p in dist if p > 0)
                            for dist in mdp.transitions[s]):
                        closed[s] = False
                        changed = True
            vavoid, _, _, _ = mdp_prob_until(mdp, not_t, closed, "max")
            assert vmin == pytest.approx(1.0 - vavoid, abs=1e-8)

    def test_invalid_direction(self):
        with pytest.raises(ValueError):
            check_mdp(forced_choice_mdp(), parse('P=? [ F "g" ]'), "sideways")
