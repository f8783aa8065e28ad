import itertools
from fractions import Fraction as F

import pytest
from hypothesis import given, settings, strategies as st

from entryfee.core import AgentType, choice_function, payoff
from entryfee.mechanisms import (AUCTION, NO, ArityError, FinalAllocation, GoToAuction,
                                 Mechanism, MechanismError, Olszewski, PlainKPlus1, Solomon, Strategy,
                                 TooFewParticipants, get_mechanism, named_order,
                                 olszewski_outcome, plain_auction_outcome, solomon_outcome,
                                 solomon_stage1_resolve, solomon_stage2_outcome, insert)

from conftest import scenario


def S(move, bid):
    return Strategy(move, F(bid))


class TestStage1:
    def test_two_sayers_go_to_auction(self):
        assert solomon_stage1_resolve((1, 1, 0), 1) == GoToAuction(frozenset({1, 2}))

    def test_single_sayer_gets_it_free(self):
        res = solomon_stage1_resolve((1, 0, 0), 1)
        assert isinstance(res, FinalAllocation)
        assert res.allocation.x == (1, 0, 0) and res.allocation.y == (0, 0, 0)

    def test_nobody(self):
        res = solomon_stage1_resolve((0, 0, 0), 1)
        assert res.allocation.x == (0, 0, 0) and res.allocation.y == (0, 0, 0)

    def test_exactly_k_sayers(self):
        res = solomon_stage1_resolve((1, 0, 1, 0), 2)
        assert res.allocation.x == (1, 0, 1, 0)


class TestStage2:
    def test_single_object(self):
        out = solomon_stage2_outcome({1, 2, 3}, {1: F(5), 2: F(3), 3: F(2)}, 1, F(1, 2), 3)
        assert out.x == (1, 0, 0)
        assert out.y == (F(-7, 2), F(-1, 2), F(-1, 2))
        assert out.auction.clearing_price == 3

    def test_tie_goes_to_lower_index(self):
        bids = {1: F(5), 2: F(5), 3: F(2)}
        assert named_order(bids) == [1, 2, 3]
        out = solomon_stage2_outcome({1, 2, 3}, bids, 1, F(1, 2), 3)
        assert out.x == (1, 0, 0) and out.y[:2] == (F(-11, 2), F(-1, 2))

    def test_two_objects(self):
        out = solomon_stage2_outcome({1, 2, 3}, {1: F(4), 2: F(7), 3: F(6)}, 2, F(1), 3)
        assert out.x == (0, 1, 1) and out.y == (F(-1), F(-5), F(-5))

    def test_too_few(self):
        with pytest.raises(TooFewParticipants):
            solomon_stage2_outcome({1}, {1: F(4)}, 1, F(1), 3)

    def test_bids_must_match_participants(self):
        with pytest.raises(MechanismError):
            solomon_stage2_outcome({1, 2}, {1: F(4), 3: F(1)}, 1, F(1), 3)


class TestSolomonOutcome:
    def test_single_sayer(self):
        out = solomon_outcome((S(1, 10), S(0, 3)), 1, F(1))
        assert out.x == (1, 0) and out.y == (0, 0)

    def test_auction(self):
        out = solomon_outcome((S(1, 10), S(1, 3)), 1, F(1))
        assert out.x == (1, 0) and out.y == (F(-4), F(-1))

    def test_nobody(self):
        out = solomon_outcome((S(0, 7), S(0, 3)), 1, F(1))
        assert out.x == (0, 0) and out.y == (0, 0)


class TestOlszewski:
    def test_both_hers(self):
        out = olszewski_outcome((S(1, 10), S(1, 3)), F(1))
        assert out.x == (1, 0) and out.y == (F(-1), F(9))
        assert payoff(out, AgentType(1, F(10), True)) == 9
        assert payoff(out, AgentType(2, F(3), False)) == 9

    def test_hers_mine(self):
        out = olszewski_outcome((S(1, 10), S(0, 3)), F(1))
        assert out.x == (0, 1) and out.y == (0, 0)
        assert payoff(out, AgentType(2, F(3), False)) == 3

    def test_both_mine(self):
        out = olszewski_outcome((S(0, 10), S(0, 3)), F(1))
        assert out.x == (0, 0) and out.y == (0, 0)

    def test_tie_goes_to_agent_one(self):
        out = olszewski_outcome((S(1, 4), S(1, 4)), F(1))
        assert out.x == (1, 0)

    def test_arity(self):
        with pytest.raises(ArityError):
            olszewski_outcome((S(1, 1),) * 3, F(1))
        with pytest.raises(ArityError):
            Olszewski(3, 1, F(1))


class TestPlain:
    def test_vickrey(self):
        out = plain_auction_outcome((F(10), F(3)), 1)
        assert out.x == (1, 0) and out.y == (F(-3), 0)

    def test_differs_from_choice(self):
        assert plain_auction_outcome((F(10), F(3)), 1) != choice_function((F(10), F(3)), 1)

    def test_two_objects(self):
        out = plain_auction_outcome((F(4), F(7), F(6)), 2)
        assert out.x == (0, 1, 1) and out.y == (0, F(-4), F(-4))


def test_get_mechanism():
    sc = scenario(2, 1, 1, [(10, 3)])
    assert isinstance(get_mechanism("solomon", sc), Solomon)
    assert isinstance(get_mechanism("plain-kplus1", sc), PlainKPlus1)
    assert isinstance(get_mechanism("olszewski", sc), Olszewski)
    with pytest.raises(MechanismError):
        get_mechanism("vcg", sc)


def test_strategy_coerces_and_prints():
    s = Strategy(1, "7/2")
    assert s.bid == F(7, 2) and str(s) == "(1,3.5)" and s.to_json() == [1, "3.5"]
    with pytest.raises(ValueError):
        Strategy(2, F(1))


# -- properties ----------------------------------------------------------------

money = st.fractions(min_value=0, max_value=30, max_denominator=4)
pos_delta = st.fractions(min_value=F(1, 4), max_value=5, max_denominator=4)


@given(v=st.tuples(money, money), b=st.lists(money, min_size=2, max_size=2, unique=True),
       delta=pos_delta, swap=st.booleans())
def test_olszewski_table(v, b, delta, swap):
    bi, bj = max(b), min(b)
    # agent i is 1 or 2; the table is written from i's row
    i = 2 if swap else 1
    j = 3 - i
    vi, vj = v
    th = {i: AgentType(i, vi, True), j: AgentType(j, vj, False)}

    def cell(mi, mj):
        prof = [None, None]
        prof[i - 1], prof[j - 1] = Strategy(mi, bi), Strategy(mj, bj)
        out = olszewski_outcome(prof, delta)
        return payoff(out, th[i]), payoff(out, th[j])

    assert cell(AUCTION, AUCTION) == (vi - delta, bi - delta)
    assert cell(AUCTION, NO) == (0, vj)
    assert cell(NO, AUCTION) == (vi, 0)
    assert cell(NO, NO) == (0, 0)


strategies = st.builds(Strategy, st.sampled_from([NO, AUCTION]), st.integers(0, 6).map(F))


@given(st.integers(1, 3).flatmap(
    lambda k: st.tuples(st.just(k), st.lists(strategies, min_size=k + 1, max_size=5))),
    pos_delta)
def test_solomon_feasibility_and_revenue(kp, delta):
    k, prof = kp
    out = solomon_outcome(prof, k, delta)
    movers = [i for i, s in enumerate(prof, 1) if s.move == AUCTION]
    if out.auction is None:
        assert all(y == 0 for y in out.y)
        assert sum(out.x) == len(movers) <= k
        return
    a = out.auction
    assert len(a.winners) == k and a.winners <= a.participants == frozenset(movers)
    assert all(out.y[i - 1] <= -delta for i in a.participants)
    revenue = -sum(out.y)
    assert revenue == len(a.participants) * delta + k * a.clearing_price
    assert revenue > 0


@given(st.lists(st.integers(0, 4).map(F), min_size=3, max_size=5), st.integers(1, 2),
       st.randoms(use_true_random=False))
def test_equal_bids_permuted_keep_winners(bids, k, rnd):
    named = dict(enumerate(bids, 1))
    winners = set(named_order(named)[:k])
    # permute the bid values among agents holding equal bids
    shuffled = dict(named)
    for value in set(bids):
        holders = [i for i in named if named[i] == value]
        perm = holders[:]
        rnd.shuffle(perm)
        for a, b in zip(holders, perm):
            shuffled[b] = named[a]
    assert set(named_order(shuffled)[:k]) == winners


@given(st.lists(st.integers(0, 30).map(F), min_size=2, max_size=5, unique=True), st.integers(1, 3))
def test_plain_truthful_never_implements(v, k):
    if k >= len(v):
        return
    out = plain_auction_outcome(v, k)
    order = sorted(range(1, len(v) + 1), key=lambda i: -v[i - 1])
    assert {i for i in range(1, len(v) + 1) if out.x[i - 1]} == set(order[:k])
    f = choice_function(tuple(v), k)
    assert out.x == f.x
    if v[order[k] - 1] > 0:
        assert out != f


# -- situation tables against brute force ------------------------------------

def strategy_sets(n_max=4):
    s = st.frozensets(strategies, min_size=1, max_size=3)
    return st.integers(2, n_max).flatmap(
        lambda n: st.tuples(st.just(n), st.integers(1, n - 1), st.integers(1, n),
                            st.lists(st.lists(s, min_size=n - 1, max_size=n - 1),
                                     min_size=1, max_size=2)))


@settings(max_examples=200, deadline=None)
@given(strategy_sets(), st.sampled_from([Solomon, PlainKPlus1]), st.integers(0, 8).map(F))
def test_fast_situations_match_brute_force(data, cls, value):
    n, k, agent, components = data
    mech = cls(n, k, F(1))
    theta = AgentType(agent, value, False)
    own = sorted(Strategy(m, F(b)) for m in (NO, AUCTION) for b in range(0, 7))
    reps, rows = mech.payoff_table(theta, own, components)
    brute = Mechanism.situations(mech, agent, components)
    brute_cols = {tuple(payoff(mech.outcome(insert(s, agent, rep)), theta) for s in own)
                  for rep in brute.values()}
    fast_cols = {tuple(rows[s][c] for s in own) for c in range(len(reps))}
    assert fast_cols == brute_cols
    # every representative is a real opponent profile of some component
    for rep in reps:
        assert any(all(x in opts for x, opts in zip(rep, comp)) for comp in components)
        for s in own:
            direct = payoff(mech.outcome(tuple(rep[:agent - 1]) + (s,) + tuple(rep[agent - 1:])), theta)
            assert direct in {rows[s][c] for c in range(len(reps))}


def test_situation_rows_agree_with_outcome_exactly():
    mech = Solomon(3, 1, F(1))
    theta = AgentType(2, F(10), True)
    comp = [[S(0, 0), S(1, 3)], [S(1, 3), S(1, 5)]]
    own = [S(0, 0), S(1, 3), S(1, 4), S(1, 10)]
    reps, rows = mech.payoff_table(theta, own, [comp])
    for c, rep in enumerate(reps):
        for s in own:
            full = (rep[0], s, rep[1])
            assert rows[s][c] == payoff(mech.outcome(full), theta)
    # opponents (1,3),(1,3) give agent 2 a loss at bid 3 since agent 1 holds the tie
    assert any(rows[S(1, 3)][c] == -1 for c in range(len(reps)))


def test_effective_classes():
    assert Solomon(2, 1, F(1)).effective(S(0, 3)) == Solomon(2, 1, F(1)).effective(S(0, 9))
    assert PlainKPlus1(2, 1, F(1)).effective(S(0, 3)) == PlainKPlus1(2, 1, F(1)).effective(S(1, 3))
    assert len({Solomon(2, 1, F(1)).effective(s)
                for s in itertools.product([0, 1], [F(1), F(2)]) for s in [Strategy(*s)]}) == 3
