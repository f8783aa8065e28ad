"""Outcome functions and payoff tables for the three mechanisms.

* ``solomon`` -- opt-in stage followed, when at least k+1 agents opt in, by a
  (k+1)st-price auction in which every participant pays the fee delta.
* ``olszewski`` -- two agents say "hers" (move 1) or "mine" (move 0); "hers"
  from both leads to a second-price auction where each pays delta and the
  loser receives the winner's bid.
* ``plain-kplus1`` -- everybody is in a fee-free (k+1)st-price auction.

Outcomes depend on messages only.  Valuations enter through
:func:`entryfee.core.payoff`.
"""
from __future__ import annotations

import itertools
from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from fractions import Fraction

from .core import AgentType, Allocation, Scenario, format_money, parse_money, payoff

NO = 0
AUCTION = 1
ZERO = Fraction(0)


class MechanismError(ValueError):
    pass


class TooFewParticipants(MechanismError):
    pass


class ArityError(MechanismError):
    pass


@dataclass(frozen=True, order=True)
class Strategy:
    """A message ``(move, bid)``; the bid only matters if an auction is held."""

    move: int
    bid: Fraction

    def __post_init__(self):
        if self.move not in (NO, AUCTION):
            raise ValueError(f"move must be 0 or 1, got {self.move!r}")
        if not isinstance(self.bid, Fraction):
            object.__setattr__(self, "bid", parse_money(self.bid))

    def __str__(self) -> str:
        return f"({self.move},{format_money(self.bid)})"

    def to_json(self) -> list:
        return [self.move, format_money(self.bid)]


@dataclass(frozen=True)
class AuctionResult:
    participants: frozenset[int]
    winners: frozenset[int]
    clearing_price: Fraction
    fee: Fraction


@dataclass(frozen=True)
class FinalAllocation:
    allocation: Allocation


@dataclass(frozen=True)
class GoToAuction:
    participants: frozenset[int]


def named_order(bids: Mapping[int, Fraction]) -> list[int]:
    """Agents sorted by bid, highest first, ties to the lowest agent number."""
    return sorted(bids, key=lambda i: (-bids[i], i))


def solomon_stage1_resolve(moves: Sequence[int], k: int) -> FinalAllocation | GoToAuction:
    sayers = frozenset(i for i, m in enumerate(moves, 1) if m == AUCTION)
    if len(sayers) >= k + 1:
        return GoToAuction(sayers)
    n = len(moves)
    x = tuple(1 if i in sayers else 0 for i in range(1, n + 1))
    return FinalAllocation(Allocation(x, (ZERO,) * n))


def solomon_stage2_outcome(participants, bids: Mapping[int, Fraction], k: int,
                           delta: Fraction, n: int) -> Allocation:
    participants = frozenset(participants)
    if len(participants) < k + 1:
        raise TooFewParticipants(f"{len(participants)} participants, need at least {k + 1}")
    if set(bids) != participants:
        raise MechanismError("bids must cover exactly the participants")
    order = named_order(bids)
    winners = frozenset(order[:k])
    price = bids[order[k]]
    x, y = [0] * n, [ZERO] * n
    for i in participants:
        if i in winners:
            x[i - 1], y[i - 1] = 1, -(price + delta)
        else:
            y[i - 1] = -delta
    return Allocation(tuple(x), tuple(y), AuctionResult(participants, winners, price, delta))


def solomon_outcome(profile: Sequence[Strategy], k: int, delta: Fraction) -> Allocation:
    stage1 = solomon_stage1_resolve([s.move for s in profile], k)
    if isinstance(stage1, FinalAllocation):
        return stage1.allocation
    bids = {i: profile[i - 1].bid for i in stage1.participants}
    return solomon_stage2_outcome(stage1.participants, bids, k, delta, len(profile))


def olszewski_outcome(profile: Sequence[Strategy], delta: Fraction) -> Allocation:
    """Move 1 is "hers", move 0 is "mine".  Equal bids go to agent 1."""
    if len(profile) != 2:
        raise ArityError(f"Olszewski's mechanism is defined for two agents, got {len(profile)}")
    s1, s2 = profile
    if s1.move == NO and s2.move == NO:
        return Allocation((0, 0), (ZERO, ZERO))
    if s1.move != s2.move:
        return Allocation((1, 0) if s1.move == NO else (0, 1), (ZERO, ZERO))
    winner = 1 if s1.bid >= s2.bid else 2
    win_bid = profile[winner - 1].bid
    x = (1, 0) if winner == 1 else (0, 1)
    y = tuple(-delta if i == winner else win_bid - delta for i in (1, 2))
    result = AuctionResult(frozenset({1, 2}), frozenset({winner}), win_bid, delta)
    return Allocation(x, y, result)


def plain_auction_outcome(bids: Sequence[Fraction], k: int) -> Allocation:
    """Mandatory (k+1)st-price auction without fees."""
    n = len(bids)
    named = {i: Fraction(b) for i, b in enumerate(bids, 1)}
    order = named_order(named)
    winners = frozenset(order[:k])
    price = named[order[k]]
    x = tuple(1 if i in winners else 0 for i in range(1, n + 1))
    y = tuple(-price if i in winners else ZERO for i in range(1, n + 1))
    return Allocation(x, y, AuctionResult(frozenset(named), winners, price, ZERO))


# -- payoff tables ----------------------------------------------------------
#
# A payoff table for agent i lists i's payoff for each own strategy against
# a list of opponent "situations".  A situation stands for a class of
# opponent profiles that give i the same payoff for every own strategy; each
# carries one concrete representative opponent profile.  ``components`` is
# the union-of-products form of a belief set: one entry per consistent
# opponent type tuple, each holding the opponents' strategy sets in agent
# order.

Components = Sequence[Sequence[Sequence[Strategy]]]


def insert(own: Strategy, agent: int, opponents: Sequence[Strategy]) -> tuple[Strategy, ...]:
    return tuple(opponents[:agent - 1]) + (own,) + tuple(opponents[agent - 1:])


class Mechanism:
    name = ""

    def __init__(self, n: int, k: int, delta: Fraction):
        self.n, self.k, self.delta = n, k, Fraction(delta)

    @classmethod
    def for_scenario(cls, scenario: Scenario) -> "Mechanism":
        return cls(scenario.n, scenario.k, scenario.delta)

    def outcome(self, profile: Sequence[Strategy]) -> Allocation:
        raise NotImplementedError

    def effective(self, s: Strategy):
        """Key under which strategies are interchangeable for every agent."""
        return (s.move, s.bid if s.move == AUCTION else None)

    def situations(self, agent: int, components: Components) -> dict:
        """Map situation key -> representative opponent profile (by brute force)."""
        found = {}
        for comp in components:
            reduced = [dedupe(opts, self.effective) for opts in comp]
            for combo in itertools.product(*reduced):
                found.setdefault(tuple(self.effective(s) for s in combo), combo)
        return found

    def situation_payoff(self, own: Strategy, key, rep, theta: AgentType) -> Fraction:
        return payoff(self.outcome(insert(own, theta.agent, rep)), theta)

    def payoff_table(self, theta: AgentType, own: Sequence[Strategy], components: Components):
        """Return ``(representatives, rows)`` with ``rows[s][c]`` the payoff of
        ``s`` against situation ``c``."""
        found = self.situations(theta.agent, components)
        keys = list(found)
        reps = [found[key] for key in keys]
        rows = {s: tuple(self.situation_payoff(s, key, rep, theta) for key, rep in zip(keys, reps))
                for s in own}
        return reps, rows


def dedupe(options, key) -> list:
    """First strategy (in sorted order) of each ``key`` class."""
    seen = {}
    for s in sorted(options):
        seen.setdefault(key(s), s)
    return list(seen.values())


def _beats(a: tuple[Fraction, int], b: tuple[Fraction, int]) -> bool:
    """Named bid ``a`` ranks ahead of named bid ``b``."""
    return a[0] > b[0] or (a[0] == b[0] and a[1] < b[1])


def kth_named_bid_situations(agent: int, k: int, components: Components,
                             bid_of=lambda s: s.bid, participates=lambda s: s.move == AUCTION):
    """Situations for auctions where agent i's payoff only depends on the
    k-th best opponent named bid.

    Keys are ``None`` (fewer than k opponents take part) or
    ``(bid, holder_ranks_above_i_on_ties)``.
    """
    found = {}
    for comp in components:
        opps = [a for a in range(1, len(comp) + 2) if a != agent]
        options = []
        for a, opts in zip(opps, comp):
            bids = {}
            no = None
            for s in sorted(opts):
                if participates(s):
                    bids.setdefault(bid_of(s), s)
                elif no is None:
                    no = s
            options.append((a, sorted(bids.items()), no))

        forced = [a for a, bids, no in options if no is None]
        if len(forced) <= k - 1:
            rep = tuple(no if no is not None else bids[0][1] for a, bids, no in options)
            found.setdefault(None, rep)

        for pos, (j, jbids, _) in enumerate(options):
            for beta, sj in jbids:
                pivot = (beta, j)
                above_only, both, choices = [], [], []
                ok = True
                for a, bids, no in options:
                    if a == j:
                        continue
                    up = next((s for b, s in bids if _beats((b, a), pivot)), None)
                    down = no if no is not None else next(
                        (s for b, s in bids if _beats(pivot, (b, a))), None)
                    if up is None and down is None:
                        ok = False
                        break
                    choices.append((a, up, down))
                    if down is None:
                        above_only.append(a)
                    elif up is not None:
                        both.append(a)
                need = k - 1 - len(above_only)
                if not ok or need < 0 or need > len(both):
                    continue
                lift = set(above_only) | set(both[:need])
                rep = []
                for a, up, down in choices:
                    rep.append(up if a in lift else down)
                rep.insert(pos, sj)
                found.setdefault((beta, j < agent), tuple(rep))
    return found


def _sorted_situations(found: dict) -> dict:
    keys = sorted(found, key=lambda key: (key is not None, key or (ZERO, False)))
    return {key: found[key] for key in keys}


def _wins(bid: Fraction, key) -> bool:
    beta, holder_first = key
    return bid > beta or (bid == beta and not holder_first)


class Solomon(Mechanism):
    name = "solomon"

    def outcome(self, profile):
        return solomon_outcome(profile, self.k, self.delta)

    def situations(self, agent, components):
        return _sorted_situations(kth_named_bid_situations(agent, self.k, components))

    def situation_payoff(self, own, key, rep, theta):
        if own.move == NO:
            return ZERO
        if key is None:
            return theta.valuation
        if _wins(own.bid, key):
            return theta.valuation - key[0] - self.delta
        return -self.delta


class PlainKPlus1(Mechanism):
    name = "plain-kplus1"

    def outcome(self, profile):
        return plain_auction_outcome([s.bid for s in profile], self.k)

    def effective(self, s):
        return s.bid

    def situations(self, agent, components):
        return _sorted_situations(kth_named_bid_situations(
            agent, self.k, components, participates=lambda s: True))

    def situation_payoff(self, own, key, rep, theta):
        if _wins(own.bid, key):
            return theta.valuation - key[0]
        return ZERO


class Olszewski(Mechanism):
    name = "olszewski"

    def __init__(self, n, k, delta):
        if n != 2 or k != 1:
            raise ArityError(f"Olszewski's mechanism needs n=2, k=1, got n={n}, k={k}")
        super().__init__(n, k, delta)

    def outcome(self, profile):
        return olszewski_outcome(profile, self.delta)


MECHANISMS = {cls.name: cls for cls in (Solomon, Olszewski, PlainKPlus1)}


def get_mechanism(name: str | Mechanism, scenario: Scenario) -> Mechanism:
    if isinstance(name, Mechanism):
        return name
    try:
        cls = MECHANISMS[name]
    except KeyError:
        raise MechanismError(f"unknown mechanism {name!r}; choose from {sorted(MECHANISMS)}") from None
    return cls.for_scenario(scenario)
