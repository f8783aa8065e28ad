"""Pairwise deviations with side payments.

A profile is unstable when two agents can switch strategies together and
settle with a transfer so both strictly gain.  With transferable utility
that happens exactly when their payoff sum at the deviation strictly exceeds
their sum at the profile.
"""
from __future__ import annotations

import itertools
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from fractions import Fraction

from .core import BidGrid, Scenario, format_money, payoff, types_at
from .elimination import ALL_WEAK, EliminationPolicy, EliminationState, iterate_elimination
from .mechanisms import AUCTION, NO, Mechanism, Strategy, dedupe, olszewski_outcome


class HypothesisFailed(ValueError):
    pass


class NoEquilibrium(RuntimeError):
    pass


@dataclass(frozen=True)
class DeviationWitness:
    """Agents ``i`` and ``j`` switch to ``s_i``/``s_j``; ``j`` pays ``transfer``
    to ``i`` (negative means ``i`` pays ``j``)."""

    i: int
    j: int
    s_i: Strategy
    s_j: Strategy
    transfer: Fraction
    u_i: Fraction
    u_j: Fraction
    eq_u_i: Fraction
    eq_u_j: Fraction

    def swapped(self) -> "DeviationWitness":
        return DeviationWitness(self.j, self.i, self.s_j, self.s_i, -self.transfer,
                                self.u_j, self.u_i, self.eq_u_j, self.eq_u_i)

    def to_json(self) -> dict:
        return {
            "i": self.i, "j": self.j,
            "s_i": self.s_i.to_json(), "s_j": self.s_j.to_json(),
            "transfer": format_money(self.transfer),
            "u_i": format_money(self.u_i), "u_j": format_money(self.u_j),
            "eq_u_i": format_money(self.eq_u_i), "eq_u_j": format_money(self.eq_u_j),
        }


@dataclass(frozen=True)
class DeviationSearch:
    equilibrium_payoffs: tuple[Fraction, ...]
    best_gain: Fraction | None
    witness: DeviationWitness | None

    @property
    def stable(self) -> bool:
        return self.witness is None


def deviation_strategies(mechanism: Mechanism, grid: Iterable[Fraction]) -> list[Strategy]:
    """All messages on the grid, one per class the mechanism cannot tell apart."""
    seen = {}
    for s in sorted(Strategy(m, b) for m in (NO, AUCTION) for b in grid):
        seen.setdefault(mechanism.effective(s), s)
    return list(seen.values())


def split_surplus(i_dev: Fraction, j_dev: Fraction, i_eq: Fraction, j_eq: Fraction) -> Fraction:
    """Transfer from j to i leaving both with half the joint gain."""
    gain = i_dev + j_dev - i_eq - j_eq
    return i_eq + gain / 2 - i_dev


def deviation_sum_search(mechanism: Mechanism, v: Sequence[Fraction], s: Sequence[Strategy],
                         grid: Iterable[Fraction], *,
                         pairs: Iterable[tuple[int, int]] | None = None,
                         moves: tuple[int, int] | None = None) -> DeviationSearch:
    """Exhaustive search for the pair deviation with the largest joint gain.

    ``moves`` restricts the first-stage moves of the deviating pair.  The
    reported witness is the first maximiser in (pair, s_i, s_j) order.
    """
    k = mechanism.k
    thetas = types_at(v, k)
    s = tuple(s)
    eq = mechanism.outcome(s)
    eq_u = tuple(payoff(eq, t) for t in thetas)
    options = deviation_strategies(mechanism, grid)
    if pairs is None:
        pairs = itertools.combinations(range(1, len(s) + 1), 2)
    best = None
    best_gain = None
    for i, j in pairs:
        base = eq_u[i - 1] + eq_u[j - 1]
        for si in options:
            if moves is not None and si.move != moves[0]:
                continue
            for sj in options:
                if moves is not None and sj.move != moves[1]:
                    continue
                prof = list(s)
                prof[i - 1], prof[j - 1] = si, sj
                out = mechanism.outcome(prof)
                ui, uj = payoff(out, thetas[i - 1]), payoff(out, thetas[j - 1])
                gain = ui + uj - base
                if best_gain is None or gain > best_gain:
                    best_gain, best = gain, (i, j, si, sj, ui, uj)
    if best is None or best_gain <= 0:
        return DeviationSearch(eq_u, best_gain, None)
    i, j, si, sj, ui, uj = best
    t = split_surplus(ui, uj, eq_u[i - 1], eq_u[j - 1])
    return DeviationSearch(eq_u, best_gain, DeviationWitness(
        i, j, si, sj, t, ui + t, uj - t, eq_u[i - 1], eq_u[j - 1]))


def olszewski_bribe_witness(v: Sequence[Fraction], delta: Fraction,
                            epsilon: Fraction) -> DeviationWitness:
    """Both agents say "hers" and bid truthfully; the low agent pays the high
    agent ``delta + epsilon``.  Payoffs are evaluated through the outcome
    function, not from closed forms."""
    v = tuple(Fraction(x) for x in v)
    delta, epsilon = Fraction(delta), Fraction(epsilon)
    if len(v) != 2:
        raise ValueError("the bribe construction is for two agents")
    if epsilon <= 0:
        raise HypothesisFailed("epsilon must be positive")
    hi = 1 if v[0] > v[1] else 2
    lo = 3 - hi
    vi = v[hi - 1]
    if vi - 2 * delta - epsilon <= 0:
        raise HypothesisFailed(
            f"v_i - 2*delta - epsilon = {format_money(vi - 2 * delta - epsilon)} is not positive")
    thetas = types_at(v, 1)
    truthful = (Strategy(AUCTION, v[0]), Strategy(AUCTION, v[1]))
    dev = olszewski_outcome(truthful, delta)
    # equilibrium: high agent says "mine", low agent says "hers"
    eq_prof = [None, None]
    eq_prof[hi - 1] = Strategy(NO, vi)
    eq_prof[lo - 1] = Strategy(AUCTION, v[lo - 1])
    eq = olszewski_outcome(eq_prof, delta)
    t = delta + epsilon
    return DeviationWitness(
        hi, lo, truthful[hi - 1], truthful[lo - 1], t,
        payoff(dev, thetas[hi - 1]) + t, payoff(dev, thetas[lo - 1]) - t,
        payoff(eq, thetas[hi - 1]), payoff(eq, thetas[lo - 1]))


def witness_holds(w: DeviationWitness) -> bool:
    return w.u_i > w.eq_u_i and w.u_j > w.eq_u_j


@dataclass
class ProfileStability:
    profile: tuple[Fraction, ...]
    equilibria: int
    stable: bool
    equilibrium: tuple[Strategy, ...]
    equilibrium_payoffs: tuple[Fraction, ...]
    witness: DeviationWitness | None = None

    def to_json(self) -> dict:
        return {
            "profile": [format_money(x) for x in self.profile],
            "equilibria_checked": self.equilibria,
            "stable": self.stable,
            "equilibrium": [s.to_json() for s in self.equilibrium],
            "equilibrium_payoffs": [format_money(x) for x in self.equilibrium_payoffs],
            "witness": None if self.witness is None else self.witness.to_json(),
        }


@dataclass
class StabilityReport:
    mechanism: str
    profiles: list[ProfileStability]

    @property
    def stable(self) -> bool:
        return all(p.stable for p in self.profiles)

    def to_json(self) -> dict:
        return {
            "mechanism": self.mechanism,
            "stable": self.stable,
            "profiles": [p.to_json() for p in self.profiles],
        }


def verify_pairwise_stability(mechanism: str | Mechanism, scenario: Scenario,
                              policy: EliminationPolicy = ALL_WEAK, *,
                              state: EliminationState | None = None,
                              grid: BidGrid | Iterable | None = None,
                              profiles: Sequence[Sequence[Fraction]] | None = None,
                              **kwargs) -> StabilityReport:
    """Search every surviving equilibrium at every profile of Q.

    Equilibria that differ only in messages the mechanism ignores (bids
    attached to "no") are checked once.
    """
    if state is None:
        state = iterate_elimination(scenario, mechanism, policy, grid=grid, **kwargs)
    mech = state.model.mechanism
    grid = state.model.grid if grid is None else grid
    out = []
    for v in (scenario.profiles if profiles is None else profiles):
        sets = [state.surviving[t] for t in types_at(v, scenario.k)]
        if any(not s for s in sets):
            raise NoEquilibrium(f"an agent has no surviving strategy at {tuple(v)}")
        reduced = [dedupe(ss, mech.effective) for ss in sets]
        first = None
        count = 0
        for prof in itertools.product(*reduced):
            count += 1
            res = deviation_sum_search(mech, v, prof, grid)
            if first is None or (first[1].stable and not res.stable):
                first = (prof, res)
        prof, res = first
        out.append(ProfileStability(tuple(v), count, res.stable, prof,
                                    res.equilibrium_payoffs, res.witness))
    return StabilityReport(mech.name, out)
