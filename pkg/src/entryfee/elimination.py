"""Iterated elimination of weakly dominated strategies, type by type.

Each round reads a frozen snapshot of the previous round's surviving sets.
For every agent type in scope it removes all strategies that are weakly
dominated, within the type's own surviving set, against the opponent
profiles the type considers possible: the union, over opponent type tuples
consistent with Q, of the products of the opponents' surviving sets.
"""
from __future__ import annotations

import itertools
import random
from collections.abc import Iterable, Sequence
from concurrent.futures import Executor, ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

from .core import (AgentType, Allocation, BidGrid, Scenario, agent_types, belief_set,
                   build_bid_grid, choice_function, format_money, types_at)
from .mechanisms import AUCTION, NO, Mechanism, Strategy, get_mechanism, insert


class EmptyBeliefs(ValueError):
    pass


@dataclass(frozen=True)
class EliminationPolicy:
    """``all-weak`` everywhere, or the first round restricted to ``agents``."""

    variant: str = "all-weak"
    agents: frozenset[int] = frozenset()

    def __post_init__(self):
        if self.variant not in ("all-weak", "restricted"):
            raise ValueError(f"unknown policy variant {self.variant!r}")
        if self.variant == "restricted" and (not self.agents or min(self.agents) < 1):
            raise ValueError("a restricted policy needs a non-empty list of agents numbered from 1")

    @classmethod
    def parse(cls, text: str) -> "EliminationPolicy":
        if text == "all-weak":
            return cls()
        head, sep, tail = text.partition(":")
        if head != "restricted" or not sep:
            raise ValueError(f"policy must be 'all-weak' or 'restricted:AGENTS', got {text!r}")
        try:
            agents = frozenset(int(a) for a in tail.split(",") if a.strip())
        except ValueError:
            raise ValueError(f"bad agent list in policy {text!r}") from None
        return cls("restricted", agents)

    def scope(self, round_: int) -> frozenset[int] | None:
        """Agents eliminating in ``round_``; None means everybody."""
        if self.variant == "restricted" and round_ == 1:
            return self.agents
        return None

    def __str__(self) -> str:
        if self.variant == "all-weak":
            return "all-weak"
        return "restricted:" + ",".join(str(a) for a in sorted(self.agents))


ALL_WEAK = EliminationPolicy()


@dataclass(frozen=True)
class BeliefSet:
    """Opponent strategy profiles a type regards as possible, kept as a union
    of products: one component per consistent opponent type tuple."""

    agent: int
    type_tuples: tuple[tuple[AgentType, ...], ...]
    components: tuple[tuple[tuple[Strategy, ...], ...], ...]

    def __iter__(self):
        seen = set()
        for comp in self.components:
            for prof in itertools.product(*comp):
                if prof not in seen:
                    seen.add(prof)
                    yield prof

    def __contains__(self, prof) -> bool:
        prof = tuple(prof)
        return any(all(s in opts for s, opts in zip(prof, comp)) for comp in self.components)

    def is_empty(self) -> bool:
        return not self.components or all(any(not opts for opts in c) for c in self.components)

    def issubset(self, other: "BeliefSet") -> bool:
        return all(p in other for p in self)


@dataclass(frozen=True)
class Dominated:
    dominator: Strategy
    strict: bool
    witness: tuple[Strategy, ...] | None = None


@dataclass(frozen=True, order=True)
class EliminationRecord:
    round: int
    type: AgentType
    eliminated: Strategy
    dominator: Strategy
    strict: bool
    witness: tuple[Strategy, ...] | None = None

    @property
    def agent(self) -> int:
        return self.type.agent

    def to_json(self) -> dict:
        return {
            "round": self.round,
            "agent": self.agent,
            "type": self.type.to_json(),
            "eliminated": self.eliminated.to_json(),
            "dominator": self.dominator.to_json(),
            "strict": self.strict,
            "witness": None if self.witness is None else [s.to_json() for s in self.witness],
        }


Surviving = dict  # AgentType -> tuple[Strategy, ...] (sorted)


@dataclass
class EliminationModel:
    """Everything the rounds need besides the surviving sets."""

    scenario: Scenario
    mechanism: Mechanism
    grid: BidGrid
    opponents: dict[AgentType, tuple[tuple[AgentType, ...], ...]]

    @classmethod
    def build(cls, scenario: Scenario, mechanism: str | Mechanism = "solomon",
              grid: BidGrid | Iterable | None = None) -> "EliminationModel":
        mech = get_mechanism(mechanism, scenario)
        if grid is None:
            grid = build_bid_grid(scenario)
        elif not isinstance(grid, BidGrid):
            grid = BidGrid(tuple(sorted(set(Fraction(b) for b in grid))))
        opponents = {}
        for ts in agent_types(scenario).values():
            for t in ts:
                opponents[t] = tuple(sorted(belief_set(scenario, t)))
        return cls(scenario, mech, grid, opponents)

    @property
    def types(self) -> list[AgentType]:
        return sorted(self.opponents)

    def strategies(self) -> tuple[Strategy, ...]:
        return tuple(Strategy(m, b) for m in (NO, AUCTION) for b in self.grid)

    def beliefs(self, theta: AgentType, surviving: Surviving) -> BeliefSet:
        comps = tuple(tuple(surviving[t] for t in tt) for tt in self.opponents[theta])
        return BeliefSet(theta.agent, self.opponents[theta], comps)


@dataclass
class EliminationState:
    round: int
    surviving: Surviving
    trace: list[EliminationRecord] = field(default_factory=list)
    history: list[Surviving] = field(default_factory=list)
    model: EliminationModel | None = None

    @property
    def last_eliminating_round(self) -> int:
        return max((r.round for r in self.trace), default=0)

    @property
    def beliefs(self) -> dict[AgentType, BeliefSet]:
        return {t: self.model.beliefs(t, self.surviving) for t in self.surviving}

    def beliefs_at(self, theta: AgentType, round_: int) -> BeliefSet:
        return self.model.beliefs(theta, self.history[round_])

    def records(self, round_: int | None = None) -> list[EliminationRecord]:
        return [r for r in self.trace if round_ is None or r.round == round_]

    def eliminating_rounds(self) -> list[int]:
        return sorted({r.round for r in self.trace})


def initial_state(model: EliminationModel) -> EliminationState:
    full = model.strategies()
    surviving = {t: full for t in model.types}
    return EliminationState(0, surviving, [], [surviving], model)


def find_dominator(s: Strategy, candidates: Sequence[Strategy], rows: dict,
                   reps: Sequence) -> Dominated | None:
    """First strict dominator of ``s`` in ``candidates`` order, else the
    first weak one, else None."""
    mine = rows[s]
    weak = None
    for c in candidates:
        if c == s:
            continue
        theirs = rows[c]
        if not all(a >= b for a, b in zip(theirs, mine)):
            continue
        gains = [a > b for a, b in zip(theirs, mine)]
        if all(gains):
            return Dominated(c, True, None)
        if weak is None and any(gains):
            weak = Dominated(c, False, reps[gains.index(True)])
    return weak


def is_weakly_dominated(s: Strategy, candidates: Iterable[Strategy], beliefs: BeliefSet,
                        theta: AgentType, mechanism: Mechanism) -> Dominated | None:
    if beliefs.is_empty():
        raise EmptyBeliefs(f"no opponent profile is possible for type {theta}")
    candidates = sorted(set(candidates))
    reps, rows = mechanism.payoff_table(theta, sorted(set(candidates) | {s}), beliefs.components)
    return find_dominator(s, candidates, rows, reps)


def _eliminate_type(model: EliminationModel, theta: AgentType, snapshot: Surviving,
                    round_: int, order_seed: int | None) -> list[EliminationRecord]:
    beliefs = model.beliefs(theta, snapshot)
    if beliefs.is_empty():
        raise EmptyBeliefs(f"no opponent profile is possible for type {theta} in round {round_}")
    own = snapshot[theta]
    reps, rows = model.mechanism.payoff_table(theta, own, beliefs.components)
    checked = list(own)
    if order_seed is not None:
        random.Random(f"{order_seed}:{theta}").shuffle(checked)
    out = []
    for s in checked:
        dom = find_dominator(s, own, rows, reps)
        if dom is not None:
            out.append(EliminationRecord(round_, theta, s, dom.dominator, dom.strict, dom.witness))
    return out


def _eliminate_task(args):
    return _eliminate_type(*args)


def eliminate_round(state: EliminationState, policy: EliminationPolicy = ALL_WEAK, *,
                    order_seed: int | None = None,
                    executor: Executor | None = None) -> EliminationState:
    """One simultaneous round: every check reads the previous round's sets."""
    model = state.model
    round_ = state.round + 1
    scope = policy.scope(round_)
    snapshot = state.surviving
    thetas = [t for t in model.types if scope is None or t.agent in scope]
    if order_seed is not None:
        random.Random(f"{order_seed}:{round_}").shuffle(thetas)
    tasks = [(model, t, snapshot, round_, order_seed) for t in thetas]
    if executor is None:
        results = map(_eliminate_task, tasks)
    else:
        results = executor.map(_eliminate_task, tasks)
    records = sorted(r for rs in results for r in rs)
    gone: dict[AgentType, set[Strategy]] = {}
    for r in records:
        gone.setdefault(r.type, set()).add(r.eliminated)
    surviving = {t: tuple(s for s in snapshot[t] if s not in gone.get(t, ()))
                 for t in model.types}
    return EliminationState(round_, surviving, state.trace + records,
                            state.history + [surviving], model)


def iterate_elimination(scenario: Scenario, mechanism: str | Mechanism = "solomon",
                        policy: EliminationPolicy = ALL_WEAK, *,
                        grid: BidGrid | Iterable | None = None,
                        order_seed: int | None = None, workers: int = 1,
                        max_rounds: int | None = None) -> EliminationState:
    """Run rounds until one with everybody in scope removes nothing."""
    if policy.agents and max(policy.agents) > scenario.n:
        raise ValueError(f"policy {policy} names an agent beyond n={scenario.n}")
    model = EliminationModel.build(scenario, mechanism, grid)
    state = initial_state(model)
    executor = ProcessPoolExecutor(workers) if workers > 1 else None
    try:
        while max_rounds is None or state.round < max_rounds:
            before = len(state.trace)
            state = eliminate_round(state, policy, order_seed=order_seed, executor=executor)
            if len(state.trace) == before and policy.scope(state.round) is None:
                break
    finally:
        if executor is not None:
            executor.shutdown()
    return state


def payoff_equivalent(a: Strategy, b: Strategy, theta: AgentType, beliefs: BeliefSet,
                      mechanism: Mechanism) -> bool:
    """Same payoff for ``theta`` against every profile in ``beliefs``."""
    _, rows = mechanism.payoff_table(theta, [a, b], beliefs.components)
    return rows[a] == rows[b]


@dataclass
class ProfileCheck:
    profile: tuple[Fraction, ...]
    surviving_profiles: int
    outcomes: list[Allocation]
    target: Allocation
    mismatches: int
    example_mismatch: tuple[Strategy, ...] | None = None

    @property
    def implemented(self) -> bool:
        return self.surviving_profiles > 0 and self.mismatches == 0

    def to_json(self) -> dict:
        return {
            "profile": [format_money(x) for x in self.profile],
            "surviving_profiles": self.surviving_profiles,
            "outcomes": [o.to_json() for o in self.outcomes],
            "target": self.target.to_json(),
            "mismatches": self.mismatches,
            "example_mismatch": (None if self.example_mismatch is None
                                 else [s.to_json() for s in self.example_mismatch]),
            "implemented": self.implemented,
        }


@dataclass
class ImplementationReport:
    mechanism: str
    policy: str
    profiles: list[ProfileCheck]
    rounds: int

    @property
    def implemented(self) -> bool:
        return all(p.implemented for p in self.profiles)

    def to_json(self) -> dict:
        return {
            "mechanism": self.mechanism,
            "policy": self.policy,
            "implemented": self.implemented,
            "eliminating_rounds": self.rounds,
            "profiles": [p.to_json() for p in self.profiles],
        }


def equilibrium_sets(state: EliminationState, v: Sequence[Fraction]) -> list[tuple[Strategy, ...]]:
    """Terminal surviving sets at the types nature's ``v`` induces."""
    return [state.surviving[t] for t in types_at(v, state.model.scenario.k)]


def check_implementation(scenario: Scenario, mechanism: str | Mechanism = "solomon",
                         policy: EliminationPolicy = ALL_WEAK, *,
                         state: EliminationState | None = None,
                         **kwargs) -> ImplementationReport:
    """Compare the outcome of every surviving profile with the target
    allocation at every profile of Q."""
    if state is None:
        state = iterate_elimination(scenario, mechanism, policy, **kwargs)
    mech = state.model.mechanism
    checks = []
    for v in scenario.profiles:
        target = choice_function(v, scenario.k)
        outcomes: dict[Allocation, None] = {}
        count = bad = 0
        example = None
        for prof in itertools.product(*equilibrium_sets(state, v)):
            count += 1
            out = mech.outcome(prof)
            outcomes.setdefault(out, None)
            if out != target:
                bad += 1
                example = example or prof
        checks.append(ProfileCheck(tuple(v), count, list(outcomes), target, bad, example))
    return ImplementationReport(mech.name, str(policy), checks, state.last_eliminating_round)


def survivor_annotations(state: EliminationState) -> dict[AgentType, list[tuple[Strategy, bool]]]:
    """Surviving auction strategies other than truthful bidding, each flagged
    with whether it is payoff-equivalent to truthful bidding against the
    terminal beliefs."""
    out = {}
    mech = state.model.mechanism
    for t, strategies in state.surviving.items():
        truthful = Strategy(AUCTION, t.valuation)
        extra = [s for s in strategies if s.move == AUCTION and s != truthful]
        if not extra:
            continue
        beliefs = state.model.beliefs(t, state.surviving)
        out[t] = [(s, payoff_equivalent(s, truthful, t, beliefs, mech)) for s in extra]
    return out
