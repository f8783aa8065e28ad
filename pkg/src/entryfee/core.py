"""Problem instances: exact money, scenarios, agent types, the target
choice function, belief sets and finite bid grids.

Agents are numbered ``1..n`` in every public structure (agent sets, types,
records).  Vectors such as valuation profiles, strategy profiles and
allocations are plain tuples where position ``i - 1`` belongs to agent ``i``.
"""
from __future__ import annotations

from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from decimal import Decimal
from fractions import Fraction
from typing import Any, NamedTuple

Money = Fraction


class MoneyError(ValueError):
    """A value could not be read as an exact amount of money."""


class ScenarioParseError(ValueError):
    """A raw scenario field has the wrong type or an unreadable value."""

    def __init__(self, field_name: str, message: str, line: int | None = None):
        self.field = field_name
        self.line = line
        where = f"line {line}" if line is not None else f"field {field_name!r}"
        super().__init__(f"{where}: {message}")


class Problem(NamedTuple):
    code: str  # GapViolation | AmbiguousTop | BadShape | BadParams
    message: str


class ScenarioError(ValueError):
    """Validation failed; ``problems`` lists every violated invariant."""

    def __init__(self, problems: Sequence[Problem]):
        self.problems = list(problems)
        super().__init__("; ".join(f"{p.code}: {p.message}" for p in self.problems))

    @property
    def codes(self) -> list[str]:
        return [p.code for p in self.problems]


class UnknownTypeError(LookupError):
    """An agent type that no profile of the scenario produces."""


def parse_money(value: Any) -> Fraction:
    """Read ``10``, ``"3.5"`` or ``"7/2"`` exactly.  Binary floats are refused."""
    if isinstance(value, bool):
        raise MoneyError(f"not a money value: {value!r}")
    if isinstance(value, (int, Fraction, Decimal)):
        return Fraction(value)
    if isinstance(value, float):
        raise MoneyError(f"binary float {value!r} is not exact; pass it as a string")
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except (ValueError, ZeroDivisionError):
            raise MoneyError(f"not a money value: {value!r}") from None
    raise MoneyError(f"not a money value: {value!r}")


def _terminates(q: int) -> bool:
    for p in (2, 5):
        while q % p == 0:
            q //= p
    return q == 1


def format_money(value: Fraction) -> str:
    """Exact string form: integers as ``"10"``, terminating decimals as
    ``"3.5"``, everything else as ``"p/q"``."""
    value = Fraction(value)
    if value.denominator == 1:
        return str(value.numerator)
    if not _terminates(value.denominator):
        return f"{value.numerator}/{value.denominator}"
    sign = "-" if value < 0 else ""
    value = abs(value)
    whole, rest = divmod(value.numerator, value.denominator)
    digits = []
    while rest:
        rest *= 10
        d, rest = divmod(rest, value.denominator)
        digits.append(str(d))
    return f"{sign}{whole}.{''.join(digits)}"


@dataclass(frozen=True)
class Scenario:
    n: int
    k: int
    delta: Fraction
    profiles: tuple[tuple[Fraction, ...], ...]
    nonnegative_bids: bool = True
    allow_zero_delta: bool = False
    bid_grid_extra: tuple[Fraction, ...] = ()

    @property
    def agents(self) -> range:
        return range(1, self.n + 1)

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "k": self.k,
            "delta": format_money(self.delta),
            "profiles": [[format_money(x) for x in v] for v in self.profiles],
            "nonnegative_bids": self.nonnegative_bids,
            "allow_zero_delta": self.allow_zero_delta,
            "bid_grid_extra": [format_money(x) for x in self.bid_grid_extra],
        }


@dataclass(frozen=True, order=True)
class AgentType:
    """What agent ``agent`` privately observes: own valuation and whether it
    is among the top k."""

    agent: int
    valuation: Fraction
    top: bool

    def __str__(self) -> str:
        return f"{self.agent}:({format_money(self.valuation)},{'top' if self.top else 'low'})"

    def to_json(self) -> dict:
        return {"agent": self.agent, "valuation": format_money(self.valuation), "top": self.top}


@dataclass(frozen=True)
class Allocation:
    """Units received ``x`` and payments received ``y`` (negative = paid).

    ``auction`` carries auction details when one was held; it does not take
    part in equality, so two allocations compare on ``(x, y)`` only.
    """

    x: tuple[int, ...]
    y: tuple[Fraction, ...]
    auction: Any = field(default=None, compare=False)

    def __post_init__(self):
        if len(self.x) != len(self.y):
            raise ValueError("x and y must cover the same agents")

    @property
    def n(self) -> int:
        return len(self.x)

    def to_json(self) -> list:
        return [[xi, format_money(yi)] for xi, yi in zip(self.x, self.y)]


def _sort_desc(v: Sequence[Fraction]) -> list[int]:
    return sorted(range(1, len(v) + 1), key=lambda i: (-v[i - 1], i))


def _profile_problems(idx: int, v: Sequence[Fraction], n: int, k: int,
                      delta: Fraction) -> list[Problem]:
    if len(v) != n:
        return [Problem("BadShape", f"profiles[{idx}] has {len(v)} components, expected {n}")]
    if 0 >= k or k >= n:
        return []
    problems = []
    positive = sum(1 for x in v if x > 0)
    if positive < k:
        problems.append(Problem(
            "BadShape", f"profiles[{idx}] has {positive} positive components, needs at least {k}"))
    ranked = _sort_desc(v)
    kth, next_ = v[ranked[k - 1] - 1], v[ranked[k] - 1]
    if kth == next_:
        problems.append(Problem(
            "AmbiguousTop", f"profiles[{idx}]: the {k}th and {k + 1}st valuations tie at "
                            f"{format_money(kth)}"))
    elif kth - next_ <= delta:
        problems.append(Problem(
            "GapViolation", f"profiles[{idx}]: gap {format_money(kth - next_)} between top-{k} "
                            f"and the rest does not exceed delta {format_money(delta)}"))
    return problems


def _field(raw: Mapping, name: str, default: Any = ...) -> Any:
    if name in raw:
        return raw[name]
    if default is ...:
        raise ScenarioParseError(name, "missing required field")
    return default


def _money_field(value: Any, name: str) -> Fraction:
    try:
        return parse_money(value)
    except MoneyError as exc:
        raise ScenarioParseError(name, str(exc)) from None


def _int_field(value: Any, name: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ScenarioParseError(name, f"expected an integer, got {value!r}")
    return value


def _bool_field(value: Any, name: str) -> bool:
    if not isinstance(value, bool):
        raise ScenarioParseError(name, f"expected a boolean, got {value!r}")
    return value


def validate_scenario(raw: Mapping | Scenario) -> Scenario:
    """Build a :class:`Scenario` from raw input, checking every invariant.

    Field type problems raise :class:`ScenarioParseError`; violated model
    invariants are collected and raised together as :class:`ScenarioError`.
    """
    if isinstance(raw, Scenario):
        raw = {
            "n": raw.n, "k": raw.k, "delta": raw.delta, "profiles": raw.profiles,
            "nonnegative_bids": raw.nonnegative_bids,
            "allow_zero_delta": raw.allow_zero_delta,
            "bid_grid_extra": raw.bid_grid_extra,
        }
    if not isinstance(raw, Mapping):
        raise ScenarioParseError("<root>", "scenario must be an object")
    n = _int_field(_field(raw, "n"), "n")
    k = _int_field(_field(raw, "k"), "k")
    delta = _money_field(_field(raw, "delta"), "delta")
    nonneg = _bool_field(_field(raw, "nonnegative_bids", True), "nonnegative_bids")
    allow_zero = _bool_field(_field(raw, "allow_zero_delta", False), "allow_zero_delta")
    raw_profiles = _field(raw, "profiles")
    if isinstance(raw_profiles, (str, bytes)) or not isinstance(raw_profiles, Iterable):
        raise ScenarioParseError("profiles", "expected an array of arrays")
    profiles = []
    for a, row in enumerate(raw_profiles):
        if isinstance(row, (str, bytes)) or not isinstance(row, Iterable):
            raise ScenarioParseError(f"profiles[{a}]", "expected an array")
        profiles.append(tuple(_money_field(x, f"profiles[{a}][{b}]") for b, x in enumerate(row)))
    extra = _field(raw, "bid_grid_extra", ())
    if isinstance(extra, (str, bytes)) or not isinstance(extra, Iterable):
        raise ScenarioParseError("bid_grid_extra", "expected an array")
    extra = tuple(_money_field(x, f"bid_grid_extra[{a}]") for a, x in enumerate(extra))

    problems = []
    if not 0 < k < n:
        problems.append(Problem("BadParams", f"need 0 < k < n, got n={n}, k={k}"))
    if delta < 0 or (delta == 0 and not allow_zero):
        problems.append(Problem(
            "BadParams", f"delta must be positive (zero only with allow_zero_delta), "
                         f"got {format_money(delta)}"))
    if not profiles:
        problems.append(Problem("BadShape", "profiles must not be empty"))
    for a, v in enumerate(profiles):
        problems.extend(_profile_problems(a, v, n, k, delta))
    if problems:
        raise ScenarioError(problems)
    # duplicates carry no information
    profiles = tuple(dict.fromkeys(profiles))
    return Scenario(n, k, delta, profiles, nonneg, allow_zero, extra)


def top_set(v: Sequence[Fraction], k: int) -> frozenset[int]:
    """The k agents with the highest valuations in ``v``."""
    ranked = _sort_desc(v)
    if k < len(v) and v[ranked[k - 1] - 1] == v[ranked[k] - 1]:
        raise ScenarioError([Problem("AmbiguousTop", f"top-{k} set of {tuple(v)} is not unique")])
    return frozenset(ranked[:k])


def types_at(v: Sequence[Fraction], k: int) -> tuple[AgentType, ...]:
    """The type profile that nature's announcement ``v`` induces."""
    h = top_set(v, k)
    return tuple(AgentType(i, Fraction(v[i - 1]), i in h) for i in range(1, len(v) + 1))


def type_profiles(scenario: Scenario) -> tuple[tuple[AgentType, ...], ...]:
    return tuple(types_at(v, scenario.k) for v in scenario.profiles)


def agent_types(scenario: Scenario) -> dict[int, tuple[AgentType, ...]]:
    """Every realisable type of every agent, sorted."""
    found: dict[int, set[AgentType]] = {i: set() for i in scenario.agents}
    for theta in type_profiles(scenario):
        for t in theta:
            found[t.agent].add(t)
    return {i: tuple(sorted(ts)) for i, ts in found.items()}


def belief_set(scenario: Scenario, theta: AgentType) -> frozenset[tuple[AgentType, ...]]:
    """Opponent type tuples jointly consistent with ``theta`` under Q."""
    out = set()
    for prof in type_profiles(scenario):
        if prof[theta.agent - 1] == theta:
            out.add(prof[:theta.agent - 1] + prof[theta.agent:])
    if not out:
        raise UnknownTypeError(f"type {theta} does not occur in any profile")
    return frozenset(out)


def choice_function(v: Sequence[Fraction], k: int) -> Allocation:
    h = top_set(v, k)
    n = len(v)
    return Allocation(tuple(1 if i in h else 0 for i in range(1, n + 1)),
                      (Fraction(0),) * n)


def payoff(alloc: Allocation, theta: AgentType) -> Fraction:
    """Quasilinear payoff ``v_i * x_i + y_i``."""
    i = theta.agent - 1
    return theta.valuation * alloc.x[i] + alloc.y[i]


@dataclass(frozen=True)
class BidGrid:
    """Finite set of admissible bids, sorted ascending.

    ``missing_witnesses`` lists ``(valuation, bid)`` pairs for the witness
    bids ``u - 2d``, ``u - d``, ``u + d`` that are absent (only happens when
    negative bids are clipped away).
    """

    bids: tuple[Fraction, ...]
    missing_witnesses: tuple[tuple[Fraction, Fraction], ...] = ()

    def __iter__(self):
        return iter(self.bids)

    def __len__(self) -> int:
        return len(self.bids)

    def __contains__(self, b) -> bool:
        return b in set(self.bids)


HALF_STEPS = (-4, -3, -2, -1, 1, 2, 3, 4)


def build_bid_grid(scenario: Scenario, extra: Iterable = ()) -> BidGrid:
    """Every valuation in Q, each valuation +/- 1..4 half-fees, the scenario's
    extra points and ``extra``.  With non-negative bids, negative points are
    dropped and 0 is added."""
    half = scenario.delta / 2
    values = {x for v in scenario.profiles for x in v}
    points = set(values)
    for u in values:
        points.update(u + j * half for j in HALF_STEPS)
    points.update(scenario.bid_grid_extra)
    points.update(parse_money(x) for x in extra)
    if scenario.nonnegative_bids:
        points = {b for b in points if b >= 0}
        points.add(Fraction(0))
    d = scenario.delta
    missing = tuple(
        (u, w) for u in sorted(values) for w in (u - 2 * d, u - d, u + d) if w not in points)
    return BidGrid(tuple(sorted(points)), missing)
