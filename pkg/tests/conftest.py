import itertools
import json
from fractions import Fraction

import pytest

from entryfee.core import validate_scenario

F = Fraction


def scenario(n, k, delta, profiles, **kw):
    raw = {"n": n, "k": k, "delta": str(delta),
           "profiles": [[str(x) for x in v] for v in profiles]}
    raw.update(kw)
    return validate_scenario(raw)


def arrangements(values, limit=8):
    return sorted(set(itertools.permutations(values)))[:limit]


# Conforming scenarios used by the acceptance suite and the property tests.
# Gaps between top and rest exceed 1.5 delta (see test_elimination for the
# tighter-gap behaviour of the finite grid).
SUITE = {
    "n2k1-single": dict(n=2, k=1, delta=1, profiles=[(10, 3)]),
    "n2k1-mixed": dict(n=2, k=1, delta=1, profiles=[(10, 3), (10, 4), (3, 10)]),
    "n2k1-wide-fee": dict(n=2, k=1, delta=2, profiles=[(8, 4), (4, 9)]),
    "n3k1": dict(n=3, k=1, delta=1, profiles=arrangements((10, 3, 1))),
    "n3k2": dict(n=3, k=2, delta=F(1, 2), profiles=[(3, 10, 9), (10, 9, 3), (9, 3, 10)]),
    "n4k2": dict(n=4, k=2, delta=1, profiles=arrangements((10, 9, 3, 1))),
    "n4k2-ties": dict(n=4, k=2, delta=1, profiles=arrangements((10, 10, 3, 3))),
}


def suite_scenario(name):
    params = SUITE[name]
    return scenario(params["n"], params["k"], params["delta"], params["profiles"])


@pytest.fixture
def two_agent():
    return scenario(2, 1, 1, [(10, 3)])


@pytest.fixture
def write_scenario(tmp_path):
    def write(raw, name="s.json"):
        path = tmp_path / name
        path.write_text(raw if isinstance(raw, str) else json.dumps(raw))
        return str(path)
    return write


# -- acceptance summary ---------------------------------------------------------

ACCEPTANCE_LINES: dict[int, str] = {}


def record_criterion(number, ok, detail):
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'} - {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[number])
