"""Command line front end.

    entryfee validate  --scenario s.json
    entryfee eliminate --scenario s.json [--mechanism M] [--policy P]
    entryfee check     --scenario s.json [--mechanism M] [--policy P]
    entryfee stability --scenario s.json [--mechanism M] [--epsilon E]
    entryfee compare   --scenario s.json [--at INDEX]

Exit codes: 0 success, 1 check failed or instability found, 2 invalid input
or usage, 3 internal error, 4 unreadable scenario file.
"""
from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import os
import sys
import tempfile
from decimal import Decimal
from fractions import Fraction

from .core import (MoneyError, Scenario, ScenarioError, ScenarioParseError, build_bid_grid,
                   format_money, parse_money, payoff, top_set, types_at, validate_scenario)
from .elimination import (EliminationPolicy, check_implementation, iterate_elimination,
                          survivor_annotations)
from .mechanisms import AUCTION, MECHANISMS, NO, MechanismError, Strategy, get_mechanism
from .stability import HypothesisFailed, olszewski_bribe_witness, verify_pairwise_stability

EXIT_OK, EXIT_FAILED, EXIT_INVALID, EXIT_INTERNAL, EXIT_IO = 0, 1, 2, 3, 4
FORMATS = ("json", "csv", "text")


class ScenarioIOError(OSError):
    pass


class UsageError(ValueError):
    pass


class UnsupportedFormat(ValueError):
    pass


def parse_scenario_file(path: str) -> Scenario:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ScenarioIOError(f"cannot read {path}: {exc.strerror or exc}") from None
    try:
        raw = json.loads(text, parse_float=Decimal)
    except json.JSONDecodeError as exc:
        raise ScenarioParseError("<json>", exc.msg, line=exc.lineno) from None
    return validate_scenario(raw)


# -- commands ---------------------------------------------------------------

def _selected(scenario: Scenario, at: int | None) -> list[tuple[Fraction, ...]]:
    if at is None:
        return list(scenario.profiles)
    if not 0 <= at < len(scenario.profiles):
        raise UsageError(f"--at {at} is out of range for {len(scenario.profiles)} profiles")
    return [scenario.profiles[at]]


def _run_kwargs(args) -> dict:
    return {"order_seed": args.order_seed, "workers": args.workers}


def cmd_validate(scenario: Scenario, grid, args):
    result = {
        "valid": True,
        "problems": [],
        "profiles": [{"profile": [format_money(x) for x in v],
                      "top_set": sorted(top_set(v, scenario.k))} for v in scenario.profiles],
        "grid": [format_money(b) for b in grid],
        "missing_witnesses": [[format_money(u), format_money(w)] for u, w in grid.missing_witnesses],
    }
    return result, EXIT_OK


def _terminal_json(state) -> list:
    notes = survivor_annotations(state)
    out = []
    for t in sorted(state.surviving):
        flags = {s: eq for s, eq in notes.get(t, [])}
        out.append({
            "type": t.to_json(),
            "strategies": [s.to_json() for s in state.surviving[t]],
            "payoff_equivalent_to_truthful": [s.to_json() for s, eq in flags.items() if eq],
            "other_non_truthful_bids": [s.to_json() for s, eq in flags.items() if not eq],
        })
    return out


def cmd_eliminate(scenario, grid, args):
    state = iterate_elimination(scenario, args.mechanism, args.policy, grid=grid, **_run_kwargs(args))
    check = check_implementation(scenario, state=state)
    result = {
        "mechanism": args.mechanism,
        "policy": str(args.policy),
        "eliminating_rounds": state.last_eliminating_round,
        "fixed_point_round": state.round,
        "records": [r.to_json() for r in state.trace],
        "terminal": _terminal_json(state),
        "check": check.to_json(),
    }
    return result, EXIT_OK


def cmd_check(scenario, grid, args):
    report = check_implementation(scenario, args.mechanism, args.policy, grid=grid,
                                  **_run_kwargs(args))
    return report.to_json(), EXIT_OK if report.implemented else EXIT_FAILED


def _epsilon_for(v, delta, given):
    if given is not None:
        return given
    slack = max(v) - 2 * delta
    return slack / 2 if slack > 0 else None


def cmd_stability(scenario, grid, args):
    profiles = _selected(scenario, args.at)
    report = verify_pairwise_stability(args.mechanism, scenario, args.policy, grid=grid,
                                       profiles=profiles, **_run_kwargs(args))
    result = report.to_json()
    if args.mechanism == "olszewski":
        bribes = []
        for v in profiles:
            eps = _epsilon_for(v, scenario.delta, args.epsilon)
            entry = {"profile": [format_money(x) for x in v],
                     "epsilon": None if eps is None else format_money(eps)}
            try:
                if eps is None:
                    raise HypothesisFailed("v_i - 2*delta is not positive")
                entry["witness"] = olszewski_bribe_witness(v, scenario.delta, eps).to_json()
            except HypothesisFailed as exc:
                entry["witness"] = None
                entry["hypothesis_failed"] = str(exc)
            bribes.append(entry)
        result["bribe_witnesses"] = bribes
    return result, EXIT_OK if report.stable else EXIT_FAILED


def _compare_rows(scenario: Scenario, v) -> list[dict]:
    """Payoffs under truthful bids for every first-stage move profile."""
    n, k = scenario.n, scenario.k
    thetas = types_at(v, k)
    names = ["solomon", "olszewski", "plain-kplus1"] if (n, k) == (2, 1) else ["solomon", "plain-kplus1"]
    rows = []
    for name in names:
        mech = get_mechanism(name, scenario)
        move_sets = [(AUCTION,) * n] if name == "plain-kplus1" else itertools.product((AUCTION, NO), repeat=n)
        for moves in move_sets:
            prof = tuple(Strategy(m, x) for m, x in zip(moves, v))
            out = mech.outcome(prof)
            rows.append({
                "mechanism": name,
                "moves": list(moves),
                "bids": [format_money(x) for x in v],
                "allocation": out.to_json(),
                "payoffs": [format_money(payoff(out, t)) for t in thetas],
            })
    return rows


def cmd_compare(scenario, grid, args):
    result = {"tables": [{"profile": [format_money(x) for x in v], "rows": _compare_rows(scenario, v)}
                         for v in _selected(scenario, args.at)]}
    return result, EXIT_OK


COMMANDS = {
    "validate": cmd_validate,
    "eliminate": cmd_eliminate,
    "check": cmd_check,
    "stability": cmd_stability,
    "compare": cmd_compare,
}


# -- output -----------------------------------------------------------------

def _cell(x) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, (list, dict)):
        return json.dumps(x, separators=(",", ":"))
    return str(x)


def _csv_rows(report: dict) -> tuple[list[str], list[list]]:
    cmd = report["command"]["name"]
    res = report["result"]
    if "error" in report:
        err = report["error"]
        return ["kind", "message"], [[err["kind"], err["message"]]]
    if cmd == "validate":
        return ["valid", "profile", "top_set"], [[True, p["profile"], p["top_set"]] for p in res["profiles"]]
    if cmd == "eliminate":
        header = ["round", "agent", "valuation", "top", "eliminated_move", "eliminated_bid",
                  "dominator_move", "dominator_bid", "strict", "witness"]
        rows = [[r["round"], r["agent"], r["type"]["valuation"], r["type"]["top"],
                 r["eliminated"][0], r["eliminated"][1], r["dominator"][0], r["dominator"][1],
                 r["strict"], r["witness"]] for r in res["records"]]
        return header, rows
    if cmd == "check":
        header = ["profile", "surviving_profiles", "mismatches", "implemented", "target", "outcomes"]
        return header, [[p["profile"], p["surviving_profiles"], p["mismatches"], p["implemented"],
                         p["target"], p["outcomes"]] for p in res["profiles"]]
    if cmd == "stability":
        header = ["profile", "stable", "equilibrium", "equilibrium_payoffs", "i", "j", "s_i", "s_j",
                  "transfer", "u_i", "u_j"]
        rows = []
        for p in res["profiles"]:
            w = p["witness"] or {}
            rows.append([p["profile"], p["stable"], p["equilibrium"], p["equilibrium_payoffs"]]
                        + [w.get(key) for key in ("i", "j", "s_i", "s_j", "transfer", "u_i", "u_j")])
        return header, rows
    if cmd == "compare":
        header = ["profile", "mechanism", "moves", "bids", "payoffs"]
        return header, [[t["profile"], r["mechanism"], r["moves"], r["bids"], r["payoffs"]]
                        for t in res["tables"] for r in t["rows"]]
    raise ValueError(f"no csv layout for {cmd!r}")


def _vec(xs) -> str:
    return "(" + ",".join(str(x) for x in xs) + ")"


def _text(report: dict) -> str:
    if "error" in report:
        err = report["error"]
        lines = [f"ERROR {err['kind']}: {err['message']}"]
        lines += [f"  {p['code']}: {p['message']}" for p in err.get("problems", [])]
        return "\n".join(lines) + "\n"
    cmd = report["command"]["name"]
    res = report["result"]
    lines = []
    if cmd == "validate":
        d = report["digest"]
        lines.append(f"VALID n={d['n']} k={d['k']} delta={d['delta']} profiles={d['profiles']} "
                     f"grid={d['grid_size']}")
    elif cmd == "eliminate":
        lines.append(f"{res['mechanism']} {res['policy']}: {len(res['records'])} eliminations, "
                     f"last eliminating round {res['eliminating_rounds']}")
        for t in res["terminal"]:
            ty = t["type"]
            lines.append(f"  agent {ty['agent']} ({ty['valuation']},{'top' if ty['top'] else 'low'}): "
                         + " ".join(_vec(s) for s in t["strategies"]))
        lines.append("IMPLEMENTED" if res["check"]["implemented"] else "NOT IMPLEMENTED")
    elif cmd == "check":
        lines.append("IMPLEMENTED" if res["implemented"] else "NOT IMPLEMENTED")
        for p in res["profiles"]:
            lines.append(f"  v={_vec(p['profile'])} profiles={p['surviving_profiles']} "
                         f"mismatches={p['mismatches']}")
    elif cmd == "stability":
        lines.append("STABLE" if res["stable"] else "UNSTABLE")
        for p in res["profiles"]:
            line = f"  v={_vec(p['profile'])} equilibrium payoffs {_vec(p['equilibrium_payoffs'])}"
            w = p["witness"]
            if w:
                line += (f"; agents {w['i']},{w['j']} deviate to {_vec(w['s_i'])},{_vec(w['s_j'])} "
                         f"transfer {w['transfer']} payoffs ({w['u_i']},{w['u_j']})")
            lines.append(line)
    elif cmd == "compare":
        for t in res["tables"]:
            lines.append(f"v={_vec(t['profile'])}")
            for r in t["rows"]:
                lines.append(f"  {r['mechanism']:<13} moves={_vec(r['moves'])} payoffs={_vec(r['payoffs'])}")
    return "\n".join(lines) + "\n"


def emit_report(report: dict, fmt: str = "json") -> str:
    if fmt == "json":
        return json.dumps(report, indent=2) + "\n"
    if fmt == "csv":
        header, rows = _csv_rows(report)
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(header)
        writer.writerows([[_cell(c) for c in row] for row in rows])
        return buf.getvalue()
    if fmt == "text":
        return _text(report)
    raise UnsupportedFormat(f"unsupported format {fmt!r}; choose from {FORMATS}")


def _write(text: str, out: str | None):
    if out is None:
        sys.stdout.write(text)
        return
    directory = os.path.dirname(os.path.abspath(out))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".entryfee-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, out)
    except BaseException:
        os.unlink(tmp)
        raise


# -- entry point ------------------------------------------------------------

def _money_arg(text: str) -> Fraction:
    try:
        return parse_money(text)
    except MoneyError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _policy_arg(text: str) -> EliminationPolicy:
    try:
        return EliminationPolicy.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="entryfee", description="Entry-fee auction verification engine.")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--scenario", required=True, metavar="PATH")
        p.add_argument("--mechanism", default="solomon", choices=sorted(MECHANISMS))
        p.add_argument("--policy", default=EliminationPolicy(), type=_policy_arg,
                       help="all-weak | restricted:AGENTS (default: all-weak)")
        p.add_argument("--format", default="json", choices=FORMATS)
        p.add_argument("--out", metavar="PATH", help="write here instead of stdout")
        p.add_argument("--grid-extra", nargs="+", default=[], type=_money_arg, metavar="MONEY",
                       help="extra bid grid points")
        p.add_argument("--at", type=int, metavar="INDEX", help="only this profile of Q")
        p.add_argument("--epsilon", type=_money_arg, help="bribe slack for the olszewski witness")
        p.add_argument("--workers", type=int, default=1,
                       help="processes for the elimination rounds (default: 1)")
        p.add_argument("--order-seed", type=int,
                       help="shuffle the per-round check order with this seed")
    return parser


def _echo(args) -> dict:
    return {
        "name": args.command,
        "mechanism": args.mechanism,
        "policy": str(args.policy),
        "at": args.at,
        "grid_extra": [format_money(x) for x in args.grid_extra],
        "epsilon": None if args.epsilon is None else format_money(args.epsilon),
    }


def run_command(argv: list[str]) -> tuple[dict, int]:
    """Parse ``argv``, run the command and return ``(report, exit_status)``.

    Argument errors raise ``SystemExit(2)`` via argparse.
    """
    return _run(build_parser().parse_args(argv))


def _run(args) -> tuple[dict, int]:
    report = {"command": _echo(args), "scenario": None, "digest": None, "result": None}

    def fail(kind, message, status, problems=()):
        report["error"] = {"kind": kind, "message": message,
                           "problems": [{"code": p.code, "message": p.message} for p in problems]}
        report["exit_status"] = status
        return report, status

    try:
        scenario = parse_scenario_file(args.scenario)
    except ScenarioIOError as exc:
        return fail("IoError", str(exc), EXIT_IO)
    except ScenarioParseError as exc:
        return fail("ParseError", str(exc), EXIT_INVALID)
    except ScenarioError as exc:
        return fail("ValidationError", str(exc), EXIT_INVALID, exc.problems)
    report["scenario"] = scenario.to_json()
    try:
        if args.mechanism == "olszewski" and (scenario.n, scenario.k) != (2, 1):
            raise UsageError(f"--mechanism olszewski needs n=2, k=1 (scenario has n={scenario.n}, "
                             f"k={scenario.k})")
        if args.policy.agents and max(args.policy.agents) > scenario.n:
            raise UsageError(f"--policy {args.policy} names an agent beyond n={scenario.n}")
        if args.workers < 1:
            raise UsageError("--workers must be at least 1")
        grid = build_bid_grid(scenario, args.grid_extra)
        report["digest"] = {"n": scenario.n, "k": scenario.k, "delta": format_money(scenario.delta),
                            "profiles": len(scenario.profiles), "grid_size": len(grid)}
        result, status = COMMANDS[args.command](scenario, grid, args)
    except (UsageError, MechanismError) as exc:
        return fail("UsageError", str(exc), EXIT_INVALID)
    except Exception as exc:  # noqa: BLE001 - reported, not swallowed
        return fail("InternalError", f"{type(exc).__name__}: {exc}", EXIT_INTERNAL)
    report["result"] = result
    report["exit_status"] = status
    return report, status


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(sys.argv[1:] if argv is None else argv)
    report, status = _run(args)
    try:
        _write(emit_report(report, args.format), args.out)
    except OSError as exc:
        print(f"entryfee: cannot write report: {exc}", file=sys.stderr)
        return EXIT_IO
    return status


if __name__ == "__main__":
    sys.exit(main())
