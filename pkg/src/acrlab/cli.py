"""``acrlab`` command line: simulate, decompose, predict and verify networks.

Data goes to stdout (or ``-o``); diagnostics go to stderr.  Exit codes:
0 success, 1 usage error, 2 integrator error, 3 no applicable rule,
4 a scenario failed under ``verify``.
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import Dict, List, Optional, Sequence


from .netparse import NetworkSyntaxError, parse_network
from .massaction import build_field
from .odeint import AUX_NAMES, IntegratorError, integrate, trajectory_to_csv
from .pel import NoRuleApplies, decompose, find_acr_candidates, predict_limit
from .scenarios import (
    get_scenario, list_scenarios, rate_coeff_expr, registry_json, results_json, results_table, run_scenarios,
)

EXIT_OK, EXIT_USAGE, EXIT_INTEGRATOR, EXIT_NO_RULE, EXIT_SCENARIO_FAILED = 0, 1, 2, 3, 4


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _floats(text: str) -> List[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _assignment(text: str):
    name, sep, value = text.partition("=")
    try:
        if not sep or not name.strip():
            raise ValueError
        return name.strip(), float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected NAME=VALUE, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="acrlab", description="Dynamic ACR toolkit for mass-action networks with time-dependent inflows")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    def network_args(sp, x0_required=False):
        sp.add_argument("-n", "--network", required=True, help="network file in the reaction DSL")
        sp.add_argument("--set", dest="overrides", action="append", type=_assignment, default=[],
                        metavar="NAME=VALUE", help="override a rate constant or parameter (repeatable)")
        sp.add_argument("--x0", type=_floats, required=x0_required, help="initial state, comma separated")

    def integrator_args(sp):
        sp.add_argument("--t-end", type=float, help="final time")
        sp.add_argument("--rtol", type=float, default=1e-8)
        sp.add_argument("--atol", type=float, default=1e-10)
        sp.add_argument("--max-steps", type=int, default=500_000)
        sp.add_argument("--method", choices=("auto", "dopri5", "radau"), default="auto")
        sp.add_argument("--log-cap", type=float, help="stop once any inflow exceeds exp(LOG_CAP)")

    sp = sub.add_parser("simulate", help="integrate a network and write the trajectory")
    network_args(sp, x0_required=True)
    integrator_args(sp)
    sp.add_argument("--species", help="attach the decomposition of this species (fills auxiliary columns)")
    sp.add_argument("--x-star", help="ACR value to decompose about (default: first candidate)")
    sp.add_argument("-o", "--output", help="output path (default stdout)")
    sp.add_argument("--format", choices=("csv", "json"), default="csv")

    sp = sub.add_parser("decompose", help="power-engine-load form of one species")
    network_args(sp)
    sp.add_argument("--species", required=True)
    sp.add_argument("--x-star", help="ACR value (rate-constant expression); default: all candidates")
    sp.add_argument("-o", "--output")
    sp.add_argument("--format", choices=("json", "text"), default="json")

    sp = sub.add_parser("predict", help="predicted long-time limit of one species")
    network_args(sp)
    integrator_args(sp)
    sp.add_argument("--species", required=True)
    sp.add_argument("--x-star", help="ACR value to use instead of the detected candidates")
    sp.add_argument("--closed-compat", action="store_true",
                    help="judge compatibility against the reactions only, ignoring inflow and outflow directions")
    sp.add_argument("-o", "--output")

    sp = sub.add_parser("verify", help="run registered scenarios")
    sp.add_argument("ids", nargs="*", metavar="ID")
    sp.add_argument("--all", action="store_true", help="run every registered scenario")
    sp.add_argument("--threads", type=int, help="worker threads (default: ACRLAB_THREADS or CPU count)")
    sp.add_argument("-o", "--output")
    sp.add_argument("--format", choices=("table", "json"), default="table")

    sp = sub.add_parser("scenarios", help="list registered scenarios")
    sp.add_argument("-o", "--output")
    sp.add_argument("--format", choices=("table", "json"), default="table")
    return p


# ------------------------------------------------------------------ helpers


def _load(args):
    try:
        with open(args.network, encoding="utf-8") as fh:
            net = parse_network(fh.read())
    except OSError as exc:
        raise UsageError(f"cannot read network: {exc}") from None
    except NetworkSyntaxError as exc:
        raise UsageError(f"{args.network}: {exc}") from None
    fld = build_field(net)
    known = set(fld.bindings())
    overrides: Dict[str, float] = {}
    for name, value in args.overrides:
        if name not in known:
            raise UsageError(f"--set {name}: no such rate constant or parameter")
        overrides[name] = value
    if args.x0 is not None and len(args.x0) != len(net.species):
        raise UsageError(f"--x0 has {len(args.x0)} values but the network has {len(net.species)} species")
    return net, fld, overrides


def _check_species(net, name: str) -> None:
    if name not in net.species:
        raise UsageError(f"unknown species {name!r}")


def _x_star(text: Optional[str]):
    if text is None:
        return None
    try:
        return rate_coeff_expr(text)
    except (ValueError, SyntaxError):
        raise UsageError(f"cannot parse --x-star {text!r}") from None


def _emit(text: str, output: Optional[str]) -> None:
    if output:
        with open(output, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _integrate(args, fld, overrides, dec):
    if args.t_end is None:
        raise UsageError("--t-end is required")
    return integrate(fld, overrides, args.x0, args.t_end, rtol=args.rtol, atol=args.atol,
                     max_steps=args.max_steps, dec=dec, method=args.method, forcing_log_cap=args.log_cap)


def _decomposition(fld, species, x_star):
    cand = x_star if x_star is not None else next(iter(find_acr_candidates(fld, species)), None)
    return None if cand is None else decompose(fld, species, cand)


def _trajectory_json(traj) -> str:
    doc = {
        "species": list(traj.species),
        "t": traj.times.tolist(),
        "states": {s: traj.states[:, k].tolist() for k, s in enumerate(traj.species)},
        "accepted": traj.accepted,
        "rejected": traj.rejected,
        "stiff_switch_t": traj.stiff_switch_t,
    }
    if traj.aux is not None:
        doc["aux"] = {name: traj.aux[:, k].tolist() for k, name in enumerate(AUX_NAMES)}
    return json.dumps(doc, sort_keys=True) + "\n"


# ----------------------------------------------------------------- commands


def cmd_simulate(args) -> int:
    net, fld, overrides = _load(args)
    dec = None
    if args.species:
        _check_species(net, args.species)
        dec = _decomposition(fld, args.species, _x_star(args.x_star))
        if dec is None:
            print(f"note: no ACR candidate for {args.species}; auxiliary columns left empty", file=sys.stderr)
    if any(v < 0 for v in args.x0):
        raise UsageError("--x0 must be nonnegative")
    traj = _integrate(args, fld, overrides, dec)
    _emit(_trajectory_json(traj) if args.format == "json" else trajectory_to_csv(traj), args.output)
    print(f"{traj.accepted} accepted / {traj.rejected} rejected steps", file=sys.stderr)
    return EXIT_OK


def cmd_decompose(args) -> int:
    net, fld, overrides = _load(args)
    _check_species(net, args.species)
    xs = _x_star(args.x_star)
    cands = [xs] if xs is not None else find_acr_candidates(fld, args.species)
    if not cands:
        print(f"no ACR candidate for {args.species}; pass --x-star", file=sys.stderr)
        return EXIT_NO_RULE
    decs = [decompose(fld, args.species, c) for c in cands]
    b = fld.bindings(overrides)
    if args.format == "text":
        text = "".join(f"{d}\n" for d in decs)
    else:
        docs = []
        for d in decs:
            doc = d.to_json()
            doc["x_star_value"] = d.x_star_value(b)
            doc["load_is_zero"] = d.load_is_zero(b)
            docs.append(doc)
        text = json.dumps(docs, indent=2, sort_keys=True) + "\n"
    _emit(text, args.output)
    return EXIT_OK


def cmd_predict(args) -> int:
    net, fld, overrides = _load(args)
    _check_species(net, args.species)
    xs = _x_star(args.x_star)
    try:
        pred = predict_limit(net, args.species, x_star=xs, x0=args.x0, bindings=overrides,
                             closed_compat=args.closed_compat)
    except NoRuleApplies as exc:
        if args.x0 is None or args.t_end is None:
            print(f"no rule applies: {exc}", file=sys.stderr)
            return EXIT_NO_RULE
        dec = _decomposition(fld, args.species, xs)
        if dec is None:
            print(f"no rule applies: {exc}", file=sys.stderr)
            return EXIT_NO_RULE
        traj = _integrate(args, fld, overrides, dec)
        try:
            pred = predict_limit(net, args.species, x_star=xs, x0=args.x0, bindings=overrides, traj=traj,
                                 closed_compat=args.closed_compat)
        except NoRuleApplies as exc2:
            print(f"no rule applies: {exc2}", file=sys.stderr)
            return EXIT_NO_RULE
    _emit(pred.to_json_str() + "\n", args.output)
    return EXIT_OK


def cmd_verify(args) -> int:
    if args.all:
        chosen = list_scenarios()
    elif args.ids:
        try:
            chosen = [get_scenario(i) for i in args.ids]
        except KeyError as exc:
            raise UsageError(str(exc.args[0])) from None
    else:
        raise UsageError("give scenario ids or --all")
    results = run_scenarios(chosen, threads=args.threads)
    _emit(results_json(results) + "\n" if args.format == "json" else results_table(results), args.output)
    failed = [r.id for r in results if not r.ok]
    excluded = [r.id for r in results if r.status == "conjecture"]
    if excluded:
        print(f"excluded from the exit status: {', '.join(excluded)}", file=sys.stderr)
    if failed:
        print(f"failed: {', '.join(failed)}", file=sys.stderr)
        return EXIT_SCENARIO_FAILED
    print(f"{len(results)} scenario(s) ok", file=sys.stderr)
    return EXIT_OK


def cmd_scenarios(args) -> int:
    if args.format == "json":
        text = registry_json() + "\n"
    else:
        rows = [(sc.id, ",".join(sorted(sc.flags)) or "-", sc.expected_limit, sc.anchor) for sc in list_scenarios()]
        w = [max(len(r[k]) for r in rows) for k in range(3)]
        text = "".join(f"{a.ljust(w[0])}  {b.ljust(w[1])}  {c.ljust(w[2])}  {d}\n" for a, b, c, d in rows)
    _emit(text, args.output)
    return EXIT_OK


COMMANDS = {"simulate": cmd_simulate, "decompose": cmd_decompose, "predict": cmd_predict,
            "verify": cmd_verify, "scenarios": cmd_scenarios}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"acrlab {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except IntegratorError as exc:
        print(f"acrlab {args.command}: integrator error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTEGRATOR


if __name__ == "__main__":
    sys.exit(main())
