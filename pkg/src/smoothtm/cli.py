"""Command-line interface.

Subcommands: run (classical or smooth stepping with optional trace),
compile (multitape machine to single-tape simulator), utm (build, run and
check the pseudo-universal machine), verify (randomized preservation
campaigns).  Exit codes: 0 success, 1 verification failure, 2 usage or
parse errors.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import multitape
from . import utm as utm_mod
from . import verify as verify_mod
from .dists import Dist, FiniteSet
from .framework import CycleOverrun, run_to_next_encoding
from .machines import DIRECTIONS, FormatError, parse_machine
from .sections import format_section_machine
from .smooth import (
    SmoothConfig,
    extract_classical,
    format_config,
    parse_config,
    smooth_step,
    smooth_step_dists,
)

_DIRNAMES = {-1: "L", 0: "S", 1: "R"}


class CliError(Exception):
    def __init__(self, message: str, code: int = 2):
        super().__init__(message)
        self.code = code


def _read(path: str) -> str:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc.strerror}") from None


def _write(path: str, text: str) -> None:
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    except OSError as exc:
        raise CliError(f"cannot write {path}: {exc.strerror}") from None


def _load_machine(path: str):
    try:
        return parse_machine(_read(path))
    except FormatError as exc:
        raise CliError(f"{path}: {exc}") from None


def _load_config(path: str, machine) -> SmoothConfig:
    try:
        return parse_config(_read(path), machine)
    except FormatError as exc:
        raise CliError(f"{path}: {exc}") from None


def _dist_obj(d: Dist) -> dict:
    return {
        str(x): float(d.weights[i])
        for i, x in enumerate(d.base.elements)
        if d.weights[i] != 0.0
    }


def _trace_record(step: int, s: SmoothConfig, dirs) -> str:
    rec = {
        "step": step,
        "state": _dist_obj(s.state),
        "tapes": [
            {
                "lo": t.lo,
                "cells": [_dist_obj(t.cell(i)) for i in range(t.lo, t.hi + 1)],
            }
            for t in s.tapes
        ],
        "direction": [_dist_obj(d) for d in dirs],
    }
    return json.dumps(rec, sort_keys=True)


def cmd_run(args) -> int:
    m = _load_machine(args.machine)
    s = _load_config(args.config, m)
    if not args.smooth:
        try:
            extract_classical(m, s)
        except ValueError:
            raise CliError(
                "configuration carries uncertainty; pass --smooth to run the "
                "smooth relaxation"
            ) from None
    trace_lines = []
    for k in range(args.steps):
        _, _, dirs = smooth_step_dists(m, s)
        s = smooth_step(m, s)
        if args.trace:
            trace_lines.append(_trace_record(k + 1, s, dirs))
    if args.trace:
        _write(args.trace, "\n".join(trace_lines) + ("\n" if trace_lines else ""))
    print(format_config(s))
    return 0


def cmd_compile(args) -> int:
    m = _load_machine(args.machine)
    try:
        sim = multitape.compile_multitape(m)
    except ValueError as exc:
        raise CliError(str(exc)) from None
    meta = multitape.metadata(sim)
    _write(args.output, format_section_machine(sim.machine, meta))
    print(
        f"compiled {args.machine}: {meta['sections']} sections, "
        f"{meta['states']} states, cycle length "
        f"{meta['cycle_length_base']} + {meta['cycle_length_per_width']}*(R-L)"
    )
    return 0


def _parse_override_dist(text: str, base: FiniteSet, names: dict | None = None):
    pairs = {}
    body = text.strip()
    if not (body.startswith("{") and body.endswith("}")):
        raise CliError(f"override distribution {text!r} is not brace-delimited")
    for item in body[1:-1].split(","):
        if not item.strip():
            continue
        if ":" not in item:
            raise CliError(f"bad override entry {item!r}")
        key, val = item.split(":", 1)
        key = key.strip()
        label = names[key] if names and key in names else key
        if label not in base:
            raise CliError(f"unknown label {key!r} in override")
        pairs[label] = float(val)
    try:
        return Dist.from_pairs(base, pairs)
    except ValueError as exc:
        raise CliError(f"bad override distribution {text!r}: {exc}") from None


def _parse_overrides(text: str, m) -> dict:
    """Lines of the form  (q,a) -> {q2: p, ...} / {b: p, ...} / {L: p, ...}."""
    out = {}
    dirnames = {"L": -1, "S": 0, "R": 1}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "->" not in line:
            raise CliError(f"overrides line {lineno}: expected '(q,a) -> ...'")
        lhs, rhs = line.split("->", 1)
        lhs = lhs.strip()
        if not (lhs.startswith("(") and lhs.endswith(")")):
            raise CliError(f"overrides line {lineno}: bad pair {lhs!r}")
        q, _, a = lhs[1:-1].partition(",")
        q, a = q.strip(), a.strip()
        if q not in m.states or a not in m.alphabet:
            raise CliError(f"overrides line {lineno}: unknown pair ({q},{a})")
        parts = rhs.split("/")
        if len(parts) != 3:
            raise CliError(
                f"overrides line {lineno}: need target/write/move distributions"
            )
        out[(q, a)] = (
            _parse_override_dist(parts[0], m.states),
            _parse_override_dist(parts[1], m.alphabet),
            _parse_override_dist(parts[2], DIRECTIONS, dirnames),
        )
    return out


def cmd_utm(args) -> int:
    m = _load_machine(args.code)
    alphabet_tokens = _read(args.alphabet).split()
    if not alphabet_tokens:
        raise CliError(f"{args.alphabet}: alphabet file lists no symbols")
    if (
        len(m.states) != args.states
        or tuple(alphabet_tokens) != tuple(str(x) for x in m.alphabet.elements)
    ):
        raise CliError(
            "code does not match the build parameters: size mismatch "
            f"(code has {len(m.states)} states over {len(m.alphabet)} symbols)"
        )
    if m.num_tapes != 1:
        raise CliError("the universal machine simulates single-tape machines")
    overrides = None
    if args.overrides:
        overrides = _parse_overrides(_read(args.overrides), m)
    machine = utm_mod.build_utm(m.states, m.alphabet, m.blank)
    code = utm_mod.encode_code(m, overrides)
    if args.input:
        s = _load_config(args.input, m)
    else:
        from .smooth import SmoothTape

        s = SmoothConfig(
            Dist.point(m.states, m.states.elements[0]),
            (SmoothTape.blank_tape(m.alphabet, m.blank),),
        )
    triple = utm_mod.make_triple(machine, code)
    cfg = utm_mod.encode_config(machine, code, s)
    reference = s
    try:
        for _ in range(args.cycles):
            cfg, _t = run_to_next_encoding(triple, cfg)
            reference = utm_mod.utm_cycle_semantics(code, reference)
    except CycleOverrun as exc:
        print(f"FAIL: {exc}", file=sys.stderr)
        return 1
    decoded = utm_mod.decode_config(machine, code, cfg)
    dev = decoded.deviation(reference)
    print(format_config(decoded))
    print(
        f"cycles: {args.cycles}, cycle length: {machine.cycle_length()}, "
        f"max deviation vs direct semantics: {dev:.3e}",
        file=sys.stderr,
    )
    if dev > args.tol:
        print(f"FAIL: deviation {dev} exceeds {args.tol}", file=sys.stderr)
        return 1
    return 0


def cmd_verify(args) -> int:
    if args.construction == "multitape":
        report = verify_mod.verify_multitape(
            trials=args.trials, seed=args.seed, tol=args.tol
        )
    elif args.construction == "broken-multitape":
        report = verify_mod.verify_multitape(
            trials=args.trials, seed=args.seed, tol=args.tol, broken=True
        )
    elif args.construction == "utm":
        report = verify_mod.verify_utm(
            trials=args.trials,
            seed=args.seed,
            tol=args.tol,
            uncertain_codes=args.uncertain_codes,
        )
    else:
        report = verify_mod.verify_staged(tol=args.tol, seed=args.seed)
    text = verify_mod.report_json(report)
    if args.report:
        _write(args.report, text)
    else:
        sys.stdout.write(text)
    ok = report["pass"]
    summary = (
        f"{report['construction']}: {len(report['results'])} trials, "
        f"max deviation {report['max_deviation']:.3e}: "
        + ("PASS" if ok else "FAIL")
    )
    print(summary, file=sys.stderr)
    if not ok and report["construction"] == "staged-counterexample":
        r = report["results"][0]
        print(
            "staged cell A/B: "
            f"{r['staged_cell']['A']}/{r['staged_cell']['B']} vs smooth "
            f"{r['smooth_cell']['A']}/{r['smooth_cell']['B']}",
            file=sys.stderr,
        )
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="smoothtm",
        description="Simulate, compile and verify smooth relaxations of "
        "Turing machines.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    runp = sub.add_parser("run", help="run a machine on a configuration")
    runp.add_argument("machine", help="machine text file")
    runp.add_argument("config", help="configuration JSON file")
    runp.add_argument("--steps", type=int, default=1)
    runp.add_argument(
        "--smooth", action="store_true", help="propagate distributions"
    )
    runp.add_argument("--trace", metavar="OUT", help="write one JSON line per step")
    runp.set_defaults(fn=cmd_run)

    comp = sub.add_parser("compile", help="compile an n-tape machine to one tape")
    comp.add_argument("machine")
    comp.add_argument("-o", "--output", required=True)
    comp.set_defaults(fn=cmd_compile)

    utmp = sub.add_parser("utm", help="build and exercise the pseudo-UTM")
    utmp.add_argument("--states", type=int, required=True)
    utmp.add_argument("--alphabet", required=True, help="file listing symbols")
    utmp.add_argument("--code", required=True, help="single-tape machine file")
    utmp.add_argument("--cycles", type=int, default=1)
    utmp.add_argument("--input", help="initial configuration JSON file")
    utmp.add_argument(
        "--overrides", help="file of uncertain-code overrides (q,a) -> ..."
    )
    utmp.add_argument("--tol", type=float, default=1e-9)
    utmp.set_defaults(fn=cmd_utm)

    ver = sub.add_parser("verify", help="run preservation campaigns")
    ver.add_argument(
        "--construction",
        required=True,
        choices=["multitape", "utm", "staged-counterexample", "broken-multitape"],
    )
    ver.add_argument("--trials", type=int, default=25)
    ver.add_argument("--seed", type=int, default=0)
    ver.add_argument("--tol", type=float, default=1e-9)
    ver.add_argument("--report", metavar="OUT")
    ver.add_argument("--uncertain-codes", action="store_true")
    ver.set_defaults(fn=cmd_verify)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
