"""Randomized verification campaigns over the two constructions.

Each campaign samples machines and smooth encodings from one master seed,
drives the commuting square for a few cycles per trial, and produces a JSON
report with one record per trial.  Identical seed and flags give
byte-identical reports; trial records are ordered by trial index.
"""

from __future__ import annotations

import json

import numpy as np

from . import multitape, utm
from .dists import Dist, FiniteSet
from .framework import check_preserving, run_to_next_encoding
from .machines import DIRECTIONS, Machine
from .sampling import random_dist, random_machine, random_smooth_config
from .smooth import SmoothConfig, SmoothTape, smooth_step
from .utm import staged_smooth_step


def _trial_seeds(seed: int, trials: int) -> list[int]:
    master = np.random.default_rng(seed)
    return [int(s) for s in master.integers(0, 2**63 - 1, size=trials)]


def _finish(report: dict) -> dict:
    results = report["results"]
    report["max_deviation"] = max(
        [r["max_deviation"] for r in results], default=0.0
    )
    report["pass"] = all(r["pass"] for r in results)
    return report


def verify_multitape(
    trials: int = 25,
    seed: int = 0,
    tol: float = 1e-9,
    cycles: int = 3,
    max_tapes: int = 3,
    max_states: int = 4,
    max_symbols: int = 3,
    max_radius: int = 3,
    broken: bool = False,
) -> dict:
    """Preservation trials for the multitape-to-single-tape compiler."""
    report = {
        "construction": "broken-multitape" if broken else "multitape",
        "seed": seed,
        "trials": trials,
        "tol": tol,
        "cycles": cycles,
        "results": [],
    }
    for i, tseed in enumerate(_trial_seeds(seed, trials)):
        rng = np.random.default_rng(tseed)
        n = int(rng.integers(1, max_tapes + 1))
        nq = int(rng.integers(1, max_states + 1))
        ns = int(rng.integers(2, max_symbols + 1))
        m = random_machine(rng, n, nq, ns)
        sim = multitape.compile_multitape(m, broken=broken)
        s = random_smooth_config(m, rng, radius=int(rng.integers(0, max_radius + 1)))
        triple = multitape.make_triple(sim)
        x0 = multitape.to_section_config(sim, multitape.encode(sim, s))
        res = check_preserving(triple, x0, tol=tol, cycles=cycles)
        report["results"].append(
            {
                "trial": i,
                "seed": tseed,
                "dims": {"tapes": n, "states": nq, "symbols": ns},
                "cycle_lengths": res.cycle_lengths,
                "max_deviation": res.max_deviation,
                "well_behaved": not res.violations,
                "violations": res.violations[:8],
                "pass": res.passes(tol),
            }
        )
    return _finish(report)


def verify_utm(
    trials: int = 25,
    seed: int = 0,
    tol: float = 1e-9,
    cycles: int = 3,
    uncertain_codes: bool = False,
    max_states: int = 3,
    max_symbols: int = 3,
    max_radius: int = 3,
    shuffle_tol: float = 1e-12,
) -> dict:
    """Preservation trials for the pseudo-universal machine.

    Every trial also re-runs one cycle under a shuffled tuple order and
    requires the decoded output to be unchanged within ``shuffle_tol``.
    """
    report = {
        "construction": "utm",
        "seed": seed,
        "trials": trials,
        "tol": tol,
        "cycles": cycles,
        "uncertain_codes": uncertain_codes,
        "results": [],
    }
    for i, tseed in enumerate(_trial_seeds(seed, trials)):
        rng = np.random.default_rng(tseed)
        nq = int(rng.integers(1, max_states + 1))
        ns = int(rng.integers(2, max_symbols + 1))
        m = random_machine(rng, 1, nq, ns)
        overrides = None
        if uncertain_codes:
            overrides = {}
            for q in m.states:
                for a in m.alphabet:
                    if rng.random() < 0.5:
                        overrides[(q, a)] = (
                            random_dist(m.states, rng),
                            random_dist(m.alphabet, rng),
                            random_dist(DIRECTIONS, rng),
                        )
        machine = utm.build_utm(nq, m.alphabet, m.blank)
        code = utm.encode_code(m, overrides)
        s = random_smooth_config(m, rng, radius=int(rng.integers(0, max_radius + 1)))
        triple = utm.make_triple(machine, code)
        res = check_preserving(
            triple, utm.encode_config(machine, code, s), tol=tol, cycles=cycles
        )
        shuffled = code.shuffled(rng)
        striple = utm.make_triple(machine, shuffled)
        c1, _ = run_to_next_encoding(triple, utm.encode_config(machine, code, s))
        c2, _ = run_to_next_encoding(
            striple, utm.encode_config(machine, shuffled, s)
        )
        shuffle_dev = utm.decode_config(machine, code, c1).deviation(
            utm.decode_config(machine, shuffled, c2)
        )
        report["results"].append(
            {
                "trial": i,
                "seed": tseed,
                "dims": {"states": nq, "symbols": ns},
                "cycle_lengths": res.cycle_lengths,
                "max_deviation": res.max_deviation,
                "shuffle_deviation": shuffle_dev,
                "well_behaved": not res.violations,
                "violations": res.violations[:8],
                "pass": res.passes(tol) and shuffle_dev <= shuffle_tol,
            }
        )
    return _finish(report)


def staged_instance() -> tuple[Machine, SmoothConfig]:
    """The two-symbol identity machine reading an even A/B mixture."""
    states = FiniteSet(["q"])
    alphabet = FiniteSet(["_", "A", "B"])
    delta = {("q", (a,)): ("q", (a,), (0,)) for a in alphabet}
    m = Machine(states, alphabet, "_", 1, delta)
    cell = Dist.from_pairs(alphabet, {"A": 0.5, "B": 0.5})
    s = SmoothConfig(
        Dist.point(states, "q"),
        (SmoothTape.from_dists(alphabet, "_", 0, [cell]),),
    )
    return m, s


def verify_staged(tol: float = 1e-9, seed: int = 0) -> dict:
    """The staged-write model driven through the commuting square.

    This deliberately fails: scanning the identity code tuple by tuple turns
    the even A/B mixture into the 0.375/0.625 split while the smooth step
    leaves it unchanged, a deviation of 0.125.
    """
    m, s = staged_instance()
    staged = staged_smooth_step(m, s)
    true = smooth_step(m, s)
    cell_staged = staged.tapes[0].cell(0)
    cell_true = true.tapes[0].cell(0)
    dev = staged.deviation(true)
    result = {
        "trial": 0,
        "seed": seed,
        "dims": {"states": 1, "symbols": 3},
        "cycle_lengths": [1],
        "max_deviation": dev,
        "staged_cell": {"A": cell_staged["A"], "B": cell_staged["B"]},
        "smooth_cell": {"A": cell_true["A"], "B": cell_true["B"]},
        "well_behaved": True,
        "violations": [],
        "pass": dev <= tol,
    }
    report = {
        "construction": "staged-counterexample",
        "seed": seed,
        "trials": 1,
        "tol": tol,
        "cycles": 1,
        "results": [result],
    }
    return _finish(report)


def report_json(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=2) + "\n"
