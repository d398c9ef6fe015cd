"""A two-tape pseudo-universal machine that preserves the smooth relaxation.

The machine simulates any single-tape machine with at most the configured
state count and exactly the configured alphabet.  Its first tape (the
description tape) holds the simulated transition table as 5-symbol tuples
(source state, read symbol, target state, write symbol, move direction)
between two # markers; the second tape (the working tape) is the simulated
tape itself.

One cycle scans the description left to right.  The local state distribution
starts as the joint of simulated state and read symbol; each tuple's two
filter tracts sieve out the matching term, the three load tracts distribute
it over the (target, write, move) context, and non-matching residue terms
wait for the next tuple.  All terms read the right # simultaneously, so the
whole distribution takes the closing tract at once: it writes the write
component to the working tape and moves the working head by the move
component, which is exactly the simulated machine's smooth update.  The
description head then walks back to the left #.

Codes may carry uncertainty: target state, write symbol and move direction
cells of a tuple may be distributions.  The cycle then realizes the
generalized step in which every transition component is replaced by its
distribution-valued version (:func:`utm_cycle_semantics`).

The description head's movement never depends on tape data, so its direction
distribution is an exact point mass at every step; the working head moves
only in the closing tract, by the simulated (possibly uncertain) move
distribution.

:func:`staged_write_update` models the write rule of the staged design this
construction replaces: a staged cell updated tuple by tuple, which weights
earlier-scanned tuples down and later ones up.  On the two-symbol identity
machine reading 0.5/0.5 it produces the 0.375/0.625 split instead of leaving
the distribution unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dists import ATOL, Dist, FiniteSet, product_set, stochastic_op, tensor
from .engine import SectionConfig, section_smooth_step
from .framework import EncPredicate, GeneratingTriple
from .machines import DIRECTIONS, Machine
from .sections import SectionMachine, Tract
from .smooth import (
    SmoothConfig,
    SmoothTape,
    renormalized,
    smooth_step,
    superpose_tape,
)

HASH = "#"


def _sym(a):
    return ("s", a)


def _st(q):
    return ("q", q)


def _dir(d):
    return ("d", d)


@dataclass
class UtmMachine:
    machine: SectionMachine  # 2-tape section machine
    states: FiniteSet  # simulated state set
    alphabet: FiniteSet  # simulated tape alphabet
    blank: object

    @property
    def tuples(self) -> int:
        return len(self.states) * len(self.alphabet)

    def cycle_length(self) -> int:
        # scan to the right marker, close, walk back to the left marker
        return 10 * self.tuples + 2


def build_utm(states: int | FiniteSet, alphabet: FiniteSet, blank) -> UtmMachine:
    """Emit the eight sections and all tracts of the universal machine.

    ``states`` is the simulated state set, or a count for fresh q0..qk names.
    """
    if isinstance(states, int):
        if states < 1:
            raise ValueError("need at least one simulated state")
        states = FiniteSet([f"q{i}" for i in range(states)])
    if len(states) < 1:
        raise ValueError("need at least one simulated state")
    if blank not in alphabet:
        raise ValueError("blank symbol must be in the alphabet")
    Q = states
    sym_u = (
        [_sym(a) for a in alphabet]
        + [_st(q) for q in Q]
        + [_dir(d) for d in DIRECTIONS]
        + [HASH]
    )
    alpha_u = FiniteSet(sym_u)
    SS = frozenset(_sym(a) for a in alphabet)
    QS = frozenset(_st(q) for q in Q)
    DS = frozenset(_dir(d) for d in DIRECTIONS)
    ALL = frozenset(alpha_u.elements)
    NOTDIR = ALL - DS
    NOTHASH = ALL - {HASH}

    qs = product_set(Q, alphabet)
    sections = {
        "wait": qs,
        "scan1": qs,
        "scan2": qs,
        "load1": qs,
        "load2": Q,
        "load3": qs,
        "update": product_set(Q, alphabet, DIRECTIONS),
        "read": Q,
    }
    tracts = [
        Tract(
            "wait", "wait", (NOTDIR, SS),
            lambda x, s: (x, (s[0], s[1]), (1, 0)), label="wait-loop",
        ),
        Tract(
            "wait", "scan1", (DS, SS),
            lambda x, s: (x, (s[0], s[1]), (1, 0)), label="next-tuple",
        ),
        Tract(
            "scan1", "scan2", (QS, SS),
            lambda x, s: (x, (s[0], s[1]), (1, 0)),
            guard=lambda x, s: s[0] == _st(x[0]), label="match-state",
        ),
        Tract(
            "scan1", "wait", (QS, SS),
            lambda x, s: (x, (s[0], s[1]), (1, 0)),
            guard=lambda x, s: s[0] != _st(x[0]), label="reject-state",
        ),
        Tract(
            "scan2", "load1", (SS, SS),
            lambda x, s: (x, (s[0], s[1]), (1, 0)),
            guard=lambda x, s: s[0] == _sym(x[1]), label="match-symbol",
        ),
        Tract(
            "scan2", "wait", (SS, SS),
            lambda x, s: (x, (s[0], s[1]), (1, 0)),
            guard=lambda x, s: s[0] != _sym(x[1]), label="reject-symbol",
        ),
        Tract(
            "load1", "load2", (QS, SS),
            lambda x, s: (s[0][1], (s[0], s[1]), (1, 0)), label="load-target",
        ),
        Tract(
            "load2", "load3", (SS, SS),
            lambda x, s: ((x, s[0][1]), (s[0], s[1]), (1, 0)), label="load-write",
        ),
        Tract(
            "load3", "update", (DS, SS),
            lambda x, s: (x + (s[0][1],), (s[0], s[1]), (1, 0)), label="load-move",
        ),
        Tract(
            "update", "update", (NOTHASH, SS),
            lambda x, s: (x, (s[0], s[1]), (1, 0)), label="await-close",
        ),
        Tract(
            "update", "read", (frozenset({HASH}), SS),
            lambda x, s: (x[0], (s[0], _sym(x[1])), (-1, x[2])), label="close",
        ),
        Tract(
            "read", "read", (NOTHASH, SS),
            lambda x, s: (x, (s[0], s[1]), (-1, 0)), label="rewind",
        ),
        Tract(
            "read", "scan1", (frozenset({HASH}), SS),
            lambda x, s: ((x, s[1][1]), (s[0], s[1]), (1, 0)), label="load-read",
        ),
    ]
    sm = SectionMachine(sections, tracts, alpha_u, _sym(blank), 2)
    return UtmMachine(sm, Q, alphabet, blank)


# ---------------------------------------------------------------------------
# Description tapes (codes)
# ---------------------------------------------------------------------------


@dataclass
class DescriptionTape:
    """The simulated transition table as tuple entries in scan order.

    Each entry is (state, symbol, target distribution, write distribution,
    move distribution).  Classical codes use point masses throughout; codes
    with uncertainty may put any distribution in the last three fields.  The
    (state, symbol) fields enumerate the state/symbol product bijectively.
    """

    states: FiniteSet
    alphabet: FiniteSet
    entries: list[tuple]

    def __post_init__(self):
        seen = {(q, a) for q, a, *_ in self.entries}
        if len(seen) != len(self.entries) or len(seen) != len(self.states) * len(
            self.alphabet
        ):
            raise ValueError("entries must enumerate state x symbol bijectively")

    def lookup(self) -> dict:
        return {(q, a): (t, w, d) for q, a, t, w, d in self.entries}

    def shuffled(self, rng: np.random.Generator) -> "DescriptionTape":
        order = rng.permutation(len(self.entries))
        return DescriptionTape(
            self.states, self.alphabet, [self.entries[i] for i in order]
        )


def encode_code(m: Machine, overrides: dict | None = None) -> DescriptionTape:
    """The description tape of a single-tape machine, in lexicographic order.

    ``overrides`` replaces the (target, write, move) distributions of chosen
    (state, symbol) pairs, yielding a code with uncertainty.
    """
    if m.num_tapes != 1:
        raise ValueError("the universal machine simulates single-tape machines")
    entries = []
    for q in m.states:
        for a in m.alphabet:
            if overrides and (q, a) in overrides:
                t, w, d = overrides[(q, a)]
                if (
                    t.base != m.states
                    or w.base != m.alphabet
                    or d.base != DIRECTIONS
                ):
                    raise ValueError(f"override for {(q, a)} over wrong sets")
            else:
                q2, writes, dirs = m.delta[(q, (a,))]
                t = Dist.point(m.states, q2)
                w = Dist.point(m.alphabet, writes[0])
                d = Dist.point(DIRECTIONS, dirs[0])
            entries.append((q, a, t, w, d))
    return DescriptionTape(m.states, m.alphabet, entries)


def decode_code(code: DescriptionTape) -> dict:
    """Recover the classical transition table; entries must be point masses."""
    delta = {}
    for q, a, t, w, d in code.entries:
        delta[(q, (a,))] = (
            t.point_value(),
            (w.point_value(),),
            (d.point_value(),),
        )
    return delta


def code_to_json(code: DescriptionTape) -> str:
    """Serialize a description tape, tuple cells in the config cell format."""
    import json

    def cell(d: Dist) -> dict:
        return {
            str(x): float(w)
            for x, w in zip(d.base.elements, d.weights)
            if w != 0.0
        }

    obj = {
        "states": [str(q) for q in code.states.elements],
        "alphabet": [str(a) for a in code.alphabet.elements],
        "entries": [
            {"state": str(q), "symbol": str(a), "target": cell(t),
             "write": cell(w), "move": cell(d)}
            for q, a, t, w, d in code.entries
        ],
    }
    return json.dumps(obj, sort_keys=True)


def code_from_json(text: str) -> DescriptionTape:
    import json

    from .machines import FormatError

    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"invalid JSON: {exc.msg}", exc.lineno, exc.colno) from None
    states = FiniteSet(obj["states"])
    alphabet = FiniteSet(obj["alphabet"])

    def dist(base, pairs, names=None):
        lookup = {str(x): x for x in base.elements}
        return Dist.from_pairs(
            base, {lookup[k]: float(v) for k, v in pairs.items()}
        )

    entries = []
    for e in obj["entries"]:
        entries.append(
            (
                e["state"],
                e["symbol"],
                dist(states, e["target"]),
                dist(alphabet, e["write"]),
                Dist.from_pairs(
                    DIRECTIONS, {int(k): float(v) for k, v in e["move"].items()}
                ),
            )
        )
    return DescriptionTape(states, alphabet, entries)


# ---------------------------------------------------------------------------
# Encoding / decoding of configurations
# ---------------------------------------------------------------------------


def _code_rows(utm: UtmMachine, code: DescriptionTape) -> np.ndarray:
    alpha_u = utm.machine.alphabet
    A = len(alpha_u)
    N = len(code.entries)
    rows = np.zeros((5 * N + 2, A))
    rows[0, alpha_u.index(HASH)] = 1.0
    rows[-1, alpha_u.index(HASH)] = 1.0
    for k, (q, a, t, w, d) in enumerate(code.entries):
        base = 5 * k + 1
        rows[base, alpha_u.index(_st(q))] = 1.0
        rows[base + 1, alpha_u.index(_sym(a))] = 1.0
        for i, q2 in enumerate(code.states.elements):
            rows[base + 2, alpha_u.index(_st(q2))] = t.weights[i]
        for i, a2 in enumerate(code.alphabet.elements):
            rows[base + 3, alpha_u.index(_sym(a2))] = w.weights[i]
        for i, d2 in enumerate(DIRECTIONS.elements):
            rows[base + 4, alpha_u.index(_dir(d2))] = d.weights[i]
    return rows


def encode_config(
    utm: UtmMachine, code: DescriptionTape, s: SmoothConfig
) -> SectionConfig:
    """Lay code and simulated configuration on the two tapes.

    The description head rests on the left marker; the working tape is the
    simulated tape relabeled; the state sits on the read section.
    """
    if code.states != utm.states or code.alphabet != utm.alphabet:
        raise ValueError("code does not match the build parameters: size mismatch")
    if s.state.base != utm.states or len(s.tapes) != 1:
        raise ValueError("configuration does not match the build parameters")
    alpha_u = utm.machine.alphabet
    desc = SmoothTape(alpha_u, _sym(utm.blank), 0, _code_rows(utm, code))
    src = s.tapes[0]
    nsym = len(utm.alphabet)
    work_rows = np.zeros((len(src.cells), len(alpha_u)))
    work_rows[:, :nsym] = src.cells
    work = SmoothTape(alpha_u, _sym(utm.blank), src.lo, work_rows)
    state = {"read": np.array(s.state.weights)}
    return SectionConfig(utm.machine, state, (desc, work))


def _is_code_restored(utm: UtmMachine, code_rows: np.ndarray, tape: SmoothTape) -> bool:
    # the code is part of the encoding and must be back in place each cycle
    if tape.lo != 0 or tape.hi != len(code_rows) - 1:
        return False
    return bool(np.abs(tape.cells - code_rows).max() <= ATOL)


def encoding_of(utm: UtmMachine, code: DescriptionTape, cfg: SectionConfig, strict=False):
    """Parse a runner state as an encoding of a simulated configuration."""

    def fail(msg):
        if strict:
            raise ValueError(f"not a valid encoding: {msg}")
        return None

    if set(cfg.state.keys()) != {"read"}:
        return fail(f"state mass outside section read ({sorted(cfg.state)})")
    code_rows = _code_rows(utm, code)
    if not _is_code_restored(utm, code_rows, cfg.tapes[0]):
        return fail("description tape differs from the code")
    work = cfg.tapes[1]
    nsym = len(utm.alphabet)
    if work.cells[:, nsym:].any():
        return fail("working tape holds non-alphabet mass")
    return Dist(utm.states, cfg.state["read"])


def decode_config(
    utm: UtmMachine, code: DescriptionTape, cfg: SectionConfig
) -> SmoothConfig:
    """State from the read section, working tape relabeled back."""
    state = encoding_of(utm, code, cfg, strict=True)
    work = cfg.tapes[1]
    nsym = len(utm.alphabet)
    tape = SmoothTape(utm.alphabet, utm.blank, work.lo, work.cells[:, :nsym])
    return SmoothConfig(state, (tape,))


# ---------------------------------------------------------------------------
# Reference semantics and the generating triple
# ---------------------------------------------------------------------------


def utm_cycle_semantics(code: DescriptionTape, s: SmoothConfig) -> SmoothConfig:
    """The generalized smooth step with the code's distribution-valued
    transition components; equals the plain smooth step on classical codes."""
    table = code.lookup()
    base = product_set(code.states, code.alphabet)
    t_op = stochastic_op(lambda e: table[e][0], base)
    w_op = stochastic_op(lambda e: table[e][1], base)
    d_op = stochastic_op(lambda e: table[e][2], base)
    local = tensor(s.state, s.tapes[0].cell(0))
    state2 = t_op(local)
    w = w_op(local)
    d = d_op(local)
    state2 = Dist(state2.base, renormalized(state2.weights, "state"))
    w = Dist(w.base, renormalized(w.weights, "write"))
    d = Dist(d.base, renormalized(d.weights, "direction"))
    return SmoothConfig(state2, (superpose_tape(s.tapes[0], w, d),))


def _utm_step_checks(t: int, cfg: SectionConfig, info) -> list[str]:
    out = []
    if not info.direction_point_mass(0):
        out.append("description head direction is not a point mass")
    closing = any(src == "update" and tgt == "read" for src, tgt in info.flows)
    if not closing and not info.direction_point_mass(1):
        out.append("working head moved outside the closing tract")
    worst = cfg.check_simplex()
    if worst > ATOL:
        out.append(f"simplex violation {worst}")
    return out


def make_triple(utm: UtmMachine, code: DescriptionTape) -> GeneratingTriple:
    enc = EncPredicate(
        holds=lambda cfg: encoding_of(utm, code, cfg) is not None,
        certify_outside=lambda cfg: "read" not in cfg.state
        or cfg.tapes[0].row(0)[utm.machine.alphabet.index(HASH)] == 0.0,
        describe="code in place, state on the read section",
    )
    return GeneratingTriple(
        name="pseudo-utm",
        stepper=section_smooth_step,
        enc=enc,
        decode=lambda cfg: decode_config(utm, code, cfg),
        target_step=lambda s: utm_cycle_semantics(code, s),
        max_steps=10 * utm.cycle_length(),
        machine=utm.machine,
        target=None,
        step_checks=_utm_step_checks,
    )


# ---------------------------------------------------------------------------
# The staged-write model (the design this construction replaces)
# ---------------------------------------------------------------------------


def staged_write_update(read_dist: Dist, tuples) -> Dist:
    """The staged write cell after scanning all tuples, interpreted.

    The cell starts as a placeholder meaning "write back the read symbol";
    scanning a tuple with match probability p and write distribution w turns
    the cell c into (1-p)c + pw.  At the end the placeholder's remaining
    weight is substituted by the read distribution.  The result depends on
    the scan order, which is exactly how this model loses preservation.
    """
    placeholder = 1.0
    acc = np.zeros(len(read_dist.base))
    for p, w in tuples:
        if not 0.0 <= p <= 1.0 + ATOL:
            raise ValueError(f"match probability {p} outside [0, 1]")
        if w.base != read_dist.base:
            raise ValueError("write distribution over the wrong alphabet")
        placeholder *= 1.0 - p
        acc = (1.0 - p) * acc + p * w.weights
    return Dist(read_dist.base, acc + placeholder * read_dist.weights)


def staged_smooth_step(m: Machine, s: SmoothConfig, order=None) -> SmoothConfig:
    """A smooth step whose head-cell write uses the staged update rule.

    State and move direction update as usual; only the written cell follows
    the staged model, with tuple (q, a) matching with probability
    <q, state><a, read cell>.  Deviates from the true smooth step whenever
    the read cell is uncertain and tuples disagree on the write symbol.
    """
    if m.num_tapes != 1:
        raise ValueError("staged model covers single-tape machines")
    y0 = s.tapes[0].cell(0)
    pairs = order or [(q, a) for q in m.states for a in m.alphabet]
    tuples = []
    for q, a in pairs:
        p = s.state[q] * y0[a]
        w = Dist.point(m.alphabet, m.delta[(q, (a,))][1][0])
        tuples.append((p, w))
    staged = staged_write_update(y0, tuples)
    true_step = smooth_step(m, s)
    # substitute the staged write into the otherwise standard update
    from .smooth import machine_ops

    ops = machine_ops(m)
    local = tensor(s.state, y0)
    d = ops["dir"][0](local)
    d = Dist(d.base, renormalized(d.weights, "direction"))
    tape = superpose_tape(s.tapes[0], staged, d)
    return SmoothConfig(true_step.state, (tape,))
