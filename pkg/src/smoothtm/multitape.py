"""Compile any n-tape machine to a single-tape section machine that
preserves the smooth relaxation.

Encoding layout.  The n tapes are interleaved column by column: simulated
cell (tape j, index i) sits at single-tape position n*i + (j-1) for i >= 0
and n*(i-1) + (j-1) for i < 0, the gap of n cells at positions [-n, -1]
holding the head-marker column #0.  A border column of #L markers sits at
simulated column L-1 and one of #R at column R+1, where [L, R] covers all
non-blank support with L <= -2, R >= 2.  Walking right on the single tape
moves down a column and wraps to the top of the next.

One cycle simulates one smooth step of the source machine in four phases:

* read: walk down column 0 loading every head cell into the context, so the
  local state distribution becomes the full joint of state and read symbols;
* write: walk back up column 0 replacing each cell with its write
  distribution (computed from the context joint, so nothing is lost to the
  naive independence assumptions);
* parallel move, once per row from the bottom row up: shift the row's left
  border out one column, then sweep left to right computing each cell's
  superposition over move directions with the three-argument selector
  applied to the context joint (the two loaded neighbour cells ride along in
  the context), finally shift the right border out and write the two
  right-edge superpositions;
* state update: return the head to the cell formerly holding tape 1's head
  cell and push the context joint through the state component.

Head-position determinism: every data cell keeps its support inside the
source alphabet and every marker cell is an exact point mass, so at each
step exactly one tract can carry mass and the single-tape direction
distribution is an exact point mass.  Borders drift out one column per side
per cycle regardless of the distributions, which keeps cycle lengths a
deterministic function of the geometry.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dists import ATOL, Dist, FiniteSet, product_set
from .engine import SectionConfig, section_smooth_step
from .framework import EncPredicate, GeneratingTriple
from .machines import Machine
from .sections import SectionMachine, Tract
from .smooth import SmoothConfig, SmoothTape, smooth_step

MARK_L, MARK_0, MARK_R = "#L", "#0", "#R"


def cell_position(n: int, tape_j: int, i: int) -> int:
    """Single-tape position of simulated cell (tape_j, i); tape_j is 1-based.

    All geometry (encoder, decoder, tract emitter) goes through this one
    function.  Negative columns shift left by one column width to make room
    for the #0 marker column at positions [-n, -1].
    """
    if not 1 <= tape_j <= n:
        raise ValueError("tape index out of range")
    col = i if i >= 0 else i - 1
    return n * col + (tape_j - 1)


@dataclass
class InterleavedEncoding:
    """A source configuration laid out on the single tape."""

    n: int
    L: int
    R: int
    state_local: Dist  # over the source machine's states
    tape: SmoothTape  # over the simulator's alphabet


@dataclass
class CompiledSim:
    source: Machine
    machine: SectionMachine
    broken: bool = False

    @property
    def n(self) -> int:
        return self.source.num_tapes


def compile_multitape(m: Machine, broken: bool = False) -> CompiledSim:
    """Emit the simulator's sections and tracts for all n rows.

    ``broken=True`` redirects the state-update tract to fire right after the
    write phase (skipping the parallel move), a deliberate mutation used to
    show the verifier is not vacuous.
    """
    n = m.num_tapes
    Q, SIGMA = m.states, m.alphabet
    blank = m.blank
    for mark in (MARK_L, MARK_0, MARK_R):
        if mark in SIGMA:
            raise ValueError(f"source alphabet reserves {mark!r}")
    alphabet = FiniteSet(tuple(SIGMA.elements) + (MARK_L, MARK_0, MARK_R))
    SIG = frozenset(SIGMA.elements)
    BLANK = frozenset({blank})
    HL, H0, HR = frozenset({MARK_L}), frozenset({MARK_0}), frozenset({MARK_R})

    ctx_w = product_set(Q, *[SIGMA] * n)  # (q, s1..sn)
    ctx_p2 = product_set(Q, *[SIGMA] * (n + 2))  # + two loaded cells
    ctx_p3 = product_set(Q, *[SIGMA] * (n + 3))  # + three loaded cells

    def trans(x):
        return m.delta[(x[0], tuple(x[1 : 1 + n]))]

    def psi(x, j0, c1, c2, c3):
        # selector over written neighbours by the row's move direction
        d = trans(x)[2][j0]
        return c1 if d == -1 else (c2 if d == 0 else c3)

    sections: dict[str, FiniteSet] = {}
    tracts: list[Tract] = []

    def emit(src, tgt, reads, apply, label):
        tracts.append(Tract(src, tgt, (frozenset(reads),), apply, label=label))

    # read phase: R1..Rn down column 0, loading head cells
    for k in range(1, n + 1):
        sections[f"R{k}"] = Q if k == 1 else product_set(Q, *[SIGMA] * (k - 1))
    sections["W1"] = ctx_w
    for k in range(1, n + 1):
        tgt = f"R{k+1}" if k < n else "W1"
        move = 1 if k < n else 0
        if k == 1:
            emit("R1", tgt, SIG, lambda x, s, d=move: ((x, s[0]), (s[0],), (d,)), "read1")
        else:
            emit(
                f"R{k}", tgt, SIG,
                lambda x, s, d=move: (x + (s[0],), (s[0],), (d,)),
                f"read{k}",
            )

    # write phase: Wk at position n-k writes tape (n-k+1)'s symbol
    for k in range(1, n + 1):
        sections[f"W{k}"] = ctx_w
        if k < n:
            tgt = f"W{k+1}"
        elif broken:
            tgt = "R1"
        else:
            tgt = f"MLB1.{n}"
        tape0 = n - k  # 0-based tape written here
        if k == n and broken:
            # mutation: perform the state update here, skipping the move phase
            emit(
                f"W{k}", tgt, SIG,
                lambda x, s, t0=tape0: (trans(x)[0], (trans(x)[1][t0],), (-1,)),
                f"write{k}-broken",
            )
        else:
            emit(
                f"W{k}", tgt, SIG,
                lambda x, s, t0=tape0: (x, (trans(x)[1][t0],), (-1,)),
                f"write{k}",
            )

    drop_first_load = lambda x: x[: n + 1] + x[n + 2 :]
    drop_loads = lambda x: x[: n + 1]

    for j in range(n, 0, -1):
        j0 = j - 1
        after_row = f"MLB1.{j-1}" if j > 1 else "SU"

        # left border shift: seek the row's #L, erase it, rewrite one column
        # further out, return to the erased cell
        sections[f"MLB1.{j}"] = ctx_w
        sections[f"MLB2.{j}"] = ctx_w
        sections[f"MLB3.{j}"] = ctx_w
        emit(f"MLB1.{j}", f"MLB1.{j}", SIG | H0,
             lambda x, s: (x, (s[0],), (-1,)), f"seek-left.{j}")
        emit(f"MLB1.{j}", f"MLB2.{j}", HL,
             lambda x, s: (x, (blank,), (-1,)), f"erase-border.{j}")
        emit(f"MLB2.{j}", f"MLB2.{j}", HL,
             lambda x, s: (x, (MARK_L,), (-1,)), f"cross-border-out.{j}")
        emit(f"MLB2.{j}", f"MLB3.{j}", BLANK,
             lambda x, s: (x, (MARK_L,), (1,)), f"plant-border.{j}")
        emit(f"MLB3.{j}", f"MLB3.{j}", HL,
             lambda x, s: (x, (MARK_L,), (1,)), f"cross-border-back.{j}")
        first_walk = f"MLE1.{j}" if n > 1 else f"MLEload.{j}"
        emit(f"MLB3.{j}", first_walk, BLANK,
             lambda x, s: (x, (blank,), (1,)), f"enter-edge.{j}")

        # left edge: walk to the leftmost data column, load it, write the
        # superposition of the freshly opened column (both outer neighbours
        # blank), entering the main loop's steady state
        for s_ in range(1, n):
            sections[f"MLE{s_}.{j}"] = ctx_w
            tgt = f"MLE{s_+1}.{j}" if s_ < n - 1 else f"MLEload.{j}"
            emit(f"MLE{s_}.{j}", tgt, SIG,
                 lambda x, s: (x, (s[0],), (1,)), f"edge-walk{s_}.{j}")
        sections[f"MLEload.{j}"] = ctx_w
        back_or_write = f"MMLback1.{j}" if n > 1 else f"MMLwrite.{j}"
        emit(f"MLEload.{j}", back_or_write, SIG,
             lambda x, s: (x + (blank, blank, s[0]), (s[0],), (-1,)),
             f"edge-load.{j}")

        # main loop: load the next cell, walk back, write the superposition,
        # walk out two columns
        for s_ in range(1, n):
            sections[f"MMLback{s_}.{j}"] = ctx_p3
            tgt = f"MMLback{s_+1}.{j}" if s_ < n - 1 else f"MMLwrite.{j}"
            emit(f"MMLback{s_}.{j}", tgt, SIG,
                 lambda x, s: (x, (s[0],), (-1,)), f"back{s_}.{j}")
            emit(f"MMLback{s_}.{j}", f"MMLback{s_}.{j}", H0,
                 lambda x, s: (x, (s[0],), (-1,)), f"back-skip{s_}.{j}")
        sections[f"MMLwrite.{j}"] = ctx_p3
        emit(
            f"MMLwrite.{j}", f"MMLout1.{j}", SIG,
            lambda x, s, j0=j0: (
                drop_first_load(x),
                (psi(x, j0, x[n + 1], x[n + 2], x[n + 3]),),
                (1,),
            ),
            f"superpose.{j}",
        )
        emit(f"MMLwrite.{j}", f"MMLwrite.{j}", H0,
             lambda x, s: (x, (s[0],), (-1,)), f"write-skip.{j}")
        for s_ in range(1, 2 * n):
            sections[f"MMLout{s_}.{j}"] = ctx_p2
            tgt = f"MMLout{s_+1}.{j}" if s_ < 2 * n - 1 else f"MMLload.{j}"
            # border cells of not-yet-shifted rows sit at counted positions,
            # so #R advances the chain; the #0 column is extra, so it loops
            emit(f"MMLout{s_}.{j}", tgt, SIG | HR,
                 lambda x, s: (x, (s[0],), (1,)), f"out{s_}.{j}")
            emit(f"MMLout{s_}.{j}", f"MMLout{s_}.{j}", H0,
                 lambda x, s: (x, (s[0],), (1,)), f"out-skip{s_}.{j}")
        sections[f"MMLload.{j}"] = ctx_p2
        emit(f"MMLload.{j}", back_or_write, SIG,
             lambda x, s: (x + (s[0],), (s[0],), (-1,)), f"load.{j}")
        emit(f"MMLload.{j}", f"MMLload.{j}", H0,
             lambda x, s: (x, (s[0],), (1,)), f"load-skip.{j}")

        # right border shift: erase the row's #R, plant it one column out,
        # return to the erased cell
        out_or_write = f"MRBout1.{j}" if n > 1 else f"MRBwrite.{j}"
        emit(f"MMLload.{j}", out_or_write, HR,
             lambda x, s: (x, (blank,), (1,)), f"erase-right.{j}")
        for s_ in range(1, n):
            sections[f"MRBout{s_}.{j}"] = ctx_p2
            tgt = f"MRBout{s_+1}.{j}" if s_ < n - 1 else f"MRBwrite.{j}"
            emit(f"MRBout{s_}.{j}", tgt, SIG,
                 lambda x, s: (x, (s[0],), (1,)), f"rb-out{s_}.{j}")
        sections[f"MRBwrite.{j}"] = ctx_p2
        back2_or_re = f"MRBback1.{j}" if n > 1 else f"MRE1.{j}"
        emit(f"MRBwrite.{j}", back2_or_re, BLANK,
             lambda x, s: (x, (MARK_R,), (-1,)), f"plant-right.{j}")
        for s_ in range(1, n):
            sections[f"MRBback{s_}.{j}"] = ctx_p2
            tgt = f"MRBback{s_+1}.{j}" if s_ < n - 1 else f"MRE1.{j}"
            emit(f"MRBback{s_}.{j}", tgt, SIG,
                 lambda x, s: (x, (s[0],), (-1,)), f"rb-back{s_}.{j}")

        # right edge: the opened column sees (last data cell, blank, blank);
        # the last data column sees (loaded pair, blank)
        sections[f"MRE1.{j}"] = ctx_p2
        walk_or_re2 = f"MREwalk1.{j}" if n > 1 else f"MRE2.{j}"
        emit(
            f"MRE1.{j}", walk_or_re2, BLANK,
            lambda x, s, j0=j0: (x, (psi(x, j0, x[n + 2], blank, blank),), (-1,)),
            f"edge-right1.{j}",
        )
        for s_ in range(1, n):
            sections[f"MREwalk{s_}.{j}"] = ctx_p2
            tgt = f"MREwalk{s_+1}.{j}" if s_ < n - 1 else f"MRE2.{j}"
            emit(f"MREwalk{s_}.{j}", tgt, SIG | HR,
                 lambda x, s: (x, (s[0],), (-1,)), f"re-walk{s_}.{j}")
        sections[f"MRE2.{j}"] = ctx_p2
        emit(
            f"MRE2.{j}", after_row, SIG,
            lambda x, s, j0=j0: (
                drop_loads(x),
                (psi(x, j0, x[n + 1], x[n + 2], blank),),
                (-1,),
            ),
            f"edge-right2.{j}",
        )

    # state update: return to the cell formerly holding tape 1's head cell,
    # then push the context joint through the state component
    sections["SU"] = ctx_w
    sections["S"] = ctx_w
    emit("SU", "SU", SIG, lambda x, s: (x, (s[0],), (-1,)), "seek-head")
    emit("SU", "S", H0, lambda x, s: (x, (MARK_0,), (1,)), "found-head")
    emit("S", "R1", SIG, lambda x, s: (trans(x)[0], (s[0],), (0,)), "state-update")

    sm = SectionMachine(sections, tracts, alphabet, blank, 1)
    return CompiledSim(source=m, machine=sm, broken=broken)


# ---------------------------------------------------------------------------
# Encoder / decoder / encoding predicate
# ---------------------------------------------------------------------------


def encode(
    sim: CompiledSim, s: SmoothConfig, L: int | None = None, R: int | None = None
) -> InterleavedEncoding:
    """Lay a source configuration out on the single tape.

    By default L and R are minimal with L <= -2, R >= 2 covering all
    non-blank support; any wider borders are equally valid encodings.
    """
    m = sim.source
    n = sim.n
    if s.state.base != m.states or len(s.tapes) != n:
        raise ValueError("configuration does not fit the compiled machine")
    min_L = min([-2] + [t.lo for t in s.tapes])
    max_R = max([2] + [t.hi for t in s.tapes])
    L = min_L if L is None else L
    R = max_R if R is None else R
    if L > min_L or R < max_R:
        raise ValueError("borders must cover all non-blank support")
    alphabet = sim.machine.alphabet
    A = len(alphabet)
    lo = cell_position(n, 1, L - 1)
    hi = cell_position(n, n, R + 1)
    rows = np.zeros((hi - lo + 1, A))
    rows[:, alphabet.index(m.blank)] = 1.0
    for j in range(1, n + 1):
        for marker, col in ((MARK_L, L - 1), (MARK_R, R + 1)):
            p = cell_position(n, j, col)
            rows[p - lo] = 0.0
            rows[p - lo, alphabet.index(marker)] = 1.0
    for p in range(-n, 0):
        rows[p - lo] = 0.0
        rows[p - lo, alphabet.index(MARK_0)] = 1.0
    nsym = len(m.alphabet)
    for j, tape in enumerate(s.tapes, start=1):
        for i in range(tape.lo, tape.hi + 1):
            p = cell_position(n, j, i)
            rows[p - lo] = 0.0
            rows[p - lo, :nsym] = tape.row(i)
    return InterleavedEncoding(
        n, L, R, s.state, SmoothTape(alphabet, m.blank, lo, rows)
    )


def to_section_config(sim: CompiledSim, enc: InterleavedEncoding) -> SectionConfig:
    return SectionConfig(
        sim.machine, {"R1": np.array(enc.state_local.weights)}, (enc.tape,)
    )


def _exact_point_row(row: np.ndarray, idx: int) -> bool:
    return row[idx] == 1.0 and np.count_nonzero(row) == 1


def encoding_of(sim: CompiledSim, cfg: SectionConfig, strict: bool = False):
    """Parse a runner state as an encoding; None (or raise) when it is not.

    Checks the full structural predicate: state supported on the first read
    section, aligned exact marker columns for some L <= -2 and R >= 2, and
    data cells supported in the source alphabet.
    """
    def fail(msg):
        if strict:
            raise ValueError(f"not a valid encoding: {msg}")
        return None

    m = sim.source
    n = sim.n
    if set(cfg.state.keys()) != {"R1"}:
        return fail(f"state mass outside section R1 ({sorted(cfg.state)})")
    tape = cfg.tapes[0]
    alphabet = tape.alphabet
    lo, hi = tape.lo, tape.hi
    if lo % n != 0 or (hi + 1) % n != 0:
        return fail("window not column-aligned")
    L = lo // n + 2
    R = (hi + 1) // n - 2
    if L > -2 or R < 2:
        return fail(f"borders inside the excluded zone (L={L}, R={R})")
    for j in range(1, n + 1):
        for marker, col in ((MARK_L, L - 1), (MARK_R, R + 1)):
            p = cell_position(n, j, col)
            if not _exact_point_row(tape.row(p), alphabet.index(marker)):
                return fail(f"marker {marker} missing at row {j}")
    for p in range(-n, 0):
        if not _exact_point_row(tape.row(p), alphabet.index(MARK_0)):
            return fail("head marker column corrupted")
    nsym = len(m.alphabet)
    for j in range(1, n + 1):
        for i in range(L, R + 1):
            row = tape.row(cell_position(n, j, i))
            if row[nsym:].any():
                return fail(f"marker mass in data cell (tape {j}, index {i})")
    state = Dist(m.states, cfg.state["R1"])
    return InterleavedEncoding(n, L, R, state, tape)


def decode(sim: CompiledSim, enc) -> SmoothConfig:
    """Read the encoded configuration back off the single tape."""
    if isinstance(enc, SectionConfig):
        parsed = encoding_of(sim, enc, strict=True)
    else:
        parsed = enc
    m = sim.source
    n = sim.n
    nsym = len(m.alphabet)
    tapes = []
    for j in range(1, n + 1):
        dists = [
            Dist(m.alphabet, parsed.tape.row(cell_position(n, j, i))[:nsym])
            for i in range(parsed.L, parsed.R + 1)
        ]
        tapes.append(SmoothTape.from_dists(m.alphabet, m.blank, parsed.L, dists))
    return SmoothConfig(parsed.state_local, tuple(tapes))


def encoding_to_json(enc: InterleavedEncoding) -> str:
    """Serialize an encoding: cell distributions plus the {L, R, n} record."""
    import json

    tape = enc.tape
    obj = {
        "L": enc.L,
        "R": enc.R,
        "n": enc.n,
        "state": {
            str(x): float(w)
            for x, w in zip(enc.state_local.base.elements, enc.state_local.weights)
            if w != 0.0
        },
        "tape": {
            "lo": tape.lo,
            "cells": [
                {
                    str(a): float(w)
                    for a, w in zip(tape.alphabet.elements, tape.row(i))
                    if w != 0.0
                }
                for i in range(tape.lo, tape.hi + 1)
            ],
        },
    }
    return json.dumps(obj, sort_keys=True)


def encoding_from_json(sim: CompiledSim, text: str) -> InterleavedEncoding:
    import json

    from .machines import FormatError

    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"invalid JSON: {exc.msg}", exc.lineno, exc.colno) from None
    for key in ("L", "R", "n", "state", "tape"):
        if key not in obj:
            raise FormatError(f"encoding record missing {key!r}")
    if obj["n"] != sim.n:
        raise FormatError(f"encoding is for {obj['n']} tapes, machine has {sim.n}")
    alphabet = sim.machine.alphabet
    lookup = {str(a): a for a in alphabet.elements}
    rows = []
    for cell in obj["tape"]["cells"]:
        row = np.zeros(len(alphabet))
        for k, v in cell.items():
            if k not in lookup:
                raise FormatError(f"unknown symbol {k!r}")
            row[alphabet.index(lookup[k])] = float(v)
        rows.append(row)
    tape = SmoothTape(alphabet, sim.source.blank, int(obj["tape"]["lo"]), np.array(rows))
    qlookup = {str(q): q for q in sim.source.states.elements}
    state = Dist.from_pairs(
        sim.source.states,
        {qlookup[k]: float(v) for k, v in obj["state"].items() if k in qlookup},
    )
    enc = InterleavedEncoding(sim.n, int(obj["L"]), int(obj["R"]), state, tape)
    parsed = encoding_of(sim, to_section_config(sim, enc), strict=True)
    if (parsed.L, parsed.R) != (enc.L, enc.R):
        raise FormatError("side record disagrees with the marker geometry")
    return enc


def _sim_step_checks(t: int, cfg: SectionConfig, info) -> list[str]:
    out = []
    if not info.direction_point_mass(0):
        out.append("single-tape direction distribution is not a point mass")
    if len(cfg.state) != 1:
        out.append(f"state mass split across sections {sorted(cfg.state)}")
    worst = cfg.check_simplex()
    if worst > ATOL:
        out.append(f"simplex violation {worst}")
    return out


def cycle_steps_bound(n: int, width: int) -> int:
    """Loose upper bound on one cycle's step count for window width R-L."""
    per_row = 8 * n * (width + 8) + 12 * n
    return 2 * n + n * per_row + 2 * n * (width + 8) + 4


def make_triple(sim: CompiledSim, width_hint: int = 24) -> GeneratingTriple:
    """The generating triple of a compiled simulator."""
    enc = EncPredicate(
        holds=lambda cfg: encoding_of(sim, cfg) is not None,
        certify_outside=lambda cfg: "R1" not in cfg.state,
        describe="interleaved encoding with state on R1",
    )
    return GeneratingTriple(
        name="multitape-sim",
        stepper=section_smooth_step,
        enc=enc,
        decode=lambda cfg: decode(sim, cfg),
        target_step=lambda s: smooth_step(sim.source, s),
        max_steps=10 * cycle_steps_bound(sim.n, width_hint),
        machine=sim.machine,
        target=sim.source,
        step_checks=_sim_step_checks,
    )


def _blank_encoding(sim: CompiledSim, radius: int) -> SectionConfig:
    m = sim.source
    state = Dist.point(m.states, m.states.elements[0])
    tapes = tuple(
        SmoothTape.blank_tape(m.alphabet, m.blank) for _ in range(sim.n)
    )
    enc = encode(sim, SmoothConfig(state, tapes), L=-radius, R=radius)
    return to_section_config(sim, enc)


def measure_cycle_length(sim: CompiledSim, radius: int) -> int:
    """Steps of one cycle at window half-width ``radius`` (blank input)."""
    cfg = _blank_encoding(sim, radius)
    bound = 10 * cycle_steps_bound(sim.n, 2 * radius + 4)
    for t in range(1, bound + 1):
        cfg, _ = section_smooth_step(cfg)
        if encoding_of(sim, cfg) is not None:
            return t
    raise RuntimeError("compiled machine does not cycle")


def metadata(sim: CompiledSim) -> dict:
    """Section counts and cycle-length parameters for the compile report."""
    m = sim.source
    meta = {
        "tapes": sim.n,
        "source_states": len(m.states),
        "source_symbols": len(m.alphabet),
        "sections": len(sim.machine.sections),
        "states": sim.machine.state_count(),
    }
    if sim.broken:
        meta["broken"] = True
        return meta
    # cycle length is base + per_width*(R-L); fit from two geometries
    t4 = measure_cycle_length(sim, 2)
    t6 = measure_cycle_length(sim, 3)
    b = (t6 - t4) // 2
    meta["cycle_length_base"] = t4 - 4 * b
    meta["cycle_length_per_width"] = b
    return meta
