"""Classical n-tape Turing machines and their step function.

Head-centric convention: the head of every tape is always at index 0 and a
move by d re-indexes the whole tape, sending the cell formerly at i+d to i.
This matches the update rule the smooth relaxation is defined against, and
differs from the usual "head moves" picture only by reindexing.

Machines carry no initial or halting state; initial configurations are
supplied externally.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Hashable, Mapping

from .dists import FiniteSet

DIRECTIONS = FiniteSet((-1, 0, 1))

_DIR_NAMES = {-1: "L", 0: "S", 1: "R"}
_DIR_VALUES = {"L": -1, "S": 0, "R": 1}


class FormatError(ValueError):
    """Raised on malformed machine or configuration text."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        where = ""
        if line is not None:
            where = f"line {line}"
            if column is not None:
                where += f", column {column}"
            where += ": "
        super().__init__(where + message)
        self.line = line
        self.column = column


class Machine:
    """An n-tape Turing machine with a total transition table.

    ``delta`` maps (state, read-symbol vector) to (state, write vector,
    direction vector) with directions in {-1, 0, 1}.  ``fills`` marks table
    entries that were added only to make delta total (stuck self-loops for
    unreachable pairs); verifiers assert they are never exercised.
    """

    def __init__(
        self,
        states: FiniteSet,
        alphabet: FiniteSet,
        blank: Hashable,
        num_tapes: int,
        delta: Mapping,
        fills: frozenset = frozenset(),
    ):
        if blank not in alphabet:
            raise ValueError("blank symbol must be in the alphabet")
        if num_tapes < 1:
            raise ValueError("need at least one tape")
        self.states = states
        self.alphabet = alphabet
        self.blank = blank
        self.num_tapes = num_tapes
        self.delta = dict(delta)
        self.fills = fills
        self._validate()

    def _validate(self):
        from itertools import product

        for q in self.states:
            for syms in product(self.alphabet.elements, repeat=self.num_tapes):
                key = (q, syms)
                if key not in self.delta:
                    raise ValueError(f"delta is not total: missing {key!r}")
                q2, writes, dirs = self.delta[key]
                if q2 not in self.states:
                    raise ValueError(f"delta target state {q2!r} unknown")
                if len(writes) != self.num_tapes or len(dirs) != self.num_tapes:
                    raise ValueError(f"delta entry arity mismatch at {key!r}")
                for w in writes:
                    if w not in self.alphabet:
                        raise ValueError(f"delta write symbol {w!r} unknown")
                for d in dirs:
                    if d not in (-1, 0, 1):
                        raise ValueError(f"delta direction {d!r} not in -1/0/1")

    def __repr__(self):
        return (
            f"Machine(|Q|={len(self.states)}, |Sigma|={len(self.alphabet)}, "
            f"tapes={self.num_tapes})"
        )


@dataclass(frozen=True)
class Tape:
    """One tape: a finite window of symbols, blank outside, head at index 0.

    The window is canonical: it is the tight bounding box of the non-blank
    cells, or the single cell {0} when the tape is entirely blank.
    """

    blank: Hashable
    lo: int
    cells: tuple

    @classmethod
    def blank_tape(cls, blank) -> "Tape":
        return cls(blank, 0, (blank,))

    @classmethod
    def from_cells(cls, blank, lo: int, cells) -> "Tape":
        return cls(blank, lo, tuple(cells))._trim()

    def cell(self, i: int):
        j = i - self.lo
        if 0 <= j < len(self.cells):
            return self.cells[j]
        return self.blank

    @property
    def hi(self) -> int:
        return self.lo + len(self.cells) - 1

    def _trim(self) -> "Tape":
        cells = list(self.cells)
        lo = self.lo
        while cells and cells[-1] == self.blank:
            cells.pop()
        while cells and cells[0] == self.blank:
            cells.pop(0)
            lo += 1
        if not cells:
            return Tape(self.blank, 0, (self.blank,))
        return Tape(self.blank, lo, tuple(cells))

    def write0(self, symbol) -> "Tape":
        """Replace the cell under the head (index 0)."""
        lo, cells = self.lo, list(self.cells)
        if 0 < lo:
            cells = [self.blank] * lo + cells
            lo = 0
        elif 0 > self.hi:
            cells = cells + [self.blank] * (0 - self.hi)
        cells[0 - lo] = symbol
        return Tape(self.blank, lo, tuple(cells))

    def shift(self, d: int) -> "Tape":
        """Re-index so the new cell i holds the old cell i+d."""
        return Tape(self.blank, self.lo - d, self.cells)._trim()

    def nonblank(self) -> dict:
        return {
            self.lo + j: s for j, s in enumerate(self.cells) if s != self.blank
        }


@dataclass(frozen=True)
class Configuration:
    state: Hashable
    tapes: tuple[Tape, ...]


def step(m: Machine, c: Configuration) -> Configuration:
    """One application of the machine's step function."""
    syms = tuple(t.cell(0) for t in c.tapes)
    q2, writes, dirs = m.delta[(c.state, syms)]
    tapes = tuple(
        t.write0(w).shift(d) for t, w, d in zip(c.tapes, writes, dirs)
    )
    return Configuration(q2, tapes)


def run(m: Machine, c: Configuration, t: int) -> Configuration:
    """t-fold iteration of step (t >= 0)."""
    if t < 0:
        raise ValueError("step count must be nonnegative")
    for _ in range(t):
        c = step(m, c)
    return c


# ---------------------------------------------------------------------------
# Text format
#
#   states: q0 q1 ...
#   alphabet: _ A B ...        (first symbol is the blank)
#   tapes: n
#   q a1 .. an -> q' b1 .. bn d1 .. dn      (d in L/S/R), one per transition
# ---------------------------------------------------------------------------


def parse_machine(text: str) -> Machine:
    states = None
    alphabet = None
    blank = None
    num_tapes = None
    delta = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip() if raw.lstrip().startswith("#") else raw.strip()
        if not line:
            continue
        if line.startswith("states:"):
            states = FiniteSet(line[len("states:"):].split())
            continue
        if line.startswith("alphabet:"):
            symbols = line[len("alphabet:"):].split()
            if not symbols:
                raise FormatError("alphabet line lists no symbols", lineno)
            alphabet = FiniteSet(symbols)
            blank = symbols[0]
            continue
        if line.startswith("tapes:"):
            try:
                num_tapes = int(line[len("tapes:"):].strip())
            except ValueError:
                raise FormatError("tape count is not an integer", lineno) from None
            continue
        if states is None or alphabet is None or num_tapes is None:
            raise FormatError(
                "transition before states/alphabet/tapes headers", lineno
            )
        if "->" not in line:
            raise FormatError("expected 'lhs -> rhs' transition", lineno)
        lhs, rhs = line.split("->", 1)
        ltoks, rtoks = lhs.split(), rhs.split()
        n = num_tapes
        if len(ltoks) != 1 + n:
            raise FormatError(f"expected state and {n} read symbols", lineno)
        if len(rtoks) != 1 + 2 * n:
            raise FormatError(
                f"expected state, {n} write symbols and {n} directions", lineno
            )
        q, syms = ltoks[0], tuple(ltoks[1:])
        q2, writes, dirtoks = rtoks[0], tuple(rtoks[1 : 1 + n]), rtoks[1 + n :]
        for tok, pool, what in (
            (q, states, "state"),
            (q2, states, "state"),
        ):
            if tok not in pool:
                raise FormatError(
                    f"unknown {what} {tok!r}", lineno, raw.find(tok) + 1
                )
        for s in syms + writes:
            if s not in alphabet:
                raise FormatError(
                    f"unknown symbol {s!r}", lineno, raw.find(s) + 1
                )
        dirs = []
        for d in dirtoks:
            if d not in _DIR_VALUES:
                raise FormatError(
                    f"unknown direction {d!r} (want L/S/R)", lineno, raw.find(d) + 1
                )
            dirs.append(_DIR_VALUES[d])
        key = (q, syms)
        if key in delta:
            raise FormatError(f"duplicate transition for {q} {' '.join(syms)}", lineno)
        delta[key] = (q2, writes, tuple(dirs))
    if states is None or alphabet is None or num_tapes is None:
        raise FormatError("missing states/alphabet/tapes headers")
    return Machine(states, alphabet, blank, num_tapes, delta)


def format_machine(m: Machine) -> str:
    lines = [
        "states: " + " ".join(str(q) for q in m.states),
        "alphabet: "
        + " ".join(
            str(s) for s in (m.blank,) + tuple(x for x in m.alphabet if x != m.blank)
        ),
        f"tapes: {m.num_tapes}",
    ]
    from itertools import product

    for q in m.states:
        for syms in product(m.alphabet.elements, repeat=m.num_tapes):
            q2, writes, dirs = m.delta[(q, syms)]
            lines.append(
                f"{q} {' '.join(str(s) for s in syms)} -> {q2} "
                + " ".join(str(w) for w in writes)
                + " "
                + " ".join(_DIR_NAMES[d] for d in dirs)
            )
    return "\n".join(lines) + "\n"
