"""The naive-Bayesian smooth step function for n-tape machines.

A smooth configuration relaxes the state to a distribution over states and
every tape cell to a distribution over symbols, with cells outside a finite
window pinned to exact blank point masses.  One smooth step forms the joint
local distribution (state tensored with the read cells), pushes it through
the operators induced by the transition components to get the next state,
per-tape write distributions and per-tape direction distributions, and then
updates each tape cell to the superposition over move directions

    new_cell(i) = sum_d  <d, dir>  written_cell(i + d).

Two independent implementations are provided: :func:`smooth_step` via induced
linear operators, and :func:`smooth_step_oracle` via explicit scalar sums
over state/symbol pairs (single tape only).  They must agree to 1e-12 per
coordinate; on point-mass configurations both reduce bit-exactly to the
classical step.
"""

from __future__ import annotations

from dataclasses import dataclass
from weakref import WeakKeyDictionary

import numpy as np

from .dists import (
    ATOL,
    Dist,
    FiniteSet,
    LinearOp,
    convex_combine,
    induced_op,
    product_set,
    tensor_many,
)
from .machines import DIRECTIONS, Configuration, Machine, Tape


def clean_rows(rows: np.ndarray) -> np.ndarray:
    """Validate and canonicalize a (cells x symbols) block of distributions.

    Same contract as Dist construction, vectorized: rows must be simplex
    vectors within 1e-12; tiny negatives are clamped and the row
    renormalized; single-support rows become exact 0.0/1.0 point masses.
    """
    rows = np.array(rows, dtype=np.float64)
    if rows.size:
        if rows.min() < -ATOL:
            raise ValueError(f"negative cell weight {rows.min()}")
        sums = rows.sum(axis=1)
        bad = np.abs(sums - 1.0).max(initial=0.0)
        if bad > ATOL:
            raise ValueError(f"cell weights off the simplex by {bad}")
        if (rows < 0.0).any():
            rows = np.where(rows < 0.0, 0.0, rows)
            rows /= rows.sum(axis=1, keepdims=True)
        support = (rows != 0.0).sum(axis=1)
        for i in np.flatnonzero(support == 1):
            j = int(np.argmax(rows[i]))
            rows[i] = 0.0
            rows[i, j] = 1.0
    return rows


class SmoothTape:
    """A tape of per-cell symbol distributions with finite non-blank support.

    Stored as a (window length x alphabet size) array plus the window start.
    Canonical form trims exact blank point masses from both ends; a cell that
    is merely close to blank is kept.
    """

    __slots__ = ("alphabet", "blank", "lo", "cells")

    def __init__(self, alphabet: FiniteSet, blank, lo: int, cells: np.ndarray):
        self.alphabet = alphabet
        self.blank = blank
        cells = clean_rows(np.atleast_2d(cells))
        lo, cells = self._trimmed(alphabet.index(blank), lo, cells)
        cells.setflags(write=False)
        self.lo = lo
        self.cells = cells

    @staticmethod
    def _trimmed(blank_idx: int, lo: int, cells: np.ndarray):
        exact_blank = (cells[:, blank_idx] == 1.0) & (
            (cells != 0.0).sum(axis=1) == 1
        )
        keep = np.flatnonzero(~exact_blank)
        if len(keep) == 0:
            row = np.zeros((1, cells.shape[1]))
            row[0, blank_idx] = 1.0
            return 0, row
        first, last = int(keep[0]), int(keep[-1])
        return lo + first, cells[first : last + 1].copy()

    @classmethod
    def blank_tape(cls, alphabet: FiniteSet, blank) -> "SmoothTape":
        row = np.zeros((1, len(alphabet)))
        row[0, alphabet.index(blank)] = 1.0
        return cls(alphabet, blank, 0, row)

    @classmethod
    def from_dists(cls, alphabet: FiniteSet, blank, lo: int, dists) -> "SmoothTape":
        rows = np.stack([d.weights for d in dists]) if dists else np.zeros((0, len(alphabet)))
        for d in dists:
            if d.base != alphabet:
                raise ValueError("cell distribution over the wrong alphabet")
        if not dists:
            return cls.blank_tape(alphabet, blank)
        return cls(alphabet, blank, lo, rows)

    @property
    def hi(self) -> int:
        return self.lo + len(self.cells) - 1

    def row(self, i: int) -> np.ndarray:
        j = i - self.lo
        if 0 <= j < len(self.cells):
            return self.cells[j]
        out = np.zeros(len(self.alphabet))
        out[self.alphabet.index(self.blank)] = 1.0
        return out

    def cell(self, i: int) -> Dist:
        return Dist(self.alphabet, self.row(i))

    def window_dists(self) -> list[Dist]:
        return [Dist(self.alphabet, r) for r in self.cells]

    def allclose(self, other: "SmoothTape", tol: float = ATOL) -> bool:
        return self.deviation(other) <= tol

    def deviation(self, other: "SmoothTape") -> float:
        if self.alphabet != other.alphabet:
            raise ValueError("tapes over different alphabets")
        lo = min(self.lo, other.lo)
        hi = max(self.hi, other.hi)
        dev = 0.0
        for i in range(lo, hi + 1):
            dev = max(dev, float(np.abs(self.row(i) - other.row(i)).max()))
        return dev


@dataclass(frozen=True)
class SmoothConfig:
    state: Dist
    tapes: tuple[SmoothTape, ...]

    def deviation(self, other: "SmoothConfig") -> float:
        if self.state.base != other.state.base:
            raise ValueError("state distributions over different state sets")
        dev = float(np.abs(self.state.weights - other.state.weights).max())
        for a, b in zip(self.tapes, other.tapes):
            dev = max(dev, a.deviation(b))
        return dev

    def allclose(self, other: "SmoothConfig", tol: float = ATOL) -> bool:
        return self.deviation(other) <= tol


def embed(m: Machine, c: Configuration) -> SmoothConfig:
    """The point-mass smooth configuration of a classical configuration."""
    state = Dist.point(m.states, c.state)
    tapes = []
    for t in c.tapes:
        dists = [Dist.point(m.alphabet, t.cell(i)) for i in range(t.lo, t.hi + 1)]
        tapes.append(SmoothTape.from_dists(m.alphabet, m.blank, t.lo, dists))
    return SmoothConfig(state, tuple(tapes))


def extract_classical(m: Machine, s: SmoothConfig) -> Configuration:
    """Inverse of embed; requires every marginal to be a point mass."""
    q = s.state.point_value()
    tapes = []
    for t in s.tapes:
        cells = [t.cell(i).point_value() for i in range(t.lo, t.hi + 1)]
        tapes.append(Tape.from_cells(m.blank, t.lo, cells))
    return Configuration(q, tuple(tapes))


# ---------------------------------------------------------------------------
# Operator-form smooth step
# ---------------------------------------------------------------------------

def renormalized(weights: np.ndarray, what: str = "distribution") -> np.ndarray:
    """Rescale a near-simplex vector to unit mass.

    Iterated stepping feeds each step's mass error into the next step's
    products, which compounds geometrically; rescaling the operator outputs
    resets the error to rounding level each step, so it accumulates only
    linearly.  The mass must already be 1 within 1e-12 (anything worse is a
    bug, not drift), and an exact sum of 1.0 is returned untouched so point
    masses stay bit-exact.
    """
    total = float(weights.sum())
    if abs(total - 1.0) > ATOL:
        raise ValueError(f"{what} mass {total} off 1 by more than {ATOL}")
    return weights if total == 1.0 else weights / total


_OPS_CACHE: "WeakKeyDictionary[Machine, dict]" = WeakKeyDictionary()


def machine_ops(m: Machine) -> dict:
    """Induced operators of the transition components, cached per machine."""
    ops = _OPS_CACHE.get(m)
    if ops is not None:
        return ops
    joint = product_set(m.states, *([m.alphabet] * m.num_tapes))

    def entry(e):
        return m.delta[(e[0], tuple(e[1:]))]

    ops = {
        "joint": joint,
        "state": induced_op(lambda e: entry(e)[0], joint, m.states),
        "write": [
            induced_op(lambda e, j=j: entry(e)[1][j], joint, m.alphabet)
            for j in range(m.num_tapes)
        ],
        "dir": [
            induced_op(lambda e, j=j: entry(e)[2][j], joint, DIRECTIONS)
            for j in range(m.num_tapes)
        ],
    }
    _OPS_CACHE[m] = ops
    return ops


def superpose_tape(tape: SmoothTape, write: Dist, dirs: Dist) -> SmoothTape:
    """Write at the head, then form the per-cell superposition over moves.

    The window grows by one cell each side and is then canonically trimmed.
    """
    A = len(tape.alphabet)
    lo, hi = tape.lo, tape.hi
    lo2, hi2 = min(lo, 0) - 1, max(hi, 0) + 1
    # written tape over [lo2-1, hi2+1], so every new cell can see i-1..i+1
    written = np.zeros((hi2 - lo2 + 3, A))
    bidx = tape.alphabet.index(tape.blank)
    written[:, bidx] = 1.0
    for i in range(lo, hi + 1):
        written[i - (lo2 - 1)] = tape.row(i)
    written[0 - (lo2 - 1)] = write.weights
    out = np.zeros((hi2 - lo2 + 1, A))
    for k, d in enumerate(DIRECTIONS.elements):
        c = float(dirs.weights[k])
        if c != 0.0:
            # new[i] = sum_d c_d * written[i+d]
            out += c * written[1 + d : 1 + d + len(out)]
    return SmoothTape(tape.alphabet, tape.blank, lo2, out)


def smooth_step(m: Machine, s: SmoothConfig) -> SmoothConfig:
    """One naive-Bayesian smooth step via induced operators."""
    if s.state.base != m.states:
        raise ValueError("state distribution over the wrong state set")
    if len(s.tapes) != m.num_tapes:
        raise ValueError(f"expected {m.num_tapes} tapes, got {len(s.tapes)}")
    for t in s.tapes:
        if t.alphabet != m.alphabet:
            raise ValueError("tape over the wrong alphabet")
    ops = machine_ops(m)
    local = tensor_many([s.state] + [t.cell(0) for t in s.tapes])
    state2 = ops["state"](local)
    state2 = Dist(state2.base, renormalized(state2.weights, "state"))
    tapes2 = []
    for j, tape in enumerate(s.tapes):
        w = ops["write"][j](local)
        d = ops["dir"][j](local)
        w = Dist(w.base, renormalized(w.weights, "write"))
        d = Dist(d.base, renormalized(d.weights, "direction"))
        tapes2.append(superpose_tape(tape, w, d))
    return SmoothConfig(state2, tuple(tapes2))


def smooth_step_dists(m: Machine, s: SmoothConfig):
    """The (state', write, direction) distributions of one smooth step."""
    ops = machine_ops(m)
    local = tensor_many([s.state] + [t.cell(0) for t in s.tapes])
    return (
        ops["state"](local),
        [ops["write"][j](local) for j in range(m.num_tapes)],
        [ops["dir"][j](local) for j in range(m.num_tapes)],
    )


# ---------------------------------------------------------------------------
# Scalar-sum oracle (single tape)
# ---------------------------------------------------------------------------


def smooth_step_oracle(m: Machine, s: SmoothConfig) -> SmoothConfig:
    """One smooth step computed by explicit sums over state/symbol pairs.

    Independent of the operator path: scalar arithmetic over indicator
    functions, one coordinate at a time.  Single-tape machines only.
    """
    if m.num_tapes != 1:
        raise ValueError("the scalar oracle supports single-tape machines only")
    tape = s.tapes[0]
    qw = {q: float(s.state.weights[i]) for i, q in enumerate(m.states.elements)}
    y0 = {a: float(tape.row(0)[i]) for i, a in enumerate(m.alphabet.elements)}

    def pushed(component) -> dict:
        out = {}
        for q in m.states:
            for a in m.alphabet:
                tgt = component(*m.delta[(q, (a,))])
                out[tgt] = out.get(tgt, 0.0) + qw[q] * y0[a]
        return out

    q2 = pushed(lambda t, w, d: t)
    w2 = pushed(lambda t, w, d: w[0])
    dd = pushed(lambda t, w, d: d[0])

    def written(i) -> dict:
        if i == 0:
            return w2
        return {a: float(tape.row(i)[k]) for k, a in enumerate(m.alphabet.elements)}

    lo2, hi2 = min(tape.lo, 0) - 1, max(tape.hi, 0) + 1
    cells = []
    for i in range(lo2, hi2 + 1):
        cell = {}
        for d in (-1, 0, 1):
            c = dd.get(d, 0.0)
            if c == 0.0:
                continue
            for a, p in written(i + d).items():
                cell[a] = cell.get(a, 0.0) + c * p
        cells.append(Dist.from_pairs(m.alphabet, cell))
    state2 = Dist.from_pairs(m.states, q2)
    return SmoothConfig(
        state2, (SmoothTape.from_dists(m.alphabet, m.blank, lo2, cells),)
    )


# ---------------------------------------------------------------------------
# Psi-form cell update
# ---------------------------------------------------------------------------


def psi_update(
    m: Machine, tape_index: int, local: Dist, left: Dist, center: Dist, right: Dist
) -> Dist:
    """The cell superposition as one induced operator.

    Applies the operator induced by the composite that first computes the
    move direction of the given tape from the local (state, read symbols)
    joint and then selects among the three neighbouring written cells.
    Equals the direct superposition sum_d <d, dir> cell(d).
    """
    if not (0 <= tape_index < m.num_tapes):
        raise ValueError("tape index out of range")
    expected = product_set(m.states, *[m.alphabet] * m.num_tapes)
    if local.base != expected:
        raise ValueError(
            "local joint must be over state x read symbols: dimension mismatch"
        )
    for d in (left, center, right):
        if d.base != m.alphabet:
            raise ValueError("neighbour cells must be over the tape alphabet")
    domain = product_set(local.base, m.alphabet, m.alphabet, m.alphabet)

    def f(e):
        q, syms, (a, b, c) = e[0], tuple(e[1 : 1 + m.num_tapes]), e[-3:]
        d = m.delta[(q, syms)][2][tape_index]
        return a if d == -1 else (b if d == 0 else c)

    op = induced_op(f, domain, m.alphabet)
    return op(tensor_many([local, left, center, right]))


# ---------------------------------------------------------------------------
# Configuration text format (JSON)
# ---------------------------------------------------------------------------


def format_config(s: SmoothConfig) -> str:
    import json

    def dist_obj(d: Dist) -> dict:
        return {
            str(x): float(d.weights[i])
            for i, x in enumerate(d.base.elements)
            if d.weights[i] != 0.0
        }

    obj = {
        "state": dist_obj(s.state),
        "tapes": [
            {"lo": t.lo, "cells": [dist_obj(t.cell(i)) for i in range(t.lo, t.hi + 1)]}
            for t in s.tapes
        ],
    }
    return json.dumps(obj, sort_keys=True)


def parse_config(text: str, m: Machine) -> SmoothConfig:
    """Parse the JSON configuration format against a machine's sets.

    Omitted labels mean weight zero.  Labels are matched by their string
    rendering.
    """
    import json

    from .machines import FormatError

    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"invalid JSON: {exc.msg}", exc.lineno, exc.colno) from None

    def to_dist(base: FiniteSet, pairs: dict, what: str) -> Dist:
        lookup = {str(x): x for x in base.elements}
        out = {}
        for k, v in pairs.items():
            if k not in lookup:
                raise FormatError(f"unknown {what} {k!r}")
            out[lookup[k]] = float(v)
        try:
            return Dist.from_pairs(base, out)
        except ValueError as exc:
            raise FormatError(f"bad {what} distribution: {exc}") from None

    if not isinstance(obj, dict) or "state" not in obj or "tapes" not in obj:
        raise FormatError("configuration needs 'state' and 'tapes' fields")
    state = to_dist(m.states, obj["state"], "state")
    if len(obj["tapes"]) != m.num_tapes:
        raise FormatError(
            f"machine has {m.num_tapes} tapes, configuration {len(obj['tapes'])}"
        )
    tapes = []
    for tobj in obj["tapes"]:
        lo = int(tobj.get("lo", 0))
        dists = [to_dist(m.alphabet, c, "symbol") for c in tobj.get("cells", [])]
        if dists:
            tapes.append(SmoothTape.from_dists(m.alphabet, m.blank, lo, dists))
        else:
            tapes.append(SmoothTape.blank_tape(m.alphabet, m.blank))
    return SmoothConfig(state, tuple(tapes))
