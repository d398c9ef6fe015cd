"""Generating machines and smooth-relaxation-preservation checks.

A generating triple wraps a machine together with an encoding predicate and a
decoder onto a target machine: running the machine from an encoding until the
predicate holds again is one cycle, and the construction preserves the smooth
relaxation when decoding after a cycle agrees with one smooth step of the
target applied to the decoded input (the commuting square).

The runner state is opaque to this module: dense machines step
:class:`~smoothtm.smooth.SmoothConfig` values, compiled constructions step
:class:`~smoothtm.engine.SectionConfig` values.  A triple supplies its own
stepper, predicate, decoder and per-step invariant checks.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Any, Callable

from .smooth import SmoothConfig

MAX_STEPS_ENV = "SMOOTHTM_MAX_STEPS"


class CycleOverrun(RuntimeError):
    """The predicate did not hold again within the step bound."""

    def __init__(self, steps: int):
        super().__init__(
            f"no encoding reached within {steps} steps; "
            "the construction does not cycle"
        )
        self.steps = steps


@dataclass
class EncPredicate:
    """Structural membership test for smooth encodings.

    ``holds`` decides full membership.  ``certify_outside`` must return True
    only when the configuration is certifiably a distribution over
    non-encodings: every classical configuration in its support fails the
    encoding's structural constraints (it suffices that one product component
    has support disjoint from its constraint).
    """

    holds: Callable[[Any], bool]
    certify_outside: Callable[[Any], bool]
    describe: str = ""

    def conjoin(self, other: "EncPredicate") -> "EncPredicate":
        return EncPredicate(
            holds=lambda x: self.holds(x) and other.holds(x),
            certify_outside=lambda x: self.certify_outside(x)
            or other.certify_outside(x),
            describe=f"{self.describe} and {other.describe}",
        )


@dataclass
class GeneratingTriple:
    """A machine that generates another, with its smooth counterparts."""

    name: str
    stepper: Callable[[Any], tuple[Any, Any]]  # state -> (state', step info)
    enc: EncPredicate
    decode: Callable[[Any], SmoothConfig]
    target_step: Callable[[SmoothConfig], SmoothConfig]
    max_steps: int
    machine: Any = None
    target: Any = None
    # construction-specific per-step invariants; returns violation strings
    step_checks: Callable[[int, Any, Any], list[str]] = lambda t, x, info: []

    def step_bound(self, override: int | None = None) -> int:
        if override is not None:
            return override
        env = os.environ.get(MAX_STEPS_ENV)
        if env:
            return int(env)
        return self.max_steps


def identity_triple(m, stepper=None) -> GeneratingTriple:
    """The trivial triple: every configuration encodes itself."""
    from .smooth import smooth_step

    step_fn = stepper or (lambda s: (smooth_step(m, s), None))
    return GeneratingTriple(
        name="identity",
        stepper=step_fn,
        enc=EncPredicate(lambda x: True, lambda x: False, "everything"),
        decode=lambda x: x,
        target_step=lambda s: smooth_step(m, s),
        max_steps=1,
        machine=m,
        target=m,
    )


def compose(g1: GeneratingTriple, g2: GeneratingTriple) -> GeneratingTriple:
    """The composite triple generating g2's target through g1's machine.

    g1 decodes into the configuration space g2 runs on, so the composite
    encodes x iff x encodes under g1 and its decoding encodes under g2, and
    decodes by g2's decoder after g1's.
    """
    if g2.machine is not None and g1.target is not None and g2.machine is not g1.target:
        raise ValueError("machine mismatch: g1 must generate the machine g2 runs")
    enc = EncPredicate(
        holds=lambda x: g1.enc.holds(x) and g2.enc.holds(g1.decode(x)),
        certify_outside=g1.enc.certify_outside,
        describe=f"{g1.enc.describe} refined by {g2.enc.describe}",
    )
    return GeneratingTriple(
        name=f"{g1.name}.{g2.name}",
        stepper=g1.stepper,
        enc=enc,
        decode=lambda x: g2.decode(g1.decode(x)),
        target_step=g2.target_step,
        max_steps=g1.max_steps * max(1, g2.max_steps),
        machine=g1.machine,
        target=g2.target,
        step_checks=g1.step_checks,
    )


def run_to_next_encoding(
    g: GeneratingTriple,
    x,
    max_steps: int | None = None,
    observer: Callable[[int, Any, Any], None] | None = None,
):
    """Iterate the smooth step until the encoding predicate holds again.

    Returns (configuration, cycle length t).  Raises :class:`CycleOverrun`
    when the bound is exceeded, which signals a broken construction.
    """
    bound = g.step_bound(max_steps)
    for t in range(1, bound + 1):
        x, info = g.stepper(x)
        if observer is not None:
            observer(t, x, info)
        if g.enc.holds(x):
            return x, t
    raise CycleOverrun(bound)


@dataclass
class WellBehavedReport:
    cycle_length: int | None
    violations: list[dict] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.cycle_length is not None and not self.violations


def check_well_behaved(
    g: GeneratingTriple, x, max_steps: int | None = None
) -> tuple[Any, WellBehavedReport]:
    """Run one cycle verifying every intermediate stays outside encodings.

    An intermediate configuration that cannot be certified disjoint from the
    encoding set (or that trips a construction-specific step invariant) is
    reported with its step index.
    """
    from .engine import StuckError

    report = WellBehavedReport(cycle_length=None)
    bound = g.step_bound(max_steps)
    t = 0
    while t < bound:
        t += 1
        try:
            x, info = g.stepper(x)
        except StuckError as exc:
            report.violations.append({"step": t, "violation": str(exc)})
            return x, report
        for msg in g.step_checks(t, x, info):
            report.violations.append({"step": t, "violation": msg})
        if g.enc.holds(x):
            report.cycle_length = t
            return x, report
        if not g.enc.certify_outside(x):
            report.violations.append(
                {"step": t, "violation": "intermediate overlaps encodings"}
            )
    return x, report


@dataclass
class PreservationResult:
    cycle_lengths: list[int]
    max_deviation: float
    violations: list[dict]

    def passes(self, tol: float) -> bool:
        return not self.violations and self.max_deviation <= tol


def check_preserving(
    g: GeneratingTriple,
    x,
    tol: float = 1e-9,
    cycles: int = 1,
    max_steps: int | None = None,
    well_behaved: bool = True,
) -> PreservationResult:
    """Drive the commuting square from one smooth encoding, cycle by cycle.

    Per cycle: advance the generating machine to its next encoding and the
    decoded target by one smooth step, then compare the two decodings
    coordinatewise.  The reported deviation is the maximum over cycles.
    """
    decoded = g.decode(x)
    lengths: list[int] = []
    violations: list[dict] = []
    dev = 0.0
    for _ in range(cycles):
        if well_behaved:
            x, rep = check_well_behaved(g, x, max_steps)
            violations.extend(rep.violations)
            if rep.cycle_length is None:
                violations.append(
                    {"step": g.step_bound(max_steps), "violation": "no encoding reached"}
                )
                break
            lengths.append(rep.cycle_length)
        else:
            x, t = run_to_next_encoding(g, x, max_steps)
            lengths.append(t)
        decoded = g.target_step(decoded)
        dev = max(dev, g.decode(x).deviation(decoded))
    return PreservationResult(lengths, dev, violations)
