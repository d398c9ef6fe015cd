import numpy as np
import pytest

from smoothtm.dists import Dist, FiniteSet
from smoothtm.engine import point_config, section_smooth_step
from smoothtm.machines import Configuration, Tape, step
from smoothtm.sections import (
    SectionMachine,
    Tract,
    format_section_machine,
    lower_sections,
    section_step,
)
from smoothtm.smooth import SmoothConfig, SmoothTape, embed, smooth_step

AB = FiniteSet(["_", "A", "B"])
STAR = FiniteSet(["*"])


def self_loop_machine():
    tract = Tract(
        source="S0",
        target="S0",
        reads=(frozenset(AB.elements),),
        apply=lambda x, syms: (x, (syms[0],), (0,)),
        label="loop",
    )
    return SectionMachine({"S0": STAR}, [tract], AB, "_", 1)


def two_phase_machine():
    """Walk right over A/B writing B, bounce back left on blank."""
    ctx = FiniteSet(["*"])
    fwd = Tract(
        "F", "F", (frozenset({"A", "B"}),),
        lambda x, syms: (x, ("B",), (1,)), label="fwd",
    )
    turn = Tract(
        "F", "Bk", (frozenset({"_"}),),
        lambda x, syms: (x, ("_",), (-1,)), label="turn",
    )
    back = Tract(
        "Bk", "Bk", (frozenset({"A", "B"}),),
        lambda x, syms: (x, (syms[0],), (-1,)), label="back",
    )
    done = Tract(
        "Bk", "F", (frozenset({"_"}),),
        lambda x, syms: (x, ("_",), (1,)), label="done",
    )
    return SectionMachine({"F": ctx, "Bk": ctx}, [fwd, turn, back, done], AB, "_", 1)


def test_single_section_self_loop_lowers_to_one_state():
    m = lower_sections(self_loop_machine())
    assert len(m.states) == 1
    assert not m.fills
    c = Configuration(("S0", "*"), (Tape.from_cells("_", 0, ["A"]),))
    assert step(m, c).tapes[0].cell(0) == "A"


def test_lowering_flags_fills():
    sm = two_phase_machine()
    m = lower_sections(sm)
    assert len(m.states) == 2
    assert not m.fills  # both sections fully covered
    partial = SectionMachine(
        {"S0": STAR},
        [Tract("S0", "S0", (frozenset({"A"}),), lambda x, s: (x, ("A",), (0,)))],
        AB,
        "_",
        1,
    )
    lowered = lower_sections(partial)
    assert (("S0", "*"), ("_",)) in lowered.fills
    assert lowered.delta[(("S0", "*"), ("_",))] == (("S0", "*"), ("_",), (0,))


def test_overlapping_tracts_rejected():
    t1 = Tract("S0", "S0", (frozenset({"A"}),), lambda x, s: (x, ("A",), (0,)))
    t2 = Tract("S0", "S0", (frozenset({"A", "B"}),), lambda x, s: (x, ("B",), (0,)))
    sm = SectionMachine({"S0": STAR}, [t1, t2], AB, "_", 1)
    with pytest.raises(ValueError, match="overlapping"):
        lower_sections(sm)


def test_guarded_tracts_partition_by_context():
    ctx = FiniteSet(["x", "y"])
    stay = Tract(
        "S0", "S0", (frozenset(AB.elements),),
        lambda x, s: (x, (s[0],), (0,)),
        guard=lambda x, s: x == "x", label="stay",
    )
    move = Tract(
        "S0", "S1", (frozenset(AB.elements),),
        lambda x, s: (x, (s[0],), (1,)),
        guard=lambda x, s: x == "y", label="move",
    )
    sm = SectionMachine({"S0": ctx, "S1": ctx}, [stay, move], AB, "_", 1)
    m = lower_sections(sm)
    assert m.delta[(("S0", "x"), ("_",))][0] == ("S0", "x")
    assert m.delta[(("S0", "y"), ("_",))][0] == ("S1", "y")


def test_section_step_matches_lowered_step():
    sm = two_phase_machine()
    m = lower_sections(sm)
    c = Configuration(("F", "*"), (Tape.from_cells("_", 0, ["A", "A", "B"]),))
    for _ in range(12):
        direct = section_step(sm, c)
        lowered = step(m, c)
        assert direct == lowered
        c = direct


def test_section_step_stuck_is_runtime_error():
    partial = SectionMachine(
        {"S0": STAR},
        [Tract("S0", "S0", (frozenset({"A"}),), lambda x, s: (x, ("A",), (0,)))],
        AB,
        "_",
        1,
    )
    c = Configuration(("S0", "*"), (Tape.blank_tape("_"),))
    with pytest.raises(RuntimeError, match="stuck"):
        section_step(partial, c)


def test_engine_matches_dense_smooth_step_on_lowered_machine():
    sm = two_phase_machine()
    m = lower_sections(sm)
    rng = np.random.default_rng(31)
    cells = [Dist(AB, rng.dirichlet([1, 1, 1])) for _ in range(3)]
    tape = SmoothTape.from_dists(AB, "_", 0, cells)
    cfg = point_config(sm, "F", "*", (tape,))
    dense = SmoothConfig(
        Dist.point(m.states, ("F", "*")), (tape,)
    )
    for _ in range(8):
        cfg, _info = section_smooth_step(cfg)
        dense = smooth_step(m, dense)
        # same tape evolution
        assert cfg.tapes[0].lo == dense.tapes[0].lo
        assert cfg.tapes[0].deviation(dense.tapes[0]) <= 1e-12
        # same state distribution, read through the section split
        for i, q in enumerate(m.states.elements):
            sid, x = q
            vec = cfg.state.get(sid)
            mass = float(vec[sm.sections[sid].index(x)]) if vec is not None else 0.0
            assert abs(mass - float(dense.state.weights[i])) <= 1e-12


def test_engine_point_mass_matches_classical():
    sm = two_phase_machine()
    tape = Tape.from_cells("_", 0, ["A", "B"])
    c = Configuration(("F", "*"), (tape,))
    m = lower_sections(sm)
    cfg = point_config(
        sm, "F", "*", embed(m, Configuration(("F", "*"), (tape,))).tapes
    )
    for _ in range(10):
        c = section_step(sm, c)
        cfg, info = section_smooth_step(cfg)
        assert info.direction_point_mass(0)
        sid, x = c.state
        assert cfg.section_mass(sid) == 1.0
        for i in range(c.tapes[0].lo, c.tapes[0].hi + 1):
            assert cfg.tapes[0].cell(i).point_value() == c.tapes[0].cell(i)


def test_engine_mass_conservation():
    sm = two_phase_machine()
    rng = np.random.default_rng(77)
    cells = [Dist(AB, rng.dirichlet([1, 1, 1])) for _ in range(4)]
    cfg = point_config(sm, "F", "*", (SmoothTape.from_dists(AB, "_", -1, cells),))
    for _ in range(15):
        cfg, _ = section_smooth_step(cfg)
        assert abs(cfg.total_mass() - 1.0) <= 1e-12
        assert cfg.check_simplex() <= 1e-12


def test_serialization_mentions_sections_and_tracts():
    text = format_section_machine(self_loop_machine(), metadata={"n": 1})
    assert "section: S0" in text
    assert "tract: S0 -> S0" in text
    assert "meta: n = 1" in text
