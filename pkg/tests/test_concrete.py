import pytest

from ooescape.collecting import collect
from ooescape.concrete import (
    Interpreter,
    Loc,
    Truncated,
    entry_state,
    make_obj,
    memory_agrees,
    reachable_locs,
    state_key,
)
from ooescape.frontend import load_source
from ooescape.model import OUT


def _square(next_=None, rotation=None, side=4, x=3, y=-5):
    return make_obj("pi2", {
        "next": next_, "rotation": rotation,
        "side": side, "Square.x": x, "Square.y": y,
    })


@pytest.fixture()
def worked_example():
    l, lp, lpp = Loc(0), Loc(1), Loc(2)
    o1 = make_obj("ext0", {})
    o2 = _square(next_=lp)
    o3 = _square(next_=None, rotation=l)
    o4 = make_obj("pi3", {
        "next": None, "radius": 3, "Circle.x": 4, "Circle.y": 3,
    })
    phi1 = {"f": lp, "n": None, "out": 2, "this": l}
    mu1 = {l: o1, lp: o2, lpp: o4}
    mu2 = {l: o2, lp: o1}
    mu3 = {l: o2, lp: o3}
    mu4 = {l: o1, lp: o3, lpp: o4}
    return l, lp, lpp, phi1, mu1, mu2, mu3, mu4


class TestMemoryAgreement:
    def test_worked_example(self, worked_example):
        l, lp, lpp, phi1, mu1, mu2, mu3, mu4 = worked_example
        assert not memory_agrees(mu1, mu2, [l])
        assert not memory_agrees(mu1, mu2, [lp])
        assert memory_agrees(mu1, mu3, [lp])
        assert memory_agrees(mu2, mu3, [l])
        assert memory_agrees(mu1, mu4, [l, lp, lpp])

    def test_missing_location_fails(self):
        assert not memory_agrees({}, {}, [Loc(7)])


class TestReachability:
    def test_garbage_is_dropped(self, worked_example):
        l, lp, lpp, phi1, mu1, *_ = worked_example
        assert set(reachable_locs(phi1, mu1)) == {l, lp}

    def test_state_key_ignores_renaming_and_garbage(self, worked_example):
        l, lp, lpp, phi1, mu1, *_ = worked_example
        big, bigger = Loc(40), Loc(41)
        renamed_frame = {"f": big, "n": None, "out": 2, "this": bigger}
        renamed_mu = {
            bigger: mu1[l],
            big: _square(next_=big),
            Loc(99): mu1[lpp],  # garbage
        }
        assert state_key(phi1, mu1) == state_key(renamed_frame, renamed_mu)

    def test_state_key_distinguishes_points(self, worked_example):
        l, lp, lpp, phi1, mu1, *_ = worked_example
        other = dict(mu1)
        other[l] = make_obj("pi3", {
            "next": None, "radius": 0, "Circle.x": 0, "Circle.y": 0,
        })
        assert state_key(phi1, mu1) != state_key(phi1, other)


class TestInterpreter:
    def test_arithmetic_loop(self):
        prog = load_source(
            """
            class A {
                int m() {
                    int i = 0;
                    while (i < 5) { i = i + 1; }
                    return i;
                }
            }
            """,
            entry="A.m",
        )
        frame, memory = Interpreter(prog).run_entry()
        assert frame[OUT] == 5

    def test_if_else_and_negation(self):
        prog = load_source(
            """
            class A {
                int m() {
                    int x = 3;
                    if (x != 3) { return 1; }
                    if (x == 3) { return 7 - 9; }
                    return 2;
                }
            }
            """,
            entry="A.m",
        )
        frame, _ = Interpreter(prog).run_entry()
        assert frame[OUT] == -2

    def test_greater_than(self):
        prog = load_source(
            "class A { int m() { int x = 4; if (x > 3) { return 1; } return 0; } }",
            entry="A.m",
        )
        frame, _ = Interpreter(prog).run_entry()
        assert frame[OUT] == 1

    def test_null_dereference_gets_stuck(self):
        prog = load_source(
            """
            class F { F next; void def() {} }
            class A { void m(F f) { f.def(); } }
            """,
            entry="A.m",
        )
        assert Interpreter(prog).run_entry() is None

    def test_budget_exhaustion(self):
        prog = load_source(
            "class A { void m() { int i = 0; while (0 < 1) { i = i + 1; } } }",
            entry="A.m",
        )
        with pytest.raises(Truncated):
            Interpreter(prog, budget=500).run_entry()

    def test_dynamic_dispatch(self):
        prog = load_source(
            """
            class A {
                int tag() { return 1; }
                int m() { A x = new B(); return x.tag(); }
            }
            class B extends A { int tag() { return 2; } }
            """,
            entry="A.m",
        )
        frame, _ = Interpreter(prog).run_entry()
        assert frame[OUT] == 2

    def test_fields_and_aliasing(self):
        prog = load_source(
            """
            class Box { int v; Box other; }
            class A {
                int m() {
                    Box p = new Box();
                    Box q = p;
                    q.v = 41;
                    p.other = q;
                    p.v = p.v + 1;
                    return q.v;
                }
            }
            """,
            entry="A.m",
        )
        frame, _ = Interpreter(prog).run_entry()
        assert frame[OUT] == 42

    def test_external_parameter_objects(self):
        prog = load_source(
            """
            class F { int v; }
            class A { int m(F f) { f.v = 9; return f.v; } }
            """,
            entry="A.m",
            external_params=True,
        )
        frame, memory = entry_state(prog)
        assert memory[frame["f"]].pi == "ext1"
        out_frame, _ = Interpreter(prog).run_entry()
        assert out_frame[OUT] == 9


class TestFiguresRun:
    def test_terminates_within_budget(self, figures_program):
        interp = Interpreter(figures_program, budget=100_000)
        result = interp.run_entry()
        assert result is not None
        frame, memory = result
        assert frame[OUT] == 0
        assert set(frame) == {OUT, "n'", "this'"}

    def test_watchpoint_states(self, figures_program):
        bag = collect(figures_program)
        assert not bag.truncated
        assert not bag.stuck
        assert {"w0", "w1", "w2"} <= set(bag.states)

        # w1: one state, f points at the self-linked square
        (frame, memory), = bag.at("w1")
        sq = memory[frame["f"]]
        assert sq.pi == "pi2"
        assert sq.field("next") == frame["f"]
        assert frame["n"] is None
        assert memory[frame["this"]].pi == "ext0"

        # w2: f now holds the defined circle
        (frame2, memory2), = bag.at("w2")
        circ = memory2[frame2["f"]]
        assert circ.pi == "pi3"
        assert circ.field("radius") == 1

        # rotate exits twice, with different shadow-visible receivers
        rot_exits = bag.at("Scan.rotate:exit")
        assert len(rot_exits) == 2
        receivers = {m[f["f'"]].pi for f, m in rot_exits}
        assert receivers == {"pi2", "pi3"}

        # acute is never called
        assert bag.at("Angle.acute:exit") == []

    def test_w0_crossed_once(self, figures_program):
        bag = collect(figures_program)
        (frame, memory), = bag.at("w0")
        assert memory[frame["this"]].pi == "pi3"
        assert memory[frame["this"]].field("radius") == 1
