"""Creation-point domain: collector values, lattice laws, worst states."""

import pytest
from hypothesis import given, settings, strategies as st

from ooescape.domain_e import (
    EDomain,
    alpha,
    alpha_state,
    canonical_elements,
    delta,
    representatives,
)
from ooescape.frontend import Op
from ooescape.model import TypeEnv


def bits(table, *names):
    return table.bits_of(names)


class TestCollector:
    def test_worked_value_receiver_only(self, figures_info, env_w0):
        table = figures_info.points
        e = bits(table, "ext0", "pi1", "pi3", "pi4")
        assert delta(figures_info, env_w0, e) == bits(table, "pi3")

    def test_worked_value_full_frame(self, figures_info, env_w1):
        table = figures_info.points
        e = bits(table, "ext0", "pi1", "pi3", "pi4")
        assert delta(figures_info, env_w1, e) == e

    def test_field_environment_values(self, figures_info):
        table = figures_info.points
        classes = figures_info.classes
        e = bits(table, "ext0", "pi1", "pi3", "pi4")
        assert delta(figures_info, classes.fields_of("Square"), e, frame=False) == \
            bits(table, "pi1", "pi3", "pi4")
        assert delta(figures_info, classes.fields_of("Circle"), e, frame=False) == \
            bits(table, "pi3")
        assert delta(figures_info, classes.fields_of("Scan"), e, frame=False) == 0

    def test_restriction_keeps_field_reachable_points(self, figures_info):
        table = figures_info.points
        env = TypeEnv.make({"n": "Figure"})
        e = table.all_bits
        assert delta(figures_info, env, e) == bits(table, "pi1", "pi2", "pi3", "pi4")

    def test_receiver_without_compatible_point_empties(self, figures_info, env_w0):
        table = figures_info.points
        assert delta(figures_info, env_w0, bits(table, "pi1", "pi4")) == 0

    def test_no_class_variables_drops_everything(self, figures_info):
        env = TypeEnv.make({"out": "int"})
        assert delta(figures_info, env, figures_info.points.all_bits) == 0


def _collector_envs(figures_info, env_w0, env_w1):
    classes = figures_info.classes
    return [
        env_w0,
        env_w1,
        env_w1.restrict(["f"]),
        TypeEnv.make({"n": "Figure"}),
        TypeEnv.make({"a": "Angle", "this": "Scan"}),
        classes.fields_of("Square"),
        classes.fields_of("Circle"),
    ]


class TestCollectorLaws:
    @given(data=st.data(), e=st.integers(min_value=0, max_value=31))
    @settings(max_examples=200)
    def test_reductive_and_idempotent(self, figures_info, env_w0, env_w1, data, e):
        env = data.draw(st.sampled_from(_collector_envs(figures_info, env_w0, env_w1)))
        out = delta(figures_info, env, e)
        assert out | e == e
        assert delta(figures_info, env, out) == out

    @given(data=st.data(), e1=st.integers(min_value=0, max_value=31),
           e2=st.integers(min_value=0, max_value=31))
    @settings(max_examples=200)
    def test_monotone(self, figures_info, env_w0, env_w1, data, e1, e2):
        env = data.draw(st.sampled_from(_collector_envs(figures_info, env_w0, env_w1)))
        lo, hi = e1 & e2, e1 | e2
        assert delta(figures_info, env, lo) | delta(figures_info, env, hi) == \
            delta(figures_info, env, hi)


def _chain_envs():
    return [
        TypeEnv.make({"x": "Node", "this": "Node"}),
        TypeEnv.make({"x": "Node", "y": "Leaf", "out": "int"}),
        TypeEnv.make({"p": "Pair"}),
        TypeEnv.make({"this": "Leaf", "k": "int"}),
        TypeEnv.make({}),
    ]


class TestWorstStates:
    def test_receiver_state_exists(self, figures_info, env_w0):
        table = figures_info.points
        states = representatives(figures_info, env_w0, bits(table, "pi3"))
        assert states
        assert alpha(figures_info, states) == bits(table, "pi3")

    def test_unsatisfiable_receiver_has_no_states(self, figures_info, env_w0):
        assert representatives(figures_info, env_w0,
                               bits(figures_info.points, "pi4")) == []

    def test_states_are_type_correct_fixpoints(self, figures_info, env_w1):
        table = figures_info.points
        e = bits(table, "ext0", "pi2", "pi3")
        for frame, memory in representatives(figures_info, env_w1, e):
            a = alpha_state(figures_info, frame, memory)
            assert delta(figures_info, env_w1, a) == a

    @given(data=st.data(), e=st.integers(min_value=0, max_value=15))
    @settings(max_examples=120, deadline=None)
    def test_abstraction_inverts_collector(self, chain_info, data, e):
        env = data.draw(st.sampled_from(_chain_envs()))
        assert alpha(chain_info, representatives(chain_info, env, e)) == \
            delta(chain_info, env, e)

    def test_fixpoints_equal_abstraction_range(self, chain_info):
        for env in _chain_envs():
            canon = set(canonical_elements(chain_info, env))
            image = {alpha(chain_info, representatives(chain_info, env, e))
                     for e in range(chain_info.points.all_bits + 1)}
            assert canon == image

    def test_point_budget_guard(self, figures_info, env_w0):
        with pytest.raises(ValueError):
            representatives(figures_info, env_w0, 0, max_points=3)


class TestCanonicalCount:
    def test_full_frame_fixpoint_count(self, figures_info, env_w1):
        assert len(list(canonical_elements(figures_info, env_w1))) == 14

    def test_receiver_frame_fixpoint_count(self, figures_info, env_w0):
        # this:Circle pins pi3; the external and lone Angle points can never
        # be justified, and Angles survive only next to the Square point.
        table = figures_info.points
        canon = set(canonical_elements(figures_info, env_w0))
        assert canon == {
            0,
            bits(table, "pi3"),
            bits(table, "pi2", "pi3"),
            bits(table, "pi1", "pi2", "pi3"),
            bits(table, "pi2", "pi3", "pi4"),
            bits(table, "pi1", "pi2", "pi3", "pi4"),
        }


@pytest.fixture(scope="module")
def domain(figures_program):
    return EDomain(figures_program)


class TestTransfers:
    def test_allocation_adds_its_point(self, domain, figures_info):
        table = figures_info.points
        env = TypeEnv.make({"this": "Scan", "res": "Square"})
        op = Op(kind="new", env_in=TypeEnv.make({"this": "Scan"}), env_out=env,
                name="pi2")
        assert domain.transfer(op, bits(table, "ext0")) == bits(table, "ext0", "pi2")

    def test_scope_exit_collects(self, domain, figures_info):
        table = figures_info.points
        env = TypeEnv.make({"a": "Angle", "this": "Scan"})
        op = Op(kind="restrict", env_in=env, env_out=env.restrict(["a"]),
                names=("a",))
        assert domain.transfer(op, bits(table, "ext0", "pi1")) == bits(table, "ext0")

    def test_field_read_needs_compatible_object(self, domain, figures_info):
        env = TypeEnv.make({"this": "Scan", "res": "Figure"})
        op = Op(kind="get_field", env_in=env,
                env_out=env.replace("res", "Angle"), name="rotation")
        assert domain.transfer(op, bits(figures_info.points, "ext0")) == 0

    def test_integer_operations_are_strict(self, domain, figures_info):
        env = TypeEnv.make({"res": "int", "this": "Scan"})
        op = Op(kind="plus", env_in=env, env_out=env, rhs=(),
                env_rhs=env.restrict(["res"]))
        e = bits(figures_info.points, "ext0")
        assert domain.combine(op, e, 0) == 0
        assert domain.combine(op, 0, e) == 0
        assert domain.combine(op, e, e) == e

    def test_dispatch_prunes_impossible_candidates(self, domain, figures_info):
        table = figures_info.points
        env = TypeEnv.make({"f": "Figure", "res": "Figure", "this": "Scan"})
        e = bits(table, "ext0", "pi2", "pi3")
        dead = Op(kind="lookup", env_in=env, env_out=env.replace("res", "Figure"),
                  method="Figure.def", selector="def")
        live = Op(kind="lookup", env_in=env, env_out=env.replace("res", "Square"),
                  method="Square.def", selector="def")
        assert domain.lookup(dead, e) == 0
        assert domain.lookup(live, e) == e

    def test_call_keeps_arguments_and_receiver(self, domain, figures_info):
        table = figures_info.points
        env = TypeEnv.make({"f": "Figure", "a": "Angle", "$t0": "Angle",
                            "res": "Square", "this": "Scan"})
        op = Op(kind="call", env_in=env, env_out=None, names=("$t0",))
        e = bits(table, "ext0", "pi1", "pi2")
        # this:Scan falls out of scope, so the external vanishes; the Square
        # receiver and the Angle argument survive.
        assert domain.call(op, e) == bits(table, "pi1", "pi2")
