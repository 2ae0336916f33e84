"""Constraint backend: generation, component solving, engine agreement."""

import pathlib

import pytest

from ooescape.constraints import (ConstraintGraph, analyze_constraints,
                                  generate_constraints, solve_constraints,
                                  state_at)
from ooescape.domain_er import ERDomain
from ooescape.engine import analyze
from ooescape.frontend import load_program, load_source
from ooescape.model import RES

CORPUS = pathlib.Path(__file__).parent / "corpus"


@pytest.fixture(scope="module")
def denotational(figures_program):
    return analyze(figures_program, ERDomain(figures_program))

SINGLE_NEW = """\
//! entry: Box.main

class Box {
    void main(int n) {
        Box b = new Box() {p1};
    }
}
"""

STRAIGHT_LINE = """\
//! entry: Box.main

class Box {
    Box next;

    void main(int n) {
        Box a = new Box() {p1};
        Box b = a;
        Box c = b;
        c = null;
    }
}
"""


class TestGeneration:
    def test_new_contributes_a_constant_seed(self):
        prog = load_source(SINGLE_NEW)
        graph = generate_constraints(prog)
        p1 = prog.points.bit("p1")
        seeded = [u for u, bits in graph.seeds.items()
                  if u[0] == "v" and u[2] == RES and bits & p1]
        assert seeded, "allocation must seed its result unknown"

    def test_every_unknown_is_indexed_densely(self):
        prog = load_source(STRAIGHT_LINE)
        graph = generate_constraints(prog)
        assert sorted(graph.index.values()) == list(range(len(graph.index)))
        for src, dst, _ in graph.edges:
            assert src in graph.index and dst in graph.index

    def test_field_modes_change_unknown_space(self, figures_program):
        merged = generate_constraints(figures_program, fields="merged")
        split = generate_constraints(figures_program, fields="per-point")
        merged_fields = {u for u in merged.index if u[0] == "f"}
        split_fields = {u for u in split.index if u[0] == "f"}
        assert len(merged_fields) == 2  # one global unknown per class field
        assert len(split_fields) > len(merged_fields)

    def test_unknown_modes_rejected(self, figures_program):
        with pytest.raises(ValueError):
            generate_constraints(figures_program, fields="global")
        with pytest.raises(ValueError):
            generate_constraints(figures_program, frames="exact")


class TestSolver:
    def test_seed_propagates_along_copy_chain(self):
        x, y = ("v", 0, "x"), ("v", 1, "x")
        graph = _bare_graph(index={x: 0, y: 1}, seeds={x: 0b1},
                            edges=[(x, y, 0b1)])
        sol = solve_constraints(graph)
        assert sol.values == {x: 0b1, y: 0b1}

    def test_cycle_solves_to_one_component(self):
        x, y = ("v", 0, "x"), ("v", 1, "x")
        graph = _bare_graph(index={x: 0, y: 1}, seeds={x: 0b1},
                            edges=[(x, y, 0b11), (y, x, 0b11)])
        sol = solve_constraints(graph)
        assert sol.values[x] == sol.values[y] == 0b1
        assert sol.components == 1
        assert sol.linearity() == 2.0
        assert sol.visits >= 2  # the component needed a confirmation pass

    def test_masks_filter_propagation(self):
        x, y = ("v", 0, "x"), ("v", 1, "x")
        graph = _bare_graph(index={x: 0, y: 1}, seeds={x: 0b111},
                            edges=[(x, y, 0b010)])
        sol = solve_constraints(graph)
        assert sol.values[y] == 0b010

    def test_acyclic_graph_takes_one_visit_per_component(self):
        prog = load_source(STRAIGHT_LINE)
        graph = generate_constraints(prog)
        sol = solve_constraints(graph)
        assert sol.visits == sol.components
        assert sol.linearity() == 1.0

    def test_loops_create_larger_components(self, figures_program):
        graph = generate_constraints(figures_program)
        sol = solve_constraints(graph)
        assert sol.linearity() > 1.0
        assert any(len(c) > 1 for c in graph.scc_order())

    @pytest.mark.parametrize("fields", ["merged", "per-point"])
    def test_solution_satisfies_every_constraint(self, figures_program, fields):
        graph = generate_constraints(figures_program, fields=fields)
        sol = solve_constraints(graph)
        for u, bits in graph.seeds.items():
            assert sol.values[u] & bits == bits
        for src, dst, mask in graph.edges:
            flowed = sol.values[src] & mask
            assert flowed | sol.values[dst] == sol.values[dst]


class TestEngineAgreement:
    def test_per_point_fields_match_the_iterating_engine(self, figures_program,
                                                         denotational):
        result = analyze_constraints(figures_program, fields="per-point")
        for m in figures_program.methods:
            assert result.escaping(m) == denotational.escaping(m), m

    def test_merged_fields_only_ever_widen(self, figures_program, denotational):
        result = analyze_constraints(figures_program, fields="merged")
        for m in figures_program.methods:
            merged, exact = result.escaping(m), denotational.escaping(m)
            assert merged | exact == merged, m

    def test_allocatable_report_matches(self, figures_program, denotational):
        result = analyze_constraints(figures_program, fields="per-point")
        for m in figures_program.methods:
            assert result.allocatable(m) == denotational.allocatable(m)
        assert result.allocatable("Scan.scan") == ("pi2", "pi3")

    def test_watchpoints_match_at_per_point_fields(self, figures_program,
                                                   denotational):
        result = analyze_constraints(figures_program, fields="per-point")
        scan_den = denotational.methods["Scan.scan"].watch
        scan_cst = result.methods["Scan.scan"].watch
        for label in ("w1", "w2", "Scan.scan:exit"):
            assert scan_cst[label] == scan_den[label], label

    def test_stats_are_reported(self, figures_program):
        result = analyze_constraints(figures_program)
        assert result.nc > 0
        assert result.linearity >= 1.0
        assert result.iterations > 0
        assert result.millis >= 0.0


class TestPruning:
    def test_dead_candidates_are_discovered(self, figures_program):
        graph = generate_constraints(figures_program)
        assert graph.dead_sites
        # The scanner never touches Angle.acute, so its body is not encoded.
        assert "Angle.acute" in figures_program.methods
        assert "Angle.acute" not in graph.live_methods

    def test_unpruned_graph_is_strictly_coarser(self, figures_program):
        exact = analyze_constraints(figures_program, fields="per-point")
        coarse = analyze_constraints(figures_program, fields="per-point",
                                     prune=False)
        for m in figures_program.methods:
            assert coarse.escaping(m) | exact.escaping(m) == coarse.escaping(m)
        # The second def() call site only dispatches to Circle.def; without
        # pruning, memory still flows through the impossible Square.def
        # candidate and drags extra points into its summary.
        assert coarse.escaping("Square.def") != exact.escaping("Square.def")

    def test_pruned_methods_report_bottom(self, figures_program):
        graph = generate_constraints(figures_program)
        sol = solve_constraints(graph)
        state = state_at(graph, sol, graph.entry_points["Angle.acute"])
        assert state is None


def _bare_graph(index, seeds, edges) -> ConstraintGraph:
    """A graph with only solver-relevant parts filled in."""
    return ConstraintGraph(
        program=None, fields_mode="merged", frames_mode="per-point",
        index=index, seeds=seeds, edges=edges, nc=len(seeds) + len(edges),
        point_envs={}, point_owner={}, entry_points={}, exit_points={},
        schedule_points={}, watch_points={})
