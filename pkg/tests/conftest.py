"""Shared fixtures: the figures program built by hand, straight from its tables.

Building the model manually (rather than through the frontend) keeps the
low-level tests independent of the parser; frontend tests later check that
parsing the actual source produces this exact model.
"""

import pathlib

import pytest

from ooescape.frontend import load_program
from ooescape.model import (
    INT,
    OUT,
    THIS,
    ClassTable,
    CreationPoint,
    CreationPointTable,
    MethodSig,
    StaticInfo,
    TypeEnv,
)


def _sig(klass, selector, params=(), ret=INT):
    env = {OUT: ret, THIS: klass}
    env.update(params)
    return MethodSig(
        name=f"{klass}.{selector}",
        klass=klass,
        selector=selector,
        params=tuple(n for n, _ in params),
        param_env=TypeEnv.make(env),
    )


def build_figures_classes() -> ClassTable:
    classes = ["Angle", "Figure", "Square", "Circle", "Scan"]
    parent = {
        "Angle": None,
        "Figure": None,
        "Square": "Figure",
        "Circle": "Figure",
        "Scan": None,
    }
    field_decls = {
        "Angle": [("degree", INT)],
        "Figure": [("next", "Figure")],
        "Square": [("side", INT), ("x", INT), ("y", INT), ("rotation", "Angle")],
        "Circle": [("radius", INT), ("x", INT), ("y", INT)],
        "Scan": [],
    }
    sigs = {
        "Angle": {"acute": _sig("Angle", "acute")},
        "Figure": {
            "def": _sig("Figure", "def"),
            "rot": _sig("Figure", "rot", params=[("a", "Angle")]),
            "draw": _sig("Figure", "draw"),
        },
        "Square": {
            "def": _sig("Square", "def"),
            "rot": _sig("Square", "rot", params=[("a", "Angle")]),
            "draw": _sig("Square", "draw"),
        },
        "Circle": {
            "def": _sig("Circle", "def"),
            "draw": _sig("Circle", "draw"),
        },
        "Scan": {
            "scan": _sig("Scan", "scan", params=[("n", "Figure")]),
            "rotate": _sig("Scan", "rotate", params=[("f", "Figure")]),
        },
    }
    method_sigs = {k: dict(v) for k, v in sigs.items()}
    return ClassTable(classes, parent, field_decls, method_sigs)


def build_figures_points() -> CreationPointTable:
    return CreationPointTable(
        [
            CreationPoint("pi1", "Angle"),
            CreationPoint("pi2", "Square"),
            CreationPoint("pi3", "Circle"),
            CreationPoint("pi4", "Angle"),
            CreationPoint("ext0", "Scan", external=True),
        ]
    )


@pytest.fixture(scope="session")
def figures_classes():
    return build_figures_classes()


@pytest.fixture(scope="session")
def figures_points():
    return build_figures_points()


@pytest.fixture(scope="session")
def figures_info(figures_classes, figures_points):
    return StaticInfo(figures_classes, figures_points)


CORPUS = pathlib.Path(__file__).parent / "corpus"


@pytest.fixture(scope="session")
def figures_program():
    return load_program(str(CORPUS / "figures.oo"))


@pytest.fixture(scope="session")
def chain_info():
    """Flat three-class world: Node -> Pair -> Node cycles, Leaf isolated."""
    ident = MethodSig("Node.id", "Node", "id", ("n",),
                      TypeEnv.make({"n": "int", "out": "int", "this": "Node"}))
    classes = ClassTable(
        classes=("Node", "Pair", "Leaf"),
        parent={"Node": None, "Pair": None, "Leaf": None},
        field_decls={"Node": (("next", "Pair"),),
                     "Pair": (("left", "Node"), ("weight", "int")),
                     "Leaf": ()},
        method_sigs={"Node": {"id": ident}, "Pair": {}, "Leaf": {}},
    )
    points = CreationPointTable([
        CreationPoint("a", "Node"),
        CreationPoint("b", "Pair"),
        CreationPoint("c", "Leaf"),
        CreationPoint("ext0", "Node", external=True),
    ])
    return StaticInfo(classes, points)


@pytest.fixture(scope="session")
def env_w0():
    """Scope at the end of Circle.def, before shadow copies are added."""
    return TypeEnv.make({OUT: INT, THIS: "Circle"})


@pytest.fixture(scope="session")
def env_w1():
    """Scope inside Scan.scan with local f live, before shadow copies."""
    return TypeEnv.make({"f": "Figure", "n": "Figure", OUT: INT, THIS: "Scan"})
