import pytest

from ooescape.model import (
    INT,
    ClassTable,
    CreationPoint,
    CreationPointTable,
    ModelError,
    StaticInfo,
    TypeEnv,
    compatible_points,
)

from conftest import _sig


class TestTypeEnv:
    def test_interning(self):
        a = TypeEnv.make({"x": INT, "y": "Figure"})
        b = TypeEnv.make({"y": "Figure", "x": INT})
        assert a is b

    def test_extend_restrict(self):
        env = TypeEnv.make({"x": INT})
        env2 = env.extend("f", "Figure")
        assert env2["f"] == "Figure"
        assert env2.restrict(["f"]) is env
        assert env2.restrict_to(["f"]) is TypeEnv.make({"f": "Figure"})

    def test_extend_existing_fails(self):
        env = TypeEnv.make({"x": INT})
        with pytest.raises(ModelError):
            env.extend("x", INT)

    def test_restrict_unknown_fails(self):
        with pytest.raises(ModelError):
            TypeEnv.make({}).restrict(["ghost"])

    def test_replace_retypes(self):
        env = TypeEnv.make({"res": "Figure"})
        assert env.replace("res", "Square")["res"] == "Square"


class TestCreationPointTable:
    def test_bits_round_trip(self, figures_points):
        bits = figures_points.bits_of(["pi1", "pi4"])
        assert figures_points.names_of(bits) == ["pi1", "pi4"]
        assert bits == figures_points.bit("pi1") | figures_points.bit("pi4")

    def test_classes(self, figures_points):
        assert figures_points.class_of("pi2") == "Square"
        assert figures_points.class_of("ext0") == "Scan"
        assert figures_points.external_bits == figures_points.bit("ext0")

    def test_externals_must_be_last(self):
        with pytest.raises(ModelError):
            CreationPointTable(
                [CreationPoint("e", "A", external=True), CreationPoint("p", "A")]
            )


class TestClassTable:
    def test_subtyping(self, figures_classes):
        ct = figures_classes
        assert ct.subtype_of("Square", "Figure")
        assert not ct.subtype_of("Figure", "Square")
        assert ct.subtype_of("Circle", "Circle")
        assert ct.subtype_of(INT, INT)
        assert not ct.subtype_of(INT, "Figure")
        assert not ct.subtype_of("Square", "Circle")

    def test_subclasses_in_declaration_order(self, figures_classes):
        assert figures_classes.subclasses("Figure") == ["Figure", "Square", "Circle"]

    def test_field_qualification(self, figures_classes):
        ct = figures_classes
        assert ct.field_id("Square", "x") == "Square.x"
        assert ct.field_id("Circle", "y") == "Circle.y"
        assert ct.field_id("Square", "next") == "next"
        assert ct.field_id("Circle", "next") == "next"
        assert ct.field_id("Angle", "degree") == "degree"
        with pytest.raises(ModelError):
            ct.field_id("Scan", "next")

    def test_fields_of(self, figures_classes):
        ct = figures_classes
        assert ct.fields_of("Square") is TypeEnv.make(
            {
                "next": "Figure",
                "rotation": "Angle",
                "side": INT,
                "Square.x": INT,
                "Square.y": INT,
            }
        )
        assert ct.fields_of("Circle") is TypeEnv.make(
            {"next": "Figure", "radius": INT, "Circle.x": INT, "Circle.y": INT}
        )
        assert ct.fields_of("Scan") is TypeEnv.make({})

    def test_all_fields_env(self, figures_classes):
        expected = TypeEnv.make(
            {
                "degree": INT,
                "next": "Figure",
                "rotation": "Angle",
                "side": INT,
                "radius": INT,
                "Square.x": INT,
                "Square.y": INT,
                "Circle.x": INT,
                "Circle.y": INT,
            }
        )
        assert figures_classes.all_fields_env() is expected

    def test_method_dispatch_tables(self, figures_classes):
        ct = figures_classes
        assert ct.methods_of("Circle")["rot"].name == "Figure.rot"
        assert ct.methods_of("Circle")["def"].name == "Circle.def"
        assert ct.methods_of("Square")["rot"].name == "Square.rot"
        assert ct.methods_of("Figure")["draw"].name == "Figure.draw"
        assert ct.methods_of("Scan")["scan"].params == ("n",)

    def test_method_signature_env(self, figures_classes):
        sig = figures_classes.method("Scan.rotate")
        assert sig.param_env is TypeEnv.make(
            {"f": "Figure", "out": INT, "this": "Scan"}
        )
        assert sig.return_type == INT

    def test_inheritance_cycle_rejected(self):
        with pytest.raises(ModelError):
            ClassTable(["A", "B"], {"A": "B", "B": "A"}, {}, {})

    def test_unknown_parent_rejected(self):
        with pytest.raises(ModelError):
            ClassTable(["A"], {"A": "Ghost"}, {}, {})

    def test_duplicate_class_rejected(self):
        with pytest.raises(ModelError):
            ClassTable(["A", "A"], {"A": None}, {}, {})

    def test_redeclared_inherited_field_rejected(self):
        with pytest.raises(ModelError):
            ClassTable(
                ["A", "B"],
                {"A": None, "B": "A"},
                {"A": [("f", INT)], "B": [("f", INT)]},
                {},
            )

    def test_duplicate_field_in_class_rejected(self):
        with pytest.raises(ModelError):
            ClassTable(["A"], {"A": None}, {"A": [("f", INT), ("f", INT)]}, {})

    def test_unknown_field_type_rejected(self):
        with pytest.raises(ModelError):
            ClassTable(["A"], {"A": None}, {"A": [("f", "Ghost")]}, {})


class TestCompatiblePoints:
    def test_figures_examples(self, figures_info):
        pts, ct = figures_info.points, figures_info.classes
        bits = pts.bits_of(["ext0", "pi2"])
        assert compatible_points(pts, ct, bits, "Figure") == pts.bit("pi2")
        everything = pts.bits_of(["ext0", "pi1", "pi2", "pi3", "pi4"])
        assert figures_info.compatible(everything, "Angle") == pts.bits_of(
            ["pi1", "pi4"]
        )
        assert figures_info.compatible(everything, INT) == 0
        assert figures_info.compatible(everything, "Scan") == pts.bit("ext0")
