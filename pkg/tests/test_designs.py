import numpy as np
import pytest
from pydantic import ValidationError as PydanticValidationError

from app.core.exceptions import (
    MissingSlidingEntry,
    ParseError,
    UnknownLevelLabel,
    UnsupportedLevelCount,
    ValidationError,
)
from app.designs.fixtures import WELDING_GEOMETRY, build_nested_design
from app.designs.models import FactorRole
from app.designs.schemas import FactorSpec, PlanningMatrix, SlidingSpec
from app.designs.service import (
    get_design,
    load_design,
    resolve_settings,
    save_design,
    sliding_geometry,
    with_geometry,
)


def _two_level_factors():
    return (
        FactorSpec(name="A", role=FactorRole.PARENT, levels=("2", "4"), settings=(2.0, 4.0)),
        FactorSpec(name="B", role=FactorRole.SLID, levels=("low", "high"), parent="A"),
    )


# ========== RESOLUTION ==========

def test_welding_fixture_resolves_weld_time_per_pulse_rate(welding):
    assert welding.runs == 18
    assert welding.factor_names == ("A", "B", "C", "D", "E", "F", "G", "H")
    b = welding.actual_array("B")
    assert b[:3].tolist() == [32.0, 32.0, 32.0]
    assert b[6] == 40.0
    assert b[9] == 18.0
    assert sorted(set(b[welding.level_indices("A") == 1])) == [18.0, 22.0, 26.0]
    assert welding.planning.level_counts("H") == {"3/8": 12, "1/4": 6}


def test_welding_columns_are_balanced(welding):
    planning = welding.planning
    assert sorted(planning.level_counts("A").values()) == [9, 9]
    for name in ("B", "C", "D", "E", "F", "G"):
        assert sorted(planning.level_counts(name).values()) == [6, 6, 6], name
    # H merges two of three balanced levels
    assert sorted(planning.level_counts("H").values()) == [6, 12]


def test_welding_h_settings_follow_labels(welding):
    h = welding.actual_array("H")
    labels = welding.labels("H")
    assert all(v == (0.25 if label == "1/4" else 0.375) for v, label in zip(h, labels))


def test_unknown_label_is_rejected():
    planning = PlanningMatrix(runs=2, columns={"A": ("2", "5"), "B": ("low", "high")})
    table = SlidingSpec(parent="A", slid="B", table={"2": (1.0, 2.0), "4": (3.0, 4.0)})
    with pytest.raises(UnknownLevelLabel):
        resolve_settings(planning, _two_level_factors(), (table,))


def test_missing_sliding_entry_is_rejected():
    planning = PlanningMatrix(runs=2, columns={"A": ("2", "4"), "B": ("low", "high")})
    table = SlidingSpec(parent="A", slid="B", table={"2": (1.0, 2.0)})
    with pytest.raises(MissingSlidingEntry):
        resolve_settings(planning, _two_level_factors(), (table,))


def test_sliding_entry_with_wrong_length_is_rejected():
    planning = PlanningMatrix(runs=2, columns={"A": ("2", "4"), "B": ("low", "high")})
    table = SlidingSpec(parent="A", slid="B", table={"2": (1.0, 2.0, 3.0), "4": (3.0, 4.0, 5.0)})
    with pytest.raises(MissingSlidingEntry):
        resolve_settings(planning, _two_level_factors(), (table,))


def test_slid_factor_cannot_carry_settings():
    with pytest.raises(PydanticValidationError):
        FactorSpec(name="B", role=FactorRole.SLID, levels=("low", "high"), settings=(1.0, 2.0), parent="A")


def test_settings_must_increase():
    with pytest.raises(PydanticValidationError):
        FactorSpec(name="C", levels=("a", "b", "c"), settings=(1.0, 3.0, 2.0))


def test_sliding_table_entries_must_increase():
    with pytest.raises(PydanticValidationError):
        SlidingSpec(parent="A", slid="B", table={"2": (2.0, 1.0)})


def test_partial_geometry_is_rejected():
    with pytest.raises(PydanticValidationError):
        SlidingSpec(parent="A", slid="B", table={"2": (1.0, 2.0)}, s=0.0, t=1.0)


# ========== GEOMETRY ==========

def test_welding_geometry_is_inferred(welding):
    s, t, r = sliding_geometry(welding)
    assert s == pytest.approx(0.0, abs=1e-12)
    assert t == pytest.approx(-7 / 11)
    assert r == pytest.approx(4 / 11)


def test_annotated_geometry_is_checked(welding):
    s, t, r = WELDING_GEOMETRY
    good = SlidingSpec(parent="A", slid="B", table=welding.sliding[0].table, s=s, t=t, r=r)
    design = resolve_settings(welding.planning, welding.factors, (good,))
    assert design.sliding[0].has_geometry

    bad = good.model_copy(update={"t": -0.5})
    with pytest.raises(ValidationError):
        resolve_settings(welding.planning, welding.factors, (bad,))


def test_with_geometry_annotates_table(welding):
    annotated = with_geometry(welding)
    assert annotated.sliding[0].geometry == pytest.approx(WELDING_GEOMETRY)
    assert annotated.actual == welding.actual


def test_non_affine_table_has_no_geometry(welding):
    table = dict(welding.sliding[0].table)
    table["4"] = (18.0, 22.0, 30.0)
    spec = SlidingSpec(parent="A", slid="B", table=table)
    design = resolve_settings(welding.planning, welding.factors, (spec,))
    assert sliding_geometry(design) is None


# ========== NESTED DESIGNS ==========

def test_nested_design_table_and_geometry(nested):
    table = nested.sliding[0].table
    assert table == {"1": (11.0, 12.0, 13.0), "2": (13.0, 14.0, 15.0), "3": (15.0, 16.0, 17.0)}
    s, t, r = nested.sliding[0].geometry
    assert s == pytest.approx(0.0, abs=1e-12)
    assert t == pytest.approx(2 / 3)
    assert r == pytest.approx(1 / 3)
    assert nested.runs == 9


def test_nested_design_replicates():
    design = build_nested_design((0.0, 1.0), center=(0.0, 1.0), half_width=2.0, n_slid=2, replicates=3)
    assert design.runs == 12
    assert design.planning.level_counts("B") == {"low": 6, "high": 6}


def test_nested_design_rejects_four_slid_levels():
    with pytest.raises(UnsupportedLevelCount):
        build_nested_design((1.0, 2.0), center=(0.0, 1.0), half_width=1.0, n_slid=4)


def test_nested_design_needs_two_parent_levels():
    with pytest.raises(ValidationError):
        build_nested_design((1.0,), center=(0.0, 1.0), half_width=1.0)


# ========== FILE I/O ==========

def test_save_then_load_keeps_design(tmp_path, welding_geometry):
    csv_path, meta_path = save_design(welding_geometry, tmp_path / "weld")
    assert csv_path.name == "weld.csv"
    assert meta_path.name == "weld.json"
    assert csv_path.read_text().splitlines()[0] == "A,B,C,D,E,F,G,H"

    loaded = load_design(tmp_path / "weld")
    assert loaded.planning == welding_geometry.planning
    assert loaded.actual == welding_geometry.actual
    assert loaded.sliding[0].geometry == pytest.approx(WELDING_GEOMETRY)


def test_get_design_resolves_fixture_name():
    assert get_design("welding").runs == 18


def test_missing_label_reports_position(tmp_path):
    (tmp_path / "d.csv").write_text("A,B\n2,low\n4,\n")
    (tmp_path / "d.json").write_text("{}")
    with pytest.raises(ParseError) as info:
        load_design(tmp_path / "d")
    assert info.value.line == 3
    assert info.value.column == 2


def test_duplicate_factor_column_is_rejected(tmp_path):
    (tmp_path / "d.csv").write_text("A,B,A\n2,low,2\n")
    (tmp_path / "d.json").write_text("{}")
    with pytest.raises(ParseError) as info:
        load_design(tmp_path / "d")
    assert info.value.line == 1
    assert info.value.column == 3


def test_malformed_metadata_reports_line(tmp_path):
    (tmp_path / "d.csv").write_text("A,B\n2,low\n")
    (tmp_path / "d.json").write_text('{\n  "runs": 1,\n  "factors": [\n')
    with pytest.raises(ParseError) as info:
        load_design(tmp_path / "d")
    assert info.value.line is not None


def test_run_count_mismatch_is_rejected(tmp_path, welding):
    save_design(welding, tmp_path / "weld")
    meta = tmp_path / "weld.json"
    meta.write_text(meta.read_text().replace('"runs": 18', '"runs": 17'))
    with pytest.raises(ValidationError):
        load_design(tmp_path / "weld")


def test_level_indices_follow_declared_order(welding):
    index = welding.level_indices("B")
    assert index[:9].tolist() == [0, 0, 0, 1, 1, 1, 2, 2, 2]
    assert np.all(welding.level_indices("A")[9:] == 1)
