from __future__ import annotations

import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from physparts.asset import (
    CODE_KINDS,
    KIND_CODES,
    KinematicConstraint,
    ObjectAsset,
    assets_equal,
    dump_asset_json,
    load_asset,
    require_valid,
    save_asset,
    validate_asset,
)
from physparts.errors import MissingFile, SchemaViolation, ValidationError

from conftest import make_part, random_valid_asset, two_box_asset


def violation_codes(asset: ObjectAsset) -> set:
    return {v.code for v in validate_asset(asset)}


def with_constraint(c: KinematicConstraint) -> ObjectAsset:
    a = two_box_asset()
    return a.with_parts(a.parts, [c])


def test_kind_codes_are_a_bijection():
    assert KIND_CODES == {"A": 0, "B": 1, "C": 2, "D": 3, "E": 4, "CB": 5}
    assert {CODE_KINDS[v] for v in KIND_CODES.values()} == set(KIND_CODES)


def test_minimal_asset_is_valid():
    assert validate_asset(two_box_asset()) == []


# --- constraint field-presence matrix -------------------------------------
# rows: (kind, fields set) -> expected violation codes (empty = valid)

UNIT_X = (1.0, 0.0, 0.0)
PIVOT = (0.0, 0.5, 0.0)

MATRIX = [
    # A/E take no parameters at all
    (dict(kind="A"), set()),
    (dict(kind="E"), set()),
    (dict(kind="A", parent_part=1), {"FieldForbiddenForKind"}),
    (dict(kind="E", direction=UNIT_X), {"FieldForbiddenForKind"}),
    (dict(kind="E", pivot=PIVOT, range=(0.0, 1.0)), {"FieldForbiddenForKind"}),
    # B: parent+child distinct, unit direction, no pivot
    (dict(kind="B", parent_part=1, child_part=2, direction=UNIT_X,
          range=(-0.4, 0.0)), set()),
    (dict(kind="B", parent_part=1, child_part=2, direction=UNIT_X), set()),
    (dict(kind="B", direction=UNIT_X), {"MissingParentChild"}),
    (dict(kind="B", parent_part=1, child_part=1, direction=UNIT_X),
     {"ParentChildIdentical"}),
    (dict(kind="B", parent_part=1, child_part=2), {"MissingDirection"}),
    (dict(kind="B", parent_part=1, child_part=2, direction=(1.0, 1.0, 0.0)),
     {"DirectionNotUnit"}),
    (dict(kind="B", parent_part=1, child_part=2, direction=UNIT_X, pivot=PIVOT),
     {"PivotForbiddenForPrismatic"}),
    (dict(kind="B", parent_part=1, child_part=2, direction=UNIT_X,
          range=(0.5, -0.5)), {"RangeReversed"}),
    # C: direction + pivot
    (dict(kind="C", parent_part=1, child_part=2, direction=UNIT_X, pivot=PIVOT),
     set()),
    (dict(kind="C", parent_part=1, child_part=2, direction=UNIT_X),
     {"MissingPivot"}),
    (dict(kind="C", parent_part=1, child_part=2, pivot=PIVOT),
     {"MissingDirection"}),
    # D: pivot required, direction free (a point joint has no single axis)
    (dict(kind="D", parent_part=1, child_part=2, pivot=PIVOT), set()),
    (dict(kind="D", parent_part=1, child_part=2, pivot=PIVOT,
          direction=UNIT_X), set()),
    (dict(kind="D", parent_part=1, child_part=2), {"MissingPivot"}),
    # CB: both direction and pivot
    (dict(kind="CB", parent_part=1, child_part=2, direction=UNIT_X,
          pivot=PIVOT, range=(0.0, np.pi / 2)), set()),
    (dict(kind="CB", parent_part=1, child_part=2, direction=UNIT_X),
     {"MissingPivot"}),
    (dict(kind="CB", parent_part=1, child_part=2, pivot=PIVOT),
     {"MissingDirection"}),
]


@pytest.mark.parametrize("fields,expected", MATRIX)
def test_constraint_field_matrix(fields, expected):
    asset = with_constraint(KinematicConstraint(**fields))
    assert violation_codes(asset) == expected


def test_direction_unit_tolerance_boundary():
    base = dict(kind="B", parent_part=1, child_part=2)
    ok = KinematicConstraint(**base, direction=(1.0 + 9e-10, 0.0, 0.0))
    bad = KinematicConstraint(**base, direction=(1.0 + 2e-9, 0.0, 0.0))
    assert violation_codes(with_constraint(ok)) == set()
    assert violation_codes(with_constraint(bad)) == {"DirectionNotUnit"}


def test_dangling_constraint_reference():
    c = KinematicConstraint(kind="B", parent_part=1, child_part=9,
                            direction=UNIT_X)
    assert "DanglingConstraintRef" in violation_codes(with_constraint(c))


def test_part_id_gap_is_a_violation():
    a = two_box_asset()
    bad = a.with_parts((a.parts[0], make_part(3, (0.0, -1.0, -1.0), (1.0, 1.0, 1.0))))
    assert "PartIdsNotConsecutive" in violation_codes(bad)


def test_vertex_out_of_range_detected():
    a = two_box_asset()
    bad = a.with_parts((a.parts[0], make_part(2, (0.0, -1.0, -1.0), (1.5, 1.0, 1.0))))
    assert "VertexOutOfRange" in violation_codes(bad)


def test_scalar_field_violations():
    a = two_box_asset()
    codes = violation_codes(
        ObjectAsset(object_name="x", category="x", absolute_scale=(0.0, 1.0, 1.0),
                    parts=a.parts))
    assert "NonPositiveScale" in codes
    bad_rank = make_part(1, (-1, -1, -1), (0, 1, 1), rank=11)
    codes = violation_codes(a.with_parts((bad_rank, a.parts[1])))
    assert "AffordanceOutOfRange" in codes


def test_approved_assets_need_all_four_descriptions():
    a = two_box_asset()
    assert validate_asset(a, approved=False) == []
    codes = {v.code for v in validate_asset(a, approved=True)}
    assert codes == {"DescriptionEmpty"}


def test_require_valid_raises_with_violations():
    c = KinematicConstraint(kind="C", parent_part=1, child_part=2)
    with pytest.raises(ValidationError) as exc:
        require_valid(with_constraint(c))
    assert "MissingDirection" in str(exc.value)


# --- round-trip -------------------------------------------------------------


def test_round_trip_100_random_assets(tmp_path, rng):
    for i in range(100):
        asset = random_valid_asset(rng)
        if validate_asset(asset):
            # conftest builder only emits valid assets; treat a slip as failure
            raise AssertionError(f"builder produced invalid asset at trial {i}")
        d = tmp_path / f"a{i:03d}"
        save_asset(asset, d)
        back = load_asset(d)
        assert assets_equal(asset, back)


def test_dump_is_canonical_and_stable():
    a = two_box_asset()
    s1 = dump_asset_json(a)
    s2 = dump_asset_json(a)
    assert s1 == s2
    assert s1.endswith("\n")
    data = json.loads(s1)
    assert list(data) == sorted(data)
    assert data["format_version"] == 1


def test_save_refuses_invalid_asset(tmp_path):
    c = KinematicConstraint(kind="B", parent_part=1, child_part=2)
    with pytest.raises(ValidationError):
        save_asset(with_constraint(c), tmp_path / "bad")


def test_load_missing_and_malformed(tmp_path):
    with pytest.raises(MissingFile):
        load_asset(tmp_path / "nope")
    d = tmp_path / "broken"
    d.mkdir()
    (d / "asset.json").write_text("{not json", encoding="utf-8")
    with pytest.raises(SchemaViolation):
        load_asset(d)


@settings(max_examples=50, deadline=None)
@given(
    kind=st.sampled_from(["B", "C", "D", "CB"]),
    lo=st.floats(-2.0, 2.0, allow_nan=False),
    span=st.floats(0.0, 2.0, allow_nan=False),
    finalized=st.booleans(),
)
def test_constraint_dict_round_trip(kind, lo, span, finalized):
    c = KinematicConstraint(
        kind=kind, parent_part=1, child_part=2,
        direction=UNIT_X if kind != "D" else None,
        pivot=PIVOT if kind != "B" else None,
        range=(lo, lo + span), finalized=finalized,
    )
    back = KinematicConstraint.from_dict(c.to_dict())
    assert back == c
