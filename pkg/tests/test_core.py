import pytest

from carcino.core import (
    Indication,
    OrganClass,
    ScoringConstants,
    Station,
    organs_of,
    station_of,
)
from carcino.errors import CarcinoError


def test_organ_codes_are_frozen():
    assert [int(o) for o in OrganClass] == list(range(8))
    assert [o.name for o in OrganClass] == [
        "DIAPHRAGM",
        "LIVER",
        "STOMACH",
        "SPLEEN",
        "LESSER_OMENTUM",
        "GREATER_OMENTUM",
        "PARIETAL_PERITONEUM",
        "BOWEL",
    ]


def test_station_codes_are_frozen():
    assert [int(s) for s in Station] == list(range(6))
    assert len(Station) == 6


def test_station_of_full_mapping():
    expected = {
        OrganClass.DIAPHRAGM: Station.DIAPHRAGM,
        OrganClass.LIVER: Station.LIVER,
        OrganClass.STOMACH: Station.STOMACH_SPLEEN_LESSER_OMENTUM,
        OrganClass.SPLEEN: Station.STOMACH_SPLEEN_LESSER_OMENTUM,
        OrganClass.LESSER_OMENTUM: Station.STOMACH_SPLEEN_LESSER_OMENTUM,
        OrganClass.GREATER_OMENTUM: Station.GREATER_OMENTUM,
        OrganClass.PARIETAL_PERITONEUM: Station.PARIETAL_PERITONEUM,
        OrganClass.BOWEL: Station.BOWEL,
    }
    for organ in OrganClass:
        assert station_of(organ) is expected[organ]
    # specific groupings
    assert station_of(OrganClass.STOMACH) is Station.STOMACH_SPLEEN_LESSER_OMENTUM
    assert station_of(OrganClass.LIVER) is Station.LIVER
    assert station_of(OrganClass.BOWEL) is Station.BOWEL


def test_station_of_is_surjective_and_constant():
    hit = {station_of(o) for o in OrganClass}
    assert hit == set(Station)
    assert [station_of(o) for o in OrganClass] == [station_of(o) for o in OrganClass]


def test_organs_of_is_exact_preimage():
    groups = {s: organs_of(s) for s in Station}
    assert groups[Station.STOMACH_SPLEEN_LESSER_OMENTUM] == (
        OrganClass.STOMACH,
        OrganClass.SPLEEN,
        OrganClass.LESSER_OMENTUM,
    )
    all_organs = [o for s in Station for o in groups[s]]
    assert sorted(all_organs) == list(OrganClass)
    for s in Station:
        for o in groups[s]:
            assert station_of(o) is s


def test_default_constants_match_clinical_operating_point():
    c = ScoringConstants()
    assert c.organ_confidence_threshold == 0.70
    assert c.pc_confidence_threshold == 0.90
    assert c.points_per_positive_station == 2
    assert c.its_cutoff == 8
    assert c.frame_sampling_interval == 5.0
    assert c.fs_step == 2


def test_constants_are_overridable():
    c = ScoringConstants().replace_with(pc_confidence_threshold=0.8)
    assert c.pc_confidence_threshold == 0.8
    assert c.organ_confidence_threshold == 0.70


@pytest.mark.parametrize(
    "field,value",
    [
        ("organ_confidence_threshold", 0.0),
        ("organ_confidence_threshold", 1.5),
        ("pc_confidence_threshold", -0.1),
        ("roi_threshold", 1.2),
        ("points_per_positive_station", 0),
        ("its_cutoff", -1),
        ("frame_sampling_interval", 0.0),
        ("fs_step", 0),
        ("min_nodule_pixels", 0),
    ],
)
def test_constants_reject_out_of_range(field, value):
    with pytest.raises(CarcinoError):
        ScoringConstants(**{field: value})


def test_constants_from_dict_rejects_unknown_fields():
    with pytest.raises(CarcinoError):
        ScoringConstants.from_dict({"organ_threshold": 0.5})


def test_constants_json_roundtrip(tmp_path):
    path = tmp_path / "constants.json"
    path.write_text('{"pc_confidence_threshold": 0.8, "its_cutoff": 6}')
    c = ScoringConstants.from_json_file(path)
    assert c.pc_confidence_threshold == 0.8
    assert c.its_cutoff == 6
    assert c.organ_confidence_threshold == 0.70


def test_indication_values_are_stable():
    assert Indication.SURGERY_INDICATED.value == "SurgeryIndicated"
    assert Indication.SURGERY_CONTRAINDICATED.value == "SurgeryContraindicated"
