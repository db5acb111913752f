import json

import numpy as np
import pytest

from crbimpact.errors import ModelValidationError
from crbimpact.model import (
    ChainModel,
    JointSpec,
    LinkInertia,
    load_model,
    model_to_dict,
    parse_model,
    save_model,
    validate_model,
)
from crbimpact.spatial import Transform

from conftest import MODELS_DIR, random_transform


def minimal_doc(**overrides):
    doc = {
        "name": "mini",
        "gravity": [0.0, 0.0, -9.81],
        "links": [
            {
                "name": "bob",
                "mass": 1.5,
                "com": [0.3, 0.0, 0.0],
                "inertia": [[0.01, 0, 0], [0, 0.01, 0], [0, 0, 0.01]],
            }
        ],
        "joints": [
            {
                "name": "hinge",
                "kind": "revolute",
                "parent": -1,
                "origin": {"xyz": [0, 0, 0.1], "rpy": [0, 0, 0]},
                "axis": [0, 0, 1],
            }
        ],
        "contact": {"link": 0, "offset": [0.3, 0.0, 0.0]},
    }
    doc.update(overrides)
    return doc


def test_minimal_chain_loads():
    model = parse_model(minimal_doc())
    assert model.dof == 1
    assert model.links[0].mass == 1.5
    assert validate_model(model) == []


def test_zero_mass_rejected_with_path():
    doc = minimal_doc()
    doc["links"][0]["mass"] = 0.0
    with pytest.raises(ModelValidationError) as err:
        parse_model(doc)
    diag = err.value.diagnostics[0]
    assert diag.code == "physical/nonpositive-mass"
    assert diag.path == "/links/0/mass"
    assert "bob" in diag.message


def test_missing_field_reports_pointer():
    doc = minimal_doc()
    del doc["joints"][0]["axis"]
    with pytest.raises(ModelValidationError) as err:
        parse_model(doc)
    assert any(d.path == "/joints/0/axis" and d.code == "schema/missing-field"
               for d in err.value.diagnostics)


def test_wrong_type_reports_pointer():
    doc = minimal_doc()
    doc["links"][0]["mass"] = "heavy"
    with pytest.raises(ModelValidationError) as err:
        parse_model(doc)
    assert any(d.path == "/links/0/mass" and d.code == "schema/wrong-type"
               for d in err.value.diagnostics)


def test_bad_contact_link():
    doc = minimal_doc()
    doc["contact"]["link"] = 5
    with pytest.raises(ModelValidationError) as err:
        parse_model(doc)
    assert any(d.code == "topology/bad-contact-link" for d in err.value.diagnostics)


def test_bad_parent_order():
    doc = minimal_doc()
    doc["joints"][0]["parent"] = 3
    with pytest.raises(ModelValidationError) as err:
        parse_model(doc)
    assert any(d.code == "topology/bad-parent" for d in err.value.diagnostics)


def test_axis_renormalized_within_tolerance():
    doc = minimal_doc()
    doc["joints"][0]["axis"] = [0.0, 0.0, 1.0 + 1e-7]
    model = parse_model(doc)
    assert validate_model(model) == []
    assert abs(np.linalg.norm(model.joints[0].axis) - 1.0) <= 1e-12


def test_axis_beyond_tolerance_rejected():
    doc = minimal_doc()
    doc["joints"][0]["axis"] = [0.0, 0.0, 1.1]
    with pytest.raises(ModelValidationError) as err:
        parse_model(doc)
    assert any(d.code == "physical/axis-not-unit" for d in err.value.diagnostics)


def test_non_positive_definite_inertia_diagnostic():
    model = parse_model(minimal_doc())
    bad = ChainModel(
        model.name,
        (LinkInertia("bob", 1.5, [0.3, 0, 0], np.diag([0.01, 0.01, -0.01])),),
        model.joints,
        model.contact_link,
        model.contact_offset,
        model.gravity,
    )
    diags = validate_model(bad)
    assert len(diags) == 1
    assert diags[0].code == "physical/inertia-not-positive-definite"


def test_triangle_inequality_diagnostic():
    doc = minimal_doc()
    doc["links"][0]["inertia"] = [[1.0, 0, 0], [0, 0.1, 0], [0, 0, 0.1]]
    with pytest.raises(ModelValidationError) as err:
        parse_model(doc)
    assert any(d.code == "physical/inertia-triangle" for d in err.value.diagnostics)


def test_multiple_diagnostics_collected():
    doc = minimal_doc()
    doc["links"][0]["mass"] = -1.0
    doc["contact"]["link"] = 7
    with pytest.raises(ModelValidationError) as err:
        parse_model(doc)
    codes = {d.code for d in err.value.diagnostics}
    assert {"physical/nonpositive-mass", "topology/bad-contact-link"} <= codes


def test_arm7_loads(arm7):
    assert arm7.dof == 7
    assert arm7.total_mass == pytest.approx(sum(l.mass for l in arm7.links))
    assert validate_model(arm7) == []


def test_rod3_loads(rod3):
    assert rod3.dof == 3
    assert validate_model(rod3) == []


def test_roundtrip_preserves_model(arm7, tmp_path):
    path = tmp_path / "copy.model"
    save_model(arm7, path)
    again = load_model(path)
    assert again.name == arm7.name
    assert np.allclose(again.gravity, arm7.gravity, atol=1e-14)
    assert np.allclose(again.contact_offset, arm7.contact_offset, atol=1e-14)
    for a, b in zip(again.links, arm7.links):
        assert a.mass == pytest.approx(b.mass, abs=0, rel=1e-15)
        assert np.allclose(a.com, b.com, atol=1e-14)
        assert np.allclose(a.rot_inertia, b.rot_inertia, atol=1e-14)
    for a, b in zip(again.joints, arm7.joints):
        assert a.kind == b.kind
        assert np.allclose(a.axis, b.axis, atol=1e-12)
        assert np.allclose(a.origin.rotation, b.origin.rotation, atol=1e-12)
        assert np.allclose(a.origin.translation, b.origin.translation, atol=1e-14)


def test_roundtrip_random_rpy(tmp_path):
    rng = np.random.default_rng(11)
    for _ in range(20):
        g = random_transform(rng)
        doc = minimal_doc()
        model = parse_model(doc)
        chained = ChainModel(
            model.name,
            model.links,
            (JointSpec("hinge", "revolute", g, (0, 0, 1)),),
            0,
            model.contact_offset,
            model.gravity,
        )
        again = parse_model(model_to_dict(chained))
        assert np.allclose(again.joints[0].origin.rotation, g.rotation, atol=1e-12)


def test_not_json(tmp_path):
    path = tmp_path / "bad.model"
    path.write_text("{not json", encoding="utf-8")
    with pytest.raises(ModelValidationError) as err:
        load_model(path)
    assert err.value.diagnostics[0].code == "schema/not-json"


def test_bundled_files_are_canonical():
    # bundled models parse, and re-serializing them is value-stable
    for name in ("arm7.model", "rod3.model"):
        model = load_model(MODELS_DIR / name)
        again = parse_model(model_to_dict(model))
        assert again.dof == model.dof
        assert again.total_mass == pytest.approx(model.total_mass, rel=1e-15)
