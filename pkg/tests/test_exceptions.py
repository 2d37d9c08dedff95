"""
Unit tests for floquetdg -- exception hierarchy, exit codes and error records.
"""

from __future__ import annotations

import json

import pytest

from floquetdg.exceptions import (
    BlowUpError,
    ConfigurationError,
    FloquetDGError,
    GeometryError,
    MaterialError,
    MeshError,
    NodeSetError,
    ProbeError,
    SearchFailureError,
    SingularityError,
    SpectrumError,
    TopologyError,
)

EXIT_CODES = [
    (ConfigurationError("x"), "CONFIGURATION_ERROR", 2),
    (MaterialError("x"), "MATERIAL_ERROR", 2),
    (SingularityError(), "GRAZING_INCIDENCE", 2),
    (MeshError("x"), "MESH_ERROR", 3),
    (NodeSetError(), "NODE_SET_ERROR", 3),
    (GeometryError("x"), "GEOMETRY_ERROR", 3),
    (TopologyError("x"), "TOPOLOGY_ERROR", 3),
    (ProbeError("x"), "PROBE_ERROR", 3),
    (BlowUpError("x", time=1.0), "BLOW_UP", 4),
    (SearchFailureError("x"), "SEARCH_FAILURE", 4),
    (SpectrumError("x"), "SPECTRUM_ERROR", 1),
]


class TestExceptionHierarchy:
    @pytest.mark.parametrize(("exc", "code", "exit_code"), EXIT_CODES)
    def test_codes(self, exc, code, exit_code):
        assert isinstance(exc, FloquetDGError)
        assert exc.code == code
        assert exc.exit_code == exit_code

    def test_catch_all_via_base(self):
        with pytest.raises(FloquetDGError):
            raise TopologyError("unpaired periodic face", uncovered_area=0.25)

    def test_str_and_repr(self):
        exc = MeshError("element 3 has zero volume", element=3)
        assert str(exc) == "[MESH_ERROR] element 3 has zero volume"
        assert repr(exc) == (
            "MeshError(message='element 3 has zero volume', code='MESH_ERROR', exit_code=3)"
        )
        assert exc.element == 3
        assert exc.face is None

    def test_blow_up_carries_time(self):
        exc = BlowUpError("energy grew", time=2.5)
        assert exc.time == 2.5
        assert exc.to_record()["details"] == {"time": 2.5}


class TestErrorRecords:
    def test_configuration_record_has_fields_and_line(self):
        exc = ConfigurationError("bad", fields={"mesh.order": "must lie in 1..8"}, line=4)
        record = exc.to_record()
        assert record == {
            "code": "CONFIGURATION_ERROR",
            "message": "bad",
            "details": None,
            "fields": {"mesh.order": "must lie in 1..8"},
            "line": 4,
        }
        json.dumps(record)

    def test_defaults(self):
        exc = ConfigurationError()
        assert exc.message == "Invalid configuration"
        assert exc.fields == {}
        assert exc.line is None
        assert TopologyError("x").uncovered_area == 0.0
