"""
Custom exception hierarchy for floquetdg.

All exceptions extend :class:`FloquetDGError`, which itself extends
:class:`Exception`, so callers can catch the base class to handle every
solver-specific failure in a single ``except`` clause. The CLI turns any of
them into a nonzero exit status and a machine-readable error record.
"""

from __future__ import annotations

from typing import Any


class FloquetDGError(Exception):
    """Base exception for all floquetdg errors.

    Attributes:
        message: Human-readable error description.
        code: Machine-readable error code (e.g. ``"MESH_ERROR"``).
        exit_code: Process exit status the CLI uses for this error.
        details: Optional extra payload (offending ids, measured values).
    """

    def __init__(
        self,
        message: str,
        code: str = "UNKNOWN_ERROR",
        exit_code: int = 1,
        details: Any | None = None,
    ) -> None:
        super().__init__(message)
        self.message = message
        self.code = code
        self.exit_code = exit_code
        self.details = details

    def __str__(self) -> str:
        return f"[{self.code}] {self.message}"

    def __repr__(self) -> str:
        return (
            f"{self.__class__.__name__}(message={self.message!r}, "
            f"code={self.code!r}, exit_code={self.exit_code})"
        )

    def to_record(self) -> dict[str, Any]:
        """Return the JSON-serialisable error record written by the CLI."""
        return {"code": self.code, "message": self.message, "details": self.details}


class ConfigurationError(FloquetDGError):
    """Raised for invalid run parameters or configuration text.

    Attributes:
        fields: Per-field diagnostics keyed by dotted config key.
        line: 1-based line of the offending key in the config text, if known.
    """

    def __init__(
        self,
        message: str = "Invalid configuration",
        fields: dict[str, str] | None = None,
        line: int | None = None,
        details: Any | None = None,
    ) -> None:
        super().__init__(message, code="CONFIGURATION_ERROR", exit_code=2, details=details)
        self.fields: dict[str, str] = fields or {}
        self.line = line

    def to_record(self) -> dict[str, Any]:
        record = super().to_record()
        record["fields"] = self.fields
        record["line"] = self.line
        return record


class MeshError(FloquetDGError):
    """Raised when a mesh stream is malformed or fails validation.

    Attributes:
        element: Offending element index (file id for parsed meshes), if any.
        face: Offending local face index, if any.
    """

    def __init__(
        self,
        message: str,
        element: int | None = None,
        face: int | None = None,
        details: Any | None = None,
    ) -> None:
        super().__init__(message, code="MESH_ERROR", exit_code=3, details=details)
        self.element = element
        self.face = face


class NodeSetError(FloquetDGError):
    """Raised when a nodal set is not unisolvent (singular Vandermonde)."""

    def __init__(self, message: str = "Node set is not unisolvent") -> None:
        super().__init__(message, code="NODE_SET_ERROR", exit_code=3)


class GeometryError(FloquetDGError):
    """Raised for geometrically inconsistent input (non-coplanar faces etc.)."""

    def __init__(self, message: str, details: Any | None = None) -> None:
        super().__init__(message, code="GEOMETRY_ERROR", exit_code=3, details=details)


class TopologyError(FloquetDGError):
    """Raised when periodic faces cannot be paired or fully covered.

    Attributes:
        uncovered_area: Total periodic-face area left without a partner (m²).
    """

    def __init__(
        self,
        message: str,
        uncovered_area: float = 0.0,
        details: Any | None = None,
    ) -> None:
        super().__init__(message, code="TOPOLOGY_ERROR", exit_code=3, details=details)
        self.uncovered_area = uncovered_area


class MaterialError(FloquetDGError):
    """Raised for non-physical material parameters (non-positive impedance...)."""

    def __init__(self, message: str) -> None:
        super().__init__(message, code="MATERIAL_ERROR", exit_code=2)


class SingularityError(FloquetDGError):
    """Raised when the periodic/materials matrix is singular (grazing incidence)."""

    def __init__(self, message: str = "grazing-incidence breakdown") -> None:
        super().__init__(message, code="GRAZING_INCIDENCE", exit_code=2)


class BlowUpError(FloquetDGError):
    """Raised when the time-marched state stops being finite or bounded.

    Attributes:
        time: Simulation time (s) at which the blow-up was detected.
    """

    def __init__(self, message: str, time: float) -> None:
        super().__init__(message, code="BLOW_UP", exit_code=4, details={"time": time})
        self.time = time


class SearchFailureError(FloquetDGError):
    """Raised when the CFL scale search finds no stable scale in its bracket."""

    def __init__(self, message: str, details: Any | None = None) -> None:
        super().__init__(message, code="SEARCH_FAILURE", exit_code=4, details=details)


class ProbeError(FloquetDGError):
    """Raised when a recording plane does not match the mesh."""

    def __init__(self, message: str, details: Any | None = None) -> None:
        super().__init__(message, code="PROBE_ERROR", exit_code=3, details=details)


class SpectrumError(FloquetDGError):
    """Raised for unusable spectral input (empty series, grid mismatch)."""

    def __init__(self, message: str) -> None:
        super().__init__(message, code="SPECTRUM_ERROR", exit_code=1)
