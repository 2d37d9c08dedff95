"""
floquetdg v0.4.0

Nodal discontinuous Galerkin time-domain solver for doubly periodic
structures illuminated by an obliquely incident planewave.

Library usage::

    from floquetdg import load_config, run_simulation

    cfg = load_config("configs/slab_te.toml")
    result = run_simulation(cfg)
    freqs, R, T = result.power_spectra()

Analytic reference::

    import math
    from floquetdg import LayerStack, multilayer_RT

    R, T = multilayer_RT(LayerStack.slab(1.0, 4.0), math.radians(50.0), 81.3e6, "TE")

Command line::

    floquetdg simulate --config configs/slab_te.toml --out runs/slab_te
"""

from ._constants import NATURAL, SI, UnitSystem
from .config import RunConfig, load_config, parse_config, render_manifest
from .exceptions import (
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
from .mesh import Mesh, generate_box_mesh, load_mesh, write_mesh
from .operators import MaterialTable, assemble_Q, geometric_factors, local_matrices
from .oracle import floquet_cutoff, halfwave_nulls, multilayer_RT, write_oracle_csv
from .periodic import PeriodicMap, clip_faces, pair_periodic_faces
from .postproc import (
    PlaneProbe,
    Spectrum,
    build_probe,
    floquet_coefficient,
    incident_reference_spectrum,
    power_coefficient,
    record_A00,
    spectrum,
    write_spectra_csv,
    write_time_series_csv,
)
from .reference_element import ReferenceElement, build_reference
from .simulation import (
    SimulationResult,
    StabilityProbe,
    find_min_stable_scale,
    march,
    run_simulation,
)
from .solver import (
    Discretization,
    FieldState,
    bc_jump,
    compute_dt,
    compute_rhs,
    incident_fields,
    lsrk4_step,
    maxwell_rhs,
    numerical_flux,
)
from .sweep import StabilityRow, stability_table, sweep_stability
from .types import (
    Block,
    BoundaryTag,
    IncidenceConfig,
    Lattice2,
    Layer,
    LayerStack,
    Material,
    Polarization,
)

__version__ = "0.4.0"

__all__ = [
    # Units
    "SI",
    "NATURAL",
    "UnitSystem",
    # Exceptions
    "FloquetDGError",
    "ConfigurationError",
    "MeshError",
    "NodeSetError",
    "GeometryError",
    "TopologyError",
    "MaterialError",
    "SingularityError",
    "BlowUpError",
    "SearchFailureError",
    "ProbeError",
    "SpectrumError",
    # Types
    "Block",
    "BoundaryTag",
    "IncidenceConfig",
    "Lattice2",
    "Layer",
    "LayerStack",
    "Material",
    "Polarization",
    # Reference element and mesh
    "ReferenceElement",
    "build_reference",
    "Mesh",
    "load_mesh",
    "write_mesh",
    "generate_box_mesh",
    "PeriodicMap",
    "clip_faces",
    "pair_periodic_faces",
    # Operators and solver
    "MaterialTable",
    "assemble_Q",
    "geometric_factors",
    "local_matrices",
    "Discretization",
    "FieldState",
    "numerical_flux",
    "bc_jump",
    "incident_fields",
    "compute_rhs",
    "maxwell_rhs",
    "lsrk4_step",
    "compute_dt",
    # Runs
    "RunConfig",
    "parse_config",
    "load_config",
    "render_manifest",
    "SimulationResult",
    "StabilityProbe",
    "march",
    "run_simulation",
    "find_min_stable_scale",
    "StabilityRow",
    "sweep_stability",
    "stability_table",
    # Post-processing
    "PlaneProbe",
    "Spectrum",
    "build_probe",
    "record_A00",
    "floquet_coefficient",
    "spectrum",
    "incident_reference_spectrum",
    "power_coefficient",
    "write_spectra_csv",
    "write_time_series_csv",
    # Oracle
    "multilayer_RT",
    "halfwave_nulls",
    "floquet_cutoff",
    "write_oracle_csv",
]
