"""Single-plane tetrahedron tomography of double-slit qubits."""

from .labgeom import PhysicalGeometry, from_physical, to_physical
from .sicsearch import (
    DetectorLayout,
    Povm4,
    TetraSolution,
    balanced_delta,
    build_povm,
    canonicalize,
    detector_positions,
    reference_solution,
    search_tetrahedra,
    tetra_objective,
)
from .tomo import CountRecord, ReconstructionReport, fidelity, linear_invert, mle_reconstruct, trace_distance
from .wavefield import BlochState, SlitConfig, bloch_of_w, detection_pdf, intensity_envelope, propagate_mode

__version__ = "0.1.0"
