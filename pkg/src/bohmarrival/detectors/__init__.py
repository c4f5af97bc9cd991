"""Detector models: absorbing slab, matched layers, space-time absorbers, apertures."""

from .huygens import Aperture, scattered_field
from .pml import (
    AbsorbedPlaneWave,
    PMLProfile,
    pml_detection_probability,
    pml_potential,
    scattering_reflection,
    verify_pml_solution,
)
from .slab import (
    ScatterResult,
    SlabDetector,
    mean_incident_slope,
    slab_absorption_budget,
    slab_scatter,
    slab_trajectory_slopes,
)
from .spacetime import SpacetimeDetector, spacetime_absorption
