"""Simulation and analysis of single-photon time-bin interference off moving retroreflectors."""

__version__ = "0.1.0"

from .errors import DomainError, FitRefused, QuadratureError, ValidationError
from .relativity import (
    SPEED_OF_LIGHT,
    OpticalConfig,
    doppler_factor,
    doppler_stretch,
    kinematic_phase,
    p_central_closed_form,
    p_central_quadrature,
    port_weights,
    theoretical_visibility,
)
from .ranging import PassGeometry, PhaseTrack, RangeTrack, build_phase_track, synthesize_pass
from .photonsim import DetectorModel, EventTable, LinkModel, simulate_pass, tag_phases
from .analysis import (
    analyze_selection,
    build_histogram,
    fit_tri_gaussian,
    p_c_experimental,
    phase_binned_analysis,
)
from .presets import PRESETS, get_preset

__all__ = [
    "DomainError", "FitRefused", "QuadratureError", "ValidationError",
    "SPEED_OF_LIGHT", "OpticalConfig", "doppler_factor", "doppler_stretch", "kinematic_phase",
    "p_central_closed_form", "p_central_quadrature", "port_weights", "theoretical_visibility",
    "PassGeometry", "PhaseTrack", "RangeTrack", "build_phase_track", "synthesize_pass",
    "DetectorModel", "EventTable", "LinkModel", "simulate_pass", "tag_phases",
    "analyze_selection", "build_histogram", "fit_tri_gaussian", "p_c_experimental",
    "phase_binned_analysis", "PRESETS", "get_preset",
]
