"""Measurement-based cooling of a resonator through an ancillary qubit."""

from .fock import PhysicalParams, ResonatorPopulations, ThermalSpec, thermal_occupation, thermal_state
from .protocol import ProtocolConfig, ProtocolResult, run_protocol, sweep_reserved_state

__version__ = "0.1.0"

__all__ = [
    "PhysicalParams",
    "ProtocolConfig",
    "ProtocolResult",
    "ResonatorPopulations",
    "ThermalSpec",
    "run_protocol",
    "sweep_reserved_state",
    "thermal_occupation",
    "thermal_state",
]
