"""Direct and sequential multiphoton multiple ionization of neon under chaotic XUV pulses."""

from .errors import (ConfigError, DomainError, EnsembleError, InputDataError, IntegrationError,
                     IntegrityError, IonkinError, StateError)
from .model import (Channel, ChannelTable, CrossSectionConfig, apply_factorial_enhancement,
                    build_channel_table, check_lopt_validity, load_ionization_potentials,
                    min_photon_order, scale_cross_section)
from .pulse import (ChaoticPulseSpec, DeterministicPulseSpec, PulseRecord, correlation_diagnostic,
                    gaussian_envelope, intensity_to_flux, sample_chaotic_pulse)
from .kinetics import KineticsOptions, analytic_single_channel, integrate, rate_rhs
from .ensemble import EnsembleSpec, EnsembleStats, run_decorrelated, run_ensemble
from .yieldcurve import YieldCurve, read_yields_csv, write_yields_csv
from .volume import VolumeModel, intensity_weight_density, volume_average

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "DomainError", "EnsembleError", "InputDataError", "IntegrationError",
    "IntegrityError", "IonkinError", "StateError",
    "Channel", "ChannelTable", "CrossSectionConfig", "apply_factorial_enhancement",
    "build_channel_table", "check_lopt_validity", "load_ionization_potentials", "min_photon_order",
    "scale_cross_section",
    "ChaoticPulseSpec", "DeterministicPulseSpec", "PulseRecord", "correlation_diagnostic",
    "gaussian_envelope", "intensity_to_flux", "sample_chaotic_pulse",
    "KineticsOptions", "analytic_single_channel", "integrate", "rate_rhs",
    "EnsembleSpec", "EnsembleStats", "run_decorrelated", "run_ensemble",
    "YieldCurve", "read_yields_csv", "write_yields_csv",
    "VolumeModel", "intensity_weight_density", "volume_average",
]
