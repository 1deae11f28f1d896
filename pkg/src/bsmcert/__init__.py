"""Device-independent certification of Bell state measurements."""
from .bounds import CertificateReport, Flag, InputError, Mode, certify
from .scenario import ExperimentStatistics, NoiseModel, Scenario, ScenarioConfig

__version__ = "0.1.0"

__all__ = [
    "CertificateReport",
    "ExperimentStatistics",
    "Flag",
    "InputError",
    "Mode",
    "NoiseModel",
    "Scenario",
    "ScenarioConfig",
    "certify",
]
