"""
Hyperparameter configuration
Defaults follow the experimental protocol; a JSON file can override any field
"""
import json
import os
from dataclasses import dataclass, field, asdict
from typing import Dict, List, Optional

from models.errors import ConfigurationError
from utils.files import atomic_write


@dataclass
class TuningSettings:
    """Grids swept when tuning CPD learners and weight learning"""
    kappa_grid: List[float] = field(default_factory=lambda: [1e-4, 1e-3, 1e-2, 1e-1, 1.0])
    l1_grid: List[float] = field(default_factory=lambda: [
        0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0, 200.0, 500.0, 1000.0
    ])
    tree_sigma_grid: List[float] = field(default_factory=lambda: [0.05, 0.1, 0.2, 0.5, 1.0])
    lr_sigma_grid: List[float] = field(default_factory=lambda: [0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0])


@dataclass
class ConversionSettings:
    """DN to MN conversion defaults"""
    base: str = "marginal"  # single or marginal
    order: str = "rot2"  # single, pair, rot1, rot2, all
    max_ordering_feature_length: int = 12
    weight_floor: float = 1e-12


@dataclass
class GibbsSettings:
    """Sampler defaults used by CMLL evaluation"""
    burn_in: int = 100
    samples: int = 1000
    chains: int = 1


@dataclass
class LimitSettings:
    """Guards and optimizer budgets"""
    enumeration_limit: int = 2 ** 22
    lr_max_iter: int = 1000
    lr_tolerance: float = 1e-6
    weight_max_iter: int = 100
    weight_gtol: float = 1e-5


class ExperimentSettings:
    """All configurable knobs of a run"""

    SECTIONS = ('tuning', 'conversion', 'gibbs', 'limits')

    def __init__(self, config_file: Optional[str] = None):
        self.tuning = TuningSettings()
        self.conversion = ConversionSettings()
        self.gibbs = GibbsSettings()
        self.limits = LimitSettings()

        if config_file:
            self.load_from_file(config_file)

    def to_dict(self) -> Dict:
        """Convert configuration to dictionary for JSON serialization"""
        return {section: asdict(getattr(self, section)) for section in self.SECTIONS}

    def load_from_file(self, config_file: str):
        """Load configuration from JSON file"""
        if not os.path.exists(config_file):
            raise ConfigurationError(f"Configuration file not found: {config_file}")

        try:
            with open(config_file, 'r') as f:
                config_data = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigurationError(f"Invalid configuration file {config_file}: {e}") from e

        if not isinstance(config_data, dict):
            raise ConfigurationError(f"Configuration file {config_file} must hold a JSON object")

        for section in self.SECTIONS:
            if section not in config_data:
                continue
            if not isinstance(config_data[section], dict):
                raise ConfigurationError(
                    f"Section '{section}' of {config_file} must be a JSON object, "
                    f"got {type(config_data[section]).__name__}"
                )
            section_obj = getattr(self, section)
            for key, value in config_data[section].items():
                # Unknown keys are ignored
                if hasattr(section_obj, key):
                    setattr(section_obj, key, value)

    def save_to_file(self, config_file: str):
        """Save configuration to JSON file"""
        atomic_write(config_file, json.dumps(self.to_dict(), indent=4) + '\n')
