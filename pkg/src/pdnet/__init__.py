"""Probability-density networks for multivalued inverse design of layered duct metastructures."""

from .dataset import Dataset, generate_grid, generate_random
from .mixture import DesignScaler, MixtureParams
from .modes import Mode, SeekerConfig, find_modes
from .physics import Geometry, Medium, frequency_grid, spectrum_error, transmission
from .training import TrainConfig

__version__ = "0.1.0"
