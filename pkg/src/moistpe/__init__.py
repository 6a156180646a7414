"""Moist hydrostatic primitive equations in pressure coordinates, with bound monitors."""
from .config import Config, ConfigError, load_config
from .grid import Grid, ModelState, make_grid
from .stepper import Model, initial_state, stable_dt, step

__version__ = "0.1.0"

__all__ = ["Config", "ConfigError", "Grid", "Model", "ModelState", "initial_state",
           "load_config", "make_grid", "stable_dt", "step", "__version__"]
