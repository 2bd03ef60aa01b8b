"""Discontinuous Galerkin simulation of Ran-driven nucleocytoplasmic transport."""
from .config import ConfigError, SimConfig, dump_config, load_config, parse_config
from .driver import (Simulation, TimeSeries, run_convergence_study, run_nocodazole_experiment,
                     run_oracle_comparison, run_simulation, write_snapshot)
from .geometry import CellGeometry, build_disk_mesh
from .kinetics import SPECIES, KineticConstants
from .model import InitialConditions, ModelParameters
from .oracle import CompartmentOracle
from .timestepping import Integrator, SimulationError, TimeStepperConfig

__version__ = "0.1.0"
