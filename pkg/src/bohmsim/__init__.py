"""Bohmian mechanics on periodic grids: wave propagation, trajectories, spin and measurement."""
from .grid import DensityField, Grid, WaveFunction, make_grid
from .schrodinger import EvolutionRecord, Potential, evolve, free, harmonic, linear, step_split_operator
from .bohm import Ensemble, Trajectory, integrate_trajectory, run_ensemble, velocity_field

__version__ = "0.1.0"

__all__ = [
    "DensityField", "Grid", "WaveFunction", "make_grid", "EvolutionRecord", "Potential", "evolve", "free",
    "harmonic", "linear", "step_split_operator", "Ensemble", "Trajectory", "integrate_trajectory", "run_ensemble",
    "velocity_field",
]
