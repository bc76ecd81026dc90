"""Granular-media SPH: elastoplastic mu(I) rheology, rigid-body coupling, active domains."""
from .kernels import KernelKind, kernel_gradient, kernel_value
from .model import (Activity, MaterialParams, ParticleKind, ParticleState, SimConfig, SimState,
                    ViscosityMode, init_block)
from .neighbor import NeighborTable, neighbor_search
from .rheology import return_map
from .dynamics import advance, prepare_step, rk2_step

__all__ = [
    "Activity", "KernelKind", "MaterialParams", "NeighborTable", "ParticleKind", "ParticleState",
    "SimConfig", "SimState", "ViscosityMode", "advance", "init_block", "kernel_gradient",
    "kernel_value", "neighbor_search", "prepare_step", "return_map", "rk2_step",
]
