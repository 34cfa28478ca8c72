from .noise import NoiseModel, PROB_SCALE
from .engine import (
    GENERATOR_ID,
    RESOURCE_CAP_ENV,
    SpaceTimeConfig,
    TorusLattice,
    make_rng,
    record_trajectories,
    record_trajectory,
    resource_cap_mb,
    run_ensemble,
    step,
)
from .observables import Estimate, block_ones_probability, correlation, density_series
from .scan import ScanProtocol, ScanResult, estimate_critical_epsilon, order_parameter
from . import chain
from .seeds import SeedSpec, run_seed_check, snake_seed, sphere_sites, spider_seed

__all__ = [
    "NoiseModel", "PROB_SCALE", "GENERATOR_ID", "RESOURCE_CAP_ENV",
    "SpaceTimeConfig", "TorusLattice", "make_rng", "record_trajectories",
    "record_trajectory", "resource_cap_mb", "run_ensemble", "step",
    "Estimate", "block_ones_probability", "correlation", "density_series",
    "ScanProtocol", "ScanResult", "estimate_critical_epsilon", "order_parameter",
    "chain", "SeedSpec", "run_seed_check", "snake_seed", "sphere_sites", "spider_seed",
]
