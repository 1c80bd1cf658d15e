"""Stochastic representation of time-ordered quantum propagators through a
quantized Minkowski clock.

The object propagator ``V^t_0`` (solution of ``dV/dt = -i H(t) V``) is
recovered three ways: as the pseudo-vacuum expectation of a chain
propagator (a Dyson series), by Picard recursion, and as a Monte Carlo
average over Poisson-distributed interaction chains.
"""
__version__ = "0.1.0"

from .minkowski_clock import FUTURE, PAST, TemporalVector, dag, lorentz_boost, pseudo_inner
from .intensity import IntensityProfile
from .object_space import (
    HamiltonianSchedule,
    PropagatorEstimate,
    bundled_schedules,
    hemigroup_defect,
    reference_propagator,
)
from .guichardet import Chain, sample_poisson_chain, simplex_integrate
from .dilation import (
    BlockMatrix2,
    chain_propagator,
    jump_evolution,
    picard_propagator,
    poisson_expectation_mc,
    vacuum_expectation_dyson,
)
from .boundary_value import cocycle_defect, dirac_residual, equivalence_defect

__all__ = [
    "FUTURE",
    "PAST",
    "TemporalVector",
    "dag",
    "lorentz_boost",
    "pseudo_inner",
    "IntensityProfile",
    "HamiltonianSchedule",
    "PropagatorEstimate",
    "bundled_schedules",
    "hemigroup_defect",
    "reference_propagator",
    "Chain",
    "sample_poisson_chain",
    "simplex_integrate",
    "BlockMatrix2",
    "chain_propagator",
    "jump_evolution",
    "picard_propagator",
    "poisson_expectation_mc",
    "vacuum_expectation_dyson",
    "cocycle_defect",
    "dirac_residual",
    "equivalence_defect",
]
