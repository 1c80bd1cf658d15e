"""Tour of the two-dimensional clock algebra.

A clock point carries a past and a future component. The pairing between
them is indefinite, so adjoints, unitarity and the vacuum all take their
Minkowski-metric forms.
"""
import numpy as np

from stochclock.dilation import POISSON_STATE, BlockMatrix2
from stochclock.minkowski_clock import D, FUTURE, PAST, TemporalVector, dag, is_pseudo_unitary, lorentz_boost, pseudo_inner
from stochclock.object_space import PAULI_X, generator, HamiltonianSchedule

# null basis: each state pairs only with the other
print("<future, future> =", pseudo_inner(FUTURE, FUTURE))
print("<past, future>   =", pseudo_inner(PAST, FUTURE))
xi = TemporalVector(0.7, 1.0)
print("<xi, xi> for xi = (0.7, 1) =", pseudo_inner(xi, xi))

# the increment is nilpotent and its own pseudo-adjoint
print("D @ D =\n", D @ D)
print("dag(D) == D:", np.array_equal(dag(D), D))

# boosts rescale past against future and stay pseudo-unitary
for lam in (0.25, 4.0):
    print(f"boost({lam}) pseudo-unitary:", is_pseudo_unitary(lorentz_boost(lam)))

# one interaction: sigma = I + D (x) G on clock (x) object
sched = HamiltonianSchedule.constant(PAULI_X)
G = generator(sched, 0.0)
sigma = BlockMatrix2.sigma(G)
print("sigma pseudo-unitarity defect:", sigma.pseudo_unitarity_defect())
print("vacuum compression returns G:", np.allclose(sigma.compress(FUTURE, FUTURE), G))
nu = 2.0
p = BlockMatrix2.boosted(G, nu).compress(POISSON_STATE, POISSON_STATE)
print("Poisson compression equals I + G/(2 nu):", np.allclose(p, np.eye(2) + G / (2 * nu)))
