"""The clock as a wave flowing past a fixed object.

Particles sit on a lattice and drift one site toward the origin per step.
A particle crossing the origin applies sigma of the current time. The
discrete dynamics converges to the time-ordered picture at first order
in the spacing.
"""
import numpy as np

from stochclock.boundary_value import (
    ExtendedLattice,
    SectorWave,
    cocycle_defect,
    dirac_residual,
    equivalence_defect,
    evolve,
    gaussian_packet,
    pseudo_norm_sq,
)
from stochclock.guichardet import Chain
from stochclock.object_space import bundled_schedules

sched = bundled_schedules()["harmonic"]
chain = Chain((0.25, 0.625))
print(f"{'spacing':>9} {'equivalence':>12} {'cocycle':>12} {'dirac':>12}")
for k in range(4, 10):
    h = 2.0**-k
    lat = ExtendedLattice(h, 2.0)
    hist = evolve(gaussian_packet(lat, 0.6, 0.12, np.array([1.0, 0.0])), sched, 0.0, int(round(1 / h)))
    print(
        f"{h:9.5f} {equivalence_defect(sched, chain, 1.0, h):12.3e} "
        f"{cocycle_defect(sched, 0.5, 0.5, h):12.3e} {dirac_residual(hist):12.3e}"
    )

# a purely future packet is null; mix in a past component to see the
# indefinite norm carried through the crossings unchanged
lat = ExtendedLattice(2.0**-5, 2.0)
w = gaussian_packet(lat, 0.6, 0.12, np.array([0.6, 0.8j]))
w = SectorWave(lat, {s: a + np.stack([0.7 * a[1], 0 * a[1]]) for s, a in w.sectors.items()})
hist = evolve(w, sched, 0.0, 32)
print("pseudo-norm first and last step:", pseudo_norm_sq(hist[0]), pseudo_norm_sq(hist[-1]))
