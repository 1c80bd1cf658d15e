"""Three ways to the same propagator.

The RK4 reference, the truncated Dyson series (the pseudo-vacuum
expectation of the clock dynamics) and Picard iteration all approximate
the time-ordered exponential. This script prints their distances as the
truncation order grows.
"""
from stochclock.dilation import picard_propagator, vacuum_expectation_dyson
from stochclock.object_space import bundled_schedules, max_entry, reference_propagator

sched = bundled_schedules()["harmonic"]
t = 1.0
ref = reference_propagator(sched, 0.0, t, 10_000).matrix
print(f"{'N':>3} {'dyson':>12} {'picard':>12}")
for N in (0, 2, 4, 6, 8, 10, 12):
    dy = max_entry(vacuum_expectation_dyson(sched, t, N).matrix - ref)
    pc = max_entry(picard_propagator(sched, t, N).matrix - ref)
    print(f"{N:>3} {dy:12.3e} {pc:12.3e}")
