"""Propagator from random interaction times.

Interaction times are drawn from a Poisson process of rate 2 nu; each
chain contributes the ordered product of I + G/(2 nu). The average is an
unbiased estimate of the propagator whatever the intensity, while the
spread depends on it.
"""
import numpy as np

from stochclock.dilation import poisson_expectation_mc
from stochclock.intensity import IntensityProfile
from stochclock.object_space import bundled_schedules, max_entry, reference_propagator

sched = bundled_schedules()["harmonic"]
ref = reference_propagator(sched, 0.0, 1.0, 10_000).matrix

print("sample-size sweep at nu = 1")
for S in (1_000, 10_000, 100_000):
    est = poisson_expectation_mc(sched, IntensityProfile.constant(1.0), 1.0, S, seed=7)
    print(f"  S={S:>6}  error={max_entry(est.matrix - ref):.2e}  stderr={est.mc_stderr.max():.2e}")

print("intensity sweep at S = 1e5")
for nu in (0.5, 1.0, 2.0, 4.0):
    est = poisson_expectation_mc(sched, IntensityProfile.constant(nu), 1.0, 100_000, seed=7)
    z = np.max(np.abs(est.matrix - ref) / est.mc_stderr)
    print(f"  nu={nu:<4} stderr={est.mc_stderr.max():.2e}  worst z-score={z:.2f}")
