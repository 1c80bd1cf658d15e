"""Boundary-value (Schrodinger) picture on a lattice time axis.

The clock wave flows toward the past under a free shift. The object sits at
a degenerate origin: two sites ``0`` (input side) and ``0~`` (output side)
at the same position. A particle that reaches ``0`` is relabelled to ``0~``
and the interaction ``sigma`` is applied to the object and its spin.

Sites use one integer index: ``u >= 0`` is the input site at position
``u * spacing``; ``u <= -1`` is the output site at position
``(u + 1) * spacing``, so ``-1`` is ``0~``. Spins are stored explicitly
(amplitude shape ``(2,) * k + (d, ...)``, past first), which lets the
lattice states be compared directly with the interaction-picture states.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .dilation import _apply_slot, initial_state, jump_evolution, ChainPropagator
from .guichardet import Chain, gauss_legendre
from .intensity import IntensityProfile
from .object_space import HamiltonianSchedule, generator, max_entry, reference_propagator

__all__ = [
    "ExtendedLattice",
    "SectorWave",
    "GaugeProfile",
    "MAX_PARTICLES",
    "embed_chain",
    "free_shift_step",
    "cell_generator",
    "boundary_step",
    "lattice_step",
    "evolve",
    "shift_back",
    "pseudo_norm_sq",
    "equivalence_defect",
    "cell_propagator",
    "lattice_object_propagator",
    "cocycle_defect",
    "gaussian_packet",
    "dirac_residual",
    "gauge_transform",
    "gauged_shift_step",
    "write_history_csv",
]

MAX_PARTICLES = 2
_CELL_NODES = 4


@dataclass(frozen=True)
class ExtendedLattice:
    """Sites at multiples of ``spacing`` in ``[-extent, extent]`` with the
    origin doubled into ``0~`` and ``0``."""

    spacing: float
    extent: float

    def __post_init__(self):
        if not (math.isfinite(self.spacing) and self.spacing > 0):
            raise ValueError("spacing must be positive")
        ratio = self.extent / self.spacing
        if not (ratio >= 1 and abs(ratio - round(ratio)) < 1e-9):
            raise ValueError("extent must be a positive integer multiple of spacing")

    @property
    def half_sites(self) -> int:
        return int(round(self.extent / self.spacing))

    @property
    def min_index(self) -> int:
        return -self.half_sites - 1

    @property
    def max_index(self) -> int:
        return self.half_sites

    def position(self, u):
        u = np.asarray(u)
        return np.where(u >= 0, u, u + 1) * self.spacing

    def index_of(self, x: float) -> int:
        """Input site whose cell ``[(u-1) spacing, u spacing)`` holds ``x``."""
        if x < 0:
            raise ValueError("chain points must be non-negative")
        u = int(math.floor(x / self.spacing + 1e-12)) + 1
        if u > self.max_index:
            raise ValueError(f"point {x} lies beyond the lattice extent")
        return u

    def shifted(self, u: int) -> int:
        """Index after translating by ``-spacing``; input ``0`` skips ``0~``."""
        v = u - 2 if u == 0 else u - 1
        if v < self.min_index:
            raise ValueError("support fell off the lattice edge; increase extent")
        return v

    def from_position(self, p: float, output: bool) -> int:
        k = int(round(p / self.spacing))
        return k - 1 if output and k <= 0 else k


@dataclass(eq=False)
class SectorWave:
    """Finite-support wave on ordered site tuples.

    ``sectors`` maps a non-decreasing tuple of site indices (one per
    particle, chronological) to an amplitude array.
    """

    lattice: ExtendedLattice
    sectors: dict = field(default_factory=dict)

    def __post_init__(self):
        for sites, amp in self.sectors.items():
            self._check(sites, amp)

    def _check(self, sites, amp):
        k = len(sites)
        if k > MAX_PARTICLES:
            raise ValueError(f"at most {MAX_PARTICLES} particles are supported")
        if list(sites) != sorted(sites):
            raise ValueError("site tuples must be ordered")
        if np.shape(amp)[:k] != (2,) * k:
            raise ValueError("amplitude needs one spin axis per particle")
        for u in sites:
            if not self.lattice.min_index <= u <= self.lattice.max_index:
                raise ValueError(f"site {u} is outside the lattice")

    def copy(self) -> SectorWave:
        return SectorWave(self.lattice, {s: a.copy() for s, a in self.sectors.items()})

    def amplitude(self, sites) -> np.ndarray | None:
        return self.sectors.get(tuple(sites))


def embed_chain(lattice: ExtendedLattice, chain: Chain, eta) -> SectorWave:
    """``eta`` with every chain point in the future state, placed on the
    input side."""
    sites = tuple(lattice.index_of(x) for x in chain)
    return SectorWave(lattice, {sites: initial_state(eta, len(sites))})


def free_shift_step(wave: SectorWave) -> SectorWave:
    """Translate every particle by ``-spacing``; amplitudes are unchanged."""
    lat = wave.lattice
    out = {}
    for sites, amp in wave.sectors.items():
        key = tuple(lat.shifted(u) for u in sites)
        out[key] = out.get(key, 0) + amp
    return SectorWave(lat, out)


def cell_generator(schedule: HamiltonianSchedule, t: float, spacing: float) -> np.ndarray:
    """Average of ``G`` over ``[t, t + spacing)``; zero for negative times."""
    d = schedule.dim
    if t + spacing <= 0:
        return np.zeros((d, d), dtype=complex)
    a = max(t, 0.0)
    x, w = gauss_legendre(_CELL_NODES, a, t + spacing)
    return np.tensordot(w, generator(schedule, x), axes=(0, 0)) / spacing


def boundary_step(wave: SectorWave, schedule: HamiltonianSchedule, t: float) -> SectorWave:
    """Move particles at ``0`` to ``0~`` and apply the cell-averaged
    ``sigma`` for the step ``[t, t + spacing)``; other amplitudes untouched."""
    lat = wave.lattice
    G = None
    out = {}
    for sites, amp in wave.sectors.items():
        at_origin = [i for i, u in enumerate(sites) if u == 0]
        if at_origin:
            if G is None:
                G = cell_generator(schedule, t, lat.spacing)
            for i in at_origin:
                amp = _apply_slot(amp, G, i, len(sites))
            sites = tuple(-1 if u == 0 else u for u in sites)
        out[sites] = out.get(sites, 0) + amp
    return SectorWave(lat, out)


def lattice_step(wave: SectorWave, schedule: HamiltonianSchedule, t: float) -> SectorWave:
    return boundary_step(free_shift_step(wave), schedule, t)


def evolve(wave: SectorWave, schedule: HamiltonianSchedule, t0: float, steps: int) -> list[SectorWave]:
    """History ``[wave, step 1, ..., step steps]`` starting at time ``t0``."""
    hist = [wave]
    dt = wave.lattice.spacing
    for j in range(steps):
        hist.append(lattice_step(hist[-1], schedule, t0 + j * dt))
    return hist


def shift_back(wave: SectorWave, steps: int) -> SectorWave:
    """Undo ``steps`` free shifts; ``0~`` and ``0`` both return to the
    input side."""
    lat = wave.lattice
    out = {}
    for sites, amp in wave.sectors.items():
        pos = lat.position(np.array(sites, dtype=int)) + steps * lat.spacing
        key = tuple(lat.from_position(p, output=p < -1e-12 * lat.spacing) for p in pos)
        out[key] = out.get(key, 0) + amp
    return SectorWave(lat, out)


def pseudo_norm_sq(wave: SectorWave) -> float:
    """Compound pseudo-square: the clock metric on every particle, the
    positive inner product on the object."""
    total = 0.0
    for sites, amp in wave.sectors.items():
        k = len(sites)
        flipped = np.flip(amp, axis=tuple(range(k))) if k else amp
        total += np.vdot(flipped, amp)
    return float(np.real(total))


# -- interaction-picture equivalence ----------------------------------------

def equivalence_defect(
    schedule: HamiltonianSchedule,
    chain: Chain,
    t: float,
    spacing: float,
    wrong_order: bool = False,
) -> float:
    """Max-entry distance between the shifted-back lattice state and the
    interaction-picture state on ``chain`` at time ``t``, over all object
    basis inputs. ``wrong_order`` compares against the anti-chronological
    product instead."""
    if len(chain) > MAX_PARTICLES:
        raise ValueError(f"chains of at most {MAX_PARTICLES} points are supported")
    steps = int(round(t / spacing))
    if abs(steps * spacing - t) > 1e-9 * max(1.0, t):
        raise ValueError("t must be a multiple of spacing")
    d = schedule.dim
    extent = spacing * (steps + max((int(x / spacing) + 2 for x in chain), default=1))
    lat = ExtendedLattice(spacing, extent)
    eye = np.eye(d, dtype=complex)
    wave = embed_chain(lat, chain, eye)
    for j in range(steps):
        wave = lattice_step(wave, schedule, j * spacing)
    back = shift_back(wave, steps)
    (got,) = back.sectors.values()
    if wrong_order:
        want = ChainPropagator(schedule, chain, t).apply(initial_state(eye, len(chain)), reverse=True)
    else:
        want = jump_evolution(schedule, chain, [t], eye)[0].amplitudes
    return max_entry(got - want)


# -- lattice object propagator and the cocycle -------------------------------

def cell_propagator(schedule: HamiltonianSchedule, t: float, spacing: float) -> np.ndarray:
    """Vacuum compression of one lattice step on ``[t, t + spacing)``,
    restricted to at most one crossing: ``I + spacing * G_cell``.

    The crossing term is read off a single-particle lattice run.
    """
    d = schedule.dim
    lat = ExtendedLattice(spacing, 2 * spacing)
    wave = SectorWave(lat, {(1,): initial_state(np.eye(d, dtype=complex), 1)})
    wave = lattice_step(wave, schedule, t)
    crossed = wave.amplitude((-1,))
    # compression with the vacuum dual picks the past component
    return np.eye(d, dtype=complex) + spacing * crossed[0]


def lattice_object_propagator(schedule: HamiltonianSchedule, a: float, b: float, spacing: float) -> np.ndarray:
    """Chronological product of :func:`cell_propagator` over ``[a, b)``."""
    steps = int(round((b - a) / spacing))
    if steps < 0 or abs(steps * spacing - (b - a)) > 1e-9 * max(1.0, abs(b - a)):
        raise ValueError("b - a must be a non-negative multiple of spacing")
    V = np.eye(schedule.dim, dtype=complex)
    for j in range(steps):
        V = cell_propagator(schedule, a + j * spacing, spacing) @ V
    return V


def cocycle_defect(
    schedule: HamiltonianSchedule,
    r: float,
    t: float,
    spacing: float,
    ref_steps: int = 10_000,
) -> float:
    """Failure of the lattice composition law: lattice evolution over
    ``[0, t)`` followed by ``[t, t + r)`` against the same first leg
    followed by the exact hemigroup factor ``V^{t+r}_t``."""
    if r < 0 or t < 0:
        raise ValueError("r and t must be non-negative")
    if r == 0:
        return 0.0
    first = lattice_object_propagator(schedule, 0.0, t, spacing)
    second = lattice_object_propagator(schedule, t, t + r, spacing)
    exact = reference_propagator(schedule, t, t + r, ref_steps).matrix
    return max_entry((second - exact) @ first)


# -- Dirac form ---------------------------------------------------------------

def gaussian_packet(lattice: ExtendedLattice, center: float, width: float, eta, spin: int = 1) -> SectorWave:
    """Single-particle wave ``exp(-(x - center)^2 / (2 width^2)) eta`` on the
    input side, in spin state ``spin`` (1 = future)."""
    eta = np.asarray(eta, dtype=complex)
    out = {}
    for u in range(0, lattice.max_index + 1):
        x = u * lattice.spacing
        amp = np.zeros((2,) + eta.shape, dtype=complex)
        amp[spin] = math.exp(-((x - center) ** 2) / (2 * width**2)) * eta
        out[(u,)] = amp
    return SectorWave(lattice, out)


def _channels(wave: SectorWave, n: int, like: np.ndarray):
    """``psi_+`` on input sites ``0..n-1`` and ``psi_-`` on the mirrored
    output sites ``0~, -1, ...``."""
    zero = np.zeros_like(like)
    plus = np.stack([wave.sectors.get((u,), zero) for u in range(n)])
    minus = np.stack([wave.sectors.get((-1 - m,), zero) for m in range(n)])
    return plus, minus


def dirac_residual(history: list[SectorWave]) -> float:
    """Max finite-difference residual of ``(d_t - d_tau) psi_+`` and
    ``(d_t + d_tau) psi_-`` away from the origin (forward in time, centred
    in space)."""
    if len(history) < 3:
        raise ValueError("need at least three snapshots")
    lat = history[0].lattice
    amps = [a for w in history for s, a in w.sectors.items() if len(s) == 1]
    if not amps:
        return 0.0
    if any(len(s) != 1 for w in history for s in w.sectors):
        raise ValueError("dirac_residual needs a single-particle history")
    n = lat.half_sites + 1
    h = lat.spacing
    worst = 0.0
    for now, nxt in zip(history[:-1], history[1:]):
        p0, m0 = _channels(now, n, amps[0])
        p1, m1 = _channels(nxt, n, amps[0])
        # input site 0 is emptied by every boundary step, so the stencil
        # for psi_+ starts one site further out
        dp = (p1[2:-1] - p0[2:-1]) / h - (p0[3:] - p0[1:-2]) / (2 * h)
        dm = (m1[1:-1] - m0[1:-1]) / h + (m0[2:] - m0[:-2]) / (2 * h)
        worst = max(worst, max_entry(dp), max_entry(dm))
    return worst


# -- gauge (potential) picture -----------------------------------------------

@dataclass(frozen=True)
class GaugeProfile:
    """Hyperbolic angle ``theta = ln(nu) / 2`` and potential ``phi = theta'``."""

    intensity: IntensityProfile

    def __post_init__(self):
        if self.intensity.kind == "tabulated":
            raise ValueError("gauge needs a smooth intensity; piecewise-linear tables are not")

    def theta(self, x):
        return 0.5 * np.log(self.intensity(x))

    def potential(self, x, h: float = 1e-5):
        return (self.theta(np.asarray(x) + h) - self.theta(np.asarray(x) - h)) / (2 * h)

    def horizon_factor(self, r: float) -> float:
        """``exp(int_{-r}^{r} nu)``, a fixed constant for the whole run."""
        return math.exp(self.intensity.integral(-r, r))


def gauge_transform(wave: SectorWave, gauge: GaugeProfile, direction: str = "forward", horizon: float | None = None) -> SectorWave:
    """Multiply by ``(2 nu(x))^{-1/2}`` per particle and the horizon factor
    (``direction="forward"``) or undo that (``"inverse"``)."""
    if direction not in ("forward", "inverse"):
        raise ValueError("direction must be 'forward' or 'inverse'")
    lat = wave.lattice
    r = lat.extent if horizon is None else horizon
    sign = 1.0 if direction == "forward" else -1.0
    glob = gauge.horizon_factor(r) ** sign
    out = {}
    for sites, amp in wave.sectors.items():
        pos = lat.position(np.array(sites, dtype=int))
        local = float(np.prod((2 * gauge.intensity(pos)) ** (-0.5 * sign)))
        out[sites] = amp * (local * glob)
    return SectorWave(lat, out)


def gauged_shift_step(wave: SectorWave, gauge: GaugeProfile) -> SectorWave:
    """Free shift in the gauged picture: transport from ``x`` to
    ``x - spacing`` multiplies each particle by ``exp(theta(x) - theta(x - spacing))``,
    i.e. ``exp(phi * spacing)`` for a constant potential."""
    lat = wave.lattice
    out = {}
    for sites, amp in wave.sectors.items():
        old = lat.position(np.array(sites, dtype=int))
        key = tuple(lat.shifted(u) for u in sites)
        new = lat.position(np.array(key, dtype=int))
        factor = float(np.exp(np.sum(gauge.theta(old) - gauge.theta(new))))
        out[key] = out.get(key, 0) + amp * factor
    return SectorWave(lat, out)


# -- export -------------------------------------------------------------------

def write_history_csv(history: list[SectorWave], path) -> None:
    """Columns ``step, sites, spins, component, re, im``; one row per
    spin assignment and object basis index."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["step", "sites", "spins", "component", "re", "im"])
        for step, wave in enumerate(history):
            for sites in sorted(wave.sectors):
                amp = wave.sectors[sites]
                k = len(sites)
                for idx in np.ndindex(amp.shape):
                    v = amp[idx]
                    w.writerow([
                        step,
                        " ".join(map(str, sites)),
                        "".join(map(str, idx[:k])),
                        " ".join(map(str, idx[k:])),
                        repr(float(v.real)),
                        repr(float(v.imag)),
                    ])
