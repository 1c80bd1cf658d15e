"""Object-clock interactions, chain propagators and the three routes to the
object propagator: vacuum/Dyson quadrature, Picard recursion and the
pseudo-Poisson Monte Carlo estimator.

Layout conventions
------------------
* A block operator on ``h (x) C^2`` is clock-major: ``[[A, B], [C, D]]``
  with the past row first.
* A dilated state on a chain with ``n`` points is an array of shape
  ``(2,) * n + (d,)``: one spin axis per chain point in chronological order,
  then the object axis.
* Chronological products put later factors to the left.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_simpson

from .guichardet import Chain, ChainBatch, simplex_integrate, simplex_nodes, sample_poisson_chains
from .intensity import IntensityProfile
from .minkowski_clock import FUTURE, TemporalVector, dag, lorentz_boost
from .object_space import (
    HamiltonianSchedule,
    PropagatorEstimate,
    generator,
    max_entry,
    reference_propagator,
)

__all__ = [
    "BlockMatrix2",
    "DilatedState",
    "CountingRecord",
    "ChainPropagator",
    "POISSON_STATE",
    "initial_state",
    "MAX_CHAIN",
    "sigma_at",
    "apply_single_interaction",
    "chain_propagator",
    "counting_record",
    "jump_evolution",
    "dyson_terms",
    "vacuum_expectation_dyson",
    "picard_propagator",
    "compressed_chain_weight",
    "batch_chain_weights",
    "poisson_expectation_mc",
    "tensor_chain_compression",
    "product_chain_compression",
    "earth_projection_defect",
]

MAX_CHAIN = 12
POISSON_STATE = TemporalVector(1 / math.sqrt(2), 1 / math.sqrt(2))


@dataclass(frozen=True, eq=False)
class BlockMatrix2:
    """2x2 block operator with object-operator blocks."""

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: np.ndarray

    def __post_init__(self):
        shapes = {np.shape(m) for m in (self.a, self.b, self.c, self.d)}
        if len(shapes) != 1:
            raise ValueError(f"block shapes disagree: {shapes}")
        (shape,) = shapes
        if len(shape) != 2 or shape[0] != shape[1]:
            raise ValueError("blocks must be square")

    @property
    def dim(self) -> int:
        return np.shape(self.a)[0]

    @classmethod
    def sigma(cls, G) -> BlockMatrix2:
        """``[[I, G], [0, I]]``."""
        G = np.asarray(G, dtype=complex)
        eye = np.eye(G.shape[0], dtype=complex)
        return cls(eye, G, np.zeros_like(G), eye)

    @classmethod
    def boosted(cls, G, nu: float) -> BlockMatrix2:
        """``[[I, G / nu], [0, I]]``, the interaction seen in Poisson units."""
        return cls.sigma(np.asarray(G, dtype=complex) / nu)

    @classmethod
    def from_dense(cls, m) -> BlockMatrix2:
        m = np.asarray(m, dtype=complex)
        d = m.shape[0] // 2
        return cls(m[:d, :d], m[:d, d:], m[d:, :d], m[d:, d:])

    def dense(self) -> np.ndarray:
        return np.block([[self.a, self.b], [self.c, self.d]])

    def dag(self) -> BlockMatrix2:
        return BlockMatrix2.from_dense(dag(self.dense()))

    def __matmul__(self, other: BlockMatrix2) -> BlockMatrix2:
        return BlockMatrix2.from_dense(self.dense() @ other.dense())

    def scale_clock(self, m) -> BlockMatrix2:
        """``(m (x) I) self`` for a 2x2 clock matrix ``m``."""
        eye = np.eye(self.dim)
        return BlockMatrix2.from_dense(np.kron(m, eye) @ self.dense())

    def conjugate_boost(self, lam: float) -> BlockMatrix2:
        """``u self u^dag`` with ``u`` the Lorentz boost of parameter ``lam``."""
        u = np.kron(lorentz_boost(lam), np.eye(self.dim))
        return BlockMatrix2.from_dense(u @ self.dense() @ dag(u))

    def compress(self, bra: TemporalVector, ket: TemporalVector) -> np.ndarray:
        """Object operator ``bra^dag self ket``."""
        row = bra.dual
        col = (ket.minus, ket.plus)
        blocks = ((self.a, self.b), (self.c, self.d))
        return sum(row[i] * blocks[i][j] * col[j] for i in range(2) for j in range(2))

    def pseudo_unitarity_defect(self) -> float:
        m = self.dense()
        return max_entry(dag(m) @ m - np.eye(m.shape[0]))

    def is_pseudo_unitary(self, tol: float = 1e-12) -> bool:
        return self.pseudo_unitarity_defect() <= tol


def sigma_at(schedule: HamiltonianSchedule, x: float) -> BlockMatrix2:
    """Interaction ``[[I, -i H(x)], [0, I]]``."""
    return BlockMatrix2.sigma(generator(schedule, x))


def apply_single_interaction(eta, schedule: HamiltonianSchedule, x: float, spin: TemporalVector = FUTURE) -> np.ndarray:
    """Act with ``sigma(x)`` on ``spin (x) eta``.

    Returns shape ``(2, d)``: row 0 is the past component, row 1 the future
    one. A future input gives ``[G eta, eta]``; a past input is unchanged.
    """
    eta = np.asarray(eta, dtype=complex)
    state = np.stack([spin.minus * eta, spin.plus * eta])
    return _apply_slot(state, generator(schedule, x), 0, 1)


def _apply_slot(state, G, slot, nslots):
    """``sigma`` with generator ``G`` on clock ``slot``; identity elsewhere.

    ``state`` has shape ``batch + (2,) * nslots + (d, ...)`` and ``G`` shape
    ``batch + (d, d)``; trailing axes after the object axis are carried along.
    """
    G = np.asarray(G)
    nbatch = G.ndim - 2
    axis = nbatch + slot
    s = np.moveaxis(state, axis, -1)
    # object axis sits right after the remaining clock axes
    obj_axis = nbatch + nslots - 1
    s = np.moveaxis(s, obj_axis, -1)  # (..., spin, obj)
    past, fut = s[..., 0, :], s[..., 1, :]
    extra = s.ndim - 2 - nbatch  # clock slots + trailing axes before (spin, obj)
    Gb = G.reshape(G.shape[:nbatch] + (1,) * extra + G.shape[-2:])
    new_past = past + np.einsum("...ij,...j->...i", Gb, fut)
    s = np.stack([new_past, fut], axis=-2)
    s = np.moveaxis(s, -1, obj_axis)
    return np.moveaxis(s, -1, axis)


@dataclass(frozen=True)
class CountingRecord:
    t: float
    count: int


def counting_record(chain: Chain, t: float) -> CountingRecord:
    """``n_t = |chain intersected with [0, t)|``."""
    return CountingRecord(float(t), chain.count(t))


@dataclass(frozen=True, eq=False)
class DilatedState:
    chain: Chain
    t: float
    amplitudes: np.ndarray

    @property
    def count(self) -> int:
        return self.chain.count(self.t)

    def component(self, spins) -> np.ndarray:
        """Object vector for a spin assignment (0 = past, 1 = future)."""
        return self.amplitudes[tuple(spins)]


def _check_chain(chain: Chain):
    if len(chain) > MAX_CHAIN:
        raise ValueError(f"chains longer than {MAX_CHAIN} are not supported")


def initial_state(eta, n: int) -> np.ndarray:
    """``eta (x) xi_empty`` on ``n`` points: every spin in the future state."""
    eta = np.asarray(eta, dtype=complex)
    psi = np.zeros((2,) * n + eta.shape, dtype=complex)
    psi[(1,) * n] = eta
    return psi


class ChainPropagator:
    """Chronological semi-tensor product of interactions on a chain.

    Each factor acts as ``sigma(x_k)`` on the object and clock slot ``k``
    and as the identity on the other slots; earlier factors act first.
    """

    def __init__(self, schedule: HamiltonianSchedule, chain: Chain, t: float):
        _check_chain(chain)
        self.schedule = schedule
        self.chain = chain
        self.t = float(t)
        self.active = [k for k, x in enumerate(chain) if x < t]
        self.generators = [generator(schedule, chain.times[k]) for k in self.active]

    @property
    def nslots(self) -> int:
        return len(self.chain)

    def apply(self, state, reverse: bool = False) -> np.ndarray:
        """Act on ``(2,) * n + (d, ...)`` arrays. ``reverse=True`` applies
        the factors anti-chronologically (only useful as a negative control)."""
        pairs = list(zip(self.active, self.generators))
        if reverse:
            pairs = pairs[::-1]
        for slot, G in pairs:
            state = _apply_slot(state, G, slot, self.nslots)
        return state

    def dense(self) -> np.ndarray:
        d = self.schedule.dim
        n = self.nslots
        size = 2**n * d
        basis = np.eye(size, dtype=complex).reshape((2,) * n + (d, size))
        return self.apply(basis).reshape(size, size)


def chain_propagator(schedule: HamiltonianSchedule, chain: Chain, t: float) -> ChainPropagator:
    return ChainPropagator(schedule, chain, t)


def jump_evolution(schedule: HamiltonianSchedule, chain: Chain, t_grid, eta=None) -> list[DilatedState]:
    """Piecewise-constant solution of the jump equation on a chain.

    The increment ``gamma(x) psi`` is added when the evolution parameter
    passes a chain point ``x`` (``n_t`` counts points in ``[0, t)``). The
    initial state is ``eta (x) xi_empty``; ``eta`` defaults to the first
    basis vector and may carry trailing axes (e.g. an identity matrix to
    evolve every basis input at once).
    """
    _check_chain(chain)
    if eta is None:
        eta = np.eye(schedule.dim, dtype=complex)[0]
    t_grid = np.asarray(t_grid, dtype=float)
    if np.any(np.diff(t_grid) < 0):
        raise ValueError("t_grid must be non-decreasing")
    n = len(chain)
    psi = initial_state(eta, n)
    applied = 0
    out = []
    for t in t_grid:
        while applied < n and chain.times[applied] < t:
            x = chain.times[applied]
            psi = _apply_slot(psi, generator(schedule, x), applied, n)
            applied += 1
        out.append(DilatedState(chain, float(t), psi.copy()))
    return out


# -- vacuum expectation -----------------------------------------------------

def _ordered_products(Gs):
    """``G[:, n-1] ... G[:, 0]`` for a batch of shape ``(m, n, d, d)``."""
    prod = Gs[:, 0]
    for k in range(1, Gs.shape[1]):
        prod = Gs[:, k] @ prod
    return prod


def _cumulative(vals, x):
    """Cumulative integral from ``x[0]`` of matrix samples ``vals``."""
    # cumulative_simpson silently drops imaginary parts
    re = cumulative_simpson(vals.real, x=x, axis=0, initial=0)
    im = cumulative_simpson(vals.imag, x=x, axis=0, initial=0)
    return re + 1j * im


def dyson_terms(
    schedule: HamiltonianSchedule,
    t: float,
    order: int,
    nodes: int = 10,
    quad_max: int = 4,
    steps: int = 2048,
    quad_tol: float | None = 1e-12,
    max_nodes: int = 36,
) -> list[np.ndarray]:
    """Terms ``int_{X_n^t} G(x_n) ... G(x_1)`` for ``n = 0..order``.

    Orders up to ``quad_max`` use iterated Gauss-Legendre on the simplex,
    starting from ``nodes`` per axis and refining by 1.5x until successive
    values agree to ``quad_tol`` (or ``max_nodes`` is reached; ``None``
    disables refinement). Higher orders use the term recursion
    ``T_n(x) = int_0^x G T_{n-1}`` on a grid of ``steps`` intervals.
    """
    if order < 0:
        raise ValueError("order must be >= 0")
    d = schedule.dim
    terms = [np.eye(d, dtype=complex)]
    f = lambda pts: _ordered_products(generator(schedule, pts))
    for n in range(1, min(order, quad_max) + 1):
        m = nodes
        val = simplex_integrate(f, n, t, m)
        # oscillating schedules need more nodes than the default resolves
        while quad_tol is not None and m < max_nodes:
            m = min(max_nodes, math.ceil(1.5 * m))
            finer = simplex_integrate(f, n, t, m)
            done = max_entry(finer - val) <= quad_tol
            val = finer
            if done:
                break
        terms.append(val)
    if order > quad_max and t > 0:
        x = np.linspace(0.0, t, steps + 1)
        Gx = generator(schedule, x)
        T = np.broadcast_to(np.eye(d, dtype=complex), (x.size, d, d))
        for n in range(1, order + 1):
            T = _cumulative(Gx @ T, x)
            if n > quad_max:
                terms.append(T[-1].copy())
    elif order > quad_max:
        terms.extend(np.zeros((d, d), dtype=complex) for _ in range(order - quad_max))
    return terms


def vacuum_expectation_dyson(
    schedule: HamiltonianSchedule,
    t: float,
    order: int = 12,
    nodes: int = 10,
    quad_max: int = 4,
    steps: int = 2048,
    quad_tol: float | None = 1e-12,
) -> PropagatorEstimate:
    """Pseudo-vacuum expectation of the chain propagator, summed over
    sectors ``n <= order``: the truncated Dyson series of ``V^t_0``."""
    terms = dyson_terms(schedule, t, order, nodes, quad_max, steps, quad_tol)
    return PropagatorEstimate(sum(terms), "dyson", truncation_order=order)


def picard_propagator(schedule: HamiltonianSchedule, t: float, order: int = 12, steps: int = 2048) -> PropagatorEstimate:
    """``order``-th Picard iterate ``V_k(x) = I + int_0^x G V_{k-1}``."""
    if order < 0:
        raise ValueError("order must be >= 0")
    d = schedule.dim
    eye = np.eye(d, dtype=complex)
    if order == 0 or t == 0:
        return PropagatorEstimate(eye, "picard", truncation_order=order)
    x = np.linspace(0.0, t, steps + 1)
    Gx = generator(schedule, x)
    V = np.broadcast_to(eye, (x.size, d, d))
    for _ in range(order):
        V = eye + _cumulative(Gx @ V, x)
    return PropagatorEstimate(V[-1].copy(), "picard", truncation_order=order)


# -- pseudo-Poisson expectation ---------------------------------------------

def compressed_chain_weight(
    schedule: HamiltonianSchedule,
    intensity: IntensityProfile,
    chain: Chain,
    t: float,
    rate_multiplier: float = 2.0,
) -> np.ndarray:
    """``prod_{x in chain} (I + G(x) / (2 nu(x)))``, earliest factor rightmost.

    This is the Poisson-state compression ``p^dag s(x) p`` of the boosted
    interaction, chained chronologically.
    """
    if any(x >= t for x in chain):
        raise ValueError("chain must lie in [0, t)")
    d = schedule.dim
    W = np.eye(d, dtype=complex)
    if not len(chain):
        return W
    xs = np.array(chain.times)
    nu = intensity(xs)
    if np.any(nu < intensity.nu_min) or np.any(nu <= 0):
        raise ValueError("intensity below nu_min on the chain")
    Gs = generator(schedule, xs)
    for G, v in zip(Gs, nu):
        W = (np.eye(d) + G / (rate_multiplier * v)) @ W
    return W


def batch_chain_weights(schedule, intensity, batch: ChainBatch, rate_multiplier: float = 2.0) -> np.ndarray:
    """:func:`compressed_chain_weight` for every chain of a padded batch,
    shape ``(m, d, d)``."""
    m, kmax = batch.times.shape
    d = schedule.dim
    W = np.broadcast_to(np.eye(d, dtype=complex), (m, d, d)).copy()
    if kmax == 0:
        return W
    valid = np.isfinite(batch.times)
    xs = batch.times[valid]
    F = np.broadcast_to(np.eye(d, dtype=complex), (m, kmax, d, d)).copy()
    F[valid] += generator(schedule, xs) / (rate_multiplier * intensity(xs))[:, None, None]
    for k in range(kmax):
        W = F[:, k] @ W
    return W


_CHUNK = 20_000


def _batch_sum(schedule, intensity, t, size, seed_seq, rate_multiplier):
    rng = np.random.default_rng(seed_seq)
    total = np.zeros((schedule.dim, schedule.dim), dtype=complex)
    done = 0
    while done < size:
        m = min(_CHUNK, size - done)
        batch = sample_poisson_chains(intensity, t, m, rng, rate_multiplier)
        total += batch_chain_weights(schedule, intensity, batch, rate_multiplier).sum(axis=0)
        done += m
    return total


def poisson_expectation_mc(
    schedule: HamiltonianSchedule,
    intensity: IntensityProfile,
    t: float,
    samples: int,
    seed: int = 0,
    batches: int = 20,
    threads: int = 1,
    rate_multiplier: float = 2.0,
) -> PropagatorEstimate:
    """Monte Carlo pseudo-Poisson expectation of the boosted chain propagator.

    Chains are Poisson with rate ``rate_multiplier * nu`` on ``[0, t)``;
    each contributes :func:`compressed_chain_weight`. Batch ``b`` draws from
    its own child of ``SeedSequence(seed)``, so the result depends only on
    ``(seed, samples, batches)``, never on ``threads``. The standard error
    is the entrywise batch-means estimate (modulus of the complex error).
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    if not t > 0:
        raise ValueError("t must be positive")
    batches = max(1, min(batches, samples))
    sizes = [samples // batches + (b < samples % batches) for b in range(batches)]
    children = np.random.SeedSequence(seed).spawn(batches)
    work = lambda b: _batch_sum(schedule, intensity, t, sizes[b], children[b], rate_multiplier)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            sums = list(pool.map(work, range(batches)))
    else:
        sums = [work(b) for b in range(batches)]
    sums = np.stack(sums)
    estimate = sums.sum(axis=0) / samples
    if batches > 1:
        means = sums / np.asarray(sizes, dtype=float)[:, None, None]
        dev = np.abs(means - means.mean(axis=0)) ** 2
        stderr = np.sqrt(dev.sum(axis=0) / (batches * (batches - 1)))
    else:
        stderr = np.full(estimate.shape, np.nan)
    return PropagatorEstimate(estimate, "poisson_mc", mc_samples=samples, mc_stderr=stderr, seed=seed)


# -- earth projection / tensor-level compression ----------------------------

def _tensor_compressions(schedule, pts, reverse=False):
    """Vacuum compression of the chain propagator, computed on the full
    ``h (x) (C^2)^n`` tensors for a batch of chains ``pts`` (m, n)."""
    m, n = pts.shape
    d = schedule.dim
    state = np.zeros((m,) + (2,) * n + (d, d), dtype=complex)
    state[(slice(None),) + (1,) * n] = np.eye(d)
    order = range(n - 1, -1, -1) if reverse else range(n)
    for k in order:
        state = _apply_slot(state, generator(schedule, pts[:, k]), k, n)
    # the dual of the future state selects the past component on each slot
    return state[(slice(None),) + (0,) * n]


def tensor_chain_compression(schedule: HamiltonianSchedule, chain: Chain, t: float) -> np.ndarray:
    """``xi_empty^dag sigma_t(chain) xi_empty`` via the dilated tensors."""
    _check_chain(chain)
    pts = np.array([chain.restrict(t).times])
    if pts.shape[1] == 0:
        return np.eye(schedule.dim, dtype=complex)
    return _tensor_compressions(schedule, pts)[0]


def product_chain_compression(schedule: HamiltonianSchedule, chain: Chain, t: float) -> np.ndarray:
    """Same quantity as the chronological product of per-point compressions."""
    W = np.eye(schedule.dim, dtype=complex)
    for x in chain.restrict(t):
        W = sigma_at(schedule, x).compress(FUTURE, FUTURE) @ W
    return W


def earth_projection_defect(
    schedule: HamiltonianSchedule,
    t: float,
    order: int = 6,
    nodes: int = 6,
    steps: int = 10_000,
) -> float:
    """Distance between the tensor-level vacuum compression of the chain
    propagator (sectors ``n <= order``) and the reference ``V^t_0``."""
    d = schedule.dim
    total = np.eye(d, dtype=complex)
    for n in range(1, order + 1):
        pts, w = simplex_nodes(n, t, nodes)
        total = total + np.tensordot(w, _tensor_compressions(schedule, pts), axes=(0, 0))
    ref = reference_propagator(schedule, 0.0, t, steps).matrix
    return max_entry(total - ref)
