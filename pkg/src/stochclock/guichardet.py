"""Guichardet chains, simplex quadrature, Poisson chain sampling and the
product-vector calculus of the clock's Minkowski-Fock space.

A chain is a finite strictly increasing tuple of interaction times. Sector
``n`` of a Fock vector is a function of ``n``-point chains with values in
``(C^2)^{(x) n}``; slot ``k`` of the tensor belongs to the ``k``-th point.
"""
from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from .intensity import IntensityProfile
from .minkowski_clock import FUTURE, TemporalVector

__all__ = [
    "Chain",
    "ChainBatch",
    "IntensityProfile",
    "ProductVector",
    "EmbeddedVector",
    "TruncatedSectorGrid",
    "gauss_legendre",
    "simplex_nodes",
    "simplex_integrate",
    "sample_poisson_chain",
    "sample_poisson_chains",
    "poisson_weight",
    "poisson_law_mass",
    "fock_pseudo_norm_sq",
    "vacuum_embedding",
    "weyl_on_vacuum",
    "creation_apply",
    "annihilation_apply",
    "grid_exp",
]


@dataclass(frozen=True)
class Chain:
    """Strictly increasing finite set of times; ``Chain()`` is the empty chain."""

    times: tuple = ()

    def __post_init__(self):
        ts = tuple(float(x) for x in self.times)
        if any(not math.isfinite(x) for x in ts):
            raise ValueError("chain times must be finite")
        if any(x < 0 for x in ts):
            raise ValueError("chain times must be non-negative")
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise ValueError(f"chain times must be strictly increasing: {ts}")
        object.__setattr__(self, "times", ts)

    def __len__(self):
        return len(self.times)

    def __iter__(self):
        return iter(self.times)

    def restrict(self, t: float) -> Chain:
        """``chain intersected with [0, t)``."""
        return Chain(tuple(x for x in self.times if x < t))

    def count(self, t: float) -> int:
        """Number of interactions up to ``t``: ``|chain intersected with [0, t)|``."""
        return sum(1 for x in self.times if x < t)

    def union(self, other: Chain) -> Chain:
        return Chain(tuple(sorted(self.times + other.times)))

    def to_json(self) -> list:
        return list(self.times)

    @classmethod
    def from_json(cls, data) -> Chain:
        return cls(tuple(data))


# -- quadrature -------------------------------------------------------------

def gauss_legendre(n: int, a: float = 0.0, b: float = 1.0):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (b - a) * x + 0.5 * (b + a), 0.5 * (b - a) * w


_MAX_POINTS = 5_000_000


def simplex_nodes(n: int, t: float, nodes_per_axis: int):
    """Iterated Gauss-Legendre rule on ``0 < x_1 < ... < x_n < t``.

    Uses the nested form ``int_0^t dx_n int_0^{x_n} dx_{n-1} ...``.
    Returns ``(points, weights)`` with points of shape ``(m, n)`` sorted
    ascending along each row.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    if n == 0:
        return np.zeros((1, 0)), np.ones(1)
    if nodes_per_axis < 2:
        raise ValueError("nodes_per_axis must be >= 2")
    if nodes_per_axis**n > _MAX_POINTS:
        raise ValueError(f"{nodes_per_axis}^{n} quadrature points is too many")
    u, w = gauss_legendre(nodes_per_axis)
    grids = np.meshgrid(*([u] * n), indexing="ij")
    wgrids = np.meshgrid(*([w] * n), indexing="ij")
    us = np.stack([g.ravel() for g in grids], axis=1)  # column k scales x_{k+1}
    ws = np.prod(np.stack([g.ravel() for g in wgrids], axis=1), axis=1)
    pts = np.empty_like(us)
    upper = np.full(us.shape[0], float(t))
    weights = ws.copy()
    for k in range(n - 1, -1, -1):
        pts[:, k] = upper * us[:, k]
        weights *= upper
        upper = pts[:, k]
    return pts, weights


def simplex_integrate(f: Callable, n: int, t: float, nodes_per_axis: int = 10):
    """``int over n-point chains in [0, t) of f``.

    ``f`` receives an ``(m, n)`` array of ascending chains and returns an
    array whose leading axis has length ``m`` (scalar or matrix valued).
    For ``n = 0`` the atomic measure gives ``f(empty)``.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    if n > 0 and not t > 0:
        raise ValueError("t must be positive")
    pts, weights = simplex_nodes(n, t, nodes_per_axis)
    vals = np.asarray(f(pts))
    if vals.shape[:1] != (pts.shape[0],):
        raise ValueError("integrand must return one value per chain")
    if not np.all(np.isfinite(vals)):
        raise ValueError("integrand produced non-finite values")
    return np.tensordot(weights, vals, axes=(0, 0))


# -- Poisson chains ---------------------------------------------------------

class ChainBatch(NamedTuple):
    """Padded batch of chains: ``times[i, :counts[i]]`` is chain ``i``,
    the remaining entries are ``inf``."""

    times: np.ndarray
    counts: np.ndarray

    def chain(self, i: int) -> Chain:
        return Chain(tuple(self.times[i, : self.counts[i]]))


def sample_poisson_chains(
    intensity: IntensityProfile,
    t: float,
    size: int,
    rng: np.random.Generator,
    rate_multiplier: float = 2.0,
) -> ChainBatch:
    """Draw ``size`` chains of the Poisson process with rate
    ``rate_multiplier * nu(x)`` on ``[0, t)`` by thinning against ``nu_max``."""
    if not t > 0:
        raise ValueError("t must be positive")
    lam = rate_multiplier * intensity.nu_max
    n_prop = rng.poisson(lam * t, size=size)
    total = int(n_prop.sum())
    owner = np.repeat(np.arange(size), n_prop)
    x = rng.random(total) * t
    accept = rng.random(total) * intensity.nu_max < intensity(x)
    owner, x = owner[accept], x[accept]
    order = np.lexsort((x, owner))
    owner, x = owner[order], x[order]
    counts = np.bincount(owner, minlength=size)
    kmax = int(counts.max()) if size else 0
    times = np.full((size, kmax), np.inf)
    starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
    slot = np.arange(x.size) - starts[owner]
    times[owner, slot] = x
    return ChainBatch(times, counts)


def sample_poisson_chain(
    intensity: IntensityProfile,
    rate_multiplier: float = 2.0,
    t: float = 1.0,
    seed: int = 0,
) -> Chain:
    rng = np.random.default_rng(seed)
    return sample_poisson_chains(intensity, t, 1, rng, rate_multiplier).chain(0)


def poisson_weight(chain: Chain, intensity: IntensityProfile, rate_multiplier: float = 2.0, t: float = 1.0) -> float:
    """Density of the Poisson law at ``chain`` against the chain measure."""
    if any(x >= t for x in chain):
        raise ValueError("chain must lie in [0, t)")
    dens = float(np.prod(rate_multiplier * intensity(np.array(chain.times))))
    return dens * math.exp(-rate_multiplier * intensity.integral(0.0, t))


def poisson_law_mass(
    intensity: IntensityProfile,
    t: float,
    rate_multiplier: float = 2.0,
    n_max: int = 60,
    quad_max: int = 3,
    nodes_per_axis: int = 10,
) -> float:
    """Total mass of the Poisson law summed over sectors ``n <= n_max``.

    Sectors up to ``quad_max`` integrate the density on the simplex; the
    rest use ``F^n / n!`` with ``F = rate_multiplier * int_0^t nu``.
    """
    F = rate_multiplier * _line_integral(intensity, t)
    total = 0.0
    for n in range(n_max + 1):
        if n <= quad_max:
            f = lambda pts: np.prod(rate_multiplier * intensity(pts), axis=1)
            total += float(simplex_integrate(f, n, t, nodes_per_axis))
        else:
            total += F**n / math.factorial(n)
    return total * math.exp(-F)


# -- product vectors --------------------------------------------------------

def _pseudo_square(comps):
    # (nu, 1)-type components; xi_- xi^- + xi_+ xi^+ = 2 Re(conj(plus) minus)
    return 2.0 * np.real(np.conj(comps[..., 1]) * comps[..., 0])


@dataclass(frozen=True, eq=False)
class ProductVector:
    """``prefactor * xi^(x)``: on a chain, the ordered tensor product of the
    per-point clock vectors ``xi(x)``.

    ``base`` maps an array of times to an array of shape ``(..., 2)`` of
    (past, future) components.
    """

    base: Callable
    prefactor: complex = 1.0
    n_max: int = 12

    @classmethod
    def constant(cls, xi: TemporalVector, prefactor: complex = 1.0, n_max: int = 12) -> ProductVector:
        comps = xi.as_array()
        return cls(lambda x: np.broadcast_to(comps, np.shape(x) + (2,)).copy(), prefactor, n_max)

    def components(self, x) -> np.ndarray:
        return np.asarray(self.base(np.asarray(x, dtype=float)), dtype=complex)

    def evaluate(self, chain: Chain) -> np.ndarray:
        """Tensor of shape ``(2,) * len(chain)``; slot ``k`` is ``chain[k]``."""
        out = np.array(self.prefactor, dtype=complex)
        for comp in self.components(np.array(chain.times)):
            out = np.multiply.outer(out, comp)
        return out

    def pseudo_square_density(self, x) -> np.ndarray:
        return _pseudo_square(self.components(x))


_LINE_NODES = 48


def _line_integral(fn, t: float) -> float:
    x, w = gauss_legendre(_LINE_NODES, 0.0, t)
    return float(np.dot(w, fn(x)))


def fock_pseudo_norm_sq(v: ProductVector, t: float, n_max: int | None = None, method: str = "closed", nodes_per_axis: int = 8) -> float:
    """Truncated pseudo-Fock square ``sum_{n <= n_max} int prod ||xi(x)||^2``.

    ``method="closed"`` uses ``int_{X_n} prod f = (int f)^n / n!``;
    ``method="quadrature"`` integrates every sector on the simplex.
    """
    n_max = v.n_max if n_max is None else n_max
    scale = abs(complex(v.prefactor)) ** 2
    if method == "closed":
        F = _line_integral(v.pseudo_square_density, t) if t > 0 else 0.0
        return scale * sum(F**n / math.factorial(n) for n in range(n_max + 1))
    if method == "quadrature":
        total = 0.0
        for n in range(n_max + 1):
            f = lambda pts: np.prod(v.pseudo_square_density(pts), axis=1)
            total += float(simplex_integrate(f, n, t, nodes_per_axis))
        return scale * total
    raise ValueError(f"unknown method {method!r}")


@dataclass(frozen=True, eq=False)
class EmbeddedVector:
    """Object vector tensored with a clock product vector."""

    eta: np.ndarray
    clock: ProductVector

    def pseudo_norm(self, t: float = 1.0, n_max: int | None = None) -> float:
        sq = float(np.vdot(self.eta, self.eta).real) * fock_pseudo_norm_sq(self.clock, t, n_max)
        return math.sqrt(max(sq, 0.0))


def vacuum_embedding(eta) -> EmbeddedVector:
    """``eta (x) xi_empty^(x)``: every clock point in the future null state."""
    eta = np.asarray(eta, dtype=complex).ravel()
    if not math.isclose(float(np.linalg.norm(eta)), 1.0, rel_tol=0, abs_tol=1e-12):
        warnings.warn("object vector is not normalized", stacklevel=2)
    return EmbeddedVector(eta, ProductVector.constant(FUTURE))


def weyl_on_vacuum(nu, t: float, n_max: int = 12) -> ProductVector:
    """Closed form of the pseudo-Weyl displacement of the pseudo-vacuum:
    ``exp(-int_0^t nu) * xi_nu^(x)`` with ``xi_nu(x) = (nu(x), 1)`` on
    ``[0, t)`` and the future state beyond ``t``.

    ``nu`` may be an :class:`IntensityProfile` or a non-negative number
    (``0`` gives back the pseudo-vacuum).
    """
    if isinstance(nu, IntensityProfile):
        nu_fn, total = nu, nu.integral(0.0, t)
    else:
        val = float(nu)
        if val < 0:
            raise ValueError("intensity must be non-negative")
        nu_fn, total = (lambda x: np.full(np.shape(x), val)), val * t

    def base(x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape + (2,), dtype=complex)
        out[..., 0] = np.where(x < t, nu_fn(x), 0.0)
        out[..., 1] = 1.0
        return out

    return ProductVector(base, math.exp(-total), n_max)


# -- truncated sector grid --------------------------------------------------

def _flip_spins(a: np.ndarray, n: int) -> np.ndarray:
    # metric Q on every spin slot swaps past and future
    return np.flip(a, axis=tuple(range(a.ndim - n, a.ndim))) if n else a


@dataclass
class TruncatedSectorGrid:
    """Fock vector truncated to sectors ``n <= n_grid``.

    Sector ``n`` is stored as a symmetric function on the cube
    ``[0, t)^n`` sampled at tensor Gauss-Legendre nodes, array shape
    ``(nodes,) * n + (2,) * n``. Chain integrals use
    ``int_{X_n} f = (1/n!) int_{[0,t)^n} f``.
    """

    t: float
    n_grid: int = 3
    nodes: int = 8
    sectors: list = field(default_factory=list)

    def __post_init__(self):
        self.x, self.w = gauss_legendre(self.nodes, 0.0, self.t)
        if not self.sectors:
            self.sectors = [self._zeros(n) for n in range(self.n_grid + 1)]

    def _zeros(self, n):
        return np.zeros((self.nodes,) * n + (2,) * n, dtype=complex)

    def like(self, sectors=None) -> TruncatedSectorGrid:
        return TruncatedSectorGrid(self.t, self.n_grid, self.nodes, sectors or [])

    @classmethod
    def vacuum(cls, t: float, n_grid: int = 3, nodes: int = 8) -> TruncatedSectorGrid:
        """The true vacuum: 1 on the empty chain, 0 elsewhere."""
        g = cls(t, n_grid, nodes)
        g.sectors[0] = np.array(1.0 + 0j)
        return g

    @classmethod
    def from_product(cls, v: ProductVector, t: float, n_grid: int = 3, nodes: int = 8) -> TruncatedSectorGrid:
        g = cls(t, n_grid, nodes)
        comps = v.components(g.x)  # (nodes, 2)
        for n in range(n_grid + 1):
            arr = np.array(v.prefactor, dtype=complex)
            for _ in range(n):
                arr = np.multiply.outer(arr, comps)
            # axes are (node, spin) pairs; put nodes first, spins last
            perm = [2 * k for k in range(n)] + [2 * k + 1 for k in range(n)]
            g.sectors[n] = np.transpose(arr, perm) if n else arr
        return g

    def __add__(self, other):
        return self.like([a + b for a, b in zip(self.sectors, other.sectors)])

    def __sub__(self, other):
        return self.like([a - b for a, b in zip(self.sectors, other.sectors)])

    def __mul__(self, c):
        return self.like([c * a for a in self.sectors])

    __rmul__ = __mul__

    def symmetrize(self) -> TruncatedSectorGrid:
        out = []
        for n, a in enumerate(self.sectors):
            if n < 2:
                out.append(a.copy())
                continue
            acc = np.zeros_like(a)
            perms = list(itertools.permutations(range(n)))
            for p in perms:
                acc += np.transpose(a, list(p) + [n + k for k in p])
            out.append(acc / len(perms))
        return self.like(out)

    def pairing(self, other: TruncatedSectorGrid) -> complex:
        """Pseudo (Minkowski) pairing ``<self, other>``, antilinear in self."""
        total = 0j
        for n, (a, b) in enumerate(zip(self.sectors, other.sectors)):
            prod = np.conj(a) * _flip_spins(b, n)
            prod = prod.reshape((self.nodes,) * n + (-1,)).sum(axis=-1) if n else prod
            for _ in range(n):
                prod = np.tensordot(self.w, prod, axes=(0, 0))
            total += complex(prod) / math.factorial(n)
        return total

    def evaluate(self, n: int, node_index) -> np.ndarray:
        return self.sectors[n][tuple(node_index)]


def _letters(k, offset):
    return "".join(chr(ord("a") + offset + i) for i in range(k))


def creation_apply(xi, grid: TruncatedSectorGrid) -> TruncatedSectorGrid:
    """``[A^dag(xi) psi](tau) = sum_{x in tau} xi(x) (x) psi(tau \\ x)``.

    ``xi`` is a :class:`TemporalVector` or a callable of times returning
    ``(..., 2)`` components. The top sector is dropped.
    """
    comps = _grid_components(xi, grid)  # (nodes, 2)
    out = [grid._zeros(0)]
    for n in range(1, grid.n_grid + 1):
        prev = grid.sectors[n - 1]
        nodes_l = _letters(n, 0)
        spins_l = _letters(n, 13)
        acc = np.zeros_like(grid._zeros(n))
        for i in range(n):
            src = nodes_l[:i] + nodes_l[i + 1:] + spins_l[:i] + spins_l[i + 1:]
            spec = f"{nodes_l[i]}{spins_l[i]},{src}->{nodes_l}{spins_l}"
            acc += np.einsum(spec, comps, prev)
        out.append(acc)
    return grid.like(out)


def annihilation_apply(xi, grid: TruncatedSectorGrid) -> TruncatedSectorGrid:
    """``[A(xi^dag) psi](tau) = int_0^t xi^dag(x) psi(x u tau) dx``.

    ``xi`` is the *column* vector whose Minkowski dual is contracted; the
    top sector becomes zero.
    """
    comps = _grid_components(xi, grid)
    # dual row: (conj plus, conj minus)
    dual = np.conj(comps[:, ::-1])
    out = []
    for n in range(grid.n_grid):
        nxt = grid.sectors[n + 1]
        nodes_l = _letters(n, 1)
        spins_l = _letters(n, 14)
        spec = f"a,an,a{nodes_l}n{spins_l}->{nodes_l}{spins_l}"
        out.append(np.einsum(spec, grid.w, dual, nxt))
    out.append(grid._zeros(grid.n_grid))
    return grid.like(out)


def _grid_components(xi, grid):
    if isinstance(xi, TemporalVector):
        return np.broadcast_to(xi.as_array(), (grid.nodes, 2))
    return np.asarray(xi(grid.x), dtype=complex).reshape(grid.nodes, 2)


def grid_exp(op: Callable, grid: TruncatedSectorGrid, terms: int) -> TruncatedSectorGrid:
    """Taylor series ``sum_{k <= terms} op^k psi / k!`` on the grid."""
    acc = grid
    term = grid
    for k in range(1, terms + 1):
        term = op(term) * (1.0 / k)
        acc = acc + term
    return acc
