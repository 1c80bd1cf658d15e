"""Finite-dimensional object space, Hamiltonian schedules and the
reference time-ordered propagator.

Times are dimensionless (hbar = 1). A schedule returns ``H(t)``; the
generator is ``G(t) = -i H(t)``. All evaluation routines accept scalar or
array times and broadcast, returning ``(..., d, d)`` arrays.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .intensity import IntensityProfile

__all__ = [
    "HamiltonianSchedule",
    "PropagatorEstimate",
    "generator",
    "reference_propagator",
    "hemigroup_defect",
    "max_entry",
    "unitarity_defect",
    "decode_matrix",
    "bundled_schedules",
    "PAULI_X",
    "PAULI_Y",
    "PAULI_Z",
]

PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)

HERMITIAN_TOL = 1e-12


def max_entry(a) -> float:
    """Max-entry norm, the defect norm used throughout the package."""
    a = np.asarray(a)
    return float(np.max(np.abs(a))) if a.size else 0.0


def _as_operator(m, name="matrix") -> np.ndarray:
    m = np.atleast_2d(np.asarray(m, dtype=complex))
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 1:
        raise ValueError(f"{name} must be a non-empty square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{name} has non-finite entries")
    return m


def _check_hermitian(m, name):
    if max_entry(m - m.conj().T) > HERMITIAN_TOL:
        raise ValueError(f"{name} is not Hermitian")


@dataclass(frozen=True, eq=False)
class HamiltonianSchedule:
    """Time-dependent Hermitian ``H(t)`` on ``[0, horizon]``.

    Build one with :meth:`constant`, :meth:`harmonic`, :meth:`separable`
    or :meth:`piecewise_constant`.
    """

    kind: str
    dim: int
    params: dict = field(default_factory=dict)
    horizon: float = math.inf

    # -- constructors -------------------------------------------------------
    @classmethod
    def constant(cls, H0, horizon=math.inf) -> HamiltonianSchedule:
        H0 = _as_operator(H0, "H0")
        _check_hermitian(H0, "H0")
        return cls("constant", H0.shape[0], {"H0": H0}, horizon)

    @classmethod
    def harmonic(cls, H0, H1, omega: float, horizon=math.inf) -> HamiltonianSchedule:
        """``H(t) = H0 + H1 cos(omega t)``."""
        H0 = _as_operator(H0, "H0")
        H1 = _as_operator(H1, "H1")
        if H0.shape != H1.shape:
            raise ValueError("H0 and H1 must have the same shape")
        _check_hermitian(H0, "H0")
        _check_hermitian(H1, "H1")
        return cls("harmonic", H0.shape[0], {"H0": H0, "H1": H1, "omega": float(omega)}, horizon)

    @classmethod
    def separable(cls, H, intensity: IntensityProfile, horizon=math.inf) -> HamiltonianSchedule:
        """``H(t) = H * nu(t)`` with a real intensity profile."""
        H = _as_operator(H, "H")
        _check_hermitian(H, "H")
        return cls("separable", H.shape[0], {"H": H, "intensity": intensity}, horizon)

    @classmethod
    def piecewise_constant(cls, breaks, matrices, horizon=None) -> HamiltonianSchedule:
        """``H(t) = matrices[k]`` for ``breaks[k] <= t < breaks[k+1]``.

        ``breaks`` has one more entry than ``matrices`` and starts at 0; the
        last piece also covers its right endpoint.
        """
        breaks = np.asarray(breaks, dtype=float)
        mats = [_as_operator(m, f"matrices[{k}]") for k, m in enumerate(matrices)]
        if breaks.ndim != 1 or breaks.size != len(mats) + 1:
            raise ValueError("need len(breaks) == len(matrices) + 1")
        if breaks[0] != 0 or np.any(np.diff(breaks) <= 0):
            raise ValueError("breaks must start at 0 and increase strictly")
        if len({m.shape for m in mats}) != 1:
            raise ValueError("all matrices must share one shape")
        for k, m in enumerate(mats):
            _check_hermitian(m, f"matrices[{k}]")
        horizon = float(breaks[-1]) if horizon is None else float(horizon)
        return cls(
            "piecewise_constant",
            mats[0].shape[0],
            {"breaks": breaks, "matrices": np.stack(mats)},
            horizon,
        )

    # -- evaluation ---------------------------------------------------------
    def _check_domain(self, t):
        t = np.asarray(t, dtype=float)
        if not np.all(np.isfinite(t)):
            raise ValueError("times must be finite")
        if np.any(t < 0) or np.any(t > self.horizon):
            raise ValueError(f"time outside schedule domain [0, {self.horizon}]")
        return t

    def hamiltonian(self, t) -> np.ndarray:
        t = self._check_domain(t)
        p = self.params
        if self.kind == "constant":
            return np.broadcast_to(p["H0"], t.shape + p["H0"].shape).copy()
        if self.kind == "harmonic":
            c = np.cos(p["omega"] * t)[..., None, None]
            return p["H0"] + c * p["H1"]
        if self.kind == "separable":
            nu = p["intensity"](t)[..., None, None]
            return nu * p["H"]
        if self.kind == "piecewise_constant":
            breaks = p["breaks"]
            idx = np.clip(np.searchsorted(breaks, t, side="right") - 1, 0, len(p["matrices"]) - 1)
            return p["matrices"][idx]
        raise ValueError(f"unknown schedule kind {self.kind!r}")

    def __call__(self, t):
        return self.hamiltonian(t)

    def breakpoints(self) -> np.ndarray:
        """Times where ``H`` may jump (empty for smooth schedules)."""
        if self.kind == "piecewise_constant":
            return self.params["breaks"][1:-1]
        return np.empty(0)

    def norm_bound(self) -> float:
        """Upper bound on the spectral norm of ``H(t)`` over the domain."""
        p = self.params
        spec = lambda m: float(np.linalg.norm(m, 2))
        if self.kind == "constant":
            return spec(p["H0"])
        if self.kind == "harmonic":
            return spec(p["H0"]) + spec(p["H1"])
        if self.kind == "separable":
            return spec(p["H"]) * p["intensity"].nu_max
        return max(spec(m) for m in p["matrices"])

    def to_json(self) -> dict:
        enc = lambda m: [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(m)]
        p = self.params
        if self.kind == "constant":
            out = {"kind": "constant", "H0": enc(p["H0"])}
        elif self.kind == "harmonic":
            out = {"kind": "harmonic", "H0": enc(p["H0"]), "H1": enc(p["H1"]), "omega": p["omega"]}
        elif self.kind == "separable":
            out = {"kind": "separable", "H": enc(p["H"]), "intensity": p["intensity"].to_json()}
        else:
            out = {
                "kind": "piecewise_constant",
                "breaks": [float(b) for b in p["breaks"]],
                "matrices": [enc(m) for m in p["matrices"]],
            }
        if math.isfinite(self.horizon) and self.kind != "piecewise_constant":
            out["horizon"] = self.horizon
        return out

    @classmethod
    def from_json(cls, obj: dict) -> HamiltonianSchedule:
        """Inverse of :meth:`to_json`. Matrices may also be given as a
        number (1x1) or as rows of real numbers."""
        kind = obj.get("kind")
        horizon = obj.get("horizon", math.inf)
        if kind == "constant":
            return cls.constant(decode_matrix(obj["H0"]), horizon)
        if kind == "harmonic":
            return cls.harmonic(decode_matrix(obj["H0"]), decode_matrix(obj["H1"]), obj["omega"], horizon)
        if kind == "separable":
            return cls.separable(decode_matrix(obj["H"]), IntensityProfile.from_json(obj["intensity"]), horizon)
        if kind == "piecewise_constant":
            return cls.piecewise_constant(obj["breaks"], [decode_matrix(m) for m in obj["matrices"]], obj.get("horizon"))
        raise ValueError(f"unknown schedule kind {kind!r}")


def decode_matrix(m) -> np.ndarray:
    """Matrix from JSON: a number, rows of reals, or rows of ``[re, im]``."""
    a = np.asarray(m, dtype=float)
    if a.ndim == 0:
        return a.reshape(1, 1).astype(complex)
    if a.ndim == 2:
        return a.astype(complex)
    if a.ndim == 3 and a.shape[-1] == 2:
        return a[..., 0] + 1j * a[..., 1]
    raise ValueError(f"cannot read a matrix from an array of shape {a.shape}")


def bundled_schedules() -> dict[str, HamiltonianSchedule]:
    """Small catalogue of schedules used by the demos and the test suite."""
    Z, X, Y = PAULI_Z, PAULI_X, PAULI_Y
    return {
        "scalar": HamiltonianSchedule.constant([[1.0]]),
        "pauli_x": HamiltonianSchedule.constant(X),
        "harmonic": HamiltonianSchedule.harmonic(Z, 0.5 * X, 3.0),
        "harmonic_y": HamiltonianSchedule.harmonic(0.5 * X, 0.7 * Y, 5.0),
        "separable": HamiltonianSchedule.separable(
            X, IntensityProfile.tabulated([0.0, 0.5, 1.0], [0.5, 1.5, 1.0])
        ),
        "piecewise": HamiltonianSchedule.piecewise_constant([0.0, 0.4, 1.0], [Z, X]),
        "qutrit": HamiltonianSchedule.harmonic(
            np.diag([1.0, 0.0, -1.0]),
            np.array([[0, 0.3, 0], [0.3, 0, 0.3], [0, 0.3, 0]]),
            2.0,
        ),
    }


def generator(schedule: HamiltonianSchedule, t) -> np.ndarray:
    """``G(t) = -i H(t)``; anti-Hermitian whenever ``H(t)`` is Hermitian."""
    return -1j * schedule.hamiltonian(t)


_METHOD_FIELDS = {
    "reference": set(),
    "dyson": {"truncation_order"},
    "picard": {"truncation_order"},
    "poisson_mc": {"mc_samples", "mc_stderr", "seed"},
    "lattice": set(),
}


@dataclass
class PropagatorEstimate:
    """An approximation of ``V^t_s`` plus the metadata of its method."""

    matrix: np.ndarray
    method: str
    truncation_order: Optional[int] = None
    mc_samples: Optional[int] = None
    mc_stderr: Optional[np.ndarray] = None
    seed: Optional[int] = None

    def __post_init__(self):
        if self.method not in _METHOD_FIELDS:
            raise ValueError(f"unknown method {self.method!r}")
        present = {
            name
            for name in ("truncation_order", "mc_samples", "mc_stderr", "seed")
            if getattr(self, name) is not None
        }
        if present != _METHOD_FIELDS[self.method]:
            raise ValueError(
                f"method {self.method!r} requires metadata {sorted(_METHOD_FIELDS[self.method])}, "
                f"got {sorted(present)}"
            )

    def to_json(self) -> dict:
        enc = lambda m: [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(m)]
        out = {"method": self.method, "matrix": enc(self.matrix)}
        if self.truncation_order is not None:
            out["order"] = int(self.truncation_order)
        if self.mc_samples is not None:
            out["samples"] = int(self.mc_samples)
        if self.mc_stderr is not None:
            out["stderr"] = [[float(v) for v in row] for row in np.asarray(self.mc_stderr)]
        if self.seed is not None:
            out["seed"] = int(self.seed)
        return out

    @classmethod
    def from_json(cls, obj: dict) -> PropagatorEstimate:
        dec = lambda rows: np.array([[complex(re, im) for re, im in row] for row in rows])
        stderr = obj.get("stderr")
        return cls(
            matrix=dec(obj["matrix"]),
            method=obj["method"],
            truncation_order=obj.get("order"),
            mc_samples=obj.get("samples"),
            mc_stderr=None if stderr is None else np.asarray(stderr, dtype=float),
            seed=obj.get("seed"),
        )


def _rk4(schedule, V, a, b, steps):
    h = (b - a) / steps
    # all stage times up front: one vectorized schedule evaluation
    ks = np.arange(steps)
    t0 = a + ks * h
    if schedule.kind == "piecewise_constant":
        # segment lies inside one piece; avoid picking up the next piece at b
        G0 = Gm = G1 = np.broadcast_to(generator(schedule, 0.5 * (a + b)), (steps, schedule.dim, schedule.dim))
    else:
        G0 = generator(schedule, t0)
        Gm = generator(schedule, t0 + 0.5 * h)
        G1 = generator(schedule, np.minimum(t0 + h, b))
    for k in range(steps):
        k1 = G0[k] @ V
        k2 = Gm[k] @ (V + 0.5 * h * k1)
        k3 = Gm[k] @ (V + 0.5 * h * k2)
        k4 = G1[k] @ (V + h * k3)
        V = V + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    return V


def reference_propagator(schedule: HamiltonianSchedule, s: float, t: float, steps: int = 10_000) -> PropagatorEstimate:
    """Time-ordered exponential ``V^t_s`` by fixed-step classical RK4.

    Jumps of piecewise-constant schedules are respected by integrating each
    smooth segment separately; ``steps`` is shared among segments in
    proportion to their length.
    """
    if not (0 <= s <= t):
        raise ValueError(f"need 0 <= s <= t, got s={s}, t={t}")
    if steps < 1:
        raise ValueError("steps must be >= 1")
    schedule._check_domain([s, t])
    V = np.eye(schedule.dim, dtype=complex)
    if t == s:
        return PropagatorEstimate(V, "reference")
    bps = [b for b in schedule.breakpoints() if s < b < t]
    edges = [s, *bps, t]
    for a, b in zip(edges[:-1], edges[1:]):
        n = max(1, int(round(steps * (b - a) / (t - s))))
        V = _rk4(schedule, V, a, b, n)
    return PropagatorEstimate(V, "reference")


def hemigroup_defect(schedule: HamiltonianSchedule, r: float, s: float, t: float, steps: int = 10_000) -> float:
    """``|V^t_s V^s_r - V^t_r|`` in the max-entry norm."""
    if not (r <= s <= t):
        raise ValueError(f"need r <= s <= t, got {r}, {s}, {t}")
    Vts = reference_propagator(schedule, s, t, steps).matrix
    Vsr = reference_propagator(schedule, r, s, steps).matrix
    Vtr = reference_propagator(schedule, r, t, steps).matrix
    return max_entry(Vts @ Vsr - Vtr)


def unitarity_defect(V) -> float:
    V = np.asarray(V)
    return max_entry(V.conj().T @ V - np.eye(V.shape[0]))
