"""Single-clock Minkowski-Hilbert kernel.

A clock point carries a two-component *temporal spin* ``(past, future)``.
The pairing is indefinite: the metric is the off-diagonal matrix ``Q``
(Pauli-X), so the dual of a column ``(a, b)`` is the row ``(conj b, conj a)``.
The differential time increment is represented by the nilpotent matrix ``D``
which maps the future state onto the past state.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "TemporalVector",
    "BasicVector",
    "PAST",
    "FUTURE",
    "Q",
    "D",
    "I2",
    "pseudo_inner",
    "is_null",
    "dag",
    "is_pseudo_unitary",
    "lorentz_boost",
    "increment",
    "compress",
    "nilpotent_product",
    "monoidal_product",
]

Q = np.array([[0, 1], [1, 0]], dtype=complex)
D = np.array([[0, 1], [0, 0]], dtype=complex)
I2 = np.eye(2, dtype=complex)


@dataclass(frozen=True)
class TemporalVector:
    """Value of a clock wave-function at one coordinate.

    ``minus`` is the past component, ``plus`` the future component.
    """

    minus: complex = 0j
    plus: complex = 0j

    @property
    def dual(self) -> tuple[complex, complex]:
        """Lower-index components ``(xi_-, xi_+) = (conj plus, conj minus)``."""
        return (complex(np.conj(self.plus)), complex(np.conj(self.minus)))

    def as_array(self) -> np.ndarray:
        return np.array([self.minus, self.plus], dtype=complex)

    @classmethod
    def from_array(cls, a) -> TemporalVector:
        a = np.asarray(a, dtype=complex).reshape(2)
        return cls(complex(a[0]), complex(a[1]))

    @classmethod
    def from_dual(cls, row) -> TemporalVector:
        """Inverse of :attr:`dual`; dualizing twice is the identity."""
        lo_minus, lo_plus = row
        return cls(complex(np.conj(lo_plus)), complex(np.conj(lo_minus)))


PAST = TemporalVector(1.0, 0.0)
FUTURE = TemporalVector(0.0, 1.0)


@dataclass(frozen=True)
class BasicVector:
    """The vector ``exp(-i mu t) (nu, 1)``.

    ``mu`` is a clock momentum; it is carried along but only the boundary
    value simulator gives it a dynamical meaning.
    """

    nu: complex
    mu: float = 0.0

    def at(self, t: float = 0.0) -> TemporalVector:
        phase = np.exp(-1j * self.mu * t)
        return TemporalVector(complex(phase * self.nu), complex(phase))


def pseudo_inner(a: TemporalVector, b: TemporalVector) -> complex:
    """Indefinite pairing ``a_- b^- + a_+ b^+``."""
    lo_minus, lo_plus = a.dual
    return lo_minus * b.minus + lo_plus * b.plus


def is_null(xi: TemporalVector) -> bool:
    """True when the pseudo-square of ``xi`` vanishes exactly."""
    return pseudo_inner(xi, xi) == 0


def dag(m) -> np.ndarray:
    """Minkowski adjoint ``Q^-1 m^* Q``.

    Works for 2x2 clock matrices and for ``2d x 2d`` block matrices laid out
    clock-major, where the metric is ``Q (x) I_d``.
    """
    m = np.asarray(m, dtype=complex)
    n = m.shape[-1]
    if m.shape[-2:] != (n, n) or n % 2:
        raise ValueError(f"expected an even square matrix, got shape {m.shape}")
    d = n // 2
    q = np.kron(Q, np.eye(d))
    # Q is real, symmetric and its own inverse
    return q @ np.conj(np.swapaxes(m, -1, -2)) @ q


def _max_entry(a) -> float:
    return float(np.max(np.abs(a))) if np.size(a) else 0.0


def is_pseudo_unitary(m, tol: float = 1e-12) -> bool:
    if not tol > 0:
        raise ValueError("tol must be positive")
    m = np.asarray(m, dtype=complex)
    return _max_entry(dag(m) @ m - np.eye(m.shape[-1])) <= tol


def lorentz_boost(lam: float) -> np.ndarray:
    """Real Lorentz transformation whose Minkowski adjoint is
    ``diag(sqrt(lam), 1/sqrt(lam))`` and equals its inverse."""
    lam = float(lam)
    if not (math.isfinite(lam) and lam > 0):
        raise ValueError(f"boost parameter must be positive and finite, got {lam}")
    r = math.sqrt(lam)
    return np.diag([1.0 / r, r]).astype(complex)


def increment(alpha: complex) -> np.ndarray:
    """Matrix image ``alpha * D`` of the differential ``alpha dt``."""
    return complex(alpha) * D


def compress(bra: TemporalVector, m, ket: TemporalVector) -> complex:
    """``bra^dagger m ket`` for a 2x2 clock matrix."""
    row = np.array(bra.dual, dtype=complex)
    return complex(row @ np.asarray(m, dtype=complex) @ ket.as_array())


def nilpotent_product(a: complex, b: complex) -> complex:
    """Coefficient of ``(a dt)(b dt)``; always zero since ``D @ D = 0``."""
    prod = increment(a) @ increment(b)
    return complex(prod[0, 1])


def monoidal_product(a: complex, b: complex) -> complex:
    """Coefficient ``c`` with ``(1 + a dt)(1 + b dt) = 1 + c dt``."""
    prod = (I2 + increment(a)) @ (I2 + increment(b))
    return complex(prod[0, 1])
