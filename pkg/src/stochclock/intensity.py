"""Interaction intensity profiles ``nu(x)`` (units 1/time)."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate

__all__ = ["IntensityProfile", "NU_FLOOR"]

# keeps 1/nu weights finite
NU_FLOOR = 1e-6


@dataclass(frozen=True, eq=False)
class IntensityProfile:
    """Strictly positive, bounded interaction frequency.

    Use the constructors :meth:`constant`, :meth:`tabulated` (piecewise
    linear through the given knots, clamped outside them) or
    :meth:`from_function` for an analytic profile.
    """

    kind: str
    nu_min: float
    nu_max: float
    _value: float = 0.0
    _knots: tuple = ()
    _values: tuple = ()
    _fn: Callable | None = field(default=None, repr=False)
    _dfn: Callable | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in ("constant", "tabulated", "function"):
            raise ValueError(f"unknown intensity kind {self.kind!r}")
        if not (math.isfinite(self.nu_min) and math.isfinite(self.nu_max)):
            raise ValueError("intensity bounds must be finite")
        if self.nu_min < NU_FLOOR:
            raise ValueError(f"intensity must stay above {NU_FLOOR}, got nu_min={self.nu_min}")
        if self.nu_max < self.nu_min:
            raise ValueError("nu_max < nu_min")

    @classmethod
    def constant(cls, value: float) -> IntensityProfile:
        value = float(value)
        return cls("constant", value, value, _value=value)

    @classmethod
    def tabulated(cls, knots, values) -> IntensityProfile:
        knots = np.asarray(knots, dtype=float)
        values = np.asarray(values, dtype=float)
        if knots.ndim != 1 or knots.shape != values.shape or knots.size < 2:
            raise ValueError("tabulated intensity needs matching 1-d knots and values (>= 2)")
        if np.any(np.diff(knots) <= 0):
            raise ValueError("knots must be strictly increasing")
        if not np.all(np.isfinite(values)):
            raise ValueError("intensity values must be finite")
        return cls(
            "tabulated",
            float(values.min()),
            float(values.max()),
            _knots=tuple(knots),
            _values=tuple(values),
        )

    @classmethod
    def from_function(cls, fn, nu_min: float, nu_max: float, derivative=None) -> IntensityProfile:
        """Analytic profile. ``nu_min``/``nu_max`` must bound ``fn`` on the
        region where it is used; they drive the thinning sampler."""
        return cls("function", float(nu_min), float(nu_max), _fn=fn, _dfn=derivative)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "constant":
            return np.full(x.shape, self._value)
        if self.kind == "tabulated":
            return np.interp(x, self._knots, self._values)
        out = np.asarray(self._fn(x), dtype=float)
        return np.broadcast_to(out, x.shape).copy()

    def derivative(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "constant":
            return np.zeros(x.shape)
        if self.kind == "tabulated":
            knots = np.asarray(self._knots)
            slopes = np.diff(self._values) / np.diff(knots)
            idx = np.clip(np.searchsorted(knots, x, side="right") - 1, 0, slopes.size - 1)
            inside = (x >= knots[0]) & (x <= knots[-1])
            return np.where(inside, slopes[idx], 0.0)
        if self._dfn is not None:
            return np.broadcast_to(np.asarray(self._dfn(x), dtype=float), x.shape).copy()
        h = 1e-6 * np.maximum(1.0, np.abs(x))
        return (self(x + h) - self(x - h)) / (2 * h)

    def integral(self, a: float, b: float) -> float:
        """``int_a^b nu(x) dx``."""
        if b < a:
            return -self.integral(b, a)
        if self.kind == "constant":
            return self._value * (b - a)
        if self.kind == "tabulated":
            knots = np.asarray(self._knots)
            inner = knots[(knots > a) & (knots < b)]
            xs = np.concatenate([[a], inner, [b]])
            ys = self(xs)
            # exact for the piecewise-linear interpolant
            return float(np.sum(0.5 * (ys[1:] + ys[:-1]) * np.diff(xs)))
        val, _ = integrate.quad(lambda s: float(self._fn(s)), a, b, epsabs=1e-14, epsrel=1e-13, limit=200)
        return float(val)

    def to_json(self) -> dict:
        if self.kind == "constant":
            return {"kind": "constant", "data": self._value}
        if self.kind == "tabulated":
            return {"kind": "tabulated", "data": {"knots": list(self._knots), "values": list(self._values)}}
        raise TypeError("function-backed intensities are not serializable")

    @classmethod
    def from_json(cls, obj: dict) -> IntensityProfile:
        kind = obj.get("kind")
        data = obj.get("data")
        if kind == "constant":
            return cls.constant(data)
        if kind == "tabulated":
            return cls.tabulated(data["knots"], data["values"])
        raise ValueError(f"unknown intensity kind {kind!r}")
