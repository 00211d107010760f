"""Coefficient functions and the built-in model catalog.

Built-in models belong to the family

    x'(t) = A(t) x(t) + B(t) x(t - tau) + P(t) * x(t - tau) * exp(-x(t - tau)),

which covers the scalar Nicholson blowflies equation, the two-patch Nicholson
system and linear delay test equations.  Family models carry their
coefficients in structured form so the integrator can tabulate them and hand
the inner loop to the compiled kernel.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import ModelSpec
from .errors import ConfigError


class Coefficient:
    """A scalar function of time, vectorized over numpy arrays."""

    period: float | None = None

    def __call__(self, t):
        raise NotImplementedError

    def to_config(self):
        raise NotImplementedError


@dataclass(frozen=True)
class Constant(Coefficient):
    value: float

    period = None

    def __call__(self, t):
        return np.full(np.shape(t), float(self.value))

    def to_config(self):
        return float(self.value)


@dataclass(frozen=True)
class Sinusoid(Coefficient):
    """``mean + amp * sin(2 pi t / period + phase)``."""

    mean: float
    amp: float
    period: float = 1.0
    phase: float = 0.0

    def __post_init__(self):
        if not (self.period > 0 and math.isfinite(self.period)):
            raise ConfigError(f"sinusoid period must be positive and finite, got {self.period}")

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return self.mean + self.amp * np.sin(2.0 * np.pi * t / self.period + self.phase)

    def to_config(self):
        return {"mean": self.mean, "amp": self.amp, "period": self.period, "phase": self.phase}


@dataclass(frozen=True)
class PeriodicTable(Coefficient):
    """Samples over one period at ``t = k * period / len(values)``, linearly interpolated."""

    values: tuple
    period: float = 1.0

    def __post_init__(self):
        if len(self.values) < 1:
            raise ConfigError("periodic table needs at least one sample")
        if not (self.period > 0 and math.isfinite(self.period)):
            raise ConfigError(f"table period must be positive and finite, got {self.period}")
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        n = len(self.values)
        knots = np.linspace(0.0, self.period, n + 1)
        vals = np.append(self.values, self.values[0])
        return np.interp(np.mod(t, self.period), knots, vals)

    def to_config(self):
        return {"table": list(self.values), "period": self.period}


def as_coefficient(spec) -> Coefficient:
    """Build a coefficient from a number, a sinusoid dict or a table dict."""
    if isinstance(spec, Coefficient):
        return spec
    if isinstance(spec, (int, float)) and not isinstance(spec, bool):
        return Constant(float(spec))
    if isinstance(spec, dict):
        if "table" in spec:
            return PeriodicTable(tuple(spec["table"]), float(spec.get("period", 1.0)))
        if "mean" in spec:
            return Sinusoid(
                float(spec["mean"]),
                float(spec.get("amp", 0.0)),
                float(spec.get("period", 1.0)),
                float(spec.get("phase", 0.0)),
            )
    raise ConfigError(f"cannot interpret coefficient {spec!r}")


def _common_period(coeffs: Sequence[Coefficient]) -> float | None:
    periods = sorted({c.period for c in coeffs if c.period is not None})
    if not periods:
        return None
    T = periods[-1]
    for p in periods:
        ratio = T / p
        if abs(ratio - round(ratio)) > 1e-9:
            raise ConfigError(f"incommensurate coefficient periods {periods}")
    return T


class DelayFamily:
    """Structured right-hand side ``A(t) x + B(t) y + P(t) * y * exp(-y)``.

    ``A`` and ``B`` are N x N nested sequences of coefficients (``None`` means
    zero), ``P`` a length-N sequence.
    """

    def __init__(self, A=None, B=None, P=None, dim=None):
        size = [len(M) for M in (A, B, P) if M is not None]
        N = dim if dim is not None else (size[0] if size else None)
        if N is None:
            raise ConfigError("dimension cannot be inferred")
        zero = Constant(0.0)
        self.dim = N
        self.A = [[as_coefficient(c) for c in row] for row in A] if A is not None else [[zero] * N for _ in range(N)]
        self.B = [[as_coefficient(c) for c in row] for row in B] if B is not None else [[zero] * N for _ in range(N)]
        self.P = [as_coefficient(c) for c in P] if P is not None else [zero] * N
        for M in (self.A, self.B):
            if len(M) != N or any(len(row) != N for row in M):
                raise ConfigError("coefficient matrices must be N x N")
        if len(self.P) != N:
            raise ConfigError("birth coefficient vector must have length N")
        flat = [c for row in self.A for c in row] + [c for row in self.B for c in row] + list(self.P)
        self.period = _common_period(flat)

    def tabulate(self, t):
        """Coefficient arrays at times ``t``: shapes (..., N, N), (..., N, N), (..., N)."""
        t = np.asarray(t, dtype=float)
        A = np.stack([np.stack([c(t) for c in row], axis=-1) for row in self.A], axis=-2)
        B = np.stack([np.stack([c(t) for c in row], axis=-1) for row in self.B], axis=-2)
        P = np.stack([c(t) for c in self.P], axis=-1)
        return A, B, P

    def rhs(self, t, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        t = np.broadcast_to(np.asarray(t, dtype=float), np.broadcast_shapes(x.shape[:-1], y.shape[:-1]))
        A, B, P = self.tabulate(t)
        return (
            np.einsum("...ij,...j->...i", A, x)
            + np.einsum("...ij,...j->...i", B, y)
            + P * y * np.exp(-y)
        )

    def to_config(self):
        return {
            "A": [[c.to_config() for c in row] for row in self.A],
            "B": [[c.to_config() for c in row] for row in self.B],
            "P": [c.to_config() for c in self.P],
        }


def family_model(family: DelayFamily, tau: float, label: str = "", cone: bool = True) -> ModelSpec:
    return ModelSpec(
        dim=family.dim,
        tau=float(tau),
        rhs=family.rhs,
        period=family.period,
        label=label,
        cone=cone,
        family=family,
    )


def nicholson(d=1.0, p=2.0, tau=0.5, label=None) -> ModelSpec:
    """Scalar Nicholson blowflies model ``x' = -d x + p y exp(-y)``; d, p may vary in time."""
    d = as_coefficient(d)
    p = as_coefficient(p)
    neg_d = _negate(d)
    fam = DelayFamily(A=[[neg_d]], P=[p])
    return family_model(fam, tau, label or "nicholson")


def nicholson_system(d=(1.0, 1.0), b=(0.5, 0.5), p=(2.0, 2.0), tau=0.5, label=None) -> ModelSpec:
    """Two-patch Nicholson system with linear dispersal rates ``b``."""
    d = [as_coefficient(v) for v in d]
    b = [as_coefficient(v) for v in b]
    p = [as_coefficient(v) for v in p]
    A = [[_negate(d[0]), b[0]], [b[1], _negate(d[1])]]
    fam = DelayFamily(A=A, P=p)
    return family_model(fam, tau, label or "nicholson_system")


def linear_delay(a=1.0, tau=1.0, label=None) -> ModelSpec:
    """``x' = -a x(t - tau)``; sign-changing solutions, so not restricted to the cone."""
    fam = DelayFamily(B=[[_negate(as_coefficient(a))]])
    return family_model(fam, tau, label or "linear_delay", cone=False)


def zero_model(dim=1, tau=1.0, label=None) -> ModelSpec:
    fam = DelayFamily(dim=dim)
    return family_model(fam, tau, label or "zero")


def _negate(c: Coefficient) -> Coefficient:
    if isinstance(c, Constant):
        return Constant(-c.value)
    if isinstance(c, Sinusoid):
        return Sinusoid(-c.mean, -c.amp, c.period, c.phase)
    if isinstance(c, PeriodicTable):
        return PeriodicTable(tuple(-v for v in c.values), c.period)
    raise ConfigError(f"cannot negate coefficient {c!r}")


BUILTINS = {
    "nicholson": nicholson,
    "nicholson_system": nicholson_system,
    "linear_delay": linear_delay,
    "zero": zero_model,
}
