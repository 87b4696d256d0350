"""One-dimensional potentials V(x) with the derivatives the steppers need."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

KINDS = ("free", "harmonic", "quartic", "tabulated")


@dataclass(frozen=True, eq=False)
class Potential:
    """``free``, ``harmonic`` (k x^2/2), ``quartic`` (lam x^4/4 + k x^2/2) or ``tabulated``.

    Tabulated potentials are cubic splines through ``(x_table, v_table)``;
    their third derivative is piecewise constant.
    """

    kind: str = "free"
    k: float = 0.0
    lam: float = 0.0
    x_table: np.ndarray | None = None
    v_table: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown potential kind {self.kind!r}; expected one of {KINDS}")
        if self.kind == "tabulated":
            if self.x_table is None or self.v_table is None:
                raise ValueError("tabulated potential needs x_table and v_table")
            spline = CubicSpline(np.asarray(self.x_table, float), np.asarray(self.v_table, float))
            object.__setattr__(self, "_spline", spline)

    @classmethod
    def free(cls):
        return cls("free")

    @classmethod
    def harmonic(cls, k: float = 1.0):
        return cls("harmonic", k=k)

    @classmethod
    def quartic(cls, lam: float = 1.0, k: float = 0.0):
        return cls("quartic", k=k, lam=lam)

    @classmethod
    def tabulated(cls, x, v):
        return cls("tabulated", x_table=np.asarray(x, float), v_table=np.asarray(v, float))

    def V(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "free":
            return np.zeros_like(x)
        if self.kind == "tabulated":
            return self._spline(x)
        return 0.5 * self.k * x**2 + 0.25 * self.lam * x**4

    def dV(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "free":
            return np.zeros_like(x)
        if self.kind == "tabulated":
            return self._spline(x, 1)
        return self.k * x + self.lam * x**3

    def d3V(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "free":
            return np.zeros_like(x)
        if self.kind == "tabulated":
            return self._spline(x, 3)
        return 6.0 * self.lam * x

    def energy(self, x, p, mass: float = 1.0):
        return np.asarray(p) ** 2 / (2 * mass) + self.V(x)

    def omega(self, mass: float = 1.0) -> float:
        """Small-oscillation angular frequency sqrt(V''(0)/m)."""
        return float(np.sqrt(self.k / mass)) if self.kind in ("harmonic", "quartic") else 0.0

    def check_consistency(self, x, h: float = 1e-4, tol: float = 1e-6) -> float:
        """Max |V'(x) - centered difference of V|; raises if above ``tol``."""
        x = np.asarray(x, dtype=float)
        fd = (self.V(x + h) - self.V(x - h)) / (2 * h)
        err = float(np.max(np.abs(fd - self.dV(x)), initial=0.0))
        if err > tol:
            raise ValueError(f"V' inconsistent with V: finite-difference mismatch {err:.3g}")
        return err

    def describe(self) -> dict:
        d = {"kind": self.kind}
        if self.kind in ("harmonic", "quartic"):
            d["k"] = self.k
        if self.kind == "quartic":
            d["lam"] = self.lam
        return d
