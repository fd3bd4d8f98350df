"""Scalar model constants and scheme exponents.

All quantities are in the scaled (dimensionless) form used throughout the
solver: pressures are scaled by a reference pressure, temperatures by a
reference temperature, and the heat capacities ``c_w``, ``c_s`` absorb the
remaining dimensional factors.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Tuple

import numpy as np


@dataclass(frozen=True)
class ModelParams:
    """Constants of the flow model and of the regularized implicit scheme.

    The exponent constraints enforced in :meth:`check` keep the regularized
    scheme inside the parameter region where its structural estimates
    (saturation floor, entropy-energy monotonicity) are available.
    """

    N: int = 1                    # number of species in the water phase
    gamma: float = 3.0            # pressure-law exponent, > 2
    c_w: float = 1.0              # scaled heat capacity of water
    c_s: float = 1.0              # scaled heat capacity of the skeleton
    p_at: float = 2.5             # scaled atmospheric (air) pressure
    K: float = 1.0                # absolute permeability
    alpha: float = 0.0            # Robin heat-exchange coefficient
    T0: float = 1.0               # boundary reference temperature
    mu0: Tuple[float, ...] = (0.0,)   # boundary reference chemical potentials
    eps: float = 0.01             # lower-order regularization strength
    delta: float = 0.0            # higher-order regularization strength
    tau: float = 0.01             # implicit Euler time step
    K1: float = 5.0               # density regularization exponent
    K2: float = 6.0               # skeleton temperature regularization exponent
    K3: float = 7.0               # temperature p-Laplacian exponent
    a: float = 3.0                # reaction growth exponent, > 2
    alpha_r: float = 2.0          # relative-permeability exponent
    beta: float = 4.0             # heat-conductivity growth exponent
    q: float = 1.5                # capillary-gradient exponent
    k_p: float = 2.0              # capillary blow-up exponent (0 => log regularized)
    c_p: float = 1.0              # capillary blow-up coefficient

    def __post_init__(self):
        if len(self.mu0) != self.N:
            object.__setattr__(self, "mu0", tuple([self.mu0[0] if self.mu0 else 0.0] * self.N))

    def k1_bounds(self) -> Tuple[float, float]:
        """Admissible (lo, hi) interval for K1; hi is +inf for alpha_r <= 4/3."""
        lo = 1.2 * self.gamma
        if self.alpha_r <= 4.0 / 3.0:
            return lo, np.inf
        hi = (3.0 * self.alpha_r - 2.0) / (3.0 * self.alpha_r - 4.0) * self.gamma
        return lo, hi

    def k3_lower_bound(self) -> float:
        denom = 5.0 * self.K1 - 6.0 * self.gamma
        if denom <= 0.0:
            return np.inf
        return (5.0 * self.K1 + 6.0 * self.gamma) / denom

    def check(self) -> None:
        """Raise ValueError on any violated structural constraint."""
        errs = []
        if self.N < 1:
            errs.append("N must be >= 1")
        if self.gamma <= 2.0:
            errs.append(f"gamma must exceed 2 (got {self.gamma})")
        for name in ("c_w", "c_s", "p_at", "K", "T0", "tau"):
            if getattr(self, name) <= 0.0:
                errs.append(f"{name} must be positive")
        for name in ("alpha", "eps", "delta"):
            if getattr(self, name) < 0.0:
                errs.append(f"{name} must be nonnegative")
        if self.a <= 2.0:
            errs.append(f"reaction exponent a must exceed 2 (got {self.a})")
        if not (2.0 / self.gamma < self.alpha_r < 14.0 / 3.0):
            errs.append(
                f"alpha_r must lie in (2/gamma, 14/3) = "
                f"({2.0 / self.gamma:.4g}, {14.0 / 3.0:.4g}) (got {self.alpha_r})"
            )
        if not (self.gamma / (self.gamma - 1.0) <= self.q < 2.0):
            errs.append(
                f"q must lie in [gamma/(gamma-1), 2) = "
                f"[{self.gamma / (self.gamma - 1.0):.4g}, 2) (got {self.q})"
            )
        if self.gamma > 2.0:
            beta_lo = max(self.q / (2.0 - self.q), 4.0 / 3.0)
            if self.beta < beta_lo or self.beta <= self.gamma / (self.gamma - 2.0):
                errs.append(
                    f"beta must satisfy beta >= q/(2-q), beta > gamma/(gamma-2), "
                    f"beta >= 4/3 (got {self.beta})"
                )
        lo, hi = self.k1_bounds()
        if not (lo < self.K1 < hi):
            errs.append(f"K1 must lie in ({lo:.4g}, {hi:.4g}) (got {self.K1})")
        if not (3.0 < self.K2 < 3.0 * self.beta):
            errs.append(f"K2 must lie in (3, 3*beta) = (3, {3.0 * self.beta:.4g}) (got {self.K2})")
        if self.K3 <= self.k3_lower_bound():
            errs.append(f"K3 must exceed {self.k3_lower_bound():.6g} (got {self.K3})")
        if self.k_p < 0.0:
            errs.append("k_p must be nonnegative")
        if self.c_p <= 0.0:
            errs.append("c_p must be positive")
        if errs:
            raise ValueError("invalid model parameters:\n  " + "\n  ".join(errs))

    def with_(self, **kw) -> "ModelParams":
        return replace(self, **kw)
