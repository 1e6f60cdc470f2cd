"""Electromagnetic quantities used to build synthetic GPR returns.

All functions are pure and operate on 64-bit floats. Velocities are in m/ns,
times in ns and depths in meters.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

EPS0 = 8.8541878128e-12  # vacuum permittivity, F/m
C_LIGHT = 0.299792458  # speed of light, m/ns
VELOCITY_TOLERANCE = 0.05


class PhysicsDomainError(ValueError):
    """Raised when a physical quantity lies outside its valid domain."""


@dataclass(frozen=True)
class PhysicsConstants:
    eps0: float = EPS0


@dataclass(frozen=True)
class Permittivity:
    """Complex permittivity split into stored-energy and loss parts."""

    eps_store: float
    eps_loss: float = 0.0

    def __post_init__(self):
        if not self.eps_store > 0:
            raise PhysicsDomainError(f"eps_store must be > 0, got {self.eps_store}")
        if not self.eps_loss >= 0:
            raise PhysicsDomainError(f"eps_loss must be >= 0, got {self.eps_loss}")


@dataclass(frozen=True)
class Material:
    """A homogeneous terrain material.

    ``kappa`` and ``velocity`` are stored independently; use
    :func:`velocity_consistent` to check them against each other.
    """

    name: str
    kappa: float
    velocity: float
    loss_tangent: float = 0.0

    def __post_init__(self):
        if not self.kappa >= 1.0:
            raise PhysicsDomainError(f"{self.name}: kappa must be >= 1, got {self.kappa}")
        if not 0.0 < self.velocity <= 0.3:
            raise PhysicsDomainError(
                f"{self.name}: velocity must be in (0, 0.3] m/ns, got {self.velocity}"
            )
        if not self.loss_tangent >= 0:
            raise PhysicsDomainError(
                f"{self.name}: loss_tangent must be >= 0, got {self.loss_tangent}"
            )

    @classmethod
    def from_kappa(cls, name: str, kappa: float, loss_tangent: float = 0.0) -> "Material":
        """Build a material whose velocity is derived from kappa."""
        return cls(name, kappa, velocity_from_kappa(kappa), loss_tangent)


def complex_permittivity(p: Permittivity) -> complex:
    return complex(p.eps_store, -p.eps_loss)


def relative_permittivity(eps_abs: float, c: PhysicsConstants = PhysicsConstants()) -> float:
    """Dielectric constant as the ratio of absolute to vacuum permittivity."""
    if not eps_abs > 0:
        raise PhysicsDomainError(f"permittivity must be > 0, got {eps_abs}")
    return eps_abs / c.eps0


def reflection_coefficient(kappa1: float, kappa2: float) -> float:
    """Amplitude reflection coefficient at a boundary from medium 1 into medium 2."""
    if not (kappa1 > 0 and kappa2 > 0):
        raise PhysicsDomainError(f"kappa values must be > 0, got {kappa1}, {kappa2}")
    a, b = math.sqrt(kappa1), math.sqrt(kappa2)
    return (a - b) / (a + b)


def depth_from_twt(v: float, t: float) -> float:
    if not v > 0:
        raise PhysicsDomainError(f"velocity must be > 0, got {v}")
    if t < 0:
        raise PhysicsDomainError(f"two-way travel time must be >= 0, got {t}")
    return v * t / 2.0


def twt_from_depth(v: float, d: float) -> float:
    if not v > 0:
        raise PhysicsDomainError(f"velocity must be > 0, got {v}")
    if d < 0:
        raise PhysicsDomainError(f"depth must be >= 0, got {d}")
    return 2.0 * d / v


def velocity_from_kappa(kappa: float) -> float:
    """Low-loss wave velocity c / sqrt(kappa) in m/ns."""
    if not kappa > 0:
        raise PhysicsDomainError(f"kappa must be > 0, got {kappa}")
    return C_LIGHT / math.sqrt(kappa)


def velocity_consistent(material: Material, tol: float = VELOCITY_TOLERANCE) -> bool:
    """True if the stored velocity is within ``tol`` (relative) of c/sqrt(kappa)."""
    expected = velocity_from_kappa(material.kappa)
    return abs(material.velocity - expected) <= tol * expected
