"""Volume-fluctuation probabilities of a dilute photon gas and the classical baseline.

The relative probability that ``N`` photons spread over ``v0`` are all
found in the sub-volume ``v`` is ``(v/v0)**N``.  Linearizing in a small
extra volume ``dv`` (the detector's sensitive region) gives the relative
probability ``N dv / v`` that a detector attached to ``dv`` sees photons;
averaged over the ensemble, ``N`` becomes ``Z * nbar`` for ``Z`` cells.

For classical particles the mean count in a detection volume is
``rho * u * tau * S`` and the count itself is Poisson.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

from .counting import poisson_pmf
from .distributions import DEFAULT_POLICY, TruncatedPmf, TruncationPolicy, _check_nbar
from .errors import LinearizationDomainError

__all__ = [
    "LocalizationScenario",
    "ClassicalBeam",
    "MAX_DV_OVER_V",
    "volume_occupation_ratio",
    "relative_detection_probability",
    "linearization_error_bound",
    "classical_mean_count",
    "classical_count_pmf",
]

# first-order expansion in dv/v is trusted up to this ratio
MAX_DV_OVER_V = 0.1


def _nonneg(name: str, value) -> float:
    value = float(value)
    if not math.isfinite(value) or value < 0:
        raise ValueError(f"{name} must be finite and >= 0, got {value!r}")
    return value


@dataclass(frozen=True)
class LocalizationScenario:
    """Photon gas of ``n_photons`` in ``v0``, probed in ``v`` with detector volume ``delta_v``.

    Either ``n_photons`` is given, or ``z_cells`` together with ``nbar``
    for the ensemble-averaged form.
    """

    v0: float = 1.0
    v: float = 1.0
    delta_v: float = 0.0
    n_photons: Optional[int] = None
    z_cells: Optional[int] = None
    nbar: Optional[float] = None

    def __post_init__(self):
        if not (math.isfinite(self.v0) and self.v0 > 0):
            raise ValueError(f"v0 must be > 0, got {self.v0!r}")
        if not (math.isfinite(self.v) and 0 < self.v <= self.v0):
            raise ValueError(f"v must satisfy 0 < v <= v0, got v={self.v!r}, v0={self.v0!r}")
        _nonneg("delta_v", self.delta_v)
        if self.n_photons is not None and (int(self.n_photons) != self.n_photons or self.n_photons < 0):
            raise ValueError(f"n_photons must be a nonnegative integer, got {self.n_photons!r}")
        if self.z_cells is not None and (int(self.z_cells) != self.z_cells or self.z_cells < 1):
            raise ValueError(f"z_cells must be a positive integer, got {self.z_cells!r}")
        if self.nbar is not None:
            _check_nbar(self.nbar)

    @property
    def dv_over_v(self) -> float:
        return self.delta_v / self.v


@dataclass(frozen=True)
class ClassicalBeam:
    """Uniform flow of classical particles onto a detector."""

    rho: float
    u: float
    tau: float
    area: float

    def __post_init__(self):
        for name in ("rho", "u", "tau", "area"):
            _nonneg(name, getattr(self, name))


def volume_occupation_ratio(scenario: LocalizationScenario) -> float:
    """``W = (v/v0)**N``."""
    if scenario.n_photons is None:
        raise ValueError("volume_occupation_ratio needs n_photons")
    return (scenario.v / scenario.v0) ** scenario.n_photons


def relative_detection_probability(scenario: LocalizationScenario) -> float:
    """``Q_d/Q_v = N dv/v``, or ``Z nbar dv/v`` when only ``(Z, nbar)`` are set.

    Raises :class:`LinearizationDomainError` when ``dv/v`` exceeds
    :data:`MAX_DV_OVER_V`.
    """
    ratio = scenario.dv_over_v
    if ratio > MAX_DV_OVER_V:
        raise LinearizationDomainError(
            f"dv/v = {ratio:.6g} exceeds the linearization limit {MAX_DV_OVER_V}"
        )
    if scenario.n_photons is not None:
        return scenario.n_photons * ratio
    if scenario.z_cells is None or scenario.nbar is None:
        raise ValueError("need n_photons, or both z_cells and nbar")
    return scenario.z_cells * scenario.nbar * ratio


def linearization_error_bound(scenario: LocalizationScenario) -> float:
    """``N (dv/v)**2 / 2``, bounding ``N dv/v - N ln(1 + dv/v)``.

    This is the error of the linear form in the log of the occupation
    ratio; the ratio itself deviates at order ``N**2 (dv/v)**2 / 2``.
    """
    n = scenario.n_photons
    if n is None:
        if scenario.z_cells is None or scenario.nbar is None:
            raise ValueError("need n_photons, or both z_cells and nbar")
        n = scenario.z_cells * scenario.nbar
    return n * scenario.dv_over_v**2 / 2.0


def classical_mean_count(beam: ClassicalBeam) -> float:
    """Mean particles in the detection volume, ``rho * u * tau * area``."""
    return beam.rho * beam.u * beam.tau * beam.area


def classical_count_pmf(beam: ClassicalBeam, policy: TruncationPolicy = DEFAULT_POLICY) -> TruncatedPmf:
    """Poisson count of independent classical particles."""
    return poisson_pmf(classical_mean_count(beam), policy)
