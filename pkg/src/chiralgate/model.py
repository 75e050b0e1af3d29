"""Domain types shared across the package.

All frequencies and rates are expressed in units of the forward chiral decay
rate ``gamma0`` (which is 1 unless a physical scale is being documented);
times are in units of ``1/gamma0``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Any, Optional, Sequence

import numpy as np


class Direction(str, enum.Enum):
    RIGHT = "R"
    LEFT = "L"


def _as_tuple(values: Optional[Sequence[float]], n: int, default: float) -> tuple:
    if values is None:
        return tuple(float(default) for _ in range(n))
    return tuple(float(v) for v in values)


@dataclass(frozen=True)
class EmitterChain:
    """N three-level V emitters coupled to a waveguide.

    The ``e`` transition of every emitter couples to right-moving photons at
    rate ``gamma0`` and to left-moving ones at ``gamma_b``; the ``f``
    transition mirrors this. ``gamma_s`` is emission out of the waveguide.
    ``rate_scales`` multiply all three rates of the corresponding emitter.
    Positions are in units of the lattice spacing ``d``.
    """

    n_emitters: int
    gamma0: float = 1.0
    gamma_b: float = 0.0
    gamma_s: float = 0.0
    k0d: float = np.pi
    detunings: Optional[tuple] = None
    rate_scales: Optional[tuple] = None
    positions: Optional[tuple] = None

    def __post_init__(self) -> None:
        n = int(self.n_emitters)
        object.__setattr__(self, "n_emitters", n)
        object.__setattr__(self, "detunings", _as_tuple(self.detunings, n, 0.0))
        object.__setattr__(self, "rate_scales", _as_tuple(self.rate_scales, n, 1.0))
        if self.positions is None:
            object.__setattr__(self, "positions", tuple(float(m) for m in range(n)))
        else:
            object.__setattr__(self, "positions", tuple(float(z) for z in self.positions))

    @classmethod
    def from_beta_directionality(cls, n_emitters: int, beta: float, directionality: float,
                                 **kwargs: Any) -> "EmitterChain":
        """Chain with rates fixed by coupling efficiency and directionality.

        Rates are returned in units of the forward rate, so ``gamma0 == 1`` and
        ``gamma_tot == 1 / (beta * (1 + D) / 2)``.
        """
        gamma_tot = 2.0 / (beta * (1.0 + directionality))
        gamma_b = beta * (1.0 - directionality) / 2.0 * gamma_tot
        gamma_s = (1.0 - beta) * gamma_tot
        return cls(n_emitters=n_emitters, gamma0=1.0, gamma_b=gamma_b, gamma_s=gamma_s, **kwargs)

    @property
    def gamma_tot(self) -> float:
        return self.gamma0 + self.gamma_b + self.gamma_s

    @property
    def beta(self) -> float:
        return (self.gamma0 + self.gamma_b) / self.gamma_tot

    @property
    def directionality(self) -> float:
        return (self.gamma0 - self.gamma_b) / (self.gamma0 + self.gamma_b)

    @property
    def is_perfectly_chiral(self) -> bool:
        return self.gamma_b == 0.0 and self.gamma_s == 0.0

    @property
    def is_uniform(self) -> bool:
        return all(d == 0.0 for d in self.detunings) and all(r == 1.0 for r in self.rate_scales)

    def replace(self, **changes: Any) -> "EmitterChain":
        params = dict(
            n_emitters=self.n_emitters, gamma0=self.gamma0, gamma_b=self.gamma_b,
            gamma_s=self.gamma_s, k0d=self.k0d, detunings=self.detunings,
            rate_scales=self.rate_scales, positions=self.positions,
        )
        if "n_emitters" in changes and changes["n_emitters"] != self.n_emitters:
            # per-emitter lists no longer fit; fall back to defaults
            params.update(detunings=None, rate_scales=None, positions=None)
        params.update(changes)
        return EmitterChain(**params)

    def summary(self) -> dict:
        return {
            "n_emitters": self.n_emitters,
            "gamma0": self.gamma0,
            "gamma_b": self.gamma_b,
            "gamma_s": self.gamma_s,
            "k0d": self.k0d,
            "beta": self.beta,
            "directionality": self.directionality,
            "uniform": self.is_uniform,
        }


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple = ()

    def __bool__(self) -> bool:
        # truthy when the chain is usable
        return not self.violations

    @property
    def ok(self) -> bool:
        return not self.violations


def validate_chain(chain: EmitterChain) -> ValidationReport:
    """Collect every invariant violation of ``chain``; never raises."""
    problems = []
    n = chain.n_emitters
    if n < 1:
        problems.append("n_emitters must be >= 1")
    if not chain.gamma0 > 0:
        problems.append("non-positive gamma0")
    if chain.gamma_b < 0:
        problems.append("negative gamma_b")
    if chain.gamma_s < 0:
        problems.append("negative gamma_s")
    for name in ("detunings", "rate_scales", "positions"):
        values = getattr(chain, name)
        if len(values) != n:
            problems.append(f"{name} has length {len(values)}, expected {n}")
        if not all(np.isfinite(values)):
            problems.append(f"{name} contains non-finite values")
    if any(r <= 0 for r in chain.rate_scales):
        problems.append("non-positive rate")
    z = np.asarray(chain.positions)
    if z.size > 1 and np.any(np.diff(z) <= 0):
        problems.append("positions not increasing")
    if not np.isfinite(chain.k0d):
        problems.append("non-finite k0d")
    return ValidationReport(tuple(problems))


@dataclass(frozen=True)
class PulseSpec:
    """Gaussian single-photon spectral envelope.

    ``psi(w) ~ exp(-(w - center)**2 / (4 width**2)) * exp(i w delay)`` so that
    ``width`` is the standard deviation of the spectral intensity.
    """

    center: float = 0.0
    width: float = 0.05
    delay: float = 0.0
    direction: Direction = Direction.RIGHT

    def __post_init__(self) -> None:
        if not self.width > 0:
            raise ValueError(f"pulse width must be positive, got {self.width}")
        object.__setattr__(self, "direction", Direction(self.direction))

    def amplitude(self, omega: np.ndarray) -> np.ndarray:
        omega = np.asarray(omega, dtype=float)
        norm = (2.0 * np.pi * self.width**2) ** -0.25
        return norm * np.exp(-((omega - self.center) ** 2) / (4.0 * self.width**2)
                             + 1j * omega * self.delay)

    def grid(self, n_points: int = 257, span: float = 8.0) -> "FrequencyGrid":
        return FrequencyGrid(self.center - span * self.width, self.center + span * self.width,
                             n_points)

    def summary(self) -> dict:
        return {"center": self.center, "width": self.width, "delay": self.delay,
                "direction": self.direction.value}


@dataclass(frozen=True)
class FrequencyGrid:
    min: float
    max: float
    n_points: int

    def __post_init__(self) -> None:
        if not self.min < self.max:
            raise ValueError("grid requires min < max")
        if int(self.n_points) < 2:
            raise ValueError("grid requires at least 2 points")
        object.__setattr__(self, "n_points", int(self.n_points))

    @property
    def values(self) -> np.ndarray:
        return np.linspace(self.min, self.max, self.n_points)

    @property
    def spacing(self) -> float:
        return (self.max - self.min) / (self.n_points - 1)

    @property
    def weights(self) -> np.ndarray:
        w = np.full(self.n_points, self.spacing)
        w[0] = w[-1] = 0.5 * self.spacing
        return w

    def integrate(self, values: np.ndarray) -> complex:
        return np.sum(self.weights * values)

    def mask(self, lo: float, hi: float) -> np.ndarray:
        v = self.values
        return (v >= lo) & (v <= hi)


def trapezoid_2d(grid1: FrequencyGrid, grid2: FrequencyGrid, values: np.ndarray) -> complex:
    return grid1.weights @ values @ grid2.weights


@dataclass(frozen=True)
class TwoPhotonState:
    """Joint spectral amplitude of one right- and one left-moving photon.

    ``amplitudes[i, j]`` is the amplitude at ``(grid1.values[i], grid2.values[j])``.
    ``norm`` caches the trapezoidal integral of ``|psi|**2``.
    """

    grid1: FrequencyGrid
    grid2: FrequencyGrid
    amplitudes: np.ndarray
    norm: float = field(default=float("nan"))

    def __post_init__(self) -> None:
        amps = np.array(self.amplitudes, dtype=complex)
        if amps.shape != (self.grid1.n_points, self.grid2.n_points):
            raise ValueError(f"amplitude shape {amps.shape} does not match grids")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)
        object.__setattr__(self, "norm", float(np.real(trapezoid_2d(self.grid1, self.grid2,
                                                                    np.abs(amps) ** 2))))

    @classmethod
    def product(cls, pulse1: PulseSpec, pulse2: PulseSpec, grid1: FrequencyGrid,
                grid2: FrequencyGrid) -> "TwoPhotonState":
        amps = np.outer(pulse1.amplitude(grid1.values), pulse2.amplitude(grid2.values))
        return cls(grid1, grid2, amps)

    def with_amplitudes(self, amplitudes: np.ndarray) -> "TwoPhotonState":
        return TwoPhotonState(self.grid1, self.grid2, amplitudes)

    def inner(self, other: "TwoPhotonState", mask: Optional[np.ndarray] = None) -> complex:
        """``<self|other>``, optionally restricted to a boolean ``mask``."""
        integrand = np.conj(self.amplitudes) * other.amplitudes
        if mask is not None:
            integrand = np.where(mask, integrand, 0.0)
        return complex(trapezoid_2d(self.grid1, self.grid2, integrand))

    def probability(self, mask: Optional[np.ndarray] = None) -> float:
        return float(np.real(self.inner(self, mask)))

    def l2_distance(self, other: "TwoPhotonState") -> float:
        diff = self.amplitudes - other.amplitudes
        return float(np.sqrt(np.real(trapezoid_2d(self.grid1, self.grid2, np.abs(diff) ** 2))))


@dataclass(frozen=True)
class GateResult:
    fidelity: float
    success_probability: float
    fidelity_unfiltered: float
    target_phase: float
    metadata: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        for name in ("fidelity", "success_probability", "fidelity_unfiltered"):
            value = float(getattr(self, name))
            # quadrature round-off can push a probability a hair past 1
            if -1e-9 <= value < 0.0 or 1.0 < value <= 1.0 + 1e-9:
                value = min(max(value, 0.0), 1.0)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name}={value} outside [0, 1]")
            object.__setattr__(self, name, value)

    @property
    def infidelity(self) -> float:
        return 1.0 - self.fidelity

    def as_dict(self) -> dict:
        return {
            "fidelity": self.fidelity,
            "success_probability": self.success_probability,
            "fidelity_unfiltered": self.fidelity_unfiltered,
            "target_phase": self.target_phase,
            **{k: v for k, v in self.metadata.items() if isinstance(v, (int, float, str, bool))},
        }
