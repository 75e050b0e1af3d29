"""Infinite-chain polariton model.

Closed-form dispersion, single-photon phases and the elastic/inelastic
two-polariton amplitudes, both as functions of the photon detunings and of
the centre-of-mass / relative momenta ``(K, q)``. Everything is in units of
``gamma0 = 1`` and lattice spacing ``d = 1``.

Momentum convention: a right-mover at detuning ``w1`` has ``k1 - k0 =
inverse_dispersion(w1)``, a left-mover at ``w2`` has ``-k2 - k0 =
inverse_dispersion(w2)``; ``K = (k1 + k2)/2`` and ``q = (k1 - k2)/2``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * np.pi
POLE_TOL = 1e-12
DEGENERACY_EPS = 1e-9


class AnalyticDomainError(ValueError):
    """Input sits on a pole or branch point of a closed-form expression."""


class NoInelasticChannel(ValueError):
    """Degenerate photon energies: the inelastic channel does not exist."""


class OutOfRange(ValueError):
    pass


def _check_pole(x) -> None:
    r = np.remainder(np.asarray(x, dtype=float), TWO_PI)
    if np.any(np.minimum(r, TWO_PI - r) < POLE_TOL):
        raise AnalyticDomainError("momentum offset is a multiple of 2*pi (dispersion pole)")


def dispersion(x):
    """Detuning of the polariton with momentum offset ``x = (k - k0) d``."""
    _check_pole(x)
    x = np.asarray(x, dtype=float)
    return -0.5 * np.cos(x / 2) / np.sin(x / 2)


def inverse_dispersion(omega):
    """Momentum offset in ``(0, 2*pi)`` with ``dispersion(x) == omega``."""
    omega = np.asarray(omega, dtype=float)
    # cot(x/2) = -2 omega, with x/2 in (0, pi)
    return 2.0 * np.arctan2(1.0, -2.0 * omega)


def group_velocity(x):
    """``d omega / dk`` in units of ``gamma0 * d``."""
    _check_pole(x)
    x = np.asarray(x, dtype=float)
    return 0.25 / np.sin(x / 2) ** 2


def single_photon_phase(omega, n_emitters: int):
    """Transmission phase factor ``((i w + 1/2)/(i w - 1/2))**N`` of an ideal chain."""
    if n_emitters < 0:
        raise ValueError("n_emitters must be >= 0")
    omega = np.asarray(omega, dtype=float)
    # power of an exact unit phase keeps |.| == 1 to round-off
    return np.exp(1j * n_emitters * inverse_dispersion(omega))


def t_elastic(omega1, omega2):
    w1 = np.asarray(omega1, dtype=float)
    w2 = np.asarray(omega2, dtype=float)
    return 1.0 - 2.0 * (1.0 - 1j * w1 - 1j * w2) / (1.0 + 2.0 * w1**2 + 2.0 * w2**2)


def t_inelastic(omega1, omega2):
    """Amplitude for scattering into the degenerate relative momentum.

    The denominator carries ``(w1 + w2 - i)``; this is the form that agrees
    with the momentum-space amplitude and satisfies flux continuity.
    """
    w1 = np.asarray(omega1, dtype=float)
    w2 = np.asarray(omega2, dtype=float)
    den = (w1 + w2 - 1j) * (1.0 + 2.0 * w1**2 + 2.0 * w2**2)
    if np.any(np.abs(den) < POLE_TOL):
        raise AnalyticDomainError("pole of the inelastic amplitude")
    return 2j * (w1 - w2) ** 2 / den


def inelastic_energies(omega1: float, omega2: float, eps: float = DEGENERACY_EPS):
    """Outgoing detunings of the inelastic channel; total energy is conserved."""
    w1, w2 = float(omega1), float(omega2)
    if abs(w1 - w2) <= eps:
        raise NoInelasticChannel(f"|w1 - w2| = {abs(w1 - w2):.3g} <= {eps}")
    total = w1 + w2
    out1 = (1.0 + 2.0 * total * w2) / (2.0 * (w2 - w1))
    # fix the second energy by conservation rather than its own formula
    return out1, total - out1


def momenta_from_detunings(omega1, omega2, k0d: float = np.pi):
    """Map photon detunings to ``(q, K)``."""
    x1 = inverse_dispersion(omega1)
    x2 = inverse_dispersion(omega2)
    return k0d + 0.5 * (x1 + x2), 0.5 * (x1 - x2)


def detunings_from_momenta(q, K, k0d: float = np.pi):
    return dispersion(np.asarray(K) + q - k0d), dispersion(np.asarray(q) - K - k0d)


def degenerate_momentum(q: float, K: float, k0d: float = np.pi) -> float:
    """Second relative momentum with the same two-polariton energy at fixed ``K``.

    With ``u = exp(i(K + q - k0))`` and ``v = exp(i(q - K - k0))`` the
    degeneracy condition is a quadratic in ``z = exp(i(q' - q))`` with the
    trivial root ``z = 1``; the other root is returned, reduced to
    ``(-pi, pi]`` relative to ``k0``.
    """
    u = np.exp(1j * (K + q - k0d))
    v = np.exp(1j * (q - K - k0d))
    den = u * v * (u + v - 2.0)
    if abs(den) < POLE_TOL:
        raise AnalyticDomainError("degenerate-momentum expression is singular")
    z = (2.0 * u * v - u - v) / den
    if abs(abs(z) - 1.0) > 1e-8:
        raise AnalyticDomainError("degenerate momentum is not real")
    qp = q + np.angle(z)
    return float(k0d + np.angle(np.exp(1j * (qp - k0d))))


def amplitudes_kq(q: float, K: float, k0d: float = np.pi):
    """Elastic and inelastic amplitudes written in momentum variables."""
    kq = k0d - q
    den_el = 2.0 * np.cos(K) * np.cos(kq) - 2.0
    den_in = ((np.exp(1j * k0d) + np.exp(1j * (k0d + 2 * K)) - 2 * np.exp(1j * (K + q)))
              * (np.cos(K) * np.cos(kq) - 1.0))
    if abs(den_el) < POLE_TOL or abs(den_in) < POLE_TOL:
        raise AnalyticDomainError("pole of the momentum-space amplitudes")
    t_el = (np.exp(2j * kq) - 2 * np.exp(1j * kq) * np.cos(K) + np.cos(2 * K)) / den_el
    t_in = (2 * (np.cos(K) - np.cos(kq)) * np.exp(1j * (k0d + K)) * np.sin(K) ** 2) / den_in
    return complex(t_el), complex(t_in)


def detuning_for_phase(alpha: float) -> float:
    """Common detuning ``w`` for which ``arg t_elastic(w, w) == alpha``."""
    a = float(np.remainder(alpha, TWO_PI))
    if a < 1e-12 or TWO_PI - a < 1e-12:
        raise OutOfRange("alpha = 0 requires infinite detuning")
    return 0.5 / np.tan(a / 2)


@dataclass(frozen=True)
class ScatteringAmplitudes:
    t_el: complex
    t_in: complex
    omega1_out: float
    omega2_out: float
    velocity_ratio: float

    @property
    def continuity_residual(self) -> float:
        return abs(abs(self.t_el) ** 2 + abs(self.t_in) ** 2 * self.velocity_ratio - 1.0)


def scattering_amplitudes(omega1: float, omega2: float) -> ScatteringAmplitudes:
    t_el = complex(t_elastic(omega1, omega2))
    t_in = complex(t_inelastic(omega1, omega2))
    v_in = (group_velocity(inverse_dispersion(omega1))
            + group_velocity(inverse_dispersion(omega2)))
    try:
        w1p, w2p = inelastic_energies(omega1, omega2)
    except NoInelasticChannel:
        # channel closed: t_in == 0, the ratio only needs to be finite
        return ScatteringAmplitudes(t_el, 0j, float(omega1), float(omega2), 1.0)
    v_out = group_velocity(inverse_dispersion(w1p)) + group_velocity(inverse_dispersion(w2p))
    return ScatteringAmplitudes(t_el, t_in, w1p, w2p, float(v_out / v_in))
