"""Exact finite-N scattering from resolvents of the effective Hamiltonian.

Conventions: a photon's spectral amplitude ``psi(w)`` relates to its
arrival-time amplitude by ``phi(t) = (2 pi)**-0.5 * int psi(w) exp(-i w t) dw``.
The incoming pair is one right-mover (first axis) and one left-mover
(second axis). For the pair, the output in channels ``(c, d)`` is

    S_cR(p1) S_dL(p2) psi(p1, p2) + S_cL(p1) S_dR(p2) psi(p2, p1)
        + int dk T_cd(p1, p2; k, p1 + p2 - k) psi(k, p1 + p2 - k)

with ``T = M / (2 pi)`` and ``M`` assembled from single- and
double-excitation resolvents (see ``two_photon_kernel``).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import linalg

from chiralgate.exact.hamiltonian import ChainOperators
from chiralgate.model import Direction, EmitterChain, FrequencyGrid, TwoPhotonState

R, L = Direction.RIGHT, Direction.LEFT
MIN_POINTS_ACROSS_PULSE = 16


class CoarseGridWarning(UserWarning):
    pass


class NumericalFailure(RuntimeError):
    pass


def _single_resolvent_columns(h1: np.ndarray, omegas: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """``(w - H1)^-1 rhs`` for every ``w``; shape ``(len(omegas), dim1)``."""
    dim = h1.shape[0]
    mats = omegas[:, None, None] * np.eye(dim)[None] - h1[None]
    try:
        return np.linalg.solve(mats, np.broadcast_to(rhs, (len(omegas), dim))[..., None])[..., 0]
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure("singular single-excitation resolvent") from exc


def _single_resolvent_rows(h1: np.ndarray, omegas: np.ndarray, lhs: np.ndarray) -> np.ndarray:
    """``lhs (w - H1)^-1`` for every ``w``."""
    return _single_resolvent_columns(h1.T, omegas, lhs)


class DoubleResolvent:
    """Applies ``(E - H2)^-1`` through a complex Schur form of ``H2``."""

    def __init__(self, h2: np.ndarray):
        self.dim = h2.shape[0]
        if self.dim:
            self.t, self.q = linalg.schur(h2, output="complex")

    def solve(self, energy: float, x: np.ndarray) -> np.ndarray:
        if self.dim == 0:
            return np.zeros(0, dtype=complex)
        y = self.q.conj().T @ x
        y = linalg.solve_triangular(energy * np.eye(self.dim) - self.t, y)
        return self.q @ y


@dataclass(frozen=True)
class SinglePhotonS:
    """Single-photon transmission and reflection sampled on a grid."""

    direction: Direction
    grid: FrequencyGrid
    transmission: np.ndarray
    reflection: np.ndarray

    def t(self, omega) -> np.ndarray:
        return np.interp(omega, self.grid.values, self.transmission.real) + 1j * np.interp(
            omega, self.grid.values, self.transmission.imag)

    def r(self, omega) -> np.ndarray:
        return np.interp(omega, self.grid.values, self.reflection.real) + 1j * np.interp(
            omega, self.grid.values, self.reflection.imag)


def single_photon_matrix(ops: ChainOperators, omegas: np.ndarray) -> dict:
    """``S[(c, a)](w) = delta_ca - i A_c (w - H1)^-1 B_a``."""
    omegas = np.atleast_1d(np.asarray(omegas, dtype=float))
    out = {}
    for a in (R, L):
        cols = _single_resolvent_columns(ops.h1, omegas, ops.absorb[a])
        for c in (R, L):
            out[(c, a)] = (1.0 if c == a else 0.0) - 1j * cols @ ops.emit[c]
    return out


def single_photon_s(chain: EmitterChain, direction: Direction | str,
                    grid: FrequencyGrid) -> SinglePhotonS:
    direction = Direction(direction)
    ops = ChainOperators.from_chain(chain)
    s = single_photon_matrix(ops, grid.values)
    other = L if direction is R else R
    return SinglePhotonS(direction, grid, s[(direction, direction)], s[(other, direction)])


def _antidiagonal_sum(weights: np.ndarray, left: Optional[np.ndarray],
                      right: Optional[np.ndarray]) -> np.ndarray:
    """``out[s] = sum_{i+j=s} weights[i, j] * left[i] * right[j]``.

    ``left`` has shape ``(n1, m)`` and ``right`` ``(n2, m)`` (or a broadcastable
    single column); either may be None.
    """
    n1, n2 = weights.shape
    m = max(x.shape[1] for x in (left, right) if x is not None)
    out = np.zeros((n1 + n2 - 1, m), dtype=complex)
    for i in range(n1):
        block = weights[i][:, None]
        if right is not None:
            block = block * right
        if left is not None:
            block = block * left[i][None, :]
        out[i:i + n2] += block
    return out


def _check_grids(psi: TwoPhotonState) -> float:
    h1, h2 = psi.grid1.spacing, psi.grid2.spacing
    if not np.isclose(h1, h2, rtol=1e-10, atol=0.0):
        raise ValueError("both frequency grids must share one spacing")
    return h1


class TwoPhotonScatterer:
    """Frequency-domain two-photon scattering for one chain."""

    def __init__(self, chain: EmitterChain):
        self.chain = chain
        self.ops = ChainOperators.from_chain(chain)
        self.g2 = DoubleResolvent(self.ops.h2)

    def single(self, omegas: np.ndarray) -> dict:
        return single_photon_matrix(self.ops, omegas)

    def kernel(self, p1: float, p2: float, k1: float, k2: float,
               channels: tuple = (R, L)) -> complex:
        """Connected amplitude ``T_cd(p1, p2; k1, k2)``; energy conservation is implied."""
        ops = self.ops
        c, d = (Direction(x) for x in channels)
        energy = k1 + k2
        u = _single_resolvent_columns(ops.h1, np.array([k1]), ops.absorb[R])[0]
        w = _single_resolvent_columns(ops.h1, np.array([k2]), ops.absorb[L])[0]
        chi = self.g2.solve(energy, ops.absorb2[L] @ u + ops.absorb2[R] @ w)

        def vertex(ch):
            return (-1j * (ops.emit2[ch] @ chi) + 1j * w * (ops.emit[ch] @ u)
                    + 1j * u * (ops.emit[ch] @ w))

        row_d = _single_resolvent_rows(ops.h1, np.array([p2]), ops.emit[d])[0]
        row_c = _single_resolvent_rows(ops.h1, np.array([p1]), ops.emit[c])[0]
        return complex(row_d @ vertex(c) + row_c @ vertex(d)) / (2.0 * np.pi)

    def scatter(self, psi: TwoPhotonState, channels: tuple = (R, L)) -> TwoPhotonState:
        c, d = (Direction(x) for x in channels)
        ops = self.ops
        spacing = _check_grids(psi)
        _warn_if_coarse(psi)
        w1, w2 = psi.grid1.values, psi.grid2.values
        amps = psi.amplitudes

        s1 = self.single(w1)
        s2 = self.single(w2)
        out = s1[(c, R)][:, None] * s2[(d, L)][None, :] * amps
        crossed = s1[(c, L)][:, None] * s2[(d, R)][None, :]
        if np.any(np.abs(crossed) > 0):
            if psi.grid1 != psi.grid2:
                raise ValueError("reflections need identical grids for both photons")
            out = out + crossed * amps.T

        u = _single_resolvent_columns(ops.h1, w1, ops.absorb[R])
        w = _single_resolvent_columns(ops.h1, w2, ops.absorb[L])
        weights = amps * spacing
        u_sum = _antidiagonal_sum(weights, u, None)
        w_sum = _antidiagonal_sum(weights, None, w)
        energies = w1[0] + w2[0] + spacing * np.arange(u_sum.shape[0])
        drive = u_sum @ ops.absorb2[L].T + w_sum @ ops.absorb2[R].T
        chi = np.zeros((len(energies), self.g2.dim), dtype=complex)
        for k, (e, x) in enumerate(zip(energies, drive)):
            chi[k] = self.g2.solve(e, x)

        vertices = {}
        for ch in {c, d}:
            sp_a = (u @ ops.emit[ch])[:, None]
            sp_b = (w @ ops.emit[ch])[:, None]
            v = 1j * _antidiagonal_sum(weights, sp_a, w) + 1j * _antidiagonal_sum(weights, u, sp_b)
            if chi.shape[1]:
                v = v - 1j * chi @ ops.emit2[ch].T
            vertices[ch] = v

        rows_d = _single_resolvent_rows(ops.h1, w2, ops.emit[d])
        rows_c = _single_resolvent_rows(ops.h1, w1, ops.emit[c])
        n2 = len(w2)
        conn = np.empty_like(out)
        for i in range(len(w1)):
            conn[i] = (np.einsum("jk,jk->j", rows_d, vertices[c][i:i + n2])
                       + vertices[d][i:i + n2] @ rows_c[i])
        out = out + conn / (2.0 * np.pi)
        if not np.all(np.isfinite(out)):
            raise NumericalFailure("non-finite output amplitudes")
        return psi.with_amplitudes(out)


def _warn_if_coarse(psi: TwoPhotonState) -> None:
    for grid, marginal in ((psi.grid1, np.abs(psi.amplitudes) ** 2 @ psi.grid2.weights),
                           (psi.grid2, psi.grid1.weights @ np.abs(psi.amplitudes) ** 2)):
        total = np.sum(marginal * grid.weights)
        if total <= 0:
            continue
        mean = np.sum(grid.values * marginal * grid.weights) / total
        std = np.sqrt(max(np.sum((grid.values - mean) ** 2 * marginal * grid.weights) / total, 0))
        across = round(2.0 * std / grid.spacing, 1)  # quadrature slightly underestimates std
        if across < MIN_POINTS_ACROSS_PULSE:
            warnings.warn(f"only {across:.1f} grid points across the pulse",
                          CoarseGridWarning, stacklevel=3)


def scatter_state(chain: EmitterChain, psi_in: TwoPhotonState,
                  channels: tuple = (R, L)) -> TwoPhotonState:
    return TwoPhotonScatterer(chain).scatter(psi_in, channels)


def scatter_all_channels(chain: EmitterChain, psi_in: TwoPhotonState) -> dict:
    """Outputs for ``RL``, ``RR`` and ``LL``; the latter two are bosonic (norm counts half)."""
    sc = TwoPhotonScatterer(chain)
    return {pair: sc.scatter(psi_in, pair) for pair in ((R, L), (R, R), (L, L))}


def total_probability(outputs: dict) -> float:
    total = 0.0
    for (c, d), state in outputs.items():
        total += state.norm * (0.5 if c == d else 1.0)
    return total


def two_photon_kernel(chain: EmitterChain, omega1_in: float, omega2_in: float,
                      omega1_out: float, channels: tuple = (R, L)) -> complex:
    omega2_out = omega1_in + omega2_in - omega1_out
    return TwoPhotonScatterer(chain).kernel(omega1_out, omega2_out, omega1_in, omega2_in, channels)
