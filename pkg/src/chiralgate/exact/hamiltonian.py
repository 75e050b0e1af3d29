"""Non-Hermitian effective Hamiltonian of the emitter chain.

Each waveguide direction ``c`` couples to the chain through the collective
lowering operator ``O_c = sum_mu A_c[mu, x] |g><x|_mu``. Excitations hop only
downstream in ``c`` (cascaded structure), with phases ``exp(i k0 |z_mu - z_nu|)``;
side emission only enters the diagonal.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from chiralgate.model import Direction, EmitterChain, validate_chain

LEVELS = ("e", "f")
MAX_EMITTERS = 40


class Sector(str, enum.Enum):
    SINGLE = "single"
    DOUBLE = "double"


class ChainError(ValueError):
    pass


@dataclass(frozen=True)
class EffectiveHamiltonian:
    sector: Sector
    matrix: np.ndarray
    basis: tuple

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]


def _require_valid(chain: EmitterChain) -> None:
    report = validate_chain(chain)
    if not report.ok:
        raise ChainError("; ".join(report.violations))


def single_basis(chain: EmitterChain) -> tuple:
    return tuple((mu, x) for mu in range(chain.n_emitters) for x in LEVELS)


def emission_rows(chain: EmitterChain) -> dict:
    """Row vectors ``A_c`` (lowering into direction ``c``) on the single basis.

    Absorption columns are the complex conjugates.
    """
    z = np.asarray(chain.positions)
    scale = np.asarray(chain.rate_scales)
    g_fwd = np.sqrt(chain.gamma0 * scale)
    g_bwd = np.sqrt(chain.gamma_b * scale)
    phase_r = np.exp(-1j * chain.k0d * z)
    rows = {}
    a_r = np.zeros(2 * chain.n_emitters, dtype=complex)
    a_l = np.zeros(2 * chain.n_emitters, dtype=complex)
    a_r[0::2] = g_fwd * phase_r
    a_r[1::2] = g_bwd * phase_r
    a_l[0::2] = g_bwd * np.conj(phase_r)
    a_l[1::2] = g_fwd * np.conj(phase_r)
    rows[Direction.RIGHT] = a_r
    rows[Direction.LEFT] = a_l
    return rows


def single_matrix(chain: EmitterChain) -> np.ndarray:
    n = chain.n_emitters
    dim = 2 * n
    z = np.asarray(chain.positions)
    emitter = np.repeat(np.arange(n), 2)
    h = np.zeros((dim, dim), dtype=complex)
    h[np.diag_indices(dim)] = np.repeat(chain.detunings, 2)
    h[np.diag_indices(dim)] -= 0.5j * chain.gamma_s * np.repeat(chain.rate_scales, 2)
    rows = emission_rows(chain)
    for direction, a in rows.items():
        b = np.conj(a)
        # downstream[i, j]: emitter of i lies after emitter of j along `direction`
        if direction is Direction.RIGHT:
            downstream = z[emitter][:, None] > z[emitter][None, :]
        else:
            downstream = z[emitter][:, None] < z[emitter][None, :]
        same = emitter[:, None] == emitter[None, :]
        weight = np.where(same, 0.5, np.where(downstream, 1.0, 0.0))
        h -= 1j * weight * np.outer(b, a)
    return h


def double_basis(chain: EmitterChain) -> tuple:
    """Two excitations on distinct emitters.

    Without backward emission the numbers of right and left photons are
    separately conserved, so only one-``e``-one-``f`` states are reachable
    from a right+left photon pair.
    """
    sb = single_basis(chain)
    states = []
    for i, j in combinations(range(len(sb)), 2):
        (mu, x), (nu, y) = sb[i], sb[j]
        if mu == nu:
            continue
        if chain.gamma_b == 0.0 and x == y:
            continue
        states.append((i, j))
    return tuple(states)


def double_matrix(chain: EmitterChain, h1: np.ndarray, basis: tuple) -> np.ndarray:
    emitter = np.repeat(np.arange(chain.n_emitters), 2)
    index = {s: k for k, s in enumerate(basis)}
    dim = len(basis)
    h2 = np.zeros((dim, dim), dtype=complex)
    for col, (i, j) in enumerate(basis):
        for moving, spectator in ((i, j), (j, i)):
            for target in np.nonzero(h1[:, moving])[0]:
                if emitter[target] == emitter[spectator]:
                    continue
                key = (min(target, spectator), max(target, spectator))
                row = index.get(key)
                if row is not None:
                    h2[row, col] += h1[target, moving]
    return h2


def absorption_into_double(chain: EmitterChain, basis: tuple) -> dict:
    """Matrices ``B2_c`` mapping single-sector to double-sector amplitudes."""
    emitter = np.repeat(np.arange(chain.n_emitters), 2)
    dim1 = 2 * chain.n_emitters
    index = {s: k for k, s in enumerate(basis)}
    out = {}
    for direction, a in emission_rows(chain).items():
        b = np.conj(a)
        m = np.zeros((len(basis), dim1), dtype=complex)
        for s in range(dim1):
            for t in np.nonzero(b)[0]:
                if emitter[t] == emitter[s]:
                    continue
                row = index.get((min(s, t), max(s, t)))
                if row is not None:
                    m[row, s] += b[t]
        out[direction] = m
    return out


def build_hamiltonian(chain: EmitterChain, sector: Sector | str = Sector.SINGLE) -> EffectiveHamiltonian:
    _require_valid(chain)
    sector = Sector(sector)
    h1 = single_matrix(chain)
    sb = single_basis(chain)
    if sector is Sector.SINGLE:
        return EffectiveHamiltonian(sector, h1, sb)
    if chain.n_emitters > MAX_EMITTERS:
        raise ChainError(f"double sector limited to N <= {MAX_EMITTERS}")
    basis = double_basis(chain)
    labels = tuple((sb[i], sb[j]) for i, j in basis)
    return EffectiveHamiltonian(sector, double_matrix(chain, h1, basis), labels)


@dataclass(frozen=True)
class ChainOperators:
    """Everything the scattering routines need, built once per chain."""

    h1: np.ndarray
    h2: np.ndarray
    emit: dict
    absorb: dict
    absorb2: dict
    emit2: dict

    @classmethod
    def from_chain(cls, chain: EmitterChain) -> "ChainOperators":
        _require_valid(chain)
        if chain.n_emitters > MAX_EMITTERS:
            raise ChainError(f"double sector limited to N <= {MAX_EMITTERS}")
        h1 = single_matrix(chain)
        basis = double_basis(chain)
        h2 = double_matrix(chain, h1, basis)
        emit = emission_rows(chain)
        absorb = {c: np.conj(a) for c, a in emit.items()}
        absorb2 = absorption_into_double(chain, basis)
        emit2 = {c: m.conj().T for c, m in absorb2.items()}
        return cls(h1, h2, emit, absorb, absorb2, emit2)
