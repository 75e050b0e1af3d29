"""Time-domain reference solution of the same scattering problem.

Integrates the driven amplitude equations of the chain in time (adaptive
Runge-Kutta), reads the outgoing photons out with the input-output relation
and Fourier-transforms them back to the frequency grid. No resolvent is
inverted, which makes it an independent check of ``scattering``.

For a product input ``f(t1) g(t2)`` (right photon ``f``, left photon ``g``):

* ``u_R``/``u_L``: single-excitation response to one photon alone,
  ``i du/dt = H1 u + B f``;
* ``chi``: double excitation, ``i dchi/dt = H2 chi + B2_L g u_R + B2_R f u_L``;
* photon ``c`` emitted at ``tau`` leaves the chain in the state ``K_c(tau)``
  which then decays freely; the later photon ``d`` is read out at
  ``t = tau + s`` with amplitude ``-i A_d exp(-i H1 s) K_c(tau)``.

General inputs are split into product terms with an SVD.
"""

from __future__ import annotations

import numpy as np
from scipy import linalg
from scipy.integrate import solve_ivp

from chiralgate.exact.hamiltonian import ChainOperators
from chiralgate.model import Direction, EmitterChain, FrequencyGrid, TwoPhotonState

R, L = Direction.RIGHT, Direction.LEFT


class OracleNotConverged(RuntimeError):
    pass


RESIDUAL_TOL = 1e-7


def slowest_decay(h1: np.ndarray) -> float:
    """Smallest amplitude decay rate among the single-excitation modes."""
    return float(np.min(-np.linalg.eigvals(h1).imag))


def default_window(chain: EmitterChain, psi: TwoPhotonState) -> tuple:
    """``(t_min, t_max)`` covering the input pulses plus the slowest ring-down.

    Grid spectra are periodic in time with period ``2 pi / spacing``; the
    window must fit inside one period or pulse replicas would re-enter.
    """
    rate = slowest_decay(ChainOperators.from_chain(chain).h1)
    if rate <= 0:
        raise OracleNotConverged("chain has a non-decaying mode")
    period = 2.0 * np.pi / max(psi.grid1.spacing, psi.grid2.spacing)
    t = np.linspace(-0.5 * period, 0.5 * period, 2049)
    intensity = np.zeros_like(t)
    for spec_f, spec_g in _product_terms(psi):
        intensity += np.abs(_to_time(psi.grid1, spec_f, t)) ** 2
        intensity += np.abs(_to_time(psi.grid2, spec_g, t)) ** 2
    if not intensity.any():
        return -1.0, 1.0
    on = np.nonzero(intensity > 1e-14 * intensity.max())[0]
    t_lo, t_hi = t[on[0]] - 2.0, t[on[-1]] + 2.0
    t_max = t_hi + 18.0 / rate
    if t_max - t_lo > period - (t_hi - t_lo):
        raise OracleNotConverged(
            f"grid spacing too coarse: ring-down needs {t_max - t_lo:.1f}, period is {period:.1f}")
    return t_lo, t_max


def _to_time(grid: FrequencyGrid, spectrum: np.ndarray, t: np.ndarray) -> np.ndarray:
    phases = np.exp(-1j * np.outer(t, grid.values))
    return phases @ (grid.weights * spectrum) / np.sqrt(2.0 * np.pi)


def _to_frequency(t: np.ndarray, values: np.ndarray, omegas: np.ndarray) -> np.ndarray:
    """Trapezoid ``(2 pi)^-1/2 int dt exp(i w t) values(t)`` along axis 0."""
    w = np.full(len(t), t[1] - t[0])
    w[0] = w[-1] = 0.5 * (t[1] - t[0])
    phases = np.exp(1j * np.outer(omegas, t))
    return phases @ (w[:, None] * values.reshape(len(t), -1)) / np.sqrt(2.0 * np.pi)


def _lag_rows(h1: np.ndarray, row: np.ndarray, omegas: np.ndarray, s_max: float,
              panels: int, order: int = 12) -> np.ndarray:
    """``-i int_0^s_max ds exp(i w s) row exp(-i H1 s)`` by Gauss-Legendre panels."""
    nodes, weights = np.polynomial.legendre.leggauss(order)
    width = s_max / panels
    x = 0.5 * width * (nodes + 1.0)
    wx = 0.5 * width * weights
    local = np.array([row @ linalg.expm(-1j * h1 * xi) for xi in x])
    step = linalg.expm(-1j * h1 * width)
    start = np.eye(h1.shape[0], dtype=complex)
    out = np.zeros((len(omegas), h1.shape[0]), dtype=complex)
    for p in range(panels):
        s0 = p * width
        vals = local @ start
        phase = np.exp(1j * np.outer(omegas, s0 + x)) * wx
        out += phase @ vals
        start = start @ step
    return -1j * out


def _product_terms(psi: TwoPhotonState, rtol: float = 1e-12):
    u, s, vh = np.linalg.svd(psi.amplitudes)
    keep = s > rtol * s[0] if s[0] > 0 else np.zeros_like(s, dtype=bool)
    return [(s[k] * u[:, k], vh[k]) for k in np.nonzero(keep)[0]]


def _solve_amplitudes(ops: ChainOperators, f, g, t: np.ndarray, rtol: float):
    dim1 = ops.h1.shape[0]
    dim2 = ops.h2.shape[0]
    h1, h2 = ops.h1, ops.h2
    b_r, b_l = ops.absorb[R], ops.absorb[L]
    b2_r, b2_l = ops.absorb2[R], ops.absorb2[L]

    def rhs(time, y):
        ua, ub, chi = y[:dim1], y[dim1:2 * dim1], y[2 * dim1:]
        ft, gt = f(time), g(time)
        dua = h1 @ ua + b_r * ft
        dub = h1 @ ub + b_l * gt
        dchi = h2 @ chi + (b2_l @ ua) * gt + (b2_r @ ub) * ft
        return -1j * np.concatenate([dua, dub, dchi])

    y0 = np.zeros(2 * dim1 + dim2, dtype=complex)
    sol = solve_ivp(rhs, (t[0], t[-1]), y0, method="DOP853", t_eval=t, rtol=rtol,
                    atol=rtol * 1e-3)
    if not sol.success:
        raise OracleNotConverged(sol.message)
    y = sol.y.T
    return y[:, :dim1], y[:, dim1:2 * dim1], y[:, 2 * dim1:]


def _oracle_once(chain: EmitterChain, psi: TwoPhotonState, t_min: float, t_max: float,
                 dt: float, channels: tuple, rtol: float) -> np.ndarray:
    ops = ChainOperators.from_chain(chain)
    c, d = channels
    n_t = int(round((t_max - t_min) / dt)) + 1
    t = np.linspace(t_min, t_max, n_t)
    w1, w2 = psi.grid1.values, psi.grid2.values
    spacing = psi.grid1.spacing
    if not np.isclose(spacing, psi.grid2.spacing, rtol=1e-10):
        raise ValueError("both frequency grids must share one spacing")
    energies = w1[0] + w2[0] + spacing * np.arange(len(w1) + len(w2) - 1)

    s_max = t_max - t_min
    panels = max(8, int(np.ceil(s_max / 0.5)))
    lag = {ch: _lag_rows(ops.h1, ops.emit[ch], np.concatenate([w1, w2]), s_max, panels)
           for ch in {c, d}}
    lag1 = {ch: v[:len(w1)] for ch, v in lag.items()}
    lag2 = {ch: v[len(w1):] for ch, v in lag.items()}

    out = np.zeros((len(w1), len(w2)), dtype=complex)
    for spec_f, spec_g in _product_terms(psi):
        f = lambda x, s=spec_f: _to_time(psi.grid1, s, np.atleast_1d(x))[0]
        g = lambda x, s=spec_g: _to_time(psi.grid2, s, np.atleast_1d(x))[0]
        ua, ub, chi = _solve_amplitudes(ops, f, g, t, rtol)
        left = max(np.abs(ua[-1]).max(), np.abs(ub[-1]).max(),
                   np.abs(chi[-1]).max() if chi.shape[1] else 0.0)
        if left > RESIDUAL_TOL * np.sqrt(max(psi.norm, 1e-300)):
            raise OracleNotConverged(f"excitation {left:.3g} left at the end of the window")
        ft = _to_time(psi.grid1, spec_f, t)
        gt = _to_time(psi.grid2, spec_g, t)

        def readout(ch):
            # one photon in channel ch, the other still pending
            y_from_r = (ft if ch is R else 0.0) - 1j * ua @ ops.emit[ch]
            y_from_l = (gt if ch is L else 0.0) - 1j * ub @ ops.emit[ch]
            return y_from_r, y_from_l

        y = {ch: readout(ch) for ch in {c, d}}

        def leftover(ch):
            y_r, y_l = y[ch]
            k = -1j * chi @ ops.emit2[ch].T if chi.shape[1] else np.zeros_like(ua)
            if ch is L:
                k = k + ua * gt[:, None]
            if ch is R:
                k = k + ub * ft[:, None]
            return k - y_r[:, None] * ub - y_l[:, None] * ua

        y_c_r = _to_frequency(t, y[c][0], w1)[:, 0]
        y_c_l = _to_frequency(t, y[c][1], w1)[:, 0]
        y_d_r = _to_frequency(t, y[d][0], w2)[:, 0]
        y_d_l = _to_frequency(t, y[d][1], w2)[:, 0]
        out += np.outer(y_c_r, y_d_l) + np.outer(y_c_l, y_d_r)

        k_c = _to_frequency(t, leftover(c), energies) * np.sqrt(2.0 * np.pi)
        k_d = _to_frequency(t, leftover(d), energies) * np.sqrt(2.0 * np.pi)
        n2 = len(w2)
        for i in range(len(w1)):
            out[i] += (np.einsum("jk,jk->j", lag2[d], k_c[i:i + n2])
                       + k_d[i:i + n2] @ lag1[c][i]) / (2.0 * np.pi)
    return out


def time_domain_oracle(chain: EmitterChain, psi_in: TwoPhotonState, t_max: float | None = None,
                       dt: float = 0.05, t_min: float | None = None,
                       channels: tuple = (R, L), rtol: float = 1e-10,
                       convergence_tol: float = 1e-6) -> TwoPhotonState:
    """Two-photon output from direct time integration.

    The simulated window is ``[t_min, t_max]``; by default it is chosen from
    the grid spacing and the slowest decay of the chain. The result is recomputed with ``dt / 2``; if the two differ by
    more than ``convergence_tol`` (L2, relative to the input norm) the
    oracle refuses to answer.
    """
    channels = tuple(Direction(x) for x in channels)
    auto_min, auto_max = default_window(chain, psi_in)
    t_min = auto_min if t_min is None else t_min
    t_max = auto_max if t_max is None else t_max
    coarse = _oracle_once(chain, psi_in, t_min, t_max, dt, channels, rtol)
    fine = _oracle_once(chain, psi_in, t_min, t_max, dt / 2, channels, rtol)
    a = psi_in.with_amplitudes(coarse)
    b = psi_in.with_amplitudes(fine)
    scale = max(np.sqrt(psi_in.norm), 1e-300)
    if b.l2_distance(a) > convergence_tol * scale:
        raise OracleNotConverged(f"dt halving changed the result by {b.l2_distance(a):.3g}")
    return b


def single_photon_oracle(chain: EmitterChain, grid: FrequencyGrid, spectrum: np.ndarray,
                         direction: Direction | str = R, t_max: float = 60.0,
                         dt: float = 0.05, rtol: float = 1e-12) -> dict:
    """Output spectra ``{channel: amplitude}`` for one photon sent in ``direction``."""
    direction = Direction(direction)
    ops = ChainOperators.from_chain(chain)
    h1, b = ops.h1, ops.absorb[direction]
    n_t = int(round(2 * t_max / dt)) + 1
    t = np.linspace(-t_max, t_max, n_t)

    def rhs(time, y):
        return -1j * (h1 @ y + b * _to_time(grid, spectrum, np.atleast_1d(time))[0])

    sol = solve_ivp(rhs, (t[0], t[-1]), np.zeros(h1.shape[0], dtype=complex), method="DOP853",
                    t_eval=t, rtol=rtol, atol=rtol * 1e-3)
    if not sol.success:
        raise OracleNotConverged(sol.message)
    amp_in = _to_time(grid, spectrum, t)
    out = {}
    for ch in (R, L):
        y = (amp_in if ch is direction else 0.0) - 1j * sol.y.T @ ops.emit[ch]
        out[ch] = _to_frequency(t, y, grid.values)[:, 0]
    return out


def time_domain_norm(chain: EmitterChain, psi_in: TwoPhotonState, t_max: float | None = None,
                     dt: float = 0.025, t_min: float | None = None) -> float:
    """Total two-photon probability leaving the chain, integrated in time.

    Unlike a frequency-grid norm this has no truncation of far-detuned
    inelastic photons.
    """
    ops = ChainOperators.from_chain(chain)
    auto_min, auto_max = default_window(chain, psi_in)
    t_min = auto_min if t_min is None else t_min
    t_max = auto_max if t_max is None else t_max
    n_t = int(round((t_max - t_min) / dt)) + 1
    t = np.linspace(t_min, t_max, n_t)
    dt = t[1] - t[0]
    wt = np.full(n_t, dt)
    wt[0] = wt[-1] = dt / 2
    # one-sided lag integral from the diagonal: third-order Gregory end weights
    lag_weights = np.full(n_t, dt)
    lag_weights[:3] *= (3.0 / 8.0, 7.0 / 6.0, 23.0 / 24.0)
    props = [np.eye(ops.h1.shape[0], dtype=complex)]
    step = linalg.expm(-1j * ops.h1 * dt)
    for _ in range(n_t - 1):
        props.append(step @ props[-1])
    props = np.array(props)
    total = 0.0
    terms = _product_terms(psi_in)
    if len(terms) != 1:
        raise ValueError("time_domain_norm expects a product input state")
    spec_f, spec_g = terms[0]
    f = lambda x: _to_time(psi_in.grid1, spec_f, np.atleast_1d(x))[0]
    g = lambda x: _to_time(psi_in.grid2, spec_g, np.atleast_1d(x))[0]
    ua, ub, chi = _solve_amplitudes(ops, f, g, t, 1e-10)
    ft = _to_time(psi_in.grid1, spec_f, t)
    gt = _to_time(psi_in.grid2, spec_g, t)
    y = {}
    for ch in (R, L):
        y[ch] = ((ft if ch is R else 0.0) - 1j * ua @ ops.emit[ch],
                 (gt if ch is L else 0.0) - 1j * ub @ ops.emit[ch])
    for c in (R, L):
        k = -1j * chi @ ops.emit2[c].T if chi.shape[1] else np.zeros_like(ua)
        k = k + (ua * gt[:, None] if c is L else ub * ft[:, None])
        k = k - y[c][0][:, None] * ub - y[c][1][:, None] * ua
        for d in (R, L):
            # amplitude on the ordered region tau < t, for every (tau, t)
            decay = np.einsum("k,skl->sl", ops.emit[d], props)  # (lag, dim1)
            for i in range(n_t):
                lags = n_t - i
                conn = -1j * decay[:lags] @ k[i]
                disc = y[c][0][i] * y[d][1][i:] + y[c][1][i] * y[d][0][i:]
                amp = disc + conn
                w = wt[i] * lag_weights[:lags]
                total += np.sum(w * np.abs(amp) ** 2)
    return float(total)
