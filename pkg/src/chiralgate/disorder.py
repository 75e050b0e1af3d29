"""Monte Carlo over fabrication and operation imperfections.

Every random quantity of realization ``i`` is drawn from its own stream
seeded by ``(rng_seed, i, parameter)``, so a realization does not depend on
which others were run, or in which order.
"""

from __future__ import annotations

import enum
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from chiralgate.gate import ChoiSetup, evaluate, optimize_width
from chiralgate.model import EmitterChain, GateResult


class Parameter(enum.IntEnum):
    RATES = 0
    DETUNINGS = 1
    POSITIONS = 2


@dataclass(frozen=True)
class DisorderSpec:
    """Disorder strengths.

    ``sigma_delta`` is in units of the total decay rate and ``delay_mismatch``
    in units of its inverse. ``spacing_range=None`` keeps the base positions;
    otherwise each spacing is uniform on that interval (lattice units).
    """

    sigma_gamma_db: float = 0.0
    sigma_delta: float = 0.0
    spacing_range: Optional[tuple] = None
    delay_mismatch: float = 0.0
    n_realizations: int = 1
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if self.sigma_gamma_db < 0 or self.sigma_delta < 0:
            raise ValueError("disorder standard deviations must be >= 0")
        if int(self.n_realizations) < 1:
            raise ValueError("n_realizations must be >= 1")
        if self.spacing_range is not None:
            lo, hi = self.spacing_range
            if not 0 < lo <= hi:
                raise ValueError("spacing_range must satisfy 0 < low <= high")
            object.__setattr__(self, "spacing_range", (float(lo), float(hi)))
        object.__setattr__(self, "n_realizations", int(self.n_realizations))

    @classmethod
    def random_spacing(cls, **kwargs) -> "DisorderSpec":
        return cls(spacing_range=(0.5, 1.5), **kwargs)

    @property
    def is_trivial(self) -> bool:
        return (self.sigma_gamma_db == 0 and self.sigma_delta == 0
                and self.spacing_range is None and self.delay_mismatch == 0)


def _stream(spec: DisorderSpec, index: int, parameter: Parameter) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([spec.rng_seed, index, int(parameter)]))


def sample_chain(base: EmitterChain, spec: DisorderSpec, index: int) -> EmitterChain:
    """Realization ``index`` of the disordered chain."""
    n = base.n_emitters
    changes = {}
    if spec.sigma_gamma_db > 0:
        db = _stream(spec, index, Parameter.RATES).normal(0.0, spec.sigma_gamma_db, n)
        changes["rate_scales"] = tuple(np.asarray(base.rate_scales) * 10.0 ** (db / 10.0))
    if spec.sigma_delta > 0:
        shift = _stream(spec, index, Parameter.DETUNINGS).normal(
            0.0, spec.sigma_delta * base.gamma_tot, n)
        changes["detunings"] = tuple(np.asarray(base.detunings) + shift)
    if spec.spacing_range is not None:
        lo, hi = spec.spacing_range
        gaps = _stream(spec, index, Parameter.POSITIONS).uniform(lo, hi, n - 1)
        changes["positions"] = tuple(np.concatenate([[0.0], np.cumsum(gaps)]))
    return base.replace(**changes) if changes else base


def realization_setup(setup: ChoiSetup, spec: DisorderSpec, index: int) -> ChoiSetup:
    out = setup.with_chain(sample_chain(setup.chain, spec, index))
    if spec.delay_mismatch:
        out = out.with_delay(spec.delay_mismatch / setup.chain.gamma_tot)
    return out


@dataclass(frozen=True)
class MonteCarloSummary:
    mean_fidelity: float
    mean_success: float
    std_fidelity: float
    std_success: float
    sem_fidelity: float
    sem_success: float
    records: tuple = field(default=(), repr=False)

    def as_dict(self) -> dict:
        return {
            "mean_fidelity": self.mean_fidelity,
            "mean_success": self.mean_success,
            "std_fidelity": self.std_fidelity,
            "std_success": self.std_success,
            "sem_fidelity": self.sem_fidelity,
            "sem_success": self.sem_success,
            "n_realizations": len(self.records),
        }


def _run_one(args) -> GateResult:
    setup, spec, index, method = args
    return evaluate(realization_setup(setup, spec, index), method)


def summarize(results: Sequence[GateResult]) -> MonteCarloSummary:
    fid = np.array([r.fidelity for r in results])
    suc = np.array([r.success_probability for r in results])
    n = len(results)
    ddof = 1 if n > 1 else 0
    std_f, std_s = float(np.std(fid, ddof=ddof)), float(np.std(suc, ddof=ddof))
    return MonteCarloSummary(float(np.mean(fid)), float(np.mean(suc)), std_f, std_s,
                             std_f / np.sqrt(n), std_s / np.sqrt(n), tuple(results))


def monte_carlo_fidelity(setup: ChoiSetup, spec: DisorderSpec, method: str = "exact",
                         workers: Optional[int] = None) -> MonteCarloSummary:
    """Average gate metrics over ``spec.n_realizations`` disordered copies of ``setup.chain``.

    ``workers > 1`` spreads realizations over processes; results are
    identical to the serial run.
    """
    tasks = [(setup, spec, i, method) for i in range(spec.n_realizations)]
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_one, tasks, chunksize=max(1, len(tasks) // (4 * workers))))
    else:
        results = [_run_one(t) for t in tasks]
    return summarize(results)


@dataclass(frozen=True)
class SweepPoint:
    coordinate: float
    width: float
    result: GateResult


def delay_sweep(setup: ChoiSetup, delays: Sequence[float], method: str = "exact") -> list:
    """Gate metrics versus arrival-time mismatch of the left pulse (units ``1/gamma0``)."""
    return [SweepPoint(float(tau), setup.width, evaluate(setup.with_delay(float(tau)), method))
            for tau in delays]


@dataclass(frozen=True)
class ChiralitySweep:
    points: tuple
    log_success_slope: float
    log_success_r_squared: float
    fidelity_non_decreasing: bool


def log_linear_fit(x: Sequence[float], y: Sequence[float]) -> tuple:
    """Slope and coefficient of determination of ``log(y)`` against ``x``."""
    x = np.asarray(x, dtype=float)
    logy = np.log(np.asarray(y, dtype=float))
    slope, intercept = np.polyfit(x, logy, 1)
    resid = logy - (slope * x + intercept)
    spread = np.sum((logy - logy.mean()) ** 2)
    r2 = 1.0 - np.sum(resid ** 2) / spread if spread > 0 else 1.0
    return float(slope), float(r2)


def chirality_sweep(setup: ChoiSetup, n_values: Sequence[int], gamma_b: float, gamma_s: float,
                    width_range: tuple = (0.02, 0.4), method: str = "exact",
                    noise: float = 1e-3) -> ChiralitySweep:
    """Width-optimized gate metrics versus chain length for imperfect chirality.

    ``noise`` is the fidelity drop still accepted as non-decreasing.
    """
    k0d = setup.chain.k0d
    if abs(k0d / np.pi - round(k0d / np.pi)) > 1e-12:
        raise ValueError("chirality sweeps require k0 d to be a multiple of pi")
    points = []
    for n in n_values:
        chain = setup.chain.replace(n_emitters=int(n), gamma_b=gamma_b, gamma_s=gamma_s)
        width, result = optimize_width(setup.with_chain(chain), width_range, method)
        points.append(SweepPoint(float(n), width, result))
    fids = [p.result.fidelity for p in points]
    slope, r2 = log_linear_fit([p.coordinate for p in points],
                               [p.result.success_probability for p in points])
    monotone = all(b >= a - noise for a, b in zip(fids, fids[1:]))
    return ChiralitySweep(tuple(points), slope, r2, monotone)
