import numpy as np
import pytest

from chiralgate.disorder import (
    DisorderSpec,
    chirality_sweep,
    delay_sweep,
    log_linear_fit,
    monte_carlo_fidelity,
    sample_chain,
)
from chiralgate.gate import ChoiSetup, fidelity_exact
from chiralgate.model import EmitterChain

N4_WIDTH = 0.113  # near the optimum for four ideal emitters


def test_trivial_spec_returns_base_chain():
    base = EmitterChain(4)
    assert sample_chain(base, DisorderSpec(), 7) == base


def test_rate_fluctuations_have_requested_db_spread():
    base = EmitterChain(100)
    spec = DisorderSpec(sigma_gamma_db=1.2, rng_seed=99)
    db = np.concatenate([10 * np.log10(sample_chain(base, spec, i).rate_scales) for i in range(100)])
    assert np.std(db) == pytest.approx(1.2, abs=0.05)


def test_detuning_spread_in_units_of_total_rate():
    base = EmitterChain(100, gamma_s=1.0)
    spec = DisorderSpec(sigma_delta=0.2, rng_seed=3)
    d = np.concatenate([sample_chain(base, spec, i).detunings for i in range(100)])
    assert np.std(d) == pytest.approx(0.2 * base.gamma_tot, rel=0.05)


def test_spacings_uniform_in_range():
    chain = sample_chain(EmitterChain(500), DisorderSpec.random_spacing(rng_seed=5), 0)
    gaps = np.diff(chain.positions)
    assert chain.positions[0] == 0.0
    assert gaps.min() >= 0.5 and gaps.max() <= 1.5
    assert np.mean(gaps) == pytest.approx(1.0, abs=0.05)


def test_realizations_are_deterministic_and_order_free():
    spec = DisorderSpec.random_spacing(sigma_gamma_db=1.0, sigma_delta=0.1, rng_seed=11)
    base = EmitterChain(4)
    forward = [sample_chain(base, spec, i) for i in range(5)]
    backward = [sample_chain(base, spec, i) for i in reversed(range(5))][::-1]
    assert forward == backward
    assert forward[0] != forward[1]
    other_seed = sample_chain(base, DisorderSpec.random_spacing(sigma_gamma_db=1.0, sigma_delta=0.1,
                                                                rng_seed=12), 0)
    assert other_seed != forward[0]


def test_spec_validation():
    with pytest.raises(ValueError):
        DisorderSpec(sigma_gamma_db=-1)
    with pytest.raises(ValueError):
        DisorderSpec(n_realizations=0)
    with pytest.raises(ValueError):
        DisorderSpec(spacing_range=(1.0, 0.5))


def test_zero_disorder_equals_direct_computation():
    setup = ChoiSetup.create(EmitterChain(4), N4_WIDTH)
    mc = monte_carlo_fidelity(setup, DisorderSpec(n_realizations=3))
    direct = fidelity_exact(setup)
    assert mc.mean_fidelity == direct.fidelity
    assert mc.mean_success == direct.success_probability
    assert mc.std_fidelity == 0.0


def test_parallel_run_is_bit_identical():
    setup = ChoiSetup.create(EmitterChain(3), 0.13)
    spec = DisorderSpec.random_spacing(sigma_gamma_db=1.2, sigma_delta=0.2, n_realizations=6,
                                       rng_seed=4)
    serial = monte_carlo_fidelity(setup, spec)
    parallel = monte_carlo_fidelity(setup, spec, workers=2)
    assert serial.as_dict() == parallel.as_dict()


def test_position_jitter_irrelevant_under_perfect_chirality():
    setup = ChoiSetup.create(EmitterChain(4), N4_WIDTH)
    mc = monte_carlo_fidelity(setup, DisorderSpec.random_spacing(n_realizations=4, rng_seed=8))
    assert abs(mc.mean_fidelity - fidelity_exact(setup).fidelity) < 1e-10


def test_delay_sweep_limits():
    setup = ChoiSetup.create(EmitterChain(4), N4_WIDTH)
    points = delay_sweep(setup, [0.0, 3.0, 100.0])
    base, short, far = (p.result for p in points)
    assert base.fidelity == fidelity_exact(setup).fidelity
    assert short.fidelity > 0.9 * base.fidelity
    assert far.fidelity == pytest.approx(0.25, abs=0.01)
    assert far.success_probability == pytest.approx(1.0, abs=0.01)


def test_log_linear_fit_is_exact_for_exponentials():
    n = np.arange(2, 13)
    slope, r2 = log_linear_fit(n, 0.9 * np.exp(-0.03 * n))
    assert slope == pytest.approx(-0.03) and r2 == pytest.approx(1.0)


def test_chirality_sweep_requires_bragg_free_spacing():
    setup = ChoiSetup.create(EmitterChain(2, k0d=np.pi / 2), 0.1)
    with pytest.raises(ValueError):
        chirality_sweep(setup, [2, 3], 0.01, 0.01)


def test_lossless_sweep_has_no_exponential_decay():
    setup = ChoiSetup.create(EmitterChain(2), 0.1)
    sweep = chirality_sweep(setup, [2, 4, 6], 0.0, 0.0, (0.05, 0.3))
    succ = [p.result.success_probability for p in sweep.points]
    assert min(succ) > 0.95
    assert sweep.fidelity_non_decreasing


@pytest.mark.xfail(reason="strong rate disorder shifts each photon's group delay away from "
                          "the ideal-chain reference, so F drops well below flat", strict=False)
def test_fidelity_flat_up_to_strong_rate_disorder():
    setup = ChoiSetup.create(EmitterChain(4), N4_WIDTH)
    clean = fidelity_exact(setup).fidelity
    mc = monte_carlo_fidelity(setup, DisorderSpec(sigma_gamma_db=5.0, n_realizations=20, rng_seed=1))
    assert mc.mean_fidelity > clean - 0.05
