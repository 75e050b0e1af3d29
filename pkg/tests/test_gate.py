import warnings
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, strategies as st

from chiralgate.gate import (
    BoundaryOptimumWarning,
    ChoiSetup,
    FrequencyWindow,
    branch_overlaps,
    combine_branches,
    fidelity_analytic,
    fidelity_exact,
    optimize_width,
    reference_phase,
)
from chiralgate.model import EmitterChain, PulseSpec


def test_reference_phase_on_resonance_is_one():
    for n in range(1, 8):
        assert reference_phase(0.0, 0.0, EmitterChain(n)) == pytest.approx(1.0)


@given(st.floats(-5, 5), st.floats(-5, 5), st.integers(1, 20))
def test_reference_phase_unit_modulus(w1, w2, n):
    assert abs(abs(reference_phase(w1, w2, EmitterChain(n))) - 1) < 1e-12


def test_headline_values_frozen():
    setup = ChoiSetup.create(EmitterChain(12), 0.05)
    exact = fidelity_exact(setup)
    assert exact.fidelity == pytest.approx(0.994640660501702, abs=1e-7)
    assert exact.success_probability == pytest.approx(0.9949660926614983, abs=1e-7)
    assert fidelity_analytic(setup).fidelity == pytest.approx(0.9950027856176399, abs=1e-9)


def test_analytic_formula_components():
    r = fidelity_analytic(ChoiSetup.create(EmitterChain(12), 0.05))
    t_av = r.metadata["t_av_re"] + 1j * r.metadata["t_av_im"]
    t_norm = r.metadata["t_norm"]
    assert r.success_probability == pytest.approx((3 + t_norm) / 4)
    assert r.fidelity == pytest.approx(abs(3 - t_av) ** 2 / (4 * (3 + t_norm)))


def test_analytic_limit_is_monotone():
    widths = [0.2, 0.1, 0.05, 0.02, 0.01, 0.005]
    results = [fidelity_analytic(ChoiSetup.create(EmitterChain(1), w)) for w in widths]
    fids = [r.fidelity for r in results]
    succ = [r.success_probability for r in results]
    assert np.all(np.diff(fids) > 0) and np.all(np.diff(succ) > 0)
    assert 1 - fids[-1] < 1e-4 and 1 - succ[-1] < 1e-4


def test_more_emitters_help_and_converge_to_analytic():
    f_an = fidelity_analytic(ChoiSetup.create(EmitterChain(1), 0.05)).fidelity
    exact = {n: fidelity_exact(ChoiSetup.create(EmitterChain(n), 0.05)).fidelity for n in (4, 8, 12)}
    assert exact[12] > exact[8] > exact[4]
    gaps = [abs(exact[n] - f_an) for n in (4, 8, 12)]
    assert gaps[0] > gaps[1] > gaps[2]


@pytest.mark.parametrize("n, width", [(4, 0.1), (12, 0.05), (8, 0.2)])
def test_filtering_never_hurts(n, width):
    r = fidelity_exact(ChoiSetup.create(EmitterChain(n), width))
    assert 0 <= r.fidelity_unfiltered <= r.fidelity <= 1
    assert 0 <= r.success_probability <= 1


def test_unfiltered_setup_has_unit_success():
    r = fidelity_exact(ChoiSetup.create(EmitterChain(4), 0.1, filter_sigmas=None))
    assert r.success_probability == 1.0
    assert r.fidelity == r.fidelity_unfiltered


def test_global_and_local_phases_are_ignored():
    setup = ChoiSetup.create(EmitterChain(6), 0.08)
    b = branch_overlaps(setup)
    base = combine_branches(b, setup.target_phase)
    theta_r, theta_l, glob = 0.7, -1.3, 2.1

    def rotate(ov):
        zr, zl = np.exp(1j * theta_r), np.exp(1j * theta_l)
        out = {"vacuum": ov["vacuum"], "R": zr * ov["R"], "L": zl * ov["L"], "RL": zr * zl * ov["RL"]}
        return {k: np.exp(1j * glob) * v for k, v in out.items()}

    turned = replace(b, overlap=rotate(b.overlap), overlap_unfiltered=rotate(b.overlap_unfiltered))
    assert combine_branches(turned, setup.target_phase) == pytest.approx(base, abs=1e-12)


def test_local_phase_correction_is_inert_for_ideal_chain():
    setup = ChoiSetup.create(EmitterChain(8), 0.06)
    a = fidelity_exact(setup)
    b = fidelity_exact(setup, correct_local_phases=False)
    assert a.fidelity == pytest.approx(b.fidelity, abs=1e-12)


def test_positions_irrelevant_under_perfect_chirality(rng):
    base = ChoiSetup.create(EmitterChain(4), 0.11)
    results = []
    for _ in range(2):
        z = tuple(np.cumsum(rng.uniform(0.5, 1.5, 4)))
        results.append(fidelity_exact(base.with_chain(EmitterChain(4, positions=z))).fidelity)
    assert abs(results[0] - results[1]) < 1e-10


def test_window_must_hold_the_pulse():
    with pytest.raises(ValueError):
        ChoiSetup.create(EmitterChain(2), 0.1, filter_sigmas=2.0)
    with pytest.raises(ValueError):
        FrequencyWindow(0.0, 0.0, 0.0, 1.0)


def test_pulses_must_travel_the_right_way():
    with pytest.raises(ValueError):
        ChoiSetup(EmitterChain(1), PulseSpec(0, 0.1, direction="L"), PulseSpec(0, 0.1, direction="L"))


def test_grid_doubling_check_runs():
    setup = ChoiSetup.create(EmitterChain(12), 0.05)
    assert fidelity_analytic(setup, check_convergence=True).fidelity == pytest.approx(
        fidelity_analytic(setup, check_convergence=False).fidelity, abs=1e-9)


def test_exact_result_converged_on_refined_grid():
    setup = ChoiSetup.create(EmitterChain(12), 0.05)
    assert fidelity_exact(setup.refined()).fidelity == pytest.approx(
        fidelity_exact(setup).fidelity, abs=1e-5)


def test_optimal_width_shrinks_with_chain_length():
    w4, r4 = optimize_width(ChoiSetup.create(EmitterChain(4), 0.1), (0.02, 0.4))
    w12, r12 = optimize_width(ChoiSetup.create(EmitterChain(12), 0.1), (0.02, 0.4))
    assert w4 > w12
    assert w12 == pytest.approx(0.05, abs=0.01)
    assert r12.infidelity < 0.01


def test_boundary_optimum_warns():
    with pytest.warns(BoundaryOptimumWarning):
        optimize_width(ChoiSetup.create(EmitterChain(12), 0.2), (0.15, 0.3))


def test_mismatched_pulses_use_common_spacing():
    setup = ChoiSetup(EmitterChain(2), PulseSpec(0.0, 0.1), PulseSpec(0.05, 0.12, direction="L"),
                      window=FrequencyWindow(0.0, 0.6, 0.05, 0.72))
    g1, g2 = setup.grids()
    assert g1.spacing == pytest.approx(g2.spacing)
    assert fidelity_analytic(setup).metadata["matched_pulses"] is False
    assert 0 < fidelity_exact(setup).fidelity <= 1
