import numpy as np
import pytest
from hypothesis import given, strategies as st

from chiralgate.exact import ChainError, Sector, build_hamiltonian
from chiralgate.exact.hamiltonian import MAX_EMITTERS, ChainOperators
from chiralgate.model import EmitterChain


def test_single_emitter_is_diagonal():
    h = build_hamiltonian(EmitterChain(1, detunings=(0.3,)))
    assert np.allclose(h.matrix, np.diag([0.3 - 0.5j, 0.3 - 0.5j]))
    assert h.basis == ((0, "e"), (0, "f"))


def test_chiral_cascade_structure():
    h = build_hamiltonian(EmitterChain(2)).matrix
    e, f = [0, 2], [1, 3]
    he, hf = h[np.ix_(e, e)], h[np.ix_(f, f)]
    assert he[0, 1] == 0 and he[1, 0] != 0  # right-movers couple forward only
    assert hf[1, 0] == 0 and hf[0, 1] != 0
    assert np.all(h[np.ix_(e, f)] == 0)


@pytest.mark.parametrize("gamma_b, expected", [(0.0, lambda n: n * (n - 1)),
                                               (0.1, lambda n: 2 * n * (n - 1))])
def test_double_sector_dimension(gamma_b, expected):
    for n in (2, 3, 5):
        h = build_hamiltonian(EmitterChain(n, gamma_b=gamma_b), Sector.DOUBLE)
        assert h.dimension == expected(n)
        assert all(a[0] != b[0] for a, b in h.basis)


def test_invalid_chain_raises():
    with pytest.raises(ChainError):
        build_hamiltonian(EmitterChain(2, positions=(0.0, 0.0)))
    with pytest.raises(ChainError):
        ChainOperators.from_chain(EmitterChain(MAX_EMITTERS + 1))


chains = st.builds(
    lambda n, gb, gs, seed: _random_chain(n, gb, gs, seed),
    st.integers(1, 5), st.floats(0, 0.5), st.floats(0, 0.5), st.integers(0, 2**31))


def _random_chain(n, gb, gs, seed):
    rng = np.random.default_rng(seed)
    return EmitterChain(n, gamma_b=gb, gamma_s=gs, detunings=tuple(rng.normal(0, 0.3, n)),
                        rate_scales=tuple(rng.uniform(0.5, 2.0, n)),
                        positions=tuple(np.cumsum(rng.uniform(0.5, 1.5, n))))


@given(chains)
def test_passivity(chain):
    for sector in Sector:
        m = build_hamiltonian(chain, sector).matrix
        if m.size:
            anti = (m - m.conj().T) / 2j
            assert np.linalg.eigvalsh(anti).max() <= 1e-12


def test_side_loss_only_on_diagonal():
    a = build_hamiltonian(EmitterChain(3, gamma_s=0.4)).matrix
    b = build_hamiltonian(EmitterChain(3)).matrix
    assert np.allclose(a - b, -0.2j * np.eye(6))
