import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dephasim.model import (
    DegenerateGroundStateWarning,
    DephasingSpec,
    DisorderRealization,
    HamiltonianOperator,
    LatticeSpec,
    PureState,
    TiltOperator,
    build_hamiltonian,
    build_tilted,
    dephasing_weight,
    ground_state,
    sample_disorder,
)
from dephasim.seeding import derive_seed, gaussian_stream, uniform_stream


def chain(eps, tau=1.0):
    eps = np.asarray(eps, dtype=float)
    return HamiltonianOperator(eps, tau)


# --- oracles ---------------------------------------------------------------

def test_two_site_eigenvalues():
    vals = np.linalg.eigvalsh(chain([0, 0]).to_dense())
    np.testing.assert_allclose(vals, [-1, 1], atol=1e-14)


def test_three_site_eigenvalues():
    vals = np.linalg.eigvalsh(chain([0, 0, 0]).to_dense())
    np.testing.assert_allclose(vals, [-np.sqrt(2), 0, np.sqrt(2)], atol=1e-14)


def test_three_site_ground_state():
    psi, energy = ground_state(chain([0, 0, 0]))
    assert energy == pytest.approx(-np.sqrt(2), abs=1e-13)
    # (1/2, -1/sqrt2, 1/2) up to phase; the convention makes the central peak positive
    np.testing.assert_allclose(psi.amplitudes, [-0.5, 1 / np.sqrt(2), -0.5], atol=1e-12)


def test_two_site_detuned_ground_state():
    psi, energy = ground_state(chain([0, 10]))
    assert energy == pytest.approx(5 - np.sqrt(26), abs=1e-12)
    assert energy == pytest.approx(-0.0990, abs=1e-4)
    assert psi.populations[0] > 0.99


def test_localised_ground_state():
    spec = LatticeSpec(400, 1.0, 0.2)
    h = build_hamiltonian(spec, sample_disorder(spec, 1))
    psi, _ = ground_state(h)
    amp = np.abs(psi.amplitudes)
    peak = int(np.argmax(amp))
    far = np.abs(np.arange(400) - peak) > 150
    assert amp[far].max() < 1e-3 * amp[peak]


def test_zero_width_disorder():
    d = sample_disorder(LatticeSpec(50, 1.0, 0.0), 3)
    assert np.all(d.epsilons == 0)


def test_disorder_statistics():
    spec = LatticeSpec(20000, 1.0, 0.2)
    eps = sample_disorder(spec, 11).epsilons
    assert np.all(np.abs(eps) <= 0.2)
    assert abs(eps.mean()) < 0.01
    assert eps.var() == pytest.approx(0.2**2 / 3, rel=0.05)


def test_disorder_deterministic():
    spec = LatticeSpec(400)
    np.testing.assert_array_equal(sample_disorder(spec, 9).epsilons, sample_disorder(spec, 9).epsilons)
    assert not np.array_equal(sample_disorder(spec, 9).epsilons, sample_disorder(spec, 10).epsilons)


def test_single_site_rejected():
    with pytest.raises(ValueError):
        LatticeSpec(1)
    with pytest.raises(ValueError):
        HamiltonianOperator(np.zeros(1), 1.0)


def test_length_mismatch_rejected():
    with pytest.raises(ValueError):
        build_hamiltonian(LatticeSpec(4), DisorderRealization(np.zeros(3), 0))


def test_tilt_zero_is_identity():
    h = chain([0.1, -0.2, 0.3])
    assert build_tilted(h, 0.0) is h


def test_tilt_diagonal():
    h = build_tilted(chain([0, 0, 0]), 1.0)
    np.testing.assert_array_equal(h.diagonal, [0, 1, 2])
    np.testing.assert_array_equal(TiltOperator(2.0, origin=1.0).diagonal(3), [-2, 0, 2])


def test_dephasing_weight_examples():
    assert dephasing_weight(5, 5) == 0
    assert dephasing_weight(0, 2) == 4
    assert dephasing_weight(2, 0) == 4


def test_degenerate_ground_state_warns():
    # decoupled identical sites
    h = HamiltonianOperator(np.zeros(2), 0.0)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        psi, energy = ground_state(h)
    assert any(issubclass(w.category, DegenerateGroundStateWarning) for w in caught)
    assert energy == 0
    assert np.isclose(np.linalg.norm(psi.amplitudes), 1)


def test_pure_state_requires_norm():
    with pytest.raises(ValueError):
        PureState(np.array([1.0, 1.0]))


def test_seed_derivation_rules():
    assert derive_seed(1, 2) == derive_seed(1, 2)
    assert derive_seed(1, 2) != derive_seed(2, 1)
    with pytest.raises(ValueError):
        derive_seed()
    with pytest.raises(ValueError):
        derive_seed(-1)


def test_streams_are_prefix_stable():
    np.testing.assert_array_equal(uniform_stream(4, 10)[:5], uniform_stream(4, 5))
    g = gaussian_stream(4, 200000)
    assert abs(g.mean()) < 0.01 and g.std() == pytest.approx(1, abs=0.01)


# --- properties ------------------------------------------------------------

eps_lists = st.lists(st.floats(-1, 1), min_size=2, max_size=30)


@settings(max_examples=50, deadline=None)
@given(eps_lists, st.floats(0.1, 2.0), st.integers(0, 2**32))
def test_matvec_is_symmetric(eps, tau, seed):
    h = chain(eps, tau)
    rng = np.random.default_rng(seed)
    u, v = rng.normal(size=(2, h.num_sites))
    lhs, rhs = u @ h.matvec(v), h.matvec(u) @ v
    assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(lhs))
    np.testing.assert_allclose(h.matvec(v), h.to_dense() @ v, atol=1e-13)


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 200), st.floats(0, 3), st.integers(0, 2**40))
def test_disorder_bounded(n, w, seed):
    eps = sample_disorder(LatticeSpec(n, 1.0, w), seed).epsilons
    assert eps.shape == (n,)
    assert np.all(np.abs(eps) <= w)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 120), st.integers(0, 2**32))
def test_ground_state_residual_and_variational_bound(n, seed):
    spec = LatticeSpec(n, 1.0, 0.2)
    h = build_hamiltonian(spec, sample_disorder(spec, seed))
    psi, energy = ground_state(h)
    a = psi.amplitudes
    assert np.linalg.norm(h.matvec(a) - energy * a) / h.norm_bound() <= 1e-10
    z = np.random.default_rng(seed).normal(size=n)
    assert z @ h.matvec(z) / (z @ z) >= energy - 1e-12


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 500), st.integers(0, 500))
def test_weight_symmetric_nonnegative(x, y):
    assert dephasing_weight(x, y) == dephasing_weight(y, x) >= 0
    assert dephasing_weight(x, x) == 0


def test_weight_matrix_matches_function():
    w = DephasingSpec(1.0).weights(6)
    assert w[1, 4] == 9 and np.all(np.diag(w) == 0) and np.array_equal(w, w.T)
