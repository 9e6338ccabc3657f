import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dephasim.lindblad import DensityMatrix, closed_form_dephasing, evolve_lindblad
from dephasim.metrics import population_infidelity
from dephasim.model import DephasingSpec, HamiltonianOperator, LatticeSpec, PureState, build_hamiltonian, ground_state, sample_disorder
from dephasim.propagator import PropagatorSettings, SpectralCache, evolve_unitary
from dephasim.protocols import (
    EnsembleMemberError,
    ProtocolConfig,
    TiltSchedule,
    averaged_digital_density,
    derive_sigma,
    make_schedule,
    run_ensemble,
    run_member_analogue,
    run_member_digital,
)

from conftest import random_state


def uniform_superposition(n):
    return PureState(np.full(n, 1 / np.sqrt(n)))


def disordered(n, seed):
    spec = LatticeSpec(n, 1.0, 0.2)
    return build_hamiltonian(spec, sample_disorder(spec, seed))


# --- oracles ---------------------------------------------------------------

def test_sigma_values():
    assert derive_sigma(0.0, 3.0) == 0.0
    assert derive_sigma(1e-4, 653 / 80) == pytest.approx(4.9500e-3, rel=1e-4)
    with pytest.raises(ValueError):
        derive_sigma(-1.0, 1.0)


@pytest.mark.parametrize("mode", ["digital", "analogue"])
def test_zero_tilts_give_anderson_evolution(mode, small_chain):
    h, psi, _ = small_chain
    start = PureState(random_state(12, np.random.default_rng(1)))
    config = ProtocolConfig(mode, 7, 1, 21.0, 1e-3)
    schedule = TiltSchedule(np.zeros(7), 0)
    runner = run_member_digital if mode == "digital" else run_member_analogue
    out = runner(h, config, schedule, start)
    ref = evolve_unitary(h, start, 21.0)
    np.testing.assert_allclose(out.amplitudes, ref.amplitudes, atol=1e-10)


@pytest.mark.parametrize("mode", ["digital", "analogue"])
def test_single_untilted_member_is_pure(mode, small_chain):
    h, psi, _ = small_chain
    config = ProtocolConfig(mode, 4, 1, 10.0, 0.0)
    res = run_ensemble(h, config, psi, 0, 0)
    ref = evolve_unitary(h, psi, 10.0).projector()
    np.testing.assert_allclose(res.averaged_density.entries, ref, atol=1e-10)
    assert res.averaged_density.purity() == pytest.approx(1.0, abs=1e-9)


@pytest.mark.parametrize("gamma", [1e-4, 1e-3])
def test_analytic_digital_without_tunnelling(gamma):
    rng = np.random.default_rng(3)
    eps = 0.2 * (2 * rng.random(30) - 1)
    h = HamiltonianOperator(eps, 0.0)
    rho0 = DensityMatrix.from_pure(uniform_superposition(30))
    config = ProtocolConfig("digital", 40, 1, 200.0, gamma)
    out = averaged_digital_density(h, config, rho0)
    ref = closed_form_dephasing(rho0, DephasingSpec(gamma), eps, 200.0)
    np.testing.assert_allclose(out.entries, ref.entries, atol=1e-12, rtol=0)


def test_monte_carlo_digital_without_tunnelling():
    n, gamma, t, e = 12, 1e-3, 100.0, 2000
    h = HamiltonianOperator(np.zeros(n), 0.0)
    psi0 = uniform_superposition(n)
    config = ProtocolConfig("digital", 10, e, t, gamma)
    rho = run_ensemble(h, config, psi0, 17, 0).averaged_density.entries
    x = np.arange(n)
    d2 = (x[:, None] - x[None, :]) ** 2
    expected = np.exp(-gamma * d2 * t) / n
    # per member rho_xy = exp(-i A (x-y)) / n with A ~ N(0, 2 gamma t)
    var = (1 + np.exp(-4 * gamma * d2 * t)) / 2 - np.exp(-2 * gamma * d2 * t)
    stderr = np.sqrt(var / e) / n
    off = ~np.eye(n, dtype=bool)
    assert np.all(np.abs(np.abs(rho[off]) - expected[off]) <= 3 * stderr[off] + 1e-12)


def test_wannier_stark_freezing():
    h = disordered(15, 2)
    start = PureState(np.eye(15)[7].astype(complex))
    frozen = []
    for alpha in (2.0, 8.0, 32.0):
        config = ProtocolConfig("analogue", 1, 1, 5.0, 1e-3)
        out = run_member_analogue(h, config, TiltSchedule(np.array([alpha]), 0), start)
        frozen.append(np.linalg.norm(out.populations - start.populations))
    assert frozen[0] > frozen[1] > frozen[2]
    assert frozen[2] < 1e-2


def test_krylov_failure_names_member(small_chain):
    h, psi, _ = small_chain
    config = ProtocolConfig("analogue", 1, 3, 50.0, 10.0)
    bad = PropagatorSettings("krylov", krylov_tolerance=1e-14, krylov_max_dim=3)
    with pytest.raises(EnsembleMemberError) as info:
        run_ensemble(h, config, psi, 0, 0, settings=bad)
    assert 0 <= info.value.member_index < 3


def test_config_validation():
    with pytest.raises(ValueError):
        ProtocolConfig("hybrid", 1, 1, 1.0, 0.0)
    with pytest.raises(ValueError):
        ProtocolConfig("digital", 0, 1, 1.0, 0.0)
    with pytest.raises(ValueError):
        ProtocolConfig("digital", 1, 1, 0.0, 0.0)


# --- properties ------------------------------------------------------------

@settings(max_examples=100, deadline=None)
@given(
    st.sampled_from(["digital", "analogue"]),
    st.integers(1, 1000),
    st.floats(1e-3, 1e4),
    st.floats(0.0, 1.0),
)
def test_gamma_round_trip(mode, n_windows, total_time, gamma):
    config = ProtocolConfig(mode, n_windows, 1, total_time, gamma)
    assert config.sigma**2 * config.window / 2 == pytest.approx(gamma, rel=1e-14, abs=1e-300)


@settings(max_examples=10, deadline=None)
@given(st.sampled_from(["digital", "analogue"]), st.integers(1, 130), st.integers(0, 2**32))
def test_determinism_across_threads(mode, n_members, seed):
    h = disordered(10, seed)
    psi, _ = ground_state(h)
    config = ProtocolConfig(mode, 3, n_members, 9.0, 1e-2)
    runs = [run_ensemble(h, config, psi, seed, 4, threads=k) for k in (1, 3)]
    np.testing.assert_array_equal(runs[0].averaged_populations, runs[1].averaged_populations)
    np.testing.assert_array_equal(runs[0].averaged_density.entries, runs[1].averaged_density.entries)
    assert abs(runs[0].averaged_populations.sum() - 1) <= 1e-9


@settings(max_examples=10, deadline=None)
@given(st.sampled_from(["digital", "analogue"]), st.floats(-50, 50), st.integers(0, 2**32))
def test_tilt_origin_invariance(mode, origin, seed):
    h = disordered(10, seed)
    psi, _ = ground_state(h)
    base = ProtocolConfig(mode, 4, 60, 12.0, 5e-3)
    shifted = ProtocolConfig(mode, 4, 60, 12.0, 5e-3, tilt_origin=origin)
    a = run_ensemble(h, base, psi, 1, 2).averaged_density.entries
    b = run_ensemble(h, shifted, psi, 1, 2).averaged_density.entries
    np.testing.assert_allclose(a, b, atol=1e-9)


def test_schedule_prefix_and_scale():
    config = ProtocolConfig("digital", 5, 10, 10.0, 1e-3)
    s = make_schedule(config, 3, 4, 5)
    s2 = make_schedule(config, 3, 4, 5)
    np.testing.assert_array_equal(s.alphas, s2.alphas)
    assert not np.array_equal(s.alphas, make_schedule(config, 3, 4, 6).alphas)
    draws = np.concatenate([make_schedule(config, 3, 4, m).alphas for m in range(4000)])
    assert draws.std() == pytest.approx(config.sigma, rel=0.03)


def _ip_vs_exact(h, psi, config, seed):
    cache = SpectralCache.from_hamiltonian(h)
    exact = evolve_lindblad(h, DephasingSpec(config.gamma), DensityMatrix.from_pure(psi), config.total_time, cache=cache)
    res = run_ensemble(h, config, psi, seed, seed, density=False, cache=cache)
    return population_infidelity(exact.populations[-1], res.averaged_populations)


def test_larger_ensemble_reduces_infidelity():
    small, large = [], []
    for r in range(20):
        h = disordered(20, 100 + r)
        psi, _ = ground_state(h)
        psi = PureState(psi.amplitudes * np.exp(-0.8j * np.arange(20)))
        small.append(_ip_vs_exact(h, psi, ProtocolConfig("digital", 20, 10, 30.0, 3e-3), r))
        large.append(_ip_vs_exact(h, psi, ProtocolConfig("digital", 20, 160, 30.0, 3e-3), r))
    assert np.mean(large) < 0.5 * np.mean(small)


def test_kick_order_is_benign():
    h = disordered(20, 9)
    psi, _ = ground_state(h)
    ips = {}
    for first in (False, True):
        config = ProtocolConfig("digital", 20, 400, 40.0, 2e-3, kick_first=first)
        ips[first] = _ip_vs_exact(h, psi, config, 5)
    # Monte-Carlo noise scale: spread of I_p over independent seed streams
    spread = np.std([_ip_vs_exact(h, psi, ProtocolConfig("digital", 20, 400, 40.0, 2e-3), s) for s in range(6, 12)])
    assert abs(ips[True] - ips[False]) < max(3 * spread, 1e-4)
