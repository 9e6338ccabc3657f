"""Randomised-tilt simulation of dephasing: digital and analogue protocols.

Each ensemble member evolves a pure state through ``num_windows`` windows of
length T = t / N. In window k a tilt of strength alpha_k ~ N(0, sigma^2) acts,
with sigma chosen so that sigma^2 T / 2 = gamma.

* digital: evolve under H for T, then apply the tilt as a diagonal phase kick
  exp(-i alpha_k T x).
* analogue: evolve under H + alpha_k X for T.

Averaging the member projectors with weight 1/E gives the simulated state.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .lindblad import DensityMatrix, _conjugate
from .model import HamiltonianOperator, PureState
from .propagator import (
    KrylovConvergenceError,
    PropagatorSettings,
    SpectralCache,
    krylov_evolve_batch,
    spectral_evolve_batch,
    tilt_kick_batch,
)
from .seeding import derive_seed, gaussian_stream

MODES = ("digital", "analogue")

# members per work item; fixed so results do not depend on worker count
CHUNK_SIZE = 50


class EnsembleMemberError(RuntimeError):
    def __init__(self, member_index: int, cause: Exception):
        self.member_index = member_index
        self.cause = cause
        super().__init__(f"ensemble member {member_index} failed: {cause}")


def derive_sigma(gamma: float, window: float) -> float:
    """Tilt width sqrt(2 gamma / T) reproducing dephasing rate gamma."""
    if gamma < 0:
        raise ValueError("gamma must be >= 0")
    if not window > 0:
        raise ValueError("window must be > 0")
    return math.sqrt(2.0 * gamma / window)


@dataclass(frozen=True)
class ProtocolConfig:
    mode: str
    num_windows: int
    ensemble_size: int
    total_time: float
    gamma: float
    tilt_origin: float = 0.0
    kick_first: bool = False

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.num_windows < 1 or int(self.num_windows) != self.num_windows:
            raise ValueError("num_windows must be an integer >= 1")
        if self.ensemble_size < 1 or int(self.ensemble_size) != self.ensemble_size:
            raise ValueError("ensemble_size must be an integer >= 1")
        if not self.total_time > 0:
            raise ValueError("total_time must be > 0")
        if self.gamma < 0:
            raise ValueError("gamma must be >= 0")

    @property
    def window(self) -> float:
        return self.total_time / self.num_windows

    @property
    def sigma(self) -> float:
        return derive_sigma(self.gamma, self.window)

    def as_dict(self) -> dict:
        return {
            "mode": self.mode,
            "num_windows": self.num_windows,
            "ensemble_size": self.ensemble_size,
            "total_time": self.total_time,
            "gamma": self.gamma,
            "window": self.window,
            "sigma": self.sigma,
            "tilt_origin": self.tilt_origin,
            "kick_first": self.kick_first,
        }


@dataclass(frozen=True, eq=False)
class TiltSchedule:
    alphas: np.ndarray
    member_seed: int


def member_seed(master_seed: int, disorder_seed: int, member_index: int) -> int:
    return derive_seed(master_seed, disorder_seed, member_index)


def make_schedule(config: ProtocolConfig, master_seed: int, disorder_seed: int, member_index: int) -> TiltSchedule:
    seed = member_seed(master_seed, disorder_seed, member_index)
    alphas = config.sigma * gaussian_stream(seed, config.num_windows)
    return TiltSchedule(alphas, seed)


def _check_schedule(config, schedule):
    if len(schedule.alphas) != config.num_windows:
        raise ValueError(f"schedule has {len(schedule.alphas)} tilts, config expects {config.num_windows}")


def _digital_batch(cache: SpectralCache, psi: np.ndarray, alphas: np.ndarray, config: ProtocolConfig) -> np.ndarray:
    """alphas: (N, B) tilt strengths; psi: (L, B)."""
    window = config.window
    for alpha_k in alphas:
        if config.kick_first:
            psi = tilt_kick_batch(psi, alpha_k * window, config.tilt_origin)
            psi = spectral_evolve_batch(cache, psi, window)
        else:
            psi = spectral_evolve_batch(cache, psi, window)
            psi = tilt_kick_batch(psi, alpha_k * window, config.tilt_origin)
    return psi


def _analogue_batch(h, psi, alphas, config, settings):
    for alpha_k in alphas:
        psi = krylov_evolve_batch(h, psi, config.window, settings, alphas=alpha_k, origin=config.tilt_origin)
    return psi


def run_member_digital(
    h: HamiltonianOperator,
    config: ProtocolConfig,
    schedule: TiltSchedule,
    initial: PureState,
    cache: SpectralCache | None = None,
) -> PureState:
    _check_schedule(config, schedule)
    cache = cache or SpectralCache.from_hamiltonian(h)
    psi = _digital_batch(cache, initial.amplitudes[:, None], np.asarray(schedule.alphas)[:, None], config)
    return PureState(psi[:, 0], norm_tol=1e-7)


def run_member_analogue(
    h: HamiltonianOperator,
    config: ProtocolConfig,
    schedule: TiltSchedule,
    initial: PureState,
    settings: PropagatorSettings | None = None,
) -> PureState:
    _check_schedule(config, schedule)
    settings = settings or PropagatorSettings(backend="krylov")
    psi = _analogue_batch(h, initial.amplitudes[:, None], np.asarray(schedule.alphas)[:, None], config, settings)
    return PureState(psi[:, 0], norm_tol=1e-7)


@dataclass(eq=False)
class EnsembleResult:
    averaged_populations: np.ndarray
    averaged_density: DensityMatrix | None
    config: ProtocolConfig
    master_seed: int
    disorder_seed: int
    metadata: dict = field(default_factory=dict)


def run_ensemble(
    h: HamiltonianOperator,
    config: ProtocolConfig,
    initial: PureState,
    master_seed: int,
    disorder_seed: int,
    *,
    density: bool = True,
    threads: int = 1,
    cache: SpectralCache | None = None,
    settings: PropagatorSettings | None = None,
) -> EnsembleResult:
    """Uniform average over ``config.ensemble_size`` independently tilted members.

    Members are processed in fixed chunks and the chunk sums are added in
    chunk order, so the result is bit-identical for any ``threads``.
    """
    n_members = config.ensemble_size
    settings = settings or PropagatorSettings(backend="krylov")
    if config.mode == "digital":
        cache = cache or SpectralCache.from_hamiltonian(h)
    psi0 = initial.amplitudes

    def work(start):
        stop = min(start + CHUNK_SIZE, n_members)
        alphas = np.stack(
            [make_schedule(config, master_seed, disorder_seed, m).alphas for m in range(start, stop)], axis=1
        )
        batch = np.repeat(psi0[:, None], stop - start, axis=1)
        try:
            if config.mode == "digital":
                out = _digital_batch(cache, batch, alphas, config)
            else:
                out = _analogue_batch(h, batch, alphas, config, settings)
        except KrylovConvergenceError as exc:
            raise EnsembleMemberError(start + exc.column, exc) from exc
        pops = np.sum(np.abs(out) ** 2, axis=1)
        rho = out @ out.conj().T if density else None
        return pops, rho

    starts = range(0, n_members, CHUNK_SIZE)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(work, starts))
    else:
        parts = [work(s) for s in starts]

    pops = np.zeros(psi0.size)
    rho = np.zeros((psi0.size, psi0.size), dtype=complex) if density else None
    for p, r in parts:
        pops += p
        if density:
            rho += r
    pops /= n_members
    avg_rho = None
    if density:
        rho /= n_members
        avg_rho = DensityMatrix(0.5 * (rho + rho.conj().T), tol=1e-8)
    metadata = {"chunk_size": CHUNK_SIZE}
    if config.mode == "analogue":
        metadata["krylov_tolerance"] = settings.krylov_tolerance
        metadata["krylov_max_dim"] = settings.krylov_max_dim
    return EnsembleResult(pops, avg_rho, config, int(master_seed), int(disorder_seed), metadata)


def averaged_digital_density(
    h: HamiltonianOperator,
    config: ProtocolConfig,
    rho0: DensityMatrix,
    cache: SpectralCache | None = None,
) -> DensityMatrix:
    """Digital protocol with the Gaussian tilt average done in closed form.

    Averaging exp(-i alpha T (x - y)) over alpha ~ N(0, sigma^2) multiplies
    coherence rho_xy by exp(-sigma^2 T^2 (x - y)^2 / 2) in each window.
    """
    if config.mode != "digital":
        raise ValueError("closed-form averaging applies to the digital protocol")
    cache = cache or SpectralCache.from_hamiltonian(h)
    n = rho0.num_sites
    x = np.arange(n)
    window = config.window
    kick_average = np.exp(-0.5 * (config.sigma * window) ** 2 * (x[:, None] - x[None, :]) ** 2)
    v = cache.eigenvectors
    ph = np.exp(-1j * cache.eigenvalues * window)
    phases = np.outer(ph, ph.conj())
    rho = np.array(rho0.entries)
    for _ in range(config.num_windows):
        if config.kick_first:
            rho = rho * kick_average
        tilde = _conjugate(v.T, rho)
        tilde *= phases
        rho = _conjugate(v, tilde)
        if not config.kick_first:
            rho = rho * kick_average
    return DensityMatrix(0.5 * (rho + rho.conj().T), tol=1e-9)
