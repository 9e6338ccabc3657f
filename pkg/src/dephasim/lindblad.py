"""Exact reference dynamics for the dephasing Anderson model.

d rho / dt = -i [H, rho] - gamma (x - y)**2 rho_xy, integrated with Strang
splitting into two exactly solvable flows: elementwise decay of coherences and
unitary conjugation through the cached eigendecomposition of H. Both flows are
completely positive and trace preserving, so any step size is stable; the
step is refined by halving until site populations stop changing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .metrics import population_infidelity
from .model import DephasingSpec, HamiltonianOperator, PureState
from .propagator import SpectralCache, real_matmul


class LindbladConvergenceError(RuntimeError):
    def __init__(self, delta: float, step: float, halvings: int):
        self.delta = delta
        self.step = step
        self.halvings = halvings
        super().__init__(
            f"step refinement did not converge after {halvings} halvings: "
            f"population change {delta:.3e} at step {step:.3e}"
        )


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    entries: np.ndarray
    tol: float = field(default=1e-10, repr=False)

    def __post_init__(self):
        rho = np.array(self.entries, dtype=complex)
        if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
            raise ValueError(f"density matrix must be square, got shape {rho.shape}")
        herm = np.max(np.abs(rho - rho.conj().T))
        if herm > self.tol:
            raise ValueError(f"density matrix not Hermitian: max |rho - rho^dag| = {herm:.3e}")
        tr = np.trace(rho).real
        if abs(tr - 1.0) > self.tol:
            raise ValueError(f"density matrix trace is {tr!r}, expected 1")
        rho.setflags(write=False)
        object.__setattr__(self, "entries", rho)

    @classmethod
    def from_pure(cls, state: PureState) -> "DensityMatrix":
        return cls(state.projector())

    @property
    def num_sites(self) -> int:
        return self.entries.shape[0]

    @property
    def populations(self) -> np.ndarray:
        return np.real(np.diag(self.entries)).copy()

    def purity(self) -> float:
        return float(np.real(np.vdot(self.entries, self.entries)))

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.entries)[0])


@dataclass(frozen=True)
class LindbladSettings:
    base_step: float = 0.1
    threshold: float = 1e-5
    max_halvings: int = 8

    def __post_init__(self):
        if not self.base_step > 0:
            raise ValueError(f"base_step must be > 0, got {self.base_step}")
        if not self.threshold > 0:
            raise ValueError("threshold must be > 0")


@dataclass(eq=False)
class LindbladTrajectory:
    times: np.ndarray
    populations: np.ndarray  # (n_times, L)
    states: list[DensityMatrix] | None
    step: float
    delta: float
    halvings: int


def _conjugate(m: np.ndarray, rho: np.ndarray) -> np.ndarray:
    """m @ rho @ m.T for real m."""
    y = real_matmul(m, rho)
    return real_matmul(m, y.T).T


class _StrangFlow:
    """Precomputed factors for Strang steps of a fixed length."""

    def __init__(self, cache: SpectralCache, spec: DephasingSpec, step: float):
        n = cache.num_sites
        self.cache = cache
        self.half = spec.decay_factors(n, step / 2)
        self.full = self.half * self.half
        ph = np.exp(-1j * cache.eigenvalues * step)
        self.phases = np.outer(ph, ph.conj())

    def _unitary(self, rho):
        v = self.cache.eigenvectors
        tilde = _conjugate(v.T, rho)
        tilde *= self.phases
        return _conjugate(v, tilde)

    def advance(self, rho: np.ndarray, n_steps: int) -> np.ndarray:
        """n_steps Strang steps; interior half-decays are merged."""
        rho = rho * self.half
        for k in range(n_steps):
            rho = self._unitary(rho)
            rho *= self.full if k < n_steps - 1 else self.half
        # restore Hermiticity lost to roundoff
        return 0.5 * (rho + rho.conj().T)


def lindblad_step(
    h_op: HamiltonianOperator,
    spec: DephasingSpec,
    rho: DensityMatrix,
    step: float,
    cache: SpectralCache | None = None,
) -> DensityMatrix:
    """One Strang step: half decay, unitary conjugation, half decay."""
    cache = cache or SpectralCache.from_hamiltonian(h_op)
    flow = _StrangFlow(cache, spec, step)
    return DensityMatrix(flow.advance(rho.entries, 1))


def _integrate(cache, spec, rho0, sample_times, step, keep_states):
    flows = {}
    rho = np.array(rho0, dtype=complex)
    t_prev = 0.0
    pops, states = [], []
    for t in sample_times:
        span = t - t_prev
        if span > 0:
            n = max(1, math.ceil(span / step - 1e-9))
            dt = span / n
            if dt not in flows:
                flows[dt] = _StrangFlow(cache, spec, dt)
            rho = flows[dt].advance(rho, n)
        t_prev = t
        pops.append(np.real(np.diag(rho)).copy())
        if keep_states:
            states.append(DensityMatrix(rho, tol=1e-9))
    return np.array(pops), (states if keep_states else None)


def evolve_lindblad(
    h_op: HamiltonianOperator,
    spec: DephasingSpec,
    rho0: DensityMatrix,
    total_time: float,
    settings: LindbladSettings | None = None,
    sample_times=None,
    cache: SpectralCache | None = None,
    keep_states: bool = True,
) -> LindbladTrajectory:
    """Integrate to ``total_time`` and return the states at ``sample_times``.

    The step starts at ``settings.base_step`` and is halved until the
    population infidelity between successive refinements, maximised over the
    sample times, drops below ``settings.threshold``. The finer trajectory is
    returned together with the step it used.
    """
    settings = settings or LindbladSettings()
    if total_time < 0:
        raise ValueError("total_time must be >= 0")
    times = np.array([total_time] if sample_times is None else sample_times, dtype=float)
    if times.size and (np.any(np.diff(times) < 0) or times[0] < 0 or times[-1] > total_time * (1 + 1e-12)):
        raise ValueError("sample_times must be sorted and lie within [0, total_time]")
    if times.size == 0 or times[-1] == 0:
        pops = np.tile(rho0.populations, (times.size, 1))
        states = [rho0] * times.size if keep_states else None
        return LindbladTrajectory(times, pops, states, settings.base_step, 0.0, 0)

    cache = cache or SpectralCache.from_hamiltonian(h_op)
    step = settings.base_step
    pops, states = _integrate(cache, spec, rho0.entries, times, step, keep_states)
    delta = math.inf
    for halvings in range(1, settings.max_halvings + 1):
        step /= 2
        fine_pops, fine_states = _integrate(cache, spec, rho0.entries, times, step, keep_states)
        delta = max(population_infidelity(a, b) for a, b in zip(pops, fine_pops))
        pops, states = fine_pops, fine_states
        if delta < settings.threshold:
            return LindbladTrajectory(times, pops, states, step, delta, halvings)
    raise LindbladConvergenceError(delta, step, settings.max_halvings)


def closed_form_dephasing(rho0: DensityMatrix, spec: DephasingSpec, epsilons, t: float) -> DensityMatrix:
    """Exact solution without tunnelling: rho_xy(0) exp(-gamma (x-y)^2 t) exp(-i (eps_x - eps_y) t)."""
    eps = np.asarray(epsilons, dtype=float)
    n = rho0.num_sites
    if eps.size != n:
        raise ValueError(f"{eps.size} energies for a {n}-site state")
    phase = np.exp(-1j * (eps[:, None] - eps[None, :]) * t)
    return DensityMatrix(rho0.entries * spec.decay_factors(n, t) * phase)
