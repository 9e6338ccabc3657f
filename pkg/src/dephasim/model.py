"""Lattice, disorder, Anderson Hamiltonian, tilt and dephasing weight.

Units: hbar = 1, energies in units of the tunnelling rate, times in units of
its inverse. Sites are indexed 0..L-1 on an open chain.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .seeding import uniform_stream


class DegenerateGroundStateWarning(UserWarning):
    """Raised (as a warning) when the lowest two eigenvalues are not resolved."""


@dataclass(frozen=True)
class LatticeSpec:
    num_sites: int
    tunnelling_rate: float = 1.0
    disorder_amplitude: float = 0.2

    def __post_init__(self):
        if int(self.num_sites) != self.num_sites or self.num_sites < 2:
            raise ValueError(f"num_sites must be an integer >= 2, got {self.num_sites}")
        if not self.tunnelling_rate > 0:
            raise ValueError(f"tunnelling_rate must be > 0, got {self.tunnelling_rate}")
        if not self.disorder_amplitude >= 0:
            raise ValueError(f"disorder_amplitude must be >= 0, got {self.disorder_amplitude}")


@dataclass(frozen=True, eq=False)
class DisorderRealization:
    epsilons: np.ndarray
    seed: int

    def __post_init__(self):
        eps = np.asarray(self.epsilons, dtype=float)
        eps.setflags(write=False)
        object.__setattr__(self, "epsilons", eps)

    def __len__(self):
        return len(self.epsilons)


@dataclass(frozen=True, eq=False)
class HamiltonianOperator:
    """Real symmetric tridiagonal operator: onsite ``diagonal`` plus uniform hopping.

    ``hopping = 0`` is allowed and gives the tunnelling-free sub-model.
    """

    diagonal: np.ndarray
    hopping: float

    def __post_init__(self):
        d = np.array(self.diagonal, dtype=float)
        if d.ndim != 1 or d.size < 2:
            raise ValueError("diagonal must be a 1-D array with at least 2 sites")
        d.setflags(write=False)
        object.__setattr__(self, "diagonal", d)
        object.__setattr__(self, "hopping", float(self.hopping))

    @property
    def num_sites(self) -> int:
        return self.diagonal.size

    @property
    def offdiagonal(self) -> np.ndarray:
        return np.full(self.num_sites - 1, self.hopping)

    def matvec(self, v: np.ndarray) -> np.ndarray:
        """H @ v for v of shape (L,) or (L, batch)."""
        d = self.diagonal if v.ndim == 1 else self.diagonal[:, None]
        w = d * v
        w[:-1] += self.hopping * v[1:]
        w[1:] += self.hopping * v[:-1]
        return w

    def to_dense(self) -> np.ndarray:
        return np.diag(self.diagonal) + self.hopping * (np.eye(self.num_sites, k=1) + np.eye(self.num_sites, k=-1))

    def norm_bound(self) -> float:
        """Gershgorin upper bound on the spectral norm."""
        return float(np.max(np.abs(self.diagonal)) + 2 * abs(self.hopping))

    def spectral_interval(self) -> tuple[float, float]:
        """Gershgorin enclosure [lo, hi] of the spectrum."""
        r = 2 * abs(self.hopping)
        return float(self.diagonal.min() - r), float(self.diagonal.max() + r)


@dataclass(frozen=True)
class TiltOperator:
    """Linear potential alpha * (x - origin)."""

    alpha: float
    origin: float = 0.0

    def diagonal(self, num_sites: int) -> np.ndarray:
        return self.alpha * (np.arange(num_sites) - self.origin)


@dataclass(frozen=True)
class DephasingSpec:
    """Dephasing rate gamma with weight f(x, y) = (x - y)**2."""

    gamma: float

    def __post_init__(self):
        if not self.gamma >= 0:
            raise ValueError(f"gamma must be >= 0, got {self.gamma}")

    def weights(self, num_sites: int) -> np.ndarray:
        x = np.arange(num_sites)
        return dephasing_weight(x[:, None], x[None, :]).astype(float)

    def decay_factors(self, num_sites: int, duration: float) -> np.ndarray:
        """Elementwise factor exp(-gamma f(x, y) duration) acting on coherences."""
        return np.exp(-self.gamma * duration * self.weights(num_sites))


@dataclass(frozen=True, eq=False)
class PureState:
    amplitudes: np.ndarray
    norm_tol: float = field(default=1e-10, repr=False, compare=False)

    def __post_init__(self):
        a = np.array(self.amplitudes, dtype=complex)
        if a.ndim != 1:
            raise ValueError("amplitudes must be 1-D")
        norm = np.linalg.norm(a)
        if abs(norm - 1.0) > self.norm_tol:
            raise ValueError(f"state is not normalised: |psi| = {norm!r}")
        a.setflags(write=False)
        object.__setattr__(self, "amplitudes", a)

    @property
    def populations(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def projector(self) -> np.ndarray:
        return np.outer(self.amplitudes, self.amplitudes.conj())

    def __len__(self):
        return self.amplitudes.size


def dephasing_weight(x, y):
    """f(x, y) = (x - y)**2; works elementwise on arrays."""
    return (x - y) ** 2


def sample_disorder(spec: LatticeSpec, seed: int) -> DisorderRealization:
    """Onsite energies i.i.d. uniform on [-W, W] (W = disorder_amplitude)."""
    u = uniform_stream(seed, spec.num_sites)
    w = spec.disorder_amplitude
    eps = w * (2.0 * u - 1.0)
    return DisorderRealization(epsilons=eps, seed=int(seed))


def build_hamiltonian(spec: LatticeSpec, disorder: DisorderRealization) -> HamiltonianOperator:
    if len(disorder) != spec.num_sites:
        raise ValueError(f"disorder has {len(disorder)} sites, lattice has {spec.num_sites}")
    return HamiltonianOperator(diagonal=disorder.epsilons, hopping=spec.tunnelling_rate)


def build_tilted(h: HamiltonianOperator, alpha: float, origin: float = 0.0) -> HamiltonianOperator:
    """H + alpha * X with X = diag(x - origin)."""
    if alpha == 0:
        return h
    tilt = TiltOperator(alpha, origin).diagonal(h.num_sites)
    return HamiltonianOperator(diagonal=h.diagonal + tilt, hopping=h.hopping)


def ground_state(h: HamiltonianOperator) -> tuple[PureState, float]:
    """Lowest eigenpair of ``h``.

    Phase convention: the largest-magnitude amplitude is real and positive.
    A gap below 1e-12 ||H|| triggers :class:`DegenerateGroundStateWarning` and
    the solver's first eigenvector is returned.
    """
    vals, vecs = eigh_tridiagonal(h.diagonal, h.offdiagonal, select="i", select_range=(0, 1))
    scale = max(h.norm_bound(), np.finfo(float).tiny)
    if vals[1] - vals[0] < 1e-12 * scale:
        warnings.warn(
            f"ground state degenerate to within {vals[1] - vals[0]:.3e}; taking the first solver eigenvector",
            DegenerateGroundStateWarning,
            stacklevel=2,
        )
    psi = vecs[:, 0].astype(complex)
    peak = np.argmax(np.abs(psi))
    psi *= np.abs(psi[peak]) / psi[peak]
    psi /= np.linalg.norm(psi)
    return PureState(psi), float(vals[0])
