"""Exact unitary propagation exp(-iHt) for tridiagonal Hamiltonians.

Two backends share one contract:

* ``spectral``: full eigendecomposition of H, cached and reused.
* ``krylov``: Lanczos approximation of the exponential action, with an
  a-posteriori error estimate and automatic equal-length substepping.

The batched helpers (``*_batch``) act on an (L, B) array of state columns and
are what the ensemble protocols use. For the Krylov batch, each column may
carry its own tilt strength.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np
from scipy.linalg import eigh_tridiagonal

from .model import HamiltonianOperator, PureState


# tolerated norm drift of a state after many chained propagations
_CHAIN_NORM_TOL = 1e-7


class KrylovConvergenceError(RuntimeError):
    def __init__(self, residual: float, dimension: int, tolerance: float, column: int = 0):
        self.residual = residual
        self.column = column
        self.dimension = dimension
        self.tolerance = tolerance
        super().__init__(
            f"Krylov exponential did not converge: residual estimate {residual:.3e} "
            f"> tolerance {tolerance:.1e} at dimension {dimension} (column {column})"
        )


@dataclass(frozen=True)
class PropagatorSettings:
    backend: str = "spectral"
    krylov_tolerance: float = 1e-10
    krylov_max_dim: int = 64

    def __post_init__(self):
        if self.backend not in ("spectral", "krylov"):
            raise ValueError(f"unknown backend {self.backend!r}; expected 'spectral' or 'krylov'")
        if not self.krylov_tolerance > 0:
            raise ValueError("krylov_tolerance must be > 0")
        if self.krylov_max_dim < 2:
            raise ValueError("krylov_max_dim must be >= 2")


@dataclass(frozen=True, eq=False)
class SpectralCache:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @classmethod
    def from_hamiltonian(cls, h: HamiltonianOperator) -> "SpectralCache":
        vals, vecs = eigh_tridiagonal(h.diagonal, h.offdiagonal)
        vals.setflags(write=False)
        vecs.setflags(write=False)
        return cls(vals, vecs)

    @property
    def num_sites(self) -> int:
        return self.eigenvalues.size

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.T


def real_matmul(a: np.ndarray, z: np.ndarray) -> np.ndarray:
    """``a @ z`` for real ``a`` and complex ``z`` using one real GEMM."""
    one_d = z.ndim == 1
    zc = np.ascontiguousarray(z.reshape(z.shape[0], -1), dtype=complex)
    out = (a @ zc.view(float)).view(complex)
    return out[:, 0] if one_d else out


def spectral_evolve_batch(cache: SpectralCache, psi: np.ndarray, duration: float) -> np.ndarray:
    v = cache.eigenvectors
    phases = np.exp(-1j * cache.eigenvalues * duration)
    coeff = real_matmul(v.T, psi)
    coeff *= phases if coeff.ndim == 1 else phases[:, None]
    return real_matmul(v, coeff)


@numba.njit(cache=True, nogil=True)
def _lanczos_column(diag, hopping, v, duration, tol, max_dim, first_check, basis, alpha, beta):
    """exp(-i A duration) v for one tridiagonal A; returns (result, error estimate)."""
    n = v.size
    m_cap = min(max_dim, n)
    beta0 = np.sqrt(np.sum(np.abs(v) ** 2))
    out = np.zeros(n, dtype=np.complex128)
    if beta0 == 0.0:
        return out, 0.0
    for i in range(n):
        basis[0, i] = v[i] / beta0
    err = np.inf
    y = np.zeros(1, dtype=np.complex128)
    m = 0
    w = np.empty(n, dtype=np.complex128)
    for j in range(m_cap):
        # w = A q_j - beta_{j-1} q_{j-1}, alpha_j = <q_j, w>
        a_j = 0.0
        b_prev = beta[j - 1] if j > 0 else 0.0
        for i in range(n):
            acc = diag[i] * basis[j, i]
            if i > 0:
                acc += hopping * basis[j, i - 1]
            if i < n - 1:
                acc += hopping * basis[j, i + 1]
            if j > 0:
                acc -= b_prev * basis[j - 1, i]
            w[i] = acc
            a_j += (basis[j, i].conjugate() * acc).real
        alpha[j] = a_j
        # subtract alpha_j q_j and collect reorthogonalisation coefficients
        c_cur = 0.0 + 0.0j
        c_prev = 0.0 + 0.0j
        for i in range(n):
            w[i] -= a_j * basis[j, i]
            c_cur += basis[j, i].conjugate() * w[i]
            if j > 0:
                c_prev += basis[j - 1, i].conjugate() * w[i]
        norm2 = 0.0
        for i in range(n):
            wi = w[i] - c_cur * basis[j, i]
            if j > 0:
                wi -= c_prev * basis[j - 1, i]
            w[i] = wi
            norm2 += wi.real * wi.real + wi.imag * wi.imag
        b_j = np.sqrt(norm2)
        breakdown = b_j < 1e-14
        if breakdown:
            b_j = 0.0
        beta[j] = b_j
        m = j + 1
        check = breakdown or m == m_cap or (m >= first_check and (m - first_check) % 3 == 0)
        if check:
            t = np.zeros((m, m))
            for k in range(m):
                t[k, k] = alpha[k]
                if k + 1 < m:
                    t[k, k + 1] = beta[k]
                    t[k + 1, k] = beta[k]
            theta, s = np.linalg.eigh(t)
            y = np.zeros(m, dtype=np.complex128)
            for k in range(m):
                coef = np.exp(-1j * theta[k] * duration) * s[0, k]
                for r in range(m):
                    y[r] += s[r, k] * coef
            err = b_j * np.abs(y[m - 1])
            if breakdown or err <= tol:
                break
        inv = 1.0 / b_j
        for i in range(n):
            basis[j + 1, i] = w[i] * inv
    for k in range(m):
        for i in range(n):
            out[i] += y[k] * basis[k, i]
    return out * beta0, err


@numba.njit(cache=True, nogil=True)
def krylov_substeps(half_width, duration, max_dim):
    """Equal substeps keeping the phase range of each Lanczos step below max_dim / 2."""
    return max(1, int(math.ceil(half_width * abs(duration) / (0.5 * max_dim))))


@numba.njit(cache=True, nogil=True)
def _krylov_batch_kernel(base_diag, xs, alphas, hopping, psi, duration, tol, max_dim, errs, substeps):
    n, batch = psi.shape
    m_cap = min(max_dim, n)
    basis = np.empty((m_cap + 1, n), dtype=np.complex128)
    alpha = np.zeros(m_cap)
    beta = np.zeros(m_cap)
    out = np.empty_like(psi)
    for b in range(batch):
        diag = base_diag + alphas[b] * xs
        half_width = 0.5 * (diag.max() - diag.min()) + 2.0 * abs(hopping)
        n_sub = krylov_substeps(half_width, duration, max_dim)
        dt = duration / n_sub
        # Lanczos needs m of order the phase range; skip futile checks
        first_check = max(4, int(1.6 * half_width * dt))
        v = psi[:, b].copy()
        worst = 0.0
        for _ in range(n_sub):
            v, e = _lanczos_column(diag, hopping, v, dt, tol, max_dim, first_check, basis, alpha, beta)
            worst = max(worst, e)
        out[:, b] = v
        errs[b] = worst
        substeps[b] = n_sub
    return out


def krylov_evolve_batch(
    h: HamiltonianOperator,
    psi: np.ndarray,
    duration: float,
    settings: PropagatorSettings,
    alphas: np.ndarray | None = None,
    origin: float = 0.0,
) -> np.ndarray:
    """exp(-i (H + alpha_b X) duration) applied to column b of ``psi``."""
    psi = np.asarray(psi, dtype=complex)
    one_d = psi.ndim == 1
    if one_d:
        psi = psi[:, None]
    n_sites, batch = psi.shape
    if alphas is None:
        alphas = np.zeros(batch)
    alphas = np.ascontiguousarray(alphas, dtype=float)
    if duration == 0:
        out = psi.copy()
    else:
        xs = np.arange(n_sites) - float(origin)
        errs = np.zeros(batch)
        substeps = np.zeros(batch, dtype=np.int64)
        out = _krylov_batch_kernel(
            np.ascontiguousarray(h.diagonal), xs, alphas, h.hopping, np.ascontiguousarray(psi),
            float(duration), settings.krylov_tolerance, settings.krylov_max_dim, errs, substeps,
        )
        if np.any(errs > settings.krylov_tolerance):
            worst = int(np.argmax(errs))
            raise KrylovConvergenceError(
                float(errs[worst]), min(settings.krylov_max_dim, n_sites), settings.krylov_tolerance, column=worst
            )
    return out[:, 0] if one_d else out


def evolve_unitary(
    h: HamiltonianOperator,
    state: PureState,
    duration: float,
    settings: PropagatorSettings | None = None,
    cache: SpectralCache | None = None,
) -> PureState:
    """Return exp(-i H duration) |state>."""
    if duration < 0:
        raise ValueError(f"duration must be >= 0, got {duration}")
    settings = settings or PropagatorSettings()
    if duration == 0:
        return state
    if settings.backend == "spectral":
        cache = cache or SpectralCache.from_hamiltonian(h)
        out = spectral_evolve_batch(cache, state.amplitudes, duration)
    else:
        out = krylov_evolve_batch(h, state.amplitudes, duration, settings)
    return PureState(out, norm_tol=_CHAIN_NORM_TOL)


def tilt_kick_batch(psi: np.ndarray, phases: np.ndarray, origin: float = 0.0) -> np.ndarray:
    """Multiply column b by exp(-i theta_b (x - origin))."""
    x = np.arange(psi.shape[0]) - origin
    return psi * np.exp(-1j * np.outer(x, phases))


def apply_tilt_kick(state: PureState, kick_phase: float, origin: float = 0.0) -> PureState:
    """psi_x -> exp(-i theta (x - origin)) psi_x."""
    x = np.arange(len(state)) - origin
    return PureState(state.amplitudes * np.exp(-1j * kick_phase * x), norm_tol=_CHAIN_NORM_TOL)
