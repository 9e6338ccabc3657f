"""Population/state infidelities, quarter-decay timing, distribution summaries."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def _as_populations(a) -> np.ndarray:
    arr = getattr(a, "entries", a)
    arr = np.asarray(arr)
    if arr.ndim == 2:
        return np.real(np.diag(arr))
    return np.asarray(arr, dtype=float)


def _as_matrix(a) -> np.ndarray:
    arr = np.asarray(getattr(a, "entries", a))
    if arr.ndim != 2:
        raise ValueError("state infidelity needs density matrices")
    return arr


def population_infidelity(rho_e, rho_a) -> float:
    """sqrt(sum_x (p_e(x) - p_a(x))**2); accepts density matrices or population vectors."""
    pe, pa = _as_populations(rho_e), _as_populations(rho_a)
    if pe.shape != pa.shape:
        raise ValueError(f"dimension mismatch: {pe.shape} vs {pa.shape}")
    return float(np.linalg.norm(pe - pa))


def state_infidelity(rho_e, rho_a) -> float:
    """Frobenius norm of the density-matrix difference."""
    me, ma = _as_matrix(rho_e), _as_matrix(rho_a)
    if me.shape != ma.shape:
        raise ValueError(f"dimension mismatch: {me.shape} vs {ma.shape}")
    return float(np.linalg.norm(me - ma))


@dataclass(frozen=True)
class InfidelityReport:
    population_infidelity: float
    state_infidelity: float | None = None

    @classmethod
    def compare(cls, rho_e, rho_a) -> "InfidelityReport":
        ip = population_infidelity(rho_e, rho_a)
        try:
            i_s = state_infidelity(rho_e, rho_a)
        except ValueError:
            i_s = None
        return cls(ip, i_s)

    def as_dict(self) -> dict:
        return {"population_infidelity": self.population_infidelity, "state_infidelity": self.state_infidelity}


@dataclass(frozen=True)
class DecayTiming:
    peak_site: int
    quarter_decay_time: float | None
    final_ratio: float

    @property
    def reached(self) -> bool:
        return self.quarter_decay_time is not None


def quarter_decay_time(times, populations, fraction: float = 0.25) -> DecayTiming:
    """First time the initially most-populated site drops to ``fraction`` of its start value.

    ``populations`` has shape (n_times, L) and row 0 must be t = 0. The
    crossing is located by linear interpolation between samples; later
    re-crossings are ignored.
    """
    times = np.asarray(times, dtype=float)
    pops = np.asarray(populations, dtype=float)
    if times.size == 0 or times[0] != 0:
        raise ValueError("trajectory must start at t = 0")
    peak = int(np.argmax(pops[0]))
    ratio = pops[:, peak] / pops[0, peak]
    below = np.nonzero(ratio <= fraction)[0]
    if below.size == 0:
        return DecayTiming(peak, None, float(ratio[-1]))
    k = int(below[0])
    r0, r1 = ratio[k - 1], ratio[k]
    t0, t1 = times[k - 1], times[k]
    t_cross = t1 if r1 == r0 else t0 + (t1 - t0) * (r0 - fraction) / (r0 - r1)
    return DecayTiming(peak, float(t_cross), float(ratio[-1]))


DEFAULT_QUANTILES = (0.05, 0.1, 0.25, 0.5, 0.75, 0.9, 0.95)


def infidelity_distribution(values, bins=20, thresholds=(0.01,), quantiles=DEFAULT_QUANTILES, range=None) -> dict:
    """Summary statistics of a list of infidelities.

    ``bins`` is either a bin count or explicit edges (numpy.histogram rules).
    The median of an even count is the midpoint of the two central values.
    """
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise ValueError("infidelity_distribution needs at least one value")
    counts, edges = np.histogram(v, bins=bins, range=range)
    return {
        "count": int(v.size),
        "median": float(np.median(v)),
        "mean": float(np.mean(v)),
        "min": float(v.min()),
        "max": float(v.max()),
        "quantiles": {f"{q:g}": float(np.quantile(v, q)) for q in quantiles},
        "fraction_below": {f"{t:g}": float(np.mean(v < t)) for t in thresholds},
        "histogram": {"edges": edges.tolist(), "counts": counts.tolist()},
    }
