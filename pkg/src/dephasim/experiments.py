"""End-to-end studies: single-realization comparisons, disorder sweeps, (N, E) scans."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .lindblad import DensityMatrix, LindbladSettings, evolve_lindblad
from .metrics import InfidelityReport, infidelity_distribution, population_infidelity, quarter_decay_time
from .model import DephasingSpec, LatticeSpec, build_hamiltonian, ground_state, sample_disorder
from .propagator import PropagatorSettings, SpectralCache
from .protocols import ProtocolConfig, run_ensemble
from .seeding import derive_seed

log = logging.getLogger(__name__)

ENGINES = ("exact", "digital", "analogue")
STOP_RULES = ("fixed", "quarter_decay")

# documented arbitrary disorder seed for the single-realization presets
PRESET_DISORDER_SEED = 1


class SpecError(ValueError):
    """Invalid experiment definition; the message names the offending key."""


@dataclass(frozen=True)
class Budget:
    num_windows: int
    ensemble_size: int


@dataclass(frozen=True)
class ExperimentSpec:
    name: str = "custom"
    lattice: LatticeSpec = field(default_factory=lambda: LatticeSpec(400, 1.0, 0.2))
    gamma: float = 1e-4
    total_time: float = 653.0
    engines: tuple = ENGINES
    digital: Budget = Budget(80, 400)
    analogue: Budget = Budget(100, 500)
    disorder_seed: int | None = PRESET_DISORDER_SEED
    realizations: int = 1
    master_seed: int = 0
    stop_rule: str = "fixed"
    decay_t_max: float = 1500.0
    decay_sample_spacing: float = 10.0
    lindblad: LindbladSettings = LindbladSettings(base_step=2.0)
    propagator: PropagatorSettings = PropagatorSettings(backend="krylov")
    density: bool = True
    threads: int = 1
    scan_pairs: tuple = ()
    output_dir: str | None = None

    def __post_init__(self):
        if not self.engines:
            raise SpecError("engines: at least one engine must be selected")
        for e in self.engines:
            if e not in ENGINES:
                raise SpecError(f"engines: unknown engine {e!r}; expected a subset of {ENGINES}")
        if len(set(self.engines)) != len(self.engines):
            raise SpecError("engines: duplicate entries")
        if self.realizations < 1:
            raise SpecError("realizations: must be >= 1")
        if self.stop_rule not in STOP_RULES:
            raise SpecError(f"stop_rule: expected one of {STOP_RULES}, got {self.stop_rule!r}")
        if self.stop_rule == "quarter_decay" and "exact" not in self.engines:
            raise SpecError("stop_rule: quarter_decay needs the exact engine")
        if not self.total_time > 0:
            raise SpecError("total_time: must be > 0")
        if self.gamma < 0:
            raise SpecError("gamma: must be >= 0")
        if self.threads < 1:
            raise SpecError("threads: must be >= 1")
        if self.master_seed < 0 or (self.disorder_seed is not None and self.disorder_seed < 0):
            raise SpecError("seeds must be non-negative")

    @property
    def dephasing(self) -> DephasingSpec:
        return DephasingSpec(self.gamma)

    def protocol(self, mode: str, total_time: float | None = None, budget: Budget | None = None) -> ProtocolConfig:
        budget = budget or getattr(self, mode)
        return ProtocolConfig(mode, budget.num_windows, budget.ensemble_size, total_time or self.total_time, self.gamma)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["engines"] = list(self.engines)
        d["scan_pairs"] = [list(p) for p in self.scan_pairs]
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentSpec":
        return _spec_from_dict(data)

    def replace(self, **changes) -> "ExperimentSpec":
        return dataclasses.replace(self, **changes)

    def fingerprint(self) -> str:
        """Hash of everything that affects numbers (not threads or output location)."""
        d = self.to_dict()
        for k in ("threads", "output_dir", "name", "scan_pairs", "realizations"):
            d.pop(k)
        blob = json.dumps(d, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


_NESTED = {
    "lattice": (LatticeSpec, {"num_sites", "tunnelling_rate", "disorder_amplitude"}),
    "digital": (Budget, {"num_windows", "ensemble_size"}),
    "analogue": (Budget, {"num_windows", "ensemble_size"}),
    "lindblad": (LindbladSettings, {"base_step", "threshold", "max_halvings"}),
    "propagator": (PropagatorSettings, {"backend", "krylov_tolerance", "krylov_max_dim"}),
}


def _spec_from_dict(data: dict, base: ExperimentSpec | None = None) -> ExperimentSpec:
    base = base or ExperimentSpec()
    if not isinstance(data, dict):
        raise SpecError("config must be a JSON object")
    allowed = {f.name for f in dataclasses.fields(ExperimentSpec)} | {"preset"}
    unknown = sorted(set(data) - allowed)
    if unknown:
        raise SpecError(f"unknown config key(s): {', '.join(unknown)}")
    if "preset" in data:
        base = get_preset(data["preset"])
    changes = {}
    for key, value in data.items():
        if key == "preset":
            continue
        if key in _NESTED:
            cls, keys = _NESTED[key]
            if not isinstance(value, dict):
                raise SpecError(f"{key}: expected an object")
            bad = sorted(set(value) - keys)
            if bad:
                raise SpecError(f"unknown key(s) in {key}: {', '.join(key + '.' + b for b in bad)}")
            merged = {**dataclasses.asdict(getattr(base, key)), **value}
            try:
                changes[key] = cls(**merged)
            except (TypeError, ValueError) as exc:
                raise SpecError(f"{key}: {exc}") from exc
        elif key == "engines":
            changes[key] = tuple(value)
        elif key == "scan_pairs":
            try:
                changes[key] = tuple((int(n), int(e)) for n, e in value)
            except (TypeError, ValueError) as exc:
                raise SpecError("scan_pairs: expected a list of [num_windows, ensemble_size] pairs") from exc
        else:
            changes[key] = value
    try:
        return dataclasses.replace(base, **changes)
    except SpecError:
        raise
    except (TypeError, ValueError) as exc:
        raise SpecError(str(exc)) from exc


def realization_seed(master_seed: int, index: int) -> int:
    return derive_seed(master_seed, index)


def _fig2(name, gamma, total_time, digital, analogue):
    return ExperimentSpec(
        name=name,
        gamma=gamma,
        total_time=total_time,
        digital=Budget(*digital),
        analogue=Budget(*analogue),
        disorder_seed=PRESET_DISORDER_SEED,
    )


PRESETS = {
    "fig2a": _fig2("fig2a", 1e-4, 653.0, (80, 400), (100, 500)),
    "fig2b": _fig2("fig2b", 1e-4, 653.0, (20, 100), (30, 300)),
    "fig2c": _fig2("fig2c", 1e-4, 653.0, (5, 25), (15, 150)),
    "fig2d": _fig2("fig2d", 1e-3, 120.0, (20, 100), (30, 300)),
    "fig3": ExperimentSpec(
        name="fig3",
        gamma=1e-4,
        total_time=653.0,
        digital=Budget(80, 400),
        analogue=Budget(100, 500),
        disorder_seed=None,
        realizations=10_000,
        density=False,
    ),
}


def get_preset(name: str) -> ExperimentSpec:
    try:
        return PRESETS[name]
    except KeyError:
        raise SpecError(f"unknown preset {name!r}; available: {', '.join(PRESETS)}") from None


@dataclass(eq=False)
class ExperimentRecord:
    spec: ExperimentSpec
    disorder_seed: int
    total_time: float
    populations: dict = field(default_factory=dict)
    densities: dict = field(default_factory=dict)
    infidelities: dict = field(default_factory=dict)
    settings: dict = field(default_factory=dict)
    timing: dict = field(default_factory=dict)
    errors: dict = field(default_factory=dict)
    decay: dict | None = None

    @property
    def engines(self) -> list[str]:
        return [e for e in ENGINES if e in self.populations]


def _pairwise(record: ExperimentRecord):
    names = record.engines
    for i, a in enumerate(names):
        for b in names[i + 1 :]:
            ra = record.densities.get(a, record.populations[a])
            rb = record.densities.get(b, record.populations[b])
            record.infidelities[f"{a}-{b}"] = InfidelityReport.compare(ra, rb)


def _find_quarter_decay(spec, h, cache, rho0):
    times = np.arange(0.0, spec.decay_t_max + 0.5 * spec.decay_sample_spacing, spec.decay_sample_spacing)
    traj = evolve_lindblad(
        h, spec.dephasing, rho0, float(times[-1]), spec.lindblad, times, cache=cache, keep_states=False
    )
    return quarter_decay_time(traj.times, traj.populations), traj


def run_single_realization(spec: ExperimentSpec, disorder_seed: int | None = None) -> ExperimentRecord:
    """Run every selected engine from the ground state of one disorder realization.

    The disorder seed is ``disorder_seed``, else ``spec.disorder_seed``, else
    the first seed derived from ``spec.master_seed``.
    """
    if disorder_seed is not None:
        seed = int(disorder_seed)
    elif spec.disorder_seed is not None:
        seed = int(spec.disorder_seed)
    else:
        seed = realization_seed(spec.master_seed, 0)
    disorder = sample_disorder(spec.lattice, seed)
    h = build_hamiltonian(spec.lattice, disorder)
    cache = SpectralCache.from_hamiltonian(h)
    psi0, energy = ground_state(h)
    rho0 = DensityMatrix.from_pure(psi0)
    total_time = spec.total_time
    record = ExperimentRecord(spec, seed, total_time)
    record.settings["ground_energy"] = energy

    if spec.stop_rule == "quarter_decay":
        start = time.perf_counter()
        timing, traj = _find_quarter_decay(spec, h, cache, rho0)
        record.timing["decay_search"] = time.perf_counter() - start
        record.decay = {
            "peak_site": timing.peak_site,
            "quarter_decay_time": timing.quarter_decay_time,
            "final_ratio": timing.final_ratio,
            "sample_spacing": spec.decay_sample_spacing,
            "step": traj.step,
        }
        if not timing.reached:
            record.errors["stop_rule"] = (
                f"quarter decay not reached by t = {spec.decay_t_max}; peak ratio {timing.final_ratio:.4f}"
            )
            return record
        total_time = timing.quarter_decay_time
        record.total_time = total_time

    for engine in spec.engines:
        start = time.perf_counter()
        try:
            if engine == "exact":
                traj = evolve_lindblad(
                    h, spec.dephasing, rho0, total_time, spec.lindblad, [total_time], cache=cache,
                    keep_states=spec.density,
                )
                record.populations[engine] = traj.populations[-1]
                if spec.density:
                    record.densities[engine] = traj.states[-1]
                record.settings[engine] = {
                    "step": traj.step, "refinement_delta": traj.delta, "halvings": traj.halvings,
                    "base_step": spec.lindblad.base_step, "threshold": spec.lindblad.threshold,
                }
            else:
                config = spec.protocol(engine, total_time)
                res = run_ensemble(
                    h, config, psi0, spec.master_seed, seed, density=spec.density, threads=spec.threads,
                    cache=cache, settings=spec.propagator,
                )
                record.populations[engine] = res.averaged_populations
                if spec.density:
                    record.densities[engine] = res.averaged_density
                record.settings[engine] = {**config.as_dict(), **res.metadata}
        except Exception as exc:  # engine failures are recorded, the rest still run
            log.warning("engine %s failed on disorder seed %d: %s", engine, seed, exc)
            record.errors[engine] = f"{type(exc).__name__}: {exc}"
        record.timing[engine] = time.perf_counter() - start
    if not spec.density:
        record.densities.clear()
    _pairwise(record)
    return record


@dataclass(eq=False)
class SweepRecord:
    spec: ExperimentSpec
    rows: list  # dicts: realization, disorder_seed, ip_<engine>
    summaries: dict
    failures: list

    @property
    def protocol_engines(self) -> list[str]:
        return [e for e in self.spec.engines if e != "exact"]


def _sweep_row(spec, r):
    start = time.perf_counter()
    rec = run_single_realization(spec.replace(density=False), realization_seed(spec.master_seed, r))
    if rec.errors:
        return {"realization": r, "disorder_seed": rec.disorder_seed, "status": "failed", "errors": rec.errors}
    row = {"realization": r, "disorder_seed": rec.disorder_seed, "status": "ok"}
    for engine in spec.engines:
        if engine != "exact":
            row[f"ip_{engine}"] = rec.infidelities[f"exact-{engine}"].population_infidelity
    if "exact" in rec.settings:
        row["exact_step"] = rec.settings["exact"]["step"]
    row["elapsed"] = time.perf_counter() - start
    return row


PROGRESS_FILE = "progress.jsonl"


def _read_progress(path: Path, fingerprint: str) -> dict:
    done = {}
    if not path.exists():
        return done
    with path.open(encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            entry = json.loads(line)
            if "fingerprint" in entry:
                if entry["fingerprint"] != fingerprint:
                    raise SpecError(f"{path} was written by a different experiment spec; use another output dir")
                continue
            done[entry["realization"]] = entry
    return done


def run_disorder_sweep(spec: ExperimentSpec, progress_dir: str | Path | None = None) -> SweepRecord:
    """I_p of each protocol engine against the exact engine over ``spec.realizations`` disorders.

    Realization seeds are derived from ``master_seed``. With ``progress_dir``
    each finished realization is appended to ``progress.jsonl`` there and
    realizations already present are not recomputed.
    """
    if "exact" not in spec.engines or len(spec.engines) < 2:
        raise SpecError("engines: a sweep needs the exact engine and at least one protocol engine")
    progress_dir = progress_dir or spec.output_dir
    fingerprint = spec.fingerprint()
    done = {}
    fh = None
    if progress_dir is not None:
        path = Path(progress_dir) / PROGRESS_FILE
        path.parent.mkdir(parents=True, exist_ok=True)
        done = _read_progress(path, fingerprint)
        fresh = not path.exists() or path.stat().st_size == 0
        fh = path.open("a", encoding="utf-8", newline="\n")
        if fresh:
            fh.write(json.dumps({"fingerprint": fingerprint, "spec": spec.to_dict()}, sort_keys=True) + "\n")
            fh.flush()
    todo = [r for r in range(spec.realizations) if r not in done]
    inner = spec.replace(threads=1) if spec.threads > 1 else spec

    def work(r):
        return _sweep_row(inner, r)

    try:
        if spec.threads > 1:
            pool = ThreadPoolExecutor(max_workers=spec.threads)
            results = pool.map(work, todo)
        else:
            pool = None
            results = map(work, todo)
        for row in results:
            done[row["realization"]] = row
            log.info("realization %d: %s", row["realization"], {k: v for k, v in row.items() if k.startswith("ip_")})
            if fh is not None:
                fh.write(json.dumps(row, sort_keys=True) + "\n")
                fh.flush()
        if pool is not None:
            pool.shutdown()
    finally:
        if fh is not None:
            fh.close()

    rows = [done[r] for r in range(spec.realizations)]
    ok = [row for row in rows if row["status"] == "ok"]
    failures = [row for row in rows if row["status"] != "ok"]
    summaries = {}
    for engine in spec.engines:
        if engine == "exact" or not ok:
            continue
        summary = infidelity_distribution([row[f"ip_{engine}"] for row in ok], bins=20, thresholds=(0.005, 0.01))
        summaries[engine] = summary
    return SweepRecord(spec, ok, summaries, failures)


@dataclass(eq=False)
class ScanRecord:
    spec: ExperimentSpec
    table: list  # dicts: engine, num_windows, ensemble_size, mean_ip, stderr_ip, n
    values: dict  # (engine, N, E) -> list of I_p per realization
    trend: dict


def run_convergence_scan(spec: ExperimentSpec, pairs=None, engines=None) -> ScanRecord:
    """Mean and standard error of I_p per (N, E) over ``spec.realizations`` disorders."""
    pairs = [tuple(p) for p in (pairs if pairs is not None else spec.scan_pairs)]
    if not pairs:
        raise SpecError("scan_pairs: need at least one (num_windows, ensemble_size) pair")
    engines = list(engines or [e for e in spec.engines if e != "exact"])
    if not engines:
        raise SpecError("engines: a scan needs at least one protocol engine")
    values = {}
    for r in range(spec.realizations):
        seed = realization_seed(spec.master_seed, r)
        disorder = sample_disorder(spec.lattice, seed)
        h = build_hamiltonian(spec.lattice, disorder)
        cache = SpectralCache.from_hamiltonian(h)
        psi0, _ = ground_state(h)
        traj = evolve_lindblad(
            h, spec.dephasing, DensityMatrix.from_pure(psi0), spec.total_time, spec.lindblad, [spec.total_time],
            cache=cache, keep_states=False,
        )
        p_exact = traj.populations[-1]
        for engine in engines:
            for n_win, n_ens in pairs:
                config = spec.protocol(engine, budget=Budget(n_win, n_ens))
                res = run_ensemble(
                    h, config, psi0, spec.master_seed, seed, density=False, threads=spec.threads, cache=cache,
                    settings=spec.propagator,
                )
                values.setdefault((engine, n_win, n_ens), []).append(population_infidelity(p_exact, res.averaged_populations))
    table = []
    for engine in engines:
        for n_win, n_ens in pairs:
            v = np.array(values[(engine, n_win, n_ens)])
            stderr = float(v.std(ddof=1) / np.sqrt(v.size)) if v.size > 1 else None
            table.append({
                "engine": engine, "num_windows": n_win, "ensemble_size": n_ens,
                "mean_ip": float(v.mean()), "stderr_ip": stderr, "n": int(v.size),
            })
    trend = {}
    for engine in engines:
        means = [row["mean_ip"] for row in table if row["engine"] == engine]
        trend[engine] = {"monotone_decreasing": bool(all(b <= a for a, b in zip(means, means[1:])))}
    return ScanRecord(spec, table, values, trend)
