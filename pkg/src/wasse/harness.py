"""Scenario configuration, Monte-Carlo driver, error metrics, sweeps and the
anomaly experiment.

Errors are stored in radians and per-unit; degrees appear only when values
are reported (tables and CSV rows labelled ``phase_deg``).
"""

from __future__ import annotations

import csv
import dataclasses
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence, TextIO

import numpy as np

from wasse.baseline import init_ukf_state, ukf_step
from wasse.case import load_case
from wasse.errors import ExperimentFailed, ScenarioError, WasseError
from wasse.fusion import EdgeInput, exchange, fuse, write_messages_csv
from wasse.grid import PartitionedGrid, assignment_from_regions, build_partition, default_partition
from wasse.linalg import jitter_events
from wasse.mgst import KernelParams, kernel_value
from wasse.noise import PRESETS, NoiseComponent, NoiseSpec
from wasse.truth import ChannelNoise, Trajectory, inject_anomaly, simulate
from wasse.ukf import UTParams
from wasse.vbukf import FilterConfig, init_state, local_step

PROPOSED = "dmgst_vbukf"
BASELINE = "ukf"
ALGORITHMS = (PROPOSED, BASELINE)

MAGNITUDE, PHASE = 0, 1
QUANTITIES = ("magnitude", "phase")
MAX_FAILURE_RATE = 0.05
BASELINE_NOTE = "ukf column: per-region UKF with fixed R, edge measurements ignored"


@dataclass(frozen=True)
class AnomalySpec:
    step: int = 55
    region: int = 1
    factor: float = 0.75


@dataclass(frozen=True)
class FusionSettings:
    enabled: bool = True
    closed_loop: bool = True
    edge_R: float = 1e-3
    neighbor_anchor: str = "posterior"


@dataclass(frozen=True)
class Scenario:
    """Everything needed to reproduce one experiment.

    ``baseline_R`` is the baseline's fixed noise variance; ``None`` means the
    true per-channel variance of ``noise``. ``process_noise=False`` keeps the
    truth on its noise-free trajectory (the filters still assume ``Q``).
    """

    case: str = "ieee14"
    partition: Mapping[int, Sequence[int]] | None = None
    placement: Mapping[int, Sequence[int]] | None = None
    noise: ChannelNoise = field(default_factory=lambda: ChannelNoise.uniform(PRESETS["gauss_mix_100"]))
    process_noise: bool = True
    algorithms: tuple[str, ...] = ALGORITHMS
    filter: FilterConfig = field(default_factory=FilterConfig)
    fusion: FusionSettings = field(default_factory=FusionSettings)
    baseline_R: float | None = 1e-3
    steps: int = 100
    runs: int = 100
    seed: int = 0
    anomaly: AnomalySpec | None = None

    def __post_init__(self):
        if self.steps < 1:
            raise ScenarioError("steps must be >= 1")
        if self.runs < 1:
            raise ScenarioError("runs must be >= 1")
        if not self.algorithms or any(a not in ALGORITHMS for a in self.algorithms):
            raise ScenarioError(f"algorithms must be a non-empty subset of {ALGORITHMS}")
        if self.anomaly is not None and not 1 <= self.anomaly.step <= self.steps:
            raise ScenarioError(f"anomaly step {self.anomaly.step} outside [1, {self.steps}]")
        if self.baseline_R is not None and not self.baseline_R > 0:
            raise ScenarioError("baseline_R must be positive")

    def replace(self, **changes) -> "Scenario":
        return dataclasses.replace(self, **changes)

    def build_grid(self) -> PartitionedGrid:
        case = load_case(self.case)
        if self.partition is None:
            if self.placement is not None:
                from wasse.grid import DEFAULT_PARTITIONS

                return build_partition(
                    case, assignment_from_regions(DEFAULT_PARTITIONS[self.case]), pmu_buses=self.placement
                )
            return default_partition(self.case, case)
        return build_partition(case, assignment_from_regions(self.partition), pmu_buses=self.placement)


# -- scenario files ---------------------------------------------------------

_SCENARIO_KEYS = {
    "case", "partition", "placement", "noise", "process_noise", "algorithms", "ut", "kernel", "vb",
    "fusion", "baseline_R", "steps", "runs", "seed", "anomaly",
}
_NOISE_KEYS = ("scada_v", "scada_pq", "pmu", "edge")


def _noise_spec(value: Any) -> NoiseSpec:
    if isinstance(value, str):
        if value not in PRESETS:
            raise ScenarioError(f"unknown noise preset {value!r}; known: {sorted(PRESETS)}")
        return PRESETS[value]
    if isinstance(value, Mapping) and set(value) == {"components"}:
        try:
            comps = tuple(
                NoiseComponent(float(c["weight"]), str(c["kind"]), float(c.get("mean", 0.0)), float(c["variance"]))
                for c in value["components"]
            )
            return NoiseSpec(comps)
        except (KeyError, TypeError, ValueError) as exc:
            raise ScenarioError(f"bad noise spec {value!r}: {exc}") from exc
    raise ScenarioError(f"noise spec must be a preset name or {{'components': [...]}}, got {value!r}")


def _sub(cls, raw: Any, what: str):
    if raw is None:
        return cls()
    if not isinstance(raw, Mapping):
        raise ScenarioError(f"{what} must be an object")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(raw) - names
    if unknown:
        raise ScenarioError(f"unknown {what} keys: {sorted(unknown)}")
    try:
        return cls(**raw)
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"invalid {what}: {exc}") from exc


def _int_map(raw: Any, what: str) -> dict[int, list[int]] | None:
    if raw is None:
        return None
    try:
        return {int(k): [int(b) for b in v] for k, v in raw.items()}
    except (AttributeError, TypeError, ValueError) as exc:
        raise ScenarioError(f"{what} must map region ids to bus lists") from exc


def scenario_from_dict(d: Mapping[str, Any]) -> Scenario:
    unknown = set(d) - _SCENARIO_KEYS
    if unknown:
        raise ScenarioError(f"unknown scenario keys: {sorted(unknown)}")
    noise_raw = d.get("noise", "gauss_mix_100")
    if isinstance(noise_raw, str) or (isinstance(noise_raw, Mapping) and "components" in noise_raw):
        noise = ChannelNoise.uniform(_noise_spec(noise_raw))
    elif isinstance(noise_raw, Mapping):
        extra = set(noise_raw) - set(_NOISE_KEYS)
        if extra:
            raise ScenarioError(f"unknown noise channels: {sorted(extra)}")
        base = ChannelNoise.uniform(PRESETS["gauss_mix_100"])
        noise = ChannelNoise(
            **{k: _noise_spec(noise_raw[k]) if k in noise_raw else getattr(base, k) for k in _NOISE_KEYS}
        )
    else:
        raise ScenarioError(f"bad noise entry {noise_raw!r}")
    vb = dict(d.get("vb") or {})
    if "fixed_R" in vb:
        raise ScenarioError("fixed_R cannot be set from a scenario file")
    cfg = _sub(FilterConfig, vb, "vb")
    cfg = dataclasses.replace(cfg, ut=_sub(UTParams, d.get("ut"), "ut"), kernel=_sub(KernelParams, d.get("kernel"), "kernel"))
    anomaly = d.get("anomaly")
    try:
        return Scenario(
            case=str(d.get("case", "ieee14")),
            partition=_int_map(d.get("partition"), "partition"),
            placement=_int_map(d.get("placement"), "placement"),
            noise=noise,
            process_noise=bool(d.get("process_noise", True)),
            algorithms=tuple(d.get("algorithms", ALGORITHMS)),
            filter=cfg,
            fusion=_sub(FusionSettings, d.get("fusion"), "fusion"),
            baseline_R=None if d.get("baseline_R", 1e-3) == "true" else float(d.get("baseline_R", 1e-3)),
            steps=int(d.get("steps", 100)),
            runs=int(d.get("runs", 100)),
            seed=int(d.get("seed", 0)),
            anomaly=None if anomaly is None else _sub(AnomalySpec, anomaly, "anomaly"),
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ScenarioError):
            raise
        raise ScenarioError(str(exc)) from exc


BUNDLED_SCENARIOS = ("default", "robust14", "laplace39", "gaussian14", "sweep", "anomaly")


def load_scenario(path: str | Path) -> Scenario:
    """Load a scenario JSON file, or a bundled scenario by name."""
    if isinstance(path, str) and path in BUNDLED_SCENARIOS and not Path(path).exists():
        text = resources.files("wasse").joinpath("data", f"{path}.json").read_text(encoding="utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: {exc}") from exc
    if not isinstance(data, Mapping):
        raise ScenarioError(f"{path}: top level must be an object")
    return scenario_from_dict(data)


# -- single run ---------------------------------------------------------------


def true_noise_R(region, noise: ChannelNoise) -> np.ndarray:
    lay = region.h.layout
    var = np.empty(region.beta)
    for sl, spec in ((lay.scada_v, noise.scada_v), (lay.flows, noise.scada_pq), (lay.pmu, noise.pmu)):
        var[sl] = spec.variance if not spec.is_noiseless else 1e-10
    return np.diag(var)


@dataclass
class RunResult:
    run: int
    errors: dict[str, np.ndarray]  # algorithm -> (steps, nbus, 2)
    diagnostics: list[tuple]
    failure: str | None = None


DIAGNOSTIC_FIELDS = (
    "run", "step", "region", "vb_iterations", "fp_iterations", "fp_converged", "min_weight", "jitter_events",
)


def _bus_errors(grid: PartitionedGrid, est: Mapping[int, np.ndarray], truth: Mapping[int, np.ndarray], out: np.ndarray):
    col = {b: i for i, b in enumerate(grid.case.bus_ids)}
    for r in grid.regions:
        d = (est[r.region_id] - truth[r.region_id]).reshape(-1, 2)
        for k, b in enumerate(r.bus_ids):
            out[col[b]] = d[k]


def frames_for(traj: Trajectory, scenario: Scenario, m: int):
    frames = traj.frames[m - 1]
    a = scenario.anomaly
    if a is not None and m == a.step:
        frames = inject_anomaly(frames, a.region, a.factor)
    return frames


def run_proposed(grid, traj, scenario, run=0, diagnostics=None, messages: TextIO | None = None) -> np.ndarray:
    cfg, fus = scenario.filter, scenario.fusion
    states = {r.region_id: init_state(r, cfg) for r in grid.regions}
    err = np.empty((traj.steps, len(grid.case.bus_ids), 2))
    for m in range(1, traj.steps + 1):
        frames = frames_for(traj, scenario, m)
        local = {}
        for r in grid.regions:
            j0 = jitter_events()
            local[r.region_id], d = local_step(states[r.region_id], r, frames[r.region_id].z, cfg, m)
            if diagnostics is not None:
                diagnostics.append(
                    (run, m, r.region_id, d.vb_iterations, sum(d.fp_iterations), int(d.fp_converged),
                     d.min_weight, jitter_events() - j0)
                )
        report = {n: st.v for n, st in local.items()}
        if fus.enabled and any(grid.neighbors[n] for n in local):
            inbox = exchange(grid.neighbors, local, cfg.ut)
            if messages is not None:
                write_messages_csv(messages, m, inbox)
            fused_states = {}
            for n, st in local.items():
                edges = [EdgeInput(frames[n].edge[i], grid.edge_h[(n, i)], s) for i, s in inbox[n].items()]
                f = fuse(st, edges, cfg.ut, fus.edge_R, fus.neighbor_anchor)
                report[n] = f.v
                fused_states[n] = dataclasses.replace(st, v=f.v, P=f.P, chi=f.chi, C=f.C) if fus.closed_loop else st
            local = fused_states
        states = local
        _bus_errors(grid, report, traj.states[m - 1], err[m - 1])
    return err


def run_baseline(grid, traj, scenario) -> np.ndarray:
    ut = scenario.filter.ut
    R = {
        r.region_id: true_noise_R(r, scenario.noise) if scenario.baseline_R is None else scenario.baseline_R * np.eye(r.beta)
        for r in grid.regions
    }
    states = {r.region_id: init_ukf_state(r, scenario.filter.P0_scale) for r in grid.regions}
    err = np.empty((traj.steps, len(grid.case.bus_ids), 2))
    for m in range(1, traj.steps + 1):
        frames = frames_for(traj, scenario, m)
        for r in grid.regions:
            n = r.region_id
            states[n] = ukf_step(states[n], r, frames[n].z, R[n], ut, m)
        _bus_errors(grid, {n: s.v for n, s in states.items()}, traj.states[m - 1], err[m - 1])
    return err


def run_single(scenario: Scenario, grid: PartitionedGrid, run: int, diagnostics: bool = False) -> RunResult:
    traj = simulate(grid, scenario.steps, scenario.noise, scenario.seed, run, scenario.process_noise)
    diag: list[tuple] | None = [] if diagnostics else None
    errors = {}
    try:
        for alg in scenario.algorithms:
            errors[alg] = run_proposed(grid, traj, scenario, run, diag) if alg == PROPOSED else run_baseline(grid, traj, scenario)
            if not np.all(np.isfinite(errors[alg])):
                raise ArithmeticError(f"{alg} produced non-finite estimates")
    except (WasseError, ArithmeticError, np.linalg.LinAlgError) as exc:
        return RunResult(run, {}, diag or [], f"{type(exc).__name__}: {exc}")
    return RunResult(run, errors, diag or [])


def _run_chunk(scenario: Scenario, runs: Sequence[int], diagnostics: bool) -> list[RunResult]:
    grid = scenario.build_grid()
    return [run_single(scenario, grid, r, diagnostics) for r in runs]


# -- Monte Carlo ----------------------------------------------------------------


def rmse(errors: np.ndarray) -> np.ndarray:
    """Root mean square over the leading (run) axis."""
    e = np.asarray(errors, dtype=float)
    if e.ndim == 0 or e.shape[0] < 1:
        raise ValueError("need at least one run")
    return np.sqrt(np.mean(e**2, axis=0))


def armse(series: np.ndarray) -> np.ndarray:
    """Time mean of an RMSE series (leading axis is time)."""
    s = np.asarray(series, dtype=float)
    if s.ndim == 0 or s.shape[0] < 1:
        raise ValueError("need at least one step")
    return np.mean(s, axis=0)


def to_report_units(values: np.ndarray, quantity: int) -> np.ndarray:
    return np.degrees(values) if quantity == PHASE else values


@dataclass
class MonteCarloResult:
    scenario: Scenario
    bus_ids: tuple[int, ...]
    errors: dict[str, np.ndarray]  # algorithm -> (runs_ok, steps, nbus, 2), radians
    runs_ok: list[int]
    failures: list[tuple[int, str]]
    diagnostics: list[tuple] = field(default_factory=list)

    def bus_index(self, bus: int) -> int:
        return self.bus_ids.index(bus)

    def rmse(self, alg: str) -> np.ndarray:
        return rmse(self.errors[alg])

    def armse(self, alg: str) -> np.ndarray:
        return armse(self.rmse(alg))

    def armse_at(self, alg: str, bus: int, quantity: str) -> float:
        """ARMSE in report units: per-unit for magnitude, degrees for phase."""
        q = QUANTITIES.index(quantity)
        return float(to_report_units(self.armse(alg)[self.bus_index(bus), q], q))

    def rmse_series(self, alg: str, bus: int, quantity: str) -> np.ndarray:
        q = QUANTITIES.index(quantity)
        return to_report_units(self.rmse(alg)[:, self.bus_index(bus), q], q)


def run_monte_carlo(scenario: Scenario, jobs: int = 1, diagnostics: bool = False) -> MonteCarloResult:
    grid = scenario.build_grid()
    runs = list(range(scenario.runs))
    if jobs > 1 and len(runs) > 1:
        chunks = [runs[i::jobs] for i in range(jobs) if runs[i::jobs]]
        with ProcessPoolExecutor(max_workers=len(chunks)) as ex:
            parts = list(ex.map(_run_chunk, [scenario] * len(chunks), chunks, [diagnostics] * len(chunks)))
        results = sorted((r for p in parts for r in p), key=lambda r: r.run)
    else:
        results = [run_single(scenario, grid, r, diagnostics) for r in runs]

    failures = [(r.run, r.failure) for r in results if r.failure]
    if len(failures) > MAX_FAILURE_RATE * scenario.runs:
        raise ExperimentFailed(f"{len(failures)} of {scenario.runs} runs failed; first: {failures[0][1]}")
    ok = [r for r in results if not r.failure]
    if not ok:
        raise ExperimentFailed("every run failed")
    errors = {alg: np.stack([r.errors[alg] for r in ok]) for alg in scenario.algorithms}
    diag = sorted((row for r in results for row in r.diagnostics), key=lambda t: t[:3])
    return MonteCarloResult(scenario, grid.case.bus_ids, errors, [r.run for r in ok], failures, diag)


# -- sweeps ----------------------------------------------------------------------

SWEEP_XI = (1.8, 1.9, 2.0, 2.1, 2.2)
SWEEP_GAMMA = (6.0, 8.0, 10.0, 12.0, 14.0)


@dataclass
class SweepResult:
    xis: tuple[float, ...]
    gammas: tuple[float, ...]
    bus: int
    phase: np.ndarray  # (len(gammas), len(xis)), degrees
    magnitude: np.ndarray  # per-unit

    def argmin(self, quantity: str = "phase") -> tuple[float, float]:
        """``(gamma, xi)`` of the smallest ARMSE."""
        t = getattr(self, quantity)
        g, x = np.unravel_index(int(np.argmin(t)), t.shape)
        return self.gammas[g], self.xis[x]

    def row_argmin(self, quantity: str = "phase") -> dict[float, float]:
        """Best xi for each gamma row."""
        t = getattr(self, quantity)
        return {g: self.xis[int(np.argmin(t[k]))] for k, g in enumerate(self.gammas)}


def param_sweep(
    scenario: Scenario,
    xis: Sequence[float] = SWEEP_XI,
    gammas: Sequence[float] = SWEEP_GAMMA,
    bus: int = 1,
    jobs: int = 1,
) -> SweepResult:
    if not xis or not gammas:
        raise ScenarioError("sweep grid must be non-empty")
    base = scenario.replace(algorithms=(PROPOSED,))
    phase = np.empty((len(gammas), len(xis)))
    mag = np.empty_like(phase)
    for gi, g in enumerate(gammas):
        for xi_i, xi in enumerate(xis):
            kern = dataclasses.replace(base.filter.kernel, xi=float(xi), gamma=float(g))
            res = run_monte_carlo(base.replace(filter=dataclasses.replace(base.filter, kernel=kern)), jobs)
            phase[gi, xi_i] = res.armse_at(PROPOSED, bus, "phase")
            mag[gi, xi_i] = res.armse_at(PROPOSED, bus, "magnitude")
    return SweepResult(tuple(xis), tuple(gammas), bus, phase, mag)


# -- anomaly experiment ----------------------------------------------------------

PRE_WINDOW = (30, 54)


@dataclass(frozen=True)
class RecoveryStats:
    algorithm: str
    bus: int
    quantity: str
    pre_mean: float
    peak: float
    recovery_step: int | None

    @property
    def ratio(self) -> float:
        return self.peak / self.pre_mean if self.pre_mean > 0 else math.inf


def recovery_stats(series: np.ndarray, anomaly_step: int, pre_window=PRE_WINDOW) -> tuple[float, float, int | None]:
    """``(pre_mean, peak, recovery_step)`` of a 1-indexed RMSE series.

    The peak is the largest value at or after the anomaly; the recovery step
    is the first step at or after the anomaly whose RMSE is within twice the
    pre-anomaly mean (``None`` if that never happens).
    """
    lo, hi = pre_window
    pre = float(np.mean(series[lo - 1 : hi]))
    tail = np.asarray(series[anomaly_step - 1 :])
    back = np.flatnonzero(tail <= 2.0 * pre)
    rec = anomaly_step + int(back[0]) if back.size else None
    return pre, float(tail.max()), rec


@dataclass
class AnomalyResult:
    result: MonteCarloResult
    stats: list[RecoveryStats]

    def for_algorithm(self, alg: str, quantity: str) -> dict[int, RecoveryStats]:
        return {s.bus: s for s in self.stats if s.algorithm == alg and s.quantity == quantity}


def anomaly_experiment(scenario: Scenario, jobs: int = 1) -> AnomalyResult:
    if scenario.anomaly is None:
        scenario = scenario.replace(anomaly=AnomalySpec())
    a = scenario.anomaly
    if a.step <= PRE_WINDOW[1]:
        raise ScenarioError(f"anomaly step must come after the pre-anomaly window {PRE_WINDOW}")
    res = run_monte_carlo(scenario, jobs)
    buses = scenario.build_grid().region(a.region).bus_ids
    stats = []
    for alg in scenario.algorithms:
        for b in buses:
            for q in QUANTITIES:
                pre, peak, rec = recovery_stats(res.rmse_series(alg, b, q), a.step)
                stats.append(RecoveryStats(alg, b, q, pre, peak, rec))
    return AnomalyResult(res, stats)


# -- CSV output ------------------------------------------------------------------------


def _f(x: float) -> str:
    return repr(float(x))


def write_rmse_csv(res: MonteCarloResult, fh: TextIO) -> None:
    """Rows ``algorithm, bus, quantity, step, value``; quantities are
    ``magnitude_pu``, ``phase_deg`` and ``phase_rad``."""
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["algorithm", "bus", "quantity", "step", "value"])
    for alg in res.scenario.algorithms:
        r = res.rmse(alg)
        for bi, b in enumerate(res.bus_ids):
            for name, col, conv in (("magnitude_pu", 0, 1.0), ("phase_deg", 1, 180.0 / math.pi), ("phase_rad", 1, 1.0)):
                for m in range(r.shape[0]):
                    w.writerow([alg, b, name, m + 1, _f(r[m, bi, col] * conv)])


def write_armse_csv(res: MonteCarloResult, fh: TextIO) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["algorithm", "bus", "quantity", "value"])
    for alg in res.scenario.algorithms:
        a = res.armse(alg)
        for bi, b in enumerate(res.bus_ids):
            w.writerow([alg, b, "magnitude_pu", _f(a[bi, 0])])
            w.writerow([alg, b, "phase_deg", _f(a[bi, 1] * 180.0 / math.pi)])
            w.writerow([alg, b, "phase_rad", _f(a[bi, 1])])


def write_errors_csv(res: MonteCarloResult, fh: TextIO) -> None:
    """Raw per-run errors ``algorithm, run, step, bus, U_err, theta_err_rad``."""
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["algorithm", "run", "step", "bus", "U_err", "theta_err_rad"])
    for alg in res.scenario.algorithms:
        e = res.errors[alg]
        for k, run in enumerate(res.runs_ok):
            for m in range(e.shape[1]):
                for bi, b in enumerate(res.bus_ids):
                    w.writerow([alg, run, m + 1, b, _f(e[k, m, bi, 0]), _f(e[k, m, bi, 1])])


def write_diagnostics_csv(res: MonteCarloResult, fh: TextIO) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(DIAGNOSTIC_FIELDS)
    for row in res.diagnostics:
        w.writerow([_f(x) if isinstance(x, float) else x for x in row])


def write_sweep_csv(sweep: SweepResult, fh: TextIO) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["gamma", "xi", "bus", "quantity", "armse"])
    for gi, g in enumerate(sweep.gammas):
        for xi_i, xi in enumerate(sweep.xis):
            w.writerow([g, xi, sweep.bus, "phase_deg", _f(sweep.phase[gi, xi_i])])
            w.writerow([g, xi, sweep.bus, "magnitude_pu", _f(sweep.magnitude[gi, xi_i])])


def write_kernel_shape_csv(
    fh: TextIO, kernel: KernelParams, xis: Sequence[float] = SWEEP_XI, points: int = 121
) -> None:
    """Kernel value against error magnitude for several shape parameters, next
    to the Gaussian ``exp(-e^2 / (2 gamma^2))`` (written with ``xi`` empty)."""
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["xi", "error", "kernel"])
    e = np.linspace(0.0, 5.0 * kernel.gamma, points)
    for xi in xis:
        k = kernel_value(e, dataclasses.replace(kernel, xi=float(xi)))
        w.writerows([xi, _f(a), _f(b)] for a, b in zip(e, k))
    w.writerows(["", _f(a), _f(b)] for a, b in zip(e, np.exp(-(e**2) / (2.0 * kernel.gamma**2))))


def write_recovery_csv(an: AnomalyResult, fh: TextIO) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["algorithm", "bus", "quantity", "pre_mean", "peak", "ratio", "recovery_step"])
    for s in an.stats:
        w.writerow([s.algorithm, s.bus, s.quantity, _f(s.pre_mean), _f(s.peak), _f(s.ratio),
                    "" if s.recovery_step is None else s.recovery_step])


def format_armse_table(res: MonteCarloResult, buses: Iterable[int] | None = None) -> str:
    buses = list(buses) if buses is not None else list(res.bus_ids)
    algs = res.scenario.algorithms
    head = f"{'bus':>4}  " + "  ".join(f"{a + ' |V| (pu)':>22}  {a + ' ang (deg)':>22}" for a in algs)
    lines = [head]
    for b in buses:
        cells = []
        for a in algs:
            cells.append(f"{res.armse_at(a, b, 'magnitude'):>22.6g}  {res.armse_at(a, b, 'phase'):>22.6g}")
        lines.append(f"{b:>4}  " + "  ".join(cells))
    if BASELINE in algs:
        lines.append(f"# {BASELINE_NOTE}")
    if res.failures:
        lines.append(f"# {len(res.failures)} run(s) excluded after numeric failure")
    return "\n".join(lines) + "\n"


def write_outputs(res: MonteCarloResult, out: str | Path, diagnostics: bool = False) -> Path:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "rmse.csv", "w", newline="") as fh:
        write_rmse_csv(res, fh)
    with open(out / "armse.csv", "w", newline="") as fh:
        write_armse_csv(res, fh)
    with open(out / "errors.csv", "w", newline="") as fh:
        write_errors_csv(res, fh)
    if diagnostics:
        with open(out / "diagnostics.csv", "w", newline="") as fh:
            write_diagnostics_csv(res, fh)
    (out / "armse.txt").write_text(format_armse_table(res))
    return out
