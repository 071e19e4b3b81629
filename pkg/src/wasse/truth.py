"""Ground-truth trajectories and noisy regional/edge measurement frames."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from typing import Mapping, TextIO

import numpy as np

from wasse.errors import NoSuchRegion
from wasse.grid import PartitionedGrid, RegionModel
from wasse.noise import MEASUREMENT, PROCESS, NoiseSpec, sample, sample_gaussian_vector, substream


@dataclass(frozen=True)
class ChannelNoise:
    """Measurement noise per channel class."""

    scada_v: NoiseSpec
    scada_pq: NoiseSpec
    pmu: NoiseSpec
    edge: NoiseSpec = field(default_factory=lambda: NoiseSpec.gaussian(1e-3))

    @classmethod
    def uniform(cls, spec: NoiseSpec, edge: NoiseSpec | None = None) -> "ChannelNoise":
        return cls(spec, spec, spec, edge if edge is not None else NoiseSpec.gaussian(1e-3))

    @classmethod
    def noiseless(cls) -> "ChannelNoise":
        n = NoiseSpec.noiseless()
        return cls(n, n, n, n)


@dataclass
class MeasurementFrame:
    z: np.ndarray
    edge: dict[int, np.ndarray] = field(default_factory=dict)  # neighbor id -> z_ni


@dataclass
class Trajectory:
    states: list[dict[int, np.ndarray]]  # index m-1 -> region -> v_{n,m}
    frames: list[dict[int, MeasurementFrame]]

    @property
    def steps(self) -> int:
        return len(self.states)


def step_state(region: RegionModel, v_prev: np.ndarray, rng: np.random.Generator | None) -> np.ndarray:
    """``F v_prev + G v_ss + q`` with ``q ~ N(0, Q)``; noise-free when ``rng`` is None."""
    # same as F v + G v_ss since G = I - F, but exact at the steady state
    v = region.steady_state + region.F @ (v_prev - region.steady_state)
    if rng is None:
        return v
    return sample_gaussian_vector(v, region.Q, rng)


def _noisy(values: np.ndarray, spec: NoiseSpec, rng: np.random.Generator) -> np.ndarray:
    if values.size == 0 or spec.is_noiseless:
        return values.copy()
    return values + sample(spec, values.size, rng)


def assemble_frame(
    grid: PartitionedGrid,
    states: Mapping[int, np.ndarray],
    noise: ChannelNoise,
    rngs: Mapping[int, np.random.Generator],
) -> dict[int, MeasurementFrame]:
    """Build every region's measurement vector (layout order) and edge vectors."""
    frames = {}
    for region in grid.regions:
        n = region.region_id
        rng = rngs[n]
        exact = region.h(states[n])
        lay = region.h.layout
        z = np.concatenate(
            [
                _noisy(exact[lay.scada_v], noise.scada_v, rng),
                _noisy(exact[lay.flows], noise.scada_pq, rng),
                _noisy(exact[lay.pmu], noise.pmu, rng),
            ]
        )
        edge = {}
        for i in grid.neighbors[n]:
            h = grid.edge_h[(n, i)]
            edge[i] = _noisy(h(states[n], states[i]), noise.edge, rng)
        frames[n] = MeasurementFrame(z, edge)
    return frames


def inject_anomaly(frames: Mapping[int, MeasurementFrame], region: int, factor: float) -> dict[int, MeasurementFrame]:
    """Scale every channel of ``region`` (its edge copies included) by ``factor``."""
    if not factor > 0:
        raise ValueError("anomaly factor must be positive")
    if region not in frames:
        raise NoSuchRegion(f"no region {region} in frame set")
    out = dict(frames)
    f = frames[region]
    out[region] = replace(f, z=f.z * factor, edge={i: e * factor for i, e in f.edge.items()})
    return out


def simulate(
    grid: PartitionedGrid,
    steps: int,
    noise: ChannelNoise,
    seed: int,
    run: int = 0,
    process_noise: bool = True,
) -> Trajectory:
    """Truth + measurements for steps m = 1..steps, starting from the steady state."""
    ids = grid.region_ids
    v = {r.region_id: r.steady_state.copy() for r in grid.regions}
    states, frames = [], []
    for m in range(1, steps + 1):
        v = {
            r.region_id: step_state(
                r, v[r.region_id], substream(seed, run, r.region_id, m, PROCESS) if process_noise else None
            )
            for r in grid.regions
        }
        rngs = {n: substream(seed, run, n, m, MEASUREMENT) for n in ids}
        states.append(v)
        frames.append(assemble_frame(grid, v, noise, rngs))
    return Trajectory(states, frames)


def write_truth_csv(grid: PartitionedGrid, traj: Trajectory, fh: TextIO, run: int = 0, header: bool = True) -> None:
    """Rows ``run, step, region, bus, U, theta`` (theta in radians)."""
    w = csv.writer(fh)
    if header:
        w.writerow(["run", "step", "region", "bus", "U", "theta"])
    for m, st in enumerate(traj.states, start=1):
        for r in grid.regions:
            v = st[r.region_id]
            for i, b in enumerate(r.bus_ids):
                w.writerow([run, m, r.region_id, b, repr(float(v[2 * i])), repr(float(v[2 * i + 1]))])
