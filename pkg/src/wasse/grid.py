"""Regional models: bus partition, per-region dynamics and measurement layout."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.linalg import block_diag

from wasse.case import GridCase, branch_admittance
from wasse.errors import EmptyRegion, NoSuchRegion, UnassignedBus
from wasse.measurement import EdgeMeasurement, MeasurementLayout, RegionMeasurement

# Implementer-chosen defaults; both keep every region connected.
DEFAULT_PARTITIONS: dict[str, dict[int, list[int]]] = {
    "ieee14": {1: [1, 2, 3, 4, 5], 2: [6, 11, 12, 13], 3: [7, 8, 9, 10, 14]},
    "ieee39": {
        1: [1, 2, 3, 4, 5, 6, 7, 8, 9, 30, 31, 39],
        2: [10, 11, 12, 13, 14, 15, 32],
        3: [16, 19, 20, 21, 22, 23, 24, 33, 34, 35, 36],
        4: [17, 18, 25, 26, 27, 28, 29, 37, 38],
    },
}


def assignment_from_regions(regions: Mapping[int, Sequence[int]]) -> dict[int, int]:
    """Invert ``{region: [buses]}`` into ``{bus: region}``."""
    out: dict[int, int] = {}
    for rid, buses in regions.items():
        for b in buses:
            if b in out:
                raise ValueError(f"bus {b} assigned to regions {out[b]} and {rid}")
            out[int(b)] = int(rid)
    return out


@dataclass(frozen=True)
class ModelParams:
    """Per-bus dynamics; ``steady_state`` overrides the case's Vm/Va."""

    F_bus: np.ndarray = field(default_factory=lambda: 0.89 * np.eye(2))
    Q_bus: np.ndarray = field(default_factory=lambda: 0.01**2 * np.eye(2))
    steady_state: Mapping[int, tuple[float, float]] | None = None


@dataclass(frozen=True, eq=False)
class RegionModel:
    region_id: int
    bus_ids: tuple[int, ...]
    F: np.ndarray
    G: np.ndarray
    steady_state: np.ndarray
    Q: np.ndarray
    scada_flow_branches: tuple[tuple[int, int], ...]
    pmu_buses: tuple[int, ...]
    h: RegionMeasurement

    @property
    def alpha(self) -> int:
        return 2 * len(self.bus_ids)

    @property
    def beta(self) -> int:
        return self.h.beta

    def bus_slice(self, bus_id: int) -> slice:
        i = self.bus_ids.index(bus_id)
        return slice(2 * i, 2 * i + 2)


def measurement_layout(region: RegionModel) -> MeasurementLayout:
    """Segment ranges: magnitudes, then flow P/Q pairs, then PMU pairs."""
    return region.h.layout


@dataclass(frozen=True, eq=False)
class PartitionedGrid:
    case: GridCase
    regions: tuple[RegionModel, ...]
    # (a, b) with a < b -> boundary branches as in the case file
    edge_branches: dict[tuple[int, int], tuple[tuple[int, int], ...]]
    neighbors: dict[int, tuple[int, ...]]
    # (n, i) -> flows on the (n, i) boundary measured at region n's end
    edge_h: dict[tuple[int, int], EdgeMeasurement]

    def region(self, region_id: int) -> RegionModel:
        for r in self.regions:
            if r.region_id == region_id:
                return r
        raise NoSuchRegion(f"no region {region_id}")

    @property
    def region_ids(self) -> tuple[int, ...]:
        return tuple(r.region_id for r in self.regions)

    def region_of(self, bus_id: int) -> RegionModel:
        for r in self.regions:
            if bus_id in r.bus_ids:
                return r
        raise KeyError(bus_id)


def build_partition(
    case: GridCase,
    assignment: Mapping[int, int],
    params: ModelParams | None = None,
    pmu_buses: Mapping[int, Sequence[int]] | None = None,
) -> PartitionedGrid:
    """Split ``case`` into regions according to ``assignment`` (bus -> region).

    Intra-region branches get SCADA P/Q flow measurements; branches that cross
    regions become edge measurements. Without an explicit ``pmu_buses``
    placement each region gets one PMU at its lowest-numbered bus.
    """
    params = params or ModelParams()
    missing = [b for b in case.bus_ids if b not in assignment]
    if missing:
        raise UnassignedBus(f"buses without a region: {missing}")

    members: dict[int, list[int]] = {}
    for b in case.bus_ids:
        members.setdefault(int(assignment[b]), []).append(b)
    if pmu_buses:
        for rid in pmu_buses:
            if rid not in members:
                raise EmptyRegion(f"PMU placement names region {rid} which has no buses")

    intra: dict[int, list[tuple[int, int]]] = {rid: [] for rid in members}
    edges: dict[tuple[int, int], list[tuple[int, int]]] = {}
    for br in case.branches:
        ra, rb = assignment[br.from_bus], assignment[br.to_bus]
        if ra == rb:
            intra[ra].append((br.from_bus, br.to_bus))
        else:
            edges.setdefault((min(ra, rb), max(ra, rb)), []).append((br.from_bus, br.to_bus))

    regions = []
    for rid in sorted(members):
        buses = tuple(members[rid])
        tau = len(buses)
        F = block_diag(*[params.F_bus] * tau)
        Q = block_diag(*[params.Q_bus] * tau)
        ss = []
        for b in buses:
            if params.steady_state and b in params.steady_state:
                ss.extend(params.steady_state[b])
            else:
                rec = case.bus(b)
                ss.extend((rec.nominal_voltage, rec.nominal_angle))
        pmus = tuple(pmu_buses.get(rid, ())) if pmu_buses else (min(buses),)
        for p in pmus:
            if p not in buses:
                raise ValueError(f"PMU bus {p} is not in region {rid}")
        flows = tuple(intra[rid])
        adm = [branch_admittance(case, k, j) for k, j in flows]
        h = RegionMeasurement(buses, flows, adm, pmus)
        regions.append(
            RegionModel(rid, buses, F, np.eye(2 * tau) - F, np.array(ss), Q, flows, pmus, h)
        )

    neighbors: dict[int, set[int]] = {rid: set() for rid in members}
    edge_h: dict[tuple[int, int], EdgeMeasurement] = {}
    by_id = {r.region_id: r for r in regions}
    for (a, b), brs in edges.items():
        neighbors[a].add(b)
        neighbors[b].add(a)
        for n, i in ((a, b), (b, a)):
            oriented = [(k, j) if assignment[k] == n else (j, k) for k, j in brs]
            adm = [branch_admittance(case, k, j) for k, j in oriented]
            edge_h[(n, i)] = EdgeMeasurement(by_id[n].bus_ids, by_id[i].bus_ids, oriented, adm)

    return PartitionedGrid(
        case,
        tuple(regions),
        {k: tuple(v) for k, v in sorted(edges.items())},
        {k: tuple(sorted(v)) for k, v in neighbors.items()},
        edge_h,
    )


def default_partition(case_name: str, case: GridCase, params: ModelParams | None = None) -> PartitionedGrid:
    return build_partition(case, assignment_from_regions(DEFAULT_PARTITIONS[case_name]), params)
