"""Noise-free SCADA/PMU measurement functions.

Every function broadcasts over leading axes so a whole set of sigma points
can be pushed through in one call. Bus states are ``[U, theta]`` in
per-unit and radians.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np


def measure_scada_voltage(v: np.ndarray) -> np.ndarray:
    """Voltage magnitude, i.e. ``[1 0] @ v``."""
    return np.asarray(v)[..., 0]


def measure_power_flow(vk: np.ndarray, vj: np.ndarray, adm: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    """Active/reactive flow leaving bus k towards bus j.

    ``adm = (g_kj, b_kj, g_sk, b_sk)``::

        P = U_k^2 (g_sk + g_kj) - U_k U_j (g_kj cos d + b_kj sin d)
        Q = -U_k^2 (b_sk + b_kj) - U_k U_j (g_kj sin d - b_kj cos d)

    with ``d = theta_k - theta_j``.
    """
    g, b, gs, bs = adm
    vk = np.asarray(vk, dtype=float)
    vj = np.asarray(vj, dtype=float)
    uk, tk = vk[..., 0], vk[..., 1]
    uj, tj = vj[..., 0], vj[..., 1]
    d = tk - tj
    c, s = np.cos(d), np.sin(d)
    ukuj = uk * uj
    p = uk * uk * (gs + g) - ukuj * (g * c + b * s)
    q = -uk * uk * (bs + b) - ukuj * (g * s - b * c)
    return p, q


def measure_pmu(v: np.ndarray) -> np.ndarray:
    """PMU phasor: identity on the bus state."""
    return np.array(v, dtype=float, copy=True)


@dataclass(frozen=True)
class MeasurementLayout:
    """Index ranges of the three segments of a region measurement vector."""

    scada_v: slice
    flows: slice
    pmu: slice

    @property
    def beta(self) -> int:
        return self.pmu.stop


class RegionMeasurement:
    """``h_n``: region state (..., 2*tau) -> measurement vector (..., beta).

    Order: SCADA magnitudes (bus order), P/Q pairs per flow branch, then
    ``[U, theta]`` per PMU bus.
    """

    def __init__(self, bus_ids, flow_branches, flow_admittances, pmu_buses):
        pos = {b: i for i, b in enumerate(bus_ids)}
        self.n_bus = len(bus_ids)
        self._from = np.array([pos[k] for k, _ in flow_branches], dtype=int)
        self._to = np.array([pos[j] for _, j in flow_branches], dtype=int)
        adm = np.asarray(flow_admittances, dtype=float).reshape(-1, 4)
        self._adm = tuple(adm[:, i] for i in range(4))
        self._pmu = np.array([pos[b] for b in pmu_buses], dtype=int)
        nf, npmu = len(flow_branches), len(pmu_buses)
        self.layout = MeasurementLayout(
            slice(0, self.n_bus),
            slice(self.n_bus, self.n_bus + 2 * nf),
            slice(self.n_bus + 2 * nf, self.n_bus + 2 * nf + 2 * npmu),
        )

    @property
    def beta(self) -> int:
        return self.layout.beta

    def __call__(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        lead = v.shape[:-1]
        buses = v.reshape(lead + (self.n_bus, 2))
        parts = [measure_scada_voltage(buses)]
        if self._from.size:
            p, q = measure_power_flow(buses[..., self._from, :], buses[..., self._to, :], self._adm)
            parts.append(np.stack([p, q], axis=-1).reshape(lead + (-1,)))
        if self._pmu.size:
            parts.append(measure_pmu(buses[..., self._pmu, :]).reshape(lead + (-1,)))
        return np.concatenate(parts, axis=-1)


class EdgeMeasurement:
    """``h_ab``: flows on boundary branches seen from region a.

    ``branches`` are ``(k, j)`` pairs with k in region a and j in region b;
    the output stacks ``[P_kj, Q_kj]`` per branch.
    """

    def __init__(self, a_bus_ids, b_bus_ids, branches, admittances):
        pa = {b: i for i, b in enumerate(a_bus_ids)}
        pb = {b: i for i, b in enumerate(b_bus_ids)}
        self.na, self.nb = len(a_bus_ids), len(b_bus_ids)
        self.branches = tuple(branches)
        self._k = np.array([pa[k] for k, _ in branches], dtype=int)
        self._j = np.array([pb[j] for _, j in branches], dtype=int)
        adm = np.asarray(admittances, dtype=float).reshape(-1, 4)
        self._adm = tuple(adm[:, i] for i in range(4))

    @property
    def dim(self) -> int:
        return 2 * len(self.branches)

    def __call__(self, va: np.ndarray, vb: np.ndarray) -> np.ndarray:
        va = np.asarray(va, dtype=float)
        vb = np.asarray(vb, dtype=float)
        ba = va.reshape(va.shape[:-1] + (self.na, 2))
        bb = vb.reshape(vb.shape[:-1] + (self.nb, 2))
        p, q = measure_power_flow(ba[..., self._k, :], bb[..., self._j, :], self._adm)
        out = np.stack([p, q], axis=-1)
        return out.reshape(out.shape[:-2] + (-1,))
