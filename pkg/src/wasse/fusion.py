"""Inter-region fusion in information form.

Each region n corrects its local estimate with the measurements on branches
that cross into a neighbour i. The edge map ``h_ni(v_n, v_i)`` is linearized
statistically on both sides (n's prior sigma points with v_i frozen at its
prior mean, and i's prior sigma points with v_n frozen), the neighbour's
uncertainty is folded into the effective noise, and the resulting linear
pseudo-measurement is added to the local information::

    C_f   = C   + sum_i H_ni^T Ebar_ni^-1 H_ni
    chi_f = chi + sum_i H_ni^T Ebar_ni^-1 z~_ni
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, TextIO

import numpy as np

from wasse.errors import SingularFusedInformation
from wasse.linalg import clip_psd, spd_inverse, spd_solve, symmetrize
from wasse.ukf import UTParams, sigma_points, ut_weights, weighted_cov

EdgeMap = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class NeighborSummary:
    region_id: int
    prior_mean: np.ndarray
    prior_cov: np.ndarray
    chi: np.ndarray
    C: np.ndarray
    prior_sigma_points: np.ndarray

    @property
    def mean(self) -> np.ndarray:
        """Posterior mean recovered from the information pair."""
        return spd_solve(self.C, self.chi)


@dataclass(frozen=True)
class FusedEstimate:
    v: np.ndarray
    P: np.ndarray
    chi: np.ndarray
    C: np.ndarray


@dataclass(frozen=True)
class EdgeInput:
    """One neighbour's contribution: measurement, edge map and summary."""

    z: np.ndarray
    h: EdgeMap
    summary: NeighborSummary


def _ut_moments(points: np.ndarray, g: Callable[[np.ndarray], np.ndarray], p: UTParams):
    wm, wc = ut_weights(points.shape[1], p)
    gz = g(points)
    z_pred = wm @ gz
    dz = gz - z_pred
    Pvz = weighted_cov(wc, points - points[0], dz)
    Pzz = symmetrize(weighted_cov(wc, dz, dz))
    return Pvz, z_pred, Pzz


def edge_cross_cov(points_n: np.ndarray, neighbor_mean: np.ndarray, h: EdgeMap, p: UTParams):
    """``(Pvz, z_pred, Pzz)`` of the edge map over region n's prior sigma points,
    neighbour held at ``neighbor_mean``. ``points_n[0]`` must be the prior mean."""
    if points_n.shape[1] == 0:
        return np.zeros((0, 0)), np.zeros(0), np.zeros((0, 0))
    return _ut_moments(points_n, lambda pts: h(pts, neighbor_mean), p)


def edge_terms(
    prior_v: np.ndarray,
    prior_P: np.ndarray,
    edge: EdgeInput,
    p: UTParams,
    edge_R: np.ndarray,
    neighbor_anchor: str = "posterior",
):
    """Linear pseudo-measurement ``(H_ni, Ebar_ni, z~_ni)`` for one neighbour.

    ``neighbor_anchor`` picks the point the neighbour's term is expanded
    around: its posterior mean from the shared information pair
    (``"posterior"``) or its prior mean (``"prior"``).
    """
    s = edge.summary
    pts_n = sigma_points(prior_v, prior_P, p)
    Pvz, _, Pzz = edge_cross_cov(pts_n, s.prior_mean, edge.h, p)
    H_n = spd_solve(prior_P, Pvz).T
    E = clip_psd(Pzz - H_n @ Pvz) + edge_R

    Pvz_i, _, _ = _ut_moments(s.prior_sigma_points, lambda pts: edge.h(prior_v, pts), p)
    H_i = spd_solve(s.prior_cov, Pvz_i).T
    E_bar = symmetrize(E + H_i @ spd_solve(s.C, H_i.T))

    neighbor_v = s.mean if neighbor_anchor == "posterior" else s.prior_mean
    z_t = edge.z - edge.h(prior_v, s.prior_mean) + H_n @ prior_v + H_i @ (s.prior_mean - neighbor_v)
    return H_n, E_bar, z_t


def fuse(
    local,
    edges: Iterable[EdgeInput],
    p: UTParams,
    edge_R: float | np.ndarray = 1e-3,
    neighbor_anchor: str = "posterior",
) -> FusedEstimate:
    """Add every neighbour's edge information to ``local`` (an EstimatorState)."""
    if neighbor_anchor not in ("posterior", "prior"):
        raise ValueError(f"unknown neighbor_anchor {neighbor_anchor!r}")
    chi, C = local.chi.copy(), local.C.copy()
    used = False
    for edge in edges:
        dim = edge.z.size
        if dim == 0:
            continue
        R = edge_R * np.eye(dim) if np.ndim(edge_R) == 0 else np.asarray(edge_R)
        H, E_bar, z_t = edge_terms(local.prior_v, local.prior_P, edge, p, R, neighbor_anchor)
        W = spd_solve(E_bar, H)  # E_bar^-1 H
        C += H.T @ W
        chi += W.T @ z_t
        used = True
    if not used:
        return FusedEstimate(local.v.copy(), local.P.copy(), local.chi.copy(), local.C.copy())
    C = symmetrize(C)
    try:
        P = spd_inverse(C)
    except Exception as exc:
        raise SingularFusedInformation("fused information matrix is not positive definite") from exc
    return FusedEstimate(P @ chi, P, chi, C)


def summarize(region_id: int, state, p: UTParams) -> NeighborSummary:
    return NeighborSummary(
        region_id,
        state.prior_v.copy(),
        state.prior_P.copy(),
        state.chi.copy(),
        state.C.copy(),
        sigma_points(state.prior_v, state.prior_P, p),
    )


def exchange(neighbors: Mapping[int, Iterable[int]], states: Mapping[int, object], p: UTParams):
    """One synchronous round: ``out[n][i]`` is i's summary as received by n."""
    sent = {n: summarize(n, st, p) for n, st in states.items()}
    return {n: {i: sent[i] for i in sorted(neighbors.get(n, ()))} for n in states}


MESSAGE_FIELDS = ("step", "receiver", "sender", "field", "row", "col", "value")


def write_messages_csv(fh: TextIO, step: int, inbox: Mapping[int, Mapping[int, NeighborSummary]], header: bool = False):
    """Flat message dump: one row per scalar of prior_mean, chi and C
    (``col`` is -1 for vectors)."""
    w = csv.writer(fh)
    if header:
        w.writerow(MESSAGE_FIELDS)
    for n in sorted(inbox):
        for i, s in inbox[n].items():
            for name in ("prior_mean", "chi"):
                for r, x in enumerate(getattr(s, name)):
                    w.writerow([step, n, i, name, r, -1, repr(float(x))])
            for (r, c), x in np.ndenumerate(s.C):
                w.writerow([step, n, i, "C", r, c, repr(float(x))])
