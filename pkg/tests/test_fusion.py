import io
from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from wasse.fusion import (
    EdgeInput,
    NeighborSummary,
    edge_cross_cov,
    exchange,
    fuse,
    summarize,
    write_messages_csv,
)
from wasse.noise import NoiseSpec
from wasse.truth import ChannelNoise, simulate
from wasse.ukf import STANDARD_UT, UTParams, sigma_points
from wasse.vbukf import FilterConfig, init_state, local_step, to_information

from conftest import random_spd


def local_state(rng, alpha):
    v, P = rng.normal(size=alpha), random_spd(rng, alpha, 0.3)
    chi, C = to_information(v, P)
    prior_v = v + 0.1 * rng.normal(size=alpha)
    return SimpleNamespace(v=v, P=P, chi=chi, C=C, prior_v=prior_v, prior_P=random_spd(rng, alpha, 0.5))


def toy(rng, an=3, ai=2, dim=4, ut=STANDARD_UT):
    n, i = local_state(rng, an), local_state(rng, ai)
    A, B, c = rng.normal(size=(dim, an)), rng.normal(size=(dim, ai)), rng.normal(size=dim)
    h = lambda vn, vi: vn @ A.T + vi @ B.T + c
    z = rng.normal(size=dim)
    R = 0.2 * np.eye(dim)
    return n, i, A, B, c, h, z, R, summarize(2, i, ut)


def centralized(n, i, A, B, c, z, R):
    """Stacked information filter over [v_n; v_i], then the v_n marginal."""
    an = len(n.v)
    Y = np.zeros((an + len(i.v),) * 2)
    Y[:an, :an], Y[an:, an:] = n.C, i.C
    y = np.concatenate([n.chi, i.chi])
    J = np.hstack([A, B])
    Ri = np.linalg.inv(R)
    Y = Y + J.T @ Ri @ J
    y = y + J.T @ Ri @ (z - c)
    cov = np.linalg.inv(Y)
    x = cov @ y
    return x[:an], cov[:an, :an]


@pytest.mark.parametrize("ut", [STANDARD_UT, UTParams()], ids=["standard", "default"])
@given(seed=st.integers(0, 2**31 - 1))
def test_matches_centralized_filter(ut, seed):
    rng = np.random.default_rng(seed)
    n, i, A, B, c, h, z, R, summ = toy(rng, ut=ut)
    f = fuse(n, [EdgeInput(z, h, summ)], ut, edge_R=R)
    v_ref, P_ref = centralized(n, i, A, B, c, z, R)
    np.testing.assert_allclose(f.v, v_ref, atol=1e-6)
    np.testing.assert_allclose(f.P, P_ref, atol=1e-6)


def test_prior_anchor_differs_from_centralized():
    rng = np.random.default_rng(3)
    n, i, A, B, c, h, z, R, summ = toy(rng)
    f = fuse(n, [EdgeInput(z, h, summ)], STANDARD_UT, edge_R=R, neighbor_anchor="prior")
    v_ref, _ = centralized(n, i, A, B, c, z, R)
    assert not np.allclose(f.v, v_ref, atol=1e-6)


def test_no_neighbors_is_identity():
    rng = np.random.default_rng(0)
    n = local_state(rng, 4)
    f = fuse(n, [], STANDARD_UT)
    np.testing.assert_array_equal(f.v, n.v)
    np.testing.assert_array_equal(f.P, n.P)


def test_unknown_form_rejected():
    rng = np.random.default_rng(0)
    with pytest.raises(ValueError):
        fuse(local_state(rng, 2), [], STANDARD_UT, neighbor_anchor="other")


@given(st.integers(0, 2**31 - 1))
def test_information_only_added(seed):
    rng = np.random.default_rng(seed)
    n, _, _, _, _, h, z, R, summ = toy(rng)
    f = fuse(n, [EdgeInput(z, h, summ)], STANDARD_UT, edge_R=R)
    assert np.linalg.eigvalsh(n.P - f.P).min() >= -1e-10


def test_edge_cross_cov_empty():
    Pvz, z, Pzz = edge_cross_cov(np.zeros((1, 0)), np.zeros(2), lambda a, b: np.zeros(0), STANDARD_UT)
    assert Pvz.size == z.size == Pzz.size == 0


@given(st.integers(0, 2**31 - 1))
def test_edge_cross_cov_linear(seed):
    rng = np.random.default_rng(seed)
    P, H0 = random_spd(rng, 3), rng.normal(size=(2, 3))
    vn, vi = rng.normal(size=3), rng.normal(size=2)
    pts = sigma_points(vn, P, STANDARD_UT)
    Pvz, z, _ = edge_cross_cov(pts, vi, lambda a, b: a @ H0.T, STANDARD_UT)
    np.testing.assert_allclose(Pvz, P @ H0.T, atol=1e-10)
    np.testing.assert_allclose(z, H0 @ vn, atol=1e-10)


def test_edge_cross_cov_zero_prior(grid14):
    h = grid14.edge_h[(1, 2)]
    vn, vi = grid14.region(1).steady_state, grid14.region(2).steady_state
    pts = sigma_points(vn, 1e-24 * np.eye(len(vn)), STANDARD_UT)
    Pvz, z, _ = edge_cross_cov(pts, vi, h, STANDARD_UT)
    np.testing.assert_allclose(Pvz, 0.0, atol=1e-10)
    np.testing.assert_allclose(z, h(vn, vi), atol=1e-9)


def _local_states(grid, seed=2):
    cfg = FilterConfig()
    traj = simulate(grid, 1, ChannelNoise.uniform(NoiseSpec.gaussian(1e-3)), seed)
    return {
        r.region_id: local_step(init_state(r, cfg), r, traj.frames[0][r.region_id].z, cfg)[0] for r in grid.regions
    }, traj.frames[0], cfg


def test_grid_fusion_adds_information(grid14):
    states, frames, cfg = _local_states(grid14)
    inbox = exchange(grid14.neighbors, states, cfg.ut)
    for n, local in states.items():
        edges = [EdgeInput(frames[n].edge[i], grid14.edge_h[(n, i)], s) for i, s in inbox[n].items()]
        f = fuse(local, edges, cfg.ut)
        assert np.linalg.eigvalsh(local.P - f.P).min() >= -1e-10
        np.testing.assert_allclose(f.C @ f.P, np.eye(len(f.v)), atol=1e-8)


def test_exchange_chain_topology():
    rng = np.random.default_rng(0)
    states = {k: local_state(rng, 2) for k in (1, 2, 3)}
    inbox = exchange({1: (2,), 2: (1, 3), 3: (2,)}, states, STANDARD_UT)
    assert [len(inbox[k]) for k in (1, 2, 3)] == [1, 2, 1]
    assert isinstance(inbox[2][3], NeighborSummary)
    np.testing.assert_array_equal(inbox[2][3].chi, states[3].chi)


def test_exchange_single_region():
    rng = np.random.default_rng(0)
    assert exchange({1: ()}, {1: local_state(rng, 2)}, STANDARD_UT) == {1: {}}


def test_exchange_is_deterministic(grid14):
    def dump():
        states, _, cfg = _local_states(grid14, seed=9)
        buf = io.StringIO()
        write_messages_csv(buf, 1, exchange(grid14.neighbors, states, cfg.ut), header=True)
        return buf.getvalue()

    a, b = dump(), dump()
    assert a == b
    head, first = a.splitlines()[:2]
    assert head == "step,receiver,sender,field,row,col,value"
    assert first.startswith("1,1,2,prior_mean,0,-1,")
