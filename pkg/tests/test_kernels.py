import numpy as np
import pytest

import stopngo as sg
from stopngo.errors import DomainError
from stopngo.kernels import (
    interpolate_kernel_row,
    kernel_residual,
    load_table,
    save_table,
    solve_kernels,
)
from stopngo.riemann import coupling_coefficient


def test_zero_coupling_gives_zero_tables(net):
    zero = lambda x: np.zeros_like(np.asarray(x, float))
    for sid in (1, 2):
        tb = solve_kernels(sid, net, M=32, coupling=zero)
        assert np.all(tb.Kvw == 0.0)
        assert np.all(tb.Kvv == 0.0)
        pde, bc = kernel_residual(tb, net, coupling=zero)
        assert pde == 0.0
        assert bc == 0.0


def test_resolution_validation(net):
    with pytest.raises(DomainError):
        solve_kernels(1, net, M=8)
    with pytest.raises(DomainError):
        solve_kernels(1, net, M=64, tol=-1.0)


def test_diagonal_matches_coupling(net, tables):
    # the diagonal of K^vw carries the source coefficient divided by the sum
    # of the characteristic speeds, which is gamma p* exactly
    for sid, ss, seg, sign in ((1, net.ss1, net.seg1, 1.0), (2, net.ss2, net.seg2, -1.0)):
        tb = tables(64)[sid - 1]
        gp = seg.gamma * ss.p_star
        diag = np.array([tb.Kvw[j, j] for j in range(tb.M + 1)])
        want = sign * coupling_coefficient(tb.x, ss, seg) / gp
        assert np.abs(diag - want).max() < 1e-13


def test_corner_values(net, tables):
    t1, t2 = tables(64)
    assert t1.Kvw[0, 0] == pytest.approx(-2.5591172439650453e-04, rel=1e-10)
    assert t2.Kvw[t2.M, t2.M] == pytest.approx(3.1307387467435132e-04, rel=1e-10)
    assert t2.Kvw[0, 0] == pytest.approx(3.2397595647735465e-03, rel=1e-10)
    # resolution-independent corner: K^vv meets K^vw at the junction end
    assert t2.Kvv[t2.M, t2.M] == pytest.approx(3.1307387467435132e-04, rel=1e-9)


def test_outer_edge_conditions(net, rows, tables):
    # terminal conditions on the outer edges: K^vv is a fixed positive
    # multiple of K^vw there (1/e1 at x = L, e2 at x = -L)
    t1, t2 = tables(64)
    e1 = np.abs(t1.Kvv[:, -1] - t1.Kvw[:, -1] / rows.e1).max()
    e2 = np.abs(t2.Kvv[:, 0] - rows.e2 * t2.Kvw[:, 0]).max()
    assert e1 < 1e-15
    assert e2 < 1e-15


def test_boundary_residual_is_tiny(net, tables):
    for tb in tables(64):
        pde, bc = kernel_residual(tb, net)
        assert bc <= 1e-12
        assert pde < 1e-7


def test_pde_residual_contracts_with_resolution(net, tables):
    for sid in (1, 2):
        p32, _ = kernel_residual(solve_kernels(sid, net, M=32), net)
        p64, _ = kernel_residual(tables(64)[sid - 1], net)
        assert p64 < p32 / 1.5


def test_successive_tables_contract(net, tables):
    for sid in (1, 2):
        t32 = solve_kernels(sid, net, M=32)
        t64, t128 = tables(64)[sid - 1], tables(128)[sid - 1]
        d1 = np.abs(t32.Kvw - t64.Kvw[::2, ::2]).max()
        d2 = np.abs(t64.Kvw - t128.Kvw[::2, ::2]).max()
        assert d2 < d1 / 1.5


def test_initialization_independence(net, tables):
    t_zero = tables(64)[0]
    t_rand = solve_kernels(1, net, M=64, init="random", seed=11)
    tol = t_zero.tol
    assert np.abs(t_zero.Kvw - t_rand.Kvw).max() < 10.0 * tol
    assert np.abs(t_zero.Kvv - t_rand.Kvv).max() < 10.0 * tol


def test_iteration_contracts(net, tables):
    for tb in tables(64):
        log = np.asarray(tb.change_log)
        assert log[-1] <= tb.tol
        assert np.all(np.diff(log) <= 0.0)
        assert tb.iterations == log.size


def test_interpolate_rows(net, tables):
    t1, t2 = tables(64)
    # exact at a node
    xs, kvw, kvv = interpolate_kernel_row(t1, t1.x[10])
    assert np.array_equal(kvw, t1.Kvw[10, 10:])
    assert np.array_equal(kvv, t1.Kvv[10, 10:])
    assert xs[0] == t1.x[10]
    # exact at the far nodes of both triangles
    xs, kvw, _ = interpolate_kernel_row(t2, 0.0)
    assert xs.size == t2.M + 1
    assert kvw[-1] == t2.Kvw[t2.M, t2.M]
    xs, kvw, _ = interpolate_kernel_row(t1, net.seg1.length)
    assert xs.size == 1
    # midpoint is the average of the bracketing rows on the shared nodes
    xm = t1.x[10] + 0.5 * t1.h
    xs, kvw, kvv = interpolate_kernel_row(t1, xm)
    assert np.abs(kvw - 0.5 * (t1.Kvw[10, 11:] + t1.Kvw[11, 11:])).max() < 1e-18
    with pytest.raises(DomainError):
        interpolate_kernel_row(t1, -5.0)
    with pytest.raises(DomainError):
        interpolate_kernel_row(t2, 5.0)


def test_save_load_round_trip(net, tables, tmp_path):
    for tb in tables(64):
        path = tmp_path / f"k{tb.segment_id}.csv"
        save_table(tb, path)
        back = load_table(path)
        assert back.segment_id == tb.segment_id
        assert back.M == tb.M
        assert np.array_equal(back.x, tb.x)
        assert np.array_equal(back.Kvw, tb.Kvw)
        assert np.array_equal(back.Kvv, tb.Kvv)
