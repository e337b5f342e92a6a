import csv
import math

import numpy as np
import pytest

from bulksurf import analysis
from bulksurf.analysis import (CSV_HEADER, convergence_sweep, eoc, h_levels, lemma43_constants,
                               read_csv, run_single, speedup_benchmark, speedup_table,
                               trajectory_errors, write_csv)
from bulksurf.assembly import assemble_operators, interpolate_exact
from bulksurf.mesh import generate_disk_mesh
from bulksurf.problems import Problem, linear_problem, semilinear_problem
from bulksurf.schemes import SchemeConfig, Trajectory, integrate


@pytest.fixture(scope="module")
def mesh():
    return generate_disk_mesh(0.2)


@pytest.fixture(scope="module")
def ops(mesh):
    return assemble_operators(mesh)


def test_eoc_exact_ratio():
    tab = eoc([(0.2, 4e-2), (0.1, 1e-2)])
    assert tab.eocs[0] is None
    assert tab.eocs[1] == pytest.approx(2.0)
    assert tab.pre_plateau == pytest.approx([2.0])


def test_eoc_flat_series_plateau():
    tab = eoc([(0.4, 1e-3), (0.2, 1e-3), (0.1, 1e-3)])
    assert tab.eocs[1:] == [0.0, 0.0]
    assert tab.plateau == 1e-3
    assert tab.pre_plateau == []


def test_eoc_reference_series():
    tab = eoc([(0.1, 3.297e-3), (0.05, 7.564e-4)])
    assert tab.eocs[1] == pytest.approx(2.12, abs=0.01)


def test_eoc_pre_plateau_on_reference_series():
    # L^inf(L^2) series for h = 0.045276 of the published convergence plot
    series = [(0.2, 0.015025180844746), (0.1, 0.00325225510423836),
              (0.05, 0.000758671533377537), (0.025, 0.000356502734899507),
              (0.0125, 0.000365738091923696), (0.00625, 0.000374511131151051)]
    tab = eoc(series)
    assert tab.plateau == pytest.approx(3.745e-4, rel=1e-3)
    assert tab.pre_plateau == pytest.approx([2.21, 2.10], abs=0.01)


def test_eoc_zero_error_undefined():
    tab = eoc([(0.2, 1e-2), (0.1, 0.0), (0.05, 1e-4)])
    assert tab.eocs[1] is None and tab.eocs[2] is None


def test_eoc_rejects_bad_input():
    with pytest.raises(ValueError):
        eoc([(0.1, 1.0)])
    with pytest.raises(ValueError):
        eoc([(0.1, 1.0), (0.2, 0.5)])


def test_eoc_table_text():
    text = str(eoc([(0.4, 1e-3), (0.2, 1e-3), (0.1, 1e-3)]))
    assert "plateau" in text and text.count("\n") == 4


def test_exact_trajectory_has_zero_error(mesh, ops):
    pr = linear_problem()
    tau, depth, n = 0.25, 3, 4
    times = tau * np.arange(-(depth - 1), n + 1)
    U = np.array([interpolate_exact(mesh, pr, t)[0] for t in times])
    traj = Trajectory("exact", times, U, U[:, ops.n1:], np.zeros((len(times), ops.n_lam)),
                      np.zeros(n, dtype=int), 0.0, depth, tau)
    rep = trajectory_errors(traj, mesh, pr, ops)
    assert rep.err_linf_l2 == 0.0 and rep.err_l2_h1 == 0.0


def test_missing_exact_solution(mesh, ops):
    pr = linear_problem()
    traj = integrate(mesh, pr, SchemeConfig("split-b", 0.5), ops=ops)
    bare = Problem("bare", pr.f_bulk, pr.f_surf)
    with pytest.raises(NotImplementedError):
        trajectory_errors(traj, mesh, bare, ops)


def test_truncated_norm_is_smaller(mesh, ops):
    pr = linear_problem()
    traj = integrate(mesh, pr, SchemeConfig("split-b", 0.05), ops=ops)
    full = trajectory_errors(traj, mesh, pr, ops)
    for n in (1, 5, 10, 19):
        part = trajectory_errors(traj, mesh, pr, ops, n_max=n)
        assert part.err_l2_h1 <= full.err_l2_h1
        assert part.err_linf_l2 <= full.err_linf_l2


def test_report_fields(mesh, ops):
    rep = run_single(semilinear_problem(), "split-b", None, 0.1, mesh=mesh, ops=ops)
    assert rep.n_u == mesh.n_vertices and rep.n_p == mesh.n_boundary
    assert rep.newton_iters > 0
    for v in (rep.err_linf_l2, rep.err_l2_h1, rep.wall_time_s):
        assert math.isfinite(v) and v >= 0
    assert math.isfinite(rep.err_lam)


def test_coarse_plateau_band():
    rep = run_single(linear_problem(), "split-b", 0.20741, 0.00078125)
    assert 3e-3 <= rep.err_linf_l2 <= 1.4e-2


def test_plateau_ratio_between_coarsest_levels():
    # published meshes give 6.849e-3 / 3.086e-3 = 2.2; the ratio follows
    # (h0/h1)^2 for second-order spatial error
    a, b = [run_single(linear_problem(), "split-b", h, 0.00078125) for h in h_levels(2)]
    ratio = a.err_linf_l2 / b.err_linf_l2
    expected = (a.h / b.h) ** 2
    assert ratio == pytest.approx(expected, rel=0.2)


def test_sweep_grid_size_and_order():
    taus = analysis.tau_grid(0.2, 9)
    assert taus[-1] == pytest.approx(0.00078125)
    reps = convergence_sweep(linear_problem(), "split-b", h_levels(6), taus)
    assert len(reps) == 54
    assert [r.tau for r in reps[:9]] == taus
    hs = [reps[9 * k].h for k in range(6)]
    assert all(b < a for a, b in zip(hs, hs[1:]))


def test_single_cell_matches_direct_call(mesh, ops):
    pr = linear_problem()
    (rep,) = convergence_sweep(pr, "split-c", [0.2], [0.1])
    traj = integrate(mesh, pr, SchemeConfig("split-c", 0.1), ops=ops)
    direct = trajectory_errors(traj, mesh, pr, ops)
    assert rep.err_linf_l2 == direct.err_linf_l2
    assert rep.err_l2_h1 == direct.err_l2_h1


def _rows_without_timing(path):
    with open(path) as fh:
        rows = list(csv.reader(fh))
    i = rows[0].index("wall_time_s")
    return [r[:i] + r[i + 1:] for r in rows]


def test_csv_header_and_determinism(tmp_path):
    pr = semilinear_problem()
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    write_csv(convergence_sweep(pr, "split-b", h_levels(2), [0.2, 0.1]), a)
    write_csv(convergence_sweep(pr, "split-b", h_levels(2), [0.2, 0.1], workers=2), b)
    assert a.read_text().splitlines()[0] == ",".join(CSV_HEADER)
    assert _rows_without_timing(a) == _rows_without_timing(b)


def test_csv_round_trip(tmp_path, mesh, ops):
    rep = run_single(linear_problem(), "mono", None, 0.1, mesh=mesh, ops=ops)
    p = tmp_path / "r.csv"
    write_csv([rep], p)
    (back,) = read_csv(p)
    for k in CSV_HEADER:
        assert getattr(back, k) == getattr(rep, k)


def test_trace_constants_bounded():
    consts = lemma43_constants(h_levels(4)[1:], n_samples=20)
    assert len(consts) == 3
    cm = [c.c_M for c in consts]
    ck = [c.c_K for c in consts]
    assert max(cm) / min(cm) < 2 and max(ck) / min(ck) < 2


def test_trace_constant_vector_below_sampled_max(mesh, ops):
    # constant p: trace constant, so the stiffness contribution comes only
    # from boundary rows coupling to interior nodes
    (c,) = lemma43_constants([0.2, 0.2, 0.2], n_samples=30)[:1]
    h = analysis.mesh_stats(mesh)["h"]
    one = np.ones(ops.n_p)
    cm = (one @ ops.M22 @ one) / (h * (one @ ops.Mp @ one))
    ck = h * (one @ ops.K22 @ one) / (one @ ops.Mp @ one)
    assert ck > 0
    assert cm <= c.c_M and ck <= c.c_K


def test_trace_constants_need_three_levels():
    with pytest.raises(ValueError):
        lemma43_constants([0.2, 0.1])


def test_speedup_against_itself():
    (cell,) = speedup_benchmark(linear_problem(), [0.2], [0.05], repetitions=3,
                                reference="split-b", candidate="split-b")
    assert 0.5 < cell.ratio < 2.0


def test_speedup_table_layout():
    cells = [analysis.SpeedupCell(h, t, 2.0, 1.0) for h in (0.2, 0.1) for t in (0.2, 0.1)]
    lines = speedup_table(cells).splitlines()
    assert len(lines) == 3
    assert lines[1].startswith("0.2") and lines[1].split()[1:] == ["2.00", "2.00"]


def test_speedup_requires_repetitions():
    with pytest.raises(ValueError):
        speedup_benchmark(linear_problem(), [0.2], [0.1], repetitions=0)
