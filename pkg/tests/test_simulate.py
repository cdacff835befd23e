import math

import numpy as np
import pytest

from panel_epa import InputError, KernelSpec
from panel_epa import simulate as sim


def test_four_unit_layout():
    lay = sim.build_rook_layout(4, rho=0.0, row_normalize=False)
    np.testing.assert_array_equal(lay.coords, [[0, 0], [0, 1], [1, 0], [1, 1]])
    np.testing.assert_array_equal(lay.W, [[0, 1, 1, 0], [1, 0, 0, 1], [1, 0, 0, 1], [0, 1, 1, 0]])


def test_row_normalised_weights():
    lay = sim.build_rook_layout(9, rho=0.5)
    np.testing.assert_allclose(lay.W.sum(axis=1), 1.0)
    assert lay.W[4].tolist().count(0.25) == 4


@pytest.mark.parametrize("n", [1, 7, 25])
def test_sbar2_normalisation(n):
    lay = sim.build_rook_layout(n, rho=0.5)
    M = lay.S @ lay.S.T / lay.sbar2
    assert np.trace(M) / n == pytest.approx(1.0, abs=1e-10)


def test_trivial_layouts():
    lay = sim.build_rook_layout(1, rho=0.5)
    assert lay.sbar2 == 1.0 and lay.S[0, 0] == 1.0
    np.testing.assert_array_equal(sim.build_rook_layout(5, rho=0.0).S, np.eye(5))


def test_line_distances():
    np.testing.assert_array_equal(sim.misspecified_line_distances(3).d,
                                  [[0, 1, 2], [1, 0, 1], [2, 1, 0]])


def test_config_validation():
    with pytest.raises(InputError):
        sim.DgpConfig(dgp="dgp3")
    with pytest.raises(InputError):
        sim.DgpConfig(rho=1.0)
    with pytest.raises(InputError):
        sim.DgpConfig(alternative="mixed")


def test_generation_is_deterministic():
    cfg = sim.DgpConfig("dgp2", n=6, T=8, seed=7)
    a, b = sim.generate(cfg, 3), sim.generate(cfg, 3)
    assert np.array_equal(a.dl, b.dl)
    assert not np.array_equal(a.dl, sim.generate(cfg, 4).dl)


def test_homogeneous_alternative_mean():
    cfg = sim.DgpConfig("dgp1", n=20, T=200, rho=0.0, alternative="homogeneous", seed=1)
    means = [sim.generate(cfg, r).dl.mean() for r in range(20)]
    assert np.mean(means) == pytest.approx(-0.2, abs=0.03)


def test_dgp2_homogeneous_mean():
    cfg = sim.DgpConfig("dgp2", n=20, T=200, alternative="homogeneous", seed=2)
    means = [sim.generate(cfg, r).dl.mean() for r in range(30)]
    assert np.mean(means) == pytest.approx(1.2 / 3.4, abs=0.05)


def test_heterogeneous_alternatives_have_zero_population_mean():
    for dgp in ("dgp1", "dgp2"):
        cfg = sim.DgpConfig(dgp, n=10, T=20, rho=0.5, alternative="heterogeneous", seed=3)
        m = np.array([sim.generate(cfg, r).dl.mean() for r in range(400)])
        assert abs(m.mean()) < 3 * m.std(ddof=1) / math.sqrt(m.size)


def test_dgp2_variance_moment():
    cfg = sim.DgpConfig("dgp2", n=1, T=20000, rho=0.0, seed=4)
    rng = sim.replication_rng(cfg.seed, 0)
    lam = rng.normal(1.0, math.sqrt(0.2), size=(1, 2))
    panel = sim.generate(cfg, 0)
    expected = (lam ** 2).sum() / 3.4 ** 2 + 1 / 3.4 ** 2
    assert panel.dl.var() == pytest.approx(expected, rel=0.05)


def test_zero_loadings_switch():
    cfg = sim.DgpConfig("dgp2", n=4, T=10, loadings_zero=True, seed=5)
    lay = sim.layout_for(cfg)
    rng = sim.replication_rng(5, 0)
    rng.normal(size=(4, 2))
    rng.standard_normal((10, 2))
    eps = lay.S @ rng.standard_normal((4, 10)) / math.sqrt(lay.sbar2)
    np.testing.assert_allclose(sim.generate(cfg, 0).dl, eps / 3.4)


def test_run_experiment_nominal_one():
    cfg = sim.DgpConfig("dgp1", n=5, T=10, seed=9)
    rows = sim.run_experiment(cfg, ("S1", "S3", "J1"), reps=20, nominal=1.0)
    assert [r.rejection_rate for r in rows] == [100.0, 100.0, 100.0]


def test_run_experiment_reproducible_and_worker_independent():
    cfg = sim.DgpConfig("dgp2", n=6, T=12, seed=11)
    tests = ("S1", "S3", "S4", "J1", "Z1", "J4")
    a = sim.simulate_statistics(cfg, tests, 30)
    b = sim.simulate_statistics(cfg, tests, 30, workers=2)
    np.testing.assert_array_equal(a[0], b[0])


def test_infeasible_j3_is_reported():
    rows = sim.run_experiment(sim.DgpConfig(n=10, T=10), ("J3",), reps=5)
    assert math.isnan(rows[0].rejection_rate)
    assert rows[0].failures == 0 and "infeasible" in rows[0].note


def test_size_adjusted_power_self_calibration():
    cfg = sim.DgpConfig("dgp1", n=5, T=10, seed=21)
    p = sim.size_adjusted_power(cfg, cfg, "S3", reps=200)
    assert p <= 5.0
    with pytest.raises(InputError):
        sim.size_adjusted_power(cfg, cfg, "S3", reps=50)


def test_evaluate_menu_marks_failures():
    from panel_epa import LossPanel
    panel = LossPanel(np.ones((3, 6)))
    out = sim.evaluate_menu(panel, ("S1", "S3"), KernelSpec(), sim.misspecified_line_distances(3),
                            sim.misspecified_line_distances(3))
    assert all(math.isnan(v[0]) for v in out.values())


def test_table_csv_and_manifest(tmp_path):
    rows = sim.run_table("nonrobust", reps=10, n_grid=(4,), T_grid=(6,), seed=1)
    assert len(rows) == 8
    path = tmp_path / "t.csv"
    sim.write_rows_csv(rows, path)
    head = path.read_text().splitlines()[0]
    assert head == ",".join(sim.CSV_COLUMNS)
    man = sim.manifest({"seed": 1, "reps": 10}, "0.1.0")
    assert man["seed"] == 1 and len(man["config_hash"]) == 64
