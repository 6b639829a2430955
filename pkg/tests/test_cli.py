import numpy as np
import pytest

from parafembem import cases, cli, errors, fem
from parafembem.cli import ExperimentConfig
from parafembem.mesh import build_capacitor_mesh, build_lshape_mesh


def fake_report(n=3):
    rep = errors.ErrorReport(name="fake")
    for i in range(n):
        row = {c: 0.1 * 2.0 ** (-i) / 3 for c in errors.ERROR_COLUMNS}
        row.update(invmaxMeshsizeh=8.0 * 2**i, numberTimeintervals=20.0 * 2**i)
        rep.append(row)
    return rep


def test_table_round_trip_exact(tmp_path):
    rep = fake_report()
    tab = cli.read_table(cli.write_table(rep, tmp_path / "t.csv"))
    for c in errors.COLUMNS:
        assert np.array_equal(tab[c], rep.column(c))
    assert np.isnan(tab["eoc_errorL2"][0])
    assert np.allclose(tab["eoc_errorL2"][1:], 1.0)


def test_table_single_level(tmp_path):
    path = cli.write_table(fake_report(1), tmp_path / "t.csv")
    assert len(path.read_text().splitlines()) == 2


def test_table_columns_superset(tmp_path):
    tab = cli.read_table(cli.write_table(fake_report(2), tmp_path / "t.csv"))
    legend = {"invmaxMeshsizeh", "numberTimeintervals", "errorL2", "errorL2proj", "errorH1semi",
              "errorH1semiproj", "errorH1dual", "errorenergyV", "errorenergyVproj",
              "globalEnergy", "globalEnergyproj"}
    assert legend <= set(tab)


def test_table_errors(tmp_path):
    with pytest.raises(ValueError):
        cli.write_table(errors.ErrorReport(), tmp_path / "t.csv")
    with pytest.raises(OSError):
        cli.write_table(fake_report(), tmp_path / "missing" / "t.csv")


def test_config_file_and_overrides(tmp_path):
    f = tmp_path / "c.cfg"
    f.write_text("# study\nexperiment = corner\nlevels=3  # three\nscheme=cn\nedge_points=8\n"
                 "first_interval_panels=none\n")
    cfg = cli.read_config(f)
    assert (cfg.experiment, cfg.levels, cfg.scheme, cfg.edge_points) == ("corner", 3, "cn", 8)
    assert cfg.first_interval_panels is None and cfg.quad().first_interval_panels == 1
    cfg = cli.read_config(f, {"levels": 5, "scheme": None})
    assert cfg.levels == 5 and cfg.scheme == "cn"
    assert ExperimentConfig(experiment="time_singular").quad().first_interval_panels == 8


@pytest.mark.parametrize("text", ["colour = red\n", "levels\n", "levels = 0\n",
                                  "experiment = heat\n", "grid = 1,2,3\n"])
def test_config_rejects(tmp_path, text):
    f = tmp_path / "c.cfg"
    f.write_text(text)
    with pytest.raises(ValueError):
        cli.read_config(f)


def test_main_exit_codes(tmp_path, capsys):
    assert cli.main(["run", "--experiment", "smooth", "--levels", "0", "--out", str(tmp_path)]) == 1
    assert "error:" in capsys.readouterr().err
    assert cli.main(["run", "--experiment", "smooth", "--levels", "2", "--out", str(tmp_path),
                     "--slopes"]) == 0
    out = capsys.readouterr().out
    assert "globalEnergy" in out
    assert (tmp_path / "smooth_euler.csv").exists()
    with pytest.raises(SystemExit):
        cli.main(["run", "--experiment", "nope"])


def test_run_experiment_two_levels(tmp_path):
    rep = cli.run_experiment(ExperimentConfig("smooth", levels=2, out=str(tmp_path)))
    assert list(rep.column("invmaxMeshsizeh")) == [8.0, 16.0]
    assert list(rep.column("numberTimeintervals")) == [20.0, 40.0]
    assert np.all(np.diff(rep.column("globalEnergy")) < 0)


def test_run_experiment_bit_reproducible():
    cfg = ExperimentConfig("corner", levels=2)
    a = cli.run_experiment(cfg, write=False)
    b = cli.run_experiment(cfg, write=False)
    assert a.rows == b.rows


def test_run_experiment_names_level():
    cfg = ExperimentConfig("smooth", levels=1, time_points=1)
    with pytest.raises(RuntimeError, match="smooth, level 0"):
        cli.run_experiment(cfg, write=False)


def test_level_grid():
    assert cli.level_grid(0).n_intervals == 20
    assert cli.level_grid(5).n_intervals == 640
    assert cli.level_grid(5).tau(1) == pytest.approx(0.0015625)


def test_smooth_and_time_singular_share_matrices():
    space = fem.FemSpace(build_lshape_mesh(0))
    a, b = cases.smooth(), cases.time_singular()
    Ma = fem.assemble_mass(space)
    Aa = fem.assemble_stiffness(space, a.problem().diffusion)
    Ab = fem.assemble_stiffness(space, b.problem().diffusion)
    assert (Aa != Ab).nnz == 0
    assert (Ma != fem.assemble_mass(space)).nnz == 0


def test_mirror_permutation():
    v = build_capacitor_mesh(1).vertices
    perm = cli.mirror_permutation(v)
    assert np.allclose(v[perm], v * [-1, 1])
    with pytest.raises(ValueError):
        cli.mirror_permutation(build_lshape_mesh(0).vertices)


def test_capacitor_small(tmp_path):
    cfg = ExperimentConfig("capacitor", levels=1, out=str(tmp_path), grid="-3,3,-3,3,7,7")
    res = cli.run_capacitor(cfg)
    assert res.finite and res.n_steps == 20
    assert res.antisymmetry <= 1e-8
    assert [p.name for p in res.files] == [f"capacitor_t{t:.4f}.csv" for t in cli.SNAPSHOT_TIMES]
    # 7x7 grid on [-3,3]^2: spacing 1, the inner 5x5 block lies in the closed domain
    assert res.skipped_points == 25
    lines = res.files[-1].read_text().splitlines()
    assert lines[0].startswith("# time,1.0")
    assert sum(l.startswith("exterior") for l in lines) == 24
    # electrode values after the switch
    vals = {}
    for l in lines[2:]:
        region, x, y, v = l.split(",")
        if region == "interior":
            vals[(float(x), float(y))] = float(v)
    assert vals[(-0.8, 0.0)] == 1.0 and vals[(0.8, 0.0)] == -1.0


def test_capacitor_via_main(tmp_path, capsys):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("grid=-3,3,-3,3,3,3\nT=0.1\n")
    assert cli.main(["run", "--experiment", "capacitor", "--levels", "1", "--config", str(cfg),
                     "--out", str(tmp_path)]) == 0
    assert "antisymmetry" in capsys.readouterr().out
    assert len(list(tmp_path.glob("capacitor_t*.csv"))) == 2
