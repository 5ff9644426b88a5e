import json

import numpy as np
import pytest
from scipy.integrate import trapezoid

from heatflat.errors import ConfigError, InputError
from heatflat.fdsolver import ControlSurface
from heatflat.grid import Field2D, Grid2D
from heatflat.pipeline import io
from heatflat.pipeline.cli import main
from heatflat.pipeline.config import ExperimentConfig, parse_initial_condition, parse_pairs
from heatflat.pipeline.experiment import (
    InitialCondition,
    RunReport,
    read_report,
    run_experiment,
    sweep_tau,
)
from heatflat.spectral import CoefficientMatrix, double_step

SMALL = dict(n1=21, n2=21, dt=1e-3, J=9, N=40, quadrature_panels=256, envelope_samples=21)


def small_config(**kw):
    return ExperimentConfig(**{**SMALL, **kw})


@pytest.fixture(scope="module")
def small_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    cfg = small_config(output_dir=str(out))
    return cfg, run_experiment(cfg), out


class TestConfig:
    def test_defaults_valid(self):
        cfg = ExperimentConfig()
        assert cfg.problems() == []
        assert cfg.snapshot_times[-1] == 0.3 and cfg.snapshot_times[11] == 0.275

    def test_every_violation_named(self):
        with pytest.raises(ConfigError) as exc:
            ExperimentConfig(tau=0.4, s=2.0, n1=2, quadrature_panels=3)
        msg = str(exc.value)
        for word in ("tau", "s must", "n1", "quadrature_panels"):
            assert word in msg

    def test_dt_multiple(self):
        with pytest.raises(ConfigError, match="multiple of dt"):
            ExperimentConfig(tau=0.05, dt=0.03)

    def test_types(self):
        with pytest.raises(ConfigError):
            ExperimentConfig(J=2.5)
        with pytest.raises(ConfigError):
            ExperimentConfig(L=float("nan"))

    def test_text_roundtrip(self):
        cfg = small_config(tau=0.1, initial_condition="single_mode:1,2")
        assert ExperimentConfig.from_text(cfg.to_text()) == cfg

    def test_parse_file_and_overrides(self, tmp_path):
        p = tmp_path / "exp.cfg"
        p.write_text("# experiment\ntau = 0.1   # longer free phase\nT = 1\ninitial_condition = constant:2.0\n")
        cfg = ExperimentConfig.from_file(p, ["tau=0.2", "output_dir=out"])
        assert cfg.tau == 0.2 and cfg.T == 1.0 and isinstance(cfg.T, float)
        assert cfg.initial_condition == "constant:2.0" and cfg.output_dir == "out"

    def test_unknown_key(self):
        with pytest.raises(ConfigError, match="unknown configuration keys: tua"):
            ExperimentConfig.from_text("tua = 0.1")

    def test_malformed_lines(self, tmp_path):
        with pytest.raises(ConfigError):
            parse_pairs(["tau 0.1"])
        with pytest.raises(ConfigError):
            parse_pairs(["tau = 0.1", "tau = 0.2"])
        with pytest.raises(ConfigError):
            ExperimentConfig.from_file(tmp_path / "missing.cfg")

    @pytest.mark.parametrize(
        "tag, kind",
        [("double_step", "double_step"), ("constant:1.5", "constant"), ("single_mode:2,3", "single_mode"),
         ("sampled_file:a.csv", "sampled_file")],
    )
    def test_initial_condition_tags(self, tag, kind):
        assert parse_initial_condition(tag).kind == kind

    @pytest.mark.parametrize("tag", ["", "step", "constant:x", "single_mode:1", "single_mode:-1,2", "sampled_file:"])
    def test_bad_initial_condition(self, tag):
        with pytest.raises(ConfigError):
            parse_initial_condition(tag)


class TestIO:
    def test_snapshot_roundtrip(self, tmp_path):
        g = Grid2D(2.0, 7, 5)
        rng = np.random.default_rng(1)
        f = Field2D(rng.normal(size=(7, 5)) / 3.0, g)
        back = io.read_snapshot(io.write_snapshot(f, tmp_path / "s.csv"))
        assert back.grid == g and np.array_equal(back.values, f.values)

    def test_snapshot_layout(self, tmp_path):
        g = Grid2D(1.0, 3, 3)
        path = io.write_snapshot(Field2D(np.arange(9.0).reshape(3, 3), g), tmp_path / "s.csv")
        lines = path.read_text().splitlines()
        assert lines[0] == "x1,x2,theta"
        assert lines[1:3] == ["0.0,0.0,0.0", "0.0,0.5,1.0"]

    def test_control_roundtrip(self, tmp_path):
        rng = np.random.default_rng(2)
        s = ControlSurface(np.linspace(0, 0.3, 4), np.linspace(0, 1, 6), rng.normal(size=(4, 6)))
        back = io.read_control(io.write_control(s, tmp_path / "c.csv"))
        for name in ("times", "x1", "values"):
            assert np.array_equal(getattr(back, name), getattr(s, name))

    def test_coefficient_roundtrip(self, tmp_path):
        c = CoefficientMatrix(np.random.default_rng(3).normal(size=(4, 6)))
        assert np.array_equal(io.read_coefficients(io.write_coefficients(c, tmp_path / "k.csv")).c, c.c)

    def test_bad_files(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("a,b,c\n1,2,3\n")
        with pytest.raises(InputError):
            io.read_snapshot(p)
        p.write_text("x1,x2,theta\n0,0,1\n0,1,oops\n")
        with pytest.raises(InputError):
            io.read_snapshot(p)
        p.write_text("x1,x2,theta\n0,0,1\n0,1,1\n1,0,1\n")
        with pytest.raises(InputError):
            io.read_snapshot(p)
        with pytest.raises(InputError):
            io.read_control(tmp_path / "missing.csv")

    def test_json_non_finite(self, tmp_path):
        path = io.write_json({"a": float("inf"), "b": [1.0, float("nan")]}, tmp_path / "r.json")
        assert io.read_json(path) == {"a": None, "b": [1.0, None]}


class TestInitialCondition:
    def test_double_step_sampling(self):
        g = Grid2D(1.0, 21, 21)
        vals = InitialCondition(ExperimentConfig()).sample(g).values
        assert set(np.unique(vals)) == {-1.0, 0.0, 1.0}

    def test_constant_and_mode(self):
        g = Grid2D(1.0, 11, 11)
        assert np.all(InitialCondition(ExperimentConfig(initial_condition="constant:2")).sample(g).values == 2.0)
        c = InitialCondition(ExperimentConfig(initial_condition="single_mode:1,2")).coefficients(3, 3, 64)
        expected = np.zeros((4, 4))
        expected[1, 2] = 1.0
        assert np.max(np.abs(c.c - expected)) <= 1e-12

    def test_sampled_file(self, tmp_path):
        g = Grid2D(1.0, 41, 41)
        path = io.write_snapshot(Field2D.from_function(double_step, g), tmp_path / "ic.csv")
        ic = InitialCondition(ExperimentConfig(initial_condition=f"sampled_file:{path}"))
        assert np.array_equal(ic.sample(g).values, Field2D.from_function(double_step, g).values)
        coarse = ic.sample(Grid2D(1.0, 21, 21)).values
        assert np.array_equal(coarse, Field2D.from_function(double_step, Grid2D(1.0, 21, 21)).values)
        assert abs(ic.coefficients(3, 3, 64).c[1, 1] + 8 / np.pi**2) <= 0.05

    def test_sampled_file_length_mismatch(self, tmp_path):
        path = io.write_snapshot(Field2D(np.zeros((5, 5)), Grid2D(2.0, 5, 5)), tmp_path / "ic.csv")
        with pytest.raises(ConfigError):
            InitialCondition(ExperimentConfig(initial_condition=f"sampled_file:{path}"))


class TestRunExperiment:
    def test_outputs(self, small_run):
        cfg, report, out = small_run
        assert (out / "config.txt").exists() and (out / "coefficients.csv").exists()
        snaps = sorted((out / "snapshots").glob("*.csv"))
        assert len(snaps) == len(cfg.snapshot_times)
        assert snaps[0].name == "snapshot_000_t0.000000.csv"
        assert ExperimentConfig.from_file(out / "config.txt") == cfg

    def test_initial_snapshot_values(self, small_run):
        _, _, out = small_run
        f = io.read_snapshot(sorted((out / "snapshots").glob("*.csv"))[0])
        assert set(np.unique(f.values)) <= {-1.0, 0.0, 1.0}

    def test_control_file(self, small_run):
        cfg, report, out = small_run
        surf = io.read_control(out / "control.csv")
        assert not np.any(surf.values[surf.times <= cfg.tau])
        assert surf.times[-1] == cfg.T and not np.any(surf.values[-1])
        assert np.any(surf.values)
        effort = np.sqrt(trapezoid(trapezoid(surf.values**2, surf.x1, axis=1), surf.times))
        assert effort == report.control_effort

    def test_report_roundtrip(self, small_run):
        _, report, out = small_run
        back = read_report(out / "report.json")
        assert back.numbers() == json.loads(json.dumps(report.numbers()))

    def test_report_values(self, small_run):
        cfg, report, _ = small_run
        assert report.final_relative_norm <= 1e-2
        assert report.final_norm >= 0
        assert report.compatibility["k0"] <= 1e-8
        assert report.gevrey["defined"]
        assert abs(report.mass_balance["residual"]) <= 1e-10
        assert [s["t"] for s in report.snapshot_norms] == cfg.snapshot_times

    def test_deterministic(self, small_run, tmp_path):
        cfg, report, out = small_run
        again = run_experiment(cfg.replace(output_dir=str(tmp_path)))
        a, b = again.numbers(), report.numbers()
        a["config"].pop("output_dir"), b["config"].pop("output_dir")
        assert a == b
        for name in ("control.csv", "coefficients.csv", "report.json"):
            if name == "report.json":
                a, b = io.read_json(out / name), io.read_json(tmp_path / name)
                a.pop("timings"), b.pop("timings")
                a["config"].pop("output_dir"), b["config"].pop("output_dir")
                assert a == b
            else:
                assert (out / name).read_bytes() == (tmp_path / name).read_bytes()

    def test_zero_initial_condition(self):
        r = run_experiment(small_config(initial_condition="constant:0"))
        assert r.initial_norm == 0 and r.final_norm == 0 and r.max_abs_control == 0 and r.control_effort == 0
        assert not r.gevrey["defined"]

    def test_constant_initial_condition(self):
        r = run_experiment(small_config(initial_condition="constant:1"))
        assert r.phase_boundary_error <= 1e-12
        assert r.final_relative_norm <= 1e-3

    def test_report_from_dict_ignores_extra(self):
        r = RunReport.from_dict({**{k: None for k in RunReport.__dataclass_fields__}, "extra": 1})
        assert r.timings is None


class TestSweep:
    def test_singleton_matches_run(self):
        cfg = small_config()
        (res,) = sweep_tau(cfg, [0.05])
        assert res.numbers() == run_experiment(cfg).numbers()

    def test_invalid_entry(self):
        res = sweep_tau(small_config(), [0.1, 0.3])
        assert isinstance(res[0], RunReport) and isinstance(res[1], ConfigError)

    def test_parallel_matches_serial(self, tmp_path):
        cfg = small_config(output_dir=str(tmp_path))
        a = sweep_tau(cfg, [0.025, 0.1], workers=2)
        b = sweep_tau(cfg.replace(output_dir=None), [0.025, 0.1])
        assert [r.control_effort for r in a] == [r.control_effort for r in b]
        assert (tmp_path / "tau_0.025" / "report.json").exists()


class TestCLI:
    def args(self, out):
        sets = [f"{k}={v}" for k, v in SMALL.items()] + [f"output_dir={out}"]
        return [a for s in sets for a in ("--set", s)]

    def test_run_and_report(self, tmp_path, capsys):
        assert main(["run", *self.args(tmp_path)]) == 0
        assert "final relative L2 norm" in capsys.readouterr().out
        assert main(["report", str(tmp_path / "report.json")]) == 0
        assert "control effort" in capsys.readouterr().out
        assert main(["report", "--json", str(tmp_path / "report.json")]) == 0
        assert json.loads(capsys.readouterr().out)["config"]["n1"] == 21

    def test_decompose_synthesize_simulate(self, tmp_path, capsys):
        args = self.args(tmp_path)
        assert main(["decompose", *args]) == 0
        assert io.read_coefficients(tmp_path / "coefficients.csv").c.shape == (10, 41)
        assert main(["synthesize", *args]) == 0
        surf = io.read_control(tmp_path / "control.csv")
        assert surf.values.shape == (301, 21)
        assert main(["simulate", *args, "--control", str(tmp_path / "control.csv")]) == 0
        final = sorted((tmp_path / "snapshots").glob("*.csv"))[-1]
        f = io.read_snapshot(final)
        assert np.sqrt(np.mean(f.values**2)) <= 1e-2

    def test_config_file(self, tmp_path, capsys):
        cfg = tmp_path / "exp.cfg"
        cfg.write_text(small_config(output_dir=str(tmp_path / "o")).to_text())
        assert main(["run", "--config", str(cfg)]) == 0
        assert (tmp_path / "o" / "report.json").exists()

    def test_sweep(self, tmp_path, capsys):
        code = main(["sweep-tau", "--tau", "0.05", "0.3", *self.args(tmp_path)])
        out = capsys.readouterr().out
        assert code == 1 and "tau=0.3: error" in out
        rows = io.read_json(tmp_path / "sweep.json")["sweep"]
        assert "control_effort" in rows[0] and "error" in rows[1]

    def test_errors(self, tmp_path, capsys):
        assert main(["run", "--set", "tua=1"]) == 2
        assert "unknown configuration keys" in capsys.readouterr().err
        assert main(["report", str(tmp_path / "nothing.json")]) == 2
        with pytest.raises(SystemExit):
            main(["frobnicate"])
