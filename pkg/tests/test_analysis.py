import math

import numpy as np
import pytest

import driven_lattice as dl
from driven_lattice import analysis, cli

REF = dl.LatticeSpec()

CONFIG_TEXT = """
# reference run
mass = 1.0
hbar = 1.0
v0 = 1.0
delta = 0.5
spacing = 10.0
amplitude = 1.0
omega = 1.0
phases = 0,pi,0
np = 3
sigma = 62.83185307179586
center = 240.0
domain = ring
supercells = 16
substeps = 2048
horizon = 100
omega_start = 2.4
omega_stop = 3.2
omega_step = 0.01
outdir = out
"""


def tiny_config(**kwargs):
    defaults = dict(
        lattice=dl.LatticeSpec(),
        initial=dl.UniformState(),
        domain="supercell",
        horizon=20,
        substeps=512,
        refine_peaks=False,
    )
    defaults.update(kwargs)
    return dl.ExperimentConfig(**defaults)


class TestConfigParsing:
    def test_full_file_round_trip(self):
        values = analysis.parse_config_text(CONFIG_TEXT)
        config = analysis.config_from_values(values)
        assert config.lattice.phases == (0.0, math.pi, 0.0)
        assert config.lattice.omega == 1.0
        assert isinstance(config.initial, dl.GaussianState)
        assert config.initial.center == 240.0
        assert config.domain == "ring"
        assert config.supercells == 16
        assert len(config.omega_grid()) == 81
        assert config.omega_grid()[-1] == pytest.approx(3.2)

    def test_unknown_key_rejected(self):
        with pytest.raises(dl.ConfigError, match="unknown key"):
            analysis.parse_config_text("flux_capacitor = 1\n")

    def test_phase_token_forms(self):
        values = {"phases": "0.5pi,-pi,0", "np": "3"}
        config = analysis.config_from_values(values)
        assert config.lattice.phases == (0.5 * math.pi, -math.pi, 0.0)

    def test_np_phase_mismatch(self):
        with pytest.raises(dl.ConfigError, match="does not match"):
            analysis.config_from_values({"phases": "0,pi,0", "np": "2"})

    def test_sigma_zero_means_uniform(self):
        config = analysis.config_from_values({"sigma": "0"})
        assert isinstance(config.initial, dl.UniformState)

    def test_default_gaussian_center_is_mid_ring_site(self):
        config = analysis.config_from_values(
            {"sigma": "62.8", "domain": "ring", "supercells": "16"}
        )
        assert config.initial.center == 240.0

    def test_invalid_values(self):
        with pytest.raises(dl.ConfigError):
            analysis.config_from_values({"omega": "not-a-number"})
        with pytest.raises(dl.ConfigError):
            analysis.config_from_values({"v0": "-1"})
        with pytest.raises(dl.ConfigError):
            tiny_config(horizon=0)
        with pytest.raises(dl.ConfigError):
            tiny_config(domain="torus")
        with pytest.raises(dl.ConfigError):
            tiny_config(omega_start=1.0, omega_stop=None, omega_step=None)

    def test_overrides_beat_file_values(self):
        values = analysis.parse_config_text(CONFIG_TEXT)
        config = analysis.config_from_values(values, {"omega": "2.5", "sigma": "0"})
        assert config.lattice.omega == 2.5
        assert isinstance(config.initial, dl.UniformState)


class TestSweeps:
    def test_static_drive_gives_thirds_and_flat_overlap(self):
        config = tiny_config(
            lattice=dl.LatticeSpec(amplitude=0.0),
            horizon=40,
            omega_start=3.0, omega_stop=3.2, omega_step=0.1,
            basis_size=61,
        )
        sweep = dl.run_nmax_sweep(config)
        assert len(sweep.records) == 3
        assert not sweep.failures
        assert np.abs(sweep.column("n_max") - 1.0 / 3.0).max() < 1e-10
        assert np.ptp(sweep.column("overlap")) < 1e-8

    def test_overlap_sweep_skips_populations(self):
        config = tiny_config(omega_start=1.0, omega_stop=1.1, omega_step=0.1)
        sweep = dl.run_overlap_sweep(config)
        assert np.all(np.isnan(sweep.column("n_max")))
        assert not np.any(np.isnan(sweep.column("overlap")))

    def test_failures_recorded_not_dropped(self, monkeypatch):
        config = tiny_config(omega_start=1.0, omega_stop=1.2, omega_step=0.1)
        real = analysis.labeled_spectrum

        def flaky(spec, *args, **kwargs):
            if abs(spec.omega - 1.1) < 1e-9:
                raise dl.UnitarityError("synthetic failure")
            return real(spec, *args, **kwargs)

        monkeypatch.setattr(analysis, "labeled_spectrum", flaky)
        sweep = dl.run_nmax_sweep(config)
        assert len(sweep.records) == 3
        assert len(sweep.failures) == 1
        assert sweep.failures[0][0] == pytest.approx(1.1)
        failed = [r for r in sweep.records if r.error]
        assert len(failed) == 1 and math.isnan(failed[0].n_max)

    def test_peak_refinement_inserts_points(self):
        config = tiny_config(
            horizon=400,
            omega_start=2.70, omega_stop=2.76, omega_step=0.02,
            refine_peaks=True,
        )
        sweep = dl.run_nmax_sweep(config)
        requested = set(np.round(config.omega_grid(), 9))
        produced = set(np.round(sweep.column("omega"), 9))
        assert requested <= produced
        assert len(produced) > len(requested)
        omegas = sweep.column("omega")
        assert np.all(np.diff(omegas) > 0)


class TestDeterminism:
    def test_identical_config_identical_bytes(self, tmp_path):
        def run(workers, name):
            config = tiny_config(
                omega_start=1.0, omega_stop=1.1, omega_step=0.1,
                workers=workers, outdir=str(tmp_path),
            )
            sweep = dl.run_nmax_sweep(config)
            return dl.write_sweep_csv(tmp_path / name, sweep).read_bytes()

        first = run(1, "a.csv")
        second = run(1, "b.csv")
        parallel = run(2, "c.csv")
        assert first == second == parallel


class TestCsvEmission:
    def test_sweep_csv_format(self, tmp_path):
        config = tiny_config(omega_start=1.0, omega_stop=1.0, omega_step=0.1)
        sweep = dl.run_nmax_sweep(config)
        path = dl.write_sweep_csv(tmp_path / "sweep.csv", sweep)
        lines = path.read_text().splitlines()
        header = [line for line in lines if line.startswith("#")]
        assert any("config_hash" in line for line in header)
        columns = [line for line in lines if not line.startswith("#")][0]
        assert columns == "omega,n_max,argmax_site,argmax_m,overlap,eps_fgs,gap"
        assert path.with_suffix(".csv.meta.json").exists()

    def test_seventeen_digit_round_trip(self, tmp_path):
        config = tiny_config(omega_start=1.0, omega_stop=1.0, omega_step=0.1)
        sweep = dl.run_nmax_sweep(config)
        path = dl.write_sweep_csv(tmp_path / "sweep.csv", sweep)
        omegas, overlaps = analysis.read_sweep_csv(path)
        assert omegas[0] == sweep.records[0].omega
        assert overlaps[0] == sweep.records[0].overlap

    def test_evolution_csv(self, tmp_path):
        config = tiny_config(horizon=3)
        trace = dl.run_evolution(config)
        path = dl.write_evolution_csv(tmp_path / "evolve.csv", config, trace)
        rows = [l for l in path.read_text().splitlines() if not l.startswith("#")]
        assert rows[0] == "m,t,s,n_s"
        assert len(rows) - 1 == 4 * 3  # (horizon+1) periods x 3 sites

    def test_modes_csv_reports_twenty(self, tmp_path, spectrum_w1):
        config = tiny_config()
        path = dl.write_modes_csv(tmp_path / "modes.csv", config, spectrum_w1)
        rows = [l for l in path.read_text().splitlines() if not l.startswith("#")]
        assert rows[0] == "kappa,alpha,eps,x,re_phi,im_phi"
        assert len(rows) - 1 == 20 * spectrum_w1.grid.points


class TestEvolutionMethods:
    def test_floquet_and_direct_agree(self):
        config = tiny_config(horizon=5, substeps=1024)
        floquet = dl.run_evolution(config, method="floquet")
        direct = dl.run_evolution(config, method="direct")
        assert np.abs(floquet.values - direct.values).max() < 1e-3

    def test_direct_rejects_truncations(self):
        with pytest.raises(dl.ConfigError):
            dl.run_evolution(tiny_config(horizon=2), keep=3, method="direct")

    def test_truncated_evolutions_keep_reduced_weight(self):
        config = tiny_config(horizon=3)
        by_keep = dl.run_evolution(config, keep=3)
        by_bands = dl.run_evolution(config, bands=(0, 2))
        assert np.all(by_keep.totals() < 1.0)
        assert np.all(by_bands.totals() < 1.0)
        assert np.all(by_keep.totals() > 0.8)  # dominant modes retained


class TestResonanceReport:
    def test_requires_sweep_data(self):
        config = tiny_config(omega_start=1.0, omega_stop=1.1, omega_step=0.1)
        empty = dl.SweepResult(records=(), failures=(), config=config)
        with pytest.raises(dl.ConfigError):
            dl.report_resonances(empty)

    def test_free_lattice_has_flat_overlap_and_no_dips(self):
        config = tiny_config(
            lattice=dl.LatticeSpec(v0=0.0),
            omega_start=2.60, omega_stop=2.70, omega_step=0.01,
        )
        sweep = dl.run_overlap_sweep(config)
        assert np.abs(sweep.column("overlap") - 1.0).max() < 1e-10
        rows = dl.report_resonances(sweep)
        assert rows and all(math.isnan(r.residual) for r in rows)

    def test_rows_cover_predictions_in_window(self, sweep_window):
        rows = dl.report_resonances(sweep_window)
        keys = {(r.prediction.band_index, r.prediction.fold_count) for r in rows}
        assert (11, 1) in keys and (16, 2) in keys
        assert all(not math.isnan(r.residual) for r in rows)
        # predictions away from the window edges pair with a dip within 0.1
        for row in rows:
            if 2.5 <= row.prediction.omega <= 3.1:
                assert row.residual <= 0.1

    def test_every_prediction_has_a_nearby_local_minimum(self, sweep_window):
        dips = dl.detect_overlap_dips(
            sweep_window.column("omega"), sweep_window.column("overlap"),
            prominence=0.0,
        )
        for pred in dl.predict_resonances(sweep_window.config.lattice, 20, 2):
            if 2.4 <= pred.omega <= 3.2:
                assert min(abs(d.omega - pred.omega) for d in dips) <= 0.1

    def test_population_peaks_colocate_with_overlap_minima(self, sweep_window):
        import scipy.signal

        omegas = sweep_window.column("omega")
        n_max = sweep_window.column("n_max")
        dips = dl.detect_overlap_dips(
            omegas, sweep_window.column("overlap"), prominence=0.0
        )
        peaks, _ = scipy.signal.find_peaks(n_max, prominence=0.02)
        strong = [i for i in peaks if n_max[i] > 0.45]
        assert strong
        for i in strong:
            assert min(abs(d.omega - omegas[i]) for d in dips) <= 0.05


class TestCli:
    def test_invalid_config_exit_code(self, tmp_path):
        bad = tmp_path / "bad.cfg"
        bad.write_text("bogus_key = 1\n")
        assert cli.main(["sweep", "--config", str(bad)]) == 2

    def test_missing_omega_grid_exit_code(self):
        assert cli.main(["sweep", "--substeps", "512"]) == 2

    def test_evolve_and_resonances_flow(self, tmp_path):
        base = [
            "--substeps", "512", "--horizon", "3", "--outdir", str(tmp_path),
        ]
        assert cli.main(["evolve", *base, "--output", "evolve.csv"]) == 0
        assert (tmp_path / "evolve.csv").exists()

        sweep_args = [
            "sweep", "--substeps", "512", "--horizon", "3",
            "--omega-start", "1.0", "--omega-stop", "1.1", "--omega-step", "0.1",
            "--outdir", str(tmp_path), "--overlap-only", "--output", "sweep.csv",
        ]
        assert cli.main(sweep_args) == 0
        reso_args = [
            "resonances", "--outdir", str(tmp_path),
            "--sweep-csv", str(tmp_path / "sweep.csv"), "--output", "reso.csv",
        ]
        assert cli.main(reso_args) == 0
        assert (tmp_path / "reso.csv").exists()

    def test_missing_sweep_file_exit_code(self, tmp_path):
        code = cli.main([
            "resonances", "--outdir", str(tmp_path),
            "--sweep-csv", str(tmp_path / "nope.csv"),
        ])
        assert code == 2

    def test_tolerance_violation_exit_code(self, tmp_path, monkeypatch):
        def boom(*args, **kwargs):
            raise dl.UnitarityError("synthetic")

        monkeypatch.setattr(cli, "labeled_spectrum", boom)
        code = cli.main([
            "modes", "--substeps", "512", "--outdir", str(tmp_path),
        ])
        assert code == 3

    def test_sweep_failures_exit_code(self, tmp_path, monkeypatch):
        real = analysis.labeled_spectrum

        def flaky(spec, *args, **kwargs):
            if abs(spec.omega - 1.1) < 1e-9:
                raise dl.UnitarityError("synthetic failure")
            return real(spec, *args, **kwargs)

        monkeypatch.setattr(analysis, "labeled_spectrum", flaky)
        code = cli.main([
            "sweep", "--substeps", "512", "--horizon", "3",
            "--omega-start", "1.0", "--omega-stop", "1.2", "--omega-step", "0.1",
            "--outdir", str(tmp_path), "--overlap-only",
        ])
        assert code == 4
