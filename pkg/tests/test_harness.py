import io
import math
from dataclasses import replace

import numpy as np
import pytest

from jmdsim import harness
from jmdsim.errors import ConfigError, SweepError
from jmdsim.harness import (CSV_COLUMNS, DetectorSpec, SweepRecord, SweepSpec, dump_results,
                            make_frame, read_results, run_sweep, run_trial, trial_rng,
                            write_results)
from jmdsim.scenario import ScenarioConfig


def small_spec(**kw):
    base = ScenarioConfig(B=16, U=8, K=40, snr_db=10.0, seed=3)
    args = dict(base=base, snr_db_list=[5.0, 15.0], detectors=["sandman", "lmmse"],
                trials_per_point=10, record_timing=False)
    args.update(kw)
    return SweepSpec(**args)


class TestSeeding:

    def test_streams_independent(self):
        a = trial_rng(1, 0, 0, "channel").standard_normal(4)
        b = trial_rng(1, 0, 0, "noise").standard_normal(4)
        assert not np.allclose(a, b)

    def test_common_frames_across_detectors(self):
        cfg = ScenarioConfig()
        f1 = make_frame(cfg, 5, cell_index=2)
        f2 = make_frame(cfg.replace(jammer_model="data_only"), 5, cell_index=2)
        np.testing.assert_array_equal(f1.H, f2.H)
        np.testing.assert_array_equal(f1.S_D, f2.S_D)
        np.testing.assert_array_equal(f1.N, f2.N)

    def test_run_trial_deterministic(self):
        cfg = ScenarioConfig(snr_db=8.0)
        a = replace(run_trial(cfg, "sandman", 3), detector_seconds=0.0)
        b = replace(run_trial(cfg, "sandman", 3), detector_seconds=0.0)
        assert a == b


class TestDetectorSpec:

    def test_default_L(self):
        base = ScenarioConfig(L=16)
        assert DetectorSpec("pos_box").scenario(base).L == 16
        assert DetectorSpec("sandman").scenario(base).L == 0
        assert DetectorSpec("sandman", L=4).scenario(base).L == 4

    def test_parse(self):
        assert DetectorSpec.parse({"name": "pos_box", "L": 8}) == DetectorSpec("pos_box", L=8)
        with pytest.raises(ConfigError):
            DetectorSpec.parse({"name": "pos_box", "window": 8})
        with pytest.raises(ConfigError):
            DetectorSpec("zf")


class TestSweep:

    def test_cardinality(self):
        recs = run_sweep(small_spec())
        assert len(recs) == 4
        assert [(r.snr_db, r.detector) for r in recs] == [
            (5.0, "sandman"), (5.0, "lmmse"), (15.0, "sandman"), (15.0, "lmmse")]
        assert all(r.trials == 10 for r in recs)

    def test_models_and_rho_axes(self):
        spec = small_spec(jammer_models=["barrage", "pilot_only"], rho_db_list=[20, 30],
                          detectors=["g_pos_box"], trials_per_point=2)
        recs = run_sweep(spec)
        assert len(recs) == 8
        assert {(r.jammer_model, r.rho_db) for r in recs} == {
            (m, float(x)) for m in ("barrage", "pilot_only") for x in (20, 30)}

    def test_rate_fraction_column(self):
        spec = small_spec(detectors=[{"name": "pos_box", "L": 8}], trials_per_point=2)
        rec = run_sweep(spec)[0]
        assert rec.L == 8 and rec.r == pytest.approx(24 / 32)

    def test_jammer_free_lmmse_high_snr(self):
        base = ScenarioConfig(jammer_model="none", I=0)
        spec = SweepSpec(base=base, snr_db_list=[30.0], detectors=["lmmse"],
                         trials_per_point=50)
        assert run_sweep(spec)[0].ber < 1e-3

    def test_ber_within_binomial_interval(self):
        # two disjoint seeds estimate the same BER
        base = ScenarioConfig(B=16, U=8, K=40)
        bers = []
        for seed in (1, 2):
            spec = SweepSpec(base=base.replace(seed=seed), snr_db_list=[-2.0],
                             detectors=["lmmse"], trials_per_point=200)
            bers.append(run_sweep(spec)[0].ber)
        n = 200 * 2 * 8 * 24
        p = np.mean(bers)
        # frames correlate errors, so allow a generous multiple of the iid spread
        assert abs(bers[0] - bers[1]) <= 10 * math.sqrt(2 * p * (1 - p) / n)

    def test_workers_do_not_change_results(self):
        spec = small_spec(trials_per_point=12)
        a = run_sweep(spec, workers=1, chunk_size=5)
        b = run_sweep(spec, workers=2, chunk_size=3)
        assert a == b

    def test_subspace_metric(self):
        recs = run_sweep(small_spec(emit_subspace_metrics=True, detectors=["sandman", "lmmse"]))
        assert recs[0].principal_angle_median is not None
        assert recs[1].principal_angle_median is None

    def test_failure_budget(self, monkeypatch):
        real = harness.run_trial

        def flaky(cfg, det, i, *a, **k):
            if i == 0:
                raise RuntimeError("boom")
            return real(cfg, det, i, *a, **k)

        monkeypatch.setattr(harness, "run_trial", flaky)
        with pytest.raises(SweepError, match="boom"):
            run_sweep(small_spec(trials_per_point=10))
        recs = run_sweep(small_spec(trials_per_point=100, snr_db_list=[10.0],
                                    detectors=["lmmse"]))
        assert recs[0].trials == 99

    def test_spec_validation(self):
        with pytest.raises(ConfigError):
            small_spec(trials_per_point=0)
        with pytest.raises(ConfigError):
            small_spec(snr_db_list=[])
        with pytest.raises(ConfigError):
            SweepSpec.from_dict({"snr_db_list": [1.0]})
        with pytest.raises(ConfigError):
            SweepSpec.from_dict({"snr_db_list": [1.0], "detectors": ["lmmse"], "trails": 3})

    def test_from_file(self, tmp_path):
        p = tmp_path / "s.yaml"
        p.write_text("scenario:\n  B: 16\n  U: 8\n  K: 40\nsnr_db_list: [0, 5]\n"
                     "detectors: [lmmse, {name: pos_box, L: 4}]\ntrials_per_point: 3\n")
        spec = SweepSpec.from_file(p)
        assert spec.base.B == 16 and spec.detectors[1] == DetectorSpec("pos_box", L=4)


class TestOutput:

    def records(self):
        return [SweepRecord(snr_db=5.0, detector="sandman", jammer_model="barrage",
                            rho_db=30.0, L=0, r=1.0, ber=0.0123, mer=0.0, trials=10,
                            principal_angle_median=0.01),
                SweepRecord(snr_db=10.0, detector="lmmse", jammer_model="barrage",
                            rho_db=30.0, L=0, r=1.0, ber=math.nan, mer=0.5, trials=10)]

    @pytest.mark.parametrize("fmt", ["csv", "jsonl"])
    def test_round_trip(self, tmp_path, fmt):
        path = tmp_path / f"out.{fmt}"
        write_results(self.records(), fmt, path)
        back = read_results(path)
        assert back[0] == self.records()[0]
        assert math.isnan(back[1].ber) and back[1].principal_angle_median is None

    def test_header_only(self, tmp_path):
        path = tmp_path / "empty.csv"
        write_results([], "csv", path)
        assert path.read_text() == ",".join(CSV_COLUMNS) + "\n"
        assert read_results(path) == []

    def test_zero_mer_formatting(self):
        buf = io.StringIO()
        dump_results(self.records()[:1], "csv", buf)
        row = buf.getvalue().splitlines()[1].split(",")
        assert row[CSV_COLUMNS.index("mer")] == "0.000000000"
        assert row[CSV_COLUMNS.index("ber")] == "0.01230000000"

    def test_unknown_format(self, tmp_path):
        with pytest.raises(ConfigError):
            write_results([], "xml", tmp_path / "x")

    def test_unwritable(self, tmp_path):
        with pytest.raises(SweepError):
            write_results([], "csv", tmp_path / "missing" / "x.csv")

    def test_byte_identical_reruns(self, tmp_path):
        spec = small_spec(trials_per_point=4)
        write_results(run_sweep(spec), "csv", tmp_path / "a.csv")
        write_results(run_sweep(spec), "csv", tmp_path / "b.csv")
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
