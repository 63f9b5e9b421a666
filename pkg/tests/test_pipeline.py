import json
import math
import shutil

import numpy as np
import pandas as pd
import pytest

from config.settings import parse_config
from main import main
from src.augment.rng import RngStream
from src.calibration.scaling import LogitMatrix, Temperature, nll
from src.classifier.network import ModelConfig, init_model
from src.errors import ArtifactError, MissingArtifactError, StageError
from src.formats.artifacts import read_report, save_checkpoint, write_temperature
from src.formats.tables import read_logits, read_sweep, write_logits
from src.models.schemas import Variant
from src.pipeline.commands import (
    RunContext,
    cmd_all,
    cmd_calibrate,
    cmd_gen,
    cmd_report,
    cmd_sweep,
    cmd_train,
)


@pytest.fixture
def ctx(tmp_path):
    cfg = parse_config({"experiment": {"image_size": 16}})
    return RunContext(cfg=cfg, out_dir=tmp_path / "run")


@pytest.fixture
def ready_ctx(ctx, small_dataset):
    """Run directory with a copied dataset, an untrained model and T = 2."""
    root, _ = small_dataset
    shutil.copytree(root, ctx.dataset_dir)
    model = init_model(ModelConfig(input_size=8, channels=(4, 6), dilations=(1, 2)), seed=1)
    save_checkpoint(model, ctx.model_path(Variant.I))
    write_temperature(Temperature(2.0), ctx.temperature_path(Variant.I))
    return ctx


class TestGen:
    def test_refuses_existing_without_force(self, ctx):
        manifest = cmd_gen(ctx)
        assert len(manifest.base_samples()) == 229
        with pytest.raises(ArtifactError, match="--force"):
            cmd_gen(ctx)
        forced = RunContext(cfg=ctx.cfg, out_dir=ctx.out_dir, force=True)
        assert cmd_gen(forced).model_dump() == manifest.model_dump()

    def test_force_reports_removal_failure(self, ctx, monkeypatch):
        ctx.dataset_dir.mkdir(parents=True)
        (ctx.dataset_dir / "stale.pgm").write_bytes(b"")

        def refuse(path):
            raise PermissionError(13, "Permission denied", str(path))

        monkeypatch.setattr("src.pipeline.commands.shutil.rmtree", refuse)
        forced = RunContext(cfg=ctx.cfg, out_dir=ctx.out_dir, force=True)
        with pytest.raises(ArtifactError, match="cannot remove"):
            cmd_gen(forced)

    def test_all_stops_at_failing_stage(self, ctx):
        cmd_gen(ctx)
        with pytest.raises(StageError) as info:
            cmd_all(ctx)
        assert info.value.stage == "gen"
        assert info.value.exit_code == ArtifactError.exit_code


class TestMissingPrerequisites:
    def test_train_needs_dataset(self, ctx):
        with pytest.raises(MissingArtifactError, match="texcal gen"):
            cmd_train(ctx, Variant.II)

    def test_calibrate_needs_holdout(self, ctx):
        with pytest.raises(MissingArtifactError, match="texcal train"):
            cmd_calibrate(ctx, Variant.I)

    def test_report_needs_temperature(self, ctx, small_dataset):
        shutil.copytree(small_dataset[0], ctx.dataset_dir)
        model = init_model(ModelConfig(input_size=8, channels=(4,), dilations=(1,)), seed=0)
        save_checkpoint(model, ctx.model_path(Variant.III))
        with pytest.raises(MissingArtifactError, match="texcal calibrate"):
            cmd_report(ctx, Variant.III, calibrated=True)


class TestCalibrate:
    def test_recovers_overconfidence(self, ctx, grid_temperature):
        rng = RngStream(3, "holdout").generator
        probs = rng.dirichlet([0.3] * 4, size=2000)
        probs = np.maximum(probs, 1e-12)
        probs /= probs.sum(axis=1, keepdims=True)
        labels = np.array([rng.choice(4, p=row) for row in probs])
        holdout = LogitMatrix.build(3 * np.log(probs), labels)
        write_logits(holdout, ctx.holdout_path(Variant.I))

        t = cmd_calibrate(ctx, Variant.I)
        best, step = grid_temperature(read_logits(ctx.holdout_path(Variant.I)), center=3.0)
        assert abs(math.log(t.value) - math.log(best)) <= step
        assert nll(holdout, t) <= nll(holdout, best) + 1e-6
        assert t.value > 2.0
        assert ctx.temperature_path(Variant.I).read_text().startswith("T=")
        assert ctx.temperature_path(Variant.I).with_suffix(".json").exists()


class TestReport:
    def test_accuracy_is_temperature_invariant(self, ready_ctx):
        uncal = cmd_report(ready_ctx, Variant.I, calibrated=False)
        cal = cmd_report(ready_ctx, Variant.I, calibrated=True)
        assert uncal.n == cal.n == 188
        assert uncal.accuracy == cal.accuracy

        reports = ready_ctx.out_dir / "reports"
        saved = read_report(reports / "report_I_cal.json")
        assert saved.temperature == 2.0
        assert set(saved.groups) == {"A", "B", "C", "D"}
        assert all(g["n"] == 47 for g in saved.groups.values())
        assert read_logits(reports / "logits_I.csv").n == 188

    def test_reliability_outputs(self, ready_ctx):
        ctx = RunContext(cfg=ready_ctx.cfg.with_overrides(bins=15), out_dir=ready_ctx.out_dir)
        cmd_report(ctx, Variant.I)
        reports = ctx.out_dir / "reports"
        svg = (reports / "reliability_I_uncal.svg").read_text()
        assert svg.count('class="bar"') == 15
        assert svg.count('class="diagonal"') == 1
        rows = pd.read_csv(reports / "reliability_I_uncal.csv")
        assert len(rows) == 15
        assert rows["count"].sum() == 188
        data = json.loads((reports / "report_I_uncal.json").read_text())
        assert data["bins"] == 15
        assert "nll" in data


class TestSweep:
    def test_grid_rows_and_determinism(self, ready_ctx):
        df = cmd_sweep(ready_ctx, Variant.I)
        assert df[df.perturbation == "blur"]["sigma"].tolist() == [1, 2, 4, 8, 16, 32, 64, 128, 256]
        assert df[df.perturbation == "noise"]["sigma"].tolist() == [1, 9, 17, 25, 33, 41, 50]
        sweeps = ready_ctx.out_dir / "sweeps"
        first = (sweeps / "sweep_I_uncal.csv").read_bytes()
        cmd_sweep(ready_ctx, Variant.I)
        assert (sweeps / "sweep_I_uncal.csv").read_bytes() == first
        for name in ("blur", "noise"):
            svg = (sweeps / f"sweep_I_uncal_{name}.svg").read_text()
            assert svg.count("<polyline") == 2

    def test_calibrated_sweep_keeps_accuracy(self, ready_ctx):
        uncal = cmd_sweep(ready_ctx, Variant.I, calibrated=False)
        cal = cmd_sweep(ready_ctx, Variant.I, calibrated=True)
        assert uncal["accuracy"].tolist() == cal["accuracy"].tolist()


class TestMain:
    def test_missing_dataset_exit_code(self, tmp_path):
        assert main(["train", "--out", str(tmp_path)]) == ArtifactError.exit_code
        assert (tmp_path / "config_effective.toml").exists()
        assert (tmp_path / "run_info.json").exists()

    def test_config_error_exit_code(self, tmp_path):
        bad = tmp_path / "bad.toml"
        bad.write_text("[fit]\nlog_t_lower = 3.0\nlog_t_upper = 1.0\n")
        assert main(["gen", "--config", str(bad), "--out", str(tmp_path)]) == 2

    def test_bins_flag_reaches_echo(self, tmp_path):
        main(["calibrate", "--bins", "15", "--out", str(tmp_path)])
        assert "m = 15" in (tmp_path / "config_effective.toml").read_text()


@pytest.mark.slow
def test_full_pipeline(tmp_path):
    config = tmp_path / "small.toml"
    config.write_text(
        "[experiment]\nimage_size = 32\n"
        "[model]\ninput_size = 16\nchannels = [4, 8]\ndilations = [1, 2]\n"
        "[train]\nepochs = 3\n"
    )
    out = tmp_path / "run"
    assert main(["all", "--config", str(config), "--out", str(out)]) == 0
    for v in ("I", "II", "III"):
        uncal = read_report(out / "reports" / f"report_{v}_uncal.json")
        cal = read_report(out / "reports" / f"report_{v}_cal.json")
        assert uncal.metrics["accuracy"] == cal.metrics["accuracy"]
        assert (out / "models" / f"model_{v}.ckpt").exists()
        train_report = json.loads((out / "models" / f"train_report_{v}.json").read_text())
        assert len(train_report["fold_accuracies"]) == 5


@pytest.mark.slow
def test_default_run_meets_calibration_targets(tmp_path):
    out = tmp_path / "run"
    assert main(["all", "--out", str(out)]) == 0

    def gap(report):
        return abs(report.metrics["avg_confidence"] - report.metrics["accuracy"])

    train_reports = {}
    for v in ("I", "II", "III"):
        uncal = read_report(out / "reports" / f"report_{v}_uncal.json")
        cal = read_report(out / "reports" / f"report_{v}_cal.json")
        assert cal.metrics["ece"] < uncal.metrics["ece"], v
        assert cal.metrics["ace"] < uncal.metrics["ace"], v
        assert gap(cal) < gap(uncal), v
        if v == "I":
            assert gap(uncal) >= 0.05

        train_reports[v] = json.loads((out / "models" / f"train_report_{v}.json").read_text())
        for fold in train_reports[v]["folds"]:
            assert fold["epoch_losses"][0] < train_reports[v]["initial_loss"], (v, fold["fold"])

    sweep = read_sweep(out / "sweeps" / "sweep_I_uncal.csv")
    blur = sweep[sweep["perturbation"] == "blur"].set_index("sigma")["accuracy"]
    assert blur[256.0] < blur[1.0]

    noisy = {v: r["group_accuracies"]["C"] for v, r in train_reports.items()}
    assert noisy["III"] > noisy["I"]
