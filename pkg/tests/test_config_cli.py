import json

import pytest

from scdkit.cli import main
from scdkit.config import RunConfig, default_config_json
from scdkit.errors import ConfigError
from scdkit.simulator import SimConfig, simulate
from scdkit.annotations import dump_rttm


def test_run_config_defaults():
    cfg = RunConfig()
    assert cfg.simulate == SimConfig()  # sections mirror library defaults
    assert cfg.model.hidden_dim == 64
    assert cfg.loss.alpha == 0.05
    assert cfg.train.learning_rate == 1e-3
    assert cfg.detect.threshold == 0.35


def test_run_config_from_dict_partial_override():
    cfg = RunConfig.from_dict({"train": {"epochs": 3},
                               "simulate": {"num_speakers": 2}})
    assert cfg.train.epochs == 3
    assert cfg.train.learning_rate == 1e-3  # untouched default
    assert cfg.simulate.num_speakers == 2


def test_run_config_rejects_unknown_section():
    with pytest.raises(ConfigError) as exc:
        RunConfig.from_dict({"optimizer": {}})
    assert "optimizer" in str(exc.value)


def test_run_config_rejects_unknown_key():
    with pytest.raises(ConfigError) as exc:
        RunConfig.from_dict({"train": {"learning_rat": 0.1}})
    assert "train.learning_rat" in str(exc.value)


def test_run_config_rejects_bad_value():
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"train": {"epochs": 0}})
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"detect": {"threshold": 2.0}})


def test_run_config_coerces_duration_lists():
    cfg = RunConfig.from_dict({"simulate": {"segment_duration": [0.5, 1.0]}})
    assert cfg.simulate.segment_duration == (0.5, 1.0)


def test_run_config_from_json_error():
    with pytest.raises(ConfigError):
        RunConfig.from_json("{not json")


def test_run_config_with_seed():
    cfg = RunConfig().with_seed(123)
    assert cfg.simulate.seed == 123
    assert cfg.train.seed == 123


def test_run_config_round_trip():
    cfg = RunConfig.from_dict({"train": {"epochs": 7}, "loss": {"alpha": 0.0}})
    again = RunConfig.from_dict(cfg.to_dict())
    assert again == cfg


def test_default_config_json_parses():
    data = json.loads(default_config_json())
    assert set(data) == {"simulate", "model", "loss", "train", "detect"}
    assert RunConfig.from_dict(data) == RunConfig()


# ---------------------------------------------------------------------------
# CLI


def test_cli_default_config(capsys):
    assert main(["default-config"]) == 0
    out = capsys.readouterr().out
    assert json.loads(out)["detect"]["threshold"] == 0.35


def test_cli_label_outputs_csv(tmp_path, capsys):
    d = simulate(SimConfig(num_turns=2, segment_duration=(0.4, 0.6),
                           feature_dim=4, num_layers=1, seed=3))
    rttm = tmp_path / "ref.rttm"
    dump_rttm(d.annotation, rttm, file_id="ref")
    assert main(["label", "--rttm", str(rttm)]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0] == "frame_index,value"
    assert len(lines) > 1


def test_cli_config_error_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"trane": {}}))
    code = main(["default-config", "--config", str(bad)])
    assert code == 2
    assert "trane" in capsys.readouterr().err


def test_cli_missing_config_file(tmp_path):
    assert main(["default-config", "--config",
                 str(tmp_path / "absent.json")]) == 2


def test_cli_runtime_error_exit_code(tmp_path, capsys):
    code = main(["infer", "--checkpoint", str(tmp_path / "no.scdn"),
                 str(tmp_path / "no.scdf")])
    assert code == 1


_TINY = {
    "simulate": {"num_speakers": 2, "feature_dim": 8, "num_layers": 2,
                 "num_turns": 3, "segment_duration": [0.4, 0.8],
                 "noise_sigma": 0.3},
    "model": {"hidden_dim": 16, "num_blocks": 1},
    "train": {"epochs": 1, "val_fraction": 0.25},
}


def test_cli_pipeline_end_to_end(tmp_path, capsys):
    config = tmp_path / "run.json"
    config.write_text(json.dumps(_TINY))
    corpus_dir = tmp_path / "corpus"
    run_dir = tmp_path / "run"

    assert main(["simulate", "--config", str(config), "--seed", "4",
                 "--out", str(corpus_dir), "--count", "4"]) == 0
    manifest = corpus_dir / "manifest.txt"
    assert capsys.readouterr().out.strip() == str(manifest)
    stems = manifest.read_text().split()
    assert len(stems) == 4
    for stem in stems:
        assert (corpus_dir / f"{stem}.scdf").exists()
        assert (corpus_dir / f"{stem}.rttm").exists()

    assert main(["train", "--config", str(config), "--seed", "4",
                 "--manifest", str(manifest), "--out", str(run_dir)]) == 0
    checkpoint = run_dir / "checkpoint.scdn"
    assert capsys.readouterr().out.strip() == str(checkpoint)
    log = json.loads((run_dir / "training_log.json").read_text())
    assert len(log["epochs"]) == 1
    assert "best_val_f1" in log

    features = [str(corpus_dir / f"{stem}.scdf") for stem in stems[:2]]
    assert main(["infer", "--checkpoint", str(checkpoint)] + features) == 0
    hyp_csv = capsys.readouterr().out
    assert hyp_csv.splitlines()[0] == "file_id,time_seconds"
    hyp_path = tmp_path / "hyp.csv"
    hyp_path.write_text(hyp_csv)

    assert main(["eval", "--hypothesis", str(hyp_path),
                 "--reference", str(corpus_dir)]) == 0
    report = json.loads(capsys.readouterr().out)
    assert set(report) >= {"coverage", "purity", "f1", "files"}
    assert 0.0 <= report["f1"] <= 1.0
    # Reference ids with no hypothesis rows score an empty hypothesis, so
    # every simulated file shows up.
    assert len(report["files"]) == 4

    assert main(["inspect-weights", "--checkpoint", str(checkpoint)]) == 0
    table = json.loads(capsys.readouterr().out)
    assert table["num_layers"] == 2
    assert len(table["weights"]) == 2
    assert not table["fusion_bypassed"]


def test_cli_eval_rejects_unknown_hypothesis_id(tmp_path, capsys):
    d = simulate(SimConfig(num_turns=2, segment_duration=(0.4, 0.6),
                           feature_dim=4, num_layers=1, seed=8))
    ref_dir = tmp_path / "refs"
    ref_dir.mkdir()
    dump_rttm(d.annotation, ref_dir / "known.rttm", file_id="known")
    hyp = tmp_path / "hyp.csv"
    hyp.write_text("file_id,time_seconds\nmystery,0.5\n")
    code = main(["eval", "--hypothesis", str(hyp), "--reference",
                 str(ref_dir)])
    assert code == 1
    assert "mystery" in capsys.readouterr().err


def test_cli_infer_threshold_override(tmp_path, capsys):
    d = simulate(SimConfig(num_turns=2, segment_duration=(0.4, 0.6),
                           feature_dim=8, num_layers=2, seed=9))
    from scdkit.model import FrameClassifier, ModelConfig, save_checkpoint
    from scdkit.simulator import write_features

    model = FrameClassifier(ModelConfig(num_input_layers=2, input_dim=8,
                                        hidden_dim=16, num_blocks=1), seed=0)
    ckpt = tmp_path / "m.scdn"
    save_checkpoint(model, ckpt)
    feats = tmp_path / "d.scdf"
    write_features(d.stack, feats)
    # A threshold just below 1 yields far fewer detections than one just
    # above 0; both runs must succeed.
    assert main(["infer", "--checkpoint", str(ckpt), "--threshold", "0.99",
                 str(feats)]) == 0
    high = len(capsys.readouterr().out.splitlines())
    assert main(["infer", "--checkpoint", str(ckpt), "--threshold", "0.01",
                 str(feats)]) == 0
    low = len(capsys.readouterr().out.splitlines())
    assert high <= low
