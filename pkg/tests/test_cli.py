import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from vocgan import dsp
from vocgan.autodiff import save_checkpoint
from vocgan.cli import EXIT_DATA, EXIT_NUMERIC, EXIT_OK, EXIT_USAGE, main
from vocgan.corpus import make_corpus
from vocgan.generator import GeneratorConfig, build_generator


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("corpus")
    make_corpus(root, n_clips=2, seconds=1.1)
    return root


@pytest.fixture(scope="module")
def checkpoint(tmp_path_factory):
    root = tmp_path_factory.mktemp("ckpt")
    G = build_generator(GeneratorConfig.toy(), 0)
    save_checkpoint(root / "generator.vocg", G.state_dict())
    (root / "generator.json").write_text(G.cfg.to_json())
    return root / "generator.vocg"


def test_corpus_then_prepare(tmp_path):
    assert main(["corpus", "--out", str(tmp_path / "d"), "--clips", "3"]) == EXIT_OK
    assert main(["prepare", "--data-dir", str(tmp_path / "d"), "--out-dir", str(tmp_path / "p")]) == EXIT_OK
    with open(tmp_path / "p" / "manifest.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 4
    for r in rows:
        mel = dsp.load_mel(r["mel_path"])
        assert mel.n_frames == int(r["n_frames"]) and mel.n_mels == 80


def test_prepare_rejects_wrong_rate_without_resample(tmp_path):
    d = tmp_path / "d"
    d.mkdir()
    for i in range(3):
        dsp.write_wav(d / f"ok{i}.wav", dsp.Waveform(0.1 * np.ones(4000)))
    dsp.write_wav(d / "hi.wav", dsp.Waveform(0.1 * np.ones(8000), 44100))
    (d / "junk.wav").write_bytes(b"RIFF garbage")
    assert main(["prepare", "--data-dir", str(d), "--out-dir", str(tmp_path / "p")]) == EXIT_OK
    rejected = (tmp_path / "p" / "rejected.csv").read_text()
    assert "hi.wav" in rejected and "junk.wav" in rejected
    assert len((tmp_path / "p" / "manifest.csv").read_text().splitlines()) == 4
    assert main(["prepare", "--data-dir", str(d), "--out-dir", str(tmp_path / "q"), "--resample"]) == EXIT_OK
    assert len((tmp_path / "q" / "manifest.csv").read_text().splitlines()) == 5


def test_prepare_empty_is_data_error(tmp_path):
    (tmp_path / "empty").mkdir()
    assert main(["prepare", "--data-dir", str(tmp_path / "empty"), "--out-dir", str(tmp_path / "o")]) == EXIT_DATA


def test_synth_87_frames(tmp_path, checkpoint):
    mel = dsp.mel_spectrogram(dsp.Waveform(np.zeros(22050)))
    dsp.save_mel(tmp_path / "m.vocm", mel)
    out = tmp_path / "o.wav"
    assert main(["synth", "--checkpoint", str(checkpoint), "--mel", str(tmp_path / "m.vocm"),
                 "--out", str(out)]) == EXIT_OK
    assert len(dsp.read_wav(out)) == 22272


def test_synth_copy_synthesis_from_wav(tmp_path, checkpoint, corpus):
    out = tmp_path / "o.wav"
    assert main(["synth", "--checkpoint", str(checkpoint), "--wav", str(corpus / "overfit.wav"),
                 "--out", str(out)]) == EXIT_OK
    assert len(dsp.read_wav(out)) == 87 * 256


def test_synth_is_idempotent(tmp_path, checkpoint, corpus):
    args = ["synth", "--checkpoint", str(checkpoint), "--wav", str(corpus / "overfit.wav"), "--out"]
    main(args + [str(tmp_path / "a.wav")])
    main(args + [str(tmp_path / "b.wav")])
    assert (tmp_path / "a.wav").read_bytes() == (tmp_path / "b.wav").read_bytes()


def test_eval_ground_truth_is_zero(tmp_path, corpus):
    report = tmp_path / "r.json"
    assert main(["eval", "--data", str(corpus), "--report", str(report),
                 "--trajectories", str(tmp_path / "traj")]) == EXIT_OK
    data = json.loads(report.read_text())
    assert data["mean"]["mcd_db"] == 0.0 and data["mean"]["f0_rmse_hz"] == 0.0
    assert len(data["per_utterance"]) == 3
    assert len(list((tmp_path / "traj").glob("*.csv"))) == 3


def test_eval_with_checkpoint(tmp_path, checkpoint, corpus):
    report = tmp_path / "r.json"
    assert main(["eval", "--checkpoint", str(checkpoint), "--data", str(corpus),
                 "--report", str(report)]) == EXIT_OK
    data = json.loads(report.read_text())
    assert data["mean"]["mcd_db"] > 0
    # an untrained generator yields no voiced frames; F0 RMSE is undefined, not zero
    assert all(u["f0_rmse_hz"] is None or u["f0_rmse_hz"] >= 0 for u in data["per_utterance"])


def test_bench_report(tmp_path, checkpoint):
    report = tmp_path / "b.json"
    assert main(["bench", "--checkpoint", str(checkpoint), "--threads", "1", "--report", str(report),
                 "--clips", "1", "--seconds", "0.3"]) == EXIT_OK
    data = json.loads(report.read_text())
    assert data["repeats"] >= 5 and len(data["rtf_runs"]) == data["repeats"]
    assert {"rtf_median", "rtf_variance", "threads", "config_hash"} <= set(data)


def test_train_with_ablation(tmp_path, corpus):
    out = tmp_path / "run"
    assert main(["train", "--data", str(corpus), "--out", str(out), "--steps", "1",
                 "--batch-size", "1", "--ablation", "baseline"]) == EXIT_OK
    header = (out / "losses.csv").read_text().splitlines()[0].split(",")
    assert header == ["step", "V_0", "L_D", "L_G", "L_FM", "L_G_total"]


def test_train_from_config_file(tmp_path, corpus):
    from vocgan.trainer import TrainConfig
    cfg = TrainConfig.toy(batch_size=1, steps=1, seed=9)
    (tmp_path / "c.json").write_text(cfg.to_json())
    assert main(["train", "--config", str(tmp_path / "c.json"), "--data", str(corpus),
                 "--out", str(tmp_path / "run")]) == EXIT_OK
    assert json.loads((tmp_path / "run" / "config.json").read_text())["seed"] == 9


def test_train_nan_abort_exit_code(tmp_path, corpus, monkeypatch):
    from vocgan import trainer

    def explode(*a, **k):
        raise trainer.NumericalError("loss term L_D is nan at step 1")
    monkeypatch.setattr(trainer, "train_step", explode)
    assert main(["train", "--data", str(corpus), "--out", str(tmp_path / "r"), "--steps", "1",
                 "--batch-size", "1"]) == EXIT_NUMERIC


def test_usage_errors_exit_1(tmp_path, capsys):
    with pytest.raises(SystemExit) as exc:
        main(["bogus"])
    assert exc.value.code == EXIT_USAGE
    with pytest.raises(SystemExit) as exc:
        main(["synth", "--checkpoint", "x"])
    assert exc.value.code == EXIT_USAGE
    (tmp_path / "bad.json").write_text("{not json")
    assert main(["train", "--config", str(tmp_path / "bad.json"), "--data", ".",
                 "--out", str(tmp_path / "o")]) == EXIT_USAGE


def test_version_mismatch_reports_both(tmp_path, checkpoint, capsys):
    blob = bytearray(checkpoint.read_bytes())
    blob[4:8] = (9).to_bytes(4, "little")
    bad = tmp_path / "generator.vocg"
    bad.write_bytes(bytes(blob))
    (tmp_path / "generator.json").write_text(checkpoint.with_name("generator.json").read_text())
    mel = tmp_path / "m.vocm"
    dsp.save_mel(mel, np.zeros((80, 3)))
    assert main(["synth", "--checkpoint", str(bad), "--mel", str(mel), "--out", str(tmp_path / "o.wav")]) == EXIT_DATA
    err = capsys.readouterr().err
    assert "9" in err and "1" in err


def test_module_entry_point(corpus, tmp_path):
    proc = subprocess.run([sys.executable, "-m", "vocgan", "eval", "--data", str(corpus),
                           "--report", str(tmp_path / "r.json")], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
