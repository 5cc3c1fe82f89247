"""End-to-end CLI runs on a tiny dataset, error lines, and run manifests."""

import json
import re
import subprocess
import sys

import numpy as np
import pytest

from gmsdi.cli import EXIT_CODES, main, parse_gamma, parse_partition
from gmsdi.core import AudioTensor
from gmsdi.data_io import wav_read, wav_write
from gmsdi.errors import ConfigurationError, FormatError
from gmsdi.inference import INFINITE, MatchedCoupling, SigmaScaled
from gmsdi.runs import RUN_NAME, RunManifest, hash_outputs

ERROR_LINE = re.compile(r'^gmsdi: error category=(\w+) exit=(\d+) message=(".*")$')
FAST = ["--steps", "12"]


def run_cli(argv, capsys):
    code = main([str(a) for a in argv])
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def error_of(err: str):
    line = err.strip().splitlines()[-1]
    m = ERROR_LINE.match(line)
    assert m, line
    return m.group(1), int(m.group(2)), json.loads(m.group(3))


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    assert main(["synth-data", "--out", str(root / "train"), "--n-clips", "24", "--clip-length", "2048"]) == 0
    assert main(["synth-data", "--out", str(root / "test"), "--n-clips", "3", "--clip-length", "2048",
                 "--n-sources", "2", "--seed", "9"]) == 0
    assert main(["train", "--data", str(root / "train"), "--out", str(root / "model"), "--epochs", "4",
                 "--n-bands", "32"]) == 0
    return root


class TestCommands:
    def test_train_outputs(self, workspace):
        run = RunManifest.load(workspace / "model")
        assert run.command == "train" and run.checkpoint_sha256
        assert run.outputs == hash_outputs(workspace / "model")
        assert "model.npz" in run.outputs

    def test_generate(self, workspace, capsys, tmp_path):
        out = tmp_path / "gen"
        code, text, _ = run_cli(["generate", "--model", workspace / "model" / "model.npz", "--sources", "bass",
                                 "drums", "--length", "1024", "--out", out, *FAST], capsys)
        assert code == 0
        assert {p.name for p in out.iterdir()} == {"source_0_bass.wav", "source_1_drums.wav", "mixture.wav",
                                                    "mixture_trajectory.wav", RUN_NAME}
        parts = [wav_read(out / n) for n in ("source_0_bass.wav", "source_1_drums.wav")]
        np.testing.assert_allclose(wav_read(out / "mixture.wav").samples, parts[0].samples + parts[1].samples,
                                   atol=1e-6)
        assert "residual" in text

    def test_accompany_copies_given_bytes(self, workspace, capsys, tmp_path):
        given = workspace / "test" / "clip_00000.wav"
        out = tmp_path / "acc"
        code, _, _ = run_cli(["accompany", "--model", workspace / "model" / "model.npz", "--given",
                              f"{given}:bass", "--wanted", "piano", "--out", out, *FAST], capsys)
        assert code == 0
        (copied,) = out.glob("given_0_*.wav")
        assert copied.read_bytes() == given.read_bytes()
        assert (out / "wanted_0_piano.wav").exists() and (out / "mixture.wav").exists()

    def test_separate_then_eval(self, workspace, capsys, tmp_path):
        sep = tmp_path / "sep"
        code, _, _ = run_cli(["separate", "--model", workspace / "model" / "model.npz", "--data",
                              workspace / "test", "--out", sep, "--w", "0", *FAST], capsys)
        assert code == 0
        manifest = [json.loads(l) for l in (workspace / "test" / "manifest.jsonl").read_text().splitlines()[1:]]
        for clip in manifest:
            for label in clip["labels"]:
                assert (sep / clip["id"] / f"{label}.wav").exists()
        ev = tmp_path / "ev"
        code, text, _ = run_cli(["eval", "--estimates", sep, "--data", workspace / "test", "--out", ev], capsys)
        assert code == 0
        doc = json.loads((ev / "eval.json").read_text())
        assert doc["format"] == "gmsdi-eval"
        assert doc["estimates"]["run_manifest"] == str(sep / RUN_NAME)
        assert (ev / "eval.png").read_bytes()[:4] == b"\x89PNG"
        assert (ev / "eval.txt").read_text() == text

    def test_single_mixture_separation_and_constrained_choice(self, workspace, capsys, tmp_path):
        clip = json.loads((workspace / "test" / "manifest.jsonl").read_text().splitlines()[1])
        y = workspace / "test" / clip["mixture"]
        code, text, _ = run_cli(["separate", "--model", workspace / "model" / "model.npz", "--mixture", y,
                                 "--labels", *clip["labels"], "--constrained", clip["labels"][0],
                                 "--out", tmp_path, *FAST], capsys)
        assert code == 0 and f"constrained={clip['labels'][0]}" in text
        est = [wav_read(tmp_path / f"{l}.wav") for l in clip["labels"]]
        np.testing.assert_allclose(est[0].samples + est[1].samples, wav_read(y).samples, atol=1e-6)

    def test_extract(self, workspace, capsys, tmp_path):
        clip = json.loads((workspace / "test" / "manifest.jsonl").read_text().splitlines()[1])
        code, _, _ = run_cli(["extract", "--model", workspace / "model" / "model.npz", "--mixture",
                              workspace / "test" / clip["mixture"], "--labels", *clip["labels"],
                              "--target", clip["labels"][0], "--out", tmp_path, *FAST], capsys)
        assert code == 0
        assert (tmp_path / f"{clip['labels'][0]}.wav").exists()

    def test_gridsearch_outputs(self, workspace, capsys, tmp_path):
        code, text, _ = run_cli(["gridsearch", "--model", workspace / "model" / "model.npz", "--data",
                                 workspace / "test", "--w-grid", "0", "3", "--limit", "2", "--out", tmp_path,
                                 *FAST], capsys)
        assert code == 0
        doc = json.loads((tmp_path / "grid.json").read_text())
        assert doc["w_grid"] == [0.0, 3.0]
        assert len(doc["cells"]) == 2 * len(doc["variants"])
        assert (tmp_path / "grid.txt").read_text() == text
        assert (tmp_path / "grid.png").read_bytes()[:4] == b"\x89PNG"


class TestReplay:
    @pytest.mark.parametrize("command", ["separate", "generate"])
    def test_bit_identical(self, workspace, capsys, tmp_path, command):
        model = workspace / "model" / "model.npz"
        if command == "separate":
            argv = ["separate", "--model", model, "--data", workspace / "test", "--limit", "2"]
        else:
            argv = ["generate", "--model", model, "--sources", "piano", "guitar", "--length", "512",
                    "--candidates", "2", "--seed", "3"]
        first = tmp_path / "first"
        assert run_cli([*argv, "--out", first, *FAST], capsys)[0] == 0
        code, text, _ = run_cli(["replay", first, "--out", tmp_path / "again"], capsys)
        assert code == 0 and "bit-identically" in text
        assert hash_outputs(first) == hash_outputs(tmp_path / "again")

    def test_tampered_outputs_are_detected(self, workspace, capsys, tmp_path):
        first = tmp_path / "first"
        assert run_cli(["synth-data", "--out", first, "--n-clips", "1", "--clip-length", "256"], capsys)[0] == 0
        run = json.loads((first / RUN_NAME).read_text())
        run["outputs"]["clip_00000.wav"] = "0" * 64
        (first / RUN_NAME).write_text(json.dumps(run))
        code, _, err = run_cli(["replay", first, "--out", tmp_path / "again"], capsys)
        assert code == EXIT_CODES["replay"]
        assert error_of(err)[0] == "replay"


class TestErrors:
    def test_unknown_label(self, workspace, capsys, tmp_path):
        code, _, err = run_cli(["generate", "--model", workspace / "model" / "model.npz", "--sources", "kazoo",
                                "--out", tmp_path, *FAST], capsys)
        category, exit_code, message = error_of(err)
        assert code == exit_code == EXIT_CODES["vocabulary"] and category == "vocabulary"
        assert "kazoo" in message and "bass" in message

    def test_missing_model(self, capsys, tmp_path):
        code, _, err = run_cli(["separate", "--model", tmp_path / "none.npz", "--mixture", tmp_path / "y.wav",
                                "--labels", "bass", "drums", "--out", tmp_path], capsys)
        assert code == EXIT_CODES["io"] and error_of(err)[0] == "io"

    def test_usage(self, capsys):
        code, _, err = run_cli(["separate", "--bogus"], capsys)
        assert code == EXIT_CODES["usage"] == 2 and error_of(err)[0] == "usage"
        code, _, err = run_cli([], capsys)
        assert code == 2

    def test_bad_wav(self, workspace, capsys, tmp_path):
        bad = tmp_path / "bad.wav"
        bad.write_bytes(b"RIFF\x00\x00\x00\x00WAVEjunk")
        code, _, err = run_cli(["separate", "--model", workspace / "model" / "model.npz", "--mixture", bad,
                                "--labels", "bass", "drums", "--out", tmp_path / "o"], capsys)
        category, _, message = error_of(err)
        assert code == EXIT_CODES["format"] and category == "format" and "field=" in message

    def test_bad_schedule(self, workspace, capsys, tmp_path):
        code, _, err = run_cli(["separate", "--model", workspace / "model" / "model.npz", "--data",
                                workspace / "test", "--steps", "1", "--out", tmp_path], capsys)
        assert code == EXIT_CODES["schedule"] and error_of(err)[0] == "schedule"

    def test_error_line_from_a_real_process(self, tmp_path):
        proc = subprocess.run([sys.executable, "-m", "gmsdi.cli", "train", "--data", str(tmp_path / "nothing"),
                               "--out", str(tmp_path)], capture_output=True, text=True)
        assert proc.returncode == EXIT_CODES["io"]
        assert ERROR_LINE.match(proc.stderr.strip())


class TestConfig:
    def test_config_overrides_flags(self, capsys, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"n_clips": 2, "clip-length": 128}))
        code, _, _ = run_cli(["synth-data", "--n-clips", "7", "--config", cfg, "--out", tmp_path / "d"], capsys)
        assert code == 0
        run = RunManifest.load(tmp_path / "d")
        assert run.config["n_clips"] == 2 and run.config["clip_length"] == 128
        assert len((tmp_path / "d" / "manifest.jsonl").read_text().splitlines()) == 3

    def test_unknown_key(self, capsys, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"epochs": 3}))
        code, _, err = run_cli(["synth-data", "--config", cfg, "--out", tmp_path / "d"], capsys)
        assert code == EXIT_CODES["config"] and error_of(err)[0] == "config"

    def test_malformed_config(self, capsys, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text("[1, 2")
        code, _, err = run_cli(["synth-data", "--config", cfg, "--out", tmp_path / "d"], capsys)
        assert code == EXIT_CODES["format"]

    def test_output_root(self, capsys, tmp_path, monkeypatch):
        monkeypatch.setenv("GMSDI_OUTPUT_ROOT", str(tmp_path))
        assert run_cli(["synth-data", "--out", "rel", "--n-clips", "1", "--clip-length", "64"], capsys)[0] == 0
        assert (tmp_path / "rel" / "manifest.jsonl").exists()


class TestParsers:
    def test_gamma(self):
        assert parse_gamma("infinite") == INFINITE and parse_gamma("inf") == INFINITE
        assert parse_gamma("matched") == MatchedCoupling()
        assert parse_gamma("sigma") == SigmaScaled(1.0) and parse_gamma("sigma:4") == SigmaScaled(4.0)
        assert parse_gamma("0.25") == 0.25
        for bad in ("-1", "0", "sigma:x", "loud"):
            with pytest.raises(ConfigurationError):
                parse_gamma(bad)

    def test_partition(self):
        assert parse_partition("0+1,2", 3).subsets == ((0, 1), (2,))
        assert parse_partition(None, 2).subsets == ((0,), (1,))
        for bad in ("0+1", "0,0+1,2", "a,b"):
            with pytest.raises(ConfigurationError):
                parse_partition(bad, 3)


class TestRunManifest:
    def test_roundtrip(self, tmp_path):
        run = RunManifest("separate", {"w": 3.0}, {"sampler": 1}, {"rho": 7.0}, "ab" * 32)
        run.write(tmp_path)
        again = RunManifest.load(tmp_path / RUN_NAME)
        assert again == run

    @pytest.mark.parametrize("body,field", [("{", "json"), ('{"format": "x", "version": 1}', "format"),
                                            ('{"format": "gmsdi-run", "version": 2}', "version"),
                                            ('{"format": "gmsdi-run", "version": 1, "command": "x", "config": {}, '
                                             '"extra": 1}', "fields")])
    def test_rejects_bad_documents(self, tmp_path, body, field):
        (tmp_path / RUN_NAME).write_text(body)
        with pytest.raises(FormatError) as info:
            RunManifest.load(tmp_path)
        assert info.value.field == field
