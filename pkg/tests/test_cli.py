"""End-to-end tests for the command-line interface.

Every invocation goes through ``readgaze.cli.main`` in-process, so exit
codes, stdout, and stderr are asserted exactly as a shell would see
them.
"""

import json
from pathlib import Path

import numpy as np
import pytest

from readgaze.cli import EXIT_DATA, EXIT_OK, EXIT_USAGE, build_parser, main

DATA = Path(__file__).parent / "data"


@pytest.fixture(scope="module")
def corpus_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("cli") / "corpus"
    assert main(["synth", "--participants", "3", "--seed", "7", "--out", str(out)]) == EXIT_OK
    return out


@pytest.fixture(scope="module")
def session_dir(corpus_dir):
    return next(p for p in sorted(corpus_dir.iterdir()) if p.is_dir())


class TestHelp:
    def test_help_matches_golden_file(self):
        parser = build_parser()
        sections = [parser.format_help()]
        sub = next(a for a in parser._actions if hasattr(a, "choices") and a.choices)
        sections += [sp.format_help() for sp in sub.choices.values()]
        rendered = ("\n" + "=" * 79 + "\n").join(sections)
        golden = (DATA / "cli_help.txt").read_text(encoding="utf-8")
        assert rendered == golden

    def test_every_flag_appears_in_help(self):
        golden = (DATA / "cli_help.txt").read_text(encoding="utf-8")
        for flag in (
            "--seed", "--threads", "--json", "--gaze", "--viewport", "--layout",
            "--dispersion", "--min-dur", "--window", "--stride", "--participants",
            "--model", "--corpus", "--models", "--assert", "--test", "--by",
            "--feature", "--from", "--to", "--width", "--height", "--boxes",
            "--port", "--host", "--data", "--out", "--val", "--condition",
        ):
            assert flag in golden, flag

    def test_root_help_exits_zero(self, capsys):
        assert main(["--help"]) == EXIT_OK
        assert "COMMAND" in capsys.readouterr().out


class TestExitCodes:
    def test_unknown_command_is_usage_error(self, capsys):
        assert main(["bogus"]) == EXIT_USAGE
        assert "invalid choice" in capsys.readouterr().err

    def test_missing_required_flag_is_usage_error(self, capsys):
        assert main(["synth"]) == EXIT_USAGE
        capsys.readouterr()

    def test_train_without_corpus_is_usage_error(self, capsys):
        assert main(["train", "--model", "cnn2d"]) == EXIT_USAGE
        assert "--corpus" in capsys.readouterr().err

    def test_missing_corpus_is_data_error(self, capsys):
        assert main(["eval", "--corpus", "/no/such/dir"]) == EXIT_DATA
        assert "manifest" in capsys.readouterr().err

    def test_json_flag_formats_error_as_json(self, capsys):
        assert main(["eval", "--corpus", "/no/such/dir", "--json"]) == EXIT_DATA
        payload = json.loads(capsys.readouterr().err)
        assert payload["error"] == "FileNotFoundError"
        assert "manifest" in payload["detail"]

    def test_json_flag_formats_usage_error_as_json(self, capsys):
        assert main(["stats", "--corpus", "x", "--test", "nope", "--json"]) == EXIT_USAGE
        payload = json.loads(capsys.readouterr().err)
        assert payload["error"] == "usage"


class TestSynth:
    def test_same_seed_produces_identical_directories(self, corpus_dir, tmp_path, capsys):
        again = tmp_path / "again"
        assert main(["synth", "--participants", "3", "--seed", "7", "--out", str(again)]) == EXIT_OK
        capsys.readouterr()
        files = sorted(p.relative_to(corpus_dir) for p in corpus_dir.rglob("*") if p.is_file())
        assert files == sorted(p.relative_to(again) for p in again.rglob("*") if p.is_file())
        for rel in files:
            assert (corpus_dir / rel).read_bytes() == (again / rel).read_bytes(), rel

    def test_different_seed_differs(self, corpus_dir, tmp_path, capsys):
        other = tmp_path / "other"
        assert main(["synth", "--participants", "3", "--seed", "8", "--out", str(other)]) == EXIT_OK
        capsys.readouterr()
        assert (corpus_dir / "p00-s00/gaze.jsonl").read_bytes() != (
            other / "p00-s00/gaze.jsonl"
        ).read_bytes()

    def test_manifest_lists_sessions(self, corpus_dir):
        manifest = json.loads((corpus_dir / "manifest.json").read_text())
        assert len(manifest["sessions"]) == 3


class TestFixations:
    def test_writes_event_files(self, session_dir, tmp_path, capsys):
        out = tmp_path / "events"
        assert main(["fixations", str(session_dir), "--out-dir", str(out)]) == EXIT_OK
        summary = capsys.readouterr().out
        assert "fixations" in summary and "saccades" in summary
        fx = [json.loads(line) for line in (out / "fixations.jsonl").read_text().splitlines()]
        sc = [json.loads(line) for line in (out / "saccades.jsonl").read_text().splitlines()]
        assert len(fx) > 50 and len(sc) == len(fx) - 1
        assert {"start_ms", "end_ms", "centroid", "sample_count"} <= set(fx[0])

    def test_detector_knobs_change_output(self, session_dir, tmp_path, capsys):
        loose, strict = tmp_path / "loose", tmp_path / "strict"
        main(["fixations", str(session_dir), "--out-dir", str(loose)])
        main(["fixations", str(session_dir), "--out-dir", str(strict), "--min-dur", "300"])
        capsys.readouterr()
        n_loose = len((loose / "fixations.jsonl").read_text().splitlines())
        n_strict = len((strict / "fixations.jsonl").read_text().splitlines())
        assert n_strict < n_loose


class TestFeatures:
    def test_tsv_shape_and_labels(self, session_dir, tmp_path, capsys):
        out = tmp_path / "features.tsv"
        code = main([
            "features", str(session_dir),
            "--window", "15", "--stride", "5", "--out", str(out),
        ])
        assert code == EXIT_OK
        capsys.readouterr()
        lines = out.read_text().splitlines()
        header = lines[0].split("\t")
        assert header[:3] == ["t0_ms", "t1_ms", "label"]
        assert "wpm" in header and "fbsr" in header
        rows = [line.split("\t") for line in lines[1:]]
        assert len(rows) > 10
        assert all(len(r) == len(header) for r in rows)
        labels = {r[2] for r in rows}
        assert "sequential" in labels  # fully contained windows carry labels

    def test_stdout_when_no_out_flag(self, session_dir, capsys):
        assert main(["features", str(session_dir), "--window", "10", "--stride", "10"]) == EXIT_OK
        assert capsys.readouterr().out.startswith("t0_ms\t")


class TestTrainRules:
    def test_writes_threshold_json(self, tmp_path, capsys):
        out = tmp_path / "rules.json"
        assert main(["train", "--model", "rules", "--out", str(out)]) == EXIT_OK
        capsys.readouterr()
        rules = json.loads(out.read_text())
        assert rules["wpm_read_max"] > rules["wpm_deep_max"] > rules["wpm_static_max"]


class TestTrainSoftmax:
    def test_saves_loadable_model(self, corpus_dir, tmp_path, capsys):
        from readgaze.baseline import SoftmaxModel

        out = tmp_path / "softmax.json"
        code = main(["train", "--model", "softmax", "--corpus", str(corpus_dir), "--out", str(out)])
        assert code == EXIT_OK
        assert "windows" in capsys.readouterr().out
        model = SoftmaxModel.load(out)
        probs = model.predict_proba(np.zeros((2, model.weights.shape[1])))
        np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-9)


class TestEval:
    def test_baseline_rows_and_json_report(self, corpus_dir, tmp_path, capsys):
        out = tmp_path / "report.json"
        code = main([
            "eval", "--corpus", str(corpus_dir),
            "--models", "random", "majority", "--out", str(out),
        ])
        assert code == EXIT_OK
        table = capsys.readouterr().out
        assert "macro F1" in table and "majority" in table
        report = json.loads(out.read_text())
        assert set(report["rows"]) == {"random", "majority"}

    def test_assert_requires_comparison_rows(self, corpus_dir, capsys):
        code = main([
            "eval", "--corpus", str(corpus_dir),
            "--models", "random", "majority", "--assert",
        ])
        assert code == EXIT_DATA
        capsys.readouterr()


class TestStats:
    def test_pair_table_with_bonferroni(self, corpus_dir, tmp_path, capsys):
        out = tmp_path / "mwu.tsv"
        code = main([
            "stats", "--corpus", str(corpus_dir), "--test", "mwu",
            "--feature", "wpm", "--by", "sequential:skimming", "--out", str(out),
        ])
        assert code == EXIT_OK
        capsys.readouterr()
        lines = out.read_text().splitlines()
        assert lines[0].split("\t") == ["pair", "n1", "n2", "statistic", "p_value", "p_adjusted"]
        cells = lines[1].split("\t")
        assert cells[0] == "sequential vs skimming"
        assert 0.0 <= float(cells[4]) <= float(cells[5]) <= 1.0

    def test_bad_pair_spec_is_data_error(self, corpus_dir, capsys):
        code = main([
            "stats", "--corpus", str(corpus_dir), "--test", "mwu",
            "--by", "sequential-skimming",
        ])
        assert code == EXIT_DATA
        assert "LABEL:LABEL" in capsys.readouterr().err

    def test_unknown_label_is_data_error(self, corpus_dir, capsys):
        code = main([
            "stats", "--corpus", str(corpus_dir), "--test", "mwu",
            "--by", "sequential:sprinting",
        ])
        assert code == EXIT_DATA
        assert "unknown label" in capsys.readouterr().err


class TestIrr:
    def test_reports_kappa_over_dual_labeled_segments(self, session_dir, capsys):
        assert main(["irr", str(session_dir)]) == EXIT_OK
        out = capsys.readouterr().out
        assert out.startswith("kappa ")
        assert "dual-labeled segments" in out


class TestRender:
    def test_writes_deterministic_png(self, session_dir, tmp_path, capsys):
        a, b = tmp_path / "a.png", tmp_path / "b.png"
        argv = ["render", str(session_dir), "--from", "0", "--to", "30000",
                "--width", "120", "--height", "160"]
        assert main(argv + ["--out", str(a)]) == EXIT_OK
        assert main(argv + ["--out", str(b)]) == EXIT_OK
        capsys.readouterr()
        assert a.read_bytes() == b.read_bytes()
        assert a.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"

    def test_word_boxes_change_pixels(self, session_dir, tmp_path, capsys):
        plain, boxed = tmp_path / "plain.png", tmp_path / "boxed.png"
        argv = ["render", str(session_dir), "--width", "120", "--height", "160"]
        main(argv + ["--out", str(plain)])
        main(argv + ["--boxes", "--out", str(boxed)])
        capsys.readouterr()
        assert plain.read_bytes() != boxed.read_bytes()


class TestIngest:
    def test_roundtrip_into_data_directory(self, session_dir, tmp_path, capsys):
        data = tmp_path / "data"
        code = main([
            "ingest",
            "--gaze", str(session_dir / "gaze.jsonl"),
            "--viewport", str(session_dir / "viewport.jsonl"),
            "--layout", str(session_dir / "layout.json"),
            "--out", str(data), "--participant", "p77",
        ])
        assert code == EXIT_OK
        record = json.loads(capsys.readouterr().out)
        assert record["participant_id"] == "p77"
        assert record["status"] == "ready"
        sid = record["session_id"]
        assert (data / sid / "gaze.jsonl").exists()
        assert (data / sid / "fixations.json").exists()

    def test_malformed_gaze_is_data_error(self, session_dir, tmp_path, capsys):
        bad = tmp_path / "bad.jsonl"
        bad.write_text("not json at all\n")
        code = main([
            "ingest", "--gaze", str(bad),
            "--viewport", str(session_dir / "viewport.jsonl"),
            "--layout", str(session_dir / "layout.json"),
            "--out", str(tmp_path / "data2"),
        ])
        assert code == EXIT_DATA
        capsys.readouterr()
