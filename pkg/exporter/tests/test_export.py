"""Exporter: format conformance, ordering, determinism, failure modes."""

import json
import struct

import numpy as np
import pytest

from embexport.cli import main
from embexport.emb_format import OOS_SENTINEL, build_label_map
from embexport.exporter import CorpusError, ExportConfig, ExportError, export
from embexport.testing import make_tiny_encoder

WORDS = ["weather", "music", "alarm", "play", "rain", "wake", "the", "check"]


@pytest.fixture(scope="module")
def encoder_dir(tmp_path_factory):
    return make_tiny_encoder(
        tmp_path_factory.mktemp("enc") / "tiny", hidden_size=16, seed=1,
        vocab_words=WORDS,
    )


def write_corpus(path, rows):
    with open(path, "w", encoding="utf-8") as fh:
        for text, label in rows:
            fh.write(json.dumps({"text": text, "label": label}) + "\n")


def parse_emb(path):
    """Independent byte-level parse, straight from the format definition."""
    blob = path.read_bytes()
    assert blob[:4] == b"EMB1"
    version, dim, count = struct.unpack_from("<IIQ", blob, 4)
    assert version == 1
    records = []
    offset = 20
    for _ in range(count):
        (raw,) = struct.unpack_from("<I", blob, offset)
        vec = np.frombuffer(blob, dtype="<f4", count=dim, offset=offset + 4)
        records.append((raw, vec.copy()))
        offset += 4 + 4 * dim
    assert offset == len(blob)
    return dim, records


ROWS = [
    ("check the weather", "weather"),
    ("play music", "music"),
    ("wake me up", "alarm"),
    ("rain check", "weather"),
    ("play music", "music"),          # exact duplicate of line 2
    ("the alarm", "alarm"),
    ("music music music", "music"),
    ("weather weather", "weather"),
    ("something else entirely", "oos"),
    ("totally unrelated", "oos"),
]


class TestExport:
    def test_count_dim_and_order(self, encoder_dir, tmp_path):
        corpus = tmp_path / "c.jsonl"
        write_corpus(corpus, ROWS)
        out = export(ExportConfig(
            model=str(encoder_dir), input_path=str(corpus),
            output_path=str(tmp_path / "c.emb"),
        ))
        dim, records = parse_emb(out)
        assert dim == 16
        assert len(records) == len(ROWS)
        label_map = build_label_map([label for _, label in ROWS])
        assert label_map == {"alarm": 0, "music": 1, "weather": 2}
        for (raw, _), (_, label) in zip(records, ROWS):
            expected = OOS_SENTINEL if label == "oos" else label_map[label]
            assert raw == expected

    def test_sidecar_contents(self, encoder_dir, tmp_path):
        corpus = tmp_path / "c.jsonl"
        write_corpus(corpus, ROWS)
        out = export(ExportConfig(
            model=str(encoder_dir), input_path=str(corpus),
            output_path=str(tmp_path / "c.emb"),
        ))
        sidecar = json.loads((tmp_path / "c.emb.labels.json").read_text())
        assert sidecar == {"0": "alarm", "1": "music", "2": "weather"}

    def test_identical_text_identical_records(self, encoder_dir, tmp_path):
        corpus = tmp_path / "c.jsonl"
        write_corpus(corpus, ROWS)
        out = export(ExportConfig(
            model=str(encoder_dir), input_path=str(corpus),
            output_path=str(tmp_path / "c.emb"), batch_size=3,
        ))
        _, records = parse_emb(out)
        # lines 2 and 5 carry the same text
        assert records[1][1].tobytes() == records[4][1].tobytes()

    def test_rerun_identical_sidecar_and_dim(self, encoder_dir, tmp_path):
        corpus = tmp_path / "c.jsonl"
        write_corpus(corpus, ROWS)
        outs = []
        for name in ("a.emb", "b.emb"):
            export(ExportConfig(
                model=str(encoder_dir), input_path=str(corpus),
                output_path=str(tmp_path / name),
            ))
            outs.append(tmp_path / name)
        assert (tmp_path / "a.emb.labels.json").read_bytes() == (
            tmp_path / "b.emb.labels.json"
        ).read_bytes()
        assert parse_emb(outs[0])[0] == parse_emb(outs[1])[0]

    def test_mean_pooling_differs_from_max(self, encoder_dir, tmp_path):
        corpus = tmp_path / "c.jsonl"
        write_corpus(corpus, ROWS[:3])
        paths = {}
        for pooling in ("max", "mean"):
            out = tmp_path / f"{pooling}.emb"
            export(ExportConfig(
                model=str(encoder_dir), input_path=str(corpus),
                output_path=str(out), pooling=pooling,
            ))
            paths[pooling] = parse_emb(out)[1]
        assert not np.array_equal(paths["max"][0][1], paths["mean"][0][1])


class TestFailureModes:
    def test_unresolvable_model(self, tmp_path):
        corpus = tmp_path / "c.jsonl"
        write_corpus(corpus, ROWS[:2])
        with pytest.raises(ExportError, match="resolve"):
            export(ExportConfig(
                model=str(tmp_path / "no-such-model"),
                input_path=str(corpus), output_path=str(tmp_path / "x.emb"),
            ))

    def test_no_partial_output_on_failure(self, tmp_path):
        corpus = tmp_path / "c.jsonl"
        write_corpus(corpus, ROWS[:2])
        out = tmp_path / "x.emb"
        with pytest.raises(ExportError):
            export(ExportConfig(
                model=str(tmp_path / "no-such-model"),
                input_path=str(corpus), output_path=str(out),
            ))
        assert not out.exists()
        assert not out.with_name("x.emb.tmp").exists()

    def test_malformed_corpus_names_line(self, encoder_dir, tmp_path):
        corpus = tmp_path / "bad.jsonl"
        corpus.write_text('{"text": "ok", "label": "a"}\n{"text": "no label"}\n')
        with pytest.raises(CorpusError, match="line 2"):
            export(ExportConfig(
                model=str(encoder_dir), input_path=str(corpus),
                output_path=str(tmp_path / "x.emb"),
            ))

    def test_empty_corpus(self, encoder_dir, tmp_path):
        corpus = tmp_path / "empty.jsonl"
        corpus.write_text("")
        with pytest.raises(CorpusError, match="empty"):
            export(ExportConfig(
                model=str(encoder_dir), input_path=str(corpus),
                output_path=str(tmp_path / "x.emb"),
            ))


class TestCli:
    def test_export_subcommand(self, encoder_dir, tmp_path, capsys):
        corpus = tmp_path / "c.jsonl"
        write_corpus(corpus, ROWS)
        out = tmp_path / "c.emb"
        rc = main([
            "export", "--model", str(encoder_dir), "--pooling", "max",
            "--in", str(corpus), "--out", str(out),
        ])
        assert rc == 0
        assert "wrote" in capsys.readouterr().out
        assert out.exists()

    def test_model_failure_exit_2(self, tmp_path, capsys):
        corpus = tmp_path / "c.jsonl"
        write_corpus(corpus, ROWS[:1])
        rc = main([
            "export", "--model", str(tmp_path / "missing"),
            "--in", str(corpus), "--out", str(tmp_path / "x.emb"),
        ])
        assert rc == 2
        assert "error" in capsys.readouterr().err

    def test_corpus_failure_exit_3(self, encoder_dir, tmp_path, capsys):
        rc = main([
            "export", "--model", str(encoder_dir),
            "--in", str(tmp_path / "missing.jsonl"),
            "--out", str(tmp_path / "x.emb"),
        ])
        assert rc == 3
