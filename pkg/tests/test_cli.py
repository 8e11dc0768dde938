import csv
import json

import numpy as np
import pytest

from fakeword.audio import Waveform, read_wav, write_wav
from fakeword.cli import main
from fakeword.metrics import frame_labels, WordSpan
from fakeword.protocol import read_manifest
from fakeword.tags import Label, decode, read_tagged_file, write_tagged_file

from test_protocol import write_corpus

SR = 16_000


def build_args(corpus, out, extra=()):
    return ["build", "--corpus", str(corpus), "--out", str(out),
            "--nfft", "512", "--hop", "128", "--iters", "8", *extra]


def test_version(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
    assert "fakeword" in capsys.readouterr().out


def test_unknown_flag_rejected():
    with pytest.raises(SystemExit) as exc:
        main(["score", "--no-such-flag"])
    assert exc.value.code == 2


def test_build_and_rebuild_byte_identical(tmp_path, capsys):
    corpus = write_corpus(tmp_path, [("u1", 5, 1, "en"), ("u2", 6, 2, "fr"),
                                     ("u3", 4, 3, "en")])
    out1, out2 = tmp_path / "o1", tmp_path / "o2"
    assert main(build_args(corpus, out1, ["--seed", "7"])) == 0
    assert "3 manifest entries (3 ok" in capsys.readouterr().out
    assert main(build_args(corpus, out2, ["--seed", "7"])) == 0
    assert (out1 / "manifest.jsonl").read_bytes() == (out2 / "manifest.jsonl").read_bytes()
    for wav in sorted((out1 / "audio" / "gl").iterdir()):
        assert wav.read_bytes() == (out2 / "audio" / "gl" / wav.name).read_bytes()


def test_build_missing_corpus_exits_2(tmp_path, capsys):
    code = main(build_args(tmp_path / "nope.jsonl", tmp_path / "out"))
    assert code == 2
    assert "error" in capsys.readouterr().err


def test_score_self_is_all_zero(tmp_path, capsys):
    refs = tmp_path / "refs.txt"
    write_tagged_file(refs, {"u1": "!!!!!!a~~~ b c", "u2": "d !!!!!!e~~~"})
    assert main(["score", "--ref", str(refs), "--hyp", str(refs), "--json"]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["wer"] == 0.0
    assert payload["far"] == 0.0
    assert payload["frr"] == 0.0


def test_score_detection_fixture(tmp_path, capsys):
    refs = tmp_path / "refs.txt"
    hyps = tmp_path / "hyps.txt"
    write_tagged_file(refs, {"a1": "selber verdienen und leben !!!!!!weiter.~~~"})
    write_tagged_file(hyps, {"a1": "selber verdienen und !!!!!!leben~~~ weiter."})
    assert main(["score", "--ref", str(refs), "--hyp", str(hyps), "--json"]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["far"] == 1.0
    assert payload["frr"] == 0.25
    assert payload["counts"]["fake_total"] == 1
    assert payload["counts"]["real_total"] == 4


def test_score_missing_hyp_utterance_flagged(tmp_path, capsys):
    refs = tmp_path / "refs.txt"
    hyps = tmp_path / "hyps.txt"
    write_tagged_file(refs, {"u1": "!!!!!!a~~~ b", "u2": "c d"})
    write_tagged_file(hyps, {"u1": "!!!!!!a~~~ b"})
    assert main(["score", "--ref", str(refs), "--hyp", str(hyps), "--json"]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["missing_hyp_utts"] == ["u2"]
    # u2's words are deletions: both real, so no detection errors, but WER counts them
    assert payload["counts"]["fake_missed"] == 0
    assert payload["wer"] == pytest.approx(2 / 4)


def test_score_end_to_end_with_manifest(tmp_path, capsys):
    corpus = write_corpus(tmp_path, [("u1", 5, 1, "en"), ("u2", 6, 2, "fr")])
    out = tmp_path / "out"
    assert main(build_args(corpus, out, ["--seed", "3"])) == 0
    capsys.readouterr()
    refs = out / "refs" / "gl.txt"
    report_dir = tmp_path / "report"
    assert main(["score", "--ref", str(refs), "--hyp", str(refs),
                 "--manifest", str(out / "manifest.jsonl"),
                 "--buckets", "--group-by", "language",
                 "--out", str(report_dir)]) == 0
    table = capsys.readouterr().out
    assert "0.00" in table and "en" in table and "fr" in table
    with open(report_dir / "report.csv", newline="") as fin:
        row = list(csv.DictReader(fin))[0]
    assert row["wer_pct"] == "0.0" and row["far_pct"] == "0.0"
    assert (report_dir / "groups.csv").exists()
    assert (report_dir / "buckets.csv").exists()
    # per-group fake totals must sum to the global one
    with open(report_dir / "groups.csv", newline="") as fin:
        groups = list(csv.DictReader(fin))
    assert sum(int(g["fake_total"]) for g in groups) == int(row["fake_total"])


def test_score_buckets_without_manifest_is_usage_error(tmp_path, capsys):
    refs = tmp_path / "refs.txt"
    write_tagged_file(refs, {"u1": "a"})
    assert main(["score", "--ref", str(refs), "--hyp", str(refs), "--buckets"]) == 2
    assert "manifest" in capsys.readouterr().err


def test_score_pool_mode(tmp_path, capsys):
    corpus = write_corpus(tmp_path, [("u1", 4, 1, "en")])
    out = tmp_path / "out"
    assert main(build_args(corpus, out, ["--seed", "5"])) == 0
    capsys.readouterr()
    manifest = read_manifest(out / "manifest.jsonl")[0]
    ref_text = read_tagged_file(out / "refs" / "gl.txt")["u1"]
    labels = decode(ref_text).labels()
    spans = [WordSpan(w.start_s, w.end_s, label, w.text)
             for w, label in zip(manifest.words, labels)]
    total = max(w.end_s for w in manifest.words)
    per_frame = frame_labels(spans, total, 0.016)
    frame_csv = tmp_path / "frames.csv"
    with open(frame_csv, "w", newline="") as fout:
        writer = csv.writer(fout)
        writer.writerow(["utt_id", "frame_index", "p_real", "p_fake"])
        for k, label in enumerate(per_frame):
            p_fake = 1.0 if label is Label.FAKE else 0.0
            writer.writerow(["u1", k, 1.0 - p_fake, p_fake])
    assert main(["score", "--ref", str(out / "refs" / "gl.txt"),
                 "--manifest", str(out / "manifest.jsonl"),
                 "--pool", "--frame-csv", str(frame_csv), "--json"]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["far"] == 0.0
    assert payload["frr"] == 0.0


def test_copysynth_cli(tmp_path, capsys):
    t = np.arange(SR // 2) / SR
    env = 0.5 + 0.4 * np.sin(2 * np.pi * 3 * t)
    wav_in = tmp_path / "in.wav"
    write_wav(wav_in, Waveform((0.5 * env * np.sin(2 * np.pi * 300 * t)).astype(np.float32), SR))
    wav_out = tmp_path / "out.wav"
    assert main(["copysynth", str(wav_in), str(wav_out),
                 "--nfft", "512", "--hop", "128", "--iters", "10"]) == 0
    out = read_wav(wav_out)
    assert len(out) == SR // 2
    assert np.all(np.isfinite(out.samples))


def test_splice_cli_identity(tmp_path):
    rng = np.random.default_rng(0)
    src = Waveform(rng.uniform(-0.5, 0.5, SR).astype(np.float32), SR)
    src_path = tmp_path / "src.wav"
    write_wav(src_path, src)
    seg = Waveform(src.samples[int(0.2 * SR):int(0.5 * SR)], SR)
    write_wav(tmp_path / "seg.wav", seg)
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps(
        {"ops": [{"start": 0.2, "end": 0.5, "audio": "seg.wav"}]}), encoding="utf-8")
    out_path = tmp_path / "out.wav"
    assert main(["splice", str(src_path), str(out_path), "--spec", str(spec)]) == 0
    out = read_wav(out_path)
    np.testing.assert_allclose(out.samples, src.samples, atol=1e-6)


def test_splice_cli_bad_spec_exits_2(tmp_path, capsys):
    src_path = tmp_path / "src.wav"
    write_wav(src_path, Waveform(np.zeros(SR, dtype=np.float32), SR))
    spec = tmp_path / "spec.json"
    spec.write_text("{not json", encoding="utf-8")
    assert main(["splice", str(src_path), str(tmp_path / "o.wav"),
                 "--spec", str(spec)]) == 2
    assert "error" in capsys.readouterr().err


def test_build_with_skips_still_exits_0(tmp_path, capsys):
    corpus = write_corpus(tmp_path, [("good", 4, 1, "en")])
    wav = tmp_path / "audio_src" / "tiny.wav"
    write_wav(wav, Waveform(np.zeros(SR, dtype=np.float32), SR))
    with open(corpus, "a", encoding="utf-8") as fout:
        fout.write(json.dumps({
            "utt_id": "tiny", "audio": "audio_src/tiny.wav", "language": "en",
            "words": [{"text": "blip", "start": 0.0, "end": 0.005}],
        }) + "\n")
    out = tmp_path / "out"
    assert main(build_args(corpus, out)) == 0
    stdout = capsys.readouterr().out
    assert "1 ok, 1 skipped" in stdout
    assert "skipped tiny/gl" in stdout


def test_build_fatal_io_exits_3(tmp_path, capsys):
    corpus = write_corpus(tmp_path, [("u1", 4, 1, "en")])
    blocker = tmp_path / "occupied"
    blocker.write_text("not a directory")
    assert main(build_args(corpus, blocker)) == 3
    assert "error" in capsys.readouterr().err


def test_score_pool_and_hyp_conflict(tmp_path, capsys):
    refs = tmp_path / "refs.txt"
    write_tagged_file(refs, {"u1": "a"})
    assert main(["score", "--ref", str(refs), "--hyp", str(refs),
                 "--pool", "--frame-csv", str(refs)]) == 2
    assert "mutually exclusive" in capsys.readouterr().err


def test_score_duplicate_manifest_needs_generator(tmp_path, capsys):
    corpus = write_corpus(tmp_path, [("u1", 5, 1, "en")])
    out = tmp_path / "out"
    ext = tmp_path / "ext"
    for index in range(5):
        (ext / "u1").mkdir(parents=True, exist_ok=True)
        write_wav(ext / "u1" / f"{index}.wav",
                  Waveform(np.zeros(int(0.3 * SR), dtype=np.float32), SR))
    assert main(build_args(corpus, out, ["--generators", f"gl,voc2={ext}"])) == 0
    refs = out / "refs" / "gl.txt"
    assert main(["score", "--ref", str(refs), "--hyp", str(refs),
                 "--manifest", str(out / "manifest.jsonl")]) == 2
    assert "--generator" in capsys.readouterr().err
    assert main(["score", "--ref", str(refs), "--hyp", str(refs),
                 "--manifest", str(out / "manifest.jsonl"),
                 "--generator", "gl"]) == 0
