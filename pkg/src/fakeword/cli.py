"""Command-line interface: build datasets, score detection output, run
copy-synthesis, splice audio.

Exit codes: 0 success, 2 usage or input error, 3 fatal I/O error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict
from pathlib import Path

from . import __version__
from .align import NormalizationPolicy, align_words, normalize_transcript
from .audio import read_wav, write_wav
from .metrics import (
    DEFAULT_BUCKET_EDGES,
    DEFAULT_FRAME_HOP_S,
    DetectionCounts,
    WordSpan,
    bucket_by_duration,
    build_report,
    counts_from_results,
    decisions_from_frames,
    format_report,
    group_counts,
    read_frame_scores,
    word_outcomes,
    write_bucket_csv,
    write_group_csv,
    write_report_csv,
)
from .protocol import (
    BUILTIN_GENERATOR,
    BuildConfig,
    STATUS_OK,
    build_dataset,
    read_corpus,
    read_manifest,
)
from .splice import SpliceOp, overlap_add_replace
from .tags import Label, LabeledWord, MarkerConfig, TaggedTranscript, decode, read_tagged_file
from .vocoder import StftConfig, copy_synth


class _CliError(Exception):
    def __init__(self, message: str, code: int = 2):
        super().__init__(message)
        self.code = code


def _parse_generators(spec: str) -> tuple[tuple[str, ...], dict[str, str]]:
    """"gl,voc=/data/voc" -> (("gl", "voc"), {"voc": "/data/voc"})."""
    names = []
    dirs = {}
    for part in spec.split(","):
        part = part.strip()
        if not part:
            continue
        name, sep, directory = part.partition("=")
        if sep:
            dirs[name] = directory
        elif name != BUILTIN_GENERATOR:
            raise _CliError(f"external generator {name!r} needs a directory: {name}=/path")
        names.append(name)
    if not names:
        raise _CliError("no generators given")
    return tuple(names), dirs


def _parse_edges(spec: str) -> tuple[float, ...]:
    if spec == "default":
        return DEFAULT_BUCKET_EDGES
    try:
        return tuple(float(v) for v in spec.split(","))
    except ValueError as exc:
        raise _CliError(f"bad bucket edges {spec!r}: {exc}") from exc


def _cmd_build(args: argparse.Namespace) -> int:
    generators, external_dirs = _parse_generators(args.generators)
    cfg = BuildConfig(
        master_seed=args.seed,
        generators=generators,
        external_dirs=external_dirs,
        words_min=args.words_min,
        words_max=args.words_max,
        fade_s=args.fade_ms / 1000.0,
        stft=StftConfig(n_fft=args.nfft, hop=args.hop),
        gl_iters=args.iters,
        sample_rate_hz=args.sample_rate,
    )
    corpus = read_corpus(args.corpus)
    entries = build_dataset(corpus, cfg, args.out, jobs=args.jobs)
    n_ok = sum(1 for e in entries if e.status == STATUS_OK)
    print(f"wrote {len(entries)} manifest entries ({n_ok} ok, "
          f"{len(entries) - n_ok} skipped) to {args.out}")
    for entry in entries:
        if entry.status != STATUS_OK:
            print(f"  skipped {entry.utt_id}/{entry.generator_id}: {entry.skip_reason}")
    return 0


def _spans_from_entry(entry, ref_t) -> list[WordSpan]:
    if len(entry.words) != len(ref_t.words):
        raise _CliError(
            f"{entry.utt_id}: manifest lists {len(entry.words)} words, "
            f"reference has {len(ref_t.words)}")
    return [
        WordSpan(w.start_s, w.end_s, ref_t.words[i].label, w.text, entry.language)
        for i, w in enumerate(entry.words)
    ]


def _cmd_score(args: argparse.Namespace) -> int:
    if args.pool and not args.frame_csv:
        raise _CliError("--pool requires --frame-csv")
    if args.pool and args.hyp:
        raise _CliError("--pool and --hyp are mutually exclusive")
    if not args.pool and not args.hyp:
        raise _CliError("need --hyp (or --pool with --frame-csv)")
    if (args.pool or args.buckets or args.group_by) and not args.manifest:
        raise _CliError("--pool/--buckets/--group-by need --manifest for spans")

    refs = read_tagged_file(args.ref)
    strict = MarkerConfig()
    lenient = MarkerConfig(lenient=True)
    policy = NormalizationPolicy(lowercase=args.lowercase, strip_punctuation=args.strip_punct)

    manifest_by_utt = {}
    if args.manifest:
        entries = read_manifest(args.manifest)
        if args.generator:
            entries = [e for e in entries if e.generator_id == args.generator]
        for entry in entries:
            if entry.utt_id in manifest_by_utt:
                raise _CliError(
                    f"utt_id {entry.utt_id!r} appears for several generators in the "
                    "manifest; pass --generator to pick one")
            manifest_by_utt[entry.utt_id] = entry

    hyps = read_tagged_file(args.hyp) if args.hyp else {}
    frame_tracks = read_frame_scores(args.frame_csv) if args.pool else {}
    hop_s = args.hop_ms / 1000.0

    totals = DetectionCounts()
    total_errors = 0
    total_ref_words = 0
    results = []
    missing_hyp = []
    unscored_words = 0

    for utt_id, ref_text in refs.items():
        ref_t = decode(ref_text, strict)
        entry = manifest_by_utt.get(utt_id)
        spans = _spans_from_entry(entry, ref_t) if entry is not None else None

        if args.pool:
            if spans is None:
                raise _CliError(f"{utt_id}: pooling needs a manifest entry with word spans")
            track = frame_tracks.get(utt_id)
            if track is None:
                missing_hyp.append(utt_id)
                hyp_t = TaggedTranscript()
            else:
                labels, unscored = decisions_from_frames(track, spans, hop_s)
                unscored_words += unscored
                hyp_t = TaggedTranscript(tuple(
                    LabeledWord(w.text, label) for w, label in zip(ref_t.words, labels)))
        else:
            hyp_text = hyps.get(utt_id)
            if hyp_text is None:
                missing_hyp.append(utt_id)
                hyp_t = TaggedTranscript()
            else:
                hyp_t = decode(hyp_text, lenient)

        ref_n, mapping = normalize_transcript(ref_t, policy)
        hyp_n, _ = normalize_transcript(hyp_t, policy)
        alignment = align_words(ref_n.texts(), hyp_n.texts())
        span_list = [spans[mapping[k]] for k in range(len(ref_n.words))] if spans else None
        outcomes, insertions = word_outcomes(ref_n, hyp_n, alignment, span_list)
        totals = totals + counts_from_results(outcomes, insertions)
        total_errors += alignment.errors
        total_ref_words += len(ref_n.words)
        results.extend(outcomes)

    extra_hyp = sorted(set(hyps) - set(refs)) if hyps else []
    wer_value = total_errors / total_ref_words if total_ref_words else None
    by_bucket = by_group = None
    edges = None
    if args.buckets:
        edges = _parse_edges(args.buckets)
        by_bucket = bucket_by_duration(results, edges)
    if args.group_by:
        if args.group_by != "language":
            raise _CliError(f"unsupported group key {args.group_by!r} (try: language)")
        by_group = group_counts(
            results, lambda r: r.span.language if r.span is not None else None)

    report = build_report(totals, wer_value, by_bucket, by_group)

    if args.out:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        write_report_csv(out_dir / "report.csv", report)
        if by_group is not None:
            write_group_csv(out_dir / "groups.csv", by_group)
        if by_bucket is not None:
            write_bucket_csv(out_dir / "buckets.csv", by_bucket, edges)

    if args.json:
        payload = {
            "wer": report.wer,
            "far": report.far,
            "frr": report.frr,
            "counts": asdict(report.counts),
            "by_group": {k: asdict(v) for k, v in (by_group or {}).items()} or None,
            "by_bucket": {str(k): asdict(v) for k, v in (by_bucket or {}).items()} or None,
            "missing_hyp_utts": missing_hyp,
            "extra_hyp_utts": extra_hyp,
            "unscored_words": unscored_words,
        }
        print(json.dumps(payload, indent=2))
    else:
        print(format_report(report, edges))
        if missing_hyp:
            print(f"note: {len(missing_hyp)} utterance(s) missing from the hypothesis, "
                  f"scored as fully deleted: {', '.join(missing_hyp)}")
        if extra_hyp:
            print(f"note: {len(extra_hyp)} hypothesis utterance(s) not in the reference, "
                  f"ignored: {', '.join(extra_hyp)}")
        if unscored_words:
            print(f"note: {unscored_words} word(s) too short to pool any frame, "
                  "defaulted to REAL")
    return 0


def _cmd_copysynth(args: argparse.Namespace) -> int:
    waveform = read_wav(args.input)
    cfg = StftConfig(n_fft=args.nfft, hop=args.hop)
    out = copy_synth(waveform, cfg, iters=args.iters, seed=args.seed,
                     use_mel=args.mel is not None, n_mels=args.mel or 80)
    write_wav(args.output, out, pcm16=args.pcm16)
    print(f"wrote {args.output} ({out.duration_s:.3f}s)")
    return 0


def _cmd_splice(args: argparse.Namespace) -> int:
    src = read_wav(args.input)
    spec_path = Path(args.spec)
    with open(spec_path, encoding="utf-8") as fin:
        spec = json.load(fin)
    raw_ops = spec["ops"] if isinstance(spec, dict) else spec
    ops = []
    for op in raw_ops:
        replacement = read_wav(spec_path.parent / op["audio"],
                               expected_rate=src.sample_rate_hz)
        ops.append(SpliceOp(WordSpan(op["start"], op["end"], Label.FAKE), replacement))
    result = overlap_add_replace(src, ops, args.fade_ms / 1000.0)
    write_wav(args.output, result.waveform, pcm16=args.pcm16)
    print(f"wrote {args.output} ({result.waveform.duration_s:.3f}s, "
          f"{result.clipped_samples} clipped samples)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fakeword",
        description="Build partially-faked speech datasets and score "
                    "word-level synthetic-speech detection output.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build", help="splice fake words into a corpus and write a manifest")
    p.add_argument("--corpus", required=True, help="JSON Lines corpus of utterance records")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    p.add_argument("--generators", default=BUILTIN_GENERATOR,
                   help="comma list; 'gl' is built-in, external ones as name=/dir "
                        "with <dir>/<utt_id>/<word_index>.wav files (default: gl)")
    p.add_argument("--fade-ms", type=float, default=10.0, help="crossfade length (default 10)")
    p.add_argument("--words-min", type=int, default=1)
    p.add_argument("--words-max", type=int, default=5)
    p.add_argument("--jobs", type=int, default=os.cpu_count(),
                   help="parallel utterances (default: cpu count); output is identical for any value")
    p.add_argument("--iters", type=int, default=60, help="Griffin-Lim iterations (default 60)")
    p.add_argument("--nfft", type=int, default=1024)
    p.add_argument("--hop", type=int, default=256)
    p.add_argument("--sample-rate", type=int, default=16_000)
    p.set_defaults(func=_cmd_build)

    p = sub.add_parser("score", help="score tagged hypothesis transcripts against references")
    p.add_argument("--ref", required=True, help="tagged reference file (utt_id<TAB>text)")
    p.add_argument("--hyp", help="tagged hypothesis file")
    p.add_argument("--manifest", help="manifest.jsonl supplying word spans and language")
    p.add_argument("--generator", help="restrict the manifest to one generator id")
    p.add_argument("--buckets", nargs="?", const="default",
                   help="duration-decomposed counts; 'default' or comma-separated "
                        "ascending edges in seconds")
    p.add_argument("--group-by", help="group-decomposed counts (supported: language)")
    p.add_argument("--lowercase", action=argparse.BooleanOptionalAction, default=True,
                   help="lowercase before alignment (default on)")
    p.add_argument("--strip-punct", action="store_true",
                   help="strip punctuation before alignment")
    p.add_argument("--pool", action="store_true",
                   help="derive word decisions by pooling frame scores instead of --hyp")
    p.add_argument("--frame-csv", help="frame scores: utt_id,frame_index,p_real,p_fake")
    p.add_argument("--hop-ms", type=float, default=DEFAULT_FRAME_HOP_S * 1000.0,
                   help="frame hop for pooling (default 16)")
    p.add_argument("--out", help="directory for report.csv / groups.csv / buckets.csv")
    p.add_argument("--json", action="store_true", help="print a JSON report instead of a table")
    p.set_defaults(func=_cmd_score)

    p = sub.add_parser("copysynth", help="copy-synthesize a WAV file (Griffin-Lim)")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--iters", type=int, default=60)
    p.add_argument("--nfft", type=int, default=1024)
    p.add_argument("--hop", type=int, default=256)
    p.add_argument("--seed", type=int, help="random phase init (default: zero phase)")
    p.add_argument("--mel", type=int, help="compress through an N-band mel spectrogram")
    p.add_argument("--pcm16", action="store_true", help="write 16-bit PCM instead of float32")
    p.set_defaults(func=_cmd_copysynth)

    p = sub.add_parser("splice", help="replace spans of a WAV with other WAV files")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--spec", required=True,
                   help='JSON {"ops": [{"start": s, "end": s, "audio": "file.wav"}]}; '
                        "audio paths resolve relative to the spec file")
    p.add_argument("--fade-ms", type=float, default=10.0)
    p.add_argument("--pcm16", action="store_true")
    p.set_defaults(func=_cmd_splice)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except _CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
