"""Dataset construction: per utterance and generator, pick words, produce
replacement segments (built-in copy-synthesis or pre-rendered files), splice
them in, and record everything in a manifest.

Per-utterance failures (unreadable audio, a word too short to vocode, a
missing replacement file, ...) mark the entry SKIPPED with a reason and
never abort the build. Seeds are derived per (utterance, generator) so the
output is byte-identical regardless of scheduling.
"""

from __future__ import annotations

import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .audio import Waveform, read_wav, write_wav
from .metrics import WordSpan
from .splice import DEFAULT_FADE_S, SpliceOp, overlap_add_replace
from .tags import Label, LabeledWord, MarkerConfig, TaggedTranscript, encode, write_tagged_file
from .vocoder import StftConfig, copy_synth

BUILTIN_GENERATOR = "gl"

STATUS_OK = "OK"
STATUS_SKIPPED = "SKIPPED"


class EmptyUtteranceError(ValueError):
    pass


@dataclass(frozen=True)
class UtteranceRecord:
    """One source utterance: audio plus word texts with timestamps."""

    utt_id: str
    audio_path: str
    language: str
    words: tuple[WordSpan, ...]

    def __post_init__(self) -> None:
        if not self.utt_id:
            raise ValueError("utt_id must be non-empty")
        object.__setattr__(self, "words", tuple(self.words))
        for prev, cur in zip(self.words, self.words[1:]):
            if cur.start_s < prev.end_s - 1e-9:
                raise ValueError(f"{self.utt_id}: word spans must be monotone, non-overlapping")


@dataclass(frozen=True)
class ManifestEntry:
    utt_id: str
    generator_id: str
    status: str
    seed: int
    selected_indices: tuple[int, ...] = ()
    tagged_ref: str = ""
    output_audio_path: str | None = None
    language: str | None = None
    words: tuple[WordSpan, ...] = ()
    skip_reason: str | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "selected_indices", tuple(self.selected_indices))
        object.__setattr__(self, "words", tuple(self.words))
        if self.status == STATUS_OK:
            if not self.selected_indices:
                raise ValueError("OK entry must select at least one word")
            if any(b <= a for a, b in zip(self.selected_indices, self.selected_indices[1:])):
                raise ValueError("selected indices must be strictly increasing")
        elif self.status != STATUS_SKIPPED:
            raise ValueError(f"unknown status {self.status!r}")

    def to_json(self) -> str:
        return json.dumps({
            "utt_id": self.utt_id,
            "generator_id": self.generator_id,
            "status": self.status,
            "seed": self.seed,
            "selected_indices": list(self.selected_indices),
            "tagged_ref": self.tagged_ref,
            "output_audio_path": self.output_audio_path,
            "language": self.language,
            "words": [{"text": w.text, "start": w.start_s, "end": w.end_s} for w in self.words],
            "skip_reason": self.skip_reason,
        }, ensure_ascii=False, sort_keys=True)

    @classmethod
    def from_json(cls, line: str) -> "ManifestEntry":
        obj = json.loads(line)
        return cls(
            utt_id=obj["utt_id"],
            generator_id=obj["generator_id"],
            status=obj["status"],
            seed=obj["seed"],
            selected_indices=tuple(obj.get("selected_indices", ())),
            tagged_ref=obj.get("tagged_ref", ""),
            output_audio_path=obj.get("output_audio_path"),
            language=obj.get("language"),
            words=tuple(WordSpan(w["start"], w["end"], Label.REAL, w["text"])
                        for w in obj.get("words", ())),
            skip_reason=obj.get("skip_reason"),
        )


@dataclass(frozen=True)
class BuildConfig:
    master_seed: int = 0
    generators: tuple[str, ...] = (BUILTIN_GENERATOR,)
    external_dirs: dict[str, str] = field(default_factory=dict)
    words_min: int = 1
    words_max: int = 5
    fade_s: float = DEFAULT_FADE_S
    stft: StftConfig = field(default_factory=StftConfig)
    gl_iters: int = 60
    sample_rate_hz: int = 16_000
    markers: MarkerConfig = field(default_factory=MarkerConfig)

    def __post_init__(self) -> None:
        if self.words_min < 1 or self.words_max < self.words_min:
            raise ValueError("need words_max >= words_min >= 1")
        if not self.generators:
            raise ValueError("need at least one generator")
        for gen in self.generators:
            if gen != BUILTIN_GENERATOR and gen not in self.external_dirs:
                raise ValueError(f"external generator {gen!r} has no replacement directory")


def select_words(
    rec: UtteranceRecord, rng_seed: int, words_min: int = 1, words_max: int = 5
) -> tuple[int, ...]:
    """Pick how many and which words to fake, uniformly and reproducibly.

    The count is uniform on [words_min, min(words_max, n_words)] (clamped
    down for very short utterances), the indices uniform without replacement.
    """
    n = len(rec.words)
    if n == 0:
        raise EmptyUtteranceError(f"{rec.utt_id}: no words to select from")
    rng = np.random.default_rng(rng_seed)
    hi = min(words_max, n)
    lo = min(words_min, hi)
    k = int(rng.integers(lo, hi, endpoint=True))
    picked = rng.choice(n, size=k, replace=False)
    return tuple(sorted(int(i) for i in picked))


def derive_seed(master_seed: int, utt_id: str, generator_id: str) -> int:
    """Stable per-(utterance, generator) seed, independent of processing order."""
    payload = f"{master_seed}\x1f{utt_id}\x1f{generator_id}".encode("utf-8")
    return int.from_bytes(hashlib.sha256(payload).digest()[:8], "big")


def read_corpus(path: str | Path) -> list[UtteranceRecord]:
    """Read utterance records from JSON Lines; audio paths resolve relative
    to the corpus file."""
    base = Path(path).parent
    records: list[UtteranceRecord] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fin:
        for lineno, line in enumerate(fin, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                words = tuple(WordSpan(w["start"], w["end"], Label.REAL, w["text"])
                              for w in obj["words"])
                rec = UtteranceRecord(
                    utt_id=obj["utt_id"],
                    audio_path=str((base / obj["audio"]).resolve()),
                    language=obj.get("language", ""),
                    words=words,
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise ValueError(f"{path}:{lineno}: bad utterance record: {exc}") from exc
            if rec.utt_id in seen:
                raise ValueError(f"{path}:{lineno}: duplicate utt_id {rec.utt_id!r}")
            seen.add(rec.utt_id)
            records.append(rec)
    return records


def write_manifest(path: str | Path, entries: Iterable[ManifestEntry]) -> None:
    with open(path, "w", encoding="utf-8") as fout:
        for entry in entries:
            fout.write(entry.to_json() + "\n")


def read_manifest(path: str | Path) -> list[ManifestEntry]:
    with open(path, encoding="utf-8") as fin:
        return [ManifestEntry.from_json(line) for line in fin if line.strip()]


def _segment(src: Waveform, span: WordSpan) -> Waveform:
    start = src.second_to_sample(span.start_s)
    end = src.second_to_sample(span.end_s)
    if start < 0 or end > len(src) or end <= start:
        raise ValueError(f"word span [{span.start_s}, {span.end_s}]s outside audio")
    return Waveform(src.samples[start:end], src.sample_rate_hz)


def _build_one(rec: UtteranceRecord, generator_id: str, cfg: BuildConfig,
               out_dir: Path) -> ManifestEntry:
    seed = derive_seed(cfg.master_seed, rec.utt_id, generator_id)
    try:
        src = read_wav(rec.audio_path, expected_rate=cfg.sample_rate_hz)
        selected = select_words(rec, seed, cfg.words_min, cfg.words_max)
        ops = []
        for index in selected:
            span = rec.words[index]
            if generator_id == BUILTIN_GENERATOR:
                replacement = copy_synth(_segment(src, span), cfg.stft,
                                         iters=cfg.gl_iters)
            else:
                wav_path = Path(cfg.external_dirs[generator_id]) / rec.utt_id / f"{index}.wav"
                replacement = read_wav(wav_path, expected_rate=cfg.sample_rate_hz)
            ops.append(SpliceOp(span, replacement))
        spliced = overlap_add_replace(src, ops, cfg.fade_s)

        rel_path = f"audio/{generator_id}/{rec.utt_id}.wav"
        write_wav(out_dir / rel_path, spliced.waveform)
        tagged = TaggedTranscript(tuple(
            LabeledWord(w.text, Label.FAKE if i in selected else Label.REAL)
            for i, w in enumerate(rec.words)))
        return ManifestEntry(
            utt_id=rec.utt_id,
            generator_id=generator_id,
            status=STATUS_OK,
            seed=seed,
            selected_indices=selected,
            tagged_ref=encode(tagged, cfg.markers),
            output_audio_path=rel_path,
            language=rec.language,
            words=rec.words,
        )
    except Exception as exc:  # per-entry isolation: a failed utterance is skipped
        return ManifestEntry(
            utt_id=rec.utt_id,
            generator_id=generator_id,
            status=STATUS_SKIPPED,
            seed=seed,
            language=rec.language,
            words=rec.words,
            skip_reason=f"{type(exc).__name__}: {exc}",
        )


def build_dataset(
    corpus: Sequence[UtteranceRecord],
    cfg: BuildConfig,
    out_dir: str | Path,
    jobs: int | None = None,
) -> list[ManifestEntry]:
    """Build the spliced dataset under ``out_dir``.

    Writes audio/<generator>/<utt_id>.wav, refs/<generator>.txt (tagged
    reference transcripts of OK entries) and manifest.jsonl, sorted by
    (utt_id, generator) so reruns are byte-identical for any job count.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "refs").mkdir(exist_ok=True)
    for gen in cfg.generators:
        (out_dir / "audio" / gen).mkdir(parents=True, exist_ok=True)

    tasks = [(rec, gen) for rec in corpus for gen in cfg.generators]
    if jobs is None or jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            entries = list(pool.map(lambda t: _build_one(t[0], t[1], cfg, out_dir), tasks))
    else:
        entries = [_build_one(rec, gen, cfg, out_dir) for rec, gen in tasks]

    entries.sort(key=lambda e: (e.utt_id, e.generator_id))
    write_manifest(out_dir / "manifest.jsonl", entries)
    for gen in cfg.generators:
        refs = {e.utt_id: e.tagged_ref for e in entries
                if e.generator_id == gen and e.status == STATUS_OK}
        write_tagged_file(out_dir / "refs" / f"{gen}.txt", refs)
    return entries
