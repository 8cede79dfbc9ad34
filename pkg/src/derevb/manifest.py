"""Dataset manifests.

A manifest is a JSON-lines file with one record per utterance:

    {"id": "utt0000", "clean_path": "clean/utt0000.wav", "rt60_s": 0.5,
     "snr_db": 20.0, "noise_kind": "white", "seed": 123,
     "reverb_path": "reverb/utt0000.wav", "noisy_path": "noisy/utt0000.wav",
     "source_distance_m": 1.2}

Relative paths resolve against the manifest's directory. Records that carry only
clean_path (for example a list of external corpus files) get their reverberant
and noisy versions synthesized on load from rt60_s, snr_db, noise_kind and seed.

Functions:
    read_manifest / write_manifest: JSONL I/O with line-numbered errors
    load_triple: clean, reverberant and noisy waveforms of one record
    synth_dataset: Generate a synthetic corpus of WAV triples plus its manifest
"""

from __future__ import annotations

import json
import logging
from collections.abc import Sequence
from pathlib import Path
from typing import Optional, Union

import attr
import numpy as np

from derevb.audio import REFERENCE_SAMPLE_RATE_HZ, Waveform, read_wav, write_wav
from derevb.emitter import emit_jsonl
from derevb.errors import ConfigError, InvalidInput, ManifestError
from derevb.parallel import map_ordered
from derevb.schema import structure
from derevb.signal_model import MixtureSpec, make_example, source_distance_in_range
from derevb.sources import chirp, pseudo_speech

logger = logging.getLogger(__name__)

DISTANCE_RANGE_M = (0.5, 2.5)


@attr.frozen
class ManifestRecord:
    """One utterance of a manifest."""

    id: str
    clean_path: str
    rt60_s: float = 0.5
    snr_db: float = 20.0
    noise_kind: str = "white"
    seed: int = 0
    reverb_path: Optional[str] = None
    noisy_path: Optional[str] = None
    source_distance_m: float = attr.field(default=1.0, validator=source_distance_in_range)
    noise_path: Optional[str] = None

    def mixture_spec(self, root: Path) -> MixtureSpec:
        noise_path = str(root / self.noise_path) if self.noise_path else None
        return MixtureSpec(
            rt60_s=self.rt60_s,
            snr_db=self.snr_db,
            noise_kind=self.noise_kind,
            seed=self.seed,
            source_distance_m=self.source_distance_m,
            noise_path=noise_path,
        )

    def to_json(self) -> dict[str, object]:
        return {k: v for k, v in attr.asdict(self).items() if v is not None}


@attr.frozen(eq=False)
class Manifest:
    """Parsed manifest and the directory its paths are relative to."""

    root: Path
    records: tuple[ManifestRecord, ...] = attr.field(converter=tuple)

    def __len__(self) -> int:
        return len(self.records)

    def resolve(self, relative: str) -> Path:
        path = Path(relative)
        return path if path.is_absolute() else self.root / path

    def subset(self, records: Sequence[ManifestRecord]) -> Manifest:
        return Manifest(self.root, tuple(records))


@attr.frozen(eq=False)
class Triple:
    """Clean, reverberant and noisy renditions of one utterance (equal lengths).

    reverberant is None when the manifest supplies only clean and noisy files.
    """

    id: str
    clean: Waveform
    reverberant: Optional[Waveform]
    noisy: Waveform


def read_manifest(path: Union[str, Path]) -> Manifest:
    """Parse a JSONL manifest.

    Raises:
        ManifestError: On unreadable files, malformed lines, schema violations
            or duplicate ids; the 1-based line number is attached.
    """
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as e:
        raise ManifestError(f"cannot read manifest {path}: {e}") from e

    records = []
    seen: set[str] = set()
    for number, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            document = json.loads(line)
        except json.JSONDecodeError as e:
            raise ManifestError(f"line is not valid JSON: {e.msg}", line=number) from e
        try:
            record = structure(ManifestRecord, document)
        except ConfigError as e:
            raise ManifestError(e.message, field=e.field, line=number) from e
        if record.id in seen:
            raise ManifestError(f"duplicate id {record.id!r}", field="id", line=number)
        seen.add(record.id)
        records.append(record)

    logger.debug(f"Read {len(records)} records from {path}")
    return Manifest(path.parent, tuple(records))


def write_manifest(path: Union[str, Path], records: Sequence[ManifestRecord]) -> Path:
    return emit_jsonl(path, [r.to_json() for r in records])


def load_triple(manifest: Manifest, record: ManifestRecord) -> Triple:
    """Load or synthesize the waveforms of one record.

    Raises:
        InvalidInput: If files cannot be read or sample rates differ.
    """
    clean = read_wav(manifest.resolve(record.clean_path))
    if record.noisy_path is None:
        mixture = make_example(clean, record.mixture_spec(manifest.root))
        return Triple(record.id, clean, mixture.reverberant_x, mixture.noisy_y)

    noisy = read_wav(manifest.resolve(record.noisy_path))
    reverberant = read_wav(manifest.resolve(record.reverb_path)) if record.reverb_path else None
    waves = [w for w in (clean, reverberant, noisy) if w is not None]
    if len({w.sample_rate_hz for w in waves}) != 1:
        raise InvalidInput(f"record {record.id!r} mixes sample rates", field="noisy_path")
    length = min(len(w) for w in waves)
    return Triple(
        record.id,
        clean.truncate(length),
        reverberant.truncate(length) if reverberant is not None else None,
        noisy.truncate(length),
    )


def load_triples(manifest: Manifest, jobs: Optional[int] = 1) -> list[Triple]:
    return map_ordered(lambda r: load_triple(manifest, r), manifest.records, jobs)


@attr.frozen
class SynthSettings:
    """Parameters of a synthetic corpus.

    rt60_s is a single value or an inclusive (low, high) range sampled per
    utterance.
    """

    n: int = 16
    rt60_s: tuple[float, float] = (0.5, 0.5)
    snr_db: float = 20.0
    noise_kind: str = "white"
    duration_s: float = 2.0
    source: str = "pseudo-speech"
    seed: int = 0
    sample_rate_hz: int = REFERENCE_SAMPLE_RATE_HZ

    def __attrs_post_init__(self) -> None:
        if self.n < 1:
            raise InvalidInput(f"n must be >= 1, got {self.n}", field="n")
        if self.rt60_s[0] > self.rt60_s[1]:
            raise InvalidInput(f"rt60 range {self.rt60_s} is reversed", field="rt60_s")
        if self.source not in ("pseudo-speech", "chirp"):
            raise InvalidInput(f"unknown source {self.source!r}", field="source")


def _synth_one(settings: SynthSettings, index: int, seed: int) -> tuple[ManifestRecord, Triple]:
    rng = np.random.default_rng(seed)
    low, high = settings.rt60_s
    rt60 = float(rng.uniform(low, high)) if high > low else low
    distance = float(rng.uniform(*DISTANCE_RANGE_M))
    if settings.source == "chirp":
        f_start = float(rng.uniform(100.0, 250.0))
        clean = chirp(settings.duration_s, settings.sample_rate_hz, f_start, f_start * 2.5)
    else:
        clean = pseudo_speech(settings.duration_s, rng, settings.sample_rate_hz)

    utterance_id = f"utt{index:04d}"
    record = ManifestRecord(
        id=utterance_id,
        clean_path=f"clean/{utterance_id}.wav",
        rt60_s=round(rt60, 6),
        snr_db=settings.snr_db,
        noise_kind=settings.noise_kind,
        seed=int(rng.integers(0, 2**31 - 1)),
        reverb_path=f"reverb/{utterance_id}.wav",
        noisy_path=f"noisy/{utterance_id}.wav",
        source_distance_m=round(distance, 6),
    )
    mixture = make_example(clean, record.mixture_spec(Path(".")))
    return record, Triple(utterance_id, clean, mixture.reverberant_x, mixture.noisy_y)


def synth_dataset(
    out_dir: Union[str, Path], settings: SynthSettings, jobs: Optional[int] = 1
) -> Manifest:
    """Generate WAV triples under out_dir/{clean,reverb,noisy} and a manifest.

    Utterance i draws from stream i of SeedSequence(settings.seed), so the
    corpus is bit-identical for equal settings regardless of jobs.

    Returns:
        The manifest written to out_dir/manifest.jsonl.
    """
    out_dir = Path(out_dir)
    seeds = [
        int(s.generate_state(1)[0]) for s in np.random.SeedSequence(settings.seed).spawn(settings.n)
    ]
    results = map_ordered(
        lambda pair: _synth_one(settings, pair[0], pair[1]), list(enumerate(seeds)), jobs
    )

    records = []
    for record, triple in results:
        write_wav(out_dir / record.clean_path, triple.clean)
        assert record.reverb_path is not None and record.noisy_path is not None
        assert triple.reverberant is not None
        write_wav(out_dir / record.reverb_path, triple.reverberant)
        write_wav(out_dir / record.noisy_path, triple.noisy)
        records.append(record)
    write_manifest(out_dir / "manifest.jsonl", records)

    rt60s = [r.rt60_s for r in records]
    logger.info(
        f"Synthesized {len(records)} utterances into {out_dir} "
        f"(RT60 {min(rt60s):.2f}-{max(rt60s):.2f} s, SNR {settings.snr_db} dB)"
    )
    return Manifest(out_dir, tuple(records))
