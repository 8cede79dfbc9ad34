"""Tests for manifest module.

Test Coverage:
    - read_manifest(): parsing, line-numbered errors, duplicate ids
    - write_manifest(): omits unset optional fields
    - load_triple(): file-backed and synthesized-on-load records
    - synth_dataset(): layout, determinism across job counts, settings validation
"""

import json
from pathlib import Path

import numpy as np
import pytest

from derevb.audio import Waveform, read_wav, write_wav
from derevb.errors import InvalidInput, ManifestError
from derevb.manifest import (
    Manifest,
    ManifestRecord,
    SynthSettings,
    load_triple,
    load_triples,
    read_manifest,
    synth_dataset,
    write_manifest,
)
from derevb.signal_model import measured_snr_db

# =============================================================================
# A. read_manifest() / write_manifest() Tests
# =============================================================================


@pytest.mark.unit
class TestReadManifest:
    """Tests for JSONL parsing."""

    def test_round_trip(self, tmp_path: Path) -> None:
        """Written records parse back unchanged."""
        records = [ManifestRecord("a", "clean/a.wav", rt60_s=0.3), ManifestRecord("b", "clean/b.wav")]
        path = write_manifest(tmp_path / "manifest.jsonl", records)
        manifest = read_manifest(path)
        assert manifest.records == tuple(records)
        assert manifest.root == tmp_path

    def test_unset_optionals_omitted(self, tmp_path: Path) -> None:
        """None fields are not written."""
        path = write_manifest(tmp_path / "m.jsonl", [ManifestRecord("a", "a.wav")])
        assert "noisy_path" not in json.loads(path.read_text())

    def test_blank_lines_skipped(self, tmp_path: Path) -> None:
        """Empty lines are ignored."""
        path = tmp_path / "m.jsonl"
        path.write_text('{"id": "a", "clean_path": "a.wav"}\n\n')
        assert len(read_manifest(path)) == 1

    def test_bad_json_reports_line(self, tmp_path: Path) -> None:
        """Malformed JSON raises ManifestError with the line number."""
        path = tmp_path / "m.jsonl"
        path.write_text('{"id": "a", "clean_path": "a.wav"}\n{not json\n')
        with pytest.raises(ManifestError) as exc_info:
            read_manifest(path)
        assert exc_info.value.line == 2
        assert exc_info.value.to_dict()["line"] == 2

    def test_wrong_type_reports_field(self, tmp_path: Path) -> None:
        """A string rt60 raises ManifestError naming the field."""
        path = tmp_path / "m.jsonl"
        path.write_text('{"id": "a", "clean_path": "a.wav", "rt60_s": "long"}\n')
        with pytest.raises(ManifestError) as exc_info:
            read_manifest(path)
        assert exc_info.value.field == "rt60_s"

    def test_distance_outside_predelay_window_reports_field(self, tmp_path: Path) -> None:
        """A 4 m source distance raises ManifestError naming the field."""
        path = tmp_path / "m.jsonl"
        path.write_text('{"id": "a", "clean_path": "a.wav", "source_distance_m": 4.0}\n')
        with pytest.raises(ManifestError) as exc_info:
            read_manifest(path)
        assert exc_info.value.field == "source_distance_m"
        assert exc_info.value.line == 1

    def test_duplicate_id_rejected(self, tmp_path: Path) -> None:
        """Repeated ids raise ManifestError."""
        path = write_manifest(tmp_path / "m.jsonl", [ManifestRecord("a", "x.wav")])
        path.write_text(path.read_text() * 2)
        with pytest.raises(ManifestError, match="duplicate"):
            read_manifest(path)

    def test_missing_file(self, tmp_path: Path) -> None:
        """An absent manifest raises ManifestError."""
        with pytest.raises(ManifestError, match="cannot read"):
            read_manifest(tmp_path / "absent.jsonl")


# =============================================================================
# B. load_triple() Tests
# =============================================================================


@pytest.mark.unit
class TestLoadTriple:
    """Tests for waveform loading."""

    def test_file_backed_record(self, tiny_manifest: Manifest) -> None:
        """Synthesized corpora load clean, reverberant and noisy files."""
        triple = load_triple(tiny_manifest, tiny_manifest.records[0])
        assert triple.id == "utt0000"
        assert triple.reverberant is not None
        assert len(triple.clean) == len(triple.noisy) == 16000

    def test_clean_only_record_is_synthesized(self, tmp_path: Path, clean_wave) -> None:
        """Records without noisy_path are rendered from their acoustic fields."""
        write_wav(tmp_path / "c.wav", clean_wave)
        manifest = Manifest(tmp_path, [ManifestRecord("c", "c.wav", rt60_s=0.4, snr_db=15.0, seed=3)])
        triple = load_triple(manifest, manifest.records[0])
        assert triple.reverberant is not None
        assert measured_snr_db(triple.reverberant, triple.noisy) == pytest.approx(15.0, abs=1e-3)

    def test_lengths_truncated_to_shortest(self, tmp_path: Path, clean_wave) -> None:
        """A longer noisy file is cut to the clean length."""
        write_wav(tmp_path / "c.wav", clean_wave)
        write_wav(tmp_path / "n.wav", clean_wave.with_samples(np.zeros(len(clean_wave) + 50)))
        manifest = Manifest(tmp_path, [ManifestRecord("c", "c.wav", noisy_path="n.wav")])
        triple = load_triple(manifest, manifest.records[0])
        assert len(triple.noisy) == len(clean_wave)
        assert triple.reverberant is None

    def test_mixed_rates_rejected(self, tmp_path: Path, clean_wave) -> None:
        """Clean and noisy files at different rates raise InvalidInput."""
        write_wav(tmp_path / "c.wav", clean_wave)
        write_wav(tmp_path / "n.wav", Waveform(clean_wave.samples, 8000))
        manifest = Manifest(tmp_path, [ManifestRecord("c", "c.wav", noisy_path="n.wav")])
        with pytest.raises(InvalidInput, match="sample rates"):
            load_triple(manifest, manifest.records[0])

    def test_load_triples_keeps_order(self, tiny_manifest: Manifest) -> None:
        """Parallel loading returns records in manifest order."""
        ids = [t.id for t in load_triples(tiny_manifest, jobs=3)]
        assert ids == ["utt0000", "utt0001", "utt0002"]


# =============================================================================
# C. synth_dataset() Tests
# =============================================================================


@pytest.mark.unit
class TestSynthDataset:
    """Tests for synthetic corpus generation."""

    def test_layout(self, tiny_manifest: Manifest) -> None:
        """Files land under clean/, reverb/ and noisy/ next to the manifest."""
        root = tiny_manifest.root
        assert (root / "manifest.jsonl").exists()
        for sub in ("clean", "reverb", "noisy"):
            assert len(list((root / sub).glob("*.wav"))) == 3

    def test_jobs_do_not_change_output(self, tmp_path: Path) -> None:
        """Serial and parallel generation write identical corpora."""
        settings = SynthSettings(n=3, duration_s=0.5, seed=8)
        serial = synth_dataset(tmp_path / "serial", settings, jobs=1)
        parallel = synth_dataset(tmp_path / "parallel", settings, jobs=3)
        assert serial.records == parallel.records
        for record in serial.records:
            a = read_wav(serial.resolve(record.noisy_path))
            b = read_wav(parallel.resolve(record.noisy_path))
            np.testing.assert_array_equal(a.samples, b.samples)

    def test_rt60_range_sampled(self, tmp_path: Path) -> None:
        """Per-utterance RT60 falls inside the requested range."""
        manifest = synth_dataset(tmp_path, SynthSettings(n=4, rt60_s=(0.3, 0.9), duration_s=0.5))
        assert all(0.3 <= r.rt60_s <= 0.9 for r in manifest.records)

    def test_chirp_source(self, tmp_path: Path) -> None:
        """The chirp source is accepted."""
        manifest = synth_dataset(tmp_path, SynthSettings(n=1, source="chirp", duration_s=0.5))
        assert len(manifest) == 1

    @pytest.mark.parametrize(
        "kwargs", [{"n": 0}, {"rt60_s": (0.9, 0.3)}, {"source": "speech-corpus"}]
    )
    def test_invalid_settings_rejected(self, kwargs: dict) -> None:
        """Bad counts, reversed ranges and unknown sources raise InvalidInput."""
        with pytest.raises(InvalidInput):
            SynthSettings(**kwargs)
