"""Magnitude/phase swap experiment.

Each utterance is resynthesized four ways from the STFTs of its clean and noisy
versions: noisy magnitude with noisy phase (the baseline), noisy magnitude with
clean phase, clean magnitude with noisy phase, and clean/clean as a sanity row.
Scoring all four against the clean signal separates what the magnitude carries
(CD, LLR) from what the phase carries (SI-SDR).
"""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Optional

import attr

from derevb.audio import Waveform, write_wav
from derevb.emitter import Table
from derevb.errors import InvalidInput
from derevb.manifest import Manifest, ManifestRecord, Triple, load_triple
from derevb.metrics import LpcFrameConfig, MetricsReport, evaluate_pair
from derevb.parallel import map_ordered
from derevb.stft import DEFAULT_FLOOR_EPS, StftConfig, decompose, istft, recombine, stft

logger = logging.getLogger(__name__)

VARIANTS: tuple[str, ...] = (
    "noisy_mag+noisy_phase",
    "noisy_mag+clean_phase",
    "clean_mag+noisy_phase",
    "clean_mag+clean_phase",
)

VARIANT_LABELS = {
    "noisy_mag+noisy_phase": "Noisy mag / Noisy phase",
    "noisy_mag+clean_phase": "Noisy mag / Clean phase",
    "clean_mag+noisy_phase": "Clean mag / Noisy phase",
    "clean_mag+clean_phase": "Clean mag / Clean phase",
}


@attr.frozen(eq=False)
class SwapVariants:
    """Resynthesized signals, one per magnitude/phase pairing."""

    noisy_mag_noisy_phase: Waveform
    noisy_mag_clean_phase: Waveform
    clean_mag_noisy_phase: Waveform
    clean_mag_clean_phase: Waveform

    def by_name(self) -> dict[str, Waveform]:
        return dict(zip(VARIANTS, attr.astuple(self, recurse=False)))


def swap_variants(
    clean: Waveform,
    noisy: Waveform,
    cfg: Optional[StftConfig] = None,
    floor_eps: float = DEFAULT_FLOOR_EPS,
) -> SwapVariants:
    """Build the four magnitude/phase recombinations.

    Raises:
        InvalidInput: If the signals differ in length or sample rate.
    """
    if len(clean) != len(noisy):
        raise InvalidInput(f"clean has {len(clean)} samples, noisy has {len(noisy)}")
    if clean.sample_rate_hz != noisy.sample_rate_hz:
        raise InvalidInput("clean and noisy sample rates differ")
    cfg = cfg or StftConfig()

    clean_mp = decompose(stft(clean, cfg), floor_eps)
    noisy_mp = decompose(stft(noisy, cfg), floor_eps)
    return SwapVariants(
        noisy_mag_noisy_phase=istft(recombine(noisy_mp, noisy_mp)),
        noisy_mag_clean_phase=istft(recombine(noisy_mp, clean_mp)),
        clean_mag_noisy_phase=istft(recombine(clean_mp, noisy_mp)),
        clean_mag_clean_phase=istft(recombine(clean_mp, clean_mp)),
    )


def evaluate_variants(
    triple: Triple,
    stft_cfg: Optional[StftConfig] = None,
    metrics_cfg: Optional[LpcFrameConfig] = None,
) -> tuple[dict[str, Waveform], dict[str, MetricsReport]]:
    """Build and score every variant of one utterance against its clean signal."""
    variants = swap_variants(triple.clean, triple.noisy, stft_cfg).by_name()
    reports = {name: evaluate_pair(triple.clean, wave, metrics_cfg) for name, wave in variants.items()}
    return variants, reports


@attr.frozen(eq=False)
class SwapAnalysisResult:
    """Mean report per variant plus the per-utterance reports behind it."""

    means: dict[str, MetricsReport]
    per_utterance: list[tuple[str, dict[str, MetricsReport]]]

    def table(self) -> Table:
        rows = [
            (
                VARIANT_LABELS[name],
                report.llr,
                report.cd,
                report.si_sdr_db,
                report.fw_snr_seg_db,
                report.n_frames_scored,
            )
            for name, report in self.means.items()
        ]
        return Table(
            "Performance of magnitude/phase combinations",
            ("variant", "LLR", "CD", "SI-SDR", "fwSegSNR", "frames"),
            rows,
        )


def run_swap_analysis(
    manifest: Manifest,
    stft_cfg: Optional[StftConfig] = None,
    metrics_cfg: Optional[LpcFrameConfig] = None,
    jobs: Optional[int] = 1,
    dump_dir: Optional[Path] = None,
) -> SwapAnalysisResult:
    """Evaluate the swap variants over a manifest and average per variant.

    Raises:
        InvalidInput: If the manifest is empty.
    """
    if len(manifest) == 0:
        raise InvalidInput("manifest has no utterances")

    def _score(record: ManifestRecord) -> tuple[str, dict[str, Waveform], dict[str, MetricsReport]]:
        triple = load_triple(manifest, record)
        return (triple.id, *evaluate_variants(triple, stft_cfg, metrics_cfg))

    per_utterance = []
    for utterance_id, variants, reports in map_ordered(_score, manifest.records, jobs):
        if dump_dir is not None:
            for name, wave in variants.items():
                write_wav(Path(dump_dir) / name / f"{utterance_id}.wav", wave)
        per_utterance.append((utterance_id, reports))
    means = {
        name: MetricsReport.mean([reports[name] for _, reports in per_utterance])
        for name in VARIANTS
    }
    for name, report in means.items():
        logger.info(
            f"{VARIANT_LABELS[name]}: LLR {report.llr:.3f} CD {report.cd:.3f} "
            f"SI-SDR {report.si_sdr_db:.2f} dB"
        )
    return SwapAnalysisResult(means, per_utterance)
