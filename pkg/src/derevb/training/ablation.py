"""Fine-tuning ablation and system comparison.

run_ablation fine-tunes four copies of one pre-trained bundle, one per
combination of freezing or tuning each network, with identical seeds, and
scores each against the pre-trained bundle. compare_systems scores the
intermediate systems of the pipeline side by side.
"""

from __future__ import annotations

import logging
from collections.abc import Sequence
from pathlib import Path
from typing import Callable, Optional

import attr

from derevb.audio import Waveform
from derevb.emitter import Table
from derevb.errors import InvalidInput
from derevb.manifest import Triple
from derevb.metrics import LpcFrameConfig, MetricsReport, evaluate_pair
from derevb.models.bundle import ModelBundle, ri2ri_enhance, s2s_enhance, two_stage_enhance
from derevb.parallel import map_ordered
from derevb.training.data import UtteranceFeatures
from derevb.training.loop import TrainingConfig, run_stage

logger = logging.getLogger(__name__)

FREEZE_GRID: tuple[tuple[bool, bool], ...] = (
    (True, True),
    (False, True),
    (True, False),
    (False, False),
)

METRIC_COLUMNS = ("LLR", "CD", "SI-SDR", "fwSegSNR")

System = Callable[[Triple], Waveform]


def _metric_cells(report: MetricsReport) -> tuple[float, float, float, float]:
    return report.llr, report.cd, report.si_sdr_db, report.fw_snr_seg_db


def as_triples(features: Sequence[UtteranceFeatures]) -> list[Triple]:
    return [Triple(f.id, f.clean, None, f.noisy) for f in features]


def evaluate_system(
    system: System,
    triples: Sequence[Triple],
    metrics_cfg: Optional[LpcFrameConfig] = None,
    jobs: Optional[int] = 1,
) -> MetricsReport:
    """Mean metrics of system outputs against the clean signals.

    Raises:
        InvalidInput: If there are no utterances.
    """
    if not triples:
        raise InvalidInput("no utterances to evaluate")
    reports = map_ordered(
        lambda t: evaluate_pair(t.clean, system(t), metrics_cfg), triples, jobs
    )
    return MetricsReport.mean(reports)


def evaluate_bundle(
    bundle: ModelBundle,
    triples: Sequence[Triple],
    metrics_cfg: Optional[LpcFrameConfig] = None,
    jobs: Optional[int] = 1,
) -> MetricsReport:
    return evaluate_system(lambda t: two_stage_enhance(t.noisy, bundle), triples, metrics_cfg, jobs)


@attr.frozen(eq=False)
class AblationRow:
    freeze_s2s: bool
    freeze_ri2ri: bool
    report: MetricsReport


@attr.frozen(eq=False)
class AblationResult:
    pretrained: MetricsReport
    rows: list[AblationRow]

    def table(self) -> Table:
        def _label(frozen: bool) -> str:
            return "freeze" if frozen else "tune"

        rows = [("pre-trained", "-", *_metric_cells(self.pretrained))]
        rows.extend(
            (_label(r.freeze_s2s), _label(r.freeze_ri2ri), *_metric_cells(r.report))
            for r in self.rows
        )
        return Table(
            "Average performance of fine-tuning combinations",
            ("S2S", "RI2RI", *METRIC_COLUMNS),
            rows,
        )

    def best(self) -> AblationRow:
        return max(self.rows, key=lambda r: r.report.si_sdr_db)


def run_ablation(
    pretrained: ModelBundle,
    features: Sequence[UtteranceFeatures],
    base: Optional[TrainingConfig] = None,
    metrics_cfg: Optional[LpcFrameConfig] = None,
    eval_triples: Optional[Sequence[Triple]] = None,
    out_dir: Optional[Path] = None,
    jobs: Optional[int] = 1,
) -> AblationResult:
    """Fine-tune one copy of pretrained per freeze combination and score each.

    Every run starts from the same values and uses base's seed, so the rows
    differ only in what is frozen. The rows follow FREEZE_GRID order.

    Args:
        pretrained: Bundle after both pre-training stages; left unchanged.
        features: Fine-tuning utterances.
        base: Fine-tuning parameters; stage and freeze flags are overridden.
        metrics_cfg: Framing of the evaluation metrics.
        eval_triples: Evaluation utterances; defaults to the fine-tuning set.
        out_dir: Each run writes its log under out_dir/<s2s>-<ri2ri>/.
        jobs: Evaluation workers.
    """
    base = base or TrainingConfig(stage="finetune")
    triples = list(eval_triples) if eval_triples is not None else as_triples(features)
    reference = evaluate_bundle(pretrained, triples, metrics_cfg, jobs)

    rows = []
    for freeze_s2s, freeze_ri2ri in FREEZE_GRID:
        cfg = attr.evolve(
            base,
            stage="finetune",
            freeze_s2s=freeze_s2s,
            freeze_ri2ri=freeze_ri2ri,
            force_joint_from_scratch=False,
        )
        label = f"{'freeze' if freeze_s2s else 'tune'}-{'freeze' if freeze_ri2ri else 'tune'}"
        run_dir = Path(out_dir) / label if out_dir is not None else None
        result = run_stage(cfg, pretrained.clone(), features, run_dir, metrics_cfg)
        report = evaluate_bundle(result.bundle, triples, metrics_cfg, jobs)
        logger.info(f"Ablation {label}: SI-SDR {report.si_sdr_db:.2f} dB, CD {report.cd:.3f}")
        rows.append(AblationRow(freeze_s2s, freeze_ri2ri, report))
    return AblationResult(reference, rows)


SYSTEMS: tuple[str, ...] = ("Unprocessed", "S2S+NP", "S2S+CP", "RI2RI", "S2S+RI2RI")


def _systems(bundle: ModelBundle) -> dict[str, System]:
    return {
        "Unprocessed": lambda t: t.noisy,
        "S2S+NP": lambda t: s2s_enhance(t.noisy, bundle),
        "S2S+CP": lambda t: s2s_enhance(t.noisy, bundle, phase_source=t.clean),
        "RI2RI": lambda t: ri2ri_enhance(t.noisy, bundle),
        "S2S+RI2RI": lambda t: two_stage_enhance(t.noisy, bundle),
    }


def compare_systems(
    bundle: ModelBundle,
    triples: Sequence[Triple],
    metrics_cfg: Optional[LpcFrameConfig] = None,
    jobs: Optional[int] = 1,
) -> dict[str, MetricsReport]:
    """Mean metrics of the unprocessed input and every stage combination."""
    systems = _systems(bundle)
    return {name: evaluate_system(systems[name], triples, metrics_cfg, jobs) for name in SYSTEMS}


def comparison_table(reports: dict[str, MetricsReport]) -> Table:
    return Table(
        "Comparison of enhancement systems",
        ("system", *METRIC_COLUMNS),
        [(name, *_metric_cells(report)) for name, report in reports.items()],
    )
