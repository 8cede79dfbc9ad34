"""Tests for ablation module.

Test Coverage:
    - run_ablation(): grid order, all-frozen row, untouched pre-trained bundle, run dirs
    - AblationResult.table() / best(): layout and selection
    - compare_systems() / comparison_table(): system order and the unprocessed row
    - evaluate_system(): empty input
"""

from pathlib import Path

import numpy as np
import pytest

from derevb.errors import InvalidInput
from derevb.manifest import Manifest
from derevb.metrics import MetricsReport, evaluate_pair
from derevb.stft import StftConfig
from derevb.training.ablation import (
    FREEZE_GRID,
    SYSTEMS,
    AblationResult,
    AblationRow,
    as_triples,
    compare_systems,
    comparison_table,
    evaluate_system,
    run_ablation,
)
from derevb.training.data import load_features
from derevb.training.loop import TrainingConfig
from tests.helpers.builders import tiny_bundle_factory


@pytest.fixture
def features(tiny_manifest: Manifest) -> list:
    return load_features(tiny_manifest, StftConfig(), 256)


def report(si_sdr_db: float) -> MetricsReport:
    return MetricsReport(si_sdr_db=si_sdr_db, cd=3.0, llr=0.5, fw_snr_seg_db=4.0, n_frames_scored=10)


# =============================================================================
# A. run_ablation() Tests
# =============================================================================


@pytest.mark.unit
class TestRunAblation:
    """Tests for the freeze/tune grid."""

    def test_grid_rows(self, features: list, tmp_path: Path) -> None:
        """Four rows in grid order; the all-frozen row matches the pre-trained scores."""
        pretrained = tiny_bundle_factory()
        before = pretrained.snapshot()
        base = TrainingConfig(
            stage="finetune", steps=1, batch_size=2, crop_frames=16, validate_every=0
        )
        result = run_ablation(pretrained, features, base, out_dir=tmp_path)

        assert [(r.freeze_s2s, r.freeze_ri2ri) for r in result.rows] == list(FREEZE_GRID)
        frozen = result.rows[0].report
        assert frozen.si_sdr_db == result.pretrained.si_sdr_db
        assert frozen.cd == result.pretrained.cd
        assert all(np.array_equal(before[k], v) for k, v in pretrained.snapshot().items())
        for label in ("freeze-freeze", "tune-freeze", "freeze-tune", "tune-tune"):
            assert (tmp_path / label / "train_log.jsonl").is_file()


# =============================================================================
# B. AblationResult Tests
# =============================================================================


@pytest.mark.unit
class TestAblationResult:
    """Tests for result tables."""

    def test_table_layout(self) -> None:
        """The pre-trained row comes first, then freeze/tune labels."""
        rows = [AblationRow(fs, fr, report(float(i))) for i, (fs, fr) in enumerate(FREEZE_GRID)]
        table = AblationResult(report(-1.0), rows).table()
        assert table.columns == ("S2S", "RI2RI", "LLR", "CD", "SI-SDR", "fwSegSNR")
        assert table.rows[0][:2] == ("pre-trained", "-")
        assert table.column("S2S")[1:] == ["freeze", "tune", "freeze", "tune"]
        assert table.column("RI2RI")[1:] == ["freeze", "freeze", "tune", "tune"]
        assert table.column("SI-SDR") == [-1.0, 0.0, 1.0, 2.0, 3.0]

    def test_best_by_si_sdr(self) -> None:
        """best() picks the highest SI-SDR row."""
        rows = [AblationRow(True, True, report(1.0)), AblationRow(False, False, report(5.0))]
        assert AblationResult(report(0.0), rows).best().freeze_s2s is False


# =============================================================================
# C. compare_systems() Tests
# =============================================================================


@pytest.mark.unit
class TestCompareSystems:
    """Tests for the system comparison."""

    def test_systems_and_unprocessed_row(self, features: list) -> None:
        """All systems are scored in order; Unprocessed scores the noisy input."""
        triples = as_triples(features[:1])
        reports = compare_systems(tiny_bundle_factory(), triples)
        assert tuple(reports) == SYSTEMS
        expected = evaluate_pair(triples[0].clean, triples[0].noisy)
        assert reports["Unprocessed"].si_sdr_db == pytest.approx(expected.si_sdr_db)

        table = comparison_table(reports)
        assert table.columns == ("system", "LLR", "CD", "SI-SDR", "fwSegSNR")
        assert table.column("system") == list(SYSTEMS)

    def test_no_utterances_rejected(self) -> None:
        """Evaluating an empty set raises InvalidInput."""
        with pytest.raises(InvalidInput):
            evaluate_system(lambda t: t.noisy, [])
