"""Staged training.

Three stages share one loop:

    pretrain_s2s    magnitude network on noisy -> clean log-magnitude (MSE),
                    with stripe masking on its input
    pretrain_ri2ri  complex network on clean-magnitude/noisy-phase planes,
                    scored by negative SI-SDR after resynthesis (or RI MSE)
    finetune        S2S output recombined with the noisy phase feeds RI2RI;
                    each unfrozen network trains on its own objective

A frozen S2S runs without recording a graph and a trainable one is detached
before the recombination, so backpropagation stops at the RI2RI input and each
network sees only its own loss. A non-finite loss restores the last parameters
that produced a finite one and raises TrainingDiverged, after writing them to
<stage>-last-good.ckpt when an output directory is given.

force_joint_from_scratch reinitializes both networks and trains them end to end
on the SI-SDR objective alone; it exists to reproduce the configuration that
fails to converge.
"""

from __future__ import annotations

import logging
import math
import time
from collections.abc import Sequence
from contextlib import nullcontext
from pathlib import Path
from typing import Any, Literal, NoReturn, Optional

import attr
import numpy as np

from derevb.audio import Waveform
from derevb.autodiff import functional as F
from derevb.autodiff.optim import Adam
from derevb.autodiff.tensor import Tensor, no_grad
from derevb.emitter import emit_jsonl
from derevb.errors import InvalidInput, TrainingDiverged
from derevb.metrics import LpcFrameConfig, MetricsReport, evaluate_pair
from derevb.models.bundle import ModelBundle, ri2ri_enhance, s2s_enhance, save_bundle, two_stage_enhance
from derevb.models.unet import ri2ri_forward, s2s_forward
from derevb.training.augment import CROP_FRAMES, SpecAugmentConfig
from derevb.training.data import (
    STAGES,
    Batch,
    UtteranceFeatures,
    make_batch,
    sample_batch,
    split_validation,
)
from derevb.training.losses import loss_ri2ri, loss_ri_mse, loss_s2s, model_output_to_ri

logger = logging.getLogger(__name__)

Stage = Literal["pretrain_s2s", "pretrain_ri2ri", "finetune"]


def _positive(_inst: Any, attribute: Any, value: float) -> None:
    if not value > 0:
        raise InvalidInput(f"{attribute.name} must be > 0, got {value}", field=attribute.name)


def _non_negative(_inst: Any, attribute: Any, value: int) -> None:
    if value < 0:
        raise InvalidInput(f"{attribute.name} must be >= 0, got {value}", field=attribute.name)


@attr.frozen
class TrainingConfig:
    """Parameters of one training stage.

    freeze_s2s defaults to True for finetune and False otherwise. Intervals of
    0 disable checkpointing or validation.
    """

    stage: Stage = "pretrain_s2s"
    freeze_s2s: bool = attr.Factory(lambda self: self.stage == "finetune", takes_self=True)
    freeze_ri2ri: bool = False
    lr: float = attr.field(default=1e-3, validator=_positive)
    batch_size: int = attr.field(default=4, validator=_positive)
    steps: int = attr.field(default=500, validator=_non_negative)
    crop_frames: int = attr.field(default=CROP_FRAMES, validator=_positive)
    spec_augment: SpecAugmentConfig = attr.Factory(SpecAugmentConfig)
    seed: int = 0
    checkpoint_every: int = attr.field(default=0, validator=_non_negative)
    validate_every: int = attr.field(default=100, validator=_non_negative)
    validation_fraction: float = 0.1
    ri2ri_loss: Literal["si_sdr", "mse"] = "si_sdr"
    force_joint_from_scratch: bool = False

    def __attrs_post_init__(self) -> None:
        if self.stage not in STAGES:
            raise InvalidInput(f"stage must be one of {STAGES}, got {self.stage!r}", field="stage")
        if self.stage == "pretrain_s2s" and self.freeze_s2s:
            raise InvalidInput("pretrain_s2s cannot freeze the network it trains", field="freeze_s2s")
        if self.stage == "pretrain_ri2ri" and self.freeze_ri2ri:
            raise InvalidInput(
                "pretrain_ri2ri cannot freeze the network it trains", field="freeze_ri2ri"
            )
        if self.ri2ri_loss not in ("si_sdr", "mse"):
            raise InvalidInput(f"unknown ri2ri_loss {self.ri2ri_loss!r}", field="ri2ri_loss")
        if not 0.0 <= self.validation_fraction < 1.0:
            raise InvalidInput(
                "validation_fraction must be in [0, 1)", field="validation_fraction"
            )
        if self.force_joint_from_scratch:
            if self.stage != "finetune":
                raise InvalidInput(
                    "force_joint_from_scratch applies to the finetune stage only",
                    field="force_joint_from_scratch",
                )
            if self.freeze_s2s or self.freeze_ri2ri:
                raise InvalidInput(
                    "joint training from scratch needs both networks unfrozen",
                    field="force_joint_from_scratch",
                )

    def frozen_flags(self) -> tuple[bool, bool]:
        """(S2S frozen, RI2RI frozen) during this stage."""
        if self.stage == "pretrain_s2s":
            return False, True
        if self.stage == "pretrain_ri2ri":
            return True, False
        return self.freeze_s2s, self.freeze_ri2ri


@attr.frozen
class TrainRecord:
    """Loss of one optimizer step, with a validation snapshot when one was taken."""

    step: int
    stage: str
    loss: float
    wall_time_s: float
    components: dict[str, float] = attr.Factory(dict)
    validation: Optional[MetricsReport] = None


@attr.frozen(eq=False)
class StageResult:
    bundle: ModelBundle
    records: list[TrainRecord]
    checkpoints: list[Path]

    @property
    def losses(self) -> list[float]:
        return [r.loss for r in self.records]


def _ri2ri_objective(cfg: TrainingConfig, bundle: ModelBundle, out: Tensor, batch: Batch) -> Tensor:
    if cfg.ri2ri_loss == "mse" and not cfg.force_joint_from_scratch:
        return loss_ri_mse(out, batch.ri_target)
    return loss_ri2ri(
        model_output_to_ri(out, bundle.stft_cfg.n_bins), batch.target_wave, bundle.stft_cfg
    )


def _finetune_loss(
    cfg: TrainingConfig, bundle: ModelBundle, batch: Batch
) -> tuple[Tensor, dict[str, Tensor]]:
    s2s_frozen = bundle.s2s.frozen
    with no_grad() if s2s_frozen else nullcontext():
        estimate = s2s_forward(bundle.s2s, Tensor(batch.s2s_input))

    components: dict[str, Tensor] = {}
    if not s2s_frozen and not cfg.force_joint_from_scratch:
        components["s2s"] = loss_s2s(estimate, batch.s2s_target)

    # the RI2RI objective reaches S2S only when both are trained jointly from scratch
    ri_source = estimate if cfg.force_joint_from_scratch else estimate.detach()
    log_mag = ri_source * batch.scale[:, None, None, None]
    magnitude = F.exp(log_mag)
    phase = batch.noisy_phase[:, None]
    planes = F.concat([magnitude * np.cos(phase), magnitude * np.sin(phase)], axis=1)
    out = ri2ri_forward(bundle.ri2ri, planes)
    components["ri2ri"] = _ri2ri_objective(cfg, bundle, out, batch)

    total = components["ri2ri"]
    if "s2s" in components:
        total = total + components["s2s"]
    return total, components


def stage_loss(
    cfg: TrainingConfig, bundle: ModelBundle, batch: Batch
) -> tuple[Tensor, dict[str, Tensor]]:
    """Objective of cfg.stage on one batch, with its named components."""
    if cfg.stage == "pretrain_s2s":
        loss = loss_s2s(s2s_forward(bundle.s2s, Tensor(batch.s2s_input)), batch.s2s_target)
        return loss, {"s2s": loss}
    if cfg.stage == "pretrain_ri2ri":
        out = ri2ri_forward(bundle.ri2ri, Tensor(batch.ri_input))
        loss = _ri2ri_objective(cfg, bundle, out, batch)
        return loss, {"ri2ri": loss}
    return _finetune_loss(cfg, bundle, batch)


def stage_output(stage: str, bundle: ModelBundle, item: UtteranceFeatures) -> Waveform:
    """The waveform the system trained by stage produces for one utterance."""
    if stage == "pretrain_s2s":
        return s2s_enhance(item.noisy, bundle)
    if stage == "pretrain_ri2ri":
        return ri2ri_enhance(item.noisy, bundle, magnitude_source=item.clean)
    return two_stage_enhance(item.noisy, bundle)


def validate(
    stage: str,
    bundle: ModelBundle,
    features: Sequence[UtteranceFeatures],
    metrics_cfg: Optional[LpcFrameConfig] = None,
) -> MetricsReport:
    """Mean metrics of the stage's system over held-out utterances."""
    reports = [
        evaluate_pair(item.clean, stage_output(stage, bundle, item), metrics_cfg)
        for item in features
    ]
    return MetricsReport.mean(reports)


def _reinitialize(bundle: ModelBundle, seed: int) -> None:
    fresh = ModelBundle.create(
        bundle.s2s.config, bundle.ri2ri.config, bundle.stft_cfg, seed, bundle.normalization
    )
    bundle.load_snapshot(fresh.snapshot())


def _abort(
    cfg: TrainingConfig,
    bundle: ModelBundle,
    step: int,
    value: float,
    last_good: Optional[dict[str, np.ndarray]],
    checkpoints: list[Path],
    out_dir: Optional[Path],
) -> NoReturn:
    last = checkpoints[-1] if checkpoints else None
    if last_good is not None:
        bundle.load_snapshot(last_good)
        if out_dir is not None:
            last = save_bundle(Path(out_dir) / f"{cfg.stage}-last-good.ckpt", bundle)
    logger.error(f"Loss became {value} at step {step}; last good checkpoint {last}")
    raise TrainingDiverged(f"non-finite loss {value} at step {step}", step, last)


def run_stage(
    cfg: TrainingConfig,
    bundle: ModelBundle,
    features: Sequence[UtteranceFeatures],
    out_dir: Optional[Path] = None,
    metrics_cfg: Optional[LpcFrameConfig] = None,
) -> StageResult:
    """Train bundle in place for cfg.steps optimizer steps.

    Args:
        cfg: Stage parameters.
        bundle: Networks to train; freeze flags are set from cfg.
        features: Analysed utterances; the last validation_fraction are held out.
        out_dir: Receives periodic checkpoints and train_log.jsonl when given.
        metrics_cfg: Framing of the validation metrics.

    Returns:
        The trained bundle, one TrainRecord per step and the checkpoint paths.

    Raises:
        InvalidInput: If features is empty.
        TrainingDiverged: If a loss is not finite; the bundle is left at the last
            parameters that gave a finite loss.
    """
    if not features:
        raise InvalidInput("no training utterances")
    if cfg.force_joint_from_scratch:
        logger.warning(
            "Training both networks jointly from scratch; this configuration is not expected to converge"
        )
        _reinitialize(bundle, cfg.seed)

    s2s_frozen, ri2ri_frozen = cfg.frozen_flags()
    bundle.s2s.set_frozen(s2s_frozen)
    bundle.ri2ri.set_frozen(ri2ri_frozen)
    trainable = not (s2s_frozen and ri2ri_frozen)

    train, held_out = split_validation(features, cfg.validation_fraction)
    augment = cfg.spec_augment if cfg.stage == "pretrain_s2s" and cfg.spec_augment.enabled else None
    rng = np.random.default_rng(cfg.seed)
    optimizer = Adam(bundle.parameters(), lr=cfg.lr)
    logger.info(
        f"Stage {cfg.stage}: {cfg.steps} steps on {len(train)} utterances "
        f"({len(held_out)} held out), S2S {'frozen' if s2s_frozen else 'trainable'}, "
        f"RI2RI {'frozen' if ri2ri_frozen else 'trainable'}"
    )

    records: list[TrainRecord] = []
    checkpoints: list[Path] = []
    last_good: Optional[dict[str, np.ndarray]] = None
    started = time.perf_counter()
    for step in range(1, cfg.steps + 1):
        batch = make_batch(
            sample_batch(train, cfg.batch_size, rng), bundle.stft_cfg, rng, cfg.crop_frames, augment
        )
        current = bundle.snapshot()
        optimizer.zero_grad()
        with nullcontext() if trainable else no_grad():
            loss, components = stage_loss(cfg, bundle, batch)
        value = loss.item()
        if not math.isfinite(value):
            _abort(cfg, bundle, step, value, last_good, checkpoints, out_dir)
        last_good = current
        if trainable:
            loss.backward()
            optimizer.step()

        validation = None
        if held_out and cfg.validate_every and (step % cfg.validate_every == 0 or step == cfg.steps):
            validation = validate(cfg.stage, bundle, held_out, metrics_cfg)
            logger.info(
                f"step {step}: validation SI-SDR {validation.si_sdr_db:.2f} dB, CD {validation.cd:.3f}"
            )
        records.append(
            TrainRecord(
                step=step,
                stage=cfg.stage,
                loss=value,
                wall_time_s=time.perf_counter() - started,
                components={name: t.item() for name, t in components.items()},
                validation=validation,
            )
        )
        logger.debug(f"step {step}: loss {value:.6f}")

        if out_dir is not None and cfg.checkpoint_every and step % cfg.checkpoint_every == 0:
            checkpoints.append(save_bundle(Path(out_dir) / f"{cfg.stage}-step{step:06d}.ckpt", bundle))

    if out_dir is not None:
        emit_jsonl(Path(out_dir) / "train_log.jsonl", records)
    if records:
        logger.info(
            f"Stage {cfg.stage} finished: loss {records[0].loss:.4f} -> {records[-1].loss:.4f}"
        )
    return StageResult(bundle, records, checkpoints)
