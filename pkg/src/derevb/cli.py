"""Command-line interface for derevb.

Every subcommand reads its inputs, writes its outputs under --out and never
modifies its inputs. Library errors are printed to stderr as one JSON object
({"error": ..., "message": ..., "field": ...}) and exit with status 1.

Usage:
    $ derevb synth-data --n 16 --rt60 0.3 --rt60-max 0.7 --snr 20 --seed 7 --out data/
    $ derevb analyze --manifest data/manifest.jsonl --out results/
    $ derevb train --stage s2s --manifest data/manifest.jsonl --out runs/s2s
    $ derevb train --stage ri2ri --init runs/s2s/model.ckpt --manifest ... --out runs/ri2ri
    $ derevb train --stage finetune --init runs/ri2ri/model.ckpt --manifest ... --out runs/ft
    $ derevb ablate --checkpoint runs/ri2ri/model.ckpt --manifest ... --out results/
    $ derevb enhance --checkpoint runs/ft/model.ckpt --in noisy.wav --out est.wav
    $ derevb evaluate --ref clean.wav --est est.wav
    $ derevb evaluate --manifest data/manifest.jsonl --enhanced-dir est/ --out results/
    $ derevb compare --checkpoint runs/ft/model.ckpt --manifest ... --out results/
"""

from __future__ import annotations

import functools
import json
import logging
import sys
from pathlib import Path
from typing import Any, Callable, Optional, TypeVar

import click

from . import __version__
from .analysis import run_swap_analysis
from .audio import read_wav, wav_subtype, write_wav
from .config import DerevbConfig, load_config
from .emitter import Table, dumps_record, emit_jsonl, emit_table, format_table, to_record
from .errors import DerevbError, InvalidInput
from .manifest import (
    Manifest,
    SynthSettings,
    Triple,
    load_triples,
    read_manifest,
    synth_dataset,
)
from .metrics import MetricsReport, evaluate_pair
from .models.bundle import ModelBundle, load_bundle, save_bundle, two_stage_enhance
from .parallel import map_ordered
from .training.ablation import compare_systems, comparison_table, run_ablation
from .training.data import load_features
from .training.loop import run_stage

logger = logging.getLogger(__name__)

CommandT = TypeVar("CommandT", bound=Callable[..., Any])

STAGE_NAMES = {"s2s": "pretrain_s2s", "ri2ri": "pretrain_ri2ri", "finetune": "finetune"}

_manifest_option = click.option(
    "--manifest",
    "manifest_path",
    required=True,
    type=click.Path(dir_okay=False, path_type=Path),
    help="JSONL dataset manifest.",
)
_out_dir_option = click.option(
    "--out",
    "out_dir",
    required=True,
    type=click.Path(file_okay=False, path_type=Path),
    help="Output directory.",
)
_config_option = click.option(
    "--config",
    "config_path",
    type=click.Path(dir_okay=False, path_type=Path),
    default=None,
    help="JSON or YAML config document.",
)
_jobs_option = click.option(
    "--jobs",
    type=click.IntRange(min=1),
    default=1,
    show_default=True,
    envvar="DEREVB_JOBS",
    help="Per-utterance worker count (env: DEREVB_JOBS).",
)
_checkpoint_option = click.option(
    "--checkpoint",
    "checkpoint_path",
    required=True,
    type=click.Path(dir_okay=False, path_type=Path),
    help="Model bundle checkpoint.",
)


def _reports_errors(command: CommandT) -> CommandT:
    """Turn DerevbError into a JSON document on stderr and exit status 1."""

    @functools.wraps(command)
    def wrapper(*args: Any, **kwargs: Any) -> Any:
        try:
            return command(*args, **kwargs)
        except DerevbError as e:
            logger.debug("Command failed", exc_info=True)
            click.echo(json.dumps(e.to_dict(), sort_keys=True), err=True)
            sys.exit(1)

    return wrapper  # type: ignore[return-value]


def _require_files(**paths: Optional[Path]) -> None:
    """Raise InvalidInput naming the option of the first given path that is not a file."""
    for option, path in paths.items():
        if path is not None and not path.is_file():
            raise InvalidInput(f"{path} does not exist or is not a file", field=option)


def _configure_logging(verbose: int) -> None:
    level = logging.WARNING if verbose == 0 else logging.INFO if verbose == 1 else logging.DEBUG
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")


def _echo_table(table: Table) -> None:
    click.echo(format_table(table), nl=False)


@click.group()
@click.version_option(version=__version__, prog_name="derevb")
@click.option("-v", "--verbose", count=True, help="-v for progress, -vv for debug detail.")
def cli(verbose: int) -> None:
    """derevb: decoupled magnitude/phase speech dereverberation.

    Synthesize reverberant corpora, measure how magnitude and phase each
    contribute to quality, train the two-stage S2S -> RI2RI networks and
    enhance recordings with them.
    """
    _configure_logging(verbose)


@cli.command("synth-data")
@_out_dir_option
@click.option("--n", "n", type=click.IntRange(min=1), default=16, show_default=True)
@click.option("--rt60", type=float, default=0.5, show_default=True, help="RT60 in seconds.")
@click.option(
    "--rt60-max", type=float, default=None, help="Draw RT60 uniformly from [--rt60, --rt60-max]."
)
@click.option("--snr", type=float, default=20.0, show_default=True, help="SNR in dB.")
@click.option(
    "--noise", type=click.Choice(["white", "pink"]), default="white", show_default=True
)
@click.option("--duration", type=float, default=2.0, show_default=True, help="Seconds.")
@click.option(
    "--source", type=click.Choice(["pseudo-speech", "chirp"]), default="pseudo-speech", show_default=True
)
@click.option("--seed", type=int, default=0, show_default=True)
@_jobs_option
@_reports_errors
def synth_data(
    out_dir: Path,
    n: int,
    rt60: float,
    rt60_max: Optional[float],
    snr: float,
    noise: str,
    duration: float,
    source: str,
    seed: int,
    jobs: int,
) -> None:
    """Generate clean/reverberant/noisy WAV triples and their manifest."""
    settings = SynthSettings(
        n=n,
        rt60_s=(rt60, rt60 if rt60_max is None else rt60_max),
        snr_db=snr,
        noise_kind=noise,
        duration_s=duration,
        source=source,
        seed=seed,
    )
    manifest = synth_dataset(out_dir, settings, jobs)
    click.echo(f"Wrote {len(manifest)} utterances to {out_dir / 'manifest.jsonl'}")


@cli.command()
@_manifest_option
@_out_dir_option
@_config_option
@click.option("--dump-wavs", is_flag=True, help="Also write every variant as WAV.")
@_jobs_option
@_reports_errors
def analyze(
    manifest_path: Path, out_dir: Path, config_path: Optional[Path], dump_wavs: bool, jobs: int
) -> None:
    """Score the magnitude/phase swap variants of every utterance."""
    _require_files(manifest=manifest_path, config=config_path)
    config = load_config(config_path)
    manifest = read_manifest(manifest_path)
    result = run_swap_analysis(
        manifest, config.stft, config.metrics, jobs, out_dir / "variants" if dump_wavs else None
    )
    emit_jsonl(
        out_dir / "variants.jsonl",
        [
            {"id": utt, "variant": name, **to_record(report)}
            for utt, reports in result.per_utterance
            for name, report in reports.items()
        ],
    )
    table = result.table()
    emit_table(table, out_dir, "table_variants")
    _echo_table(table)


def _training_overrides(
    stage: str, steps: Optional[int], seed: Optional[int], force_joint: bool
) -> dict[str, Any]:
    training: dict[str, Any] = {"stage": STAGE_NAMES[stage]}
    if steps is not None:
        training["steps"] = steps
    if seed is not None:
        training["seed"] = seed
    if force_joint:
        training.update(force_joint_from_scratch=True, freeze_s2s=False, freeze_ri2ri=False)
    return {"training": training}


def _initial_bundle(config: DerevbConfig, init: Optional[Path]) -> ModelBundle:
    if init is None:
        return config.new_bundle()
    return load_bundle(init)


@cli.command()
@click.option("--stage", type=click.Choice(sorted(STAGE_NAMES)), required=True)
@_manifest_option
@_out_dir_option
@_config_option
@click.option(
    "--init",
    type=click.Path(dir_okay=False, path_type=Path),
    default=None,
    help="Start from this checkpoint instead of fresh networks.",
)
@click.option("--steps", type=click.IntRange(min=0), default=None, help="Override training.steps.")
@click.option("--seed", type=int, default=None, help="Override training.seed.")
@click.option(
    "--force-joint-from-scratch",
    is_flag=True,
    help="Train both networks end to end from fresh weights (known not to converge).",
)
@_jobs_option
@_reports_errors
def train(
    stage: str,
    manifest_path: Path,
    out_dir: Path,
    config_path: Optional[Path],
    init: Optional[Path],
    steps: Optional[int],
    seed: Optional[int],
    force_joint_from_scratch: bool,
    jobs: int,
) -> None:
    """Run one training stage and write out/model.ckpt plus out/train_log.jsonl."""
    _require_files(manifest=manifest_path, config=config_path, init=init)
    config = load_config(
        config_path, _training_overrides(stage, steps, seed, force_joint_from_scratch)
    )
    bundle = _initial_bundle(config, init)
    features = load_features(
        read_manifest(manifest_path), bundle.stft_cfg, bundle.n_freq, bundle.normalization, jobs
    )
    result = run_stage(config.training, bundle, features, out_dir, config.metrics)
    path = save_bundle(out_dir / "model.ckpt", result.bundle)
    losses = result.losses
    if losses:
        click.echo(f"Stage {config.training.stage}: loss {losses[0]:.4f} -> {losses[-1]:.4f}")
    click.echo(f"Wrote {path}")


@cli.command()
@_checkpoint_option
@_manifest_option
@_out_dir_option
@_config_option
@click.option("--steps", type=click.IntRange(min=0), default=None, help="Override training.steps.")
@_jobs_option
@_reports_errors
def ablate(
    checkpoint_path: Path,
    manifest_path: Path,
    out_dir: Path,
    config_path: Optional[Path],
    steps: Optional[int],
    jobs: int,
) -> None:
    """Fine-tune a pre-trained bundle under every freeze combination and compare."""
    _require_files(checkpoint=checkpoint_path, manifest=manifest_path, config=config_path)
    config = load_config(config_path, _training_overrides("finetune", steps, None, False))
    pretrained = load_bundle(checkpoint_path)
    features = load_features(
        read_manifest(manifest_path),
        pretrained.stft_cfg,
        pretrained.n_freq,
        pretrained.normalization,
        jobs,
    )
    result = run_ablation(
        pretrained, features, config.training, config.metrics, out_dir=out_dir, jobs=jobs
    )
    table = result.table()
    emit_table(table, out_dir, "table_ablation")
    _echo_table(table)


@cli.command()
@_checkpoint_option
@click.option(
    "--in",
    "in_path",
    required=True,
    type=click.Path(dir_okay=False, path_type=Path),
    help="Noisy reverberant WAV.",
)
@click.option(
    "--out", "out_path", required=True, type=click.Path(dir_okay=False, path_type=Path)
)
@_reports_errors
def enhance(checkpoint_path: Path, in_path: Path, out_path: Path) -> None:
    """Dereverberate one WAV file; the output keeps its length, rate and sample format."""
    _require_files(checkpoint=checkpoint_path, **{"in": in_path})
    bundle = load_bundle(checkpoint_path)
    noisy = read_wav(in_path)
    write_wav(out_path, two_stage_enhance(noisy, bundle), wav_subtype(in_path))
    click.echo(f"Wrote {out_path}")


@cli.command()
@click.option("--ref", type=click.Path(dir_okay=False, path_type=Path), default=None)
@click.option("--est", type=click.Path(dir_okay=False, path_type=Path), default=None)
@click.option(
    "--manifest",
    "manifest_path",
    type=click.Path(dir_okay=False, path_type=Path),
    default=None,
    help="Score every utterance instead of one pair.",
)
@click.option(
    "--enhanced-dir",
    "enhanced_dir",
    type=click.Path(file_okay=False, path_type=Path),
    default=None,
    help="With --manifest: score <id>.wav from this directory against each clean reference.",
)
@click.option(
    "--checkpoint",
    "checkpoint_path",
    type=click.Path(dir_okay=False, path_type=Path),
    default=None,
    help="With --manifest: score the enhanced output instead of the noisy input.",
)
@click.option("--out", "out_dir", type=click.Path(file_okay=False, path_type=Path), default=None)
@_config_option
@_jobs_option
@_reports_errors
def evaluate(
    ref: Optional[Path],
    est: Optional[Path],
    manifest_path: Optional[Path],
    enhanced_dir: Optional[Path],
    checkpoint_path: Optional[Path],
    out_dir: Optional[Path],
    config_path: Optional[Path],
    jobs: int,
) -> None:
    """Score estimates against their clean references.

    Either one --ref/--est pair, or a --manifest whose estimates are the noisy
    inputs, the WAVs in --enhanced-dir named by utterance id, or the output of
    --checkpoint.
    """
    _require_files(
        ref=ref, est=est, manifest=manifest_path, checkpoint=checkpoint_path, config=config_path
    )
    config = load_config(config_path)
    if manifest_path is None:
        if ref is None or est is None:
            raise InvalidInput("give --ref and --est, or --manifest", field="manifest")
        report = evaluate_pair(read_wav(ref), read_wav(est), config.metrics)
        click.echo(dumps_record(report))
        if out_dir is not None:
            emit_jsonl(out_dir / "metrics.jsonl", [report])
        return

    if out_dir is None:
        raise InvalidInput("--manifest needs --out", field="out")
    if enhanced_dir is not None and checkpoint_path is not None:
        raise InvalidInput("give --enhanced-dir or --checkpoint, not both", field="enhanced_dir")
    manifest = read_manifest(manifest_path)
    estimates = _enhanced_paths(manifest, enhanced_dir) if enhanced_dir is not None else None
    bundle = load_bundle(checkpoint_path) if checkpoint_path is not None else None
    triples = load_triples(manifest, jobs)

    def _score(triple: Triple) -> MetricsReport:
        if estimates is not None:
            estimate = read_wav(estimates[triple.id])
        elif bundle is not None:
            estimate = two_stage_enhance(triple.noisy, bundle)
        else:
            estimate = triple.noisy
        return evaluate_pair(triple.clean, estimate, config.metrics)

    reports = map_ordered(_score, triples, jobs)
    emit_jsonl(
        out_dir / "metrics.jsonl",
        [{"id": t.id, **to_record(r)} for t, r in zip(triples, reports)],
    )
    mean = MetricsReport.mean(reports)
    system = "unprocessed" if estimates is None and bundle is None else "enhanced"
    table = Table(
        "Mean metrics",
        ("system", "LLR", "CD", "SI-SDR", "fwSegSNR", "frames"),
        [(system, mean.llr, mean.cd, mean.si_sdr_db, mean.fw_snr_seg_db, mean.n_frames_scored)],
    )
    emit_table(table, out_dir, "table_metrics")
    _echo_table(table)


def _enhanced_paths(manifest: Manifest, enhanced_dir: Path) -> dict[str, Path]:
    """Map every manifest id to <enhanced_dir>/<id>.wav; all must exist."""
    if not enhanced_dir.is_dir():
        raise InvalidInput(f"{enhanced_dir} is not a directory", field="enhanced_dir")
    paths = {record.id: enhanced_dir / f"{record.id}.wav" for record in manifest.records}
    missing = sorted(utt for utt, path in paths.items() if not path.is_file())
    if missing:
        raise InvalidInput(
            f"no enhanced WAV for {len(missing)} utterance(s): {', '.join(missing)}",
            field="enhanced_dir",
        )
    return paths


@cli.command()
@_checkpoint_option
@_manifest_option
@_out_dir_option
@_config_option
@_jobs_option
@_reports_errors
def compare(
    checkpoint_path: Path, manifest_path: Path, out_dir: Path, config_path: Optional[Path], jobs: int
) -> None:
    """Score the unprocessed input and each stage combination of a bundle."""
    _require_files(checkpoint=checkpoint_path, manifest=manifest_path, config=config_path)
    config = load_config(config_path)
    bundle = load_bundle(checkpoint_path)
    triples = load_triples(read_manifest(manifest_path), jobs)
    table = comparison_table(compare_systems(bundle, triples, config.metrics, jobs))
    emit_table(table, out_dir, "table_systems")
    _echo_table(table)


if __name__ == "__main__":
    cli()
