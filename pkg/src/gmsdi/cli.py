"""Command-line entry point: ``gmsdi <command> [flags]``.

Every command writes its outputs plus a ``run.json`` manifest into
``--out``. Relative ``--out`` paths are resolved under ``$GMSDI_OUTPUT_ROOT``
when it is set. ``--config FILE`` (a JSON object keyed by flag name) is
applied after command-line parsing, so its values win.

Failures print one line on stderr::

    gmsdi: error category=<name> exit=<code> message="<text>"

and exit with the code from :data:`EXIT_CODES`.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import shutil
import sys
import warnings
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import __version__
from .core import AudioTensor, Partition, build_sigma_schedule, mix
from .data_io import (
    DEFAULT_CLIP_LENGTH,
    evaluation_clips,
    load_manifest,
    synth_dataset,
    training_pairs,
    wav_read,
    wav_write,
)
from .errors import ConfigurationError, FormatError, GmsdiError
from .eval import (
    EXTRACTOR,
    evaluate_estimates,
    eval_document,
    format_grid_table,
    format_separation_table,
    grid_search_w,
    plot_grid,
    plot_separation,
    tasks_from_manifest,
    write_json,
)
from .inference import (
    INFINITE,
    GammaConfig,
    MatchedCoupling,
    PartialGenConfig,
    SeparationTask,
    SigmaScaled,
    extract,
    negative_prompts,
    partial_generate,
    rejection_by_norm,
    separate,
    total_generate_partition,
)
from .runs import RUN_NAME, RunManifest, hash_outputs, now_iso
from .samplers import ADPM2, EULER_ANCESTRAL, IntegratorConfig
from .score_model import W_GRID, CfgConfig, LabelEncoder, SourceSpec, SpectralDenoiser, TrainConfig, train_denoiser
from .score_model.denoiser import file_sha256

log = logging.getLogger("gmsdi")

OUTPUT_ROOT_ENV = "GMSDI_OUTPUT_ROOT"

EXIT_CODES = {
    "ok": 0,
    "internal": 1,
    "usage": 2,
    "config": 3,
    "schedule": 4,
    "vocabulary": 5,
    "format": 6,
    "io": 7,
    "divergence": 8,
    "training": 9,
    "nonfinite": 10,
    "dimension": 11,
    "metric": 12,
    "degenerate": 13,
    "replay": 14,
}

# flags that never enter the run config
_TRANSIENT = {"func", "config", "log_level"}


class UsageError(Exception):
    pass


class ReplayMismatch(GmsdiError):
    category = "replay"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# -- flag parsing helpers ----------------------------------------------------


def parse_gamma(text: str):
    """``infinite`` | ``matched`` | ``sigma:<c>`` (gamma^2 = c sigma^2) | positive constant."""
    t = str(text).strip().lower()
    if t in ("inf", "infinite"):
        return INFINITE
    if t == "matched":
        return MatchedCoupling()
    bad = ConfigurationError(f"cannot parse gamma {text!r}; use infinite, matched, sigma[:c] or a number")
    if t.startswith("sigma"):
        _, _, c = t.partition(":")
        try:
            return SigmaScaled(float(c) if c else 1.0)
        except ValueError:
            raise bad from None
    try:
        value = float(t)
    except ValueError:
        raise bad from None
    if not value > 0:
        raise ConfigurationError(f"gamma^2 must be positive, got {value}")
    return value


def parse_partition(text: str | None, k: int) -> Partition:
    """``"0+1,2"`` groups sources 0 and 1 into one subset and keeps 2 alone."""
    if not text:
        return Partition.singletons(k)
    try:
        subsets = [tuple(int(i) for i in part.split("+")) for part in text.split(",")]
    except ValueError:
        raise ConfigurationError(f"cannot parse partition {text!r}") from None
    p = Partition(subsets, k)
    return p


def _labels(text: str) -> list[str]:
    return [s.strip().lower() for s in text.split(",") if s.strip()]


def _negatives(encoder: LabelEncoder, spec: str):
    spec = (spec or "none").strip().lower()
    if spec == "none":
        return {}
    if spec == "all":
        return negative_prompts(encoder)
    return negative_prompts(encoder, _labels(spec))


def _out_dir(args) -> Path:
    out = Path(args.out)
    root = os.environ.get(OUTPUT_ROOT_ENV)
    if root and not out.is_absolute():
        out = Path(root) / out
    out.mkdir(parents=True, exist_ok=True)
    return out


def _require_file(path: str | None, what: str) -> Path:
    if not path:
        raise ConfigurationError(f"{what} is required")
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"{what} not found: {p}")
    return p


def _load_model(args) -> tuple[SpectralDenoiser, str]:
    path = _require_file(args.model, "--model")
    return SpectralDenoiser.load(path), file_sha256(path)


def _schedule(args, model):
    lo = args.sigma_min if args.sigma_min is not None else model.sigma_min
    hi = args.sigma_max if args.sigma_max is not None else model.sigma_max
    return build_sigma_schedule(lo, hi, args.rho, args.steps)


def _sampler(args) -> IntegratorConfig:
    return IntegratorConfig(kind=args.sampler, s_churn=args.s_churn, s_noise=args.s_noise, rng_seed=args.seed)


def _cfg(args, encoder, negatives=None) -> CfgConfig | None:
    if args.w == 0:
        return None
    return CfgConfig(args.w, encoder.unconditional(), negatives or {})


# -- commands -------------------------------------------------------------------


def cmd_synth_data(args, run: RunManifest) -> str:
    out = _out_dir(args)
    manifest = synth_dataset(
        _labels(args.vocabulary), args.n_clips, args.clip_length, args.sample_rate, args.seed, out,
        n_sources=args.n_sources, write_stems=not args.no_stems,
    )
    run.seeds = {"data": args.seed}
    return f"wrote {len(manifest.clips)} clips to {out}\n"


def cmd_train(args, run: RunManifest) -> str:
    manifest = load_manifest(_require_file(args.data, "--data"))
    out = _out_dir(args)
    encoder = LabelEncoder(manifest.vocabulary, dim=args.embed_dim, seed=args.embed_seed)
    config = TrainConfig(hidden=args.hidden, n_bands=args.n_bands, lr=args.lr, batch_size=args.batch_size,
                         cond_dropout=args.cond_dropout, seed=args.seed)
    schedule = build_sigma_schedule(args.sigma_min, args.sigma_max, 1.0, 2)
    model = train_denoiser(training_pairs(manifest), schedule, args.epochs, config, encoder)
    sha = model.save(out / "model.npz")
    run.seeds = {"train": args.seed, "embedding": args.embed_seed}
    run.checkpoint_sha256 = sha
    hist = model.history
    first, last = (f"{hist[0]:.5f}", f"{hist[-1]:.5f}") if hist else ("n/a", "n/a")
    return f"epochs\t{args.epochs}\nfirst_epoch_loss\t{first}\nfinal_epoch_loss\t{last}\ncheckpoint\t{out / 'model.npz'}\nsha256\t{sha}\n"


def cmd_generate(args, run: RunManifest) -> str:
    model, sha = _load_model(args)
    enc = model.encoder
    specs = [SourceSpec.from_labels(s, enc) for s in args.sources]
    partition = parse_partition(args.partition, len(specs))
    gamma = GammaConfig(parse_gamma(args.gamma_x), parse_gamma(args.gamma_y))
    schedule = _schedule(args, model)
    cfg = _cfg(args, enc, _negatives(enc, args.negatives))
    out = _out_dir(args)
    candidates = []
    for c in range(args.candidates):
        sampler = IntegratorConfig(kind=args.sampler, s_churn=args.s_churn, s_noise=args.s_noise, rng_seed=args.seed + c)
        parts, y = total_generate_partition(partition, specs, gamma, model, schedule, sampler, cfg,
                                            length=args.length, sample_rate=args.sample_rate, encoder=enc)
        candidates.append((parts, y))
    best, _ = rejection_by_norm([mix(parts) for parts, _ in candidates])
    parts, y = candidates[best]
    names = []
    for m, (subset, x) in enumerate(zip(partition.subsets, parts)):
        label = "+".join("_".join(specs[j].labels) for j in subset)
        name = f"source_{m}_{label}.wav"
        wav_write(out / name, x)
        names.append(name)
    wav_write(out / "mixture.wav", mix(parts))
    wav_write(out / "mixture_trajectory.wav", y)
    run.seeds = {"sampler": args.seed, "candidates": args.candidates, "selected": args.seed + best}
    run.schedule = schedule.as_dict()
    run.checkpoint_sha256 = sha
    res = np.linalg.norm(y.samples - mix(parts).samples) / (np.linalg.norm(y.samples) + 1e-12)
    return "\n".join(names + [f"mixture.wav", f"residual\t{res:.4g}"]) + "\n"


def _parse_given(items: Sequence[str]) -> list[tuple[Path, list[str]]]:
    out = []
    for item in items:
        path, sep, labels = item.rpartition(":")
        if not sep or not path:
            raise ConfigurationError(f"--given expects PATH:labels, got {item!r}")
        out.append((_require_file(path, "--given file"), _labels(labels)))
    return out


def cmd_accompany(args, run: RunManifest) -> str:
    model, sha = _load_model(args)
    enc = model.encoder
    given_files = _parse_given(args.given)
    given = [(wav_read(p), SourceSpec.from_labels(l, enc)) for p, l in given_files]
    wanted = [SourceSpec.from_labels(s, enc) for s in args.wanted]
    gamma = GammaConfig(parse_gamma(args.gamma_x), parse_gamma(args.gamma_y))
    schedule = _schedule(args, model)
    cfg = _cfg(args, enc, _negatives(enc, args.negatives))
    out = _out_dir(args)
    with warnings.catch_warnings():
        warnings.simplefilter("always")
        xs = partial_generate(given, wanted, PartialGenConfig(args.alpha, args.beta), gamma, model, schedule,
                              _sampler(args), cfg, encoder=enc)
    lines = []
    for i, (p, labels) in enumerate(given_files):
        name = f"given_{i}_{'_'.join(labels)}.wav"
        shutil.copyfile(p, out / name)
        lines.append(name)
    for j, (spec, x) in enumerate(zip(wanted, xs)):
        name = f"wanted_{j}_{'_'.join(spec.labels)}.wav"
        wav_write(out / name, x)
        lines.append(name)
    wav_write(out / "mixture.wav", mix([g for g, _ in given] + list(xs)))
    run.seeds = {"sampler": args.seed}
    run.schedule = schedule.as_dict()
    run.checkpoint_sha256 = sha
    return "\n".join(lines + ["mixture.wav"]) + "\n"


def _jobs(args) -> list[tuple[str | None, AudioTensor, list[str]]]:
    """(clip id, mixture, labels) for ``--mixture`` or every clip of ``--data``."""
    if args.data:
        manifest = load_manifest(_require_file(args.data, "--data"))
        jobs = [(c.id, wav_read(manifest.path(c.mixture)), list(c.labels)) for c in manifest.clips]
        return jobs[: args.limit] if args.limit else jobs
    path = _require_file(args.mixture, "--mixture (or --data)")
    if not args.labels:
        raise ConfigurationError("--labels is required with --mixture")
    return [(None, wav_read(path), [l.lower() for l in args.labels])]


def cmd_separate(args, run: RunManifest) -> str:
    model, sha = _load_model(args)
    enc = model.encoder
    jobs = _jobs(args)
    schedule = _schedule(args, model)
    cfg = _cfg(args, enc, _negatives(enc, args.negatives))
    out = _out_dir(args)
    lines = []
    for clip_id, y, labels in jobs:
        specs = [SourceSpec.from_labels([l], enc) for l in labels]
        if args.constrained:
            if args.constrained.lower() not in labels:
                raise ConfigurationError(f"constrained source {args.constrained!r} is not among {labels}")
            idx = labels.index(args.constrained.lower())
        else:
            idx = len(labels) - 1
        estimates = separate(SeparationTask(y, specs, idx), model, schedule, _sampler(args), cfg)
        target = out / clip_id if clip_id else out
        target.mkdir(exist_ok=True)
        for label, est in zip(labels, estimates):
            wav_write(target / f"{label}.wav", est)
        lines.append(f"{clip_id or '-'}\t{','.join(labels)}\tconstrained={labels[idx]}")
    run.seeds = {"sampler": args.seed}
    run.schedule = schedule.as_dict()
    run.checkpoint_sha256 = sha
    return "\n".join(lines) + "\n"


def cmd_extract(args, run: RunManifest) -> str:
    model, sha = _load_model(args)
    enc = model.encoder
    jobs = _jobs(args)
    schedule = _schedule(args, model)
    cfg = _cfg(args, enc, _negatives(enc, args.negatives))
    out = _out_dir(args)
    lines = []
    for clip_id, y, labels in jobs:
        targets = [args.target.lower()] if args.target else labels
        target_dir = out / clip_id if clip_id else out
        target_dir.mkdir(exist_ok=True)
        for k, label in enumerate(targets):
            complement = _labels(args.complement) if args.complement else [l for l in labels if l != label]
            est = extract(y, SourceSpec.from_labels([label], enc), complement, model, schedule, _sampler(args), cfg,
                          encoder=enc, stream=k)
            wav_write(target_dir / f"{label}.wav", est)
            lines.append(f"{clip_id or '-'}\t{label}\tcomplement={','.join(complement)}")
    run.seeds = {"sampler": args.seed}
    run.schedule = schedule.as_dict()
    run.checkpoint_sha256 = sha
    return "\n".join(lines) + "\n"


def cmd_gridsearch(args, run: RunManifest) -> str:
    model, sha = _load_model(args)
    enc = model.encoder
    manifest = load_manifest(_require_file(args.data, "--data"))
    tasks = tasks_from_manifest(manifest, args.limit)
    schedule = _schedule(args, model)
    out = _out_dir(args)
    report = grid_search_w(
        tasks, args.w_grid, args.variants, model=model, schedule=schedule, sampler_config=_sampler(args),
        encoder=enc, negatives=_negatives(enc, args.negatives),
        extractor_negatives=_negatives(enc, args.extractor_negatives),
        progress=lambda msg: log.info(msg),
    )
    report.settings = {"schedule": schedule.as_dict(), "sampler": _sampler(args).as_dict(), "tasks": len(tasks),
                       "data": str(args.data)}
    table = format_grid_table(report)
    write_json(out / "grid.json", _json_safe(report.as_dict()))
    (out / "grid.txt").write_text(table)
    plot_grid(report, out / "grid.png")
    run.seeds = {"sampler": args.seed}
    run.schedule = schedule.as_dict()
    run.checkpoint_sha256 = sha
    return table


def cmd_eval(args, run: RunManifest) -> str:
    manifest = load_manifest(_require_file(args.data, "--data"))
    est_dir = _require_file(args.estimates, "--estimates")
    out = _out_dir(args)
    ref = str(Path(est_dir) / RUN_NAME) if (Path(est_dir) / RUN_NAME).exists() else None
    ours, oracle, rows = evaluate_estimates(est_dir, manifest, ref)
    reports = {"estimates": ours, "bandpass oracle": oracle}
    table = format_separation_table(reports)
    write_json(out / "eval.json", eval_document(ours, oracle, rows))
    (out / "eval.txt").write_text(table)
    plot_separation(reports, out / "eval.png")
    return table


def cmd_replay(args, run: RunManifest) -> str:
    source = RunManifest.load(_require_file(args.manifest, "manifest"))
    if source.command == "replay":
        raise ConfigurationError("cannot replay a replay")
    config = dict(source.config)
    config["out"] = args.out
    argv = _argv_from_config(source.command, config)
    code = main(argv)
    if code != 0:
        raise ReplayMismatch(f"replayed command exited with {code}")
    fresh = hash_outputs(_out_dir(args))
    if fresh != source.outputs:
        differing = sorted(k for k in set(fresh) | set(source.outputs) if fresh.get(k) != source.outputs.get(k))
        raise ReplayMismatch(f"outputs differ from the recorded run: {', '.join(differing)}")
    run.config = {"manifest": str(Path(args.manifest).resolve()), "out": args.out}
    return f"replay of {source.command} reproduced {len(fresh)} files bit-identically\n"


# -- parser ---------------------------------------------------------------------


def _sampler_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("sampling")
    g.add_argument("--model", help="checkpoint written by 'gmsdi train'")
    g.add_argument("--sampler", choices=[EULER_ANCESTRAL, ADPM2])
    g.add_argument("--steps", type=int)
    g.add_argument("--rho", type=float)
    g.add_argument("--sigma-min", type=float, default=None)
    g.add_argument("--sigma-max", type=float, default=None)
    g.add_argument("--s-churn", type=float)
    g.add_argument("--s-noise", type=float, default=1.0)
    g.add_argument("--w", type=float, help="guidance scale; 0 disables guidance")
    g.add_argument("--negatives", help="labels whose negative prompts replace the unconditional reference "
                                      "(comma list, 'all' or 'none')")


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--out", help="output directory (under $%s when relative)" % OUTPUT_ROOT_ENV)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--config", help="JSON file of flag values; overrides the command line")
    common.add_argument("--log-level", default="WARNING")

    parser = _Parser(prog="gmsdi", description="Compositional generation and separation with mixture-trained score models.")
    parser.add_argument("--version", action="version", version=f"gmsdi {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth-data", parents=[common], help="synthesize the band-disjoint toy dataset")
    p.add_argument("--vocabulary", default="bass,drums,guitar,piano")
    p.add_argument("--n-clips", type=int, default=500)
    p.add_argument("--clip-length", type=int, default=DEFAULT_CLIP_LENGTH)
    p.add_argument("--sample-rate", type=int, default=8000)
    p.add_argument("--n-sources", type=int, default=None, help="sources per clip (default: random 1..K)")
    p.add_argument("--no-stems", action="store_true", help="write mixtures only")
    p.set_defaults(func=cmd_synth_data, out="dataset")

    p = sub.add_parser("train", parents=[common], help="train the toy denoiser on mixtures and labels")
    p.add_argument("--data", help="dataset manifest or directory")
    p.add_argument("--epochs", type=int, default=120)
    p.add_argument("--lr", type=float, default=TrainConfig.lr)
    p.add_argument("--hidden", type=int, default=TrainConfig.hidden)
    p.add_argument("--n-bands", type=int, default=TrainConfig.n_bands)
    p.add_argument("--batch-size", type=int, default=TrainConfig.batch_size)
    p.add_argument("--cond-dropout", type=float, default=TrainConfig.cond_dropout)
    p.add_argument("--embed-dim", type=int, default=32)
    p.add_argument("--embed-seed", type=int, default=0)
    p.add_argument("--sigma-min", type=float, default=1e-4)
    p.add_argument("--sigma-max", type=float, default=1.0)
    p.set_defaults(func=cmd_train, out="model")

    p = sub.add_parser("generate", parents=[common], help="total (or partition) generation")
    _sampler_flags(p)
    p.add_argument("--sources", nargs="+", required=True, help="one label list per source, e.g. bass piano")
    p.add_argument("--partition", help="group sources into subsets, e.g. '0+1,2'")
    p.add_argument("--gamma-x", default="matched")
    p.add_argument("--gamma-y", default="infinite")
    p.add_argument("--length", type=int, default=DEFAULT_CLIP_LENGTH)
    p.add_argument("--sample-rate", type=int, default=8000)
    p.add_argument("--candidates", type=int, default=1, help="draws to choose from by largest mixture norm")
    p.set_defaults(func=cmd_generate, out="generate", sampler=ADPM2, steps=600, rho=1.0, s_churn=0.0, w=0.0,
                   negatives="none")

    p = sub.add_parser("accompany", parents=[common], help="partial generation around given sources")
    _sampler_flags(p)
    p.add_argument("--given", action="append", required=True, help="PATH:labels, repeatable")
    p.add_argument("--wanted", nargs="+", required=True)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--gamma-x", default="matched")
    p.add_argument("--gamma-y", default="matched")
    p.set_defaults(func=cmd_accompany, out="accompany", sampler=ADPM2, steps=300, rho=1.0, s_churn=0.0, w=0.0,
                   negatives="none")

    for name, func, help_text in (("separate", cmd_separate, "separator with one constrained source"),
                                  ("extract", cmd_extract, "extract sources against their complement")):
        p = sub.add_parser(name, parents=[common], help=help_text)
        _sampler_flags(p)
        p.add_argument("--mixture", help="mixture WAV")
        p.add_argument("--labels", nargs="+", help="labels of the sources in the mixture")
        p.add_argument("--data", help="process every clip of a dataset manifest instead")
        p.add_argument("--limit", type=int, default=None)
        if name == "separate":
            p.add_argument("--constrained", help="constrained source label (default: last listed)")
            p.set_defaults(func=func, out=name, sampler=EULER_ANCESTRAL, steps=150, rho=7.0, s_churn=20.0, w=3.0,
                           negatives="none")
        else:
            p.add_argument("--target", help="label to extract (default: every label)")
            p.add_argument("--complement", help="comma list of complement labels (default: the other labels)")
            p.set_defaults(func=func, out=name, sampler=EULER_ANCESTRAL, steps=150, rho=7.0, s_churn=20.0, w=7.5,
                           negatives="bass,drums")

    p = sub.add_parser("gridsearch", parents=[common], help="guidance-scale grid over separator variants")
    _sampler_flags(p)
    p.add_argument("--data", help="evaluation manifest with stems")
    p.add_argument("--w-grid", type=float, nargs="+", default=list(W_GRID))
    p.add_argument("--variants", nargs="+", default=None,
                   help="'extractor' and/or 'separator:<label>' (default: all)")
    p.add_argument("--extractor-negatives", default="bass,drums")
    p.add_argument("--limit", type=int, default=None)
    p.set_defaults(func=cmd_gridsearch, out="gridsearch", sampler=EULER_ANCESTRAL, steps=150, rho=7.0,
                   s_churn=20.0, w=0.0, negatives="none")

    p = sub.add_parser("eval", parents=[common], help="SI-SDRi report for a directory of estimates")
    p.add_argument("--estimates", help="directory laid out as <clip id>/<label>.wav")
    p.add_argument("--data", help="evaluation manifest with stems")
    p.set_defaults(func=cmd_eval, out="eval")

    p = sub.add_parser("replay", parents=[common], help="re-run a recorded job and verify its outputs")
    p.add_argument("manifest", help="run.json or the directory holding it")
    p.set_defaults(func=cmd_replay, out="replay")
    return parser


# -- config handling ----------------------------------------------------------


def _apply_config(args: argparse.Namespace, parser: argparse.ArgumentParser) -> argparse.Namespace:
    if not args.config:
        return args
    path = _require_file(args.config, "--config")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"invalid JSON: {exc}", field="json", path=str(path)) from exc
    if not isinstance(data, dict):
        raise FormatError("config must be a JSON object", field="json", path=str(path))
    for key, value in data.items():
        dest = key.replace("-", "_")
        if dest in _TRANSIENT or dest == "command" or not hasattr(args, dest):
            raise ConfigurationError(f"unknown config key {key!r} for command {args.command}")
        setattr(args, dest, value)
    return args


def _config_snapshot(args: argparse.Namespace) -> dict:
    snap = {k: v for k, v in vars(args).items() if k not in _TRANSIENT and k != "command"}
    for key in ("data", "model", "mixture", "estimates", "manifest"):
        if snap.get(key):
            snap[key] = str(Path(snap[key]).resolve())
    if snap.get("given"):
        snap["given"] = [str(Path(g.rpartition(":")[0]).resolve()) + ":" + g.rpartition(":")[2] for g in snap["given"]]
    return snap


def _argv_from_config(command: str, config: dict) -> list[str]:
    argv = [command]
    positional = {"manifest"}
    for key, value in config.items():
        if value is None or value is False:
            continue
        if key in positional:
            argv.append(str(value))
            continue
        flag = "--" + key.replace("_", "-")
        if value is True:
            argv.append(flag)
        elif isinstance(value, list):
            if key == "given":
                for v in value:
                    argv += [flag, str(v)]
            else:
                argv += [flag, *map(str, value)]
        else:
            argv += [flag, repr(value) if isinstance(value, float) else str(value)]
    return argv


def _json_safe(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    return obj


def _fail(category: str, message: str) -> int:
    code = EXIT_CODES.get(category, EXIT_CODES["internal"])
    print(f"gmsdi: error category={category} exit={code} message={json.dumps(message)}", file=sys.stderr)
    return code


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        args = _apply_config(args, parser)
        logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.WARNING),
                            format="%(levelname)s %(name)s: %(message)s")
        run = RunManifest(args.command, _config_snapshot(args))
        text = args.func(args, run)
        out = _out_dir(args)
        if args.command != "replay":
            run.outputs = hash_outputs(out)
        run.finished = now_iso()
        run.write(out)
    except UsageError as exc:
        return _fail("usage", str(exc))
    except GmsdiError as exc:
        return _fail(exc.category, str(exc))
    except (FileNotFoundError, PermissionError, IsADirectoryError, NotADirectoryError) as exc:
        return _fail("io", str(exc))
    except OSError as exc:
        return _fail("io", str(exc))
    sys.stdout.write(text)
    return 0


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
