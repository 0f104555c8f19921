"""Command-line entry point.

Subcommands: synth, augment, train, eval, ablate, gradcheck.  Every
run that writes outputs also writes the fully-resolved config snapshot
(``resolved_config.json``) so it can be replayed bit-identically.

Exit codes: 0 success, 1 validation/usage error, 2 runtime failure.
``AVLAB_NUM_WORKERS`` parallelizes dataset synthesis across processes;
sample ``i`` always comes from the same rng substream, so the output
bytes do not depend on the worker count.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import avdata, evalkit, pseudofake, trainloop
from .detector import load_checkpoint
from .errors import ConfigError, ContainerFormatError
from .rng import derive_seed, substream
from .tinynet import gradcheck

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_RUNTIME = 2


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors; the CLI contract wants 1
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error: {message}\n")
        raise SystemExit(EXIT_VALIDATION)


def _parse_override(text: str) -> tuple[list[str], object]:
    if "=" not in text:
        raise ConfigError(f"override must look like key.path=value, got {text!r}")
    key, raw = text.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.split("."), value


def _apply_override(tree: dict, path: list[str], value) -> None:
    node = tree
    for part in path[:-1]:
        if not isinstance(node, dict) or part not in node:
            raise ConfigError(f"override path {'.'.join(path)!r} does not exist in the config")
        node = node[part]
    if not isinstance(node, dict) or path[-1] not in node:
        raise ConfigError(f"override path {'.'.join(path)!r} does not exist in the config")
    node[path[-1]] = value


def load_config(args) -> trainloop.RunConfig:
    if args.config:
        raw = json.loads(Path(args.config).read_text())
        if not isinstance(raw, dict):
            raise ConfigError(f"config root must be a JSON object, got {type(raw).__name__}")
    else:
        raw = {}
    try:
        resolved = trainloop.RunConfig.from_dict(raw).to_dict()
    except TypeError as exc:
        raise ConfigError(f"bad config: {exc}") from exc
    for item in args.set or []:
        path, value = _parse_override(item)
        _apply_override(resolved, path, value)
    if args.seed is not None:
        resolved["seed"] = args.seed
    cfg = trainloop.RunConfig.from_dict(resolved)
    cfg.validate()
    return cfg


def _write_resolved(cfg: trainloop.RunConfig, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / "resolved_config.json").write_text(json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n")


# ------------------------------------------------------------------ datasets


def _synth_one(task) -> str:
    cfg_dict, split, i, n_fake_tail, total, out_dir, seed = task
    cfg = avdata.SynthConfig.from_dict(cfg_dict["synth"])
    rng = substream(seed, "sample", i)
    sid = f"{split}-{i:05d}"
    if i < total - n_fake_tail:
        pair = avdata.synth_real_pair(cfg, rng, source_id=sid)
    else:
        if split == "eval_fine_grained":
            chunk = pseudofake.ChunkParams(**cfg_dict["eval_data"]["fine_chunk"])
            pair = avdata.synth_fake_pair(cfg, "local_desync", rng, chunk=chunk, source_id=sid)
        else:
            mode = cfg_dict["train_data"]["fake_mode"] if split == "train" else "global_desync"
            chunk = None
            if mode == "local_desync":
                chunk = pseudofake.ChunkParams(**cfg_dict["eval_data"]["fine_chunk"])
            pair = avdata.synth_fake_pair(cfg, mode, rng, chunk=chunk, source_id=sid)
    path = Path(out_dir) / f"pair-{i:05d}.avtc"
    avdata.save_pair(path, pair)
    return str(path)


def cmd_synth(args) -> int:
    cfg = load_config(args)
    out = Path(args.out)
    _write_resolved(cfg, out)
    splits = {
        "train": (cfg.train_data.n, int(round(cfg.train_data.n * cfg.train_data.fake_fraction))),
        "eval_in_distribution": (cfg.eval_data.n, cfg.eval_data.n // 2),
        "eval_fine_grained": (cfg.eval_data.n, cfg.eval_data.n // 2),
    }
    cfg_dict = cfg.to_dict()
    tasks = []
    for split, (total, n_fake) in splits.items():
        split_dir = out / split
        split_dir.mkdir(parents=True, exist_ok=True)
        seed = derive_seed(cfg.seed, "dataset", split)
        for i in range(total):
            tasks.append((cfg_dict, split, i, n_fake, total, str(split_dir), seed))

    workers = int(os.environ.get("AVLAB_NUM_WORKERS", "1"))
    if workers > 1:
        import multiprocessing

        with multiprocessing.Pool(workers) as pool:
            pool.map(_synth_one, tasks)
    else:
        for task in tasks:
            _synth_one(task)

    manifest = {
        "splits": {name: {"n": total, "n_fake": n_fake} for name, (total, n_fake) in splits.items()},
        "seed": cfg.seed,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    print(f"wrote {len(tasks)} pairs under {out}")
    return EXIT_OK


def _load_dir(path: Path) -> list[avdata.AVPair]:
    files = sorted(path.glob("pair-*.avtc"))
    if not files:
        raise ConfigError(f"no pair-*.avtc files under {path}")
    return [avdata.load_pair(f) for f in files]


def cmd_augment(args) -> int:
    cfg = load_config(args)
    out = Path(args.out)
    _write_resolved(cfg, out)
    pairs = _load_dir(Path(args.data))
    donors = [p for p in pairs if p.label == "real"]

    fixed_spec = None
    if args.spec:
        fixed_spec = pseudofake.ManipulationSpec.from_dict(json.loads(Path(args.spec).read_text()))

    records = []
    counters: dict[str, int] = {}
    for i, pair in enumerate(pairs):
        if pair.label != "real":
            result = pair
        elif fixed_spec is not None:
            modality = args.modality
            clip = pair.visual if modality == "visual" else pair.audio
            donor_clip = None
            spec = pseudofake.ManipulationSpec.from_dict(fixed_spec.to_dict())
            if spec.kind == "replace":
                donor = donors[(i + 1) % len(donors)]
                donor_clip = donor.visual if modality == "visual" else donor.audio
                spec.donor_id = donor.meta.source_id
            manipulated = pseudofake.apply_manipulation(clip, spec, donor_clip)
            meta = avdata.PairMeta(source_id=pair.meta.source_id, origin="pseudo_fake")
            (meta.visual_manipulations if modality == "visual" else meta.audio_manipulations).append(spec)
            result = avdata.AVPair(
                visual=manipulated if modality == "visual" else pair.visual,
                audio=manipulated if modality == "audio" else pair.audio,
                label="fake",
                meta=meta,
            )
        else:
            rng = substream(cfg.seed, "augment-cli", i)
            result = trainloop.augment_sample(pair, donors, cfg, rng, counters)
        avdata.save_pair(out / f"pair-{i:05d}.avtc", result)
        records.append(
            {
                "source_id": result.meta.source_id,
                "label": result.label,
                "visual_manipulations": [s.to_dict() for s in result.meta.visual_manipulations],
                "audio_manipulations": [s.to_dict() for s in result.meta.audio_manipulations],
            }
        )
    (out / "specs.json").write_text(json.dumps(records, indent=2, sort_keys=True) + "\n")
    print(f"augmented {len(pairs)} pairs -> {out} ({counters or 'fixed spec'})")
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = load_config(args)
    out = Path(args.out)
    _write_resolved(cfg, out)
    if args.data:
        train_set = _load_dir(Path(args.data) / "train")
    else:
        train_set = avdata.make_pairs(
            cfg.synth,
            cfg.train_data.n,
            cfg.train_data.fake_fraction,
            cfg.train_data.fake_mode,
            seed=derive_seed(cfg.seed, "dataset", "train"),
            id_prefix="train",
        )
    cfg.checkpoint_dir = str(out)
    result = trainloop.train(cfg, train_set)
    print(
        f"trained {cfg.epochs} epochs; best epoch {result.best_epoch} "
        f"(loss {result.best_loss:.4f}); checkpoint in {out}"
    )
    return EXIT_OK


def cmd_eval(args) -> int:
    cfg = load_config(args)
    out = Path(args.out)
    _write_resolved(cfg, out)
    model, _ = load_checkpoint(args.checkpoint)
    policy = evalkit.SubsequencePolicy(length=cfg.synth.t_v)
    for split in evalkit.SPLITS:
        if args.data:
            eval_set = _load_dir(Path(args.data) / f"eval_{split}")
        else:
            eval_set = evalkit.make_split(
                cfg.synth,
                split,
                cfg.eval_data.n,
                seed=derive_seed(cfg.seed, "dataset", f"eval_{split}"),
                fine_chunk=cfg.eval_data.fine_chunk,
            )
        report = evalkit.evaluate(model, eval_set, policy)
        (out / f"report_{split}.json").write_text(report.to_json() + "\n")
        (out / f"report_{split}.txt").write_text(report.to_text() + "\n")
        print(f"{split}: AUC {report.auc:.4f} over {len(report.videos)} videos")
    return EXIT_OK


def cmd_ablate(args) -> int:
    cfg = load_config(args)
    out = Path(args.out)
    _write_resolved(cfg, out)
    values = json.loads(args.values) if args.values else None
    seeds = tuple(json.loads(args.seeds)) if args.seeds else (0, 1, 2)
    table = evalkit.ablation_run(cfg, args.axis, values=values, seeds=seeds)
    (out / f"ablation_{args.axis}.json").write_text(table.to_json() + "\n")
    (out / f"ablation_{args.axis}.txt").write_text(table.to_text() + "\n")
    print(table.to_text())
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    results = gradcheck.run_suite(seed=args.seed or 0, instances=args.instances)
    print(gradcheck.format_report(results))
    if not gradcheck.suite_passed(results):
        print("gradient check FAILED", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="avlab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out_required=True):
        p.add_argument("--config", help="JSON config file (RunConfig schema)")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="dotted-path config override, repeatable")
        if out_required:
            p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("synth", help="generate a synthetic dataset of container files")
    common(p)
    p.set_defaults(fn=cmd_synth)

    p = sub.add_parser("augment", help="apply manipulations to stored pairs")
    common(p)
    p.add_argument("--data", required=True, help="directory of pair-*.avtc files")
    p.add_argument("--spec", help="JSON file with one fixed ManipulationSpec")
    p.add_argument("--modality", choices=("visual", "audio"), default="visual",
                   help="modality for --spec mode")
    p.set_defaults(fn=cmd_augment)

    p = sub.add_parser("train", help="train a detector")
    common(p)
    p.add_argument("--data", help="dataset directory from `synth` (default: generate in memory)")
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on both synthetic splits")
    common(p)
    p.add_argument("--checkpoint", required=True, help="checkpoint.avtc path")
    p.add_argument("--data", help="dataset directory from `synth` (default: generate in memory)")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("ablate", help="run an ablation axis")
    common(p)
    p.add_argument("--axis", required=True, choices=evalkit.AXES)
    p.add_argument("--values", help="JSON list of axis values")
    p.add_argument("--seeds", help="JSON list of seeds (default [0, 1, 2])")
    p.set_defaults(fn=cmd_ablate)

    p = sub.add_parser("gradcheck", help="finite-difference check of all ops and the tiny model")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--instances", type=int, default=20)
    p.set_defaults(fn=cmd_gradcheck)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, ContainerFormatError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
