"""Command-line surface: train / eval / augment / corrupt.

Every command writes a manifest JSON capturing the resolved flags before
doing any work, so a run can be reproduced exactly by replaying the
manifest (``--manifest run.json``). The SPECSWAP_SEED environment
variable overrides ``--seed`` when set.

Budgets accept both decimals and the ``k/255`` literal form.
"""

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .attacks import AttackConfig
from .corruptions import CORRUPTION_TYPES, corrupt_dataset
from .data import Dataset, load_cifar_batch, load_dataset, save_dataset, synth_generate
from .evaluation import emit_report, full_report
from .harness import Regime, TrainConfig, records_to_csv, train
from .model import load_model, save_model
from .spectral import adversarial_amplitude_swap
from . import attacks as atk

REGIME_NAMES = tuple(r.value for r in Regime)


def parse_eps(text: str) -> float:
    """Accept '8/255' literals and plain decimals."""
    text = str(text).strip()
    if "/" in text:
        num, den = text.split("/", 1)
        value = float(num) / float(den)
    else:
        value = float(text)
    if not 0.0 <= value <= 1.0:
        raise argparse.ArgumentTypeError(f"eps {text!r} outside [0, 1]")
    return value


def _add_attack_flags(parser, eps_default="8/255"):
    parser.add_argument("--attack", choices=("fgsm", "pgd"), default="fgsm")
    parser.add_argument("--norm", choices=("linf", "l2"), default="linf")
    parser.add_argument("--eps", type=parse_eps, default=parse_eps(eps_default))
    parser.add_argument("--alpha", type=parse_eps, default=None,
                        help="PGD step size (PGD only)")
    parser.add_argument("--iters", type=int, default=None,
                        help="PGD iteration count (PGD only)")
    parser.add_argument("--rand-start", action=argparse.BooleanOptionalAction,
                        default=None, help="PGD random start (PGD only)")


def _add_data_flags(parser):
    parser.add_argument("--data", default="synth",
                        help="'synth', 'cifar:<path>', or a native .sswd file")
    parser.add_argument("--test-data", default=None,
                        help="held-out set; defaults to a synth test split or "
                             "a 90/10 split of --data")
    parser.add_argument("--classes", type=int, default=4)
    parser.add_argument("--per-class", type=int, default=150)
    parser.add_argument("--test-per-class", type=int, default=50)
    parser.add_argument("--image-size", type=int, default=16)


def _add_common_flags(parser):
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out-dir", default="runs")
    parser.add_argument("--manifest", default=None,
                        help="load flag values from a previous run's manifest")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="specswap",
        description="Amplitude-swap data augmentation pipeline")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train a classifier under a regime")
    p_train.add_argument("--regime", choices=REGIME_NAMES, default="c_aa")
    _add_attack_flags(p_train)
    p_train.add_argument("--epochs", type=int, default=40)
    p_train.add_argument("--batch", type=int, default=64)
    p_train.add_argument("--lr", type=float, default=0.01)
    p_train.add_argument("--momentum", type=float, default=0.9)
    p_train.add_argument("--wd", type=float, default=5e-4)
    p_train.add_argument("--no-augment", action="store_true",
                         help="disable random crop + horizontal flip")
    _add_data_flags(p_train)
    _add_common_flags(p_train)

    p_eval = sub.add_parser("eval", help="evaluate a checkpoint on the full grid")
    p_eval.add_argument("--checkpoint", required=False)
    p_eval.add_argument("--format", choices=("csv", "json"), default="csv")
    p_eval.add_argument("--jobs", type=int, default=1,
                        help="parallel evaluation workers")
    p_eval.add_argument("--regime-label", default="")
    _add_data_flags(p_eval)
    _add_common_flags(p_eval)

    p_aug = sub.add_parser("augment",
                           help="write adversarial / swapped datasets")
    p_aug.add_argument("--checkpoint", required=False)
    _add_attack_flags(p_aug)
    _add_data_flags(p_aug)
    _add_common_flags(p_aug)

    p_cor = sub.add_parser("corrupt", help="write the 7x5 corruption suite")
    _add_data_flags(p_cor)
    _add_common_flags(p_cor)
    return parser


def _strip_manifest_flag(argv, command):
    tail, skip = [], False
    for i, token in enumerate(argv):
        if skip:
            skip = False
            continue
        if token == "--manifest":
            skip = True
            continue
        if token.startswith("--manifest="):
            continue
        if i == 0 and token == command:
            continue
        tail.append(token)
    return tail


def _resolve_args(argv):
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "manifest", None):
        with open(args.manifest) as fh:
            stored = json.load(fh)
        merged = [stored["command"]]
        for key, value in stored["flags"].items():
            if isinstance(value, bool):
                if key == "rand_start":
                    merged.append("--rand-start" if value else "--no-rand-start")
                elif value:
                    merged.append("--" + key.replace("_", "-"))
            elif value is not None:
                merged.extend(["--" + key.replace("_", "-"), str(value)])
        # flags given explicitly alongside --manifest win over stored ones
        merged.extend(_strip_manifest_flag(list(argv), stored["command"]))
        args = parser.parse_args(merged)
    if os.environ.get("SPECSWAP_SEED"):
        args.seed = int(os.environ["SPECSWAP_SEED"])
    return args


def _manifest_flags(args):
    skip = {"command", "manifest"}
    return {key: value for key, value in sorted(vars(args).items())
            if key not in skip}


def _write_manifest(args, out_dir: Path, name="manifest.json"):
    manifest = {"command": args.command, "version": __version__,
                "flags": _manifest_flags(args)}
    path = out_dir / name
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _attack_config(args) -> AttackConfig:
    if args.attack == "fgsm":
        for flag, name in ((args.alpha, "--alpha"), (args.iters, "--iters"),
                           (args.rand_start, "--rand-start")):
            if flag is not None:
                raise SystemExit(f"error: {name} only applies to --attack pgd")
        return AttackConfig("fgsm", args.norm, args.eps, seed=args.seed)
    alpha = args.alpha if args.alpha is not None else (
        0.1 if args.norm == "l2" else 2.0 / 255.0)
    iters = args.iters if args.iters is not None else 10
    rand_start = args.rand_start if args.rand_start is not None else True
    return AttackConfig("pgd", args.norm, args.eps, alpha, iters, rand_start,
                        seed=args.seed)


def _load_sets(args):
    if args.data == "synth":
        train_set = synth_generate(args.classes, args.per_class,
                                   args.image_size, args.seed, split="train")
        test_set = synth_generate(args.classes, args.test_per_class,
                                  args.image_size, args.seed, split="test")
        if args.test_data:
            test_set = _load_one(args.test_data)
        return train_set, test_set
    full = _load_one(args.data)
    if args.test_data:
        return full, _load_one(args.test_data)
    cut = max(1, int(0.9 * len(full)))
    return full.subset(np.arange(cut)), full.subset(np.arange(cut, len(full)))


def _load_one(source) -> Dataset:
    source = str(source)
    if source.startswith("cifar:"):
        return load_cifar_batch(source[len("cifar:"):])
    return load_dataset(source)


def cmd_train(args):
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_manifest(args, out_dir)
    attack_config = _attack_config(args)
    train_set, test_set = _load_sets(args)
    cfg = TrainConfig(epochs=args.epochs, batch_size=args.batch, lr=args.lr,
                      momentum=args.momentum, weight_decay=args.wd,
                      seed=args.seed, augment=not args.no_augment)
    model, records = train(Regime(args.regime), train_set, test_set, cfg,
                           attack_config)
    save_model(model, out_dir / "checkpoint.sswm")
    records_to_csv(records, out_dir / "epochs.csv")
    print(f"wrote {out_dir / 'checkpoint.sswm'} ({len(records)} epochs)")
    return 0


def cmd_eval(args):
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_manifest(args, out_dir, "eval_manifest.json")
    if not args.checkpoint:
        raise SystemExit("error: --checkpoint is required for eval")
    model = load_model(args.checkpoint)
    _, test_set = _load_sets(args)
    report = full_report(model, test_set, regime=args.regime_label,
                         seed=args.seed, corruption_seed=args.seed,
                         metadata={"checkpoint": str(args.checkpoint)},
                         jobs=args.jobs)
    path = out_dir / f"report.{args.format}"
    emit_report([report], path, args.format)
    print(f"wrote {path}")
    return 0


def cmd_augment(args):
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_manifest(args, out_dir, "augment_manifest.json")
    if not args.checkpoint:
        raise SystemExit("error: --checkpoint is required for augment")
    model = load_model(args.checkpoint)
    _, dataset = _load_sets(args)
    attack_config = _attack_config(args)
    adv = np.empty_like(dataset.images)
    for start in range(0, len(dataset), 256):
        adv[start:start + 256] = atk.attack(
            model, dataset.images[start:start + 256],
            dataset.labels[start:start + 256], attack_config)
    x_aa, x_ap = adversarial_amplitude_swap(dataset.images, adv)
    for name, images in (("adv", adv), ("aa", x_aa), ("ap", x_ap)):
        save_dataset(dataset.replace_images(images), out_dir / f"{name}.sswd")
    print(f"wrote adv/aa/ap datasets to {out_dir}")
    return 0


def cmd_corrupt(args):
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_manifest(args, out_dir, "corrupt_manifest.json")
    _, dataset = _load_sets(args)
    rows = []
    for kind in CORRUPTION_TYPES:
        for severity in range(1, 6):
            corrupted = corrupt_dataset(dataset, kind, severity, args.seed)
            save_dataset(corrupted, out_dir / f"{kind}_{severity}.sswd")
            mse = float(np.mean((corrupted.images - dataset.images) ** 2))
            rows.append((kind, severity, mse))
    with open(out_dir / "mse_report.csv", "w") as fh:
        fh.write("corruption,severity,mean_mse\n")
        for kind, severity, mse in rows:
            fh.write(f"{kind},{severity},{mse!r}\n")
    print(f"wrote {len(rows)} corrupted datasets to {out_dir}")
    return 0


def main(argv=None):
    args = _resolve_args(sys.argv[1:] if argv is None else argv)
    handler = {"train": cmd_train, "eval": cmd_eval,
               "augment": cmd_augment, "corrupt": cmd_corrupt}[args.command]
    return handler(args)


if __name__ == "__main__":
    sys.exit(main())
