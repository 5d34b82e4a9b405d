"""Command-line entry points: train, attack, eval, sweep.

Exit codes: 0 on success, 2 on configuration errors (with the offending
field path), 3 on I/O errors.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .attack import export_perturbation, rmaef, rmaep, jamming, AttackResult, PerturbationVector
from .errors import ConfigInvalid, MissingCheckpoint
from .harness import (
    PRESETS,
    build_attack_source,
    load_config,
    load_system,
    make_budget,
    rerun_from_manifest,
    run_cell,
    save_config,
    snr_to_sigma2,
    sweep_to_directory,
    train_system,
    derive_rng,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3


def _resolve_config(args):
    if getattr(args, "config", None):
        cfg = load_config(args.config)
    else:
        cfg = PRESETS[args.preset]()
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    cfg.validate()
    return cfg


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, default=None,
                        help="JSON experiment config; overrides the preset")
    parser.add_argument("--preset", choices=sorted(PRESETS), default="desk",
                        help="built-in configuration when no --config is given")
    parser.add_argument("--seed", type=int, default=None, help="master seed override")


def cmd_train(args) -> int:
    cfg = _resolve_config(args)
    out_dir = Path(args.out)
    print(f"[train] preset={cfg.preset} seed={cfg.seed} epochs={cfg.train.epochs}")
    nets, ckpt = train_system(cfg, out_dir)
    save_config(cfg, out_dir / "config.json")
    print(f"[train] checkpoint written to {ckpt}")
    return EXIT_OK


def cmd_attack(args) -> int:
    cfg = _resolve_config(args)
    if args.mode:
        cfg.attack.channel_mode = args.mode
        cfg.validate()
    sys_cfg = cfg.system.replace(sigma2=snr_to_sigma2(cfg.system.power, args.snr_db))
    nets = load_system(args.checkpoint, cfg)
    budget = make_budget(cfg, sys_cfg, nets, cfg.attack.channel_mode)
    rng = derive_rng(cfg.seed, "attack", args.kind, cfg.attack.channel_mode,
                     sys_cfg.num_scatterers, args.snr_db)
    if args.kind == "jamming":
        vector = jamming(budget.linear, sys_cfg.n_r if cfg.attack.channel_mode == "ideal"
                         else sys_cfg.adversary_antennas, rng)
        result = AttackResult(perturbation=vector, channel_mode=cfg.attack.channel_mode,
                              iterations=1, success_count=1, flips_found=0,
                              already_broken=0, skipped=0, grad_evals=0)
    else:
        builder = {"rmaep": rmaep, "rmaef": rmaef}[args.kind]
        result = builder(nets, sys_cfg, budget, cfg.attack.pgd_config(), rng,
                         channel_mode=cfg.attack.channel_mode)
    export_perturbation(args.out, result, psr_db=cfg.attack.psr_db)
    print(f"[attack] {args.kind} ({cfg.attack.channel_mode}) at {args.snr_db:+.1f} dB; "
          f"power {result.perturbation.power:.4e} <= budget {budget.linear:.4e}; "
          f"wrote {args.out}")
    return EXIT_OK


def cmd_eval(args) -> int:
    cfg = _resolve_config(args)
    if args.blocks is not None:
        cfg.eval.test_blocks = args.blocks
        cfg.validate()
    nets = load_system(args.checkpoint, cfg)
    row = run_cell(cfg, nets, cfg.system.num_scatterers, args.snr_db, args.attack)
    print("snr_db,attack,ser,trials,ci_halfwidth,scatterers,attack_channel")
    print(f"{row.snr_db:.17g},{row.attack},{row.ser:.17g},{row.trials},"
          f"{row.ci_halfwidth:.17g},{row.scatterers},{row.attack_channel}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    out_dir = Path(args.out)
    if args.from_manifest:
        csv_path = rerun_from_manifest(args.from_manifest, out_dir, progress=args.progress)
        print(f"[sweep] reproduced {csv_path}")
        return EXIT_OK
    cfg = _resolve_config(args)
    if args.checkpoint:
        ckpt = Path(args.checkpoint)
        nets = load_system(ckpt, cfg)
    else:
        print("[sweep] no checkpoint given; training first")
        nets, ckpt = train_system(cfg, out_dir)
    csv_path = sweep_to_directory(cfg, nets, ckpt, out_dir, progress=args.progress)
    print(f"[sweep] wrote {csv_path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="risae",
        description="Double-RIS MIMO autoencoder link simulator with "
                    "universal-perturbation attacks and SER sweeps.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train the autoencoder and save a checkpoint")
    _add_common(p_train)
    p_train.add_argument("--out", type=Path, required=True, help="output directory")
    p_train.set_defaults(func=cmd_train)

    p_attack = sub.add_parser("attack", help="construct a perturbation and export it")
    _add_common(p_attack)
    p_attack.add_argument("--checkpoint", type=Path, required=True)
    p_attack.add_argument("--kind", choices=["rmaep", "rmaef", "jamming"], required=True)
    p_attack.add_argument("--snr-db", type=float, required=True)
    p_attack.add_argument("--mode", choices=["ideal", "double"], default=None,
                          help="attack channel mode override")
    p_attack.add_argument("--out", type=Path, required=True, help="perturbation CSV path")
    p_attack.set_defaults(func=cmd_attack)

    p_eval = sub.add_parser("eval", help="evaluate one (SNR, benchmark) cell")
    _add_common(p_eval)
    p_eval.add_argument("--checkpoint", type=Path, required=True)
    p_eval.add_argument("--attack", choices=["secured", "jamming", "rmaef", "rmaep"],
                        default="secured")
    p_eval.add_argument("--snr-db", type=float, required=True)
    p_eval.add_argument("--blocks", type=int, default=None, help="test blocks override")
    p_eval.set_defaults(func=cmd_eval)

    p_sweep = sub.add_parser("sweep", help="run the full SNR x benchmark grid")
    _add_common(p_sweep)
    p_sweep.add_argument("--checkpoint", type=Path, default=None,
                         help="trained weights; trains first when omitted")
    p_sweep.add_argument("--out", type=Path, required=True, help="output directory")
    p_sweep.add_argument("--from-manifest", type=Path, default=None,
                         help="reproduce a previous sweep from its manifest")
    p_sweep.add_argument("--progress", action="store_true", help="print per-cell progress")
    p_sweep.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigInvalid as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (MissingCheckpoint, FileNotFoundError, PermissionError, IsADirectoryError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
