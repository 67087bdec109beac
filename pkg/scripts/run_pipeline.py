"""Run the whole pipeline end to end from one config.

Usage:
    python scripts/run_pipeline.py --config configs/toy.yaml [--generations 8]

Equivalent to the prepare / train-vae / cache-latents / train-ldm /
generate / evaluate subcommands run in order, with one generation per
seed offset.
"""

import argparse

from phrasegen import cli
from phrasegen.ldm.decode import EmptySongError
from phrasegen.manifest import output_lock


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--config", required=True)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--out")
    parser.add_argument("--generations", type=int, default=8)
    parser.add_argument("--bars-bucket", type=int, default=0)
    args = parser.parse_args()

    cfg = cli.load_run_config(args)
    with output_lock(cfg.out_dir):
        cli.cmd_prepare(cfg)
        cli.cmd_train_vae(cfg)
        cli.cmd_cache_latents(cfg)
        cli.cmd_train_ldm(cfg)
        failures = 0
        for k in range(args.generations):
            try:
                cli.cmd_generate(cfg, seed=cfg.seed + 1000 + k,
                                 bars_bucket=args.bars_bucket,
                                 tag=f"gen{k:03d}")
            except EmptySongError:
                failures += 1
        if failures:
            print(f"{failures}/{args.generations} samples decoded to "
                  f"no valid bars")
        if failures < args.generations:
            cli.cmd_evaluate(cfg, bars_bucket=args.bars_bucket)


if __name__ == "__main__":
    main()
