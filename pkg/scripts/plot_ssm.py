"""Render bar-level self-similarity matrices for corpus songs.

Usage:
    python scripts/plot_ssm.py --out runs/toy --songs 4 --dest ssm_plots

Needs a finished `prepare`, `train-vae` and `cache-latents` run in --out.
"""

import argparse
from pathlib import Path

from phrasegen import latent_cache
from phrasegen.metrics import bar_ssm, srs
from phrasegen.metrics.report import save_ssm_image
from phrasegen.metrics.structure import pool_bar_latents


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--out", required=True, help="pipeline output dir")
    parser.add_argument("--songs", type=int, default=4)
    parser.add_argument("--dest", default="ssm_plots")
    args = parser.parse_args()

    records = latent_cache.load_cache(Path(args.out) / "latent_cache")
    dest = Path(args.dest)
    dest.mkdir(parents=True, exist_ok=True)
    for record in records[: args.songs]:
        pooled = pool_bar_latents(record.latents, record.bar_phrase_indices())
        ssm = bar_ssm(pooled)
        path = dest / f"{record.song_id}.png"
        save_ssm_image(ssm, path)
        print(f"{record.song_id}: {record.n_bars} bars, "
              f"SRS {srs(ssm):.3f} -> {path}")


if __name__ == "__main__":
    main()
