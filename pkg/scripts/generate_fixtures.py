#!/usr/bin/env python3
"""Write synthetic array files (initial embeddings plus a conditional/null
pair) for exercising the CLI by hand.

Usage: python3 scripts/generate_fixtures.py OUT_DIR [--seed 42]
"""

import argparse
from pathlib import Path

import numpy as np

from tora import ArrayFile, synthetic_inputs, write_array


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("out_dir", type=Path)
    parser.add_argument("--seed", type=int, default=42)
    parser.add_argument("--tokens", type=int, default=8)
    parser.add_argument("--latents", type=int, default=16)
    parser.add_argument("--dim", type=int, default=64)
    args = parser.parse_args()

    args.out_dir.mkdir(parents=True, exist_ok=True)
    text, latent = synthetic_inputs(
        args.seed, tokens=args.tokens, latents=args.latents, dim=args.dim
    )
    # conditional/null pair: the null prompt drops the cluster structure
    rng = np.random.default_rng(args.seed + 1)
    null = text.mean(axis=0) + 0.1 * rng.normal(size=text.shape)

    for name, values in (
        ("e_init.npy", text),
        ("x_init.npy", latent),
        ("cond.npy", text),
        ("null.npy", null),
    ):
        write_array(args.out_dir / name, ArrayFile(values=values))
        print(f"wrote {args.out_dir / name} shape={values.shape}")


if __name__ == "__main__":
    main()
