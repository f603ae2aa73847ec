#!/usr/bin/env python3
"""Materialize the 500-scene handwritten-digit corpus as CIMG files."""
import argparse

from sartrain.data import write_digit_scene_files


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="data/digits500")
    ap.add_argument("--n", type=int, default=500)
    ap.add_argument("--size", type=int, default=32)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    n = write_digit_scene_files(args.out, args.n, args.size, args.seed)
    print(f"wrote {n} scenes to {args.out}")


if __name__ == "__main__":
    main()
