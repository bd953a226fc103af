#!/usr/bin/env python3
"""Build the spectral constants file (eigenpair, a_W, b_W, residuals).

Runs both the matrix eigensolver and the shooting cross-check; the output
is byte-reproducible, so `critwave constants --verify` can compare a fresh
build against the packaged reference at 1e-10.
"""

import argparse

from critwave.spectral import build_spectral_data


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="spectral_constants.json")
    args = ap.parse_args()
    spectral = build_spectral_data(cross_check=True)
    spectral.save_constants(args.out)
    print(f"k   = {spectral.k:.12f}")
    print(f"a_W = {spectral.a_W:.12f}")
    print(f"b_W = {spectral.b_W:.12f}")
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
