#!/usr/bin/env python3
"""Plot the CSV tables emitted by the cvcluster CLI.

Usage:
    plot_curves.py curve FILE [FILE ...] [--normalized] [--out PNG]
    plot_curves.py witness FILE [FILE ...] [--out PNG]

Each FILE is the CSV output of `cvcluster curve` (columns r, EN,
EN_normalized) or `cvcluster witness` over a gain sweep (columns g, W,
bound, entangled). Curves are labeled by file name; pass --out to save
instead of opening a window.
"""

import argparse
import csv
import pathlib
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt


def read_columns(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        sys.exit(f"{path}: empty table")
    return {name: [float(row[name]) for row in rows] for name in rows[0]}


def plot_curve(paths, normalized, ax):
    column = "EN_normalized" if normalized else "EN"
    for path in paths:
        cols = read_columns(path)
        ax.plot(cols["r"], cols[column], label=pathlib.Path(path).stem)
    if normalized:
        ax.axhline(0.5, color="gray", lw=0.8, ls=":")
    ax.set_xlabel("squeezing parameter r")
    ax.set_ylabel("E_N / E_ideal" if normalized else "E_N")
    ax.legend()


def plot_witness(paths, ax):
    for path in paths:
        cols = read_columns(path)
        stem = pathlib.Path(path).stem
        ax.plot(cols["g"], cols["W"], label=f"{stem} W(g)")
        ax.plot(cols["g"], cols["bound"], color="gray", lw=0.8, ls="--")
        detected = [g for g, e in zip(cols["g"], cols["entangled"]) if e]
        if detected:
            ax.axvspan(min(detected), max(detected), alpha=0.15)
    ax.set_xlabel("gain g")
    ax.set_ylabel("variance sum W(g); dashed: separability bound")
    ax.legend()


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("kind", choices=["curve", "witness"])
    parser.add_argument("files", nargs="+")
    parser.add_argument("--normalized", action="store_true",
                        help="plot E_N relative to the ideal-cluster value")
    parser.add_argument("--out", default=None, help="write a PNG instead of showing")
    args = parser.parse_args()

    fig, ax = plt.subplots(figsize=(6, 4))
    if args.kind == "curve":
        plot_curve(args.files, args.normalized, ax)
    else:
        plot_witness(args.files, ax)
    fig.tight_layout()
    if args.out:
        fig.savefig(args.out, dpi=160)
    else:
        plt.show()


if __name__ == "__main__":
    main()
