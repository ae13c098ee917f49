"""Exploratory: the degenerate MPEC with phi(t) = t^6 (0.9 - cos(1/t)).

The feasible part of the x1-axis becomes a union of intervals, whose right ends
are stationary with an active g2 whose gradient is tiny.  This prints each point
found per omega with its tags and the norm of the fitted multiplier.  No rate is
asserted.  Each multiplier component is capped at MULTIPLIER_BOUND, so points that
need a larger component lose the M-stat tag instead of reporting a huge norm.
"""

import argparse
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from stabcert.harness import MULTIPLIER_BOUND, SearchConfig, find_stationary_points
from stabcert.problem import parse_problem

FIXTURE = Path(__file__).resolve().parent.parent / "fixtures" / "ex51.prob"


@dataclass
class BlowupConfig:
    level: float = 0.9  # replaces the 1 in (1 - cos(1/t))
    start: float = 0.1
    count: int = 4
    periods: float = 3.5


def variant(level: float):
    text = FIXTURE.read_text().replace("(1 - cos(1/x1))", f"({level} - cos(1/x1))")
    return parse_problem(text, name=f"ex51_level{level}")


def search(w, periods):
    rmin = 1 / (1 / w + 2 * math.pi * periods)
    return SearchConfig(radius=1.25 * w, min_radius=rmin, min_step=rmin / 4, axis_points=601, scattered=200)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--level", type=float, default=0.9)
    ap.add_argument("--count", type=int, default=4)
    args = ap.parse_args()
    cfg = BlowupConfig(level=args.level, count=args.count)
    prob = variant(cfg.level)
    print(f"multiplier cap {MULTIPLIER_BOUND:g}")
    for j in range(cfg.count):
        w = cfg.start * 2.0**-j
        pts = find_stationary_points(prob, [w], search(w, cfg.periods))
        print(f"omega = {w:g}: {len(pts)} point(s)")
        for p in sorted(pts, key=lambda p: p.x[0]):
            lam = "-" if p.multiplier is None else f"{np.linalg.norm(p.multiplier):.4g}"
            print(f"  x = ({p.x[0]:.8f}, {p.x[1]:.2e})  |lambda| = {lam:<10} tags = {', '.join(sorted(p.tags))}")


if __name__ == "__main__":
    main()
