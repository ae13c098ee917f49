"""Perturbation studies for the bundled fixtures.

    python3 scripts/perturbation_study.py exC --order 2
    python3 scripts/perturbation_study.py all

Writes <outdir>/<name>_order<k>.csv plus a points JSON and prints the ratio estimate.
"""

import argparse
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from stabcert.harness import SearchConfig, run_perturbation_study, write_csv, write_points_json
from stabcert.problem import load_problem

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


@dataclass
class StudyConfig:
    name: str
    start: float
    ratio: float = 0.5
    count: int = 7
    order: int = 1
    locality: float = 0.5
    search: SearchConfig = field(default_factory=SearchConfig)
    # periods of the oscillating constraint resolved past the first admissible root
    periods: float | None = None

    def omegas(self):
        return [np.array([self.start * self.ratio**j]) for j in range(self.count)]

    def config_for(self, w) -> SearchConfig:
        if self.periods is None:
            return self.search
        w = float(w[0])
        rmin = 1 / (1 / w + 2 * math.pi * self.periods)
        return SearchConfig(radius=1.25 * w, min_radius=rmin, min_step=rmin / 4, axis_points=601, scattered=200)


PRESETS = {
    "ex51": StudyConfig("ex51", 0.1, periods=5.5),
    "exB": StudyConfig("exB", -0.1),
    "exC": StudyConfig("exC", 0.04),
}


def run(cfg: StudyConfig, outdir: Path, workers: int = 1):
    prob = load_problem(FIXTURES / f"{cfg.name}.prob")
    samples, est = run_perturbation_study(
        prob, cfg.omegas(), cfg.order, cfg=cfg.config_for if cfg.periods else cfg.search, locality=cfg.locality, workers=workers
    )
    outdir.mkdir(parents=True, exist_ok=True)
    stem = outdir / f"{cfg.name}_order{cfg.order}"
    write_csv(samples, stem.with_suffix(".csv"))
    write_points_json(samples, stem.with_suffix(".points.json"))
    print(f"{cfg.name} order {cfg.order}: sup dist/tau = {est.sup:.4g}, log-log slope {est.slope:.3f}, bounded={est.bounded}")
    for s in samples:
        t = s.tau1 if cfg.order == 1 else s.tau2
        print(f"  omega={s.omega[0]:<12.6g} points={len(s.points):<3} dist={s.dist_max_local:.6g} ratio={s.dist_max_local / t:.4f}")
    return samples, est


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("name", choices=sorted(PRESETS) + ["all"])
    ap.add_argument("--order", type=int, choices=(1, 2))
    ap.add_argument("--count", type=int)
    ap.add_argument("--outdir", type=Path, default=Path("results"))
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()
    names = sorted(PRESETS) if args.name == "all" else [args.name]
    for name in names:
        cfg = PRESETS[name]
        if args.order:
            cfg.order = args.order
        if args.count:
            cfg.count = args.count
        run(cfg, args.outdir, args.workers)


if __name__ == "__main__":
    main()
