#!/usr/bin/env python3
"""Export a torchvision model's conv weights and fit every kernel slice.

Requires torch/torchvision and the exporter package (exporter/ in this
repo). Deep layers hold hundreds of thousands of slices, so `select`
defaults to the early layers; widen it (and raise `jobs`) for a full-model
run.
"""
from __future__ import annotations

import subprocess
import sys
from dataclasses import dataclass
from pathlib import Path

from gaborlens.cli import main as gaborlens_main

REPO_ROOT = Path(__file__).resolve().parents[1]


@dataclass
class AnalysisConfig:
    model_id: str = "alexnet"
    out: Path = Path("out/model_analysis")
    select: str = "features.0*"
    jobs: int = 4
    pretrained: bool = True  # falls back to --random-init when downloads fail


def export_archive(config: AnalysisConfig, path: Path) -> bool:
    base = [sys.executable, "-m", "convexport", "export", config.model_id, str(path)]
    env = {"PYTHONPATH": str(REPO_ROOT / "exporter" / "src")}
    if config.pretrained:
        if subprocess.run(base, env=env).returncode == 0:
            return True
        print("pretrained checkpoint unavailable, exporting randomly initialized weights")
    return subprocess.run(base + ["--random-init"], env=env).returncode == 0


def run(config: AnalysisConfig) -> int:
    config.out.mkdir(parents=True, exist_ok=True)
    archive = config.out / f"{config.model_id}.tensors"
    if not export_archive(config, archive):
        print("export failed", file=sys.stderr)
        return 1
    return gaborlens_main(
        [
            "fit",
            "--input", str(archive),
            "--out", str(config.out),
            "--select", config.select,
            "--jobs", str(config.jobs),
        ]
    )


if __name__ == "__main__":
    sys.exit(run(AnalysisConfig()))
