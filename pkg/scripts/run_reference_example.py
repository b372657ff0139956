#!/usr/bin/env python3
"""Run the checked-in four-group IQ fixture through every analysis path."""
import json
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from steelrank.cli import RunConfig, render_json, run

FIXTURE = Path(__file__).resolve().parents[1] / "tests" / "data" / "iq_birth_condition.csv"


def main() -> None:
    for mode in ("steel", "confidence", "pairwise"):
        report = run(
            RunConfig(
                input=str(FIXTURE),
                alternative="less" if mode != "pairwise" else "two_sided",
                method="all",
                mode=mode,
                nsim=100_000,
                seed=20260809,
                conf_level=0.95,
            )
        )
        print(f"==== mode={mode} ====")
        if mode == "steel":
            obs = report["observation"]
            print("W*:", obs["w_star"], " s_min:", obs["s_min"])
            print("p-values:", json.dumps(report["p_values"], sort_keys=True))
        elif mode == "confidence":
            print(json.dumps(report["confidence"], indent=2, sort_keys=True))
        else:
            print("pairs:", report["pairwise"]["pairs"])
            print("p-values:", json.dumps(report["p_values"], sort_keys=True))
        print()
    print("full steel report:")
    print(render_json(run(RunConfig(input=str(FIXTURE), alternative="less", seed=1))))


if __name__ == "__main__":
    main()
