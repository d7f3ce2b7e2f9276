"""Run the bundled synthetic configuration end to end and print the
four-row ablation (baseline, clitics, compounds, rescoring).

    python3 demos/bundled_ablation.py [output_dir]
"""

import dataclasses
import sys
from pathlib import Path

from dialect_asr.pipeline import load_config, run_pipeline

CONFIG = Path(__file__).resolve().parent.parent / "configs" / "synthetic.cfg"


def main() -> None:
    cfg = load_config(CONFIG)
    if len(sys.argv) > 1:
        cfg = dataclasses.replace(cfg, output_dir=sys.argv[1])
    pipe = run_pipeline(cfg)
    print((pipe.out / "ablation.txt").read_text(encoding="utf-8"), end="")
    print(f"intermediates and manifest.json in {pipe.out}")


if __name__ == "__main__":
    main()
