#!/usr/bin/env python3
"""Compare the compiled inference kernels against the numpy fallback.

Thin wrapper over `pcam bench`; sweeps a few shapes and prints one table
per shape.  Run after `pip install -e .` so the extension is built.
"""

import sys

from pcam import backend
from pcam.cli import main as cli_main

SHAPES = [
    # (sensory, width, batch, steps) — single-sample and batched relaxations
    (3072, 256, 1, 250),
    (3072, 256, 50, 250),
    (3072, 1024, 1, 100),
    (784, 128, 16, 200),
]


def main():
    print(f"available backends: {sorted(backend.available())}")
    for sensory, width, batch, steps in SHAPES:
        print()
        rc = cli_main([
            "bench",
            "--sensory", str(sensory),
            "--width", str(width),
            "--batch", str(batch),
            "--steps", str(steps),
            "--repeat", "3",
        ])
        if rc != 0:
            return rc
    return 0


if __name__ == "__main__":
    sys.exit(main())
