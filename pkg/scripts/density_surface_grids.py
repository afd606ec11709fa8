#!/usr/bin/env python3
"""Emit the two showcase joint-density surfaces as CSV grids.

The two parameter sets (rho=.5, q=.8) and (rho=-.6, q=-.7) display the
family's range: a ridge-like positively correlated surface on a wide square
and a multimodal negatively correlated one on a narrow square.

Usage: python scripts/density_surface_grids.py [outdir]
"""

import pathlib
import sys

from qnormal.cli import main

OUTDIR = pathlib.Path(sys.argv[1] if len(sys.argv) > 1 else "surface_grids")
CASES = [("a", 0.5, 0.8), ("b", -0.6, -0.7)]


def run():
    OUTDIR.mkdir(parents=True, exist_ok=True)
    for tag, rho, q in CASES:
        out = OUTDIR / f"joint2d_{tag}_rho{rho}_q{q}.csv"
        rc = main(
            [
                "density", "--family", "joint2d",
                "--q", str(q), "--rho", str(rho),
                "--points", "121", "--out", str(out),
            ]
        )
        if rc != 0:
            raise SystemExit(rc)
        print(f"wrote {out}")


if __name__ == "__main__":
    run()
