#!/usr/bin/env python3
"""Regenerate the checked-in Lebedev node tables under crates/core/data/.

Each file holds one "x y z w" row per node with weights normalized to sum 1.
Requires SciPy >= 1.15 (scipy.integrate.lebedev_rule).
"""
import math
import pathlib

import numpy as np
from scipy.integrate import lebedev_rule

ORDERS = {6: 3, 14: 5, 26: 7, 38: 9, 50: 11, 74: 13, 86: 15, 110: 17, 146: 19, 170: 21, 194: 23, 230: 25, 266: 27, 302: 29}
OUT = pathlib.Path(__file__).resolve().parent.parent / "crates" / "core" / "data"


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    for count, degree in ORDERS.items():
        x, w = lebedev_rule(degree)
        assert x.shape[1] == count, (count, x.shape)
        w = w / (4.0 * math.pi)
        x = x / np.linalg.norm(x, axis=0)
        path = OUT / f"lebedev_{count:03d}.txt"
        with path.open("w") as fh:
            fh.write(f"# Lebedev rule on the unit sphere\n")
            fh.write(f"# order {count} degree {degree}\n")
            fh.write("# columns: x y z w (weights sum to 1)\n")
            for i in range(count):
                fh.write(f"{x[0, i]:+.17e} {x[1, i]:+.17e} {x[2, i]:+.17e} {w[i]:.17e}\n")
        print(path, count, degree, w.sum())


if __name__ == "__main__":
    main()
