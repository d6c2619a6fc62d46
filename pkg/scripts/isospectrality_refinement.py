#!/usr/bin/env python3
"""Refinement study: drift of the Dirac periodic spectrum under the quartic flow.

Evolves a seeded random field at successively finer (dt, cutoff) levels and
records the maximal eigenvalue drift in a fixed window.  At the
flow-compatible normalization beta = 2 the drift is pure discretization
error and should fall like dt^2.
"""

import argparse
import csv

import numpy as np

from gibbslab.flow_lab import isospectrality_refinement
from gibbslab.fourier_field import PeriodicField


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--amplitude", type=float, default=0.25)
    ap.add_argument("--beta", type=float, default=2.0)
    ap.add_argument("--time", type=float, default=0.2)
    ap.add_argument("--out", default="isospectrality.csv")
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    c = (rng.standard_normal(9) + 1j * rng.standard_normal(9)) * args.amplitude
    field = PeriodicField(4, c)

    levels = [(1.6e-3, 8), (4e-4, 16), (1e-4, 32)]
    reports = isospectrality_refinement(
        field, args.beta, args.time, levels, window=(-2.5, 2.5), dirac_steps=1024
    )
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["dt", "cutoff", "drift", "count_before", "count_after"])
        for r in reports:
            w.writerow([r["dt"], r["cutoff"], repr(r["drift"]),
                        r["count_before"], r["count_after"]])
            print(f"dt={r['dt']:.1e} cutoff={r['cutoff']:>3}: drift {r['drift']:.3e}")
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
