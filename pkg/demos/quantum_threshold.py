"""Quantum noise suppresses the refrigerator below a threshold temperature.

Builds the periodic transfer-function grid once and evaluates the heat
extracted from the first resistor at several temperatures.
"""

import numpy as np

from rlcthermo.circuits import two_rc
from rlcthermo.quantum import threshold_temperature, transfer_periodic
from rlcthermo.statespace import build_model
from rlcthermo.units import NATURAL


def main():
    wd = 2 * np.pi * 1e-2
    for td in (2.0, 4.0):
        m = build_model(two_rc(R=td, C=1.0, L=1.0, dC=0.1, wd=wd, theta=np.pi / 2), NATURAL)
        grid = transfer_periodic(m)
        print(f"tau_d = {td}: {len(grid.omega)} frequencies, cutoff {grid.cutoff:.3g}")
        for T in (0.01, 0.1, 1.0, 10.0, 100.0):
            q = grid.heat(np.array([T, T]))
            print(f"   T = {T:7.2f}   <Qdot_1> = {q[0]:+.4e}")
        print(f"   threshold T* = {threshold_temperature(grid):.4f}")


if __name__ == "__main__":
    main()
