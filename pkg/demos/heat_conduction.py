"""Static heat conduction through two RC cells coupled by an inductor.

Compares the Lyapunov covariance with a Langevin ensemble and prints the
heat currents and the entropy production.
"""

import numpy as np

from rlcthermo.circuits import two_rc
from rlcthermo.dynamics import sample_langevin, solve_stationary_lyapunov
from rlcthermo.statespace import build_model
from rlcthermo.thermo import entropy_production, heat_current_classical
from rlcthermo.units import NATURAL


def main():
    m = build_model(two_rc(R=1.0, C=1.0, L=1.0, T1=2.0, T2=1.0), NATURAL)
    S = solve_stationary_lyapunov(m)
    q = heat_current_classical(m, None, S)
    ep = entropy_production(m, None, S, decompose=False)
    print("state:", m.state_names)
    print("stationary covariance:\n", np.round(S, 6))
    for name, value in zip(m.resistor_names, q):
        print(f"<Qdot_{name}> = {value:+.6f}")
    print(f"Sigma_dot = {ep.Sigma_dot:.6f}")

    ens = sample_langevin(m, np.zeros(3), (0.0, 10.0), 1 / 500, 4000, seed=1, n_samples=11, sigma0=S)
    cov, se = ens.covariance(-1)
    rate, rse = ens.heat_rate(0, -1)
    print("ensemble covariance z-scores:\n", np.round((cov - S) / se, 2))
    print("ensemble heat rates:", np.round(rate, 4), "+/-", np.round(rse, 4))


if __name__ == "__main__":
    main()
