"""Stochastic and quantum thermodynamics of linear RLC networks.

Pipeline: :func:`parse_netlist` -> :func:`analyze` (normal tree, loop and
cut-set matrices, heat-current consistency) -> :func:`build_model` (linear
Langevin dynamics ``dx = A H(t) x dt + noise``) -> moments, trajectories,
Floquet cycle averages and quantum heat currents.
"""

from .dynamics import (
    CovarianceSolution,
    TrajectoryEnsemble,
    floquet_stability,
    integrate_covariance,
    integrate_mean,
    sample_langevin,
    solve_stationary_lyapunov,
    stationary_mean,
)
from .errors import (
    ConditionViolation,
    InconsistentTopologyError,
    InstabilityError,
    ModelError,
    NetlistError,
    NoStationaryState,
    NumericalError,
    QuadratureError,
    RLCError,
    TopologyError,
    TruncationWarning,
)
from .floquet import (
    cycle_average,
    fourier_hamiltonian,
    periodic_covariance,
    solve_generalized_lyapunov,
    two_rc_analytic,
)
from .netlist import CircuitSpec, DriveSpec, ElementSpec, WaveformSpec, parse_netlist, serialize_netlist
from .quantum import (
    ghat_fourier,
    ghat_static,
    heat_periodic_quantum,
    heat_static_quantum,
    quantum_covariance_transient,
    quantum_stationary_covariance,
    threshold_temperature,
    transfer_periodic,
    transfer_static,
)
from .statespace import StateSpaceModel, build_model, energy, hamiltonian_at
from .thermo import (
    entropy_production,
    heat_current_classical,
    thermo_sample,
    total_heat_rate,
    work_rates,
)
from .topology import analyze
from .units import NATURAL, SI, Units

__version__ = "0.1.0"
