"""Reference-governed MPC toolkit: constrained control with an incremental
reference governor around a short-horizon input-constrained MPC, plus the
spacecraft-rendezvous benchmark used to exercise it."""

from ._rgmpc import (
    ConfigError,
    DegenerateSetError,
    InfeasibleOcpError,
    InfeasibleReferenceError,
    InitializationError,
    InstabilityError,
    NoConvergenceError,
    cwh_continuous,
    discretize_zoh,
    ic_grid,
    run_campaign,
    simulate,
    solve_dare,
    solve_discrete_lyapunov,
    solve_umpc,
    spectral_radius,
    steady_state,
)

__all__ = [
    "ConfigError",
    "DegenerateSetError",
    "InfeasibleOcpError",
    "InfeasibleReferenceError",
    "InitializationError",
    "InstabilityError",
    "NoConvergenceError",
    "cwh_continuous",
    "discretize_zoh",
    "ic_grid",
    "run_campaign",
    "simulate",
    "solve_dare",
    "solve_discrete_lyapunov",
    "solve_umpc",
    "spectral_radius",
    "steady_state",
]
