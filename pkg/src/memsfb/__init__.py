"""Finite-difference solver for the one-dimensional electrostatic MEMS free-boundary model."""
from .core import DeflectionField, Grid1D, Grid2D, Params, Profile, discrete_norms, make_grids
from .elliptic import (
    PotentialField,
    assemble_transformed,
    compute_g,
    electrostatic_energy,
    energy_bounds,
    energy_identity_residual,
    potential,
    reconstruct_psi,
    solve_potential,
)
from .errors import (
    ContinuationError,
    ConvergenceError,
    MEMSError,
    SingularGeometryError,
    SolverBreakdownError,
    TouchdownError,
)
from .evolution import (
    EnergyLedger,
    EvolutionState,
    TouchdownReport,
    energy_total,
    evolve,
    limit_study_epsilon,
    limit_study_gamma,
    singularity_functional,
    step,
)
from .operators import BeamOperator, Eigenpair, apply_beam, apply_curvature, principal_eigenpair
from .oracles import clamped_beam_mu1, fold_lambda, shooting_oracle
from .stationary import (
    BranchDiagram,
    BranchPoint,
    continue_branch,
    linearized_stability,
    pull_in_voltage,
    revalidate,
    solve_stationary,
    stationary_residual,
)
from .sweep import RunConfig, SweepTable, sweep_pull_in

__all__ = [name for name in dir() if not name.startswith("_")]
