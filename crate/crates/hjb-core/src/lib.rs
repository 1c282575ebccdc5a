//! Numerical toolkit for Dirichlet problems driven by extremal (HJB-type)
//! second-order operators `F[u] = sup_a {tr(A_a D^2 u) + b_a . Du + c_a u}`:
//! monotone finite-difference discretization, the two principal
//! half-eigenpairs, critical resonance thresholds t*, solvability probes,
//! and solution-branch tracing in the spectral parameter.

pub mod band;
pub mod branch;
pub mod eigen;
pub mod error;
pub mod expr;
pub mod grid;
pub mod nonlin;
pub mod operator;
pub mod oracle;
pub mod scenario;
pub mod solver;
pub mod tstar;
pub mod util;

pub use branch::{
    assemble_diagram, census, classify_sign, continue_branch, seed_from_infinity, Branch,
    BranchPoint, CensusSpec, Diagram, Provenance, SeedSide, SignClass, StepControl,
};
pub use eigen::{eigen_gap, principal_eigenpair, EigenContext, EigenPair, EigenSign};
pub use error::{Error, Result};
pub use grid::{
    boundary_slope_margin, dot_l2, integrate, norm, Domain, Grid, GridFunction, NormKind,
};
pub use nonlin::{
    check_f1_f2, check_landesman, check_sublinear, construct_dr, BaseProfile, DRSide, LLSide,
    Nonlinearity, Verdict,
};
pub use operator::{check_structure, discretize, ControlCoeffs, DiscreteOperator, Field,
    HJBOperator, Sense};
pub use scenario::Scenario;
pub use solver::{
    howard_solve, k_map, newton_solve, nonlinear_residual, perron_solve, solvability_probe,
    solvability_probe_with, solve_proper, PerronDirection, ProbeBudget, ProbeOutcome,
    SolveReport, SolveStatus, SolverOptions, SubSuperPair,
};
pub use tstar::{
    decompose, tstar_continuity_scan, tstar_interior, tstar_resonant, Decomposition, TStarMethod,
    TStarOptions, TStarResult,
};
