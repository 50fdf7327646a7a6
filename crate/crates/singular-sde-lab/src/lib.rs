//! Numerical laboratory for parabolic equations and diffusions whose drift
//! has critical (inverse-square) singularities.
//!
//! The crate has four layers:
//!
//! 1. **Fields and certificates** ([`drift`], [`certify`]): a catalog of
//!    O(d)-equivariant drift fields, Friedrichs regularization, and numerical
//!    certification of quadratic-form bounds against the Dirichlet energy.
//! 2. **Solvers** ([`grid`], [`solver`], [`duhamel`]): finite-difference
//!    Cauchy and terminal-value solves for `du/dt - Lap u + b.grad u = f`
//!    on a box, plus an independent heat-semigroup reference solution.
//! 3. **Energy machinery** ([`cutoff`], [`energy`], [`degiorgi`]): discrete
//!    Caccioppoli-type inequalities with fully explicit constants and the
//!    iteration lemma that turns them into sup bounds.
//! 4. **Monte Carlo** ([`sim`], [`stats`]): Euler-Maruyama ensembles used to
//!    cross-check the analytic side (origin-hitting thresholds, martingale
//!    defects, occupation-time estimates).
//!
//! The `singular-sde-lab` binary drives all of it from INI-style experiment
//! configs; the `examples/` directory contains one small runnable program per
//! capability.

pub mod certify;
pub mod config;
pub mod cutoff;
pub mod degiorgi;
pub mod drift;
pub mod duhamel;
pub mod energy;
pub mod error;
pub mod grid;
pub mod numerics;
pub mod runner;
pub mod sim;
pub mod solver;
pub mod stats;
pub mod suite;

pub use certify::{
    analytic_certificate, certify_form_bound, certify_refined, exponent_gate, hardy_constant,
    lps_exponents, p_critical, CertificateMethod, FormBoundCertificate, GBound, CRITICAL_DELTA,
};
pub use config::{
    parse_config, parse_config_with_overrides, AnalysisSpec, DgSpec, ExperimentConfig,
    ExperimentKind, McSpec,
};
pub use cutoff::{level_sequences, CutoffFamily, LevelSchedule, Weight};
pub use degiorgi::{
    default_theta, dg_iterate, exact_threshold_scan, iteration_threshold, sup_bound_check,
    DGSequence, SupBoundMode, SupBoundReport,
};
pub use drift::{mollify, DriftField, DriftKind, MollificationSchedule};
pub use duhamel::{heat_initial_solution, heat_source_solution};
pub use energy::{
    constant_recipe, energy_identity_residual, energy_report, truncate_level,
    ConstantRecipe, EnergyReport, WindowFunction,
};
pub use error::{LabError, LabResult};
pub use grid::{Grid, GridSolution, ScalarSpec, SourceSpec, SourceTerm};
pub use numerics::{linear_fit, mean_stderr, pairwise_sum};
pub use runner::{config_hash, configure_jobs, csv_body, run, write_artifact, RunManifest};
pub use suite::{run_criterion, run_suite, CriterionReport};
pub use sim::{
    bessel_dimension, hitting_probability, hitting_with_refinement, ks_distance,
    radial_ensemble, radial_image_oracle, radial_oracle, simulate, HittingStats, PathEnsemble,
    RadialEnsemble,
};
pub use stats::{
    drift_integral_scaling, krylov_statistic, martingale_defect, occupation_integrals,
    GFunctional, KrylovPair, MartingaleDefect, ScalarField, ScalingFit, TestFunction,
};
pub use solver::{
    residual_norm, solve_cauchy, solve_terminal, ConstantDrift, DriftEval, SolveOptions,
    SteppingMode,
};
