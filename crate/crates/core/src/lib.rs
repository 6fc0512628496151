//! Numerical engine for continuous-variable cluster-state CZ-gate teleportation.
//!
//! The crate tracks Heisenberg-picture quadrature operators as exact linear
//! combinations over a registry of base modes (momentum-squeezed seeds and
//! coherent inputs), builds canonical and linear-optical cluster states over
//! chain and multi-rail topologies, verifies the measurement-based CZ-gate
//! teleportation identities at the operator level, and derives entanglement
//! quantities (symplectic spectra, logarithmic negativity, witness bounds)
//! for the teleported output modes.

pub mod canonical;
pub mod cli;
pub mod entangle;
pub mod gates;
pub mod lincluster;
pub mod qalg;
pub mod teleport;
pub mod topology;

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("mode id {id} is not registered")]
    UnknownMode { id: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid topology: {0}")]
    InvalidTopology(String),
    #[error("rail count must be at least 1, got {0}")]
    InvalidRails(usize),
    #[error("weights must sum to 1, got {sum}")]
    WeightSum { sum: f64 },
    #[error("weight vector has length {got}, expected {expected}")]
    WeightLength { expected: usize, got: usize },
    #[error("invalid squeezing parameter {0}: must be finite and nonnegative")]
    InvalidSqueezing(f64),
    #[error("per-node squeezing list has length {got}, expected {expected}")]
    SqueezingLength { expected: usize, got: usize },
    #[error("noise covariance is singular or not positive definite")]
    SingularCovariance,
    #[error("constraint solve left residual {residual:.3e} above tolerance")]
    ConstraintResidual { residual: f64 },
    #[error("matrix is not positive semidefinite: eigenvalue {eigenvalue:.3e}")]
    NotPositiveSemidefinite { eigenvalue: f64 },
    #[error("assembled network matrix is not unitary: residual {residual:.3e}")]
    NotUnitary { residual: f64 },
    #[error("nullifier of node {node} has position-quadrature weight {coeff:.3e} on the seed modes")]
    NullifierNotMomentum { node: usize, coeff: f64 },
    #[error("operation requires a linear-optical cluster state")]
    NotLinearOptical,
    #[error("operation requires uniform squeezing across seed modes")]
    NonUniformSqueezing,
    #[error("scenario '{name}': {output} definition and expansion disagree by {residual:.3e}")]
    ScenarioIdentity {
        name: String,
        output: String,
        residual: f64,
    },
    #[error("covariance is not in X form: entry ({row},{col}) = {value:.3e}")]
    XFormViolation { row: usize, col: usize, value: f64 },
    #[error("invalid correlators: {0}")]
    InvalidCorrelators(String),
    #[error("root bracketing failed: {0}")]
    Bracket(String),
    #[error("invalid argument: {0}")]
    InvalidArg(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub use canonical::{
    build_canonical, nrail_outputs_canonical, nullifier, nullifier_covariance, optimal_weights,
    ClusterState, Family, Squeezing, TeleportOutputs, WeightVector,
};
pub use entangle::{
    closed_correlators, correlators_from_outputs, db_of_r, en_closed, en_ideal, log_negativity,
    optimal_gain, rbar, symplectic_pt, symplectic_pt_generic, witness_wg, Correlators,
    CovarianceX, Rails, SymplecticPair, WitnessReport,
};
pub use gates::{
    apply_beamsplitter_5050, apply_fourier, apply_network, apply_qnd, ModeState,
};
pub use lincluster::{
    assemble_U, build_lo_cluster, cluster_from_unitary, factor_alpha, factor_alpha_lower,
    midrail_noise_cov, nrail_outputs_from_state, nrail_outputs_lo, nullifiers_lo,
    solve_geometric_constraints, verify_correlator_identity, AlphaMatrix, GMatrix, UMatrix,
};
pub use qalg::{commutator, second_moment, BaseMode, BaseModeKind, ModeRegistry, OperatorExpr};
pub use teleport::{
    builtin_scenarios, run_scenario, verify_ft_cluster_equivalence, Scenario, ScenarioReport,
};
pub use topology::{common_neighbors, linear_chain, nrail, ClusterSpec};
