use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error("point ({}, {}) lies outside the domain", .0[0], .0[1])]
    OutsideDomain([f64; 2]),
    #[error("invalid temporal mesh: {0}")]
    InvalidTemporal(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FeError {
    #[error("spaces live on different meshes")]
    MeshMismatch,
    #[error("mesh is not patch structured; reconstruction needs 2x2 sibling patches")]
    NotPatchStructured,
    #[error("unsupported order {0}")]
    UnsupportedOrder(usize),
    #[error("constraint graph has a cycle through dof {0}")]
    CyclicConstraint(usize),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("numerically singular pivot in column {column} (row {row})")]
    SingularPivot { column: usize, row: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("conjugate gradients did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error(transparent)]
    Constraint(#[from] FeError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProblemError {
    #[error("Arrhenius denominator 1 + alpha(theta - 1) vanishes at theta = {0}")]
    ArrheniusSingular(f64),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("Newton did not converge on slab {slab} (last residual {residual:e})")]
    NewtonDiverged { slab: usize, residual: f64 },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Fe(#[from] FeError),
    #[error("goal functional: {0}")]
    Goal(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimatorError {
    #[error("unsupported estimator variant: {0}")]
    Unsupported(String),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Problem(#[from] ProblemError),
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("unknown key '{0}'")]
    UnknownKey(String),
    #[error("invalid value for '{key}': {msg}")]
    InvalidValue { key: String, msg: String },
    #[error("malformed line {line}: {text}")]
    Malformed { line: usize, text: String },
    #[error("{0}")]
    Forbidden(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
