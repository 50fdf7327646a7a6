//! Crate-wide error type.
//!
//! Every fallible operation returns [`LabResult`]; variants carry enough
//! numeric context (offending values, suggested fixes) for a caller to act
//! without string-parsing.

use thiserror::Error;

/// Result alias used across the crate.
pub type LabResult<T> = Result<T, LabError>;

#[derive(Debug, Error)]
pub enum LabError {
    /// A parameter is outside its documented domain.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// `delta >= 4`: the critical integrability exponent `2/(2 - sqrt(delta))`
    /// is undefined at and above the borderline coupling.
    #[error("delta = {delta} is at or above the critical value 4; no finite integrability exponent exists")]
    SupercriticalDelta { delta: f64 },

    /// The energy machinery was asked to run at an exponent `p` where the
    /// Caccioppoli-type gradient coefficient cannot be made positive.
    #[error("exponent p = {p} is outside the admissible range: need p > max(p_crit, 2) with p_crit = {p_crit}")]
    ExponentRange { p: f64, p_crit: f64 },

    /// No epsilon choice yields a positive gradient coefficient in the
    /// constant recipe; `gradient_sup` is the supremum over admissible
    /// epsilons and `detail` names the dominating absorption term.
    #[error("constant recipe failed: gradient coefficient supremum {gradient_sup:.6} <= floor {floor}; dominating term: {detail}")]
    ConstantRecipeFailure {
        gradient_sup: f64,
        floor: f64,
        detail: String,
    },

    /// Rayleigh certification diverged under refinement: `|b|^2` is not
    /// integrable against some member of the test family.
    #[error("form-bound certification diverged: quotient {quotient:.3e} exceeds the divergence threshold (|b|^2 not integrable against the test family)")]
    CertificateDiverged { quotient: f64 },

    /// Explicit time stepping would violate the monotonicity/stability bound.
    #[error("explicit step tau = {tau} violates the stability bound; largest admissible tau ~= {suggested_tau:.6e}")]
    StabilityViolation { tau: f64, suggested_tau: f64 },

    /// A solution object lacks the data an operation needs (wrong grid,
    /// missing time slices, incompatible dimensions).
    #[error("incompatible data: {0}")]
    Incompatible(String),

    /// Configuration parsing/validation problems, all collected in one pass.
    #[error("{}", format_config_errors(.0))]
    Config(Vec<ConfigIssue>),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One configuration problem, with the line number(s) it was found on.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigIssue {
    /// 1-based line number, when the issue is tied to a specific line.
    pub line: Option<usize>,
    /// For duplicate-key issues: the line of the first occurrence.
    pub previous_line: Option<usize>,
    pub message: String,
}

impl ConfigIssue {
    pub fn at(line: usize, message: impl Into<String>) -> Self {
        ConfigIssue {
            line: Some(line),
            previous_line: None,
            message: message.into(),
        }
    }

    pub fn global(message: impl Into<String>) -> Self {
        ConfigIssue {
            line: None,
            previous_line: None,
            message: message.into(),
        }
    }
}

impl std::fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match (self.line, self.previous_line) {
            (Some(l), Some(p)) => write!(f, "line {l}: {} (first occurrence at line {p})", self.message),
            (Some(l), None) => write!(f, "line {l}: {}", self.message),
            _ => write!(f, "{}", self.message),
        }
    }
}

fn format_config_errors(issues: &[ConfigIssue]) -> String {
    let mut s = format!("{} configuration error(s):", issues.len());
    for issue in issues {
        s.push_str("\n  ");
        s.push_str(&issue.to_string());
    }
    s
}
