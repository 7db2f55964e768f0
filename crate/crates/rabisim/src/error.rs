//! Error types shared across the crate.

use std::fmt;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("photon truncation must be at least 1")]
    InvalidTruncation,

    #[error("dimension mismatch: {context}")]
    DimensionMismatch { context: String },

    #[error("Hilbert-space dimension {dim} exceeds the limit {limit} (raise the limit to override)")]
    DimensionOverflow { dim: usize, limit: usize },

    #[error("matrix is not symmetric: relative defect {defect:.3e}")]
    NotSymmetric { defect: f64 },

    #[error("eigensolver did not converge at eigenvalue {index} after {iterations} iterations (off-diagonal residual {residual:.3e})")]
    NoConvergence {
        index: usize,
        iterations: usize,
        residual: f64,
    },

    #[error("dressed label {label} is ambiguous: best overlap {best:.4} vs runner-up {runner_up:.4}")]
    AmbiguousLabel {
        label: String,
        best: f64,
        runner_up: f64,
    },

    #[error("not in the dispersive regime: |nu_q - nu_{mode}| = {detuning:.4} GHz is not above 5*g_{mode} = {required:.4} GHz")]
    DispersiveGuard {
        mode: usize,
        detuning: f64,
        required: f64,
    },

    #[error("perturbative gap violated (need gap > {required:.4e} GHz): {}", format_pairs(pairs))]
    GapViolation {
        pairs: Vec<(usize, usize, f64)>,
        required: f64,
    },

    #[error("energy denominator |E_{i} - E_{j}| below the {min:.1e} GHz guard")]
    DenominatorUnderflow { i: usize, j: usize, min: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("configuration error:\n{0}")]
    Config(ConfigErrors),

    #[error("observation data: {0}")]
    Observations(String),

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("operation does not apply to coupling kind {0}")]
    UnsupportedKind(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn format_pairs(pairs: &[(usize, usize, f64)]) -> String {
    pairs
        .iter()
        .take(4)
        .map(|(i, k, gap)| format!("states ({i},{k}) gap {gap:.4e} GHz"))
        .collect::<Vec<_>>()
        .join(", ")
}

/// All problems found in one configuration document, reported together so a
/// user can fix the whole file in one pass.
#[derive(Debug, Clone, Default)]
pub struct ConfigErrors(pub Vec<ConfigIssue>);

#[derive(Debug, Clone)]
pub struct ConfigIssue {
    /// 1-based line number, when the issue points at a specific line.
    pub line: Option<usize>,
    pub message: String,
}

impl ConfigErrors {
    pub fn push(&mut self, line: Option<usize>, message: impl Into<String>) {
        self.0.push(ConfigIssue {
            line,
            message: message.into(),
        });
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_result(self) -> Result<()> {
        if self.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(self))
        }
    }
}

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (n, issue) in self.0.iter().enumerate() {
            if n > 0 {
                writeln!(f)?;
            }
            match issue.line {
                Some(line) => write!(f, "  line {line}: {}", issue.message)?,
                None => write!(f, "  {}", issue.message)?,
            }
        }
        Ok(())
    }
}
