use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Pipeline stage, used to tag errors raised by the orchestrator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Load,
    Standardize,
    Kernel,
    Kpca,
    Expand,
    Knockoff,
    PValues,
    Select,
    ComponentFit,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Load => "load",
            Stage::Standardize => "standardize",
            Stage::Kernel => "kernel",
            Stage::Kpca => "kpca",
            Stage::Expand => "expand",
            Stage::Knockoff => "knockoff",
            Stage::PValues => "pvalues",
            Stage::Select => "select",
            Stage::ComponentFit => "component-fit",
        }
    }
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// `row` is the 1-based data row (header excluded), `col` the 1-based column.
    #[error("parse error at row {row}{}: {msg}", col.map(|c| format!(", column {c}")).unwrap_or_default())]
    Parse {
        row: usize,
        col: Option<usize>,
        msg: String,
    },

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("index {index} out of range for length {len}")]
    Bounds { index: usize, len: usize },

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    /// Coordinate descent hit its iteration cap. `best` holds the last iterate.
    #[error("lasso did not converge after {iterations} sweeps (KKT violation {kkt_violation:.3e})")]
    NonConvergence {
        iterations: usize,
        kkt_violation: f64,
        best: Vec<f64>,
    },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("degenerate distribution: {0}")]
    DegenerateDistribution(String),

    #[error("stage {stage}: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Process exit code: 2 for usage and I/O problems, 1 for numerical or
    /// statistical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. }
            | Error::Parse { .. }
            | Error::EmptyInput(_)
            | Error::InvalidInput(_)
            | Error::Config(_)
            | Error::Bounds { .. } => 2,
            Error::DegenerateInput(_)
            | Error::Numerical(_)
            | Error::NonConvergence { .. }
            | Error::InsufficientData(_)
            | Error::DegenerateDistribution(_) => 1,
            Error::Stage { source, .. } => source.exit_code(),
        }
    }

    pub fn at(self, stage: Stage) -> Error {
        match self {
            e @ Error::Stage { .. } => e,
            e => Error::Stage {
                stage,
                source: Box::new(e),
            },
        }
    }
}

pub(crate) trait StageExt<T> {
    fn stage(self, stage: Stage) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: Stage) -> Result<T> {
        self.map_err(|e| e.at(stage))
    }
}
