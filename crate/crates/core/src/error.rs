use thiserror::Error;

/// Constraint families of the joint allocation/placement problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum Constraint {
    /// Accumulated layer memory exceeds a UAV's memory budget.
    Memory,
    /// Accumulated compute load exceeds a UAV's compute budget.
    Compute,
    /// A layer is not assigned to exactly one UAV.
    SingleExecutor,
    /// A UAV does not occupy exactly one valid cell.
    OneCellPerUav,
    /// Two UAVs share a cell.
    OneUavPerCell,
    /// A hot cell is left unoccupied.
    HotCellCoverage,
}

impl std::fmt::Display for Constraint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Constraint::Memory => "memory budget",
            Constraint::Compute => "compute budget",
            Constraint::SingleExecutor => "single executor per layer",
            Constraint::OneCellPerUav => "one cell per UAV",
            Constraint::OneUavPerCell => "one UAV per cell",
            Constraint::HotCellCoverage => "hot-cell coverage",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("infeasible plan ({constraint}): {detail}")]
    Infeasible { constraint: Constraint, detail: String },

    #[error("infeasible link between UAV {from} and UAV {to}: zero data rate")]
    InfeasibleLink { from: usize, to: usize },

    #[error("cannot place {uavs} UAVs on {cells} cells")]
    ImpossiblePlacement { uavs: usize, cells: usize },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn infeasible(constraint: Constraint, detail: impl Into<String>) -> Self {
        Error::Infeasible {
            constraint,
            detail: detail.into(),
        }
    }

    /// Process exit code used by the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Json(_) => 2,
            Error::Infeasible { .. } | Error::InfeasibleLink { .. } | Error::ImpossiblePlacement { .. } => 3,
            Error::Numeric(_) => 4,
            Error::Contract(_) | Error::Io(_) | Error::Csv(_) => 1,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
