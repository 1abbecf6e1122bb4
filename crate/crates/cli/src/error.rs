use hydrosp::sp::SpError;
use hydrosp_models::ModelError;
use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("not converged after {iterations} iterations (relative gap {gap:e})")]
    NotConverged { iterations: usize, gap: f64 },
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::NotConverged { .. } => 1,
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::NotConverged { .. } => "not_converged",
            CliError::Config(_) => "config",
            CliError::Numerical(_) => "numerical",
        }
    }

    /// One-line JSON description for stderr.
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Body<'a> {
            kind: &'a str,
            exit_code: i32,
            message: String,
            #[serde(skip_serializing_if = "Option::is_none")]
            iterations: Option<usize>,
            #[serde(skip_serializing_if = "Option::is_none")]
            gap: Option<f64>,
        }
        let (iterations, gap) = match self {
            CliError::NotConverged { iterations, gap } => (Some(*iterations), Some(*gap)),
            _ => (None, None),
        };
        let body = Body {
            kind: self.kind(),
            exit_code: self.exit_code(),
            message: self.to_string(),
            iterations,
            gap,
        };
        serde_json::json!({ "error": body }).to_string()
    }
}

impl From<SpError> for CliError {
    fn from(e: SpError) -> Self {
        match e {
            SpError::Structural(_)
            | SpError::Argument(_)
            | SpError::InfeasibleDecision(_)
            | SpError::ScenarioFile(_) => CliError::Config(e.to_string()),
            SpError::InfeasibleSubproblem { .. }
            | SpError::UnboundedSubproblem { .. }
            | SpError::Solver { .. } => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::NotConverged {
                iterations, gap, ..
            } => CliError::NotConverged { iterations, gap },
            ModelError::Sp(e) => e.into(),
            e => CliError::Config(e.to_string()),
        }
    }
}
