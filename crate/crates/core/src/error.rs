use thiserror::Error;

use crate::model::Violation;

pub type Result<T> = std::result::Result<T, CmoError>;

#[derive(Debug, Error)]
pub enum CmoError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },

    #[error("invalid deal spec: {}", format_violations(.0))]
    Invalid(Vec<Violation>),

    #[error("unknown override key `{0}`")]
    UnknownKey(String),

    #[error("{what} = {value} is outside {domain}")]
    Domain {
        what: &'static str,
        value: f64,
        domain: &'static str,
    },

    #[error("cash-flow pathology in month {month}: {msg}")]
    CashFlow { month: u32, msg: String },

    #[error("failed to build worker pool: {0}")]
    ThreadPool(#[from] rayon::ThreadPoolBuildError),
}

fn format_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}
