use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{what}: dimension d={d} outside supported range {min}..={max}")]
    Size {
        what: &'static str,
        d: u32,
        min: u32,
        max: u32,
    },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("parse error at byte offset {offset}: {message}")]
    Parse { offset: usize, message: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("bisection for `{name}` failed: no sign change on [{lo}, {hi}] (f(lo)={f_lo}, f(hi)={f_hi})")]
    Bracket {
        name: String,
        lo: f64,
        hi: f64,
        f_lo: f64,
        f_hi: f64,
    },

    #[error("regime: {0}")]
    Regime(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(what: &'static str, d: u32, min: u32, max: u32) -> Result<()> {
    if d < min || d > max {
        return Err(Error::Size { what, d, min, max });
    }
    Ok(())
}
