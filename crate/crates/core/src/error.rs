use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// The kernel removed (numerically) all weight from the state.
    #[error("kernel annihilated the state (norm {norm:e} below 1e-300)")]
    DegenerateKernel { norm: f64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// `C + cos(pi l / m) = 0`, so the bin center `n_l` is undefined.
    #[error("sub-process bin l={l} (m={m}) is singular")]
    SingularBin { l: i64, m: i64 },

    #[error("no sign change of S1 + S2 in probe window [{lo}, {hi}] Hz")]
    NoRoot { lo: f64, hi: f64 },

    #[error("species file line {line}: {message}")]
    SpeciesParse { line: usize, message: String },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
