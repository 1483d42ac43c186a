use thiserror::Error;

/// Everything that can go wrong inside the library.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the set on which a formula is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// A theorem-parameter bound was violated; the message quotes the bound.
    #[error("guard violated: {0}")]
    Guard(String),

    /// Polynomial or special-function evaluation left the representable range.
    #[error("range error: {what} overflowed at m = {m}, x = {x}")]
    Range { what: &'static str, m: usize, x: f64 },

    /// A field has non-negligible magnitude on the boundary of its box.
    #[error("grid too narrow: boundary/peak ratio {ratio:.3e} exceeds {tolerance:.1e}")]
    GridTooNarrow { ratio: f64, tolerance: f64 },

    /// A coordinate change sampled outside the box where the field is not negligible.
    #[error("truncation: map samples outside the grid where |u|/peak reaches {ratio:.3e}")]
    Truncation { ratio: f64 },

    #[error("adaptive quadrature did not converge on [{a}, {b}] (estimate {estimate:.3e})")]
    Quadrature { a: f64, b: f64, estimate: f64 },

    /// Time step too coarse for the stepper's stability guard.
    #[error("step guard: {0}")]
    Step(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("fit failed: {0}")]
    Fit(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
