use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("pole of the Gamma function at x = {x}")]
    Pole { x: f64 },

    #[error("argument outside the domain: {0}")]
    Domain(String),

    #[error("quadrature did not converge: achieved error {achieved:e}, requested {requested:e}")]
    Quadrature { achieved: f64, requested: f64 },

    #[error("shooting did not converge after {iterations} bisections (residual {residual:e})")]
    Shooting { iterations: usize, residual: f64 },

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("time step {dt:e} violates the stability bound {limit:e}")]
    Stability { dt: f64, limit: f64 },

    #[error("blow-up detected at t = {time}: |u| = {value}")]
    BlowUp { time: f64, value: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
