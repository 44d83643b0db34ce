use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("J_{order}({x}) underflows; nearest zero {nearest_zero}")]
    Pole { order: f64, x: f64, nearest_zero: f64 },
    #[error("bracket failure: {0}")]
    Bracket(String),
    #[error("assembly error: {0}")]
    Assembly(String),
    #[error("accuracy error: {0}")]
    Accuracy(String),
    #[error("rank error: {0}")]
    Rank(String),
    #[error("no eigenvalue: {0}")]
    NoEigenvalue(String),
    #[error("linear algebra failure: {0}")]
    LinAlg(String),
    #[error("config line {line}: {msg}")]
    Config { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
