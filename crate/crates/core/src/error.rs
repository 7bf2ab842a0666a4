use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("point ({re}, {im}) is outside the {what}")]
    OutsideDomain { re: f64, im: f64, what: &'static str },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error: {0}")]
    Serialize(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn outside<T: crate::Real>(w: crate::Point<T>, what: &'static str) -> Self {
        Error::OutsideDomain {
            re: w.re.as_f64(),
            im: w.im.as_f64(),
            what,
        }
    }
}
