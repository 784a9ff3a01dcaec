use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("input error: {0}")]
    Input(String),
    #[error("input error at row {row}: {msg}")]
    Row { row: usize, msg: String },
    #[error("degenerate clusters: {0}")]
    DegenerateClusters(String),
    #[error("undefined metric: {0}")]
    UndefinedMetric(String),
    #[error("numerical error in {layer}: {msg}")]
    Numerical { layer: String, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub fn numerical(layer: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Numerical {
            layer: layer.into(),
            msg: msg.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
