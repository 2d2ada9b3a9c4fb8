use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("degenerate geometry: {0}")]
    Geometry(String),

    #[error("direction lies behind the array (azimuth {azimuth:.4} rad, elevation {elevation:.4} rad)")]
    BackHemisphere { azimuth: f64, elevation: f64 },

    #[error("zero channel: {0}")]
    ZeroChannel(String),

    #[error("RIS optimizer: {0}")]
    Optimizer(String),

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("plot timestamps must increase (got {earlier} then {later})")]
    NonIncreasingTime { earlier: f64, later: f64 },

    #[error("trial {trial}: {source}")]
    Trial {
        trial: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("malformed data: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
