use thiserror::Error;

/// Errors raised by the laboratory.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("point ({x}, {y}) lies outside the square [0, {side}]^2")]
    OutOfDomain { x: f64, y: f64, side: f64 },
    #[error("grid mismatch between operands")]
    GridMismatch,
    #[error("vortex degrees sum to {0} on the torus; a periodic phase needs a balanced configuration")]
    DegreesUnbalanced(i64),
    #[error("vortices {0} and {1} are closer than 4 eps")]
    VorticesTooClose(usize, usize),
    #[error("{0} is not supported on this geometry")]
    UnsupportedOnGeometry(&'static str),
    #[error("blowup at step {step} (t = {time}): max |u| = {max_modulus}")]
    Blowup {
        step: usize,
        time: f64,
        max_modulus: f64,
    },
    #[error("time step {dt} exceeds the stability cap {dt_max}")]
    UnstableTimeStep { dt: f64, dt_max: f64 },
    #[error("ledger needs a trajectory stored at every step")]
    LedgerNeedsFullResolution,
    #[error("wrong forcing family: expected {0}")]
    WrongForcingFamily(&'static str),
    #[error("vortices {0} and {1} coincide")]
    CoincidentVortices(usize, usize),
    #[error("track mismatch: {0} PDE vortices vs {1} point vortices at t = 0")]
    TrackMismatch(usize, usize),
    #[error("ensemble needs at least {needed} seeds, got {got}")]
    TooFewSeeds { needed: usize, got: usize },
    #[error("{0} seed(s) blew up; see manifest.json")]
    BlowupSeeds(usize),
    #[error("config: {0}")]
    Config(String),
    #[error("schema: {0}")]
    Schema(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
