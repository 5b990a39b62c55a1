use thiserror::Error;

/// Errors produced by the planner, its solvers and its file formats.
#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate scene: target cloud is empty")]
    EmptyCloud,

    #[error("invalid point cloud: {0}")]
    InvalidCloud(String),

    #[error("joint {joint} = {value} is outside its limits [{min}, {max}]")]
    JointLimit {
        joint: usize,
        value: f64,
        min: f64,
        max: f64,
    },

    #[error("joint vector has {got} entries, the model has {expected} actuated joints")]
    JointCount { expected: usize, got: usize },

    #[error("invalid hand model: {0}")]
    HandModel(String),

    #[error("palm system is underdetermined: {rows} residual rows, at least 6 required")]
    Underdetermined { rows: usize },

    #[error("no contact: {0}")]
    NoContact(String),

    #[error("PLY parse error (line {line}): {msg}")]
    Ply { line: usize, msg: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unsupported schema version {found}, expected {expected}")]
    SchemaVersion { found: u32, expected: u32 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    TomlDe(#[from] toml::de::Error),

    #[error(transparent)]
    TomlSer(#[from] toml::ser::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
