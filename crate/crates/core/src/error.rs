use thiserror::Error;

#[derive(Debug, Error)]
pub enum RenderError {
    #[error("text is empty")]
    EmptyText,
    #[error("text length {0} exceeds maximum {1}")]
    TextTooLong(usize, usize),
    #[error("character {0:?} not covered by font {1}")]
    CharNotInFont(char, u32),
    #[error("character {0:?} not in configured charset")]
    CharNotInCharset(char),
    #[error("unknown font id {0}")]
    UnknownFont(u32),
    #[error("style field {field} out of range: {value}")]
    InvalidStyle { field: &'static str, value: f64 },
    #[error("corpus is empty")]
    CorpusEmpty,
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("manifest: {0}")]
    Manifest(#[from] serde_json::Error),
}

#[derive(Debug, Error)]
pub enum DataError {
    #[error("character {0:?} not in charset")]
    UnknownChar(char),
    #[error("text length {0} exceeds maximum encodable length {1}")]
    TooLong(usize, usize),
    #[error("cutout width {0} exceeds image width {1}")]
    WidthExceedsImage(usize, usize),
    #[error("manifest for the {0} split is empty")]
    EmptyManifest(&'static str),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("render: {0}")]
    Render(#[from] RenderError),
    #[error("image: {0}")]
    Image(String),
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },
    #[error("checkpoint config hash mismatch: checkpoint {found}, current {expected}")]
    CheckpointMismatch { expected: String, found: String },
    #[error("checkpoint format: {0}")]
    CheckpointFormat(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("meta: {0}")]
    Meta(#[from] serde_json::Error),
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("non-finite gradient in {tensor} at iteration {iter}")]
    NonFiniteGradient { tensor: String, iter: u64 },
    #[error("non-finite loss at iteration {iter}; batch synth ids {synth_ids:?}, real ids {real_ids:?}")]
    NonFiniteLoss {
        iter: u64,
        synth_ids: Vec<usize>,
        real_ids: Vec<usize>,
    },
    #[error("data: {0}")]
    Data(#[from] DataError),
    #[error("model: {0}")]
    Model(#[from] ModelError),
    #[error("render: {0}")]
    Render(#[from] RenderError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("input list is empty")]
    EmptyInput,
    #[error("need at least {need} content variants, got {got}")]
    TooFewVariants { need: usize, got: usize },
    #[error("grid too small: need at least {need}x{need}, got {rows}x{cols}")]
    GridTooSmall { need: usize, rows: usize, cols: usize },
    #[error("covariance remained non-positive-semidefinite after regularization")]
    DegenerateCovariance,
    #[error("feature sets must share dimensionality: {0} vs {1}")]
    DimMismatch(usize, usize),
    #[error("model: {0}")]
    Model(#[from] ModelError),
    #[error("render: {0}")]
    Render(#[from] RenderError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}
