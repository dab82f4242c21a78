use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("multiplet enumeration exceeds bound of {bound} entries (order cap {order_cap}, {components} components)")]
    EnumerationOverflow {
        bound: usize,
        order_cap: u32,
        components: usize,
    },

    #[error("invalid input: {0}")]
    Input(String),

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("spectrum error: {0}")]
    Spectrum(String),

    #[error("identification failed after testing up to {max_n} frequencies; best candidate {best:?} at congruence {best_congruence:.1}%")]
    IdentificationFailure {
        max_n: usize,
        best: Vec<f64>,
        best_congruence: f64,
    },

    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("config parse error: {0}")]
    Toml(#[from] toml::de::Error),

    #[error("config serialization error: {0}")]
    TomlSer(#[from] toml::ser::Error),
}

impl Error {
    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
